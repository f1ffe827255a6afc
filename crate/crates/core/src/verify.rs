//! Seeded property suites: pointwise kernels, manufactured fields against
//! finite differences, quadrature and mesh invariants, and whole-solver
//! identities. Each suite returns a [`Check`]; none of them panics on a
//! failed property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::Assembler;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::fem::{ReferenceTables, TaylorHoodSpace};
use crate::mesh::Mesh;
use crate::mms::{ExactSolution, MmsConfig, PowerLawSolution, PressureCase};
use crate::nfunc::{self, ExponentField, StressParams, Tensor2};
use crate::quadrature::{self, SUPPORTED_DEGREES};
use crate::stepper::integration_by_parts_sides;
use crate::study::run_study;

/// Outcome of one property suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }
}

pub const HAMMER_BRACKET: (f64, f64) = (1.0 / 64.0, 64.0);
pub const DUALITY_BRACKET: (f64, f64) = (1.0 / 16.0, 16.0);
pub const PERTURBATION_CONSTANT: f64 = 100.0;
const DELTAS: [f64; 3] = [0.0, 1e-4, 1.0];

/// Uniform sample from the ball of radius `r` in 2x2 matrices (Frobenius).
fn random_tensor(rng: &mut ChaCha8Rng, r: f64) -> Tensor2 {
    loop {
        let a = Tensor2([0, 1, 2, 3].map(|_| rng.random_range(-1.0..1.0)));
        let n = a.norm();
        if n > 0.0 && n <= 1.0 {
            return a.scale(r);
        }
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> StressParams {
    StressParams {
        nu0: 1.0,
        delta: DELTAS[rng.random_range(0..DELTAS.len())],
    }
}

/// Extremes of `(S(A)-S(B)):(A-B) / |F(A)-F(B)|^2` over `samples` draws.
pub fn hammer_ratio_range(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut taken = 0;
    while taken < samples {
        let params = random_params(&mut rng);
        let p = rng.random_range(1.5..=3.5);
        let a = random_tensor(&mut rng, 10.0);
        let b = random_tensor(&mut rng, 10.0);
        let df = nfunc::tensor_f(&params, p, &a) - nfunc::tensor_f(&params, p, &b);
        let den = df.ddot(&df);
        let scale = a.norm().max(b.norm()).powi(2).max(1e-300);
        if den <= 1e-20 * scale {
            continue;
        }
        let num = (nfunc::stress(&params, p, &a) - nfunc::stress(&params, p, &b)).ddot(&(a - b));
        let r = num / den;
        lo = lo.min(r);
        hi = hi.max(r);
        taken += 1;
    }
    (lo, hi)
}

/// Ratio bracket at `samples` draws, with the extremes at a tenth of the
/// draws reported to show stabilization.
pub fn hammer_equivalence(samples: usize, seed: u64) -> Check {
    let (lo_small, hi_small) = hammer_ratio_range(samples / 10, seed);
    let (lo, hi) = hammer_ratio_range(samples, seed);
    let ok = lo >= HAMMER_BRACKET.0 && hi <= HAMMER_BRACKET.1;
    Check::new(
        "hammer_equivalence",
        ok,
        format!(
            "{samples} samples: ratio in [{lo:.4}, {hi:.4}] ({} samples: [{lo_small:.4}, {hi_small:.4}]), bracket [1/64, 64]",
            samples / 10
        ),
    )
}

pub fn stress_monotonicity(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..samples {
        let params = random_params(&mut rng);
        let p = rng.random_range(1.5..=3.5);
        let a = random_tensor(&mut rng, 10.0);
        let b = random_tensor(&mut rng, 10.0);
        if (a.sym() - b.sym()).norm() == 0.0 {
            continue;
        }
        let v = (nfunc::stress(&params, p, &a) - nfunc::stress(&params, p, &b)).ddot(&(a - b));
        worst = worst.min(v);
        if v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            violations += 1;
        }
    }
    Check::new(
        "stress_monotonicity",
        violations == 0,
        format!("{samples} samples, {violations} violations, min (S(A)-S(B)):(A-B) = {worst:.3e}"),
    )
}

/// Pointwise stress Jacobian against central differences of the stress.
pub fn stress_jacobian_fd(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let params = StressParams {
            nu0: 1.0,
            delta: [1e-4, 1.0][rng.random_range(0..2)],
        };
        let p = rng.random_range(1.5..=3.5);
        let a = random_tensor(&mut rng, 10.0);
        let dir = random_tensor(&mut rng, 1.0);
        let h = 1e-6 * (1.0 + a.norm());
        let fd = (nfunc::stress(&params, p, &(a + dir.scale(h))) - nfunc::stress(&params, p, &(a - dir.scale(h))))
            .scale(0.5 / h);
        let jv = nfunc::stress_jacobian(&params, p, &a).apply(&dir);
        let rel = (fd - jv).norm() / jv.norm().max(1e-300);
        worst = worst.max(rel);
    }
    Check::new(
        "stress_jacobian_fd",
        worst <= 1e-5,
        format!("{samples} samples, max relative deviation {worst:.2e} (limit 1e-5)"),
    )
}

fn power_solution(p_minus: f64, alpha: f64, case: PressureCase) -> Result<PowerLawSolution> {
    PowerLawSolution::new(MmsConfig {
        exponent: ExponentField::new(p_minus, p_minus + 1.0, alpha, 0.1)?,
        stress: StressParams::default(),
        beta: alpha,
        gamma: alpha,
        case,
    })
}

/// Assembled residual derivative against the assembled Jacobian on a level-1
/// mesh, in a random direction with zero boundary part.
pub fn assembled_jacobian_fd(seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = TaylorHoodSpace::new(Mesh::unit_square_level(1));
    let mut worst = 0.0f64;
    for (p_minus, alpha) in [(1.75, 1.0), (2.25, 0.75), (2.5, 0.5)] {
        let problem = power_solution(p_minus, alpha, PressureCase::One)?.into_problem();
        let asm = Assembler::new(&space, ReferenceTables::new(quadrature::rule(6)?), problem.stress);
        let slab = asm.slab_data(&problem, 0.075, 0.025)?;
        let mut random = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let mut state = random(space.n_total());
        asm.impose_boundary(&slab, &mut state);
        let prev = random(space.n_total());
        let mut dir = random(space.n_total());
        for &d in asm.boundary_dofs() {
            dir[d] = 0.0;
        }
        let jv = asm.jacobian(&slab, &state).matvec(&dir);
        let h = 1e-6;
        let shifted = |s: f64| -> Vec<f64> { state.iter().zip(&dir).map(|(x, d)| x + s * h * d).collect() };
        let rp = asm.residual(&slab, &prev, &shifted(1.0));
        let rm = asm.residual(&slab, &prev, &shifted(-1.0));
        let err: f64 = rp
            .iter()
            .zip(&rm)
            .zip(&jv)
            .map(|((a, b), j)| ((a - b) / (2.0 * h) - j).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = jv.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Ok(Check::new(
        "assembled_jacobian_fd",
        worst <= 1e-5,
        format!("level 1, three exponent fields, max relative deviation {worst:.2e} (limit 1e-5)"),
    ))
}

/// Analytic time derivative and gradient of the manufactured velocity, and
/// the exponent gradient, against central differences away from the origin.
pub fn manufactured_derivatives_fd(samples: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let rel = |fd: &[f64], exact: &[f64]| -> f64 {
        let e: f64 = fd.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let s: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        e / s.max(1e-12)
    };
    for i in 0..samples {
        let p_minus = [1.5, 1.75, 2.0, 2.25, 2.5][i % 5];
        let alpha = [1.0, 0.75, 0.5][(i / 5) % 3];
        let case = if p_minus >= 2.0 && i % 2 == 1 {
            PressureCase::Two
        } else {
            PressureCase::One
        };
        let sol = power_solution(p_minus, alpha, case)?;
        let t = rng.random_range(0.01..0.1);
        let x = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
        let h = 1e-6;

        let vp = sol.velocity(t + h, x)?;
        let vm = sol.velocity(t - h, x)?;
        let dt_fd = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
        worst = worst.max(rel(&dt_fd, &sol.velocity_dt(t, x)?));

        let mut grad_fd = [0.0; 4];
        for j in 0..2 {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (a, b) = (sol.velocity(t, xp)?, sol.velocity(t, xm)?);
            for c in 0..2 {
                grad_fd[2 * c + j] = (a[c] - b[c]) / (2.0 * h);
            }
        }
        worst = worst.max(rel(&grad_fd, &sol.velocity_grad(t, x)?.0));

        let field = sol.cfg.exponent;
        let mut pg_fd = [0.0; 2];
        for (j, g) in pg_fd.iter_mut().enumerate() {
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            *g = (field.eval(t, xp) - field.eval(t, xm)) / (2.0 * h);
        }
        worst = worst.max(rel(&pg_fd, &field.grad(t, x)?));
    }
    Ok(Check::new(
        "manufactured_derivatives_fd",
        worst <= 1e-5,
        format!("{samples} points, max relative deviation {worst:.2e} (limit 1e-5)"),
    ))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Every supported rule integrates all monomials up to its degree exactly.
pub fn quadrature_exactness() -> Result<Check> {
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &deg in &SUPPORTED_DEGREES {
        let rule = quadrature::rule(deg)?;
        let mut rule_worst = 0.0f64;
        for i in 0..=deg {
            for j in 0..=deg - i {
                let exact = factorial(i) * factorial(j) / factorial(i + j + 2);
                let got = rule.integrate_reference(|x| x[0].powi(i as i32) * x[1].powi(j as i32));
                rule_worst = rule_worst.max((got - exact).abs() / exact);
            }
        }
        rows.push(format!("degree {deg} ({} points): {rule_worst:.1e}", rule.len()));
        worst = worst.max(rule_worst);
    }
    Ok(Check::new(
        "quadrature_exactness",
        worst <= 1e-13,
        format!("max relative monomial error by rule: {}", rows.join("; ")),
    ))
}

/// Euler relation, element and boundary-edge counts and mesh size at levels
/// `0..=max_level`.
pub fn mesh_relations(max_level: usize) -> Check {
    let mut failures = Vec::new();
    let mut mesh = Mesh::unit_square();
    for level in 0..=max_level {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let (v, e, t) = (mesh.num_vertices() as i64, mesh.num_edges() as i64, mesh.num_triangles() as i64);
        let boundary = mesh.boundary_edge.iter().filter(|b| **b).count();
        let ok = v - e + t == 1
            && t == 4 << (2 * level)
            && boundary == 4 << level
            && mesh.h == 0.5f64.powi(level as i32)
            && (0..mesh.num_triangles()).all(|k| mesh.area(k) > 0.0);
        if !ok {
            failures.push(format!("level {level}: V={v} E={e} T={t} boundary={boundary} h={}", mesh.h));
        }
    }
    Check::new(
        "mesh_relations",
        failures.is_empty(),
        if failures.is_empty() {
            format!("V - E + T = 1, T = 4^(n+1), boundary edges = 2^(n+2), h = 2^-n for n = 0..={max_level}")
        } else {
            failures.join("; ")
        },
    )
}

/// Discrete integration by parts in time, in the P2 mass inner product.
pub fn integration_by_parts(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = TaylorHoodSpace::new(Mesh::unit_square_level(2));
    let mass = match quadrature::rule(6) {
        Ok(rule) => space.scalar_mass_matrix(&ReferenceTables::new(rule)),
        Err(e) => return Check::new("integration_by_parts", false, e.to_string()),
    };
    let seq: Vec<Vec<f64>> = (0..17)
        .map(|_| (0..space.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut worst = 0.0f64;
    for (m, n) in [(0, 16), (3, 11), (7, 8), (0, 1)] {
        let (lhs, rhs) = integration_by_parts_sides(&mass, &seq, 0.1 / 16.0, m, n);
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()));
    }
    Check::new(
        "integration_by_parts",
        worst <= 1e-12,
        format!("max relative defect {worst:.2e} (limit 1e-12)"),
    )
}

/// Two runs of levels 0..=2 produce bitwise identical reports.
pub fn determinism() -> Result<Check> {
    let cfg = ExperimentConfig {
        p_minus: 2.25,
        max_level: 2,
        ..ExperimentConfig::default()
    };
    let a = run_study(&cfg)?;
    let b = run_study(&cfg)?;
    let bits = |r: &crate::report::ConvergenceReport| -> Vec<u64> {
        r.levels
            .iter()
            .flat_map(|l| l.errors.as_array().map(f64::to_bits).into_iter().chain([l.phistar_modular.to_bits()]))
            .collect()
    };
    let same = a.is_complete() && bits(&a) == bits(&b) && a.to_json()? == b.to_json()?;
    Ok(Check::new(
        "determinism",
        same,
        format!("{}, levels 0..=2, repeated run bitwise equal: {same}", cfg.label()),
    ))
}

/// Numerical Legendre transform `sup_s (r s - psi(s))` of a convex `psi`
/// with `psi(0) = 0`, by a logarithmic scan followed by golden sections.
pub fn legendre_transform(psi: impl Fn(f64) -> f64, r: f64) -> f64 {
    let f = |s: f64| r * s - psi(s);
    let n = 2000;
    let (lo, hi) = (1e-12f64.ln(), 1e8f64.ln());
    let grid = |i: usize| (lo + (hi - lo) * i as f64 / n as f64).exp();
    let (mut best, mut best_i) = (0.0f64, None);
    for i in 0..=n {
        let v = f(grid(i));
        if v > best {
            best = v;
            best_i = Some(i);
        }
    }
    let Some(i) = best_i else { return 0.0 };
    let (mut a, mut b) = (grid(i.saturating_sub(1)), grid((i + 1).min(n)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

/// The conjugate surrogate against the numerical conjugate of the shifted
/// surrogate.
pub fn conjugate_duality(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let params = random_params(&mut rng);
        let p = rng.random_range(1.5..=3.5);
        let a = rng.random_range(0.0..10.0);
        let r = 10f64.powf(rng.random_range(-3.0..2.0));
        let exact = legendre_transform(|s| nfunc::phi_shift(&params, p, a, s), r);
        let surrogate = nfunc::phi_shift_conj(&params, p, a, r);
        let q = surrogate / exact;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    Check::new(
        "conjugate_duality",
        lo >= DUALITY_BRACKET.0 && hi <= DUALITY_BRACKET.1,
        format!("{samples} samples: ratio in [{lo:.4}, {hi:.4}], bracket [1/16, 16]"),
    )
}

/// `|F(p1,A) - F(p2,A)|^2 <= C |p1-p2|^2 (1 + |A|^(1.1 p1))`.
pub fn exponent_perturbation(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let params = random_params(&mut rng);
        let p1: f64 = rng.random_range(2.0..=3.5);
        let p2 = (p1 + rng.random_range(-0.1..=0.1)).clamp(2.0, 3.5);
        if p1 == p2 {
            continue;
        }
        let a = random_tensor(&mut rng, 10.0);
        let d = nfunc::tensor_f(&params, p1, &a) - nfunc::tensor_f(&params, p2, &a);
        let bound = (p1 - p2).powi(2) * (1.0 + a.sym().norm().powf(1.1 * p1));
        worst = worst.max(d.ddot(&d) / bound);
    }
    Check::new(
        "exponent_perturbation",
        worst <= PERTURBATION_CONSTANT,
        format!("{samples} samples, max |dF|^2 / (|dp|^2 (1 + |A|^(1.1 p))) = {worst:.3} (limit 100)"),
    )
}

/// All suites, in a fixed order.
pub fn run_all(seed: u64) -> Vec<Check> {
    let lift = |name: &'static str, r: Result<Check>| r.unwrap_or_else(|e| Check::new(name, false, e.to_string()));
    vec![
        hammer_equivalence(100_000, seed),
        stress_monotonicity(100_000, seed.wrapping_add(1)),
        stress_jacobian_fd(10_000, seed.wrapping_add(2)),
        lift("assembled_jacobian_fd", assembled_jacobian_fd(seed.wrapping_add(3))),
        lift("manufactured_derivatives_fd", manufactured_derivatives_fd(300, seed.wrapping_add(4))),
        lift("quadrature_exactness", quadrature_exactness()),
        mesh_relations(5),
        integration_by_parts(seed.wrapping_add(5)),
        lift("determinism", determinism()),
        conjugate_duality(2_000, seed.wrapping_add(6)),
        exponent_perturbation(100_000, seed.wrapping_add(7)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_of_quadratic() {
        // (s^2)* (r) = r^2 / 4
        for r in [0.1, 1.0, 7.5] {
            let v = legendre_transform(|s| s * s, r);
            assert!((v - r * r / 4.0).abs() <= 1e-10 * r * r, "{r}: {v}");
        }
    }

    #[test]
    fn legendre_of_power() {
        // (s^p)* (r) = (p - 1) (r / p)^p'
        let p: f64 = 3.0;
        let pc = p / (p - 1.0);
        for r in [0.01, 2.0, 50.0] {
            let v = legendre_transform(|s| s.powf(p), r);
            let exact = (p - 1.0) * (r / p).powf(pc);
            assert!((v / exact - 1.0).abs() < 1e-9, "{r}: {v} vs {exact}");
        }
    }

    #[test]
    fn small_suites_pass() {
        assert!(hammer_equivalence(2_000, 1).passed);
        assert!(stress_monotonicity(2_000, 2).passed);
        assert!(stress_jacobian_fd(500, 3).passed);
        assert!(quadrature_exactness().unwrap().passed);
        assert!(mesh_relations(3).passed);
        assert!(integration_by_parts(4).passed);
        assert!(exponent_perturbation(2_000, 5).passed);
    }
}
