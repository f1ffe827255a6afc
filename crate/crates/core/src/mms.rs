//! Manufactured solutions and the right-hand side that makes them exact.
//!
//! For an exact pair `(v, q)` the data are `g := d_t v` and
//! `G := S(t, x, D_x v) - q I`, so that `g + div G = d_t v - div S + grad q`
//! holds in the weak sense and no second derivatives are ever needed.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nfunc::{self, norm2, ExponentField, Point, StressParams, Tensor2};
use crate::quadrature::{self, QuadRule};

/// Refinement level of the mesh used for the pressure mean.
pub const MEAN_MESH_LEVEL: usize = 6;
/// Quadrature degree used for the pressure mean.
pub const MEAN_QUAD_DEGREE: usize = 8;

/// An exact velocity/pressure pair on the space-time cylinder.
pub trait ExactSolution: Sync {
    fn velocity(&self, t: f64, x: Point) -> Result<[f64; 2]>;
    /// Full spatial gradient, `grad[i][j] = d_j v_i` (row-major).
    fn velocity_grad(&self, t: f64, x: Point) -> Result<Tensor2>;
    fn velocity_dt(&self, t: f64, x: Point) -> Result<[f64; 2]>;
    fn pressure(&self, t: f64, x: Point) -> Result<f64>;

    /// Symmetric gradient `D_x v`.
    fn velocity_sym_grad(&self, t: f64, x: Point) -> Result<Tensor2> {
        Ok(self.velocity_grad(t, x)?.sym())
    }
}

/// Exponent field, stress law and exact solution: everything needed to set up
/// and verify one run.
pub struct Problem<S> {
    pub exponent: ExponentField,
    pub stress: StressParams,
    pub solution: S,
}

impl<S: ExactSolution> Problem<S> {
    /// Volume force `g = d_t v`.
    pub fn rhs_g(&self, t: f64, x: Point) -> Result<[f64; 2]> {
        self.solution.velocity_dt(t, x)
    }

    /// Flux `G = S(t, x, D_x v) - q I`, evaluated with the continuous exponent.
    #[allow(non_snake_case)]
    pub fn rhs_G(&self, t: f64, x: Point) -> Result<Tensor2> {
        let p = self.exponent.eval(t, x);
        let dv = self.solution.velocity_grad(t, x)?;
        let q = self.solution.pressure(t, x)?;
        Ok(nfunc::stress(&self.stress, p, &dv) - Tensor2::IDENTITY.scale(q))
    }
}

/// Pressure family selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureCase {
    /// `rho_q = gamma - 2/p' + delta`.
    #[serde(rename = "1")]
    One,
    /// `rho_q = rho_v (p - 2)/2 + gamma + 0.01`; needs `p_minus >= 2`.
    #[serde(rename = "2")]
    Two,
}

impl PressureCase {
    pub fn from_index(i: u32) -> Result<Self> {
        match i {
            1 => Ok(PressureCase::One),
            2 => Ok(PressureCase::Two),
            _ => Err(Error::Config(format!("case must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(&self) -> u32 {
        match self {
            PressureCase::One => 1,
            PressureCase::Two => 2,
        }
    }
}

/// Parameters of the radial power-type manufactured pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmsConfig {
    pub exponent: ExponentField,
    pub stress: StressParams,
    pub beta: f64,
    pub gamma: f64,
    pub case: PressureCase,
}

impl MmsConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.case == PressureCase::Two && self.exponent.p_minus < 2.0 {
            return Err(Error::Config(format!(
                "case 2 requires p_minus >= 2, got {}",
                self.exponent.p_minus
            )));
        }
        Ok(())
    }
}

/// `v = 0.1 t |x|^rho_v (x2, -x1)`, `q = 100 t (|x|^rho_q - <|.|^rho_q>)`.
pub struct PowerLawSolution {
    pub cfg: MmsConfig,
    mean_cache: RwLock<HashMap<u64, f64>>,
    mean_mesh: OnceLock<(Mesh, QuadRule)>,
}

impl PowerLawSolution {
    pub fn new(cfg: MmsConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(PowerLawSolution {
            cfg,
            mean_cache: RwLock::new(HashMap::new()),
            mean_mesh: OnceLock::new(),
        })
    }

    /// Builds the [`Problem`] wrapping this solution.
    pub fn into_problem(self) -> Problem<Self> {
        Problem {
            exponent: self.cfg.exponent,
            stress: self.cfg.stress,
            solution: self,
        }
    }

    #[inline]
    fn p(&self, t: f64, x: Point) -> f64 {
        self.cfg.exponent.eval(t, x)
    }

    /// `rho_v = 2 (beta - 1) / p + delta`.
    pub fn rho_v(&self, t: f64, x: Point) -> f64 {
        2.0 * (self.cfg.beta - 1.0) / self.p(t, x) + self.cfg.stress.delta
    }

    /// `d rho_v / d p`.
    #[inline]
    fn drho_v_dp(&self, p: f64) -> f64 {
        -2.0 * (self.cfg.beta - 1.0) / (p * p)
    }

    pub fn rho_q(&self, t: f64, x: Point) -> f64 {
        let p = self.p(t, x);
        match self.cfg.case {
            PressureCase::One => {
                self.cfg.gamma - 2.0 / nfunc::conjugate_exponent(p) + self.cfg.stress.delta
            }
            PressureCase::Two => self.rho_v(t, x) * (p - 2.0) / 2.0 + self.cfg.gamma + 0.01,
        }
    }

    fn radial_power(r: f64, rho: f64) -> Result<f64> {
        if r > 0.0 {
            Ok(r.powf(rho))
        } else if rho > 0.0 {
            Ok(0.0)
        } else if rho == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::Domain(format!("|x|^{rho} at the origin")))
        }
    }

    /// `<|.|^rho_q(t, .)>` over the unit square, cached per time value.
    pub fn pressure_mean(&self, t: f64) -> f64 {
        let key = t.to_bits();
        if let Some(&m) = self.mean_cache.read().expect("mean cache poisoned").get(&key) {
            return m;
        }
        let (mesh, rule) = self.mean_mesh.get_or_init(|| {
            (
                Mesh::unit_square_level(MEAN_MESH_LEVEL),
                quadrature::rule(MEAN_QUAD_DEGREE).expect("supported degree"),
            )
        });
        let mean = quadrature::integrate_mesh(mesh, rule, |x| norm2(x).powf(self.rho_q(t, x)));
        self.mean_cache
            .write()
            .expect("mean cache poisoned")
            .insert(key, mean);
        mean
    }

    /// Fills the mean cache for the given times.
    pub fn precompute_means(&self, times: &[f64]) {
        for &t in times {
            if t != 0.0 {
                self.pressure_mean(t);
            }
        }
    }

    /// `div v`; vanishes because `rho_v` depends on `x` only through `|x|`.
    pub fn divergence(&self, t: f64, x: Point) -> Result<f64> {
        Ok(self.velocity_grad(t, x)?.trace())
    }
}

impl ExactSolution for PowerLawSolution {
    fn velocity(&self, t: f64, x: Point) -> Result<[f64; 2]> {
        let rho = self.rho_v(t, x);
        let r = norm2(x);
        if r == 0.0 {
            if rho > -1.0 {
                return Ok([0.0, 0.0]);
            }
            return Err(Error::Domain(format!("velocity at the origin with rho_v = {rho}")));
        }
        let c = 0.1 * t * r.powf(rho);
        Ok([c * x[1], -c * x[0]])
    }

    fn velocity_grad(&self, t: f64, x: Point) -> Result<Tensor2> {
        let r = norm2(x);
        if r == 0.0 {
            return Err(Error::Domain("velocity gradient at the origin".into()));
        }
        let p = self.p(t, x);
        let rho = self.rho_v(t, x);
        let grad_p = self.cfg.exponent.grad(t, x)?;
        let dr = self.drho_v_dp(p);
        let grad_rho = [dr * grad_p[0], dr * grad_p[1]];
        let pow = r.powf(rho);
        let ln_r = r.ln();
        // grad(|x|^rho) = |x|^rho (ln|x| grad rho + rho x / |x|^2)
        let gpow = [
            pow * (ln_r * grad_rho[0] + rho * x[0] / (r * r)),
            pow * (ln_r * grad_rho[1] + rho * x[1] / (r * r)),
        ];
        let w = [x[1], -x[0]];
        let c = 0.1 * t;
        Ok(Tensor2([
            c * (w[0] * gpow[0]),
            c * (pow + w[0] * gpow[1]),
            c * (-pow + w[1] * gpow[0]),
            c * (w[1] * gpow[1]),
        ]))
    }

    fn velocity_dt(&self, t: f64, x: Point) -> Result<[f64; 2]> {
        let r = norm2(x);
        let rho = self.rho_v(t, x);
        if r == 0.0 {
            if rho > -1.0 {
                return Ok([0.0, 0.0]);
            }
            return Err(Error::Domain("velocity time derivative at the origin".into()));
        }
        let p = self.p(t, x);
        let drho_dt = self.drho_v_dp(p) * self.cfg.exponent.dt(x);
        let pow = r.powf(rho);
        let c = 0.1 * pow * (1.0 + t * r.ln() * drho_dt);
        Ok([c * x[1], -c * x[0]])
    }

    fn pressure(&self, t: f64, x: Point) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let val = Self::radial_power(norm2(x), self.rho_q(t, x))?;
        Ok(100.0 * t * (val - self.pressure_mean(t)))
    }
}

/// `v = t (x1^2, -2 x1 x2)`, `q = t (x1 - 1/2)`: divergence free, in P2 x P1,
/// linear in time. With `p = 2` the discrete scheme reproduces it exactly.
#[derive(Clone, Copy, Debug, Default)]
pub struct PolynomialStokesSolution;

impl ExactSolution for PolynomialStokesSolution {
    fn velocity(&self, t: f64, x: Point) -> Result<[f64; 2]> {
        Ok([t * x[0] * x[0], -2.0 * t * x[0] * x[1]])
    }

    fn velocity_grad(&self, t: f64, x: Point) -> Result<Tensor2> {
        Ok(Tensor2([
            2.0 * t * x[0],
            0.0,
            -2.0 * t * x[1],
            -2.0 * t * x[0],
        ]))
    }

    fn velocity_dt(&self, _t: f64, x: Point) -> Result<[f64; 2]> {
        Ok([x[0] * x[0], -2.0 * x[0] * x[1]])
    }

    fn pressure(&self, t: f64, x: Point) -> Result<f64> {
        Ok(t * (x[0] - 0.5))
    }
}

/// Problem for [`PolynomialStokesSolution`]: constant exponent 2, `delta = 0`, `nu0 = 1`.
pub fn polynomial_stokes_problem(final_time: f64) -> Result<Problem<PolynomialStokesSolution>> {
    Ok(Problem {
        exponent: ExponentField::constant(2.0, final_time)?,
        stress: StressParams::new(1.0, 0.0)?,
        solution: PolynomialStokesSolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(p_minus: f64, alpha: f64, beta: f64, gamma: f64, delta: f64, case: PressureCase) -> MmsConfig {
        MmsConfig {
            exponent: ExponentField::new(p_minus, p_minus + 1.0, alpha, 0.1).unwrap(),
            stress: StressParams { nu0: 1.0, delta },
            beta,
            gamma,
            case,
        }
    }

    #[test]
    fn rho_v_examples() {
        let s = PowerLawSolution::new(cfg(2.0, 1.0, 1.0, 1.0, 1e-4, PressureCase::One)).unwrap();
        assert_eq!(s.rho_v(0.05, [0.3, 0.4]), 1e-4);
        // constant p = 2
        let mut c = cfg(2.0, 1.0, 0.5, 1.0, 0.0, PressureCase::One);
        c.exponent = ExponentField::constant(2.0, 0.1).unwrap();
        let s = PowerLawSolution::new(c).unwrap();
        assert_relative_eq!(s.rho_v(0.0, [0.5, 0.5]), -0.5, epsilon = 1e-15);
        let s = PowerLawSolution::new(cfg(2.0, 1.0, 0.75, 1.0, 1e-4, PressureCase::One)).unwrap();
        assert_relative_eq!(s.rho_v(0.0, [0.0, 0.0]), -1.0 / 6.0 + 1e-4, epsilon = 1e-15);
    }

    #[test]
    fn velocity_examples() {
        let s = PowerLawSolution::new(cfg(2.0, 1.0, 1.0, 1.0, 0.0, PressureCase::One)).unwrap();
        assert_eq!(s.velocity(0.0, [0.3, 0.2]).unwrap(), [0.0, 0.0]);
        let v = s.velocity(0.1, [1.0, 0.0]).unwrap();
        assert_relative_eq!(v[0], 0.0, epsilon = 1e-16);
        assert_relative_eq!(v[1], -0.01, epsilon = 1e-16);
        let v = s.velocity(0.04, [0.2, 0.7]).unwrap();
        assert_relative_eq!(v[0], 0.004 * 0.7, epsilon = 1e-16);
        // beta = 1, delta = 0: rigid rotation, symmetric gradient vanishes
        let d = s.velocity_sym_grad(0.07, [0.3, 0.9]).unwrap();
        assert!(d.norm() < 1e-16);
        let g = s.rhs_g_direct(0.03, [0.4, 0.1]);
        assert_relative_eq!(g[0], 0.1 * 0.1, epsilon = 1e-15);
        assert_relative_eq!(g[1], -0.1 * 0.4, epsilon = 1e-15);
    }

    impl PowerLawSolution {
        fn rhs_g_direct(&self, t: f64, x: Point) -> [f64; 2] {
            self.velocity_dt(t, x).unwrap()
        }
    }

    #[test]
    fn rho_q_examples() {
        let mut c = cfg(2.0, 1.0, 1.0, 1.0, 0.0, PressureCase::One);
        c.exponent = ExponentField::constant(2.0, 0.1).unwrap();
        let s = PowerLawSolution::new(c).unwrap();
        assert_relative_eq!(s.rho_q(0.05, [0.2, 0.3]), 0.0, epsilon = 1e-15);
        let mut c2 = cfg(2.0, 1.0, 1.0, 0.5, 0.0, PressureCase::Two);
        c2.exponent = ExponentField::new(2.0, 3.0, 1.0, 0.1).unwrap();
        let s = PowerLawSolution::new(c2).unwrap();
        assert_relative_eq!(s.rho_q(0.05, [0.2, 0.3]), 0.51, epsilon = 1e-15);
        let mut c3 = cfg(2.0, 1.0, 1.0, 0.5, 0.0, PressureCase::One);
        c3.exponent = ExponentField::constant(2.0, 0.1).unwrap();
        let s = PowerLawSolution::new(c3).unwrap();
        assert_relative_eq!(s.rho_q(0.0, [0.6, 0.1]), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn case_two_needs_large_exponent() {
        let err = PowerLawSolution::new(cfg(1.5, 1.0, 1.0, 1.0, 1e-4, PressureCase::Two));
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn pressure_zero_mean_and_trivial_cases() {
        let s = PowerLawSolution::new(cfg(2.25, 0.75, 0.75, 0.75, 1e-4, PressureCase::One)).unwrap();
        assert_eq!(s.pressure(0.0, [0.3, 0.3]).unwrap(), 0.0);
        let t = 0.1;
        let mesh = Mesh::unit_square_level(MEAN_MESH_LEVEL);
        let rule = quadrature::rule(MEAN_QUAD_DEGREE).unwrap();
        let integral = quadrature::try_integrate_mesh(&mesh, &rule, |x| s.pressure(t, x)).unwrap();
        assert!(integral.abs() <= 1e-6 * 100.0 * t, "{integral}");

        // p = 2, gamma = 1, delta = 0: rho_q = 0 and q vanishes
        let mut c = cfg(2.0, 1.0, 1.0, 1.0, 0.0, PressureCase::One);
        c.exponent = ExponentField::constant(2.0, 0.1).unwrap();
        let s = PowerLawSolution::new(c).unwrap();
        assert!(s.pressure(0.07, [0.2, 0.9]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn velocity_is_solenoidal() {
        for case in [PressureCase::One, PressureCase::Two] {
            let s = PowerLawSolution::new(cfg(2.0, 0.5, 0.5, 0.5, 1e-4, case)).unwrap();
            for &x in &[[0.1, 0.9], [0.5, 0.5], [0.95, 0.02], [1e-3, 2e-3]] {
                let g = s.velocity_grad(0.06, x).unwrap();
                assert!(s.divergence(0.06, x).unwrap().abs() <= 1e-13 * g.norm().max(1.0));
            }
        }
    }

    #[test]
    fn polynomial_solution_rhs() {
        let pb = polynomial_stokes_problem(0.1).unwrap();
        let x = [0.3, 0.8];
        let g = pb.rhs_g(0.05, x).unwrap();
        assert_eq!(g, [0.09, -0.48]);
        let big_g = pb.rhs_G(0.05, x).unwrap();
        let dv = pb.solution.velocity_sym_grad(0.05, x).unwrap();
        let q = pb.solution.pressure(0.05, x).unwrap();
        assert!((big_g - (dv - Tensor2::IDENTITY.scale(q))).norm() < 1e-15);
        assert_eq!(pb.solution.velocity_grad(0.05, x).unwrap().trace(), 0.0);
    }

    #[test]
    fn rhs_flux_reduces_to_pressure_for_rotation() {
        let s = PowerLawSolution::new(cfg(2.0, 1.0, 1.0, 1.0, 0.0, PressureCase::One)).unwrap();
        let pb = s.into_problem();
        let x = [0.3, 0.6];
        let big_g = pb.rhs_G(0.08, x).unwrap();
        let q = pb.solution.pressure(0.08, x).unwrap();
        assert!((big_g + Tensor2::IDENTITY.scale(q)).norm() < 1e-12);
    }
}
