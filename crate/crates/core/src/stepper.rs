//! Backward Euler time loop with a damped Newton solve per step.

use serde::{Deserialize, Serialize};

use crate::assembly::{Assembler, SlabData};
use crate::error::{Error, Result};
use crate::mms::{ExactSolution, Problem};
use crate::sparse::{CscMatrix, SymbolicAnalysis};

/// Uniform grid `t_m = m tau`, `m = 0..=steps`, with `steps = 2^(level+2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub level: usize,
    pub steps: usize,
    pub tau: f64,
    pub final_time: f64,
}

impl TimeGrid {
    pub fn for_level(level: usize, final_time: f64) -> Self {
        let steps = 1usize << (level + 2);
        TimeGrid {
            level,
            steps,
            tau: final_time / steps as f64,
            final_time,
        }
    }

    /// `t_m`; the last node is exactly the final time.
    pub fn node(&self, m: usize) -> f64 {
        if m == self.steps {
            self.final_time
        } else {
            m as f64 * self.tau
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| self.node(m)).collect()
    }
}

/// Stopping and damping parameters of the Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub max_iter: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            max_iter: 50,
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_halvings: 20,
        }
    }
}

/// Statistics of one Newton solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOutcome {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Total number of step halvings over all iterations.
    pub halvings: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton solver bound to one assembler; the symbolic factorization of the
/// Jacobian pattern is computed once and reused.
pub struct NewtonSolver<'a, 's> {
    assembler: &'a Assembler<'s>,
    symbolic: SymbolicAnalysis,
    pub settings: NewtonSettings,
}

impl<'a, 's> NewtonSolver<'a, 's> {
    pub fn new(assembler: &'a Assembler<'s>, settings: NewtonSettings) -> Result<Self> {
        let symbolic = assembler.pattern().analyze()?;
        Ok(NewtonSolver {
            assembler,
            symbolic,
            settings,
        })
    }

    /// Solves the step equations in place, starting from `state`.
    ///
    /// Converged when `|R| <= max(abs_tol, rel_tol |R_0|)`. Each update is
    /// halved until the residual norm decreases; if no trial decreases it, the
    /// smallest trial is taken.
    pub fn solve(
        &self,
        slab: &SlabData,
        v_prev: &[f64],
        state: &mut Vec<f64>,
        step: usize,
    ) -> Result<NewtonOutcome> {
        let asm = self.assembler;
        asm.impose_boundary(slab, state);
        let mut res = asm.residual(slab, v_prev, state);
        let r0 = norm(&res);
        let tol = self.settings.abs_tol.max(self.settings.rel_tol * r0);
        let mut rn = r0;
        let mut halvings = 0;
        let mut iterations = 0;
        while rn > tol {
            if iterations == self.settings.max_iter {
                return Err(Error::NewtonDiverged {
                    step,
                    time: slab.time,
                    iterations,
                    residual: rn,
                });
            }
            iterations += 1;
            let jac: CscMatrix = asm.jacobian(slab, state);
            let rhs: Vec<f64> = res.iter().map(|r| -r).collect();
            let delta = self.symbolic.factor(&jac)?.solve_refined(&rhs)?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for h in 0..=self.settings.max_halvings {
                let trial: Vec<f64> = state.iter().zip(&delta).map(|(s, d)| s + lambda * d).collect();
                let tres = asm.residual(slab, v_prev, &trial);
                let tn = norm(&tres);
                let last = h == self.settings.max_halvings;
                if (tn.is_finite() && tn < rn) || (last && tn.is_finite()) {
                    if !(tn < rn) {
                        log::warn!(
                            "step {step}: no residual decrease after {h} halvings ({rn:.3e} -> {tn:.3e})"
                        );
                    }
                    halvings += h;
                    accepted = Some((trial, tres, tn));
                    break;
                }
                lambda *= 0.5;
            }
            let Some((trial, tres, tn)) = accepted else {
                return Err(Error::NewtonDiverged {
                    step,
                    time: slab.time,
                    iterations,
                    residual: rn,
                });
            };
            *state = trial;
            res = tres;
            rn = tn;
            log::trace!("step {step} iteration {iterations}: |R| = {rn:.3e}");
        }
        Ok(NewtonOutcome {
            iterations,
            initial_residual: r0,
            final_residual: rn,
            halvings,
        })
    }
}

/// What the time loop reports after each step.
pub struct StepView<'a> {
    pub step: usize,
    pub time: f64,
    pub tau: f64,
    /// Full unknown vector `(v, q, lambda)` at `t_m`.
    pub state: &'a [f64],
    pub frozen_p: &'a [f64],
    pub newton: NewtonOutcome,
}

/// Iteration counts and the initial velocity of a completed run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub initial_velocity: Vec<f64>,
    pub newton: Vec<NewtonOutcome>,
}

impl RunSummary {
    pub fn total_iterations(&self) -> usize {
        self.newton.iter().map(|n| n.iterations).sum()
    }

    pub fn max_iterations(&self) -> usize {
        self.newton.iter().map(|n| n.iterations).max().unwrap_or(0)
    }
}

/// Runs steps `m = 1..=M`, handing every new state to `observer`.
///
/// The initial velocity is the L² projection of `v(0, .)`; the first Newton
/// guess of each step is the previous state (zero pressure at `m = 1`).
pub fn run_time_loop<S, F>(
    problem: &Problem<S>,
    assembler: &Assembler<'_>,
    grid: &TimeGrid,
    settings: NewtonSettings,
    mut observer: F,
) -> Result<RunSummary>
where
    S: ExactSolution,
    F: FnMut(&StepView<'_>) -> Result<()>,
{
    let space = assembler.space;
    let v0 = space
        .l2_project_velocity(&assembler.tables, |x| problem.solution.velocity(0.0, x))?
        .coeffs;
    let newton = NewtonSolver::new(assembler, settings)?;
    let mut state = v0.clone();
    state.resize(space.n_total(), 0.0);
    let mut prev = state.clone();
    let mut outcomes = Vec::with_capacity(grid.steps);
    for m in 1..=grid.steps {
        let t = grid.node(m);
        let slab = assembler.slab_data(problem, t, grid.tau)?;
        let outcome = newton.solve(&slab, &prev, &mut state, m)?;
        log::debug!(
            "level {} step {m}/{}: t = {t:.6}, {} Newton iterations, |R| {:.3e} -> {:.3e}",
            grid.level,
            grid.steps,
            outcome.iterations,
            outcome.initial_residual,
            outcome.final_residual
        );
        observer(&StepView {
            step: m,
            time: t,
            tau: grid.tau,
            state: &state,
            frozen_p: &slab.frozen_p,
            newton: outcome,
        })?;
        outcomes.push(outcome);
        prev.copy_from_slice(&state);
    }
    Ok(RunSummary {
        initial_velocity: v0,
        newton: outcomes,
    })
}

/// All time-nodal coefficient vectors of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSlabSolution {
    pub grid: TimeGrid,
    /// Velocity at `t_0..=t_M`.
    pub velocity: Vec<Vec<f64>>,
    /// Pressure on slabs `1..=M` (index `m - 1`).
    pub pressure: Vec<Vec<f64>>,
    pub newton_iterations: Vec<usize>,
}

/// Runs the time loop and keeps every state.
pub fn solve_and_store<S: ExactSolution>(
    problem: &Problem<S>,
    assembler: &Assembler<'_>,
    grid: &TimeGrid,
    settings: NewtonSettings,
) -> Result<TimeSlabSolution> {
    let nv = assembler.space.n_velocity();
    let np = assembler.space.n_pressure();
    let mut velocity = Vec::with_capacity(grid.steps + 1);
    let mut pressure = Vec::with_capacity(grid.steps);
    let summary = run_time_loop(problem, assembler, grid, settings, |view| {
        velocity.push(view.state[..nv].to_vec());
        pressure.push(view.state[nv..nv + np].to_vec());
        Ok(())
    })?;
    velocity.insert(0, summary.initial_velocity.clone());
    Ok(TimeSlabSolution {
        grid: *grid,
        velocity,
        pressure,
        newton_iterations: summary.newton.iter().map(|n| n.iterations).collect(),
    })
}

/// Both sides of the discrete integration-by-parts identity
///
/// ```text
/// sum_{i=m+1}^{n} tau (d f_i, f_i) = |f_n|^2/2 - |f_m|^2/2 + sum_{i=m+1}^{n} tau^2/2 |d f_i|^2
/// ```
///
/// in the inner product of `mass`, with `d f_i = (f_i - f_{i-1}) / tau`.
pub fn integration_by_parts_sides(
    mass: &CscMatrix,
    seq: &[Vec<f64>],
    tau: f64,
    m: usize,
    n: usize,
) -> (f64, f64) {
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        mass.matvec(b).iter().zip(a).map(|(x, y)| x * y).sum()
    };
    let mut lhs = 0.0;
    let mut dissipation = 0.0;
    for i in m + 1..=n {
        let d: Vec<f64> = seq[i].iter().zip(&seq[i - 1]).map(|(a, b)| (a - b) / tau).collect();
        lhs += tau * inner(&d, &seq[i]);
        dissipation += 0.5 * tau * tau * inner(&d, &d);
    }
    let rhs = 0.5 * inner(&seq[n], &seq[n]) - 0.5 * inner(&seq[m], &seq[m]) + dissipation;
    (lhs, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{ReferenceTables, TaylorHoodSpace};
    use crate::mesh::Mesh;
    use crate::mms::{polynomial_stokes_problem, MmsConfig, PowerLawSolution, PressureCase};
    use crate::nfunc::{ExponentField, StressParams};
    use crate::quadrature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tables() -> ReferenceTables {
        ReferenceTables::new(quadrature::rule(6).unwrap())
    }

    fn power_problem(p_minus: f64, alpha: f64) -> Problem<PowerLawSolution> {
        PowerLawSolution::new(MmsConfig {
            exponent: ExponentField::new(p_minus, p_minus + 1.0, alpha, 0.1).unwrap(),
            stress: StressParams::default(),
            beta: alpha,
            gamma: alpha,
            case: PressureCase::One,
        })
        .unwrap()
        .into_problem()
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::for_level(0, 0.1);
        assert_eq!(g.steps, 4);
        assert_eq!(g.tau, 0.025);
        assert_eq!(g.node(4), 0.1);
        let g3 = TimeGrid::for_level(3, 0.1);
        assert_eq!(g3.steps, 32);
        assert_eq!(g3.tau * g3.steps as f64, 0.1);
        assert_eq!(g3.nodes().len(), 33);
    }

    #[test]
    fn linear_problem_needs_one_iteration_and_is_exact() {
        let sp = TaylorHoodSpace::new(Mesh::unit_square_level(1));
        let pb = polynomial_stokes_problem(0.1).unwrap();
        let asm = Assembler::new(&sp, tables(), pb.stress);
        let grid = TimeGrid::for_level(1, 0.1);
        let sol = solve_and_store(&pb, &asm, &grid, NewtonSettings::default()).unwrap();
        assert_eq!(sol.velocity.len(), grid.steps + 1);
        assert_eq!(sol.pressure.len(), grid.steps);
        assert!(sol.velocity[0].iter().all(|&v| v == 0.0));
        assert!(sol.newton_iterations.iter().all(|&i| i == 1));
        let exact = sp.interpolate_velocity(|x| pb.solution.velocity(0.1, x)).unwrap().coeffs;
        let err = sol.velocity[grid.steps]
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let sp = TaylorHoodSpace::new(Mesh::unit_square());
        let pb = polynomial_stokes_problem(0.1).unwrap();
        let asm = Assembler::new(&sp, tables(), pb.stress);
        let newton = NewtonSolver::new(&asm, NewtonSettings::default()).unwrap();
        let slab = SlabData {
            time: 0.1,
            tau: 0.025,
            frozen_p: vec![2.0; sp.mesh.num_triangles()],
            load: vec![0.0; sp.n_total()],
            boundary_values: vec![0.0; asm.boundary_dofs().len()],
        };
        let prev = vec![0.0; sp.n_total()];
        let mut state = prev.clone();
        let out = newton.solve(&slab, &prev, &mut state, 1).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(state.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nonlinear_steps_converge() {
        let sp = TaylorHoodSpace::new(Mesh::unit_square_level(2));
        let pb = power_problem(2.25, 1.0);
        let asm = Assembler::new(&sp, tables(), pb.stress);
        let grid = TimeGrid::for_level(2, 0.1);
        let summary = run_time_loop(&pb, &asm, &grid, NewtonSettings::default(), |_| Ok(())).unwrap();
        assert_eq!(summary.newton.len(), grid.steps);
        assert!(summary.max_iterations() <= 50);
        assert!(summary.newton.iter().all(|n| n.final_residual <= 1e-8f64.max(1e-8 * n.initial_residual)));
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let sp = TaylorHoodSpace::new(Mesh::unit_square_level(1));
        let pb = power_problem(2.0, 0.75);
        let asm = Assembler::new(&sp, tables(), pb.stress);
        let grid = TimeGrid::for_level(1, 0.1);
        let a = solve_and_store(&pb, &asm, &grid, NewtonSettings::default()).unwrap();
        let b = solve_and_store(&pb, &asm, &grid, NewtonSettings::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn integration_by_parts_identity() {
        let sp = TaylorHoodSpace::new(Mesh::unit_square_level(1));
        let mass = sp.scalar_mass_matrix(&tables());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seq: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..sp.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        for (m, n) in [(0, 8), (2, 5), (3, 4)] {
            let (lhs, rhs) = integration_by_parts_sides(&mass, &seq, 0.0125, m, n);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        }
    }
}
