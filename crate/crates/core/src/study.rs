//! Convergence studies: one solve per refinement level, errors, EOCs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::Assembler;
use crate::config::ExperimentConfig;
use crate::convergence::{expected_rate, ErrorAccumulator, ErrorEvaluator, ErrorQuadruple};
use crate::error::{Error, Result};
use crate::fem::{ReferenceTables, TaylorHoodSpace};
use crate::mesh::Mesh;
use crate::mms::{ExactSolution, PowerLawSolution, Problem};
use crate::quadrature;
use crate::report::{ConvergenceReport, LevelResult, StudyFailure};
use crate::stepper::{run_time_loop, TimeGrid};

/// Progress events, suitable for a JSON-lines run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum RunEvent {
    LevelStart {
        level: usize,
        unknowns: usize,
        steps: usize,
    },
    Step {
        level: usize,
        step: usize,
        time: f64,
        newton_iterations: usize,
        initial_residual: f64,
        final_residual: f64,
    },
    LevelDone {
        level: usize,
        errors: ErrorQuadruple,
        seconds: f64,
    },
    Failed {
        level: usize,
        message: String,
    },
}

/// Solves one level and evaluates its error quadruple.
pub fn run_level<S: ExactSolution>(
    cfg: &ExperimentConfig,
    problem: &Problem<S>,
    level: usize,
    on_event: &mut dyn FnMut(&RunEvent),
) -> Result<LevelResult> {
    let started = Instant::now();
    let space = TaylorHoodSpace::new(Mesh::unit_square_level(level));
    let grid = TimeGrid::for_level(level, cfg.final_time);
    on_event(&RunEvent::LevelStart {
        level,
        unknowns: space.n_total(),
        steps: grid.steps,
    });
    let assembler = Assembler::new(
        &space,
        ReferenceTables::new(quadrature::rule(cfg.quad_degree_assembly)?),
        problem.stress,
    );
    let evaluator = ErrorEvaluator::new(
        &space,
        ReferenceTables::new(quadrature::rule(cfg.quad_degree_error)?),
        problem.stress,
        &problem.solution,
    );
    let mut acc = ErrorAccumulator::default();
    let summary = run_time_loop(problem, &assembler, &grid, cfg.newton, |view| {
        on_event(&RunEvent::Step {
            level,
            step: view.step,
            time: view.time,
            newton_iterations: view.newton.iterations,
            initial_residual: view.newton.initial_residual,
            final_residual: view.newton.final_residual,
        });
        acc.observe(&evaluator, view)
    })?;
    let errors = acc.finish();
    let exact_final = space.interpolate_velocity(|x| problem.solution.velocity(cfg.final_time, x))?;
    let div = assembler.discrete_divergence(&exact_final.coeffs);
    let divergence_residual = div.iter().map(|d| d * d).sum::<f64>().sqrt();
    let seconds = started.elapsed().as_secs_f64();
    on_event(&RunEvent::LevelDone {
        level,
        errors,
        seconds,
    });
    log::info!(
        "level {level}: e_F={:.4e} e_F*={:.4e} e_phi*={:.4e} e_L2={:.4e} ({} Newton iterations, {seconds:.1}s)",
        errors.e_f,
        errors.e_fstar,
        errors.e_phistar,
        errors.e_l2,
        summary.total_iterations()
    );
    Ok(LevelResult {
        n: level,
        h: space.mesh.h,
        tau: grid.tau,
        steps: grid.steps,
        unknowns: space.n_total(),
        errors,
        newton_iterations_total: summary.total_iterations(),
        newton_iterations_max: summary.max_iterations(),
        divergence_residual,
        phistar_modular: acc.phistar_modular(),
    })
}

/// Runs levels `0..=max_level` of a manufactured-solution study.
///
/// Configuration errors are returned as `Err`. A solver failure stops the
/// study; the report then holds the completed levels and the failure.
pub fn run_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    run_study_with(cfg, &mut |_| {})
}

pub fn run_study_with(cfg: &ExperimentConfig, on_event: &mut dyn FnMut(&RunEvent)) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let mms = cfg.mms_config()?;
    let solution = PowerLawSolution::new(mms)?;
    let finest = TimeGrid::for_level(cfg.max_level, cfg.final_time);
    solution.precompute_means(&finest.nodes());
    let problem = solution.into_problem();
    let mut report = ConvergenceReport::new(cfg.clone(), expected_rate(cfg.case, cfg.p_plus(), cfg.alpha));
    for level in 0..=cfg.max_level {
        match run_level(cfg, &problem, level, on_event) {
            Ok(res) => report.push_level(res),
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                log::error!("{}: level {level} failed: {e}", cfg.label());
                on_event(&RunEvent::Failed {
                    level,
                    message: e.to_string(),
                });
                report.failure = Some(StudyFailure {
                    level,
                    message: e.to_string(),
                    exit_code: e.exit_code(),
                });
                break;
            }
        }
    }
    Ok(report)
}
