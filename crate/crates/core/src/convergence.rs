//! Error quantities against the time-nodal exact solution and the
//! experimental order of convergence.
//!
//! For a run with slabs `I_m` and frozen exponents `p_K`:
//!
//! ```text
//! e_F     = ( sum_m tau |F(p_K, D v_h(t_m)) - F(p_K, D v(t_m))|^2_{L2} )^(1/2)
//! e_F*    = ( sum_m tau |F*(p_K, S(p_K, D v_h)) - F*(p_K, S(p_K, D v))|^2_{L2} )^(1/2)
//! e_phi*  = ( sum_m tau int (phi_{|D v|})*(p_K, |q_h - q(t_m)|) )^(1/2)
//! e_L2    =   max_m |v_h(t_m) - v(t_m)|_{L2}
//! ```
//!
//! The pressure quantity is the square root of the conjugate modular, so that
//! all four quantities are on the scale of a norm; the modular itself is
//! available from [`ErrorAccumulator::phistar_modular`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::{ReferenceTables, TaylorHoodSpace};
use crate::mms::{ExactSolution, PressureCase};
use crate::nfunc::{self, StressParams};
use crate::stepper::StepView;

/// The four error quantities of one level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuadruple {
    pub e_f: f64,
    pub e_fstar: f64,
    pub e_phistar: f64,
    pub e_l2: f64,
}

impl ErrorQuadruple {
    pub fn as_array(&self) -> [f64; 4] {
        [self.e_f, self.e_fstar, self.e_phistar, self.e_l2]
    }

    pub fn is_valid(&self) -> bool {
        self.as_array().iter().all(|e| e.is_finite() && *e >= 0.0)
    }
}

/// Squared contributions of one slab (before the factor `tau`).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlabErrors {
    pub f_sq: f64,
    pub fstar_sq: f64,
    pub phistar: f64,
    pub l2_sq: f64,
}

impl std::ops::Add for SlabErrors {
    type Output = SlabErrors;

    fn add(self, o: SlabErrors) -> SlabErrors {
        SlabErrors {
            f_sq: self.f_sq + o.f_sq,
            fstar_sq: self.fstar_sq + o.fstar_sq,
            phistar: self.phistar + o.phistar,
            l2_sq: self.l2_sq + o.l2_sq,
        }
    }
}

/// Evaluates slab errors of discrete states with a fixed (high-order) rule.
pub struct ErrorEvaluator<'a, S> {
    pub space: &'a TaylorHoodSpace,
    pub tables: ReferenceTables,
    pub stress: StressParams,
    pub solution: &'a S,
}

impl<'a, S: ExactSolution> ErrorEvaluator<'a, S> {
    pub fn new(space: &'a TaylorHoodSpace, tables: ReferenceTables, stress: StressParams, solution: &'a S) -> Self {
        ErrorEvaluator {
            space,
            tables,
            stress,
            solution,
        }
    }

    /// Integrals over `Omega` at time `t` of the four integrands, for
    /// velocity `velocity` (length `n_v`, or a full state) and pressure
    /// `pressure` (indexed by vertex).
    pub fn slab_errors(
        &self,
        time: f64,
        velocity: &[f64],
        pressure: &[f64],
        frozen_p: &[f64],
    ) -> Result<SlabErrors> {
        let space = self.space;
        let mesh = &space.mesh;
        let tables = &self.tables;
        let params = &self.stress;
        let per_cell: Result<Vec<SlabErrors>> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|k| {
                let map = mesh.affine_map(k);
                let grads = space.physical_grads(k, tables);
                let pk = frozen_p[k];
                let mut acc = SlabErrors::default();
                for (q, (&xh, &w)) in tables.rule.points.iter().zip(&tables.rule.weights).enumerate() {
                    let x = map.apply(xh);
                    let wd = w * map.det;
                    let (vh, gh) = space.velocity_at(velocity, k, &tables.p2_values[q], &grads[q]);
                    let qh = space.pressure_at(pressure, k, &tables.p1_values[q]);
                    let v = self.solution.velocity(time, x)?;
                    let g = self.solution.velocity_grad(time, x)?;
                    let qe = self.solution.pressure(time, x)?;
                    let df = nfunc::tensor_f(params, pk, &gh) - nfunc::tensor_f(params, pk, &g);
                    let dfs = nfunc::tensor_fstar(params, pk, &nfunc::stress(params, pk, &gh))
                        - nfunc::tensor_fstar(params, pk, &nfunc::stress(params, pk, &g));
                    let shift = g.sym().norm();
                    let phis = nfunc::phi_shift_conj(params, pk, shift, (qh - qe).abs());
                    let dv = [vh[0] - v[0], vh[1] - v[1]];
                    acc.f_sq += wd * df.ddot(&df);
                    acc.fstar_sq += wd * dfs.ddot(&dfs);
                    acc.phistar += wd * phis;
                    acc.l2_sq += wd * (dv[0] * dv[0] + dv[1] * dv[1]);
                }
                Ok(acc)
            })
            .collect();
        Ok(per_cell?.into_iter().fold(SlabErrors::default(), |a, b| a + b))
    }
}

/// Running space-time accumulation of [`SlabErrors`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorAccumulator {
    f_sq: f64,
    fstar_sq: f64,
    phistar: f64,
    max_l2_sq: f64,
}

impl ErrorAccumulator {
    pub fn add(&mut self, tau: f64, slab: SlabErrors) {
        self.f_sq += tau * slab.f_sq;
        self.fstar_sq += tau * slab.fstar_sq;
        self.phistar += tau * slab.phistar;
        self.max_l2_sq = self.max_l2_sq.max(slab.l2_sq);
    }

    /// Evaluates and adds the errors of one step of the time loop.
    pub fn observe<S: ExactSolution>(&mut self, eval: &ErrorEvaluator<'_, S>, view: &StepView<'_>) -> Result<()> {
        let nv = eval.space.n_velocity();
        let slab = eval.slab_errors(view.time, view.state, &view.state[nv..], view.frozen_p)?;
        self.add(view.tau, slab);
        Ok(())
    }

    pub fn finish(&self) -> ErrorQuadruple {
        ErrorQuadruple {
            e_f: self.f_sq.sqrt(),
            e_fstar: self.fstar_sq.sqrt(),
            e_phistar: self.phistar.sqrt(),
            e_l2: self.max_l2_sq.sqrt(),
        }
    }

    /// Space-time conjugate modular of the pressure error.
    pub fn phistar_modular(&self) -> f64 {
        self.phistar
    }
}

/// `log(e_n / e_{n-1}) / log(s_n / s_{n-1})` with `s = h + tau`; `None` if
/// either error is not positive and finite.
pub fn eoc(e_prev: f64, e_cur: f64, scale_prev: f64, scale_cur: f64) -> Option<f64> {
    let ok = |e: f64| e.is_finite() && e > 0.0;
    if !ok(e_prev) || !ok(e_cur) {
        return None;
    }
    Some((e_cur / e_prev).ln() / (scale_cur / scale_prev).ln())
}

/// EOC of consecutive entries; the first entry is always `None`.
pub fn eoc_series(errors: &[f64], scales: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(errors.len(), scales.len());
    (0..errors.len())
        .map(|n| {
            if n == 0 {
                None
            } else {
                eoc(errors[n - 1], errors[n], scales[n - 1], scales[n])
            }
        })
        .collect()
}

/// Rate predicted by the a priori analysis: `min(1, p_plus'/2) alpha` for
/// the first pressure family, `alpha` for the second.
pub fn expected_rate(case: PressureCase, p_plus: f64, alpha: f64) -> f64 {
    match case {
        PressureCase::One => (0.5 * nfunc::conjugate_exponent(p_plus)).min(1.0) * alpha,
        PressureCase::Two => alpha,
    }
}
