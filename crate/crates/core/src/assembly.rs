//! Residual and Jacobian of one backward Euler step.
//!
//! With unknowns `u = (v, q, lambda)` at time `t_m` and the previous velocity
//! `v_prev`, the step equations (divided by `tau`) read
//!
//! ```text
//! (v - v_prev)/tau . phi + S(p_K, D v) : D phi - q div phi - (g, phi) - (G, D phi) = 0
//! -(div v) eta + lambda eta                                                        = 0
//! (q, 1)                                                                           = 0
//! ```
//!
//! for every interior velocity test function `phi` and every pressure test
//! function `eta`. Boundary rows read `v_i - v_bc_i = 0`. The Jacobian is
//! symmetric; boundary rows and columns are eliminated to the identity.

use rayon::prelude::*;

use crate::error::Result;
use crate::fem::{ReferenceTables, TaylorHoodSpace};
use crate::mesh::Mesh;
use crate::mms::{ExactSolution, Problem};
use crate::nfunc::{self, ExponentField, StressParams};
use crate::sparse::CscMatrix;

/// Local unknowns of a cell: 6 `v_x`, 6 `v_y`, 3 `q`.
const LOCAL: usize = 15;

/// `p_K = p(t_m, barycenter(K))` for every cell.
pub fn freeze_exponent(mesh: &Mesh, exponent: &ExponentField, t_m: f64) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|k| exponent.eval(t_m, mesh.barycenter(k)))
        .collect()
}

/// Data of one time slab that does not depend on the Newton iterate.
#[derive(Clone, Debug)]
pub struct SlabData {
    pub time: f64,
    pub tau: f64,
    /// Frozen exponent per cell.
    pub frozen_p: Vec<f64>,
    /// `(g(t_m), phi) + (G(t_m), D phi)` for every velocity dof (zero elsewhere).
    pub load: Vec<f64>,
    /// Dirichlet values, aligned with [`Assembler::boundary_dofs`].
    pub boundary_values: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct CellGeometry {
    det: f64,
    inv_t: [f64; 4],
}

/// Cell-wise assembly of the step system on a fixed Taylor–Hood space.
pub struct Assembler<'s> {
    pub space: &'s TaylorHoodSpace,
    pub tables: ReferenceTables,
    pub stress: StressParams,
    geometry: Vec<CellGeometry>,
    pattern: CscMatrix,
    boundary_dofs: Vec<usize>,
}

impl<'s> Assembler<'s> {
    pub fn new(space: &'s TaylorHoodSpace, tables: ReferenceTables, stress: StressParams) -> Self {
        let mesh = &space.mesh;
        let geometry = (0..mesh.num_triangles())
            .map(|k| {
                let map = mesh.affine_map(k);
                CellGeometry {
                    det: map.det,
                    inv_t: map.inv_transpose(),
                }
            })
            .collect();
        let pattern = Self::build_pattern(space);
        let mut boundary_dofs = space.boundary_velocity_dofs();
        boundary_dofs.sort_unstable();
        Assembler {
            space,
            tables,
            stress,
            geometry,
            pattern,
            boundary_dofs,
        }
    }

    fn build_pattern(space: &TaylorHoodSpace) -> CscMatrix {
        let mut entries = Vec::with_capacity(space.mesh.num_triangles() * (LOCAL * LOCAL - 9) + 2 * space.n_pressure());
        for k in 0..space.mesh.num_triangles() {
            let dofs = Self::local_dofs(space, k);
            for (a, &ra) in dofs.iter().enumerate() {
                for (b, &cb) in dofs.iter().enumerate() {
                    if a >= 12 && b >= 12 {
                        continue;
                    }
                    entries.push((ra, cb));
                }
            }
        }
        let m = space.multiplier_dof();
        for j in 0..space.n_pressure() {
            let d = space.pressure_dof(j);
            entries.push((d, m));
            entries.push((m, d));
        }
        CscMatrix::from_pattern(space.n_total(), entries)
    }

    #[inline]
    fn local_dofs(space: &TaylorHoodSpace, k: usize) -> [usize; LOCAL] {
        let nodes = &space.cell_nodes[k];
        let tri = &space.mesh.triangles[k];
        let mut d = [0; LOCAL];
        for i in 0..6 {
            d[i] = space.velocity_dof(nodes[i], 0);
            d[6 + i] = space.velocity_dof(nodes[i], 1);
        }
        for i in 0..3 {
            d[12 + i] = space.pressure_dof(tri[i]);
        }
        d
    }

    /// Velocity dofs on the boundary, sorted.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Sparsity pattern shared by all Jacobians (values are zero).
    pub fn pattern(&self) -> &CscMatrix {
        &self.pattern
    }

    #[inline]
    fn phys_grads(&self, k: usize, q: usize) -> [[f64; 2]; 6] {
        let g = &self.geometry[k];
        let r = &self.tables.p2_grads[q];
        let mut out = [[0.0; 2]; 6];
        for i in 0..6 {
            out[i] = [
                g.inv_t[0] * r[i][0] + g.inv_t[1] * r[i][1],
                g.inv_t[2] * r[i][0] + g.inv_t[3] * r[i][1],
            ];
        }
        out
    }

    /// Boundary values and load vector of the slab ending at `time`.
    pub fn slab_data<S: ExactSolution>(&self, problem: &Problem<S>, time: f64, tau: f64) -> Result<SlabData> {
        let space = self.space;
        let mesh = &space.mesh;
        let frozen_p = freeze_exponent(mesh, &problem.exponent, time);
        let rule = &self.tables.rule;
        let local: Result<Vec<[f64; 12]>> = (0..mesh.num_triangles())
            .into_par_iter()
            .map(|k| {
                let map = mesh.affine_map(k);
                let mut out = [0.0; 12];
                for (q, (&xh, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                    let x = map.apply(xh);
                    let g = problem.rhs_g(time, x)?;
                    let big_g = problem.rhs_G(time, x)?;
                    let wd = w * map.det;
                    let phi = &self.tables.p2_values[q];
                    let dphi = self.phys_grads(k, q);
                    for i in 0..6 {
                        for c in 0..2 {
                            out[6 * c + i] += wd
                                * (g[c] * phi[i]
                                    + big_g.0[2 * c] * dphi[i][0]
                                    + big_g.0[2 * c + 1] * dphi[i][1]);
                        }
                    }
                }
                Ok(out)
            })
            .collect();
        let mut load = vec![0.0; space.n_total()];
        for (k, vals) in local?.into_iter().enumerate() {
            let dofs = Self::local_dofs(space, k);
            for a in 0..12 {
                load[dofs[a]] += vals[a];
            }
        }
        let n = space.num_nodes();
        let boundary_values = self
            .boundary_dofs
            .iter()
            .map(|&d| {
                let (node, comp) = (d % n, d / n);
                Ok(problem.solution.velocity(time, space.node_point(node))?[comp])
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(SlabData {
            time,
            tau,
            frozen_p,
            load,
            boundary_values,
        })
    }

    /// Overwrites the boundary entries of `state` with the Dirichlet values.
    pub fn impose_boundary(&self, slab: &SlabData, state: &mut [f64]) {
        for (&d, &v) in self.boundary_dofs.iter().zip(&slab.boundary_values) {
            state[d] = v;
        }
    }

    /// Step residual at `state`.
    pub fn residual(&self, slab: &SlabData, v_prev: &[f64], state: &[f64]) -> Vec<f64> {
        let space = self.space;
        let nvel = space.n_velocity();
        let mult = state[space.multiplier_dof()];
        let inv_tau = 1.0 / slab.tau;
        let local: Vec<([f64; LOCAL], f64)> = (0..space.mesh.num_triangles())
            .into_par_iter()
            .map(|k| {
                let det = self.geometry[k].det;
                let pk = slab.frozen_p[k];
                let mut out = [0.0; LOCAL];
                let mut mean = 0.0;
                for (q, &w) in self.tables.rule.weights.iter().enumerate() {
                    let wd = w * det;
                    let phi = &self.tables.p2_values[q];
                    let eta = &self.tables.p1_values[q];
                    let dphi = self.phys_grads(k, q);
                    let (v, grad) = space.velocity_at(state, k, phi, &dphi);
                    let (vp, _) = space.velocity_at(v_prev, k, phi, &dphi);
                    let pres = space.pressure_at(&state[nvel..], k, eta);
                    let s = nfunc::stress(&self.stress, pk, &grad);
                    let dt = [(v[0] - vp[0]) * inv_tau, (v[1] - vp[1]) * inv_tau];
                    for i in 0..6 {
                        for c in 0..2 {
                            out[6 * c + i] += wd
                                * (dt[c] * phi[i]
                                    + s.0[2 * c] * dphi[i][0]
                                    + s.0[2 * c + 1] * dphi[i][1]
                                    - pres * dphi[i][c]);
                        }
                    }
                    let div = grad.trace();
                    for j in 0..3 {
                        out[12 + j] += wd * (-div + mult) * eta[j];
                    }
                    mean += wd * pres;
                }
                (out, mean)
            })
            .collect();
        let mut r = vec![0.0; space.n_total()];
        let mut mean = 0.0;
        for (k, (vals, m)) in local.into_iter().enumerate() {
            let dofs = Self::local_dofs(space, k);
            for a in 0..LOCAL {
                r[dofs[a]] += vals[a];
            }
            mean += m;
        }
        r[space.multiplier_dof()] = mean;
        for (ri, li) in r.iter_mut().zip(&slab.load) {
            *ri -= li;
        }
        for (&d, &v) in self.boundary_dofs.iter().zip(&slab.boundary_values) {
            r[d] = state[d] - v;
        }
        r
    }

    /// Jacobian of [`Assembler::residual`] at `state`, boundary rows and columns eliminated.
    pub fn jacobian(&self, slab: &SlabData, state: &[f64]) -> CscMatrix {
        let mut jac = self.jacobian_raw(slab, state);
        jac.eliminate(&self.boundary_dofs);
        jac
    }

    /// Jacobian without boundary elimination.
    pub fn jacobian_raw(&self, slab: &SlabData, state: &[f64]) -> CscMatrix {
        let space = self.space;
        let inv_tau = 1.0 / slab.tau;
        let local: Vec<([[f64; LOCAL]; LOCAL], [f64; 3])> = (0..space.mesh.num_triangles())
            .into_par_iter()
            .map(|k| {
                let det = self.geometry[k].det;
                let pk = slab.frozen_p[k];
                let mut a = [[0.0; LOCAL]; LOCAL];
                let mut mcol = [0.0; 3];
                for (q, &w) in self.tables.rule.weights.iter().enumerate() {
                    let wd = w * det;
                    let phi = &self.tables.p2_values[q];
                    let eta = &self.tables.p1_values[q];
                    let dphi = self.phys_grads(k, q);
                    let (_, grad) = space.velocity_at(state, k, phi, &dphi);
                    let jac = nfunc::stress_jacobian(&self.stress, pk, &grad).0;
                    for c in 0..2 {
                        for i in 0..6 {
                            let row = 6 * c + i;
                            for d in 0..2 {
                                for l in 0..6 {
                                    let col = 6 * d + l;
                                    let mut val = 0.0;
                                    for r in 0..2 {
                                        for s in 0..2 {
                                            val += dphi[i][r] * jac[2 * c + r][2 * d + s] * dphi[l][s];
                                        }
                                    }
                                    if c == d {
                                        val += inv_tau * phi[i] * phi[l];
                                    }
                                    a[row][col] += wd * val;
                                }
                            }
                            for j in 0..3 {
                                let b = -wd * eta[j] * dphi[i][c];
                                a[row][12 + j] += b;
                                a[12 + j][row] += b;
                            }
                        }
                    }
                    for j in 0..3 {
                        mcol[j] += wd * eta[j];
                    }
                }
                (a, mcol)
            })
            .collect();
        let mut jac = self.pattern.clone();
        let m = space.multiplier_dof();
        for (k, (a, mcol)) in local.into_iter().enumerate() {
            let dofs = Self::local_dofs(space, k);
            for (ra, &r) in dofs.iter().enumerate() {
                for (cb, &c) in dofs.iter().enumerate() {
                    if ra >= 12 && cb >= 12 {
                        continue;
                    }
                    let slot = jac.find(r, c).expect("entry in pattern");
                    jac.values[slot] += a[ra][cb];
                }
            }
            for j in 0..3 {
                let d = dofs[12 + j];
                let s1 = jac.find(d, m).expect("entry in pattern");
                jac.values[s1] += mcol[j];
                let s2 = jac.find(m, d).expect("entry in pattern");
                jac.values[s2] += mcol[j];
            }
        }
        jac
    }

    /// `sum_K int_K div v_h eta` for every pressure dof: the discrete divergence of a velocity.
    pub fn discrete_divergence(&self, velocity: &[f64]) -> Vec<f64> {
        let space = self.space;
        let mut out = vec![0.0; space.n_pressure()];
        for k in 0..space.mesh.num_triangles() {
            let det = self.geometry[k].det;
            let tri = &space.mesh.triangles[k];
            for (q, &w) in self.tables.rule.weights.iter().enumerate() {
                let dphi = self.phys_grads(k, q);
                let (_, grad) = space.velocity_at(velocity, k, &self.tables.p2_values[q], &dphi);
                for j in 0..3 {
                    out[tri[j]] += w * det * grad.trace() * self.tables.p1_values[q][j];
                }
            }
        }
        out
    }
}
