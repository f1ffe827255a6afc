//! Taylor–Hood P2–P1 spaces on a [`Mesh`].
//!
//! Global unknown layout (one vector per time slab):
//!
//! ```text
//! [ v_x (n_nodes) | v_y (n_nodes) | q (n_vertices) | lambda (1) ]
//! ```
//!
//! where the P2 nodes are the mesh vertices followed by the edge midpoints
//! (node `V + e` sits on edge `e`), and `lambda` is the multiplier of the
//! zero-mean pressure constraint.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nfunc::{Point, Tensor2};
use crate::quadrature::QuadRule;
use crate::sparse::CscMatrix;

/// Quadratic Lagrange basis on the reference triangle.
///
/// Ordering: vertices `(0,0)`, `(1,0)`, `(0,1)`, then midpoints of the edges
/// `(0,1)`, `(1,2)`, `(2,0)`, i.e. `(0.5,0)`, `(0.5,0.5)`, `(0,0.5)`.
pub fn eval_basis_p2(xh: Point) -> ([f64; 6], [[f64; 2]; 6]) {
    let (x, y) = (xh[0], xh[1]);
    let l = [1.0 - x - y, x, y];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut val = [0.0; 6];
    let mut grad = [[0.0; 2]; 6];
    for i in 0..3 {
        val[i] = l[i] * (2.0 * l[i] - 1.0);
        let c = 4.0 * l[i] - 1.0;
        grad[i] = [c * dl[i][0], c * dl[i][1]];
    }
    for e in 0..3 {
        let (a, b) = (e, (e + 1) % 3);
        val[3 + e] = 4.0 * l[a] * l[b];
        grad[3 + e] = [
            4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]),
            4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1]),
        ];
    }
    (val, grad)
}

/// Linear Lagrange basis (barycentric coordinates) on the reference triangle.
pub fn eval_basis_p1(xh: Point) -> ([f64; 3], [[f64; 2]; 3]) {
    (
        [1.0 - xh[0] - xh[1], xh[0], xh[1]],
        [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
    )
}

/// Reference basis values tabulated at the points of a rule.
#[derive(Clone, Debug)]
pub struct ReferenceTables {
    pub rule: QuadRule,
    pub p2_values: Vec<[f64; 6]>,
    pub p2_grads: Vec<[[f64; 2]; 6]>,
    pub p1_values: Vec<[f64; 3]>,
}

impl ReferenceTables {
    pub fn new(rule: QuadRule) -> Self {
        let (p2_values, p2_grads) = rule.points.iter().map(|&p| eval_basis_p2(p)).unzip();
        let p1_values = rule.points.iter().map(|&p| eval_basis_p1(p).0).collect();
        ReferenceTables {
            rule,
            p2_values,
            p2_grads,
            p1_values,
        }
    }
}

/// What a coefficient vector represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Both velocity components, blocked (`x` block then `y` block).
    Velocity,
    /// P1 pressure.
    Pressure,
}

/// Coefficients of a discrete velocity or pressure field.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    pub kind: FieldKind,
    pub coeffs: Vec<f64>,
}

/// Taylor–Hood P2–P1 space.
#[derive(Clone, Debug)]
pub struct TaylorHoodSpace {
    pub mesh: Mesh,
    /// P2 node indices of each cell, in the reference ordering.
    pub cell_nodes: Vec<[usize; 6]>,
    /// P2 nodes lying on the boundary of the square.
    pub boundary_nodes: Vec<usize>,
}

impl TaylorHoodSpace {
    pub fn new(mesh: Mesh) -> Self {
        let nv = mesh.num_vertices();
        let cell_nodes = mesh
            .triangles
            .iter()
            .zip(&mesh.triangle_edges)
            .map(|(t, e)| [t[0], t[1], t[2], nv + e[0], nv + e[1], nv + e[2]])
            .collect();
        let mut boundary_nodes: Vec<usize> = (0..nv).filter(|&i| mesh.boundary_vertex[i]).collect();
        boundary_nodes.extend(
            (0..mesh.num_edges())
                .filter(|&e| mesh.boundary_edge[e])
                .map(|e| nv + e),
        );
        TaylorHoodSpace {
            mesh,
            cell_nodes,
            boundary_nodes,
        }
    }

    /// Number of scalar P2 nodes, `V + E`.
    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices() + self.mesh.num_edges()
    }

    /// Velocity unknowns `n_v = 2 (V + E)`.
    pub fn n_velocity(&self) -> usize {
        2 * self.num_nodes()
    }

    /// Pressure unknowns `n_q = V`.
    pub fn n_pressure(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Size of the full saddle-point system, including the mean multiplier.
    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    #[inline]
    pub fn velocity_dof(&self, node: usize, component: usize) -> usize {
        component * self.num_nodes() + node
    }

    #[inline]
    pub fn pressure_dof(&self, vertex: usize) -> usize {
        self.n_velocity() + vertex
    }

    #[inline]
    pub fn multiplier_dof(&self) -> usize {
        self.n_velocity() + self.n_pressure()
    }

    /// Velocity dofs on the boundary, both components.
    pub fn boundary_velocity_dofs(&self) -> Vec<usize> {
        let mut dofs: Vec<usize> = self.boundary_nodes.clone();
        dofs.extend(self.boundary_nodes.iter().map(|&n| self.velocity_dof(n, 1)));
        dofs
    }

    /// Physical coordinates of P2 node `i`.
    pub fn node_point(&self, i: usize) -> Point {
        let nv = self.mesh.num_vertices();
        if i < nv {
            self.mesh.vertices[i]
        } else {
            let [a, b] = self.mesh.edges[i - nv];
            let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }
    }

    /// Nodal P2 interpolation of a vector field.
    pub fn interpolate_velocity<F>(&self, f: F) -> Result<FeFunction>
    where
        F: Fn(Point) -> Result<[f64; 2]> + Sync,
    {
        let n = self.num_nodes();
        let values: Result<Vec<[f64; 2]>> =
            (0..n).into_par_iter().map(|i| f(self.node_point(i))).collect();
        let values = values?;
        let mut coeffs = vec![0.0; 2 * n];
        for (i, v) in values.into_iter().enumerate() {
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        Ok(FeFunction {
            kind: FieldKind::Velocity,
            coeffs,
        })
    }

    /// Nodal P1 interpolation of a scalar field.
    pub fn interpolate_pressure<F>(&self, f: F) -> Result<FeFunction>
    where
        F: Fn(Point) -> Result<f64> + Sync,
    {
        let coeffs: Result<Vec<f64>> = self
            .mesh
            .vertices
            .par_iter()
            .map(|&x| f(x))
            .collect();
        Ok(FeFunction {
            kind: FieldKind::Pressure,
            coeffs: coeffs?,
        })
    }

    /// Scalar P2 mass matrix (`n_nodes x n_nodes`), assembled with the given rule.
    pub fn scalar_mass_matrix(&self, tables: &ReferenceTables) -> CscMatrix {
        let n = self.num_nodes();
        let mut triplets = Vec::with_capacity(36 * self.mesh.num_triangles());
        for (k, nodes) in self.cell_nodes.iter().enumerate() {
            let det = self.mesh.affine_map(k).det;
            let mut local = [[0.0; 6]; 6];
            for (w, phi) in tables.rule.weights.iter().zip(&tables.p2_values) {
                for i in 0..6 {
                    for j in 0..6 {
                        local[i][j] += w * det * phi[i] * phi[j];
                    }
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    triplets.push((nodes[i], nodes[j], local[i][j]));
                }
            }
        }
        CscMatrix::from_triplets(n, &triplets)
    }

    /// Global L² projection of a vector field onto the P2 velocity space
    /// (no boundary constraint).
    pub fn l2_project_velocity<F>(&self, tables: &ReferenceTables, f: F) -> Result<FeFunction>
    where
        F: Fn(Point) -> Result<[f64; 2]> + Sync,
    {
        let n = self.num_nodes();
        let mass = self.scalar_mass_matrix(tables);
        let local_loads: Result<Vec<[[f64; 6]; 2]>> = (0..self.mesh.num_triangles())
            .into_par_iter()
            .map(|k| {
                let map = self.mesh.affine_map(k);
                let mut load = [[0.0; 6]; 2];
                for ((&xh, &w), phi) in tables
                    .rule
                    .points
                    .iter()
                    .zip(&tables.rule.weights)
                    .zip(&tables.p2_values)
                {
                    let v = f(map.apply(xh))?;
                    for i in 0..6 {
                        load[0][i] += w * map.det * v[0] * phi[i];
                        load[1][i] += w * map.det * v[1] * phi[i];
                    }
                }
                Ok(load)
            })
            .collect();
        let mut bx = vec![0.0; n];
        let mut by = vec![0.0; n];
        for (nodes, load) in self.cell_nodes.iter().zip(local_loads?) {
            for i in 0..6 {
                bx[nodes[i]] += load[0][i];
                by[nodes[i]] += load[1][i];
            }
        }
        let fact_sym = mass.analyze()?;
        let fact = fact_sym.factor(&mass)?;
        let cx = fact.solve_refined(&bx)?;
        let cy = fact.solve_refined(&by)?;
        let mut coeffs = cx;
        coeffs.extend(cy);
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Linear("singular mass matrix in L2 projection".into()));
        }
        Ok(FeFunction {
            kind: FieldKind::Velocity,
            coeffs,
        })
    }

    /// Value and full gradient of a velocity field in cell `k` at a tabulated point.
    #[inline]
    pub fn velocity_at(
        &self,
        coeffs: &[f64],
        k: usize,
        values: &[f64; 6],
        phys_grads: &[[f64; 2]; 6],
    ) -> ([f64; 2], Tensor2) {
        let n = self.num_nodes();
        let nodes = &self.cell_nodes[k];
        let mut v = [0.0; 2];
        let mut g = [0.0; 4];
        for i in 0..6 {
            let (cx, cy) = (coeffs[nodes[i]], coeffs[n + nodes[i]]);
            v[0] += cx * values[i];
            v[1] += cy * values[i];
            g[0] += cx * phys_grads[i][0];
            g[1] += cx * phys_grads[i][1];
            g[2] += cy * phys_grads[i][0];
            g[3] += cy * phys_grads[i][1];
        }
        (v, Tensor2(g))
    }

    /// Value of a pressure field (coefficients indexed by vertex) in cell `k`.
    #[inline]
    pub fn pressure_at(&self, coeffs: &[f64], k: usize, values: &[f64; 3]) -> f64 {
        let tri = &self.mesh.triangles[k];
        (0..3).map(|i| coeffs[tri[i]] * values[i]).sum()
    }

    /// Physical P2 gradients in cell `k` at every tabulated point.
    pub fn physical_grads(&self, k: usize, tables: &ReferenceTables) -> Vec<[[f64; 2]; 6]> {
        let map = self.mesh.affine_map(k);
        let inv_t = map.inv_transpose();
        tables
            .p2_grads
            .iter()
            .map(|g| {
                let mut out = [[0.0; 2]; 6];
                for i in 0..6 {
                    out[i] = map.grad(&inv_t, g[i]);
                }
                out
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::rule;
    use approx::assert_relative_eq;

    #[test]
    fn p2_basis_lagrange_property() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
        for (i, &x) in nodes.iter().enumerate() {
            let (v, _) = eval_basis_p2(x);
            for (j, &vj) in v.iter().enumerate() {
                assert_relative_eq!(vj, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        for &x in &[[0.2, 0.3], [0.7, 0.1], [1.0 / 3.0, 1.0 / 3.0]] {
            let (v, g) = eval_basis_p2(x);
            assert_relative_eq!(v.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
            assert_relative_eq!(g.iter().map(|d| d[0]).sum::<f64>(), 0.0, epsilon = 1e-14);
            assert_relative_eq!(g.iter().map(|d| d[1]).sum::<f64>(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn p2_gradients_match_finite_differences() {
        let x = [0.21, 0.37];
        let h = 1e-6;
        let (_, g) = eval_basis_p2(x);
        let (vpx, _) = eval_basis_p2([x[0] + h, x[1]]);
        let (vmx, _) = eval_basis_p2([x[0] - h, x[1]]);
        let (vpy, _) = eval_basis_p2([x[0], x[1] + h]);
        let (vmy, _) = eval_basis_p2([x[0], x[1] - h]);
        for i in 0..6 {
            assert_relative_eq!(g[i][0], (vpx[i] - vmx[i]) / (2.0 * h), epsilon = 1e-8);
            assert_relative_eq!(g[i][1], (vpy[i] - vmy[i]) / (2.0 * h), epsilon = 1e-8);
        }
    }

    #[test]
    fn p1_basis() {
        assert_eq!(eval_basis_p1([0.0, 0.0]).0, [1.0, 0.0, 0.0]);
        let (v, g) = eval_basis_p1([1.0 / 3.0, 1.0 / 3.0]);
        for vi in v {
            assert_relative_eq!(vi, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn counts_and_boundary() {
        let s = TaylorHoodSpace::new(Mesh::unit_square_level(2));
        let (v, e) = (s.mesh.num_vertices(), s.mesh.num_edges());
        assert_eq!(s.n_velocity(), 2 * (v + e));
        assert_eq!(s.n_pressure(), v);
        // boundary of a 4x4 criss-cross grid: 16 vertices + 16 edges
        assert_eq!(s.boundary_nodes.len(), 32);
        for i in 0..s.num_nodes() {
            assert_eq!(s.boundary_nodes.contains(&i), Mesh::on_boundary(s.node_point(i)));
        }
    }

    #[test]
    fn mass_matrix_properties() {
        let s = TaylorHoodSpace::new(Mesh::unit_square_level(2));
        let t = ReferenceTables::new(rule(4).unwrap());
        let m = s.scalar_mass_matrix(&t);
        let total: f64 = m.values.iter().sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-13);
        for (r, c, v) in m.entries() {
            assert_relative_eq!(v, m.get(c, r), epsilon = 1e-16);
        }
        // positive definiteness on a few probe vectors
        for seed in 1..5 {
            let x: Vec<f64> = (0..m.dim()).map(|i| ((i * 7919 + seed * 104729) % 97) as f64 - 48.0).collect();
            let mx = m.matvec(&x);
            assert!(x.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let s = TaylorHoodSpace::new(Mesh::unit_square_level(1));
        let f = |x: Point| [x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5, x[1] * x[1] + x[0] - 1.0];
        let u = s.interpolate_velocity(|x| Ok(f(x))).unwrap();
        let t = ReferenceTables::new(rule(8).unwrap());
        for k in 0..s.mesh.num_triangles() {
            let map = s.mesh.affine_map(k);
            let grads = s.physical_grads(k, &t);
            for (q, &xh) in t.rule.points.iter().enumerate() {
                let (v, g) = s.velocity_at(&u.coeffs, k, &t.p2_values[q], &grads[q]);
                let x = map.apply(xh);
                let e = f(x);
                assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
                let ge = [2.0 * x[0] - 2.0 * x[1], -2.0 * x[0], 1.0, 2.0 * x[1]];
                for (a, b) in g.0.iter().zip(ge) {
                    assert!((a - b).abs() < 1e-11);
                }
            }
        }
        let zero = s.interpolate_velocity(|_| Ok([0.0, 0.0])).unwrap();
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn l2_projection_of_member_is_identity() {
        let s = TaylorHoodSpace::new(Mesh::unit_square_level(2));
        let t = ReferenceTables::new(rule(6).unwrap());
        let f = |x: Point| Ok([x[0] * x[1] + 0.25, 1.0 - x[1] * x[1]]);
        let proj = s.l2_project_velocity(&t, f).unwrap();
        let interp = s.interpolate_velocity(f).unwrap();
        for (a, b) in proj.coeffs.iter().zip(&interp.coeffs) {
            assert!((a - b).abs() < 1e-10);
        }
        let zero = s.l2_project_velocity(&t, |_| Ok([0.0, 0.0])).unwrap();
        assert!(zero.coeffs.iter().all(|&c| c == 0.0));
    }
}
