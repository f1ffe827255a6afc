//! Criss-cross triangulations of the unit square and their uniform refinement.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::nfunc::Point;

/// Reference-to-physical map `x = B x_hat + b` of one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    /// Row-major `[b11, b12, b21, b22]`; columns are the edge vectors `v1 - v0`, `v2 - v0`.
    pub b: [f64; 4],
    pub origin: Point,
    pub det: f64,
}

impl AffineMap {
    #[inline]
    pub fn apply(&self, xh: Point) -> Point {
        [
            self.b[0] * xh[0] + self.b[1] * xh[1] + self.origin[0],
            self.b[2] * xh[0] + self.b[3] * xh[1] + self.origin[1],
        ]
    }

    /// `B^{-T}`, row-major; maps reference gradients to physical ones.
    #[inline]
    pub fn inv_transpose(&self) -> [f64; 4] {
        let inv_det = 1.0 / self.det;
        [
            self.b[3] * inv_det,
            -self.b[2] * inv_det,
            -self.b[1] * inv_det,
            self.b[0] * inv_det,
        ]
    }

    /// Physical gradient from a reference gradient.
    #[inline]
    pub fn grad(&self, inv_t: &[f64; 4], g: [f64; 2]) -> [f64; 2] {
        [
            inv_t[0] * g[0] + inv_t[1] * g[1],
            inv_t[2] * g[0] + inv_t[3] * g[1],
        ]
    }
}

/// Conforming triangulation of `(0,1)^2`.
///
/// Triangles are counterclockwise. Local edge `e` of a triangle joins local
/// vertices `e` and `(e + 1) % 3`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Sorted vertex pairs, numbered in order of first appearance.
    pub edges: Vec<[usize; 2]>,
    /// Adjacent triangles of each edge (second entry `None` on the boundary).
    pub edge_triangles: Vec<[Option<usize>; 2]>,
    /// Global edge index of each local edge.
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_vertex: Vec<bool>,
    pub boundary_edge: Vec<bool>,
    pub level: usize,
    /// Maximal element diameter.
    pub h: f64,
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Unit square split along both diagonals into four triangles.
    pub fn unit_square() -> Mesh {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let triangles = vec![[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        Mesh::from_parts(vertices, triangles, 0)
    }

    /// Builds edge tables and boundary flags for the given cells.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, level: usize) -> Mesh {
        let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (e, slot) in local.iter_mut().enumerate() {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push([None, None]);
                    edges.len() - 1
                });
                let adj = &mut edge_triangles[id];
                if adj[0].is_none() {
                    adj[0] = Some(k);
                } else {
                    debug_assert!(adj[1].is_none(), "edge shared by more than two triangles");
                    adj[1] = Some(k);
                }
                *slot = id;
            }
            triangle_edges.push(local);
        }
        let boundary_edge: Vec<bool> = edge_triangles.iter().map(|a| a[1].is_none()).collect();
        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, &on) in edges.iter().zip(&boundary_edge) {
            if on {
                boundary_vertex[e[0]] = true;
                boundary_vertex[e[1]] = true;
            }
        }
        let h = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| vertices[i]);
                dist(a, b).max(dist(b, c)).max(dist(c, a))
            })
            .fold(0.0, f64::max);
        Mesh {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            boundary_vertex,
            boundary_edge,
            level,
            h,
        }
    }

    /// Level-`n` mesh obtained by `n` uniform refinements of [`Mesh::unit_square`].
    pub fn unit_square_level(level: usize) -> Mesh {
        (0..level).fold(Mesh::unit_square(), |m, _| m.refine_uniform())
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Red refinement: every triangle is split into four congruent children
    /// through its edge midpoints. The midpoint of edge `e` becomes vertex `V + e`.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.edges.iter().map(|&[a, b]| {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
        }));
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (tri, te) in self.triangles.iter().zip(&self.triangle_edges) {
            let [a, b, c] = *tri;
            let (mab, mbc, mca) = (nv + te[0], nv + te[1], nv + te[2]);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
        }
        Mesh::from_parts(vertices, triangles, self.level + 1)
    }

    pub fn barycenter(&self, k: usize) -> Point {
        let [a, b, c] = self.triangles[k].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn affine_map(&self, k: usize) -> AffineMap {
        let [a, b, c] = self.triangles[k].map(|i| self.vertices[i]);
        let m = [b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]];
        AffineMap {
            b: m,
            origin: a,
            det: m[0] * m[3] - m[1] * m[2],
        }
    }

    pub fn area(&self, k: usize) -> f64 {
        0.5 * self.affine_map(k).det
    }

    /// Diameter over inradius of triangle `k`.
    pub fn chunkiness(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k].map(|i| self.vertices[i]);
        let (la, lb, lc) = (dist(b, c), dist(c, a), dist(a, b));
        let inradius = 2.0 * self.area(k) / (la + lb + lc);
        la.max(lb).max(lc) / inradius
    }

    /// Smallest interior angle of triangle `k`, in radians.
    pub fn min_angle(&self, k: usize) -> f64 {
        let p = self.triangles[k].map(|i| self.vertices[i]);
        (0..3)
            .map(|i| {
                let (o, u, v) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                let (du, dv) = ([u[0] - o[0], u[1] - o[1]], [v[0] - o[0], v[1] - o[1]]);
                let cos = (du[0] * dv[0] + du[1] * dv[1]) / (dist(u, o) * dist(v, o));
                cos.clamp(-1.0, 1.0).acos()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `x` lies on the boundary of the unit square.
    pub fn on_boundary(x: Point) -> bool {
        const TOL: f64 = 1e-14;
        x[0].abs() < TOL || x[1].abs() < TOL || (x[0] - 1.0).abs() < TOL || (x[1] - 1.0).abs() < TOL
    }

    /// JSON dump with vertices and cells, for debugging.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "level": self.level,
            "h": self.h,
            "vertices": self.vertices,
            "cells": self.triangles,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn level_zero() {
        let m = Mesh::unit_square();
        assert_eq!(m.num_vertices(), 5);
        assert_eq!(m.num_triangles(), 4);
        assert_eq!(m.num_edges(), 8);
        let total: f64 = (0..4).map(|k| m.area(k)).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-15);
        assert_eq!(m.h, 1.0);
        assert_eq!(m.boundary_edge.iter().filter(|&&b| b).count(), 4);
        assert_eq!(m.boundary_vertex, vec![true, true, true, true, false]);
    }

    #[test]
    fn level_one_counts() {
        let m = Mesh::unit_square().refine_uniform();
        assert_eq!((m.num_vertices(), m.num_edges(), m.num_triangles()), (13, 28, 16));
        assert_eq!(m.level, 1);
        assert_eq!(m.h, 0.5);
    }

    #[test]
    fn euler_and_conformity_through_level_five() {
        let mut m = Mesh::unit_square();
        let angle0 = m.min_angle(0);
        let chunk0 = m.chunkiness(0);
        for n in 0..=5 {
            let (v, e, t) = (m.num_vertices(), m.num_edges(), m.num_triangles());
            assert_eq!(v as i64 - e as i64 + t as i64, 1);
            assert_eq!(t, 4usize.pow(n as u32 + 1));
            assert_eq!(m.h, 2f64.powi(-(n as i32)));
            for (adj, &bnd) in m.edge_triangles.iter().zip(&m.boundary_edge) {
                assert_eq!(adj[1].is_some(), !bnd);
            }
            for (e, &bnd) in m.edges.iter().zip(&m.boundary_edge) {
                if bnd {
                    assert!(Mesh::on_boundary(m.vertices[e[0]]) && Mesh::on_boundary(m.vertices[e[1]]));
                }
            }
            let total: f64 = (0..t).map(|k| m.area(k)).sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-13);
            for k in 0..t {
                assert!(m.affine_map(k).det > 0.0);
                assert_relative_eq!(m.min_angle(k), angle0, epsilon = 1e-12);
                assert_relative_eq!(m.chunkiness(k), chunk0, max_relative = 1e-12);
            }
            m = m.refine_uniform();
        }
    }

    #[test]
    fn barycenters() {
        let m = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], 0);
        assert_eq!(m.barycenter(0), [1.0 / 3.0, 1.0 / 3.0]);
        let map = m.affine_map(0);
        assert_eq!(map.b, [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(map.det, 1.0);

        let sq = Mesh::unit_square();
        let c = sq.barycenter(0);
        assert_relative_eq!(c[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(c[1], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(sq.affine_map(0).det, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_numbering() {
        let a = Mesh::unit_square_level(3);
        let b = Mesh::unit_square_level(3);
        assert_eq!(a.edges, b.edges);
        assert_eq!(a.triangles, b.triangles);
    }
}
