//! Symmetric Gauss rules on the reference triangle `{(0,0), (1,0), (0,1)}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::nfunc::Point;

/// Quadrature rule on the reference triangle. Weights sum to 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Degrees for which [`rule`] has a table.
pub const SUPPORTED_DEGREES: [usize; 4] = [2, 4, 6, 8];

// Dunavant orbits in barycentric coordinates; weights are given for unit total area.
// `Three(b, w)` is the orbit of (1-2b, b, b), `Six(a, b, w)` all permutations of (a, b, 1-a-b).
enum Orbit {
    Centroid(f64),
    Three(f64, f64),
    Six(f64, f64, f64),
}

const DEG2: &[Orbit] = &[Orbit::Three(1.0 / 6.0, 1.0 / 3.0)];

const DEG4: &[Orbit] = &[
    Orbit::Three(0.445_948_490_915_965, 0.223_381_589_678_011),
    Orbit::Three(0.091_576_213_509_771, 0.109_951_743_655_322),
];

const DEG6: &[Orbit] = &[
    Orbit::Three(0.249_286_745_170_910, 0.116_786_275_726_379),
    Orbit::Three(0.063_089_014_491_502, 0.050_844_906_370_207),
    Orbit::Six(0.053_145_049_844_817, 0.310_352_451_033_784, 0.082_851_075_618_374),
];

const DEG8: &[Orbit] = &[
    Orbit::Centroid(0.144_315_607_677_787),
    Orbit::Three(0.459_292_588_292_723, 0.095_091_634_267_285),
    Orbit::Three(0.170_569_307_751_760, 0.103_217_370_534_718),
    Orbit::Three(0.050_547_228_317_031, 0.032_458_497_623_198),
    Orbit::Six(0.008_394_777_409_958, 0.263_112_829_634_638, 0.027_230_314_174_435),
];

fn expand(orbits: &[Orbit], degree: usize) -> QuadRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for orbit in orbits {
        match *orbit {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0, 1.0 / 3.0]);
                weights.push(w);
            }
            Orbit::Three(b, w) => {
                let a = 1.0 - 2.0 * b;
                // barycentric (a, b, b) and rotations; reference coords are (l1, l2)
                for p in [[b, b], [a, b], [b, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            Orbit::Six(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b], [b, a], [b, c], [c, b], [a, c], [c, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w *= 0.5 / total);
    QuadRule {
        points,
        weights,
        degree,
    }
}

/// Rule exact for polynomials of total degree `degree`.
pub fn rule(degree: usize) -> Result<QuadRule> {
    let orbits = match degree {
        2 => DEG2,
        4 => DEG4,
        6 => DEG6,
        8 => DEG8,
        _ => {
            return Err(Error::Config(format!(
                "unsupported quadrature degree {degree} (supported: {SUPPORTED_DEGREES:?})"
            )))
        }
    };
    Ok(expand(orbits, degree))
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral over the reference triangle.
    pub fn integrate_reference(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// `sum_K det(B_K) sum_q w_q f(x_{K,q})` over the whole mesh.
///
/// Element sums are computed in parallel and reduced in element order.
pub fn integrate_mesh<F>(mesh: &Mesh, rule: &QuadRule, f: F) -> f64
where
    F: Fn(Point) -> f64 + Sync,
{
    let per_element: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let map = mesh.affine_map(k);
            let local: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&p, &w)| w * f(map.apply(p)))
                .sum();
            local * map.det
        })
        .collect();
    per_element.iter().sum()
}

/// Fallible variant of [`integrate_mesh`].
pub fn try_integrate_mesh<F>(mesh: &Mesh, rule: &QuadRule, f: F) -> Result<f64>
where
    F: Fn(Point) -> Result<f64> + Sync,
{
    let per_element: Result<Vec<f64>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| {
            let map = mesh.affine_map(k);
            let mut local = 0.0;
            for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                local += w * f(map.apply(p))?;
            }
            Ok(local * map.det)
        })
        .collect();
    Ok(per_element?.iter().sum())
}
