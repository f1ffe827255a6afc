//! Published EOC tables for the manufactured-solution grid, levels 4..=7.
//!
//! Columns run over `alpha` in [`ALPHAS`], and within each `alpha` over
//! `p_minus` in [`P_MINUS`] (first pressure family) or the entries of
//! [`P_MINUS`] that are `>= 2` (second pressure family).

use serde::Serialize;

use crate::mms::PressureCase;
use crate::report::{ConvergenceReport, QUANTITIES};

pub const ALPHAS: [f64; 3] = [1.0, 0.75, 0.5];
pub const P_MINUS: [f64; 5] = [1.5, 1.75, 2.0, 2.25, 2.5];
/// Levels covered by the tables.
pub const LEVELS: [usize; 4] = [4, 5, 6, 7];

type CaseOne = [[f64; 15]; 4];
type CaseTwo = [[f64; 9]; 4];

const E_F: (CaseOne, CaseTwo) = (
    [
        [0.807, 0.765, 0.734, 0.709, 0.689, 0.614, 0.587, 0.565, 0.547, 0.532, 0.410, 0.397, 0.384, 0.373, 0.363],
        [0.830, 0.782, 0.747, 0.720, 0.699, 0.627, 0.594, 0.568, 0.548, 0.532, 0.422, 0.401, 0.385, 0.372, 0.361],
        [0.836, 0.787, 0.751, 0.723, 0.701, 0.629, 0.594, 0.568, 0.547, 0.530, 0.424, 0.401, 0.384, 0.370, 0.358],
        [0.837, 0.788, 0.751, 0.723, 0.701, 0.629, 0.594, 0.566, 0.545, 0.528, 0.424, 0.400, 0.382, 0.368, 0.356],
    ],
    [
        [0.784, 0.725, 0.659, 0.731, 0.732, 0.732, 0.511, 0.513, 0.513],
        [0.912, 0.892, 0.864, 0.747, 0.748, 0.747, 0.515, 0.515, 0.514],
        [0.961, 0.954, 0.944, 0.753, 0.753, 0.753, 0.515, 0.514, 0.513],
        [0.983, 0.980, 0.975, 0.755, 0.755, 0.755, 0.514, 0.513, 0.512],
    ],
);

const E_FSTAR: (CaseOne, CaseTwo) = (
    [
        [0.795, 0.757, 0.728, 0.704, 0.685, 0.597, 0.575, 0.556, 0.540, 0.526, 0.385, 0.380, 0.372, 0.363, 0.356],
        [0.824, 0.778, 0.744, 0.718, 0.697, 0.617, 0.587, 0.563, 0.544, 0.529, 0.405, 0.390, 0.377, 0.365, 0.355],
        [0.833, 0.784, 0.749, 0.722, 0.700, 0.624, 0.590, 0.565, 0.544, 0.528, 0.413, 0.394, 0.378, 0.365, 0.355],
        [0.836, 0.786, 0.750, 0.723, 0.700, 0.626, 0.591, 0.565, 0.544, 0.527, 0.417, 0.395, 0.378, 0.365, 0.354],
    ],
    [
        [0.777, 0.721, 0.656, 0.722, 0.725, 0.726, 0.499, 0.503, 0.506],
        [0.907, 0.889, 0.862, 0.742, 0.743, 0.744, 0.506, 0.508, 0.509],
        [0.959, 0.952, 0.942, 0.750, 0.750, 0.750, 0.509, 0.509, 0.510],
        [0.981, 0.979, 0.974, 0.753, 0.753, 0.753, 0.510, 0.510, 0.510],
    ],
);

const E_PHISTAR: (CaseOne, CaseTwo) = (
    [
        [0.858, 0.803, 0.764, 0.735, 0.711, 0.656, 0.615, 0.585, 0.562, 0.543, 0.462, 0.429, 0.405, 0.387, 0.373],
        [0.849, 0.796, 0.758, 0.729, 0.706, 0.645, 0.606, 0.577, 0.554, 0.536, 0.448, 0.418, 0.395, 0.379, 0.365],
        [0.844, 0.792, 0.755, 0.726, 0.704, 0.639, 0.600, 0.572, 0.549, 0.532, 0.439, 0.411, 0.390, 0.373, 0.360],
        [0.840, 0.790, 0.753, 0.725, 0.702, 0.634, 0.597, 0.568, 0.547, 0.529, 0.434, 0.406, 0.386, 0.370, 0.358],
    ],
    [
        [0.961, 0.969, 0.978, 0.766, 0.763, 0.762, 0.537, 0.532, 0.528],
        [0.976, 0.977, 0.979, 0.762, 0.760, 0.759, 0.527, 0.523, 0.521],
        [0.987, 0.987, 0.986, 0.760, 0.759, 0.758, 0.522, 0.519, 0.517],
        [0.995, 0.994, 0.993, 0.759, 0.758, 0.758, 0.518, 0.516, 0.514],
    ],
);

const E_L2: (CaseOne, CaseTwo) = (
    [
        [1.754, 1.733, 1.713, 1.691, 1.666, 1.660, 1.662, 1.659, 1.653, 1.643, 1.548, 1.571, 1.586, 1.596, 1.601],
        [1.805, 1.775, 1.750, 1.725, 1.699, 1.683, 1.679, 1.676, 1.670, 1.660, 1.562, 1.580, 1.594, 1.604, 1.610],
        [1.831, 1.797, 1.769, 1.742, 1.714, 1.692, 1.687, 1.684, 1.678, 1.668, 1.563, 1.580, 1.595, 1.606, 1.613],
        [1.846, 1.811, 1.782, 1.754, 1.723, 1.697, 1.692, 1.689, 1.683, 1.673, 1.561, 1.579, 1.594, 1.606, 1.614],
    ],
    [
        [1.642, 1.578, 1.484, 1.715, 1.702, 1.680, 1.645, 1.652, 1.650],
        [1.763, 1.721, 1.664, 1.750, 1.737, 1.716, 1.658, 1.666, 1.665],
        [1.828, 1.787, 1.740, 1.769, 1.755, 1.732, 1.664, 1.672, 1.672],
        [1.863, 1.819, 1.770, 1.781, 1.766, 1.742, 1.666, 1.674, 1.674],
    ],
);

const TABLES: [(CaseOne, CaseTwo); 4] = [E_F, E_FSTAR, E_PHISTAR, E_L2];

fn index_of(values: &[f64], x: f64) -> Option<usize> {
    values.iter().position(|v| (v - x).abs() < 1e-12)
}

/// Published EOC of quantity `q` (index into [`QUANTITIES`]) at level `n`,
/// or `None` outside the tabulated grid (including the `---` cells).
pub fn published_eoc(q: usize, case: PressureCase, alpha: f64, p_minus: f64, n: usize) -> Option<f64> {
    let table = TABLES.get(q)?;
    let row = LEVELS.iter().position(|&l| l == n)?;
    let a = index_of(&ALPHAS, alpha)?;
    let p = index_of(&P_MINUS, p_minus)?;
    match case {
        PressureCase::One => Some(table.0[row][5 * a + p]),
        PressureCase::Two => p.checked_sub(2).map(|p| table.1[row][3 * a + p]),
    }
}

/// One computed EOC compared against its published value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableCheck {
    pub quantity: &'static str,
    pub n: usize,
    pub computed: f64,
    pub published: f64,
    pub within: bool,
}

/// Compares every EOC of `report` that has a published counterpart.
///
/// Only the parameters the tables vary are matched; `beta` and `gamma` must
/// equal `alpha` for the comparison to be meaningful, otherwise the result is
/// empty.
pub fn check_report(report: &ConvergenceReport, tol: f64) -> Vec<TableCheck> {
    let c = &report.config;
    if c.beta() != c.alpha || c.gamma() != c.alpha || c.p_plus() != c.p_minus + 1.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for row in &report.eoc {
        for (q, name) in QUANTITIES.iter().enumerate() {
            let (Some(computed), Some(published)) =
                (row.as_array()[q], published_eoc(q, c.case, c.alpha, c.p_minus, row.n))
            else {
                continue;
            };
            out.push(TableCheck {
                quantity: name,
                n: row.n,
                computed,
                published,
                within: (computed - published).abs() <= tol,
            });
        }
    }
    out
}
