//! Convergence reports and their CSV, JSON and markdown renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::convergence::{eoc, ErrorQuadruple};
use crate::error::Result;

/// Names of the four error quantities, in report order.
pub const QUANTITIES: [&str; 4] = ["e_F", "e_Fstar", "e_phistar", "e_L2"];

/// Results of one refinement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub steps: usize,
    pub unknowns: usize,
    pub errors: ErrorQuadruple,
    pub newton_iterations_total: usize,
    pub newton_iterations_max: usize,
    /// Euclidean norm of the discrete divergence of the interpolated exact
    /// velocity at the final time.
    pub divergence_residual: f64,
    /// Conjugate modular of the pressure error (`e_phistar` is its square root).
    pub phistar_modular: f64,
}

/// EOCs of the four quantities at one level; `None` where undefined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub n: usize,
    pub eoc_f: Option<f64>,
    pub eoc_fstar: Option<f64>,
    pub eoc_phistar: Option<f64>,
    pub eoc_l2: Option<f64>,
}

impl EocRow {
    pub fn as_array(&self) -> [Option<f64>; 4] {
        [self.eoc_f, self.eoc_fstar, self.eoc_phistar, self.eoc_l2]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub level: usize,
    pub message: String,
    pub exit_code: i32,
}

/// Errors and EOCs of a study, with the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: String,
    pub config: ExperimentConfig,
    /// `min(1, p_plus'/2) alpha` (first pressure family) or `alpha` (second).
    pub expected_rate: f64,
    pub levels: Vec<LevelResult>,
    /// One row per level; the row of level 0 is all `None`.
    pub eoc: Vec<EocRow>,
    pub failure: Option<StudyFailure>,
}

impl ConvergenceReport {
    pub fn new(config: ExperimentConfig, expected_rate: f64) -> Self {
        ConvergenceReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            expected_rate,
            levels: Vec::new(),
            eoc: Vec::new(),
            failure: None,
        }
    }

    /// Appends a level and its EOC row.
    pub fn push_level(&mut self, level: LevelResult) {
        let row = match self.levels.last() {
            None => EocRow {
                n: level.n,
                ..EocRow::default()
            },
            Some(prev) => {
                let (s0, s1) = (prev.h + prev.tau, level.h + level.tau);
                let (a, b) = (prev.errors.as_array(), level.errors.as_array());
                let e = |i: usize| eoc(a[i], b[i], s0, s1);
                EocRow {
                    n: level.n,
                    eoc_f: e(0),
                    eoc_fstar: e(1),
                    eoc_phistar: e(2),
                    eoc_l2: e(3),
                }
            }
        };
        self.levels.push(level);
        self.eoc.push(row);
    }

    /// EOC of quantity `q` (index into [`QUANTITIES`]) at level `n`.
    pub fn eoc_at(&self, n: usize, q: usize) -> Option<f64> {
        self.eoc.iter().find(|r| r.n == n).and_then(|r| r.as_array()[q])
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none() && self.levels.len() == self.config.max_level + 1
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,h,tau,e_F,e_Fstar,e_phistar,e_L2,eoc_F,eoc_Fstar,eoc_phistar,eoc_L2\n");
        for (lv, row) in self.levels.iter().zip(&self.eoc) {
            let e = lv.errors.as_array();
            let r = row.as_array();
            let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                lv.n,
                lv.h,
                lv.tau,
                e[0],
                e[1],
                e[2],
                e[3],
                cell(r[0]),
                cell(r[1]),
                cell(r[2]),
                cell(r[3])
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// One table per error quantity (errors and EOCs by level) with the
    /// expected rate as footer.
    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "# Convergence study: p- = {}, p+ = {}, alpha = {}, beta = {}, gamma = {}, case {}\n\n\
             delta = {}, nu0 = {}, T = {}, levels 0..={}\n",
            c.p_minus,
            c.p_plus(),
            c.alpha,
            c.beta(),
            c.gamma(),
            c.case.index(),
            c.delta,
            c.nu0,
            c.final_time,
            c.max_level
        );
        for (q, name) in QUANTITIES.iter().enumerate() {
            let _ = write!(s, "\n## {name}\n\n| n | h + tau | error | EOC |\n|---|---|---|---|\n");
            for (lv, row) in self.levels.iter().zip(&self.eoc) {
                let _ = writeln!(
                    s,
                    "| {} | {:.6} | {:.4e} | {} |",
                    lv.n,
                    lv.h + lv.tau,
                    lv.errors.as_array()[q],
                    fmt_eoc(row.as_array()[q])
                );
            }
            let _ = writeln!(s, "| expected | | | {:.3} |", self.expected_rate);
        }
        if let Some(f) = &self.failure {
            let _ = write!(s, "\nFailed at level {}: {}\n", f.level, f.message);
        }
        s
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        Ok(match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json()? + "\n",
            OutputFormat::Md => self.to_markdown(),
        })
    }
}

fn fmt_eoc(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "---".into())
}

/// Markdown in the layout of the published tables: for each quantity and
/// pressure family, rows are levels `n >= 1`, columns are `(alpha, p_minus)`
/// cells; missing cells print `---`.
pub fn matrix_markdown(reports: &[ConvergenceReport], alphas: &[f64], p_minus: &[f64], cases: &[crate::mms::PressureCase]) -> String {
    let max_n = reports.iter().map(|r| r.config.max_level).max().unwrap_or(0);
    let find = |case, alpha: f64, p: f64| {
        reports
            .iter()
            .find(|r| r.config.case == case && r.config.alpha == alpha && r.config.p_minus == p)
    };
    let mut s = String::new();
    for (q, name) in QUANTITIES.iter().enumerate() {
        let _ = writeln!(s, "## EOC({name})\n");
        let mut header = String::from("| n |");
        let mut rule = String::from("|---|");
        for a in alphas {
            for p in p_minus {
                let _ = write!(header, " a={a} p-={p} |");
                rule.push_str("---|");
            }
        }
        for &case in cases {
            let _ = writeln!(s, "Case {}\n\n{header}\n{rule}", case.index());
            for n in 1..=max_n {
                let mut line = format!("| {n} |");
                for &a in alphas {
                    for &p in p_minus {
                        let v = find(case, a, p).and_then(|r| r.eoc_at(n, q));
                        let _ = write!(line, " {} |", fmt_eoc(v));
                    }
                }
                let _ = writeln!(s, "{line}");
            }
            let mut line = String::from("| expected |");
            for &a in alphas {
                for &p in p_minus {
                    let v = find(case, a, p).map(|r| r.expected_rate);
                    let _ = write!(line, " {} |", fmt_eoc(v));
                }
            }
            let _ = writeln!(s, "{line}\n");
        }
    }
    s
}
