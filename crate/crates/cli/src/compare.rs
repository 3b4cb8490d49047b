//! Differences between two run artifacts.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::report::{Report, HISTORY_FILE, REPORT_FILE};
use crate::table::{read_table, NodalTable};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareOptions {
    /// Compare only scalar results; grids may differ.
    pub scalars_only: bool,
    /// Largest difference still accepted.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub table: String,
    pub linf: f64,
    /// Absolute difference integrated with equal cell weights.
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub fields: Vec<FieldDiff>,
    /// Tables present in only one artifact.
    pub missing_tables: Vec<String>,
    pub e_infty_a: f64,
    pub e_infty_b: f64,
    pub e_infty_delta: f64,
    pub e_infty_relative_delta: f64,
    /// Largest relative change of `e_p` over the shared history levels.
    pub history_max_diff: f64,
    pub history_levels: [usize; 2],
    pub verdict_a: bool,
    pub verdict_b: bool,
    /// Certificate checks whose pass flags differ.
    pub check_flips: Vec<String>,
    pub identical: bool,
    pub pass: bool,
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

fn relative(a: f64, b: f64) -> f64 {
    if same(a, b) {
        return 0.0;
    }
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn field_tables(report: &Report) -> BTreeSet<String> {
    report.tables.iter().filter(|t| *t != HISTORY_FILE).cloned().collect()
}

fn field_diff(name: &str, a: &NodalTable, b: &NodalTable, volume: f64) -> Result<FieldDiff, CliError> {
    let aligned = a.dim == b.dim
        && a.coords.len() == b.coords.len()
        && a.coords.iter().zip(&b.coords).all(|(x, y)| same(x[0], y[0]) && same(x[1], y[1]));
    if !aligned {
        return Err(CliError::GridMismatch(format!("{name} has different nodes in the two artifacts")));
    }
    let (mut linf, mut sum) = (0.0_f64, 0.0);
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = if same(*x, *y) { 0.0 } else { (x - y).abs() };
        let d = if d.is_nan() { f64::INFINITY } else { d };
        linf = linf.max(d);
        sum += d;
    }
    let n = a.values.len().max(1) as f64;
    Ok(FieldDiff {
        table: name.into(),
        linf,
        l1: sum * volume / n,
    })
}

pub fn compare(dir_a: &Path, dir_b: &Path, options: &CompareOptions) -> Result<Comparison, CliError> {
    let a = Report::load(&dir_a.join(REPORT_FILE))?;
    let b = Report::load(&dir_b.join(REPORT_FILE))?;
    let mut fields = Vec::new();
    let mut missing = Vec::new();
    if !options.scalars_only {
        if a.grid.extent != b.grid.extent || a.grid.nodes != b.grid.nodes {
            return Err(CliError::GridMismatch(format!(
                "{:?} nodes on {:?} against {:?} nodes on {:?}",
                a.grid.nodes, a.grid.extent, b.grid.nodes, b.grid.extent
            )));
        }
        let volume: f64 = a.grid.extent.iter().product();
        let (ta, tb) = (field_tables(&a), field_tables(&b));
        missing = ta.symmetric_difference(&tb).cloned().collect();
        for name in ta.intersection(&tb) {
            let x = read_table(&dir_a.join(name))?;
            let y = read_table(&dir_b.join(name))?;
            fields.push(field_diff(name, &x, &y, volume)?);
        }
    }

    let (ha, hb) = (a.history(), b.history());
    let history_max_diff = ha
        .iter()
        .zip(hb)
        .map(|(x, y)| if same(x.p, y.p) { relative(x.e_p, y.e_p) } else { f64::INFINITY })
        .fold(0.0, f64::max);
    let flips = match (&a.certificate, &b.certificate) {
        (Some(ca), Some(cb)) => {
            let mut out: Vec<String> = ca
                .checks
                .iter()
                .filter(|c| cb.checks.iter().find(|d| d.name == c.name).map_or(true, |d| d.pass != c.pass))
                .map(|c| c.name.clone())
                .collect();
            out.extend(cb.checks.iter().filter(|d| !ca.checks.iter().any(|c| c.name == d.name)).map(|d| d.name.clone()));
            out
        }
        (None, None) => Vec::new(),
        _ => vec!["certificate".into()],
    };
    let delta = if same(a.e_infty_estimate, b.e_infty_estimate) {
        0.0
    } else {
        (a.e_infty_estimate - b.e_infty_estimate).abs()
    };
    let rel = relative(a.e_infty_estimate, b.e_infty_estimate);
    let history_levels = [ha.len(), hb.len()];
    let histories_match = options.scalars_only || ha.len() == hb.len();
    let identical = fields.iter().all(|f| f.linf == 0.0)
        && missing.is_empty()
        && delta == 0.0
        && history_max_diff == 0.0
        && histories_match
        && a.verdict == b.verdict
        && flips.is_empty();
    let tol = options.tolerance;
    let pass = fields.iter().all(|f| f.linf <= tol)
        && missing.is_empty()
        && rel <= tol
        && (options.scalars_only || (history_max_diff <= tol && histories_match))
        && a.verdict == b.verdict;
    Ok(Comparison {
        fields,
        missing_tables: missing,
        e_infty_a: a.e_infty_estimate,
        e_infty_b: b.e_infty_estimate,
        e_infty_delta: delta,
        e_infty_relative_delta: rel,
        history_max_diff,
        history_levels,
        verdict_a: a.verdict,
        verdict_b: b.verdict,
        check_flips: flips,
        identical,
        pass,
    })
}
