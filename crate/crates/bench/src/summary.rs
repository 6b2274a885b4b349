use std::io::Write;

use crate::error::Result;
use crate::experiment::{truth, ResultRow};
use crate::spec::Method;

/// Statistics of one `(method, n, p, m, q, c0)` cell over its successful
/// replications.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub q: u32,
    pub c0: f64,
    pub reps: usize,
    pub failures: usize,
    pub mean_v0_proj: Option<f64>,
    pub bias2: Option<f64>,
    /// Sample variance with the `n − 1` divisor.
    pub var: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_l2: Option<f64>,
    pub mean_se: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "method",
    "n",
    "p",
    "m",
    "q",
    "c0",
    "reps",
    "failures",
    "mean_v0_proj",
    "bias2",
    "var",
    "coverage",
    "mean_l2",
    "mean_se",
];

fn same_cell(a: &ResultRow, b: &ResultRow) -> bool {
    a.method == b.method && a.n == b.n && a.p == b.p && a.m == b.m && a.q == b.q && a.c0 == b.c0
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Summarize against the simulation truth for each row's `p`.
pub fn summarize(rows: &[ResultRow], level: f64) -> Result<Vec<SummaryRow>> {
    let mut truths = std::collections::HashMap::new();
    for r in rows {
        if let std::collections::hash_map::Entry::Vacant(e) = truths.entry(r.p) {
            e.insert(truth(r.p)?.0);
        }
    }
    Ok(summarize_with(rows, level, |p| truths[&p]))
}

/// Summarize against an arbitrary truth. Cells are listed in order of
/// first appearance.
pub fn summarize_with(
    rows: &[ResultRow],
    level: f64,
    truth: impl Fn(usize) -> f64,
) -> Vec<SummaryRow> {
    let mut cells: Vec<Vec<&ResultRow>> = Vec::new();
    for r in rows {
        match cells.iter_mut().find(|c| same_cell(c[0], r)) {
            Some(c) => c.push(r),
            None => cells.push(vec![r]),
        }
    }
    cells
        .into_iter()
        .map(|c| {
            let first = c[0];
            let ok: Vec<&ResultRow> = c.iter().copied().filter(|r| !r.is_error()).collect();
            let proj: Vec<f64> = ok.iter().filter_map(|r| r.v0_proj).collect();
            let l2: Vec<f64> = ok.iter().filter_map(|r| r.l2_error).collect();
            let se: Vec<f64> = ok.iter().filter_map(|r| r.se(level)).collect();
            let mean_v0 = mean(&proj);
            let var = (proj.len() >= 2).then(|| {
                let mu = mean_v0.unwrap();
                proj.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (proj.len() - 1) as f64
            });
            let covered: Vec<f64> = ok
                .iter()
                .map(|r| if r.covered { 1.0 } else { 0.0 })
                .collect();
            SummaryRow {
                method: first.method,
                n: first.n,
                p: first.p,
                m: first.m,
                q: first.q,
                c0: first.c0,
                reps: c.len(),
                failures: c.len() - ok.len(),
                mean_v0_proj: mean_v0,
                bias2: mean_v0.map(|mu| (mu - truth(first.p)).powi(2)),
                var,
                coverage: mean(&covered),
                mean_l2: mean(&l2),
                mean_se: mean(&se),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.m.to_string(),
            r.q.to_string(),
            r.c0.to_string(),
            r.reps.to_string(),
            r.failures.to_string(),
            opt(r.mean_v0_proj),
            opt(r.bias2),
            opt(r.var),
            opt(r.coverage),
            opt(r.mean_l2),
            opt(r.mean_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}
