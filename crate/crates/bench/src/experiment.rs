use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

use mdl_svm::simgen::{self, true_beta};
use mdl_svm::{partition, Dataset, PartitionPolicy, RngState, SimModel, Vector};
use rayon::prelude::*;

use crate::error::{BenchError, Result};
use crate::methods::{run_method, FitOutcome, FitSettings};
use crate::spec::{Cell, ExperimentSpec, Kind, Method};

pub const HEADER: [&str; 16] = [
    "method", "n", "p", "m", "q", "c0", "rep", "l2_error", "v0_proj", "ci_lo", "ci_hi", "covered",
    "wall_ms", "msgs", "bytes", "error",
];

/// One fit of one method at one grid point. Numeric fields are `None` on
/// failed runs, with the message in `error`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub q: u32,
    pub c0: f64,
    pub rep: usize,
    pub l2_error: Option<f64>,
    pub v0_proj: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub covered: bool,
    pub wall_ms: f64,
    pub msgs: u64,
    pub bytes: u64,
    pub error: Option<String>,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.method.to_string(),
            self.n.to_string(),
            self.p.to_string(),
            self.m.to_string(),
            self.q.to_string(),
            self.c0.to_string(),
            self.rep.to_string(),
            opt(self.l2_error),
            opt(self.v0_proj),
            opt(self.ci_lo),
            opt(self.ci_hi),
            self.covered.to_string(),
            format!("{:.3}", self.wall_ms),
            self.msgs.to_string(),
            self.bytes.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }

    /// Standard error implied by the interval at `level`.
    pub fn se(&self, level: f64) -> Option<f64> {
        let z = mdl_svm::inference::z_value(level).ok()?;
        Some((self.ci_hi? - self.ci_lo?) / (2.0 * z))
    }
}

/// The simulation truth `ṽ₀ᵀβ*` and `β*` for dimension `p`.
pub fn truth(p: usize) -> Result<(f64, Vector)> {
    let beta = true_beta(&SimModel::new(p))?.beta_star;
    Ok((simgen::v0(p).dot(&beta), beta))
}

/// Data for replication `rep`. Grid points with the same `p` share the
/// stream, so smaller `n` sees a prefix of the larger draws.
pub fn rep_data(seed: u64, rep: usize, n: usize, p: usize) -> Result<Dataset> {
    let mut rng = RngState::new(seed, rep as u64).child(p as u64).start();
    Ok(simgen::gen(&SimModel::new(p), n, &mut rng)?)
}

type OutcomeKey = (Method, usize, usize, usize, u32, u64);

fn run_rep(spec: &ExperimentSpec, cells: &[Cell], rep: usize) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::with_capacity(cells.len() * spec.methods.len());
    let mut data: HashMap<(usize, usize), Dataset> = HashMap::new();
    // Methods that ignore q or C0 are fitted once per (n, p, m).
    let mut cache: HashMap<OutcomeKey, (std::result::Result<FitOutcome, String>, f64)> =
        HashMap::new();
    let max_n = *spec.n.iter().max().unwrap();
    for cell in cells {
        let (t, beta_star) = truth(cell.p)?;
        let v = simgen::v0(cell.p);
        let pooled = match data.entry((cell.n, cell.p)) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(rep_data(spec.seed, rep, max_n, cell.p)?.head(cell.n)),
        };
        let pooled = &*pooled;
        let shards = partition(pooled, cell.n / cell.m, &PartitionPolicy::Equal)?;
        for &method in &spec.methods {
            let settings = FitSettings {
                q: cell.q,
                c0: cell.c0,
                lambda: spec.lambda,
                inner_iters: spec.inner_iters,
                level: spec.level,
            };
            let key: OutcomeKey = match method {
                Method::Mdl | Method::MdlCe => {
                    (method, cell.n, cell.p, cell.m, cell.q, cell.c0.to_bits())
                }
                Method::NaiveDc => (method, cell.n, cell.p, cell.m, 0, cell.c0.to_bits()),
                Method::Oracle => (method, cell.n, cell.p, 0, 0, cell.c0.to_bits()),
            };
            let (outcome, wall_ms) = cache
                .entry(key)
                .or_insert_with(|| {
                    let start = Instant::now();
                    let out = run_method(method, &shards, pooled, &v, &settings)
                        .map_err(|e| e.to_string());
                    (out, start.elapsed().as_secs_f64() * 1e3)
                })
                .clone();
            let mut row = ResultRow {
                method,
                n: cell.n,
                p: cell.p,
                m: cell.m,
                q: cell.q,
                c0: cell.c0,
                rep,
                l2_error: None,
                v0_proj: None,
                ci_lo: None,
                ci_hi: None,
                covered: false,
                wall_ms,
                msgs: 0,
                bytes: 0,
                error: None,
            };
            match outcome {
                Ok(out) => {
                    row.l2_error = Some(out.estimate.sub(&beta_star).norm());
                    row.v0_proj = Some(out.ci.center);
                    row.ci_lo = Some(out.ci.lo());
                    row.ci_hi = Some(out.ci.hi());
                    row.covered = out.ci.contains(t);
                    row.msgs = out.msgs;
                    row.bytes = out.bytes;
                }
                Err(e) => row.error = Some(e),
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Run every `(grid point, method, rep)` and return rows in that order.
/// Replications run in parallel; failed fits become error rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    if spec.kind == Kind::LossCurve {
        return Err(BenchError::InvalidSpec(
            "loss-curve produces kernel samples, not fits".into(),
        ));
    }
    let cells = spec.cells();
    let per_rep: Vec<Vec<ResultRow>> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| run_rep(spec, &cells, rep))
        .collect::<Result<_>>()?;
    let width = cells.len() * spec.methods.len();
    let mut rows = Vec::with_capacity(width * spec.reps);
    for slot in 0..width {
        rows.extend(per_rep.iter().map(|r| r[slot].clone()));
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}
