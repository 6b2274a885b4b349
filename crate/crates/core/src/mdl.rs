//! The multi-round distributed linear-type estimator.
//!
//! Each round the coordinator broadcasts a reference point `β₀` and a
//! bandwidth `h`; worker `k` answers with
//!
//! ```text
//! U_k = (1/n) Σ_{i∈D_k} yᵢ x̃ᵢ [H(rᵢ/h) + H'(rᵢ/h)/h]
//! V_k = (1/n) Σ_{i∈D_k} x̃ᵢ x̃ᵢᵀ H'(rᵢ/h)/h,        rᵢ = 1 − yᵢ x̃ᵢᵀβ₀
//! ```
//!
//! (with the global `n`), and the next estimate solves
//! `(Σ V_k) β = Σ U_k − λ(0, β₀)`. The communication-efficient variant
//! replaces that solve by `T` preconditioned steps that only ship the
//! `(p+1)`-vectors `V_k β − U_k`.

use crate::data::Shard;
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_symmetric, solve_with_factor, Cholesky};
use crate::protocol::{
    Cluster, CommStats, DirectCluster, Message, WorkerConfig, MODE_GRADIENT, MODE_SUMMARY,
};
use crate::smoothing::{required_rounds, BandwidthSchedule, SmoothKernel};
use crate::solver::SolverOptions;
use crate::{Matrix, Vector};

/// Augmented coefficient `β̃ = (β₀, β)`; the intercept is never penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefVector(Vector);

impl CoefVector {
    pub fn new(intercept: f64, slopes: &[f64]) -> Result<Self> {
        let mut v = Vec::with_capacity(slopes.len() + 1);
        v.push(intercept);
        v.extend_from_slice(slopes);
        Self::from_vector(Vector::from_vec(v))
    }

    pub fn from_vector(v: Vector) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidConfiguration(
                "empty coefficient vector".into(),
            ));
        }
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self(v))
    }

    pub fn intercept(&self) -> f64 {
        self.0[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.0.as_slice()[1..]
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn into_vector(self) -> Vector {
        self.0
    }

    /// `(0, β)`, the gradient direction of the ridge penalty.
    pub fn penalty_direction(&self) -> Vector {
        penalty_direction(&self.0)
    }
}

pub(crate) fn penalty_direction(beta: &Vector) -> Vector {
    let mut v = beta.clone();
    v[0] = 0.0;
    v
}

/// One shard's `(U_k, V_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkerSummary {
    pub u: Vector,
    pub v: Matrix,
    pub count: u64,
}

impl WorkerSummary {
    pub fn dim(&self) -> usize {
        self.u.len()
    }
}

fn check_beta(shard: &Shard, beta: &Vector) -> Result<()> {
    if beta.len() != shard.p() + 1 {
        return Err(Error::DimMismatch {
            expected: shard.p() + 1,
            found: beta.len(),
        });
    }
    if !beta.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `(U_k, V_k)` of `shard` at reference point `beta_ref` and bandwidth `h`,
/// scaled by the shard's `n_total`.
pub fn worker_summary(shard: &Shard, beta_ref: &Vector, h: f64) -> Result<WorkerSummary> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    check_beta(shard, beta_ref)?;
    let d = shard.p() + 1;
    let mut u = vec![0.0; d];
    let mut v = Matrix::zeros(d, d);
    let mut xt = vec![1.0; d];
    for i in 0..shard.len() {
        let (y, x) = shard.row(i);
        xt[1..].copy_from_slice(x);
        let r = 1.0 - y * dot(&xt, beta_ref.as_slice());
        let t = r / h;
        if t <= -1.0 {
            continue;
        }
        let dh = SmoothKernel::derivative(t);
        let coef = y * (SmoothKernel::value(t) + dh / h);
        for (uj, &xj) in u.iter_mut().zip(&xt) {
            *uj += coef * xj;
        }
        if dh > 0.0 {
            v.rank_one_update_upper(dh / h, &xt);
        }
    }
    v.mirror_upper();
    let inv_n = 1.0 / shard.n_total as f64;
    let mut u = Vector::from_vec(u);
    u.scale(inv_n);
    v.scale(inv_n);
    Ok(WorkerSummary {
        u,
        v,
        count: shard.len() as u64,
    })
}

/// `(1/n) Σ_{i∈D_k} x̃ᵢx̃ᵢᵀ 1{1 − yᵢx̃ᵢᵀβ ≥ 0}`.
pub fn indicator_gram(shard: &Shard, beta: &Vector) -> Matrix {
    let d = shard.p() + 1;
    let mut g = Matrix::zeros(d, d);
    let mut xt = vec![1.0; d];
    for i in 0..shard.len() {
        let (y, x) = shard.row(i);
        xt[1..].copy_from_slice(x);
        if 1.0 - y * dot(&xt, beta.as_slice()) >= 0.0 {
            g.rank_one_update_upper(1.0, &xt);
        }
    }
    g.mirror_upper();
    g.scale(1.0 / shard.n_total as f64);
    g
}

/// `(Σ U_k, Σ V_k)`, summed left to right.
pub fn sum_summaries(summaries: &[WorkerSummary]) -> Result<(Vector, Matrix)> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::InvalidConfiguration("no summaries to aggregate".into()))?;
    let d = first.dim();
    let mut u = Vector::zeros(d);
    let mut v = Matrix::zeros(d, d);
    for s in summaries {
        if s.dim() != d || s.v.rows() != d || s.v.cols() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: s.dim(),
            });
        }
        u.axpy(1.0, &s.u);
        v.add_assign(&s.v);
    }
    Ok((u, v))
}

/// Solve `(Σ V_k) β = Σ U_k − λ(0, β_ref)`.
pub fn aggregate(
    summaries: &[WorkerSummary],
    lambda: f64,
    beta_ref: &Vector,
    round: u32,
) -> Result<Vector> {
    let (mut u, v) = sum_summaries(summaries)?;
    if beta_ref.len() != u.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            found: beta_ref.len(),
        });
    }
    if lambda != 0.0 {
        u.axpy(-lambda, &penalty_direction(beta_ref));
    }
    solve_symmetric(&v, &u).map_err(|e| match e {
        Error::Singular => Error::AggregationSingular { round },
        other => other,
    })
}

/// Factor of `N·V̂₁`, the approximate Hessian of the inner iterations.
#[derive(Clone, Debug)]
pub struct Preconditioner {
    matrix: Matrix,
    factor: Cholesky<f64>,
}

impl Preconditioner {
    pub fn new(vhat1: &Matrix, shards: usize) -> Result<Self> {
        let mut scaled = vhat1.clone();
        scaled.scale(shards as f64);
        let factor = Cholesky::factor(&scaled).map_err(|e| match e {
            Error::Singular => Error::AggregationSingular { round: 0 },
            other => other,
        })?;
        Ok(Self {
            matrix: scaled,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }
}

/// `β_t − (N V̂₁)⁻¹ (Σ_k w_k + λ(0, β_ref))` with `w_k = V_k β_t − U_k`.
pub fn approx_newton_step(
    beta_t: &Vector,
    grad_replies: &[Vector],
    precond: &Preconditioner,
    lambda: f64,
    beta_ref: &Vector,
) -> Result<Vector> {
    let d = beta_t.len();
    if precond.dim() != d || beta_ref.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: precond.dim(),
        });
    }
    let mut grad = Vector::zeros(d);
    for w in grad_replies {
        if w.len() != d {
            return Err(Error::DimMismatch {
                expected: d,
                found: w.len(),
            });
        }
        grad.axpy(1.0, w);
    }
    if lambda != 0.0 {
        grad.axpy(lambda, &penalty_direction(beta_ref));
    }
    let step = solve_with_factor(&precond.matrix, &precond.factor, &grad)?;
    Ok(beta_t.sub(&step))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Ship `(U_k, V_k)` and solve the aggregated system each round.
    FullHessian,
    /// Ship `V_k β − U_k` and take preconditioned inner steps.
    ApproxNewton,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdlConfig {
    /// Number of rounds; `None` uses [`required_rounds`].
    pub q: Option<u32>,
    pub c0: f64,
    pub lambda: f64,
    pub mode: Mode,
    /// Inner iterations per round in [`Mode::ApproxNewton`].
    pub inner_iters: u32,
    /// Keep per-round estimates (and inner iterates) in the fit.
    pub trace: bool,
    /// Penalty for the initializer's local fit.
    pub init_lambda: f64,
    /// Recompute `V̂₁` at every round's reference point instead of once.
    pub recompute_vhat: bool,
    pub solver: SolverOptions,
}

impl Default for MdlConfig {
    fn default() -> Self {
        Self {
            q: None,
            c0: 1.0,
            lambda: 0.0,
            mode: Mode::FullHessian,
            inner_iters: 10,
            trace: false,
            init_lambda: 0.0,
            recompute_vhat: false,
            solver: SolverOptions::default(),
        }
    }
}

impl MdlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q == Some(0) {
            return Err(Error::InvalidConfiguration("q must be at least 1".into()));
        }
        if self.mode == Mode::ApproxNewton && self.inner_iters == 0 {
            return Err(Error::InvalidConfiguration(
                "inner iterations must be at least 1".into(),
            ));
        }
        if !(self.init_lambda >= 0.0 && self.init_lambda.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "initializer lambda must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn worker_config(&self) -> WorkerConfig {
        WorkerConfig {
            init_lambda: self.init_lambda,
            solver: self.solver.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u32,
    pub h: f64,
    /// `β̃^{(g)}`.
    pub estimate: Vector,
    /// Inner iterates `β^{(g,1)}, …, β^{(g,T)}` (approximate-Newton mode).
    pub inner: Vec<Vector>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdlFit {
    /// Index of the shard that computed the initializer.
    pub init_shard: usize,
    pub initial: Vector,
    /// `β̃^{(q)}`.
    pub estimate: Vector,
    /// `β̃^{(q−1)}`, the reference point of the last round.
    pub previous: Vector,
    pub q: u32,
    /// Bandwidth of the last round.
    pub last_h: f64,
    /// Per-round records; empty unless tracing.
    pub rounds: Vec<RoundRecord>,
    /// Last round's summaries in shard order (full-Hessian mode only).
    pub final_summaries: Option<Vec<WorkerSummary>>,
    pub comm: CommStats,
}

/// Largest shard, ties to the lowest id.
pub fn initializer_shard(sizes: &[usize]) -> usize {
    let mut best = 0;
    for (k, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn expect_summary(worker: usize, msg: Message) -> Result<WorkerSummary> {
    match msg {
        Message::SummaryReply { u, v, count, .. } => Ok(WorkerSummary { u, v, count }),
        other => Err(Error::UnexpectedReply {
            worker,
            detail: format!("expected a summary, got message type {}", other.type_code()),
        }),
    }
}

fn expect_grad(worker: usize, msg: Message) -> Result<Vector> {
    match msg {
        Message::GradReply { w, .. } => Ok(w),
        other => Err(Error::UnexpectedReply {
            worker,
            detail: format!(
                "expected a gradient, got message type {}",
                other.type_code()
            ),
        }),
    }
}

fn expect_init(worker: usize, msg: Message) -> Result<Vector> {
    match msg {
        Message::InitReply { beta0 } => Ok(beta0),
        other => Err(Error::UnexpectedReply {
            worker,
            detail: format!(
                "expected an initializer, got message type {}",
                other.type_code()
            ),
        }),
    }
}

/// Gather `(U_k, V_k)` from every worker at `(beta_ref, h)`.
pub fn gather_summaries(
    cluster: &mut dyn Cluster,
    round: u32,
    h: f64,
    lambda: f64,
    beta_ref: &Vector,
) -> Result<Vec<WorkerSummary>> {
    let replies = cluster.broadcast_gather(&Message::BetaBroadcast {
        round,
        h,
        lambda,
        beta: beta_ref.clone(),
        mode: MODE_SUMMARY,
    })?;
    replies
        .into_iter()
        .enumerate()
        .map(|(k, m)| expect_summary(k, m))
        .collect()
}

/// Run the estimator over `cluster` (either mode).
pub fn fit(cluster: &mut dyn Cluster, cfg: &MdlConfig) -> Result<MdlFit> {
    cfg.validate()?;
    let sizes = cluster.shard_sizes().to_vec();
    let n = cluster.n_total() as usize;
    let p = cluster.p();
    let init = initializer_shard(&sizes);
    let m = sizes[init];
    let schedule = BandwidthSchedule::new(cfg.c0, cfg.lambda, p, n, m)?;
    let q = match cfg.q {
        Some(q) => q,
        None => required_rounds(n, m, p)?,
    };

    let initial = expect_init(init, cluster.request(init, &Message::InitRequest)?)?;
    if initial.len() != p + 1 {
        return Err(Error::DimMismatch {
            expected: p + 1,
            found: initial.len(),
        });
    }

    let mut current = initial.clone();
    let mut previous = initial.clone();
    let mut rounds = Vec::new();
    let mut final_summaries = None;
    let mut last_h = schedule.bandwidth(1);

    let vhat_h = (p as f64 / m as f64).sqrt();
    let fetch_precond = |cluster: &mut dyn Cluster, beta: &Vector| -> Result<Preconditioner> {
        let reply = cluster.request(
            init,
            &Message::BetaBroadcast {
                round: 0,
                h: vhat_h,
                lambda: cfg.lambda,
                beta: beta.clone(),
                mode: MODE_SUMMARY,
            },
        )?;
        Preconditioner::new(&expect_summary(init, reply)?.v, sizes.len())
    };
    let mut precond = match cfg.mode {
        Mode::ApproxNewton => Some(fetch_precond(cluster, &initial)?),
        Mode::FullHessian => None,
    };

    for g in 1..=q {
        let h = schedule.bandwidth(g);
        last_h = h;
        let mut inner = Vec::new();
        let next = match cfg.mode {
            Mode::FullHessian => {
                let summaries = gather_summaries(cluster, g, h, cfg.lambda, &current)?;
                let next = aggregate(&summaries, cfg.lambda, &current, g)?;
                final_summaries = Some(summaries);
                next
            }
            Mode::ApproxNewton => {
                if cfg.recompute_vhat && g > 1 {
                    precond = Some(fetch_precond(cluster, &current)?);
                }
                let pc = precond.as_ref().unwrap();
                let mut beta_t = current.clone();
                for _ in 0..cfg.inner_iters {
                    let replies = cluster.broadcast_gather(&Message::BetaBroadcast {
                        round: g,
                        h,
                        lambda: cfg.lambda,
                        beta: beta_t.clone(),
                        mode: MODE_GRADIENT,
                    })?;
                    let grads = replies
                        .into_iter()
                        .enumerate()
                        .map(|(k, m)| expect_grad(k, m))
                        .collect::<Result<Vec<_>>>()?;
                    beta_t = approx_newton_step(&beta_t, &grads, pc, cfg.lambda, &current)?;
                    if cfg.trace {
                        inner.push(beta_t.clone());
                    }
                }
                beta_t
            }
        };
        if !next.is_finite() {
            return Err(Error::NonFinite);
        }
        if cfg.trace {
            rounds.push(RoundRecord {
                round: g,
                h,
                estimate: next.clone(),
                inner,
            });
        }
        previous = std::mem::replace(&mut current, next);
    }

    Ok(MdlFit {
        init_shard: init,
        initial,
        estimate: current,
        previous,
        q,
        last_h,
        rounds,
        final_summaries,
        comm: cluster.stats(),
    })
}

/// Algorithm with full summaries on an in-process cluster.
pub fn mdl_fit(shards: &[Shard], cfg: &MdlConfig) -> Result<MdlFit> {
    let cfg = MdlConfig {
        mode: Mode::FullHessian,
        ..cfg.clone()
    };
    let mut cluster = DirectCluster::new(shards.to_vec(), cfg.worker_config())?;
    fit(&mut cluster, &cfg)
}

/// Communication-efficient variant on an in-process cluster.
pub fn mdl_fit_ce(shards: &[Shard], cfg: &MdlConfig) -> Result<MdlFit> {
    let cfg = MdlConfig {
        mode: Mode::ApproxNewton,
        ..cfg.clone()
    };
    let mut cluster = DirectCluster::new(shards.to_vec(), cfg.worker_config())?;
    fit(&mut cluster, &cfg)
}

/// Naive divide-and-conquer over a cluster: every worker fits locally and
/// the coordinator averages in shard order.
pub fn naive_dc_over(cluster: &mut dyn Cluster) -> Result<Vector> {
    let replies = cluster.broadcast_gather(&Message::InitRequest)?;
    let mut acc = Vector::zeros(cluster.p() + 1);
    let count = replies.len();
    for (k, reply) in replies.into_iter().enumerate() {
        acc.axpy(1.0, &expect_init(k, reply)?);
    }
    acc.scale(1.0 / count as f64);
    Ok(acc)
}
