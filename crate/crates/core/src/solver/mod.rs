//! Single-machine linear SVM solver.
//!
//! Used for the initializer on one shard, for the pooled-data oracle, and for
//! every local fit of the naive divide-and-conquer average.
//!
//! The hinge objective `(1/n) Σ (1 − y x̃ᵀβ)₊ + (λ/2)‖β₁..ₚ‖²` is minimized in
//! two stages. A smoothed surrogate (hinge replaced by `K_h`) is minimized by
//! damped Newton while `h` is annealed geometrically; its Hessian model is the
//! same weighted Gram matrix the distributed estimator aggregates. The
//! smoothed solution then warm-starts an exact finishing step: for λ = 0 the
//! problem is a linear program and a vertex (simplex-type) descent lands on an
//! exact minimizer; for λ > 0 the dual QP is solved by SMO. Averaged
//! subgradient descent is the fallback when neither finishing step applies.

mod smo;
mod smooth;
mod vertex;

use crate::data::{Dataset, Shard};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::Vector;

/// Iterates whose norm exceeds this are reported as diverged.
pub const NORM_CAP: f64 = 1e8;

/// A borrowed SVM training problem.
#[derive(Clone, Copy, Debug)]
pub struct SvmProblem<'a> {
    p: usize,
    labels: &'a [f64],
    features: &'a [f64],
    pub lambda: f64,
}

impl<'a> SvmProblem<'a> {
    pub fn new(p: usize, labels: &'a [f64], features: &'a [f64], lambda: f64) -> Result<Self> {
        if labels.is_empty() || p == 0 {
            return Err(Error::InvalidConfiguration("empty SVM problem".into()));
        }
        if features.len() != labels.len() * p {
            return Err(Error::DimMismatch {
                expected: labels.len() * p,
                found: features.len(),
            });
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(Self {
            p,
            labels,
            features,
            lambda,
        })
    }

    pub fn from_dataset(data: &'a Dataset, lambda: f64) -> Result<Self> {
        Self::new(data.p(), data.labels(), data.features(), lambda)
    }

    pub fn from_shard(shard: &'a Shard, lambda: f64) -> Result<Self> {
        Self::new(shard.p(), shard.labels(), shard.features(), lambda)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Rows `zᵢ = yᵢ·(1, xᵢ)`, row-major with stride `p + 1`.
    fn signed_rows(&self) -> Vec<f64> {
        let d = self.p + 1;
        let mut z = Vec::with_capacity(self.n() * d);
        for (i, &y) in self.labels.iter().enumerate() {
            z.push(y);
            z.extend(
                self.features[i * self.p..(i + 1) * self.p]
                    .iter()
                    .map(|x| y * x),
            );
        }
        z
    }

    /// `f_{λ,n}(β)`.
    pub fn objective(&self, beta: &Vector) -> f64 {
        let d = self.p + 1;
        assert_eq!(beta.len(), d);
        let b = beta.as_slice();
        let loss: f64 = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let x = &self.features[i * self.p..(i + 1) * self.p];
                let margin = b[0] + dot(x, &b[1..]);
                (1.0 - y * margin).max(0.0)
            })
            .sum();
        loss / self.n() as f64 + 0.5 * self.lambda * dot(&b[1..], &b[1..])
    }
}

/// Tuning for [`solve_hinge`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub h_start: f64,
    /// Final smoothing bandwidth; `None` means `max(1e-3, √(p/n))`.
    pub h_min: Option<f64>,
    pub max_newton_iters: usize,
    pub max_anneal_stages: usize,
    pub tol: f64,
    pub fallback_subgradient_iters: usize,
    /// Run the exact finishing step after the smoothed stage.
    pub exact_polish: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            h_start: 1.0,
            h_min: None,
            max_newton_iters: 50,
            max_anneal_stages: 8,
            tol: 1e-10,
            fallback_subgradient_iters: 20_000,
            exact_polish: true,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfiguration(msg.into()));
        if !(self.h_start > 0.0 && self.h_start.is_finite()) {
            return bad("h_start must be positive");
        }
        if let Some(h_min) = self.h_min {
            if !(h_min > 0.0 && h_min <= self.h_start) {
                return bad("h_min must lie in (0, h_start]");
            }
        }
        if self.max_newton_iters == 0 || self.max_anneal_stages == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        Ok(())
    }

    fn resolved_h_min(&self, n: usize, p: usize) -> f64 {
        self.h_min
            .unwrap_or_else(|| 1e-3f64.max((p as f64 / n as f64).sqrt()))
            .min(self.h_start)
    }
}

/// Minimize the hinge objective of `problem`.
///
/// Returns the best point found across the smoothed stage, the exact
/// finishing step and (if needed) the subgradient fallback. Deterministic.
pub fn solve_hinge(problem: &SvmProblem<'_>, opts: &SolverOptions) -> Result<Vector> {
    opts.validate()?;
    if !problem.features.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = problem.n();
    let d = problem.p + 1;
    let z = problem.signed_rows();

    let h_min = opts.resolved_h_min(n, problem.p);
    let smoothed = smooth::annealed_newton(&z, d, problem.lambda, opts.h_start, h_min, opts);

    let mut best = smoothed.clone();
    let mut best_obj = problem.objective(&best);

    let polished = if opts.exact_polish {
        if problem.lambda == 0.0 {
            vertex::vertex_descent(&z, d, best.as_slice())
        } else {
            smo::solve_dual(problem, opts.tol)
        }
    } else {
        None
    };

    match polished {
        Some(candidate) if candidate.is_finite() => {
            let obj = problem.objective(&candidate);
            if obj <= best_obj + opts.tol {
                best = candidate;
                best_obj = obj;
            }
        }
        _ => {
            let candidate = subgradient(
                &z,
                d,
                problem.lambda,
                &best,
                opts.fallback_subgradient_iters,
            );
            let obj = problem.objective(&candidate);
            if obj < best_obj {
                best = candidate;
                best_obj = obj;
            }
        }
    }

    if !best_obj.is_finite() || !best.is_finite() {
        return Err(Error::NonFinite);
    }
    let norm = best.norm();
    if norm > NORM_CAP {
        return Err(Error::Unbounded { norm });
    }
    Ok(best)
}

/// Best-iterate projected subgradient descent with `1/√t` steps, started
/// from `start`.
pub(crate) fn subgradient(
    z: &[f64],
    d: usize,
    lambda: f64,
    start: &Vector,
    iters: usize,
) -> Vector {
    let n = z.len() / d;
    let eval = |b: &[f64]| -> f64 {
        let loss: f64 = z
            .chunks_exact(d)
            .map(|zi| (1.0 - dot(zi, b)).max(0.0))
            .sum();
        loss / n as f64 + 0.5 * lambda * dot(&b[1..], &b[1..])
    };
    let scale = z
        .chunks_exact(d)
        .map(|zi| dot(zi, zi).sqrt())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut beta = start.as_slice().to_vec();
    let mut best = beta.clone();
    let mut best_obj = eval(&beta);
    let mut grad = vec![0.0; d];
    for t in 1..=iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for zi in z.chunks_exact(d) {
            if 1.0 - dot(zi, &beta) > 0.0 {
                for (g, &v) in grad.iter_mut().zip(zi) {
                    *g -= v;
                }
            }
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= n as f64;
            if j > 0 {
                *g += lambda * beta[j];
            }
        }
        let step = 1.0 / (scale * (t as f64).sqrt());
        for (b, g) in beta.iter_mut().zip(&grad) {
            *b -= step * g;
        }
        let obj = eval(&beta);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&beta);
        }
    }
    Vector::from_vec(best)
}

/// Average of the per-shard solutions, in shard order.
pub fn naive_dc(shards: &[Shard], lambda: f64, opts: &SolverOptions) -> Result<Vector> {
    let first = shards.first().ok_or_else(|| {
        Error::InvalidConfiguration("naive divide-and-conquer needs a shard".into())
    })?;
    let mut acc = Vector::zeros(first.p() + 1);
    for shard in shards {
        let local = solve_hinge(&SvmProblem::from_shard(shard, lambda)?, opts)?;
        acc.axpy(1.0, &local);
    }
    acc.scale(1.0 / shards.len() as f64);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition, PartitionPolicy};
    use crate::rng::RngState;

    fn gaussian_problem(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = RngState::new(seed, 0).start();
        let mut rows = Vec::new();
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x: Vec<f64> = (0..p).map(|_| y * 0.7 + 1.3 * rng.normal()).collect();
            rows.push((y, x));
        }
        Dataset::from_rows(p, &rows).unwrap()
    }

    #[test]
    fn separable_pair_reaches_zero_loss() {
        let data = Dataset::from_rows(1, &[(1.0, vec![2.0]), (-1.0, vec![-2.0])]).unwrap();
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        let beta = solve_hinge(&problem, &SolverOptions::default()).unwrap();
        assert!(problem.objective(&beta) <= 1e-8);
    }

    #[test]
    fn one_class_reaches_zero_loss_or_reports_unbounded() {
        let data = Dataset::from_rows(
            2,
            &[
                (1.0, vec![0.3, -1.0]),
                (1.0, vec![2.0, 0.5]),
                (1.0, vec![-1.5, 0.2]),
                (1.0, vec![0.0, 3.0]),
            ],
        )
        .unwrap();
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        match solve_hinge(&problem, &SolverOptions::default()) {
            Ok(beta) => assert!(problem.objective(&beta) <= 1e-8),
            Err(e) => assert!(matches!(e, Error::Unbounded { .. })),
        }
    }

    #[test]
    fn local_optimality_probe() {
        let data = gaussian_problem(300, 3, 5);
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        let opts = SolverOptions::default();
        let beta = solve_hinge(&problem, &opts).unwrap();
        let f0 = problem.objective(&beta);
        let mut rng = RngState::new(77, 1).start();
        for k in 0..100 {
            let radius = 10f64.powi(-(k % 6));
            let mut cand = beta.clone();
            for j in 0..cand.len() {
                cand[j] += radius * rng.normal();
            }
            assert!(f0 <= problem.objective(&cand) + opts.tol);
        }
    }

    #[test]
    fn finer_annealing_never_hurts() {
        let data = gaussian_problem(200, 2, 9);
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        let mut opts = SolverOptions::default();
        let coarse = solve_hinge(&problem, &opts).unwrap();
        opts.h_min = Some(opts.resolved_h_min(200, 2) / 2.0);
        let fine = solve_hinge(&problem, &opts).unwrap();
        assert!(problem.objective(&fine) <= problem.objective(&coarse) + opts.tol);
    }

    #[test]
    fn smoothed_stage_alone_is_close() {
        let data = gaussian_problem(400, 2, 3);
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        let exact = solve_hinge(&problem, &SolverOptions::default()).unwrap();
        let opts = SolverOptions {
            exact_polish: false,
            fallback_subgradient_iters: 1,
            ..SolverOptions::default()
        };
        let rough = solve_hinge(&problem, &opts).unwrap();
        let gap = problem.objective(&rough) - problem.objective(&exact);
        assert!((-1e-12..0.05).contains(&gap), "gap {gap}");
    }

    #[test]
    fn objective_is_convex_along_segments() {
        let data = gaussian_problem(100, 2, 4);
        let problem = SvmProblem::from_dataset(&data, 0.3).unwrap();
        let a = Vector::from_vec(vec![0.1, 0.5, -0.2]);
        let b = Vector::from_vec(vec![-0.3, 1.0, 0.4]);
        let (fa, fb) = (problem.objective(&a), problem.objective(&b));
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let mut c = a.clone();
            c.scale(1.0 - t);
            c.axpy(t, &b);
            assert!(problem.objective(&c) <= fa.max(fb) + 1e-12 * (1.0 + fa.abs()));
        }
    }

    #[test]
    fn rejects_bad_options() {
        let data = gaussian_problem(10, 1, 1);
        let problem = SvmProblem::from_dataset(&data, 0.0).unwrap();
        let opts = SolverOptions {
            h_min: Some(2.0),
            ..SolverOptions::default()
        };
        assert!(solve_hinge(&problem, &opts).is_err());
    }

    #[test]
    fn naive_dc_of_identical_shards() {
        let block = gaussian_problem(50, 2, 8);
        let single = solve_hinge(
            &SvmProblem::from_dataset(&block, 0.0).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let mut rows = Vec::new();
        for _ in 0..3 {
            for i in 0..block.n() {
                let (y, x) = block.row(i);
                rows.push((y, x.to_vec()));
            }
        }
        let stacked = Dataset::from_rows(2, &rows).unwrap();
        let shards = partition(&stacked, 3, &PartitionPolicy::Equal).unwrap();
        let avg = naive_dc(&shards, 0.0, &SolverOptions::default()).unwrap();
        assert!(avg.sub(&single).max_abs() < 1e-12);

        let one = naive_dc(&shards[..1], 0.0, &SolverOptions::default()).unwrap();
        assert!(one.sub(&single).max_abs() < 1e-15);
    }

    #[test]
    fn naive_dc_averages_two_forced_solutions() {
        // Each shard is a two-point separable design whose hinge minimizer
        // with both points on the margin is unique: β = (0, 1/s).
        let data = Dataset::from_rows(
            1,
            &[
                (1.0, vec![1.0]),
                (-1.0, vec![-1.0]),
                (1.0, vec![4.0]),
                (-1.0, vec![-4.0]),
            ],
        )
        .unwrap();
        let shards = partition(&data, 2, &PartitionPolicy::Equal).unwrap();
        let opts = SolverOptions::default();
        let u = solve_hinge(&SvmProblem::from_shard(&shards[0], 0.0).unwrap(), &opts).unwrap();
        let v = solve_hinge(&SvmProblem::from_shard(&shards[1], 0.0).unwrap(), &opts).unwrap();
        let avg = naive_dc(&shards, 0.0, &opts).unwrap();
        for j in 0..2 {
            assert!((avg[j] - 0.5 * (u[j] + v[j])).abs() < 1e-15);
        }
    }
}
