use mdl_svm::linalg::spectral_norm;
use mdl_svm::mdl::{aggregate, worker_summary};
use mdl_svm::{
    mdl_fit, mdl_fit_ce, partition, simgen, solve_hinge, BandwidthSchedule, Dataset, Matrix,
    MdlConfig, PartitionPolicy, RngState, SimModel, SolverOptions, SvmProblem, Vector,
};
use nalgebra::{DMatrix, DVector};

fn sim(p: usize, n: usize, seed: u64) -> Dataset {
    simgen::gen(&SimModel::new(p), n, &mut RngState::new(seed, 0).start()).unwrap()
}

// The smoothing function written out independently of the library.
fn big_h(v: f64) -> f64 {
    if v <= -1.0 {
        0.0
    } else if v >= 1.0 {
        1.0
    } else {
        0.5 + 15.0 / 16.0 * (v - 2.0 / 3.0 * v.powi(3) + v.powi(5) / 5.0)
    }
}

fn big_h_prime(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        15.0 / 16.0 * (1.0 - v * v).powi(2)
    }
}

fn big_h_second(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        -15.0 / 4.0 * v * (1.0 - v * v)
    }
}

fn design(data: &Dataset) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = (data.n(), data.p());
    let x = DMatrix::from_fn(
        n,
        p + 1,
        |i, j| if j == 0 { 1.0 } else { data.row(i).1[j - 1] },
    );
    (x, DVector::from_column_slice(data.labels()))
}

/// The linear-type update evaluated densely on one machine.
fn dense_update(data: &Dataset, beta0: &DVector<f64>, h: f64, lambda: f64) -> DVector<f64> {
    let (x, y) = design(data);
    let n = data.n() as f64;
    let d = x.ncols();
    let mut v = DMatrix::zeros(d, d);
    let mut u = DVector::zeros(d);
    for i in 0..x.nrows() {
        let xi = x.row(i).transpose();
        let r = 1.0 - y[i] * xi.dot(beta0);
        let t = r / h;
        u += &xi * (y[i] * (big_h(t) + big_h_prime(t) / h) / n);
        v += &xi * xi.transpose() * (big_h_prime(t) / (h * n));
    }
    let mut pen = beta0.clone();
    pen[0] = 0.0;
    v.lu().solve(&(u - pen * lambda)).unwrap()
}

fn to_dvec(v: &Vector) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

#[test]
fn one_round_single_shard_equals_dense_update() {
    let data = sim(3, 400, 1);
    let shards = partition(&data, 1, &PartitionPolicy::Equal).unwrap();
    let cfg = MdlConfig {
        q: Some(1),
        ..MdlConfig::default()
    };
    let fit = mdl_fit(&shards, &cfg).unwrap();
    let h = (3.0f64 / 400.0).sqrt();
    let reference = dense_update(&data, &to_dvec(&fit.initial), h, 0.0);
    let ours = to_dvec(&fit.estimate);
    assert!((ours - &reference).amax() <= 1e-12 * reference.amax());
}

#[test]
fn sharded_aggregation_equals_dense_update() {
    let data = sim(2, 200, 2);
    let beta0 = Vector::from_vec(vec![0.05, 0.4, 0.3]);
    for lambda in [0.0, 0.05] {
        let shards = partition(&data, 4, &PartitionPolicy::Equal).unwrap();
        let summaries: Vec<_> = shards
            .iter()
            .map(|s| worker_summary(s, &beta0, 0.3).unwrap())
            .collect();
        let ours = to_dvec(&aggregate(&summaries, lambda, &beta0, 1).unwrap());
        let reference = dense_update(&data, &to_dvec(&beta0), 0.3, lambda);
        assert!(
            (ours - &reference).amax() <= 1e-12 * reference.amax(),
            "lambda {lambda}"
        );
    }
}

/// Minimizer of `(1/n) Σ K_h(1 − yᵢx̃ᵢᵀβ)` by Newton with backtracking,
/// using the exact second derivative of `K_h`.
fn smoothed_minimizer(data: &Dataset, h: f64, start: DVector<f64>) -> DVector<f64> {
    let (x, y) = design(data);
    let n = data.n() as f64;
    let d = x.ncols();
    let objective = |b: &DVector<f64>| -> f64 {
        (0..x.nrows())
            .map(|i| {
                let r = 1.0 - y[i] * x.row(i).transpose().dot(b);
                r * big_h(r / h)
            })
            .sum::<f64>()
            / n
    };
    let mut beta = start;
    for _ in 0..200 {
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for i in 0..x.nrows() {
            let xi = x.row(i).transpose();
            let r = 1.0 - y[i] * xi.dot(&beta);
            let t = r / h;
            let k1 = big_h(t) + t * big_h_prime(t);
            let k2 = (2.0 * big_h_prime(t) + t * big_h_second(t)) / h;
            grad -= &xi * (y[i] * k1 / n);
            hess += &xi * xi.transpose() * (k2 / n);
        }
        if grad.amax() < 1e-14 {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => grad.clone(),
        };
        let f0 = objective(&beta);
        let mut t = 1.0;
        loop {
            let trial = &beta - &step * t;
            if objective(&trial) <= f0 - 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                beta = trial;
                break;
            }
            t *= 0.5;
        }
    }
    beta
}

#[test]
fn smoothed_minimizer_is_a_fixed_point() {
    let data = sim(2, 2000, 3);
    let h = 0.5;
    let start = to_dvec(
        &solve_hinge(
            &SvmProblem::from_dataset(&data, 0.0).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap(),
    );
    let beta_h = smoothed_minimizer(&data, h, start);
    let shards = partition(&data, 5, &PartitionPolicy::Equal).unwrap();
    let reference = Vector::from_slice(beta_h.as_slice());
    let summaries: Vec<_> = shards
        .iter()
        .map(|s| worker_summary(s, &reference, h).unwrap())
        .collect();
    let next = aggregate(&summaries, 0.0, &reference, 1).unwrap();
    assert!(
        next.sub(&reference).max_abs() <= 1e-6,
        "{:?} vs {:?}",
        next,
        reference
    );
}

#[test]
fn fits_are_deterministic() {
    let data = sim(4, 5000, 4);
    let shards = partition(&data, 10, &PartitionPolicy::Equal).unwrap();
    let cfg = MdlConfig::default();
    let a = mdl_fit(&shards, &cfg).unwrap();
    let b = mdl_fit(&shards, &cfg).unwrap();
    assert_eq!(a, b);
    let a = mdl_fit_ce(&shards, &cfg).unwrap();
    let b = mdl_fit_ce(&shards, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn message_counts_follow_the_protocol() {
    let data = sim(4, 2000, 5);
    let shards = partition(&data, 8, &PartitionPolicy::Equal).unwrap();
    let (n_shards, q, t) = (8u64, 3u32, 4u32);
    let cfg = MdlConfig {
        q: Some(q),
        inner_iters: t,
        ..MdlConfig::default()
    };
    let full = mdl_fit(&shards, &cfg).unwrap();
    // initializer request and reply, then one broadcast and reply per worker per round
    assert_eq!(full.comm.messages, 2 + 2 * n_shards * q as u64);
    let ce = mdl_fit_ce(&shards, &cfg).unwrap();
    // plus the preconditioner exchange, and T broadcasts per round
    assert_eq!(ce.comm.messages, 2 + 2 + 2 * n_shards * (q * t) as u64);
    assert!(ce.comm.bytes / ce.comm.messages < full.comm.bytes / full.comm.messages);
}

#[test]
fn single_shard_approximate_newton_matches_exact_round() {
    let data = sim(3, 600, 6);
    let shards = partition(&data, 1, &PartitionPolicy::Equal).unwrap();
    let cfg = MdlConfig {
        q: Some(1),
        inner_iters: 1,
        ..MdlConfig::default()
    };
    let exact = mdl_fit(&shards, &cfg).unwrap().estimate;
    let approx = mdl_fit_ce(&shards, &cfg).unwrap().estimate;
    assert!(exact.sub(&approx).max_abs() <= 1e-12 * exact.max_abs());
}

fn to_dmat(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Per round: exact round solution, the iteration matrix
/// `I − V̂₁⁻¹ (1/N) Σ V_k`, and the inner iterates.
fn inner_trace(seed: u64, q: u32) -> Vec<(Vector, Vector, DMatrix<f64>, Vec<Vector>)> {
    let (n, p, m) = (10_000, 4, 1000);
    let data = sim(p, n, seed);
    let shards = partition(&data, n / m, &PartitionPolicy::Equal).unwrap();
    let cfg = MdlConfig {
        q: Some(q),
        inner_iters: 50,
        trace: true,
        ..MdlConfig::default()
    };
    let fit = mdl_fit_ce(&shards, &cfg).unwrap();
    let schedule = BandwidthSchedule::new(1.0, 0.0, p, n, m).unwrap();
    let vhat = worker_summary(&shards[0], &fit.initial, (p as f64 / m as f64).sqrt())
        .unwrap()
        .v;
    let vinv = to_dmat(&vhat).try_inverse().unwrap();

    let mut out = Vec::new();
    let mut reference = fit.initial.clone();
    for record in &fit.rounds {
        let h = schedule.bandwidth(record.round);
        let summaries: Vec<_> = shards
            .iter()
            .map(|s| worker_summary(s, &reference, h).unwrap())
            .collect();
        let target = aggregate(&summaries, 0.0, &reference, record.round).unwrap();
        let mut total = Matrix::zeros(p + 1, p + 1);
        for s in &summaries {
            total.add_assign(&s.v);
        }
        total.scale(1.0 / shards.len() as f64);
        let iteration = DMatrix::<f64>::identity(p + 1, p + 1) - &vinv * to_dmat(&total);
        out.push((reference.clone(), target, iteration, record.inner.clone()));
        reference = record.estimate.clone();
    }
    out
}

#[test]
fn inner_residuals_obey_the_iteration_bound() {
    // The bound holds for every draw, whether or not the iteration contracts.
    for seed in 0..8 {
        for (reference, target, iteration, inner) in inner_trace(seed, 1) {
            let rho = spectral_norm(
                &Matrix::from_row_major(5, 5, iteration.transpose().as_slice().to_vec()).unwrap(),
            )
            .unwrap();
            let mut last = reference.sub(&target).norm();
            for beta_t in &inner {
                let gap = beta_t.sub(&target).norm();
                assert!(
                    gap <= rho * last * (1.0 + 1e-9) + 1e-12,
                    "seed {seed}: {gap} > {rho} * {last}"
                );
                last = gap;
            }
        }
    }
}

#[test]
fn inner_iterations_converge_when_contractive() {
    // A draw on which the preconditioner is accurate enough for ρ < 1 in
    // every round; other draws can give ρ > 1 and diverge.
    for (reference, target, iteration, inner) in inner_trace(0, 3) {
        let rho = spectral_norm(
            &Matrix::from_row_major(5, 5, iteration.transpose().as_slice().to_vec()).unwrap(),
        )
        .unwrap();
        assert!(rho < 1.0, "rho {rho}");
        let mut last = reference.sub(&target).norm();
        for beta_t in &inner {
            let gap = beta_t.sub(&target).norm();
            assert!(gap < last || gap <= 1e-15);
            last = gap;
        }
        assert!(last <= 1e-8, "final gap {last}");
    }
}
