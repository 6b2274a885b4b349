//! One fit of each compared method, with its plug-in interval.

use mdl_svm::inference::{
    confidence_interval, empirical_g, plug_in_d, sandwich_se, ConfidenceInterval, SandwichEstimate,
};
use mdl_svm::mdl::{fit, gather_summaries, indicator_gram, naive_dc_over, worker_summary};
use mdl_svm::protocol::{Cluster, DirectCluster};
use mdl_svm::{solve_hinge, Dataset, MdlConfig, Mode, Shard, SolverOptions, SvmProblem, Vector};

use crate::spec::Method;

/// Settings shared by all methods for one fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitSettings {
    pub q: u32,
    pub c0: f64,
    pub lambda: f64,
    pub inner_iters: u32,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOutcome {
    pub estimate: Vector,
    pub se: f64,
    pub ci: ConfidenceInterval,
    pub msgs: u64,
    pub bytes: u64,
}

/// Bandwidth for the plug-in Hessian of the one-shot methods.
fn one_shot_bandwidth(s: &FitSettings, n: usize, p: usize) -> f64 {
    s.c0 * s.lambda.max((p as f64 / n as f64).sqrt())
}

fn interval(
    v: &Vector,
    beta: &Vector,
    est: &SandwichEstimate,
    level: f64,
) -> mdl_svm::Result<(f64, ConfidenceInterval)> {
    let se = sandwich_se(v, est)?;
    Ok((se, confidence_interval(v.dot(beta), se, level)?))
}

/// Fit `method` on `shards` (and `pooled` for the oracle), then build the
/// interval for `vᵀβ`. The interval's extra exchanges are counted.
pub fn run_method(
    method: Method,
    shards: &[Shard],
    pooled: &Dataset,
    v: &Vector,
    s: &FitSettings,
) -> mdl_svm::Result<FitOutcome> {
    let n = pooled.n();
    let p = pooled.p();
    let cfg = MdlConfig {
        q: Some(s.q),
        c0: s.c0,
        lambda: s.lambda,
        inner_iters: s.inner_iters,
        ..MdlConfig::default()
    };
    if method == Method::Oracle {
        let beta = solve_hinge(
            &SvmProblem::from_dataset(pooled, s.lambda)?,
            &SolverOptions::default(),
        )?;
        let whole = pooled.as_single_shard();
        let est = SandwichEstimate {
            d_hat: worker_summary(&whole, &beta, one_shot_bandwidth(s, n, p))?.v,
            g_hat: indicator_gram(&whole, &beta),
            n: n as u64,
        };
        let (se, ci) = interval(v, &beta, &est, s.level)?;
        return Ok(FitOutcome {
            estimate: beta,
            se,
            ci,
            msgs: 0,
            bytes: 0,
        });
    }

    let mut cluster = DirectCluster::new(shards.to_vec(), cfg.worker_config())?;
    let (beta, d_hat, next_round) = match method {
        Method::Mdl | Method::MdlCe => {
            let mode = if method == Method::Mdl {
                Mode::FullHessian
            } else {
                Mode::ApproxNewton
            };
            let fitted = fit(&mut cluster, &MdlConfig { mode, ..cfg })?;
            let summaries = match fitted.final_summaries {
                Some(sums) => sums,
                // Gradient-only rounds leave no Hessian behind; fetch it
                // at the same point and bandwidth as the last round used.
                None => gather_summaries(
                    &mut cluster,
                    fitted.q + 1,
                    fitted.last_h,
                    s.lambda,
                    &fitted.previous,
                )?,
            };
            (fitted.estimate, plug_in_d(&summaries)?, fitted.q + 2)
        }
        Method::NaiveDc => {
            let beta = naive_dc_over(&mut cluster)?;
            let sums = gather_summaries(
                &mut cluster,
                1,
                one_shot_bandwidth(s, n, p),
                s.lambda,
                &beta,
            )?;
            (beta, plug_in_d(&sums)?, 2)
        }
        Method::Oracle => unreachable!(),
    };
    let g_hat = empirical_g(&mut cluster, &beta, next_round)?;
    let est = SandwichEstimate {
        d_hat,
        g_hat,
        n: n as u64,
    };
    let (se, ci) = interval(v, &beta, &est, s.level)?;
    let stats = cluster.stats();
    Ok(FitOutcome {
        estimate: beta,
        se,
        ci,
        msgs: stats.messages,
        bytes: stats.bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdl_svm::{partition, simgen, PartitionPolicy, RngState, SimModel};

    fn setup() -> (Vec<Shard>, Dataset, Vector) {
        let data = simgen::gen(&SimModel::new(3), 2000, &mut RngState::new(8, 0).start()).unwrap();
        let shards = partition(&data, 10, &PartitionPolicy::Equal).unwrap();
        (shards, data, simgen::v0(3))
    }

    fn settings() -> FitSettings {
        FitSettings {
            q: 3,
            c0: 1.0,
            lambda: 0.0,
            inner_iters: 4,
            level: 0.95,
        }
    }

    #[test]
    fn message_counts_include_the_interval_exchanges() {
        let (shards, data, v) = setup();
        let s = settings();
        let n_shards = 10u64;
        let q = s.q as u64;
        let t = s.inner_iters as u64;
        let count = |m| run_method(m, &shards, &data, &v, &s).unwrap().msgs;
        assert_eq!(count(Method::Mdl), 2 + 2 * n_shards * q + 2 * n_shards);
        assert_eq!(
            count(Method::MdlCe),
            4 + 2 * n_shards * q * t + 4 * n_shards
        );
        assert_eq!(count(Method::NaiveDc), 2 * n_shards + 4 * n_shards);
        assert_eq!(count(Method::Oracle), 0);
    }

    #[test]
    fn intervals_are_centred_and_ordered() {
        let (shards, data, v) = setup();
        for m in Method::ALL {
            let out = run_method(m, &shards, &data, &v, &settings()).unwrap();
            assert!(out.se > 0.0 && out.ci.lo() <= out.ci.hi(), "{m}");
            assert_eq!(out.ci.center, v.dot(&out.estimate));
        }
    }
}
