//! Plug-in sandwich standard errors and normal confidence intervals, with
//! closed-form population matrices for the simulation model.

use crate::data::Shard;
use crate::error::{Error, Result};
use crate::linalg::{dot, solve_symmetric};
use crate::mdl::{expect_summary, sum_summaries, WorkerSummary};
use crate::normal;
use crate::protocol::{Cluster, Message, MODE_INDICATOR_GRAM};
use crate::simgen::{solve_a, SimModel};
use crate::{Matrix, Vector};

/// `Ĝ(β)` through one extra broadcast/gather round.
pub fn empirical_g(cluster: &mut dyn Cluster, beta: &Vector, round: u32) -> Result<Matrix> {
    let replies = cluster.broadcast_gather(&Message::BetaBroadcast {
        round,
        h: 1.0,
        lambda: 0.0,
        beta: beta.clone(),
        mode: MODE_INDICATOR_GRAM,
    })?;
    let summaries = replies
        .into_iter()
        .enumerate()
        .map(|(k, m)| expect_summary(k, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_summaries(&summaries)?.1)
}

/// `Ĝ(β)` assembled directly from shards, summed in shard order.
pub fn empirical_g_local(shards: &[Shard], beta: &Vector) -> Result<Matrix> {
    let first = shards
        .first()
        .ok_or_else(|| Error::InvalidConfiguration("no shards".into()))?;
    let d = first.p() + 1;
    if beta.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            found: beta.len(),
        });
    }
    let mut g = Matrix::zeros(d, d);
    for s in shards {
        g.add_assign(&crate::mdl::indicator_gram(s, beta));
    }
    Ok(g)
}

/// `D̂ = Σ_k V_k`.
pub fn plug_in_d(summaries: &[WorkerSummary]) -> Result<Matrix> {
    Ok(sum_summaries(summaries)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichEstimate {
    pub d_hat: Matrix,
    pub g_hat: Matrix,
    pub n: u64,
}

/// `sqrt(vᵀ D̂⁻¹ Ĝ D̂⁻¹ v / n)`.
pub fn sandwich_se(v: &Vector, est: &SandwichEstimate) -> Result<f64> {
    if v.max_abs() == 0.0 {
        return Err(Error::InvalidConfiguration(
            "projection vector is zero".into(),
        ));
    }
    if est.n == 0 {
        return Err(Error::InvalidConfiguration("sample size is zero".into()));
    }
    let x = solve_symmetric(&est.d_hat, v)?;
    let quad = dot(x.as_slice(), est.g_hat.mul_vec(&x).as_slice());
    let se = (quad.max(0.0) / est.n as f64).sqrt();
    if !se.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(se)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceInterval {
    pub center: f64,
    pub half_width: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lo() <= value && value <= self.hi()
    }
}

/// Two-sided normal quantile for `level`.
pub fn z_value(level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::InvalidConfiguration(format!(
            "confidence level must lie in [0, 1), got {level}"
        )));
    }
    Ok(normal::inv_cdf(1.0 - (1.0 - level) / 2.0))
}

pub fn confidence_interval(center: f64, se: f64, level: f64) -> Result<ConfidenceInterval> {
    if !(se >= 0.0 && se.is_finite() && center.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(ConfidenceInterval {
        center,
        half_width: z_value(level)? * se,
        level,
    })
}

// Slope block `c·11ᵀ + σ²·w·(I − 11ᵀ/p)` embedded in a (p+1)×(p+1) matrix
// with the given intercept entry and zero cross terms.
fn exchangeable(p: usize, corner: f64, common: f64, sigma2: f64, w: f64) -> Matrix {
    let inv_p = 1.0 / p as f64;
    Matrix::from_fn(p + 1, p + 1, |i, j| match (i, j) {
        (0, 0) => corner,
        (0, _) | (_, 0) => 0.0,
        _ => {
            let delta = if i == j { 1.0 } else { 0.0 };
            common + sigma2 * w * (delta - inv_p)
        }
    })
}

/// `D(β̃*)` under `model`.
pub fn oracle_d(model: &SimModel) -> Result<Matrix> {
    let a = solve_a(model)?;
    let (mu, s) = model.nu_moments();
    let z = (a - mu) / s;
    let density = normal::pdf(z) / s;
    let p = model.p as f64;
    let mut m = exchangeable(model.p, 1.0, (a / p).powi(2), model.sigma.powi(2), 1.0);
    m.scale(a * density);
    Ok(m)
}

/// `G(β)` at `β = (0, (1/a)·1)` under `model`, for any `a`.
pub fn oracle_g_at(model: &SimModel, a: f64) -> Matrix {
    let (mu, s) = model.nu_moments();
    let p = model.p as f64;
    let (cdf, pdf) = if a.is_infinite() && a > 0.0 {
        (1.0, 0.0)
    } else {
        let z = (a - mu) / s;
        (normal::cdf(z), normal::pdf(z))
    };
    let z_pdf = if cdf == 1.0 && pdf == 0.0 {
        0.0
    } else {
        (a - mu) / s * pdf
    };
    // E[(1 + S/p)²; S ≤ a − μ] with S ~ N(0, s²)
    let first = -s * pdf;
    let second = s * s * (cdf - z_pdf);
    let common = cdf + 2.0 * first / p + second / (p * p);
    exchangeable(model.p, cdf, common, model.sigma.powi(2), cdf)
}

/// `G(β̃*)` under `model`.
pub fn oracle_g(model: &SimModel) -> Result<Matrix> {
    Ok(oracle_g_at(model, solve_a(model)?))
}

/// [`oracle_d`] for the default model of dimension `p`.
pub fn oracle_d_sim(p: usize) -> Result<Matrix> {
    oracle_d(&SimModel::new(p))
}

/// [`oracle_g`] for the default model of dimension `p`.
pub fn oracle_g_sim(p: usize) -> Result<Matrix> {
    oracle_g(&SimModel::new(p))
}
