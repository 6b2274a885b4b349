//! Gaussian shift simulation model and its true coefficient.
//!
//! `Y = ±1` with `P(Y = 1) = p₊`, `X = Y·1 + ε`, `ε ~ N(0, σ²I)`. With
//! balanced classes the population hinge minimizer is `(0, 1/a, …, 1/a)`,
//! where `a` is the point at which the `N(p, σ²p)` law truncated above `a`
//! has zero first moment.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::normal;
use crate::rng::SimRng;
use crate::Vector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimModel {
    pub p: usize,
    pub sigma: f64,
    pub p_plus: f64,
}

impl SimModel {
    /// `σ = √p`, balanced classes.
    pub fn new(p: usize) -> Self {
        Self {
            p,
            sigma: (p as f64).sqrt(),
            p_plus: 0.5,
        }
    }

    pub fn with_params(p: usize, sigma: f64, p_plus: f64) -> Result<Self> {
        let model = Self { p, sigma, p_plus };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidConfiguration("p must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfiguration("sigma must be positive".into()));
        }
        if !(self.p_plus > 0.0 && self.p_plus < 1.0) {
            return Err(Error::InvalidConfiguration(
                "p_plus must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Mean and standard deviation of `1ᵀ(Y·X)`.
    pub fn nu_moments(&self) -> (f64, f64) {
        let p = self.p as f64;
        (p, self.sigma * p.sqrt())
    }
}

/// `n` i.i.d. rows. Each row draws one uniform for the label and then `p`
/// normals.
pub fn gen(model: &SimModel, n: usize, rng: &mut SimRng) -> Result<Dataset> {
    model.validate()?;
    if n == 0 {
        return Err(Error::InvalidConfiguration("n must be positive".into()));
    }
    let p = model.p;
    let mut labels = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n * p);
    for _ in 0..n {
        let y = if rng.uniform() < model.p_plus {
            1.0
        } else {
            -1.0
        };
        labels.push(y);
        for _ in 0..p {
            features.push(y + model.sigma * rng.normal());
        }
    }
    Dataset::new(p, labels, features)
}

/// Root of `g(a) = μΦ(z) − sφ(z)`, `z = (a − μ)/s`.
pub fn solve_a(model: &SimModel) -> Result<f64> {
    model.validate()?;
    let (mu, s) = model.nu_moments();
    let g = |a: f64| {
        let z = (a - mu) / s;
        mu * normal::cdf(z) - s * normal::pdf(z)
    };
    let (mut lo, mut hi) = (mu - 10.0 * s, mu + 10.0 * s);
    let (mut g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::BracketingFailed);
    }
    let tol = 1e-12 * s;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g_mid = g(mid);
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * s {
            break;
        }
    }
    // secant polish inside the bracket
    let mut a0 = lo;
    let mut g0 = g_lo;
    let mut a1 = hi;
    let mut g1 = g(hi);
    for _ in 0..50 {
        if g1.abs() <= tol {
            break;
        }
        let next = a1 - g1 * (a1 - a0) / (g1 - g0);
        if !next.is_finite() {
            break;
        }
        a0 = a1;
        g0 = g1;
        a1 = next;
        g1 = g(a1);
    }
    if g1.abs() > tol || !a1.is_finite() {
        return Err(Error::BracketingFailed);
    }
    Ok(a1)
}

/// `a` and `β̃* = (0, (1/a)·1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueModel {
    pub a: f64,
    pub beta_star: Vector,
}

pub fn true_beta(model: &SimModel) -> Result<TrueModel> {
    if model.p_plus != 0.5 {
        return Err(Error::InvalidConfiguration(
            "the closed-form coefficient needs balanced classes".into(),
        ));
    }
    let a = solve_a(model)?;
    let mut beta = vec![1.0 / a; model.p + 1];
    beta[0] = 0.0;
    Ok(TrueModel {
        a,
        beta_star: Vector::from_vec(beta),
    })
}

/// `ṽ₀ = (p+1)^{-1/2}·1`.
pub fn v0(p: usize) -> Vector {
    Vector::filled(p + 1, 1.0 / ((p + 1) as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    #[test]
    fn same_seed_same_data() {
        let model = SimModel::new(3);
        let a = gen(&model, 50, &mut RngState::new(4, 0).start()).unwrap();
        let b = gen(&model, 50, &mut RngState::new(4, 0).start()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn root_for_p4_solves_cdf_equals_pdf() {
        let model = SimModel::new(4);
        let a = solve_a(&model).unwrap();
        let z = (a - 4.0) / 4.0;
        assert!(z > -1.0 && z < 0.0);
        assert!((normal::cdf(z) - normal::pdf(z)).abs() < 1e-12);
        assert!(a < 4.0);
    }

    #[test]
    fn root_below_mean_for_several_models() {
        for p in [1, 2, 4, 20, 100] {
            let model = SimModel::new(p);
            let a = solve_a(&model).unwrap();
            assert!(a < p as f64);
        }
    }

    #[test]
    fn true_beta_shape() {
        let t = true_beta(&SimModel::new(4)).unwrap();
        assert_eq!(t.beta_star[0], 0.0);
        assert!(t.beta_star.iter().skip(1).all(|&b| b == t.beta_star[1]));
        let skewed = SimModel::with_params(4, 2.0, 0.3).unwrap();
        assert!(true_beta(&skewed).is_err());
    }

    #[test]
    fn v0_is_unit() {
        assert!((v0(4).norm() - 1.0).abs() < 1e-15);
    }
}
