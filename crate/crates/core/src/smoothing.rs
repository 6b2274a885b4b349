//! The quintic smoothing function, the smoothed hinge built from it, and the
//! per-round bandwidth schedule.

use num_traits::Float;

use crate::error::{Error, Result};

/// Integrated biweight kernel: `H(v) = 1/2 + 15/16 (v − 2v³/3 + v⁵/5)` on
/// `|v| < 1`, clamped to 0 below and 1 above.
///
/// `H` is nondecreasing and twice continuously differentiable, with
/// `H'(v) = 15/16 (1 − v²)²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SmoothKernel;

impl SmoothKernel {
    #[inline]
    pub fn value<T: Float>(v: T) -> T {
        let one = T::one();
        if v <= -one {
            T::zero()
        } else if v >= one {
            one
        } else {
            let v2 = v * v;
            let c = T::from(15.0 / 16.0).unwrap();
            let poly = v * (one - v2 * (T::from(2.0 / 3.0).unwrap() - v2 * T::from(0.2).unwrap()));
            T::from(0.5).unwrap() + c * poly
        }
    }

    #[inline]
    pub fn derivative<T: Float>(v: T) -> T {
        if v.abs() >= T::one() {
            T::zero()
        } else {
            let w = T::one() - v * v;
            T::from(15.0 / 16.0).unwrap() * w * w
        }
    }

    #[inline]
    pub fn second_derivative<T: Float>(v: T) -> T {
        if v.abs() >= T::one() {
            T::zero()
        } else {
            T::from(-15.0 / 4.0).unwrap() * v * (T::one() - v * v)
        }
    }
}

fn check_finite<T: Float>(v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_bandwidth<T: Float>(h: T) -> Result<()> {
    if h > T::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h.to_f64().unwrap_or(f64::NAN)))
    }
}

/// `H(v)`.
pub fn h<T: Float>(v: T) -> Result<T> {
    check_finite(v)?;
    Ok(SmoothKernel::value(v))
}

/// `H'(v)`.
pub fn dh<T: Float>(v: T) -> Result<T> {
    check_finite(v)?;
    Ok(SmoothKernel::derivative(v))
}

/// `K_h(u) = u·H(u/h)`.
pub fn smoothed_hinge<T: Float>(u: T, bandwidth: T) -> Result<T> {
    check_bandwidth(bandwidth)?;
    check_finite(u)?;
    Ok(smoothed_hinge_unchecked(u, bandwidth))
}

#[inline]
pub(crate) fn smoothed_hinge_unchecked<T: Float>(u: T, bandwidth: T) -> T {
    if u >= bandwidth {
        u
    } else if u <= -bandwidth {
        T::zero()
    } else {
        u * SmoothKernel::value(u / bandwidth)
    }
}

/// `h_g = C0 · max(λ, √(p/n), (p/m)^{2^{g−2}})`, with `g` counted from 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandwidthSchedule {
    pub c0: f64,
    pub lambda: f64,
    pub p: usize,
    pub n: usize,
    pub m: usize,
}

impl BandwidthSchedule {
    pub fn new(c0: f64, lambda: f64, p: usize, n: usize, m: usize) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "bandwidth constant C0 must be positive, got {c0}"
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if p == 0 || n == 0 || m == 0 {
            return Err(Error::InvalidConfiguration(
                "p, n and m must be positive".into(),
            ));
        }
        Ok(Self {
            c0,
            lambda,
            p,
            n,
            m,
        })
    }

    pub fn bandwidth(&self, round: u32) -> f64 {
        assert!(round >= 1, "rounds are counted from 1");
        let p = self.p as f64;
        let floor = (p / self.n as f64).sqrt();
        let exponent = 2f64.powi(round as i32 - 2);
        let shrinking = (p / self.m as f64).powf(exponent);
        self.c0 * self.lambda.max(floor).max(shrinking)
    }
}

/// Smallest `q` with `q ≥ 1 + log₂((log n − log p)/(log m − log p))`.
pub fn required_rounds(n: usize, m: usize, p: usize) -> Result<u32> {
    if m <= p {
        return Err(Error::InvalidConfiguration(format!(
            "shard size m = {m} must exceed dimension p = {p}"
        )));
    }
    if n < m {
        return Err(Error::InvalidConfiguration(format!(
            "total size n = {n} is smaller than shard size m = {m}"
        )));
    }
    let (n, m, p) = (n as f64, m as f64, p as f64);
    let bound = 1.0 + ((n.ln() - p.ln()) / (m.ln() - p.ln())).log2();
    Ok((bound - 1e-12).ceil().max(1.0) as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_anchor_values() {
        assert_eq!(h(-1.0f64).unwrap(), 0.0);
        assert_eq!(h(0.0f64).unwrap(), 0.5);
        assert_eq!(h(1.0f64).unwrap(), 1.0);
        assert!((SmoothKernel::value(1.0 - 1e-12f64) - 1.0).abs() < 1e-12);
        assert!(SmoothKernel::value(-1.0 + 1e-12f64).abs() < 1e-12);
    }

    #[test]
    fn derivative_anchor_values() {
        assert_eq!(dh(1.0f64).unwrap(), 0.0);
        assert_eq!(dh(-1.0f64).unwrap(), 0.0);
        // central difference of H at 0 with step 1e-6
        let step = 1e-6;
        let fd = (SmoothKernel::value(step) - SmoothKernel::value(-step)) / (2.0 * step);
        assert!((fd - 0.9375).abs() < 1e-9);
        assert!((dh(0.0f64).unwrap() - fd).abs() < 1e-9);
    }

    #[test]
    fn derivative_integrates_to_one() {
        // composite Simpson on [-1, 1]
        let k = 2000;
        let step = 2.0 / k as f64;
        let mut acc = SmoothKernel::derivative(-1.0) + SmoothKernel::derivative(1.0);
        for i in 1..k {
            let v = -1.0 + i as f64 * step;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * SmoothKernel::derivative(v);
        }
        assert!((acc * step / 3.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(matches!(h(f64::NAN), Err(Error::NonFinite)));
        assert!(matches!(dh(f64::INFINITY), Err(Error::NonFinite)));
        assert!(matches!(
            smoothed_hinge(f64::NAN, 1.0),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn smoothed_hinge_regions() {
        let bw = 0.3;
        assert_eq!(smoothed_hinge(2.0 * bw, bw).unwrap(), 2.0 * bw);
        assert_eq!(smoothed_hinge(-2.0 * bw, bw).unwrap(), 0.0);
        assert_eq!(smoothed_hinge(0.0, bw).unwrap(), 0.0);
        assert!(matches!(
            smoothed_hinge(1.0, 0.0),
            Err(Error::InvalidBandwidth(_))
        ));
        assert!(matches!(
            smoothed_hinge(1.0, -1.0),
            Err(Error::InvalidBandwidth(_))
        ));
    }

    #[test]
    fn schedule_examples() {
        let s = BandwidthSchedule::new(1.0, 0.0, 4, 10_000, 100).unwrap();
        assert!((s.bandwidth(1) - 0.2).abs() < 1e-15);
        assert!((s.bandwidth(2) - 0.04).abs() < 1e-15);
        assert!((s.bandwidth(4) - 0.02).abs() < 1e-15);
        let scaled = BandwidthSchedule::new(5.0, 0.0, 4, 10_000, 100).unwrap();
        assert!((scaled.bandwidth(1) - 1.0).abs() < 1e-14);
        let with_lambda = BandwidthSchedule::new(1.0, 0.1, 4, 10_000, 100).unwrap();
        assert!((with_lambda.bandwidth(3) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rounds_examples() {
        assert_eq!(required_rounds(10_000, 100, 4).unwrap(), 3);
        assert_eq!(required_rounds(500, 500, 4).unwrap(), 1);
        assert_eq!(required_rounds(1_000_000, 1000, 20).unwrap(), 3);
        assert!(matches!(
            required_rounds(100, 4, 4),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn generic_over_f32() {
        assert_eq!(SmoothKernel::value(0.0f32), 0.5);
        assert_eq!(smoothed_hinge(2.0f32, 0.5).unwrap(), 2.0);
    }
}
