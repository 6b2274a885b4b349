//! Random Fourier features for the kernel `exp(−σ_k‖x − z‖²)`.

use std::f64::consts::PI;

use crate::data::{Dataset, Shard};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::{Matrix, Vector};

/// `ψ(x) = √(2/d)·cos(Vᵀx + ω)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RffMap {
    p: usize,
    d: usize,
    sigma_k: f64,
    /// p × d, column j is the frequency vector of feature j.
    v: Matrix,
    omega: Vec<f64>,
}

/// Draw frequencies column by column (`N(0, 2σ_k I)`), then the phases
/// (uniform on `[0, 2π)`).
pub fn sample_rff(p: usize, d: usize, sigma_k: f64, rng: &mut SimRng) -> Result<RffMap> {
    if p == 0 || d == 0 {
        return Err(Error::InvalidConfiguration(
            "feature map needs positive p and d".into(),
        ));
    }
    if !(sigma_k > 0.0 && sigma_k.is_finite()) {
        return Err(Error::InvalidConfiguration(format!(
            "kernel scale must be positive, got {sigma_k}"
        )));
    }
    let sd = (2.0 * sigma_k).sqrt();
    let mut v = Matrix::zeros(p, d);
    for j in 0..d {
        for i in 0..p {
            v[(i, j)] = sd * rng.normal();
        }
    }
    let omega = (0..d).map(|_| 2.0 * PI * rng.uniform()).collect();
    Ok(RffMap {
        p,
        d,
        sigma_k,
        v,
        omega,
    })
}

impl RffMap {
    pub fn input_dim(&self) -> usize {
        self.p
    }

    pub fn output_dim(&self) -> usize {
        self.d
    }

    pub fn sigma_k(&self) -> f64 {
        self.sigma_k
    }

    pub fn frequencies(&self) -> &Matrix {
        &self.v
    }

    pub fn phases(&self) -> &[f64] {
        &self.omega
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vector> {
        let mut out = vec![0.0; self.d];
        self.apply_into(x, &mut out)?;
        Ok(Vector::from_vec(out))
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimMismatch {
                expected: self.p,
                found: x.len(),
            });
        }
        let scale = (2.0 / self.d as f64).sqrt();
        out.copy_from_slice(&self.omega);
        for (i, &xi) in x.iter().enumerate() {
            for (o, &vij) in out.iter_mut().zip(self.v.row(i)) {
                *o += vij * xi;
            }
        }
        out.iter_mut().for_each(|o| *o = scale * o.cos());
        Ok(())
    }

    fn map_rows(&self, p: usize, rows: usize, features: &[f64]) -> Result<Vec<f64>> {
        if p != self.p {
            return Err(Error::DimMismatch {
                expected: self.p,
                found: p,
            });
        }
        let mut out = vec![0.0; rows * self.d];
        for (x, o) in features.chunks_exact(p).zip(out.chunks_exact_mut(self.d)) {
            self.apply_into(x, o)?;
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let features = self.map_rows(data.p(), data.n(), data.features())?;
        Dataset::new(self.d, data.labels().to_vec(), features)
    }

    pub fn apply_shard(&self, shard: &Shard) -> Result<Shard> {
        let features = self.map_rows(shard.p(), shard.len(), shard.features())?;
        Shard::new(
            shard.id,
            shard.n_total,
            self.d,
            shard.labels().to_vec(),
            features,
        )
    }
}
