use crate::linalg::{dot, Cholesky};
use crate::smoothing::{smoothed_hinge_unchecked, SmoothKernel};
use crate::{Matrix, Vector};

use super::SolverOptions;

const ARMIJO: f64 = 1e-4;

/// Smoothed objective `(1/n) Σ K_h(1 − zᵢᵀβ) + (λ/2)‖β₁..‖²`.
pub(crate) fn smoothed_objective(z: &[f64], d: usize, lambda: f64, h: f64, beta: &[f64]) -> f64 {
    let n = z.len() / d;
    let loss: f64 = z
        .chunks_exact(d)
        .map(|zi| smoothed_hinge_unchecked(1.0 - dot(zi, beta), h))
        .sum();
    loss / n as f64 + 0.5 * lambda * dot(&beta[1..], &beta[1..])
}

#[cfg(test)]
/// Gradient of the smoothed objective and the Gram model
/// `(1/n) Σ zᵢzᵢᵀ H'(rᵢ/h)/h + λJ`.
pub(crate) fn gradient_and_metric(
    z: &[f64],
    d: usize,
    lambda: f64,
    h: f64,
    beta: &[f64],
) -> (Vector, Matrix) {
    let (grad, metric, _) = derivatives(z, d, lambda, h, beta, false);
    (grad, metric)
}

/// Gradient, Gram model and (optionally) the exact Hessian.
fn derivatives(
    z: &[f64],
    d: usize,
    lambda: f64,
    h: f64,
    beta: &[f64],
    with_hessian: bool,
) -> (Vector, Matrix, Matrix) {
    let n = z.len() / d;
    let mut grad = vec![0.0; d];
    let mut metric = Matrix::zeros(d, d);
    let mut hessian = Matrix::zeros(
        if with_hessian { d } else { 0 },
        if with_hessian { d } else { 0 },
    );
    for zi in z.chunks_exact(d) {
        let r = 1.0 - dot(zi, beta);
        let v = r / h;
        if v <= -1.0 {
            continue;
        }
        let dk = SmoothKernel::value(v) + v * SmoothKernel::derivative(v);
        for (g, &x) in grad.iter_mut().zip(zi) {
            *g -= dk * x;
        }
        let w = SmoothKernel::derivative(v) / h;
        if w > 0.0 {
            metric.rank_one_update_upper(w, zi);
        }
        if with_hessian {
            let curvature = 2.0 * w + v * SmoothKernel::second_derivative(v) / h;
            if curvature != 0.0 {
                hessian.rank_one_update_upper(curvature, zi);
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    metric.mirror_upper();
    metric.scale(inv_n);
    if with_hessian {
        hessian.mirror_upper();
        hessian.scale(inv_n);
    }
    for (j, g) in grad.iter_mut().enumerate() {
        *g *= inv_n;
        if j > 0 {
            *g += lambda * beta[j];
            metric[(j, j)] += lambda;
            if with_hessian {
                hessian[(j, j)] += lambda;
            }
        }
    }
    (Vector::from_vec(grad), metric, hessian)
}

/// Damped Newton on the smoothed objective at a fixed bandwidth.
pub(crate) fn newton_at(
    z: &[f64],
    d: usize,
    lambda: f64,
    h: f64,
    start: &[f64],
    max_iters: usize,
    tol: f64,
) -> Vec<f64> {
    let mut beta = start.to_vec();
    let mut f = smoothed_objective(z, d, lambda, h, &beta);
    let mut trial = vec![0.0; d];
    for _ in 0..max_iters {
        let (grad, metric, hessian) = derivatives(z, d, lambda, h, &beta, true);
        if grad.max_abs() <= tol * 1e-2 {
            break;
        }
        // exact Hessian where it is positive definite, Gram model elsewhere
        let factor = Cholesky::with_shift(&hessian, 0.0)
            .map(Ok)
            .unwrap_or_else(|| Cholesky::factor(&metric));
        let mut dir = match factor {
            Ok(chol) => {
                let mut step = chol.solve(&grad);
                step.scale(-1.0);
                step
            }
            Err(_) => grad.clone(),
        };
        if !dir.is_finite() || dir.dot(&grad) >= 0.0 {
            dir = grad.clone();
            dir.scale(-1.0);
        }
        let slope = dir.dot(&grad);
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            for j in 0..d {
                trial[j] = beta[j] + t * dir[j];
            }
            let ft = smoothed_objective(z, d, lambda, h, &trial);
            if ft <= f + ARMIJO * t * slope {
                accepted = Some(ft);
                break;
            }
            t *= 0.5;
        }
        let Some(ft) = accepted else { break };
        let decrease = f - ft;
        beta.copy_from_slice(&trial);
        f = ft;
        if decrease <= 1e-15 * f.abs().max(1.0) {
            break;
        }
    }
    beta
}

/// Minimize the smoothed objective while shrinking `h` geometrically from
/// `h_start` to `h_min`, each stage warm-started from the previous one.
pub(crate) fn annealed_newton(
    z: &[f64],
    d: usize,
    lambda: f64,
    h_start: f64,
    h_min: f64,
    opts: &SolverOptions,
) -> Vector {
    let stages = opts.max_anneal_stages;
    let ratio = if stages > 1 {
        (h_min / h_start).powf(1.0 / (stages - 1) as f64)
    } else {
        1.0
    };
    let mut beta = vec![0.0; d];
    let mut h = if stages > 1 { h_start } else { h_min };
    for stage in 0..stages {
        if stage + 1 == stages {
            h = h_min;
        }
        beta = newton_at(z, d, lambda, h, &beta, opts.max_newton_iters, opts.tol);
        h *= ratio;
    }
    Vector::from_vec(beta)
}
