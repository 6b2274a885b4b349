//! Dual coordinate ascent (SMO with second-order working-set selection) for
//! the ridge-penalized hinge problem.
//!
//! Primal: `(1/n) Σ ξᵢ + (λ/2)‖w‖²`, i.e. box constraint `C = 1/(nλ)`.

use crate::linalg::dot;
use crate::Vector;

use super::SvmProblem;

const TAU: f64 = 1e-12;

pub(crate) fn solve_dual(problem: &SvmProblem<'_>, tol: f64) -> Option<Vector> {
    let n = problem.n();
    let p = problem.p;
    let c = 1.0 / (n as f64 * problem.lambda);
    let y = problem.labels;
    let x = |i: usize| &problem.features[i * p..(i + 1) * p];
    let diag: Vec<f64> = (0..n).map(|i| dot(x(i), x(i))).collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; p];
    // gradient of ½αᵀQα − Σα: Gᵢ = yᵢxᵢᵀw − 1
    let mut grad = vec![-1.0; n];
    let eps = tol.max(1e-12);
    let max_iters = (200 * n).max(200_000);

    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut converged = false;
    for _ in 0..max_iters {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        if i_sel == usize::MAX {
            converged = true;
            break;
        }
        let xi = x(i_sel);
        let mut gmin = f64::INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut quad = diag[i_sel] + diag[t] - 2.0 * dot(xi, x(t));
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -b * b / quad;
                if obj < best_obj {
                    best_obj = obj;
                    j_sel = t;
                }
            }
        }
        if gmax - gmin < eps || j_sel == usize::MAX {
            converged = true;
            break;
        }

        let (i, j) = (i_sel, j_sel);
        let kij = dot(x(i), x(j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        if di == 0.0 && dj == 0.0 {
            converged = true;
            break;
        }
        for k in 0..p {
            w[k] += di * x(i)[k] + dj * x(j)[k];
        }
        for t in 0..n {
            grad[t] = y[t] * dot(x(t), &w) - 1.0;
        }
    }
    if !converged {
        return None;
    }

    // intercept: b = −ρ
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        0.5 * (ub + lb)
    };
    if !rho.is_finite() {
        return None;
    }
    let mut beta = Vec::with_capacity(p + 1);
    beta.push(-rho);
    beta.extend(w);
    Some(Vector::from_vec(beta))
}
