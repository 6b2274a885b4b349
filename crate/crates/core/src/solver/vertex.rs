//! Exact descent over vertices of the unregularized hinge LP.
//!
//! A vertex is fixed by `p + 1` points on the margin (`zᵢᵀβ = 1`). Each step
//! releases one of them along the edge with the most negative directional
//! derivative and performs an exact line search over the piecewise-linear
//! objective, admitting the point whose breakpoint stops the descent.

use crate::linalg::{dot, lu_solve};
use crate::{Matrix, Vector};

pub(crate) fn vertex_descent(z: &[f64], d: usize, start: &[f64]) -> Option<Vector> {
    let n = z.len() / d;
    if n < d {
        return None;
    }
    let row = |i: usize| &z[i * d..(i + 1) * d];
    let mut basis = initial_basis(z, d, start)?;
    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }

    let max_iters = 50 * n + 1000;
    let mut residuals = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut breaks: Vec<(f64, f64, usize)> = Vec::new();
    let mut beta = Vector::zeros(d);

    for _ in 0..max_iters {
        let zb = Matrix::from_fn(d, d, |r, c| row(basis[r])[c]);
        beta = lu_solve(&zb, &Vector::filled(d, 1.0)).ok()?;
        if !beta.is_finite() {
            return None;
        }
        for i in 0..n {
            residuals[i] = if in_basis[i] {
                0.0
            } else {
                1.0 - dot(row(i), beta.as_slice())
            };
        }

        // g = −Σ_{r>0, i∉B} zᵢ, c solves Z_Bᵀ c = g
        let mut g = Vector::zeros(d);
        for i in 0..n {
            if residuals[i] > 0.0 {
                for (gj, &v) in g.as_mut_slice().iter_mut().zip(row(i)) {
                    *gj -= v;
                }
            }
        }
        let c = lu_solve(&zb.transpose(), &g).ok()?;

        let mut candidates: Vec<(f64, usize, f64)> = Vec::with_capacity(2 * d);
        for j in 0..d {
            candidates.push((c[j], j, 1.0));
            candidates.push((1.0 - c[j], j, -1.0));
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut moved = false;
        for &(estimate, j, sign) in &candidates {
            if estimate >= 0.0 {
                break;
            }
            let mut e = Vector::zeros(d);
            e[j] = sign;
            let Ok(dir) = lu_solve(&zb, &e) else { continue };
            let mut scale = 0.0;
            for i in 0..n {
                a[i] = dot(row(i), dir.as_slice());
                scale += a[i].abs();
            }
            a[basis[j]] = sign;
            for (pos, &i) in basis.iter().enumerate() {
                if pos != j {
                    a[i] = 0.0;
                }
            }
            let mut slope = 0.0;
            for i in 0..n {
                if residuals[i] > 0.0 || (residuals[i] == 0.0 && a[i] < 0.0) {
                    slope -= a[i];
                }
            }
            if slope >= -1e-12 * scale.max(1.0) {
                continue;
            }

            breaks.clear();
            for i in 0..n {
                if residuals[i] != 0.0 && a[i] != 0.0 {
                    let t = residuals[i] / a[i];
                    if t > 0.0 {
                        breaks.push((t, a[i].abs(), i));
                    }
                }
            }
            breaks.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut entering = None;
            for &(_, weight, i) in &breaks {
                slope += weight;
                if slope >= 0.0 {
                    entering = Some(i);
                    break;
                }
            }
            let entering = entering?;
            in_basis[basis[j]] = false;
            in_basis[entering] = true;
            basis[j] = entering;
            moved = true;
            break;
        }
        if !moved {
            return Some(beta);
        }
    }
    Some(beta)
}

/// Greedy choice of `d` linearly independent points closest to the margin.
fn initial_basis(z: &[f64], d: usize, start: &[f64]) -> Option<Vec<usize>> {
    let n = z.len() / d;
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|i| ((1.0 - dot(&z[i * d..(i + 1) * d], start)).abs(), i))
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut chosen = Vec::with_capacity(d);
    for &(_, i) in &order {
        let zi = &z[i * d..(i + 1) * d];
        let norm0 = dot(zi, zi).sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = zi.to_vec();
        for _ in 0..2 {
            for q in &ortho {
                let proj = dot(&v, q);
                for (vk, qk) in v.iter_mut().zip(q) {
                    *vk -= proj * qk;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 * norm0 {
            v.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
            chosen.push(i);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hinge(z: &[f64], d: usize, beta: &[f64]) -> f64 {
        z.chunks_exact(d)
            .map(|zi| (1.0 - dot(zi, beta)).max(0.0))
            .sum::<f64>()
    }

    #[test]
    fn one_dimensional_exhaustive() {
        // d = 1 (intercept only): minimize Σ (1 − yᵢβ)₊, optimum at a label's vertex
        let z = [1.0, 1.0, 1.0, -1.0, -1.0];
        let beta = vertex_descent(&z, 1, &[0.0]).unwrap();
        let best = [-1.0, 1.0]
            .iter()
            .map(|&b| hinge(&z, 1, &[b]))
            .fold(f64::INFINITY, f64::min);
        assert!((hinge(&z, 1, beta.as_slice()) - best).abs() < 1e-12);
    }

    #[test]
    fn beats_grid_search_in_two_dimensions() {
        let pts = [
            (1.0, 0.5),
            (1.0, 1.7),
            (1.0, -0.2),
            (-1.0, -0.9),
            (-1.0, 0.4),
            (-1.0, -1.5),
            (1.0, 0.1),
        ];
        let mut z = Vec::new();
        for (y, x) in pts {
            z.extend([y, y * x]);
        }
        let beta = vertex_descent(&z, 2, &[0.0, 0.0]).unwrap();
        let found = hinge(&z, 2, beta.as_slice());
        let mut grid_best = f64::INFINITY;
        for a in -300..=300 {
            for b in -300..=300 {
                let cand = [a as f64 / 50.0, b as f64 / 50.0];
                grid_best = grid_best.min(hinge(&z, 2, &cand));
            }
        }
        assert!(found <= grid_best + 1e-12, "{found} vs {grid_best}");
    }
}
