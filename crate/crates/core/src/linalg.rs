//! Small dense linear algebra, generic over the floating point scalar.
//!
//! Everything here is sized for systems of dimension p + 1 with p at most a
//! few hundred, so matrices are stored full and row-major.

use std::ops::{Index, IndexMut};

use num_traits::Float;

use crate::error::{Error, Result};

/// Dense column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Float> Vector<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![T::zero(); len],
        }
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn from_slice(data: &[T]) -> Self {
        Self {
            data: data.to_vec(),
        }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self {
            data: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.data {
            *a = *a * alpha;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(
            T::zero(),
            |acc, &x| if x.abs() > acc { x.abs() } else { acc },
        )
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.data[i]
    }
}

pub(crate) fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Float> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &Vector<T>) -> Vector<T> {
        debug_assert_eq!(self.cols, x.len());
        Vector::from_vec(
            (0..self.rows)
                .map(|i| dot(self.row(i), x.as_slice()))
                .collect(),
        )
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Elementwise `self += other`, in index order.
    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for a in &mut self.data {
            *a = *a * alpha;
        }
    }

    /// `self += weight * x xᵀ`, touching only the upper triangle; call
    /// [`Matrix::mirror_upper`] once accumulation is complete.
    pub fn rank_one_update_upper(&mut self, weight: T, x: &[T]) {
        let n = self.cols;
        for i in 0..n {
            let wi = weight * x[i];
            let row = &mut self.data[i * n..(i + 1) * n];
            for j in i..n {
                row[j] = row[j] + wi * x[j];
            }
        }
    }

    /// Copy the upper triangle onto the lower triangle.
    pub fn mirror_upper(&mut self) {
        let n = self.cols;
        for i in 0..n {
            for j in 0..i {
                self.data[i * n + j] = self.data[j * n + i];
            }
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        dot(&self.data, &self.data).sqrt()
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Replace with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = T::from(0.5).unwrap();
        for i in 0..self.rows {
            for j in 0..i {
                let avg = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factor `L` of `A + jitter·I`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
    jitter: T,
}

impl<T: Float> Cholesky<T> {
    /// Plain factorization with the given diagonal shift; `None` if a pivot
    /// is not strictly positive.
    pub fn with_shift(a: &Matrix<T>, shift: T) -> Option<Self> {
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)] + shift;
            for k in 0..j {
                diag = diag - l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return None;
            }
            let djj = diag.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(Self {
            lower: l,
            jitter: shift,
        })
    }

    /// Factor with jitter 0, then `1e-12·τ, 1e-11·τ, …, 1e-6·τ` where
    /// `τ = trace(A)/dim`.
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        if !a.is_finite() {
            return Err(Error::NonFinite);
        }
        if let Some(c) = Self::with_shift(a, T::zero()) {
            return Ok(c);
        }
        let dim = T::from(a.rows().max(1)).unwrap();
        let tau = a.trace() / dim;
        if !(tau > T::zero()) {
            return Err(Error::Singular);
        }
        let ten = T::from(10.0).unwrap();
        let mut rel = T::from(1e-12).unwrap();
        let top = T::from(1e-6).unwrap() * T::from(1.0 + 1e-9).unwrap();
        while rel <= top {
            if let Some(c) = Self::with_shift(a, rel * tau) {
                return Ok(c);
            }
            rel = rel * ten;
        }
        Err(Error::Singular)
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// Solve `(A + jitter·I) x = b`.
    pub fn solve(&self, b: &Vector<T>) -> Vector<T> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }
}

fn relative_residual<T: Float>(a: &Matrix<T>, x: &Vector<T>, b: &Vector<T>) -> T {
    let r = a.mul_vec(x).sub(b);
    let denom = a.frobenius_norm() * x.norm() + b.norm();
    if denom == T::zero() {
        T::zero()
    } else {
        r.norm() / denom
    }
}

/// Solve a symmetric system by jittered Cholesky followed by a few rounds of
/// iterative refinement against the unshifted matrix.
pub fn solve_symmetric<T: Float>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    if a.rows() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    if !b.is_finite() {
        return Err(Error::NonFinite);
    }
    let chol = Cholesky::factor(a)?;
    solve_with_factor(a, &chol, b)
}

/// Solve `A x = b` given a (possibly jittered) factor of `A`, refining the
/// solution iteratively when the factor carries jitter.
pub fn solve_with_factor<T: Float>(
    a: &Matrix<T>,
    chol: &Cholesky<T>,
    b: &Vector<T>,
) -> Result<Vector<T>> {
    let mut x = chol.solve(b);
    if chol.jitter() > T::zero() {
        let target = T::from(1e-13).unwrap();
        for _ in 0..50 {
            if relative_residual(a, &x, b) <= target {
                break;
            }
            let r = b.sub(&a.mul_vec(&x));
            let dx = chol.solve(&r);
            x.axpy(T::one(), &dx);
        }
    }
    if !x.is_finite() {
        return Err(Error::Singular);
    }
    Ok(x)
}

/// Solve a general square system by Gaussian elimination with partial
/// pivoting.
pub fn lu_solve<T: Float>(a: &Matrix<T>, b: &Vector<T>) -> Result<Vector<T>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::DimMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut m = a.clone();
    let mut x = b.clone();
    let scale = m.max_abs_entry();
    let tiny = scale * T::epsilon() * T::from(n.max(1)).unwrap();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if !(m[(piv, col)].abs() > tiny) {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                let t = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            let t = x[col];
            x[col] = x[piv];
            x[piv] = t;
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                m[(r, j)] = m[(r, j)] - f * m[(col, j)];
            }
            x[r] = x[r] - f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s = s - m[(i, j)] * x[j];
        }
        x[i] = s / m[(i, i)];
    }
    if !x.is_finite() {
        return Err(Error::Singular);
    }
    Ok(x)
}

impl<T: Float> Matrix<T> {
    pub fn max_abs_entry(&self) -> T {
        self.data.iter().fold(
            T::zero(),
            |acc, &x| if x.abs() > acc { x.abs() } else { acc },
        )
    }
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm<T: Float>(a: &Matrix<T>) -> Result<T> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.cols();
    if n == 0 || a.rows() == 0 || a.max_abs_entry() == T::zero() {
        return Ok(T::zero());
    }
    let ata = a.transpose().matmul(a);
    // Deterministic start with no special alignment to coordinate axes.
    let mut x = Vector::from_vec(
        (0..n)
            .map(|i| T::one() + T::from(i as f64 * 0.618_033_988_75 % 1.0).unwrap())
            .collect(),
    );
    let nx = x.norm();
    x.scale(T::one() / nx);
    let mut lambda = T::zero();
    let tol = T::from(1e-15).unwrap();
    for _ in 0..20_000 {
        let y = ata.mul_vec(&x);
        let ny = y.norm();
        if ny == T::zero() {
            return Ok(T::zero());
        }
        let next = x.dot(&y);
        let mut y = y;
        y.scale(T::one() / ny);
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        x = y;
        if done {
            break;
        }
    }
    Ok(lambda.max(T::zero()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Matrix::<f64>::identity(3);
        let b = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(solve_symmetric(&a, &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_diag(&[2.0, 4.0]);
        let b = Vector::from_vec(vec![2.0, 4.0]);
        let x = solve_symmetric(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = Matrix::<f64>::identity(2);
        a[(0, 1)] = f64::NAN;
        let b = Vector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve_symmetric(&a, &b), Err(Error::NonFinite)));
        let a = Matrix::<f64>::identity(2);
        let b = Vector::from_vec(vec![f64::INFINITY, 1.0]);
        assert!(matches!(solve_symmetric(&a, &b), Err(Error::NonFinite)));
    }

    #[test]
    fn zero_matrix_is_singular() {
        let a = Matrix::<f64>::zeros(3, 3);
        let b = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(solve_symmetric(&a, &b), Err(Error::Singular)));
    }

    #[test]
    fn semidefinite_matrix_uses_jitter() {
        // rank one, consistent right-hand side
        let a = Matrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let chol = Cholesky::factor(&a).unwrap();
        assert!(chol.jitter() > 0.0);
    }

    #[test]
    fn spectral_norm_simple_cases() {
        let a = Matrix::from_diag(&[3.0, 1.0]);
        assert!((spectral_norm(&a).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&Matrix::<f64>::zeros(4, 4)).unwrap(), 0.0);
        let mut bad = Matrix::<f64>::identity(2);
        bad[(1, 1)] = f64::INFINITY;
        assert!(matches!(spectral_norm(&bad), Err(Error::NonFinite)));
    }

    #[test]
    fn works_in_single_precision() {
        let a = Matrix::<f32>::from_diag(&[2.0, 4.0]);
        let b = Vector::from_vec(vec![2.0f32, 4.0]);
        let x = solve_symmetric(&a, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!((spectral_norm(&a).unwrap() - 4.0).abs() < 1e-5);
    }

    #[test]
    fn lu_solves_nonsymmetric() {
        let a = Matrix::from_row_major(2, 2, vec![0.0, 2.0, 1.0, 1.0]).unwrap();
        let b = Vector::from_vec(vec![2.0, 3.0]);
        let x = lu_solve(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let s = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(lu_solve(&s, &b), Err(Error::Singular)));
    }
}
