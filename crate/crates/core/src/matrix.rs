//! Dense row-major 2-D matrix over a `Real` scalar.
//!
//! This is the only tensor type in the crate. Vectors are 1xN or Nx1
//! matrices or plain slices, whichever reads better at the call site.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                context: "Matrix::from_vec",
                expected: (rows, cols),
                got: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::ShapeMismatch {
                    context: "Matrix::from_rows",
                    expected: (1, c),
                    got: (1, row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                context,
                expected: self.shape(),
                got: other.shape(),
            });
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).collect(),
        }
    }

    pub fn scale(&mut self, alpha: T) {
        self.data.iter_mut().for_each(|x| *x = *x * alpha);
    }

    /// self (m x k) times other^T where other is (n x k); result m x n.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                context: "matmul_nt inner dimension",
                expected: (self.rows, self.cols),
                got: other.shape(),
            });
        }
        let k = self.cols;
        let mut out = Matrix::zeros(self.rows, other.rows);
        T::gemm(
            self.rows,
            k,
            other.rows,
            &self.data,
            k as isize,
            1,
            &other.data,
            1,
            k as isize,
            &mut out.data,
        );
        Ok(out)
    }

    /// self (m x k) times other (k x n); result m x n.
    pub fn matmul_nn(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                context: "matmul_nn inner dimension",
                expected: (self.cols, other.rows),
                got: other.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        T::gemm(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            self.cols as isize,
            1,
            &other.data,
            other.cols as isize,
            1,
            &mut out.data,
        );
        Ok(out)
    }

    /// Horizontal concatenation: all parts share a row count.
    pub fn concat_cols(parts: &[&Matrix<T>]) -> Result<Self> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        for m in parts {
            if m.rows != rows {
                return Err(Error::ShapeMismatch {
                    context: "concat_cols row count",
                    expected: (rows, m.cols),
                    got: m.shape(),
                });
            }
        }
        let mut out = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let dst = out.row_mut(r);
            let mut off = 0;
            for m in parts {
                dst[off..off + m.cols].copy_from_slice(m.row(r));
                off += m.cols;
            }
        }
        Ok(out)
    }

    /// Split columns into contiguous chunks of the given widths.
    pub fn split_cols(&self, widths: &[usize]) -> Result<Vec<Matrix<T>>> {
        let total: usize = widths.iter().sum();
        if total != self.cols {
            return Err(Error::ShapeMismatch {
                context: "split_cols widths",
                expected: (self.rows, self.cols),
                got: (self.rows, total),
            });
        }
        let mut out: Vec<Matrix<T>> = widths
            .iter()
            .map(|&w| Matrix::zeros(self.rows, w))
            .collect();
        for r in 0..self.rows {
            let src = self.row(r);
            let mut off = 0;
            for (part, &w) in out.iter_mut().zip(widths) {
                part.row_mut(r).copy_from_slice(&src[off..off + w]);
                off += w;
            }
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }
}

const LANES: usize = 8;

/// Dot product with eight independent accumulator lanes so the optimizer
/// can vectorize without reassociating a single chain.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let k = a.len();
    let chunks = k / LANES;
    let mut acc = [T::zero(); LANES];
    for c in 0..chunks {
        let p = c * LANES;
        let av = &a[p..p + LANES];
        let bv = &b[p..p + LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + av[l] * bv[l];
        }
    }
    let mut total = T::zero();
    for l in 0..LANES {
        total += acc[l];
    }
    for t in chunks * LANES..k {
        total += a[t] * b[t];
    }
    total
}

/// y += alpha * x over slices.
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Brute-force triple-loop oracle, deliberately index-by-index.
    fn matmul_oracle(a: &Matrix<f64>, b_t: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(a.rows(), b_t.rows());
        for i in 0..a.rows() {
            for j in 0..b_t.rows() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b_t.get(j, k);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn matmul_nt_matches_triple_loop() {
        let mut rng = crate::rng::Stream::new(11, &["matmul"]);
        for _ in 0..20 {
            let (m, k, n) = (
                1 + rng.next_below(6) as usize,
                1 + rng.next_below(9) as usize,
                1 + rng.next_below(7) as usize,
            );
            let a = Matrix::from_fn(m, k, |_, _| rng.next_range(-2.0, 2.0));
            let b = Matrix::from_fn(n, k, |_, _| rng.next_range(-2.0, 2.0));
            let fast = a.matmul_nt(&b).unwrap();
            let slow = matmul_oracle(&a, &b);
            for (x, y) in fast.data().iter().zip(slow.data()) {
                let denom = y.abs().max(1.0);
                assert!((x - y).abs() / denom < 1e-12, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn matmul_nn_matches_nt_of_transpose() {
        let mut rng = crate::rng::Stream::new(13, &["matmul_nn"]);
        let a = Matrix::from_fn(4, 6, |_, _| rng.next_range(-1.0, 1.0));
        let b = Matrix::from_fn(6, 5, |_, _| rng.next_range(-1.0, 1.0));
        let b_t = Matrix::from_fn(5, 6, |r, c| b.get(c, r));
        let via_nn = a.matmul_nn(&b).unwrap();
        let via_nt = a.matmul_nt(&b_t).unwrap();
        for (x, y) in via_nn.data().iter().zip(via_nt.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let a: Matrix<f64> = Matrix::zeros(2, 3);
        let b: Matrix<f64> = Matrix::zeros(2, 4);
        let err = a.matmul_nt(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("2x4"), "{msg}");
    }

    #[test]
    fn concat_and_split_roundtrip() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let joined = Matrix::concat_cols(&[&a, &b]).unwrap();
        assert_eq!(joined.row(0), &[1.0, 2.0, 5.0]);
        assert_eq!(joined.row(1), &[3.0, 4.0, 6.0]);
        let parts = joined.split_cols(&[2, 1]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Matrix::from_vec(2, 2, vec![1.0_f64; 3]).is_err());
    }
}
