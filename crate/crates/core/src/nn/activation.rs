//! GELU, sigmoid and row softmax with their backward forms.

use crate::matrix::Matrix;
use crate::scalar::Real;

/// Standard normal CDF via erf: Phi(x) = (1 + erf(x / sqrt(2))) / 2.
pub fn normal_cdf<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    half * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

/// Standard normal PDF.
pub fn normal_pdf<T: Real>(x: T) -> T {
    let inv_sqrt_tau = T::of(1.0 / std::f64::consts::TAU.sqrt());
    inv_sqrt_tau * (-x * x * T::of(0.5)).exp()
}

/// Exact GELU: x * Phi(x).
pub fn gelu<T: Real>(input: &Matrix<T>) -> Matrix<T> {
    input.map(|x| x * normal_cdf(x))
}

/// d/dx [x * Phi(x)] = Phi(x) + x * phi(x), evaluated at the pre-activation.
pub fn gelu_backward<T: Real>(pre_activation: &Matrix<T>, grad_out: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(pre_activation.shape(), grad_out.shape());
    let mut out = grad_out.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(pre_activation.data()) {
        *g = *g * (normal_cdf(x) + x * normal_pdf(x));
    }
    out
}

/// Numerically stable logistic sigmoid.
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows<T: Real>(logits: &Matrix<T>) -> Matrix<T> {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Backward through row softmax: given s = softmax(z) and dL/ds, returns
/// dL/dz = s .* (dL/ds - sum_j dL/ds_j s_j).
pub fn softmax_rows_backward<T: Real>(softmax: &Matrix<T>, grad_out: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(softmax.shape(), grad_out.shape());
    let mut out = Matrix::zeros(softmax.rows(), softmax.cols());
    for r in 0..softmax.rows() {
        let s = softmax.row(r);
        let g = grad_out.row(r);
        let inner: T = s.iter().zip(g).map(|(&si, &gi)| si * gi).sum();
        for (o, (&si, &gi)) in out.row_mut(r).iter_mut().zip(s.iter().zip(g)) {
            *o = si * (gi - inner);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Quadrature oracle for Phi(x): 0.5 + integral of the normal pdf over
    // [0, x], composite Simpson with 4096 panels.
    fn phi_quadrature(x: f64) -> f64 {
        let n = 4096;
        let h = x / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / std::f64::consts::TAU.sqrt();
        let mut s = pdf(0.0) + pdf(x);
        for i in 1..n {
            let t = i as f64 * h;
            s += pdf(t) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        0.5 + s * h / 3.0
    }

    #[test]
    fn gelu_fixed_points() {
        let m = Matrix::from_rows(&[vec![0.0_f64, 10.0]]).unwrap();
        let out = gelu(&m);
        assert_eq!(out.get(0, 0), 0.0);
        assert!((out.get(0, 1) - 10.0).abs() < 1e-6);
    }

    #[test]
    fn gelu_at_one_matches_quadrature() {
        let m = Matrix::from_rows(&[vec![1.0_f64]]).unwrap();
        let got = gelu(&m).get(0, 0);
        let want = 1.0 * phi_quadrature(1.0);
        assert!((got - want).abs() < 1e-10, "gelu(1) = {got}, oracle {want}");
    }

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &x in &[-2.0_f64, -0.7, 0.3, 1.9] {
            let f = |v: f64| v * normal_cdf(v);
            let fd = (f(x + h) - f(x - h)) / (2.0 * h);
            let pre = Matrix::from_rows(&[vec![x]]).unwrap();
            let ones = Matrix::from_rows(&[vec![1.0]]).unwrap();
            let analytic = gelu_backward(&pre, &ones).get(0, 0);
            assert!((fd - analytic).abs() < 1e-8, "x={x}: {fd} vs {analytic}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let m = Matrix::from_rows(&[vec![1.0_f64, 2.0, 3.0], vec![-5.0, 0.0, 5.0]]).unwrap();
        let s = softmax_rows(&m);
        for r in 0..2 {
            let sum: f64 = s.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(s.row(r).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(sigmoid_scalar(800.0_f64) > 0.999_999);
        assert!(sigmoid_scalar(-800.0_f64) < 1e-6);
        assert!((sigmoid_scalar(0.0_f64) - 0.5).abs() < 1e-15);
    }
}
