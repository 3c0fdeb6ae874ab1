//! Scalar abstraction: the numeric kernels are generic over `Real`,
//! implemented for `f32` and `f64`. Training code uses the `f64` aliases
//! exported from the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar usable by every numeric module in this crate.
pub trait Real:
    Float + FromPrimitive + NumAssignOps + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Error function, accurate to a few ULP over the whole line.
    fn erf(self) -> Self;

    /// Lossless-enough conversion from `f64` (panics only on NaN cast failure).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> Real conversion")
    }

    /// Widening conversion to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real -> f64 conversion")
    }

    /// Dense product c (m x n, row-major) = a (m x k) * b (k x n), where a
    /// and b are strided views (a transposed operand passes swapped
    /// strides). f32/f64 dispatch to a tuned kernel; the default is a
    /// stride-aware triple loop.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        c: &mut [Self],
    ) {
        gemm_loops(m, k, n, a, rsa, csa, b, rsb, csb, c);
    }
}

/// Stride-aware reference product used by scalars without a tuned kernel.
#[allow(clippy::too_many_arguments)]
pub fn gemm_loops<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    rsa: isize,
    csa: isize,
    b: &[T],
    rsb: isize,
    csb: isize,
    c: &mut [T],
) {
    let at = |i: usize, t: usize| a[(i as isize * rsa + t as isize * csa) as usize];
    let bt = |t: usize, j: usize| b[(t as isize * rsb + j as isize * csb) as usize];
    for i in 0..m {
        for j in 0..n {
            let mut acc = T::zero();
            for t in 0..k {
                acc = acc + at(i, t) * bt(t, j);
            }
            c[i * n + j] = acc;
        }
    }
}

impl Real for f64 {
    fn erf(self) -> Self {
        erf_f64(self)
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        c: &mut [f64],
    ) {
        debug_assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

impl Real for f32 {
    fn erf(self) -> Self {
        erf_f64(self as f64) as f32
    }

    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        c: &mut [f32],
    ) {
        debug_assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                1.0,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

/// erf via the all-positive-term confluent series
/// erf(x) = (2/sqrt(pi)) * x * exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!,
/// which is free of cancellation. Beyond |x| = 6 the result is +-1 to
/// within f64 epsilon (erfc(6) < 2.2e-17).
fn erf_f64(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    if ax > 6.0 {
        return 1.0_f64.copysign(x);
    }
    if ax == 0.0 {
        return x;
    }
    let two_x2 = 2.0 * x * x;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut denom = 1.0_f64; // odd factor 2n+1
    for _ in 0..260 {
        denom += 2.0;
        term *= two_x2 / denom;
        sum += term;
        if term < sum * 1e-20 {
            break;
        }
    }
    let two_over_sqrt_pi = 1.128_379_167_095_512_6_f64;
    two_over_sqrt_pi * x * (-x * x).exp() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: Gauss-Legendre quadrature of (2/sqrt(pi)) exp(-t^2)
    // over [0, x], 64 panels x 8 nodes.
    fn erf_quadrature(x: f64) -> f64 {
        let nodes = [
            -0.960_289_856_497_536_2,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_649_8,
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_2,
        ];
        let weights = [
            0.101_228_536_290_376_26,
            0.222_381_034_453_374_47,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_47,
            0.101_228_536_290_376_26,
        ];
        let panels = 64;
        let h = x / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let a = p as f64 * h;
            let mid = a + 0.5 * h;
            let half = 0.5 * h;
            for (n, w) in nodes.iter().zip(weights.iter()) {
                let t = mid + half * n;
                total += w * half * (-t * t).exp();
            }
        }
        total * 2.0 / std::f64::consts::PI.sqrt()
    }

    #[test]
    fn erf_matches_quadrature() {
        for &x in &[0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.5] {
            let got = Real::erf(x);
            let want = erf_quadrature(x);
            assert!(
                (got - want).abs() < 1e-12,
                "erf({x}): got {got}, quadrature {want}"
            );
        }
    }

    #[test]
    fn erf_odd_and_saturating() {
        assert_eq!(Real::erf(0.0_f64), 0.0);
        for &x in &[0.3, 1.7, 5.0] {
            assert_eq!(Real::erf(x), -Real::erf(-x));
        }
        assert_eq!(Real::erf(10.0_f64), 1.0);
        assert_eq!(Real::erf(-10.0_f64), -1.0);
    }

    #[test]
    fn erf_reference_values() {
        // High-precision values of erf(1) and erf(2).
        assert!((Real::erf(1.0_f64) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((Real::erf(2.0_f64) - 0.995_322_265_018_952_7).abs() < 1e-15);
    }

    #[test]
    fn erf_f32_agrees_with_f64() {
        for &x in &[0.1_f32, 0.9, 2.3] {
            assert!((Real::erf(x) as f64 - Real::erf(x as f64)).abs() < 1e-6);
        }
    }
}
