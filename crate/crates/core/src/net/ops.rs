//! Dense kernels with hand-written backward passes.
//!
//! Matrices are row-major. A linear layer stores its weight as `[in, out]`
//! so the forward pass is a sequence of contiguous axpy updates.

use super::scalar::Scalar;

pub const LN_EPS: f64 = 1e-5;

#[inline]
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Dot product with eight independent partial sums (fixed order, vectorisable).
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail = tail + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `y[r] = x[r] W + b` for `rows` rows.
pub fn linear_forward<T: Scalar>(x: &[T], w: &[T], b: &[T], rows: usize, inp: usize, out: usize) -> Vec<T> {
    debug_assert_eq!(x.len(), rows * inp);
    debug_assert_eq!(w.len(), inp * out);
    let mut y = Vec::with_capacity(rows * out);
    for r in 0..rows {
        y.extend_from_slice(b);
        let yr = &mut y[r * out..(r + 1) * out];
        for (k, &xk) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            if xk != T::zero() {
                axpy(xk, &w[k * out..(k + 1) * out], yr);
            }
        }
    }
    y
}

/// Accumulates `dW += x^T dy`.
pub fn linear_backward_weight<T: Scalar>(x: &[T], dy: &[T], dw: &mut [T], rows: usize, inp: usize, out: usize) {
    for r in 0..rows {
        let dyr = &dy[r * out..(r + 1) * out];
        for (k, &xk) in x[r * inp..(r + 1) * inp].iter().enumerate() {
            if xk != T::zero() {
                axpy(xk, dyr, &mut dw[k * out..(k + 1) * out]);
            }
        }
    }
}

pub fn bias_backward<T: Scalar>(dy: &[T], db: &mut [T]) {
    for row in dy.chunks_exact(db.len()) {
        axpy(T::one(), row, db);
    }
}

/// `dx = dy W^T`.
pub fn linear_backward_input<T: Scalar>(dy: &[T], w: &[T], rows: usize, inp: usize, out: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); rows * inp];
    for r in 0..rows {
        let dyr = &dy[r * out..(r + 1) * out];
        for k in 0..inp {
            dx[r * inp + k] = dot(dyr, &w[k * out..(k + 1) * out]);
        }
    }
    dx
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
    pub y: Vec<T>,
}

/// Row-wise layer normalisation followed by the affine `gain * xhat + bias`.
pub fn layer_norm_rows<T: Scalar>(x: &[T], gain: &[T], bias: &[T], eps: f64) -> LnCache<T> {
    let d = gain.len();
    let inv_d = T::c(1.0 / d as f64);
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    let mut rstd = Vec::with_capacity(x.len() / d);
    for row in x.chunks_exact(d) {
        let mean = row.iter().copied().sum::<T>() * inv_d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
        let r = T::one() / (var + T::c(eps)).sqrt();
        rstd.push(r);
        for i in 0..d {
            let h = (row[i] - mean) * r;
            xhat.push(h);
            y.push(gain[i] * h + bias[i]);
        }
    }
    LnCache { xhat, rstd, y }
}

/// Returns `dx`, accumulating gain/bias gradients.
pub fn layer_norm_backward<T: Scalar>(cache: &LnCache<T>, gain: &[T], dy: &[T], dgain: &mut [T], dbias: &mut [T]) -> Vec<T> {
    let d = gain.len();
    let inv_d = T::c(1.0 / d as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); d];
    for (r, (dyr, xh)) in dy.chunks_exact(d).zip(cache.xhat.chunks_exact(d)).enumerate() {
        let mut s1 = T::zero();
        let mut s2 = T::zero();
        for i in 0..d {
            dgain[i] = dgain[i] + dyr[i] * xh[i];
            dbias[i] = dbias[i] + dyr[i];
            dxhat[i] = dyr[i] * gain[i];
            s1 = s1 + dxhat[i];
            s2 = s2 + dxhat[i] * xh[i];
        }
        let (m1, m2) = (s1 * inv_d, s2 * inv_d);
        let rs = cache.rstd[r];
        for i in 0..d {
            dx[r * d + i] = rs * (dxhat[i] - m1 - xh[i] * m2);
        }
    }
    dx
}

/// Layer normalisation of a single vector.
pub fn layer_norm<T: Scalar>(v: &[T], gain: &[T], bias: &[T], eps: f64) -> Vec<T> {
    assert!(v.len() == gain.len() && v.len() == bias.len() && v.len() >= 2, "layer_norm shape mismatch");
    layer_norm_rows(v, gain, bias, eps).y
}

/// Numerically safe softmax (maximum subtracted first).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s = e.iter().copied().sum::<T>();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_sum_exp<T: Scalar>(logits: &[T]) -> T {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln()
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Tanh approximation of GELU.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let inner = T::c(GELU_K) * (x + T::c(GELU_A) * x * x * x);
    T::c(0.5) * x * (T::one() + inner.tanh())
}

#[inline]
pub fn gelu_grad<T: Scalar>(x: T) -> T {
    let inner = T::c(GELU_K) * (x + T::c(GELU_A) * x * x * x);
    let t = inner.tanh();
    T::c(0.5) * (T::one() + t)
        + T::c(0.5) * x * (T::one() - t * t) * T::c(GELU_K) * (T::one() + T::c(3.0 * GELU_A) * x * x)
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[1000.0f64, 0.0]);
        assert_eq!(p, vec![1.0, 0.0]);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn layer_norm_of_constant_is_bias() {
        let y = layer_norm(&[3.0f64; 5], &[1.0; 5], &[0.0; 5], LN_EPS);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..29).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..29).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn linear_round_trip_shapes() {
        // x: 2x3, W: 3x2
        let x = [1.0f64, 2.0, 3.0, 0.0, -1.0, 0.5];
        let w = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let y = linear_forward(&x, &w, &[0.5, -0.5], 2, 3, 2);
        assert_eq!(y, vec![4.5, 4.5, 1.0, -1.0]);
        let dx = linear_backward_input(&[1.0, 0.0, 0.0, 1.0], &w, 2, 3, 2);
        assert_eq!(dx, vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0f64, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_shift_invariant(v in prop::collection::vec(-50.0..50.0f64, 2..16), c in -100.0..100.0f64) {
            let p = softmax(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn layer_norm_standardises(v in prop::collection::vec(-10.0..10.0f64, 4..64)) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            prop_assume!(var > 1e-2);
            let ones = vec![1.0; v.len()];
            let zeros = vec![0.0; v.len()];
            let y = layer_norm(&v, &ones, &zeros, LN_EPS);
            let ym = y.iter().sum::<f64>() / y.len() as f64;
            let yv = y.iter().map(|x| (x - ym).powi(2)).sum::<f64>() / y.len() as f64;
            prop_assert!(ym.abs() < 1e-9);
            prop_assert!((yv - 1.0).abs() < 1e-3);
            let scaled: Vec<f64> = v.iter().map(|x| 10.0 * x).collect();
            for (a, b) in y.iter().zip(layer_norm(&scaled, &ones, &zeros, LN_EPS)) {
                prop_assert!((a - b).abs() < 1e-4);
            }
        }
    }
}
