//! Dense row-major matrices over a scalar abstraction. The model runs
//! in `f32` for speed; instantiating the identical code at `f64`
//! supports finite-difference gradient verification.

use std::fmt::Debug;

/// Floating-point element type the model math is generic over.
pub trait Scalar:
    num_traits::Float + Debug + Default + Send + Sync + 'static + std::iter::Sum
{
    /// `c = alpha * a @ b + beta * c` for row-major slices with explicit
    /// strides; dimensions are `a: m×k`, `b: k×n`, `c: m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    ) {
        debug_assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::sgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    ) {
        debug_assert!(c.len() >= m * n);
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                alpha,
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Mat<S> {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<S>) -> Mat<S> {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self @ b`.
    pub fn matmul(&self, b: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, b.rows);
        let mut c = Mat::zeros(self.rows, b.cols);
        S::gemm_strided(
            self.rows,
            self.cols,
            b.cols,
            S::one(),
            &self.data,
            self.cols as isize,
            1,
            &b.data,
            b.cols as isize,
            1,
            S::zero(),
            &mut c.data,
        );
        c
    }

    /// `self @ b.T` where `b` is `n×k` and `self` is `m×k`.
    pub fn matmul_nt(&self, b: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, b.cols);
        let mut c = Mat::zeros(self.rows, b.rows);
        S::gemm_strided(
            self.rows,
            self.cols,
            b.rows,
            S::one(),
            &self.data,
            self.cols as isize,
            1,
            &b.data,
            1,
            b.cols as isize,
            S::zero(),
            &mut c.data,
        );
        c
    }

    /// `self.T @ b` where `self` is `k×m` and `b` is `k×n`; result `m×n`
    /// is accumulated into `out` (`out += self.T @ b`).
    pub fn matmul_tn_acc(&self, b: &Mat<S>, out: &mut Mat<S>) {
        assert_eq!(self.rows, b.rows);
        assert_eq!(out.rows, self.cols);
        assert_eq!(out.cols, b.cols);
        S::gemm_strided(
            self.cols,
            self.rows,
            b.cols,
            S::one(),
            &self.data,
            1,
            self.cols as isize,
            &b.data,
            b.cols as isize,
            1,
            S::one(),
            &mut out.data,
        );
    }

    /// Add a row vector to every row.
    pub fn add_row_bias(&mut self, bias: &[S]) {
        assert_eq!(bias.len(), self.cols);
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(bias) {
                *x = *x + *b;
            }
        }
    }
}

/// In-place softmax of one row; the normalizer accumulates in `f64` so
/// rows sum to 1 within 1e-6 regardless of scalar width.
pub fn softmax_row<S: Scalar>(row: &mut [S]) {
    let mut max = S::neg_infinity();
    for &x in row.iter() {
        if x > max {
            max = x;
        }
    }
    let mut denom = 0f64;
    for x in row.iter_mut() {
        let e = (*x - max).exp();
        denom += e.as_f64();
        *x = e;
    }
    let inv = S::from_f64(1.0 / denom);
    for x in row.iter_mut() {
        *x = *x * inv;
    }
}

/// Natural log of the softmax normalizer `ln Σ exp(row - max)` plus the
/// max, i.e. `ln Σ exp(row)`, with an f64 accumulator.
pub fn log_sum_exp<S: Scalar>(row: &[S]) -> f64 {
    let mut max = S::neg_infinity();
    for &x in row {
        if x > max {
            max = x;
        }
    }
    let mut denom = 0f64;
    for &x in row {
        denom += (x - max).exp().as_f64();
    }
    max.as_f64() + denom.ln()
}

/// GELU with the tanh approximation.
pub fn gelu<S: Scalar>(x: S) -> S {
    let c = S::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = S::from_f64(0.044_715);
    let half = S::from_f64(0.5);
    let inner = c * (x + k * x * x * x);
    half * x * (S::one() + inner.tanh())
}

/// Derivative of [`gelu`].
pub fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::from_f64(0.797_884_560_802_865_4);
    let k = S::from_f64(0.044_715);
    let half = S::from_f64(0.5);
    let three = S::from_f64(3.0);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let sech2 = S::one() - t * t;
    half * (S::one() + t) + half * x * sech2 * c * (S::one() + three * k * x * x)
}

/// Standard normal draw via Box–Muller, deterministic for a given RNG
/// stream.
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}
