//! Feedforward regression networks: dense and 1-D convolutional layers,
//! ReLU, inverted dropout and batch normalization, trained with Adam on a
//! squared-error loss.
//!
//! Activations are laid out `[batch][position][channel]`, row-major. A dense
//! layer sees each sample as one flat vector, so flattening a convolutional
//! feature map is free. All trainable parameters of a network live in one
//! flat vector; gradients and optimizer moments mirror it.

mod adam;
mod network;
mod spec;
mod train;

use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

pub use adam::{Adam, AdamConfig};
pub use network::{Mode, Network, Workspace};
pub use spec::{Architecture, LayerSpec, ModelSpec, Padding};
pub use train::{evaluate_loss, train, EpochLoss, Schedule, TrainConfig};

/// Scalar type a network computes in.
pub trait Real:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + DivAssign + Debug + Default + Send + Sync + 'static
{
    /// Tag stored in model files.
    const DTYPE: &'static str;
    const BYTES: usize;

    /// `c = alpha * a * b + beta * c` with explicit row/column strides (`m x k` times `k x n`).
    ///
    /// # Safety
    /// Every strided index must stay inside its slice; [`matmul`] checks this.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> f32 {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> f64 {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Row-major matrix operand, optionally read transposed.
#[derive(Clone, Copy)]
pub(crate) struct Op<'a, T> {
    pub data: &'a [T],
    pub transposed: bool,
}

pub(crate) fn n<T>(data: &[T]) -> Op<'_, T> {
    Op { data, transposed: false }
}

pub(crate) fn t<T>(data: &[T]) -> Op<'_, T> {
    Op { data, transposed: true }
}

/// `c (m x n) = a (m x k) * b (k x n) + beta * c`, all row-major.
///
/// A transposed operand is stored with its dimensions swapped.
pub(crate) fn matmul<T: Real>(m: usize, k: usize, nn: usize, a: Op<'_, T>, b: Op<'_, T>, beta: T, c: &mut [T]) {
    assert!(a.data.len() >= m * k && b.data.len() >= k * nn && c.len() >= m * nn);
    if m == 0 || nn == 0 {
        return;
    }
    let (rsa, csa) = if a.transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b.transposed { (1, k as isize) } else { (nn as isize, 1) };
    // SAFETY: the length checks above cover every index reachable through these strides.
    unsafe {
        T::gemm_raw(
            m,
            k,
            nn,
            T::one(),
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            nn as isize,
            1,
        )
    }
}

/// Mean over the batch of the squared Euclidean residual norm.
pub fn loss_l2<T: Real>(pred: &[T], target: &[T], batch: usize) -> f64 {
    loss_l2_periodic(pred, target, batch, &[])
}

/// Gradient of [`loss_l2`] with respect to the predictions.
pub fn loss_l2_grad<T: Real>(pred: &[T], target: &[T], batch: usize, out: &mut [T]) {
    loss_l2_periodic_grad(pred, target, batch, &[], out)
}

/// An output component whose residual is taken modulo `period`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Periodic {
    pub index: usize,
    pub period: f64,
}

fn residuals<'a, T: Real>(
    pred: &'a [T],
    target: &'a [T],
    batch: usize,
    periodic: &'a [Periodic],
) -> impl Iterator<Item = T> + 'a {
    let width = pred.len().checked_div(batch).unwrap_or(1);
    let mut period = vec![None; width.max(1)];
    for p in periodic {
        if p.index < period.len() {
            period[p.index] = Some(T::of(p.period));
        }
    }
    pred.iter().zip(target).enumerate().map(move |(i, (&p, &y))| {
        let r = p - y;
        match period[i % period.len()] {
            Some(w) => r - w * (r / w).round(),
            None => r,
        }
    })
}

/// [`loss_l2`] with some components compared on a circle.
pub fn loss_l2_periodic<T: Real>(pred: &[T], target: &[T], batch: usize, periodic: &[Periodic]) -> f64 {
    assert_eq!(pred.len(), target.len());
    if batch == 0 {
        return 0.0;
    }
    let s: f64 = residuals(pred, target, batch, periodic)
        .map(|r| {
            let d = r.to_f64_lossy();
            d * d
        })
        .sum();
    s / batch as f64
}

pub fn loss_l2_periodic_grad<T: Real>(pred: &[T], target: &[T], batch: usize, periodic: &[Periodic], out: &mut [T]) {
    let scale = T::of(2.0 / batch.max(1) as f64);
    for (o, r) in out.iter_mut().zip(residuals(pred, target, batch, periodic)) {
        *o = scale * r;
    }
}
