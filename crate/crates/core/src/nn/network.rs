use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{LayerSpec, ModelSpec, Padding, Shape, BN_EPS, BN_MOMENTUM};
use super::{matmul, n, t, Real};
use crate::error::{Error, Result};
use crate::par::Execution;

/// Rows per chunk when inference is split over workers.
const PREDICT_CHUNK: usize = 256;

/// Resolved layer with offsets into the parameter and state vectors.
///
/// Dense weights are `n_in x n_out`; convolution weights are
/// `(kernel * cin) x cout` with row `k * cin + c` holding tap `k` of input
/// channel `c`. Each weight block is followed by its bias.
#[derive(Debug, Clone, PartialEq)]
enum Stage {
    Dense {
        n_in: usize,
        n_out: usize,
        w: usize,
        b: usize,
    },
    Conv {
        len_in: usize,
        len_out: usize,
        cin: usize,
        cout: usize,
        kernel: usize,
        pad: usize,
        w: usize,
        b: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Norm {
        ch: usize,
        gamma: usize,
        beta: usize,
        mean: usize,
        var: usize,
    },
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
struct Planned {
    stage: Stage,
    in_size: usize,
    out_size: usize,
}

/// How a forward pass treats dropout and normalization.
pub enum Mode<'a> {
    /// Dropout off, normalization from running statistics.
    Infer,
    /// Fresh dropout masks, normalization from batch statistics.
    Train(&'a mut dyn RngCore),
    /// Like `Train`, but reuses the masks already held by the workspace.
    TrainFixedMasks,
}

#[derive(Debug, Clone, Default)]
struct Buffers<T> {
    out: Vec<T>,
    cols: Vec<T>,
    mask: Vec<T>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    mean: Vec<T>,
    var: Vec<T>,
}

/// Scratch space and cached activations for one batch.
#[derive(Debug, Clone, Default)]
pub struct Workspace<T> {
    batch: usize,
    train: bool,
    input: Vec<T>,
    bufs: Vec<Buffers<T>>,
    grad: Vec<T>,
    grad_next: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Real> Workspace<T> {
    /// Dropout mask (0 or `1 / (1 - rate)` per element) of layer `layer`.
    pub fn mask(&self, layer: usize) -> &[T] {
        &self.bufs[layer].mask
    }

    pub fn mask_mut(&mut self, layer: usize) -> &mut Vec<T> {
        &mut self.bufs[layer].mask
    }

    /// Output of layer `layer` from the last forward pass.
    pub fn output(&self, layer: usize) -> &[T] {
        &self.bufs[layer].out
    }

    /// Normalized, pre-affine values of a normalization layer from the last training pass.
    pub fn normalized(&self, layer: usize) -> &[T] {
        &self.bufs[layer].xhat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: ModelSpec,
    plan: Vec<Planned>,
    params: Vec<T>,
    state: Vec<T>,
}

fn plan(spec: &ModelSpec) -> Result<(Vec<Planned>, usize, usize)> {
    let shapes = spec.shapes()?;
    let mut prev: Shape = spec.input_shape();
    let (mut np, mut ns) = (0, 0);
    let mut out = Vec::with_capacity(shapes.len());
    for (l, &s) in spec.layers.iter().zip(&shapes) {
        let stage = match *l {
            LayerSpec::Dense { width } | LayerSpec::Linear { width } => {
                let n_in = prev.size();
                let st = Stage::Dense {
                    n_in,
                    n_out: width,
                    w: np,
                    b: np + n_in * width,
                };
                np += n_in * width + width;
                st
            }
            LayerSpec::Conv1d {
                filters,
                kernel,
                padding,
            } => {
                let pad = match padding {
                    Padding::Same => (kernel - 1) / 2,
                    Padding::Valid => 0,
                };
                let rows = kernel * prev.ch;
                let st = Stage::Conv {
                    len_in: prev.len,
                    len_out: s.len,
                    cin: prev.ch,
                    cout: filters,
                    kernel,
                    pad,
                    w: np,
                    b: np + rows * filters,
                };
                np += rows * filters + filters;
                st
            }
            LayerSpec::Relu => Stage::Relu,
            LayerSpec::Dropout { rate } => Stage::Dropout { rate },
            LayerSpec::Normalization => {
                let st = Stage::Norm {
                    ch: s.ch,
                    gamma: np,
                    beta: np + s.ch,
                    mean: ns,
                    var: ns + s.ch,
                };
                np += 2 * s.ch;
                ns += 2 * s.ch;
                st
            }
            LayerSpec::Flatten => Stage::Flatten,
        };
        out.push(Planned {
            stage,
            in_size: prev.size(),
            out_size: s.size(),
        });
        prev = s;
    }
    Ok((out, np, ns))
}

fn uniform<T: Real>(rng: &mut ChaCha8Rng, dst: &mut [T], limit: f64) {
    for v in dst {
        *v = T::of(rng.gen_range(-limit..limit));
    }
}

fn add_bias_rows<T: Real>(y: &mut [T], bias: &[T]) {
    for row in y.chunks_exact_mut(bias.len()) {
        row.copy_from_slice(bias);
    }
}

fn column_sums<T: Real>(g: &[T], cols: usize, dst: &mut [T]) {
    for row in g.chunks_exact(cols) {
        for (d, &v) in dst.iter_mut().zip(row) {
            *d += v;
        }
    }
}

impl<T: Real> Network<T> {
    /// Fresh network: He-uniform hidden weights, Glorot-uniform linear head,
    /// zero biases, unit normalization scale.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        let (plan, np, ns) = plan(&spec)?;
        let mut params = vec![T::zero(); np];
        let mut state = vec![T::zero(); ns];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (p, l) in plan.iter().zip(&spec.layers) {
            let linear = matches!(l, LayerSpec::Linear { .. });
            match p.stage {
                Stage::Dense { n_in, n_out, w, .. } => {
                    let fan = if linear { (n_in + n_out) as f64 } else { n_in as f64 };
                    uniform(&mut rng, &mut params[w..w + n_in * n_out], (6.0 / fan).sqrt());
                }
                Stage::Conv {
                    cin, cout, kernel, w, ..
                } => {
                    let fan = (kernel * cin) as f64;
                    uniform(&mut rng, &mut params[w..w + kernel * cin * cout], (6.0 / fan).sqrt());
                }
                Stage::Norm { ch, gamma, var, .. } => {
                    params[gamma..gamma + ch].fill(T::one());
                    state[var..var + ch].fill(T::one());
                }
                _ => {}
            }
        }
        Ok(Network {
            spec,
            plan,
            params,
            state,
        })
    }

    /// Network with given parameters; lengths must match the `ModelSpec`.
    pub fn from_parts(spec: ModelSpec, params: Vec<T>, state: Vec<T>) -> Result<Self> {
        let (plan, np, ns) = plan(&spec)?;
        if params.len() != np {
            return Err(Error::shape(format!("{np} parameters"), params.len()));
        }
        if state.len() != ns {
            return Err(Error::shape(format!("{ns} state values"), state.len()));
        }
        Ok(Network {
            spec,
            plan,
            params,
            state,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Normalization running means and variances.
    pub fn state(&self) -> &[T] {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut [T] {
        &mut self.state
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.spec.output_width
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace {
            bufs: vec![Buffers::default(); self.plan.len()],
            ..Workspace::default()
        }
    }

    /// Runs `batch` samples (row-major, `batch x input_width`) through the network.
    pub fn forward<'w>(
        &self,
        ws: &'w mut Workspace<T>,
        input: &[T],
        batch: usize,
        mut mode: Mode<'_>,
    ) -> Result<&'w [T]> {
        let width = self.spec.input_width;
        if input.len() != batch * width {
            return Err(Error::shape(format!("{batch} x {width}"), input.len()));
        }
        if ws.bufs.len() != self.plan.len() {
            *ws = self.workspace();
        }
        let train = !matches!(mode, Mode::Infer);
        ws.batch = batch;
        ws.train = train;
        ws.input.clear();
        ws.input.extend_from_slice(input);
        let p = &self.params;

        for i in 0..self.plan.len() {
            let planned = &self.plan[i];
            let (prev, rest) = ws.bufs.split_at_mut(i);
            let x: &[T] = if i == 0 { &ws.input } else { &prev[i - 1].out };
            let buf = &mut rest[0];
            buf.out.resize(batch * planned.out_size, T::zero());
            match planned.stage {
                Stage::Dense { n_in, n_out, w, b } => {
                    add_bias_rows(&mut buf.out, &p[b..b + n_out]);
                    matmul(batch, n_in, n_out, n(x), n(&p[w..b]), T::one(), &mut buf.out);
                }
                Stage::Conv {
                    len_in,
                    len_out,
                    cin,
                    cout,
                    kernel,
                    pad,
                    w,
                    b,
                } => {
                    let rows = kernel * cin;
                    buf.cols.resize(batch * len_out * rows, T::zero());
                    im2col(x, batch, len_in, len_out, cin, kernel, pad, &mut buf.cols);
                    add_bias_rows(&mut buf.out, &p[b..b + cout]);
                    matmul(batch * len_out, rows, cout, n(&buf.cols), n(&p[w..b]), T::one(), &mut buf.out);
                }
                Stage::Relu => {
                    for (o, &v) in buf.out.iter_mut().zip(x) {
                        *o = v.max(T::zero());
                    }
                }
                Stage::Dropout { rate } => {
                    match &mut mode {
                        Mode::Infer => {
                            buf.out.copy_from_slice(x);
                            continue;
                        }
                        Mode::Train(rng) => {
                            buf.mask.resize(x.len(), T::zero());
                            let keep = T::of(1.0 / (1.0 - rate));
                            let threshold = (rate * 4_294_967_296.0) as u64;
                            for m in buf.mask.iter_mut() {
                                *m = if (rng.next_u32() as u64) < threshold { T::zero() } else { keep };
                            }
                        }
                        Mode::TrainFixedMasks => {
                            if buf.mask.len() != x.len() {
                                return Err(Error::shape(x.len(), buf.mask.len()));
                            }
                        }
                    }
                    for ((o, &v), &m) in buf.out.iter_mut().zip(x).zip(&buf.mask) {
                        *o = v * m;
                    }
                }
                Stage::Norm {
                    ch,
                    gamma,
                    beta,
                    mean,
                    var,
                } => {
                    let (g, bt) = (&p[gamma..gamma + ch], &p[beta..beta + ch]);
                    if train {
                        batch_norm_train(x, ch, g, bt, buf);
                    } else {
                        let (rm, rv) = (&self.state[mean..mean + ch], &self.state[var..var + ch]);
                        let eps = T::of(BN_EPS);
                        let scale: Vec<T> = (0..ch).map(|c| g[c] / (rv[c] + eps).sqrt()).collect();
                        for (orow, xrow) in buf.out.chunks_exact_mut(ch).zip(x.chunks_exact(ch)) {
                            for c in 0..ch {
                                orow[c] = (xrow[c] - rm[c]) * scale[c] + bt[c];
                            }
                        }
                    }
                }
                Stage::Flatten => buf.out.copy_from_slice(x),
            }
        }
        Ok(match ws.bufs.last() {
            Some(b) => &b.out,
            None => &ws.input,
        })
    }

    /// Folds the batch statistics of the last training pass into the running averages.
    pub fn update_running_stats(&mut self, ws: &Workspace<T>) {
        if !ws.train {
            return;
        }
        let m = T::of(BN_MOMENTUM);
        let one_m = T::one() - m;
        for (planned, buf) in self.plan.iter().zip(&ws.bufs) {
            if let Stage::Norm { ch, mean, var, .. } = planned.stage {
                let rows = (buf.xhat.len() / ch).max(1);
                let unbias = if rows > 1 {
                    T::of(rows as f64 / (rows as f64 - 1.0))
                } else {
                    T::one()
                };
                for c in 0..ch {
                    self.state[mean + c] = m * self.state[mean + c] + one_m * buf.mean[c];
                    self.state[var + c] = m * self.state[var + c] + one_m * buf.var[c] * unbias;
                }
            }
        }
    }

    /// Gradient of a loss with respect to every parameter, given the loss
    /// gradient `d_out` at the network output. Needs a preceding training-mode
    /// forward pass on `ws`. Overwrites `grads`.
    pub fn backward(&self, ws: &mut Workspace<T>, d_out: &[T], grads: &mut [T]) -> Result<()> {
        if !ws.train {
            return Err(Error::Config("backward needs a training-mode forward pass".into()));
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape(self.params.len(), grads.len()));
        }
        let batch = ws.batch;
        let expected = batch * self.spec.output_width;
        if d_out.len() != expected {
            return Err(Error::shape(expected, d_out.len()));
        }
        grads.fill(T::zero());
        ws.grad.clear();
        ws.grad.extend_from_slice(d_out);
        let p = &self.params;

        for i in (0..self.plan.len()).rev() {
            let planned = &self.plan[i];
            let need_dx = i > 0;
            let x: &[T] = if i == 0 { &ws.input } else { &ws.bufs[i - 1].out };
            let buf = &ws.bufs[i];
            let g = &ws.grad;
            let gx = &mut ws.grad_next;
            gx.clear();
            gx.resize(batch * planned.in_size, T::zero());
            match planned.stage {
                Stage::Dense { n_in, n_out, w, b } => {
                    matmul(n_in, batch, n_out, t(x), n(g), T::one(), &mut grads[w..b]);
                    column_sums(g, n_out, &mut grads[b..b + n_out]);
                    if need_dx {
                        matmul(batch, n_out, n_in, n(g), t(&p[w..b]), T::zero(), gx);
                    }
                }
                Stage::Conv {
                    len_in,
                    len_out,
                    cin,
                    cout,
                    kernel,
                    pad,
                    w,
                    b,
                } => {
                    let rows = kernel * cin;
                    let m = batch * len_out;
                    matmul(rows, m, cout, t(&buf.cols), n(g), T::one(), &mut grads[w..b]);
                    column_sums(g, cout, &mut grads[b..b + cout]);
                    if need_dx {
                        let dcols = &mut ws.scratch;
                        dcols.resize(m * rows, T::zero());
                        matmul(m, cout, rows, n(g), t(&p[w..b]), T::zero(), dcols);
                        col2im(dcols, batch, len_in, len_out, cin, kernel, pad, gx);
                    }
                }
                Stage::Relu => {
                    for ((d, &gv), &o) in gx.iter_mut().zip(g).zip(&buf.out) {
                        *d = if o > T::zero() { gv } else { T::zero() };
                    }
                }
                Stage::Dropout { .. } => {
                    for ((d, &gv), &mv) in gx.iter_mut().zip(g).zip(&buf.mask) {
                        *d = gv * mv;
                    }
                }
                Stage::Norm { ch, gamma, beta, .. } => {
                    let rows = g.len() / ch;
                    let mut sum_g = vec![T::zero(); ch];
                    let mut sum_gx = vec![T::zero(); ch];
                    for (grow, xrow) in g.chunks_exact(ch).zip(buf.xhat.chunks_exact(ch)) {
                        for c in 0..ch {
                            sum_g[c] += grow[c];
                            sum_gx[c] += grow[c] * xrow[c];
                        }
                    }
                    grads[gamma..gamma + ch].copy_from_slice(&sum_gx);
                    grads[beta..beta + ch].copy_from_slice(&sum_g);
                    if need_dx {
                        let nr = T::of(rows as f64);
                        let k: Vec<T> = (0..ch).map(|c| p[gamma + c] * buf.inv_std[c] / nr).collect();
                        for ((drow, grow), xrow) in gx
                            .chunks_exact_mut(ch)
                            .zip(g.chunks_exact(ch))
                            .zip(buf.xhat.chunks_exact(ch))
                        {
                            for c in 0..ch {
                                drow[c] = k[c] * (nr * grow[c] - sum_g[c] - xrow[c] * sum_gx[c]);
                            }
                        }
                    }
                }
                Stage::Flatten => gx.copy_from_slice(g),
            }
            std::mem::swap(&mut ws.grad, &mut ws.grad_next);
        }
        Ok(())
    }

    /// Inference on `rows` samples, split into chunks across workers.
    pub fn predict(&self, input: &[T], rows: usize, exec: Execution) -> Result<Vec<T>> {
        let width = self.spec.input_width;
        if input.len() != rows * width {
            return Err(Error::shape(format!("{rows} x {width}"), input.len()));
        }
        let chunks = rows.div_ceil(PREDICT_CHUNK);
        let parts = exec.try_map(chunks, |c| {
            let lo = c * PREDICT_CHUNK;
            let hi = (lo + PREDICT_CHUNK).min(rows);
            let mut ws = self.workspace();
            Ok(self
                .forward(&mut ws, &input[lo * width..hi * width], hi - lo, Mode::Infer)?
                .to_vec())
        })?;
        Ok(parts.concat())
    }
}

fn batch_norm_train<T: Real>(x: &[T], ch: usize, g: &[T], bt: &[T], buf: &mut Buffers<T>) {
    let rows = x.len() / ch;
    let nr = T::of(rows.max(1) as f64);
    buf.mean.clear();
    buf.mean.resize(ch, T::zero());
    buf.var.clear();
    buf.var.resize(ch, T::zero());
    for row in x.chunks_exact(ch) {
        for c in 0..ch {
            buf.mean[c] += row[c];
        }
    }
    buf.mean.iter_mut().for_each(|m| *m /= nr);
    for row in x.chunks_exact(ch) {
        for c in 0..ch {
            let d = row[c] - buf.mean[c];
            buf.var[c] += d * d;
        }
    }
    buf.var.iter_mut().for_each(|v| *v /= nr);
    let eps = T::of(BN_EPS);
    buf.inv_std.clear();
    buf.inv_std.extend(buf.var.iter().map(|&v| T::one() / (v + eps).sqrt()));
    buf.xhat.resize(x.len(), T::zero());
    for ((hrow, orow), xrow) in buf
        .xhat
        .chunks_exact_mut(ch)
        .zip(buf.out.chunks_exact_mut(ch))
        .zip(x.chunks_exact(ch))
    {
        for c in 0..ch {
            let h = (xrow[c] - buf.mean[c]) * buf.inv_std[c];
            hrow[c] = h;
            orow[c] = g[c] * h + bt[c];
        }
    }
}

/// Row `(b, p)` of `cols` holds the `kernel` input positions feeding output `p`, channels innermost.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Real>(
    x: &[T],
    batch: usize,
    len_in: usize,
    len_out: usize,
    cin: usize,
    kernel: usize,
    pad: usize,
    cols: &mut [T],
) {
    let rows = kernel * cin;
    for b in 0..batch {
        let xs = &x[b * len_in * cin..(b + 1) * len_in * cin];
        for p in 0..len_out {
            let dst = &mut cols[(b * len_out + p) * rows..(b * len_out + p + 1) * rows];
            for k in 0..kernel {
                let seg = &mut dst[k * cin..(k + 1) * cin];
                match (p + k).checked_sub(pad) {
                    Some(q) if q < len_in => seg.copy_from_slice(&xs[q * cin..(q + 1) * cin]),
                    _ => seg.fill(T::zero()),
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn col2im<T: Real>(
    cols: &[T],
    batch: usize,
    len_in: usize,
    len_out: usize,
    cin: usize,
    kernel: usize,
    pad: usize,
    dx: &mut [T],
) {
    let rows = kernel * cin;
    for b in 0..batch {
        let xs = &mut dx[b * len_in * cin..(b + 1) * len_in * cin];
        for p in 0..len_out {
            let src = &cols[(b * len_out + p) * rows..(b * len_out + p + 1) * rows];
            for k in 0..kernel {
                if let Some(q) = (p + k).checked_sub(pad) {
                    if q < len_in {
                        for (d, &s) in xs[q * cin..(q + 1) * cin].iter_mut().zip(&src[k * cin..(k + 1) * cin]) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}
