use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig};
use super::network::{Mode, Network};
use super::{loss_l2_periodic, loss_l2_periodic_grad, Periodic, Real};
use crate::error::{Error, Result};
use crate::par::Execution;

/// Learning rate as a function of training progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Half-cosine from the base rate down to `floor` times it, per step.
    Cosine { floor: f64 },
}

impl Schedule {
    /// Multiplier on the base rate at `step` of `total`.
    pub fn factor(self, step: u64, total: u64) -> f64 {
        match self {
            Schedule::Constant => 1.0,
            Schedule::Cosine { floor } => {
                let p = step as f64 / total.max(1) as f64;
                floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * p.min(1.0)).cos())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds weight initialization, shuffling and dropout masks.
    pub seed: u64,
    #[serde(default)]
    pub schedule: Schedule,
    /// Output components compared modulo a period in the loss.
    #[serde(default)]
    pub periodic: Vec<Periodic>,
    /// Restore the parameters from the epoch with the lowest validation loss.
    #[serde(default)]
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 128,
            adam: AdamConfig::default(),
            seed: 1,
            schedule: Schedule::default(),
            periodic: Vec::new(),
            keep_best: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch size must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if let Schedule::Cosine { floor } = self.schedule {
            if !(0.0..=1.0).contains(&floor) {
                return Err(Error::Config(format!("cosine floor {floor} must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Losses after an epoch; epoch 0 is the untrained network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

/// Inference-mode loss over a whole set.
pub fn evaluate_loss<T: Real>(
    net: &Network<T>,
    x: &[T],
    y: &[T],
    periodic: &[Periodic],
    exec: Execution,
) -> Result<f64> {
    let rows = x.len() / net.input_width();
    let pred = net.predict(x, rows, exec)?;
    Ok(loss_l2_periodic(&pred, y, rows, periodic))
}

/// Minibatch Adam on the squared-error loss.
///
/// `x` is `rows x input_width`, `y` is `rows x output_width`. Each epoch
/// visits the rows in a fresh shuffled order; a trailing batch of one row is
/// skipped because batch statistics are undefined for it.
pub fn train<T: Real>(
    net: &mut Network<T>,
    x: &[T],
    y: &[T],
    val: Option<(&[T], &[T])>,
    config: &TrainConfig,
    exec: Execution,
    mut on_epoch: impl FnMut(&EpochLoss),
) -> Result<Vec<EpochLoss>> {
    config.validate()?;
    let (iw, ow) = (net.input_width(), net.output_width());
    let rows = x.len() / iw;
    if rows == 0 {
        return Err(Error::EmptyInput("training set"));
    }
    if x.len() != rows * iw || y.len() != rows * ow {
        return Err(Error::shape(format!("{rows} x {ow} labels"), y.len()));
    }
    let val_loss = |net: &Network<T>| -> Result<Option<f64>> {
        match val {
            Some((vx, vy)) if !vx.is_empty() => Ok(Some(evaluate_loss(net, vx, vy, &config.periodic, exec)?)),
            _ => Ok(None),
        }
    };

    let mut history = vec![EpochLoss {
        epoch: 0,
        train: evaluate_loss(net, x, y, &config.periodic, exec)?,
        val: val_loss(net)?,
    }];
    on_epoch(&history[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.adam, net.params().len());
    let mut ws = net.workspace();
    let mut grads = vec![T::zero(); net.params().len()];
    let mut order: Vec<usize> = (0..rows).collect();
    let bs = config.batch_size;
    let full = rows / bs + usize::from(rows % bs >= 2);
    let total_steps = (full * config.epochs) as u64;
    let mut xb = Vec::with_capacity(bs * iw);
    let mut yb = Vec::with_capacity(bs * ow);
    let mut d_out = Vec::with_capacity(bs * ow);
    let mut best: Option<(f64, Vec<T>, Vec<T>)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(bs) {
            if chunk.len() < 2 && rows > 1 {
                continue;
            }
            xb.clear();
            yb.clear();
            for &i in chunk {
                xb.extend_from_slice(&x[i * iw..(i + 1) * iw]);
                yb.extend_from_slice(&y[i * ow..(i + 1) * ow]);
            }
            let b = chunk.len();
            adam.set_learning_rate(config.adam.learning_rate * config.schedule.factor(adam.steps(), total_steps));
            let out = net.forward(&mut ws, &xb, b, Mode::Train(&mut rng))?;
            let loss = loss_l2_periodic(out, &yb, b, &config.periodic);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            d_out.resize(out.len(), T::zero());
            loss_l2_periodic_grad(out, &yb, b, &config.periodic, &mut d_out);
            net.backward(&mut ws, &d_out, &mut grads)?;
            adam.step(net.params_mut(), &grads);
            net.update_running_stats(&ws);
            total += loss * b as f64;
            seen += b;
        }
        let train = total / seen.max(1) as f64;
        let entry = EpochLoss {
            epoch,
            train,
            val: val_loss(net)?,
        };
        if !train.is_finite() || entry.val.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                loss: entry.val.unwrap_or(train),
            });
        }
        if let (true, Some(v)) = (config.keep_best, entry.val) {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, net.params().to_vec(), net.state().to_vec()));
            }
        }
        on_epoch(&entry);
        history.push(entry);
    }
    if let Some((_, params, state)) = best {
        net.params_mut().copy_from_slice(&params);
        net.state_mut().copy_from_slice(&state);
    }
    Ok(history)
}
