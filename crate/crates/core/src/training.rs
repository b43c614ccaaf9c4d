//! Mini-batch SGD with momentum.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TrainingExample};
use crate::error::{Error, Result};
use crate::jnet::{Batch, JNet, JNetConfig, Mode, INPUT_CHANNELS, OUTPUT_CHANNELS};

const SPLIT_SALT: u64 = 0x07e5_75e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Piecewise-constant `(first epoch, learning rate)` pairs.
    pub lr_schedule: Vec<(usize, f64)>,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Share of media held out for the test loss.
    pub test_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            lr_schedule: vec![(0, 1e-3), (1000, 5e-4)],
            momentum: 0.9,
            epochs: 2000,
            seed: 0,
            test_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn desk_scale(seed: u64) -> Self {
        Self { epochs: 50, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Parameter(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::Parameter(format!("test fraction {} outside [0, 1)", self.test_fraction)));
        }
        match self.lr_schedule.first() {
            Some(&(0, _)) => {}
            _ => return Err(Error::Parameter("learning-rate schedule must start at epoch 0".into())),
        }
        if self.lr_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Parameter("learning-rate schedule epochs must increase".into()));
        }
        if self.lr_schedule.iter().any(|&(_, lr)| !(lr >= 0.0 && lr.is_finite())) {
            return Err(Error::Parameter("learning rates must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule.iter().take_while(|&&(e, _)| e <= epoch).last().map_or(0.0, |&(_, lr)| lr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training-mode loss of the untrained network over the training split.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub final_train_loss: f64,
    /// Inference-mode loss over the held-out split, if it is nonempty.
    pub test_loss: Option<f64>,
    pub train_records: usize,
    pub test_records: usize,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "epoch,loss,lr")?;
        for e in &self.epochs {
            writeln!(f, "{},{:e},{:e}", e.epoch, e.loss, e.lr)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// `v <- momentum v + g`, `p <- p - lr v`.
pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

/// Splits record indices into training and test sets by medium, so repeated
/// records of one medium never straddle the split.
pub fn split_by_medium(records: &[TrainingExample], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let ids: Vec<u64> = records.iter().map(|r| r.medium_id).collect::<BTreeSet<_>>().into_iter().collect();
    let mut shuffled = ids.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT));
    let n_test = (test_fraction * ids.len() as f64).round() as usize;
    let n_test = if ids.len() > 1 { n_test.min(ids.len() - 1) } else { 0 };
    let test: BTreeSet<u64> = shuffled[..n_test].iter().copied().collect();
    let (mut tr, mut te) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if test.contains(&r.medium_id) {
            te.push(i)
        } else {
            tr.push(i)
        }
    }
    (tr, te)
}

/// Gathers the given records into an input and a target batch.
pub fn make_batch(records: &[TrainingExample], idx: &[usize], coarse_n: usize, fine_n: usize) -> (Batch, Batch) {
    let mut x = Vec::with_capacity(idx.len() * INPUT_CHANNELS * coarse_n * coarse_n);
    let mut y = Vec::with_capacity(idx.len() * OUTPUT_CHANNELS * fine_n * fine_n);
    for &i in idx {
        x.extend_from_slice(&records[i].x);
        y.extend_from_slice(&records[i].y);
    }
    (
        Batch { b: idx.len(), c: INPUT_CHANNELS, n: coarse_n, data: x },
        Batch { b: idx.len(), c: OUTPUT_CHANNELS, n: fine_n, data: y },
    )
}

/// Mean weighted squared error over `idx`, evaluated in chunks of `chunk`.
pub fn mean_loss(net: &JNet, ds: &Dataset, idx: &[usize], chunk: usize, mode: Mode) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let w = net.loss_weight();
    let mut total = 0.0;
    for part in idx.chunks(chunk.max(1)) {
        let (x, y) = make_batch(&ds.records, part, ds.disc.coarse_n, ds.disc.fine_n);
        let out = net.forward_batch(&x, mode)?;
        total += out.data.iter().zip(&y.data).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
    }
    Ok(w * total / idx.len() as f64)
}

fn check_compatible(ds: &Dataset, cfg: &JNetConfig) -> Result<()> {
    if cfg.input_n != ds.disc.coarse_n || cfg.output_n() != ds.disc.fine_n {
        return Err(Error::Config(format!(
            "network maps {0}x{0} to {1}x{1}, dataset pairs {2}x{2} with {3}x{3}",
            cfg.input_n,
            cfg.output_n(),
            ds.disc.coarse_n,
            ds.disc.fine_n
        )));
    }
    Ok(())
}

/// Trains a freshly initialized network; see [`train_from`].
pub fn train(ds: &Dataset, net_cfg: JNetConfig, cfg: &TrainConfig) -> Result<(JNet, TrainReport)> {
    net_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = JNet::init(net_cfg, ds.dt_star, &mut rng)?;
    train_from(ds, net, cfg, |_, _, _| Ok(()))
}

/// Runs `cfg.epochs` epochs of SGD starting from `net`, calling `on_epoch`
/// after each epoch with the updated network.
///
/// A non-finite batch loss aborts with [`Error::Diverged`], which carries the
/// network as it was at the end of the last completed epoch.
pub fn train_from(
    ds: &Dataset,
    mut net: JNet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &JNet, &EpochRecord) -> Result<()>,
) -> Result<(JNet, TrainReport)> {
    cfg.validate()?;
    check_compatible(ds, net.config())?;
    if (net.dt_star() - ds.dt_star).abs() > 1e-12 * ds.dt_star.abs().max(1.0) {
        return Err(Error::Config(format!("network is for dt* = {}, dataset for {}", net.dt_star(), ds.dt_star)));
    }
    let (mut train_idx, test_idx) = split_by_medium(&ds.records, cfg.test_fraction, cfg.seed);
    if train_idx.is_empty() {
        return Err(Error::Parameter("dataset has no training records".into()));
    }
    let start = Instant::now();
    let (cn, fnn) = (ds.disc.coarse_n, ds.disc.fine_n);
    let initial_loss = mean_loss(&net, ds, &train_idx, cfg.batch_size, Mode::Train)?;
    let mut velocity = vec![0.0; net.param_count()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut last_good = net.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for part in train_idx.chunks(cfg.batch_size) {
            let (x, y) = make_batch(&ds.records, part, cn, fnn);
            let g = net.loss_and_grad(&x, &y)?;
            if !g.loss.is_finite() || g.grads.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    reason: format!("batch loss {}", g.loss),
                    last_good: Box::new(last_good),
                });
            }
            total += g.loss * part.len() as f64;
            sgd_momentum_step(net.params_mut(), &g.grads, &mut velocity, lr, cfg.momentum)?;
            net.update_running_stats(&g.stats);
        }
        let rec = EpochRecord { epoch, loss: total / train_idx.len() as f64, lr };
        epochs.push(rec);
        last_good = net.clone();
        on_epoch(epoch, &net, &rec)?;
    }
    let test_loss =
        if test_idx.is_empty() { None } else { Some(mean_loss(&net, ds, &test_idx, cfg.batch_size, Mode::Eval)?) };
    let report = TrainReport {
        initial_loss,
        final_train_loss: epochs.last().map_or(initial_loss, |e| e.loss),
        epochs,
        test_loss,
        train_records: train_idx.len(),
        test_records: test_idx.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((net, report))
}
