//! Loss, optimizer, learning-rate schedules, and the two-phase training loop.

mod adam;
mod schedule;

pub use adam::Adam;
pub use schedule::{DecayRule, Phase, Schedule};

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::models::CombinedModel;
use crate::tensor::{Scalar, Tensor};

/// Half the sum of squared differences over all `K x W` entries, both sides
/// in normalized label space.
pub fn l2_loss(predictions: &Tensor, targets: &Tensor) -> Result<Tensor> {
    if predictions.shape() != targets.shape() {
        return Err(Error::ShapeMismatch {
            op: "l2_loss",
            lhs: predictions.shape().to_vec(),
            rhs: targets.shape().to_vec(),
        });
    }
    let diff = predictions.sub(targets)?;
    Ok(diff.mul(&diff)?.sum()?.scale(0.5))
}

/// One line of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub phase: String,
    pub lr: f64,
    pub mean_loss: f64,
    pub wall_ms: u64,
}

/// Knobs of the two-phase loop.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub conv_epochs: usize,
    pub rnn_epochs: usize,
    pub conv_schedule: Schedule,
    pub rnn_schedule: Schedule,
    /// Seed for the per-epoch sample shuffle.
    pub shuffle_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 128,
            conv_epochs: 20,
            rnn_epochs: 20,
            conv_schedule: Schedule::c3d(),
            rnn_schedule: Schedule::rnn(),
            shuffle_seed: 0,
        }
    }
}

/// Train `model` on windowed samples.
///
/// Modes with a convolutional trunk first train the trunk alone under the
/// trunk schedule. Modes with a recurrent part then train it under the
/// recurrent schedule, with the (now frozen) trunk supplying initial hidden
/// states. Per-batch gradients are the arithmetic mean of per-sample losses.
pub fn train(
    model: &CombinedModel,
    samples: &[WindowSample],
    opts: &TrainOptions,
) -> Result<Vec<EpochLog>> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cfg = model.config().clone();
    let k = cfg.boundary_count;
    let w = cfg.width;
    let mut log = Vec::new();

    if cfg.mode.has_conv() {
        let c3d = model.c3d().expect("conv mode");
        let params = model.conv_params();
        let mut adam = Adam::new();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for epoch in 1..=opts.conv_epochs {
            let started = Instant::now();
            let lr = opts.conv_schedule.lr(epoch);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed ^ ((epoch as u64) << 20));
            order.shuffle(&mut rng);
            let mut loss_total = 0.0;
            for batch in order.chunks(opts.batch_size) {
                Adam::zero_grad(&params);
                let scale = 1.0 / batch.len() as Scalar;
                for &idx in batch {
                    let sample = &samples[idx];
                    let input = Tensor::from_vec(
                        sample.window.clone(),
                        &[1, cfg.window_len, cfg.height, cfg.width],
                    )?;
                    let target = Tensor::from_vec(sample.target.clone(), &[k, w])?;
                    let out = c3d.forward(&input)?;
                    let loss = l2_loss(&out.predictions, &target)?;
                    loss_total += loss.item()? as f64;
                    loss.scale(scale).backward()?;
                }
                adam.step(&params, lr as Scalar)?;
            }
            log.push(EpochLog {
                epoch,
                phase: "c3d".into(),
                lr,
                mean_loss: loss_total / samples.len() as f64,
                wall_ms: started.elapsed().as_millis() as u64,
            });
        }
    }

    if cfg.mode.has_rnn() {
        let rnn = model.rnn().expect("rnn mode");
        let params = model.rnn_params();
        let mut adam = Adam::new();

        // The trunk is frozen in this phase, so its per-window features are
        // fixed; compute them once.
        let features: Vec<Option<Vec<Vec<Scalar>>>> = if cfg.mode.has_conv() {
            let c3d = model.c3d().expect("combined mode");
            let mut cache = Vec::with_capacity(samples.len());
            for sample in samples {
                let input = Tensor::from_vec(
                    sample.window.clone(),
                    &[1, cfg.window_len, cfg.height, cfg.width],
                )?;
                let feats = c3d.forward(&input)?.features;
                cache.push(Some(feats.iter().map(|f| f.to_vec()).collect()));
            }
            cache
        } else {
            vec![None; samples.len()]
        };

        let mut order: Vec<usize> = (0..samples.len()).collect();
        for epoch in 1..=opts.rnn_epochs {
            let started = Instant::now();
            let lr = opts.rnn_schedule.lr(epoch);
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.shuffle_seed ^ 0x5eed ^ ((epoch as u64) << 20));
            order.shuffle(&mut rng);
            let mut loss_total = 0.0;
            for batch in order.chunks(opts.batch_size) {
                Adam::zero_grad(&params);
                let scale = 1.0 / batch.len() as Scalar;
                for &idx in batch {
                    let sample = &samples[idx];
                    let slice =
                        Tensor::from_vec(sample.center.clone(), &[cfg.height, cfg.width])?;
                    let target = Tensor::from_vec(sample.target.clone(), &[k, w])?;
                    let init = match &features[idx] {
                        Some(feats) => feats
                            .iter()
                            .map(|f| Tensor::from_vec(f.clone(), &[cfg.hidden]))
                            .collect::<Result<Vec<_>>>()?,
                        None => rnn.zero_hidden(),
                    };
                    let out = rnn.forward(&slice, &init)?;
                    let loss = l2_loss(&out.predictions, &target)?;
                    loss_total += loss.item()? as f64;
                    loss.scale(scale).backward()?;
                }
                adam.step(&params, lr as Scalar)?;
            }
            log.push(EpochLog {
                epoch,
                phase: "rnn".into(),
                lr,
                mean_loss: loss_total / samples.len() as f64,
                wall_ms: started.elapsed().as_millis() as u64,
            });
        }
    }

    Ok(log)
}

/// Append the log as line-delimited JSON.
pub fn write_loss_log(path: &std::path::Path, log: &[EpochLog]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for entry in log {
        serde_json::to_writer(&mut file, entry)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}
