//! Deterministic trainer: per-sample gradients computed in parallel,
//! reduced in slot order, applied by an adaptive-accumulator update with a
//! per-step cosine learning-rate schedule. Every random draw comes from a
//! counter-keyed substream of (seed, purpose, step/epoch, slot), so a run
//! is a pure function of (dataset, spec, config) regardless of thread
//! count.

mod augment;

pub use augment::{augment, normalize_image, AugmentFlags, CROP_FRACTION};

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{
    build_params, forward, save_checkpoint, soft_iou_loss, Checkpoint, ForwardOptions,
    NetworkSpec, Wiring,
};
use crate::parallel;
use crate::params::ParamSet;
use crate::postproc::Mask;
use crate::raster::ImageBase;
use crate::rng::substream;
use crate::Graph;

type Image = ImageBase<f64>;

pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub augment: AugmentFlags,
    pub seed: u64,
    /// Steps between mid-run checkpoints; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            batch_size: 16,
            epochs: 10,
            augment: AugmentFlags::ALL,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Base rate scaled by (1 + cos(pi * step / total)) / 2; step is 0-based.
pub fn cosine_lr(base: f64, step: u64, total_steps: u64) -> f64 {
    let t = step as f64 / total_steps.max(1) as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub wiring: Wiring,
    pub params: ParamSet,
    pub trace: Vec<TraceRow>,
    pub final_step: u64,
}

/// CSV with full-precision floats; byte-stable for identical traces.
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "step,lr,loss").map_err(|e| Error::io(path, e))?;
    for r in rows {
        writeln!(w, "{},{},{}", r.step, r.lr, r.loss).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn mask_tensor(mask: &Mask) -> crate::Tensor {
    crate::Tensor::from_fn(&[1, mask.h, mask.w], |k| if mask.data[k] { 1.0 } else { 0.0 })
}

/// One sample's loss and parameter gradients under this step's
/// augmentation draw.
fn sample_grad(
    spec: &NetworkSpec,
    wiring: &Wiring,
    params: &ParamSet,
    img: &Image,
    mask: &Mask,
    flags: AugmentFlags,
    seed: u64,
    step: u64,
    slot: u64,
) -> Result<(f64, crate::graph::Gradients<f64>)> {
    let mut rng = substream(seed, "aug", step, slot);
    let (aimg, amask) = augment(img, mask, flags, &mut rng);
    let mut g = Graph::new();
    let input = g.constant(aimg.to_tensor());
    let pass = forward(&mut g, spec, wiring, params, input, ForwardOptions::default())?;
    let target = g.constant(mask_tensor(&amask));
    let loss = soft_iou_loss(&mut g, pass.prob, target)?;
    let loss_value = g.value(loss).item()?;
    let grads = g.backward(loss)?;
    Ok((loss_value, grads))
}

/// Run the full training loop. `resume` continues the step counter of a
/// prior run; its architecture must equal `spec`. Checkpoints land in
/// `checkpoint_dir` when given (step_NNNNNN.ckpt plus final.ckpt).
pub fn train(
    dataset: &[(Image, Mask)],
    spec: &NetworkSpec,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let (h, w) = (dataset[0].0.h, dataset[0].0.w);
    let div = spec.extent_divisor();
    if h % div != 0 || w % div != 0 {
        return Err(Error::Config(format!(
            "sample extent {h}x{w} not divisible by {div}"
        )));
    }
    for (i, (img, mask)) in dataset.iter().enumerate() {
        if img.h != h || img.w != w || mask.h != h || mask.w != w {
            return Err(Error::Config(format!("sample {i} extent differs from sample 0")));
        }
    }

    let (wiring, mut params) = build_params(spec)?;
    let mut start_step = 0u64;
    if let Some(ck) = resume {
        if &ck.spec != spec {
            return Err(Error::Config(
                "checkpoint architecture differs from requested spec".into(),
            ));
        }
        params = ck.params;
        start_step = ck.step;
    }

    let n = dataset.len();
    let spe = n.div_ceil(config.batch_size) as u64;
    let total_steps = spe * config.epochs as u64;
    let mut trace = Vec::new();

    let mut epoch_of_perm = u64::MAX;
    let mut perm: Vec<usize> = (0..n).collect();

    for step in start_step..total_steps {
        let epoch = step / spe;
        if epoch != epoch_of_perm {
            perm = (0..n).collect();
            let mut rng = substream(config.seed, "shuffle", epoch, 0);
            perm.shuffle(&mut rng);
            epoch_of_perm = epoch;
        }
        let pos = (step % spe) as usize;
        let lo = pos * config.batch_size;
        let hi = (lo + config.batch_size).min(n);
        let batch: Vec<usize> = perm[lo..hi].to_vec();
        let k = batch.len();

        let results = {
            let params_ref = &params;
            let wiring_ref = &wiring;
            let batch_ref = &batch;
            parallel::ordered_map(k, move |slot| {
                let (img, mask) = &dataset[batch_ref[slot]];
                sample_grad(
                    spec,
                    wiring_ref,
                    params_ref,
                    img,
                    mask,
                    config.augment,
                    config.seed,
                    step,
                    slot as u64,
                )
            })
        };

        let mut mean_loss = 0.0;
        let mut total = crate::graph::Gradients::empty();
        for r in results {
            let (loss, grads) = r?;
            mean_loss += loss / k as f64;
            total.add_scaled(&grads, 1.0 / k as f64);
        }
        if !mean_loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss {mean_loss} at step {step}, batch samples {batch:?}"
            )));
        }
        // The output clamp keeps the loss finite even when activations blow
        // up, so breakdown surfaces in the gradients first. Guard the update
        // so parameters never silently go non-finite.
        for p in params.iter() {
            let Some(g) = total.get(&p.name) else { continue };
            if g.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient for {} at step {step}, batch samples {batch:?}",
                    p.name
                )));
            }
        }

        let lr = cosine_lr(config.learning_rate, step, total_steps);
        for p in params.iter_mut() {
            let Some(g) = total.get(&p.name) else { continue };
            for ((acc, v), gv) in p
                .accumulator
                .data_mut()
                .iter_mut()
                .zip(p.value.data_mut().iter_mut())
                .zip(g.data())
            {
                *acc += gv * gv;
                *v -= lr * gv / (acc.sqrt() + ADAGRAD_EPS);
            }
        }

        trace.push(TraceRow { step, lr, loss: mean_loss });

        if let Some(dir) = checkpoint_dir {
            let done = step + 1;
            if config.checkpoint_every > 0 && done % config.checkpoint_every as u64 == 0 {
                save_checkpoint(&dir.join(format!("step_{done:06}.ckpt")), spec, &params, done)?;
            }
        }
    }

    if let Some(dir) = checkpoint_dir {
        save_checkpoint(&dir.join("final.ckpt"), spec, &params, total_steps)?;
    }

    Ok(TrainOutcome { wiring, params, trace, final_step: total_steps })
}
