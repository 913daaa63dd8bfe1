//! Train/validate loop with inner-loss termination.
//!
//! Samples are split nine to one: every tenth sample is held out for
//! validation. Each epoch presents every training sample once with learning
//! on, then measures the mean validation inner loss with learning off.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::event_io::SpikeRaster;
use crate::exec::Exec;
use crate::network::{Network, NetworkConfig, NetworkWeights, SimOptions};
use crate::tuning::{should_stop, StopRule};
use crate::{Error, Result};

/// One validation sample per this many samples.
pub const VALIDATION_PERIOD: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub stop: StopRule,
    /// Leading seconds of every presentation excluded from learning and loss.
    pub burn_in: f64,
    /// Rate-mode learning window; `None` is one update per presentation.
    pub learn_window: Option<f64>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 200,
            stop: StopRule::default(),
            burn_in: 0.2,
            learn_window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub weights: NetworkWeights,
    /// Validation inner loss before training, then after every epoch.
    pub validation_loss: Vec<f64>,
    /// Mean inner loss over the training presentations of each epoch.
    pub train_loss: Vec<f64>,
    pub epochs: usize,
    /// Whether the stop rule fired (as opposed to hitting `max_epochs`).
    pub stopped: bool,
    pub weight_writes: u64,
    pub spikes: u64,
}

/// Indices of training and validation samples.
pub fn split_indices(len: usize) -> (Vec<usize>, Vec<usize>) {
    (0..len).partition(|i| i % VALIDATION_PERIOD != VALIDATION_PERIOD - 1)
}

/// Mean inner loss over `samples` with frozen weights.
pub fn validation_loss(
    cfg: &NetworkConfig,
    weights: &Arc<NetworkWeights>,
    samples: &[&SpikeRaster],
    burn_in: f64,
    exec: Exec,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no validation samples".into()));
    }
    let opts = SimOptions {
        burn_in,
        ..Default::default()
    };
    let losses = exec.try_map_range(samples.len(), |i| {
        let mut net = Network::new(cfg.clone(), Arc::clone(weights))?;
        Ok::<_, Error>(net.simulate(samples[i], &opts)?.inner_loss())
    })?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

pub fn train(
    cfg: &NetworkConfig,
    init: NetworkWeights,
    samples: &[SpikeRaster],
    opts: &TrainOptions,
    exec: Exec,
) -> Result<TrainReport> {
    let (train_idx, val_idx) = split_indices(samples.len());
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need at least {VALIDATION_PERIOD} samples for a train/validation split, got {}",
            samples.len()
        )));
    }
    let val: Vec<&SpikeRaster> = val_idx.iter().map(|&i| &samples[i]).collect();
    let mut net = Network::new(cfg.clone(), Arc::new(init))?;
    let learn = SimOptions {
        learning: true,
        burn_in: opts.burn_in,
        learn_window: opts.learn_window,
        ..Default::default()
    };

    let mut validation = vec![validation_loss(cfg, &net.weights_arc(), &val, opts.burn_in, exec)?];
    let mut train_loss = Vec::new();
    let (mut writes, mut spikes) = (0, 0);
    let mut stopped = false;
    let mut epochs = 0;
    while epochs < opts.max_epochs {
        let mut total = 0.0;
        for &i in &train_idx {
            let t = net.simulate(&samples[i], &learn)?;
            total += t.inner_loss();
            writes += t.weight_writes;
            spikes += t.spikes.coding + t.spikes.error;
        }
        train_loss.push(total / train_idx.len() as f64);
        validation.push(validation_loss(cfg, &net.weights_arc(), &val, opts.burn_in, exec)?);
        epochs += 1;
        log::debug!("epoch {epochs}: validation inner loss {:.4}", validation[epochs]);
        if validation.len() > opts.stop.n_eps && should_stop(&validation, &opts.stop)? {
            stopped = true;
            break;
        }
    }
    Ok(TrainReport {
        weights: net.into_weights(),
        validation_loss: validation,
        train_loss,
        epochs,
        stopped,
        weight_writes: writes,
        spikes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuning::init_weights;

    #[test]
    fn split_is_nine_to_one() {
        let (t, v) = split_indices(25);
        assert_eq!(v, vec![9, 19]);
        assert_eq!(t.len(), 23);
        assert!(!t.contains(&9));
    }

    #[test]
    fn zero_epochs_keeps_initial_weights() {
        let cfg = NetworkConfig::new(4, 6, 0.25).unwrap();
        let phi = init_weights(4, 6, 1.0, 0.5, 1).unwrap();
        let init = NetworkWeights::from_phi(phi);
        let samples: Vec<SpikeRaster> = (0..10)
            .map(|i| SpikeRaster::from_rates(&[10.0, -5.0, 0.0, 20.0], 0.005, 0.5, i).unwrap())
            .collect();
        let opts = TrainOptions {
            max_epochs: 0,
            ..Default::default()
        };
        let r = train(&cfg, init.clone(), &samples, &opts, Exec::Sequential).unwrap();
        assert_eq!(r.weights, init);
        assert_eq!(r.validation_loss.len(), 1);
        assert_eq!(r.epochs, 0);
        assert!(!r.stopped);
    }

    #[test]
    fn too_few_samples_rejected() {
        let cfg = NetworkConfig::new(1, 1, 0.25).unwrap();
        let init = NetworkWeights::from_phi(nalgebra::DMatrix::from_element(1, 1, 1.0));
        let samples = vec![SpikeRaster::silent(1, 0.005, 10); 5];
        assert!(train(&cfg, init, &samples, &TrainOptions::default(), Exec::Sequential).is_err());
    }
}
