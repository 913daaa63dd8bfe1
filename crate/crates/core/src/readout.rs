//! Standard scaling and a one-vs-rest linear SVM trained by stochastic
//! subgradient descent on the regularised hinge loss (Pegasos schedule).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant feature.
    pub stds: Vec<f64>,
}

fn check_rows(features: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = features.first() else {
        return Err(Error::InsufficientData("no samples".into()));
    };
    let f = first.len();
    if let Some(bad) = features.iter().position(|r| r.len() != f) {
        return Err(Error::dims(format!(
            "sample {bad} has {} features, expected {f}",
            features[bad].len()
        )));
    }
    Ok(f)
}

pub fn fit_scaler(features: &[Vec<f64>]) -> Result<ScalerModel> {
    let f = check_rows(features)?;
    if features.len() < 2 {
        return Err(Error::InsufficientData("scaler needs >= 2 samples".into()));
    }
    let n = features.len() as f64;
    let mut means = vec![0.0; f];
    for row in features {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = vec![0.0; f];
    for row in features {
        for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    Ok(ScalerModel { means, stds })
}

/// Constant features pass through unchanged.
pub fn apply_scaler(model: &ScalerModel, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    features
        .iter()
        .map(|row| {
            if row.len() != model.means.len() {
                return Err(Error::dims(format!(
                    "scaler fitted on {} features, got {}",
                    model.means.len(),
                    row.len()
                )));
            }
            Ok(row
                .iter()
                .zip(model.means.iter().zip(&model.stds))
                .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { *v })
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// One row per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.biases.len()
    }

    pub fn features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    /// Arg-max class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let s = self.scores(x);
        let mut best = 0;
        for (k, v) in s.iter().enumerate().skip(1) {
            if *v > s[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub epochs: usize,
    /// Regularisation weight `lambda` of `lambda/2 ||w||^2 + mean hinge`.
    pub reg: f64,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions {
            epochs: 50,
            reg: 1e-4,
            seed: 0,
        }
    }
}

/// One-vs-rest Pegasos. The bias is trained as the weight of a constant
/// unit feature and is regularised with the rest.
pub fn train_linear(features: &[Vec<f64>], labels: &[usize], opts: &SvmOptions) -> Result<LinearModel> {
    let f = check_rows(features)?;
    if labels.len() != features.len() {
        return Err(Error::dims(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let distinct = (0..classes).filter(|c| labels.contains(c)).count();
    if distinct < 2 {
        return Err(Error::InsufficientData("linear readout needs >= 2 classes".into()));
    }
    if !(opts.reg > 0.0) || opts.epochs == 0 {
        return Err(Error::param("need reg > 0 and epochs >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let radius = 1.0 / opts.reg.sqrt();
    let mut weights = Vec::with_capacity(classes);
    let mut biases = Vec::with_capacity(classes);
    for class in 0..classes {
        // w[f] is the bias
        let mut w = vec![0.0; f + 1];
        let mut t = 0usize;
        for _ in 0..opts.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (opts.reg * t as f64);
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let x = &features[i];
                let margin = y * (w[..f].iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + w[f]);
                let shrink = 1.0 - eta * opts.reg;
                w.iter_mut().for_each(|v| *v *= shrink);
                if margin < 1.0 {
                    for (a, v) in w[..f].iter_mut().zip(x) {
                        *a += eta * y * v;
                    }
                    w[f] += eta * y;
                }
                let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > radius {
                    let s = radius / norm;
                    w.iter_mut().for_each(|v| *v *= s);
                }
            }
        }
        biases.push(w[f]);
        w.truncate(f);
        weights.push(w);
    }
    Ok(LinearModel { weights, biases })
}

pub fn predict_all(model: &LinearModel, features: &[Vec<f64>], exec: Exec) -> Vec<usize> {
    exec.map(features, |x| model.predict(x))
}

/// Fraction of samples whose arg-max class equals the label.
pub fn accuracy(model: &LinearModel, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    accuracy_with(model, features, labels, Exec::Parallel)
}

pub fn accuracy_with(model: &LinearModel, features: &[Vec<f64>], labels: &[usize], exec: Exec) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::InsufficientData("accuracy of an empty set".into()));
    }
    if labels.len() != features.len() {
        return Err(Error::dims(format!(
            "{} labels for {} samples",
            labels.len(),
            features.len()
        )));
    }
    if let Some(bad) = features.iter().position(|x| x.len() != model.features()) {
        return Err(Error::dims(format!(
            "sample {bad} has {} features, model expects {}",
            features[bad].len(),
            model.features()
        )));
    }
    let hits = predict_all(model, features, exec)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / features.len() as f64)
}
