//! Synthetic datasets: signed rates generated by a known sparse dictionary,
//! and two-class structured event patterns.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::event_io::{poisson_stream, EventStream, SpikeRaster};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpec {
    pub n: usize,
    pub m: usize,
    /// Non-zero code entries per sample.
    pub k: usize,
    pub samples: usize,
    /// Code magnitudes are drawn uniformly from this range (Hz).
    pub amplitude: (f64, f64),
    pub seed: u64,
}

impl SparseSpec {
    /// 32 x 64 dictionary, 4-sparse codes of magnitude 20..40 Hz.
    pub fn standard(samples: usize, seed: u64) -> Self {
        SparseSpec {
            n: 32,
            m: 64,
            k: 4,
            samples,
            amplitude: (20.0, 40.0),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    /// Ground-truth dictionary with unit-norm columns, `N x M`.
    pub dictionary: DMatrix<f64>,
    pub codes: Vec<DVector<f64>>,
    /// Signed input rates `dictionary * code` per sample.
    pub signals: Vec<Vec<f64>>,
}

impl SparseDataset {
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Poisson raster of sample `i`; the seed is derived from `seed` and `i`.
    pub fn raster(&self, i: usize, dt: f64, duration: f64, seed: u64) -> Result<SpikeRaster> {
        SpikeRaster::from_rates(&self.signals[i], dt, duration, mix_seed(seed, i as u64))
    }

    /// Support of sample `i`'s code.
    pub fn support(&self, i: usize) -> Vec<usize> {
        self.codes[i]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn sparse_dictionary_dataset(spec: &SparseSpec) -> Result<SparseDataset> {
    let (lo, hi) = spec.amplitude;
    if spec.n == 0 || spec.m == 0 || spec.k == 0 || spec.k > spec.m {
        return Err(Error::param(format!(
            "need n, m >= 1 and 1 <= k <= m, got n={} m={} k={}",
            spec.n, spec.m, spec.k
        )));
    }
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::param(format!("bad amplitude range {lo}..{hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut dictionary = DMatrix::from_fn(spec.n, spec.m, |_, _| StandardNormal.sample(&mut rng));
    for mut col in dictionary.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    let mut codes = Vec::with_capacity(spec.samples);
    let mut signals = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let mut c = DVector::zeros(spec.m);
        for j in sample(&mut rng, spec.m, spec.k) {
            let a = if hi > lo { rng.random_range(lo..hi) } else { lo };
            c[j] = if rng.random::<bool>() { a } else { -a };
        }
        signals.push((&dictionary * &c).iter().copied().collect());
        codes.push(c);
    }
    Ok(SparseDataset {
        dictionary,
        codes,
        signals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarSpec {
    pub size: u16,
    /// Bar thickness in pixels.
    pub thickness: u16,
    /// Maximum offset of the bar from the centre, in pixels.
    pub jitter: u16,
    pub bar_rate: f64,
    /// Rate of background noise events of random polarity.
    pub noise_rate: f64,
    pub duration: f64,
}

impl Default for BarSpec {
    fn default() -> Self {
        BarSpec {
            size: 16,
            thickness: 4,
            jitter: 2,
            bar_rate: 60.0,
            noise_rate: 2.0,
            duration: 1.0,
        }
    }
}

/// Rate map of one sample: class 0 is a horizontal bar, class 1 a vertical
/// bar, each shifted by up to `jitter` pixels and overlaid with noise.
pub fn bar_rate_map(spec: &BarSpec, class: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let size = spec.size as usize;
    let (th, jit) = (spec.thickness as usize, spec.jitter as usize);
    if class > 1 {
        return Err(Error::param(format!("bar patterns have classes 0 and 1, got {class}")));
    }
    if th == 0 || th + 2 * jit > size {
        return Err(Error::param("bar thickness plus jitter exceeds the frame"));
    }
    let centre = (size - th) / 2;
    let start = centre - jit + rng.random_range(0..=2 * jit);
    let mut map = vec![0.0; size * size];
    for (i, r) in map.iter_mut().enumerate() {
        let (x, y) = (i % size, i / size);
        let along = if class == 0 { y } else { x };
        if (start..start + th).contains(&along) {
            *r = spec.bar_rate;
        } else if spec.noise_rate > 0.0 {
            *r = if rng.random::<bool>() { spec.noise_rate } else { -spec.noise_rate };
        }
    }
    Ok(map)
}

/// `per_class` event streams per class, labels interleaved `0, 1, 0, 1, ...`.
pub fn bar_dataset(spec: &BarSpec, per_class: usize, seed: u64) -> Result<(Vec<EventStream>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut streams = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let class = i % 2;
        let map = bar_rate_map(spec, class, &mut rng)?;
        let s = poisson_stream(spec.size, spec.size, &map, spec.duration, rng.random())?;
        streams.push(s);
        labels.push(class);
    }
    Ok((streams, labels))
}

/// SplitMix-style mixing so per-sample seeds are decorrelated.
pub fn mix_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_dataset_shape() {
        let d = sparse_dictionary_dataset(&SparseSpec::standard(10, 3)).unwrap();
        assert_eq!(d.dictionary.shape(), (32, 64));
        assert_eq!(d.len(), 10);
        for c in d.dictionary.column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        for i in 0..d.len() {
            assert_eq!(d.support(i).len(), 4);
            let s = DVector::from_vec(d.signals[i].clone());
            assert!((&d.dictionary * &d.codes[i] - s).norm() < 1e-12);
            assert!(d.codes[i].iter().all(|v| *v == 0.0 || (20.0..40.0).contains(&v.abs())));
        }
    }

    #[test]
    fn sparse_dataset_deterministic() {
        let a = sparse_dictionary_dataset(&SparseSpec::standard(5, 9)).unwrap();
        let b = sparse_dictionary_dataset(&SparseSpec::standard(5, 9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.raster(2, 0.005, 1.0, 1).unwrap(), b.raster(2, 0.005, 1.0, 1).unwrap());
    }

    #[test]
    fn bar_maps_have_bars() {
        let spec = BarSpec {
            noise_rate: 0.0,
            ..BarSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for class in 0..2 {
            let map = bar_rate_map(&spec, class, &mut rng).unwrap();
            let lit: Vec<usize> = (0..256).filter(|&i| map[i] > 0.0).collect();
            assert_eq!(lit.len(), 16 * 4);
            let fixed = |i: usize| if class == 0 { i / 16 } else { i % 16 };
            let lines: std::collections::BTreeSet<usize> = lit.iter().map(|&i| fixed(i)).collect();
            assert_eq!(lines.len(), 4);
            assert!(*lines.first().unwrap() >= 4 && *lines.last().unwrap() <= 11);
        }
        assert!(bar_rate_map(&spec, 2, &mut rng).is_err());
    }

    #[test]
    fn bar_dataset_labels_alternate() {
        let (s, l) = bar_dataset(&BarSpec::default(), 3, 1).unwrap();
        assert_eq!(l, vec![0, 1, 0, 1, 0, 1]);
        assert!(s.iter().all(|e| e.width() == 16 && !e.is_empty()));
    }

    #[test]
    fn mix_seed_spreads() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }
}
