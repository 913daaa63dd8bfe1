//! Design procedures: STDP kernel spectral matching, weight initialization,
//! training termination and Akaike-based threshold selection.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::event_io::SpikeRaster;
use crate::exec::Exec;
use crate::network::{Network, SimOptions};
use crate::plasticity::StdpParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpectrum {
    /// Angular frequencies, rad/s.
    pub omegas: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// `(1/tau+, 1/tau-)`.
    pub poles: (f64, f64),
    pub zero: f64,
}

/// Low-frequency zero `(1/tau- - alpha/tau+)/(1 + alpha)`.
pub fn kernel_zero(p: &StdpParams) -> f64 {
    let a = p.alpha();
    (1.0 / p.tau_minus - a / p.tau_plus) / (1.0 + a)
}

/// `|F{kappa}|(omega)`.
pub fn kernel_magnitude(omega: f64, p: &StdpParams) -> f64 {
    let a = p.alpha();
    let (w1, w2) = (1.0 / p.tau_plus, 1.0 / p.tau_minus);
    let num = ((w2 - a * w1).powi(2) + (1.0 + a).powi(2) * omega * omega).sqrt();
    p.a_plus * num / ((w1 * w1 + omega * omega).sqrt() * (w2 * w2 + omega * omega).sqrt())
}

pub fn kernel_spectrum(p: &StdpParams, omegas: &[f64]) -> KernelSpectrum {
    KernelSpectrum {
        omegas: omegas.to_vec(),
        magnitudes: omegas.iter().map(|&w| kernel_magnitude(w, p)).collect(),
        poles: (1.0 / p.tau_plus, 1.0 / p.tau_minus),
        zero: kernel_zero(p),
    }
}

/// Largest relative deviation of `|F|(omega)/|F|(0)` from 1 over
/// `omega` in `[0, frac/tau-]`, sampled on `samples` points.
pub fn kernel_flatness(p: &StdpParams, frac: f64, samples: usize) -> f64 {
    let dc = kernel_magnitude(0.0, p);
    let top = frac / p.tau_minus;
    (0..samples.max(2))
        .map(|k| top * k as f64 / (samples.max(2) - 1) as f64)
        .map(|w| (kernel_magnitude(w, p) / dc - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Kernel whose zero cancels the `1/tau+` pole: `tau+ = tau- (1 + 2 alpha)`,
/// `A- = alpha A+`.
pub fn match_kernel(tau_minus: f64, alpha: f64, a_plus: f64) -> Result<StdpParams> {
    if !(tau_minus > 0.0) || !(alpha >= 0.0) || !(a_plus > 0.0) {
        return Err(Error::param(format!(
            "match_kernel needs tau_minus > 0, alpha >= 0, a_plus > 0; got {tau_minus}, {alpha}, {a_plus}"
        )));
    }
    Ok(StdpParams {
        a_plus,
        a_minus: alpha * a_plus,
        tau_plus: tau_minus * (1.0 + 2.0 * alpha),
        tau_minus,
    })
}

/// `safety * sqrt(2/(eta1 n))`.
pub fn init_sigma(n: usize, eta1: f64, safety: f64) -> f64 {
    safety * (2.0 / (eta1 * n as f64)).sqrt()
}

/// I.i.d. `N(0, sigma^2)` dictionary with `sigma = init_sigma(n, eta1, safety)`.
pub fn init_weights(n: usize, m: usize, eta1: f64, safety: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || m == 0 {
        return Err(Error::param("init_weights needs n, m >= 1"));
    }
    if !(safety > 0.0 && safety < 1.0) || !(eta1 > 0.0) {
        return Err(Error::param(format!(
            "need 0 < safety < 1 and eta1 > 0, got {safety}, {eta1}"
        )));
    }
    let dist = Normal::new(0.0, init_sigma(n, eta1, safety)).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(DMatrix::from_fn(n, m, |_, _| dist.sample(&mut rng)))
}

/// Spectral radius of `I - eta1 phi^T phi`.
pub fn iteration_spectral_radius(phi: &DMatrix<f64>, eta1: f64) -> f64 {
    let m = phi.ncols();
    let it = DMatrix::identity(m, m) - eta1 * phi.transpose() * phi;
    it.symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |r, v| r.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub n_eps: usize,
    pub eps: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { n_eps: 10, eps: 1e-3 }
    }
}

impl StopRule {
    /// Threshold of one spike per measurement window: loss changes below
    /// `1/measure_seconds` Hz are beneath the rate resolution.
    pub fn spike_quantum(measure_seconds: f64) -> Result<Self> {
        if !(measure_seconds > 0.0) {
            return Err(Error::param(format!("measurement window must be > 0, got {measure_seconds}")));
        }
        Ok(StopRule {
            n_eps: 10,
            eps: 1.0 / measure_seconds,
        })
    }
}

/// True when the mean of the last `n_eps` absolute loss changes is below
/// `eps`. Needs more than `n_eps` entries.
pub fn should_stop(history: &[f64], rule: &StopRule) -> Result<bool> {
    if rule.n_eps == 0 || !(rule.eps > 0.0) {
        return Err(Error::param(format!("invalid stop rule {rule:?}")));
    }
    if history.len() <= rule.n_eps {
        return Err(Error::InsufficientData(format!(
            "stop rule needs more than {} losses, got {}",
            rule.n_eps,
            history.len()
        )));
    }
    let tail = &history[history.len() - rule.n_eps - 1..];
    let mean = tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / rule.n_eps as f64;
    Ok(mean < rule.eps)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || count < 2 {
        return Err(Error::param(format!("log grid needs 0 < lo < hi and count >= 2, got {lo}, {hi}, {count}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Parse `lo:hi:count` into a log grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::param(format!("grid '{spec}' is not lo:hi:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].trim().parse().map_err(|_| bad())?;
    let hi = parts[1].trim().parse().map_err(|_| bad())?;
    let count = parts[2].trim().parse().map_err(|_| bad())?;
    log_grid(lo, hi, count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AkaikeOptions {
    /// Inference seconds per sample.
    pub duration: f64,
    /// Leading seconds excluded from rates.
    pub burn_in: f64,
}

impl Default for AkaikeOptions {
    fn default() -> Self {
        AkaikeOptions {
            duration: 2.0,
            burn_in: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AkaikeResult {
    pub mu_grid: Vec<f64>,
    /// `+inf` marks infeasible candidates.
    pub aicc: Vec<f64>,
    pub mu_hat: f64,
    pub sigma_z: f64,
    /// Mean support size per candidate.
    pub theta: Vec<f64>,
    /// Measured coding rates, `[candidate][sample][unit]`.
    pub codes: Vec<Vec<Vec<f64>>>,
    /// Measured error rates, `[candidate][sample][unit]`.
    pub errors: Vec<Vec<Vec<f64>>>,
}

impl AkaikeResult {
    pub fn best_index(&self) -> usize {
        self.mu_grid
            .iter()
            .position(|&m| m == self.mu_hat)
            .expect("mu_hat is on the grid")
    }
}

/// Support size: units whose measured rate exceeds one spike per window.
pub fn support_size(rates: &[f64], window: f64) -> usize {
    let quantum = 1.0 / window;
    rates.iter().filter(|r| r.abs() > quantum).count()
}

/// AICc of one sample: `||r_e||^2/sigma^2 + 2 theta + (2 theta^2 + 2 theta)/(n - theta - 1)`.
/// `None` when `theta >= n - 1`.
pub fn aicc(error_rates: &[f64], sigma2: f64, theta: usize) -> Option<f64> {
    let n = error_rates.len();
    if theta + 1 >= n {
        return None;
    }
    let neg2_loglik = error_rates.iter().map(|r| r * r).sum::<f64>() / sigma2;
    let t = theta as f64;
    Some(neg2_loglik + 2.0 * t + (2.0 * t * t + 2.0 * t) / (n as f64 - t - 1.0))
}

/// Pick the threshold minimising AICc summed over the minibatch.
///
/// `builder(mu)` returns a fresh network at threshold `mu`; the noise
/// variance is the mean squared error rate at the smallest grid value.
pub fn akaike_pursuit<B>(
    builder: B,
    minibatch: &[SpikeRaster],
    mu_grid: &[f64],
    opts: &AkaikeOptions,
    exec: Exec,
) -> Result<AkaikeResult>
where
    B: Fn(f64) -> Result<Network> + Sync,
{
    if minibatch.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Akaike pursuit needs >= 2 samples, got {}",
            minibatch.len()
        )));
    }
    if mu_grid.is_empty() || mu_grid.windows(2).any(|w| !(w[1] > w[0])) || !(mu_grid[0] > 0.0) {
        return Err(Error::param("mu grid must be positive and strictly ascending"));
    }
    let l = minibatch.len();
    let sim = SimOptions {
        duration: Some(opts.duration),
        burn_in: opts.burn_in,
        ..Default::default()
    };
    let runs = exec.try_map_range(mu_grid.len() * l, |idx| {
        let (g, s) = (idx / l, idx % l);
        let mut net = builder(mu_grid[g])?;
        let t = net.simulate(&minibatch[s], &sim)?;
        Ok::<_, Error>((t.coding_mean_rates(), t.error_mean_rates(), t.measure_seconds()))
    })?;

    let mut codes = vec![Vec::with_capacity(l); mu_grid.len()];
    let mut errors = vec![Vec::with_capacity(l); mu_grid.len()];
    let mut window = 0.0;
    for (idx, (c, e, w)) in runs.into_iter().enumerate() {
        codes[idx / l].push(c);
        errors[idx / l].push(e);
        window = w;
    }

    let base: Vec<f64> = errors[0].iter().flatten().cloned().collect();
    let sigma2 = base.iter().map(|r| r * r).sum::<f64>() / base.len() as f64;
    if !(sigma2 > 0.0) {
        return Err(Error::InsufficientData(
            "error rates vanish at the smallest threshold; noise variance is zero".into(),
        ));
    }

    let mut scores = Vec::with_capacity(mu_grid.len());
    let mut theta = Vec::with_capacity(mu_grid.len());
    for (cs, es) in codes.iter().zip(&errors) {
        let mut total = 0.0f64;
        let mut th = 0usize;
        for (c, e) in cs.iter().zip(es) {
            let t = support_size(c, window);
            th += t;
            match aicc(e, sigma2, t) {
                Some(v) if total.is_finite() => total += v,
                _ => total = f64::INFINITY,
            }
        }
        scores.push(total);
        theta.push(th as f64 / l as f64);
    }
    let best = scores
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InsufficientData("every threshold candidate is infeasible".into()))?;
    Ok(AkaikeResult {
        mu_hat: mu_grid[best],
        mu_grid: mu_grid.to_vec(),
        aicc: scores,
        sigma_z: sigma2.sqrt(),
        theta,
        codes,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dc_magnitude_is_kernel_integral() {
        let p = StdpParams::default();
        assert!((kernel_magnitude(0.0, &p) - 0.0144).abs() < 1e-15);
    }

    #[test]
    fn matched_zero_cancels_pole() {
        let p = StdpParams::default();
        let s = kernel_spectrum(&p, &[0.0, 10.0]);
        assert!((s.zero - 48.076923076923).abs() < 1e-9);
        assert!((s.zero - s.poles.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_zero_values() {
        let p = StdpParams {
            tau_plus: 0.008,
            ..StdpParams::default()
        };
        assert!((kernel_zero(&p) - 13.888888888889).abs() < 1e-9);
        assert_eq!(1.0 / p.tau_plus, 125.0);
    }

    #[test]
    fn match_kernel_values() {
        let p = match_kernel(0.008, 0.8, 1.0).unwrap();
        assert!((p.tau_plus - 0.0208).abs() < 1e-15);
        assert_eq!(p.a_minus, 0.8);
        let d = match_kernel(0.008, 0.0, 1.0).unwrap();
        assert_eq!(d.tau_plus, d.tau_minus);
        assert!(match_kernel(-1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn matched_kernel_is_flat_near_dc() {
        let matched = StdpParams::default();
        let unmatched = StdpParams {
            tau_plus: 0.008,
            ..StdpParams::default()
        };
        let fm = kernel_flatness(&matched, 0.2, 2001);
        let fu = kernel_flatness(&unmatched, 0.2, 2001);
        assert!(fm <= 0.05, "{fm}");
        assert!(fu > 0.05, "{fu}");
        let ratio = |p: &StdpParams| kernel_magnitude(0.2 / p.tau_minus, p) / kernel_magnitude(0.0, p);
        assert!((ratio(&unmatched) - 1.0).abs() > (ratio(&matched) - 1.0).abs());
    }

    #[test]
    fn init_sigma_values() {
        assert!((init_sigma(1156, 1.0, 1.0) - 0.0416).abs() < 1e-4);
        assert!((init_sigma(1156, 1.0, 0.5) - 0.0208).abs() < 1e-4);
    }

    #[test]
    fn init_is_deterministic_with_right_variance() {
        let a = init_weights(100, 200, 1.0, 0.5, 4).unwrap();
        assert_eq!(a, init_weights(100, 200, 1.0, 0.5, 4).unwrap());
        let var = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        let s2 = init_sigma(100, 1.0, 0.5).powi(2);
        assert!((var - s2).abs() <= 0.05 * s2, "{var} vs {s2}");
        assert!(init_weights(4, 4, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn stop_rule_cases() {
        let r = StopRule { n_eps: 3, eps: 0.5 };
        assert!(should_stop(&[2.0; 4], &r).unwrap());
        assert!(should_stop(&[2.0; 3], &r).is_err());
        let alt: Vec<f64> = (0..10).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(!should_stop(&alt, &r).unwrap());
    }

    #[test]
    fn stop_rule_on_geometric_decay() {
        // mean of |L_k - L_{k-1}| over k = e-9..=e is 0.5^(e-10) (1 - 2^-10);
        // it first drops below 1e-3 at e = 20
        let rule = StopRule { n_eps: 10, eps: 1e-3 };
        let loss: Vec<f64> = (0..40).map(|k| 10.0 * 0.5f64.powi(k)).collect();
        let first = (rule.n_eps + 1..=loss.len())
            .find(|&len| should_stop(&loss[..len], &rule).unwrap())
            .unwrap();
        let closed = (10..40)
            .find(|&e| 0.5f64.powi(e - 10) * (1.0 - 2f64.powi(-10)) < 1e-3)
            .unwrap() as usize;
        assert_eq!(closed, 20);
        assert_eq!(first - 1, closed);
    }

    #[test]
    fn aicc_cases() {
        assert!(aicc(&[1.0, 2.0, 3.0], 1.0, 2).is_none());
        let v = aicc(&[1.0, 1.0, 1.0, 1.0, 1.0], 2.0, 1).unwrap();
        assert!((v - (2.5 + 2.0 + 4.0 / 3.0)).abs() < 1e-12);
        assert_eq!(aicc(&[0.0; 4], 1.0, 0), Some(0.0));
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.05:0.8:12").unwrap();
        assert_eq!(g.len(), 12);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[11] - 0.8).abs() < 1e-12);
        assert!(parse_grid("1:2").is_err());
    }

    proptest! {
        #[test]
        fn matched_kernel_always_cancels(tau_minus in 1e-4f64..1.0, alpha in 0.0f64..5.0, a_plus in 0.1f64..10.0) {
            let p = match_kernel(tau_minus, alpha, a_plus).unwrap();
            let z = kernel_zero(&p);
            prop_assert!((z - 1.0 / p.tau_plus).abs() <= 1e-12 * z.abs().max(1.0));
        }

        #[test]
        fn kernel_magnitude_nonnegative(w in 0.0f64..1e4, tau_minus in 1e-3f64..0.1, alpha in 0.0f64..0.99) {
            let p = StdpParams { a_plus: 1.0, a_minus: alpha, tau_plus: 0.05, tau_minus };
            prop_assert!(kernel_magnitude(w, &p) >= 0.0);
        }

        #[test]
        fn stop_rule_monotone_in_eps(h in proptest::collection::vec(-5.0f64..5.0, 6..30), e1 in 1e-4f64..3.0, de in 0.0f64..3.0) {
            let r1 = StopRule { n_eps: 5, eps: e1 };
            let r2 = StopRule { n_eps: 5, eps: e1 + de };
            if should_stop(&h, &r1).unwrap() {
                prop_assert!(should_stop(&h, &r2).unwrap());
            }
        }
    }
}
