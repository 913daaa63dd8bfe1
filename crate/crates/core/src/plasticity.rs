//! Double-exponential STDP: kernel, exact pairwise weight change, the
//! rate-based approximation and homeostatic weight updates.
//!
//! Spikes are signed; every pair contributes `kappa(t_post - t_pre)`
//! multiplied by the product of the two polarities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::event_io::{poisson_train, SpikeTrain};
use crate::exec::Exec;
use crate::stats::pearson;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            a_plus: 1.0,
            a_minus: 0.8,
            tau_plus: 0.0208,
            tau_minus: 0.008,
        }
    }
}

impl StdpParams {
    /// Requires positive amplitudes and time constants (a zero depression
    /// amplitude is tolerated) and a positive DC gain.
    pub fn validate(&self) -> Result<()> {
        let ok = self.a_plus > 0.0
            && self.a_minus >= 0.0
            && self.tau_plus > 0.0
            && self.tau_minus > 0.0
            && [self.a_plus, self.a_minus, self.tau_plus, self.tau_minus]
                .iter()
                .all(|v| v.is_finite());
        if !ok {
            return Err(Error::param(format!("invalid STDP parameters {self:?}")));
        }
        if self.dc_gain() <= 0.0 {
            return Err(Error::param(format!(
                "a_plus*tau_plus - a_minus*tau_minus must be > 0, got {}",
                self.dc_gain()
            )));
        }
        Ok(())
    }

    /// Integral of the kernel, `A+ tau+ - A- tau-`.
    pub fn dc_gain(&self) -> f64 {
        self.a_plus * self.tau_plus - self.a_minus * self.tau_minus
    }

    /// `A- / A+`.
    pub fn alpha(&self) -> f64 {
        self.a_minus / self.a_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnParams {
    pub eta2: f64,
    pub lambda2: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        LearnParams {
            eta2: 0.003,
            lambda2: 0.002,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta2 > 0.0 && self.eta2.is_finite()) || !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return Err(Error::param(format!("need eta2 > 0 and lambda2 >= 0, got {self:?}")));
        }
        Ok(())
    }
}

/// `A+ exp(-tau/tau+)` for `tau >= 0`, `-A- exp(tau/tau-)` otherwise.
pub fn stdp_kernel(tau: f64, p: &StdpParams) -> f64 {
    if tau >= 0.0 {
        p.a_plus * (-tau / p.tau_plus).exp()
    } else {
        -p.a_minus * (tau / p.tau_minus).exp()
    }
}

/// Exact all-pairs STDP change between one pre and one post train,
/// computed in one pass with two exponential traces.
pub fn pairwise_stdp_delta(pre: &SpikeTrain, post: &SpikeTrain, p: &StdpParams, eta2: f64) -> Result<f64> {
    if pre.dt() != post.dt() || pre.len() != post.len() {
        return Err(Error::dims(format!(
            "pre ({} steps, dt {}) and post ({} steps, dt {}) differ",
            pre.len(),
            pre.dt(),
            post.len(),
            post.dt()
        )));
    }
    let dt = pre.dt();
    let (ap, am) = ((-dt / p.tau_plus).exp(), (-dt / p.tau_minus).exp());
    // x: pre trace (tau+), y: post trace (tau-), both signed
    let (mut x, mut y, mut acc) = (0.0, 0.0, 0.0);
    for (&sp, &so) in pre.values().iter().zip(post.values()) {
        x *= ap;
        y *= am;
        if sp != 0 {
            // posts strictly earlier than this pre
            acc -= p.a_minus * sp as f64 * y;
            x += sp as f64;
        }
        if so != 0 {
            // pres at or before this post
            acc += p.a_plus * so as f64 * x;
            y += so as f64;
        }
    }
    Ok(eta2 * acc)
}

/// `eta2 (A+ tau+ - A- tau-) r_post r_pre`, per second.
pub fn rate_stdp_delta(r_post: f64, r_pre: f64, p: &StdpParams, eta2: f64) -> f64 {
    eta2 * p.dc_gain() * r_post * r_pre
}

/// `w - delta - eta2*lambda2*w`.
pub fn apply_weight_update(w: f64, delta_stdp: f64, lp: &LearnParams) -> f64 {
    w - delta_stdp - lp.eta2 * lp.lambda2 * w
}

/// Multiplicative homeostatic decay over `elapsed` seconds of simulated time.
pub fn homeostasis_factor(lp: &LearnParams, elapsed: f64) -> f64 {
    1.0 - lp.eta2 * lp.lambda2 * elapsed
}

/// Which trains in the comparison grid carry spikes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    /// Number of active trains per side; the others stay silent.
    pub active: usize,
    /// Active rates are drawn uniformly from `[rate_lo, rate_hi]` Hz.
    pub rate_lo: f64,
    pub rate_hi: f64,
}

impl Default for ActivityProfile {
    fn default() -> Self {
        ActivityProfile {
            active: 2,
            rate_lo: 40.0,
            rate_hi: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdpComparison {
    /// `(exact, rate)` weight change per synapse, post-major.
    pub pairs: Vec<(f64, f64)>,
    pub mean_abs_diff: f64,
    pub pearson: f64,
}

/// Exact pairwise versus rate-model STDP over an `n_post x n_pre` grid of
/// Poisson trains. Rates for the rate model are the windowed mean signed
/// rates of the same trains over the `steps`-step window.
#[allow(clippy::too_many_arguments)]
pub fn stdp_compare(
    n_pre: usize,
    n_post: usize,
    steps: usize,
    dt: f64,
    p: &StdpParams,
    eta2: f64,
    profile: &ActivityProfile,
    seed: u64,
    exec: Exec,
) -> Result<StdpComparison> {
    p.validate()?;
    if n_pre == 0 || n_post == 0 || steps == 0 {
        return Err(Error::param("stdp_compare needs non-empty grid and window"));
    }
    if profile.active > n_pre.max(n_post) || !(profile.rate_hi >= profile.rate_lo) || profile.rate_lo < 0.0 {
        return Err(Error::param(format!("invalid activity profile {profile:?}")));
    }
    let duration = steps as f64 * dt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut side = |n: usize| -> Result<Vec<SpikeTrain>> {
        let active = profile.active.min(n);
        (0..n)
            .map(|i| {
                if i < active {
                    let rate = rng.random_range(profile.rate_lo..=profile.rate_hi);
                    let pol = if rng.random::<bool>() { 1 } else { -1 };
                    poisson_train(rate, dt, duration, pol, rng.random())
                } else {
                    Ok(SpikeTrain::zeros(dt, steps))
                }
            })
            .collect()
    };
    let pre = side(n_pre)?;
    let post = side(n_post)?;

    let rows: Vec<Vec<(f64, f64)>> = exec.try_map_range(n_post, |i| {
        let r_post = post[i].mean_rate();
        pre.iter()
            .map(|tr| {
                let exact = pairwise_stdp_delta(tr, &post[i], p, eta2)?;
                let rate = rate_stdp_delta(r_post, tr.mean_rate(), p, eta2) * duration;
                Ok((exact, rate))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let pairs: Vec<(f64, f64)> = rows.into_iter().flatten().collect();
    let mean_abs_diff = pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / pairs.len() as f64;
    let (ex, ra): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
    Ok(StdpComparison {
        pearson: pearson(&ex, &ra),
        mean_abs_diff,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(pre: &SpikeTrain, post: &SpikeTrain, p: &StdpParams, eta2: f64) -> f64 {
        let dt = pre.dt();
        let mut acc = 0.0;
        for (i, &a) in pre.values().iter().enumerate() {
            for (j, &b) in post.values().iter().enumerate() {
                if a != 0 && b != 0 {
                    acc += stdp_kernel((j as f64 - i as f64) * dt, p) * a as f64 * b as f64;
                }
            }
        }
        eta2 * acc
    }

    #[test]
    fn kernel_values() {
        let p = StdpParams::default();
        assert_eq!(stdp_kernel(0.0, &p), 1.0);
        assert!((stdp_kernel(p.tau_plus, &p) - 1.0 / std::f64::consts::E).abs() < 1e-15);
        assert!((stdp_kernel(-p.tau_minus, &p) + 0.8 / std::f64::consts::E).abs() < 1e-15);
        assert!((stdp_kernel(-p.tau_minus, &p) + 0.2943).abs() < 1e-4);
    }

    #[test]
    fn kernel_dc_gain_by_quadrature() {
        let p = StdpParams::default();
        let (lo, hi) = (-50.0 * p.tau_minus, 50.0 * p.tau_plus);
        let n = 400_000;
        let h = (hi - lo) / n as f64;
        // midpoint rule; the jump at 0 costs at most h*(A+ + A-)
        let integral: f64 = (0..n).map(|k| stdp_kernel(lo + (k as f64 + 0.5) * h, &p) * h).sum();
        assert!((p.dc_gain() - 0.0144).abs() < 1e-12);
        assert!((integral - 0.0144).abs() <= 0.001 * 0.0144, "{integral}");
    }

    #[test]
    fn pairwise_empty_is_zero() {
        let p = StdpParams::default();
        let z = SpikeTrain::zeros(0.005, 50);
        let t = poisson_train(50.0, 0.005, 0.25, 1, 1).unwrap();
        assert_eq!(pairwise_stdp_delta(&z, &t, &p, 0.003).unwrap(), 0.0);
        assert_eq!(pairwise_stdp_delta(&t, &z, &p, 0.003).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_single_pair_closed_form() {
        let p = StdpParams::default();
        let mut pre = vec![0i8; 20];
        let mut post = vec![0i8; 20];
        pre[0] = 1;
        post[7] = 1;
        let d = pairwise_stdp_delta(
            &SpikeTrain::new(0.005, pre.clone()).unwrap(),
            &SpikeTrain::new(0.005, post.clone()).unwrap(),
            &p,
            0.003,
        )
        .unwrap();
        assert!((d - 0.003 * (-7.0 * 0.005 / 0.0208f64).exp()).abs() < 1e-15);
        // reversed order depresses; polarity product flips sign
        let rev = pairwise_stdp_delta(
            &SpikeTrain::new(0.005, post).unwrap(),
            &SpikeTrain::new(0.005, pre.iter().map(|v| -v).collect()).unwrap(),
            &p,
            0.003,
        )
        .unwrap();
        assert!((rev - 0.003 * 0.8 * (-7.0 * 0.005 / 0.008f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn simultaneous_pair_counts_as_potentiation() {
        let p = StdpParams::default();
        let a = SpikeTrain::new(0.005, vec![0, 1, 0]).unwrap();
        assert_eq!(pairwise_stdp_delta(&a, &a, &p, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let p = StdpParams::default();
        assert!(pairwise_stdp_delta(&SpikeTrain::zeros(0.005, 3), &SpikeTrain::zeros(0.005, 4), &p, 1.0).is_err());
        assert!(pairwise_stdp_delta(&SpikeTrain::zeros(0.005, 3), &SpikeTrain::zeros(0.001, 3), &p, 1.0).is_err());
    }

    #[test]
    fn trace_equals_brute_force_on_poisson_trains() {
        let p = StdpParams::default();
        for seed in 0..10 {
            let pre = poisson_train(40.0, 0.005, 1.5, 1, seed).unwrap();
            let post = poisson_train(30.0, 0.005, 1.5, -1, seed + 100).unwrap();
            let fast = pairwise_stdp_delta(&pre, &post, &p, 0.003).unwrap();
            assert!((fast - brute_force(&pre, &post, &p, 0.003)).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_delta_values() {
        let p = StdpParams::default();
        assert_eq!(rate_stdp_delta(0.0, 12.0, &p, 0.003), 0.0);
        assert!((rate_stdp_delta(10.0, 10.0, &p, 0.003) - 0.00432).abs() < 1e-15);
    }

    #[test]
    fn weight_update_values() {
        let lp = LearnParams::default();
        let none = LearnParams { eta2: 0.003, lambda2: 0.0 };
        assert_eq!(apply_weight_update(0.7, 0.0, &none), 0.7);
        assert!((apply_weight_update(1.0, 0.0, &lp) - 0.999994).abs() < 1e-15);
        let mut w = 1.0;
        for _ in 0..1000 {
            w = apply_weight_update(w, 0.0, &LearnParams { eta2: 0.5, lambda2: 0.1 });
        }
        assert!((w - 0.95f64.powi(1000)).abs() < 1e-15);
    }

    #[test]
    fn comparison_grid_sparse_profile() {
        let p = StdpParams::default();
        let c = stdp_compare(100, 100, 300, 0.005, &p, 0.003, &ActivityProfile::default(), 3, Exec::Parallel).unwrap();
        assert_eq!(c.pairs.len(), 10_000);
        assert!(c.mean_abs_diff <= 1e-4, "{}", c.mean_abs_diff);
        assert!(c.pearson >= 0.99, "{}", c.pearson);
        let seq = stdp_compare(100, 100, 300, 0.005, &p, 0.003, &ActivityProfile::default(), 3, Exec::Sequential).unwrap();
        assert_eq!(c, seq);
    }

    fn arb_train(len: usize) -> impl Strategy<Value = SpikeTrain> {
        proptest::collection::vec(prop_oneof![6 => Just(0i8), 1 => Just(1i8), 1 => Just(-1i8)], len)
            .prop_map(|v| SpikeTrain::new(0.005, v).unwrap())
    }

    proptest! {
        #[test]
        fn trace_matches_all_pairs((pre, post) in (1usize..80).prop_flat_map(|l| (arb_train(l), arb_train(l)))) {
            let p = StdpParams::default();
            let fast = pairwise_stdp_delta(&pre, &post, &p, 0.003).unwrap();
            prop_assert!((fast - brute_force(&pre, &post, &p, 0.003)).abs() < 1e-12);
        }

        #[test]
        fn rate_delta_bilinear(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0, k in -3.0f64..3.0) {
            let p = StdpParams::default();
            let lhs = rate_stdp_delta(a + k * b, c, &p, 0.003);
            let rhs = rate_stdp_delta(a, c, &p, 0.003) + k * rate_stdp_delta(b, c, &p, 0.003);
            prop_assert!((lhs - rhs).abs() < 1e-12);
            let lhs = rate_stdp_delta(c, a + k * b, &p, 0.003);
            let rhs = rate_stdp_delta(c, a, &p, 0.003) + k * rate_stdp_delta(c, b, &p, 0.003);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn homeostasis_bounds_weights(deltas in proptest::collection::vec(-0.01f64..0.01, 1..2000), w0 in -5.0f64..5.0) {
            let lp = LearnParams { eta2: 0.3, lambda2: 0.1 };
            let bound = w0.abs().max(0.01 / (lp.eta2 * lp.lambda2));
            let mut w = w0;
            for d in deltas {
                w = apply_weight_update(w, d, &lp);
                prop_assert!(w.abs() <= bound + 1e-9);
            }
        }
    }
}
