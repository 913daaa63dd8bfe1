//! LIF and push-pull LIF dynamics, PSC filtering and the rate-domain
//! soft-threshold model.
//!
//! Membranes use exact exponential integration of `dV/dt = (J - V)/tau_m`
//! with `J` held constant over a step, so `V <- V*a + (1 - a)*J` with
//! `a = exp(-dt/tau_m)`. There is no refractory period and `V` is not
//! clamped from below.

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::stats::{line_fit, LineFit};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    /// Firing threshold.
    pub mu: f64,
    /// Membrane time constant in seconds.
    pub tau_m: f64,
    /// Step in seconds.
    pub dt: f64,
}

impl LifParams {
    pub fn new(mu: f64, tau_m: f64, dt: f64) -> Result<Self> {
        let p = LifParams { mu, tau_m, dt };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `tau_m = 1/mu`, which gives the rate curve unit slope.
    pub fn matched(mu: f64, dt: f64) -> Result<Self> {
        Self::new(mu, 1.0 / mu, dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::param(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.tau_m > 0.0 && self.tau_m.is_finite()) {
            return Err(Error::param(format!("tau_m must be > 0, got {}", self.tau_m)));
        }
        if !(self.dt > 0.0 && self.dt < self.tau_m) {
            return Err(Error::param(format!(
                "dt must satisfy 0 < dt < tau_m, got dt={} tau_m={}",
                self.dt, self.tau_m
            )));
        }
        Ok(())
    }

    /// Per-step membrane decay `exp(-dt/tau_m)`.
    pub fn decay(&self) -> f64 {
        (-self.dt / self.tau_m).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PushPullState {
    pub v_p: f64,
    pub v_n: f64,
}

/// Advance one push-pull pair by one step. Returns +1 when the push side
/// fires, -1 when the pull side fires, 0 otherwise.
pub fn push_pull_step(state: &mut PushPullState, params: &LifParams, j_in: f64) -> i8 {
    let a = params.decay();
    push_pull_advance(&mut state.v_p, &mut state.v_n, a, params.mu, j_in)
}

#[inline]
pub(crate) fn push_pull_advance(v_p: &mut f64, v_n: &mut f64, a: f64, mu: f64, j: f64) -> i8 {
    let g = 1.0 - a;
    *v_p = *v_p * a + g * j;
    *v_n = *v_n * a - g * j;
    let mut spike = 0;
    if *v_p >= mu {
        *v_p = 0.0;
        spike += 1;
    }
    if *v_n >= mu {
        *v_n = 0.0;
        spike -= 1;
    }
    spike
}

/// Exponential PSC filter with unit DC gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PscState {
    pub y: f64,
    pub tau_s: f64,
}

impl PscState {
    pub fn new(tau_s: f64) -> Result<Self> {
        if !(tau_s > 0.0) {
            return Err(Error::param(format!("tau_s must be > 0, got {tau_s}")));
        }
        Ok(PscState { y: 0.0, tau_s })
    }
}

/// `y <- y*exp(-dt/tau_s) + (1 - exp(-dt/tau_s))*u`; returns the new `y`.
pub fn psc_step(state: &mut PscState, u: f64, dt: f64) -> f64 {
    let a = (-dt / state.tau_s).exp();
    state.y = state.y * a + (1.0 - a) * u;
    state.y
}

/// First-order rate model: soft threshold of `j_in` at `mu` with slope
/// `1/(tau_m*mu)`.
pub fn lif_rate_taylor(j_in: f64, params: &LifParams) -> f64 {
    let k = 1.0 / (params.tau_m * params.mu);
    if j_in > params.mu {
        (j_in - params.mu) * k
    } else if j_in < -params.mu {
        (j_in + params.mu) * k
    } else {
        0.0
    }
}

/// Continuous-time constant-input rate `1/(tau_m*ln(J/(J - mu)))`, signed.
pub fn lif_rate_exact(j_in: f64, params: &LifParams) -> f64 {
    let j = j_in.abs();
    if j <= params.mu {
        return 0.0;
    }
    let r = 1.0 / (params.tau_m * (j / (j - params.mu)).ln());
    r.copysign(j_in)
}

/// Signed rate of one push-pull pair driven by a constant current from a
/// zero state: signed spike count over `duration`.
pub fn measure_rate(j_in: f64, params: &LifParams, duration: f64) -> f64 {
    let steps = (duration / params.dt).round() as usize;
    let a = params.decay();
    let (mut v_p, mut v_n) = (0.0, 0.0);
    let mut count: i64 = 0;
    for _ in 0..steps {
        count += push_pull_advance(&mut v_p, &mut v_n, a, params.mu, j_in) as i64;
    }
    count as f64 / (steps as f64 * params.dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxPoint {
    pub j_in: f64,
    pub measured: f64,
    pub taylor: f64,
}

/// Sweep constant currents over `[j_min, j_max]` (inclusive, `points`
/// samples) and measure the push-pull signed rate at each.
pub fn prox_curve(
    params: &LifParams,
    j_min: f64,
    j_max: f64,
    points: usize,
    duration: f64,
    exec: Exec,
) -> Result<Vec<ProxPoint>> {
    params.validate()?;
    if points < 2 || !(j_max > j_min) || !(duration > 0.0) {
        return Err(Error::param(
            "prox curve needs points >= 2, j_max > j_min and duration > 0",
        ));
    }
    Ok(exec.map_range(points, |k| {
        let j_in = j_min + (j_max - j_min) * k as f64 / (points - 1) as f64;
        ProxPoint {
            j_in,
            measured: measure_rate(j_in, params, duration),
            taylor: lif_rate_taylor(j_in, params),
        }
    }))
}

/// Affine fit of measured rate against current over `j_in` in `[lo, hi]`.
pub fn fit_prox_slope(curve: &[ProxPoint], lo: f64, hi: f64) -> Option<LineFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|p| p.j_in >= lo - 1e-12 && p.j_in <= hi + 1e-12)
        .map(|p| (p.j_in, p.measured))
        .unzip();
    line_fit(&x, &y)
}
