//! The coding/error two-layer push-pull network.
//!
//! Per step `k`, with `c` the coding spikes of step `k-1`, `s` the input
//! spikes and spikes entering filters as Diracs of weight `1/dt`:
//!
//! 1. error drive `phi_fb c - s`, PSC-filtered, steps the error pairs (`e`);
//! 2. coding drive `eta1 phi_in s - (eta1 w_tilde - I) c`, PSC-filtered,
//!    steps the coding pairs;
//! 3. when learning, STDP updates `phi_in` (post coding, pre error),
//!    `phi_fb` (post error, pre coding) and `w_tilde` (post lateral state
//!    `f = w_tilde c - phi_in (e + s)`, pre coding).
//!
//! With `tau_m = 1/mu` the rate fixed point is ISTA's with step `eta1` and
//! threshold `mu`, i.e. the LASSO solution for `lambda1 = mu/eta1`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::event_io::{steps_for, SpikeRaster};
use crate::neuron::{push_pull_advance, LifParams};
use crate::plasticity::{LearnParams, StdpParams};
use crate::stats::l2_norm;
use crate::{Error, Result};

/// Weights beyond this magnitude abort a simulation.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LearningMode {
    /// Accumulate signed counts and apply the rate-model update once per
    /// learning window.
    #[default]
    RateStdp,
    /// Apply pairwise STDP on-line from exponential traces every step.
    ExactStdp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n: usize,
    pub m: usize,
    pub eta1: f64,
    pub lif: LifParams,
    pub tau_s: f64,
    /// Time constant of the on-line rate estimate.
    pub tau_r: f64,
    pub stdp: StdpParams,
    pub learn: LearnParams,
    pub learning_mode: LearningMode,
    /// Threshold of the error pairs (with `tau_m = 1/error_mu`); `None`
    /// shares the coding threshold.
    #[serde(default)]
    pub error_mu: Option<f64>,
    /// Keep `phi_in = phi_fb^T` and `w_tilde = phi_fb^T phi_fb` after every
    /// update.
    pub tied: bool,
}

impl NetworkConfig {
    /// Defaults: `eta1 = 1`, `tau_m = 1/mu`, `dt = 5 ms`, `tau_s = 10 ms`,
    /// `tau_r = 0.1 s`, default STDP and learning parameters.
    pub fn new(n: usize, m: usize, mu: f64) -> Result<Self> {
        let cfg = NetworkConfig {
            n,
            m,
            eta1: 1.0,
            lif: LifParams::matched(mu, crate::DEFAULT_DT)?,
            tau_s: 0.01,
            tau_r: 0.1,
            stdp: StdpParams::default(),
            learn: LearnParams::default(),
            learning_mode: LearningMode::RateStdp,
            error_mu: None,
            tied: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::param(format!("n and m must be >= 1, got {}x{}", self.n, self.m)));
        }
        if !(self.eta1 > 0.0 && self.eta1.is_finite()) {
            return Err(Error::param(format!("eta1 must be > 0, got {}", self.eta1)));
        }
        self.lif.validate()?;
        let want = 1.0 / self.lif.mu;
        if (self.lif.tau_m - want).abs() > 1e-9 * want {
            return Err(Error::param(format!(
                "tau_m must equal 1/mu = {want}, got {}",
                self.lif.tau_m
            )));
        }
        if !(self.tau_s > 0.0) || !(self.tau_r > 0.0) {
            return Err(Error::param("tau_s and tau_r must be > 0"));
        }
        self.error_lif()?;
        self.stdp.validate()?;
        self.learn.validate()
    }

    /// Parameters of the error pairs.
    pub fn error_lif(&self) -> Result<LifParams> {
        match self.error_mu {
            Some(mu) => LifParams::matched(mu, self.lif.dt),
            None => Ok(self.lif),
        }
    }

    /// Same configuration at threshold `mu` (and `tau_m = 1/mu`).
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let mut c = self.clone();
        c.lif = LifParams::matched(mu, self.lif.dt)?;
        c.validate()?;
        Ok(c)
    }

    pub fn dt(&self) -> f64 {
        self.lif.dt
    }

    /// LASSO sparsity weight matched by the rate fixed point.
    pub fn lambda1(&self) -> f64 {
        self.lif.mu / self.eta1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    /// Dictionary, `N x M`; mirrors `phi_fb` after learning.
    pub phi: DMatrix<f64>,
    /// Input copy, `M x N`, rows owned by coding neurons.
    pub phi_in: DMatrix<f64>,
    /// Feedback copy, `N x M`, rows owned by error neurons.
    pub phi_fb: DMatrix<f64>,
    /// Lateral target, `M x M`.
    pub w_tilde: DMatrix<f64>,
}

impl NetworkWeights {
    /// All copies consistent with `phi`: `phi_in = phi^T`, `phi_fb = phi`,
    /// `w_tilde = phi^T phi`.
    pub fn from_phi(phi: DMatrix<f64>) -> Self {
        NetworkWeights {
            phi_in: phi.transpose(),
            phi_fb: phi.clone(),
            w_tilde: phi.transpose() * &phi,
            phi,
        }
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }

    pub fn m(&self) -> usize {
        self.phi.ncols()
    }

    pub fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        let shapes = [
            ("phi", self.phi.shape(), (n, m)),
            ("phi_in", self.phi_in.shape(), (m, n)),
            ("phi_fb", self.phi_fb.shape(), (n, m)),
            ("w_tilde", self.w_tilde.shape(), (m, m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::dims(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        Ok(())
    }

    /// `W = eta1 w_tilde - I`.
    pub fn lateral(&self, eta1: f64) -> DMatrix<f64> {
        eta1 * &self.w_tilde - DMatrix::identity(self.m(), self.m())
    }

    fn check_finite(&self, step: usize) -> Result<()> {
        for (name, m) in self.named() {
            if let Some(v) = m.iter().find(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    step,
                    what: format!("{name} entry {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, &DMatrix<f64>); 4] {
        [
            ("phi", &self.phi),
            ("phi_in", &self.phi_in),
            ("phi_fb", &self.phi_fb),
            ("w_tilde", &self.w_tilde),
        ]
    }
}

/// Lateral learning state `f = w_tilde c - phi_in (e + s)`.
pub fn local_state(w: &NetworkWeights, c: &DVector<f64>, e: &DVector<f64>, s: &DVector<f64>) -> DVector<f64> {
    &w.w_tilde * c - &w.phi_in * (e + s)
}

/// Signed spikes of one step: `(index, polarity)`.
pub type Spikes = [(u32, i8)];

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Simulated seconds; `None` runs for the input's length.
    pub duration: Option<f64>,
    pub learning: bool,
    /// Leading seconds excluded from the measured rates and from learning.
    pub burn_in: f64,
    /// Length of the windows behind `coding_rates`/`error_rates`.
    pub record_interval: f64,
    /// Rate-mode learning window in seconds; `None` is one window spanning
    /// the whole post-burn-in run.
    pub learn_window: Option<f64>,
    /// Zero membranes, filters and traces before running.
    pub reset_state: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            duration: None,
            learning: false,
            burn_in: 0.0,
            record_interval: 0.25,
            learn_window: None,
            reset_state: true,
        }
    }
}

impl SimOptions {
    pub fn inference(duration: f64) -> Self {
        SimOptions {
            duration: Some(duration),
            ..Default::default()
        }
    }
}

/// Total (unsigned) spikes per layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LayerCounts {
    pub input: u64,
    pub coding: u64,
    pub error: u64,
    /// Surrogate spikes of the lateral state (exact learning only).
    pub lateral: u64,
}

/// Synapses read per broadcast spike, by source layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fanout {
    pub input: u64,
    pub coding: u64,
    pub error: u64,
}

impl Fanout {
    /// Input spikes reach `M` coding units and one error unit; coding spikes
    /// reach `N` error and `M` coding units; error spikes reach `M` coding
    /// units.
    pub fn for_dims(n: usize, m: usize) -> Self {
        Fanout {
            input: m as u64 + 1,
            coding: (n + m) as u64,
            error: m as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub dt: f64,
    pub steps: usize,
    pub learning: bool,
    /// Signed windowed rates, one row per record window.
    pub coding_rates: Vec<Vec<f64>>,
    pub error_rates: Vec<Vec<f64>>,
    /// Inner loss of each record window.
    pub inner_loss_series: Vec<f64>,
    /// Window lengths in steps, parallel to the rate rows.
    pub window_steps: Vec<usize>,
    pub spikes: LayerCounts,
    pub fanout: Fanout,
    pub weight_writes: u64,
    /// First step of the measurement window.
    pub measure_start: usize,
    pub coding_counts: Vec<i64>,
    pub error_counts: Vec<i64>,
    pub input_counts: Vec<i64>,
    /// Mean filtered coding current over the measurement window.
    pub coding_current_mean: Vec<f64>,
}

impl SimTrace {
    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn measure_seconds(&self) -> f64 {
        self.steps.saturating_sub(self.measure_start) as f64 * self.dt
    }

    fn rates(&self, counts: &[i64]) -> Vec<f64> {
        let t = self.measure_seconds();
        counts
            .iter()
            .map(|&c| if t > 0.0 { c as f64 / t } else { 0.0 })
            .collect()
    }

    pub fn coding_mean_rates(&self) -> Vec<f64> {
        self.rates(&self.coding_counts)
    }

    pub fn error_mean_rates(&self) -> Vec<f64> {
        self.rates(&self.error_counts)
    }

    pub fn input_mean_rates(&self) -> Vec<f64> {
        self.rates(&self.input_counts)
    }

    /// Inner loss over the whole measurement window.
    pub fn inner_loss(&self) -> f64 {
        inner_loss(&self.error_mean_rates())
    }
}

/// Euclidean norm of signed error rates.
pub fn inner_loss(error_rates: &[f64]) -> f64 {
    l2_norm(error_rates)
}

#[derive(Debug, Clone, Default)]
struct Layer {
    v_p: Vec<f64>,
    v_n: Vec<f64>,
    psc: Vec<f64>,
    drive: Vec<f64>,
    spikes: Vec<(u32, i8)>,
    /// STDP traces: `x` decays with tau+, `y` with tau-.
    x: Vec<f64>,
    y: Vec<f64>,
    ema: Vec<f64>,
}

impl Layer {
    fn new(size: usize) -> Self {
        Layer {
            v_p: vec![0.0; size],
            v_n: vec![0.0; size],
            psc: vec![0.0; size],
            drive: vec![0.0; size],
            spikes: Vec::new(),
            x: vec![0.0; size],
            y: vec![0.0; size],
            ema: vec![0.0; size],
        }
    }

    /// Filter `drive` (per second) into the PSC and step the pairs.
    fn step(&mut self, psc_a: f64, mem_a: f64, mu: f64) {
        let g = 1.0 - psc_a;
        self.spikes.clear();
        for i in 0..self.psc.len() {
            self.psc[i] = self.psc[i] * psc_a + g * self.drive[i];
            let s = push_pull_advance(&mut self.v_p[i], &mut self.v_n[i], mem_a, mu, self.psc[i]);
            if s != 0 {
                self.spikes.push((i as u32, s));
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    cfg: NetworkConfig,
    weights: Arc<NetworkWeights>,
    coding: Layer,
    error: Layer,
    lateral: Layer,
}

pub fn build_network(cfg: NetworkConfig, weights: NetworkWeights) -> Result<Network> {
    Network::new(cfg, Arc::new(weights))
}

impl Network {
    pub fn new(cfg: NetworkConfig, weights: Arc<NetworkWeights>) -> Result<Self> {
        cfg.validate()?;
        weights.check_dims(cfg.n, cfg.m)?;
        weights.check_finite(0)?;
        Ok(Network {
            coding: Layer::new(cfg.m),
            error: Layer::new(cfg.n),
            lateral: Layer::new(cfg.m),
            cfg,
            weights,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &NetworkWeights {
        &self.weights
    }

    /// Shared handle; clones of an idle network share weights read-only.
    pub fn weights_arc(&self) -> Arc<NetworkWeights> {
        Arc::clone(&self.weights)
    }

    pub fn into_weights(self) -> NetworkWeights {
        Arc::try_unwrap(self.weights).unwrap_or_else(|a| (*a).clone())
    }

    pub fn reset(&mut self) {
        self.coding = Layer::new(self.cfg.m);
        self.error = Layer::new(self.cfg.n);
        self.lateral = Layer::new(self.cfg.m);
    }

    /// Exponentially windowed coding rates (time constant `tau_r`).
    pub fn online_coding_rates(&self) -> &[f64] {
        &self.coding.ema
    }

    pub fn online_error_rates(&self) -> &[f64] {
        &self.error.ema
    }

    /// Unfiltered coding drive `(eta1 phi_in s - (eta1 w_tilde - I) c)/dt`.
    pub fn coding_drive(&self, s: &Spikes, c: &Spikes) -> Vec<f64> {
        let mut out = vec![0.0; self.cfg.m];
        coding_drive_into(&self.weights, self.cfg.eta1, self.cfg.dt(), s, c, &mut out);
        out
    }

    /// Unfiltered error drive `(phi_fb c - s)/dt`.
    pub fn error_drive(&self, s: &Spikes, c: &Spikes) -> Vec<f64> {
        let mut out = vec![0.0; self.cfg.n];
        error_drive_into(&self.weights, self.cfg.dt(), s, c, &mut out);
        out
    }

    pub fn simulate(&mut self, input: &SpikeRaster, opts: &SimOptions) -> Result<SimTrace> {
        let (n, m) = (self.cfg.n, self.cfg.m);
        let dt = self.cfg.dt();
        if input.channels() != n {
            return Err(Error::dims(format!(
                "input has {} channels, network expects {n}",
                input.channels()
            )));
        }
        if (input.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::dims(format!("input dt {} differs from network dt {dt}", input.dt())));
        }
        let steps = match opts.duration {
            Some(d) if d > 0.0 => steps_for(d, dt),
            Some(d) => return Err(Error::param(format!("duration must be > 0, got {d}"))),
            None => input.steps(),
        };
        if opts.reset_state {
            self.reset();
        }
        let measure_start = steps_for(opts.burn_in.max(0.0), dt).min(steps);
        let record_steps = steps_for(opts.record_interval, dt).max(1);
        let learn_steps = opts
            .learn_window
            .map(|w| steps_for(w, dt).max(1))
            .unwrap_or(usize::MAX);

        let lif = self.cfg.lif;
        let mem_a = lif.decay();
        let err_lif = self.cfg.error_lif()?;
        let err_a = err_lif.decay();
        let psc_a = (-dt / self.cfg.tau_s).exp();
        let ema_a = (-dt / self.cfg.tau_r).exp();
        let exact = opts.learning && self.cfg.learning_mode == LearningMode::ExactStdp;
        let rate_mode = opts.learning && !exact;

        let mut trace = SimTrace {
            dt,
            steps,
            learning: opts.learning,
            coding_rates: Vec::new(),
            error_rates: Vec::new(),
            inner_loss_series: Vec::new(),
            window_steps: Vec::new(),
            spikes: LayerCounts::default(),
            fanout: Fanout::for_dims(n, m),
            weight_writes: 0,
            measure_start,
            coding_counts: vec![0; m],
            error_counts: vec![0; n],
            input_counts: vec![0; n],
            coding_current_mean: vec![0.0; m],
        };
        let mut rec_c = vec![0i64; m];
        let mut rec_e = vec![0i64; n];
        let mut rec_len = 0usize;
        let mut win = RateWindow::new(n, m);
        let mut c_prev: Vec<(u32, i8)> = Vec::new();

        for k in 0..steps {
            let s = input.frame(k);
            let weights = Arc::clone(&self.weights);

            error_drive_into(&weights, dt, s, &c_prev, &mut self.error.drive);
            self.error.step(psc_a, err_a, err_lif.mu);
            coding_drive_into(&weights, self.cfg.eta1, dt, s, &c_prev, &mut self.coding.drive);
            self.coding.step(psc_a, mem_a, lif.mu);

            if exact {
                lateral_drive_into(&weights, dt, s, &c_prev, &self.error.spikes, &mut self.lateral.drive);
                self.lateral.step(psc_a, mem_a, lif.mu);
                trace.spikes.lateral += self.lateral.spikes.len() as u64;
            }
            drop(weights);

            trace.spikes.input += s.len() as u64;
            trace.spikes.coding += self.coding.spikes.len() as u64;
            trace.spikes.error += self.error.spikes.len() as u64;
            for layer in [&mut self.coding, &mut self.error] {
                let g = (1.0 - ema_a) / dt;
                layer.ema.iter_mut().for_each(|r| *r *= ema_a);
                for &(i, p) in &layer.spikes {
                    layer.ema[i as usize] += g * p as f64;
                }
            }

            for &(i, p) in &self.coding.spikes {
                rec_c[i as usize] += p as i64;
            }
            for &(j, p) in &self.error.spikes {
                rec_e[j as usize] += p as i64;
            }
            rec_len += 1;
            if rec_len == record_steps || k + 1 == steps {
                let t = rec_len as f64 * dt;
                let rc: Vec<f64> = rec_c.iter().map(|&v| v as f64 / t).collect();
                let re: Vec<f64> = rec_e.iter().map(|&v| v as f64 / t).collect();
                trace.inner_loss_series.push(inner_loss(&re));
                trace.coding_rates.push(rc);
                trace.error_rates.push(re);
                trace.window_steps.push(rec_len);
                rec_c.iter_mut().for_each(|v| *v = 0);
                rec_e.iter_mut().for_each(|v| *v = 0);
                rec_len = 0;
            }

            if k >= measure_start {
                for &(i, p) in &self.coding.spikes {
                    trace.coding_counts[i as usize] += p as i64;
                }
                for &(j, p) in &self.error.spikes {
                    trace.error_counts[j as usize] += p as i64;
                }
                for &(j, p) in s {
                    trace.input_counts[j as usize] += p as i64;
                }
                for (acc, y) in trace.coding_current_mean.iter_mut().zip(&self.coding.psc) {
                    *acc += y;
                }
                if exact {
                    trace.weight_writes += self.exact_stdp_step()?;
                    self.weights_mut().check_finite(k)?;
                } else if rate_mode {
                    win.add(s, &self.coding.spikes, &self.error.spikes);
                    if win.steps == learn_steps || k + 1 == steps {
                        trace.weight_writes += self.rate_stdp_update(&win, dt)?;
                        self.weights_mut().check_finite(k)?;
                        win.clear();
                    }
                }
            }

            c_prev.clone_from(&self.coding.spikes);
        }

        let measured = steps - measure_start;
        if measured > 0 {
            trace
                .coding_current_mean
                .iter_mut()
                .for_each(|v| *v /= measured as f64);
        }
        if opts.learning {
            let w = self.weights_mut();
            w.phi.copy_from(&w.phi_fb);
        }
        Ok(trace)
    }

    fn weights_mut(&mut self) -> &mut NetworkWeights {
        Arc::make_mut(&mut self.weights)
    }

    /// On-line pairwise STDP for the current step. Returns weight writes.
    fn exact_stdp_step(&mut self) -> Result<u64> {
        let stdp = self.cfg.stdp;
        let eta2 = self.cfg.learn.eta2;
        let dt = self.cfg.dt();
        let (ap, am) = ((-dt / stdp.tau_plus).exp(), (-dt / stdp.tau_minus).exp());
        let decay = 1.0 - eta2 * self.cfg.learn.lambda2 * dt;
        let tied = self.cfg.tied;
        let (n, m) = (self.cfg.n as u64, self.cfg.m as u64);

        let Network {
            coding,
            error,
            lateral,
            weights,
            ..
        } = self;
        let w = Arc::make_mut(weights);
        for l in [&mut *coding, &mut *error, &mut *lateral] {
            l.x.iter_mut().for_each(|v| *v *= ap);
            l.y.iter_mut().for_each(|v| *v *= am);
        }
        if decay != 1.0 {
            w.phi_in.iter_mut().for_each(|v| *v *= decay);
            w.phi_fb.iter_mut().for_each(|v| *v *= decay);
            w.w_tilde.iter_mut().for_each(|v| *v *= decay);
        }
        let mut writes = 0;
        let dep = eta2 * stdp.a_minus;
        let pot = eta2 * stdp.a_plus;

        // depression: pre spikes against earlier post spikes
        for &(j, p) in &error.spikes {
            let mut col = w.phi_in.column_mut(j as usize);
            for (v, y) in col.iter_mut().zip(&coding.y) {
                *v += dep * p as f64 * y;
            }
            writes += m;
        }
        for &(i, p) in &coding.spikes {
            let mut col = w.phi_fb.column_mut(i as usize);
            for (v, y) in col.iter_mut().zip(&error.y) {
                *v += dep * p as f64 * y;
            }
            let mut col = w.w_tilde.column_mut(i as usize);
            for (v, y) in col.iter_mut().zip(&lateral.y) {
                *v += dep * p as f64 * y;
            }
            writes += n + m;
        }
        for &(j, p) in &error.spikes {
            error.x[j as usize] += p as f64;
        }
        for &(i, p) in &coding.spikes {
            coding.x[i as usize] += p as f64;
        }
        // potentiation: post spikes against pre spikes up to now
        for &(i, p) in &coding.spikes {
            let mut row = w.phi_in.row_mut(i as usize);
            for (v, x) in row.iter_mut().zip(&error.x) {
                *v -= pot * p as f64 * x;
            }
            writes += n;
        }
        for &(j, p) in &error.spikes {
            let mut row = w.phi_fb.row_mut(j as usize);
            for (v, x) in row.iter_mut().zip(&coding.x) {
                *v -= pot * p as f64 * x;
            }
            writes += m;
        }
        for &(i, p) in &lateral.spikes {
            let mut row = w.w_tilde.row_mut(i as usize);
            for (v, x) in row.iter_mut().zip(&coding.x) {
                *v -= pot * p as f64 * x;
            }
            writes += m;
        }
        for l in [&mut *coding, &mut *error, &mut *lateral] {
            for &(i, p) in &l.spikes {
                l.y[i as usize] += p as f64;
            }
        }
        if tied {
            tie(w);
        }
        Ok(writes)
    }

    /// Rate-model update from one window of signed counts.
    fn rate_stdp_update(&mut self, win: &RateWindow, dt: f64) -> Result<u64> {
        if win.steps == 0 {
            return Ok(0);
        }
        let t = win.steps as f64 * dt;
        let rc = win.coding.map(|v| v / t);
        let re = win.error.map(|v| v / t);
        let rs = win.input.map(|v| v / t);
        let g = self.cfg.learn.eta2 * self.cfg.stdp.dc_gain() * t;
        let keep = 1.0 - self.cfg.learn.eta2 * self.cfg.learn.lambda2 * t;
        let tied = self.cfg.tied;
        let w = self.weights_mut();
        let f = &w.w_tilde * &rc - &w.phi_in * (&re + &rs);
        w.phi_in = &w.phi_in * keep - g * &rc * re.transpose();
        w.phi_fb = &w.phi_fb * keep - g * &re * rc.transpose();
        w.w_tilde = &w.w_tilde * keep - g * f * rc.transpose();
        if tied {
            tie(w);
        }
        let (n, m) = (w.n() as u64, w.m() as u64);
        Ok(2 * n * m + m * m)
    }
}

fn tie(w: &mut NetworkWeights) {
    w.phi_in = w.phi_fb.transpose();
    w.w_tilde = w.phi_fb.transpose() * &w.phi_fb;
}

fn coding_drive_into(w: &NetworkWeights, eta1: f64, dt: f64, s: &Spikes, c: &Spikes, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let inv = 1.0 / dt;
    for &(j, p) in s {
        let g = eta1 * p as f64 * inv;
        for (o, v) in out.iter_mut().zip(w.phi_in.column(j as usize).iter()) {
            *o += g * v;
        }
    }
    for &(i, p) in c {
        let g = -eta1 * p as f64 * inv;
        for (o, v) in out.iter_mut().zip(w.w_tilde.column(i as usize).iter()) {
            *o += g * v;
        }
        out[i as usize] += p as f64 * inv;
    }
}

fn error_drive_into(w: &NetworkWeights, dt: f64, s: &Spikes, c: &Spikes, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let inv = 1.0 / dt;
    for &(i, p) in c {
        let g = p as f64 * inv;
        for (o, v) in out.iter_mut().zip(w.phi_fb.column(i as usize).iter()) {
            *o += g * v;
        }
    }
    for &(j, p) in s {
        out[j as usize] -= p as f64 * inv;
    }
}

fn lateral_drive_into(w: &NetworkWeights, dt: f64, s: &Spikes, c: &Spikes, e: &Spikes, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let inv = 1.0 / dt;
    for &(i, p) in c {
        let g = p as f64 * inv;
        for (o, v) in out.iter_mut().zip(w.w_tilde.column(i as usize).iter()) {
            *o += g * v;
        }
    }
    for &(j, p) in s.iter().chain(e) {
        let g = -(p as f64) * inv;
        for (o, v) in out.iter_mut().zip(w.phi_in.column(j as usize).iter()) {
            *o += g * v;
        }
    }
}

/// Signed counts of one rate-mode learning window.
struct RateWindow {
    coding: DVector<f64>,
    error: DVector<f64>,
    input: DVector<f64>,
    steps: usize,
}

impl RateWindow {
    fn new(n: usize, m: usize) -> Self {
        RateWindow {
            coding: DVector::zeros(m),
            error: DVector::zeros(n),
            input: DVector::zeros(n),
            steps: 0,
        }
    }

    fn add(&mut self, s: &Spikes, c: &Spikes, e: &Spikes) {
        for &(j, p) in s {
            self.input[j as usize] += p as f64;
        }
        for &(i, p) in c {
            self.coding[i as usize] += p as f64;
        }
        for &(j, p) in e {
            self.error[j as usize] += p as f64;
        }
        self.steps += 1;
    }

    fn clear(&mut self) {
        self.coding.fill(0.0);
        self.error.fill(0.0);
        self.input.fill(0.0);
        self.steps = 0;
    }
}
