use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, ensure, Context};
use serde_json::json;

use snn_dlbp::checkpoint::{load_weights, save_weights};
use snn_dlbp::config::load_network_config;
use snn_dlbp::descriptors::{action_descriptor, conv_descriptor, conv_encode_traced, global_descriptor, PatchGeometry};
use snn_dlbp::event_io::{load_events, poisson_stream, rasterize, spike_spectrum};
use snn_dlbp::network::{Network, NetworkConfig, NetworkWeights, SimOptions, SimTrace};
use snn_dlbp::neuron::{fit_prox_slope, prox_curve, LifParams};
use snn_dlbp::oracle::oracle_check;
use snn_dlbp::plasticity::{stdp_compare, ActivityProfile, StdpParams};
use snn_dlbp::power::{count_activity, estimate_power, ActivityCounts, HwParams};
use snn_dlbp::readout::{accuracy_with, apply_scaler, fit_scaler, train_linear, SvmOptions};
use snn_dlbp::synth::{bar_dataset, mix_seed, sparse_dictionary_dataset, BarSpec, SparseSpec};
use snn_dlbp::training::{train, TrainOptions};
use snn_dlbp::tuning::{
    akaike_pursuit, init_weights, kernel_flatness, kernel_spectrum, match_kernel, parse_grid, AkaikeOptions,
    StopRule,
};
use snn_dlbp::Exec;

use crate::args::*;
use crate::experiment::{ConvSection, ExperimentConfig};
use crate::io::{
    labelled, load_samples, presentation, raster, read_activity, read_features, write_activity, write_dataset,
    write_features, FeatureRow, Sample,
};
use crate::report::Report;

/// Safety factor applied to the initialization bound when no checkpoint is given.
pub const INIT_SAFETY: f64 = 0.5;

pub struct Ctx {
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub exec: Exec,
    outputs: Vec<String>,
}

impl Ctx {
    pub fn new(cli: &Cli) -> Self {
        let exec = match cli.threads {
            Some(1) => Exec::Sequential,
            Some(t) => {
                snn_dlbp::exec::set_threads(t);
                Exec::Parallel
            }
            None => Exec::Parallel,
        };
        Ctx {
            seed: cli.seed,
            config: cli.config.clone(),
            out_dir: cli.out_dir.clone(),
            exec,
            outputs: Vec::new(),
        }
    }

    /// Resolve an output path and make sure its directory exists.
    fn out(&mut self, p: &Path) -> anyhow::Result<PathBuf> {
        let path = if p.is_absolute() { p.to_path_buf() } else { self.out_dir.join(p) };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        self.outputs.push(path.display().to_string());
        Ok(path)
    }

    fn network(&self) -> anyhow::Result<NetworkConfig> {
        let path = self.config.as_ref().context("this command needs --config <network file>")?;
        load_network_config(path).with_context(|| format!("loading {}", path.display()))
    }

    fn report(&mut self, command: &str, results: serde_json::Value) -> Report {
        let mut r = Report::new(command, self.seed, results);
        r.outputs = std::mem::take(&mut self.outputs);
        r
    }
}

/// Checkpoint weights, or a fresh draw from the initialization bound.
pub fn weights_or_init(cfg: &NetworkConfig, path: Option<&Path>, seed: u64) -> anyhow::Result<NetworkWeights> {
    match path {
        Some(p) => {
            let w = load_weights(p).with_context(|| format!("loading {}", p.display()))?;
            w.check_dims(cfg.n, cfg.m)?;
            Ok(w)
        }
        None => Ok(NetworkWeights::from_phi(init_weights(cfg.n, cfg.m, cfg.eta1, INIT_SAFETY, seed)?)),
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Report> {
    let mut ctx = Ctx::new(&cli);
    match cli.command {
        Command::Events(c) => events(&mut ctx, c),
        Command::Neuron(NeuronCmd::ProxCurve {
            mu,
            jmin,
            jmax,
            steps,
            duration,
            dt,
            out,
        }) => {
            let p = LifParams::matched(mu, dt)?;
            let curve = prox_curve(&p, jmin, jmax, steps, duration, ctx.exec)?;
            let path = ctx.out(&out)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["j_in", "measured_rate", "taylor_rate"])?;
            for q in &curve {
                w.write_record(&[q.j_in.to_string(), q.measured.to_string(), q.taylor.to_string()])?;
            }
            w.flush()?;
            let fit = fit_prox_slope(&curve, 1.5 * mu, jmax);
            Ok(ctx.report(
                "neuron prox-curve",
                json!({
                    "points": curve.len(),
                    "fit_range": [1.5 * mu, jmax],
                    "slope": fit.map(|f| f.slope),
                    "r2": fit.map(|f| f.r2),
                }),
            ))
        }
        Command::Stdp(StdpCmd::Compare {
            steps,
            synapses,
            dt,
            eta2,
            active,
            rate_lo,
            rate_hi,
            out,
        }) => {
            let side = (synapses as f64).sqrt().round() as usize;
            ensure!(side * side == synapses && side > 0, "--synapses must be a positive perfect square");
            let profile = ActivityProfile {
                active,
                rate_lo,
                rate_hi,
            };
            let cmp = stdp_compare(side, side, steps, dt, &StdpParams::default(), eta2, &profile, ctx.seed, ctx.exec)?;
            let path = ctx.out(&out)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["exact", "rate"])?;
            for (a, b) in &cmp.pairs {
                w.write_record(&[a.to_string(), b.to_string()])?;
            }
            w.flush()?;
            Ok(ctx.report(
                "stdp compare",
                json!({"synapses": synapses, "mean_abs_diff": cmp.mean_abs_diff, "pearson": cmp.pearson}),
            ))
        }
        Command::Simulate(a) => simulate(&mut ctx, a),
        Command::Oracle(OracleCmd::Check {
            n,
            m,
            lambda1,
            seeds,
            report,
        }) => {
            let list: Vec<u64> = (0..seeds).map(|i| ctx.seed + i).collect();
            let rows = oracle_check(n, m, lambda1, &list, ctx.exec)?;
            let path = ctx.out(&report)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["seed", "ista_objective", "cd_objective", "gap", "monotone", "same_support", "kkt"])?;
            for r in &rows {
                w.write_record(&[
                    r.seed.to_string(),
                    r.ista_objective.to_string(),
                    r.cd_objective.to_string(),
                    r.gap.to_string(),
                    r.monotone.to_string(),
                    r.same_support.to_string(),
                    r.kkt.to_string(),
                ])?;
            }
            w.flush()?;
            Ok(ctx.report(
                "oracle check",
                json!({
                    "instances": rows.len(),
                    "max_gap": rows.iter().map(|r| r.gap).fold(0.0, f64::max),
                    "all_monotone": rows.iter().all(|r| r.monotone),
                    "same_support": rows.iter().filter(|r| r.same_support).count(),
                }),
            ))
        }
        Command::Tune(c) => tune(&mut ctx, c),
        Command::Encode(a) => encode(&mut ctx, a),
        Command::Classify(a) => classify(&mut ctx, a),
        Command::Power(a) => {
            let counts = read_activity(&a.trace)?;
            let hw = match &a.hw {
                Some(p) => HwParams::load(p).with_context(|| format!("loading {}", p.display()))?,
                None => HwParams::default(),
            };
            let watts = estimate_power(&counts, &hw)?;
            Ok(ctx.report("power", power_json(&counts, &hw, watts)))
        }
        Command::Train(a) => train_cmd(&mut ctx, a),
        Command::Pipeline(a) => pipeline(&mut ctx, a),
    }
}

fn power_json(c: &ActivityCounts, hw: &HwParams, watts: f64) -> serde_json::Value {
    json!({
        "watts": watts,
        "static_watts": hw.effective_p_stat(),
        "dynamic_watts": c.n_spikes as f64 * hw.effective_e_dyn() / c.t_p,
        "memory_watts": (c.n_read as f64 * hw.e_read + c.n_write as f64 * hw.e_write) / c.t_p,
        "counts": c,
        "hw": hw,
    })
}

fn events(ctx: &mut Ctx, cmd: EventsCmd) -> anyhow::Result<Report> {
    match cmd {
        EventsCmd::Info { file } => {
            let s = load_events(&file).with_context(|| format!("reading {}", file.display()))?;
            let on = s.events().iter().filter(|e| e.polarity > 0).count();
            Ok(ctx.report(
                "events info",
                json!({
                    "width": s.width(),
                    "height": s.height(),
                    "events": s.len(),
                    "on_events": on,
                    "off_events": s.len() - on,
                    "span_seconds": s.span_seconds(),
                }),
            ))
        }
        EventsCmd::Spectrum {
            file,
            pixel,
            dt,
            duration,
            out,
        } => {
            let s = load_events(&file).with_context(|| format!("reading {}", file.display()))?;
            let (x, y) = parse_pixel(&pixel)?;
            ensure!(x < s.width() && y < s.height(), "pixel {x},{y} outside {}x{}", s.width(), s.height());
            let trains = rasterize(&s, dt, presentation(&s, duration, dt))?;
            let train = &trains[s.index_of(x, y)];
            let spec = spike_spectrum(train)?;
            let path = ctx.out(&out)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["freq_hz", "magnitude", "db"])?;
            for i in 0..spec.freqs.len() {
                w.write_record(&[spec.freqs[i].to_string(), spec.magnitudes[i].to_string(), spec.db[i].to_string()])?;
            }
            w.flush()?;
            Ok(ctx.report(
                "events spectrum",
                json!({"pixel": [x, y], "spikes": train.spike_count(), "mean_rate": train.mean_rate(), "bins": spec.freqs.len()}),
            ))
        }
        EventsCmd::Synth {
            kind,
            count,
            duration,
            out,
        } => {
            let dir = ctx.out(&out)?;
            let samples: Vec<Sample> = match kind {
                SynthKind::Bars => {
                    let spec = BarSpec {
                        duration,
                        ..BarSpec::default()
                    };
                    let (streams, labels) = bar_dataset(&spec, count, ctx.seed)?;
                    streams
                        .into_iter()
                        .zip(labels)
                        .enumerate()
                        .map(|(i, (stream, label))| Sample {
                            name: format!("sample_{i:04}.evs"),
                            stream,
                            label: Some(label),
                        })
                        .collect()
                }
                SynthKind::Sparse => {
                    let data = sparse_dictionary_dataset(&SparseSpec::standard(count, ctx.seed))?;
                    let n = data.dictionary.nrows();
                    fs::create_dir_all(&dir)?;
                    let mut w = csv::Writer::from_path(dir.join("dictionary.csv"))?;
                    for i in 0..n {
                        w.write_record(data.dictionary.row(i).iter().map(|v| v.to_string()))?;
                    }
                    w.flush()?;
                    let mut w = csv::Writer::from_path(dir.join("codes.csv"))?;
                    for c in &data.codes {
                        w.write_record(c.iter().map(|v| v.to_string()))?;
                    }
                    w.flush()?;
                    data.signals
                        .iter()
                        .enumerate()
                        .map(|(i, sig)| {
                            let stream = poisson_stream(n as u16, 1, sig, duration, mix_seed(ctx.seed, i as u64))?;
                            Ok(Sample {
                                name: format!("sample_{i:04}.evs"),
                                stream,
                                label: None,
                            })
                        })
                        .collect::<anyhow::Result<_>>()?
                }
            };
            write_dataset(&dir, &samples)?;
            Ok(ctx.report(
                "events synth",
                json!({"kind": format!("{kind:?}").to_lowercase(), "samples": samples.len(), "directory": dir}),
            ))
        }
    }
}

fn parse_pixel(s: &str) -> anyhow::Result<(u16, u16)> {
    let (x, y) = s.split_once(',').context("--pixel must be x,y")?;
    Ok((x.trim().parse()?, y.trim().parse()?))
}

fn simulate(ctx: &mut Ctx, a: SimulateArgs) -> anyhow::Result<Report> {
    let cfg = ctx.network()?;
    let weights = weights_or_init(&cfg, a.weights.as_deref(), ctx.seed)?;
    let samples = load_samples(&a.events)?;
    ensure!(samples.len() == 1, "simulate takes one event file, got {} samples", samples.len());
    let input = raster(&samples[0], a.duration, cfg.lif.dt)?;
    let mut net = Network::new(cfg, Arc::new(weights))?;
    let opts = SimOptions {
        learning: a.learn,
        burn_in: a.burn_in,
        learn_window: a.learn_window,
        ..Default::default()
    };
    let t = net.simulate(&input, &opts)?;
    if let Some(p) = &a.trace {
        let path = ctx.out(p)?;
        write_trace(&path, &t)?;
    }
    let activity = count_activity(&t, a.learn);
    let path = ctx.out(&a.activity)?;
    write_activity(&path, &[activity])?;
    if let Some(p) = &a.save_weights {
        let path = ctx.out(p)?;
        save_weights(&path, &net.into_weights())?;
    }
    Ok(ctx.report(
        "simulate",
        json!({
            "duration": t.duration(),
            "inner_loss": t.inner_loss(),
            "coding_rates": t.coding_mean_rates(),
            "error_rates": t.error_mean_rates(),
            "spikes": {"input": t.spikes.input, "coding": t.spikes.coding, "error": t.spikes.error},
            "weight_writes": t.weight_writes,
        }),
    ))
}

/// One row per record window: end time, inner loss, coding then error rates.
fn write_trace(path: &Path, t: &SimTrace) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let m = t.coding_rates.first().map_or(0, |r| r.len());
    let n = t.error_rates.first().map_or(0, |r| r.len());
    let mut header = vec!["t_end".to_string(), "inner_loss".to_string()];
    header.extend((0..m).map(|i| format!("c{i}")));
    header.extend((0..n).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    let mut step = 0;
    for k in 0..t.coding_rates.len() {
        step += t.window_steps[k];
        let mut rec = vec![(step as f64 * t.dt).to_string(), t.inner_loss_series[k].to_string()];
        rec.extend(t.coding_rates[k].iter().map(|v| v.to_string()));
        rec.extend(t.error_rates[k].iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn tune(ctx: &mut Ctx, cmd: TuneCmd) -> anyhow::Result<Report> {
    match cmd {
        TuneCmd::Kernel {
            tau_minus,
            alpha,
            a_plus,
        } => {
            let p = match_kernel(tau_minus, alpha, a_plus)?;
            let spec = kernel_spectrum(&p, &[0.0]);
            Ok(ctx.report(
                "tune kernel",
                json!({
                    "params": p,
                    "zero": spec.zero,
                    "poles": [spec.poles.0, spec.poles.1],
                    "dc_gain": p.dc_gain(),
                    "flatness_0_2": kernel_flatness(&p, 0.2, 2001),
                }),
            ))
        }
        TuneCmd::Threshold {
            events,
            grid,
            weights,
            minibatch,
            duration,
            burn_in,
            error_mu,
            out,
        } => {
            let base = ctx.network()?;
            let w = weights_or_init(&base, weights.as_deref(), ctx.seed)?;
            let grid = parse_grid(&grid)?;
            let samples = load_samples(&events)?;
            let take = samples.len().min(minibatch);
            let rasters = samples[..take]
                .iter()
                .map(|s| raster(s, Some(duration), base.lif.dt))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let builder = |mu: f64| {
                let mut cfg = base.with_mu(mu)?;
                cfg.error_mu = error_mu.or(base.error_mu);
                Network::new(cfg, Arc::new(w.clone()))
            };
            let r = akaike_pursuit(builder, &rasters, &grid, &AkaikeOptions { duration, burn_in }, ctx.exec)?;
            let path = ctx.out(&out)?;
            let mut csvw = csv::Writer::from_path(&path)?;
            csvw.write_record(["mu", "aicc", "theta"])?;
            for i in 0..r.mu_grid.len() {
                csvw.write_record(&[r.mu_grid[i].to_string(), r.aicc[i].to_string(), r.theta[i].to_string()])?;
            }
            csvw.flush()?;
            Ok(ctx.report(
                "tune threshold",
                json!({"mu_hat": r.mu_hat, "tau_m": 1.0 / r.mu_hat, "sigma_z": r.sigma_z, "minibatch": take}),
            ))
        }
        TuneCmd::Spectrum {
            tau_plus,
            tau_minus,
            a_plus,
            a_minus,
            omega_max,
            points,
            out,
        } => {
            let p = StdpParams {
                a_plus,
                a_minus,
                tau_plus,
                tau_minus,
            };
            p.validate()?;
            ensure!(points >= 2, "--points must be at least 2");
            let top = omega_max.unwrap_or(1.0 / tau_minus);
            let omegas: Vec<f64> = (0..points).map(|k| top * k as f64 / (points - 1) as f64).collect();
            let spec = kernel_spectrum(&p, &omegas);
            let path = ctx.out(&out)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["omega", "magnitude"])?;
            for (o, m) in spec.omegas.iter().zip(&spec.magnitudes) {
                w.write_record(&[o.to_string(), m.to_string()])?;
            }
            w.flush()?;
            Ok(ctx.report(
                "tune spectrum",
                json!({"zero": spec.zero, "poles": [spec.poles.0, spec.poles.1], "flatness_0_2": kernel_flatness(&p, 0.2, 2001)}),
            ))
        }
    }
}

pub struct Encoded {
    pub rows: Vec<FeatureRow>,
    pub activity: Vec<ActivityCounts>,
}

#[allow(clippy::too_many_arguments)]
pub fn encode_samples(
    samples: &[Sample],
    cfg: &NetworkConfig,
    weights: &Arc<NetworkWeights>,
    mode: Mode,
    conv: &ConvSection,
    duration: Option<f64>,
    burn_in: f64,
    exec: Exec,
) -> anyhow::Result<Encoded> {
    let opts = SimOptions {
        burn_in,
        ..Default::default()
    };
    let per_sample = exec.try_map_range(samples.len(), |i| -> anyhow::Result<(FeatureRow, Vec<ActivityCounts>)> {
        let s = &samples[i];
        let input = raster(s, duration, cfg.lif.dt)?;
        let (values, traces) = match mode {
            Mode::Global | Mode::Action => {
                let mut net = Network::new(cfg.clone(), Arc::clone(weights))?;
                let t = net.simulate(&input, &opts)?;
                let f = match mode {
                    Mode::Global => global_descriptor(&t.coding_mean_rates())?,
                    _ => action_descriptor(&t.coding_rates)?,
                };
                (f.values, vec![t])
            }
            Mode::Conv => {
                let geom = PatchGeometry {
                    width: s.stream.width() as usize,
                    height: s.stream.height() as usize,
                    patch_w: conv.patch_w,
                    patch_h: conv.patch_h,
                    stride: conv.stride,
                };
                let (tensor, traces) = conv_encode_traced(&input, &geom, cfg, weights, &opts, exec)?;
                (conv_descriptor(&tensor, &conv.scales)?.values, traces)
            }
        };
        let row = FeatureRow {
            sample: s.name.clone(),
            label: s.label,
            values,
        };
        Ok((row, traces.iter().map(|t| count_activity(t, false)).collect()))
    })?;
    let mut rows = Vec::with_capacity(per_sample.len());
    let mut activity = Vec::new();
    for (r, a) in per_sample {
        rows.push(r);
        activity.extend(a);
    }
    Ok(Encoded { rows, activity })
}

fn parse_scales(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad scale {p:?}")))
        .collect()
}

fn encode(ctx: &mut Ctx, a: EncodeArgs) -> anyhow::Result<Report> {
    let cfg = ctx.network()?;
    let w = Arc::new(weights_or_init(&cfg, a.weights.as_deref(), ctx.seed)?);
    let samples = load_samples(&a.events)?;
    ensure!(!samples.is_empty(), "no event files in {}", a.events.display());
    let conv = ConvSection {
        patch_w: a.conv.patch_w,
        patch_h: a.conv.patch_h,
        stride: a.conv.stride,
        scales: parse_scales(&a.conv.scales)?,
    };
    let enc = encode_samples(&samples, &cfg, &w, a.mode, &conv, a.duration, a.burn_in, ctx.exec)?;
    let path = ctx.out(&a.out)?;
    write_features(&path, &enc.rows)?;
    Ok(ctx.report(
        "encode",
        json!({
            "mode": a.mode,
            "samples": enc.rows.len(),
            "features": enc.rows.first().map_or(0, |r| r.values.len()),
            "labelled": enc.rows.iter().all(|r| r.label.is_some()),
        }),
    ))
}

pub struct Evaluation {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub classes: usize,
}

pub fn fit_and_score(
    train_x: &[Vec<f64>],
    train_y: &[usize],
    test_x: &[Vec<f64>],
    test_y: &[usize],
    svm: &SvmOptions,
    exec: Exec,
) -> anyhow::Result<Evaluation> {
    let scaler = fit_scaler(train_x)?;
    let xtr = apply_scaler(&scaler, train_x)?;
    let model = train_linear(&xtr, train_y, svm)?;
    Ok(Evaluation {
        accuracy: accuracy_with(&model, &apply_scaler(&scaler, test_x)?, test_y, exec)?,
        train_accuracy: accuracy_with(&model, &xtr, train_y, exec)?,
        classes: model.classes(),
    })
}

fn classify(ctx: &mut Ctx, a: ClassifyArgs) -> anyhow::Result<Report> {
    let (xtr, ytr) = labelled(&read_features(&a.train)?, "training features")?;
    let (xte, yte) = labelled(&read_features(&a.test)?, "test features")?;
    let svm = SvmOptions {
        epochs: a.epochs,
        reg: a.reg,
        seed: ctx.seed,
    };
    let e = fit_and_score(&xtr, &ytr, &xte, &yte, &svm, ctx.exec)?;
    Ok(ctx.report(
        "classify",
        json!({
            "accuracy": e.accuracy,
            "train_accuracy": e.train_accuracy,
            "classes": e.classes,
            "n_train": ytr.len(),
            "n_test": yte.len(),
        }),
    ))
}

fn train_cmd(ctx: &mut Ctx, a: TrainArgs) -> anyhow::Result<Report> {
    let cfg = ctx.network()?;
    let init = weights_or_init(&cfg, a.weights.as_deref(), ctx.seed)?;
    let samples = load_samples(&a.events)?;
    let dt = cfg.lif.dt;
    let duration = a.duration.unwrap_or_else(|| {
        samples
            .iter()
            .map(|s| presentation(&s.stream, None, dt))
            .fold(dt, f64::max)
    });
    ensure!(duration > a.burn_in, "presentation {duration} s must exceed burn-in {} s", a.burn_in);
    let rasters = samples
        .iter()
        .map(|s| raster(s, Some(duration), dt))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let stop = match a.eps {
        Some(eps) => StopRule { n_eps: a.n_eps, eps },
        None => StopRule {
            n_eps: a.n_eps,
            ..StopRule::spike_quantum(duration - a.burn_in)?
        },
    };
    let opts = TrainOptions {
        max_epochs: a.epochs,
        stop,
        burn_in: a.burn_in,
        learn_window: a.learn_window,
    };
    let t0 = Instant::now();
    let r = train(&cfg, init, &rasters, &opts, ctx.exec)?;
    let secs = t0.elapsed().as_secs_f64();

    let ckpt = ctx.out(&a.checkpoint)?;
    save_weights(&ckpt, &r.weights)?;
    let loss = ctx.out(&a.loss)?;
    let mut w = csv::Writer::from_path(&loss)?;
    w.write_record(["epoch", "validation_loss", "train_loss"])?;
    for (e, v) in r.validation_loss.iter().enumerate() {
        let tr = if e == 0 { String::new() } else { r.train_loss[e - 1].to_string() };
        w.write_record(&[e.to_string(), v.to_string(), tr])?;
    }
    w.flush()?;
    let activity = ActivityCounts {
        n_spikes: r.spikes,
        n_read: 0,
        n_write: r.weight_writes,
        t_p: (r.epochs * rasters.len().saturating_sub(rasters.len() / 10)) as f64 * duration,
    };
    let mut report = ctx.report(
        "train",
        json!({
            "epochs": r.epochs,
            "stopped": r.stopped,
            "stop_rule": opts.stop,
            "initial_validation_loss": r.validation_loss[0],
            "final_validation_loss": r.validation_loss[r.validation_loss.len() - 1],
            "weight_writes": r.weight_writes,
            "training_spikes": r.spikes,
            "training_seconds_simulated": activity.t_p,
        }),
    );
    report.timing = json!({"train": secs});
    Ok(report)
}

fn pipeline(ctx: &mut Ctx, a: PipelineArgs) -> anyhow::Result<Report> {
    let exp = ExperimentConfig::load(&a.experiment)?;
    exp.check_inputs()?;
    let cfg = load_network_config(&exp.network).with_context(|| format!("loading {}", exp.network.display()))?;
    let weights = load_weights(&exp.weights).with_context(|| format!("loading {}", exp.weights.display()))?;
    weights.check_dims(cfg.n, cfg.m)?;
    let hw = match &exp.hw {
        Some(p) => HwParams::load(p)?,
        None => HwParams::default(),
    };
    if let Some(seed) = exp.seed {
        ctx.seed = seed;
    }
    if let Some(dir) = &exp.out_dir {
        ctx.out_dir = dir.clone();
    }
    let train_set = load_samples(&exp.train)?;
    let test_set = load_samples(&exp.test)?;
    for (what, set) in [("train", &train_set), ("test", &test_set)] {
        ensure!(!set.is_empty(), "{what} dataset is empty");
        if let Some(s) = set.iter().find(|s| s.label.is_none()) {
            bail!("{what} sample {} has no label", s.name);
        }
    }
    if a.dry_run {
        return Ok(ctx.report(
            "pipeline",
            json!({"dry_run": true, "mode": exp.mode, "n_train": train_set.len(), "n_test": test_set.len()}),
        ));
    }

    let w = Arc::new(weights);
    let t0 = Instant::now();
    let enc_train = encode_samples(&train_set, &cfg, &w, exp.mode, &exp.conv, exp.duration, exp.burn_in, ctx.exec)?;
    let enc_test = encode_samples(&test_set, &cfg, &w, exp.mode, &exp.conv, exp.duration, exp.burn_in, ctx.exec)?;
    let encode_secs = t0.elapsed().as_secs_f64();
    let (xtr, ytr) = labelled(&enc_train.rows, "train")?;
    let (xte, yte) = labelled(&enc_test.rows, "test")?;
    let t1 = Instant::now();
    let svm = SvmOptions {
        epochs: exp.svm.epochs,
        reg: exp.svm.reg,
        seed: ctx.seed,
    };
    let eval = fit_and_score(&xtr, &ytr, &xte, &yte, &svm, ctx.exec)?;
    let classify_secs = t1.elapsed().as_secs_f64();

    let mut total = ActivityCounts::default();
    for c in &enc_test.activity {
        total.n_spikes += c.n_spikes;
        total.n_read += c.n_read;
        total.n_write += c.n_write;
        total.t_p += c.t_p;
    }
    let watts = estimate_power(&total, &hw)?;

    let p = ctx.out(Path::new("train_features.csv"))?;
    write_features(&p, &enc_train.rows)?;
    let p = ctx.out(Path::new("test_features.csv"))?;
    write_features(&p, &enc_test.rows)?;
    let report_path = ctx.out(Path::new("report.json"))?;
    let mut report = ctx.report(
        "pipeline",
        json!({
            "dry_run": false,
            "mode": exp.mode,
            "n_train": ytr.len(),
            "n_test": yte.len(),
            "classes": eval.classes,
            "accuracy": eval.accuracy,
            "train_accuracy": eval.train_accuracy,
            "inference_power": power_json(&total, &hw, watts),
        }),
    );
    report.timing = json!({"encode": encode_secs, "classify": classify_secs});
    fs::write(&report_path, report.to_json()?)?;
    Ok(report)
}
