//! The four campaigns behind the CLI: hypothesis audit, single-run
//! simulation, the `(alpha, epsilon)` rate sweep and the dissipation study.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    absorbing_entry, calibrate_c_f_shift, fit_decay_rate, h_norm_sq, lyapunov_e, state_energy,
    DecayFit, LyapunovParams,
};
use crate::dynamics::{integrate, lift_theta, run_difference, Params, State};
use crate::error::{Error, Result};
use crate::fit::RateFit;
use crate::harness::config::{Problem, Resolved, RunConfig};
use crate::harness::io::{write_json, write_snapshot, CsvWriter, DiagnosticsRow, DIAGNOSTICS_HEADER};
use crate::par::Execution;
use crate::potential::HypothesisReport;

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    pub override_hypotheses: bool,
    pub slope_threshold: Option<f64>,
    pub exec: Execution,
}

fn output_dir(config: &RunConfig, opts: &Options) -> Result<PathBuf> {
    let dir = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// The configuration as actually run, with derived defaults filled in.
fn resolved_config(r: &Resolved, dir: &Path) -> RunConfig {
    let mut c = r.config.clone();
    c.params.stabilizer = Some(r.params.stabilizer);
    c.output.directory = dir.display().to_string();
    c
}

pub fn audit(r: &Resolved) -> HypothesisReport {
    r.potential.verify_hypotheses(&r.kernel)
}

/// Write the audit and fail unless it passes or `override_hypotheses` is set.
fn gate(r: &Resolved, dir: &Path, opts: &Options) -> Result<HypothesisReport> {
    let report = audit(r);
    write_json(&dir.join("hypotheses.json"), &report)?;
    if let Some(err) = report.first_failure() {
        if !opts.override_hypotheses {
            return Err(err);
        }
        eprintln!("warning: proceeding despite failed hypothesis: {err}");
    }
    Ok(report)
}

/// Runs the audit and writes `hypotheses.json`; the caller decides on failures.
pub fn cmd_hypotheses(config: &RunConfig, opts: &Options) -> Result<HypothesisReport> {
    let r = config.resolve()?;
    let dir = output_dir(config, opts)?;
    let report = audit(&r);
    write_json(&dir.join("hypotheses.json"), &report)?;
    Ok(report)
}

pub fn lyapunov_params(r: &Resolved) -> Result<LyapunovParams> {
    let c_f_shift = calibrate_c_f_shift(
        &r.kernel,
        &r.potential,
        &r.params,
        r.lyapunov.xi,
        r.config.lyapunov.seed,
        r.config.lyapunov.samples,
    )?;
    Ok(LyapunovParams { c_f_shift, ..r.lyapunov })
}

/// Diagnostics of one state; `balance_residual` is history-dependent and
/// passed in.
pub fn diagnostics_row(
    r: &Resolved,
    lp: &LyapunovParams,
    state: &State,
    balance_residual: f64,
) -> Result<DiagnosticsRow> {
    let d = &r.domain;
    let (mean_theta, l2_theta) = match &state.theta {
        Some(th) => (d.mean(th), d.l2_norm(th)),
        None => (0.0, 0.0),
    };
    Ok(DiagnosticsRow {
        t: state.t,
        mean_phi: d.mean(&state.phi),
        mean_theta,
        l2_phi: d.l2_norm(&state.phi),
        vprime_phi: d.vprime_norm(&state.phi),
        l2_theta,
        energy: state_energy(state, &r.kernel, &r.potential, &r.params)?,
        balance_residual,
        lyapunov: lyapunov_e(state, &r.kernel, &r.potential, &r.params, lp)?,
        max_abs_phi: state.phi.max_abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub problem: Problem,
    pub steps: usize,
    pub t_final: f64,
    pub rows: usize,
    pub snapshots: usize,
    pub stabilizer: f64,
    pub c_f_shift: f64,
    pub max_abs_phi: f64,
    /// `max |phi|` left the range on which the hypotheses were checked.
    pub range_violation: bool,
    pub mean_phi_drift: f64,
    pub mean_theta_drift: f64,
    /// Largest single-step increase of the energy (0 when nonincreasing).
    pub max_energy_increase: f64,
    pub final_balance_residual: f64,
    pub max_balance_residual: f64,
    /// Smallest `C` with `|<mu>| <= C |<phi>| + delta0 |<theta>|` along the run.
    pub mean_potential_constant: f64,
}

struct Tracker {
    e_prev: f64,
    balance: crate::diagnostics::EnergyBalance,
    summary: SimulationSummary,
    mean_phi0: f64,
    mean_theta0: f64,
}

pub fn cmd_simulate(config: &RunConfig, opts: &Options) -> Result<SimulationSummary> {
    let r = config.resolve()?;
    let dir = output_dir(config, opts)?;
    write_json(&dir.join("config.json"), &resolved_config(&r, &dir))?;
    gate(&r, &dir, opts)?;
    let lp = lyapunov_params(&r)?;
    let state0 = r.initial_state(&config.initial.phi)?;
    let d = &r.domain;
    let stride = config.output.stride;
    let snap_stride = config.output.snapshot_stride;
    let n_steps = r.params.n_steps();

    let e0 = state_energy(&state0, &r.kernel, &r.potential, &r.params)?;
    let mut tr = Tracker {
        e_prev: e0,
        balance: crate::diagnostics::EnergyBalance::new(e0),
        summary: SimulationSummary {
            problem: config.problem,
            steps: 0,
            t_final: 0.0,
            rows: 0,
            snapshots: 0,
            stabilizer: r.params.stabilizer,
            c_f_shift: lp.c_f_shift,
            max_abs_phi: 0.0,
            range_violation: false,
            mean_phi_drift: 0.0,
            mean_theta_drift: 0.0,
            max_energy_increase: 0.0,
            final_balance_residual: 0.0,
            max_balance_residual: 0.0,
            mean_potential_constant: 0.0,
        },
        mean_phi0: d.mean(&state0.phi),
        mean_theta0: state0.theta.as_ref().map_or(0.0, |th| d.mean(th)),
    };
    let mut csv = CsvWriter::create(&dir.join("diagnostics.csv"), DIAGNOSTICS_HEADER)?;
    let mut last_good: Option<State> = None;

    let result = integrate(state0, &r.kernel, &r.potential, &r.params, |s| {
        let s_sum = &mut tr.summary;
        let energy = state_energy(s, &r.kernel, &r.potential, &r.params)?;
        let residual = if s.step == 0 {
            0.0
        } else {
            tr.balance.push(d, s, &r.params, energy)
        };
        s_sum.max_energy_increase = s_sum.max_energy_increase.max(energy - tr.e_prev);
        tr.e_prev = energy;
        s_sum.max_balance_residual = s_sum.max_balance_residual.max(residual);
        s_sum.final_balance_residual = residual;
        s_sum.max_abs_phi = s_sum.max_abs_phi.max(s.phi.max_abs());
        s_sum.mean_phi_drift = s_sum.mean_phi_drift.max((d.mean(&s.phi) - tr.mean_phi0).abs());
        if let Some(th) = &s.theta {
            s_sum.mean_theta_drift = s_sum.mean_theta_drift.max((d.mean(th) - tr.mean_theta0).abs());
        }
        let m_phi = d.mean(&s.phi).abs();
        if m_phi > 0.0 && s.step > 0 {
            let m_theta = s.theta.as_ref().map_or(0.0, |th| d.mean(th).abs());
            let c = ((d.mean(&s.mu).abs() - r.params.delta0 * m_theta) / m_phi).max(0.0);
            s_sum.mean_potential_constant = s_sum.mean_potential_constant.max(c);
        }
        if s.step % stride == 0 || s.step == n_steps {
            csv.row(&diagnostics_row(&r, &lp, s, residual)?.to_array())?;
            s_sum.rows += 1;
        }
        if snap_stride > 0 && (s.step % snap_stride == 0 || s.step == n_steps) {
            write_state(&dir, &r, s)?;
            s_sum.snapshots += 1;
        }
        s_sum.steps = s.step;
        s_sum.t_final = s.t;
        last_good = Some(s.clone());
        Ok(())
    });
    csv.finish()?;
    if let Err(e) = result {
        if matches!(e, Error::BlowUp { .. }) {
            if let Some(s) = &last_good {
                write_state(&dir, &r, s)?;
            }
            write_json(&dir.join("summary.json"), &tr.summary)?;
        }
        return Err(e);
    }
    let summary = tr.summary;
    if summary.max_abs_phi > r.potential.s_max {
        eprintln!(
            "warning: max |phi| = {} left the checked range [-{s}, {s}]",
            summary.max_abs_phi,
            s = r.potential.s_max
        );
    }
    let summary = SimulationSummary {
        range_violation: summary.max_abs_phi > r.potential.s_max,
        ..summary
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_state(dir: &Path, r: &Resolved, s: &State) -> Result<()> {
    write_snapshot(dir, "phi", &r.domain, &s.phi, s.t, s.step)?;
    if let Some(th) = &s.theta {
        write_snapshot(dir, "theta", &r.domain, th, s.t, s.step)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub alpha: f64,
    pub epsilon: f64,
    pub sup_d: f64,
    pub final_d: f64,
    pub integral_vprime_rate: f64,
    pub integral_alpha_rate: f64,
    pub integral_eps_theta_v: f64,
    pub sup_h_norm: f64,
    pub directory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub t_final: f64,
    pub pairs: Vec<PairSummary>,
    pub fit: RateFit,
    /// Exponent for the norm, half the fitted slope of the squared quantity.
    pub norm_rate: f64,
    pub slope_threshold: f64,
    pub r2_threshold: f64,
    /// Measured uniform bound `sup_t ||zeta||` over all pairs, used as `R`.
    pub uniform_bound: f64,
    pub warnings: Vec<String>,
    pub pass: bool,
}

pub fn cmd_converge(config: &RunConfig, opts: &Options) -> Result<ConvergeReport> {
    let r = config.resolve()?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("converge needs a sweep block".into()))?;
    let pairs = sweep.pairs()?;
    if pairs.iter().filter(|(a, e)| a + e > 0.0).count() < 3 {
        return Err(Error::Config("the sweep needs at least 3 points with alpha + epsilon > 0".into()));
    }
    for &(a, e) in &pairs {
        r.params.with_relaxation(a, e).validate()?;
    }
    let dir = output_dir(config, opts)?;
    write_json(&dir.join("config.json"), &resolved_config(&r, &dir))?;
    gate(&r, &dir, opts)?;

    let params = Params {
        t_final: sweep.t_final.unwrap_or(r.params.t_final),
        ..r.params
    };
    let phi0 = config.initial.phi.generate(&r.domain)?;
    if r.domain.mean(&phi0).abs() > params.m {
        return Err(Error::Config(format!("|<phi0>| exceeds m = {}", params.m)));
    }
    let theta0 = lift_theta(&phi0, &r.kernel, &r.potential, params.delta)?;
    let series = run_difference(&phi0, &theta0, &r.kernel, &r.potential, &params, &pairs, opts.exec)?;

    let mut summaries = Vec::with_capacity(series.len());
    for (i, s) in series.iter().enumerate() {
        let sub = dir.join("pairs").join(format!("pair_{i:02}"));
        fs::create_dir_all(&sub)?;
        let mut csv = CsvWriter::create(&sub.join("difference.csv"), "t,d,integral")?;
        for ((t, dv), iv) in s.times.iter().zip(&s.d).zip(&s.integral) {
            csv.row(&[*t, *dv, *iv])?;
        }
        csv.finish()?;
        summaries.push(PairSummary {
            alpha: s.alpha,
            epsilon: s.epsilon,
            sup_d: s.sup_d,
            final_d: s.d.last().copied().unwrap_or(0.0),
            integral_vprime_rate: s.integral_vprime_rate,
            integral_alpha_rate: s.integral_alpha_rate,
            integral_eps_theta_v: s.integral_eps_theta_v,
            sup_h_norm: s.sup_h_norm,
            directory: sub.display().to_string(),
        });
    }

    let points: Vec<(f64, f64)> = series.iter().map(|s| (s.alpha + s.epsilon, s.sup_d)).collect();
    let fit = RateFit::fit(&points)?;
    let mut warnings = Vec::new();
    for w in fit.points.windows(2) {
        if w[1].1 < w[0].1 {
            warnings.push(format!(
                "sup D is not monotone in alpha + epsilon between {:e} and {:e}",
                w[0].0, w[1].0
            ));
        }
    }
    let slope_threshold = opts.slope_threshold.unwrap_or(sweep.slope_threshold);
    let pass = fit.slope >= slope_threshold && fit.r2 >= sweep.r2_threshold;
    let report = ConvergeReport {
        t_final: params.t_final,
        norm_rate: 0.5 * fit.slope,
        uniform_bound: series.iter().map(|s| s.sup_h_norm).fold(0.0, f64::max),
        pairs: summaries,
        fit,
        slope_threshold,
        r2_threshold: sweep.r2_threshold,
        warnings,
        pass,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRun {
    pub amplitude: f64,
    pub initial_energy: f64,
    pub initial_lyapunov: f64,
    pub final_lyapunov: f64,
    /// `None` when the functional does not decrease (stationary start).
    pub decay: Option<DecayFit>,
    pub entry_time: Option<f64>,
    pub directory: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipateReport {
    pub t_final: f64,
    pub c_f_shift: f64,
    pub runs: Vec<AmplitudeRun>,
    /// `sup ||zeta||` over the last quarter of every run.
    pub long_time_bound: f64,
    pub radius: f64,
    /// Smallest fitted decay rate, used as `nu3`.
    pub nu3: Option<f64>,
    pub rates_positive: bool,
    pub entries_ordered: bool,
    pub pass: bool,
}

struct Sampled {
    times: Vec<f64>,
    energy: Vec<f64>,
    lyapunov: Vec<f64>,
    h_sq: Vec<f64>,
}

pub fn cmd_dissipate(config: &RunConfig, opts: &Options) -> Result<DissipateReport> {
    let r = config.resolve()?;
    let block = config
        .dissipate
        .as_ref()
        .ok_or_else(|| Error::Config("dissipate needs a dissipate block".into()))?;
    if block.amplitudes.is_empty() {
        return Err(Error::Config("dissipate needs at least one amplitude".into()));
    }
    let dir = output_dir(config, opts)?;
    write_json(&dir.join("config.json"), &resolved_config(&r, &dir))?;
    gate(&r, &dir, opts)?;
    let lp = lyapunov_params(&r)?;
    let params = Params {
        t_final: block.t_final,
        ..r.params
    };
    params.validate()?;
    let stride = config.output.stride;

    let sampled = opts.exec.try_map(&block.amplitudes, |&amp| {
        let state0 = r.initial_state(&config.initial.phi.with_amplitude(amp))?;
        let mut out = Sampled {
            times: Vec::new(),
            energy: Vec::new(),
            lyapunov: Vec::new(),
            h_sq: Vec::new(),
        };
        integrate(state0, &r.kernel, &r.potential, &params, |s| {
            out.times.push(s.t);
            out.energy.push(state_energy(s, &r.kernel, &r.potential, &params)?);
            out.lyapunov.push(lyapunov_e(s, &r.kernel, &r.potential, &params, &lp)?);
            out.h_sq
                .push(h_norm_sq(&r.domain, &s.phi, s.theta.as_ref(), params.alpha, params.epsilon));
            Ok(())
        })?;
        Ok::<_, Error>(out)
    })?;

    let long_time_bound = sampled
        .iter()
        .flat_map(|s| {
            let start = s.times.len() - s.times.len().div_ceil(4);
            s.h_sq[start..].iter().map(|h| h.sqrt())
        })
        .fold(0.0, f64::max);
    let radius = block.radius.unwrap_or(1.1 * long_time_bound);

    let mut runs = Vec::with_capacity(sampled.len());
    for (i, (s, &amp)) in sampled.iter().zip(&block.amplitudes).enumerate() {
        let sub = dir.join(format!("amplitude_{i:02}"));
        fs::create_dir_all(&sub)?;
        let mut csv = CsvWriter::create(&sub.join("energy.csv"), "t,energy,lyapunov,h_norm")?;
        for j in (0..s.times.len()).filter(|&j| j % stride == 0 || j + 1 == s.times.len()) {
            csv.row(&[s.times[j], s.energy[j], s.lyapunov[j], s.h_sq[j].sqrt()])?;
        }
        csv.finish()?;
        runs.push(AmplitudeRun {
            amplitude: amp,
            initial_energy: s.energy[0],
            initial_lyapunov: s.lyapunov[0],
            final_lyapunov: *s.lyapunov.last().unwrap(),
            decay: fit_decay_rate(&s.times, &s.lyapunov).ok(),
            entry_time: absorbing_entry(&s.times, &s.h_sq, radius),
            directory: sub.display().to_string(),
        });
    }

    let rates: Vec<f64> = runs.iter().filter_map(|r| r.decay.map(|d| d.rate)).collect();
    let rates_positive = !rates.is_empty() && rates.iter().all(|&x| x > 0.0);
    let nu3 = rates.iter().copied().reduce(f64::min);
    let mut by_amplitude: Vec<&AmplitudeRun> = runs.iter().collect();
    by_amplitude.sort_by(|a, b| a.amplitude.abs().total_cmp(&b.amplitude.abs()));
    let entries_ordered = by_amplitude.iter().all(|r| r.entry_time.is_some())
        && by_amplitude
            .windows(2)
            .all(|w| w[0].entry_time.unwrap() <= w[1].entry_time.unwrap());

    let report = DissipateReport {
        t_final: params.t_final,
        c_f_shift: lp.c_f_shift,
        runs,
        long_time_bound,
        radius,
        nu3,
        rates_positive,
        entries_ordered,
        pass: rates_positive && entries_ordered,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}
