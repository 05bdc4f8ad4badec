//! Time integration of the viscous non-isothermal relaxation problem, its
//! isothermal non-viscous limit, the lift between them, and the
//! trajectory-difference runner.
//!
//! Both steppers are first-order stabilized IMEX schemes. The nonlocal and
//! nonlinear part `r(phi) = a phi - J * phi + F'(phi)` is explicit, while
//! viscosity, the stabilizer `S` and the heat coupling are implicit and
//! diagonal in the cosine basis. For the relaxation problem each mode solves
//! the 2x2 system
//!
//! ```text
//! (1 + alpha l + dt S l) dphi - dt l delta theta' = -dt l r_k
//!  delta dphi + (eps + dt l) theta'              =  eps theta_k
//! ```
//!
//! where `l = lambda_k`, `dphi` is the increment of `phi` and `theta'` the
//! new temperature. The zero mode has `l = 0`, so `<phi>` and `<theta>` are
//! carried over unchanged.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::error::{Error, Result};
use crate::kernel::KernelData;
use crate::par::Execution;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta0: f64,
    /// Bound on `|<phi>|` and `|<theta>|`.
    pub m: f64,
    pub dt: f64,
    pub t_final: f64,
    pub stabilizer: f64,
}

impl Params {
    /// `alpha == epsilon == 0` selects the limit problem.
    pub fn is_limit(&self) -> bool {
        self.alpha == 0.0 && self.epsilon == 0.0
    }

    pub fn with_relaxation(&self, alpha: f64, epsilon: f64) -> Params {
        Params { alpha, epsilon, ..*self }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be nonnegative, got {}", self.t_final));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!(
                "alpha and epsilon must lie in [0, 1], got ({}, {})",
                self.alpha, self.epsilon
            ));
        }
        if self.epsilon == 0.0 && self.alpha > 0.0 {
            return bad("epsilon = 0 with alpha > 0 is not supported; the temperature mean would be undetermined".into());
        }
        if !(self.delta0 > 0.0) || !(0.0..=self.delta0).contains(&self.delta) {
            return bad(format!(
                "need 0 <= delta <= delta0 and delta0 > 0, got delta = {}, delta0 = {}",
                self.delta, self.delta0
            ));
        }
        if !(self.stabilizer >= 0.0 && self.stabilizer.is_finite()) {
            return bad(format!("stabilizer must be nonnegative, got {}", self.stabilizer));
        }
        if !(self.m >= 0.0) {
            return bad(format!("m must be nonnegative, got {}", self.m));
        }
        Ok(())
    }
}

/// Snapshot `zeta = (phi, theta)` plus the chemical potential and discrete
/// rate of the step that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub step: usize,
    pub phi: Field,
    /// `None` for the limit problem.
    pub theta: Option<Field>,
    pub mu: Field,
    pub phi_t: Field,
}

impl State {
    /// Initial relaxation state; `mu` is the explicit potential and the rate is zero.
    pub fn relaxation(
        phi: Field,
        theta: Field,
        kernel: &KernelData,
        potential: &PotentialSpec,
        params: &Params,
    ) -> Result<State> {
        kernel.domain().check(&theta)?;
        let mu = chemical_potential_explicit(&phi, Some(&theta), kernel, potential, params)?;
        let n = phi.len();
        Ok(State {
            t: 0.0,
            step: 0,
            phi,
            theta: Some(theta),
            mu,
            phi_t: Field::zeros(n),
        })
    }

    pub fn limit(phi: Field, kernel: &KernelData, potential: &PotentialSpec) -> Result<State> {
        let mu = nonlocal_potential(&phi, kernel, potential)?;
        let n = phi.len();
        Ok(State {
            t: 0.0,
            step: 0,
            phi,
            theta: None,
            mu,
            phi_t: Field::zeros(n),
        })
    }

    pub fn is_limit(&self) -> bool {
        self.theta.is_none()
    }
}

/// `r(phi) = a phi - J * phi + F'(phi)`.
pub fn nonlocal_potential(phi: &Field, kernel: &KernelData, potential: &PotentialSpec) -> Result<Field> {
    let b = kernel.nonlocal_operator(phi)?;
    Ok(b.zip_map(phi, |bv, p| bv + potential.df(p)))
}

/// `r(phi) - delta theta`; the viscous part `alpha phi_t` is left to the
/// implicit solve.
pub fn chemical_potential_explicit(
    phi: &Field,
    theta: Option<&Field>,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
) -> Result<Field> {
    let r = nonlocal_potential(phi, kernel, potential)?;
    Ok(match theta {
        Some(th) => {
            kernel.domain().check(th)?;
            r.zip_map(th, |rv, t| rv - params.delta * t)
        }
        None => r,
    })
}

/// Cosine coefficients of `f - f_0`; constants have exactly zero coefficients
/// and the zero mode never enters the updates.
fn shifted_coefficients(domain: &Domain, f: &Field) -> Vec<f64> {
    let c = f.values()[0];
    domain.forward(&f.map(|v| v - c))
}

fn check_finite(next: &State, prev: &State) -> Result<()> {
    let finite = next.phi.is_finite() && next.theta.as_ref().map_or(true, Field::is_finite);
    if finite {
        Ok(())
    } else {
        Err(Error::BlowUp {
            t: next.t,
            max_abs_phi: prev.phi.max_abs(),
        })
    }
}

/// One step of the relaxation problem (`epsilon > 0`).
pub fn step_relaxation(
    s: &State,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
) -> Result<State> {
    let theta = s
        .theta
        .as_ref()
        .ok_or_else(|| Error::Config("relaxation step needs a temperature field".into()))?;
    if !(params.epsilon > 0.0) {
        return Err(Error::Config(
            "relaxation step requires epsilon > 0; use the limit problem and the lift".into(),
        ));
    }
    let domain = kernel.domain();
    let Params {
        alpha,
        epsilon,
        delta,
        dt,
        stabilizer,
        ..
    } = *params;

    let r = nonlocal_potential(&s.phi, kernel, potential)?;
    let rk = shifted_coefficients(domain, &r);
    let tk = shifted_coefficients(domain, theta);

    let n = domain.n_cells();
    let mut dphi_k = vec![0.0; n];
    let mut dtheta_k = vec![0.0; n];
    for (k, &lam) in domain.eigenvalues().iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let a11 = 1.0 + alpha * lam + dt * stabilizer * lam;
        let a22 = epsilon + dt * lam;
        let det = a11 * a22 + dt * lam * delta * delta;
        let x = (-dt * lam * rk[k] * a22 + dt * lam * delta * epsilon * tk[k]) / det;
        let y = (a11 * epsilon * tk[k] + delta * dt * lam * rk[k]) / det;
        dphi_k[k] = x;
        dtheta_k[k] = y - tk[k];
    }
    let dphi = domain.inverse(&dphi_k);
    let dtheta = domain.inverse(&dtheta_k);

    let phi = s.phi.add(&dphi);
    let theta_next = theta.add(&dtheta);
    let phi_t = dphi.scale(1.0 / dt);
    let mu = Field::new(
        r.values()
            .iter()
            .zip(theta_next.values())
            .zip(phi_t.values())
            .zip(dphi.values())
            .map(|(((rv, th), pt), dp)| rv - delta * th + alpha * pt + stabilizer * dp)
            .collect(),
    );
    let next = State {
        t: (s.step + 1) as f64 * dt,
        step: s.step + 1,
        phi,
        theta: Some(theta_next),
        mu,
        phi_t,
    };
    check_finite(&next, s)?;
    Ok(next)
}

/// One step of the limit problem `(1 + delta^2) phi_t = -A_N mu`.
pub fn step_limit(
    s: &State,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
) -> Result<State> {
    if s.theta.is_some() {
        return Err(Error::Config("limit step expects a state without temperature".into()));
    }
    let domain = kernel.domain();
    let Params {
        delta,
        dt,
        stabilizer,
        ..
    } = *params;
    let r = nonlocal_potential(&s.phi, kernel, potential)?;
    let rk = shifted_coefficients(domain, &r);
    let relax = 1.0 + delta * delta;
    let dphi_k: Vec<f64> = rk
        .iter()
        .zip(domain.eigenvalues())
        .map(|(&c, &lam)| {
            if lam == 0.0 {
                0.0
            } else {
                -dt * lam * c / (relax + dt * stabilizer * lam)
            }
        })
        .collect();
    let dphi = domain.inverse(&dphi_k);
    let phi = s.phi.add(&dphi);
    let phi_t = dphi.scale(1.0 / dt);
    let mu = r.zip_map(&dphi, |rv, dp| rv + stabilizer * dp);
    let next = State {
        t: (s.step + 1) as f64 * dt,
        step: s.step + 1,
        phi,
        theta: None,
        mu,
        phi_t,
    };
    check_finite(&next, s)?;
    Ok(next)
}

/// Dispatch on the kind of state.
pub fn step(s: &State, kernel: &KernelData, potential: &PotentialSpec, params: &Params) -> Result<State> {
    if s.is_limit() {
        step_limit(s, kernel, potential, params)
    } else {
        step_relaxation(s, kernel, potential, params)
    }
}

/// Canonical extension `theta0 = delta mu0`, `mu0 = a phi0 - J * phi0 + F'(phi0)`.
pub fn lift_theta(phi0: &Field, kernel: &KernelData, potential: &PotentialSpec, delta: f64) -> Result<Field> {
    Ok(nonlocal_potential(phi0, kernel, potential)?.scale(delta))
}

/// Embed a limit-problem state into the relaxation phase space.
pub fn lift(state: &State, kernel: &KernelData, potential: &PotentialSpec, params: &Params) -> Result<State> {
    let mu0 = nonlocal_potential(&state.phi, kernel, potential)?;
    let theta = mu0.scale(params.delta);
    Ok(State {
        t: state.t,
        step: state.step,
        phi: state.phi.clone(),
        theta: Some(theta),
        mu: mu0,
        phi_t: state.phi_t.clone(),
    })
}

/// Integrate up to `params.t_final`, calling `observe` on the initial state
/// and after every step. Returns the final state.
pub fn integrate(
    initial: State,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    mut observe: impl FnMut(&State) -> Result<()>,
) -> Result<State> {
    params.validate()?;
    observe(&initial)?;
    let mut state = initial;
    for _ in 0..params.n_steps() {
        state = step(&state, kernel, potential, params)?;
        observe(&state)?;
    }
    Ok(state)
}

/// Every state of a run at uniform `dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

pub fn run(initial: State, kernel: &KernelData, potential: &PotentialSpec, params: &Params) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(params.n_steps() + 1);
    integrate(initial, kernel, potential, params, |s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(Trajectory { dt: params.dt, states })
}

/// Time series of the trajectory difference between the relaxation problem
/// and the lifted limit problem for one `(alpha, epsilon)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferenceSeries {
    pub alpha: f64,
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `D(t) = ||phi~||_{V'}^2 + alpha ||phi~||^2 + epsilon ||theta~||^2`.
    pub d: Vec<f64>,
    /// Running value of the dissipation integral in the trajectory estimate.
    pub integral: Vec<f64>,
    pub sup_d: f64,
    /// `int ||phi~_t||_{V'}^2`.
    pub integral_vprime_rate: f64,
    /// `int alpha ||phi~_t||^2`.
    pub integral_alpha_rate: f64,
    /// `int epsilon ||theta~||_V^2`.
    pub integral_eps_theta_v: f64,
    /// `sup_t` of the relaxation solution's phase-space norm.
    pub sup_h_norm: f64,
}

impl DifferenceSeries {
    pub fn total_integral(&self) -> f64 {
        self.integral.last().copied().unwrap_or(0.0)
    }

    pub fn d_at_zero(&self) -> f64 {
        self.d.first().copied().unwrap_or(0.0)
    }
}

struct LimitRecord {
    phi: Vec<Field>,
    phi_t: Vec<Field>,
    theta_lift: Vec<Field>,
    times: Vec<f64>,
}

fn record_limit(
    phi0: &Field,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
) -> Result<LimitRecord> {
    let limit_params = params.with_relaxation(0.0, 0.0);
    let mut rec = LimitRecord {
        phi: Vec::new(),
        phi_t: Vec::new(),
        theta_lift: Vec::new(),
        times: Vec::new(),
    };
    integrate(
        State::limit(phi0.clone(), kernel, potential)?,
        kernel,
        potential,
        &limit_params,
        |s| {
            // the lifted temperature is defined pointwise in time from phi0
            rec.theta_lift.push(lift_theta(&s.phi, kernel, potential, params.delta)?);
            rec.phi.push(s.phi.clone());
            rec.phi_t.push(s.phi_t.clone());
            rec.times.push(s.t);
            Ok(())
        },
    )?;
    Ok(rec)
}

fn difference_for_pair(
    phi0: &Field,
    theta0: &Field,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    (alpha, epsilon): (f64, f64),
    limit: &LimitRecord,
) -> Result<DifferenceSeries> {
    let domain = kernel.domain();
    let dt = params.dt;
    let pair_params = params.with_relaxation(alpha, epsilon);
    pair_params.validate()?;

    let mut times = Vec::with_capacity(limit.times.len());
    let mut d = Vec::with_capacity(limit.times.len());
    let mut integral = Vec::with_capacity(limit.times.len());
    let (mut i_vp, mut i_alpha, mut i_theta) = (0.0, 0.0, 0.0);
    let mut prev_theta_v: Option<f64> = None;
    let mut sup_h = 0.0_f64;

    let mut record = |idx: usize, phi: &Field, theta: &Field, phi_t: &Field| {
        let phi_diff = phi.sub(&limit.phi[idx]);
        let theta_diff = theta.sub(&limit.theta_lift[idx]);
        let dv = domain.vprime_norm_sq(&phi_diff)
            + alpha * domain.inner(&phi_diff, &phi_diff)
            + epsilon * domain.inner(&theta_diff, &theta_diff);
        let theta_v = epsilon * domain.v_norm_sq(&theta_diff);
        let h = domain.vprime_norm_sq(phi) + alpha * domain.inner(phi, phi) + epsilon * domain.inner(theta, theta);
        sup_h = sup_h.max(h.sqrt());
        if idx > 0 {
            // rates are constant on each step; the temperature term is nodal
            let rate_diff = phi_t.sub(&limit.phi_t[idx]);
            i_vp += dt * domain.vprime_norm_sq(&rate_diff);
            i_alpha += dt * alpha * domain.inner(&rate_diff, &rate_diff);
            i_theta += 0.5 * dt * (prev_theta_v.unwrap_or(theta_v) + theta_v);
        }
        prev_theta_v = Some(theta_v);
        times.push(limit.times[idx]);
        d.push(dv);
        integral.push(i_vp + i_alpha + i_theta);
    };

    if alpha == 0.0 && epsilon == 0.0 {
        // the limit problem compared against itself
        for idx in 0..limit.times.len() {
            record(idx, &limit.phi[idx], &limit.theta_lift[idx], &limit.phi_t[idx]);
        }
    } else {
        let initial = State::relaxation(phi0.clone(), theta0.clone(), kernel, potential, &pair_params)?;
        integrate(initial, kernel, potential, &pair_params, |s| {
            let theta = s.theta.as_ref().expect("relaxation state");
            record(s.step, &s.phi, theta, &s.phi_t);
            Ok(())
        })?;
    }

    let sup_d = d.iter().cloned().fold(0.0_f64, f64::max);
    Ok(DifferenceSeries {
        alpha,
        epsilon,
        times,
        d,
        integral,
        sup_d,
        integral_vprime_rate: i_vp,
        integral_alpha_rate: i_alpha,
        integral_eps_theta_v: i_theta,
        sup_h_norm: sup_h,
    })
}

/// Integrate the limit problem once and every relaxation problem in
/// `schedule` on the same grid, step and horizon, and measure the
/// difference to the lifted limit trajectory. `theta0` should be the lift of
/// `phi0` for the difference to start at zero.
pub fn run_difference(
    phi0: &Field,
    theta0: &Field,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    schedule: &[(f64, f64)],
    exec: Execution,
) -> Result<Vec<DifferenceSeries>> {
    params.validate()?;
    kernel.domain().check(phi0)?;
    kernel.domain().check(theta0)?;
    let limit = record_limit(phi0, kernel, potential, params)?;
    exec.try_map(schedule, |&pair| {
        difference_for_pair(phi0, theta0, kernel, potential, params, pair, &limit)
    })
}

/// Evolve `phi0` along the limit flow for time `t` with step `dt`.
///
/// Data with a nonconstant `a` generally has a chemical potential that does
/// not satisfy the Neumann condition, which produces an initial layer in
/// `phi_t`. A short pre-relaxation yields well-prepared data whose rates are
/// resolved uniformly in the step size.
pub fn prepare(
    phi0: &Field,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    t: f64,
    dt: f64,
) -> Result<Field> {
    let prep = Params {
        alpha: 0.0,
        epsilon: 0.0,
        dt,
        t_final: t,
        ..*params
    };
    let last = integrate(State::limit(phi0.clone(), kernel, potential)?, kernel, potential, &prep, |_| Ok(()))?;
    Ok(last.phi)
}

/// `int ||phi_tt||_{V'}^2 dt` from second differences of snapshots stored at
/// uniform `dt` (trapezoid over the interior nodes, so the integral starts at
/// `t = dt`).
pub fn second_difference_bound(domain: &Domain, phis: &[Field], dt: f64) -> Result<f64> {
    if phis.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "second differences need at least 3 snapshots, got {}",
            phis.len()
        )));
    }
    let values: Vec<f64> = phis
        .windows(3)
        .map(|w| {
            let tt = Field::new(
                w[0].values()
                    .iter()
                    .zip(w[1].values())
                    .zip(w[2].values())
                    .map(|((a, b), c)| (c - 2.0 * b + a) / (dt * dt))
                    .collect(),
            );
            domain.vprime_norm_sq(&tt)
        })
        .collect();
    if values.len() == 1 {
        return Ok(0.0);
    }
    Ok(values
        .windows(2)
        .map(|w| 0.5 * dt * (w[0] + w[1]))
        .sum())
}
