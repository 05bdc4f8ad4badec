//! Energies, the energy-balance residual, phase-space norms, the Lyapunov
//! functional of the dissipation estimate and absorbing-set bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Field};
use crate::dynamics::{Params, State, Trajectory};
use crate::error::{Error, Result};
use crate::fit::{line_fit, LineFit};
use crate::kernel::KernelData;
use crate::potential::PotentialSpec;

/// `int_Omega F(phi)`.
pub fn potential_integral(domain: &Domain, potential: &PotentialSpec, phi: &Field) -> f64 {
    domain.quad_weight() * phi.values().iter().map(|&s| potential.f(s)).sum::<f64>()
}

/// `E_eps = 1/4 int int J (phi(x) - phi(y))^2 + int F(phi) + eps/2 ||theta||^2`.
///
/// The limit energy is the same expression without temperature.
pub fn energy_epsilon(
    phi: &Field,
    theta: Option<&Field>,
    kernel: &KernelData,
    potential: &PotentialSpec,
    epsilon: f64,
) -> Result<f64> {
    let domain = kernel.domain();
    let mut e = kernel.interaction_energy(phi)? + potential_integral(domain, potential, phi);
    if let Some(th) = theta {
        domain.check(th)?;
        if epsilon != 0.0 {
            e += 0.5 * epsilon * domain.inner(th, th);
        }
    }
    Ok(e)
}

pub fn state_energy(state: &State, kernel: &KernelData, potential: &PotentialSpec, params: &Params) -> Result<f64> {
    energy_epsilon(&state.phi, state.theta.as_ref(), kernel, potential, params.epsilon)
}

/// Dissipation rate over the step that produced `state`:
/// `||grad mu||^2 + alpha ||phi_t||^2 + ||grad theta||^2`, or
/// `||grad mu||^2 / (1 + delta^2)` for the limit problem.
pub fn dissipation_rate(domain: &Domain, state: &State, params: &Params) -> f64 {
    let grad_mu = domain.grad_norm_sq(&state.mu);
    match &state.theta {
        Some(th) => grad_mu + params.alpha * domain.inner(&state.phi_t, &state.phi_t) + domain.grad_norm_sq(th),
        None => grad_mu / (1.0 + params.delta * params.delta),
    }
}

/// Streaming energy balance `|E(t) + int_0^t dissipation - E(0)|`.
///
/// The rate is piecewise constant in time (one value per step), so the
/// integral is exact for the discrete trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    e0: f64,
    integral: f64,
}

impl EnergyBalance {
    pub fn new(e0: f64) -> Self {
        EnergyBalance { e0, integral: 0.0 }
    }

    /// Account for the step that produced `state`; returns the residual at its time.
    pub fn push(&mut self, domain: &Domain, state: &State, params: &Params, energy: f64) -> f64 {
        self.integral += params.dt * dissipation_rate(domain, state, params);
        self.residual(energy)
    }

    pub fn residual(&self, energy: f64) -> f64 {
        (energy + self.integral - self.e0).abs()
    }

    pub fn dissipated(&self) -> f64 {
        self.integral
    }
}

pub fn energy_balance_residual(
    trajectory: &Trajectory,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
) -> Result<Vec<f64>> {
    let domain = kernel.domain();
    let mut out = Vec::with_capacity(trajectory.states.len());
    let mut balance: Option<EnergyBalance> = None;
    for s in &trajectory.states {
        let e = state_energy(s, kernel, potential, params)?;
        match balance.as_mut() {
            None => {
                balance = Some(EnergyBalance::new(e));
                out.push(0.0);
            }
            Some(b) => out.push(b.push(domain, s, params, e)),
        }
    }
    Ok(out)
}

/// Squared phase-space norm `||phi||_{V'}^2 + alpha ||phi||^2 + eps ||theta||^2`.
pub fn h_norm_sq(domain: &Domain, phi: &Field, theta: Option<&Field>, alpha: f64, epsilon: f64) -> f64 {
    let mut s = domain.vprime_norm_sq(phi);
    if alpha != 0.0 {
        s += alpha * domain.inner(phi, phi);
    }
    if let (Some(th), true) = (theta, epsilon != 0.0) {
        s += epsilon * domain.inner(th, th);
    }
    s
}

pub fn h_norm(domain: &Domain, state: &State, params: &Params) -> f64 {
    h_norm_sq(domain, &state.phi, state.theta.as_ref(), params.alpha, params.epsilon).sqrt()
}

/// Metric of the energy phase space: norm of the difference plus
/// `|int F(phi1) - int F(phi2)|^{1/2}`.
pub fn x_metric(
    domain: &Domain,
    z1: (&Field, Option<&Field>),
    z2: (&Field, Option<&Field>),
    potential: &PotentialSpec,
    params: &Params,
) -> Result<f64> {
    domain.check(z1.0)?;
    domain.check(z2.0)?;
    let dphi = z1.0.sub(z2.0);
    let dtheta = match (z1.1, z2.1) {
        (Some(a), Some(b)) => Some(a.sub(b)),
        (Some(a), None) => Some(a.clone()),
        (None, Some(b)) => Some(b.scale(-1.0)),
        (None, None) => None,
    };
    let norm = h_norm_sq(domain, &dphi, dtheta.as_ref(), params.alpha, params.epsilon).sqrt();
    let df = potential_integral(domain, potential, z1.0) - potential_integral(domain, potential, z2.0);
    Ok(norm + df.abs().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParams {
    pub xi: f64,
    pub tau: f64,
    pub c_f_shift: f64,
    /// Decay rate candidate; replaced by the fitted value after a run.
    pub nu3: f64,
}

impl Default for LyapunovParams {
    fn default() -> Self {
        LyapunovParams {
            xi: 0.1,
            tau: 0.05,
            c_f_shift: 0.0,
            nu3: 1.0,
        }
    }
}

impl LyapunovParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau && self.tau < self.xi && self.xi < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < tau < xi < 1, got tau = {}, xi = {}",
                self.tau, self.xi
            )));
        }
        if !(self.nu3 > 0.0) || !(self.c_f_shift >= 0.0) {
            return Err(Error::Config(format!(
                "need nu3 > 0 and c_f_shift >= 0, got {} and {}",
                self.nu3, self.c_f_shift
            )));
        }
        Ok(())
    }
}

/// `E` without the additive constant:
/// `xi ||phi^||_{V'}^2 + xi alpha ||phi^||^2 + (a phi, phi) + eps ||theta^||^2
///  + 2 int F(phi) - (J * phi, phi^)`, hats denoting mean-free parts.
pub fn lyapunov_unshifted(
    phi: &Field,
    theta: Option<&Field>,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    xi: f64,
) -> Result<f64> {
    let domain = kernel.domain();
    let phi_hat = domain.mean_free(phi);
    let a_phi = Field::new(
        kernel
            .a_field()
            .values()
            .iter()
            .zip(phi.values())
            .map(|(a, p)| a * p)
            .collect(),
    );
    let j_phi = kernel.convolve(phi)?;
    let mut e = xi * domain.vprime_norm_sq(&phi_hat)
        + domain.inner(&a_phi, phi)
        + 2.0 * potential_integral(domain, potential, phi)
        - domain.inner(&j_phi, &phi_hat);
    if params.alpha != 0.0 {
        e += xi * params.alpha * domain.inner(&phi_hat, &phi_hat);
    }
    if let (Some(th), true) = (theta, params.epsilon != 0.0) {
        domain.check(th)?;
        let th_hat = domain.mean_free(th);
        e += params.epsilon * domain.inner(&th_hat, &th_hat);
    }
    Ok(e)
}

pub fn lyapunov_e(
    state: &State,
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    lp: &LyapunovParams,
) -> Result<f64> {
    Ok(lyapunov_unshifted(&state.phi, state.theta.as_ref(), kernel, potential, params, lp.xi)? + lp.c_f_shift)
}

/// `max(0, -min E_unshifted) + 1` over `count` seeded random states with
/// `|phi| <= s_max` and `|theta| <= 1`.
pub fn calibrate_c_f_shift(
    kernel: &KernelData,
    potential: &PotentialSpec,
    params: &Params,
    xi: f64,
    seed: u64,
    count: usize,
) -> Result<f64> {
    let n = kernel.domain().n_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lowest = f64::INFINITY;
    for _ in 0..count {
        let phi = Field::new((0..n).map(|_| rng.gen_range(-potential.s_max..=potential.s_max)).collect());
        let theta = Field::new((0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        let e = lyapunov_unshifted(&phi, Some(&theta), kernel, potential, params, xi)?;
        lowest = lowest.min(e);
    }
    Ok((-lowest).max(0.0) + 1.0)
}

/// First time after which `h_sq` stays at or below `radius^2`; `None` if the
/// last sample is still outside.
pub fn absorbing_entry(times: &[f64], h_sq: &[f64], radius: f64) -> Option<f64> {
    let r2 = radius * radius;
    let mut entry = None;
    for (&t, &h) in times.iter().zip(h_sq).rev() {
        if h <= r2 {
            entry = Some(t);
        } else {
            break;
        }
    }
    entry
}

/// Exponential fit `E(t) - E_inf ~ C exp(-rate t)` on the transient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub r2: f64,
    pub e_inf: f64,
    pub points: usize,
    pub t_end: f64,
}

/// Fits `ln(E - E_inf)` against `t`, with `E_inf` the last sample, over the
/// first half of the horizon and while the excess is above `1e-8` of its
/// initial value.
pub fn fit_decay_rate(times: &[f64], energies: &[f64]) -> Result<DecayFit> {
    let (Some(&e_inf), Some(&t_last)) = (energies.last(), times.last()) else {
        return Err(Error::InsufficientData("empty energy series".into()));
    };
    let excess0 = energies[0] - e_inf;
    if !(excess0 > 0.0) {
        return Err(Error::InsufficientData("energy does not decrease on the horizon".into()));
    }
    let t0 = times[0];
    let horizon = t0 + 0.5 * (t_last - t0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(energies)
        .take_while(|(&t, _)| t <= horizon)
        .filter(|(_, &e)| e - e_inf > 1e-8 * excess0)
        .map(|(&t, &e)| (t, (e - e_inf).ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!("decay fit needs 3 points, got {}", xs.len())));
    }
    let LineFit { slope, r2, .. } = line_fit(&xs, &ys)?;
    Ok(DecayFit {
        rate: -slope,
        r2,
        e_inf,
        points: xs.len(),
        t_end: *xs.last().unwrap(),
    })
}

/// Smallest constant with `|<mu>| <= C |<phi>| + delta0 |<theta>|` along the
/// given states (0 when `<phi> = 0` throughout).
pub fn mean_potential_constant(domain: &Domain, states: &[State], delta0: f64) -> f64 {
    states
        .iter()
        .filter_map(|s| {
            let m = domain.mean(&s.phi).abs();
            let n = s.theta.as_ref().map_or(0.0, |th| domain.mean(th).abs());
            let excess = domain.mean(&s.mu).abs() - delta0 * n;
            (m > 0.0).then(|| (excess / m).max(0.0))
        })
        .fold(0.0, f64::max)
}
