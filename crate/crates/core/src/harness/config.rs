//! Run configuration (JSON) and initial-data generators.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::LyapunovParams;
use crate::domain::{Domain, Field};
use crate::dynamics::{lift_theta, Params, State};
use crate::error::{Error, Result};
use crate::kernel::{KernelData, KernelShape};
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    #[default]
    Relaxation,
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    #[serde(flatten)]
    pub shape: KernelShape,
    /// Rescale the amplitude so that `c_J` equals this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_to_cj: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialConfig {
    #[serde(default = "default_family")]
    pub family: String,
    #[serde(flatten)]
    pub spec: PotentialSpec,
}

fn default_family() -> String {
    "double_well".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub delta0: f64,
    pub m: f64,
    pub dt: f64,
    pub t_final: f64,
    /// `None` selects `max F'' + 1` over the sampled range.
    #[serde(default)]
    pub stabilizer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineMode {
    pub k: Vec<usize>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialField {
    Homogeneous {
        value: f64,
    },
    CosineModes {
        #[serde(default)]
        mean: f64,
        modes: Vec<CosineMode>,
    },
    /// Random cosine coefficients with `1 <= |k|_inf <= cutoff`, damped by
    /// `1 / (1 + |k|^2)` and scaled to `max |f - mean| = amplitude`.
    SeededRandom {
        seed: u64,
        amplitude: f64,
        #[serde(default)]
        mean: f64,
        cutoff: usize,
    },
    /// Temperature only: `theta0 = delta mu0(phi0)`.
    Lift,
}

impl InitialField {
    pub fn generate(&self, domain: &Domain) -> Result<Field> {
        match self {
            InitialField::Homogeneous { value } => Ok(domain.constant(*value)),
            InitialField::CosineModes { mean, modes } => {
                let mut f = domain.constant(*mean);
                for m in modes {
                    if m.k.len() != domain.dim() {
                        return Err(Error::Config(format!(
                            "cosine mode {:?} does not match dimension {}",
                            m.k,
                            domain.dim()
                        )));
                    }
                    if m.k.iter().zip(domain.n()).any(|(&k, &n)| k >= n) {
                        return Err(Error::Config(format!("cosine mode {:?} exceeds the grid", m.k)));
                    }
                    f = f.add(&domain.cosine_mode(&m.k).scale(m.amplitude));
                }
                Ok(f)
            }
            InitialField::SeededRandom {
                seed,
                amplitude,
                mean,
                cutoff,
            } => {
                let [n0, n1] = domain.shape2();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut coeffs = vec![0.0; domain.n_cells()];
                let kmax1 = if domain.dim() == 2 { (*cutoff).min(n1 - 1) } else { 0 };
                for k0 in 0..=(*cutoff).min(n0 - 1) {
                    for k1 in 0..=kmax1 {
                        if k0 == 0 && k1 == 0 {
                            continue;
                        }
                        let damp = 1.0 / (1.0 + (k0 * k0 + k1 * k1) as f64);
                        coeffs[k0 * n1 + k1] = rng.gen_range(-1.0..=1.0) * damp;
                    }
                }
                let f = domain.inverse(&coeffs);
                let peak = f.max_abs();
                if peak == 0.0 {
                    return Err(Error::Config("seeded_random needs cutoff >= 1".into()));
                }
                Ok(f.map(|v| mean + amplitude * v / peak))
            }
            InitialField::Lift => Err(Error::Config("lift is only valid for the temperature".into())),
        }
    }

    /// Same generator with its fluctuation amplitude replaced.
    pub fn with_amplitude(&self, amplitude: f64) -> InitialField {
        match self {
            InitialField::SeededRandom { seed, mean, cutoff, .. } => InitialField::SeededRandom {
                seed: *seed,
                amplitude,
                mean: *mean,
                cutoff: *cutoff,
            },
            InitialField::CosineModes { mean, modes } => {
                let peak: f64 = modes.iter().map(|m| m.amplitude.abs()).sum();
                let s = if peak > 0.0 { amplitude / peak } else { 0.0 };
                InitialField::CosineModes {
                    mean: *mean,
                    modes: modes
                        .iter()
                        .map(|m| CosineMode {
                            k: m.k.clone(),
                            amplitude: m.amplitude * s,
                        })
                        .collect(),
                }
            }
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    pub phi: InitialField,
    #[serde(default = "lift")]
    pub theta: InitialField,
}

fn lift() -> InitialField {
    InitialField::Lift
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: String,
    /// Diagnostics row every `stride` steps.
    pub stride: usize,
    /// Snapshot every `snapshot_stride` steps; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPoints {
    Pairs(Vec<(f64, f64)>),
    /// Diagonal `alpha = epsilon` on a log grid from `from` to `to`.
    LogGrid { from: f64, to: f64, points: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: SweepPoints,
    /// Horizon of the sweep runs; defaults to `params.t_final`.
    #[serde(default)]
    pub t_final: Option<f64>,
    #[serde(default = "default_slope_threshold")]
    pub slope_threshold: f64,
    #[serde(default = "default_r2_threshold")]
    pub r2_threshold: f64,
}

fn default_slope_threshold() -> f64 {
    0.9
}

fn default_r2_threshold() -> f64 {
    0.95
}

impl SweepConfig {
    pub fn pairs(&self) -> Result<Vec<(f64, f64)>> {
        match &self.points {
            SweepPoints::Pairs(p) => Ok(p.clone()),
            SweepPoints::LogGrid { from, to, points } => {
                if *points < 2 || !(*from > 0.0 && *to > 0.0) {
                    return Err(Error::Config(
                        "log grid needs positive endpoints and at least 2 points".into(),
                    ));
                }
                let (a, b) = (from.log10(), to.log10());
                Ok((0..*points)
                    .map(|i| {
                        let v = 10f64.powf(a + (b - a) * i as f64 / (*points - 1) as f64);
                        (v, v)
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipateConfig {
    pub amplitudes: Vec<f64>,
    pub t_final: f64,
    /// Absorbing-ball radius; defaults to 1.1 times the measured long-time bound.
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_lyapunov_samples")]
    pub samples: usize,
}

fn default_xi() -> f64 {
    0.1
}

fn default_tau() -> f64 {
    0.05
}

fn default_lyapunov_samples() -> usize {
    100
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            xi: default_xi(),
            tau: default_tau(),
            seed: 0,
            samples: default_lyapunov_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: Problem,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub potential: PotentialConfig,
    pub params: ParamsConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dissipate: Option<DissipateConfig>,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
}

/// Everything a command needs, built and validated from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub domain: Domain,
    pub kernel: KernelData,
    pub potential: PotentialSpec,
    pub params: Params,
    pub lyapunov: LyapunovParams,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    /// Build the domain and kernel only; kernel failures surface as (H1).
    pub fn build_domain(&self) -> Result<Domain> {
        let d = &self.domain;
        if d.lengths.len() != d.dim || d.n.len() != d.dim {
            return Err(Error::Config(format!(
                "domain.dim = {} but {} lengths and {} sizes given",
                d.dim,
                d.lengths.len(),
                d.n.len()
            )));
        }
        Domain::new(&d.lengths, &d.n)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let domain = self.build_domain()?;
        if self.potential.family != "double_well" {
            return Err(Error::Config(format!(
                "unknown potential family {:?}; only double_well is available",
                self.potential.family
            )));
        }
        let potential = self.potential.spec;
        if !(potential.s_max > 0.0) || potential.samples < 3 {
            return Err(Error::Config("potential needs s_max > 0 and at least 3 samples".into()));
        }
        self.kernel.shape.validate()?;
        let kernel = match self.kernel.scale_to_cj {
            Some(target) => KernelData::build_scaled(&domain, self.kernel.shape, target)?,
            None => KernelData::build(&domain, self.kernel.shape)?,
        };
        let p = &self.params;
        let (alpha, epsilon) = match self.problem {
            Problem::Relaxation => (p.alpha, p.epsilon),
            Problem::Limit => (0.0, 0.0),
        };
        let params = Params {
            alpha,
            epsilon,
            delta: p.delta,
            delta0: p.delta0,
            m: p.m,
            dt: p.dt,
            t_final: p.t_final,
            stabilizer: p.stabilizer.unwrap_or_else(|| potential.default_stabilizer()),
        };
        params.validate()?;
        if self.problem == Problem::Relaxation && !(epsilon > 0.0) {
            return Err(Error::Config("the relaxation problem needs epsilon > 0".into()));
        }
        if self.output.stride == 0 {
            return Err(Error::Config("output.stride must be at least 1".into()));
        }
        let lyapunov = LyapunovParams {
            xi: self.lyapunov.xi,
            tau: self.lyapunov.tau,
            ..LyapunovParams::default()
        };
        lyapunov.validate()?;
        Ok(Resolved {
            config: self.clone(),
            domain,
            kernel,
            potential,
            params,
            lyapunov,
        })
    }
}

impl Resolved {
    /// Initial state of the configured problem, with the mean constraint
    /// `|<phi>|, |<theta>| <= m` enforced.
    pub fn initial_state(&self, phi: &InitialField) -> Result<State> {
        let phi0 = phi.generate(&self.domain)?;
        let check_mean = |name: &str, f: &Field| {
            let mean = self.domain.mean(f);
            if mean.abs() > self.params.m {
                Err(Error::Config(format!(
                    "|<{name}>| = {} exceeds m = {}",
                    mean.abs(),
                    self.params.m
                )))
            } else {
                Ok(())
            }
        };
        check_mean("phi", &phi0)?;
        match self.config.problem {
            Problem::Limit => State::limit(phi0, &self.kernel, &self.potential),
            Problem::Relaxation => {
                let theta0 = match &self.config.initial.theta {
                    InitialField::Lift => lift_theta(&phi0, &self.kernel, &self.potential, self.params.delta)?,
                    other => other.generate(&self.domain)?,
                };
                check_mean("theta", &theta0)?;
                State::relaxation(phi0, theta0, &self.kernel, &self.potential, &self.params)
            }
        }
    }
}
