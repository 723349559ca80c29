//! Run configuration: a hand-editable TOML file selecting one model, its
//! physical parameters, and the analysis pipeline options. Unknown keys are
//! rejected so typos fail loudly.

use serde::{Deserialize, Serialize};
use stoq_clock_core::adiabatic::{
    jump_rates, AdiabaticParams, JumpRates, NoiseMode, SdeRun,
};
use stoq_clock_core::sme::{CurrentConvention, FullSystemParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    FullSme,
    Bloch,
    Polar,
    Telegraph,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Model::FullSme => "full_sme",
            Model::Bloch => "bloch",
            Model::Polar => "polar",
            Model::Telegraph => "telegraph",
        };
        f.write_str(s)
    }
}

fn default_omega() -> f64 {
    1.0
}
fn default_chi_full() -> f64 {
    2.0
}
fn default_gamma_full() -> f64 {
    0.2
}
fn default_kappa() -> f64 {
    1.0
}
fn default_eta() -> f64 {
    0.2
}
fn default_e_drive() -> f64 {
    0.5 * std::f64::consts::PI
}
fn default_n_max() -> usize {
    12
}
fn default_dt() -> f64 {
    1e-3
}
fn default_duration_full() -> f64 {
    200.0
}
fn default_one() -> usize {
    1
}
fn default_pos_stride() -> usize {
    10
}

/// Full cavity–qubit model section. Defaults are the weak-measurement
/// operating point (χ=2, γ=0.2, κ=1, Ω=1 rad/µs, E = 2π·0.25, η=0.2).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullSmeSection {
    #[serde(default = "default_e_drive")]
    pub e_drive: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_chi_full")]
    pub chi: f64,
    #[serde(default = "default_gamma_full")]
    pub gamma: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration_full")]
    pub duration: f64,
    #[serde(default = "default_one")]
    pub record_stride: usize,
    #[serde(default = "default_pos_stride")]
    pub positivity_stride: usize,
    #[serde(default)]
    pub current_convention: CurrentConvention,
}

impl Default for FullSmeSection {
    fn default() -> Self {
        toml::from_str("").expect("empty section fills from field defaults")
    }
}

impl FullSmeSection {
    pub fn to_params(&self, seed: u64, stream: u64) -> FullSystemParams {
        FullSystemParams {
            e_drive: self.e_drive,
            omega: self.omega,
            chi: self.chi,
            gamma: self.gamma,
            kappa: self.kappa,
            eta: self.eta,
            n_max: self.n_max,
            dt: self.dt,
            duration: self.duration,
            seed,
            stream,
            record_stride: self.record_stride,
            positivity_stride: self.positivity_stride,
            current_convention: self.current_convention,
        }
    }
}

fn default_omega_bloch() -> f64 {
    2.0
}
fn default_chi_bloch() -> f64 {
    0.2
}
fn default_gamma_zero() -> f64 {
    0.0
}
fn default_n0() -> f64 {
    1.0
}
fn default_duration_bloch() -> f64 {
    500.0
}
fn default_start() -> [f64; 3] {
    [0.0, 0.0, -1.0]
}
fn default_theta0() -> f64 {
    std::f64::consts::FRAC_PI_2
}
fn default_phi0() -> f64 {
    std::f64::consts::FRAC_PI_2
}

/// Reduced Bloch-SDE section, parameterized by the physical knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSection {
    #[serde(default = "default_omega_bloch")]
    pub omega: f64,
    #[serde(default = "default_chi_bloch")]
    pub chi: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_gamma_zero")]
    pub gamma: f64,
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub efficiency_scaled_noise: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration_bloch")]
    pub duration: f64,
    #[serde(default = "default_one")]
    pub record_stride: usize,
    #[serde(default = "default_start")]
    pub start: [f64; 3],
}

impl Default for BlochSection {
    fn default() -> Self {
        toml::from_str("").expect("empty section fills from field defaults")
    }
}

impl BlochSection {
    pub fn to_params(&self) -> Result<AdiabaticParams, CliError> {
        let mut p = AdiabaticParams::from_physical(
            self.omega,
            self.chi,
            self.kappa,
            self.gamma,
            self.n0,
            self.eta,
        )?;
        p.efficiency_scaled_noise = self.efficiency_scaled_noise;
        Ok(p)
    }

    pub fn to_run(&self, seed: u64) -> SdeRun {
        SdeRun {
            dt: self.dt,
            duration: self.duration,
            seed,
            stream: 0,
            record_stride: self.record_stride,
        }
    }
}

/// Polar-coordinate SDE section.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSection {
    #[serde(default = "default_omega_bloch")]
    pub omega: f64,
    #[serde(default = "default_chi_bloch")]
    pub chi: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_gamma_zero")]
    pub gamma: f64,
    #[serde(default = "default_n0")]
    pub n0: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub efficiency_scaled_noise: bool,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_duration_bloch")]
    pub duration: f64,
    #[serde(default = "default_one")]
    pub record_stride: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "default_phi0")]
    pub phi0: f64,
}

impl Default for PolarSection {
    fn default() -> Self {
        toml::from_str("").expect("empty section fills from field defaults")
    }
}

impl PolarSection {
    pub fn to_params(&self) -> Result<AdiabaticParams, CliError> {
        let mut p = AdiabaticParams::from_physical(
            self.omega,
            self.chi,
            self.kappa,
            self.gamma,
            self.n0,
            self.eta,
        )?;
        p.efficiency_scaled_noise = self.efficiency_scaled_noise;
        Ok(p)
    }
}

fn default_duration_telegraph() -> f64 {
    10_000.0
}

/// Telegraph section: either explicit rates (mu, nu) or the physical triple
/// (omega, gamma_meas, gamma) from which mu = 4Ω²/(γ+2Γ), ν = γ+μ.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelegraphSection {
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub omega: Option<f64>,
    pub gamma_meas: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default = "default_duration_telegraph")]
    pub duration: f64,
}

impl Default for TelegraphSection {
    fn default() -> Self {
        toml::from_str("").expect("empty section fills from field defaults")
    }
}

impl TelegraphSection {
    pub fn to_rates(&self) -> Result<JumpRates, CliError> {
        let explicit = self.mu.is_some() || self.nu.is_some();
        let physical = self.omega.is_some() || self.gamma_meas.is_some();
        match (explicit, physical) {
            (true, true) => Err(CliError::Config(
                "telegraph: give either (mu, nu) or (omega, gamma_meas, gamma), not both".into(),
            )),
            (true, false) => {
                let mu = self.mu.ok_or_else(|| CliError::Config("telegraph: mu required".into()))?;
                let nu = self.nu.ok_or_else(|| CliError::Config("telegraph: nu required".into()))?;
                Ok(JumpRates::new(mu, nu)?)
            }
            (false, true) | (false, false) => {
                let omega = self
                    .omega
                    .ok_or_else(|| CliError::Config("telegraph: omega required".into()))?;
                let gm = self
                    .gamma_meas
                    .ok_or_else(|| CliError::Config("telegraph: gamma_meas required".into()))?;
                Ok(jump_rates(omega, gm, self.gamma.unwrap_or(0.0))?)
            }
        }
    }
}

/// Which regime's pipeline defaults apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Rabi,
    Jump,
}

fn default_overlap() -> f64 {
    0.5
}
fn default_poly_degree() -> usize {
    3
}
fn default_column() -> String {
    "x".into()
}
fn default_fs() -> f64 {
    1.0
}

/// Analysis pipeline options. The filter cutoff is `cutoff` (1/µs) when
/// given, otherwise `cutoff_multiplier × Ω` with the multiplier defaulting to
/// 1.0 in the Rabi regime and 2.5 in the jump regime.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub regime: Option<Regime>,
    pub cutoff_multiplier: Option<f64>,
    /// absolute cutoff in 1/µs; overrides the multiplier
    pub cutoff: Option<f64>,
    /// classification threshold; Otsu split when absent
    pub threshold: Option<f64>,
    /// periodogram segment length; 0 means the whole record
    #[serde(default)]
    pub segment_length: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default = "default_poly_degree")]
    pub poly_degree: usize,
    /// analyzed column: x | z | n | current (full model), X | Y | Z (Bloch)
    #[serde(default = "default_column")]
    pub column: String,
    /// decimation stride applied before the periodogram
    #[serde(default = "default_one")]
    pub psd_stride: usize,
    /// sampling rate assumed for inputs without a time column
    #[serde(default = "default_fs")]
    pub fs: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        toml::from_str("").expect("empty section fills from field defaults")
    }
}

fn default_n_trajectories() -> usize {
    1
}

/// One reproducible experiment definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub seed: u64,
    #[serde(default = "default_n_trajectories")]
    pub n_trajectories: usize,
    pub out_dir: Option<String>,
    #[serde(default)]
    pub full_sme: Option<FullSmeSection>,
    #[serde(default)]
    pub bloch: Option<BlochSection>,
    #[serde(default)]
    pub polar: Option<PolarSection>,
    #[serde(default)]
    pub telegraph: Option<TelegraphSection>,
    #[serde(default)]
    pub pipeline: Option<PipelineSection>,
}

impl RunConfig {
    pub fn full_sme(&self) -> FullSmeSection {
        self.full_sme.clone().unwrap_or_default()
    }

    pub fn bloch(&self) -> BlochSection {
        self.bloch.clone().unwrap_or_default()
    }

    pub fn polar(&self) -> PolarSection {
        self.polar.clone().unwrap_or_default()
    }

    pub fn telegraph(&self) -> TelegraphSection {
        self.telegraph.clone().unwrap_or_default()
    }

    pub fn pipeline(&self) -> PipelineSection {
        self.pipeline.clone().unwrap_or_default()
    }

    /// Qubit drive of the active model, the base for the filter cutoff.
    pub fn omega_hint(&self) -> f64 {
        match self.model {
            Model::FullSme => self.full_sme().omega,
            Model::Bloch => self.bloch().omega,
            Model::Polar => self.polar().omega,
            Model::Telegraph => self.telegraph().omega.unwrap_or(1.0),
        }
    }

    pub fn regime(&self) -> Regime {
        if let Some(r) = self.pipeline().regime {
            return r;
        }
        match self.model {
            Model::Telegraph => Regime::Jump,
            _ => Regime::Rabi,
        }
    }

    /// Low-pass cutoff in 1/µs: absolute override, or multiplier × Ω with
    /// the per-regime default multiplier (1.0 Rabi, 2.5 jump).
    pub fn cutoff(&self) -> f64 {
        let pipe = self.pipeline();
        if let Some(c) = pipe.cutoff {
            return c;
        }
        let mult = pipe.cutoff_multiplier.unwrap_or(match self.regime() {
            Regime::Rabi => 1.0,
            Regime::Jump => 2.5,
        });
        mult * self.omega_hint()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_trajectories == 0 {
            return Err(CliError::Config("n_trajectories must be >= 1".into()));
        }
        match self.model {
            Model::FullSme => {
                self.full_sme().to_params(self.seed, 0).validate()?;
            }
            Model::Bloch => {
                let b = self.bloch();
                b.to_params()?;
                if !(b.dt > 0.0) || !(b.duration > 0.0) {
                    return Err(CliError::Config("bloch: dt and duration must be > 0".into()));
                }
            }
            Model::Polar => {
                self.polar().to_params()?;
            }
            Model::Telegraph => {
                self.telegraph().to_rates()?;
            }
        }
        let pipe = self.pipeline();
        if !(0.0..1.0).contains(&pipe.overlap) {
            return Err(CliError::Config("pipeline.overlap must be in [0, 1)".into()));
        }
        if pipe.poly_degree > 6 {
            return Err(CliError::Config("pipeline.poly_degree must be <= 6".into()));
        }
        if pipe.psd_stride == 0 {
            return Err(CliError::Config("pipeline.psd_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Load and validate a config file.
pub fn config_load(path: &std::path::Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config_from_str(&text)
}

pub fn config_from_str(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
