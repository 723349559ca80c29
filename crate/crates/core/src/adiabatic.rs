//! Reduced qubit models with the cavity adiabatically eliminated: derived
//! rates, conditional Bloch SDEs, the polar first-passage picture, and the
//! strong-measurement telegraph process.
//!
//! With the steady cavity amplitude α₀ = −2iE/κ and n₀ = |α₀|², the reduced
//! description is parameterized by g = χ√n₀ (coupling), Δ = χn₀ (Stark
//! shift), Γ = 4g²/κ (measurement dephasing), and γ₂ = γ/2 + 2Γ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::noise::NoiseStream;
use crate::signal::{PeriodMeta, PeriodSet};
use crate::sme::FullSystemParams;

/// Rates of the reduced (cavity-eliminated) qubit model, rad/µs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdiabaticParams {
    /// Qubit drive amplitude Ω.
    pub omega: f64,
    /// Stark shift Δ = χn₀.
    pub delta: f64,
    /// Measurement dephasing rate Γ = 4g²/κ.
    pub gamma_meas: f64,
    /// Qubit amplitude damping rate γ.
    pub gamma: f64,
    /// Transverse decay rate γ₂ = γ/2 + 2Γ.
    pub gamma2: f64,
    /// Coupling g = χ|α₀|.
    pub g: f64,
    /// Detector efficiency.
    pub eta: f64,
    /// Cavity linewidth κ (kept for identities and dissipation accounting).
    pub kappa: f64,
    /// Mean photon number n₀ = |α₀|².
    pub n0: f64,
    /// Scale the conditional noise amplitude by √η instead of using √Γ
    /// literally. Off by default.
    pub efficiency_scaled_noise: bool,
}

impl AdiabaticParams {
    /// Build from the physical knobs (Ω, χ, κ, γ, n₀, η).
    pub fn from_physical(
        omega: f64,
        chi: f64,
        kappa: f64,
        gamma: f64,
        n0: f64,
        eta: f64,
    ) -> Result<Self, CoreError> {
        if kappa <= 0.0 {
            return Err(CoreError::InvalidParam("kappa must be > 0".into()));
        }
        for (name, v) in [("Omega", omega), ("chi", chi), ("gamma", gamma), ("n0", n0)] {
            if !(v >= 0.0) {
                return Err(CoreError::InvalidParam(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(CoreError::InvalidParam(format!("eta must be in [0,1], got {eta}")));
        }
        let g = chi * n0.sqrt();
        let gamma_meas = 4.0 * g * g / kappa;
        Ok(AdiabaticParams {
            omega,
            delta: chi * n0,
            gamma_meas,
            gamma,
            gamma2: gamma / 2.0 + 2.0 * gamma_meas,
            g,
            eta,
            kappa,
            n0,
            efficiency_scaled_noise: false,
        })
    }

    /// Effective Rabi rate Ω̃ = √(Ω² + Δ²).
    pub fn omega_eff(&self) -> f64 {
        self.omega.hypot(self.delta)
    }

    /// Noise rate entering the conditional SDEs: Γ, or ηΓ when
    /// `efficiency_scaled_noise` is set.
    pub fn noise_rate(&self) -> f64 {
        if self.efficiency_scaled_noise {
            self.eta * self.gamma_meas
        } else {
            self.gamma_meas
        }
    }
}

/// Reduce the full cavity–qubit parameter set: n₀ = |2E/κ|², g = χ√n₀,
/// Δ = χn₀, Γ = 4g²/κ, γ₂ = γ/2 + 2Γ.
pub fn derive_adiabatic(full: &FullSystemParams) -> Result<AdiabaticParams, CoreError> {
    if full.kappa <= 0.0 {
        return Err(CoreError::InvalidParam("kappa must be > 0 for adiabatic reduction".into()));
    }
    let alpha0 = crate::sme::steady_alpha(full.e_drive, full.kappa)?;
    AdiabaticParams::from_physical(
        full.omega,
        full.chi,
        full.kappa,
        full.gamma,
        alpha0.norm_sqr(),
        full.eta,
    )
}

/// Damping character of the noise-averaged qubit dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    UnderDamped,
    OverDamped,
}

/// Under-damped iff Ω > Γ/2; the boundary Ω = Γ/2 counts as over-damped.
pub fn regime_classify(omega: f64, gamma_meas: f64) -> Regime {
    if omega > gamma_meas / 2.0 {
        Regime::UnderDamped
    } else {
        Regime::OverDamped
    }
}

/// Conditional Pauli expectations (X, Y, Z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    pub fn ground() -> Self {
        BlochState { x: 0.0, y: 0.0, z: -1.0 }
    }

    pub fn radius2(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.x.is_finite() || !self.y.is_finite() || !self.z.is_finite() {
            return Err(CoreError::InvalidParam("Bloch state not finite".into()));
        }
        if self.radius2() > 1.0 + 1e-6 {
            return Err(CoreError::InvalidParam(format!(
                "Bloch radius² = {} exceeds 1",
                self.radius2()
            )));
        }
        Ok(())
    }
}

/// How the measurement noise enters the conditional Bloch SDE.
///
/// `Full` carries the complete Ito expansion of the σz measurement
/// superoperator (noise on all three components); it conserves purity at
/// γ = 0. `ZOnly` puts noise on dZ alone, as the reduced equations are
/// usually quoted; it does not stay on the Bloch sphere and is kept as a
/// diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    Full,
    ZOnly,
}

/// Step, span, seeding, and recording stride of one SDE integration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdeRun {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub stream: u64,
    pub record_stride: usize,
}

impl SdeRun {
    pub fn new(dt: f64, duration: f64, seed: u64) -> Self {
        SdeRun { dt, duration, seed, stream: 0, record_stride: 1 }
    }

    fn validate(&self, fastest_rate: f64) -> Result<(), CoreError> {
        if !(self.dt > 0.0) || !(self.duration > 0.0) || self.record_stride == 0 {
            return Err(CoreError::InvalidParam("dt, duration, record_stride must be positive".into()));
        }
        let product = self.dt * fastest_rate;
        if product > 0.05 {
            return Err(CoreError::StepSize { product, limit: 0.05 });
        }
        Ok(())
    }
}

/// Conditional Bloch trajectory.
#[derive(Debug, Clone)]
pub struct BlochSeries {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Largest X²+Y²+Z² seen (diagnostic for sphere conservation).
    pub max_radius2: f64,
    pub warnings: Vec<String>,
}

impl BlochSeries {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"t,X,Y,Z\n")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                crate::sme::fmt9(self.times[i]),
                crate::sme::fmt9(self.x[i]),
                crate::sme::fmt9(self.y[i]),
                crate::sme::fmt9(self.z[i])
            )?;
        }
        Ok(())
    }
}

/// Integrate the conditional Bloch SDE
///   dX = −2ΔY dt − γ₂X dt  (+ noise)
///   dY =  2ΔX dt − 2ΩZ dt − γ₂Y dt  (+ noise)
///   dZ =  2ΩY dt − γ(1+Z) dt + noise,
/// with noise amplitude 2√Γ as selected by `mode`.
///
/// The stepper treats the drift with a Heun (trapezoidal) predictor and the
/// noise with the single-channel Milstein correction ½(b·∇)b(dW²−dt). Both
/// refinements exist to make purity conservation in the full-noise mode a
/// property of the equations rather than of the step size: the noise field is
/// tangent to the Bloch sphere, so b·∇(r·b) = |b|² + r·(b·∇)b = 0 and the
/// Milstein term cancels the radius kick a linear-in-dW step leaves behind,
/// while the Heun drift removes the O((Ω̃dt)²) per-step radius inflation of a
/// forward-Euler rotation. A plain Euler–Maruyama step random-walks the
/// purity away at the √(Γdt) scale.
pub fn simulate_bloch(
    params: &AdiabaticParams,
    start: BlochState,
    run: &SdeRun,
    mode: NoiseMode,
) -> Result<BlochSeries, CoreError> {
    start.validate()?;
    run.validate((2.0 * params.omega_eff()).max(params.gamma2))?;
    let nsteps = (run.duration / run.dt).round() as usize;
    let cap = nsteps / run.record_stride + 1;
    let mut series = BlochSeries {
        times: Vec::with_capacity(cap),
        x: Vec::with_capacity(cap),
        y: Vec::with_capacity(cap),
        z: Vec::with_capacity(cap),
        max_radius2: start.radius2(),
        warnings: Vec::new(),
    };
    let mut noise = NoiseStream::new(run.seed, run.stream);
    let (mut x, mut y, mut z) = (start.x, start.y, start.z);
    let amp = 2.0 * params.noise_rate().sqrt();
    let amp2 = amp * amp;
    let dt = run.dt;
    let (omega, delta, gamma, gamma2) = (params.omega, params.delta, params.gamma, params.gamma2);

    for k in 0..nsteps {
        if k % run.record_stride == 0 {
            series.times.push(k as f64 * dt);
            series.x.push(x);
            series.y.push(y);
            series.z.push(z);
            let r2 = x * x + y * y + z * z;
            series.max_radius2 = series.max_radius2.max(r2);
        }
        let dw = noise.next_increment(dt);
        let milstein = 0.5 * (dw * dw - dt);
        let drift = |x: f64, y: f64, z: f64| {
            (
                -2.0 * delta * y - gamma2 * x,
                2.0 * delta * x - 2.0 * omega * z - gamma2 * y,
                2.0 * omega * y - gamma * (1.0 + z),
            )
        };
        let (ax, ay, az) = drift(x, y, z);
        let (px, py, pz) = (x + ax * dt, y + ay * dt, z + az * dt);
        let (bx, by, bz) = drift(px, py, pz);
        let dx = 0.5 * (ax + bx) * dt;
        let dy = 0.5 * (ay + by) * dt;
        let dz = 0.5 * (az + bz) * dt;
        match mode {
            NoiseMode::Full => {
                // b = amp(−xz, −yz, 1−z²); (b·∇)b = amp²(x(2z²−1), y(2z²−1), −2z(1−z²))
                let corr = amp2 * (2.0 * z * z - 1.0) * milstein;
                let nx = -amp * x * z * dw + x * corr;
                let ny = -amp * y * z * dw + y * corr;
                let nz = amp * (1.0 - z * z) * dw - 2.0 * amp2 * z * (1.0 - z * z) * milstein;
                x += dx + nx;
                y += dy + ny;
                z += dz + nz;
            }
            NoiseMode::ZOnly => {
                x += dx;
                y += dy;
                z += dz - amp * (1.0 - z * z) * dw - 2.0 * amp2 * z * (1.0 - z * z) * milstein;
            }
        }
        if !x.is_finite() || !y.is_finite() || !z.is_finite() {
            return Err(CoreError::NonFinite { step: k });
        }
    }
    if series.max_radius2 > 1.0 + 1e-6 {
        series
            .warnings
            .push(format!("Bloch radius² reached {:.6}; state left the sphere", series.max_radius2));
    }
    Ok(series)
}

/// Polar-coordinate trajectory: θ is unwrapped (not reduced mod 2π) so
/// first-passage counting stays monotone.
#[derive(Debug, Clone)]
pub struct PolarSeries {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PolarSeries {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"t,theta,phi\n")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{}",
                crate::sme::fmt9(self.times[i]),
                crate::sme::fmt9(self.theta[i]),
                crate::sme::fmt9(self.phi[i])
            )?;
        }
        Ok(())
    }
}

/// Euler–Maruyama integration of the polar SDEs on the unit sphere
///   dφ = 2Δ dt − 2Ω cotθ cosφ dt
///   dθ = −2Ω sinφ dt + 2√Γ sinθ dW.
/// The cotθ drift is guarded by clamping |sinθ| from below at 1e-6.
pub fn simulate_polar(
    params: &AdiabaticParams,
    theta0: f64,
    phi0: f64,
    run: &SdeRun,
) -> Result<PolarSeries, CoreError> {
    if !(0.1..=std::f64::consts::PI - 0.1).contains(&theta0) {
        return Err(CoreError::InvalidParam(format!(
            "theta0 = {theta0} too close to a pole; need [0.1, pi - 0.1]"
        )));
    }
    run.validate((2.0 * params.omega_eff()).max(params.gamma2))?;
    let nsteps = (run.duration / run.dt).round() as usize;
    let cap = nsteps / run.record_stride + 1;
    let mut series = PolarSeries {
        times: Vec::with_capacity(cap),
        theta: Vec::with_capacity(cap),
        phi: Vec::with_capacity(cap),
    };
    let mut noise = NoiseStream::new(run.seed, run.stream);
    let (mut theta, mut phi) = (theta0, phi0);
    let amp = 2.0 * params.noise_rate().sqrt();
    let dt = run.dt;

    for k in 0..nsteps {
        if k % run.record_stride == 0 {
            series.times.push(k as f64 * dt);
            series.theta.push(theta);
            series.phi.push(phi);
        }
        let dw = noise.next_increment(dt);
        let sin_t = theta.sin();
        let guarded = if sin_t.abs() < 1e-6 { 1e-6 * sin_t.signum_or_one() } else { sin_t };
        let cot = theta.cos() / guarded;
        let dphi = (2.0 * params.delta - 2.0 * params.omega * cot * phi.cos()) * dt;
        let dtheta = -2.0 * params.omega * phi.sin() * dt + amp * sin_t * dw;
        phi += dphi;
        theta += dtheta;
        if !theta.is_finite() || !phi.is_finite() {
            return Err(CoreError::NonFinite { step: k });
        }
    }
    Ok(series)
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self == 0.0 {
            1.0
        } else {
            self.signum()
        }
    }
}

/// First-passage periods of the linearized phase SDE dθ = −2Ω dt + σ dW with
/// σ = 2√(Γπ): each sample is the first time the accumulated phase drop
/// reaches 2π, with the crossing linearly interpolated inside the step.
pub fn sample_first_passage(
    omega: f64,
    gamma_meas: f64,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PeriodSet, CoreError> {
    if !(omega > 0.0) {
        return Err(CoreError::InvalidParam("Omega must be > 0".into()));
    }
    if !(gamma_meas >= 0.0) || !(dt > 0.0) {
        return Err(CoreError::InvalidParam("Gamma >= 0 and dt > 0 required".into()));
    }
    let sigma = 2.0 * (gamma_meas * std::f64::consts::PI).sqrt();
    let target = 2.0 * std::f64::consts::PI;
    let drift = 2.0 * omega * dt;
    let mut periods = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut noise = NoiseStream::new(seed, i as u64);
        let mut drop = 0.0f64;
        let mut step = 0u64;
        loop {
            let next = drop + drift - sigma * noise.next_increment(dt);
            step += 1;
            if next >= target {
                let frac = (target - drop) / (next - drop);
                periods.push((step as f64 - 1.0 + frac) * dt);
                break;
            }
            drop = next;
        }
    }
    Ok(PeriodSet {
        periods,
        meta: PeriodMeta { source: "first_passage".into(), ..Default::default() },
    })
}

/// Telegraph transition rates: μ upward, ν = γ + μ downward.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JumpRates {
    pub mu: f64,
    pub nu: f64,
}

impl JumpRates {
    pub fn new(mu: f64, nu: f64) -> Result<Self, CoreError> {
        if !(mu >= 0.0) || !(nu >= 0.0) {
            return Err(CoreError::InvalidParam("rates must be >= 0".into()));
        }
        Ok(JumpRates { mu, nu })
    }

    /// Stationary probability of the ground state, ν/(μ+ν).
    pub fn ground_fraction(&self) -> f64 {
        self.nu / (self.mu + self.nu)
    }
}

/// Strong-measurement transition rates: μ = 4Ω²/(γ + 2Γ), ν = γ + μ.
pub fn jump_rates(omega: f64, gamma_meas: f64, gamma: f64) -> Result<JumpRates, CoreError> {
    if gamma + 2.0 * gamma_meas <= 0.0 {
        return Err(CoreError::InvalidParam("gamma + 2*Gamma must be > 0".into()));
    }
    let mu = 4.0 * omega * omega / (gamma + 2.0 * gamma_meas);
    Ok(JumpRates { mu, nu: gamma + mu })
}

/// Exact event-driven telegraph realization. The state starts at −1
/// (ground); jump k at `jump_times[k]` flips it, so even indices are upward
/// transitions.
#[derive(Debug, Clone)]
pub struct TelegraphRecord {
    pub jump_times: Vec<f64>,
    pub duration: f64,
}

impl TelegraphRecord {
    pub fn state_after(&self, jumps: usize) -> i8 {
        if jumps % 2 == 0 {
            -1
        } else {
            1
        }
    }

    /// Times of the −1 → +1 transitions.
    pub fn up_times(&self) -> Vec<f64> {
        self.jump_times.iter().copied().step_by(2).collect()
    }

    /// Completed dwell times in the given state; the final (truncated)
    /// segment is excluded.
    pub fn dwell_times(&self, state: i8) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        let mut cur = -1i8;
        for &t in &self.jump_times {
            if cur == state {
                out.push(t - prev);
            }
            prev = t;
            cur = -cur;
        }
        out
    }

    /// Clock periods: spans between successive upward transitions.
    pub fn periods(&self) -> Vec<f64> {
        let ups = self.up_times();
        ups.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Sample onto a uniform grid.
    pub fn to_series(&self, dt: f64) -> (Vec<f64>, Vec<i8>) {
        let n = (self.duration / dt).round() as usize;
        let mut times = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        let mut jump_idx = 0;
        for k in 0..n {
            let t = k as f64 * dt;
            while jump_idx < self.jump_times.len() && self.jump_times[jump_idx] <= t {
                jump_idx += 1;
            }
            times.push(t);
            states.push(self.state_after(jump_idx));
        }
        (times, states)
    }

    /// Event CSV `t,state`: the initial state, one row per jump, and the
    /// final state at the end of the record.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"t,state\n")?;
        writeln!(w, "{},-1", crate::sme::fmt9(0.0))?;
        for (k, &t) in self.jump_times.iter().enumerate() {
            writeln!(w, "{},{}", crate::sme::fmt9(t), self.state_after(k + 1))?;
        }
        writeln!(
            w,
            "{},{}",
            crate::sme::fmt9(self.duration),
            self.state_after(self.jump_times.len())
        )?;
        Ok(())
    }
}

/// Exact telegraph simulation by exponential dwell sampling; no time
/// discretization enters the dwell statistics.
pub fn simulate_telegraph(
    rates: &JumpRates,
    duration: f64,
    seed: u64,
) -> Result<TelegraphRecord, CoreError> {
    if !(duration > 0.0) {
        return Err(CoreError::InvalidParam("duration must be > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jump_times = Vec::new();
    let mut t = 0.0f64;
    let mut state = -1i8;
    loop {
        let rate = if state == -1 { rates.mu } else { rates.nu };
        if rate <= 0.0 {
            break;
        }
        // u in (0, 1]
        let u = 1.0 - rng.gen::<f64>();
        t += -u.ln() / rate;
        if t >= duration {
            break;
        }
        jump_times.push(t);
        state = -state;
    }
    Ok(TelegraphRecord { jump_times, duration })
}
