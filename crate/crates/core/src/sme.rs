//! Conditional stochastic master equation of the driven, dispersively coupled
//! cavity–qubit system under homodyne monitoring, and its noise average.
//!
//! The drift is
//!   dρ = −iE[a+a†,ρ]dt − iΩ[σx,ρ]dt − iχ[a†aσz,ρ]dt + γD[σ−]ρdt + κD[a]ρdt
//! and the conditioning term is √(ηκ) H[a]ρ dW.
//!
//! Internally the drift is evaluated as Kρ + (Kρ)† + γσ−ρσ+ + κaρa† with
//! K = −iH − (γ/2)σ+σ− − (κ/2)a†a, which keeps every product left-sparse.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::hilbert::{build_operators, DensityMatrix, HilbertConfig, OperatorSet};
use crate::matrix::{CMatrix, I, ONE};
use crate::noise::NoiseStream;

/// Which homodyne-current normalization is written into the record.
///
/// `Standard` is J dt = √(ηκ)⟨a+a†⟩_c dt + dW. `Adiabatic` is the
/// reduced-model form J dt = g√η⟨σz⟩_c dt + √κ dW with g = 2χE/κ; the full
/// model does not pin this normalization, so it is a configuration choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentConvention {
    #[default]
    Standard,
    Adiabatic,
}

/// Physical rates (angular frequencies, rad/µs), detector efficiency, and
/// numerics for the full cavity–qubit model. Time is in µs throughout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullSystemParams {
    /// Cavity drive amplitude E.
    pub e_drive: f64,
    /// Qubit drive amplitude Ω.
    pub omega: f64,
    /// Dispersive shift χ.
    pub chi: f64,
    /// Qubit amplitude damping rate γ.
    pub gamma: f64,
    /// Cavity damping rate κ.
    pub kappa: f64,
    /// Detector efficiency η ∈ [0, 1].
    pub eta: f64,
    /// Fock truncation: cavity keeps |0..=n_max>.
    pub n_max: usize,
    /// Integrator step (µs).
    pub dt: f64,
    /// Total integration time (µs).
    pub duration: f64,
    pub seed: u64,
    pub stream: u64,
    /// Record every k-th step.
    pub record_stride: usize,
    /// Check the minimum eigenvalue every k-th step.
    pub positivity_stride: usize,
    pub current_convention: CurrentConvention,
}

impl Default for FullSystemParams {
    /// Weak-measurement operating point: χ=2, γ=0.2, κ=1, Ω=1 rad/µs,
    /// E = 2π·0.25 rad/µs, η = 0.2.
    fn default() -> Self {
        FullSystemParams {
            e_drive: 0.5 * std::f64::consts::PI,
            omega: 1.0,
            chi: 2.0,
            gamma: 0.2,
            kappa: 1.0,
            eta: 0.2,
            n_max: 12,
            dt: 1e-3,
            duration: 200.0,
            seed: 0,
            stream: 0,
            record_stride: 1,
            positivity_stride: 10,
            current_convention: CurrentConvention::Standard,
        }
    }
}

impl FullSystemParams {
    /// Adiabatic estimate of the measurement dephasing rate, 4χ²n₀/κ.
    /// Used only for the step-size warning.
    pub fn measurement_rate_estimate(&self) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        let n0 = (2.0 * self.e_drive / self.kappa).powi(2);
        4.0 * self.chi * self.chi * n0 / self.kappa
    }

    /// Validate ranges; returns non-fatal warnings (step-size resolution).
    pub fn validate(&self) -> Result<Vec<String>, CoreError> {
        for (name, v) in [
            ("E", self.e_drive),
            ("Omega", self.omega),
            ("chi", self.chi),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ] {
            if !(v >= 0.0) {
                return Err(CoreError::InvalidParam(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(CoreError::InvalidParam(format!("eta must be in [0,1], got {}", self.eta)));
        }
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidParam("dt must be > 0".into()));
        }
        if !(self.duration > 0.0) {
            return Err(CoreError::InvalidParam("duration must be > 0".into()));
        }
        if self.n_max < 1 {
            return Err(CoreError::InvalidParam("n_max must be >= 1".into()));
        }
        if self.record_stride == 0 || self.positivity_stride == 0 {
            return Err(CoreError::InvalidParam("strides must be >= 1".into()));
        }
        let mut warnings = Vec::new();
        let fastest = self.kappa.max(self.measurement_rate_estimate()).max(2.0 * self.omega);
        let product = self.dt * fastest;
        if product > 0.05 {
            warnings.push(format!(
                "dt*max(kappa, Gamma_est, 2*Omega) = {product:.3} exceeds 0.05; \
                 fastest estimated timescale may be under-resolved"
            ));
        }
        Ok(warnings)
    }
}

/// Steady coherent amplitude of the driven, uncoupled cavity: α₀ = −2iE/κ.
pub fn steady_alpha(e_drive: f64, kappa: f64) -> Result<Complex64, CoreError> {
    if kappa == 0.0 {
        return Err(CoreError::InvalidParam("kappa must be nonzero for steady_alpha".into()));
    }
    Ok(-2.0 * I * e_drive / kappa)
}

/// Time series of conditional expectations and the homodyne record for one
/// seeded run. All arrays share the same length and sampling stride.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// ⟨σz⟩_c
    pub z: Vec<f64>,
    /// ⟨a+a†⟩_c
    pub x: Vec<f64>,
    /// ⟨a†a⟩_c
    pub n: Vec<f64>,
    /// Homodyne current samples (absent for the unconditional run).
    pub current: Option<Vec<f64>>,
    /// Worst eigenvalue seen at positivity checks.
    pub positivity_min: f64,
    /// Largest |tr ρ − 1| seen before per-step renormalization.
    pub trace_drift_max: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

pub(crate) fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,z,x,n,current` (`t,z,x,n` when no current was
    /// recorded), 9 significant digits, LF newlines.
    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        match &self.current {
            Some(cur) => {
                w.write_all(b"t,z,x,n,current\n")?;
                for i in 0..self.times.len() {
                    writeln!(
                        w,
                        "{},{},{},{},{}",
                        fmt9(self.times[i]),
                        fmt9(self.z[i]),
                        fmt9(self.x[i]),
                        fmt9(self.n[i]),
                        fmt9(cur[i])
                    )?;
                }
            }
            None => {
                w.write_all(b"t,z,x,n\n")?;
                for i in 0..self.times.len() {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        fmt9(self.times[i]),
                        fmt9(self.z[i]),
                        fmt9(self.x[i]),
                        fmt9(self.n[i])
                    )?;
                }
            }
        }
        Ok(())
    }
}

struct Workspace {
    w1: CMatrix,
    w2: CMatrix,
    w3: CMatrix,
    w4: CMatrix,
    rhs: CMatrix,
    noise: CMatrix,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Workspace {
            w1: CMatrix::zeros(dim),
            w2: CMatrix::zeros(dim),
            w3: CMatrix::zeros(dim),
            w4: CMatrix::zeros(dim),
            rhs: CMatrix::zeros(dim),
            noise: CMatrix::zeros(dim),
        }
    }
}

/// Integrator for one parameter set: operators are built once and shared by
/// every step. All methods are deterministic in (params.seed, params.stream).
pub struct SmeEngine {
    pub params: FullSystemParams,
    pub ops: OperatorSet,
    k_eff: CMatrix,
    sz_diag: Vec<f64>,
    n_diag: Vec<f64>,
    sqrt_eta_kappa: f64,
}

impl SmeEngine {
    pub fn new(params: FullSystemParams) -> Result<(Self, Vec<String>), CoreError> {
        let warnings = params.validate()?;
        let cfg = HilbertConfig::new(params.n_max)?;
        let ops = build_operators(cfg);
        let dim = cfg.dim();

        // H = E(a+a†) + Ω σx + χ a†a σz
        let mut h = ops.x_op.scaled(Complex64::new(params.e_drive, 0.0));
        h.add_scaled_assign(&ops.sx, Complex64::new(params.omega, 0.0));
        let n_sz = CMatrix::mul(&ops.n_op, &ops.sz);
        h.add_scaled_assign(&n_sz, Complex64::new(params.chi, 0.0));

        // K = −iH − (γ/2)σ+σ− − (κ/2)a†a
        let mut k_eff = h.scaled(-I);
        let spsm = CMatrix::mul(&ops.sp, &ops.sm);
        k_eff.add_scaled_assign(&spsm, Complex64::new(-0.5 * params.gamma, 0.0));
        k_eff.add_scaled_assign(&ops.n_op, Complex64::new(-0.5 * params.kappa, 0.0));

        let sz_diag = (0..dim).map(|i| ops.sz.get(i, i).re).collect();
        let n_diag = (0..dim).map(|i| ops.n_op.get(i, i).re).collect();
        let sqrt_eta_kappa = (params.eta * params.kappa).sqrt();
        Ok((SmeEngine { params, ops, k_eff, sz_diag, n_diag, sqrt_eta_kappa }, warnings))
    }

    pub fn dim(&self) -> usize {
        self.ops.cfg.dim()
    }

    fn diag_expectation(diag: &[f64], rho: &CMatrix) -> f64 {
        diag.iter().enumerate().map(|(i, d)| d * rho.get(i, i).re).sum()
    }

    /// Drift side of the master equation; Hermitian and traceless for valid ρ.
    /// Leaves w2 = aρ behind for reuse.
    fn rhs_into(&self, rho: &CMatrix, ws: &mut Workspace) {
        CMatrix::mul_into(&mut ws.w1, &self.k_eff, rho);
        ws.rhs.copy_from(&ws.w1);
        ws.rhs.add_adjoint_scaled_assign(&ws.w1, ONE);
        if self.params.gamma != 0.0 {
            CMatrix::mul_into(&mut ws.w2, &self.ops.sm, rho);
            ws.w2.adjoint_into(&mut ws.w3);
            CMatrix::mul_into(&mut ws.w4, &self.ops.sm, &ws.w3);
            ws.rhs.add_scaled_assign(&ws.w4, Complex64::new(self.params.gamma, 0.0));
        }
        CMatrix::mul_into(&mut ws.w2, &self.ops.a, rho);
        if self.params.kappa != 0.0 {
            ws.w2.adjoint_into(&mut ws.w3);
            CMatrix::mul_into(&mut ws.w4, &self.ops.a, &ws.w3);
            ws.rhs.add_scaled_assign(&ws.w4, Complex64::new(self.params.kappa, 0.0));
        }
    }

    /// H[a]ρ from the cached w2 = aρ.
    fn noise_into(rho: &CMatrix, ws: &mut Workspace) {
        ws.noise.copy_from(&ws.w2);
        ws.noise.add_adjoint_scaled_assign(&ws.w2, ONE);
        let tr = ws.noise.trace();
        ws.noise.add_scaled_assign(rho, -tr);
    }

    /// One Euler–Maruyama step; returns |tr − 1| before renormalization.
    fn step_in_place(
        &self,
        rho: &mut CMatrix,
        dt: f64,
        dw: f64,
        ws: &mut Workspace,
    ) -> Result<f64, CoreError> {
        self.rhs_into(rho, ws);
        Self::noise_into(rho, ws);
        rho.add_scaled_assign(&ws.rhs, Complex64::new(dt, 0.0));
        rho.add_scaled_assign(&ws.noise, Complex64::new(self.sqrt_eta_kappa * dw, 0.0));
        rho.hermitize();
        let tr = rho.trace().re;
        if !tr.is_finite() || tr <= 0.0 {
            return Err(CoreError::InvalidParam(format!("trace became {tr}")));
        }
        rho.scale_assign(Complex64::new(1.0 / tr, 0.0));
        Ok((tr - 1.0).abs())
    }

    /// Integrate the conditional equation from ground ⊗ vacuum.
    pub fn simulate_conditional(&self) -> Result<TrajectoryRecord, CoreError> {
        let initial = DensityMatrix::ground_vacuum(self.ops.cfg);
        self.simulate_conditional_from(&initial)
    }

    pub fn simulate_conditional_from(
        &self,
        initial: &DensityMatrix,
    ) -> Result<TrajectoryRecord, CoreError> {
        let p = &self.params;
        let mut rho = initial.matrix().clone();
        if rho.dim() != self.dim() {
            return Err(CoreError::ShapeMismatch { expected: self.dim(), got: rho.dim() });
        }
        let nsteps = (p.duration / p.dt).round() as usize;
        let cap = nsteps / p.record_stride + 1;
        let mut rec = TrajectoryRecord {
            times: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            n: Vec::with_capacity(cap),
            current: Some(Vec::with_capacity(cap)),
            positivity_min: f64::INFINITY,
            trace_drift_max: 0.0,
            seed: p.seed,
            warnings: Vec::new(),
        };
        let mut noise = NoiseStream::new(p.seed, p.stream);
        let mut ws = Workspace::new(self.dim());
        // for the adiabatic current convention
        let g = if p.kappa > 0.0 { p.chi * 2.0 * p.e_drive / p.kappa } else { 0.0 };
        let mut n_peak = 0.0f64;

        for k in 0..nsteps {
            let dw = noise.next_increment(p.dt);
            let record_now = k % p.record_stride == 0;
            let check_now = k % p.positivity_stride == 0;
            if check_now {
                if !rho.is_finite() {
                    return Err(CoreError::NonFinite { step: k });
                }
                let min_eig =
                    rho.eigvalsh().into_iter().next().ok_or(CoreError::NonFinite { step: k })?;
                rec.positivity_min = rec.positivity_min.min(min_eig);
                n_peak = n_peak.max(Self::diag_expectation(&self.n_diag, &rho));
            }
            if record_now {
                let nv = Self::diag_expectation(&self.n_diag, &rho);
                let zv = Self::diag_expectation(&self.sz_diag, &rho);
                // ⟨a+a†⟩ = 2 Re tr(aρ)
                let xv = 2.0 * CMatrix::trace_of_product(&self.ops.a, &rho).re;
                let j = match p.current_convention {
                    CurrentConvention::Standard => self.sqrt_eta_kappa * xv + dw / p.dt,
                    CurrentConvention::Adiabatic => {
                        g * p.eta.sqrt() * zv + p.kappa.sqrt() * dw / p.dt
                    }
                };
                rec.times.push(k as f64 * p.dt);
                rec.z.push(zv);
                rec.x.push(xv);
                rec.n.push(nv);
                rec.current.as_mut().unwrap().push(j);
            }
            let drift = self.step_in_place(&mut rho, p.dt, dw, &mut ws).map_err(|e| match e {
                CoreError::InvalidParam(_) => CoreError::NonFinite { step: k },
                other => other,
            })?;
            rec.trace_drift_max = rec.trace_drift_max.max(drift);
        }
        if rec.positivity_min < -1e-6 {
            rec.warnings
                .push(format!("positivity violated: min eigenvalue {:.3e}", rec.positivity_min));
        }
        if n_peak > 0.9 * p.n_max as f64 {
            rec.warnings.push(format!(
                "truncation leakage: <n> reached {:.2} with n_max = {}",
                n_peak, p.n_max
            ));
        }
        Ok(rec)
    }

    /// Deterministic (noise-averaged) integration with fixed-step RK4.
    /// No current is recorded.
    pub fn simulate_unconditional(&self) -> Result<TrajectoryRecord, CoreError> {
        let initial = DensityMatrix::ground_vacuum(self.ops.cfg);
        self.simulate_unconditional_from(&initial)
    }

    pub fn simulate_unconditional_from(
        &self,
        initial: &DensityMatrix,
    ) -> Result<TrajectoryRecord, CoreError> {
        let p = &self.params;
        let dim = self.dim();
        let mut rho = initial.matrix().clone();
        if rho.dim() != dim {
            return Err(CoreError::ShapeMismatch { expected: dim, got: rho.dim() });
        }
        let nsteps = (p.duration / p.dt).round() as usize;
        let cap = nsteps / p.record_stride + 1;
        let mut rec = TrajectoryRecord {
            times: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            n: Vec::with_capacity(cap),
            current: None,
            positivity_min: f64::INFINITY,
            trace_drift_max: 0.0,
            seed: p.seed,
            warnings: Vec::new(),
        };
        let mut ws = Workspace::new(dim);
        let mut stage = CMatrix::zeros(dim);
        let mut k1 = CMatrix::zeros(dim);
        let mut k2 = CMatrix::zeros(dim);
        let mut k3 = CMatrix::zeros(dim);
        let dt = p.dt;
        let half = Complex64::new(0.5 * dt, 0.0);
        let mut n_peak = 0.0f64;

        for k in 0..nsteps {
            if k % p.positivity_stride == 0 {
                if !rho.is_finite() {
                    return Err(CoreError::NonFinite { step: k });
                }
                let min_eig =
                    rho.eigvalsh().into_iter().next().ok_or(CoreError::NonFinite { step: k })?;
                rec.positivity_min = rec.positivity_min.min(min_eig);
            }
            if k % p.record_stride == 0 {
                let nv = Self::diag_expectation(&self.n_diag, &rho);
                n_peak = n_peak.max(nv);
                rec.times.push(k as f64 * dt);
                rec.z.push(Self::diag_expectation(&self.sz_diag, &rho));
                rec.x.push(2.0 * CMatrix::trace_of_product(&self.ops.a, &rho).re);
                rec.n.push(nv);
            }
            // classic RK4
            self.rhs_into(&rho, &mut ws);
            k1.copy_from(&ws.rhs);
            stage.copy_from(&rho);
            stage.add_scaled_assign(&k1, half);
            self.rhs_into(&stage, &mut ws);
            k2.copy_from(&ws.rhs);
            stage.copy_from(&rho);
            stage.add_scaled_assign(&k2, half);
            self.rhs_into(&stage, &mut ws);
            k3.copy_from(&ws.rhs);
            stage.copy_from(&rho);
            stage.add_scaled_assign(&k3, Complex64::new(dt, 0.0));
            self.rhs_into(&stage, &mut ws);
            let sixth = dt / 6.0;
            rho.add_scaled_assign(&k1, Complex64::new(sixth, 0.0));
            rho.add_scaled_assign(&k2, Complex64::new(2.0 * sixth, 0.0));
            rho.add_scaled_assign(&k3, Complex64::new(2.0 * sixth, 0.0));
            rho.add_scaled_assign(&ws.rhs, Complex64::new(sixth, 0.0));
            rho.hermitize();
            let tr = rho.trace().re;
            if !tr.is_finite() || tr <= 0.0 {
                return Err(CoreError::NonFinite { step: k });
            }
            rec.trace_drift_max = rec.trace_drift_max.max((tr - 1.0).abs());
            rho.scale_assign(Complex64::new(1.0 / tr, 0.0));
        }
        if rec.positivity_min < -1e-6 {
            rec.warnings
                .push(format!("positivity violated: min eigenvalue {:.3e}", rec.positivity_min));
        }
        if n_peak > 0.9 * p.n_max as f64 {
            rec.warnings.push(format!(
                "truncation leakage: <n> reached {:.2} with n_max = {}",
                n_peak, p.n_max
            ));
        }
        Ok(rec)
    }
}

/// Drift side of the conditional master equation for a single state.
/// Builds the operator set on each call; use [`SmeEngine`] for loops.
pub fn liouvillian_rhs(rho: &CMatrix, params: &FullSystemParams) -> Result<CMatrix, CoreError> {
    let (engine, _) = SmeEngine::new(params.clone())?;
    if rho.dim() != engine.dim() {
        return Err(CoreError::ShapeMismatch { expected: engine.dim(), got: rho.dim() });
    }
    let mut ws = Workspace::new(rho.dim());
    engine.rhs_into(rho, &mut ws);
    Ok(ws.rhs)
}

/// One Euler–Maruyama step: ρ + rhs·dt + √(ηκ)H[a]ρ·dW, symmetrized and
/// trace-renormalized.
pub fn em_step(
    rho: &CMatrix,
    dt: f64,
    dw: f64,
    params: &FullSystemParams,
) -> Result<CMatrix, CoreError> {
    if !dw.is_finite() {
        return Err(CoreError::InvalidParam("dW must be finite".into()));
    }
    let (engine, _) = SmeEngine::new(params.clone())?;
    if rho.dim() != engine.dim() {
        return Err(CoreError::ShapeMismatch { expected: engine.dim(), got: rho.dim() });
    }
    let mut ws = Workspace::new(rho.dim());
    let mut out = rho.clone();
    engine.step_in_place(&mut out, dt, dw, &mut ws).map_err(|e| match e {
        CoreError::InvalidParam(_) => CoreError::NonFinite { step: 0 },
        other => other,
    })?;
    Ok(out)
}

pub fn simulate_conditional(params: &FullSystemParams) -> Result<TrajectoryRecord, CoreError> {
    let (engine, warnings) = SmeEngine::new(params.clone())?;
    let mut rec = engine.simulate_conditional()?;
    rec.warnings.splice(0..0, warnings);
    Ok(rec)
}

pub fn simulate_unconditional(params: &FullSystemParams) -> Result<TrajectoryRecord, CoreError> {
    let (engine, warnings) = SmeEngine::new(params.clone())?;
    let mut rec = engine.simulate_unconditional()?;
    rec.warnings.splice(0..0, warnings);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{basis_ket, expectation};
    use crate::matrix::ZERO;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn params_small() -> FullSystemParams {
        FullSystemParams { n_max: 3, duration: 1.0, ..Default::default() }
    }

    fn random_density(dim: usize, rng: &mut impl Rng) -> CMatrix {
        let g = CMatrix::from_fn(dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut m = CMatrix::mul(&g, &g.adjoint());
        let tr = m.trace();
        m.scale_assign(Complex64::new(1.0 / tr.re, 0.0));
        m
    }

    #[test]
    fn steady_alpha_examples() {
        assert_eq!(steady_alpha(0.0, 1.0).unwrap(), ZERO);
        let e = 0.5 * std::f64::consts::PI;
        let a0 = steady_alpha(e, 1.0).unwrap();
        let n0 = a0.norm_sqr();
        assert_abs_diff_eq!(n0, std::f64::consts::PI.powi(2), epsilon = 1e-12);
        assert_abs_diff_eq!(a0.arg(), -std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        assert!(steady_alpha(1.0, 0.0).is_err());
    }

    #[test]
    fn rhs_pure_decay_from_maximally_mixed() {
        let p = FullSystemParams { e_drive: 0.0, omega: 0.0, chi: 0.0, ..params_small() };
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let dim = engine.dim();
        let mut rho = CMatrix::identity(dim);
        rho.scale_assign(Complex64::new(1.0 / dim as f64, 0.0));
        let rhs = liouvillian_rhs(&rho, &p).unwrap();
        let dn = expectation(&engine.ops.n_op, &rhs).unwrap().re;
        assert!(dn < -1e-6, "photon number must decay, got {dn}");
        // excited population projector (1 + σz)/2
        let mut pe = engine.ops.identity.clone();
        pe.add_scaled_assign(&engine.ops.sz, ONE);
        pe.scale_assign(Complex64::new(0.5, 0.0));
        let dpe = expectation(&pe, &rhs).unwrap().re;
        assert!(dpe < -1e-6, "excited population must decay, got {dpe}");
    }

    #[test]
    fn rhs_rabi_turn_on() {
        let p = FullSystemParams {
            e_drive: 0.0,
            omega: 0.7,
            chi: 0.0,
            gamma: 0.0,
            kappa: 0.0,
            ..params_small()
        };
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let rho = DensityMatrix::ground_vacuum(engine.ops.cfg).into_matrix();
        let rhs = liouvillian_rhs(&rho, &p).unwrap();
        let dz = expectation(&engine.ops.sz, &rhs).unwrap().re;
        assert_abs_diff_eq!(dz, 0.0, epsilon = 1e-13);
        // σy = i(σ− − σ+) in the right-handed frame with σz|g> = −|g>
        let mut sy = engine.ops.sm.scaled(I);
        sy.add_scaled_assign(&engine.ops.sp, -I);
        let dy = expectation(&sy, &rhs).unwrap().re;
        assert_abs_diff_eq!(dy, 2.0 * p.omega, epsilon = 1e-12);
    }

    #[test]
    fn rhs_traceless_hermitian_on_random_states() {
        let p = params_small();
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rho = random_density(engine.dim(), &mut rng);
            let rhs = liouvillian_rhs(&rho, &p).unwrap();
            assert!(rhs.trace().norm() < 1e-10);
            assert!(rhs.herm_defect() < 1e-10);
        }
    }

    #[test]
    fn rhs_matches_superoperator_composition() {
        // cross-check the fused K-form against the textbook assembly
        let p = FullSystemParams { n_max: 2, ..Default::default() };
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(engine.dim(), &mut rng);
        let ops = &engine.ops;
        let mut h = ops.x_op.scaled(Complex64::new(p.e_drive, 0.0));
        h.add_scaled_assign(&ops.sx, Complex64::new(p.omega, 0.0));
        h.add_scaled_assign(&CMatrix::mul(&ops.n_op, &ops.sz), Complex64::new(p.chi, 0.0));
        let comm = &CMatrix::mul(&h, &rho) - &CMatrix::mul(&rho, &h);
        let mut want = comm.scaled(-I);
        want.add_scaled_assign(
            &crate::hilbert::apply_dissipator(&ops.sm, &rho).unwrap(),
            Complex64::new(p.gamma, 0.0),
        );
        want.add_scaled_assign(
            &crate::hilbert::apply_dissipator(&ops.a, &rho).unwrap(),
            Complex64::new(p.kappa, 0.0),
        );
        let got = liouvillian_rhs(&rho, &p).unwrap();
        assert!((&got - &want).max_abs() < 1e-12);
    }

    #[test]
    fn em_step_zero_efficiency_ignores_noise() {
        let p = FullSystemParams { eta: 0.0, ..params_small() };
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let rho = DensityMatrix::ground_vacuum(engine.ops.cfg).into_matrix();
        let a = em_step(&rho, p.dt, 0.34, &p).unwrap();
        let b = em_step(&rho, p.dt, -2.1, &p).unwrap();
        assert!((&a - &b).max_abs() < 1e-15);
    }

    #[test]
    fn em_step_zero_noise_is_euler() {
        let p = params_small();
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(engine.dim(), &mut rng);
        let stepped = em_step(&rho, p.dt, 0.0, &p).unwrap();
        let mut euler = rho.clone();
        euler.add_scaled_assign(&liouvillian_rhs(&rho, &p).unwrap(), Complex64::new(p.dt, 0.0));
        euler.hermitize();
        let tr = euler.trace().re;
        euler.scale_assign(Complex64::new(1.0 / tr, 0.0));
        assert!((&stepped - &euler).max_abs() < 1e-14);
    }

    #[test]
    fn em_step_drive_phase_convention() {
        // Only the cavity drive on: the out-of-phase quadrature moves at first
        // order (towards −2iE/κ), the monitored quadrature stays dark.
        let p = FullSystemParams {
            e_drive: 0.8,
            omega: 0.0,
            chi: 0.0,
            gamma: 0.0,
            kappa: 1.0,
            eta: 0.0,
            ..params_small()
        };
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let rho0 = DensityMatrix::ground_vacuum(engine.ops.cfg).into_matrix();
        let rho1 = em_step(&rho0, p.dt, 0.0, &p).unwrap();
        // p̂ = i(a† − a)
        let py = &engine.ops.a_dag.scaled(I) - &engine.ops.a.scaled(I);
        let p1 = expectation(&py, &rho1).unwrap().re;
        assert_abs_diff_eq!(p1, -2.0 * p.e_drive * p.dt, epsilon = 1e-12);
        let x1 = expectation(&engine.ops.x_op, &rho1).unwrap().re;
        assert!(x1.abs() < 1e-12);
        let rho2 = em_step(&rho1, p.dt, 0.0, &p).unwrap();
        let x2 = expectation(&engine.ops.x_op, &rho2).unwrap().re;
        assert!(x2.abs() < 1e-12, "x quadrature stays dark without dispersive coupling");
    }

    #[test]
    fn conditional_at_zero_efficiency_matches_euler_reference() {
        let p = FullSystemParams {
            eta: 0.0,
            n_max: 3,
            duration: 0.5,
            record_stride: 100,
            ..Default::default()
        };
        let rec = simulate_conditional(&p).unwrap();
        // independent Euler reference on the public rhs
        let (engine, _) = SmeEngine::new(p.clone()).unwrap();
        let mut rho = DensityMatrix::ground_vacuum(engine.ops.cfg).into_matrix();
        let nsteps = (p.duration / p.dt).round() as usize;
        let mut zs = Vec::new();
        for k in 0..nsteps {
            if k % p.record_stride == 0 {
                zs.push(expectation(&engine.ops.sz, &rho).unwrap().re);
            }
            let rhs = liouvillian_rhs(&rho, &p).unwrap();
            rho.add_scaled_assign(&rhs, Complex64::new(p.dt, 0.0));
            rho.hermitize();
            let tr = rho.trace().re;
            rho.scale_assign(Complex64::new(1.0 / tr, 0.0));
        }
        assert_eq!(rec.z.len(), zs.len());
        for (a, b) in rec.z.iter().zip(&zs) {
            assert!((a - b).abs() < 1e-9);
        }
        // and different seeds agree bit-for-bit at η = 0
        let rec2 = simulate_conditional(&FullSystemParams { seed: 99, ..p }).unwrap();
        assert_eq!(rec.z, rec2.z);
    }

    #[test]
    fn determinism_bitwise() {
        let p = FullSystemParams { n_max: 2, duration: 0.3, ..Default::default() };
        let a = simulate_conditional(&p).unwrap();
        let b = simulate_conditional(&p).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.x, b.x);
        assert_eq!(a.current, b.current);
        let c = simulate_conditional(&FullSystemParams { seed: 1, ..p }).unwrap();
        assert_ne!(a.z, c.z);
    }

    #[test]
    fn unconditional_bare_rabi() {
        let p = FullSystemParams {
            e_drive: 0.0,
            omega: 1.0,
            chi: 0.0,
            gamma: 0.0,
            kappa: 0.0,
            eta: 0.0,
            n_max: 1,
            dt: 1e-3,
            duration: 10.0,
            ..Default::default()
        };
        let rec = simulate_unconditional(&p).unwrap();
        for (t, z) in rec.times.iter().zip(&rec.z) {
            let want = -(2.0 * p.omega * t).cos();
            assert!((z - want).abs() < 1e-6, "t={t}: z={z} want={want}");
        }
        assert!(rec.current.is_none());
    }

    #[test]
    fn trace_drift_is_monitored_and_small() {
        let p = FullSystemParams {
            e_drive: 0.3,
            chi: 0.3,
            n_max: 3,
            duration: 2.0,
            ..Default::default()
        };
        let rec = simulate_conditional(&p).unwrap();
        assert!(rec.trace_drift_max < 10.0 * p.dt * p.dt, "drift {}", rec.trace_drift_max);
        // Plain Euler–Maruyama drops the O(dW²) completion of the measurement
        // update, so eigenvalues dip below zero by O(ηκ·dt); the monitor must
        // see it and report it.
        assert!(rec.positivity_min < 0.0 && rec.positivity_min > -5e-3);
        if rec.positivity_min < -1e-6 {
            assert!(rec.warnings.iter().any(|w| w.contains("positivity")), "{:?}", rec.warnings);
        }
        // and the violation shrinks with the step
        let fine = FullSystemParams { dt: 1e-4, duration: 0.5, ..p };
        let rec_fine = simulate_conditional(&fine).unwrap();
        assert!(rec_fine.positivity_min > 5.0 * rec.positivity_min);
    }

    #[test]
    fn csv_shape_and_parseability() {
        let p = FullSystemParams { n_max: 1, duration: 0.01, ..Default::default() };
        let rec = simulate_conditional(&p).unwrap();
        let mut buf = Vec::new();
        rec.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,z,x,n,current");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 5);
        assert!(!text.contains('\r'));
        for field in first.split(',') {
            field.parse::<f64>().unwrap();
        }
    }

    #[test]
    fn params_validation() {
        let bad = FullSystemParams { eta: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FullSystemParams { dt: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let coarse = FullSystemParams { dt: 0.2, ..Default::default() };
        assert!(!coarse.validate().unwrap().is_empty());
        // dimension mismatch between initial state and engine
        let initial = {
            let cfg = HilbertConfig::new(2).unwrap();
            DensityMatrix::pure(&basis_ket(cfg, 1, 0))
        };
        let (engine, _) = SmeEngine::new(params_small()).unwrap();
        assert!(engine.simulate_conditional_from(&initial).is_err());
    }
}
