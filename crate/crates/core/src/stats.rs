//! Closed-form clock statistics, distribution fitting, thermodynamic
//! accounting, and the statistical-distance (quantum Cramér–Rao) bound.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::CoreError;
use crate::matrix::CMatrix;
use crate::signal::PeriodSet;

const PI: f64 = std::f64::consts::PI;

/// Inverse-Gaussian (Wald) parameters: mean m and shape λ, both in µs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaldParams {
    pub m: f64,
    pub lambda: f64,
}

/// Closed-form Wald statistics of the linearized first-passage clock.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WaldMoments {
    pub m: f64,
    pub lambda: f64,
    pub variance: f64,
    pub snr: f64,
}

/// First-passage moments of the phase clock: m = π/Ω, λ = π/Γ,
/// V = π²Γ/Ω³, SNR = √(Ω/Γ). The identity λ = m³/V holds exactly.
pub fn wald_moments(omega: f64, gamma_meas: f64) -> Result<WaldMoments, CoreError> {
    if !(omega > 0.0) || !(gamma_meas > 0.0) {
        return Err(CoreError::InvalidParam("Omega and Gamma must be > 0".into()));
    }
    Ok(WaldMoments {
        m: PI / omega,
        lambda: PI / gamma_meas,
        variance: PI * PI * gamma_meas / (omega * omega * omega),
        snr: (omega / gamma_meas).sqrt(),
    })
}

/// Wald probability density.
pub fn invgauss_pdf(x: f64, m: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (lambda / (2.0 * PI * x * x * x)).sqrt()
        * (-lambda * (x - m) * (x - m) / (2.0 * m * m * x)).exp()
}

/// ln(erfc(z)/2) valid for large z where erfc underflows.
fn ln_half_erfc(z: f64) -> f64 {
    if z < 20.0 {
        (0.5 * erfc(z)).ln()
    } else {
        // erfc(z) ~ e^{-z²}/(z√π) (1 - 1/(2z²) + 3/(4z⁴))
        let z2 = z * z;
        -z2 - (2.0 * z * PI.sqrt()).ln() + (1.0 - 0.5 / z2 + 0.75 / (z2 * z2)).ln_1p_guard()
    }
}

trait Ln1pGuard {
    fn ln_1p_guard(self) -> f64;
}

impl Ln1pGuard for f64 {
    fn ln_1p_guard(self) -> f64 {
        (self - 1.0).ln_1p()
    }
}

/// Wald cumulative distribution, stable for large λ/m.
pub fn invgauss_cdf(x: f64, m: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s = (lambda / x).sqrt();
    let u1 = s * (x / m - 1.0);
    let u2 = s * (x / m + 1.0);
    // Φ(u) = erfc(−u/√2)/2
    let term1 = 0.5 * erfc(-u1 / std::f64::consts::SQRT_2);
    let ln_term2 = 2.0 * lambda / m + ln_half_erfc(u2 / std::f64::consts::SQRT_2);
    (term1 + ln_term2.exp()).clamp(0.0, 1.0)
}

/// Maximum-likelihood Wald fit of a period sample with a KS goodness
/// statistic. An all-equal sample is reported as degenerate (λ → ∞).
#[derive(Debug, Clone, Serialize)]
pub struct WaldFit {
    pub m: f64,
    pub lambda: f64,
    pub variance: f64,
    pub snr: f64,
    pub ks: Option<f64>,
    #[serde(skip)]
    pub degenerate: bool,
}

/// Closed-form MLE: m̂ the sample mean, 1/λ̂ the mean of (1/Tᵢ − 1/m̂).
/// A sample whose spread sits at or below floating-point resolution
/// (λ̂ > 1e12·m̂, or an exactly constant sample) is reported as degenerate
/// with λ → ∞.
pub fn invgauss_fit(periods: &PeriodSet) -> Result<WaldFit, CoreError> {
    let t = &periods.periods;
    if t.len() < 10 {
        return Err(CoreError::InvalidParam(format!(
            "need at least 10 periods, got {}",
            t.len()
        )));
    }
    if t.iter().any(|&x| !(x > 0.0)) {
        return Err(CoreError::InvalidParam("periods must all be positive".into()));
    }
    let n = t.len() as f64;
    let m = t.iter().sum::<f64>() / n;
    let inv_gap = t.iter().map(|&x| 1.0 / x - 1.0 / m).sum::<f64>() / n;
    if inv_gap <= 0.0 || 1.0 / inv_gap > 1e12 * m {
        return Ok(WaldFit {
            m,
            lambda: f64::INFINITY,
            variance: 0.0,
            snr: f64::INFINITY,
            ks: None,
            degenerate: true,
        });
    }
    let lambda = 1.0 / inv_gap;
    let mut sorted = t.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ks = ks_statistic(&sorted, |x| invgauss_cdf(x, m, lambda));
    Ok(WaldFit {
        m,
        lambda,
        variance: m * m * m / lambda,
        snr: (lambda / m).sqrt(),
        ks: Some(ks),
        degenerate: false,
    })
}

/// Kolmogorov–Smirnov statistic of a sorted sample against a CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max((f - (i as f64 + 1.0) / n).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha`:
/// sqrt(-ln(alpha/2)/2) / sqrt(n).
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Closed-form moments of the two-transition telegraph period.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpPeriodStats {
    pub mu: f64,
    pub nu: f64,
    pub mean: f64,
    pub var: f64,
}

/// Distribution of the telegraph clock period (time for two transitions):
/// P(T) = μν/(ν−μ)(e^{−μT} − e^{−νT}), degenerating to μ²Te^{−μT} as ν → μ.
#[derive(Debug, Clone)]
pub struct JumpPeriodDist {
    pub stats: JumpPeriodStats,
}

impl JumpPeriodDist {
    pub fn pdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let (mu, nu) = (self.stats.mu, self.stats.nu);
        if (nu - mu).abs() < 1e-9 * (nu + mu) {
            let r = 0.5 * (mu + nu);
            r * r * t * (-r * t).exp()
        } else {
            // e^{-μT} - e^{-νT} = -e^{-μT} expm1(-(ν-μ)T)
            mu * nu / (nu - mu) * (-(-mu * t).exp() * (-(nu - mu) * t).exp_m1())
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (mu, nu) = (self.stats.mu, self.stats.nu);
        if (nu - mu).abs() < 1e-9 * (nu + mu) {
            let r = 0.5 * (mu + nu);
            1.0 - (1.0 + r * t) * (-r * t).exp()
        } else {
            1.0 - (nu * (-mu * t).exp() - mu * (-nu * t).exp()) / (nu - mu)
        }
    }
}

pub fn jump_period_dist(rates: &crate::adiabatic::JumpRates) -> Result<JumpPeriodDist, CoreError> {
    let (mu, nu) = (rates.mu, rates.nu);
    if !(mu > 0.0) || !(nu > 0.0) {
        return Err(CoreError::InvalidParam("both rates must be > 0".into()));
    }
    Ok(JumpPeriodDist {
        stats: JumpPeriodStats {
            mu,
            nu,
            mean: (mu + nu) / (mu * nu),
            var: (nu * nu + mu * mu) / (mu * mu * nu * nu),
        },
    })
}

/// Poisson counting statistics of jump ticks in an epoch of length t.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoissonCounts {
    pub mu: f64,
    pub t: f64,
    /// 1/√(μt): relative error of the clock readout over the epoch.
    pub relative_error: f64,
}

impl PoissonCounts {
    /// P(n) = (μt)ⁿ e^{−μt}/n!, evaluated in log space.
    pub fn pmf(&self, n: u64) -> f64 {
        let rate = self.mu * self.t;
        if rate == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        ((n as f64) * rate.ln() - rate - ln_gamma(n as f64 + 1.0)).exp()
    }
}

pub fn poisson_counts(mu: f64, t: f64) -> Result<PoissonCounts, CoreError> {
    if !(mu >= 0.0) || !(t > 0.0) {
        return Err(CoreError::InvalidParam("need mu >= 0 and t > 0".into()));
    }
    let rate = mu * t;
    Ok(PoissonCounts {
        mu,
        t,
        relative_error: if rate > 0.0 { 1.0 / rate.sqrt() } else { f64::INFINITY },
    })
}

/// Rates and energy scales entering the dissipation accounting. Energies
/// default to photon units (E_c = E_q = 1); set them to ħω for SI.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissipationParams {
    pub kappa: f64,
    pub n0: f64,
    pub gamma: f64,
    pub e_c: f64,
    pub e_q: f64,
}

/// ħ in J·µs.
pub const HBAR_J_US: f64 = 1.054571817e-28;

impl DissipationParams {
    pub fn photon_units(kappa: f64, n0: f64, gamma: f64) -> Self {
        DissipationParams { kappa, n0, gamma, e_c: 1.0, e_q: 1.0 }
    }

    /// SI energies from angular frequencies in rad/µs: E = ħω.
    pub fn si(kappa: f64, n0: f64, gamma: f64, omega_c: f64, omega_q: f64) -> Self {
        DissipationParams {
            kappa,
            n0,
            gamma,
            e_c: HBAR_J_US * omega_c,
            e_q: HBAR_J_US * omega_q,
        }
    }
}

/// Average dissipated power κE_c·n₀ + γE_q·(1+Z).
pub fn dissipation_rate(p: &DissipationParams, z: f64) -> Result<f64, CoreError> {
    if z.abs() > 1.0 {
        return Err(CoreError::InvalidParam(format!("|Z| = {} exceeds 1", z.abs())));
    }
    for (name, v) in [
        ("kappa", p.kappa),
        ("n0", p.n0),
        ("gamma", p.gamma),
        ("e_c", p.e_c),
        ("e_q", p.e_q),
    ] {
        if !(v >= 0.0) {
            return Err(CoreError::InvalidParam(format!("{name} must be >= 0")));
        }
    }
    Ok(p.kappa * p.e_c * p.n0 + p.gamma * p.e_q * (1.0 + z))
}

/// Squared statistical-distance rate and its pieces.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceReport {
    /// tr[L_ρ(dρ/dt)·dρ/dt]
    pub rate2: f64,
    /// linear entropy tr ρ²
    #[serde(rename = "S_L")]
    pub s_l: f64,
    pub diverged: bool,
    /// Bloch decomposition (Ṡ_L term, Ẋ², Ẏ², Ż²), available for qubits.
    #[serde(skip)]
    pub components: Option<[f64; 4]>,
}

/// Squared rate of change of the statistical distance,
/// tr[L_ρ(ρ̇)ρ̇] = Σ 2|A_jk|²/(p_j+p_k) over eigenpairs with p_j+p_k ≠ 0,
/// where A is ρ̇ in the eigenbasis of ρ.
///
/// A pure state whose purity is changing is perfectly distinguishable after
/// an infinitesimal step; that divergence is flagged, not thrown. For 2×2
/// inputs the Bloch decomposition (Ṡ_L)²/(2(1−S_L)) + Ẋ² + Ẏ² + Ż² is also
/// returned.
pub fn statistical_distance_rate(
    rho: &CMatrix,
    drho_dt: &CMatrix,
) -> Result<DistanceReport, CoreError> {
    rho.check_same_dim(drho_dt)?;
    if rho.herm_defect() > 1e-8 {
        return Err(CoreError::InvalidParam("rho must be Hermitian".into()));
    }
    if drho_dt.herm_defect() > 1e-8 {
        return Err(CoreError::InvalidParam("drho/dt must be Hermitian".into()));
    }
    let scale = drho_dt.max_abs().max(1.0);
    if drho_dt.trace().norm() > 1e-8 * scale {
        return Err(CoreError::InvalidParam("drho/dt must be traceless".into()));
    }

    let (p, u) = rho.eigh();
    let n = rho.dim();
    // A = U† ρ̇ U
    let udag = u.adjoint();
    let a = CMatrix::mul(&CMatrix::mul(&udag, drho_dt), &u);

    let mut rate2 = 0.0;
    let mut diverged = false;
    let null_tol = 1e-12;
    let amp_tol = 1e-10 * scale;
    for j in 0..n {
        for k in 0..n {
            let psum = p[j] + p[k];
            let amp2 = a.get(j, k).norm_sqr();
            if psum < null_tol {
                if amp2.sqrt() > amp_tol {
                    diverged = true;
                }
                continue;
            }
            rate2 += 2.0 * amp2 / psum;
        }
    }
    let s_l: f64 = p.iter().map(|x| x * x).sum();

    let components = (n == 2).then(|| {
        // right-handed qubit frame with σz|g> = −|g>, ground at index 0
        let xdot = 2.0 * drho_dt.get(0, 1).re;
        let ydot = 2.0 * drho_dt.get(0, 1).im;
        let zdot = drho_dt.get(1, 1).re - drho_dt.get(0, 0).re;
        let bx = 2.0 * rho.get(0, 1).re;
        let by = 2.0 * rho.get(0, 1).im;
        let bz = rho.get(1, 1).re - rho.get(0, 0).re;
        let sl_dot = bx * xdot + by * ydot + bz * zdot;
        let gap = 2.0 * (1.0 - s_l);
        let term0 = if gap.abs() < 1e-12 {
            if sl_dot.abs() < amp_tol {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            sl_dot * sl_dot / gap
        };
        [term0, xdot * xdot, ydot * ydot, zdot * zdot]
    });
    if let Some(c) = &components {
        if c[0].is_infinite() {
            diverged = true;
        }
    }

    Ok(DistanceReport { rate2, s_l, diverged, components })
}

/// Per-photon ac Stark and measurement-dephasing slopes and their ratio:
/// Δ_ac/n̄ = 2χ, Γ_φ/n̄ = 8χ²/κ, ratio κ/(4χ).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StarkCalibration {
    pub stark_slope: f64,
    pub dephasing_slope: f64,
    pub ratio: f64,
}

/// Measured slope-ratio factor (in units of κ/4χ) quoted for the reference
/// device; kept as a comparison constant, not a model output.
pub const EXPERIMENTAL_RATIO_FACTOR: f64 = 0.775;

pub fn stark_calibration(chi: f64, kappa: f64) -> Result<StarkCalibration, CoreError> {
    if !(chi > 0.0) || !(kappa > 0.0) {
        return Err(CoreError::InvalidParam("chi and kappa must be > 0".into()));
    }
    Ok(StarkCalibration {
        stark_slope: 2.0 * chi,
        dephasing_slope: 8.0 * chi * chi / kappa,
        ratio: kappa / (4.0 * chi),
    })
}

/// Convert an energy variance (J²) into the squared distance rate (µs⁻²):
/// rate² = 4·Var(H)/ħ².
pub fn distance_rate2_from_energy_variance(var_h: f64) -> f64 {
    4.0 * var_h / (HBAR_J_US * HBAR_J_US)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::JumpRates;
    use crate::matrix::{CMatrix, I, ONE, ZERO};
    use crate::signal::PeriodMeta;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64;
    use proptest::{proptest, prop_assert, prop_assert_eq};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn period_set(periods: Vec<f64>) -> PeriodSet {
        PeriodSet { periods, meta: PeriodMeta::default() }
    }

    #[test]
    fn wald_moments_examples() {
        let w = wald_moments(PI, PI).unwrap();
        assert_abs_diff_eq!(w.m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.lambda, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.variance, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.snr, 1.0, epsilon = 1e-15);

        let w = wald_moments(4.0, 1.0).unwrap();
        assert_abs_diff_eq!(w.snr, 2.0, epsilon = 1e-15);

        // perfect-clock limit: variance collapses, SNR blows up
        let w = wald_moments(1.0, 1e-9).unwrap();
        assert!(w.variance < 1e-8);
        assert!(w.snr > 1e4);

        assert!(wald_moments(0.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn wald_shape_identity(omega in 1e-3f64..1e3, gamma in 1e-3f64..1e3) {
            let w = wald_moments(omega, gamma).unwrap();
            // λ = m³/V, identity of the closed forms
            prop_assert!((w.lambda - w.m.powi(3) / w.variance).abs() <= 1e-12 * w.lambda);
        }
    }

    #[test]
    fn invgauss_cdf_against_quadrature() {
        // integrate the pdf and compare at a few quantiles
        let (m, lambda) = (1.3, 4.2);
        for x in [0.3, 0.9, 1.5, 3.0] {
            let n = 40_000;
            let h = x / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let a = i as f64 * h;
                acc += h / 6.0
                    * (invgauss_pdf(a, m, lambda)
                        + 4.0 * invgauss_pdf(a + 0.5 * h, m, lambda)
                        + invgauss_pdf(a + h, m, lambda));
            }
            assert_abs_diff_eq!(invgauss_cdf(x, m, lambda), acc, epsilon = 1e-8);
        }
        // stable in the large-shape regime
        let c = invgauss_cdf(1.0, 1.0, 5000.0);
        assert!((c - 0.5).abs() < 0.01, "cdf {c}");
        assert!(invgauss_cdf(1e9, 1.0, 5000.0) <= 1.0);
    }

    #[test]
    fn invgauss_fit_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dist = rand_distr::InverseGaussian::new(1.0, 10.0).unwrap();
        let samples: Vec<f64> = (0..10_000).map(|_| rng.sample(dist)).collect();
        let fit = invgauss_fit(&period_set(samples)).unwrap();
        assert!((fit.m - 1.0).abs() < 0.05, "m {}", fit.m);
        assert!((fit.lambda - 10.0).abs() / 10.0 < 0.05, "lambda {}", fit.lambda);
        assert!(!fit.degenerate);
        let ks = fit.ks.unwrap();
        assert!(ks < ks_critical(10_000, 0.01), "ks {ks}");
    }

    #[test]
    fn invgauss_fit_degenerate_and_errors() {
        let fit = invgauss_fit(&period_set(vec![2.5; 50])).unwrap();
        assert!(fit.degenerate);
        assert_abs_diff_eq!(fit.m, 2.5);
        assert!(fit.lambda.is_infinite());

        assert!(invgauss_fit(&period_set(vec![1.0; 5])).is_err());
        let mut bad = vec![1.0; 20];
        bad[3] = 0.0;
        assert!(invgauss_fit(&period_set(bad)).is_err());
    }

    #[test]
    fn invgauss_fit_rescaling_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dist = rand_distr::InverseGaussian::new(2.0, 6.0).unwrap();
        let samples: Vec<f64> = (0..500).map(|_| rng.sample(dist)).collect();
        let base = invgauss_fit(&period_set(samples.clone())).unwrap();
        // power-of-two scale: exact in floating point
        let c = 4.0;
        let scaled: Vec<f64> = samples.iter().map(|&x| c * x).collect();
        let fit = invgauss_fit(&period_set(scaled)).unwrap();
        assert_eq!(fit.m, c * base.m);
        assert_eq!(fit.lambda, c * base.lambda);
        // generic scale to float tolerance
        let c = 1.7;
        let scaled: Vec<f64> = samples.iter().map(|&x| c * x).collect();
        let fit = invgauss_fit(&period_set(scaled)).unwrap();
        assert_relative_eq!(fit.m, c * base.m, epsilon = 1e-12);
        assert_relative_eq!(fit.lambda, c * base.lambda, epsilon = 1e-10);
    }

    #[test]
    fn invgauss_fit_matches_first_passage(){
        let ps = crate::adiabatic::sample_first_passage(PI, PI, 1e-4, 2000, 77).unwrap();
        let fit = invgauss_fit(&ps).unwrap();
        // SE of the mean is sqrt(V/N) = sqrt(1/2000)
        let se = (1.0f64 / 2000.0).sqrt();
        assert!((fit.m - 1.0).abs() < 3.0 * se, "m {}", fit.m);
    }

    #[test]
    fn jump_period_examples() {
        let d = jump_period_dist(&JumpRates::new(1.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d.pdf(1.0), (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(d.stats.mean, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.stats.var, 2.0, epsilon = 1e-15);

        // fast up-jumps: mean approaches 1/ν
        let d = jump_period_dist(&JumpRates::new(1e6, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(d.stats.mean, 1.0, epsilon = 2e-6);

        assert!(jump_period_dist(&JumpRates::new(0.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn jump_period_pdf_normalizes() {
        for (mu, nu) in [(1.0, 1.0), (0.3, 2.0), (2.0, 2.0000001)] {
            let d = jump_period_dist(&JumpRates::new(mu, nu).unwrap()).unwrap();
            let hi = 50.0 / mu.min(nu);
            let n = 200_000;
            let h = hi / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let a = i as f64 * h;
                acc += h / 6.0 * (d.pdf(a) + 4.0 * d.pdf(a + 0.5 * h) + d.pdf(a + h));
            }
            assert!((acc - 1.0).abs() < 1e-6, "norm {acc} for ({mu}, {nu})");
        }
    }

    #[test]
    fn jump_period_continuous_at_degeneracy() {
        let mu = 0.8;
        let eps = 1e-8 * mu;
        let near = jump_period_dist(&JumpRates::new(mu, mu + eps).unwrap()).unwrap();
        let degen = jump_period_dist(&JumpRates::new(mu, mu).unwrap()).unwrap();
        for t in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            assert!(
                (near.pdf(t) - degen.pdf(t)).abs() < 1e-6,
                "discontinuity at {t}: {} vs {}",
                near.pdf(t),
                degen.pdf(t)
            );
        }
    }

    #[test]
    fn poisson_examples() {
        let p = poisson_counts(1.0, 100.0).unwrap();
        assert_abs_diff_eq!(p.relative_error, 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(p.pmf(100), 0.039861, epsilon = 1e-5);

        let p = poisson_counts(0.0, 5.0).unwrap();
        assert_eq!(p.pmf(0), 1.0);
        assert_eq!(p.pmf(3), 0.0);
        assert!(p.relative_error.is_infinite());

        // huge rate handled in log space
        let p = poisson_counts(1e4, 100.0).unwrap();
        let pk = p.pmf(1_000_000);
        assert!(pk > 0.0 && pk < 1.0);
    }

    #[test]
    fn jump_counts_are_poisson_dispersed() {
        // skewed telegraph: up-jumps approach a Poisson stream
        let rates = JumpRates::new(0.1, 10.0).unwrap();
        let rec = crate::adiabatic::simulate_telegraph(&rates, 20_000.0, 4).unwrap();
        let ups = rec.up_times();
        let window = 100.0;
        let n_windows = (20_000.0 / window) as usize;
        let mut counts = vec![0usize; n_windows];
        for t in ups {
            let w = (t / window) as usize;
            if w < n_windows {
                counts[w] += 1;
            }
        }
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<usize>() as f64 / n;
        let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let fano = var / mean;
        // SE of a variance ratio for ~n windows
        let se = (2.0 / n).sqrt();
        assert!((fano - 1.0).abs() < 3.0 * se, "Fano {fano} se {se}");
    }

    #[test]
    fn dissipation_examples_and_monotonicity() {
        let p = DissipationParams::photon_units(1.0, 0.0, 0.5);
        assert_eq!(dissipation_rate(&p, -1.0).unwrap(), 0.0);

        let p = DissipationParams::photon_units(1.0, 10.0, 0.0);
        assert_abs_diff_eq!(dissipation_rate(&p, 0.3).unwrap(), 10.0);

        assert!(dissipation_rate(&p, 1.5).is_err());

        let mut prev = -1.0;
        for k in 0..20 {
            let n0 = k as f64 * 0.5;
            let p = DissipationParams::photon_units(1.0, n0, 0.2);
            let d = dissipation_rate(&p, 0.0).unwrap();
            assert!(d >= prev);
            prev = d;
        }
        let p = DissipationParams::photon_units(1.0, 1.0, 0.2);
        let mut prev = -1.0;
        for k in 0..10 {
            let z = -1.0 + 0.2 * k as f64;
            let d = dissipation_rate(&p, z).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn accuracy_dissipation_trade_off_closed_forms() {
        // growing photon number: dissipation up, Wald shape down
        let (chi, kappa, omega) = (0.2, 1.0, 2.0);
        let mut prev_lambda = f64::INFINITY;
        let mut prev_diss = -1.0;
        for k in 1..=8 {
            let n0 = k as f64;
            let gamma_meas = 4.0 * chi * chi * n0 / kappa;
            let w = wald_moments(omega, gamma_meas).unwrap();
            let d = dissipation_rate(&DissipationParams::photon_units(kappa, n0, 0.0), 0.0)
                .unwrap();
            assert!(w.lambda < prev_lambda);
            assert!(d > prev_diss);
            prev_lambda = w.lambda;
            prev_diss = d;
        }
    }

    fn qubit_rho(x: f64, y: f64, z: f64) -> CMatrix {
        // (1 + r·σ)/2 with σz|g> = −|g>, ground at index 0, right-handed y
        let mut m = CMatrix::zeros(2);
        m.set(0, 0, Complex64::new(0.5 * (1.0 - z), 0.0));
        m.set(1, 1, Complex64::new(0.5 * (1.0 + z), 0.0));
        m.set(0, 1, Complex64::new(0.5 * x, 0.5 * y));
        m.set(1, 0, Complex64::new(0.5 * x, -0.5 * y));
        m
    }

    #[test]
    fn distance_rate_zero_for_static_state() {
        let rho = qubit_rho(0.2, -0.1, 0.4);
        let zero = CMatrix::zeros(2);
        let rep = statistical_distance_rate(&rho, &zero).unwrap();
        assert_eq!(rep.rate2, 0.0);
        assert!(!rep.diverged);
    }

    #[test]
    fn distance_rate_pure_rabi_matches_fidelity_oracle() {
        // ground state driven by H = Ω σx: rate² = 4⟨ΔH²⟩ = 4Ω²
        let omega = 0.9;
        let rho = qubit_rho(0.0, 0.0, -1.0);
        // ρ̇ = −iΩ[σx, ρ]
        let sx = CMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let comm = &CMatrix::mul(&sx, &rho) - &CMatrix::mul(&rho, &sx);
        let drho = comm.scaled(-I * omega);
        let rep = statistical_distance_rate(&rho, &drho).unwrap();
        assert!(!rep.diverged);
        assert_abs_diff_eq!(rep.rate2, 4.0 * omega * omega, epsilon = 1e-8);

        // finite-difference fidelity oracle: evolve exactly, Bures angle rate
        let delta = 1e-3;
        let (c, s) = ((omega * delta).cos(), (omega * delta).sin());
        // |ψ(δ)> = cos(Ωδ)|g> − i sin(Ωδ)|e>
        let rho_d = {
            let mut m = CMatrix::zeros(2);
            m.set(0, 0, Complex64::new(c * c, 0.0));
            m.set(1, 1, Complex64::new(s * s, 0.0));
            // |g><e| component: c · conj(−i s) = i c s
            m.set(0, 1, Complex64::new(0.0, c * s));
            m.set(1, 0, Complex64::new(0.0, -c * s));
            m
        };
        // qubit fidelity: F = tr(ρ₁ρ₂) + 2√(det ρ₁ det ρ₂); both pure here
        let f = CMatrix::trace_of_product(&rho, &rho_d).re;
        let angle = (1.0 - f).max(0.0).sqrt().asin();
        let oracle_rate2 = (2.0 * angle / delta).powi(2);
        assert_abs_diff_eq!(rep.rate2, oracle_rate2, epsilon = 1e-8);
    }

    #[test]
    fn distance_rate_bloch_equals_general_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            // random mixed state strictly inside the ball
            let (x, y, z) = loop {
                let v = (
                    2.0 * rng.gen::<f64>() - 1.0,
                    2.0 * rng.gen::<f64>() - 1.0,
                    2.0 * rng.gen::<f64>() - 1.0,
                );
                let r2: f64 = v.0 * v.0 + v.1 * v.1 + v.2 * v.2;
                if r2 < 0.9 {
                    break v;
                }
            };
            let rho = qubit_rho(x, y, z);
            // random traceless Hermitian ρ̇
            let (dx, dy, dz) = (
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            let mut drho = qubit_rho(dx, dy, dz);
            // remove the identity part to make it traceless
            let tr = drho.trace();
            drho.add_scaled_assign(
                &CMatrix::identity(2),
                Complex64::new(-tr.re / 2.0, 0.0),
            );
            let rep = statistical_distance_rate(&rho, &drho).unwrap();
            let bloch: f64 = rep.components.unwrap().iter().sum();
            assert_abs_diff_eq!(rep.rate2, bloch, epsilon = 1e-8);
        }
    }

    #[test]
    fn distance_rate_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // random Hermitian generator -> eigenvectors form a unitary
        let h = {
            let g = CMatrix::from_fn(4, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let mut m = g.clone();
            m.add_adjoint_scaled_assign(&g, ONE);
            m
        };
        let (_, u) = h.eigh();
        let udag = u.adjoint();

        // mixed 4-dim state and a traceless Hermitian derivative
        let rho = {
            let g = CMatrix::from_fn(4, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let mut m = CMatrix::mul(&g, &g.adjoint());
            let tr = m.trace();
            m.scale_assign(Complex64::new(1.0 / tr.re, 0.0));
            m
        };
        let drho = {
            let g = CMatrix::from_fn(4, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let mut m = g.clone();
            m.add_adjoint_scaled_assign(&g, ONE);
            let tr = m.trace();
            m.add_scaled_assign(&CMatrix::identity(4), Complex64::new(-tr.re / 4.0, 0.0));
            m
        };
        let base = statistical_distance_rate(&rho, &drho).unwrap();
        let rho_u = CMatrix::mul(&CMatrix::mul(&u, &rho), &udag);
        let drho_u = CMatrix::mul(&CMatrix::mul(&u, &drho), &udag);
        let conj = statistical_distance_rate(&rho_u, &drho_u).unwrap();
        assert_abs_diff_eq!(base.rate2, conj.rate2, epsilon = 1e-8);
        assert_abs_diff_eq!(base.s_l, conj.s_l, epsilon = 1e-10);
    }

    #[test]
    fn distance_rate_flags_pure_state_divergence() {
        // amplitude decay of the excited state changes the purity of a pure
        // state: the null-space block of ρ̇ is populated
        let rho = qubit_rho(0.0, 0.0, 1.0); // |e><e|
        let mut drho = CMatrix::zeros(2);
        drho.set(0, 0, ONE);
        drho.set(1, 1, -ONE);
        let rep = statistical_distance_rate(&rho, &drho).unwrap();
        assert!(rep.diverged);
        // Hamiltonian motion of a pure state does not diverge
        let sx = CMatrix::from_fn(2, |i, j| if i != j { ONE } else { ZERO });
        let comm = &CMatrix::mul(&sx, &rho) - &CMatrix::mul(&rho, &sx);
        let rep = statistical_distance_rate(&rho, &comm.scaled(-I)).unwrap();
        assert!(!rep.diverged);
    }

    #[test]
    fn distance_report_serialization_shape() {
        let rho = qubit_rho(0.1, 0.0, -0.2);
        let zero = CMatrix::zeros(2);
        let rep = statistical_distance_rate(&rho, &zero).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json.get("rate2").is_some());
        assert!(json.get("S_L").is_some());
        assert!(json.get("diverged").is_some());
    }

    #[test]
    fn stark_calibration_examples() {
        let c = stark_calibration(1.0, 8.0).unwrap();
        assert_abs_diff_eq!(c.ratio, 2.0);
        assert_abs_diff_eq!(c.stark_slope, 2.0);
        // unit photon: Stark shift equals the slope
        assert_abs_diff_eq!(c.stark_slope * 1.0, 2.0);
        let comparison = EXPERIMENTAL_RATIO_FACTOR * c.ratio;
        assert_abs_diff_eq!(comparison, 1.55, epsilon = 1e-12);
        assert!(stark_calibration(0.0, 1.0).is_err());
    }

    #[test]
    fn si_conversion_scales() {
        let p = DissipationParams::si(1.0, 10.0, 0.0, 2.0 * PI * 7020.0, 2.0 * PI * 4750.0);
        let d = dissipation_rate(&p, 0.0).unwrap();
        assert_relative_eq!(d, 10.0 * HBAR_J_US * 2.0 * PI * 7020.0, epsilon = 1e-12);
        assert_relative_eq!(
            distance_rate2_from_energy_variance(HBAR_J_US * HBAR_J_US * 2.25),
            9.0,
            epsilon = 1e-12
        );
    }
}
