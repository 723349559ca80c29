//! Clock-signal extraction: IQ ingestion and rotation, low-pass filtering,
//! sign binarization and period extraction, averaged periodograms, noise-floor
//! subtraction, Lorentzian peak fits, and telegraph dwell statistics.
//!
//! Everything is deterministic: the same input always produces bit-identical
//! output.

use std::io::BufRead;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::CoreError;

/// Uniformly sampled real record. `fs` is in samples/µs.
#[derive(Debug, Clone)]
pub struct Signal {
    pub fs: f64,
    pub samples: Vec<f64>,
}

impl Signal {
    pub fn new(fs: f64, samples: Vec<f64>) -> Result<Self, CoreError> {
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(CoreError::InvalidParam(format!("fs must be positive, got {fs}")));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(CoreError::InvalidParam("signal contains non-finite samples".into()));
        }
        Ok(Signal { fs, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn subtract_mean(&mut self) {
        let m = self.mean();
        for s in &mut self.samples {
            *s -= m;
        }
    }

    /// Keep every k-th sample.
    pub fn decimate(&self, stride: usize) -> Signal {
        let stride = stride.max(1);
        Signal {
            fs: self.fs / stride as f64,
            samples: self.samples.iter().step_by(stride).copied().collect(),
        }
    }
}

/// Provenance of an extracted period set.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PeriodMeta {
    pub source: String,
    pub filter_cutoff: Option<f64>,
    pub threshold: Option<f64>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// Extracted clock periods (µs).
#[derive(Debug, Clone, Serialize)]
pub struct PeriodSet {
    pub periods: Vec<f64>,
    pub meta: PeriodMeta,
}

impl PeriodSet {
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"period\n")?;
        for p in &self.periods {
            writeln!(w, "{}", crate::sme::fmt9(*p))?;
        }
        Ok(())
    }
}

/// Result of IQ ingestion: rotation and residual-power diagnostics.
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub rotation_phase: f64,
    /// power left in the discarded quadrature over power kept
    pub residual_power_ratio: f64,
    pub warnings: Vec<String>,
}

fn fft_in_place(buf: &mut [Complex64]) {
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(buf.len());
    fft.process(buf);
}

/// Parse a one-column (`value`) or two-column (`I,Q`) CSV into a complex
/// series. A non-numeric first row is treated as a header.
fn parse_iq<R: BufRead>(reader: R) -> Result<(Vec<Complex64>, bool), CoreError> {
    let mut data = Vec::new();
    let mut two_col = None;
    for (idx, line) in reader.lines().enumerate() {
        let line =
            line.map_err(|e| CoreError::Malformed { line: idx + 1, reason: e.to_string() })?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let fields: Vec<&str> = t.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue, // header row
            Err(e) => {
                return Err(CoreError::Malformed { line: idx + 1, reason: e.to_string() });
            }
        };
        let is_two = match vals.len() {
            1 => false,
            2 => true,
            n => {
                return Err(CoreError::Malformed {
                    line: idx + 1,
                    reason: format!("expected 1 or 2 columns, got {n}"),
                });
            }
        };
        match two_col {
            None => two_col = Some(is_two),
            Some(prev) if prev != is_two => {
                return Err(CoreError::Malformed {
                    line: idx + 1,
                    reason: "inconsistent column count".into(),
                });
            }
            _ => {}
        }
        data.push(if is_two {
            Complex64::new(vals[0], vals[1])
        } else {
            Complex64::new(vals[0], 0.0)
        });
    }
    if data.is_empty() {
        return Err(CoreError::EmptyInput("no samples".into()));
    }
    Ok((data, two_col.unwrap_or(false)))
}

/// Ingest an IQ record: rotate the complex data by the phase of its dominant
/// spectral pair so the oscillation lands in the real quadrature, then return
/// the mean-subtracted real part.
///
/// For a record of the form e^{iφ}·x(t) with real x, the product of the DFT
/// coefficients at ±f is e^{2iφ}|X(f)|², which pins φ up to sign.
pub fn ingest_iq<R: BufRead>(reader: R, fs: f64) -> Result<(Signal, IngestReport), CoreError> {
    let (mut data, two_col) = parse_iq(reader)?;
    let n = data.len();
    let mean: Complex64 = data.iter().sum::<Complex64>() / n as f64;
    for d in &mut data {
        *d -= mean;
    }
    let total_power: f64 = data.iter().map(|d| d.norm_sqr()).sum();
    if total_power == 0.0 {
        return Err(CoreError::NoPeak);
    }

    let mut report =
        IngestReport { rotation_phase: 0.0, residual_power_ratio: 0.0, warnings: Vec::new() };

    if two_col {
        let mut spec = data.clone();
        fft_in_place(&mut spec);
        let mut best_k = 0;
        let mut best_p = -1.0;
        for k in 1..=n / 2 {
            let p = spec[k].norm_sqr() + spec[n - k].norm_sqr();
            if p > best_p {
                best_p = p;
                best_k = k;
            }
        }
        if best_p <= 0.0 {
            return Err(CoreError::NoPeak);
        }
        let phase = 0.5 * (spec[best_k] * spec[n - best_k]).arg();
        let rot = Complex64::from_polar(1.0, -phase);
        for d in &mut data {
            *d *= rot;
        }
        report.rotation_phase = phase;
        let kept: f64 = data.iter().map(|d| d.re * d.re).sum();
        let residual: f64 = data.iter().map(|d| d.im * d.im).sum();
        report.residual_power_ratio = if kept > 0.0 { residual / kept } else { f64::INFINITY };
        if report.residual_power_ratio > 0.2 {
            report.warnings.push(format!(
                "discarded quadrature holds {:.1}% of the kept power",
                100.0 * report.residual_power_ratio
            ));
        }
    }

    let mut sig = Signal::new(fs, data.iter().map(|d| d.re).collect())?;
    sig.subtract_mean();
    Ok((sig, report))
}

pub fn ingest_iq_path(
    path: &std::path::Path,
    fs: f64,
) -> Result<(Signal, IngestReport), CoreError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CoreError::InvalidParam(format!("{}: {e}", path.display())))?;
    ingest_iq(std::io::BufReader::new(file), fs)
}

/// Second-order Butterworth low-pass (bilinear transform, prewarped), causal
/// forward pass with zero initial conditions. DC gain is exactly 1.
pub fn butter2_lowpass(sig: &Signal, fc: f64) -> Result<Signal, CoreError> {
    if !(fc > 0.0) || fc >= sig.fs / 2.0 {
        return Err(CoreError::InvalidParam(format!(
            "cutoff {fc} out of range (0, fs/2 = {})",
            sig.fs / 2.0
        )));
    }
    let k = 1.0 / (std::f64::consts::PI * fc / sig.fs).tan();
    let sqrt2 = std::f64::consts::SQRT_2;
    let c = 1.0 + sqrt2 * k + k * k;
    let b0 = 1.0 / c;
    let b1 = 2.0 / c;
    let b2 = 1.0 / c;
    let a1 = 2.0 * (1.0 - k * k) / c;
    let a2 = (1.0 - sqrt2 * k + k * k) / c;

    let mut out = Vec::with_capacity(sig.len());
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for &x in &sig.samples {
        let y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        out.push(y);
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
    }
    Signal::new(sig.fs, out)
}

/// Sign-binarize a (re-)mean-subtracted signal and extract clock periods as
/// differences of successive rising zero-crossing times. Crossing times are
/// linearly interpolated between samples; sign(0) counts as +1.
pub fn binarize_and_periods(sig: &Signal) -> (Vec<i8>, PeriodSet) {
    let mean = sig.mean();
    let shifted: Vec<f64> = sig.samples.iter().map(|s| s - mean).collect();
    let binary: Vec<i8> = shifted.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect();

    let mut edges = Vec::new();
    for i in 0..shifted.len().saturating_sub(1) {
        if shifted[i] < 0.0 && shifted[i + 1] >= 0.0 {
            let frac = -shifted[i] / (shifted[i + 1] - shifted[i]);
            edges.push((i as f64 + frac) / sig.fs);
        }
    }
    let mut meta = PeriodMeta { source: "sign_crossings".into(), ..Default::default() };
    let periods: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    if edges.len() < 2 {
        meta.warnings.push("fewer than 2 rising edges; no periods extracted".into());
    }
    (binary, PeriodSet { periods, meta })
}

/// Window bookkeeping for a PSD estimate.
#[derive(Debug, Clone, Serialize)]
pub struct WindowInfo {
    pub window: String,
    pub segment_length: usize,
    pub overlap: f64,
    pub n_segments: usize,
}

/// One-sided power spectral density. `freqs` in 1/µs, ascending.
#[derive(Debug, Clone)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub window: WindowInfo,
}

impl Psd {
    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        let mut best_p = f64::MIN;
        for (i, &p) in self.power.iter().enumerate() {
            if p > best_p {
                best_p = p;
                best = i;
            }
        }
        best
    }

    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"freq,power\n")?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            writeln!(w, "{},{}", crate::sme::fmt9(*f), crate::sme::fmt9(*p))?;
        }
        Ok(())
    }

    /// Average several PSDs taken with identical binning.
    pub fn average(psds: &[Psd]) -> Result<Psd, CoreError> {
        let first = psds.first().ok_or_else(|| CoreError::EmptyInput("no PSDs".into()))?;
        let mut power = vec![0.0; first.power.len()];
        for p in psds {
            if p.power.len() != power.len() {
                return Err(CoreError::InvalidParam("PSD bin counts differ".into()));
            }
            for (acc, v) in power.iter_mut().zip(&p.power) {
                *acc += v;
            }
        }
        for v in &mut power {
            *v /= psds.len() as f64;
        }
        Ok(Psd { freqs: first.freqs.clone(), power, window: first.window.clone() })
    }
}

/// Hann-windowed averaged periodogram (one-sided). `overlap` is the fraction
/// of each segment shared with the next, e.g. 0.5.
///
/// Normalization: sum(power)·df equals the window-weighted mean square of the
/// signal, averaged over segments.
pub fn periodogram(sig: &Signal, segment_length: usize, overlap: f64) -> Result<Psd, CoreError> {
    let n = segment_length;
    if n > sig.len() {
        return Err(CoreError::InvalidParam(format!(
            "segment length {n} exceeds signal length {}",
            sig.len()
        )));
    }
    if n < 4 {
        return Err(CoreError::InvalidParam("segment length must be >= 4".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(CoreError::InvalidParam("overlap must be in [0, 1)".into()));
    }
    let hop = ((n as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()))
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();

    let n_bins = n / 2 + 1;
    let mut power = vec![0.0; n_bins];
    let mut n_segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= sig.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(sig.samples[start + i] * window[i], 0.0);
        }
        fft_in_place(&mut buf);
        for (k, pk) in power.iter_mut().enumerate() {
            let mut p = buf[k].norm_sqr();
            if k != 0 && 2 * k != n {
                p += buf[n - k].norm_sqr();
            }
            *pk += p / (sig.fs * wss);
        }
        n_segments += 1;
        start += hop;
    }
    for p in &mut power {
        *p /= n_segments as f64;
    }
    let freqs: Vec<f64> = (0..n_bins).map(|k| k as f64 * sig.fs / n as f64).collect();
    Ok(Psd {
        freqs,
        power,
        window: WindowInfo { window: "hann".into(), segment_length: n, overlap, n_segments },
    })
}

/// Least-squares polynomial fit of y(x), evaluated at `eval_at`. The abscissa
/// is rescaled to [-1, 1] for conditioning.
fn polyfit_eval(
    x: &[f64],
    y: &[f64],
    degree: usize,
    eval_at: &[f64],
) -> Result<Vec<f64>, CoreError> {
    let n = x.len();
    if n < degree + 2 {
        return Err(CoreError::DegenerateFit(format!(
            "{n} points cannot constrain degree {degree}"
        )));
    }
    let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (xmax - xmin).max(f64::MIN_POSITIVE);
    let scale = |v: f64| 2.0 * (v - xmin) / span - 1.0;
    let cols = degree + 1;
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, cols);
    for (i, &xi) in x.iter().enumerate() {
        let s = scale(xi);
        let mut pw = 1.0;
        for j in 0..cols {
            a[(i, j)] = pw;
            pw *= s;
        }
    }
    let b = nalgebra::DVector::<f64>::from_column_slice(y);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let coef = ata
        .cholesky()
        .ok_or_else(|| CoreError::DegenerateFit("singular polynomial system".into()))?
        .solve(&atb);
    Ok(eval_at
        .iter()
        .map(|&xi| {
            let s = scale(xi);
            let mut pw = 1.0;
            let mut acc = 0.0;
            for j in 0..cols {
                acc += coef[j] * pw;
                pw *= s;
            }
            acc
        })
        .collect())
}

/// Subtract a polynomial noise floor fitted over bins away from the dominant
/// peak. The mask is ±3 fitted half-widths around the max bin and the
/// fit-mask-subtract cycle runs twice; the result is clipped at zero.
pub fn noise_floor_subtract(psd: &Psd, poly_degree: usize) -> Result<Psd, CoreError> {
    if poly_degree > 6 {
        return Err(CoreError::InvalidParam("polynomial degree must be <= 6".into()));
    }
    let n = psd.power.len();
    if n < poly_degree + 4 {
        return Err(CoreError::DegenerateFit("too few bins".into()));
    }
    if psd.power.iter().all(|&p| p == 0.0) {
        return Ok(psd.clone());
    }
    let df = psd.df();
    let mut width = 5.0 * df; // initial full-width guess, matching the fit seed
    let mut subtracted = psd.power.clone();
    for _ in 0..2 {
        let kmax = {
            let mut best = 0;
            let mut bp = f64::MIN;
            for (i, &p) in subtracted.iter().enumerate() {
                if p > bp {
                    bp = p;
                    best = i;
                }
            }
            best
        };
        let f_peak = psd.freqs[kmax];
        let mask_half = 3.0 * width / 2.0;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, &f) in psd.freqs.iter().enumerate() {
            if (f - f_peak).abs() > mask_half {
                xs.push(f);
                ys.push(psd.power[i]);
            }
        }
        if xs.len() < poly_degree + 2 {
            return Err(CoreError::DegenerateFit("all bins masked".into()));
        }
        let floor = polyfit_eval(&xs, &ys, poly_degree, &psd.freqs)?;
        for (i, s) in subtracted.iter_mut().enumerate() {
            *s = (psd.power[i] - floor[i].max(0.0)).max(0.0);
        }
        let tmp = Psd {
            freqs: psd.freqs.clone(),
            power: subtracted.clone(),
            window: psd.window.clone(),
        };
        if let Ok(fit) = lorentzian_fit(&tmp) {
            if fit.width.is_finite() && fit.width > 0.0 {
                width = fit.width;
            }
        }
    }
    Ok(Psd { freqs: psd.freqs.clone(), power: subtracted, window: psd.window.clone() })
}

/// Lorentzian peak fit A·(w/2)²/((f−f₀)² + (w/2)²) + c.
#[derive(Debug, Clone, Serialize)]
pub struct LorentzFit {
    /// center frequency
    pub f0: f64,
    /// full width at half maximum
    pub width: f64,
    pub amp: f64,
    pub offset: f64,
    /// L2 norm of the fit residual
    pub residual: f64,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn lorentz_model(f: f64, p: &[f64; 4]) -> f64 {
    let u = (p[1] / 2.0) * (p[1] / 2.0);
    let d = (f - p[0]) * (f - p[0]) + u;
    p[2] * u / d + p[3]
}

fn lorentz_jacobian(f: f64, p: &[f64; 4]) -> [f64; 4] {
    let half = p[1] / 2.0;
    let u = half * half;
    let df = f - p[0];
    let d = df * df + u;
    [p[2] * u * 2.0 * df / (d * d), p[2] * half * df * df / (d * d), u / d, 1.0]
}

fn sq_residual(psd: &Psd, p: &[f64; 4]) -> f64 {
    psd.freqs
        .iter()
        .zip(&psd.power)
        .map(|(&f, &y)| {
            let r = y - lorentz_model(f, p);
            r * r
        })
        .sum()
}

/// Levenberg–Marquardt fit of a Lorentzian to a PSD. Initial guess: center at
/// the max bin, width 5 bins, amplitude the peak height over the median.
/// Converged when the relative step drops below 1e-8 within 200 iterations.
pub fn lorentzian_fit(psd: &Psd) -> Result<LorentzFit, CoreError> {
    let n = psd.power.len();
    if n < 8 {
        return Err(CoreError::InvalidParam(format!("need at least 8 bins, got {n}")));
    }
    let kmax = psd.peak_bin();
    let mut sorted = psd.power.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[n / 2];
    let df = psd.df();
    let mut p = [
        psd.freqs[kmax],
        5.0 * df,
        (psd.power[kmax] - median).max(sorted[n - 1] * 1e-6),
        median,
    ];

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut chi2 = sq_residual(psd, &p);
    for _ in 0..200 {
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for (i, &f) in psd.freqs.iter().enumerate() {
            let r = psd.power[i] - lorentz_model(f, &p);
            let j = lorentz_jacobian(f, &p);
            for a in 0..4 {
                jtr[a] += j[a] * r;
                for b in 0..4 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut m = nalgebra::Matrix4::<f64>::zeros();
        for a in 0..4 {
            for b in 0..4 {
                m[(a, b)] = jtj[a][b];
            }
            m[(a, a)] *= 1.0 + lambda;
            if m[(a, a)] == 0.0 {
                m[(a, a)] = 1e-30;
            }
        }
        let rhs = nalgebra::Vector4::from_column_slice(&jtr);
        let Some(step) = m.lu().solve(&rhs) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p;
        for a in 0..4 {
            trial[a] += step[a];
        }
        trial[1] = trial[1].abs().max(df * 1e-6);
        let trial_chi2 = sq_residual(psd, &trial);
        if trial_chi2 <= chi2 {
            let rel = (0..4)
                .map(|a| (trial[a] - p[a]).abs() / (p[a].abs().max(1e-30)))
                .fold(0.0f64, f64::max);
            p = trial;
            chi2 = trial_chi2;
            lambda = (lambda * 0.3).max(1e-12);
            if rel < 1e-8 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    if !converged {
        return Err(CoreError::FitFailed("no convergence within 200 iterations".into()));
    }

    // amplitude significance from the linearized covariance
    let mut jtj = nalgebra::Matrix4::<f64>::zeros();
    for &f in &psd.freqs {
        let j = lorentz_jacobian(f, &p);
        for a in 0..4 {
            for b in 0..4 {
                jtj[(a, b)] += j[a] * j[b];
            }
        }
    }
    let dof = (n as f64 - 4.0).max(1.0);
    let sigma2 = chi2 / dof;
    let amp_sigma = jtj
        .try_inverse()
        .map(|inv| (inv[(2, 2)].max(0.0) * sigma2).sqrt())
        .unwrap_or(f64::INFINITY);
    if p[2].abs() < 2.0 * amp_sigma {
        return Err(CoreError::FitFailed("no peak: amplitude consistent with zero at 2 sigma".into()));
    }

    let mut warnings = Vec::new();
    if p[0] <= psd.freqs[0] + df || p[0] >= psd.freqs[n - 1] - df {
        warnings.push("peak at band edge".into());
    }
    Ok(LorentzFit {
        f0: p[0],
        width: p[1],
        amp: p[2],
        offset: p[3],
        residual: chi2.sqrt(),
        warnings,
    })
}

/// Dwell statistics of a thresholded two-level record.
#[derive(Debug, Clone, Serialize)]
pub struct TelegraphStats {
    /// fraction of samples below threshold
    pub ground_fraction: f64,
    /// inverse mean dwell time of complete ground segments, if defined
    pub up_rate: Option<f64>,
    pub n_ground_segments: usize,
    pub mean_ground_dwell: Option<f64>,
    /// inverse mean dwell of complete excited segments, if defined
    pub down_rate: Option<f64>,
    pub n_excited_segments: usize,
    pub mean_excited_dwell: Option<f64>,
}

/// Classify samples against a threshold and extract the upward transition
/// rate as the inverse mean ground dwell. Segments truncated by the record
/// edges are excluded.
pub fn telegraph_stats(sig: &Signal, threshold: f64) -> Result<TelegraphStats, CoreError> {
    if sig.is_empty() {
        return Err(CoreError::EmptyInput("empty signal".into()));
    }
    let lo = sig.samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sig.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if threshold < lo || threshold > hi {
        return Err(CoreError::InvalidParam(format!(
            "threshold {threshold} outside signal range [{lo}, {hi}]"
        )));
    }
    let ground: Vec<bool> = sig.samples.iter().map(|&s| s < threshold).collect();
    let n = ground.len();
    let ground_fraction = ground.iter().filter(|&&g| g).count() as f64 / n as f64;

    let dwell_of = |level: bool| -> (usize, Option<f64>) {
        let mut dwells = Vec::new();
        let mut i = 0;
        while i < n {
            if ground[i] == level {
                let start = i;
                while i < n && ground[i] == level {
                    i += 1;
                }
                // exclude segments touching either record edge
                if start > 0 && i < n {
                    dwells.push((i - start) as f64 / sig.fs);
                }
            } else {
                i += 1;
            }
        }
        if dwells.is_empty() {
            (0, None)
        } else {
            (dwells.len(), Some(dwells.iter().sum::<f64>() / dwells.len() as f64))
        }
    };

    let (n_ground_segments, mean_ground_dwell) = dwell_of(true);
    let (n_excited_segments, mean_excited_dwell) = dwell_of(false);
    Ok(TelegraphStats {
        ground_fraction,
        up_rate: mean_ground_dwell.map(|m| 1.0 / m),
        n_ground_segments,
        mean_ground_dwell,
        down_rate: mean_excited_dwell.map(|m| 1.0 / m),
        n_excited_segments,
        mean_excited_dwell,
    })
}

/// Otsu-style two-class split: maximize the between-class variance of a
/// 256-bin histogram and return the midpoint of the two class means.
pub fn otsu_threshold(samples: &[f64]) -> Option<f64> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) || samples.is_empty() {
        return None;
    }
    const BINS: usize = 256;
    let width = (hi - lo) / BINS as f64;
    let mut hist = [0usize; BINS];
    for &s in samples {
        let b = (((s - lo) / width) as usize).min(BINS - 1);
        hist[b] += 1;
    }
    let total = samples.len() as f64;
    let centers: Vec<f64> = (0..BINS).map(|b| lo + (b as f64 + 0.5) * width).collect();
    let total_mean: f64 =
        hist.iter().zip(&centers).map(|(&h, &c)| h as f64 * c).sum::<f64>() / total;

    let mut best_score = -1.0;
    let mut best_split = None;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for b in 0..BINS - 1 {
        w0 += hist[b] as f64;
        sum0 += hist[b] as f64 * centers[b];
        if w0 == 0.0 || w0 == total {
            continue;
        }
        let m0 = sum0 / w0;
        let w1 = total - w0;
        let m1 = (total_mean * total - sum0) / w1;
        let score = w0 * w1 * (m0 - m1) * (m0 - m1);
        if score > best_score {
            best_score = score;
            best_split = Some((m0 + m1) / 2.0);
        }
    }
    best_split
}
