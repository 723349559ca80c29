use stoq_clock_core::adiabatic::{derive_adiabatic, jump_rates};
use stoq_clock_core::signal::*;
use stoq_clock_core::sme::*;

fn main() {
    // strong-drive point: E = 2*pi*0.6
    let p = FullSystemParams {
        e_drive: 2.0 * std::f64::consts::PI * 0.6,
        n_max: 12,
        dt: 5e-4,
        duration: 400.0,
        seed: 7,
        positivity_stride: 100,
        ..Default::default()
    };
    let red = derive_adiabatic(&p).unwrap();
    let rates = jump_rates(red.omega, red.gamma_meas, red.gamma).unwrap();
    println!("adiabatic: n0={:.2} Gamma={:.1} mu={:.5} nu={:.5}", red.n0, red.gamma_meas, rates.mu, rates.nu);
    let t0 = std::time::Instant::now();
    let rec = simulate_conditional(&p).unwrap();
    println!("sim 400us in {:?}; n_peak check warns={:?}", t0.elapsed(), rec.warnings);
    let fs = 1.0 / p.dt;

    // PSD of decimated x
    let mut xsig = Signal::new(fs, rec.x.clone()).unwrap().decimate(400);
    xsig.subtract_mean();
    let psd = periodogram(&xsig, xsig.len(), 0.0).unwrap();
    let kpeak = psd.peak_bin();
    println!("PSD: fs={} band=[0,{:.2}] peak at f={:.4} (bin {kpeak}/{}), low-10% bound {:.3}",
        xsig.fs, psd.freqs.last().unwrap(), psd.freqs[kpeak], psd.power.len(), 0.1 * psd.freqs.last().unwrap());

    // dwells from filtered z
    let zsig = Signal::new(fs, rec.z.clone()).unwrap();
    let mut f = butter2_lowpass(&zsig, 2.5).unwrap();
    let settle = (10.0 * fs / (6.28 * 2.5)) as usize;
    f.samples.drain(..settle);
    let th = otsu_threshold(&f.samples).unwrap();
    let st = telegraph_stats(&f, th).unwrap();
    println!("threshold={th:.3} ground_frac={:.3} up_rate={:?} (n_seg={}) down_rate={:?}",
        st.ground_fraction, st.up_rate, st.n_ground_segments, st.down_rate);
    println!("ratio up_rate/mu_adiabatic = {:?}", st.up_rate.map(|u| u / rates.mu));
    // z range sanity
    let zmin = rec.z.iter().cloned().fold(f64::MAX, f64::min);
    let zmax = rec.z.iter().cloned().fold(f64::MIN, f64::max);
    println!("z range [{zmin:.2}, {zmax:.2}]  first z: {:?}", &rec.z[..3.min(rec.z.len())]);
}
