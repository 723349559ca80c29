use stoq_clock_core::adiabatic::derive_adiabatic;
use stoq_clock_core::signal::*;
use stoq_clock_core::sme::*;

fn main() {
    let p = FullSystemParams {
        e_drive: 0.5, omega: 2.0, chi: 0.2, gamma: 0.05, eta: 0.6,
        n_max: 6, dt: 1e-3, duration: 150.0, seed: 21, ..Default::default()
    };
    let red = derive_adiabatic(&p).unwrap();
    let want = std::f64::consts::PI / red.omega_eff();
    println!("pi/omega_eff = {want:.4}  f_rabi = {:.4}", red.omega_eff() / std::f64::consts::PI / 2.0 * 2.0);
    let rec = simulate_conditional(&p).unwrap();
    let fs = 1.0 / p.dt;
    for col in ["x", "z"] {
        let data = if col == "x" { rec.x.clone() } else { rec.z.clone() };
        for cutoff in [0.8, 1.0, 1.5, 2.0, 3.0] {
            let sig = Signal::new(fs, data.clone()).unwrap();
            let mut f = butter2_lowpass(&sig, cutoff).unwrap();
            let settle = (10.0 * fs / (6.28 * cutoff)) as usize;
            f.samples.drain(..settle);
            let (_, ps) = binarize_and_periods(&f);
            let n = ps.periods.len();
            let mean = ps.periods.iter().sum::<f64>() / n as f64;
            let median = { let mut v = ps.periods.clone(); v.sort_by(|a,b| a.partial_cmp(b).unwrap()); v[n/2] };
            println!("col={col} cutoff={cutoff}: n={n} mean={mean:.3} median={median:.3} (want {want:.3})");
        }
    }
}
