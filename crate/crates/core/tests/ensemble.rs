//! Monte Carlo consistency of the conditional integrator: the ensemble mean
//! of conditional trajectories must converge to the noise-averaged solution
//! at the 1/√N rate.

use rayon::prelude::*;
use stoq_clock_core::sme::{simulate_conditional, simulate_unconditional, FullSystemParams};

fn base_params() -> FullSystemParams {
    FullSystemParams {
        e_drive: 0.3,
        omega: 1.0,
        chi: 0.5,
        gamma: 0.2,
        kappa: 1.0,
        eta: 0.6,
        n_max: 2,
        dt: 5e-4,
        duration: 3.0,
        record_stride: 20,
        positivity_stride: 1000,
        ..Default::default()
    }
}

#[test]
fn ensemble_mean_converges_at_root_n() {
    let p = base_params();
    let reference = simulate_unconditional(&p).unwrap();

    // one pool of 1024 trajectories, nested subsets of 64 and 256
    let trajectories: Vec<Vec<f64>> = (0..1024u64)
        .into_par_iter()
        .map(|stream| {
            let tp = FullSystemParams { stream, ..p.clone() };
            simulate_conditional(&tp).unwrap().z
        })
        .collect();

    let n_t = reference.z.len();
    let rms_err = |count: usize| -> f64 {
        let mut acc = 0.0;
        for t in 0..n_t {
            let mean: f64 =
                trajectories[..count].iter().map(|z| z[t]).sum::<f64>() / count as f64;
            let d = mean - reference.z[t];
            acc += d * d;
        }
        (acc / n_t as f64).sqrt()
    };

    let mut scaled = Vec::new();
    for &n in &[64usize, 256, 1024] {
        let e = rms_err(n);
        let c = e * (n as f64).sqrt();
        println!("N = {n:4}: rms error {e:.5}, scaled {c:.4}");
        scaled.push(c);
    }
    let max = scaled.iter().copied().fold(f64::MIN, f64::max);
    let min = scaled.iter().copied().fold(f64::MAX, f64::min);
    assert!(
        max / min <= 2.0,
        "error does not scale as 1/sqrt(N) within a factor 2: {scaled:?}"
    );
}

#[test]
fn conditional_x_tracks_negative_z() {
    // the monitored quadrature anti-tracks the qubit population
    let p = FullSystemParams { duration: 30.0, ..Default::default() };
    let rec = simulate_conditional(&p).unwrap();
    // drop the ring-up transient
    let skip = rec.len() / 5;
    let x = &rec.x[skip..];
    let z = &rec.z[skip..];
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let mz = z.iter().sum::<f64>() / z.len() as f64;
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dz2 = 0.0;
    for (a, b) in x.iter().zip(z) {
        num += (a - mx) * (b - mz);
        dx2 += (a - mx) * (a - mx);
        dz2 += (b - mz) * (b - mz);
    }
    let corr = num / (dx2 * dz2).sqrt();
    println!("corr(x, z) = {corr:.3}");
    assert!(corr < 0.0, "x must anticorrelate with z, got {corr}");
    assert!(corr.abs() >= 0.5, "|corr| = {} too weak", corr.abs());
}
