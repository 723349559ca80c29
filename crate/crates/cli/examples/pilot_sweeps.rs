use stoq_clock_cli::config::config_from_str;
use stoq_clock_cli::harness::run_sweep;
use stoq_clock_cli::SweepVar;

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (rank, &i) in idx.iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let mut num = 0.0; let mut dx = 0.0; let mut dy = 0.0;
    for i in 0..xs.len() {
        num += (rx[i]-mx)*(ry[i]-mx);
        dx += (rx[i]-mx).powi(2);
        dy += (ry[i]-mx).powi(2);
    }
    num / (dx*dy).sqrt()
}

fn col(path: &std::path::Path, want: &str) -> Vec<Option<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let hdr: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = hdr.iter().position(|h| *h == want).unwrap();
    lines.map(|l| l.split(',').nth(i).unwrap().parse().ok()).collect()
}

fn main() {
    let t0 = std::time::Instant::now();
    // C8: accuracy vs dissipation over an n0 sweep (under-damped Bloch)
    let cfg = config_from_str(
        "model = \"bloch\"\nseed = 100\n\
         [bloch]\nomega = 2.0\nchi = 0.2\nkappa = 1.0\ngamma = 0.0\neta = 0.2\ndt = 5e-3\nduration = 3200.0\nrecord_stride = 1\n\
         [pipeline]\ncolumn = \"Z\"\n",
    ).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let values = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
    run_sweep(&cfg, SweepVar::N0, &values, dir.path()).unwrap();
    let summary = dir.path().join("summary.csv");
    let lam_closed: Vec<f64> = col(&summary, "wald_lambda").into_iter().map(|v| v.unwrap()).collect();
    let diss: Vec<f64> = col(&summary, "dissipation").into_iter().map(|v| v.unwrap()).collect();
    let lam_fit: Vec<f64> = col(&summary, "wald_lambda_fit").into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    println!("C8 ({:?}):", t0.elapsed());
    println!("  lambda closed: {lam_closed:?}");
    println!("  dissipation:   {diss:?}");
    println!("  lambda fit:    {lam_fit:?}");
    println!("  spearman(lam_fit, n0) = {:.3}", spearman(&values, &lam_fit));

    // C10: quadratic up-rate in the over-damped Bloch regime
    let t0 = std::time::Instant::now();
    let cfg = config_from_str(
        "model = \"bloch\"\nseed = 200\n\
         [bloch]\nomega = 0.5\nchi = 0.2\nkappa = 1.0\ngamma = 0.02\nn0 = 10.0\ndt = 2e-3\nduration = 25000.0\nrecord_stride = 25\n\
         [pipeline]\ncolumn = \"Z\"\nregime = \"jump\"\nthreshold = 0.0\n",
    ).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let omegas = [0.42, 0.49, 0.56, 0.63, 0.7, 0.77];
    run_sweep(&cfg, SweepVar::Omega, &omegas, dir.path()).unwrap();
    let summary = dir.path().join("summary.csv");
    let up: Vec<f64> = col(&summary, "up_rate").into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    println!("C10 ({:?}): up rates {up:?}", t0.elapsed());
    // fit y = a x^2
    let sxy: f64 = omegas.iter().zip(&up).map(|(x, y)| x.powi(2) * y).sum();
    let sxx: f64 = omegas.iter().map(|x| x.powi(4)).sum();
    let a = sxy / sxx;
    let ybar = up.iter().sum::<f64>() / up.len() as f64;
    let ss_res: f64 = omegas.iter().zip(&up).map(|(x, y)| (y - a * x * x).powi(2)).sum();
    let ss_tot: f64 = up.iter().map(|y| (y - ybar).powi(2)).sum();
    println!("  a = {a:.4}, R2 = {:.5}", 1.0 - ss_res / ss_tot);

    // C9: linear Rabi centers from full-SME x PSDs
    let t0 = std::time::Instant::now();
    let cfg = config_from_str(
        "model = \"full_sme\"\nseed = 300\n\
         [full_sme]\ne_drive = 0.25\nchi = 0.2\ngamma = 0.05\neta = 0.4\nn_max = 5\ndt = 1e-3\nduration = 150.0\n\
         [pipeline]\ncolumn = \"x\"\n",
    ).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let omegas = [0.6, 0.9, 1.2, 1.5, 1.8];
    let man = run_sweep(&cfg, SweepVar::Omega, &omegas, dir.path()).unwrap();
    let summary = dir.path().join("summary.csv");
    let f0: Vec<Option<f64>> = col(&summary, "f0");
    println!("C9 ({:?}): f0 = {f0:?}", t0.elapsed());
    for w in man.warnings.iter().take(8) { println!("  warn: {w}"); }
    let f0: Vec<f64> = f0.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let n = omegas.len() as f64;
    let mx = omegas.iter().sum::<f64>() / n;
    let my = f0.iter().sum::<f64>() / n;
    let sxy: f64 = omegas.iter().zip(&f0).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = omegas.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = omegas.iter().zip(&f0).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = f0.iter().map(|y| (y - my).powi(2)).sum();
    println!("  slope {b:.4} intercept {a:.4} R2 = {:.6}", 1.0 - ss_res / ss_tot);
    println!("  expected slope ~ 1/pi = {:.4}", 1.0 / std::f64::consts::PI);
}
