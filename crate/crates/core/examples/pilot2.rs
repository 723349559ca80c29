use stoq_clock_core::sme::*;

fn main() {
    let p = FullSystemParams { duration: 200.0, record_stride: 1, ..Default::default() };
    let t0 = std::time::Instant::now();
    let rec = simulate_conditional(&p).unwrap();
    println!("conditional 200us n_max=12: {:?}  pos_min={:.2e} warn={:?}", t0.elapsed(), rec.positivity_min, rec.warnings);
    let t0 = std::time::Instant::now();
    let p2 = FullSystemParams { dt: 2e-3, ..p.clone() };
    let rec_u = simulate_unconditional(&p2).unwrap();
    println!("unconditional 200us dt=2e-3: {:?}  z_last={:.4}", t0.elapsed(), rec_u.z.last().unwrap());
}
