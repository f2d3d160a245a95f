// The two-dimensional toy problem: a model trained only on the healthy
// disk and the severe annulus has to say something about the gap between
// them. The deterministic network answers with confidence; MC dropout
// answers with variance.
//
// cargo run --release --example toy_uncertainty [seed]

use mcfdd::analysis::{field_scan_2d, GridSpec};
use mcfdd::data::{gen_toy2d, split_by_severity, HEALTHY_RADIUS, SEVERE_RADIUS};
use mcfdd::math::RngStream;
use mcfdd::network::NetworkConfig;
use mcfdd::train::{train, TrainConfig};

pub fn run_example(seed: u64) -> mcfdd::Result<()> {
    let all = gen_toy2d(1000, seed)?;
    let (train_set, _) = split_by_severity(&all, &[0, 4], &[2])?;
    let net = NetworkConfig::new(2).with_classes(2).with_seed(seed);
    let tc = TrainConfig { shuffle_seed: seed, ..Default::default() };
    let (m0, _) = train(&net, &tc, &train_set)?;
    let (mp, trace) = train(&net.with_dropout(0.1), &tc, &train_set)?;
    println!("p=0.1 training accuracy after {} epochs: {:.3}", trace.loss.len(), trace.accuracy.last().unwrap());

    let grid = GridSpec::default();
    let rng = RngStream::new(seed);
    let scan = field_scan_2d(&mp, &grid, 100, &rng)?;
    let flat = field_scan_2d(&m0, &grid, 100, &rng)?;

    let healthy = scan.region_mean_variance(|r| r < HEALTHY_RADIUS).unwrap_or(0.0);
    let gap = scan.region_mean_variance(|r| r > HEALTHY_RADIUS && r < SEVERE_RADIUS).unwrap_or(0.0);
    println!("mean variance: healthy disk {healthy:.2e}, intermediate annulus {gap:.2e} ({:.0}×)", gap / healthy);
    println!("deterministic model variance: {:.1}", flat.region_mean_variance(|_| true).unwrap_or(0.0));
    println!("boundary cells (|mean - 0.5| < 0.05): {}", scan.boundary_cells(0.05).len());

    // coarse picture of the variance field, top row = largest y
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    let max = scan.cells.iter().map(|c| c.variance[1]).fold(0.0, f64::max);
    println!("\nvariance of P(fault):");
    for iy in (0..grid.ny).rev().step_by(4) {
        let line: String = (0..grid.nx)
            .step_by(2)
            .map(|ix| shades[((scan.variance(ix, iy) / max) * 9.0).round() as usize])
            .collect();
        println!("|{line}|");
    }
    Ok(())
}

fn main() -> mcfdd::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    run_example(seed)
}
