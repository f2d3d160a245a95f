// Trains one chiller classifier per dropout rate and picks the rate with
// the knee rule: the largest rate whose true-class confidence stays
// within 95% of the deterministic baseline.
//
// cargo run --release --example dropout_sweep [seed]

use mcfdd::analysis::{select_dropout_rate, sweep_dropout, DEFAULT_KNEE, DEFAULT_MAX_RATE, DEFAULT_RATES};
use mcfdd::data::{gen_chiller, split_by_severity, ChillerSynthConfig};
use mcfdd::network::NetworkConfig;
use mcfdd::train::TrainConfig;

pub fn run_example(seed: u64) -> mcfdd::Result<f64> {
    let cfg = ChillerSynthConfig { direction_seed: Some(seed), ..Default::default() };
    let (raw, _) = split_by_severity(&gen_chiller(&cfg, seed)?, &[0, 4], &[1])?;
    let train_set = raw.standardize()?;
    let stats = train_set.standardization.clone().expect("standardized");
    let held_out = gen_chiller(&cfg, seed + 1000)?.filter_severity(&[0, 4])?.apply_standardization(&stats)?;

    let net = NetworkConfig::new(train_set.num_features()).with_seed(seed);
    let tc = TrainConfig { shuffle_seed: seed, ..Default::default() };
    let sweep = sweep_dropout(&DEFAULT_RATES, &net, &tc, &train_set, &held_out, 100, seed)?;

    println!("{:>6} {:>9} {:>12} {:>14}", "p", "accuracy", "diag. mean", "total var.");
    for e in &sweep.entries {
        match (&e.metrics, &e.error) {
            (Some(m), _) => println!(
                "{:>6} {:>9.3} {:>12.4} {:>14.3e}",
                e.rate, m.accuracy, m.diagonal_mean, m.mean_total_variance
            ),
            (None, Some(err)) => println!("{:>6} failed: {err}", e.rate),
            _ => {}
        }
    }
    let choice = select_dropout_rate(&sweep, DEFAULT_KNEE, DEFAULT_MAX_RATE)?;
    println!("\nselected p = {} — {}", choice.rate, choice.rationale);
    Ok(choice.rate)
}

fn main() -> mcfdd::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    run_example(seed).map(drop)
}
