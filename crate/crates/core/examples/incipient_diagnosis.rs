// Diagnosing slight faults with models that only ever saw normal
// operation and severe faults. The deterministic network mostly calls
// them normal; the std-ratio rule on MC-dropout outputs adds the fault
// the network is unsure about.
//
// cargo run --release --example incipient_diagnosis [seed]

use mcfdd::analysis::severity_grid;
use mcfdd::data::{gen_chiller, split_by_severity, ChillerSynthConfig};
use mcfdd::diagnosis::Thresholds;
use mcfdd::math::RngStream;
use mcfdd::network::NetworkConfig;
use mcfdd::train::{train, TrainConfig};

pub fn run_example(seed: u64) -> mcfdd::Result<(usize, usize)> {
    let cfg = ChillerSynthConfig { direction_seed: Some(seed), ..Default::default() };
    let (raw_train, raw_test) = split_by_severity(&gen_chiller(&cfg, seed)?, &[0, 4], &[1, 2])?;
    let train_set = raw_train.standardize()?;
    let test = raw_test.apply_standardization(train_set.standardization.as_ref().expect("standardized"))?;

    let net = NetworkConfig::new(train_set.num_features()).with_seed(seed);
    let tc = TrainConfig { shuffle_seed: seed, ..Default::default() };
    let (m0, _) = train(&net, &tc, &train_set)?;
    let (mp, _) = train(&net.with_dropout(0.1), &tc, &train_set)?;

    let grid = severity_grid(&m0, &mp, &test, 100, &RngStream::new(seed), &Thresholds::default())?;
    print!("{}", grid.diagnosis.to_csv());
    let (soft, mc) = (grid.diagnosis.non_dropout_hits(), grid.diagnosis.mc_dropout_hits());
    println!("\nhits: non-dropout {soft}/{n}, MC dropout {mc}/{n}", n = grid.diagnosis.rows.len());
    Ok((soft, mc))
}

fn main() -> mcfdd::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    run_example(seed).map(drop)
}
