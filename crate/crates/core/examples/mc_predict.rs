// Monte-Carlo dropout on a single input, and the two diagnosis rules
// applied to the result.

use mcfdd::diagnosis::{diagnose_mc, diagnose_softmax, StdRatioBase};
use mcfdd::math::RngStream;
use mcfdd::mc::{mc_predict, DEFAULT_MC_SAMPLES};
use mcfdd::network::{NetworkConfig, NetworkParams};

pub fn run_example() -> mcfdd::Result<()> {
    let cfg = NetworkConfig::new(5).with_hidden(&[16, 16]).with_classes(4).with_dropout(0.1).with_seed(3);
    let net = NetworkParams::init(&cfg)?;
    let x = [0.2, -0.4, 1.1, 0.0, -0.9];

    let point = net.predict(&x)?;
    let mut rng = RngStream::new(42);
    let summary = mc_predict(&net, &x, DEFAULT_MC_SAMPLES, &mut rng)?;

    println!("class  softmax   mc_mean   mc_std");
    for c in 0..cfg.num_classes {
        println!("{c:>5}  {:.4}    {:.4}    {:.4}", point[c], summary.mean[c], summary.std[c]);
    }

    let soft = diagnose_softmax(&point, 0.2)?;
    let mc = diagnose_mc(&summary, 0.2, 0.1, StdRatioBase::Sum)?;
    println!("softmax candidates: {:?}", soft.candidate_labels);
    println!("mc-dropout candidates: {:?}", mc.candidate_labels);
    for c in &mc.candidate_labels {
        let e = &mc.evidence[*c];
        println!("  class {c}: mean {:.3}, std ratio {:.3}, via {:?}", e.mean_prob, e.std_ratio, e.triggered_by);
    }
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn main() -> mcfdd::Result<()> {
    run_example()
}
