// Fisher LDA of the synthetic chiller data: where the severe faults sit
// relative to normal operation in two dimensions.

use mcfdd::analysis::{condition_centroids, lda_fit, DEFAULT_LDA_COMPONENTS};
use mcfdd::data::{gen_chiller, ChillerSynthConfig};

pub fn run_example() -> mcfdd::Result<()> {
    let cfg = ChillerSynthConfig { samples_per_cell: 60, direction_seed: Some(2), ..Default::default() };
    let data = gen_chiller(&cfg, 2)?.filter_severity(&[0, 4])?.standardize()?;
    let proj = lda_fit(&data, DEFAULT_LDA_COMPONENTS)?;
    println!("eigenvalues {:?}", proj.eigenvalues);

    let cents = condition_centroids(&proj, &data)?;
    let nm = cents.iter().find(|(n, _)| n == "NM").map(|(_, c)| c.clone()).expect("NM present");
    println!("{:<8} {:>8} {:>8} {:>9}", "cond", "ld1", "ld2", "dist(NM)");
    for (name, c) in &cents {
        let d = c.iter().zip(&nm).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let near = name.split("-SL").next().is_some_and(|f| cfg.near_faults.iter().any(|n| n == f));
        println!("{name:<8} {:>8.4} {:>8.4} {d:>9.4}{}", c[0], c[1], if near { "  (near)" } else { "" });
    }
    Ok(())
}

fn main() -> mcfdd::Result<()> {
    run_example()
}
