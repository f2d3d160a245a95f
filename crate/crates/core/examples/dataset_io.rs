// Generating, saving, reloading and standardizing a dataset.

use mcfdd::data::{
    class_balance_warnings, gen_chiller, load_dataset, save_dataset, split_by_severity, ChillerSynthConfig,
};

pub fn run_example() -> mcfdd::Result<()> {
    let cfg = ChillerSynthConfig { samples_per_cell: 20, operating_conditions: 4, ..Default::default() };
    let data = gen_chiller(&cfg, 1)?;
    println!("{} rows × {} features, classes {:?}", data.len(), data.num_features(), data.class_names);

    let dir = std::env::temp_dir().join("mcfdd-dataset-io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("chiller.csv");
    save_dataset(&data, &path)?;
    let back = load_dataset(&path)?;
    assert_eq!(back.features, data.features);
    println!("round trip through {} is exact", path.display());

    let (train, test) = split_by_severity(&back, &[0, 4], &[1, 2, 3])?;
    let train = train.standardize()?;
    let stats = train.standardization.clone().expect("just standardized");
    let test = test.apply_standardization(&stats)?;
    println!("train {} rows, incipient test {} rows", train.len(), test.len());
    for (name, mean) in train.feature_names.iter().zip(&stats.mean).take(3) {
        println!("  {name}: training mean {mean:.3}");
    }
    for w in class_balance_warnings(&train) {
        println!("warning: {w}");
    }
    Ok(())
}

fn main() -> mcfdd::Result<()> {
    run_example()
}
