#![allow(dead_code)]

use mcfdd::data::{gen_chiller, gen_toy2d, split_by_severity, ChillerSynthConfig, LabeledDataset};
use mcfdd::network::{NetworkConfig, NetworkParams};
use mcfdd::train::{train, TrainConfig};

pub struct ToySetup {
    pub train: LabeledDataset,
    /// Fresh draw of all three regions.
    pub test: LabeledDataset,
    pub m0: NetworkParams,
    pub mp: NetworkParams,
}

/// Deterministic and p = 0.1 models trained on the healthy disk and the
/// severe annulus.
pub fn toy_setup(seed: u64, n_per_region: usize) -> ToySetup {
    let all = gen_toy2d(n_per_region, seed).unwrap();
    let (train_set, _) = split_by_severity(&all, &[0, 4], &[2]).unwrap();
    let test = gen_toy2d(n_per_region, seed + 1_000).unwrap();
    let net = NetworkConfig::new(2).with_classes(2).with_seed(seed);
    let tc = TrainConfig { shuffle_seed: seed, ..Default::default() };
    let (m0, _) = train(&net, &tc, &train_set).unwrap();
    let (mp, _) = train(&net.with_dropout(0.1), &tc, &train_set).unwrap();
    ToySetup { train: train_set, test, m0, mp }
}

pub struct ChillerSplit {
    pub config: ChillerSynthConfig,
    /// SL0 ∪ SL4, standardized.
    pub train: LabeledDataset,
    /// SL1–SL3 of the same draw, with the training standardization.
    pub incipient: LabeledDataset,
    /// Independent SL0 ∪ SL4 draw sharing the fault geometry.
    pub held_out: LabeledDataset,
}

pub fn chiller_split(seed: u64) -> ChillerSplit {
    let config = ChillerSynthConfig { direction_seed: Some(seed), ..Default::default() };
    let data = gen_chiller(&config, seed).unwrap();
    let (train_raw, incipient_raw) = split_by_severity(&data, &[0, 4], &[1, 2, 3]).unwrap();
    let train_set = train_raw.standardize().unwrap();
    let stats = train_set.standardization.clone().unwrap();
    let other = gen_chiller(&config, seed + 1_000).unwrap();
    let (held_raw, _) = split_by_severity(&other, &[0, 4], &[1]).unwrap();
    ChillerSplit {
        incipient: incipient_raw.apply_standardization(&stats).unwrap(),
        held_out: held_raw.apply_standardization(&stats).unwrap(),
        train: train_set,
        config,
    }
}

pub fn chiller_net(seed: u64) -> NetworkConfig {
    NetworkConfig::new(16).with_seed(seed)
}

pub fn train_cfg(seed: u64) -> TrainConfig {
    TrainConfig { shuffle_seed: seed, ..Default::default() }
}

pub fn median(v: &[usize]) -> usize {
    let mut s = v.to_vec();
    s.sort_unstable();
    s[s.len() / 2]
}

pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() / (na * nb)).clamp(-1.0, 1.0).acos()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
