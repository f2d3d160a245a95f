//! Two-dimensional healthy/fault toy problem.
//!
//! Healthy points fill the disk `r < 0.3`, severe faults the annulus
//! `0.7 < r < 1.0`, and the unobserved intermediate states the band
//! `0.3 ≤ r ≤ 0.7`. All regions are sampled uniformly in area.

use std::f64::consts::TAU;

use crate::data::{LabeledDataset, NORMAL_CLASS};
use crate::error::{Error, Result};
use crate::math::{Matrix, RngStream};

pub const HEALTHY_RADIUS: f64 = 0.3;
pub const SEVERE_RADIUS: f64 = 0.7;
pub const OUTER_RADIUS: f64 = 1.0;

/// Severity tag of the intermediate band; those rows are test-only.
pub const INTERMEDIATE_SEVERITY: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyRegion {
    Healthy,
    Intermediate,
    Severe,
}

impl ToyRegion {
    pub fn contains(self, r: f64) -> bool {
        match self {
            ToyRegion::Healthy => r < HEALTHY_RADIUS,
            ToyRegion::Intermediate => (HEALTHY_RADIUS..=SEVERE_RADIUS).contains(&r),
            ToyRegion::Severe => r > SEVERE_RADIUS && r < OUTER_RADIUS,
        }
    }

    fn band(self) -> (f64, f64) {
        match self {
            ToyRegion::Healthy => (0.0, HEALTHY_RADIUS),
            ToyRegion::Intermediate => (HEALTHY_RADIUS, SEVERE_RADIUS),
            ToyRegion::Severe => (SEVERE_RADIUS, OUTER_RADIUS),
        }
    }

    fn tags(self) -> (usize, u8) {
        match self {
            ToyRegion::Healthy => (0, 0),
            ToyRegion::Intermediate => (1, INTERMEDIATE_SEVERITY),
            ToyRegion::Severe => (1, 4),
        }
    }
}

/// Uniform-in-area point with radius in the region's band.
pub fn sample_region(region: ToyRegion, rng: &mut RngStream) -> [f64; 2] {
    let (r0, r1) = region.band();
    loop {
        let r = (rng.uniform() * (r1 * r1 - r0 * r0) + r0 * r0).sqrt();
        let theta = TAU * rng.uniform();
        let p = [r * theta.cos(), r * theta.sin()];
        // reject the rare boundary draw or rounding that lands outside the band
        if region.contains(p[0].hypot(p[1])) {
            return p;
        }
    }
}

/// `n_per_region` points in each of the healthy, severe and intermediate
/// regions, in that order.
pub fn gen_toy2d(n_per_region: usize, seed: u64) -> Result<LabeledDataset> {
    if n_per_region == 0 {
        return Err(Error::invalid("n_per_region must be at least 1"));
    }
    let base = RngStream::new(seed);
    let regions = [ToyRegion::Healthy, ToyRegion::Severe, ToyRegion::Intermediate];
    let mut data = Vec::with_capacity(3 * n_per_region * 2);
    let mut labels = Vec::with_capacity(3 * n_per_region);
    let mut severity = Vec::with_capacity(3 * n_per_region);
    for (k, region) in regions.into_iter().enumerate() {
        let mut rng = base.substream(k as u64);
        let (label, sev) = region.tags();
        for _ in 0..n_per_region {
            data.extend(sample_region(region, &mut rng));
            labels.push(label);
            severity.push(sev);
        }
    }
    LabeledDataset::new(
        Matrix::new(labels.len(), 2, data)?,
        labels,
        severity,
        vec!["x".into(), "y".into()],
        vec![NORMAL_CLASS.into(), "FAULT".into()],
    )
}
