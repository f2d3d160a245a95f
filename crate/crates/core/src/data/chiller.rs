//! Synthetic multi-severity chiller data.
//!
//! Each fault moves the operating point along its own fixed direction in a
//! 16-dimensional latent space; severity level `s` travels the fraction
//! `severity_profile[s - 1]` of that fault's full displacement. "Near"
//! faults (refrigerant leak, overcharge, condenser fouling) stop closer to
//! normal operation than "far" ones (reduced condenser/evaporator flow,
//! non-condensables). Operating conditions shift the whole picture by
//! offsets orthogonal to every fault direction. Latent coordinates are
//! mapped onto plausible sensor ranges only so the CSV reads like sensor
//! data; the numbers are not physical.

use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, NORMAL_CLASS};
use crate::error::{Error, Result};
use crate::math::{dot, norm, Matrix, RngStream};

/// Fault classes in class-index order 1..=6.
pub const FAULTS: [&str; 6] = ["FWC", "FWE", "RL", "RO", "CF", "NC"];

/// Sensor name, nominal value, and one latent unit in sensor units.
pub const FEATURES: [(&str, f64, f64); 16] = [
    ("TEI", 54.0, 1.0),
    ("TEO", 44.0, 0.8),
    ("TCI", 85.0, 1.0),
    ("TCO", 95.0, 1.0),
    ("Cond Tons", 80.0, 5.0),
    ("Cooling Tons", 60.0, 5.0),
    ("kW", 50.0, 4.0),
    ("FWC", 270.0, 8.0),
    ("FWE", 216.0, 6.0),
    ("PRE", 50.0, 2.0),
    ("PRC", 130.0, 4.0),
    ("TRC_sub", 8.0, 0.8),
    ("T_suc", 42.0, 0.8),
    ("Tsh_suc", 2.0, 0.5),
    ("TR_dis", 120.0, 2.5),
    ("Tsh_dis", 25.0, 1.5),
];

pub const MAX_OPERATING_CONDITIONS: usize = 27;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChillerSynthConfig {
    /// Samples per (operating condition, class, severity) cell.
    pub samples_per_cell: usize,
    pub operating_conditions: usize,
    /// Seed for fault directions and condition offsets; defaults to the
    /// data seed.
    pub direction_seed: Option<u64>,
    /// Full-severity (SL4) displacement per fault, in [`FAULTS`] order.
    pub magnitudes: Vec<f64>,
    /// Isotropic noise standard deviation per class (NM first).
    pub noise_scale: Vec<f64>,
    /// Fraction of the full displacement reached at SL1..SL4.
    pub severity_profile: [f64; 4],
    /// Faults that sit close to normal operation.
    pub near_faults: Vec<String>,
    /// Length of each operating-condition offset.
    pub condition_spread: f64,
}

impl Default for ChillerSynthConfig {
    fn default() -> Self {
        Self {
            samples_per_cell: 300,
            operating_conditions: 3,
            direction_seed: None,
            magnitudes: vec![7.0, 7.0, 4.0, 4.0, 4.0, 7.0],
            noise_scale: vec![1.0; 7],
            severity_profile: [0.25, 0.5, 0.75, 1.0],
            near_faults: vec!["RL".into(), "RO".into(), "CF".into()],
            condition_spread: 2.0,
        }
    }
}

impl ChillerSynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_cell == 0 {
            return Err(Error::invalid("samples_per_cell must be positive"));
        }
        if !(1..=MAX_OPERATING_CONDITIONS).contains(&self.operating_conditions) {
            return Err(Error::invalid(format!(
                "operating_conditions must be in 1..={MAX_OPERATING_CONDITIONS}"
            )));
        }
        if self.magnitudes.len() != FAULTS.len() || self.magnitudes.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::invalid("need one positive magnitude per fault"));
        }
        if self.noise_scale.len() != FAULTS.len() + 1 || self.noise_scale.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::invalid("need one non-negative noise scale per class"));
        }
        let p = &self.severity_profile;
        if !(p[0] > 0.0 && p.windows(2).all(|w| w[1] > w[0])) {
            return Err(Error::invalid("severity profile must be positive and strictly increasing"));
        }
        if let Some(bad) = self.near_faults.iter().find(|f| !FAULTS.contains(&f.as_str())) {
            return Err(Error::invalid(format!("unknown fault `{bad}` in near_faults")));
        }
        let (near, far): (Vec<_>, Vec<_>) = (0..FAULTS.len()).partition(|&f| self.is_near(f));
        let near_max = near.iter().map(|&f| self.magnitudes[f]).fold(f64::MIN, f64::max);
        let far_min = far.iter().map(|&f| self.magnitudes[f]).fold(f64::MAX, f64::min);
        if !near.is_empty() && !far.is_empty() && near_max >= far_min {
            return Err(Error::invalid("near faults must be displaced less than far faults"));
        }
        if !(self.condition_spread >= 0.0) {
            return Err(Error::invalid("condition_spread must be non-negative"));
        }
        Ok(())
    }

    /// Whether fault index `f` (0-based into [`FAULTS`]) is a near fault.
    pub fn is_near(&self, f: usize) -> bool {
        self.near_faults.iter().any(|n| n == FAULTS[f])
    }
}

/// Fault directions and operating-condition offsets in latent space.
#[derive(Debug, Clone)]
pub struct ChillerGeometry {
    /// One unit row per fault, mutually orthogonal.
    pub directions: Matrix,
    /// One row per operating condition, orthogonal to every direction.
    pub offsets: Matrix,
}

pub fn chiller_geometry(config: &ChillerSynthConfig, seed: u64) -> Result<ChillerGeometry> {
    config.validate()?;
    let d = FEATURES.len();
    let mut rng = RngStream::new(config.direction_seed.unwrap_or(seed)).substream(0xD1);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(FAULTS.len());
    while dirs.len() < FAULTS.len() {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        project_out(&mut v, &dirs);
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x /= n);
            dirs.push(v);
        }
    }
    let mut offsets = Vec::with_capacity(config.operating_conditions);
    while offsets.len() < config.operating_conditions {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        project_out(&mut v, &dirs);
        let n = norm(&v);
        if n > 1e-6 {
            v.iter_mut().for_each(|x| *x *= config.condition_spread / n);
            offsets.push(v);
        }
    }
    Ok(ChillerGeometry {
        directions: Matrix::from_rows(&dirs)?,
        offsets: Matrix::from_rows(&offsets)?,
    })
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    // twice for numerical orthogonality
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
        }
    }
}

/// Generates NM rows (severity 0) and every fault at SL1..SL4 for each
/// operating condition.
pub fn gen_chiller(config: &ChillerSynthConfig, seed: u64) -> Result<LabeledDataset> {
    let geo = chiller_geometry(config, seed)?;
    let d = FEATURES.len();
    let base = RngStream::new(seed).substream(0xDA7A);
    let cells_per_condition = 1 + FAULTS.len() * 4;
    let n = config.operating_conditions * cells_per_condition * config.samples_per_cell;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut severity = Vec::with_capacity(n);

    let mut cell_id = 0u64;
    for c in 0..config.operating_conditions {
        let offset = geo.offsets.row(c);
        let mut cells: Vec<(usize, u8)> = vec![(0, 0)];
        for f in 0..FAULTS.len() {
            for s in 1..=4u8 {
                cells.push((f + 1, s));
            }
        }
        for (label, sev) in cells {
            let mut center = offset.to_vec();
            if label > 0 {
                let f = label - 1;
                let shift = config.severity_profile[sev as usize - 1] * config.magnitudes[f];
                for (x, u) in center.iter_mut().zip(geo.directions.row(f)) {
                    *x += shift * u;
                }
            }
            let sigma = config.noise_scale[label];
            let mut rng = base.substream(cell_id);
            cell_id += 1;
            for _ in 0..config.samples_per_cell {
                for (j, &(_, nominal, unit)) in FEATURES.iter().enumerate() {
                    let latent = center[j] + sigma * rng.standard_normal();
                    data.push(nominal + unit * latent);
                }
                labels.push(label);
                severity.push(sev);
            }
        }
    }
    let mut class_names = vec![NORMAL_CLASS.to_string()];
    class_names.extend(FAULTS.iter().map(|s| s.to_string()));
    LabeledDataset::new(
        Matrix::new(labels.len(), d, data)?,
        labels,
        severity,
        FEATURES.iter().map(|f| f.0.to_string()).collect(),
        class_names,
    )
}
