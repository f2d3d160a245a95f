use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::render::{heatmap_svg, parse_heatmap};
use super::{config_err, execute_job, load_manifest, replay, run_job, CliError, Common, Job, RunDir, RunManifest};
use crate::analysis::{
    condition_centroids, field_scan_2d, lda_fit, select_dropout_rate, severity_grid, sweep_dropout, GridSpec,
    DEFAULT_KNEE, DEFAULT_MAX_RATE, DEFAULT_RATES,
};
use crate::data::{
    class_balance_warnings, gen_chiller, gen_toy2d, metadata_path, read_csv, with_metadata,
    write_csv, ChillerSynthConfig, DatasetMetadata, LabeledDataset, Standardization,
};
use crate::diagnosis::{
    diagnose_mc, diagnose_softmax, diagnosis_table, ConditionReports, DiagnosisReport, StdRatioBase, Thresholds,
    DEFAULT_PROB_THRESHOLD, DEFAULT_STD_RATIO_THRESHOLD,
};
use crate::error::Error;
use crate::math::{Matrix, RngStream};
use crate::mc::{group_by_condition, heatmap_csv, mc_predict_batch, mean_class_summary, HeatmapQuantity, DEFAULT_MC_SAMPLES};
use crate::network::{NetworkConfig, NetworkParams};
use crate::train::{evaluate, train, TrainConfig};

const STANDARDIZATION_FILE: &str = "standardization.json";

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (toy2d or chiller).
    Gen(GenArgs),
    /// Train a network; writes model.json and trace.csv.
    Train(TrainArgs),
    /// Deterministic accuracy, loss and confusion matrix.
    Eval(EvalArgs),
    /// MC-dropout predictive summaries and condition heatmaps.
    McInfer(McInferArgs),
    /// Diagnosis sets per sample and per condition.
    Diagnose(DiagnoseArgs),
    /// Train over several dropout rates and pick one.
    Sweep(SweepArgs),
    /// Predictive mean/variance over a 2-D grid.
    Scan2d(Scan2dArgs),
    /// Compare a deterministic and an MC-dropout model across severities.
    SeverityGrid(SeverityGridArgs),
    /// Fisher LDA projection of a dataset.
    Lda(LdaArgs),
    /// Render a heatmap or field CSV as SVG.
    Render(RenderArgs),
    /// Rerun a manifest and verify its outputs.
    Replay(ReplayArgs),
}

impl Command {
    pub fn run(self) -> Result<(), CliError> {
        match self {
            Command::Gen(a) => run_job::<GenParams, _>(&a.common, &a.flags()).map(drop),
            Command::Train(a) => run_job::<TrainParams, _>(&a.common, &a).map(drop),
            Command::Eval(a) => run_job::<EvalParams, _>(&a.common, &a).map(drop),
            Command::McInfer(a) => run_job::<McInferParams, _>(&a.common, &a).map(drop),
            Command::Diagnose(a) => run_job::<DiagnoseParams, _>(&a.common, &a).map(drop),
            Command::Sweep(a) => run_job::<SweepParams, _>(&a.common, &a).map(drop),
            Command::Scan2d(a) => run_job::<Scan2dParams, _>(&a.common, &a).map(drop),
            Command::SeverityGrid(a) => run_job::<SeverityGridParams, _>(&a.common, &a).map(drop),
            Command::Lda(a) => run_job::<LdaParams, _>(&a.common, &a).map(drop),
            Command::Render(a) => run_job::<RenderParams, _>(&a.common, &a).map(drop),
            Command::Replay(a) => {
                let manifest = load_manifest(&a.manifest)?;
                let out = a.out.unwrap_or_else(|| {
                    a.manifest.parent().unwrap_or(Path::new(".")).join("replay")
                });
                replay(&manifest, &out)?;
                println!("replay of `{}` reproduced all {} output(s)", manifest.command, manifest.outputs.len());
                Ok(())
            }
        }
    }
}

pub(super) fn dispatch_replay(command: &str, params: Value, out: &Path) -> Result<RunManifest, CliError> {
    fn go<J: Job>(params: Value, out: &Path) -> Result<RunManifest, CliError> {
        let p: J = serde_json::from_value(params).map_err(|e| config_err(format!("manifest parameters: {e}")))?;
        execute_job(&p, out)
    }
    match command {
        GenParams::NAME => go::<GenParams>(params, out),
        TrainParams::NAME => go::<TrainParams>(params, out),
        EvalParams::NAME => go::<EvalParams>(params, out),
        McInferParams::NAME => go::<McInferParams>(params, out),
        DiagnoseParams::NAME => go::<DiagnoseParams>(params, out),
        SweepParams::NAME => go::<SweepParams>(params, out),
        Scan2dParams::NAME => go::<Scan2dParams>(params, out),
        SeverityGridParams::NAME => go::<SeverityGridParams>(params, out),
        LdaParams::NAME => go::<LdaParams>(params, out),
        RenderParams::NAME => go::<RenderParams>(params, out),
        other => Err(config_err(format!("unknown command `{other}` in manifest"))),
    }
}

// ---- shared helpers --------------------------------------------------------

fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.as_os_str().is_empty() {
        Err(config_err(format!("missing required parameter `{what}`")))
    } else {
        Ok(())
    }
}

fn load_data(run: &mut RunDir, path: &Path) -> Result<LabeledDataset, CliError> {
    require(path, "data")?;
    let bytes = run.read(path)?;
    let mut data = read_csv(&bytes[..], path)?;
    let meta = metadata_path(path);
    if meta.exists() {
        let text = run.read_string(&meta)?;
        let meta: DatasetMetadata = serde_json::from_str(&text).map_err(Error::from)?;
        data = with_metadata(data, meta)?;
    }
    Ok(data)
}

fn dataset_files(run: &mut RunDir, stem: &str, data: &LabeledDataset) -> Result<(), CliError> {
    let mut csv = Vec::new();
    write_csv(data, &mut csv)?;
    run.write(&format!("{stem}.csv"), csv)?;
    run.write_json(&format!("{stem}.meta.json"), &data.metadata())
}

/// Model plus the standardization stored next to it, if any.
fn load_model(run: &mut RunDir, path: &Path) -> Result<(NetworkParams, Option<Standardization>), CliError> {
    require(path, "model")?;
    let params = NetworkParams::from_json(&run.read_string(path)?)?;
    let stats_path = path.with_file_name(STANDARDIZATION_FILE);
    let stats = if stats_path.exists() {
        Some(serde_json::from_str(&run.read_string(&stats_path)?).map_err(Error::from)?)
    } else {
        None
    };
    Ok((params, stats))
}

/// Applies the model's standardization unless the data already carries one.
fn prepare(data: LabeledDataset, stats: &Option<Standardization>) -> Result<LabeledDataset, CliError> {
    match stats {
        Some(s) if data.standardization.is_none() => Ok(data.apply_standardization(s)?),
        _ => Ok(data),
    }
}

fn check_model_data(params: &NetworkParams, data: &LabeledDataset) -> Result<(), CliError> {
    if params.config.input_dim != data.num_features() || params.config.num_classes != data.num_classes() {
        return Err(CliError::Lib(Error::Dimension(format!(
            "model expects {} features / {} classes, data has {} / {}",
            params.config.input_dim,
            params.config.num_classes,
            data.num_features(),
            data.num_classes()
        ))));
    }
    Ok(())
}

fn keep_severities(data: LabeledDataset, keep: Option<&[u8]>) -> Result<LabeledDataset, CliError> {
    match keep {
        Some(s) => Ok(data.filter_severity(s)?),
        None => Ok(data),
    }
}

fn confusion_csv(confusion: &Matrix, names: &[String]) -> String {
    let mut out = String::from("true\\predicted");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (r, n) in names.iter().enumerate() {
        out.push_str(n);
        for v in confusion.row(r) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn rate_tag(p: f64) -> String {
    format!("p{p}")
}

// ---- gen -------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    #[default]
    Toy2d,
    Chiller,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(value_enum)]
    kind: GenKind,
    /// Points per toy region.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chiller: samples per (operating condition, class, severity).
    #[arg(long)]
    samples_per_cell: Option<usize>,
    /// Chiller: number of operating conditions.
    #[arg(long)]
    operating_conditions: Option<usize>,
}

impl GenArgs {
    fn flags(&self) -> Value {
        let mut chiller = serde_json::Map::new();
        if let Some(v) = self.samples_per_cell {
            chiller.insert("samples_per_cell".into(), json!(v));
        }
        if let Some(v) = self.operating_conditions {
            chiller.insert("operating_conditions".into(), json!(v));
        }
        json!({ "kind": self.kind, "n": self.n, "seed": self.seed, "chiller": chiller })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenParams {
    pub kind: GenKind,
    pub n: usize,
    pub seed: u64,
    pub chiller: ChillerSynthConfig,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { kind: GenKind::Toy2d, n: 1000, seed: 0, chiller: ChillerSynthConfig::default() }
    }
}

impl Job for GenParams {
    const NAME: &'static str = "gen";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let (data, stem) = match self.kind {
            GenKind::Toy2d => (gen_toy2d(self.n, self.seed)?, "toy2d"),
            GenKind::Chiller => (gen_chiller(&self.chiller, self.seed)?, "chiller"),
        };
        dataset_files(run, stem, &data)?;
        run.say(format!(
            "{stem}: {} rows, {} features, {} classes",
            data.len(),
            data.num_features(),
            data.num_classes()
        ));
        Ok(())
    }
}

// ---- train -----------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Training CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Seeds initialization, batch order and dropout masks.
    #[arg(long)]
    seed: Option<u64>,
    /// Severity tags used for training, comma separated.
    #[arg(long, value_delimiter = ',')]
    train_severities: Option<Vec<u8>>,
    /// Fit and store per-feature standardization.
    #[arg(long)]
    standardize: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub data: PathBuf,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub train_severities: Vec<u8>,
    pub standardize: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            data: PathBuf::new(),
            hidden: vec![20; 4],
            dropout: 0.0,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: 0,
            train_severities: vec![0, 4],
            standardize: false,
        }
    }
}

impl TrainParams {
    fn configs(&self, data: &LabeledDataset) -> (NetworkConfig, TrainConfig) {
        let net = NetworkConfig::new(data.num_features())
            .with_hidden(&self.hidden)
            .with_classes(data.num_classes())
            .with_dropout(self.dropout)
            .with_seed(self.seed);
        let tc = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            shuffle_seed: self.seed,
            ..Default::default()
        };
        (net, tc)
    }
}

/// Loads, filters and optionally standardizes training data.
fn training_data(
    run: &mut RunDir,
    path: &Path,
    severities: &[u8],
    standardize: bool,
) -> Result<LabeledDataset, CliError> {
    let data = load_data(run, path)?.filter_severity(severities)?;
    for w in class_balance_warnings(&data) {
        run.say(format!("warning: {w}"));
    }
    if standardize && data.standardization.is_none() {
        Ok(data.standardize()?)
    } else {
        Ok(data)
    }
}

impl Job for TrainParams {
    const NAME: &'static str = "train";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let data = training_data(run, &self.data, &self.train_severities, self.standardize)?;
        let (net, tc) = self.configs(&data);
        let (params, trace) = train(&net, &tc, &data)?;
        run.write("model.json", params.to_json()? + "\n")?;
        run.write("trace.csv", trace.to_csv())?;
        if self.standardize {
            if let Some(s) = &data.standardization {
                run.write_json(STANDARDIZATION_FILE, s)?;
            }
        }
        run.say(format!(
            "trained {} parameters on {} rows for {} epochs: final loss {:.4}, accuracy {:.4}",
            params.num_params(),
            data.len(),
            trace.epochs(),
            trace.loss.last().copied().unwrap_or(f64::NAN),
            trace.accuracy.last().copied().unwrap_or(f64::NAN)
        ));
        Ok(())
    }
}

// ---- eval ------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Only rows with these severity tags.
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub model: PathBuf,
    pub data: PathBuf,
    pub severities: Option<Vec<u8>>,
}

impl Job for EvalParams {
    const NAME: &'static str = "eval";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let (params, stats) = load_model(run, &self.model)?;
        let data = prepare(keep_severities(load_data(run, &self.data)?, self.severities.as_deref())?, &stats)?;
        check_model_data(&params, &data)?;
        let e = evaluate(&params, &data)?;
        run.write_json("evaluation.json", &e)?;
        run.write("confusion.csv", confusion_csv(&e.confusion, &data.class_names))?;
        run.say(format!("accuracy {:.4}, mean loss {:.4} on {} rows", e.accuracy, e.mean_loss, data.len()));
        Ok(())
    }
}

// ---- mc-infer --------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct McInferArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Stochastic passes per input.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McInferParams {
    pub model: PathBuf,
    pub data: PathBuf,
    pub samples: usize,
    pub seed: u64,
    pub severities: Option<Vec<u8>>,
}

impl Default for McInferParams {
    fn default() -> Self {
        Self { model: PathBuf::new(), data: PathBuf::new(), samples: DEFAULT_MC_SAMPLES, seed: 0, severities: None }
    }
}

impl Job for McInferParams {
    const NAME: &'static str = "mc-infer";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let (params, stats) = load_model(run, &self.model)?;
        let data = prepare(keep_severities(load_data(run, &self.data)?, self.severities.as_deref())?, &stats)?;
        check_model_data(&params, &data)?;
        let summaries = mc_predict_batch(&params, &data.features, self.samples, &RngStream::new(self.seed))?;
        let rows = mean_class_summary(&group_by_condition(&data, &summaries)?)?;
        run.write_json("summaries.json", &summaries)?;
        for (name, q) in [
            ("heatmap_mean.csv", HeatmapQuantity::Mean),
            ("heatmap_variance.csv", HeatmapQuantity::Variance),
            ("heatmap_pooled_variance.csv", HeatmapQuantity::PooledVariance),
        ] {
            run.write(name, heatmap_csv(&rows, &data.class_names, q))?;
        }
        let correct = summaries.iter().zip(&data.labels).filter(|(s, &y)| s.predicted_class == y).count();
        run.say(format!(
            "{} rows × T = {}: MC-mean accuracy {:.4}, {} conditions",
            data.len(),
            self.samples,
            correct as f64 / data.len() as f64,
            rows.len()
        ));
        Ok(())
    }
}

// ---- diagnose --------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// MC-dropout model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Deterministic model for the non-dropout column (defaults to the
    /// MC model without dropout).
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prob_threshold: Option<f64>,
    #[arg(long)]
    std_ratio_threshold: Option<f64>,
    /// `sum` or `max`.
    #[arg(long)]
    std_ratio_base: Option<String>,
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseParams {
    pub model: PathBuf,
    pub baseline: Option<PathBuf>,
    pub data: PathBuf,
    pub samples: usize,
    pub seed: u64,
    pub prob_threshold: f64,
    pub std_ratio_threshold: f64,
    pub std_ratio_base: StdRatioBase,
    pub severities: Vec<u8>,
}

impl Default for DiagnoseParams {
    fn default() -> Self {
        Self {
            model: PathBuf::new(),
            baseline: None,
            data: PathBuf::new(),
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            prob_threshold: DEFAULT_PROB_THRESHOLD,
            std_ratio_threshold: DEFAULT_STD_RATIO_THRESHOLD,
            std_ratio_base: StdRatioBase::Sum,
            severities: vec![1, 2],
        }
    }
}

#[derive(Debug, Serialize)]
struct SampleDiagnosis<'a> {
    row: usize,
    condition: String,
    non_dropout: &'a DiagnosisReport,
    mc_dropout: &'a DiagnosisReport,
}

impl Job for DiagnoseParams {
    const NAME: &'static str = "diagnose";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let thr = Thresholds::mc(self.prob_threshold, self.std_ratio_threshold, self.std_ratio_base)?;
        let (mp, stats) = load_model(run, &self.model)?;
        let m0 = match &self.baseline {
            Some(p) => load_model(run, p)?.0,
            None => mp.clone(),
        };
        let data = prepare(load_data(run, &self.data)?.filter_severity(&self.severities)?, &stats)?;
        check_model_data(&mp, &data)?;
        check_model_data(&m0, &data)?;
        let mc = mc_predict_batch(&mp, &data.features, self.samples, &RngStream::new(self.seed))?;
        let mut soft_reports = Vec::with_capacity(data.len());
        let mut mc_reports = Vec::with_capacity(data.len());
        for (i, x) in data.features.row_iter().enumerate() {
            let y = data.labels[i];
            soft_reports.push(diagnose_softmax(&m0.predict(x)?, thr.prob)?.with_true_label(y));
            mc_reports.push(diagnose_mc(&mc[i], thr.prob, self.std_ratio_threshold, thr.base)?.with_true_label(y));
        }
        let groups: Vec<ConditionReports> = data
            .conditions()
            .into_iter()
            .map(|((sev, label), idx)| ConditionReports {
                condition: data.condition_name(label, sev),
                true_label: label,
                non_dropout: idx.iter().map(|&i| soft_reports[i].clone()).collect(),
                mc_dropout: idx.iter().map(|&i| mc_reports[i].clone()).collect(),
            })
            .collect();
        let table = diagnosis_table(&groups, &data.class_names)?;
        let samples: Vec<SampleDiagnosis> = (0..data.len())
            .map(|i| SampleDiagnosis {
                row: i,
                condition: data.condition_name(data.labels[i], data.severity[i]),
                non_dropout: &soft_reports[i],
                mc_dropout: &mc_reports[i],
            })
            .collect();
        run.write_json("reports.json", &samples)?;
        run.write_json("diagnosis_table.json", &table)?;
        run.write("diagnosis_table.csv", table.to_csv())?;
        run.say(format!(
            "{} conditions: non-dropout hits {}, MC-dropout hits {}",
            table.rows.len(),
            table.non_dropout_hits(),
            table.mc_dropout_hits()
        ));
        Ok(())
    }
}

// ---- sweep -----------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out data for the heatmaps; defaults to the training data.
    #[arg(long)]
    eval_data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Fraction of the baseline diagonal mean a rate must keep.
    #[arg(long)]
    knee: Option<f64>,
    /// Exclusive upper bound on the selected rate.
    #[arg(long)]
    max_rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    train_severities: Option<Vec<u8>>,
    #[arg(long)]
    standardize: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub data: PathBuf,
    pub eval_data: Option<PathBuf>,
    pub rates: Vec<f64>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub samples: usize,
    pub knee: f64,
    pub max_rate: f64,
    pub train_severities: Vec<u8>,
    pub standardize: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        let t = TrainParams::default();
        Self {
            data: PathBuf::new(),
            eval_data: None,
            rates: DEFAULT_RATES.to_vec(),
            hidden: t.hidden,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: 0,
            samples: DEFAULT_MC_SAMPLES,
            knee: DEFAULT_KNEE,
            max_rate: DEFAULT_MAX_RATE,
            train_severities: t.train_severities,
            standardize: false,
        }
    }
}

impl Job for SweepParams {
    const NAME: &'static str = "sweep";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let data = training_data(run, &self.data, &self.train_severities, self.standardize)?;
        let eval = match &self.eval_data {
            Some(p) => {
                let e = load_data(run, p)?.filter_severity(&self.train_severities)?;
                match (&data.standardization, &e.standardization) {
                    (Some(s), None) => e.apply_standardization(s)?,
                    _ => e,
                }
            }
            None => data.clone(),
        };
        let tp = TrainParams {
            hidden: self.hidden.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
            ..Default::default()
        };
        let (net, tc) = tp.configs(&data);
        let sweep = sweep_dropout(&self.rates, &net, &tc, &data, &eval, self.samples, self.seed)?;
        for e in &sweep.entries {
            let tag = rate_tag(e.rate);
            if let Some(model) = &e.model {
                run.write(&format!("model_{tag}.json"), model.to_json()? + "\n")?;
            }
            if let Some(m) = &e.metrics {
                run.write(&format!("heatmap_{tag}_mean.csv"), heatmap_csv(&m.heatmap, &sweep.class_names, HeatmapQuantity::Mean))?;
                run.write(
                    &format!("heatmap_{tag}_variance.csv"),
                    heatmap_csv(&m.heatmap, &sweep.class_names, HeatmapQuantity::Variance),
                )?;
                run.say(format!(
                    "p = {}: accuracy {:.4}, diagonal mean {:.4}, mean total variance {:.5}",
                    e.rate, m.accuracy, m.diagonal_mean, m.mean_total_variance
                ));
            }
            if let Some(err) = &e.error {
                run.say(format!("p = {}: failed: {err}", e.rate));
            }
        }
        if let Some(s) = &data.standardization {
            run.write_json(STANDARDIZATION_FILE, s)?;
        }
        run.write_json("sweep.json", &sweep)?;
        if sweep.entries.len() >= 3 && self.rates.contains(&0.0) {
            let sel = select_dropout_rate(&sweep, self.knee, self.max_rate)?;
            run.write_json("selection.json", &sel)?;
            run.write("selection_curve.csv", sel.curve_csv())?;
            run.say(format!("selected p = {} ({})", sel.rate, sel.rationale));
        } else {
            run.say("rate selection skipped: needs at least three rates including 0");
        }
        Ok(())
    }
}

// ---- scan2d ----------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct Scan2dArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_max: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scan2dParams {
    pub model: PathBuf,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Scan2dParams {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            model: PathBuf::new(),
            x_min: g.x_min,
            x_max: g.x_max,
            y_min: g.y_min,
            y_max: g.y_max,
            nx: g.nx,
            ny: g.ny,
            samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }
}

impl Job for Scan2dParams {
    const NAME: &'static str = "scan2d";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let (params, stats) = load_model(run, &self.model)?;
        if stats.is_some() {
            return Err(config_err("scan2d needs a model trained on raw (unstandardized) coordinates"));
        }
        let grid = GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            y_min: self.y_min,
            y_max: self.y_max,
            nx: self.nx,
            ny: self.ny,
        };
        let scan = field_scan_2d(&params, &grid, self.samples, &RngStream::new(self.seed))?;
        run.write("field.csv", scan.to_long_csv())?;
        run.write("proximity.csv", scan.proximity_csv())?;
        run.write("variance.csv", scan.variance_csv())?;
        let max_var = scan.cells.iter().map(|s| s.variance[scan.class]).fold(0.0, f64::max);
        run.say(format!(
            "{}×{} grid, T = {}: {} boundary cells (|mean − 0.5| < 0.05), max variance {:.5}",
            grid.nx,
            grid.ny,
            self.samples,
            scan.boundary_cells(0.05).len(),
            max_var
        ));
        Ok(())
    }
}

// ---- severity-grid ---------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct SeverityGridArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Deterministic (non-dropout) model.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// MC-dropout model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    prob_threshold: Option<f64>,
    #[arg(long)]
    std_ratio_threshold: Option<f64>,
    #[arg(long)]
    std_ratio_base: Option<String>,
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityGridParams {
    pub baseline: PathBuf,
    pub model: PathBuf,
    pub data: PathBuf,
    pub samples: usize,
    pub seed: u64,
    pub prob_threshold: f64,
    pub std_ratio_threshold: f64,
    pub std_ratio_base: StdRatioBase,
    pub severities: Vec<u8>,
}

impl Default for SeverityGridParams {
    fn default() -> Self {
        let d = DiagnoseParams::default();
        Self {
            baseline: PathBuf::new(),
            model: PathBuf::new(),
            data: PathBuf::new(),
            samples: d.samples,
            seed: 0,
            prob_threshold: d.prob_threshold,
            std_ratio_threshold: d.std_ratio_threshold,
            std_ratio_base: d.std_ratio_base,
            severities: vec![0, 1, 2, 3, 4],
        }
    }
}

impl Job for SeverityGridParams {
    const NAME: &'static str = "severity-grid";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        require(&self.baseline, "baseline")?;
        let thr = Thresholds::mc(self.prob_threshold, self.std_ratio_threshold, self.std_ratio_base)?;
        let (m0, _) = load_model(run, &self.baseline)?;
        let (mp, stats) = load_model(run, &self.model)?;
        let data = prepare(load_data(run, &self.data)?.filter_severity(&self.severities)?, &stats)?;
        check_model_data(&m0, &data)?;
        check_model_data(&mp, &data)?;
        let grid = severity_grid(&m0, &mp, &data, self.samples, &RngStream::new(self.seed), &thr)?;
        for p in &grid.panels {
            let s = p.severity;
            run.write(&format!("softmax_sl{s}.csv"), heatmap_csv(&p.softmax, &grid.class_names, HeatmapQuantity::Mean))?;
            run.write(&format!("mean_sl{s}.csv"), heatmap_csv(&p.mc, &grid.class_names, HeatmapQuantity::Mean))?;
            run.write(&format!("variance_sl{s}.csv"), heatmap_csv(&p.mc, &grid.class_names, HeatmapQuantity::Variance))?;
        }
        run.write_json("severity_grid.json", &grid)?;
        run.write("diagnosis_table.csv", grid.diagnosis.to_csv())?;
        run.say(format!(
            "{} panels; SL1/SL2 diagnosis over {} conditions: non-dropout hits {}, MC-dropout hits {}",
            grid.panels.len(),
            grid.diagnosis.rows.len(),
            grid.diagnosis.non_dropout_hits(),
            grid.diagnosis.mc_dropout_hits()
        ));
        Ok(())
    }
}

// ---- lda -------------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct LdaArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of discriminant components.
    #[arg(long)]
    k: Option<usize>,
    /// Fit on rows with these severity tags only.
    #[arg(long, value_delimiter = ',')]
    severities: Option<Vec<u8>>,
    #[arg(long)]
    standardize: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaParams {
    pub data: PathBuf,
    pub k: usize,
    pub severities: Option<Vec<u8>>,
    pub standardize: bool,
}

impl Default for LdaParams {
    fn default() -> Self {
        Self { data: PathBuf::new(), k: 2, severities: None, standardize: false }
    }
}

impl Job for LdaParams {
    const NAME: &'static str = "lda";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        let mut data = keep_severities(load_data(run, &self.data)?, self.severities.as_deref())?;
        if self.standardize && data.standardization.is_none() {
            data = data.standardize()?;
        }
        let proj = lda_fit(&data, self.k)?;
        run.write_json("lda.json", &proj)?;
        run.write("projected.csv", proj.projected_csv(&data)?)?;
        let mut centroids = String::new();
        for c in 0..proj.components() {
            centroids.push_str(&format!("ld{},", c + 1));
        }
        centroids.push_str("condition\n");
        for (name, c) in condition_centroids(&proj, &data)? {
            for v in c {
                centroids.push_str(&format!("{v},"));
            }
            centroids.push_str(&name);
            centroids.push('\n');
        }
        run.write("centroids.csv", centroids)?;
        run.say(format!(
            "{} components from {} classes, eigenvalues {:?}",
            proj.components(),
            proj.class_labels.len(),
            proj.eigenvalues
        ));
        Ok(())
    }
}

// ---- render ----------------------------------------------------------------

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Heatmap or field CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Value column for long-format field CSVs.
    #[arg(long)]
    column: Option<String>,
    #[arg(long)]
    title: Option<String>,
    /// Output file name inside the output directory.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    pub input: PathBuf,
    pub column: Option<String>,
    pub title: Option<String>,
    pub output: Option<String>,
}

impl Job for RenderParams {
    const NAME: &'static str = "render";

    fn execute(&self, run: &mut RunDir) -> Result<(), CliError> {
        require(&self.input, "input")?;
        let text = run.read_string(&self.input)?;
        let map = parse_heatmap(&text, self.column.as_deref())?;
        let stem = self.input.file_stem().and_then(|s| s.to_str()).unwrap_or("heatmap").to_string();
        let title = self.title.clone().unwrap_or_else(|| stem.clone());
        let name = self.output.clone().unwrap_or_else(|| match &self.column {
            Some(c) => format!("{stem}_{c}.svg"),
            None => format!("{stem}.svg"),
        });
        run.write(&name, heatmap_svg(&map, &title))?;
        run.say(format!("{}×{} cells → {name}", map.row_labels.len(), map.col_labels.len()));
        Ok(())
    }
}

// ---- replay ----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    manifest: PathBuf,
    /// Where to write the reproduced outputs (default: `replay/` next to
    /// the manifest).
    #[arg(long, short)]
    out: Option<PathBuf>,
}
