//! Pipeline orchestration behind the command-line interface: synthetic
//! data generation, model training, the full analysis pass, and sidecar
//! re-rendering, all writing deterministic artifacts into one run
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::{
    self, bin_projections, center_of_mass, clumping_diagnostic, cluster_anchor, concept_anchor,
    concept_overlap, project, rank_anchors, AnchorDirection,
};
use crate::assoc::{fdr_threshold, rank_features, AssocTest, FdrResult, FeatureRanking};
use crate::clusterlib::{fit_mixture, k_sweep, EmOptions, KSelectionReport};
use crate::config::{parse_concept, ConfigError, DatasetSource, RunConfig};
use crate::coxnet::bundle::{export_bundle, import_bundle, BundleError};
use crate::coxnet::{derive_subseed, train_model, TrainConfig, TrainedModel};
use crate::data::{
    generate_synthetic, load_csv, make_splits, CsvSpec, DatasetManifest, FeatureSchema,
    SplitRole, SurvivalDataset, SyntheticSpec, DEFAULT_CLASS_MEANS,
};
use crate::survstats::{median_from_curve, predict_survival, MedianSurvival, SurvivalCurve};
use crate::visualize::{
    average_projection_heatmap, bin_sample_table, figures::SURVIVAL_GRID_POINTS, pca_scatter,
    raw_feature_heatmap, scatter_feature_vs_projection, survival_heatmap, violin_data,
    BinSampleTable, HeatmapSpec, PcaScatter, ScatterPlot, ViolinPlot, SCHEMA_VERSION,
};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes: 0 success, 2 config, 3 data, 4 numerical.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn data(err: impl std::fmt::Display) -> CliError {
        CliError::Data(err.to_string())
    }

    fn numeric(err: impl std::fmt::Display) -> CliError {
        CliError::Numeric(err.to_string())
    }
}

impl From<crate::data::DataError> for CliError {
    fn from(e: crate::data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "survanchor",
    version,
    about = "Survival model embeddings explained through anchor directions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic survival dataset into the run directory.
    Synth(CommonArgs),
    /// Train the survival network and export embedding bundles.
    Train(CommonArgs),
    /// Cluster embeddings, estimate anchors, and emit every figure and
    /// table.
    Analyze(AnalyzeArgs),
    /// Re-render SVG files from existing JSON sidecars.
    Render(CommonArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Concept filter `column=value`; repeatable, each adds one anchor.
    #[arg(long)]
    pub concept: Vec<String>,
    /// Fixed cluster count, overriding the violin knee.
    #[arg(long)]
    pub k: Option<usize>,
    /// Projection bin count override.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Association test override: chi2, kendall, or kruskal.
    #[arg(long)]
    pub test: Option<String>,
    /// False discovery rate override.
    #[arg(long)]
    pub fdr_q: Option<f64>,
}

/// Loads the config named by the args (or defaults) and layers the
/// command-line overrides on top.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.display().to_string();
    }
    config.validate()?;
    Ok(config)
}

pub fn resolve_analyze_config(args: &AnalyzeArgs) -> Result<RunConfig, CliError> {
    let mut config = resolve_config(&args.common)?;
    if !args.concept.is_empty() {
        config.analyze.concepts = args.concept.clone();
    }
    if let Some(k) = args.k {
        config.analyze.k = Some(k);
    }
    if let Some(bins) = args.bins {
        config.analyze.bins = bins;
    }
    if let Some(test) = &args.test {
        config.analyze.test = test
            .parse::<AssocTest>()
            .map_err(ConfigError::Invalid)?;
    }
    if let Some(q) = args.fdr_q {
        config.analyze.fdr_q = q;
    }
    config.validate()?;
    Ok(config)
}

// Per-stage seed streams derived from the master seed.
const STREAM_SYNTH: u64 = 1;
const STREAM_SPLITS: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_CLUSTER: u64 = 4;
const STREAM_SAMPLES: u64 = 5;

// ---------------------------------------------------------------------------
// Artifact plumbing.

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(dir: &Path, name: &str, content: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), content)
        .map_err(|e| CliError::Data(format!("cannot write {name}: {e}")))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {name}: {e}")))?;
    write_text(dir, name, &(json + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(dir.join(name))
        .map_err(|e| CliError::Data(format!("cannot read {name}: {e}")))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Data(format!("cannot parse {name}: {e}")))
}

/// Identity stamp shared by every stage of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStamp {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    /// Hash of the effective config with the output directory masked out.
    pub config_sha256: String,
}

fn write_run_stamp(config: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let stamp = RunStamp {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        seed: config.seed,
        config_sha256: config.content_hash(),
    };
    write_json(dir, "run.json", &stamp)
}

/// Formats one CSV cell; quotes only when the content demands it, and
/// prints floats in shortest-roundtrip form.
fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn feature_csv(dataset: &SurvivalDataset, rows: &[usize]) -> String {
    let mut out = String::from("id");
    for f in &dataset.schema.features {
        out.push(',');
        out.push_str(&csv_escape(&f.name));
    }
    out.push_str(",time,event\n");
    for &i in rows {
        out.push_str(&csv_escape(&dataset.ids[i]));
        for v in dataset.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{},{}\n", dataset.times[i], dataset.events[i]));
    }
    out
}

/// Raw feature rows written by `cmd_train` and read back by `cmd_analyze`.
struct FeatureTable {
    ids: Vec<String>,
    /// Column-major, schema order.
    columns: Vec<Vec<f64>>,
    times: Vec<f64>,
    events: Vec<u8>,
}

impl FeatureTable {
    fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    fn n(&self) -> usize {
        self.ids.len()
    }
}

fn read_feature_csv(
    dir: &Path,
    name: &str,
    schema: &FeatureSchema,
) -> Result<FeatureTable, CliError> {
    let path = dir.join(name);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&path)
        .map_err(|e| CliError::Data(format!("cannot read {name}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{name}: {e}")))?
        .clone();
    let index_of = |col: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| CliError::Data(format!("{name} lacks column {col:?}")))
    };
    let id_idx = index_of("id")?;
    let time_idx = index_of("time")?;
    let event_idx = index_of("event")?;
    let feature_idx: Vec<usize> = schema
        .features
        .iter()
        .map(|f| index_of(&f.name))
        .collect::<Result<_, _>>()?;

    let mut ids = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); schema.features.len()];
    let mut times = Vec::new();
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        ids.push(record[id_idx].to_string());
        for (col, &idx) in columns.iter_mut().zip(&feature_idx) {
            let v: f64 = record[idx]
                .parse()
                .map_err(|_| CliError::Data(format!("{name}: bad number {:?}", &record[idx])))?;
            col.push(v);
        }
        let t: f64 = record[time_idx]
            .parse()
            .map_err(|_| CliError::Data(format!("{name}: bad time {:?}", &record[time_idx])))?;
        times.push(t);
        let e: u8 = record[event_idx]
            .parse()
            .map_err(|_| CliError::Data(format!("{name}: bad event {:?}", &record[event_idx])))?;
        events.push(e);
    }
    Ok(FeatureTable {
        ids,
        columns,
        times,
        events,
    })
}

// ---------------------------------------------------------------------------
// synth

pub fn cmd_synth(config: &RunConfig) -> Result<(), CliError> {
    if config.dataset.source != DatasetSource::Synthetic {
        return Err(ConfigError::Invalid(
            "synth requires dataset.source = \"synthetic\"".into(),
        )
        .into());
    }
    let dir = config.out_dir();
    ensure_dir(&dir)?;

    let spec = SyntheticSpec {
        n: config.synthetic.n,
        dim: config.synthetic.dim,
        class_means: DEFAULT_CLASS_MEANS[..config.synthetic.groups].to_vec(),
        time_variance: config.synthetic.time_variance,
        center_radius: config.synthetic.center_radius,
        feature_spread: config.synthetic.feature_spread,
        censor_quantile: config.synthetic.censor_quantile,
        seed: derive_subseed(config.seed, STREAM_SYNTH),
    };
    let (dataset, labels) = generate_synthetic(&spec)?;

    let all_rows: Vec<usize> = (0..dataset.n).collect();
    write_text(&dir, "data.csv", &feature_csv(&dataset, &all_rows))?;

    let mut label_csv = String::from("id,group\n");
    for (id, g) in dataset.ids.iter().zip(&labels) {
        label_csv.push_str(&format!("{},{g}\n", csv_escape(id)));
    }
    write_text(&dir, "labels.csv", &label_csv)?;

    let plan = make_splits(
        dataset.n,
        config.splits.fractions,
        derive_subseed(config.seed, STREAM_SPLITS),
    )?;
    let censored = dataset.events.iter().filter(|&&e| e == 0).count();
    let manifest = DatasetManifest {
        n: dataset.n,
        dim: dataset.dim,
        schema: dataset.schema.clone(),
        split_counts: plan.counts,
        seed: config.seed,
        censor_rate: censored as f64 / dataset.n as f64,
    };
    write_json(&dir, "dataset_manifest.json", &manifest)?;
    write_run_stamp(config, &dir)?;

    println!(
        "synth: {} rows, {} features, censor rate {:.3} -> {}",
        dataset.n,
        dataset.dim,
        manifest.censor_rate,
        dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn load_dataset(config: &RunConfig) -> Result<SurvivalDataset, CliError> {
    match config.dataset.source {
        DatasetSource::Synthetic => {
            let dir = config.out_dir();
            let manifest: DatasetManifest = read_json(&dir, "dataset_manifest.json")?;
            let spec = CsvSpec {
                time_column: "time".to_string(),
                event_column: "event".to_string(),
                id_column: Some("id".to_string()),
                features: manifest
                    .schema
                    .features
                    .iter()
                    .map(|f| (f.name.clone(), f.kind))
                    .collect(),
            };
            Ok(load_csv(&dir.join("data.csv"), &spec)?)
        }
        DatasetSource::Csv => {
            let spec = CsvSpec {
                time_column: config.dataset.time_column.clone(),
                event_column: config.dataset.event_column.clone(),
                id_column: config.dataset.id_column.clone(),
                features: config
                    .dataset
                    .features
                    .iter()
                    .map(|f| (f.name.clone(), f.kind))
                    .collect(),
            };
            Ok(load_csv(Path::new(&config.dataset.csv_path), &spec)?)
        }
    }
}

pub fn cmd_train(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.out_dir();
    ensure_dir(&dir)?;
    let dataset = load_dataset(config)?;

    // CSV datasets skip synth, so make sure the manifest exists for later
    // stages regardless of the path taken.
    if config.dataset.source == DatasetSource::Csv {
        let plan_preview = make_splits(
            dataset.n,
            config.splits.fractions,
            derive_subseed(config.seed, STREAM_SPLITS),
        )?;
        let censored = dataset.events.iter().filter(|&&e| e == 0).count();
        let manifest = DatasetManifest {
            n: dataset.n,
            dim: dataset.dim,
            schema: dataset.schema.clone(),
            split_counts: plan_preview.counts,
            seed: config.seed,
            censor_rate: censored as f64 / dataset.n as f64,
        };
        write_json(&dir, "dataset_manifest.json", &manifest)?;
    }

    let plan = make_splits(
        dataset.n,
        config.splits.fractions,
        derive_subseed(config.seed, STREAM_SPLITS),
    )?;
    write_json(&dir, "split_manifest.json", &plan)?;

    let train_config = TrainConfig {
        batch_sizes: config.train.batch_sizes.clone(),
        learning_rates: config.train.learning_rates.clone(),
        layer_counts: config.train.layer_counts.clone(),
        embed_dims: config.train.embed_dims.clone(),
        max_epochs: config.train.max_epochs,
        patience: config.train.patience,
        final_activation: config.train.final_activation,
        seed: derive_subseed(config.seed, STREAM_TRAIN),
    };
    let output = train_model(&dataset, &plan, &train_config).map_err(CliError::numeric)?;

    output
        .model
        .save(&dir.join("model.json"))
        .map_err(CliError::data)?;

    let mut log_csv = String::from("epoch,loss,val_concordance\n");
    for r in &output.log {
        log_csv.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.val_concordance));
    }
    write_text(&dir, "training_log.csv", &log_csv)?;
    write_json(&dir, "grid_report.json", &output.grid)?;

    let anchor_rows = plan.indices(SplitRole::AnchorEstimation);
    let viz_rows = plan.indices(SplitRole::Visualization);
    let anchor_bundle = output
        .model
        .build_bundle(&dataset, &anchor_rows, "anchor_estimation");
    let viz_bundle = output.model.build_bundle(&dataset, &viz_rows, "visualization");
    export_bundle(&anchor_bundle, &dir.join("embeddings_anchor.json"))?;
    export_bundle(&viz_bundle, &dir.join("embeddings_viz.json"))?;

    write_text(&dir, "anchor_features.csv", &feature_csv(&dataset, &anchor_rows))?;
    write_text(&dir, "viz_features.csv", &feature_csv(&dataset, &viz_rows))?;
    write_run_stamp(config, &dir)?;

    println!(
        "train: selected batch={} lr={} layers={} dim={} (validation concordance {:.4})",
        output.model.hyper.batch_size,
        output.model.hyper.learning_rate,
        output.model.hyper.layer_count,
        output.model.hyper.embed_dim,
        output.model.val_concordance
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionsFile {
    pub schema_version: u32,
    pub anchor_labels: Vec<String>,
    pub row_ids: Vec<String>,
    /// One vector of projections per anchor, row-aligned with `row_ids`.
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingFile {
    pub schema_version: u32,
    pub ranking: FeatureRanking,
    pub fdr: FdrResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClumpingEntry {
    pub anchor: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub k_selected: Option<usize>,
    pub k_used: usize,
    pub anchor_labels: Vec<String>,
    pub clumping: Vec<ClumpingEntry>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

/// Tracks artifact names and soft failures while the analysis runs.
struct Reporter {
    artifacts: Vec<String>,
    warnings: Vec<String>,
}

impl Reporter {
    fn new() -> Reporter {
        Reporter {
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn wrote(&mut self, name: &str) {
        self.artifacts.push(name.to_string());
    }

    fn warn(&mut self, message: String) {
        eprintln!("warning: {message}");
        self.warnings.push(message);
    }
}

fn soft_write_figure<T: Serialize>(
    dir: &Path,
    stem: &str,
    reporter: &mut Reporter,
    result: Result<(T, String), String>,
) {
    match result {
        Ok((sidecar, svg)) => {
            let json_name = format!("{stem}.json");
            let svg_name = format!("{stem}.svg");
            if let Err(e) = write_json(dir, &json_name, &sidecar) {
                reporter.warn(format!("{json_name}: {e}"));
                return;
            }
            reporter.wrote(&json_name);
            if let Err(e) = write_text(dir, &svg_name, &svg) {
                reporter.warn(format!("{svg_name}: {e}"));
                return;
            }
            reporter.wrote(&svg_name);
        }
        Err(message) => reporter.warn(format!("{stem} skipped: {message}")),
    }
}

pub fn cmd_analyze(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.out_dir();
    ensure_dir(&dir)?;
    let mut reporter = Reporter::new();

    let model = TrainedModel::load(&dir.join("model.json")).map_err(CliError::Data)?;
    let anchor_bundle = import_bundle(&dir.join("embeddings_anchor.json"))?;
    let viz_bundle = import_bundle(&dir.join("embeddings_viz.json"))?;
    let manifest: DatasetManifest = read_json(&dir, "dataset_manifest.json")?;
    let schema = &manifest.schema;
    let viz = read_feature_csv(&dir, "viz_features.csv", schema)?;
    if viz.ids != viz_bundle.ids {
        return Err(CliError::Data(
            "viz_features.csv rows disagree with embeddings_viz.json".into(),
        ));
    }
    if let Some((bundle_times, bundle_events)) = viz_bundle.labels() {
        if viz.times != bundle_times || viz.events != bundle_events {
            return Err(CliError::Data(
                "viz_features.csv survival labels disagree with embeddings_viz.json".into(),
            ));
        }
    }

    let (anchor_times, anchor_events) = anchor_bundle
        .labels()
        .ok_or_else(|| CliError::Data("anchor bundle lacks survival labels".into()))?;
    let anchor_times = anchor_times.to_vec();
    let anchor_events = anchor_events.to_vec();

    // Cluster count sweep and violin.
    let em_opts = EmOptions {
        max_iter: config.cluster.max_iter,
        tol: config.cluster.tol,
        seed: derive_subseed(config.seed, STREAM_CLUSTER),
    };
    let report: KSelectionReport = k_sweep(
        &anchor_bundle.embeddings,
        &anchor_times,
        &anchor_events,
        config.cluster.kind,
        config.cluster.k_min,
        config.cluster.k_max,
        &em_opts,
    )
    .map_err(CliError::numeric)?;
    write_json(&dir, "k_selection.json", &report)?;
    reporter.wrote("k_selection.json");
    let violin = violin_data(&report, "pairwise separation by cluster count");
    soft_write_figure(&dir, "violin", &mut reporter, Ok((violin.clone(), violin.to_svg())));

    let k_used = match (config.analyze.k, report.selected) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => {
            reporter.warn(format!(
                "no candidate separated every cluster pair; falling back to k = {}; pass --k to choose explicitly",
                config.cluster.k_min
            ));
            config.cluster.k_min
        }
    };

    let fit = fit_mixture(&anchor_bundle.embeddings, k_used, config.cluster.kind, &em_opts)
        .map_err(CliError::numeric)?;
    let center = center_of_mass(&anchor_bundle.embeddings).map_err(CliError::numeric)?;

    // Cluster anchors, then concept anchors.
    let mut anchor_set: Vec<AnchorDirection> = Vec::new();
    for c in 0..k_used {
        match cluster_anchor(&anchor_bundle.embeddings, &fit.assignments, c, &center) {
            Ok(anchor) => anchor_set.push(anchor),
            Err(e) => reporter.warn(format!("cluster {c} anchor skipped: {e}")),
        }
    }
    if !config.analyze.concepts.is_empty() {
        let anchor_features = read_feature_csv(&dir, "anchor_features.csv", schema)?;
        if anchor_features.ids != anchor_bundle.ids {
            return Err(CliError::Data(
                "anchor_features.csv rows disagree with embeddings_anchor.json".into(),
            ));
        }
        for raw in &config.analyze.concepts {
            let (column, value) = parse_concept(raw).map_err(ConfigError::Invalid)?;
            let Some(feature_idx) = schema.features.iter().position(|f| f.name == column) else {
                return Err(ConfigError::Invalid(format!(
                    "concept filter references unknown feature {column:?}"
                ))
                .into());
            };
            let rows: Vec<usize> = (0..anchor_features.n())
                .filter(|&i| anchor_features.columns[feature_idx][i] == value)
                .collect();
            if rows.is_empty() {
                reporter.warn(format!("concept {raw:?} matches no anchor-estimation rows"));
                continue;
            }
            let concept_embeddings: Vec<Vec<f64>> = rows
                .iter()
                .map(|&i| anchor_bundle.embeddings[i].clone())
                .collect();
            let concept_ids: Vec<String> =
                rows.iter().map(|&i| anchor_features.ids[i].clone()).collect();
            let shared = concept_overlap(&concept_ids, &viz.ids);
            if !shared.is_empty() {
                reporter.warn(format!(
                    "concept {raw:?} shares {} rows with the visualization split",
                    shared.len()
                ));
            }
            let name = format!("{column}={value}");
            match concept_anchor(&name, &concept_embeddings, &center) {
                Ok(anchor) => anchor_set.push(anchor),
                Err(e) => reporter.warn(format!("concept {raw:?} anchor skipped: {e}")),
            }
        }
    }
    if anchor_set.is_empty() {
        return Err(CliError::Numeric("no usable anchors".into()));
    }
    write_json(&dir, "anchors.json", &anchor_set)?;
    reporter.wrote("anchors.json");

    // Projections of the visualization embeddings onto every anchor.
    let mut projections: Vec<Vec<f64>> = Vec::with_capacity(anchor_set.len());
    for anchor in &anchor_set {
        projections.push(project(&viz_bundle.embeddings, anchor).map_err(CliError::numeric)?);
    }
    let labels: Vec<String> = anchor_set.iter().map(|a| a.label()).collect();
    write_json(
        &dir,
        "projections.json",
        &ProjectionsFile {
            schema_version: SCHEMA_VERSION,
            anchor_labels: labels.clone(),
            row_ids: viz.ids.clone(),
            values: projections.clone(),
        },
    )?;
    reporter.wrote("projections.json");

    let mut clumping = Vec::new();
    for (label, p) in labels.iter().zip(&projections) {
        let fraction = clumping_diagnostic(p, 0.01);
        if fraction > 0.5 {
            reporter.warn(format!(
                "anchor {label}: {:.1}% of projections within 0.01 of +/-1; angular information may be collapsing (consider the unit_norm final activation)",
                100.0 * fraction
            ));
        }
        clumping.push(ClumpingEntry {
            anchor: label.clone(),
            fraction,
        });
    }

    // Predicted survival curves of the visualization rows.
    let curves: Vec<SurvivalCurve> = (0..viz.n())
        .map(|i| predict_survival(&model.baseline, model.score_row(&viz.row(i))))
        .collect();
    let (t_lo, t_hi) = model.train_time_range;

    for (anchor_idx, label) in labels.iter().enumerate() {
        let p = &projections[anchor_idx];
        let binning = match bin_projections(p, config.analyze.bins) {
            Ok(b) => b,
            Err(e) => {
                reporter.warn(format!("anchor {label}: binning failed: {e}"));
                continue;
            }
        };

        soft_write_figure(
            &dir,
            &format!("heatmap_raw_{label}"),
            &mut reporter,
            raw_feature_heatmap(
                &binning,
                schema,
                &viz.columns,
                &format!("feature fractions per projection bin ({label})"),
            )
            .map(|m| {
                let svg = m.to_svg();
                (m, svg)
            })
            .map_err(|e| e.to_string()),
        );

        let bin_curves = anchors::bin_survival(&binning, &curves).map_err(CliError::numeric)?;
        soft_write_figure(
            &dir,
            &format!("heatmap_survival_{label}"),
            &mut reporter,
            survival_heatmap(
                &bin_curves,
                t_lo,
                t_hi,
                SURVIVAL_GRID_POINTS,
                &format!("predicted survival per projection bin ({label})"),
            )
            .map(|m| {
                let svg = m.to_svg();
                (m, svg)
            })
            .map_err(|e| e.to_string()),
        );

        match rank_features(schema, &viz.columns, p, label, config.analyze.test, config.analyze.bins)
        {
            Ok(ranking) => {
                let p_values: Vec<f64> = ranking.entries.iter().map(|e| e.p_value).collect();
                match fdr_threshold(&p_values, config.analyze.fdr_q) {
                    Ok(fdr) => {
                        if ranking.entries.iter().any(|e| e.low_expected) {
                            reporter.warn(format!(
                                "anchor {label}: some contingency tables have expected counts below 5"
                            ));
                        }
                        let name = format!("ranking_{label}.json");
                        let file = RankingFile {
                            schema_version: SCHEMA_VERSION,
                            ranking: ranking.clone(),
                            fdr,
                        };
                        if write_json(&dir, &name, &file).is_ok() {
                            reporter.wrote(&name);
                        }
                        let mut csv = String::from("rank,feature,test,statistic,p\n");
                        for e in &ranking.entries {
                            csv.push_str(&format!(
                                "{},{},{},{},{}\n",
                                e.rank,
                                csv_escape(&e.feature),
                                config.analyze.test.as_str(),
                                e.statistic,
                                e.p_value
                            ));
                        }
                        let name = format!("ranking_{label}.csv");
                        if write_text(&dir, &name, &csv).is_ok() {
                            reporter.wrote(&name);
                        }

                        if let Some(top) = ranking.entries.first() {
                            let idx = schema
                                .features
                                .iter()
                                .position(|f| f.name == top.feature)
                                .expect("ranked feature exists in schema");
                            soft_write_figure(
                                &dir,
                                &format!("scatter_{label}"),
                                &mut reporter,
                                scatter_feature_vs_projection(
                                    p,
                                    &viz.columns[idx],
                                    &format!("projection on {label}"),
                                    &top.feature,
                                    &format!("{} vs projection ({label})", top.feature),
                                )
                                .map(|s| {
                                    let svg = s.to_svg();
                                    (s, svg)
                                })
                                .map_err(|e| e.to_string()),
                            );
                        }
                    }
                    Err(e) => reporter.warn(format!("anchor {label}: fdr failed: {e}")),
                }
            }
            Err(e) => reporter.warn(format!("anchor {label}: feature ranking failed: {e}")),
        }

        soft_write_figure(
            &dir,
            &format!("samples_{label}"),
            &mut reporter,
            bin_sample_table(
                &binning,
                &viz.ids,
                config.analyze.sample_size,
                derive_subseed(config.seed, STREAM_SAMPLES),
                &format!("sampled rows per projection bin ({label})"),
            )
            .map(|t| {
                let svg = t.to_svg();
                (t, svg)
            })
            .map_err(|e| e.to_string()),
        );
    }

    // Anchor ranking across the whole set.
    match rank_anchors(&anchor_set, &projections, &curves, config.analyze.alpha) {
        Ok(ranking) => {
            if write_json(&dir, "anchor_ranking.json", &ranking).is_ok() {
                reporter.wrote("anchor_ranking.json");
            }
            let mut csv = String::from("position,anchor,median_kind,median_time,threshold,top_count\n");
            for (i, e) in ranking.entries.iter().enumerate() {
                let (kind, time) = match e.median {
                    MedianSurvival::Time(t) => ("time", format!("{t}")),
                    MedianSurvival::BeyondMaxTime => ("beyond_max_time", String::new()),
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i + 1,
                    csv_escape(&e.label),
                    kind,
                    time,
                    e.threshold,
                    e.top_count
                ));
            }
            if write_text(&dir, "anchor_ranking.csv", &csv).is_ok() {
                reporter.wrote("anchor_ranking.csv");
            }
        }
        Err(e) => reporter.warn(format!("anchor ranking failed: {e}")),
    }

    // Average projection per argmax-group.
    soft_write_figure(
        &dir,
        "avg_projection",
        &mut reporter,
        build_average_projection(&labels, &projections),
    );

    // PCA baseline colored by median predicted survival.
    let colors: Vec<f64> = curves
        .iter()
        .map(|c| match median_from_curve(c) {
            Ok(MedianSurvival::Time(t)) => t,
            _ => t_hi,
        })
        .collect();
    soft_write_figure(
        &dir,
        "pca",
        &mut reporter,
        pca_scatter(
            &viz_bundle,
            &colors,
            "median predicted survival time",
            "visualization embeddings, top two principal axes",
        )
        .map(|p| {
            let svg = p.to_svg();
            (p, svg)
        })
        .map_err(|e| e.to_string()),
    );

    let run_report = RunReport {
        schema_version: SCHEMA_VERSION,
        k_selected: report.selected,
        k_used,
        anchor_labels: labels.clone(),
        clumping,
        warnings: reporter.warnings.clone(),
        artifacts: reporter.artifacts.clone(),
    };
    write_json(&dir, "run_report.json", &run_report)?;
    write_run_stamp(config, &dir)?;

    println!(
        "analyze: k={} ({} anchors, {} artifacts, {} warnings) -> {}",
        k_used,
        labels.len(),
        run_report.artifacts.len(),
        run_report.warnings.len(),
        dir.display()
    );
    Ok(())
}

/// Groups visualization rows by their strongest anchor and averages the
/// projections of each group onto every anchor. Anchors that win no rows
/// simply contribute no group row.
fn build_average_projection(
    labels: &[String],
    projections: &[Vec<f64>],
) -> Result<(HeatmapSpec, String), String> {
    let n = projections.first().map_or(0, |p| p.len());
    if n == 0 {
        return Err("no projections".to_string());
    }
    let mut winner = vec![0usize; n];
    for i in 0..n {
        let mut best = 0;
        for a in 1..projections.len() {
            if projections[a][i] > projections[best][i] {
                best = a;
            }
        }
        winner[i] = best;
    }
    let mut group_names = Vec::new();
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for a in 0..projections.len() {
        if winner.contains(&a) {
            remap.insert(a, group_names.len());
            group_names.push(format!("top_{}", labels[a]));
        }
    }
    let group_labels: Vec<usize> = winner.iter().map(|w| remap[w]).collect();
    average_projection_heatmap(
        &group_names,
        &group_labels,
        labels,
        projections,
        "average projection by strongest-anchor group",
    )
    .map(|m| {
        let svg = m.to_svg();
        (m, svg)
    })
    .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// render

/// Re-renders every figure sidecar in the run directory; SVG output is a
/// pure function of sidecar content, so files come back byte-identical.
pub fn cmd_render(config: &RunConfig) -> Result<(), CliError> {
    let dir = config.out_dir();
    let entries = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Data(format!("cannot list {}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();

    let mut rendered = 0usize;
    for name in names {
        let Some(stem) = name.strip_suffix(".json") else {
            continue;
        };
        let svg = if stem == "violin" {
            let plot: ViolinPlot = read_json(&dir, &name)?;
            plot.to_svg()
        } else if stem == "pca" {
            let plot: PcaScatter = read_json(&dir, &name)?;
            plot.to_svg()
        } else if stem == "avg_projection"
            || stem.starts_with("heatmap_raw_")
            || stem.starts_with("heatmap_survival_")
        {
            let map: HeatmapSpec = read_json(&dir, &name)?;
            map.to_svg()
        } else if stem.starts_with("scatter_") {
            let plot: ScatterPlot = read_json(&dir, &name)?;
            plot.to_svg()
        } else if stem.starts_with("samples_") {
            let table: BinSampleTable = read_json(&dir, &name)?;
            table.to_svg()
        } else {
            continue;
        };
        write_text(&dir, &format!("{stem}.svg"), &svg)?;
        rendered += 1;
    }
    println!("render: {rendered} figures -> {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_layering() {
        let args = AnalyzeArgs {
            common: CommonArgs {
                config: None,
                seed: Some(77),
                out: Some(PathBuf::from("elsewhere")),
            },
            concept: vec!["f0=1".into()],
            k: Some(3),
            bins: Some(9),
            test: Some("kruskal".into()),
            fdr_q: Some(0.1),
        };
        let config = resolve_analyze_config(&args).unwrap();
        assert_eq!(config.seed, 77);
        assert_eq!(config.output.dir, "elsewhere");
        assert_eq!(config.analyze.k, Some(3));
        assert_eq!(config.analyze.bins, 9);
        assert_eq!(config.analyze.test, AssocTest::Kruskal);
        assert_eq!(config.analyze.fdr_q, 0.1);
        assert_eq!(config.analyze.concepts, vec!["f0=1".to_string()]);
    }

    #[test]
    fn bad_test_override_is_a_config_error() {
        let args = AnalyzeArgs {
            test: Some("anova".into()),
            ..Default::default()
        };
        let err = resolve_analyze_config(&args).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(
            CliError::from(ConfigError::Invalid("x".into())).exit_code(),
            2
        );
        assert_eq!(CliError::Data("x".into()).exit_code(), 3);
        assert_eq!(CliError::Numeric("x".into()).exit_code(), 4);
    }
}
