//! The chained pipeline: extract, fingerprint, cluster, filter, features,
//! evaluate, with a manifest recording everything a rerun needs.
//!
//! Every run writes a self-contained artifact directory. All randomness
//! flows from the seeds in the manifest; rerunning with the same inputs and
//! config reproduces every artifact byte for byte (the manifest's timestamp
//! field is the one exception, and the manifest digest excludes it).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterSet, Epsilon, SelectionMode};
use crate::dalvik::{self, Extraction, ExtractionReport};
use crate::error::{Error, Result};
use crate::features::{self,AppFeatures, FeatureMatrix, FeatureSet, FeatureVector};
use crate::fingerprint::{fingerprint_of, AppFingerprint, Label};
use crate::hash;
use crate::io::{self, ClusterReport, ExperimentReport, InfoGainEntry};
use crate::mleval::{self, ForestConfig};

/// What was run, on what, with which knobs. Lives next to the artifacts.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    /// Flag values, sorted by name.
    pub flags: BTreeMap<String, String>,
    /// Content digest per input file, sorted by path.
    pub input_digests: BTreeMap<String, String>,
    pub seed: u64,
    /// Unix seconds; the only field reruns are allowed to differ in.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            flags: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            seed,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn flag(mut self, name: &str, value: impl ToString) -> RunManifest {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_digests
            .insert(path.display().to_string(), hash::file_digest(bytes));
    }

    /// Digest over everything except the timestamp; equal digests promise
    /// byte-identical artifacts.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.timestamp = 0;
        let bytes = serde_json::to_vec(&canonical).expect("manifest serializes");
        hash::file_digest(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_json_pretty(path, self)
    }
}

/// Pipeline knobs, validated before any work starts.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Grid for the cluster-count sweep curve.
    pub sweep_grid: Vec<Epsilon>,
    /// Thresholds that get their own filtered dataset and evaluation.
    pub dataset_epsilons: Vec<Epsilon>,
    pub feature_set: FeatureSet,
    pub forest: ForestConfig,
    pub kfold: usize,
    /// Also evaluate each filtered dataset after class balancing.
    pub balance: bool,
    /// Cluster each class separately (per-class dataset counts) instead of
    /// one joint run.
    pub per_label: bool,
    /// Drop method sequences shorter than this many opcodes.
    pub min_length: usize,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            seed: 0,
            sweep_grid: cluster::parse_grid("0:1:0.1").expect("static grid"),
            dataset_epsilons: vec![
                Epsilon::new(0.0).expect("static"),
                Epsilon::new(0.1).expect("static"),
                Epsilon::new(0.2).expect("static"),
            ],
            feature_set: FeatureSet::Both,
            forest: ForestConfig::default(),
            kfold: 10,
            balance: false,
            per_label: true,
            min_length: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kfold < 2 {
            return Err(Error::InvalidConfig("kfold must be at least 2".into()));
        }
        if self.forest.tree_count == 0 {
            return Err(Error::InvalidConfig("tree count must be at least 1".into()));
        }
        if self.min_length == 0 {
            return Err(Error::InvalidConfig("min-length must be at least 1".into()));
        }
        if self.sweep_grid.is_empty() || self.dataset_epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilon grids must be non-empty".into()));
        }
        Ok(())
    }
}

/// One input app: a file (`.dex`, `.apk`, `.zip`) or a directory of smali.
#[derive(Debug, Clone)]
pub struct LabeledInput {
    pub path: PathBuf,
    pub label: Label,
}

/// Collects labeled inputs from per-class directories, sorted by file name
/// for reproducibility.
pub fn collect_inputs(malware_dir: &Path, goodware_dir: &Path) -> Result<Vec<LabeledInput>> {
    let mut inputs = Vec::new();
    for (dir, label) in [(malware_dir, Label::Malware), (goodware_dir, Label::Goodware)] {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.is_dir()
                    || matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("dex" | "apk" | "zip")
                    )
            })
            .collect();
        paths.sort();
        inputs.extend(paths.into_iter().map(|path| LabeledInput { path, label }));
    }
    Ok(inputs)
}

/// Extracts one input, whatever its format.
pub fn extract_input(input: &LabeledInput, min_length: usize) -> Result<Extraction> {
    let app_id = app_id_of(&input.path);
    let mut extraction = if input.path.is_dir() {
        extract_smali_dir(&input.path, &app_id)?
    } else {
        let bytes = fs::read(&input.path)?;
        match input.path.extension().and_then(|e| e.to_str()) {
            Some("dex") => dalvik::extract_from_dex(&bytes, &app_id)?,
            Some("apk" | "zip") => dalvik::extract_from_apk(&bytes, &app_id)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "cannot infer format of {:?} (extension {:?})",
                    input.path, other
                )))
            }
        }
    };
    if min_length > 1 {
        extraction
            .sequences
            .retain(|s| s.opcodes.len() >= min_length);
        extraction.report.method_count = extraction.sequences.len();
    }
    Ok(extraction)
}

/// One app from a directory of smali files (recursive, sorted paths).
pub fn extract_smali_dir(dir: &Path, app_id: &str) -> Result<Extraction> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("smali"))
        .collect();
    files.sort();

    let mut report = ExtractionReport {
        app_id: app_id.to_string(),
        ..Default::default()
    };
    let mut sequences = Vec::new();
    for file in &files {
        let text = fs::read_to_string(file)?;
        let rel = file.strip_prefix(dir).unwrap_or(file).display().to_string();
        match dalvik::extract_from_smali(&text) {
            Ok(seqs) => {
                for mut s in seqs {
                    s.method_id = format!("{rel}:{}", s.method_id);
                    sequences.push(s);
                }
            }
            Err(err) => {
                report.skipped_methods += 1;
                report.parse_warnings.push(format!("{rel}: {err}"));
            }
        }
    }
    report.method_count = sequences.len();
    Ok(Extraction { sequences, report })
}

pub fn app_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Per-dataset line in the summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetSummary {
    pub name: String,
    pub epsilon: Option<f64>,
    pub malware: usize,
    pub goodware: usize,
    pub cluster_count: Option<usize>,
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub skipped_reason: Option<String>,
}

/// Everything the human-readable report needs, also stored as JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineSummary {
    pub manifest_digest: String,
    pub duplicate_fraction: f64,
    pub excluded_apps: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub sweep: Vec<(f64, usize)>,
    pub datasets: Vec<DatasetSummary>,
}

/// Runs the full chain into `out_dir`.
pub fn run_pipeline(
    config: &PipelineConfig,
    inputs: &[LabeledInput],
    out_dir: &Path,
) -> Result<PipelineSummary> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyCorpus.in_stage("extract"));
    }
    fs::create_dir_all(out_dir)?;
    for sub in ["clusters", "filtered", "features", "eval"] {
        fs::create_dir_all(out_dir.join(sub))?;
    }

    let mut manifest = RunManifest::new("pipeline", config.seed)
        .flag("kfold", config.kfold)
        .flag("trees", config.forest.tree_count)
        .flag("feature_set", format!("{:?}", config.feature_set))
        .flag("balance", config.balance)
        .flag("per_label", config.per_label)
        .flag("min_length", config.min_length)
        .flag(
            "dataset_epsilons",
            config
                .dataset_epsilons
                .iter()
                .map(|e| format!("{:.2}", e.value()))
                .collect::<Vec<_>>()
                .join(","),
        );

    // extract
    let mut warnings: Vec<String> = Vec::new();
    let extractions: Vec<(Extraction, Label, Vec<u8>)> = inputs
        .par_iter()
        .map(|input| -> Result<(Extraction, Label, Vec<u8>)> {
            let bytes = if input.path.is_dir() {
                Vec::new()
            } else {
                fs::read(&input.path)?
            };
            let ex = extract_input(input, config.min_length)
                .map_err(|e| e.in_stage(&format!("extract {:?}", input.path)))?;
            Ok((ex, input.label, bytes))
        })
        .collect::<Result<Vec<_>>>()?;
    for (input, (ex, _, bytes)) in inputs.iter().zip(&extractions) {
        manifest.input(&input.path, bytes);
        for w in &ex.report.parse_warnings {
            warnings.push(format!("{}: {w}", ex.report.app_id));
        }
    }
    {
        let records: Vec<io::ExtractRecord> = extractions
            .iter()
            .map(|(ex, _, _)| io::ExtractRecord::from_extraction(ex))
            .collect();
        io::write_jsonl(&out_dir.join("extract.jsonl"), &records)
            .map_err(|e| e.in_stage("extract"))?;
    }

    // fingerprint
    let mut corpus: Vec<AppFingerprint> = Vec::new();
    let mut excluded: Vec<(String, String)> = Vec::new();
    for (ex, label, _) in &extractions {
        match fingerprint_of(&ex.sequences, &ex.report.app_id, *label) {
            Ok(fp) => corpus.push(fp),
            Err(err) => excluded.push((ex.report.app_id.clone(), err.to_string())),
        }
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus.in_stage("fingerprint"));
    }
    {
        let mut ids = std::collections::HashSet::new();
        for fp in &corpus {
            if !ids.insert(fp.app_id.clone()) {
                return Err(Error::DuplicateAppId(fp.app_id.clone()).in_stage("fingerprint"));
            }
        }
    }
    io::write_fingerprints(&out_dir.join("fingerprints.jsonl"), &corpus)
        .map_err(|e| e.in_stage("fingerprint"))?;

    // cluster: sweep curve plus one dataset per configured epsilon
    let mode = SelectionMode::Seeded(config.seed);
    let sweep = cluster::epsilon_sweep(&corpus, &config.sweep_grid, mode)
        .map_err(|e| e.in_stage("cluster"))?;
    fs::write(out_dir.join("sweep.csv"), io::sweep_csv(&sweep))?;

    let dedup = cluster::dedup_at_zero(&corpus).map_err(|e| e.in_stage("cluster"))?;
    let duplicate_fraction = 1.0 - dedup.cluster_count() as f64 / corpus.len() as f64;

    // features for every fingerprinted app
    let app_features: Vec<AppFeatures> = corpus
        .par_iter()
        .map(|fp| -> Result<AppFeatures> {
            let input = inputs
                .iter()
                .find(|i| app_id_of(&i.path) == fp.app_id)
                .expect("fingerprints come from inputs");
            app_features_of(&input.path)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("features"))?;
    let overall_rows: Vec<FeatureVector> = corpus
        .iter()
        .zip(&app_features)
        .map(|(fp, feats)| feats.vector(config.feature_set, &fp.app_id, fp.label))
        .collect();
    let feature_names: Vec<String> = config
        .feature_set
        .feature_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let overall = features::build_matrix(overall_rows, feature_names)
        .map_err(|e| e.in_stage("features"))?;
    fs::write(
        out_dir.join("features").join("overall.csv"),
        features::write_csv(&overall),
    )?;

    // filtered datasets and their artifacts
    let mut datasets: Vec<DatasetSummary> = Vec::new();
    let mut info_gain_columns: Vec<(String, Vec<InfoGainEntry>)> = Vec::new();
    let (name, summary, ig) = evaluate_dataset("overall", None, &corpus, &overall, config, out_dir)?;
    info_gain_columns.push((name, ig));
    datasets.push(summary);

    for &eps in &config.dataset_epsilons {
        let tag = format!("epsilon_{:.2}", eps.value());
        let set = cluster_for_dataset(&corpus, eps, config)?;
        io::write_json_pretty(
            &out_dir.join("clusters").join(format!("{tag}.json")),
            &ClusterReport::from(&set),
        )?;
        let representatives = cluster::filter_representatives(&corpus, &set)
            .map_err(|e| e.in_stage("filter"))?;
        io::write_fingerprints(
            &out_dir.join("filtered").join(format!("{tag}.jsonl")),
            &representatives,
        )?;

        let rep_ids: std::collections::HashSet<&str> =
            representatives.iter().map(|f| f.app_id.as_str()).collect();
        let filtered_matrix = overall.select(|id| rep_ids.contains(id));
        fs::write(
            out_dir.join("features").join(format!("{tag}.csv")),
            features::write_csv(&filtered_matrix),
        )?;

        let (name, mut summary, ig) =
            evaluate_dataset(&tag, Some(eps.value()), &representatives, &filtered_matrix, config, out_dir)?;
        summary.cluster_count = Some(set.cluster_count());
        info_gain_columns.push((name, ig));
        datasets.push(summary);
    }

    // one info-gain CSV across datasets, ranked by the overall column
    write_infogain_csv(out_dir, &info_gain_columns)?;

    // dataset_sizes.csv mirrors the per-class table
    {
        let mut csv = String::from("dataset,epsilon,malware,goodware\n");
        for d in &datasets {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                d.name,
                d.epsilon.map(|e| format!("{e:.2}")).unwrap_or_default(),
                d.malware,
                d.goodware
            ));
        }
        fs::write(out_dir.join("dataset_sizes.csv"), csv)?;
    }

    let summary = PipelineSummary {
        manifest_digest: manifest.digest(),
        duplicate_fraction,
        excluded_apps: excluded,
        warnings,
        sweep,
        datasets,
    };
    io::write_json_pretty(&out_dir.join("summary.json"), &summary)?;
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(summary)
}

fn cluster_for_dataset(
    corpus: &[AppFingerprint],
    eps: Epsilon,
    config: &PipelineConfig,
) -> Result<ClusterSet> {
    let mode = SelectionMode::Seeded(config.seed);
    if !config.per_label {
        return cluster::cluster_corpus(corpus, eps, mode).map_err(|e| e.in_stage("cluster"));
    }
    // Per-class runs; the union of the two partitions is still a partition.
    let mut clusters = Vec::new();
    for label in [Label::Malware, Label::Goodware, Label::Unlabeled] {
        let class: Vec<AppFingerprint> = corpus
            .iter()
            .filter(|f| f.label == label)
            .cloned()
            .collect();
        if class.is_empty() {
            continue;
        }
        let set = cluster::cluster_corpus(&class, eps, mode).map_err(|e| e.in_stage("cluster"))?;
        clusters.extend(set.clusters);
    }
    Ok(ClusterSet {
        epsilon: eps.value(),
        mode,
        clusters,
    })
}

fn evaluate_dataset(
    name: &str,
    epsilon: Option<f64>,
    corpus: &[AppFingerprint],
    matrix: &FeatureMatrix,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<(String, DatasetSummary, Vec<InfoGainEntry>)> {
    let malware = corpus.iter().filter(|f| f.label == Label::Malware).count();
    let goodware = corpus.len() - malware;

    let ig_report = mleval::information_gain(matrix).map_err(|e| e.in_stage("infogain"))?;
    let info_gain: Vec<InfoGainEntry> = (&ig_report).into();

    let eval_path = out_dir.join("eval").join(format!("{name}.json"));
    let mut summary = DatasetSummary {
        name: name.to_string(),
        epsilon,
        malware,
        goodware,
        cluster_count: None,
        accuracy: None,
        tpr: None,
        skipped_reason: None,
    };
    match mleval::kfold_evaluate(matrix, config.kfold, &config.forest, config.seed) {
        Ok(eval) => {
            summary.accuracy = Some(eval.metrics.accuracy);
            summary.tpr = Some(eval.metrics.tpr);
            let report = ExperimentReport {
                eval,
                info_gain: info_gain.clone(),
            };
            io::write_json_pretty(&eval_path, &report)?;
        }
        Err(err @ (Error::TooFewSamples(_) | Error::DegenerateLabels(_))) => {
            summary.skipped_reason = Some(err.to_string());
        }
        Err(other) => return Err(other.in_stage("evaluate")),
    }

    if config.balance && summary.skipped_reason.is_none() {
        let balanced = mleval::balance_dataset(matrix, config.seed)
            .map_err(|e| e.in_stage("balance"))?;
        match mleval::kfold_evaluate(&balanced, config.kfold, &config.forest, config.seed) {
            Ok(eval) => {
                let report = ExperimentReport {
                    eval,
                    info_gain: Vec::new(),
                };
                io::write_json_pretty(
                    &out_dir.join("eval").join(format!("balanced_{name}.json")),
                    &report,
                )?;
            }
            Err(Error::TooFewSamples(_)) => {} // balanced set too small; skip quietly
            Err(other) => return Err(other.in_stage("balance")),
        }
    }

    Ok((name.to_string(), summary, info_gain))
}

fn write_infogain_csv(out_dir: &Path, columns: &[(String, Vec<InfoGainEntry>)]) -> Result<()> {
    let Some((_, overall)) = columns.first() else {
        return Ok(());
    };
    let mut csv = String::from("feature");
    for (name, _) in columns {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for entry in overall {
        csv.push_str(&entry.feature);
        for (_, column) in columns {
            let gain = column
                .iter()
                .find(|e| e.feature == entry.feature)
                .map(|e| e.gain)
                .unwrap_or(0.0);
            csv.push_str(&format!(",{gain:.4}"));
        }
        csv.push('\n');
    }
    fs::write(out_dir.join("infogain.csv"), csv)?;
    Ok(())
}

fn app_features_of(path: &Path) -> Result<AppFeatures> {
    if path.is_dir() {
        // Smali dumps carry no method-id pool or manifest; feature bits
        // cannot be recovered from them here.
        return Ok(AppFeatures::default());
    }
    let bytes = fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("apk" | "zip") => features::features_in_apk(&bytes),
        Some("dex") => Ok(AppFeatures {
            api_calls: features::api_calls_in_dex(&bytes)?,
            ..Default::default()
        }),
        _ => Ok(AppFeatures::default()),
    }
}

/// Renders the human-readable run summary from an artifact directory.
pub fn report(artifact_dir: &Path) -> Result<String> {
    let summary_path = artifact_dir.join("summary.json");
    if !summary_path.exists() {
        return Err(Error::MissingArtifact(summary_path.display().to_string()));
    }
    let summary: PipelineSummary = serde_json::from_str(&fs::read_to_string(&summary_path)?)?;
    for required in ["manifest.json", "fingerprints.jsonl", "sweep.csv"] {
        if !artifact_dir.join(required).exists() {
            return Err(Error::MissingArtifact(required.to_string()));
        }
    }
    for d in &summary.datasets {
        if d.name != "overall" && !artifact_dir.join("clusters").join(format!("{}.json", d.name)).exists() {
            return Err(Error::MissingArtifact(format!("clusters/{}.json", d.name)));
        }
    }

    let mut out = String::new();
    out.push_str(&format!(
        "run {} — duplicate fraction {:.4}\n",
        summary.manifest_digest, summary.duplicate_fraction
    ));
    if !summary.excluded_apps.is_empty() {
        out.push_str(&format!("excluded apps: {}\n", summary.excluded_apps.len()));
    }
    out.push_str("dataset          eps   malware  goodware  clusters  accuracy   tpr\n");
    let overall = summary.datasets.iter().find(|d| d.name == "overall");
    for d in &summary.datasets {
        let delta = match (overall.and_then(|o| o.accuracy), d.accuracy) {
            (Some(base), Some(acc)) if d.name != "overall" => {
                format!("  (delta {:+.4})", acc - base)
            }
            _ => String::new(),
        };
        out.push_str(&format!(
            "{:<15} {:>5} {:>8} {:>9} {:>9} {:>9} {:>5}{}\n",
            d.name,
            d.epsilon.map(|e| format!("{e:.2}")).unwrap_or_else(|| "-".into()),
            d.malware,
            d.goodware,
            d.cluster_count.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
            d.accuracy.map(|a| format!("{a:.4}")).unwrap_or_else(|| {
                d.skipped_reason.as_deref().unwrap_or("-").chars().take(7).collect()
            }),
            d.tpr.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into()),
            delta,
        ));
    }
    out.push_str(&format!(
        "sweep: {}\n",
        summary
            .sweep
            .iter()
            .map(|(e, c)| format!("{e:.1}->{c}"))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    if !summary.warnings.is_empty() {
        out.push_str(&format!("warnings: {}\n", summary.warnings.len()));
    }
    Ok(out)
}
