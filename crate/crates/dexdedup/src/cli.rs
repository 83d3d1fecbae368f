//! Subcommand surface of the `dexdedup` binary.
//!
//! Each subcommand is a thin wrapper over one library operation. Outputs that
//! land in a file get a `<file>.run.json` sidecar manifest recording the tool
//! version, flags, input digests and seed of the run.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::cluster::{self, Epsilon, SelectionMode};
use crate::error::{Error, Result};
use crate::features::{self, FeatureSet, FeatureVector};
use crate::fingerprint::{fingerprint_of, ochiai_distance, AppFingerprint, Label};
use crate::io::{self, ClusterReport, ExperimentReport};
use crate::mleval::{self, ForestConfig};
use crate::pipeline::{self, LabeledInput, PipelineConfig, RunManifest};

#[derive(Parser)]
#[command(
    name = "dexdedup",
    version,
    about = "Corpus hygiene for Android app datasets: opcode fingerprints, \
             duplicate clustering, and bias-aware evaluation"
)]
pub struct Cli {
    /// Suppress informational output.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Extract per-method opcode sequences from dex/apk files or smali dirs.
    Extract {
        /// Input files (`.dex`, `.apk`, `.zip`) or smali directories.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Force the input format instead of inferring from extensions.
        #[arg(long, value_parser = ["dex", "apk", "smali"])]
        format: Option<String>,
        /// Drop sequences shorter than this many opcodes.
        #[arg(long, default_value_t = 1)]
        min_length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce extraction records to fingerprint sets.
    Fingerprint {
        extract_jsonl: PathBuf,
        /// Label to assign to every app in this file.
        #[arg(long, default_value = "unlabeled")]
        label: Label,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ochiai distance between two apps of a fingerprint file.
    Distance {
        fingerprints: PathBuf,
        /// The two app ids to compare.
        #[arg(long, num_args = 2, value_names = ["ID_A", "ID_B"])]
        pair: Vec<String>,
    },
    /// Leader-cluster a fingerprint corpus at one epsilon.
    Cluster {
        fingerprints: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Visit apps in input order instead of seeded random order.
        #[arg(long)]
        ordered: bool,
        /// Cluster each class separately.
        #[arg(long)]
        per_label: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster counts across an epsilon grid (`start:end:step`).
    Sweep {
        fingerprints: PathBuf,
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write `epsilon,cluster_count` CSV here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keep only cluster representatives from a cluster report.
    Filter {
        fingerprints: PathBuf,
        /// Cluster report produced by `cluster`.
        #[arg(long)]
        report: PathBuf,
        /// In mixed clusters, keep one representative per label present.
        #[arg(long)]
        per_label: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract permission / API-call feature vectors into CSV.
    Features {
        /// Apps (`.dex`, `.apk`); ignored when --from-lists is given.
        apps: Vec<PathBuf>,
        #[arg(long, default_value = "both")]
        set: FeatureSet,
        /// Label assigned to every listed app.
        #[arg(long, default_value = "unlabeled")]
        label: Label,
        /// JSONL of pre-extracted names:
        /// `{"app_id":..,"label":..,"permissions":[..],"api_calls":[..]}`.
        #[arg(long)]
        from_lists: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Information-gain ranking of a feature CSV.
    Infogain {
        features_csv: PathBuf,
        /// Write `feature,gain` CSV here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// K-fold cross-validated random-forest evaluation of a feature CSV.
    Evaluate {
        features_csv: PathBuf,
        #[arg(long, default_value_t = 10)]
        kfold: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Features sampled per split (default: ceil(sqrt(F))).
        #[arg(long)]
        features_per_split: Option<usize>,
        /// Train each tree on the full set instead of a bootstrap resample.
        #[arg(long)]
        no_bootstrap: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the report JSON here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Down-sample the majority class of a feature CSV.
    Balance {
        features_csv: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Demonstrate duplicate-driven holdout inflation.
    InflationDemo {
        #[arg(long)]
        fingerprints: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Train fraction of the holdout split.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        /// Number of post-dedup random splits to average.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Write the outcome JSON here (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole chain over per-class app directories.
    Pipeline {
        #[arg(long)]
        malware: PathBuf,
        #[arg(long)]
        goodware: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "0:1:0.1")]
        sweep_grid: String,
        /// Comma-separated epsilons that get filtered datasets and
        /// evaluations.
        #[arg(long, default_value = "0,0.1,0.2")]
        dataset_epsilons: String,
        #[arg(long, default_value = "both")]
        feature_set: FeatureSet,
        #[arg(long, default_value_t = 10)]
        kfold: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Also evaluate balanced variants of each dataset.
        #[arg(long)]
        balance: bool,
        /// Joint clustering instead of the default per-class runs.
        #[arg(long)]
        joint: bool,
        #[arg(long, default_value_t = 1)]
        min_length: usize,
    },
    /// Summarize a pipeline artifact directory.
    Report { artifact_dir: PathBuf },
}

/// Entry point used by the binary.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        // Ignore failure: the global pool can only be set once per process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let quiet = cli.quiet;
    match cli.command {
        Command::Extract {
            paths,
            format,
            min_length,
            out,
        } => cmd_extract(&paths, format.as_deref(), min_length, &out, quiet),
        Command::Fingerprint {
            extract_jsonl,
            label,
            out,
        } => cmd_fingerprint(&extract_jsonl, label, &out, quiet),
        Command::Distance { fingerprints, pair } => cmd_distance(&fingerprints, &pair),
        Command::Cluster {
            fingerprints,
            epsilon,
            seed,
            ordered,
            per_label,
            out,
        } => cmd_cluster(&fingerprints, epsilon, seed, ordered, per_label, &out, quiet),
        Command::Sweep {
            fingerprints,
            grid,
            seed,
            out,
        } => cmd_sweep(&fingerprints, &grid, seed, out.as_deref()),
        Command::Filter {
            fingerprints,
            report,
            per_label,
            out,
        } => cmd_filter(&fingerprints, &report, per_label, &out, quiet),
        Command::Features {
            apps,
            set,
            label,
            from_lists,
            out,
        } => cmd_features(&apps, set, label, from_lists.as_deref(), &out, quiet),
        Command::Infogain { features_csv, out } => cmd_infogain(&features_csv, out.as_deref()),
        Command::Evaluate {
            features_csv,
            kfold,
            trees,
            max_depth,
            features_per_split,
            no_bootstrap,
            seed,
            out,
        } => {
            let config = ForestConfig {
                tree_count: trees,
                max_depth,
                features_per_split,
                seed,
                bootstrap: !no_bootstrap,
            };
            cmd_evaluate(&features_csv, kfold, &config, seed, out.as_deref())
        }
        Command::Balance {
            features_csv,
            seed,
            out,
        } => cmd_balance(&features_csv, seed, &out, quiet),
        Command::InflationDemo {
            fingerprints,
            features,
            ratio,
            seeds,
            seed,
            trees,
            out,
        } => cmd_inflation(&fingerprints, &features, ratio, seeds, seed, trees, out.as_deref()),
        Command::Pipeline {
            malware,
            goodware,
            out_dir,
            seed,
            sweep_grid,
            dataset_epsilons,
            feature_set,
            kfold,
            trees,
            balance,
            joint,
            min_length,
        } => {
            let config = PipelineConfig {
                seed,
                sweep_grid: cluster::parse_grid(&sweep_grid)?,
                dataset_epsilons: parse_epsilon_list(&dataset_epsilons)?,
                feature_set,
                forest: ForestConfig {
                    tree_count: trees,
                    seed,
                    ..ForestConfig::default()
                },
                kfold,
                balance,
                per_label: !joint,
                min_length,
            };
            let inputs = pipeline::collect_inputs(&malware, &goodware)?;
            let summary = pipeline::run_pipeline(&config, &inputs, &out_dir)?;
            if !quiet {
                println!(
                    "pipeline complete: {} datasets, duplicate fraction {:.4} -> {}",
                    summary.datasets.len(),
                    summary.duplicate_fraction,
                    out_dir.display()
                );
            }
            Ok(())
        }
        Command::Report { artifact_dir } => {
            print!("{}", pipeline::report(&artifact_dir)?);
            Ok(())
        }
    }
}

fn parse_epsilon_list(spec: &str) -> Result<Vec<Epsilon>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("bad epsilon `{s}`")))
                .and_then(Epsilon::new)
        })
        .collect()
}

fn selection_mode(seed: u64, ordered: bool) -> SelectionMode {
    if ordered {
        SelectionMode::Ordered
    } else {
        SelectionMode::Seeded(seed)
    }
}

fn sidecar(out: &Path, manifest: &RunManifest) -> Result<()> {
    let mut path = out.as_os_str().to_owned();
    path.push(".run.json");
    manifest.write(Path::new(&path))
}

fn cmd_extract(
    paths: &[PathBuf],
    format: Option<&str>,
    min_length: usize,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let mut manifest = RunManifest::new("extract", 0)
        .flag("min_length", min_length)
        .flag("format", format.unwrap_or("auto"));
    let mut records = Vec::new();
    for path in paths {
        if let Some(fmt) = format {
            let matches = match fmt {
                "smali" => path.is_dir(),
                ext => path.extension().and_then(|e| e.to_str()) == Some(ext)
                    || (ext == "apk"
                        && path.extension().and_then(|e| e.to_str()) == Some("zip")),
            };
            if !matches {
                return Err(Error::InvalidConfig(format!(
                    "{} does not look like --format {fmt}",
                    path.display()
                )));
            }
        }
        let input = LabeledInput {
            path: path.clone(),
            label: Label::Unlabeled,
        };
        if !path.is_dir() {
            manifest.input(path, &fs::read(path)?);
        }
        let extraction = pipeline::extract_input(&input, min_length)?;
        if !quiet {
            for w in &extraction.report.parse_warnings {
                eprintln!("{}: {w}", extraction.report.app_id);
            }
        }
        records.push(io::ExtractRecord::from_extraction(&extraction));
    }
    io::write_jsonl(out, &records)?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!("extracted {} apps -> {}", records.len(), out.display());
    }
    Ok(())
}

fn cmd_fingerprint(extract_jsonl: &Path, label: Label, out: &Path, quiet: bool) -> Result<()> {
    let mut manifest = RunManifest::new("fingerprint", 0).flag("label", label);
    manifest.input(extract_jsonl, &fs::read(extract_jsonl)?);
    let records: Vec<io::ExtractRecord> = io::read_jsonl(extract_jsonl)?;
    let mut corpus = Vec::new();
    for record in &records {
        match fingerprint_of(&record.sequences(), &record.app_id, label) {
            Ok(fp) => corpus.push(fp),
            Err(err) => {
                if !quiet {
                    eprintln!("excluding {}: {err}", record.app_id);
                }
            }
        }
    }
    io::write_fingerprints(out, &corpus)?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!("fingerprinted {} apps -> {}", corpus.len(), out.display());
    }
    Ok(())
}

fn cmd_distance(fingerprints: &Path, pair: &[String]) -> Result<()> {
    let corpus = io::read_fingerprints(fingerprints)?;
    let find = |id: &str| -> Result<&AppFingerprint> {
        corpus
            .iter()
            .find(|f| f.app_id == id)
            .ok_or_else(|| Error::MismatchedClusterSet(id.to_string()))
    };
    let d = ochiai_distance(find(&pair[0])?, find(&pair[1])?)?;
    println!("{}", d.value());
    Ok(())
}

fn cmd_cluster(
    fingerprints: &Path,
    epsilon: f64,
    seed: u64,
    ordered: bool,
    per_label: bool,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let mut manifest = RunManifest::new("cluster", seed)
        .flag("epsilon", epsilon)
        .flag("ordered", ordered)
        .flag("per_label", per_label);
    manifest.input(fingerprints, &fs::read(fingerprints)?);
    let corpus = io::read_fingerprints(fingerprints)?;
    let eps = Epsilon::new(epsilon)?;
    let mode = selection_mode(seed, ordered);

    let set = if per_label {
        let mut clusters = Vec::new();
        for label in [Label::Malware, Label::Goodware, Label::Unlabeled] {
            let class: Vec<AppFingerprint> = corpus
                .iter()
                .filter(|f| f.label == label)
                .cloned()
                .collect();
            if !class.is_empty() {
                clusters.extend(cluster::cluster_corpus(&class, eps, mode)?.clusters);
            }
        }
        cluster::ClusterSet {
            epsilon: eps.value(),
            mode,
            clusters,
        }
    } else {
        cluster::cluster_corpus(&corpus, eps, mode)?
    };
    io::write_json_pretty(out, &ClusterReport::from(&set))?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!(
            "{} apps -> {} clusters at epsilon {epsilon} -> {}",
            corpus.len(),
            set.cluster_count(),
            out.display()
        );
        if epsilon > 0.0 {
            println!("note: cluster count at epsilon > 0 depends on the visit order seed");
        }
    }
    Ok(())
}

fn cmd_sweep(fingerprints: &Path, grid: &str, seed: u64, out: Option<&Path>) -> Result<()> {
    let corpus = io::read_fingerprints(fingerprints)?;
    let grid = cluster::parse_grid(grid)?;
    let counts = cluster::epsilon_sweep(&corpus, &grid, SelectionMode::Seeded(seed))?;
    let csv = io::sweep_csv(&counts);
    match out {
        Some(path) => {
            fs::write(path, csv)?;
            let mut manifest = RunManifest::new("sweep", seed);
            manifest.input(fingerprints, &fs::read(fingerprints)?);
            sidecar(path, &manifest)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_filter(
    fingerprints: &Path,
    report_path: &Path,
    per_label: bool,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let mut manifest = RunManifest::new("filter", 0).flag("per_label", per_label);
    manifest.input(fingerprints, &fs::read(fingerprints)?);
    manifest.input(report_path, &fs::read(report_path)?);
    let corpus = io::read_fingerprints(fingerprints)?;
    let report: ClusterReport = serde_json::from_str(&fs::read_to_string(report_path)?)?;
    let set = cluster::ClusterSet::from(&report);

    let representatives = if per_label {
        per_label_representatives(&corpus, &set)?
    } else {
        cluster::filter_representatives(&corpus, &set)?
    };
    io::write_fingerprints(out, &representatives)?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!(
            "kept {} of {} apps -> {}",
            representatives.len(),
            corpus.len(),
            out.display()
        );
    }
    Ok(())
}

/// Representative selection that preserves per-class counts under a joint
/// clustering: a cluster mixing labels contributes one app per label present
/// (the centroid for its own label, the first member for the others).
fn per_label_representatives(
    corpus: &[AppFingerprint],
    set: &cluster::ClusterSet,
) -> Result<Vec<AppFingerprint>> {
    let by_id: std::collections::HashMap<&str, &AppFingerprint> =
        corpus.iter().map(|f| (f.app_id.as_str(), f)).collect();
    let mut out = Vec::new();
    for cluster in &set.clusters {
        let mut seen_labels = Vec::new();
        let centroid = by_id
            .get(cluster.centroid.as_str())
            .ok_or_else(|| Error::MismatchedClusterSet(cluster.centroid.clone()))?;
        seen_labels.push(centroid.label);
        out.push((*centroid).clone());
        for member in &cluster.members {
            let fp = by_id
                .get(member.as_str())
                .ok_or_else(|| Error::MismatchedClusterSet(member.clone()))?;
            if !seen_labels.contains(&fp.label) {
                seen_labels.push(fp.label);
                out.push((*fp).clone());
            }
        }
    }
    Ok(out)
}

/// Pre-extracted names record for `features --from-lists`.
#[derive(serde::Serialize, serde::Deserialize)]
struct NameListRecord {
    app_id: String,
    label: Label,
    #[serde(default)]
    permissions: Vec<String>,
    #[serde(default)]
    api_calls: Vec<String>,
}

fn cmd_features(
    apps: &[PathBuf],
    set: FeatureSet,
    label: Label,
    from_lists: Option<&Path>,
    out: &Path,
    quiet: bool,
) -> Result<()> {
    let mut manifest = RunManifest::new("features", 0)
        .flag("set", format!("{set:?}"))
        .flag("label", label);
    let names: Vec<String> = set.feature_names().iter().map(|s| s.to_string()).collect();

    let rows: Vec<FeatureVector> = if let Some(lists) = from_lists {
        manifest.input(lists, &fs::read(lists)?);
        let records: Vec<NameListRecord> = io::read_jsonl(lists)?;
        records
            .iter()
            .map(|r| {
                features::AppFeatures {
                    permissions: features::permissions_in_strings(&r.permissions),
                    api_calls: features::api_calls_in_names(&r.api_calls),
                }
                .vector(set, &r.app_id, r.label)
            })
            .collect()
    } else {
        if apps.is_empty() {
            return Err(Error::InvalidConfig(
                "provide app files or --from-lists".into(),
            ));
        }
        let mut rows = Vec::new();
        for path in apps {
            manifest.input(path, &fs::read(path)?);
            let feats = pipeline::features_of_input(path)?;
            rows.push(feats.vector(set, &pipeline::app_id_of(path), label));
        }
        rows
    };

    let matrix = features::build_matrix(rows, names)?;
    fs::write(out, features::write_csv(&matrix))?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!(
            "{} rows x {} features -> {}",
            matrix.rows.len(),
            matrix.width(),
            out.display()
        );
    }
    Ok(())
}

fn cmd_infogain(features_csv: &Path, out: Option<&Path>) -> Result<()> {
    let matrix = features::read_csv(&fs::read_to_string(features_csv)?)?;
    let report = mleval::information_gain(&matrix)?;
    if report.degenerate {
        eprintln!("warning: only one class present; every gain is zero");
    }
    let mut csv = String::from("feature,gain\n");
    for (feature, gain) in &report.entries {
        csv.push_str(&format!("{feature},{gain:.6}\n"));
    }
    match out {
        Some(path) => {
            fs::write(path, csv)?;
            let mut manifest = RunManifest::new("infogain", 0);
            manifest.input(features_csv, &fs::read(features_csv)?);
            sidecar(path, &manifest)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_evaluate(
    features_csv: &Path,
    kfold: usize,
    config: &ForestConfig,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let matrix = features::read_csv(&fs::read_to_string(features_csv)?)?;
    let eval = mleval::kfold_evaluate(&matrix, kfold, config, seed)?;
    let info_gain: Vec<io::InfoGainEntry> = (&mleval::information_gain(&matrix)?).into();
    let report = ExperimentReport { eval, info_gain };
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => {
            fs::write(path, format!("{json}\n"))?;
            let mut manifest = RunManifest::new("evaluate", seed)
                .flag("kfold", kfold)
                .flag("trees", config.tree_count);
            manifest.input(features_csv, &fs::read(features_csv)?);
            sidecar(path, &manifest)?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_balance(features_csv: &Path, seed: u64, out: &Path, quiet: bool) -> Result<()> {
    let mut manifest = RunManifest::new("balance", seed);
    manifest.input(features_csv, &fs::read(features_csv)?);
    let matrix = features::read_csv(&fs::read_to_string(features_csv)?)?;
    let balanced = mleval::balance_dataset(&matrix, seed)?;
    fs::write(out, features::write_csv(&balanced))?;
    sidecar(out, &manifest)?;
    if !quiet {
        println!(
            "balanced {} -> {} rows -> {}",
            matrix.rows.len(),
            balanced.rows.len(),
            out.display()
        );
    }
    Ok(())
}

fn cmd_inflation(
    fingerprints: &Path,
    features_csv: &Path,
    ratio: f64,
    seed_count: usize,
    seed: u64,
    trees: usize,
    out: Option<&Path>,
) -> Result<()> {
    let corpus = io::read_fingerprints(fingerprints)?;
    let text = fs::read_to_string(features_csv)?;
    let matrix = relabel_rows_by_corpus(features::read_csv(&text)?, &corpus)?;
    let seeds: Vec<u64> = (0..seed_count as u64).map(|i| seed.wrapping_add(i)).collect();
    let config = ForestConfig {
        tree_count: trees,
        seed,
        ..ForestConfig::default()
    };
    let outcome = mleval::holdout_inflation_demo(&corpus, &matrix, ratio, &seeds, &config)?;
    let json = serde_json::to_string_pretty(&outcome)?;
    match out {
        Some(path) => {
            fs::write(path, format!("{json}\n"))?;
            let mut manifest = RunManifest::new("inflation-demo", seed)
                .flag("ratio", ratio)
                .flag("seeds", seed_count);
            manifest.input(fingerprints, &fs::read(fingerprints)?);
            manifest.input(features_csv, &fs::read(features_csv)?);
            sidecar(path, &manifest)?;
        }
        None => println!("{json}"),
    }
    Ok(())
}

/// The CSV format has no app ids, but the demonstration joins rows to
/// fingerprints. Rows are matched positionally to the fingerprint corpus,
/// which both `features` and `pipeline` emit in the same app order.
fn relabel_rows_by_corpus(
    matrix: features::FeatureMatrix,
    corpus: &[AppFingerprint],
) -> Result<features::FeatureMatrix> {
    if matrix.rows.len() != corpus.len() {
        return Err(Error::InvalidConfig(format!(
            "feature rows ({}) and fingerprints ({}) do not line up",
            matrix.rows.len(),
            corpus.len()
        )));
    }
    let rows = matrix
        .rows
        .into_iter()
        .zip(corpus)
        .map(|(mut row, fp)| {
            if row.label != fp.label {
                return Err(Error::InvalidConfig(format!(
                    "row for `{}` is labeled {} but the fingerprint says {}",
                    fp.app_id, row.label, fp.label
                )));
            }
            row.app_id = fp.app_id.clone();
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(features::FeatureMatrix {
        feature_names: matrix.feature_names,
        rows,
    })
}
