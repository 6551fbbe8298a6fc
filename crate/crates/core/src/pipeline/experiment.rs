//! End-to-end runs: split, optional grid search, per-attribute fitting,
//! evaluation, artifacts and the id audit.
//!
//! A run directory holds `report.txt`, `report.csv`, `scatter_*.csv|svg`,
//! `importance.csv`, `correlation.csv`, `notes.txt`, `cv_<attribute>.csv`
//! (grid search only), `loss_<attribute>.csv` (neural heads only),
//! `models/<attribute>.json`, `ids.csv` (`id,role`), `audit.csv`
//! (`step,id,source_id`, one line per id per fitting step) and
//! `reproducibility.txt`. With `repeats > 1` each repeat gets its own
//! `repeat_<r>/` directory and the top level holds `summary.csv`,
//! `summary.txt` and `reproducibility.txt`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::classical::{
    fit_classical, grid_search, permutation_importance, ClassicalFamily, GridSearchSpec,
    HyperParams, Regressor,
};
use crate::eval::{
    balanced_split_indices, correlation_table, evaluate_predictions, pearson, render_report, rmse,
    stratified_folds, Attribute, AttributeResult, CapevScores, CorrelationTable, EvalError,
    EvalReport, ImportanceTable, CORRELATION_PARAMETERS,
};
use crate::features::FeatureVector;
use crate::neural::{
    load_embedding_matrix, train_head, ConvConfig, ConvHead, EmbeddingMatrix, Head, MlpConfig,
    MlpHead, TrainConfig,
};

use super::artifact::{training_digest, ArtifactModel, ModelArtifact, ARTIFACT_VERSION};
use super::augmented::{augmented_embeddings, noise_bank};
use super::config::{Family, RunConfig};
use super::dataset::{
    build_dataset, read_features_csv, write_failures_csv, write_features_csv, FailureRow,
};
use super::embed::SPECTRAL_SOURCE;
use super::manifest::{DatasetManifest, ManifestRow};
use super::{derive_seed, sha256_hex, PipelineError};

/// Neural targets are scores divided by this.
const NEURAL_TARGET_SCALE: f64 = 100.0;

struct Sample {
    id: String,
    features: Option<FeatureVector>,
    embedding: Option<EmbeddingMatrix>,
    row: Option<ManifestRow>,
    scores: CapevScores,
}

struct Loaded {
    samples: Vec<Sample>,
    failures: Vec<FailureRow>,
    digests: Vec<(&'static str, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    /// One report per repeat.
    pub reports: Vec<EvalReport>,
    pub failures: usize,
}

fn file_digest(p: &Path) -> Result<String, PipelineError> {
    Ok(sha256_hex(&fs::read(p)?))
}

fn load_samples(config: &RunConfig, staging: Option<&Path>) -> Result<Loaded, PipelineError> {
    let mut digests = Vec::new();
    let manifest = match &config.manifest {
        Some(p) => {
            let m = DatasetManifest::load(p)?;
            digests.push(("manifest_sha256", m.digest.clone()));
            Some(m)
        }
        None => None,
    };
    let mut failures = Vec::new();
    let features: Option<Vec<super::FeatureRow>> = match (&config.features, &manifest) {
        (Some(p), _) => {
            digests.push(("features_sha256", file_digest(p)?));
            Some(read_features_csv(p)?)
        }
        (None, Some(m)) if !config.family.is_neural() => {
            let built = build_dataset(m, config.working_rate)?;
            failures.extend(built.failures);
            if let Some(dir) = staging {
                let p = dir.join("features.csv");
                write_features_csv(&built.rows, &p)?;
                digests.push(("features_sha256", file_digest(&p)?));
            }
            Some(built.rows)
        }
        _ => None,
    };
    if let Some(p) = &config.augmented_manifest {
        digests.push(("augmented_manifest_sha256", file_digest(p)?));
    }

    let samples = if config.family.is_neural() {
        let m =
            manifest.ok_or_else(|| PipelineError::ConfigInvalid("manifest is required".into()))?;
        let by_id: HashMap<String, FeatureVector> = features
            .unwrap_or_default()
            .into_iter()
            .map(|r| (r.id, r.features))
            .collect();
        let loaded: Vec<Result<EmbeddingMatrix, String>> = m
            .rows
            .par_iter()
            .map(|r| match &r.embedding_path {
                None => Err("no embedding_path".to_string()),
                Some(p) => load_embedding_matrix(p).map_err(|e| format!("{}: {e}", p.display())),
            })
            .collect();
        let cols = loaded
            .iter()
            .find_map(|e| e.as_ref().ok().map(EmbeddingMatrix::cols));
        let mut samples = Vec::new();
        for (row, e) in m.rows.into_iter().zip(loaded) {
            match e {
                Ok(e) if Some(e.cols()) == cols => samples.push(Sample {
                    id: row.id.clone(),
                    features: by_id.get(&row.id).copied(),
                    embedding: Some(e),
                    scores: row.scores,
                    row: Some(row),
                }),
                Ok(e) => failures.push(FailureRow {
                    id: row.id,
                    reason: format!(
                        "embedding has {} columns, expected {}",
                        e.cols(),
                        cols.unwrap_or(0)
                    ),
                }),
                Err(reason) => failures.push(FailureRow { id: row.id, reason }),
            }
        }
        samples
    } else {
        features
            .unwrap_or_default()
            .into_iter()
            .map(|r| Sample {
                id: r.id,
                features: Some(r.features),
                embedding: None,
                row: None,
                scores: r.scores,
            })
            .collect()
    };
    if samples.is_empty() {
        return Err(PipelineError::NoUsableRows("every row failed".into()));
    }
    Ok(Loaded {
        samples,
        failures,
        digests,
    })
}

type AuditLine = (String, String, String);

struct Augmented {
    items: Vec<(String, String, EmbeddingMatrix)>,
}

/// Augmented training embeddings whose source clip is a training row.
fn training_augmentation(
    config: &RunConfig,
    samples: &[Sample],
    train: &[usize],
    seed: u64,
) -> Result<Augmented, PipelineError> {
    let train_ids: HashSet<&str> = train.iter().map(|&i| samples[i].id.as_str()).collect();
    if let Some(p) = &config.augmented_manifest {
        let m = DatasetManifest::load(p)?;
        let mut keep = Vec::new();
        for r in &m.rows {
            let Some(src) = &r.source_id else {
                return Err(PipelineError::ManifestInvalid(format!(
                    "{}: augmented row has no source_id",
                    r.id
                )));
            };
            if train_ids.contains(src.as_str()) {
                keep.push(r);
            }
        }
        let items = keep
            .par_iter()
            .map(|r| {
                let p = r.embedding_path.as_ref().ok_or_else(|| {
                    PipelineError::ManifestInvalid(format!(
                        "{}: augmented row has no embedding_path",
                        r.id
                    ))
                })?;
                Ok((
                    r.id.clone(),
                    r.source_id.clone().unwrap_or_default(),
                    load_embedding_matrix(p)?,
                ))
            })
            .collect::<Result<Vec<_>, PipelineError>>()?;
        return Ok(Augmented { items });
    }
    let Some(dir) = &config.noise_dir else {
        return Ok(Augmented { items: Vec::new() });
    };
    if samples.iter().any(|s| {
        s.embedding
            .as_ref()
            .is_some_and(|e| e.source() != SPECTRAL_SOURCE)
    }) {
        return Err(PipelineError::ConfigInvalid(format!(
            "in-run augmentation can only embed with the built-in {SPECTRAL_SOURCE} front end; \
             run `augment`, embed the clips with the external model and set augmented_manifest"
        )));
    }
    let bank = noise_bank(dir)?;
    let per_row = train
        .par_iter()
        .map(|&i| {
            let row = samples[i]
                .row
                .as_ref()
                .expect("neural samples carry their manifest row");
            let out = augmented_embeddings(row, &bank, &config.pairs, seed, config.working_rate)?;
            Ok(out
                .into_iter()
                .map(|(id, e)| (id, row.id.clone(), e))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(Augmented {
        items: per_row.into_iter().flatten().collect(),
    })
}

struct AttrFit {
    artifact: ModelArtifact,
    predictions: Vec<Option<f64>>,
    impurity: Option<Vec<f64>>,
    permutation: Option<Vec<f64>>,
    cv_csv: Option<String>,
    loss_curve: Option<Vec<f64>>,
    audit: Vec<AuditLine>,
}

fn point_text(p: &BTreeMap<String, crate::classical::ParamValue>) -> Vec<String> {
    p.iter().map(|(k, v)| format!("{k}={v}")).collect()
}

#[allow(clippy::too_many_arguments)]
fn fit_classical_attribute(
    config: &RunConfig,
    family: ClassicalFamily,
    a: Attribute,
    samples: &[Sample],
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<AttrFit, PipelineError> {
    let row = |i: usize| {
        samples[i]
            .features
            .expect("classical samples have features")
            .to_array()
            .to_vec()
    };
    let x: Vec<Vec<f64>> = train.iter().map(|&i| row(i)).collect();
    let y: Vec<f64> = train.iter().map(|&i| samples[i].scores.get(a)).collect();
    let ids: Vec<String> = train.iter().map(|&i| samples[i].id.clone()).collect();
    let mut audit = Vec::new();

    let (params, cv_csv, selected) = match config.grid.resolve(family) {
        Some(grid) => {
            let spec = GridSearchSpec {
                family,
                grid,
                cv_folds: config.cv_folds,
                seed: derive_seed(seed, &format!("grid/{}", a.name())),
            };
            let result = grid_search(&spec, &x, &y)?;
            // The same folds grid_search used, logged by id.
            let folds = stratified_folds(&y, spec.cv_folds, spec.seed)?;
            for (k, fold) in folds.iter().enumerate() {
                let held: HashSet<usize> = fold.iter().copied().collect();
                for (j, id) in ids.iter().enumerate() {
                    let step = if held.contains(&j) { "validate" } else { "fit" };
                    audit.push((
                        format!("grid/{}/fold{}/{step}", a.name(), k + 1),
                        id.clone(),
                        String::new(),
                    ));
                }
            }
            (
                result.best_params.clone(),
                Some(result.table_csv()),
                point_text(&result.best_point),
            )
        }
        None => (HyperParams::default_for(family), None, Vec::new()),
    };
    let model = fit_classical(
        &params,
        &x,
        &y,
        derive_seed(seed, &format!("fit/{}", a.name())),
    )?;
    audit.extend(
        ids.iter()
            .map(|id| (format!("fit/{}", a.name()), id.clone(), String::new())),
    );

    let xt: Vec<Vec<f64>> = test.iter().map(|&i| row(i)).collect();
    let yt: Vec<f64> = test.iter().map(|&i| samples[i].scores.get(a)).collect();
    let predictions: Vec<Option<f64>> = xt.iter().map(|r| model.predict(r).ok()).collect();
    let impurity = match &model.regressor {
        Regressor::Forest(f) => Some(f.feature_importances()?),
        _ => None,
    };
    let permutation = if xt.len() >= 2 {
        Some(permutation_importance(
            |r| model.predict(r),
            &xt,
            &yt,
            config.permutation_repeats,
            derive_seed(seed, &format!("perm/{}", a.name())),
        )?)
    } else {
        None
    };
    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        family: family.name().into(),
        attribute: a.name().into(),
        seed,
        training_digest: training_digest(&ids),
        train_ids: ids,
        feature_names: FeatureVector::NAMES.iter().map(|s| s.to_string()).collect(),
        target_scale: 1.0,
        selected,
        model: ArtifactModel::Classical(model),
    };
    Ok(AttrFit {
        artifact,
        predictions,
        impurity,
        permutation,
        cv_csv,
        loss_curve: None,
        audit,
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_neural_attribute(
    config: &RunConfig,
    a: Attribute,
    samples: &[Sample],
    train: &[usize],
    test: &[usize],
    aug: &Augmented,
    seed: u64,
) -> Result<AttrFit, PipelineError> {
    let emb = |i: usize| {
        samples[i]
            .embedding
            .as_ref()
            .expect("neural samples have embeddings")
    };
    let mut xs: Vec<EmbeddingMatrix> = train.iter().map(|&i| emb(i).clone()).collect();
    let mut ys: Vec<f64> = train
        .iter()
        .map(|&i| samples[i].scores.get(a) / NEURAL_TARGET_SCALE)
        .collect();
    let ids: Vec<String> = train.iter().map(|&i| samples[i].id.clone()).collect();
    let by_id: HashMap<&str, usize> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let mut audit: Vec<AuditLine> = ids
        .iter()
        .map(|id| (format!("fit/{}", a.name()), id.clone(), String::new()))
        .collect();
    for (id, src, e) in &aug.items {
        let Some(&si) = by_id.get(src.as_str()) else {
            continue;
        };
        xs.push(e.clone());
        ys.push(samples[si].scores.get(a) / NEURAL_TARGET_SCALE);
        audit.push((format!("fit/{}", a.name()), id.clone(), src.clone()));
    }
    let channels = xs[0].cols();
    let init_seed = derive_seed(seed, &format!("init/{}", a.name()));
    let head = match config.family {
        Family::Mlp => Head::Mlp(MlpHead::new(MlpConfig::standard(channels), init_seed)?),
        _ => Head::Conv(ConvHead::new(ConvConfig::standard(channels), init_seed)?),
    };
    let tc = TrainConfig {
        seed: derive_seed(seed, &format!("train/{}", a.name())),
        ..config.train
    };
    let outcome = train_head(head, &xs, &ys, &tc)?;
    let predictions = test
        .iter()
        .map(|&i| {
            outcome
                .head
                .predict(emb(i))
                .ok()
                .map(|v| v * NEURAL_TARGET_SCALE)
        })
        .collect();
    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        family: config.family.name().into(),
        attribute: a.name().into(),
        seed,
        training_digest: training_digest(&ids),
        train_ids: ids,
        feature_names: vec![format!("embedding:{}", xs[0].source())],
        target_scale: NEURAL_TARGET_SCALE,
        selected: Vec::new(),
        model: ArtifactModel::Neural(outcome.head),
    };
    Ok(AttrFit {
        artifact,
        predictions,
        impurity: None,
        permutation: None,
        cv_csv: None,
        loss_curve: Some(outcome.loss_curve),
        audit,
    })
}

fn fit_all(
    config: &RunConfig,
    samples: &[Sample],
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<(Vec<AttrFit>, usize), PipelineError> {
    match config.family {
        Family::Classical(fam) => {
            let fits = Attribute::ALL
                .par_iter()
                .map(|&a| fit_classical_attribute(config, fam, a, samples, train, test, seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((fits, 0))
        }
        Family::Mlp | Family::Conv => {
            let aug = training_augmentation(config, samples, train, derive_seed(seed, "augment"))?;
            let fits = Attribute::ALL
                .par_iter()
                .map(|&a| fit_neural_attribute(config, a, samples, train, test, &aug, seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((fits, aug.items.len()))
        }
    }
}

fn write_models(dir: &Path, fits: &[AttrFit]) -> Result<(), PipelineError> {
    fs::create_dir_all(dir.join("models"))?;
    for f in fits {
        let name = &f.artifact.attribute;
        f.artifact
            .save(&dir.join("models").join(format!("{name}.json")))?;
        if let Some(csv) = &f.cv_csv {
            fs::write(dir.join(format!("cv_{name}.csv")), csv)?;
        }
        if let Some(curve) = &f.loss_curve {
            let mut s = String::from("epoch,train_mse\n");
            for (e, l) in curve.iter().enumerate() {
                let _ = writeln!(s, "{},{l}", e + 1);
            }
            fs::write(dir.join(format!("loss_{name}.csv")), s)?;
        }
    }
    let mut s = String::from("step,id,source_id\n");
    for f in fits {
        for (step, id, src) in &f.audit {
            let _ = writeln!(s, "{step},{id},{src}");
        }
    }
    fs::write(dir.join("audit.csv"), s)?;
    Ok(())
}

fn correlation_over(samples: &[Sample]) -> Option<CorrelationTable> {
    let feats: Option<Vec<FeatureVector>> = samples.iter().map(|s| s.features).collect();
    let truths: Vec<CapevScores> = samples.iter().map(|s| s.scores).collect();
    correlation_table(&feats?, &truths).ok()
}

fn run_once(
    config: &RunConfig,
    loaded: &Loaded,
    seed: u64,
    dir: &Path,
    repro: &[String],
) -> Result<EvalReport, PipelineError> {
    let samples = &loaded.samples;
    let severity: Vec<f64> = samples
        .iter()
        .map(|s| s.scores.get(Attribute::Severity))
        .collect();
    let split = balanced_split_indices(
        &severity,
        config.test_fraction,
        config.n_bins,
        derive_seed(seed, "split"),
    )?;
    if split.train.len() < 2 || split.test.is_empty() {
        return Err(PipelineError::NoUsableRows(format!(
            "split left {} training and {} test rows",
            split.train.len(),
            split.test.len()
        )));
    }
    fs::create_dir_all(dir)?;
    let mut ids = String::from("id,role\n");
    let mut role = vec![""; samples.len()];
    split.train.iter().for_each(|&i| role[i] = "train");
    split.test.iter().for_each(|&i| role[i] = "test");
    for (s, r) in samples.iter().zip(&role) {
        let _ = writeln!(ids, "{},{r}", s.id);
    }
    fs::write(dir.join("ids.csv"), ids)?;

    let (fits, n_aug) = fit_all(config, samples, &split.train, &split.test, seed)?;
    let truths: Vec<CapevScores> = split.test.iter().map(|&i| samples[i].scores).collect();
    let preds: [Vec<Option<f64>>; 6] = std::array::from_fn(|k| fits[k].predictions.clone());
    let mut report = evaluate_predictions(&preds, &truths)?;
    report.correlation = correlation_over(samples);
    if !config.family.is_neural() {
        let collect =
            |f: fn(&AttrFit) -> Option<Vec<f64>>| fits.iter().map(f).collect::<Option<Vec<_>>>();
        report.importance = Some(ImportanceTable {
            feature_names: FeatureVector::NAMES.iter().map(|s| s.to_string()).collect(),
            impurity: collect(|f| f.impurity.clone()),
            permutation: collect(|f| f.permutation.clone()),
        });
    }

    let mut notes = vec![
        String::new(),
        format!("family: {}", config.family.name()),
        format!(
            "rows: {} train, {} test, {} failed",
            split.train.len(),
            split.test.len(),
            loaded.failures.len()
        ),
    ];
    if config.family.is_neural() {
        notes.push(format!("augmented training rows: {n_aug}"));
    }
    for f in &fits {
        if !f.artifact.selected.is_empty() {
            notes.push(format!(
                "selected {}: {}",
                f.artifact.attribute,
                f.artifact.selected.join(" ")
            ));
        }
    }
    notes.push(String::new());
    notes.push("reproducibility".into());
    notes.push(format!("split_seed = {}", derive_seed(seed, "split")));
    notes.extend(repro.iter().cloned());
    report.notes = notes;

    render_report(&report, dir)?;
    fs::write(dir.join("notes.txt"), report.notes.join("\n") + "\n")?;
    write_models(dir, &fits)?;
    Ok(report)
}

fn summary(reports: &[EvalReport]) -> (String, String) {
    let stats = |v: &[f64]| -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 {
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (m, sd)
    };
    let mut csv =
        String::from("attribute,rmse_mean,rmse_sd,pearson_mean,pearson_sd,pearson_defined\n");
    let mut txt = format!(
        "{} repeats, mean ± sd\n{:<12} {:>18} {:>18}\n",
        reports.len(),
        "attribute",
        "rmse",
        "pearson"
    );
    let mut line = |name: &str, r: Vec<f64>, p: Vec<f64>| {
        let (rm, rs) = stats(&r);
        let (pm, ps) = if p.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            stats(&p)
        };
        let _ = writeln!(csv, "{name},{rm},{rs},{},{},{}", opt(pm), opt(ps), p.len());
        let pt = if p.is_empty() {
            "undefined".into()
        } else {
            format!("{pm:.4} ± {ps:.4}")
        };
        let _ = writeln!(
            txt,
            "{name:<12} {:>18} {pt:>18}",
            format!("{rm:.4} ± {rs:.4}")
        );
    };
    fn opt(v: f64) -> String {
        if v.is_finite() {
            v.to_string()
        } else {
            String::new()
        }
    }
    for a in Attribute::ALL {
        let r: Vec<f64> = reports
            .iter()
            .filter_map(|x| x.row(a))
            .map(|x| x.rmse)
            .collect();
        let p: Vec<f64> = reports
            .iter()
            .filter_map(|x| x.row(a))
            .filter_map(|x| x.pearson)
            .collect();
        line(a.name(), r, p);
    }
    let r: Vec<f64> = reports
        .iter()
        .filter_map(EvalReport::average_rmse)
        .collect();
    let p: Vec<f64> = reports
        .iter()
        .filter_map(EvalReport::average_pearson)
        .collect();
    line("avg", r, p);
    (csv, txt)
}

fn staging_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "run".into());
    name.push(".tmp");
    out.with_file_name(name)
}

fn check_output_dir(out: &Path) -> Result<(), PipelineError> {
    if out.exists() {
        let previous_run = out.join("reproducibility.txt").is_file();
        let empty = out.is_dir() && fs::read_dir(out)?.next().is_none();
        if !previous_run && !empty {
            return Err(PipelineError::ConfigInvalid(format!(
                "output_dir {} exists and is not a previous run",
                out.display()
            )));
        }
    }
    Ok(())
}

/// Runs the configured experiment, writing into `config.output_dir`.
///
/// Work happens in a sibling `<output_dir>.tmp` directory that is renamed
/// into place on success and removed on failure. An existing output
/// directory is replaced only if it holds a previous run.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome, PipelineError> {
    config.validate()?;
    let out = config.output_dir.clone();
    check_output_dir(&out)?;
    let staging = staging_path(&out);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    fs::create_dir_all(&staging)?;
    match experiment_in(config, &staging) {
        Ok((reports, failures)) => {
            if out.exists() {
                fs::remove_dir_all(&out)?;
            }
            fs::rename(&staging, &out)?;
            Ok(ExperimentOutcome {
                output_dir: out,
                reports,
                failures,
            })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn experiment_in(
    config: &RunConfig,
    staging: &Path,
) -> Result<(Vec<EvalReport>, usize), PipelineError> {
    let loaded = load_samples(config, Some(staging))?;
    if !loaded.failures.is_empty() {
        write_failures_csv(&loaded.failures, &staging.join("failures.csv"))?;
    }
    let mut repro = vec![
        format!("seed = {}", config.seed),
        format!("repeats = {}", config.repeats),
        format!("family = {}", config.family.name()),
        format!("config_sha256 = {}", config.digest),
    ];
    repro.extend(loaded.digests.iter().map(|(k, v)| format!("{k} = {v}")));

    let mut reports = Vec::with_capacity(config.repeats);
    if config.repeats == 1 {
        reports.push(run_once(config, &loaded, config.seed, staging, &repro)?);
    } else {
        for r in 0..config.repeats {
            let seed = config.seed.wrapping_add(r as u64);
            let mut block = repro.clone();
            block.push(format!("repeat = {r}, repeat_seed = {seed}"));
            reports.push(run_once(
                config,
                &loaded,
                seed,
                &staging.join(format!("repeat_{r}")),
                &block,
            )?);
        }
        let (csv, txt) = summary(&reports);
        fs::write(staging.join("summary.csv"), csv)?;
        fs::write(staging.join("summary.txt"), txt)?;
    }
    let mut block = repro.join("\n");
    block.push('\n');
    if config.repeats > 1 {
        for r in 0..config.repeats {
            let _ = writeln!(
                block,
                "repeat_{r}_seed = {}",
                config.seed.wrapping_add(r as u64)
            );
        }
    }
    fs::write(staging.join("reproducibility.txt"), block)?;
    audit_run(staging)?;
    Ok((reports, loaded.failures.len()))
}

/// Fits six models on every usable row and writes them under
/// `config.output_dir/models`, with grid-search tables when a grid is set.
pub fn train_artifacts(config: &RunConfig) -> Result<Vec<ModelArtifact>, PipelineError> {
    config.validate()?;
    let loaded = load_samples(config, None)?;
    let all: Vec<usize> = (0..loaded.samples.len()).collect();
    let (fits, _) = fit_all(config, &loaded.samples, &all, &[], config.seed)?;
    fs::create_dir_all(&config.output_dir)?;
    write_models(&config.output_dir, &fits)?;
    if !loaded.failures.is_empty() {
        write_failures_csv(&loaded.failures, &config.output_dir.join("failures.csv"))?;
    }
    Ok(fits.into_iter().map(|f| f.artifact).collect())
}

fn attribute_result(
    a: Attribute,
    preds: &[Option<f64>],
    truths: &[f64],
) -> Result<AttributeResult, EvalError> {
    let scatter: Vec<(f64, f64)> = preds
        .iter()
        .zip(truths)
        .filter_map(|(p, t)| p.map(|p| (p, *t)))
        .collect();
    let (p, t): (Vec<f64>, Vec<f64>) = scatter.iter().copied().unzip();
    Ok(AttributeResult {
        attribute: a,
        rmse: rmse(&p, &t)?,
        pearson: pearson(&p, &t).ok(),
        n: scatter.len(),
        failed: preds.len() - scatter.len(),
        scatter,
    })
}

fn load_artifacts(path: &Path) -> Result<Vec<ModelArtifact>, PipelineError> {
    if path.is_file() {
        return Ok(vec![ModelArtifact::load(path)?]);
    }
    let dir = if path.join("models").is_dir() {
        path.join("models")
    } else {
        path.to_path_buf()
    };
    let mut found = Vec::new();
    for a in Attribute::ALL {
        let p = dir.join(format!("{}.json", a.name()));
        if p.is_file() {
            found.push(ModelArtifact::load(&p)?);
        }
    }
    if found.is_empty() {
        return Err(PipelineError::InvalidInput(format!(
            "no model artifacts under {}",
            path.display()
        )));
    }
    Ok(found)
}

enum EvalInput {
    Features(Vec<f64>),
    Embedding(EmbeddingMatrix),
}

/// Scores saved models on a features table (classical) or a manifest with
/// embeddings (neural). `model` is one artifact file, a `models/` directory
/// or a run directory.
pub fn evaluate_artifacts(
    model: &Path,
    features: Option<&Path>,
    manifest: Option<&Path>,
) -> Result<EvalReport, PipelineError> {
    let artifacts = load_artifacts(model)?;
    let neural = artifacts[0].is_neural();
    if artifacts.iter().any(|a| a.is_neural() != neural) {
        return Err(PipelineError::InvalidInput(
            "mixed classical and neural artifacts".into(),
        ));
    }
    let (ids, truths, inputs): (Vec<String>, Vec<CapevScores>, Vec<EvalInput>) = if neural {
        let p = manifest
            .ok_or_else(|| PipelineError::InvalidInput("neural models need --manifest".into()))?;
        let m = DatasetManifest::load(p)?;
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for r in m.rows {
            let e = r.embedding_path.as_ref().ok_or_else(|| {
                PipelineError::ManifestInvalid(format!("{}: no embedding_path", r.id))
            })?;
            out.2.push(EvalInput::Embedding(load_embedding_matrix(e)?));
            out.0.push(r.id);
            out.1.push(r.scores);
        }
        out
    } else {
        let p = features.ok_or_else(|| {
            PipelineError::InvalidInput("classical models need --features".into())
        })?;
        let rows = read_features_csv(p)?;
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            out.0.push(r.id);
            out.1.push(r.scores);
            out.2
                .push(EvalInput::Features(r.features.to_array().to_vec()));
        }
        out
    };
    let mut report = EvalReport::default();
    for art in &artifacts {
        let a = Attribute::parse(&art.attribute).ok_or_else(|| {
            PipelineError::InvalidInput(format!("unknown attribute {}", art.attribute))
        })?;
        let preds: Vec<Option<f64>> = inputs
            .iter()
            .map(|x| match x {
                EvalInput::Features(f) => art.predict_features(f).ok(),
                EvalInput::Embedding(e) => art.predict_embedding(e).ok(),
            })
            .collect();
        let t: Vec<f64> = truths.iter().map(|s| s.get(a)).collect();
        report.rows.push(attribute_result(a, &preds, &t)?);
        let seen: HashSet<&str> = art.train_ids.iter().map(String::as_str).collect();
        let overlap = ids.iter().filter(|id| seen.contains(id.as_str())).count();
        if overlap > 0 {
            report.notes.push(format!(
                "warning: {overlap} evaluated rows were used to train the {} model",
                art.attribute
            ));
        }
    }
    report.rows.sort_by_key(|r| r.attribute.index());
    Ok(report)
}

fn read_csv_rows(path: &Path) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    r.records()
        .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
        .collect()
}

fn num(s: &str, path: &Path) -> Result<f64, PipelineError> {
    s.parse()
        .map_err(|_| PipelineError::InvalidInput(format!("{}: bad number {s:?}", path.display())))
}

/// Re-renders a run's report files from its scatter, importance, correlation
/// and notes files.
pub fn rebuild_report(run_dir: &Path) -> Result<EvalReport, PipelineError> {
    let mut report = EvalReport::default();
    let failed: HashMap<String, usize> = match run_dir.join("report.csv") {
        p if p.is_file() => read_csv_rows(&p)?
            .into_iter()
            .filter_map(|r| Some((r.first()?.clone(), r.get(4)?.parse().ok()?)))
            .collect(),
        _ => HashMap::new(),
    };
    for a in Attribute::ALL {
        let p = run_dir.join(format!("scatter_{}.csv", a.name()));
        if !p.is_file() {
            continue;
        }
        let pairs = read_csv_rows(&p)?
            .iter()
            .map(|r| Ok((num(&r[0], &p)?, num(&r[1], &p)?)))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        let mut preds: Vec<Option<f64>> = pairs.iter().map(|&(p, _)| Some(p)).collect();
        let mut truths: Vec<f64> = pairs.iter().map(|&(_, t)| t).collect();
        for _ in 0..failed.get(a.name()).copied().unwrap_or(0) {
            preds.push(None);
            truths.push(0.0);
        }
        report.rows.push(attribute_result(a, &preds, &truths)?);
    }
    if report.rows.is_empty() {
        return Err(PipelineError::InvalidInput(format!(
            "{} holds no scatter files",
            run_dir.display()
        )));
    }

    let imp = run_dir.join("importance.csv");
    if imp.is_file() {
        let mut r = csv::Reader::from_path(&imp)?;
        let names: Vec<String> = r.headers()?.iter().skip(2).map(str::to_string).collect();
        let mut tables: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .skip(2)
                .map(|v| num(v, &imp))
                .collect::<Result<Vec<_>, _>>()?;
            tables.entry(rec[1].to_string()).or_default().push(vals);
        }
        report.importance = Some(ImportanceTable {
            feature_names: names,
            impurity: tables.remove("impurity"),
            permutation: tables.remove("permutation"),
        });
    }

    let cor = run_dir.join("correlation.csv");
    if cor.is_file() {
        let mut cells = vec![[None; 6]; CORRELATION_PARAMETERS.len()];
        for rec in read_csv_rows(&cor)? {
            let a = Attribute::parse(&rec[0]).ok_or_else(|| {
                PipelineError::InvalidInput(format!("{}: bad attribute", cor.display()))
            })?;
            for (k, v) in rec.iter().skip(1).enumerate().take(cells.len()) {
                cells[k][a.index()] = if v.is_empty() {
                    None
                } else {
                    Some(num(v, &cor)?)
                };
            }
        }
        report.correlation = Some(CorrelationTable { cells });
    }

    let notes = run_dir.join("notes.txt");
    if notes.is_file() {
        report.notes = fs::read_to_string(&notes)?
            .lines()
            .map(str::to_string)
            .collect();
    }
    render_report(&report, run_dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditSummary {
    pub runs: usize,
    pub steps: usize,
    pub fitted_ids: usize,
    pub test_ids: usize,
}

fn audit_one(dir: &Path) -> Result<AuditSummary, PipelineError> {
    let ids = read_csv_rows(&dir.join("ids.csv"))?;
    let test: HashSet<String> = ids
        .iter()
        .filter(|r| r.get(1).map(String::as_str) == Some("test"))
        .map(|r| r[0].clone())
        .collect();
    let mut steps = HashSet::new();
    let mut fitted = HashSet::new();
    for rec in read_csv_rows(&dir.join("audit.csv"))? {
        let (step, id, src) = (
            &rec[0],
            &rec[1],
            rec.get(2).map(String::as_str).unwrap_or(""),
        );
        if test.contains(id) || test.contains(src) {
            return Err(PipelineError::Leakage(format!(
                "{}: test id {} used in step {step}",
                dir.display(),
                if test.contains(id) { id } else { src }
            )));
        }
        steps.insert(step.clone());
        fitted.insert(id.clone());
    }
    if steps.is_empty() {
        return Err(PipelineError::Leakage(format!(
            "{}: audit log is empty",
            dir.display()
        )));
    }
    Ok(AuditSummary {
        runs: 1,
        steps: steps.len(),
        fitted_ids: fitted.len(),
        test_ids: test.len(),
    })
}

/// Checks that no test id (or augmented copy of one) took part in any fitting
/// step of a run, including grid-search folds.
pub fn audit_run(dir: &Path) -> Result<AuditSummary, PipelineError> {
    if dir.join("ids.csv").is_file() {
        return audit_one(dir);
    }
    let mut total = AuditSummary {
        runs: 0,
        steps: 0,
        fitted_ids: 0,
        test_ids: 0,
    };
    for r in 0.. {
        let sub = dir.join(format!("repeat_{r}"));
        if !sub.is_dir() {
            break;
        }
        let s = audit_one(&sub)?;
        total.runs += 1;
        total.steps += s.steps;
        total.fitted_ids += s.fitted_ids;
        total.test_ids += s.test_ids;
    }
    if total.runs == 0 {
        return Err(PipelineError::InvalidInput(format!(
            "{} is not a run directory",
            dir.display()
        )));
    }
    Ok(total)
}
