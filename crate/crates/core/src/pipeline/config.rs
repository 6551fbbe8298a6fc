//! Run configuration: a line-oriented `key = value` file.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the configuration file's directory.
//!
//! | key | default |
//! |---|---|
//! | `manifest` | required unless `features` is set and the family is classical |
//! | `features` | none: features are extracted from `manifest` |
//! | `augmented_manifest` | none |
//! | `noise_dir` | none: no in-run augmentation |
//! | `pairs` | `0.9,0.1;0.7,0.3` |
//! | `output_dir` | required |
//! | `family` | `rf` (`rf`, `knn`, `svr`, `mlp`, `conv`) |
//! | `grid` | `none` (`none`, `default`, or `name=v1,v2;name=...`) |
//! | `cv_folds` | 5 |
//! | `seed` | 0 |
//! | `test_fraction` | 0.2 |
//! | `n_bins` | 5 |
//! | `repeats` | 1 |
//! | `working_rate` | 8000 |
//! | `permutation_repeats` | 5 |
//! | `epochs`, `batch_size`, `learning_rate`, `optimizer` | 200, 16, 0.001, `adam` |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::WeightPair;
use crate::classical::{default_grid, parse_grid, ClassicalFamily, ParamGrid};
use crate::neural::{Optimizer, TrainConfig};

use super::{sha256_hex, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Classical(ClassicalFamily),
    Mlp,
    Conv,
}

impl Family {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(Family::Mlp),
            "conv" => Some(Family::Conv),
            other => ClassicalFamily::parse(other).map(Family::Classical),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Classical(c) => c.name(),
            Family::Mlp => "mlp",
            Family::Conv => "conv",
        }
    }

    pub fn is_neural(self) -> bool {
        !matches!(self, Family::Classical(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    None,
    Default,
    Custom(ParamGrid),
}

impl GridChoice {
    pub fn parse(s: &str) -> Result<Self, PipelineError> {
        match s {
            "none" | "" => Ok(GridChoice::None),
            "default" => Ok(GridChoice::Default),
            spec => parse_grid(spec)
                .map(GridChoice::Custom)
                .map_err(|e| PipelineError::ConfigInvalid(e.to_string())),
        }
    }

    /// The grid to search for `family`, if any.
    pub fn resolve(&self, family: ClassicalFamily) -> Option<ParamGrid> {
        match self {
            GridChoice::None => None,
            GridChoice::Default => Some(default_grid(family)),
            GridChoice::Custom(g) => Some(g.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub augmented_manifest: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
    pub pairs: Vec<WeightPair>,
    pub output_dir: PathBuf,
    pub family: Family,
    pub grid: GridChoice,
    pub cv_folds: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub n_bins: usize,
    pub repeats: usize,
    pub working_rate: u32,
    pub permutation_repeats: usize,
    pub train: TrainConfig,
    /// SHA-256 of the file text, or of the canonical rendering when built in code.
    pub digest: String,
}

impl RunConfig {
    pub fn new(output_dir: impl Into<PathBuf>, family: Family) -> Self {
        let mut c = Self {
            manifest: None,
            features: None,
            augmented_manifest: None,
            noise_dir: None,
            pairs: WeightPair::defaults().to_vec(),
            output_dir: output_dir.into(),
            family,
            grid: GridChoice::None,
            cv_folds: 5,
            seed: 0,
            test_fraction: 0.2,
            n_bins: 5,
            repeats: 1,
            working_rate: crate::audio::WORKING_RATE,
            permutation_repeats: 5,
            train: TrainConfig::default(),
            digest: String::new(),
        };
        c.refresh_digest();
        c
    }

    /// Recomputes `digest` from [`RunConfig::canonical`].
    pub fn refresh_digest(&mut self) {
        self.digest = sha256_hex(self.canonical().as_bytes());
    }

    /// Every setting as `key = value` lines, in fixed order.
    pub fn canonical(&self) -> String {
        let p = |o: &Option<PathBuf>| {
            o.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let grid = match &self.grid {
            GridChoice::None => "none".to_string(),
            GridChoice::Default => "default".to_string(),
            GridChoice::Custom(g) => g
                .iter()
                .map(|(k, vs)| {
                    format!(
                        "{k}={}",
                        vs.iter()
                            .map(|v| v.to_string())
                            .collect::<Vec<_>>()
                            .join(",")
                    )
                })
                .collect::<Vec<_>>()
                .join(";"),
        };
        let pairs: Vec<String> = self
            .pairs
            .iter()
            .map(|w| format!("{},{}", w.w_signal(), w.w_noise()))
            .collect();
        let lines = [
            ("manifest", p(&self.manifest)),
            ("features", p(&self.features)),
            ("augmented_manifest", p(&self.augmented_manifest)),
            ("noise_dir", p(&self.noise_dir)),
            ("pairs", pairs.join(";")),
            ("output_dir", self.output_dir.display().to_string()),
            ("family", self.family.name().to_string()),
            ("grid", grid),
            ("cv_folds", self.cv_folds.to_string()),
            ("seed", self.seed.to_string()),
            ("test_fraction", self.test_fraction.to_string()),
            ("n_bins", self.n_bins.to_string()),
            ("repeats", self.repeats.to_string()),
            ("working_rate", self.working_rate.to_string()),
            ("permutation_repeats", self.permutation_repeats.to_string()),
            ("epochs", self.train.epochs.to_string()),
            ("batch_size", self.train.batch_size.to_string()),
            ("learning_rate", self.train.learning_rate.to_string()),
            (
                "optimizer",
                match self.train.optimizer {
                    Optimizer::Adam => "adam",
                    Optimizer::Momentum => "momentum",
                }
                .to_string(),
            ),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| {
            PipelineError::ConfigInvalid(format!("cannot read {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut c = Self::parse(&text, base)?;
        c.digest = sha256_hex(text.as_bytes());
        Ok(c)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut kv = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::ConfigInvalid(format!("line {}: expected key = value", i + 1))
            })?;
            let k = k.trim().to_string();
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(PipelineError::ConfigInvalid(format!(
                    "line {}: duplicate key {k}",
                    i + 1
                )));
            }
        }
        let bad =
            |k: &str, v: &str| PipelineError::ConfigInvalid(format!("bad value for {k}: {v:?}"));
        let path = |v: &str| (!v.is_empty()).then(|| base.join(v));

        let output_dir = kv
            .remove("output_dir")
            .and_then(|v| path(&v))
            .ok_or_else(|| PipelineError::ConfigInvalid("output_dir is required".into()))?;
        let family = match kv.remove("family") {
            Some(v) => Family::parse(&v).ok_or_else(|| bad("family", &v))?,
            None => Family::Classical(ClassicalFamily::Rf),
        };
        let mut c = Self::new(output_dir, family);
        for (k, v) in kv {
            fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, PipelineError> {
                v.parse()
                    .map_err(|_| PipelineError::ConfigInvalid(format!("bad value for {k}: {v:?}")))
            }
            match k.as_str() {
                "manifest" => c.manifest = path(&v),
                "features" => c.features = path(&v),
                "augmented_manifest" => c.augmented_manifest = path(&v),
                "noise_dir" => c.noise_dir = path(&v),
                "pairs" => c.pairs = parse_pairs(&v)?,
                "grid" => c.grid = GridChoice::parse(&v)?,
                "cv_folds" => c.cv_folds = num(&k, &v)?,
                "seed" => c.seed = num(&k, &v)?,
                "test_fraction" => c.test_fraction = num(&k, &v)?,
                "n_bins" => c.n_bins = num(&k, &v)?,
                "repeats" => c.repeats = num(&k, &v)?,
                "working_rate" => c.working_rate = num(&k, &v)?,
                "permutation_repeats" => c.permutation_repeats = num(&k, &v)?,
                "epochs" => c.train.epochs = num(&k, &v)?,
                "batch_size" => c.train.batch_size = num(&k, &v)?,
                "learning_rate" => c.train.learning_rate = num(&k, &v)?,
                "optimizer" => {
                    c.train.optimizer = match v.as_str() {
                        "adam" => Optimizer::Adam,
                        "momentum" => Optimizer::Momentum,
                        _ => return Err(bad(&k, &v)),
                    }
                }
                _ => return Err(PipelineError::ConfigInvalid(format!("unknown key {k}"))),
            }
        }
        c.validate()?;
        c.refresh_digest();
        Ok(c)
    }

    /// Checks every setting before any work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::ConfigInvalid(m));
        if self.manifest.is_none() && (self.family.is_neural() || self.features.is_none()) {
            return err("manifest is required".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return err(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if self.n_bins < 2 {
            return err("n_bins must be >= 2".into());
        }
        if self.cv_folds < 2 {
            return err("cv_folds must be >= 2".into());
        }
        if self.repeats == 0 {
            return err("repeats must be >= 1".into());
        }
        if self.working_rate < 1000 {
            return err(format!("working_rate {} is too low", self.working_rate));
        }
        if self.pairs.len() != 2 {
            return err(format!("expected 2 weight pairs, got {}", self.pairs.len()));
        }
        if self.family.is_neural() && self.grid != GridChoice::None {
            return err("grid search applies to classical families only".into());
        }
        if self.augmented_manifest.is_some() && self.noise_dir.is_some() {
            return err("set augmented_manifest or noise_dir, not both".into());
        }
        self.train
            .validate()
            .map_err(|e| PipelineError::ConfigInvalid(e.to_string()))?;
        for (name, p) in [
            ("manifest", &self.manifest),
            ("features", &self.features),
            ("augmented_manifest", &self.augmented_manifest),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return err(format!("{name} {} does not exist", p.display()));
                }
            }
        }
        if let Some(d) = &self.noise_dir {
            if !d.is_dir() {
                return err(format!("noise_dir {} does not exist", d.display()));
            }
        }
        Ok(())
    }
}

/// `a,b;c,d` weight pairs.
pub fn parse_pairs(s: &str) -> Result<Vec<WeightPair>, PipelineError> {
    let bad = || PipelineError::ConfigInvalid(format!("bad weight pairs {s:?}, expected a,b;c,d"));
    s.split(';')
        .map(|p| {
            let (a, b) = p.split_once(',').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let b: f64 = b.trim().parse().map_err(|_| bad())?;
            WeightPair::new(a, b).map_err(|e| PipelineError::ConfigInvalid(e.to_string()))
        })
        .collect()
}
