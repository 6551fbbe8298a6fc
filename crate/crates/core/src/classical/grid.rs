//! Grid search by stratified k-fold cross-validation, scored by RMSE.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{rmse, stratified_folds};

use super::{check_xy, fit_classical, ClassicalError, ClassicalFamily, HyperParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Int(usize),
    Float(f64),
    Text(String),
}

impl ParamValue {
    /// Integer if it parses as one, then float, else text.
    pub fn parse(s: &str) -> Self {
        let s = s.trim();
        if let Ok(i) = s.parse::<usize>() {
            ParamValue::Int(i)
        } else if let Ok(f) = s.parse::<f64>() {
            ParamValue::Float(f)
        } else {
            ParamValue::Text(s.to_ascii_lowercase())
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match *self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Float(f) if f >= 0.0 && f.fract() == 0.0 => Some(f as usize),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Float(f) => Some(f),
            ParamValue::Text(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(t) => f.write_str(t),
        }
    }
}

pub type ParamGrid = BTreeMap<String, Vec<ParamValue>>;
pub type ParamPoint = BTreeMap<String, ParamValue>;

/// Parses `name=v1,v2;name2=v3` into a grid.
pub fn parse_grid(s: &str) -> Result<ParamGrid, ClassicalError> {
    let mut grid = ParamGrid::new();
    for entry in s.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (name, values) = entry.split_once('=').ok_or_else(|| {
            ClassicalError::InvalidHyperparams(format!("grid entry without '=': {entry}"))
        })?;
        let values: Vec<ParamValue> = values
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(ParamValue::parse)
            .collect();
        grid.insert(name.trim().to_string(), values);
    }
    Ok(grid)
}

/// Default search space per family.
pub fn default_grid(family: ClassicalFamily) -> ParamGrid {
    let ints = |v: &[usize]| v.iter().map(|&i| ParamValue::Int(i)).collect::<Vec<_>>();
    let floats = |v: &[f64]| v.iter().map(|&f| ParamValue::Float(f)).collect::<Vec<_>>();
    let texts = |v: &[&str]| {
        v.iter()
            .map(|t| ParamValue::Text(t.to_string()))
            .collect::<Vec<_>>()
    };
    let mut g = ParamGrid::new();
    match family {
        ClassicalFamily::Rf => {
            g.insert("n_trees".into(), ints(&[100, 300]));
            g.insert(
                "max_depth".into(),
                vec![ParamValue::Text("none".into()), ParamValue::Int(8)],
            );
            g.insert("min_leaf".into(), ints(&[1, 5]));
            g.insert("features_per_split".into(), texts(&["all", "sqrt"]));
        }
        ClassicalFamily::Knn => {
            g.insert("k".into(), ints(&[1, 3, 5, 7, 9, 11, 13, 15]));
        }
        ClassicalFamily::Svr => {
            g.insert("C".into(), floats(&[0.1, 1.0, 10.0, 100.0]));
            g.insert("gamma".into(), floats(&[0.01, 0.1, 1.0]));
            g.insert("epsilon".into(), floats(&[0.1, 1.0]));
        }
    }
    g
}

/// All grid points; parameter names in sorted order, the first name varying
/// slowest and values in their listed order.
pub fn enumerate_grid(grid: &ParamGrid) -> Vec<ParamPoint> {
    let mut points = vec![ParamPoint::new()];
    for (name, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(name.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchSpec {
    pub family: ClassicalFamily,
    pub grid: ParamGrid,
    pub cv_folds: usize,
    pub seed: u64,
}

impl GridSearchSpec {
    pub fn validate(&self) -> Result<(), ClassicalError> {
        if self.grid.is_empty() || self.grid.values().any(Vec::is_empty) {
            return Err(ClassicalError::InvalidHyperparams("grid is empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(ClassicalError::InvalidHyperparams(
                "cv_folds must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// One grid point's cross-validation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub point: ParamPoint,
    pub fold_rmse: Vec<f64>,
    /// +inf when any fold failed.
    pub mean_rmse: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_point: ParamPoint,
    pub best_params: HyperParams,
    pub best_rmse: f64,
    pub table: Vec<CvRow>,
}

impl GridSearchResult {
    /// `point,mean_rmse,fold_1..fold_k,error` CSV.
    pub fn table_csv(&self) -> String {
        let k = self.table.first().map_or(0, |r| r.fold_rmse.len());
        let mut s = String::from("point,mean_rmse");
        for f in 1..=k {
            s.push_str(&format!(",fold_{f}"));
        }
        s.push_str(",error\n");
        for row in &self.table {
            let point: Vec<String> = row.point.iter().map(|(n, v)| format!("{n}={v}")).collect();
            s.push_str(&format!("\"{}\",{}", point.join(";"), row.mean_rmse));
            for i in 0..k {
                match row.fold_rmse.get(i) {
                    Some(v) => s.push_str(&format!(",{v}")),
                    None => s.push(','),
                }
            }
            s.push_str(&format!(
                ",{}\n",
                row.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        s
    }
}

fn cross_validate(
    params: &HyperParams,
    x: &[Vec<f64>],
    y: &[f64],
    folds: &[Vec<usize>],
    seed: u64,
) -> Result<Vec<f64>, ClassicalError> {
    let mut in_fold = vec![0usize; x.len()];
    for (f, rows) in folds.iter().enumerate() {
        for &r in rows {
            in_fold[r] = f;
        }
    }
    folds
        .iter()
        .enumerate()
        .map(|(f, val)| {
            let (tx, ty): (Vec<Vec<f64>>, Vec<f64>) = (0..x.len())
                .filter(|&r| in_fold[r] != f)
                .map(|r| (x[r].clone(), y[r]))
                .unzip();
            let model = fit_classical(params, &tx, &ty, seed)?;
            let pred: Vec<f64> = val
                .iter()
                .map(|&r| model.predict(&x[r]))
                .collect::<Result<_, _>>()?;
            let truth: Vec<f64> = val.iter().map(|&r| y[r]).collect();
            rmse(&pred, &truth).map_err(|e| ClassicalError::InvalidHyperparams(e.to_string()))
        })
        .collect()
}

/// Scores every grid point by mean validation RMSE over folds stratified on
/// `y`; the lowest wins, ties going to the earlier point.
pub fn grid_search(
    spec: &GridSearchSpec,
    x: &[Vec<f64>],
    y: &[f64],
) -> Result<GridSearchResult, ClassicalError> {
    spec.validate()?;
    check_xy(x, y)?;
    let folds = stratified_folds(y, spec.cv_folds, spec.seed).map_err(|e| match e {
        crate::eval::EvalError::TooFewSamples { needed, got } => {
            ClassicalError::TooFewRows { needed, got }
        }
        other => ClassicalError::InvalidHyperparams(other.to_string()),
    })?;
    let points = enumerate_grid(&spec.grid);
    let table: Vec<CvRow> = points
        .into_par_iter()
        .map(|point| {
            let outcome = HyperParams::from_point(spec.family, &point)
                .and_then(|hp| cross_validate(&hp, x, y, &folds, spec.seed));
            match outcome {
                Ok(fold_rmse) => {
                    let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
                    CvRow {
                        point,
                        fold_rmse,
                        mean_rmse,
                        error: None,
                    }
                }
                Err(e) => CvRow {
                    point,
                    fold_rmse: vec![],
                    mean_rmse: f64::INFINITY,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_rmse < table[best].mean_rmse {
            best = i;
        }
    }
    if !table[best].mean_rmse.is_finite() {
        return Err(ClassicalError::InvalidHyperparams(format!(
            "every grid cell failed; first error: {}",
            table[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    let best_point = table[best].point.clone();
    Ok(GridSearchResult {
        best_params: HyperParams::from_point(spec.family, &best_point)?,
        best_rmse: table[best].mean_rmse,
        best_point,
        table,
    })
}
