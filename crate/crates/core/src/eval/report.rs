//! Evaluation reports: per-attribute RMSE and Pearson rows, an average row,
//! audio-parameter correlation grid, feature importances and scatter data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::features::FeatureVector;

use super::{pearson, plot, rmse, Attribute, CapevScores, EvalError};

/// Result row for one attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeResult {
    pub attribute: Attribute,
    pub rmse: f64,
    /// `None` when undefined (constant predictions or truths).
    pub pearson: Option<f64>,
    pub n: usize,
    /// Rows whose prediction failed and were excluded.
    pub failed: usize,
    /// (predicted, truth) pairs.
    pub scatter: Vec<(f64, f64)>,
}

/// Audio-parameter vs attribute Pearson grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    /// cells[parameter][attribute]
    pub cells: Vec<[Option<f64>; 6]>,
}

/// Parameters of the correlation grid, in column order, with their index in
/// [`FeatureVector::to_array`].
pub const CORRELATION_PARAMETERS: [(&str, usize); 4] =
    [("jitter", 1), ("shimmer", 3), ("hnr", 4), ("zcr", 0)];

/// Per-attribute feature importances.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceTable {
    pub feature_names: Vec<String>,
    /// impurity[attribute][feature], forests only.
    pub impurity: Option<Vec<Vec<f64>>>,
    /// permutation[attribute][feature], RMSE increase on the test set.
    pub permutation: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<AttributeResult>,
    pub correlation: Option<CorrelationTable>,
    pub importance: Option<ImportanceTable>,
    /// Free-form lines appended to the text report.
    pub notes: Vec<String>,
}

impl EvalReport {
    /// Mean RMSE over the attribute rows.
    pub fn average_rmse(&self) -> Option<f64> {
        if self.rows.is_empty() {
            return None;
        }
        Some(self.rows.iter().map(|r| r.rmse).sum::<f64>() / self.rows.len() as f64)
    }

    /// Mean Pearson r over rows where it is defined.
    pub fn average_pearson(&self) -> Option<f64> {
        let defined: Vec<f64> = self.rows.iter().filter_map(|r| r.pearson).collect();
        if defined.is_empty() {
            return None;
        }
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }

    pub fn row(&self, a: Attribute) -> Option<&AttributeResult> {
        self.rows.iter().find(|r| r.attribute == a)
    }
}

/// Builds report rows from per-attribute predictions.
///
/// `predictions[a][i]` is the prediction of attribute `a` for sample `i`, or
/// `None` if the predictor failed on it; failed samples are excluded from that
/// attribute's metrics and counted.
pub fn evaluate_predictions(
    predictions: &[Vec<Option<f64>>; 6],
    truths: &[CapevScores],
) -> Result<EvalReport, EvalError> {
    let mut rows = Vec::with_capacity(6);
    for a in Attribute::ALL {
        let preds = &predictions[a.index()];
        if preds.len() != truths.len() {
            return Err(EvalError::LengthMismatch(preds.len(), truths.len()));
        }
        let scatter: Vec<(f64, f64)> = preds
            .iter()
            .zip(truths)
            .filter_map(|(p, t)| p.map(|p| (p, t.get(a))))
            .collect();
        let failed = preds.len() - scatter.len();
        let (p, t): (Vec<f64>, Vec<f64>) = scatter.iter().copied().unzip();
        let rmse = rmse(&p, &t)?;
        let pearson = match pearson(&p, &t) {
            Ok(r) => Some(r),
            Err(EvalError::ConstantInput) | Err(EvalError::TooFewSamples { .. }) => None,
            Err(e) => return Err(e),
        };
        rows.push(AttributeResult {
            attribute: a,
            rmse,
            pearson,
            n: scatter.len(),
            failed,
            scatter,
        });
    }
    Ok(EvalReport {
        rows,
        ..Default::default()
    })
}

/// Pearson grid of jitter, shimmer, HNR and zero-crossing rate against the six
/// attributes. Undefined cells (constant columns) are `None`.
pub fn correlation_table(
    features: &[FeatureVector],
    truths: &[CapevScores],
) -> Result<CorrelationTable, EvalError> {
    if features.len() != truths.len() {
        return Err(EvalError::LengthMismatch(features.len(), truths.len()));
    }
    if features.len() < 2 {
        return Err(EvalError::TooFewSamples {
            needed: 2,
            got: features.len(),
        });
    }
    let cells = CORRELATION_PARAMETERS
        .iter()
        .map(|&(_, fi)| {
            let x: Vec<f64> = features.iter().map(|f| f.to_array()[fi]).collect();
            let mut row = [None; 6];
            for a in Attribute::ALL {
                let y: Vec<f64> = truths.iter().map(|t| t.get(a)).collect();
                row[a.index()] = pearson(&x, &y).ok();
            }
            row
        })
        .collect();
    Ok(CorrelationTable { cells })
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(v) => format!("{v:.prec$}"),
        None => "undefined".to_string(),
    }
}

/// Aligned plain-text rendering of the report.
pub fn report_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>10} {:>6} {:>7}",
        "attribute", "rmse", "pearson", "n", "failed"
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<12} {:>10.4} {:>10} {:>6} {:>7}",
            r.attribute.name(),
            r.rmse,
            fmt_opt(r.pearson, 4),
            r.n,
            r.failed
        );
    }
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>10}",
        "avg",
        fmt_opt(report.average_rmse(), 4),
        fmt_opt(report.average_pearson(), 4)
    );
    if report.rows.iter().any(|r| r.pearson.is_none()) {
        let _ = writeln!(
            s,
            "note: pearson undefined for some attributes; avg pearson covers defined rows only"
        );
    }

    if let Some(c) = &report.correlation {
        let _ = writeln!(s, "\nparameter/attribute correlation");
        let _ = write!(s, "{:<12}", "attribute");
        for (name, _) in CORRELATION_PARAMETERS {
            let _ = write!(s, " {name:>10}");
        }
        let _ = writeln!(s);
        for a in Attribute::ALL {
            let _ = write!(s, "{:<12}", a.name());
            for row in &c.cells {
                let _ = write!(s, " {:>10}", fmt_opt(row[a.index()], 3));
            }
            let _ = writeln!(s);
        }
    }

    if let Some(imp) = &report.importance {
        let tables = [
            ("feature importance (impurity)", &imp.impurity),
            (
                "feature importance (permutation, rmse increase)",
                &imp.permutation,
            ),
        ];
        for (title, table) in tables {
            let Some(table) = table else { continue };
            let _ = writeln!(s, "\n{title}");
            let _ = write!(s, "{:<12}", "attribute");
            for name in &imp.feature_names {
                let _ = write!(s, " {name:>10}");
            }
            let _ = writeln!(s);
            for (a, row) in Attribute::ALL.iter().zip(table) {
                let _ = write!(s, "{:<12}", a.name());
                for v in row {
                    let _ = write!(s, " {v:>10.4}");
                }
                let _ = writeln!(s);
            }
        }
    }
    for n in &report.notes {
        let _ = writeln!(s, "{n}");
    }
    s
}

/// `attribute,rmse,pearson,n,failed` rows followed by an `avg` row.
/// Undefined correlations are written as empty fields.
pub fn report_csv(report: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut s = String::from("attribute,rmse,pearson,n,failed\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.attribute.name(),
            r.rmse,
            opt(r.pearson),
            r.n,
            r.failed
        );
    }
    let _ = writeln!(
        s,
        "avg,{},{},,",
        opt(report.average_rmse()),
        opt(report.average_pearson())
    );
    s
}

/// Writes `pred,truth` lines under a header.
pub fn export_scatter(pairs: &[(f64, f64)], path: &Path) -> Result<(), EvalError> {
    let mut s = String::from("pred,truth\n");
    for (p, t) in pairs {
        let _ = writeln!(s, "{p},{t}");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Writes the report into `dir`: `report.txt`, `report.csv`, per-attribute
/// `scatter_<attribute>.csv` and `.svg`, plus `importance.csv` and
/// `correlation.csv` when present.
pub fn render_report(report: &EvalReport, dir: &Path) -> Result<(), EvalError> {
    if report.rows.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), report_text(report))?;
    fs::write(dir.join("report.csv"), report_csv(report))?;
    for r in &report.rows {
        let name = r.attribute.name();
        export_scatter(&r.scatter, &dir.join(format!("scatter_{name}.csv")))?;
        fs::write(
            dir.join(format!("scatter_{name}.svg")),
            plot::scatter_svg(&r.scatter, &format!("{name} score")),
        )?;
    }
    if let Some(imp) = &report.importance {
        let mut s = String::from("attribute,kind");
        for n in &imp.feature_names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        let mut emit = |kind: &str, table: &Vec<Vec<f64>>| {
            for (a, row) in Attribute::ALL.iter().zip(table) {
                let _ = write!(s, "{},{kind}", a.name());
                for v in row {
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
        };
        if let Some(p) = &imp.impurity {
            emit("impurity", p);
        }
        if let Some(p) = &imp.permutation {
            emit("permutation", p);
        }
        fs::write(dir.join("importance.csv"), s)?;
    }
    if let Some(c) = &report.correlation {
        let mut s = String::from("attribute");
        for (n, _) in CORRELATION_PARAMETERS {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for a in Attribute::ALL {
            s.push_str(a.name());
            for row in &c.cells {
                let _ = write!(
                    s,
                    ",{}",
                    row[a.index()].map(|v| v.to_string()).unwrap_or_default()
                );
            }
            s.push('\n');
        }
        fs::write(dir.join("correlation.csv"), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truths(n: usize) -> Vec<CapevScores> {
        (0..n)
            .map(|i| {
                let v = (i * 10 % 97) as f64;
                CapevScores::new([v, v / 2.0, 100.0 - v, v / 3.0, v, 50.0 + v / 2.0]).unwrap()
            })
            .collect()
    }

    fn perfect(t: &[CapevScores]) -> [Vec<Option<f64>>; 6] {
        std::array::from_fn(|a| t.iter().map(|s| Some(s.values()[a])).collect())
    }

    #[test]
    fn perfect_predictor() {
        let t = truths(12);
        let r = evaluate_predictions(&perfect(&t), &t).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert_eq!(row.rmse, 0.0);
            assert!((row.pearson.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_predictor_has_undefined_pearson() {
        let t = truths(12);
        let preds: [Vec<Option<f64>>; 6] = std::array::from_fn(|_| vec![Some(40.0); 12]);
        let r = evaluate_predictions(&preds, &t).unwrap();
        let sev = r.row(Attribute::Severity).unwrap();
        assert!(sev.pearson.is_none());
        let y: Vec<f64> = t.iter().map(|s| s.get(Attribute::Severity)).collect();
        let expected = (y.iter().map(|v| (v - 40.0).powi(2)).sum::<f64>() / 12.0).sqrt();
        assert!((sev.rmse - expected).abs() < 1e-12);
        assert!(report_text(&r).contains("undefined"));
    }

    #[test]
    fn failed_rows_are_excluded_and_counted() {
        let t = truths(6);
        let mut p = perfect(&t);
        p[0][2] = None;
        let r = evaluate_predictions(&p, &t).unwrap();
        assert_eq!(r.rows[0].failed, 1);
        assert_eq!(r.rows[0].n, 5);
        assert_eq!(r.rows[1].failed, 0);
    }

    #[test]
    fn averages_recompute_from_rows() {
        let t = truths(30);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p: [Vec<Option<f64>>; 6] = std::array::from_fn(|a| {
            t.iter()
                .map(|s| Some(s.values()[a] + rng.random_range(-20.0..20.0)))
                .collect()
        });
        let r = evaluate_predictions(&p, &t).unwrap();
        let mut sum = 0.0;
        for row in &r.rows {
            sum += row.rmse;
        }
        assert!((r.average_rmse().unwrap() - sum / 6.0).abs() < 1e-12);
        let csv = report_csv(&r);
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().last().unwrap().starts_with("avg,"));
    }

    #[test]
    fn correlation_grid_tracks_constructed_dependence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats: Vec<FeatureVector> = (0..200)
            .map(|_| {
                FeatureVector::from_array([
                    rng.random_range(100.0..2000.0),
                    rng.random_range(0.0..0.9),
                    rng.random_range(0.0..1e-3),
                    rng.random_range(0.0..0.3),
                    rng.random_range(-5.0..30.0),
                    rng.random_range(0..2) as f64,
                    rng.random_range(20.0..80.0),
                ])
            })
            .collect();
        let truths: Vec<CapevScores> = feats
            .iter()
            .map(|f| {
                let dep = (100.0 * f.jitter).clamp(0.0, 100.0);
                let mut v = [0.0; 6];
                for (i, x) in v.iter_mut().enumerate() {
                    *x = if i == 0 {
                        dep
                    } else {
                        rng.random_range(0.0..100.0)
                    };
                }
                CapevScores::new(v).unwrap()
            })
            .collect();
        let table = correlation_table(&feats, &truths).unwrap();
        // jitter vs severity
        assert!(table.cells[0][0].unwrap() > 0.99);
        // everything unrelated stays small
        for (p, row) in table.cells.iter().enumerate() {
            for (a, cell) in row.iter().enumerate() {
                if p == 0 && a == 0 {
                    continue;
                }
                assert!(cell.unwrap().abs() < 0.3, "cell {p},{a} = {cell:?}");
            }
        }
    }

    #[test]
    fn scatter_and_report_files() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = [(1.0, 2.0), (3.0, 4.0), (5.0, 6.5)];
        let path = dir.path().join("s.csv");
        export_scatter(&pairs, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), "pred,truth");

        let t = truths(10);
        let r = evaluate_predictions(&perfect(&t), &t).unwrap();
        render_report(&r, dir.path()).unwrap();
        for f in [
            "report.txt",
            "report.csv",
            "scatter_strain.csv",
            "scatter_strain.svg",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(matches!(
            render_report(&EvalReport::default(), dir.path()),
            Err(EvalError::EmptyReport)
        ));
    }
}
