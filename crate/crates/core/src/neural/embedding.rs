//! Embedding matrices produced by an external speech model.
//!
//! File layout: a header line `rows=R cols=C source=TAG`, then R lines of C
//! whitespace-separated decimals. Pooled embeddings use `rows=1`. Lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    /// Row-major, one frame per row.
    values: Vec<f64>,
    source: String,
}

impl EmbeddingMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        source: impl Into<String>,
    ) -> Result<Self, NeuralError> {
        if rows == 0 || cols == 0 {
            return Err(NeuralError::BadFormat(
                "embedding must have at least one row and column".into(),
            ));
        }
        if values.len() != rows * cols {
            return Err(NeuralError::BadFormat(format!(
                "expected {} values for {rows}x{cols}, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::BadFormat("non-finite value".into()));
        }
        let source = source.into();
        if source.chars().any(char::is_whitespace) {
            return Err(NeuralError::BadFormat(
                "source tag must not contain whitespace".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            values,
            source,
        })
    }

    /// A single pooled row.
    pub fn pooled_from(values: Vec<f64>, source: impl Into<String>) -> Result<Self, NeuralError> {
        let cols = values.len();
        Self::new(1, cols, values, source)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Mean over frames.
    pub fn pooled(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= self.rows as f64);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "rows={} cols={} source={}\n",
            self.rows, self.cols, self.source
        );
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, NeuralError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| NeuralError::BadFormat("missing header".into()))?;
        let (mut rows, mut cols, mut source) = (None, None, None);
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| NeuralError::BadFormat(format!("bad header field {field}")))?;
            let num = || {
                v.parse::<usize>()
                    .map_err(|_| NeuralError::BadFormat(format!("bad {k} value {v}")))
            };
            match k {
                "rows" => rows = Some(num()?),
                "cols" => cols = Some(num()?),
                "source" => source = Some(v.to_string()),
                _ => return Err(NeuralError::BadFormat(format!("unknown header field {k}"))),
            }
        }
        let (Some(rows), Some(cols)) = (rows, cols) else {
            return Err(NeuralError::BadFormat(
                "header needs rows= and cols=".into(),
            ));
        };
        let mut values = Vec::with_capacity(rows * cols);
        let mut n_lines = 0;
        for line in lines {
            n_lines += 1;
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| NeuralError::BadFormat(format!("bad number {tok}")))?;
                if !v.is_finite() {
                    return Err(NeuralError::BadFormat(format!(
                        "non-finite value {tok} on data line {n_lines}"
                    )));
                }
                values.push(v);
            }
            if values.len() - before != cols {
                return Err(NeuralError::BadFormat(format!(
                    "data line {n_lines} has {} values, header says {cols}",
                    values.len() - before
                )));
            }
        }
        if n_lines != rows {
            return Err(NeuralError::BadFormat(format!(
                "header says {rows} rows, found {n_lines}"
            )));
        }
        Self::new(
            rows,
            cols,
            values,
            source.unwrap_or_else(|| "unknown".into()),
        )
    }
}

pub fn load_embedding_matrix(path: &Path) -> Result<EmbeddingMatrix, NeuralError> {
    let text = fs::read_to_string(path)?;
    EmbeddingMatrix::parse(&text)
}

pub fn write_embedding_matrix(m: &EmbeddingMatrix, path: &Path) -> Result<(), NeuralError> {
    fs::write(path, m.to_text())?;
    Ok(())
}

/// Loads several files, requiring one channel count throughout.
pub fn load_embedding_set<P: AsRef<Path>>(
    paths: &[P],
) -> Result<Vec<EmbeddingMatrix>, NeuralError> {
    let mut out: Vec<EmbeddingMatrix> = Vec::with_capacity(paths.len());
    for p in paths {
        let m = load_embedding_matrix(p.as_ref())?;
        if let Some(first) = out.first() {
            if m.cols() != first.cols() {
                return Err(NeuralError::ShapeMismatch {
                    expected: first.cols(),
                    got: m.cols(),
                });
            }
        }
        out.push(m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_three_round_trip() {
        let m = EmbeddingMatrix::parse("rows=2 cols=3 source=test\n1 2 3\n4 5 6\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.source(), "test");
        assert_eq!(m.pooled(), vec![2.5, 3.5, 4.5]);
        assert_eq!(EmbeddingMatrix::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn nan_is_bad_format() {
        assert!(matches!(
            EmbeddingMatrix::parse("rows=1 cols=2 source=x\n1 NaN\n"),
            Err(NeuralError::BadFormat(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::parse("rows=2 cols=2 source=x\n1 2\n"),
            Err(NeuralError::BadFormat(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::parse("rows=1 cols=2 source=x\n1 2 3\n"),
            Err(NeuralError::BadFormat(_))
        ));
        assert!(EmbeddingMatrix::parse("").is_err());
    }

    #[test]
    fn mixed_channel_counts() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.emb");
        let b = dir.path().join("b.emb");
        write_embedding_matrix(
            &EmbeddingMatrix::pooled_from(vec![0.5; 768], "w2v").unwrap(),
            &a,
        )
        .unwrap();
        write_embedding_matrix(
            &EmbeddingMatrix::pooled_from(vec![0.5; 512], "w2v").unwrap(),
            &b,
        )
        .unwrap();
        assert!(matches!(
            load_embedding_set(&[&a, &b]),
            Err(NeuralError::ShapeMismatch {
                expected: 768,
                got: 512
            })
        ));
        assert_eq!(load_embedding_set(&[&a, &a]).unwrap().len(), 2);
    }
}
