use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Plus,
    Minus,
}

impl Label {
    pub fn target(self) -> f64 {
        match self {
            Label::Plus => 1.0,
            Label::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Plus => 1,
            Label::Minus => -1,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(Label::Plus),
            -1 => Some(Label::Minus),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Label::Plus => Label::Minus,
            Label::Minus => Label::Plus,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Plus => "+1",
            Label::Minus => "-1",
        })
    }
}

/// `N` points in `R^D` (row-major) with binary labels.
///
/// Construction enforces `N >= 2`, both classes present, and no point carrying
/// both labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<f64>,
    dim: usize,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(points: Vec<f64>, dim: usize, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if points.len() != dim * labels.len() {
            return Err(Error::Dimension {
                expected: dim * labels.len(),
                found: points.len(),
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset contains non-finite coordinates".into()));
        }
        if labels.len() < 2 {
            return Err(Error::Config(format!(
                "dataset needs at least 2 points, got {}",
                labels.len()
            )));
        }
        if !labels.contains(&Label::Plus) || !labels.contains(&Label::Minus) {
            return Err(Error::Config("dataset must contain both +1 and -1 labels".into()));
        }
        let mut seen: HashMap<Vec<u64>, Label> = HashMap::with_capacity(labels.len());
        for (i, &label) in labels.iter().enumerate() {
            // -0.0 and 0.0 are the same point.
            let key: Vec<u64> = points[i * dim..(i + 1) * dim]
                .iter()
                .map(|v| (v + 0.0).to_bits())
                .collect();
            if let Some(prev) = seen.insert(key, label) {
                if prev != label {
                    return Err(Error::Config(format!(
                        "point {i} duplicates a point with the opposite label"
                    )));
                }
            }
        }
        Ok(Self { points, dim, labels })
    }

    /// Builds from one row per point.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(rows.concat(), dim, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Row-major coordinate buffer.
    pub fn raw_points(&self) -> &[f64] {
        &self.points
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.target()).collect()
    }

    /// Indices of the points with `label`, in dataset order.
    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }
}
