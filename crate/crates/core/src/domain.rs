//! Search-space box and the observation set.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, Error, Result};

/// Axis-aligned box `lower[i] <= x[i] <= upper[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(dim_mismatch("box upper bound", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box must have at least one dimension".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "box bounds must satisfy lower < upper (dimension {i}: {} vs {})",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The symmetric box `[-1, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self::new(vec![-1.0; dim], vec![1.0; dim]).expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn clip(&self, x: &mut [f64]) -> bool {
        let mut clipped = false;
        for ((v, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            if *v < *lo {
                *v = *lo;
                clipped = true;
            } else if *v > *hi {
                *v = *hi;
                clipped = true;
            } else if v.is_nan() {
                *v = 0.5 * (lo + hi);
                clipped = true;
            }
        }
        clipped
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    /// Maps a point of the unit cube `[0, 1]^D` onto the box.
    pub fn from_unit_cube(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, h)| l + rng.random::<f64>() * (h - l))
            .collect()
    }
}

/// Ordered observations `(x_tau, y_tau)`; append-only.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a dataset, checking every point against `domain`.
    pub fn from_parts(domain: &BoxDomain, points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(dim_mismatch("dataset values", points.len(), values.len()));
        }
        let mut ds = Self::new();
        for (x, y) in points.into_iter().zip(values) {
            ds.push(domain, x, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, domain: &BoxDomain, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != domain.dim() {
            return Err(dim_mismatch("observation", domain.dim(), x.len()));
        }
        if !domain.contains(&x) {
            return Err(Error::InvalidArgument("observation outside the domain".into()));
        }
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite observation value {y}")));
        }
        self.points.push(x);
        self.values.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn best_value(&self) -> Option<f64> {
        self.values.iter().cloned().reduce(f64::min)
    }

    /// Same inputs, values replaced. Used for standardization.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(dim_mismatch("replacement values", self.len(), values.len()));
        }
        Ok(Self { points: self.points.clone(), values })
    }
}
