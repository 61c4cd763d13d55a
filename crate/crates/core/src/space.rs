//! Finite metric spaces, interval grids, and explicit separating functions.
//!
//! Every function on a finite metric space is continuous, so the separating
//! functions that complete regularity only asserts to exist can be written
//! down directly from the distance table.

use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, MetricViolation, Result};
use crate::ext;

/// A finite metric space. Points are identified by their index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    dist: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<f64>>,
}

impl MetricSpace {
    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.dist[a][b]
    }

    pub fn dist_table(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name of a point: its label if one was given, else its
    /// 1-based position.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => (i + 1).to_string(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::input(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Points on the real line with the absolute-difference metric.
    pub fn from_coords(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Metric(MetricViolation::Empty));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::input(format!("coordinate {i} is not finite")));
        }
        let dist: Vec<Vec<f64>> = coords
            .iter()
            .map(|a| coords.iter().map(|b| (a - b).abs()).collect())
            .collect();
        for i in 0..coords.len() {
            for j in 0..i {
                if dist[i][j] == 0.0 {
                    return Err(Error::Metric(MetricViolation::ZeroOffDiagonal(j, i)));
                }
            }
        }
        Ok(MetricSpace {
            labels: None,
            dist,
            coords: Some(coords),
        })
    }

    /// The discrete metric (all distinct points at distance 1).
    pub fn discrete(n: usize) -> Result<Self> {
        let dist = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        validate_metric(dist)
    }

    /// Distance from `x` to the nearest member of `set`.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&a| self.dist[x][a])
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise distance within `set`; 0 for empty or singleton sets.
    pub fn diameter(&self, set: &[usize]) -> f64 {
        let mut d = 0.0f64;
        for (k, &a) in set.iter().enumerate() {
            for &b in &set[k + 1..] {
                d = d.max(self.dist[a][b]);
            }
        }
        d
    }

    fn check_point(&self, p: usize, what: &str) -> Result<()> {
        if p < self.len() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "{what} index {p} out of range for a space of {} points",
                self.len()
            )))
        }
    }
}

/// Validates a square distance table against the metric axioms.
///
/// All `N³` ordered triples are scanned for the triangle inequality; values
/// are compared exactly as given.
pub fn validate_metric(dist: Vec<Vec<f64>>) -> Result<MetricSpace> {
    let n = dist.len();
    if n == 0 {
        return Err(Error::Metric(MetricViolation::Empty));
    }
    for (i, row) in dist.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Metric(MetricViolation::NotSquare {
                row: i,
                len: row.len(),
                expected: n,
            }));
        }
        for (j, &d) in row.iter().enumerate() {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::Metric(MetricViolation::BadEntry(i, j)));
            }
        }
    }
    for i in 0..n {
        if dist[i][i] != 0.0 {
            return Err(Error::Metric(MetricViolation::NonzeroDiagonal(i)));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if dist[i][j] != dist[j][i] {
                return Err(Error::Metric(MetricViolation::Asymmetry(i, j)));
            }
            if dist[i][j] == 0.0 {
                return Err(Error::Metric(MetricViolation::ZeroOffDiagonal(i, j)));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if dist[a][c] > dist[a][b] + dist[b][c] {
                    return Err(Error::Metric(MetricViolation::Triangle(a, b, c)));
                }
            }
        }
    }
    Ok(MetricSpace {
        labels: None,
        dist,
        coords: None,
    })
}

/// Sampling specification for a real interval with optionally open ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub lower_open: bool,
    #[serde(default)]
    pub upper_open: bool,
    pub n: usize,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, lower_open: bool, upper_open: bool, n: usize) -> Self {
        GridSpec {
            lower,
            upper,
            lower_open,
            upper_open,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite()) {
            return Err(Error::input("grid endpoints must be finite"));
        }
        if self.lower >= self.upper {
            return Err(Error::input(format!(
                "grid needs lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if self.n < 2 {
            return Err(Error::input(format!(
                "grid resolution must be >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Exact position of sample `i` as a fraction of `upper − lower`.
    ///
    /// Open ends are offset by one step: `(0,1)` gives `i/(n+1)`, `(0,1]`
    /// gives `i/n`, `[0,1)` gives `(i−1)/n`, `[0,1]` gives `(i−1)/(n−1)`
    /// for `i = 1..=n`; here `i` is the 0-based index.
    pub fn position(&self, i: usize) -> Ratio<i64> {
        let n = self.n as i64;
        let i = i as i64;
        match (self.lower_open, self.upper_open) {
            (true, true) => Ratio::new(i + 1, n + 1),
            (true, false) => Ratio::new(i + 1, n),
            (false, true) => Ratio::new(i, n),
            (false, false) => Ratio::new(i, n - 1),
        }
    }

    /// Floating coordinate of sample `i`; closed endpoints are hit exactly.
    pub fn sample(&self, i: usize) -> f64 {
        let t = self.position(i);
        if *t.numer() == 0 {
            self.lower
        } else if t.numer() == t.denom() {
            self.upper
        } else {
            self.lower + (self.upper - self.lower) * (*t.numer() as f64 / *t.denom() as f64)
        }
    }
}

/// Samples an interval into a metric space on the real line.
pub fn build_grid(spec: &GridSpec) -> Result<MetricSpace> {
    spec.validate()?;
    MetricSpace::from_coords((0..spec.n).map(|i| spec.sample(i)).collect())
}

/// An extended-real function on the points of a space.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    space: Arc<MetricSpace>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Arc<MetricSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::input(format!(
                "field has {} values for {} points",
                values.len(),
                space.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !ext::is_ext(*v)) {
            return Err(Error::input(format!("field value at {i} is NaN")));
        }
        Ok(ScalarField { space, values })
    }

    pub fn constant(space: Arc<MetricSpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        ScalarField { space, values }
    }

    pub fn zeros(space: Arc<MetricSpace>) -> Self {
        Self::constant(space, 0.0)
    }

    pub(crate) fn from_fn(space: Arc<MetricSpace>, f: impl Fn(usize) -> f64) -> Self {
        let values = (0..space.len()).map(f).collect();
        ScalarField { space, values }
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max |value|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise sum; fails on `+∞ + −∞`.
    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, ext::ext_add)
    }

    /// Pointwise difference; fails on `∞ − ∞`.
    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip(other, ext::ext_sub)
    }

    pub fn neg(&self) -> ScalarField {
        ScalarField {
            space: self.space.clone(),
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    fn zip(
        &self,
        other: &ScalarField,
        op: impl Fn(f64, f64) -> Option<f64>,
    ) -> Result<ScalarField> {
        if self.len() != other.len() {
            return Err(Error::input("fields live on spaces of different size"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (&a, &b))| {
                op(a, b).ok_or_else(|| Error::input(format!("undefined ∞ arithmetic at point {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField {
            space: self.space.clone(),
            values,
        })
    }
}

/// `h(x) = d(x,x0) / (d(x,x0) + d(x,A))`: 0 at `x0`, 1 on `A`, in `[0,1]`.
pub fn urysohn_separator(
    space: &Arc<MetricSpace>,
    x0: usize,
    set: &[usize],
) -> Result<ScalarField> {
    space.check_point(x0, "anchor")?;
    if set.is_empty() {
        return Err(Error::input("separated set is empty"));
    }
    for &a in set {
        space.check_point(a, "set member")?;
    }
    if set.contains(&x0) {
        return Err(Error::input(format!(
            "not separated: point {} lies in the set",
            x0 + 1
        )));
    }
    Ok(ScalarField::from_fn(space.clone(), |x| {
        let d0 = space.dist(x, x0);
        let da = space.dist_to_set(x, set);
        d0 / (d0 + da)
    }))
}

/// `b(x) = (ε/2)·d/(1+d)` with `d = d(x,x0)`: zero only at the anchor,
/// nondecreasing in distance, strictly below `ε/2`.
pub fn bump(space: &Arc<MetricSpace>, x0: usize, amplitude: f64) -> Result<ScalarField> {
    space.check_point(x0, "anchor")?;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::input(format!(
            "bump amplitude must be positive, got {amplitude}"
        )));
    }
    Ok(ScalarField::from_fn(space.clone(), |x| {
        bump_value(space.dist(x, x0), amplitude)
    }))
}

pub(crate) fn bump_value(d: f64, amplitude: f64) -> f64 {
    (amplitude / 2.0) * (d / (1.0 + d))
}

/// `h_n(x) = min(1, n·d(x,x0))`: vanishes at the anchor and is 1 outside
/// the open ball of radius `1/n`.
pub fn nested_base_function(space: &Arc<MetricSpace>, x0: usize, n: u32) -> Result<ScalarField> {
    space.check_point(x0, "anchor")?;
    if n == 0 {
        return Err(Error::input("nested base index starts at 1"));
    }
    Ok(ScalarField::from_fn(space.clone(), |x| {
        nested_base_value(space.dist(x, x0), n)
    }))
}

pub(crate) fn nested_base_value(d: f64, n: u32) -> f64 {
    (n as f64 * d).min(1.0)
}
