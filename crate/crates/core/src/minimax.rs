//! Value functions, duality gap and saddle points of extended-real payoffs
//! on a product of two finite metric spaces.
//!
//! The maximizing player picks `x ∈ X`, the minimizing player `y ∈ Y`:
//! `v(x) = inf_y f(x,y)`, `w(y) = sup_x f(x,y)`, `V = sup v`, `W = inf w`
//! and the gap is `Δ = W − V ≥ 0`.

use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext;
use crate::space::{build_grid, GridSpec, MetricSpace, ScalarField};

/// Payoff table `f: X × Y → [−∞, +∞]`, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiFunction {
    x: Arc<MetricSpace>,
    y: Arc<MetricSpace>,
    values: Vec<f64>,
}

impl BiFunction {
    pub fn new(x: Arc<MetricSpace>, y: Arc<MetricSpace>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != x.len() {
            return Err(Error::input(format!(
                "payoff has {} rows but X has {} points",
                rows.len(),
                x.len()
            )));
        }
        let mut values = Vec::with_capacity(x.len() * y.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != y.len() {
                return Err(Error::input(format!(
                    "payoff row {i} has {} entries but Y has {} points",
                    row.len(),
                    y.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| v.is_nan()) {
                return Err(Error::input(format!("payoff entry ({i},{j}) is NaN")));
            }
            values.extend(row);
        }
        Ok(BiFunction { x, y, values })
    }

    pub fn from_fn(
        x: Arc<MetricSpace>,
        y: Arc<MetricSpace>,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let rows = (0..x.len())
            .map(|i| (0..y.len()).map(|j| f(i, j)).collect())
            .collect();
        Self::new(x, y, rows)
    }

    /// Convenience constructor over discrete spaces (all distances 1).
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nx = rows.len();
        let ny = rows.first().map_or(0, Vec::len);
        let x = Arc::new(MetricSpace::discrete(nx)?);
        let y = Arc::new(MetricSpace::discrete(ny)?);
        Self::new(x, y, rows)
    }

    pub fn x_space(&self) -> &Arc<MetricSpace> {
        &self.x
    }

    pub fn y_space(&self) -> &Arc<MetricSpace> {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let ny = self.ny();
        &self.values[i * ny..(i + 1) * ny]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.nx()).map(|i| self.row(i).to_vec()).collect()
    }

    /// `f(x0, ·)` as a field on `Y`.
    pub fn row_field(&self, i: usize) -> ScalarField {
        ScalarField::from_fn(self.y.clone(), |j| self.get(i, j))
    }

    /// `f(·, y0)` as a field on `X`.
    pub fn column_field(&self, j: usize) -> ScalarField {
        ScalarField::from_fn(self.x.clone(), |i| self.get(i, j))
    }

    fn check_fields(&self, on_x: &ScalarField, on_y: &ScalarField) -> Result<()> {
        if on_x.len() != self.nx() || on_y.len() != self.ny() {
            return Err(Error::input(
                "perturbation fields do not match the payoff shape",
            ));
        }
        if on_x
            .values()
            .iter()
            .chain(on_y.values())
            .any(|v| !v.is_finite())
        {
            return Err(Error::input("perturbation fields must be finite"));
        }
        Ok(())
    }

    /// `f(x,y) − minus_x(x) + plus_y(y)`, evaluated left to right.
    pub fn perturbed(&self, minus_x: &ScalarField, plus_y: &ScalarField) -> Result<BiFunction> {
        self.check_fields(minus_x, plus_y)?;
        Ok(self.map_cells(|i, j, f| f - minus_x.get(i) + plus_y.get(j)))
    }

    /// `f(x,y) + s(x) + u(y)`.
    pub fn shifted(&self, s: &ScalarField, u: &ScalarField) -> Result<BiFunction> {
        self.check_fields(s, u)?;
        Ok(self.map_cells(|i, j, f| f + s.get(i) + u.get(j)))
    }

    /// `f(x,y) + z(x,y)` for a finite joint table `z`.
    pub fn plus_joint(&self, z: &BiFunction) -> Result<BiFunction> {
        if z.nx() != self.nx() || z.ny() != self.ny() {
            return Err(Error::input(
                "joint perturbation does not match the payoff shape",
            ));
        }
        if z.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("joint perturbation must be finite"));
        }
        Ok(self.map_cells(|i, j, f| f + z.get(i, j)))
    }

    fn map_cells(&self, op: impl Fn(usize, usize, f64) -> f64) -> BiFunction {
        let ny = self.ny();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &f)| op(k / ny, k % ny, f))
            .collect();
        BiFunction {
            x: self.x.clone(),
            y: self.y.clone(),
            values,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup-norm distance between two tables of equal shape.
    pub fn sup_distance(&self, other: &BiFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// The duality gap `W − V`; `Undefined` for `∞ − ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gap {
    Value(#[serde(with = "ext::scalar")] f64),
    Undefined,
}

impl Gap {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Gap::Value(v) => Some(v),
            Gap::Undefined => None,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        self.value().filter(|v| v.is_finite())
    }

    pub fn is_zero_within(&self, tol: f64) -> bool {
        self.finite().is_some_and(|d| d.abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSummary {
    /// `v(x) = inf_y f(x,y)`.
    #[serde(with = "ext::vec")]
    pub v: Vec<f64>,
    /// `w(y) = sup_x f(x,y)`.
    #[serde(with = "ext::vec")]
    pub w: Vec<f64>,
    /// `V = sup v`, the supinf value.
    #[serde(with = "ext::scalar")]
    pub lower_value: f64,
    /// `W = inf w`, the infsup value.
    #[serde(with = "ext::scalar")]
    pub upper_value: f64,
    pub gap: Gap,
    /// Maximizers of `v`, by index.
    pub sup_argset: Vec<usize>,
    /// Minimizers of `w`, by index.
    pub inf_argset: Vec<usize>,
}

pub fn summarize(f: &BiFunction) -> MinimaxSummary {
    let v: Vec<f64> = (0..f.nx())
        .map(|i| f.row(i).iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut w = vec![f64::NEG_INFINITY; f.ny()];
    for i in 0..f.nx() {
        for (wj, &fij) in w.iter_mut().zip(f.row(i)) {
            *wj = wj.max(fij);
        }
    }
    let lower_value = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let upper_value = w.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = match ext::ext_sub(upper_value, lower_value) {
        Some(d) => Gap::Value(d),
        None => Gap::Undefined,
    };
    let sup_argset = (0..v.len()).filter(|&i| v[i] == lower_value).collect();
    let inf_argset = (0..w.len()).filter(|&j| w[j] == upper_value).collect();
    MinimaxSummary {
        v,
        w,
        lower_value,
        upper_value,
        gap,
        sup_argset,
        inf_argset,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionVerdict {
    pub holds: bool,
    /// True when the assumption holds automatically (semicontinuity on a
    /// finite space).
    pub vacuous: bool,
    pub detail: String,
}

/// Verdicts for the four standing assumptions: usc of `f(·,y)`, `v` bounded
/// above and proper, lsc of `f(x,·)`, `w` bounded below and proper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub a1: AssumptionVerdict,
    pub a2: AssumptionVerdict,
    pub a3: AssumptionVerdict,
    pub a4: AssumptionVerdict,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.a1.holds && self.a2.holds && self.a3.holds && self.a4.holds
    }

    /// The two assumptions the supinf side needs.
    pub fn supinf_ok(&self) -> bool {
        self.a1.holds && self.a2.holds
    }

    pub fn infsup_ok(&self) -> bool {
        self.a3.holds && self.a4.holds
    }
}

pub fn check_assumptions(f: &BiFunction) -> AssumptionReport {
    check_assumptions_from(&summarize(f))
}

pub fn check_assumptions_from(s: &MinimaxSummary) -> AssumptionReport {
    let vacuous = |what: &str| AssumptionVerdict {
        holds: true,
        vacuous: true,
        detail: format!("{what} is automatic on a finite space"),
    };
    let a2 = if let Some(i) = s.v.iter().position(|&v| v == f64::INFINITY) {
        AssumptionVerdict {
            holds: false,
            vacuous: false,
            detail: format!("v(x{}) = +inf: v is not bounded above", i + 1),
        }
    } else if let Some(i) = s.v.iter().position(|v| v.is_finite()) {
        AssumptionVerdict {
            holds: true,
            vacuous: false,
            detail: format!("v bounded above by {}; finite at x{}", s.lower_value, i + 1),
        }
    } else {
        AssumptionVerdict {
            holds: false,
            vacuous: false,
            detail: "v is -inf everywhere: not proper".to_string(),
        }
    };
    let a4 = if let Some(j) = s.w.iter().position(|&w| w == f64::NEG_INFINITY) {
        AssumptionVerdict {
            holds: false,
            vacuous: false,
            detail: format!("w(y{}) = -inf: w is not bounded below", j + 1),
        }
    } else if let Some(j) = s.w.iter().position(|w| w.is_finite()) {
        AssumptionVerdict {
            holds: true,
            vacuous: false,
            detail: format!("w bounded below by {}; finite at y{}", s.upper_value, j + 1),
        }
    } else {
        AssumptionVerdict {
            holds: false,
            vacuous: false,
            detail: "w is +inf everywhere: not proper".to_string(),
        }
    };
    AssumptionReport {
        a1: vacuous("upper semicontinuity of f(., y)"),
        a2,
        a3: vacuous("lower semicontinuity of f(x, .)"),
        a4,
    }
}

/// Proof that `(x0,y0)` is a saddle point: `f(x,y0) ≤ f(x0,y0) ≤ f(x0,y)`
/// for every `x` and `y`, up to `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleCertificate {
    pub point: (usize, usize),
    pub value: f64,
    pub checked_rows: usize,
    pub checked_cols: usize,
    pub tolerance: f64,
    /// `V = v(x0)` at a saddle; equal to `value`.
    pub lower_value: f64,
    /// `W = w(y0)` at a saddle; equal to `value`.
    pub upper_value: f64,
}

/// Which half of the saddle inequality failed first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "side")]
pub enum SaddleViolation {
    /// `f(x, y0) > f(x0, y0)`: the maximizer would deviate to `x`.
    Row {
        x: usize,
        #[serde(with = "ext::scalar")]
        deviation: f64,
        value: f64,
    },
    /// `f(x0, y) < f(x0, y0)`: the minimizer would deviate to `y`.
    Column {
        y: usize,
        #[serde(with = "ext::scalar")]
        deviation: f64,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum SaddleCheck {
    Certified(SaddleCertificate),
    Refused(SaddleViolation),
}

impl SaddleCheck {
    pub fn is_certified(&self) -> bool {
        matches!(self, SaddleCheck::Certified(_))
    }

    pub fn certificate(&self) -> Option<&SaddleCertificate> {
        match self {
            SaddleCheck::Certified(c) => Some(c),
            SaddleCheck::Refused(_) => None,
        }
    }
}

/// Exhaustive two-sided saddle check at `(x0, y0)`.
pub fn is_saddle(f: &BiFunction, x0: usize, y0: usize, tol: f64) -> Result<SaddleCheck> {
    if x0 >= f.nx() || y0 >= f.ny() {
        return Err(Error::input(format!("point ({x0},{y0}) out of range")));
    }
    let value = f.get(x0, y0);
    if !value.is_finite() {
        return Err(Error::input("saddle value must be finite"));
    }
    for x in 0..f.nx() {
        let dev = f.get(x, y0);
        if dev > value + tol {
            return Ok(SaddleCheck::Refused(SaddleViolation::Row {
                x,
                deviation: dev,
                value,
            }));
        }
    }
    for (y, &dev) in f.row(x0).iter().enumerate() {
        if dev < value - tol {
            return Ok(SaddleCheck::Refused(SaddleViolation::Column {
                y,
                deviation: dev,
                value,
            }));
        }
    }
    Ok(SaddleCheck::Certified(SaddleCertificate {
        point: (x0, y0),
        value,
        checked_rows: f.nx(),
        checked_cols: f.ny(),
        tolerance: tol,
        lower_value: value,
        upper_value: value,
    }))
}

/// All saddle points in lexicographic order.
///
/// Uses the characterization `v(x0) ≥ f(x0,y0) − tol` and
/// `w(y0) ≤ f(x0,y0) + tol`, which is the two-sided check with the row and
/// column extrema precomputed.
pub fn enumerate_saddles(f: &BiFunction, tol: f64) -> Vec<SaddleCertificate> {
    enumerate_saddles_with(f, &summarize(f), tol)
}

pub fn enumerate_saddles_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    tol: f64,
) -> Vec<SaddleCertificate> {
    let mut out = Vec::new();
    for x0 in 0..f.nx() {
        for y0 in 0..f.ny() {
            let value = f.get(x0, y0);
            if value.is_finite() && s.v[x0] >= value - tol && s.w[y0] <= value + tol {
                out.push(SaddleCertificate {
                    point: (x0, y0),
                    value,
                    checked_rows: f.nx(),
                    checked_cols: f.ny(),
                    tolerance: tol,
                    lower_value: value,
                    upper_value: value,
                });
            }
        }
    }
    out
}

/// The ε-saddle set, which is a product `xs × ys`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSaddleSet {
    pub eps: f64,
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

impl EpsSaddleSet {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.xs.binary_search(&x).is_ok() && self.ys.binary_search(&y).is_ok()
    }

    pub fn members(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.xs
            .iter()
            .flat_map(move |&x| self.ys.iter().map(move |&y| (x, y)))
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Diameter in the product max-metric.
    pub fn diameter(&self, x: &MetricSpace, y: &MetricSpace) -> f64 {
        x.diameter(&self.xs).max(y.diameter(&self.ys))
    }
}

/// Lower cut used for ε-saddle membership on the `x` side.
pub(crate) fn x_eps_threshold(lower_value: f64, eps: f64) -> f64 {
    lower_value - eps / 3.0
}

pub(crate) fn y_eps_threshold(upper_value: f64, eps: f64) -> f64 {
    upper_value + eps / 3.0
}

/// Pairs with `v(x) > V − ε/3` and `w(y) < W + ε/3`; defined only when the
/// gap vanishes.
pub fn eps_saddle_set(f: &BiFunction, eps: f64, tol: f64) -> Result<EpsSaddleSet> {
    eps_saddle_set_with(&summarize(f), eps, tol)
}

pub fn eps_saddle_set_with(s: &MinimaxSummary, eps: f64, tol: f64) -> Result<EpsSaddleSet> {
    if !(eps > 0.0) {
        return Err(Error::input(format!("ε must be positive, got {eps}")));
    }
    if !s.gap.is_zero_within(tol) {
        return Err(Error::precondition(format!(
            "ε-saddle requires zero gap (Δ = {})",
            gap_display(s.gap)
        )));
    }
    let xcut = x_eps_threshold(s.lower_value, eps);
    let ycut = y_eps_threshold(s.upper_value, eps);
    Ok(EpsSaddleSet {
        eps,
        xs: (0..s.v.len()).filter(|&i| s.v[i] > xcut).collect(),
        ys: (0..s.w.len()).filter(|&j| s.w[j] < ycut).collect(),
    })
}

pub fn gap_display(g: Gap) -> String {
    match g {
        Gap::Value(v) => ext::fmt_ext(v),
        Gap::Undefined => "undefined".to_string(),
    }
}

/// `f(x,y) = x − y` sampled on `(0,1) × (0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub n: usize,
    pub x_grid: GridSpec,
    pub y_grid: GridSpec,
    pub summary: MinimaxSummary,
    /// Lexicographically first grid saddle.
    pub saddle: SaddleCertificate,
    pub saddle_coords: (f64, f64),
    /// Max-metric distance from the grid saddle to the excluded corner
    /// `(1,1)`, as the exact lattice fraction `(numer, denom)`.
    pub corner_distance_exact: (i64, i64),
    pub corner_distance: f64,
}

pub fn discretized_counterexample(n: usize) -> Result<CounterexampleReport> {
    let x_grid = GridSpec::new(0.0, 1.0, true, true, n);
    let y_grid = GridSpec::new(0.0, 1.0, true, false, n);
    let xs = Arc::new(build_grid(&x_grid)?);
    let ys = Arc::new(build_grid(&y_grid)?);
    let (xc, yc) = (xs.coords().unwrap().to_vec(), ys.coords().unwrap().to_vec());
    let f = BiFunction::from_fn(xs, ys, |i, j| xc[i] - yc[j])?;
    let summary = summarize(&f);
    let saddle = enumerate_saddles_with(&f, &summary, 0.0)
        .into_iter()
        .next()
        .ok_or_else(|| Error::verification("discretized x − y has no grid saddle"))?;
    let (i, j) = saddle.point;
    let one = Ratio::from_integer(1);
    let dist = (one - x_grid.position(i)).max(one - y_grid.position(j));
    Ok(CounterexampleReport {
        n,
        x_grid,
        y_grid,
        saddle_coords: (xc[i], yc[j]),
        corner_distance_exact: (*dist.numer(), *dist.denom()),
        corner_distance: *dist.numer() as f64 / *dist.denom() as f64,
        summary,
        saddle,
    })
}
