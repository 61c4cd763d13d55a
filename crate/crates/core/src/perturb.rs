//! Explicit perturbations that turn near-optimal points into exact optima.
//!
//! Every construction here is closed-form on a finite space: a
//! `max(0, value gap)` base that levels the function at the anchor, plus
//! distance bumps where strictness is needed. Each constructor re-checks its
//! own postconditions against the perturbed table and returns
//! [`Error::Verification`] if they fail.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimax::{
    check_assumptions_from, is_saddle, summarize, x_eps_threshold, y_eps_threshold, BiFunction,
    MinimaxSummary, SaddleCertificate, SaddleCheck,
};
use crate::space::{bump, nested_base_value, MetricSpace, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Equal,
    Less,
    LessEq,
}

/// A sup-norm bound together with the expression it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub relation: Relation,
    pub bound: f64,
    pub expression: String,
}

impl Budget {
    fn new(relation: Relation, bound: f64, expression: impl Into<String>) -> Self {
        Budget {
            relation,
            bound,
            expression: expression.into(),
        }
    }

    pub fn admits(&self, norm: f64) -> bool {
        match self.relation {
            Relation::Equal => norm == self.bound,
            Relation::Less => norm < self.bound,
            Relation::LessEq => norm <= self.bound,
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self.relation {
            Relation::Equal => "=",
            Relation::Less => "<",
            Relation::LessEq => "<=",
        }
    }
}

/// A nonnegative finite function on one axis, vanishing at its anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub axis: Axis,
    pub field: ScalarField,
    pub anchor: usize,
    pub norm: f64,
    pub budget: Budget,
    /// Name of the construction that produced this perturbation.
    pub construction: &'static str,
}

impl Perturbation {
    fn build(
        axis: Axis,
        field: ScalarField,
        anchor: usize,
        budget: Budget,
        construction: &'static str,
    ) -> Result<Self> {
        let p = Perturbation {
            axis,
            norm: field.max().max(0.0),
            field,
            anchor,
            budget,
            construction,
        };
        p.verify()?;
        Ok(p)
    }

    pub fn zeros(
        axis: Axis,
        space: Arc<MetricSpace>,
        anchor: usize,
        construction: &'static str,
    ) -> Self {
        Perturbation {
            axis,
            field: ScalarField::zeros(space),
            anchor,
            norm: 0.0,
            budget: Budget::new(Relation::LessEq, 0.0, "0"),
            construction,
        }
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn is_zero(&self) -> bool {
        self.field.values().iter().all(|&v| v == 0.0)
    }

    /// Nonnegativity, zero at the anchor, exact norm and budget relation.
    pub fn verify(&self) -> Result<()> {
        let vals = self.field.values();
        if let Some(i) = vals.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::verification(format!(
                "{}: value {} at point {} is not finite and nonnegative",
                self.construction, vals[i], i
            )));
        }
        if vals[self.anchor] != 0.0 {
            return Err(Error::verification(format!(
                "{}: value at anchor is {}",
                self.construction, vals[self.anchor]
            )));
        }
        if self.norm != self.field.max() {
            return Err(Error::verification(format!(
                "{}: recorded norm {} differs from max {}",
                self.construction,
                self.norm,
                self.field.max()
            )));
        }
        if !self.budget.admits(self.norm) {
            return Err(Error::verification(format!(
                "{}: norm {} violates budget {} {} ({})",
                self.construction,
                self.norm,
                self.budget.symbol(),
                self.budget.bound,
                self.budget.expression
            )));
        }
        Ok(())
    }

    /// Pointwise sum of two perturbations on the same axis and anchor.
    fn sum(
        a: &Perturbation,
        b: &Perturbation,
        budget: Budget,
        construction: &'static str,
    ) -> Result<Perturbation> {
        debug_assert_eq!(a.axis, b.axis);
        debug_assert_eq!(a.anchor, b.anchor);
        Perturbation::build(
            a.axis,
            a.field.add(&b.field)?,
            a.anchor,
            budget,
            construction,
        )
    }
}

/// Perturbations on both axes and the perturbed payoff
/// `combined = f − on_x + on_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationPair {
    pub on_x: Perturbation,
    pub on_y: Perturbation,
    pub combined: BiFunction,
}

impl PerturbationPair {
    pub const CONVENTION: &'static str = "f(x,y) - on_x(x) + on_y(y)";

    fn new(f: &BiFunction, on_x: Perturbation, on_y: Perturbation) -> Result<Self> {
        let combined = f.perturbed(&on_x.field, &on_y.field)?;
        Ok(PerturbationPair {
            on_x,
            on_y,
            combined,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.on_x.is_zero() && self.on_y.is_zero()
    }
}

fn check_index(len: usize, i: usize, what: &str) -> Result<()> {
    if i < len {
        Ok(())
    } else {
        Err(Error::input(format!(
            "{what} index {i} out of range ({len} points)"
        )))
    }
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Levels `f1` at `f1(x0)`: `h(x) = max(0, f1(x0) − f1(x))`, so that
/// `f1 + h = max(f1, f1(x0))` is minimized at `x0` and
/// `‖h‖ = f1(x0) − inf f1` exactly.
pub fn kr_min_perturbation(f1: &ScalarField, x0: usize, tol: f64) -> Result<Perturbation> {
    kr_min_on(f1, x0, Axis::X, tol)
}

fn kr_min_on(f1: &ScalarField, x0: usize, axis: Axis, tol: f64) -> Result<Perturbation> {
    check_index(f1.len(), x0, "anchor")?;
    let at = f1.get(x0);
    if at == f64::INFINITY {
        return Err(Error::precondition(format!(
            "x0 not in domain: f({}) = +inf",
            x0 + 1
        )));
    }
    if let Some(i) = f1.values().iter().position(|&v| v == f64::NEG_INFINITY) {
        return Err(Error::precondition(format!(
            "not bounded below: f({}) = -inf",
            i + 1
        )));
    }
    let inf = f1.min();
    let field = ScalarField::from_fn(f1.space().clone(), |x| (at - f1.get(x)).max(0.0));
    let h = Perturbation::build(
        axis,
        field,
        x0,
        Budget::new(Relation::Equal, at - inf, "f(x0) - inf f"),
        "kr-min",
    )?;
    for (x, (&fx, &hx)) in f1.values().iter().zip(h.values()).enumerate() {
        if fx + hx < at - tol {
            return Err(Error::verification(format!(
                "kr-min: (f+h)({}) = {} below the anchor value {}",
                x + 1,
                fx + hx,
                at
            )));
        }
    }
    Ok(h)
}

/// [`kr_min_perturbation`] plus a distance bump of amplitude `ε`, making
/// `x0` the strict (strong) minimizer of `f1 + h` with
/// `‖h‖ ≤ f1(x0) − inf f1 + ε/2 < f1(x0) − inf f1 + ε`.
pub fn kr_strong_min_perturbation(
    f1: &ScalarField,
    x0: usize,
    eps: f64,
    tol: f64,
) -> Result<Perturbation> {
    check_positive(eps, "ε")?;
    let base = kr_min_on(f1, x0, Axis::X, tol)?;
    let b = bump(f1.space(), x0, eps)?;
    let h = Perturbation::build(
        Axis::X,
        base.field.add(&b)?,
        x0,
        Budget::new(Relation::Less, base.norm + eps, "f(x0) - inf f + eps"),
        "kr-strong-min",
    )?;
    let at = f1.get(x0);
    for x in 0..f1.len() {
        if x == x0 {
            continue;
        }
        let lifted = f1.get(x) + h.field.get(x);
        if !(lifted > at) {
            if b.get(x) > 0.0 && at + b.get(x) == at {
                return Err(Error::precondition(format!(
                    "ε = {eps} is below floating resolution at f(x0) = {at}"
                )));
            }
            return Err(Error::verification(format!(
                "kr-strong-min: (f+h)({}) = {lifted} does not exceed f(x0) = {at}",
                x + 1
            )));
        }
    }
    Ok(h)
}

fn require_finite_value(f: &BiFunction, x0: usize, y0: usize) -> Result<f64> {
    check_index(f.nx(), x0, "x0")?;
    check_index(f.ny(), y0, "y0")?;
    let c = f.get(x0, y0);
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::precondition(format!(
            "f(x{}, y{}) must be finite, got {c}",
            x0 + 1,
            y0 + 1
        )))
    }
}

/// Makes `(x0, y0)` solve the supinf problem of `f − q + p`.
///
/// `q(x) = max(0, v(x) − v(x0))` lifts `x0` to the top of `v`, and
/// `p(y) = max(0, f(x0,y0) − f(x0,y))` levels the row of `x0` so that its
/// infimum is attained at `y0`. Returns `(q, p)` in a pair.
pub fn supinf_perturbation(
    f: &BiFunction,
    x0: usize,
    y0: usize,
    eps: f64,
    delta: f64,
    tol: f64,
) -> Result<PerturbationPair> {
    supinf_with(f, &summarize(f), x0, y0, eps, delta, tol)
}

fn supinf_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    x0: usize,
    y0: usize,
    eps: f64,
    delta: f64,
    tol: f64,
) -> Result<PerturbationPair> {
    check_positive(eps, "ε")?;
    check_positive(delta, "δ")?;
    let c = require_finite_value(f, x0, y0)?;
    let report = check_assumptions_from(s);
    if !report.supinf_ok() {
        return Err(Error::precondition(format!(
            "(A2) fails: {}",
            report.a2.detail
        )));
    }
    let vx0 = s.v[x0];
    let big_v = s.lower_value;
    if !(vx0 > big_v - eps) {
        return Err(Error::precondition(format!(
            "x0 not ε-optimal: v(x0) = {vx0} <= V - ε = {}",
            big_v - eps
        )));
    }
    if !(c < vx0 + delta) {
        return Err(Error::precondition(format!(
            "y0 not δ-optimal: f(x0,y0) = {c} >= v(x0) + δ = {}",
            vx0 + delta
        )));
    }
    let xs = f.x_space().clone();
    let ys = f.y_space().clone();
    let q = Perturbation::build(
        Axis::X,
        ScalarField::from_fn(xs, |x| (s.v[x] - vx0).max(0.0)),
        x0,
        Budget::new(Relation::Less, eps, "eps"),
        "supinf",
    )?;
    let p = Perturbation::build(
        Axis::Y,
        ScalarField::from_fn(ys, |y| (c - f.get(x0, y)).max(0.0)),
        y0,
        Budget::new(Relation::Less, delta, "delta"),
        "supinf",
    )?;
    let pair = PerturbationPair::new(f, q, p)?;
    let t = summarize(&pair.combined);
    if (t.v[x0] - c).abs() > tol || (t.lower_value - c).abs() > tol {
        return Err(Error::verification(format!(
            "supinf: perturbed v(x0) = {}, V = {}, expected {c}",
            t.v[x0], t.lower_value
        )));
    }
    Ok(pair)
}

/// Makes `(x0, y0)` solve the infsup problem of `f − h + g`; the mirror of
/// [`supinf_perturbation`]. Returns `(h, g)` in a pair.
pub fn infsup_perturbation(
    f: &BiFunction,
    x0: usize,
    y0: usize,
    eps: f64,
    delta: f64,
    tol: f64,
) -> Result<PerturbationPair> {
    infsup_with(f, &summarize(f), x0, y0, eps, delta, tol)
}

fn infsup_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    x0: usize,
    y0: usize,
    eps: f64,
    delta: f64,
    tol: f64,
) -> Result<PerturbationPair> {
    check_positive(eps, "ε")?;
    check_positive(delta, "δ")?;
    let c = require_finite_value(f, x0, y0)?;
    let report = check_assumptions_from(s);
    if !report.infsup_ok() {
        return Err(Error::precondition(format!(
            "(A4) fails: {}",
            report.a4.detail
        )));
    }
    let wy0 = s.w[y0];
    let big_w = s.upper_value;
    if !(wy0 < big_w + eps) {
        return Err(Error::precondition(format!(
            "y0 not ε-optimal: w(y0) = {wy0} >= W + ε = {}",
            big_w + eps
        )));
    }
    if !(c > wy0 - delta) {
        return Err(Error::precondition(format!(
            "x0 not δ-optimal: f(x0,y0) = {c} <= w(y0) - δ = {}",
            wy0 - delta
        )));
    }
    let xs = f.x_space().clone();
    let ys = f.y_space().clone();
    let h = Perturbation::build(
        Axis::X,
        ScalarField::from_fn(xs, |x| (f.get(x, y0) - c).max(0.0)),
        x0,
        Budget::new(Relation::Less, delta, "delta"),
        "infsup",
    )?;
    let g = Perturbation::build(
        Axis::Y,
        ScalarField::from_fn(ys, |y| (wy0 - s.w[y]).max(0.0)),
        y0,
        Budget::new(Relation::Less, eps, "eps"),
        "infsup",
    )?;
    let pair = PerturbationPair::new(f, h, g)?;
    let t = summarize(&pair.combined);
    if (t.w[y0] - c).abs() > tol || (t.upper_value - c).abs() > tol {
        return Err(Error::verification(format!(
            "infsup: perturbed w(y0) = {}, W = {}, expected {c}",
            t.w[y0], t.upper_value
        )));
    }
    Ok(pair)
}

/// Output of [`saddle_perturbation`]: `k = q + h`, `r = p + g`, and the
/// certificate that `(x0,y0)` is a saddle of `f − k + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePerturbation {
    pub pair: PerturbationPair,
    pub supinf: PerturbationPair,
    pub infsup: PerturbationPair,
    /// `ε′ + ε″ + Δ`, the inner δ handed to both halves.
    pub delta: f64,
    pub gap: f64,
    pub certificate: SaddleCertificate,
}

impl SaddlePerturbation {
    /// True when `(x0,y0)` was already a saddle and nothing had to move.
    pub fn degenerate(&self) -> bool {
        self.pair.is_zero()
    }
}

/// Perturbs `f` into `f − k + r` with a saddle at `(x0, y0)`, where
/// `‖k‖ < 2ε′ + ε″ + Δ` and `‖r‖ < ε′ + 2ε″ + Δ`.
pub fn saddle_perturbation(
    f: &BiFunction,
    x0: usize,
    y0: usize,
    eps1: f64,
    eps2: f64,
    tol: f64,
) -> Result<SaddlePerturbation> {
    saddle_perturbation_with(f, &summarize(f), x0, y0, eps1, eps2, tol)
}

/// [`saddle_perturbation`] reusing a precomputed summary of `f`.
pub fn saddle_perturbation_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    x0: usize,
    y0: usize,
    eps1: f64,
    eps2: f64,
    tol: f64,
) -> Result<SaddlePerturbation> {
    check_positive(eps1, "ε′")?;
    check_positive(eps2, "ε″")?;
    require_finite_value(f, x0, y0)?;
    let report = check_assumptions_from(s);
    if !report.all_hold() {
        return Err(Error::precondition(format!(
            "assumptions fail: (A2) {}; (A4) {}",
            report.a2.detail, report.a4.detail
        )));
    }
    let gap = s
        .gap
        .finite()
        .ok_or_else(|| Error::precondition("duality gap is not finite"))?;
    if !(s.v[x0] > s.lower_value - eps1) {
        return Err(Error::precondition(format!(
            "v(x0) > V - ε′ fails: {} <= {}",
            s.v[x0],
            s.lower_value - eps1
        )));
    }
    if !(s.w[y0] < s.upper_value + eps2) {
        return Err(Error::precondition(format!(
            "w(y0) < W + ε″ fails: {} >= {}",
            s.w[y0],
            s.upper_value + eps2
        )));
    }
    let delta = eps1 + eps2 + gap;
    // Both halves' δ-optimality conditions follow from the ε conditions
    // above, so a refusal here is a bug.
    let internal = |e: Error| match e {
        Error::Precondition(m) => Error::verification(format!("derived precondition failed: {m}")),
        other => other,
    };
    let supinf = supinf_with(f, s, x0, y0, eps1, delta, tol).map_err(internal)?;
    let infsup = infsup_with(f, s, x0, y0, eps2, delta, tol).map_err(internal)?;
    let k = Perturbation::sum(
        &supinf.on_x,
        &infsup.on_x,
        Budget::new(
            Relation::Less,
            2.0 * eps1 + eps2 + gap,
            "2 eps1 + eps2 + gap",
        ),
        "minimax",
    )?;
    let r = Perturbation::sum(
        &supinf.on_y,
        &infsup.on_y,
        Budget::new(
            Relation::Less,
            eps1 + 2.0 * eps2 + gap,
            "eps1 + 2 eps2 + gap",
        ),
        "minimax",
    )?;
    let pair = PerturbationPair::new(f, k, r)?;
    let certificate = match is_saddle(&pair.combined, x0, y0, tol)? {
        SaddleCheck::Certified(c) => c,
        SaddleCheck::Refused(v) => {
            return Err(Error::verification(format!(
                "f - k + r has no saddle at the anchor: {v:?}"
            )))
        }
    };
    Ok(SaddlePerturbation {
        pair,
        supinf,
        infsup,
        delta,
        gap,
        certificate,
    })
}

/// Relocates the saddle to an ε-saddle point with both norms below `ε`
/// (inner parameters `ε′ = ε″ = ε/3`); requires zero gap.
pub fn eps_saddle_perturbation(
    f: &BiFunction,
    x0: usize,
    y0: usize,
    eps: f64,
    tol: f64,
) -> Result<SaddlePerturbation> {
    eps_saddle_perturbation_with(f, &summarize(f), x0, y0, eps, tol)
}

pub fn eps_saddle_perturbation_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    x0: usize,
    y0: usize,
    eps: f64,
    tol: f64,
) -> Result<SaddlePerturbation> {
    check_positive(eps, "ε")?;
    check_index(f.nx(), x0, "x0")?;
    check_index(f.ny(), y0, "y0")?;
    if !s.gap.is_zero_within(tol) {
        return Err(Error::precondition("ε-saddle requires zero gap"));
    }
    if !(s.v[x0] > x_eps_threshold(s.lower_value, eps)
        && s.w[y0] < y_eps_threshold(s.upper_value, eps))
    {
        return Err(Error::precondition(format!(
            "(x{}, y{}) is not an ε-saddle point for ε = {eps}",
            x0 + 1,
            y0 + 1
        )));
    }
    let third = eps / 3.0;
    let mut out = saddle_perturbation_with(f, s, x0, y0, third, third, tol)?;
    for p in [&mut out.pair.on_x, &mut out.pair.on_y] {
        p.budget = Budget::new(Relation::Less, eps, "eps");
        p.construction = "eps-saddle";
        p.verify()?;
    }
    Ok(out)
}

/// `δ·Σ_{n=1}^{N} 2⁻ⁿ·min(1, n·d)` in closed form, plus the bound on what
/// truncating at `N` terms drops from the infinite series.
///
/// With `M` the first index where `n·d ≥ 1`, the series is
/// `d·Σ_{n<M} n·2⁻ⁿ + 2^{−(M−1)}`; `Σ_{n=1}^{K} n·2⁻ⁿ = 2 − (K+2)·2⁻ᴷ`.
/// When `M ≤ N` the tail is summed exactly and nothing is dropped.
pub fn sharpener_value(d: f64, delta: f64, n_terms: u32) -> (f64, f64) {
    if d <= 0.0 {
        return (0.0, 0.0);
    }
    let n_terms = n_terms.clamp(1, MAX_SHARPENER_TERMS);
    let weighted = |k: u32| 2.0 - (k as f64 + 2.0) * 0.5f64.powi(k as i32);
    match first_saturated_index(d, n_terms) {
        Some(m) => {
            let k = m - 1;
            let head = if k == 0 { 0.0 } else { d * weighted(k) };
            (delta * (head + 0.5f64.powi(k as i32)), 0.0)
        }
        None => (
            delta * d * weighted(n_terms),
            delta * 0.5f64.powi(n_terms as i32),
        ),
    }
}

/// Hard cap on series terms; `2^-1074` is the smallest positive double.
pub const MAX_SHARPENER_TERMS: u32 = 1074;
pub const DEFAULT_SHARPENER_TERMS: u32 = 53;

/// Smallest `m ≤ limit` with `nested_base_value(d, m) == 1`, consistent with
/// the floating evaluation of `min(1, m·d)`.
fn first_saturated_index(d: f64, limit: u32) -> Option<u32> {
    let guess = (1.0 / d).ceil();
    if !(guess <= limit as f64 + 1.0) {
        return None;
    }
    let mut m = (guess as u32).max(1);
    while m > 1 && nested_base_value(d, m - 1) >= 1.0 {
        m -= 1;
    }
    while nested_base_value(d, m) < 1.0 {
        m += 1;
    }
    (m <= limit).then_some(m)
}

fn sharpener(
    axis: Axis,
    space: &Arc<MetricSpace>,
    anchor: usize,
    delta: f64,
    n_terms: u32,
) -> Result<(Perturbation, f64)> {
    let mut trunc = 0.0f64;
    let mut vals = Vec::with_capacity(space.len());
    for x in 0..space.len() {
        let (v, e) = sharpener_value(space.dist(x, anchor), delta, n_terms);
        trunc = trunc.max(e);
        vals.push(v);
    }
    let p = Perturbation::build(
        axis,
        ScalarField::new(space.clone(), vals)?,
        anchor,
        Budget::new(Relation::LessEq, delta, "delta"),
        "wellposed-sharpener",
    )?;
    if let Some(x) = (0..space.len()).find(|&x| x != anchor && p.field.get(x) <= 0.0) {
        return Err(Error::verification(format!(
            "sharpener vanishes away from the anchor at {}",
            x + 1
        )));
    }
    Ok((p, trunc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellPosedPerturbation {
    pub base: SaddlePerturbation,
    /// `k′` on `X` and `r′` on `Y`.
    pub sharpener_x: Perturbation,
    pub sharpener_y: Perturbation,
    /// `g = f − k + r − k′ + r′`.
    pub sharpened: BiFunction,
    pub delta: f64,
    pub n_terms: u32,
    /// Largest amount by which truncating the series lowers `k′` or `r′`.
    pub truncation_error: f64,
    pub certificate: SaddleCertificate,
}

/// Saddle perturbation followed by a strictly positive sharpening term on
/// each axis, so that `(x0, y0)` becomes the unique saddle of `g` and every
/// near-optimal point of `g` is close to it.
#[allow(clippy::too_many_arguments)]
pub fn wellposed_perturbation(
    f: &BiFunction,
    x0: usize,
    y0: usize,
    eps1: f64,
    eps2: f64,
    delta: f64,
    n_terms: u32,
    tol: f64,
) -> Result<WellPosedPerturbation> {
    check_positive(delta, "δ")?;
    let base = saddle_perturbation(f, x0, y0, eps1, eps2, tol)?;
    let (kx, ex) = sharpener(Axis::X, f.x_space(), x0, delta, n_terms)?;
    let (ry, ey) = sharpener(Axis::Y, f.y_space(), y0, delta, n_terms)?;
    let min_lift = kx
        .values()
        .iter()
        .chain(ry.values())
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min_lift.is_finite() && min_lift <= 2.0 * tol {
        return Err(Error::precondition(format!(
            "δ too small: smallest sharpening {min_lift} does not exceed twice the tolerance {tol}"
        )));
    }
    let sharpened = base.pair.combined.perturbed(&kx.field, &ry.field)?;
    let saddles = crate::minimax::enumerate_saddles(&sharpened, tol);
    let certificate = match saddles.as_slice() {
        [only] if only.point == (x0, y0) => only.clone(),
        other => {
            return Err(Error::verification(format!(
                "sharpened payoff has saddles {:?}, expected only ({x0},{y0})",
                other.iter().map(|c| c.point).collect::<Vec<_>>()
            )))
        }
    };
    Ok(WellPosedPerturbation {
        base,
        sharpener_x: kx,
        sharpener_y: ry,
        sharpened,
        delta,
        n_terms: n_terms.clamp(1, MAX_SHARPENER_TERMS),
        truncation_error: ex.max(ey),
        certificate,
    })
}

/// Minimizing perturbation of the indicator of `X ∖ A` at `x0 ∉ A`: the
/// result is 0 at `x0`, identically 1 on `A` and has norm 1, i.e. a
/// separating function for the pair `(x0, A)`.
pub fn characteristic_regularity_witness(
    space: &Arc<MetricSpace>,
    set: &[usize],
    x0: usize,
) -> Result<Perturbation> {
    check_index(space.len(), x0, "x0")?;
    if set.is_empty() {
        return Err(Error::input("set A is empty"));
    }
    for &a in set {
        check_index(space.len(), a, "set member")?;
    }
    if set.contains(&x0) {
        return Err(Error::input(format!("x0 = {} lies in A", x0 + 1)));
    }
    let indicator =
        ScalarField::from_fn(space.clone(), |x| if set.contains(&x) { 0.0 } else { 1.0 });
    let mut h = kr_min_on(&indicator, x0, Axis::X, 0.0)?;
    h.construction = "regularity-witness";
    if h.norm != 1.0 || set.iter().any(|&a| h.field.get(a) != 1.0) {
        return Err(Error::verification("witness is not identically 1 on A"));
    }
    Ok(h)
}

/// Sublevel sets `L_n = {h < 1/n}` of a strong-minimum perturbation of the
/// zero function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalBase {
    pub h: Vec<f64>,
    /// `sets[n-1] = L_n`.
    pub sets: Vec<Vec<usize>>,
    /// First `n` (1-based) with `L_n = {x0}`, if reached within the depth.
    pub singleton_from: Option<usize>,
}

pub fn local_base_sets(
    space: &Arc<MetricSpace>,
    x0: usize,
    eps: f64,
    depth: usize,
) -> Result<LocalBase> {
    if depth == 0 {
        return Err(Error::input("depth must be at least 1"));
    }
    let zero = ScalarField::zeros(space.clone());
    let h = kr_strong_min_perturbation(&zero, x0, eps, 0.0)?;
    let sets: Vec<Vec<usize>> = (1..=depth)
        .map(|n| {
            let cut = 1.0 / n as f64;
            (0..space.len()).filter(|&x| h.field.get(x) < cut).collect()
        })
        .collect();
    let singleton_from = sets
        .iter()
        .position(|s| s.as_slice() == [x0])
        .map(|i| i + 1);
    Ok(LocalBase {
        h: h.field.values().to_vec(),
        sets,
        singleton_from,
    })
}
