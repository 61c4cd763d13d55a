//! Finite-scale well-posedness diagnostics.
//!
//! On a finite space every sequence has finitely many values, so
//! convergence statements are recast quantitatively: sequences are judged
//! by their final tail against a tolerance, and well-posedness by how the
//! diameter of the ε-saddle set shrinks along a decreasing ε grid.
//!
//! Two sign conventions meet here. Relocating perturbations are built as
//! `f − k + r` ([`PerturbationPair::CONVENTION`]), while the solution map
//! works with `f + s + u`. Offsets stored in probe samples always use the
//! `+` convention; the conversion happens in one place,
//! [`separable_offset`].

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext;
use crate::minimax::{
    enumerate_saddles, enumerate_saddles_with, eps_saddle_set_with, gap_display, is_saddle,
    summarize, BiFunction, MinimaxSummary, SaddleCertificate, SaddleCheck,
};
use crate::perturb::{
    eps_saddle_perturbation_with, kr_min_perturbation, sharpener_value, Perturbation,
    PerturbationPair, DEFAULT_SHARPENER_TERMS,
};
use crate::space::{MetricSpace, ScalarField};

/// A finite sequence of points of `X × Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSequence {
    pub points: Vec<(usize, usize)>,
}

impl PairSequence {
    pub fn new(points: Vec<(usize, usize)>) -> Self {
        PairSequence { points }
    }

    pub fn constant(p: (usize, usize), len: usize) -> Self {
        PairSequence {
            points: vec![p; len],
        }
    }

    fn check(&self, f: &BiFunction) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::input("empty sequence"));
        }
        if let Some((n, p)) = self
            .points
            .iter()
            .enumerate()
            .find(|(_, (x, y))| *x >= f.nx() || *y >= f.ny())
        {
            return Err(Error::input(format!(
                "sequence term {n} = {p:?} is outside X × Y"
            )));
        }
        Ok(())
    }

    /// `(v(x_n), w(y_n), f(x_n, y_n))` for each term.
    pub fn evaluate(&self, f: &BiFunction, s: &MinimaxSummary) -> Vec<(f64, f64, f64)> {
        self.points
            .iter()
            .map(|&(x, y)| (s.v[x], s.w[y], f.get(x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceVerdict {
    pub holds: bool,
    /// Per-term error measured against the threshold.
    #[serde(with = "ext::vec")]
    pub errors: Vec<f64>,
    /// `envelope[n] = max_{m ≥ n} errors[m]`; nonincreasing.
    #[serde(with = "ext::vec")]
    pub envelope: Vec<f64>,
    pub threshold: f64,
    /// First index from which every term is within the threshold.
    pub settles_at: Option<usize>,
    /// First index whose error exceeds the threshold.
    pub first_violation: Option<usize>,
    pub reason: String,
}

impl SequenceVerdict {
    fn from_errors(errors: Vec<f64>, threshold: f64, what: &str) -> Self {
        let mut envelope = errors.clone();
        for n in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[n] = envelope[n].max(envelope[n + 1]);
        }
        let settles_at = (0..errors.len()).find(|&n| envelope[n] <= threshold);
        let first_violation = errors.iter().position(|&e| !(e <= threshold));
        let holds = settles_at.is_some();
        let reason = match (holds, settles_at) {
            (true, Some(n)) => format!("{what}: within {threshold} from term {n} on"),
            _ => format!(
                "{what}: final term error {} exceeds {threshold}",
                ext::fmt_ext(*errors.last().unwrap())
            ),
        };
        SequenceVerdict {
            holds,
            errors,
            envelope,
            threshold,
            settles_at,
            first_violation,
            reason,
        }
    }

    fn refused(len: usize, threshold: f64, reason: String) -> Self {
        SequenceVerdict {
            holds: false,
            errors: vec![f64::INFINITY; len],
            envelope: vec![f64::INFINITY; len],
            threshold,
            settles_at: None,
            first_violation: None,
            reason,
        }
    }
}

fn finite_gap(s: &MinimaxSummary) -> Result<f64> {
    s.gap.finite().ok_or_else(|| {
        Error::precondition(format!(
            "duality gap must be finite (Δ = {})",
            gap_display(s.gap)
        ))
    })
}

/// Optimizing for the saddle problem: `Δ = 0`, `v(x_n) → V`, `w(y_n) → W`.
///
/// The error of term `n` is `max(V − v(x_n), w(y_n) − W)`; the sequence
/// qualifies when its tail settles within `tol`.
pub fn is_optimizing(f: &BiFunction, seq: &PairSequence, tol: f64) -> Result<SequenceVerdict> {
    seq.check(f)?;
    let s = summarize(f);
    optimizing_with(f, &s, seq, tol)
}

fn optimizing_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    seq: &PairSequence,
    tol: f64,
) -> Result<SequenceVerdict> {
    let gap = finite_gap(s)?;
    if gap.abs() > tol {
        return Ok(SequenceVerdict::refused(
            seq.points.len(),
            tol,
            format!("gap Δ = {gap} is not zero"),
        ));
    }
    let errors = seq
        .evaluate(f, s)
        .into_iter()
        .map(|(v, w, _)| {
            let ex = ext::ext_sub(s.lower_value, v).unwrap_or(f64::INFINITY);
            let ey = ext::ext_sub(w, s.upper_value).unwrap_or(f64::INFINITY);
            ex.max(ey)
        })
        .collect();
    Ok(SequenceVerdict::from_errors(errors, tol, "optimizing"))
}

/// Maximinimizing: `w(y_n) − v(x_n) → 0`.
///
/// The threshold is `3·tol`, the slack an optimizing sequence can
/// accumulate (`V − v`, `w − W` and `Δ` each within `tol`), so that every
/// optimizing verdict implies a maximinimizing one; that implication is
/// re-checked on every call.
pub fn is_maximinimizing(f: &BiFunction, seq: &PairSequence, tol: f64) -> Result<SequenceVerdict> {
    seq.check(f)?;
    let s = summarize(f);
    finite_gap(&s)?;
    let errors = seq
        .evaluate(f, &s)
        .into_iter()
        .map(|(v, w, _)| ext::ext_sub(w, v).unwrap_or(f64::INFINITY))
        .collect();
    let verdict = SequenceVerdict::from_errors(errors, 3.0 * tol, "maximinimizing");
    let opt = optimizing_with(f, &s, seq, tol)?;
    if opt.holds && !verdict.holds {
        return Err(Error::verification(
            "optimizing sequence failed the maximinimizing check",
        ));
    }
    Ok(verdict)
}

/// Decreasing ε grid `10⁰, 10⁻¹, …, 10⁻⁸`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powi(-k)).collect()
}

/// Diameter of the ε-saddle set along a decreasing ε grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessModulus {
    pub eps_grid: Vec<f64>,
    pub diam: Vec<f64>,
    /// `(|xs|, |ys|)` of each ε-saddle set.
    pub sizes: Vec<(usize, usize)>,
    pub unique_solution: Option<(usize, usize)>,
    pub tolerance: f64,
}

impl WellPosednessModulus {
    pub fn is_nonincreasing(&self) -> bool {
        self.diam.windows(2).all(|w| w[1] <= w[0])
    }
}

pub fn modulus(f: &BiFunction, eps_grid: &[f64], tol: f64) -> Result<WellPosednessModulus> {
    modulus_with(f, &summarize(f), eps_grid, tol)
}

pub fn modulus_with(
    f: &BiFunction,
    s: &MinimaxSummary,
    eps_grid: &[f64],
    tol: f64,
) -> Result<WellPosednessModulus> {
    if eps_grid.is_empty() {
        return Err(Error::input("ε grid is empty"));
    }
    if eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite()))
        || eps_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::input(
            "ε grid must be positive and strictly decreasing",
        ));
    }
    let mut diam = Vec::with_capacity(eps_grid.len());
    let mut sizes = Vec::with_capacity(eps_grid.len());
    let mut last = None;
    for &eps in eps_grid {
        let set = eps_saddle_set_with(s, eps, tol)?;
        diam.push(set.diameter(f.x_space(), f.y_space()));
        sizes.push((set.xs.len(), set.ys.len()));
        last = Some(set);
    }
    let last = last.expect("grid is nonempty");
    let unique_solution = (last.len() == 1).then(|| (last.xs[0], last.ys[0]));
    Ok(WellPosednessModulus {
        eps_grid: eps_grid.to_vec(),
        diam,
        sizes,
        unique_solution,
        tolerance: tol,
    })
}

/// Sign convention of a perturbed payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `f(x,y) − k(x) + r(y)`.
    MinusPlus,
    /// `f(x,y) + s(x) + u(y)`.
    PlusPlus,
    /// `f(x,y) + z(x,y)`.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub convention: Convention,
    pub points: Vec<(usize, usize)>,
}

/// Saddle points of `f + s ⊕ u`.
pub fn solution_map(
    f: &BiFunction,
    s: &ScalarField,
    u: &ScalarField,
    tol: f64,
) -> Result<SolutionSet> {
    let g = f.shifted(s, u)?;
    Ok(SolutionSet {
        convention: Convention::PlusPlus,
        points: enumerate_saddles(&g, tol).iter().map(|c| c.point).collect(),
    })
}

/// Offsets `(Δs, Δu)` in the `+` convention that realize a `f − k + r`
/// relocation: `Δs = −k`, `Δu = r`.
pub fn separable_offset(pair: &PerturbationPair) -> (Vec<f64>, Vec<f64>) {
    (
        pair.on_x.values().iter().map(|v| -v).collect(),
        pair.on_y.values().to_vec(),
    )
}

/// Smallest slack in the saddle inequalities at `(x0, y0)`:
/// `min(f(x0,y0) − f(x,y0), f(x0,y) − f(x0,y0))` over `x ≠ x0`, `y ≠ y0`.
/// Infinite when both axes are singletons.
pub fn value_margin(f: &BiFunction, x0: usize, y0: usize) -> f64 {
    let c = f.get(x0, y0);
    let rows = (0..f.nx()).filter(|&x| x != x0).map(|x| c - f.get(x, y0));
    let cols = (0..f.ny()).filter(|&y| y != y0).map(|y| f.get(x0, y) - c);
    rows.chain(cols).fold(f64::INFINITY, f64::min)
}

/// A product neighbourhood `U × V` given by member indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub xs: Vec<usize>,
    pub ys: Vec<usize>,
}

impl Neighborhood {
    pub fn new(mut xs: Vec<usize>, mut ys: Vec<usize>) -> Self {
        xs.sort_unstable();
        xs.dedup();
        ys.sort_unstable();
        ys.dedup();
        Neighborhood { xs, ys }
    }

    pub fn point(x: usize, y: usize) -> Self {
        Neighborhood {
            xs: vec![x],
            ys: vec![y],
        }
    }

    /// Closed ball of radius `r` around `(x0,y0)` in the product max-metric.
    pub fn ball(f: &BiFunction, x0: usize, y0: usize, r: f64) -> Self {
        Neighborhood {
            xs: (0..f.nx())
                .filter(|&x| f.x_space().dist(x, x0) <= r)
                .collect(),
            ys: (0..f.ny())
                .filter(|&y| f.y_space().dist(y, y0) <= r)
                .collect(),
        }
    }

    pub fn contains(&self, (x, y): (usize, usize)) -> bool {
        self.xs.binary_search(&x).is_ok() && self.ys.binary_search(&y).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SampleOrigin {
    /// The unperturbed centre.
    Center,
    /// Relocation onto an ε-saddle candidate outside the target.
    Adversary { candidate: (usize, usize) },
    /// Uniform random offset.
    Random { trial: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Offset {
    /// `(Δs, Δu)` added as `f + s + Δs + u + Δu`.
    Separable { ds: Vec<f64>, du: Vec<f64> },
    /// `Δz` added as `f + z + Δz`.
    Joint { dz: Vec<Vec<f64>> },
}

impl Offset {
    /// Sup-norm of each component (`Joint` reports the same norm twice).
    pub fn norms(&self) -> (f64, f64) {
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        match self {
            Offset::Separable { ds, du } => (sup(ds), sup(du)),
            Offset::Joint { dz } => {
                let n = dz.iter().map(|r| sup(r)).fold(0.0f64, f64::max);
                (n, n)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub origin: SampleOrigin,
    pub offset: Offset,
    pub solutions: Vec<(usize, usize)>,
    pub escaped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum ProbeVerdict {
    Contained,
    /// `sample` indexes [`SolutionMapProbe::samples`].
    Escaped {
        sample: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionMapProbe {
    pub convention: Convention,
    pub rho: f64,
    pub seed: u64,
    pub trials: usize,
    pub target: Neighborhood,
    pub center_solutions: Vec<(usize, usize)>,
    /// Whether the relocation adversary ran (it needs zero gap).
    pub adversary_ran: bool,
    pub note: String,
    pub samples: Vec<ProbeSample>,
    pub verdict: ProbeVerdict,
    pub tolerance: f64,
}

impl SolutionMapProbe {
    pub fn witness(&self) -> Option<&ProbeSample> {
        match self.verdict {
            ProbeVerdict::Escaped { sample } => self.samples.get(sample),
            ProbeVerdict::Contained => None,
        }
    }

    pub fn escaped(&self) -> bool {
        matches!(self.verdict, ProbeVerdict::Escaped { .. })
    }
}

/// Relocating perturbation onto `(cx, cy)` followed by a sharpener using
/// half the spare budget, so the candidate becomes the unique saddle when
/// the budget allows. Returns `(k_total, r_total)` in the `−/+` convention.
fn relocate(
    g: &BiFunction,
    s: &MinimaxSummary,
    cx: usize,
    cy: usize,
    eps: f64,
    tol: f64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let sp = match eps_saddle_perturbation_with(g, s, cx, cy, eps, tol) {
        Ok(sp) => sp,
        Err(Error::Precondition(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (mut k, mut r) = separable_offset(&sp.pair);
    k.iter_mut().for_each(|v| *v = -*v);
    let spare = eps - sp.pair.on_x.norm.max(sp.pair.on_y.norm);
    let sharpen = spare / 2.0;
    if sharpen > 0.0 {
        let add = |vals: &mut [f64], space: &MetricSpace, anchor: usize| {
            for (i, v) in vals.iter_mut().enumerate() {
                *v += sharpener_value(space.dist(i, anchor), sharpen, DEFAULT_SHARPENER_TERMS).0;
            }
        };
        add(&mut k, g.x_space(), cx);
        add(&mut r, g.y_space(), cy);
    }
    Ok(Some((k, r)))
}

fn candidates_outside(
    g: &BiFunction,
    s: &MinimaxSummary,
    eps: f64,
    target: &Neighborhood,
    reference: (usize, usize),
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    let set = eps_saddle_set_with(s, eps, tol)?;
    let (rx, ry) = reference;
    let mut c: Vec<(usize, usize)> = set.members().filter(|&p| !target.contains(p)).collect();
    let d = |(x, y): (usize, usize)| g.x_space().dist(x, rx).max(g.y_space().dist(y, ry));
    c.sort_by(|&a, &b| d(b).total_cmp(&d(a)).then(a.cmp(&b)));
    Ok(c)
}

fn check_probe_inputs(rho: f64, target: &Neighborhood, f: &BiFunction) -> Result<()> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::input(format!(
            "probe radius must be finite and >= 0, got {rho}"
        )));
    }
    if target.xs.iter().any(|&x| x >= f.nx()) || target.ys.iter().any(|&y| y >= f.ny()) {
        return Err(Error::input(
            "target neighbourhood has points outside X × Y",
        ));
    }
    Ok(())
}

struct ProbeRun {
    samples: Vec<ProbeSample>,
    escaped_at: Option<usize>,
}

impl ProbeRun {
    fn push(&mut self, sample: ProbeSample) {
        if sample.escaped && self.escaped_at.is_none() {
            self.escaped_at = Some(self.samples.len());
        }
        self.samples.push(sample);
    }
}

fn solutions_escape(sols: &[(usize, usize)], target: &Neighborhood) -> bool {
    sols.iter().any(|&p| !target.contains(p))
}

/// Searches for perturbations of `(s, u)` within sup-norm `rho` whose
/// solution set leaves `target`.
///
/// The adversary relocates the saddle onto each ε-saddle point (ε = `rho`)
/// of `f + s ⊕ u` outside the target, farthest first, with a perturbation
/// of norm below `rho`; seeded uniform offsets supplement it. The first
/// escaping sample is the witness.
#[allow(clippy::too_many_arguments)]
pub fn usc_adversary_probe(
    f: &BiFunction,
    s: &ScalarField,
    u: &ScalarField,
    target: &Neighborhood,
    rho: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<SolutionMapProbe> {
    check_probe_inputs(rho, target, f)?;
    let g = f.shifted(s, u)?;
    let gs = summarize(&g);
    let center: Vec<(usize, usize)> = enumerate_saddles_with(&g, &gs, tol)
        .iter()
        .map(|c| c.point)
        .collect();
    if center.is_empty() {
        return Err(Error::precondition("solution map is empty at the centre"));
    }
    let mut run = ProbeRun {
        samples: Vec::new(),
        escaped_at: None,
    };
    run.push(ProbeSample {
        origin: SampleOrigin::Center,
        offset: Offset::Separable {
            ds: vec![0.0; f.nx()],
            du: vec![0.0; f.ny()],
        },
        escaped: solutions_escape(&center, target),
        solutions: center.clone(),
    });

    let zero_gap = gs.gap.is_zero_within(tol);
    let adversary_ran = rho > 0.0 && zero_gap;
    let note = if rho == 0.0 {
        "rho = 0: only the centre is admissible".to_string()
    } else if !zero_gap {
        format!(
            "gap of f + s + u is {}; relocation needs zero gap, random probes only",
            gap_display(gs.gap)
        )
    } else {
        "relocation adversary and random probes".to_string()
    };

    if adversary_ran && run.escaped_at.is_none() {
        for cand in candidates_outside(&g, &gs, rho, target, center[0], tol)? {
            let Some((k, r)) = relocate(&g, &gs, cand.0, cand.1, rho, tol)? else {
                continue;
            };
            let ds: Vec<f64> = k.iter().map(|v| -v).collect();
            let du = r;
            let sols = perturbed_solutions_separable(&g, &ds, &du, tol)?;
            run.push(ProbeSample {
                origin: SampleOrigin::Adversary { candidate: cand },
                escaped: solutions_escape(&sols, target),
                solutions: sols,
                offset: Offset::Separable { ds, du },
            });
            if run.escaped_at.is_some() {
                break;
            }
        }
    }

    if rho > 0.0 && run.escaped_at.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..trials {
            let ds: Vec<f64> = (0..f.nx()).map(|_| rng.gen_range(-rho..=rho)).collect();
            let du: Vec<f64> = (0..f.ny()).map(|_| rng.gen_range(-rho..=rho)).collect();
            let sols = perturbed_solutions_separable(&g, &ds, &du, tol)?;
            run.push(ProbeSample {
                origin: SampleOrigin::Random { trial },
                escaped: solutions_escape(&sols, target),
                solutions: sols,
                offset: Offset::Separable { ds, du },
            });
            if run.escaped_at.is_some() {
                break;
            }
        }
    }

    Ok(SolutionMapProbe {
        convention: Convention::PlusPlus,
        rho,
        seed,
        trials,
        target: target.clone(),
        center_solutions: center,
        adversary_ran,
        note,
        verdict: match run.escaped_at {
            Some(sample) => ProbeVerdict::Escaped { sample },
            None => ProbeVerdict::Contained,
        },
        samples: run.samples,
        tolerance: tol,
    })
}

fn perturbed_solutions_separable(
    g: &BiFunction,
    ds: &[f64],
    du: &[f64],
    tol: f64,
) -> Result<Vec<(usize, usize)>> {
    let s = ScalarField::new(g.x_space().clone(), ds.to_vec())?;
    let u = ScalarField::new(g.y_space().clone(), du.to_vec())?;
    Ok(solution_map(g, &s, &u, tol)?.points)
}

fn joint_table(nx: usize, ny: usize, rows: Vec<Vec<f64>>, g: &BiFunction) -> Result<BiFunction> {
    debug_assert!(rows.len() == nx && rows.iter().all(|r| r.len() == ny));
    BiFunction::new(g.x_space().clone(), g.y_space().clone(), rows)
}

/// [`usc_adversary_probe`] for joint perturbations `f + z`, with
/// `‖z′ − z‖ ≤ rho`. Separable relocations are reused as joint offsets
/// `Δz(x,y) = −k(x) + r(y)`, built at ε = `rho/2` so their joint norm
/// stays below `rho`.
pub fn product_usc_probe(
    f: &BiFunction,
    z: &BiFunction,
    target: &Neighborhood,
    rho: f64,
    trials: usize,
    seed: u64,
    tol: f64,
) -> Result<SolutionMapProbe> {
    check_probe_inputs(rho, target, f)?;
    let g = f.plus_joint(z)?;
    let gs = summarize(&g);
    let center: Vec<(usize, usize)> = enumerate_saddles_with(&g, &gs, tol)
        .iter()
        .map(|c| c.point)
        .collect();
    if center.is_empty() {
        return Err(Error::precondition("solution map is empty at the centre"));
    }
    let (nx, ny) = (f.nx(), f.ny());
    let mut run = ProbeRun {
        samples: Vec::new(),
        escaped_at: None,
    };
    run.push(ProbeSample {
        origin: SampleOrigin::Center,
        offset: Offset::Joint {
            dz: vec![vec![0.0; ny]; nx],
        },
        escaped: solutions_escape(&center, target),
        solutions: center.clone(),
    });
    let zero_gap = gs.gap.is_zero_within(tol);
    let adversary_ran = rho > 0.0 && zero_gap;
    let note = if rho == 0.0 {
        "rho = 0: only the centre is admissible".to_string()
    } else if !zero_gap {
        format!(
            "gap of f + z is {}; relocation needs zero gap, random probes only",
            gap_display(gs.gap)
        )
    } else {
        "separable relocation adversary and random joint probes".to_string()
    };
    let joint_solutions = |dz: &[Vec<f64>]| -> Result<Vec<(usize, usize)>> {
        let t = joint_table(nx, ny, dz.to_vec(), &g)?;
        let h = g.plus_joint(&t)?;
        Ok(enumerate_saddles(&h, tol).iter().map(|c| c.point).collect())
    };

    if adversary_ran && run.escaped_at.is_none() {
        let half = rho / 2.0;
        for cand in candidates_outside(&g, &gs, half, target, center[0], tol)? {
            let Some((k, r)) = relocate(&g, &gs, cand.0, cand.1, half, tol)? else {
                continue;
            };
            let dz: Vec<Vec<f64>> = k
                .iter()
                .map(|kx| r.iter().map(|ry| ry - kx).collect())
                .collect();
            let offset = Offset::Joint { dz };
            if offset.norms().0 >= rho {
                continue;
            }
            let Offset::Joint { dz } = &offset else {
                unreachable!()
            };
            let sols = joint_solutions(dz)?;
            run.push(ProbeSample {
                origin: SampleOrigin::Adversary { candidate: cand },
                escaped: solutions_escape(&sols, target),
                solutions: sols,
                offset,
            });
            if run.escaped_at.is_some() {
                break;
            }
        }
    }

    if rho > 0.0 && run.escaped_at.is_none() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..trials {
            let dz: Vec<Vec<f64>> = (0..nx)
                .map(|_| (0..ny).map(|_| rng.gen_range(-rho..=rho)).collect())
                .collect();
            let sols = joint_solutions(&dz)?;
            run.push(ProbeSample {
                origin: SampleOrigin::Random { trial },
                escaped: solutions_escape(&sols, target),
                solutions: sols,
                offset: Offset::Joint { dz },
            });
            if run.escaped_at.is_some() {
                break;
            }
        }
    }

    Ok(SolutionMapProbe {
        convention: Convention::Joint,
        rho,
        seed,
        trials,
        target: target.clone(),
        center_solutions: center,
        adversary_ran,
        note,
        verdict: match run.escaped_at {
            Some(sample) => ProbeVerdict::Escaped { sample },
            None => ProbeVerdict::Contained,
        },
        samples: run.samples,
        tolerance: tol,
    })
}

/// Result of [`dense_separable_perturbation`]: `f + k + r` has a saddle at
/// `anchor`, with `‖k − k̂‖ < ε` and `‖r − r̂‖ < ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePerturbation {
    pub k: ScalarField,
    pub r: ScalarField,
    pub anchor: (usize, usize),
    /// `k̂ − k`, a minimizing perturbation of `−(f1 + k̂)`.
    pub correction_x: Perturbation,
    /// `r − r̂`, a minimizing perturbation of `f2 + r̂`.
    pub correction_y: Perturbation,
    pub certificate: SaddleCertificate,
}

fn lowest_index_extremum(vals: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in vals.iter().enumerate().skip(1) {
        if better(v, vals[best]) {
            best = i;
        }
    }
    best
}

/// Moves targets `(k̂, r̂)` by less than `ε` so that
/// `f1(x) + f2(y) + k(x) + r(y)` has a saddle point.
///
/// `anchor` picks the near-maximizer of `f1 + k̂` and near-minimizer of
/// `f2 + r̂` to lock in; by default the lowest-index exact extrema.
#[allow(clippy::too_many_arguments)]
pub fn dense_separable_perturbation(
    f1: &ScalarField,
    f2: &ScalarField,
    k_target: &ScalarField,
    r_target: &ScalarField,
    eps: f64,
    anchor: Option<(usize, usize)>,
    tol: f64,
) -> Result<SeparablePerturbation> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::input(format!("ε must be positive, got {eps}")));
    }
    if k_target.len() != f1.len() || r_target.len() != f2.len() {
        return Err(Error::input("target perturbations do not match the spaces"));
    }
    if k_target
        .values()
        .iter()
        .chain(r_target.values())
        .any(|v| !v.is_finite())
    {
        return Err(Error::input("target perturbations must be finite"));
    }
    if f1.values().contains(&f64::INFINITY) || !f1.values().iter().any(|v| v.is_finite()) {
        return Err(Error::precondition(
            "f1 must take values in R ∪ {-inf} and be finite somewhere",
        ));
    }
    if f2.values().contains(&f64::NEG_INFINITY) || !f2.values().iter().any(|v| v.is_finite()) {
        return Err(Error::precondition(
            "f2 must take values in R ∪ {+inf} and be finite somewhere",
        ));
    }
    if f1.values().iter().any(|v| v.is_infinite()) && f2.values().iter().any(|v| v.is_infinite()) {
        return Err(Error::precondition(
            "f1(x) + f2(y) is undefined (-inf + +inf)",
        ));
    }
    let a = f1.add(k_target)?;
    let b = f2.add(r_target)?;
    let (xs, ys) = match anchor {
        Some((x, y)) => {
            if x >= a.len() || y >= b.len() {
                return Err(Error::input("anchor out of range"));
            }
            (x, y)
        }
        None => (
            lowest_index_extremum(a.values(), |v, best| v > best),
            lowest_index_extremum(b.values(), |v, best| v < best),
        ),
    };
    if !(a.get(xs) > a.max() - eps) {
        return Err(Error::precondition(format!(
            "x{} is not ε-maximal for f1 + k̂",
            xs + 1
        )));
    }
    if !(b.get(ys) < b.min() + eps) {
        return Err(Error::precondition(format!(
            "y{} is not ε-minimal for f2 + r̂",
            ys + 1
        )));
    }
    let mut hx = kr_min_perturbation(&a.neg(), xs, tol)?;
    let mut hy = kr_min_perturbation(&b, ys, tol)?;
    hy.axis = crate::perturb::Axis::Y;
    for h in [&mut hx, &mut hy] {
        h.construction = "dense-separable";
        if !(h.norm < eps) {
            return Err(Error::verification(format!(
                "separable correction norm {} is not below ε = {eps}",
                h.norm
            )));
        }
    }
    let k = k_target.sub(&hx.field)?;
    let r = r_target.add(&hy.field)?;
    let base = BiFunction::from_fn(f1.space().clone(), f2.space().clone(), |x, y| {
        f1.get(x) + f2.get(y)
    })?;
    let g = base.shifted(&k, &r)?;
    let certificate = match is_saddle(&g, xs, ys, tol)? {
        SaddleCheck::Certified(c) => c,
        SaddleCheck::Refused(v) => {
            return Err(Error::verification(format!(
                "f + k + r has no saddle at the anchor: {v:?}"
            )))
        }
    };
    Ok(SeparablePerturbation {
        k,
        r,
        anchor: (xs, ys),
        correction_x: hx,
        correction_y: hy,
        certificate,
    })
}

/// Builds a separable payoff `f1 ⊕ f2` on the given spaces.
pub fn separable(f1: &ScalarField, f2: &ScalarField) -> Result<BiFunction> {
    BiFunction::from_fn(Arc::clone(f1.space()), Arc::clone(f2.space()), |x, y| {
        f1.get(x) + f2.get(y)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::wellposed_perturbation;

    fn bf(rows: Vec<Vec<f64>>) -> BiFunction {
        BiFunction::from_rows(rows).unwrap()
    }

    #[test]
    fn optimizing_examples() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let seq = PairSequence::constant((1, 0), 5);
        assert!(is_optimizing(&f, &seq, 0.0).unwrap().holds);
        assert!(is_maximinimizing(&f, &seq, 0.0).unwrap().holds);

        let g = bf(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let seq = PairSequence::constant((0, 0), 3);
        assert!(!is_optimizing(&g, &seq, 1e-9).unwrap().holds);
        let mm = is_maximinimizing(&g, &seq, 1e-9).unwrap();
        assert!(!mm.holds);
        assert_eq!(mm.errors, vec![1.0; 3]);

        let z = bf(vec![vec![0.0; 3]; 2]);
        let seq = PairSequence::new(vec![(0, 2), (1, 0), (0, 1)]);
        assert!(is_optimizing(&z, &seq, 0.0).unwrap().holds);
        assert!(is_maximinimizing(&z, &seq, 0.0).unwrap().holds);
    }

    #[test]
    fn tail_settling_and_violation_index() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let seq = PairSequence::new(vec![(0, 1), (1, 1), (1, 0), (1, 0)]);
        let v = is_optimizing(&f, &seq, 0.0).unwrap();
        assert!(v.holds);
        assert_eq!(v.settles_at, Some(2));
        assert_eq!(v.first_violation, Some(0));
        assert_eq!(v.errors, vec![2.0, 1.0, 0.0, 0.0]);

        let seq = PairSequence::new(vec![(1, 0), (0, 0)]);
        let v = is_optimizing(&f, &seq, 0.0).unwrap();
        assert!(!v.holds);
        assert_eq!(v.first_violation, Some(1));
        assert!(is_optimizing(&f, &PairSequence::new(vec![]), 0.0).is_err());
    }

    #[test]
    fn modulus_examples() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = modulus(&f, &[1.0, 0.1, 0.01], 0.0).unwrap();
        assert_eq!(m.diam, vec![0.0; 3]);
        assert_eq!(m.unique_solution, Some((1, 0)));

        let z = bf(vec![vec![0.0; 2]; 2]);
        let m = modulus(&z, &default_eps_grid(), 0.0).unwrap();
        assert!(m.diam.iter().all(|&d| d == 1.0));
        assert_eq!(m.unique_solution, None);

        let g = bf(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(
            modulus(&g, &[1.0], 0.0),
            Err(Error::Precondition(_))
        ));
        assert!(modulus(&f, &[0.1, 1.0], 0.0).is_err());
    }

    #[test]
    fn solution_map_examples() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let zx = ScalarField::zeros(f.x_space().clone());
        let zy = ScalarField::zeros(f.y_space().clone());
        assert_eq!(
            solution_map(&f, &zx, &zy, 0.0).unwrap().points,
            vec![(1, 0)]
        );

        let g = bf(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let s = ScalarField::new(g.x_space().clone(), vec![0.0, -1.0]).unwrap();
        assert_eq!(solution_map(&g, &s, &zy, 0.0).unwrap().points, vec![(0, 0)]);

        let big_s = ScalarField::constant(f.x_space().clone(), 1e3);
        let big_u = ScalarField::constant(f.y_space().clone(), -250.0);
        assert_eq!(
            solution_map(&f, &big_s, &big_u, 0.0).unwrap().points,
            vec![(1, 0)]
        );
    }

    #[test]
    fn probe_escapes_on_flat_payoff() {
        let f = bf(vec![vec![0.0; 2]; 2]);
        let zx = ScalarField::zeros(f.x_space().clone());
        let zy = ScalarField::zeros(f.y_space().clone());
        let p =
            usc_adversary_probe(&f, &zx, &zy, &Neighborhood::point(0, 0), 0.1, 10, 7, 0.0).unwrap();
        assert!(p.escaped());
        let w = p.witness().unwrap();
        let (nx, ny) = w.offset.norms();
        assert!(nx <= 0.1 && ny <= 0.1);
    }

    #[test]
    fn probe_with_zero_radius_only_checks_centre() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let zx = ScalarField::zeros(f.x_space().clone());
        let zy = ScalarField::zeros(f.y_space().clone());
        let p =
            usc_adversary_probe(&f, &zx, &zy, &Neighborhood::point(1, 0), 0.0, 10, 1, 0.0).unwrap();
        assert!(!p.escaped());
        assert_eq!(p.samples.len(), 1);
    }

    #[test]
    fn product_probe_examples() {
        let f = bf(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let z = bf(vec![vec![0.0; 2]; 2]);
        let p = product_usc_probe(&f, &z, &Neighborhood::point(1, 0), 0.2, 50, 3, 0.0).unwrap();
        assert!(!p.escaped());
        let flat = bf(vec![vec![0.0; 2]; 2]);
        let p = product_usc_probe(&flat, &z, &Neighborhood::point(0, 0), 0.01, 5, 3, 0.0).unwrap();
        assert!(p.escaped());
        let p = product_usc_probe(&f, &z, &Neighborhood::point(1, 0), 0.0, 5, 3, 0.0).unwrap();
        assert!(!p.escaped());
    }

    #[test]
    fn wellposed_output_is_contained() {
        let f = bf(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let wp = wellposed_perturbation(&f, 0, 0, 0.5, 0.5, 0.5, 53, 0.0).unwrap();
        let m = value_margin(&wp.sharpened, 0, 0);
        assert!(m > 0.0);
        let zx = ScalarField::zeros(f.x_space().clone());
        let zy = ScalarField::zeros(f.y_space().clone());
        let p = usc_adversary_probe(
            &wp.sharpened,
            &zx,
            &zy,
            &Neighborhood::point(0, 0),
            m / 5.0,
            100,
            11,
            0.0,
        )
        .unwrap();
        assert!(!p.escaped());
    }

    #[test]
    fn dense_separable_on_finite_spaces() {
        let xs = Arc::new(MetricSpace::discrete(3).unwrap());
        let ys = Arc::new(MetricSpace::discrete(2).unwrap());
        let f1 = ScalarField::new(xs.clone(), vec![0.0, 2.0, 1.0]).unwrap();
        let f2 = ScalarField::new(ys.clone(), vec![1.0, -1.0]).unwrap();
        let kh = ScalarField::zeros(xs.clone());
        let rh = ScalarField::zeros(ys.clone());
        let d = dense_separable_perturbation(&f1, &f2, &kh, &rh, 0.5, None, 0.0).unwrap();
        assert_eq!(d.k, kh);
        assert_eq!(d.r, rh);
        assert_eq!(d.anchor, (1, 1));

        // Locking in a near-maximizer moves k by less than ε.
        let f1 = ScalarField::new(xs.clone(), vec![0.0, 2.0, 1.75]).unwrap();
        let d = dense_separable_perturbation(&f1, &f2, &kh, &rh, 0.5, Some((2, 1)), 0.0).unwrap();
        assert_eq!(d.k.values(), &[0.0, -0.25, 0.0]);
        assert!(d.certificate.point == (2, 1));
        assert!(dense_separable_perturbation(&f1, &f2, &kh, &rh, 0.25, Some((2, 1)), 0.0).is_err());
    }
}
