//! Random instance generation shared by the property and acceptance tests.
//!
//! Every value is a dyadic rational of small magnitude, so sums and
//! differences of a handful of them are exact in `f64` and zero-tolerance
//! checks are meaningful.

#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddlekit::minimax::{check_assumptions_from, summarize, BiFunction, MinimaxSummary};
use saddlekit::space::{validate_metric, MetricSpace};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform dyadic `k / denom` in `[lo, hi]`.
pub fn dyadic(rng: &mut TestRng, lo: i64, hi: i64, denom: i64) -> f64 {
    rng.gen_range(lo * denom..=hi * denom) as f64 / denom as f64
}

/// `n` distinct points of the 64-lattice in `[0,1]²` under the max-metric.
pub fn random_space(rng: &mut TestRng, n: usize) -> Arc<MetricSpace> {
    let mut pts: Vec<(i64, i64)> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = (rng.gen_range(0..=64), rng.gen_range(0..=64));
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    let dist = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| (a.0 - b.0).abs().max((a.1 - b.1).abs()) as f64 / 64.0)
                .collect()
        })
        .collect();
    Arc::new(validate_metric(dist).expect("max-metric on distinct points"))
}

/// Table with entries `k/256` in `[−10, 10]`, a fraction `inf_rate` of
/// which are replaced by `±∞`.
pub fn random_payoff(rng: &mut TestRng, max_dim: usize, inf_rate: f64) -> BiFunction {
    let nx = rng.gen_range(1..=max_dim);
    let ny = rng.gen_range(1..=max_dim);
    let xs = random_space(rng, nx);
    let ys = random_space(rng, ny);
    let rows = (0..nx)
        .map(|_| {
            (0..ny)
                .map(|_| {
                    if rng.gen_bool(inf_rate) {
                        if rng.gen_bool(0.5) {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        dyadic(rng, -10, 10, 256)
                    }
                })
                .collect()
        })
        .collect();
    BiFunction::new(xs, ys, rows).unwrap()
}

/// Instance accepted into the suite: assumptions hold and the gap is finite.
pub struct Instance {
    pub seed: u64,
    pub f: BiFunction,
    pub summary: MinimaxSummary,
}

pub fn accepted(seed: u64, max_dim: usize, inf_rate: f64) -> Option<Instance> {
    let mut r = rng(seed);
    let f = random_payoff(&mut r, max_dim, inf_rate);
    let summary = summarize(&f);
    (check_assumptions_from(&summary).all_hold() && summary.gap.finite().is_some())
        .then_some(Instance { seed, f, summary })
}

/// The first `count` accepted instances from consecutive seeds.
pub fn suite(count: usize, base_seed: u64, max_dim: usize) -> Vec<Instance> {
    (base_seed..)
        .filter_map(|s| accepted(s, max_dim, 0.05))
        .take(count)
        .collect()
}

/// Saddle points straight from the definition, no shortcuts through `v`/`w`.
pub fn brute_force_saddles(f: &BiFunction) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x0 in 0..f.nx() {
        for y0 in 0..f.ny() {
            let c = f.get(x0, y0);
            if !c.is_finite() {
                continue;
            }
            let mut ok = true;
            for x in 0..f.nx() {
                if f.get(x, y0) > c {
                    ok = false;
                }
            }
            for y in 0..f.ny() {
                if f.get(x0, y) < c {
                    ok = false;
                }
            }
            if ok {
                out.push((x0, y0));
            }
        }
    }
    out
}

/// Anchor for a saddle perturbation: first maximizer of `v`, first
/// minimizer of `w`.
pub fn optimal_anchor(s: &MinimaxSummary) -> (usize, usize) {
    (s.sup_argset[0], s.inf_argset[0])
}

/// Sup-norm of a slice.
pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}
