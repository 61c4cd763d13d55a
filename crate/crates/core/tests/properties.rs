mod common;

use std::sync::Arc;

use common::{accepted, brute_force_saddles, dyadic, optimal_anchor, rng, sup};
use proptest::prelude::*;
use rand::Rng;
use saddlekit::minimax::{
    enumerate_saddles, eps_saddle_set, is_saddle, summarize, BiFunction, Gap, MinimaxSummary,
};
use saddlekit::perturb::{
    kr_min_perturbation, kr_strong_min_perturbation, saddle_perturbation, sharpener_value,
    wellposed_perturbation,
};
use saddlekit::space::{build_grid, validate_metric, GridSpec, ScalarField};
use saddlekit::wellposed::{
    dense_separable_perturbation, is_maximinimizing, is_optimizing, modulus, usc_adversary_probe,
    Neighborhood, Offset, PairSequence,
};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(128)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn weak_duality(seed in any::<u64>()) {
        let Some(inst) = accepted(seed, 12, 0.05) else { return Ok(()) };
        let s = &inst.summary;
        prop_assert!(s.upper_value - s.lower_value >= 0.0);
    }

    #[test]
    fn saddles_match_definition(seed in any::<u64>(), inf_rate in 0.0f64..0.2) {
        let mut r = rng(seed);
        let f = common::random_payoff(&mut r, 8, inf_rate);
        let fast: Vec<_> = enumerate_saddles(&f, 0.0).iter().map(|c| c.point).collect();
        prop_assert_eq!(fast, brute_force_saddles(&f));
    }

    /// On a finite space a saddle exists exactly when the gap vanishes, and
    /// the saddle set is the product of the two argsets.
    #[test]
    fn saddle_set_is_argset_product(seed in any::<u64>()) {
        let Some(inst) = accepted(seed, 6, 0.0) else { return Ok(()) };
        let (f, s) = (&inst.f, &inst.summary);
        let pts: Vec<_> = enumerate_saddles(f, 0.0).iter().map(|c| c.point).collect();
        if s.gap == Gap::Value(0.0) {
            let product: Vec<_> = s.sup_argset.iter()
                .flat_map(|&x| s.inf_argset.iter().map(move |&y| (x, y)))
                .collect();
            prop_assert_eq!(pts, product);
        } else {
            prop_assert!(pts.is_empty());
        }
    }

    #[test]
    fn eps_saddle_sets_are_nested(seed in any::<u64>()) {
        let Some(inst) = accepted(seed, 10, 0.05) else { return Ok(()) };
        let f = plant(&inst.f, &inst.summary);
        let big = eps_saddle_set(&f, 3.0, 0.0).unwrap();
        let small = eps_saddle_set(&f, 0.75, 0.0).unwrap();
        for p in small.members() {
            prop_assert!(big.contains(p.0, p.1));
        }
        for c in enumerate_saddles(&f, 0.0) {
            prop_assert!(small.contains(c.point.0, c.point.1));
        }
    }

    #[test]
    fn kr_min_levels_and_norm(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed);
        let space = common::random_space(&mut r, n);
        let vals: Vec<f64> = (0..n).map(|_| dyadic(&mut r, -10, 10, 256)).collect();
        let f1 = ScalarField::new(space, vals).unwrap();
        let x0 = r.gen_range(0..n);
        let h = kr_min_perturbation(&f1, x0, 0.0).unwrap();
        let g = f1.add(&h.field).unwrap();
        prop_assert_eq!(g.min(), f1.get(x0));
        prop_assert_eq!(h.norm, f1.get(x0) - f1.min());
    }

    #[test]
    fn strong_min_is_unique(seed in any::<u64>(), n in 1usize..20) {
        let mut r = rng(seed);
        let space = common::random_space(&mut r, n);
        let vals: Vec<f64> = (0..n).map(|_| dyadic(&mut r, -10, 10, 256)).collect();
        let f1 = ScalarField::new(space, vals).unwrap();
        let x0 = r.gen_range(0..n);
        let eps = 0.5;
        let h = kr_strong_min_perturbation(&f1, x0, eps, 0.0).unwrap();
        let g = f1.add(&h.field).unwrap();
        for x in (0..n).filter(|&x| x != x0) {
            prop_assert!(g.get(x) > g.get(x0));
        }
        prop_assert!(h.norm < f1.get(x0) - f1.min() + eps);
    }

    #[test]
    fn saddle_perturbation_budgets(seed in any::<u64>(), e1 in 1i32..64, e2 in 1i32..64) {
        let Some(inst) = accepted(seed, 10, 0.05) else { return Ok(()) };
        let (f, s) = (&inst.f, &inst.summary);
        let (e1, e2) = (e1 as f64 / 16.0, e2 as f64 / 16.0);
        let gap = s.gap.finite().unwrap();
        let mut r = rng(seed ^ 1);
        let xs: Vec<usize> = (0..f.nx()).filter(|&x| s.v[x] > s.lower_value - e1).collect();
        let ys: Vec<usize> = (0..f.ny()).filter(|&y| s.w[y] < s.upper_value + e2).collect();
        let (x0, y0) = (xs[r.gen_range(0..xs.len())], ys[r.gen_range(0..ys.len())]);
        let p = saddle_perturbation(f, x0, y0, e1, e2, 0.0).unwrap();
        prop_assert!(sup(p.pair.on_x.values()) < 2.0 * e1 + e2 + gap);
        prop_assert!(sup(p.pair.on_y.values()) < e1 + 2.0 * e2 + gap);
        prop_assert!(p.pair.on_x.values().iter().all(|&v| v >= 0.0));
        prop_assert!(is_saddle(&p.pair.combined, x0, y0, 0.0).unwrap().is_certified());
    }

    #[test]
    fn optimizing_implies_maximinimizing(seed in any::<u64>(), len in 1usize..8) {
        let Some(inst) = accepted(seed, 6, 0.0) else { return Ok(()) };
        let f = plant(&inst.f, &inst.summary);
        let mut r = rng(seed ^ 2);
        let seq = PairSequence::new(
            (0..len).map(|_| (r.gen_range(0..f.nx()), r.gen_range(0..f.ny()))).collect(),
        );
        let opt = is_optimizing(&f, &seq, 0.0).unwrap();
        let mm = is_maximinimizing(&f, &seq, 0.0).unwrap();
        prop_assert!(!opt.holds || mm.holds);
        prop_assert!(opt.envelope.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn wellposed_modulus_shrinks(seed in any::<u64>()) {
        let Some(inst) = accepted(seed, 10, 0.05) else { return Ok(()) };
        let (x0, y0) = optimal_anchor(&inst.summary);
        let wp = wellposed_perturbation(&inst.f, x0, y0, 1.0, 1.0, 1.0, 53, 0.0).unwrap();
        prop_assert!(wp.sharpener_x.norm <= 1.0 && wp.sharpener_y.norm <= 1.0);
        let grid: Vec<f64> = (1..=10).map(|n| 2f64.powi(-n)).collect();
        let m = modulus(&wp.sharpened, &grid, 0.0).unwrap();
        prop_assert!(m.is_nonincreasing());
        for (n, d) in (1..=10).zip(&m.diam) {
            prop_assert!(*d <= 2.0 / n as f64, "n = {}: diam {}", n, d);
        }
    }

    #[test]
    fn probe_witnesses_are_sound(seed in any::<u64>(), rho_k in 1i32..64) {
        let Some(inst) = accepted(seed, 6, 0.0) else { return Ok(()) };
        let f = plant(&inst.f, &inst.summary);
        let rho = rho_k as f64 / 16.0;
        let zx = ScalarField::zeros(f.x_space().clone());
        let zy = ScalarField::zeros(f.y_space().clone());
        let c = enumerate_saddles(&f, 0.0)[0].point;
        let target = Neighborhood::point(c.0, c.1);
        let p = usc_adversary_probe(&f, &zx, &zy, &target, rho, 10, seed, 0.0).unwrap();
        if let Some(w) = p.witness() {
            let Offset::Separable { ds, du } = &w.offset else { panic!("joint offset") };
            prop_assert!(sup(ds) <= rho && sup(du) <= rho);
            let g = f.shifted(
                &ScalarField::new(f.x_space().clone(), ds.clone()).unwrap(),
                &ScalarField::new(f.y_space().clone(), du.clone()).unwrap(),
            ).unwrap();
            prop_assert!(brute_force_saddles(&g).iter().any(|&q| !target.contains(q)));
        }
    }

    #[test]
    fn dense_separable_budget(seed in any::<u64>(), nx in 1usize..12, ny in 1usize..12) {
        let mut r = rng(seed);
        let xs = common::random_space(&mut r, nx);
        let ys = common::random_space(&mut r, ny);
        let field = |r: &mut common::TestRng, s: &Arc<_>, n| {
            ScalarField::new(Arc::clone(s), (0..n).map(|_| dyadic(r, -4, 4, 64)).collect()).unwrap()
        };
        let (f1, f2) = (field(&mut r, &xs, nx), field(&mut r, &ys, ny));
        let (kh, rh) = (field(&mut r, &xs, nx), field(&mut r, &ys, ny));
        let eps = 0.5;
        let a = f1.add(&kh).unwrap();
        let near: Vec<usize> = (0..nx).filter(|&x| a.get(x) > a.max() - eps).collect();
        let x = near[r.gen_range(0..near.len())];
        let b = f2.add(&rh).unwrap();
        let y = b.values().iter().position(|&v| v == b.min()).unwrap();
        let d = dense_separable_perturbation(&f1, &f2, &kh, &rh, eps, Some((x, y)), 0.0).unwrap();
        prop_assert!(d.k.sub(&kh).unwrap().sup_norm() < eps);
        prop_assert!(d.r.sub(&rh).unwrap().sup_norm() < eps);
        prop_assert_eq!(d.certificate.point, (x, y));
    }

    #[test]
    fn sharpener_bounded_and_monotone(a in 0.0f64..4.0, b in 0.0f64..4.0, n in 1u32..200) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (vl, _) = sharpener_value(lo, 1.0, n);
        let (vh, _) = sharpener_value(hi, 1.0, n);
        prop_assert!(vl <= vh + 1e-15);
        prop_assert!(vh <= 1.0);
        prop_assert!(lo == 0.0 || vl > 0.0);
    }

    #[test]
    fn grids_are_increasing_and_inside(lo in -8i32..8, w in 1i32..8, n in 2usize..200, lo_open: bool, hi_open: bool) {
        let (lower, upper) = (lo as f64, (lo + w) as f64);
        let spec = GridSpec::new(lower, upper, lo_open, hi_open, n);
        let s = build_grid(&spec).unwrap();
        let c = s.coords().unwrap();
        prop_assert_eq!(c.len(), n);
        prop_assert!(c.windows(2).all(|p| p[0] < p[1]));
        prop_assert_eq!(c[0] == lower, !lo_open);
        prop_assert_eq!(c[n - 1] == upper, !hi_open);
        prop_assert!(c.iter().all(|&x| lower <= x && x <= upper));
    }

    #[test]
    fn validator_accepts_metrics_and_rejects_shortcuts(seed in any::<u64>(), n in 3usize..10) {
        let mut r = rng(seed);
        let s = common::random_space(&mut r, n);
        let mut d = s.dist_table().to_vec();
        prop_assert!(validate_metric(d.clone()).is_ok());
        let (a, b) = (0, 1);
        let longest = d[a].iter().zip(&d[b]).map(|(x, y)| x + y).fold(0.0, f64::max);
        d[a][b] = longest + 1.0;
        d[b][a] = longest + 1.0;
        prop_assert!(validate_metric(d).is_err());
    }

    #[test]
    fn summary_round_trips_through_json(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = common::random_payoff(&mut r, 6, 0.2);
        let s = summarize(&f);
        let json = serde_json::to_string(&s).unwrap();
        let back: MinimaxSummary = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, s);
    }
}

fn plant(f: &BiFunction, s: &MinimaxSummary) -> BiFunction {
    let (x0, y0) = optimal_anchor(s);
    saddle_perturbation(f, x0, y0, 1.0, 1.0, 0.0)
        .unwrap()
        .pair
        .combined
}
