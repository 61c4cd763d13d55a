//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{brute_force_saddles, optimal_anchor, rng, suite, sup, Instance};
use rand::Rng;
use saddlekit::minimax::{
    discretized_counterexample, enumerate_saddles_with, eps_saddle_set_with, is_saddle, summarize,
    BiFunction, Gap,
};
use saddlekit::perturb::{
    characteristic_regularity_witness, eps_saddle_perturbation_with, kr_min_perturbation,
    local_base_sets, saddle_perturbation_with, wellposed_perturbation,
};
use saddlekit::space::ScalarField;
use saddlekit::wellposed::{
    default_eps_grid, modulus, product_usc_probe, usc_adversary_probe, value_margin, Neighborhood,
    Offset,
};
use saddlekit::Error;

type Outcome = std::result::Result<String, String>;

const SUITE_SIZE: usize = 1000;
const SUITE_SEED: u64 = 0x5add1e;

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_counterexample() -> Outcome {
    for n in [10usize, 100, 1000] {
        let t = Instant::now();
        let r = discretized_counterexample(n).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        check(r.summary.gap == Gap::Value(0.0), || {
            format!("n={n}: gap {:?}", r.summary.gap)
        })?;
        let (i, j) = r.saddle.point;
        check(
            r.x_grid.position(i) == num_rational::Ratio::new(n as i64, n as i64 + 1)
                && j == n - 1
                && r.saddle_coords.1 == 1.0,
            || format!("n={n}: saddle at {:?}", r.saddle_coords),
        )?;
        check(r.corner_distance_exact == (1, n as i64 + 1), || {
            format!("n={n}: corner distance {:?}", r.corner_distance_exact)
        })?;
        if n == 1000 {
            check(el < Duration::from_secs(1), || {
                format!("n=1000 took {el:?}")
            })?;
        }
    }
    Ok("n ∈ {10,100,1000}: gap 0, saddle (n/(n+1), 1), corner distance 1/(n+1)".into())
}

/// ε values used per instance; multiples of 1/16 keep all budgets exact.
const EPS: [f64; 3] = [0.0625, 1.0, 4.0];

fn c2_saddle_suite(s: &[Instance]) -> Outcome {
    let mut accepted = 0usize;
    for inst in s {
        let (f, sm) = (&inst.f, &inst.summary);
        let gap = sm.gap.finite().unwrap();
        for &e1 in &EPS {
            for &e2 in &EPS {
                let xs: Vec<usize> = (0..f.nx())
                    .filter(|&x| sm.v[x] > sm.lower_value - e1)
                    .collect();
                let ys: Vec<usize> = (0..f.ny())
                    .filter(|&y| sm.w[y] < sm.upper_value + e2)
                    .collect();
                for &x0 in &xs {
                    for &y0 in &ys {
                        match saddle_perturbation_with(f, sm, x0, y0, e1, e2, 0.0) {
                            Ok(p) => {
                                accepted += 1;
                                let g = &p.pair.combined;
                                let ok = is_saddle(g, x0, y0, 0.0)
                                    .map(|c| c.is_certified())
                                    .unwrap_or(false);
                                check(ok, || {
                                    format!("seed {}: ({x0},{y0}) not a saddle", inst.seed)
                                })?;
                                let nk = sup(p.pair.on_x.values());
                                let nr = sup(p.pair.on_y.values());
                                check(
                                    nk < 2.0 * e1 + e2 + gap && nr < e1 + 2.0 * e2 + gap,
                                    || format!("seed {}: norms {nk}, {nr} over budget", inst.seed),
                                )?;
                            }
                            Err(e) => return Err(format!("seed {} ({x0},{y0}): {e}", inst.seed)),
                        }
                    }
                }
            }
        }
    }
    Ok(format!(
        "{} instances, {accepted} admissible (x0,y0,ε′,ε″) cases verified at tol 0",
        s.len()
    ))
}

fn c3_kr_equality(s: &[Instance]) -> Outcome {
    let mut cases = 0usize;
    for inst in s {
        let (f, sm) = (&inst.f, &inst.summary);
        let mut fields = vec![ScalarField::new(f.y_space().clone(), sm.w.clone()).unwrap()];
        fields.extend(
            (0..f.nx())
                .filter(|&x| f.row(x).iter().all(|v| *v > f64::NEG_INFINITY))
                .map(|x| f.row_field(x)),
        );
        for fl in &fields {
            let inf = fl.min();
            for x0 in (0..fl.len()).filter(|&x| fl.get(x).is_finite()) {
                let h = kr_min_perturbation(fl, x0, 0.0).map_err(|e| e.to_string())?;
                cases += 1;
                check(sup(h.values()) == fl.get(x0) - inf, || {
                    format!(
                        "seed {}: ‖h‖ = {} vs {}",
                        inst.seed,
                        sup(h.values()),
                        fl.get(x0) - inf
                    )
                })?;
            }
        }
    }
    Ok(format!("{cases} cases, ‖h‖ = f(x0) − inf f exactly"))
}

fn c4_weak_duality(s: &[Instance]) -> Outcome {
    for inst in s {
        let (f, sm) = (&inst.f, &inst.summary);
        if sm.lower_value.is_finite() && sm.upper_value.is_finite() {
            check(sm.upper_value - sm.lower_value >= 0.0, || {
                format!("seed {}: Δ < 0", inst.seed)
            })?;
        }
        for x in 0..f.nx() {
            for y in 0..f.ny() {
                let c = f.get(x, y);
                if c.is_finite() {
                    check(sm.v[x] <= c && c <= sm.w[y], || {
                        format!("seed {}: v ≤ f ≤ w fails at ({x},{y})", inst.seed)
                    })?;
                }
            }
        }
    }
    Ok(format!("{} instances, Δ ≥ 0 and v ≤ f ≤ w", s.len()))
}

/// Instances with a planted saddle, hence zero gap.
fn planted(inst: &Instance) -> BiFunction {
    let (x0, y0) = optimal_anchor(&inst.summary);
    saddle_perturbation_with(&inst.f, &inst.summary, x0, y0, 1.0, 1.0, 0.0)
        .expect("optimal anchor is admissible")
        .pair
        .combined
}

fn c5_oracle(s: &[Instance]) -> Outcome {
    let mut saddles = 0usize;
    for inst in s {
        for f in [inst.f.clone(), planted(inst)] {
            let sm = summarize(&f);
            let fast: Vec<_> = enumerate_saddles_with(&f, &sm, 0.0)
                .iter()
                .map(|c| c.point)
                .collect();
            let slow = brute_force_saddles(&f);
            check(fast == slow, || {
                format!("seed {}: {fast:?} vs {slow:?}", inst.seed)
            })?;
            saddles += slow.len();
        }
    }
    Ok(format!(
        "{} payoffs (raw + planted), {saddles} saddles agree",
        2 * s.len()
    ))
}

fn c6_sharpening(s: &[Instance]) -> Outcome {
    for inst in s {
        let f = &inst.f;
        let (x0, y0) = optimal_anchor(&inst.summary);
        let wp = wellposed_perturbation(f, x0, y0, 1.0, 1.0, 1.0, 53, 0.0)
            .map_err(|e| format!("seed {}: {e}", inst.seed))?;
        let g = &wp.sharpened;
        let gs = summarize(g);
        for n in 1..=10i32 {
            let eps = 2f64.powi(-n);
            let r = 1.0 / n as f64;
            for x in (0..g.nx()).filter(|&x| gs.v[x] >= gs.lower_value - eps) {
                check(g.x_space().dist(x, x0) < r, || {
                    format!(
                        "seed {}: x{} is {eps}-optimal at distance ≥ 1/{n}",
                        inst.seed,
                        x + 1
                    )
                })?;
            }
            for y in (0..g.ny()).filter(|&y| gs.w[y] <= gs.upper_value + eps) {
                check(g.y_space().dist(y, y0) < r, || {
                    format!(
                        "seed {}: y{} is {eps}-optimal at distance ≥ 1/{n}",
                        inst.seed,
                        y + 1
                    )
                })?;
            }
        }
        let m = modulus(g, &default_eps_grid(), 0.0).map_err(|e| e.to_string())?;
        check(
            m.is_nonincreasing() && *m.diam.last().unwrap() == 0.0,
            || format!("seed {}: modulus {:?}", inst.seed, m.diam),
        )?;
        check(m.unique_solution == Some((x0, y0)), || {
            format!(
                "seed {}: unique solution {:?}",
                inst.seed, m.unique_solution
            )
        })?;
    }
    Ok(format!(
        "{} instances, δ=1, n ≤ 10, modulus reaches 0",
        s.len()
    ))
}

/// ε values with `ε/3` dyadic.
const EPS3: [f64; 4] = [0.1875, 0.75, 3.0, 12.0];

fn c7_eps_budget(s: &[Instance]) -> Outcome {
    let mut cases = 0usize;
    let mut payoffs = 0usize;
    for inst in s {
        let mut fs = vec![planted(inst)];
        if inst.summary.gap == Gap::Value(0.0) {
            fs.push(inst.f.clone());
        }
        for f in fs {
            payoffs += 1;
            let sm = summarize(&f);
            for &eps in &EPS3 {
                let set = eps_saddle_set_with(&sm, eps, 0.0).map_err(|e| e.to_string())?;
                for (x0, y0) in set.members().collect::<Vec<_>>() {
                    match eps_saddle_perturbation_with(&f, &sm, x0, y0, eps, 0.0) {
                        Ok(p) => {
                            cases += 1;
                            let (nk, nr) = (sup(p.pair.on_x.values()), sup(p.pair.on_y.values()));
                            check(nk < eps && nr < eps, || {
                                format!("seed {}: norms {nk}, {nr} ≥ ε = {eps}", inst.seed)
                            })?;
                        }
                        Err(Error::Precondition(_)) if !f.get(x0, y0).is_finite() => {}
                        Err(e) => return Err(format!("seed {}: {e}", inst.seed)),
                    }
                }
            }
        }
    }
    Ok(format!(
        "{payoffs} zero-gap payoffs, {cases} ε-saddle relocations with norms < ε"
    ))
}

/// `f` rounded down to multiples of 4, then given a saddle: many ties, so
/// many ε-saddle points to relocate onto.
fn coarse_planted(f: &BiFunction) -> BiFunction {
    let rows = f
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| (v / 4.0).floor() * 4.0).collect())
        .collect();
    let c = BiFunction::new(f.x_space().clone(), f.y_space().clone(), rows).unwrap();
    let cs = summarize(&c);
    let (x0, y0) = optimal_anchor(&cs);
    saddle_perturbation_with(&c, &cs, x0, y0, 1.0, 1.0, 0.0)
        .unwrap()
        .pair
        .combined
}

fn c8_usc(s: &[Instance]) -> Outcome {
    let mut escaped = 0usize;
    let mut contained = 0usize;
    for (k, inst) in s.iter().take(100).enumerate() {
        let seed = 1000 + k as u64;
        for f in [planted(inst), coarse_planted(&inst.f)] {
            let (e, c) = probe_planted(&f, seed)?;
            escaped += e;
            contained += c;
        }

        let (x0, y0) = optimal_anchor(&inst.summary);
        let wp = wellposed_perturbation(&inst.f, x0, y0, 1.0, 1.0, 1.0, 53, 0.0)
            .map_err(|e| e.to_string())?;
        let g = &wp.sharpened;
        let zx = ScalarField::zeros(g.x_space().clone());
        let zy = ScalarField::zeros(g.y_space().clone());
        let m = value_margin(g, x0, y0);
        let rho = if m.is_finite() { m / 5.0 } else { 1.0 };
        let target = Neighborhood::point(x0, y0);
        let p = usc_adversary_probe(g, &zx, &zy, &target, rho, 20, seed, 0.0)
            .map_err(|e| e.to_string())?;
        check(!p.escaped(), || {
            format!("seed {seed}: escaped with ρ = m/5 = {rho}")
        })?;
        let z = BiFunction::new(
            g.x_space().clone(),
            g.y_space().clone(),
            vec![vec![0.0; g.ny()]; g.nx()],
        )
        .unwrap();
        let p = product_usc_probe(g, &z, &target, rho, 20, seed, 0.0).map_err(|e| e.to_string())?;
        check(!p.escaped(), || {
            format!("seed {seed}: product probe escaped with ρ = m/5")
        })?;
        contained += 2;
    }
    Ok(format!(
        "100 instances: {escaped} escapes verified exactly, {contained} contained verdicts"
    ))
}

/// Probes a zero-gap payoff at several radii around its first saddle;
/// returns `(escaped, contained)` counts.
fn probe_planted(f: &BiFunction, seed: u64) -> std::result::Result<(usize, usize), String> {
    let (mut escaped, mut contained) = (0, 0);
    let zx = ScalarField::zeros(f.x_space().clone());
    let zy = ScalarField::zeros(f.y_space().clone());
    let sols = brute_force_saddles(f);
    let target = Neighborhood::point(sols[0].0, sols[0].1);
    {
        for rho in [0.0009765625, 0.0625, 1.0, 4.0] {
            let p = usc_adversary_probe(f, &zx, &zy, &target, rho, 20, seed, 0.0)
                .map_err(|e| e.to_string())?;
            if let Some(w) = p.witness() {
                escaped += 1;
                let Offset::Separable { ds, du } = &w.offset else {
                    return Err("separable probe returned a joint witness".into());
                };
                check(sup(ds) <= rho && sup(du) <= rho, || {
                    format!("seed {seed}: witness over budget")
                })?;
                let g = f
                    .shifted(
                        &ScalarField::new(f.x_space().clone(), ds.clone()).unwrap(),
                        &ScalarField::new(f.y_space().clone(), du.clone()).unwrap(),
                    )
                    .unwrap();
                let exact = brute_force_saddles(&g);
                check(exact.iter().any(|&q| !target.contains(q)), || {
                    format!("seed {seed}: witness does not leave the target: {exact:?}")
                })?;
            } else {
                contained += 1;
            }
            if sols.len() > 1 && rho > 0.0 {
                check(p.escaped(), || {
                    format!(
                        "seed {seed}: non-singleton solution set {sols:?} but contained at ρ={rho}"
                    )
                })?;
            }
        }
    }
    Ok((escaped, contained))
}

fn c9_witnesses() -> Outcome {
    let mut r = rng(0x9a9);
    for t in 0..200 {
        let n = r.gen_range(2..=20);
        let space = common::random_space(&mut r, n);
        let x0 = r.gen_range(0..n);
        let mut set: Vec<usize> = (0..n).filter(|&x| x != x0 && r.gen_bool(0.5)).collect();
        if set.is_empty() {
            set.push((x0 + 1) % n);
        }
        let h = characteristic_regularity_witness(&space, &set, x0).map_err(|e| e.to_string())?;
        check(
            h.field.get(x0) == 0.0
                && set.iter().all(|&a| h.field.get(a) == 1.0)
                && h.field.sup_norm() == 1.0,
            || format!("triple {t}: witness {:?}", h.values()),
        )?;
        let min_h = (0..n)
            .filter(|&x| x != x0)
            .map(|x| space.dist(x, x0) / (1.0 + space.dist(x, x0)) / 2.0)
            .fold(f64::INFINITY, f64::min);
        let depth = (1.0 / min_h).ceil() as usize + 2;
        let lb = local_base_sets(&space, x0, 1.0, depth).map_err(|e| e.to_string())?;
        let nested = lb
            .sets
            .windows(2)
            .all(|w| w[1].iter().all(|x| w[0].contains(x)));
        check(nested && lb.sets.iter().all(|s| s.contains(&x0)), || {
            format!("triple {t}: not nested")
        })?;
        check(lb.sets.last().unwrap() == &vec![x0], || {
            format!("triple {t}: intersection {:?}", lb.sets.last())
        })?;
    }
    Ok("200 triples: h(x0)=0, h|A=1, ‖h‖=1; local bases nested down to {x0}".into())
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report =
        |id: u32, name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
            let t = Instant::now();
            let mut res = f();
            let el = t.elapsed();
            if let (Ok(_), Some(l)) = (&res, limit) {
                if el > l {
                    res = Err(format!("runtime {el:.2?} exceeds {l:?}"));
                }
            }
            match res {
                Ok(d) => println!("PASS criterion {id} ({name}) [{el:.2?}]: {d}"),
                Err(d) => {
                    failures += 1;
                    println!("FAIL criterion {id} ({name}) [{el:.2?}]: {d}");
                }
            }
        };

    report(
        1,
        "counterexample reproduction",
        None,
        &mut c1_counterexample,
    );
    let t = Instant::now();
    let s = suite(SUITE_SIZE, SUITE_SEED, 20);
    let gen = t.elapsed();
    report(
        2,
        "saddle perturbation postconditions",
        Some(Duration::from_secs(30) - gen),
        &mut || c2_saddle_suite(&s),
    );
    report(3, "KR norm equality", None, &mut || c3_kr_equality(&s));
    report(4, "weak duality", None, &mut || c4_weak_duality(&s));
    report(5, "oracle equivalence", None, &mut || c5_oracle(&s));
    report(6, "well-posedness sharpening", None, &mut || {
        c6_sharpening(&s)
    });
    report(7, "ε-saddle budget", None, &mut || c7_eps_budget(&s));
    report(
        8,
        "usc probe consistency",
        Some(Duration::from_secs(60)),
        &mut || c8_usc(&s),
    );
    report(9, "characterization witnesses", None, &mut c9_witnesses);

    if failures == 0 {
        println!("acceptance: 9/9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
