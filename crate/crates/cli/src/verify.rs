//! `--verify exhaustive`: re-derives every asserted postcondition from the
//! definitions with plain loops, independently of the library's shortcuts.

use num_rational::Ratio;
use saddlekit::minimax::{BiFunction, SaddleCheck};
use saddlekit::space::ScalarField;
use saddlekit::wellposed::Offset;

use crate::problem::Problem;
use crate::report::{Report, VerificationReport};

struct Checker {
    checks: usize,
    failures: Vec<String>,
}

impl Checker {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }
}

fn is_saddle_def(f: &BiFunction, x0: usize, y0: usize, tol: f64) -> bool {
    let c = f.get(x0, y0);
    c.is_finite()
        && (0..f.nx()).all(|x| f.get(x, y0) <= c + tol)
        && (0..f.ny()).all(|y| f.get(x0, y) >= c - tol)
}

fn saddles_def(f: &BiFunction, tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x in 0..f.nx() {
        for y in 0..f.ny() {
            if is_saddle_def(f, x, y, tol) {
                out.push((x, y));
            }
        }
    }
    out
}

// Plain index loops on purpose: this is the independent recomputation.
#[allow(clippy::needless_range_loop)]
fn marginals(f: &BiFunction) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![f64::INFINITY; f.nx()];
    let mut w = vec![f64::NEG_INFINITY; f.ny()];
    for x in 0..f.nx() {
        for y in 0..f.ny() {
            let c = f.get(x, y);
            if c < v[x] {
                v[x] = c;
            }
            if c > w[y] {
                w[y] = c;
            }
        }
    }
    (v, w)
}

fn table(rows: &[Vec<f64>], like: &BiFunction) -> Option<BiFunction> {
    BiFunction::new(
        like.x_space().clone(),
        like.y_space().clone(),
        rows.to_vec(),
    )
    .ok()
}

pub fn exhaustive(report: &mut Report, problem: Option<&Problem>) {
    let tol = report.tolerance;
    let mut c = Checker {
        checks: 0,
        failures: Vec::new(),
    };

    if let Some(p) = problem {
        let f = &p.f;
        let (v, w) = marginals(f);
        if let Some(s) = report
            .summary
            .as_ref()
            .filter(|_| report.perturbation.is_none())
        {
            c.check(s.v == v && s.w == w, || {
                "marginals differ from a direct scan".into()
            });
            let big_v = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let big_w = w.iter().copied().fold(f64::INFINITY, f64::min);
            c.check(s.lower_value == big_v && s.upper_value == big_w, || {
                "values V, W differ".into()
            });
            if big_v.is_finite() && big_w.is_finite() {
                c.check(big_w >= big_v, || {
                    format!("weak duality fails: W = {big_w} < V = {big_v}")
                });
            }
        }
        if let Some(list) = &report.saddles {
            let pts: Vec<_> = list.iter().map(|s| s.point).collect();
            c.check(pts == saddles_def(f, tol), || {
                "saddle list differs from the double loop".into()
            });
        }
        if let (Some(chk), Some((x0, y0))) = (&report.saddle_check, report.point) {
            let def = is_saddle_def(f, x0, y0, tol);
            c.check(def == chk.is_certified(), || {
                format!("definition says saddle = {def}")
            });
            if let SaddleCheck::Certified(cert) = chk {
                c.check(cert.point == (x0, y0), || {
                    "certificate names another point".into()
                });
            }
        }
        if let Some(set) = &report.eps_saddle {
            let big_v = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let big_w = w.iter().copied().fold(f64::INFINITY, f64::min);
            let xs: Vec<usize> = (0..f.nx())
                .filter(|&x| v[x] > big_v - set.eps / 3.0)
                .collect();
            let ys: Vec<usize> = (0..f.ny())
                .filter(|&y| w[y] < big_w + set.eps / 3.0)
                .collect();
            c.check(xs == set.xs && ys == set.ys, || {
                "ε-saddle membership differs".into()
            });
        }
        if let Some(m) = &report.modulus {
            let big_v = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let big_w = w.iter().copied().fold(f64::INFINITY, f64::min);
            for (k, &eps) in m.eps_grid.iter().enumerate() {
                let xs: Vec<usize> = (0..f.nx()).filter(|&x| v[x] > big_v - eps / 3.0).collect();
                let ys: Vec<usize> = (0..f.ny()).filter(|&y| w[y] < big_w + eps / 3.0).collect();
                let mut diam = 0.0f64;
                for &a in &xs {
                    for &b in &xs {
                        diam = diam.max(f.x_space().dist(a, b));
                    }
                }
                for &a in &ys {
                    for &b in &ys {
                        diam = diam.max(f.y_space().dist(a, b));
                    }
                }
                c.check(m.diam[k] == diam, || {
                    format!("diameter at ε = {eps} differs: {diam}")
                });
            }
        }
        if let Some(pr) = &report.perturbation {
            for t in &pr.tables {
                let norm = t.values.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                c.check(norm == t.norm && t.budget.admits(norm), || {
                    format!(
                        "{}: norm {norm} vs budget {} {}",
                        t.name,
                        t.budget.symbol(),
                        t.budget.bound
                    )
                });
                c.check(
                    t.values.iter().all(|&v| v >= 0.0) && t.values[t.anchor] == 0.0,
                    || format!("{}: not nonnegative or nonzero at its anchor", t.name),
                );
            }
            let get = |n: &str| pr.tables.iter().find(|t| t.name == n);
            match pr.mode.as_str() {
                "min" | "strong-min" => {
                    let y0 = pr.y0.unwrap_or(0);
                    let h = &get("h").unwrap().values;
                    let lifted: Vec<f64> = (0..f.nx()).map(|x| f.get(x, y0) + h[x]).collect();
                    let at = lifted[pr.x0];
                    let strict = pr.mode == "strong-min";
                    c.check(
                        (0..f.nx()).all(|x| {
                            x == pr.x0
                                || if strict {
                                    lifted[x] > at
                                } else {
                                    lifted[x] >= at
                                }
                        }),
                        || {
                            format!(
                                "{} is not the {}minimizer",
                                pr.x0 + 1,
                                if strict { "unique " } else { "" }
                            )
                        },
                    );
                    let col: Vec<Vec<f64>> = lifted.iter().map(|&v| vec![v]).collect();
                    c.check(col == pr.combined, || "reported f + h differs".into());
                }
                mode => {
                    let y0 = pr.y0.unwrap();
                    let (a, b) = match mode {
                        "supinf" => ("q", "p"),
                        "infsup" => ("h", "g"),
                        _ => ("k", "r"),
                    };
                    let (ka, rb) = (&get(a).unwrap().values, &get(b).unwrap().values);
                    let mut rows: Vec<Vec<f64>> = (0..f.nx())
                        .map(|x| (0..f.ny()).map(|y| f.get(x, y) - ka[x] + rb[y]).collect())
                        .collect();
                    if mode == "wellposed" {
                        let (k2, r2) = (&get("k'").unwrap().values, &get("r'").unwrap().values);
                        for (x, row) in rows.iter_mut().enumerate() {
                            for (y, cell) in row.iter_mut().enumerate() {
                                *cell = *cell - k2[x] + r2[y];
                            }
                        }
                    }
                    c.check(rows == pr.combined, || {
                        "reported perturbed payoff differs".into()
                    });
                    if let Some(g) = table(&rows, f) {
                        let (gv, gw) = marginals(&g);
                        let c0 = g.get(pr.x0, y0);
                        match mode {
                            "supinf" => c.check(
                                gv.iter().all(|&v| v <= gv[pr.x0] + tol)
                                    && (gv[pr.x0] - c0).abs() <= tol,
                                || "supinf not solved at the anchor".into(),
                            ),
                            "infsup" => c.check(
                                gw.iter().all(|&w| w >= gw[y0] - tol) && (gw[y0] - c0).abs() <= tol,
                                || "infsup not solved at the anchor".into(),
                            ),
                            "wellposed" => c
                                .check(saddles_def(&g, tol) == vec![(pr.x0, y0)], || {
                                    "anchor is not the unique saddle".into()
                                }),
                            _ => c.check(is_saddle_def(&g, pr.x0, y0, tol), || {
                                "anchor is not a saddle of f - k + r".into()
                            }),
                        }
                    }
                    if let (Some(kq), Some(kh)) = (get("q"), get("h")) {
                        let k = &get("k").unwrap().values;
                        c.check(
                            (0..f.nx()).all(|x| k[x] == kq.values[x] + kh.values[x]),
                            || "k != q + h".into(),
                        );
                    }
                    if let (Some(rp), Some(rg)) = (get("p"), get("g")) {
                        if mode != "infsup" {
                            let r = &get("r").unwrap().values;
                            c.check(
                                (0..f.ny()).all(|y| r[y] == rp.values[y] + rg.values[y]),
                                || "r != p + g".into(),
                            );
                        }
                    }
                }
            }
        }
        if let Some(probe) = &report.probe {
            for (k, smp) in probe.samples.iter().enumerate() {
                let g = match &smp.offset {
                    Offset::Separable { ds, du } => {
                        let (nx, ny) = smp.offset.norms();
                        c.check(nx <= probe.rho && ny <= probe.rho, || {
                            format!("sample {k} over budget")
                        });
                        let s = ScalarField::new(f.x_space().clone(), ds.clone());
                        let u = ScalarField::new(f.y_space().clone(), du.clone());
                        match (s, u) {
                            (Ok(s), Ok(u)) => f.shifted(&s, &u).ok(),
                            _ => None,
                        }
                    }
                    Offset::Joint { dz } => {
                        c.check(smp.offset.norms().0 <= probe.rho, || {
                            format!("sample {k} over budget")
                        });
                        table(dz, f).and_then(|z| f.plus_joint(&z).ok())
                    }
                };
                let Some(g) = g else {
                    c.check(false, || format!("sample {k}: malformed offset"));
                    continue;
                };
                let sols = saddles_def(&g, probe.tolerance);
                c.check(sols == smp.solutions, || {
                    format!("sample {k}: solution set differs")
                });
                let out = sols.iter().any(|&q| !probe.target.contains(q));
                c.check(out == smp.escaped, || {
                    format!("sample {k}: escape flag differs")
                });
            }
        }
    }

    if let Some(ce) = &report.counterexample {
        let n = ce.n as i64;
        let (i, j) = ce.saddle.point;
        let xs: Vec<f64> = (0..ce.n).map(|k| ce.x_grid.sample(k)).collect();
        let ys: Vec<f64> = (0..ce.n).map(|k| ce.y_grid.sample(k)).collect();
        let c0 = xs[i] - ys[j];
        c.check(
            (0..ce.n).all(|x| xs[x] - ys[j] <= c0) && (0..ce.n).all(|y| xs[i] - ys[y] >= c0),
            || "grid saddle fails the definition".into(),
        );
        let one = Ratio::from_integer(1i64);
        let d = (one - Ratio::new(i as i64 + 1, n + 1)).max(one - Ratio::new(j as i64 + 1, n));
        c.check((*d.numer(), *d.denom()) == ce.corner_distance_exact, || {
            "corner distance differs".into()
        });
    }

    report.say(format!(
        "exhaustive verification: {} checks, {} failures",
        c.checks,
        c.failures.len()
    ));
    report.verification = Some(VerificationReport {
        mode: "exhaustive".into(),
        checks: c.checks,
        failures: c.failures,
    });
}
