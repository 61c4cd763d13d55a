//! One function per subcommand, each producing a [`Report`].

use std::collections::BTreeMap;

use saddlekit::ext::fmt_ext;
use saddlekit::minimax::{
    check_assumptions_from, discretized_counterexample, enumerate_saddles_with,
    eps_saddle_set_with, gap_display, is_saddle, summarize, BiFunction, MinimaxSummary,
    SaddleCheck, SaddleViolation,
};
use saddlekit::perturb::{
    eps_saddle_perturbation_with, infsup_perturbation, kr_min_perturbation,
    kr_strong_min_perturbation, saddle_perturbation_with, supinf_perturbation,
    wellposed_perturbation, Perturbation, PerturbationPair, SaddlePerturbation,
    DEFAULT_SHARPENER_TERMS,
};
use saddlekit::space::{MetricSpace, ScalarField};
use saddlekit::wellposed::{
    default_eps_grid, modulus_with, product_usc_probe, usc_adversary_probe, Neighborhood,
};

use crate::error::CliError;
use crate::problem::{PayoffSource, Problem};
use crate::report::{PerturbationReport, PerturbationTable, ProblemInfo, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Min,
    StrongMin,
    Supinf,
    Infsup,
    Saddle,
    EpsSaddle,
    Wellposed,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Min => "min",
            Mode::StrongMin => "strong-min",
            Mode::Supinf => "supinf",
            Mode::Infsup => "infsup",
            Mode::Saddle => "saddle",
            Mode::EpsSaddle => "eps-saddle",
            Mode::Wellposed => "wellposed",
        }
    }
}

/// Numeric parameters gathered from flags, falling back to problem options.
#[derive(Debug, Clone, Default)]
pub struct Params {
    pub eps: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub delta: Option<f64>,
    pub terms: Option<u32>,
}

impl Params {
    pub fn with_defaults(mut self, p: &Problem) -> Self {
        let o = &p.options;
        self.eps = self.eps.or(o.eps);
        self.eps1 = self.eps1.or(o.eps1);
        self.eps2 = self.eps2.or(o.eps2);
        self.delta = self.delta.or(o.delta);
        self.terms = self.terms.or(o.terms);
        self
    }
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| {
        CliError::Input(format!(
            "--{flag} is required (or set options.{})",
            flag.replace('-', "_")
        ))
    })
}

pub fn problem_info(p: &Problem) -> ProblemInfo {
    let labels = |s: &MetricSpace| (0..s.len()).map(|i| s.label(i)).collect();
    ProblemInfo {
        name: p.name.clone(),
        nx: p.f.nx(),
        ny: p.f.ny(),
        x_labels: labels(p.f.x_space()),
        y_labels: labels(p.f.y_space()),
        payoff: match &p.source {
            PayoffSource::Table => "table".into(),
            PayoffSource::Expr(e) => format!("expr {e}"),
        },
        x_grid: p.grids.0,
        y_grid: p.grids.1,
    }
}

fn base_report(command: &str, p: &Problem, tol: f64) -> Report {
    let mut r = Report::new(command, tol);
    r.problem = Some(problem_info(p));
    r
}

fn xl(f: &BiFunction, i: usize) -> String {
    point_label(f.x_space(), 'x', i)
}

fn yl(f: &BiFunction, j: usize) -> String {
    point_label(f.y_space(), 'y', j)
}

fn point_label(s: &MetricSpace, axis: char, i: usize) -> String {
    match s.labels() {
        Some(l) => format!("{axis}{} ({})", i + 1, l[i]),
        None => match s.coords() {
            Some(c) => format!("{axis}{} ({})", i + 1, c[i]),
            None => format!("{axis}{}", i + 1),
        },
    }
}

/// Resolves `x3`, `3` (1-based) or a point label to an index.
pub fn resolve_point(token: &str, s: &MetricSpace, axis: char) -> Result<usize, CliError> {
    let t = token.trim();
    if let Some(i) = s.labels().and_then(|l| l.iter().position(|l| l == t)) {
        return Ok(i);
    }
    let digits = t
        .strip_prefix(axis)
        .or_else(|| t.strip_prefix(axis.to_ascii_uppercase()))
        .unwrap_or(t);
    match digits.parse::<usize>() {
        Ok(k) if (1..=s.len()).contains(&k) => Ok(k - 1),
        _ => Err(CliError::Input(format!(
            "no point {t:?} on {axis} (use {axis}1..{axis}{} or a label)",
            s.len()
        ))),
    }
}

pub fn parse_at(at: &str, f: &BiFunction) -> Result<(usize, Option<usize>), CliError> {
    let parts: Vec<&str> = at.split(',').collect();
    match parts.as_slice() {
        [x] => Ok((resolve_point(x, f.x_space(), 'x')?, None)),
        [x, y] => Ok((
            resolve_point(x, f.x_space(), 'x')?,
            Some(resolve_point(y, f.y_space(), 'y')?),
        )),
        _ => Err(CliError::Input(format!("--at expects x[,y], got {at:?}"))),
    }
}

fn summary_lines(r: &mut Report, f: &BiFunction, s: &MinimaxSummary) {
    r.say(format!(
        "V = {}, W = {}, gap = {}",
        fmt_ext(s.lower_value),
        fmt_ext(s.upper_value),
        gap_display(s.gap)
    ));
    let xs: Vec<String> = s.sup_argset.iter().map(|&i| xl(f, i)).collect();
    let ys: Vec<String> = s.inf_argset.iter().map(|&j| yl(f, j)).collect();
    r.say(format!(
        "argmax v = {{{}}}, argmin w = {{{}}}",
        xs.join(", "),
        ys.join(", ")
    ));
}

pub fn analyze(p: &Problem, tol: f64) -> Result<Report, CliError> {
    let f = &p.f;
    let s = summarize(f);
    let mut r = base_report("analyze", p, tol);
    summary_lines(&mut r, f, &s);
    let a = check_assumptions_from(&s);
    for (name, v) in [("A1", &a.a1), ("A2", &a.a2), ("A3", &a.a3), ("A4", &a.a4)] {
        r.say(format!(
            "({name}) {}: {}",
            if v.holds { "holds" } else { "fails" },
            v.detail
        ));
    }
    let saddles = enumerate_saddles_with(f, &s, tol);
    if saddles.is_empty() {
        r.say("no saddle point");
    }
    for c in &saddles {
        r.say(format!(
            "saddle ({}, {}) value {}",
            xl(f, c.point.0),
            yl(f, c.point.1),
            c.value
        ));
    }
    r.summary = Some(s);
    r.assumptions = Some(a);
    r.saddles = Some(saddles);
    Ok(r)
}

pub fn saddle_check(p: &Problem, at: &str, tol: f64) -> Result<Report, CliError> {
    let f = &p.f;
    let (x0, y0) = match parse_at(at, f)? {
        (x, Some(y)) => (x, y),
        _ => return Err(CliError::Input("--at needs both x and y".into())),
    };
    let check = is_saddle(f, x0, y0, tol)?;
    let mut r = base_report("saddle-check", p, tol);
    match &check {
        SaddleCheck::Certified(c) => r.say(format!(
            "certified: ({}, {}) is a saddle point with value {} ({} rows, {} columns checked)",
            xl(f, x0),
            yl(f, y0),
            c.value,
            c.checked_rows,
            c.checked_cols
        )),
        SaddleCheck::Refused(SaddleViolation::Row { x, deviation, .. }) => r.say(format!(
            "refused: f({}, {}) exceeds f({}, {}) by {}",
            xl(f, *x),
            yl(f, y0),
            xl(f, x0),
            yl(f, y0),
            fmt_ext(*deviation)
        )),
        SaddleCheck::Refused(SaddleViolation::Column { y, deviation, .. }) => r.say(format!(
            "refused: f({}, {}) is below f({}, {}) by {}",
            xl(f, x0),
            yl(f, *y),
            xl(f, x0),
            yl(f, y0),
            fmt_ext(*deviation)
        )),
    }
    r.summary = Some(summarize(f));
    r.point = Some((x0, y0));
    r.saddle_check = Some(check);
    Ok(r)
}

pub fn eps_saddle(p: &Problem, eps: Option<f64>, tol: f64) -> Result<Report, CliError> {
    let eps = need(eps.or(p.options.eps), "eps")?;
    let f = &p.f;
    let s = summarize(f);
    let set = eps_saddle_set_with(&s, eps, tol)?;
    let mut r = base_report("eps-saddle", p, tol);
    summary_lines(&mut r, f, &s);
    r.say(format!(
        "ε = {eps}: {}×{} ε-saddle points, diameter {}",
        set.xs.len(),
        set.ys.len(),
        set.diameter(f.x_space(), f.y_space())
    ));
    r.summary = Some(s);
    r.eps_saddle = Some(set);
    Ok(r)
}

fn budget_line(name: &str, t: &Perturbation) -> String {
    format!(
        "‖{name}‖={} {} {} ({})",
        t.norm,
        t.budget.symbol(),
        t.budget.bound,
        t.budget.expression
    )
}

fn pair_report(
    mode: Mode,
    x0: usize,
    y0: usize,
    names: (&str, &str),
    pair: &PerturbationPair,
    params: BTreeMap<String, f64>,
) -> PerturbationReport {
    PerturbationReport {
        mode: mode.name().into(),
        convention: format!("f - {} + {}", names.0, names.1),
        x0,
        y0: Some(y0),
        parameters: params,
        tables: vec![
            PerturbationTable::new(names.0, &pair.on_x),
            PerturbationTable::new(names.1, &pair.on_y),
        ],
        combined: pair.combined.rows(),
        certificate: None,
        truncation_error: None,
    }
}

fn saddle_tables(sp: &SaddlePerturbation) -> Vec<PerturbationTable> {
    vec![
        PerturbationTable::new("k", &sp.pair.on_x),
        PerturbationTable::new("r", &sp.pair.on_y),
        PerturbationTable::new("q", &sp.supinf.on_x),
        PerturbationTable::new("p", &sp.supinf.on_y),
        PerturbationTable::new("h", &sp.infsup.on_x),
        PerturbationTable::new("g", &sp.infsup.on_y),
    ]
}

pub fn perturb(
    p: &Problem,
    mode: Mode,
    at: &str,
    params: Params,
    tol: f64,
) -> Result<Report, CliError> {
    let f = &p.f;
    let params = params.with_defaults(p);
    let (x0, y0) = parse_at(at, f)?;
    let mut r = base_report("perturb", p, tol);
    let mut pm = BTreeMap::new();
    let need_y =
        || y0.ok_or_else(|| CliError::Input(format!("--mode {} needs --at x,y", mode.name())));

    match mode {
        Mode::Min | Mode::StrongMin => {
            let col = match (y0, f.ny()) {
                (Some(y), _) => y,
                (None, 1) => 0,
                _ => {
                    return Err(CliError::Input(
                        "min modes act on the column f(., y0); give --at x,y when |Y| > 1".into(),
                    ))
                }
            };
            let f1 = f.column_field(col);
            let h = if mode == Mode::Min {
                kr_min_perturbation(&f1, x0, tol)?
            } else {
                let eps = need(params.eps, "eps")?;
                pm.insert("eps".into(), eps);
                kr_strong_min_perturbation(&f1, x0, eps, tol)?
            };
            let lifted = f1.add(&h.field)?;
            r.say(format!(
                "min of f(., {}) + h is attained at {}: {}",
                yl(f, col),
                xl(f, x0),
                lifted.get(x0)
            ));
            if mode == Mode::StrongMin {
                r.say(format!("{} is the unique minimizer", xl(f, x0)));
            }
            r.say(budget_line("h", &h));
            r.perturbation = Some(PerturbationReport {
                mode: mode.name().into(),
                convention: format!("f(., {}) + h", yl(f, col)),
                x0,
                y0: Some(col),
                parameters: pm,
                tables: vec![PerturbationTable::new("h", &h)],
                combined: lifted.values().iter().map(|&v| vec![v]).collect(),
                certificate: None,
                truncation_error: None,
            });
        }
        Mode::Supinf | Mode::Infsup => {
            let y0 = need_y()?;
            let eps = need(params.eps, "eps")?;
            let delta = need(params.delta, "delta")?;
            pm.insert("eps".into(), eps);
            pm.insert("delta".into(), delta);
            let (pair, names) = if mode == Mode::Supinf {
                (supinf_perturbation(f, x0, y0, eps, delta, tol)?, ("q", "p"))
            } else {
                (infsup_perturbation(f, x0, y0, eps, delta, tol)?, ("h", "g"))
            };
            let g = &pair.combined;
            let gs = summarize(g);
            if mode == Mode::Supinf {
                r.say(format!(
                    "supinf solved at ({}, {}): v(x0) = V = f(x0,y0) = {}",
                    xl(f, x0),
                    yl(f, y0),
                    g.get(x0, y0)
                ));
            } else {
                r.say(format!(
                    "infsup solved at ({}, {}): w(y0) = W = f(x0,y0) = {}",
                    xl(f, x0),
                    yl(f, y0),
                    g.get(x0, y0)
                ));
            }
            r.say(budget_line(names.0, &pair.on_x));
            r.say(budget_line(names.1, &pair.on_y));
            r.perturbation = Some(pair_report(mode, x0, y0, names, &pair, pm));
            r.summary = Some(gs);
        }
        Mode::Saddle | Mode::EpsSaddle => {
            let y0 = need_y()?;
            let s = summarize(f);
            let sp = if mode == Mode::Saddle {
                let e1 = need(params.eps1, "eps1")?;
                let e2 = need(params.eps2, "eps2")?;
                pm.insert("eps1".into(), e1);
                pm.insert("eps2".into(), e2);
                saddle_perturbation_with(f, &s, x0, y0, e1, e2, tol)?
            } else {
                let eps = need(params.eps, "eps")?;
                pm.insert("eps".into(), eps);
                eps_saddle_perturbation_with(f, &s, x0, y0, eps, tol)?
            };
            pm.insert("gap".into(), sp.gap);
            pm.insert("delta".into(), sp.delta);
            r.say(format!(
                "saddle verified, {}",
                budget_line("k", &sp.pair.on_x)
            ));
            r.say(budget_line("r", &sp.pair.on_y));
            r.say(format!(
                "f - k + r has a saddle at ({}, {}) with value {}",
                xl(f, x0),
                yl(f, y0),
                sp.certificate.value
            ));
            if sp.degenerate() {
                r.say("already a saddle point: nothing moved");
            }
            let mut pr = pair_report(mode, x0, y0, ("k", "r"), &sp.pair, pm);
            pr.tables = saddle_tables(&sp);
            pr.certificate = Some(sp.certificate.clone());
            r.perturbation = Some(pr);
            r.summary = Some(s);
        }
        Mode::Wellposed => {
            let y0 = need_y()?;
            let e1 = need(params.eps1, "eps1")?;
            let e2 = need(params.eps2, "eps2")?;
            let delta = need(params.delta, "delta")?;
            let terms = params.terms.unwrap_or(DEFAULT_SHARPENER_TERMS);
            pm.insert("eps1".into(), e1);
            pm.insert("eps2".into(), e2);
            pm.insert("delta".into(), delta);
            pm.insert("terms".into(), terms as f64);
            let wp = wellposed_perturbation(f, x0, y0, e1, e2, delta, terms, tol)?;
            r.say(format!(
                "unique saddle verified at ({}, {}) with value {}",
                xl(f, x0),
                yl(f, y0),
                wp.certificate.value
            ));
            r.say(budget_line("k", &wp.base.pair.on_x));
            r.say(budget_line("r", &wp.base.pair.on_y));
            r.say(budget_line("k'", &wp.sharpener_x));
            r.say(budget_line("r'", &wp.sharpener_y));
            r.say(format!(
                "series truncated at {} terms, error <= {}",
                wp.n_terms, wp.truncation_error
            ));
            let mut tables = saddle_tables(&wp.base);
            tables.push(PerturbationTable::new("k'", &wp.sharpener_x));
            tables.push(PerturbationTable::new("r'", &wp.sharpener_y));
            r.perturbation = Some(PerturbationReport {
                mode: mode.name().into(),
                convention: "f - k + r - k' + r'".into(),
                x0,
                y0: Some(y0),
                parameters: pm,
                tables,
                combined: wp.sharpened.rows(),
                certificate: Some(wp.certificate.clone()),
                truncation_error: Some(wp.truncation_error),
            });
            r.summary = Some(summarize(&wp.sharpened));
        }
    }
    Ok(r)
}

pub fn wellposed(p: &Problem, grid: Option<Vec<f64>>, tol: f64) -> Result<Report, CliError> {
    let grid = grid
        .or_else(|| p.options.eps_grid.clone())
        .unwrap_or_else(default_eps_grid);
    let f = &p.f;
    let s = summarize(f);
    let m = modulus_with(f, &s, &grid, tol)?;
    let mut r = base_report("wellposed", p, tol);
    summary_lines(&mut r, f, &s);
    for ((e, d), (a, b)) in m.eps_grid.iter().zip(&m.diam).zip(&m.sizes) {
        r.say(format!("ε = {e}: diam {d} ({a}×{b})"));
    }
    match m.unique_solution {
        Some((x, y)) => r.say(format!(
            "ε-saddle sets shrink to the single point ({}, {})",
            xl(f, x),
            yl(f, y)
        )),
        None => r.say("ε-saddle sets do not reach a single point on this grid"),
    }
    r.summary = Some(s);
    r.modulus = Some(m);
    Ok(r)
}

#[derive(Debug, Clone, Default)]
pub struct ProbeArgs {
    pub rho: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub at: Option<String>,
    pub radius: f64,
    pub joint: bool,
}

pub fn probe_usc(p: &Problem, a: ProbeArgs, tol: f64) -> Result<Report, CliError> {
    let f = &p.f;
    let rho = need(a.rho.or(p.options.rho), "rho")?;
    let trials = a.trials.or(p.options.trials).unwrap_or(100);
    let seed = a.seed.or(p.options.seed).unwrap_or(0);
    let (x0, y0) = match &a.at {
        Some(at) => match parse_at(at, f)? {
            (x, Some(y)) => (x, y),
            _ => return Err(CliError::Input("--at needs both x and y".into())),
        },
        None => match enumerate_saddles_with(f, &summarize(f), tol).first() {
            Some(c) => c.point,
            None => {
                return Err(CliError::Core(saddlekit::Error::Precondition(
                    "solution map is empty at the centre (f has no saddle point)".into(),
                )))
            }
        },
    };
    let target = Neighborhood::ball(f, x0, y0, a.radius);
    let probe = if a.joint {
        let z = BiFunction::new(
            f.x_space().clone(),
            f.y_space().clone(),
            vec![vec![0.0; f.ny()]; f.nx()],
        )?;
        product_usc_probe(f, &z, &target, rho, trials, seed, tol)?
    } else {
        let s = ScalarField::zeros(f.x_space().clone());
        let u = ScalarField::zeros(f.y_space().clone());
        usc_adversary_probe(f, &s, &u, &target, rho, trials, seed, tol)?
    };
    let mut r = base_report("probe-usc", p, tol);
    r.say(format!(
        "target: ball of radius {} around ({}, {}), {}×{} points",
        a.radius,
        xl(f, x0),
        yl(f, y0),
        target.xs.len(),
        target.ys.len()
    ));
    r.say(format!("{} (seed {seed})", probe.note));
    match probe.witness() {
        Some(w) => {
            let (nx, ny) = w.offset.norms();
            let sols: Vec<String> = w
                .solutions
                .iter()
                .filter(|&&q| !target.contains(q))
                .map(|&(x, y)| format!("({}, {})", xl(f, x), yl(f, y)))
                .collect();
            r.say(format!(
                "escaped: perturbation with norms ({nx}, {ny}) <= ρ = {rho} has solutions outside the target: {}",
                sols.join(", ")
            ));
        }
        None => r.say(format!(
            "contained: {} perturbations within ρ = {rho} kept every solution inside the target",
            probe.samples.len()
        )),
    }
    r.probe = Some(probe);
    Ok(r)
}

pub fn counterexample(n: usize, tol: f64) -> Result<Report, CliError> {
    let c = discretized_counterexample(n)?;
    let mut r = Report::new("counterexample", tol);
    r.say(format!(
        "f(x,y) = x - y on (0,1) × (0,1], {n} samples per axis"
    ));
    r.say(format!(
        "V = {}, W = {}, gap = {}",
        c.summary.lower_value,
        c.summary.upper_value,
        gap_display(c.summary.gap)
    ));
    r.say(format!(
        "grid saddle at ({}, {}); distance to the excluded corner (1, 1) = {}/{} = {}",
        c.saddle_coords.0,
        c.saddle_coords.1,
        c.corner_distance_exact.0,
        c.corner_distance_exact.1,
        c.corner_distance
    ));
    r.say("the saddle escapes to the excluded boundary as the grid refines: zero gap without a saddle point in the limit");
    r.counterexample = Some(c);
    Ok(r)
}
