//! Problem files: two spaces, a payoff and run options, as JSON.

use std::path::Path;
use std::sync::Arc;

use saddlekit::ext::Ext;
use saddlekit::minimax::BiFunction;
use saddlekit::space::{build_grid, validate_metric, GridSpec, MetricSpace};
use serde::Deserialize;

use crate::error::CliError;
use crate::expr;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: Option<String>,
    /// Shorthand for `x` and `y` being the same space.
    space: Option<RawSpace>,
    x: Option<RawSpace>,
    y: Option<RawSpace>,
    payoff: RawPayoff,
    #[serde(default)]
    options: Options,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    grid: Option<RawGrid>,
    coords: Option<Vec<f64>>,
    discrete: Option<usize>,
    dist: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    lower: f64,
    upper: f64,
    #[serde(default)]
    lower_open: bool,
    #[serde(default)]
    upper_open: bool,
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPayoff {
    table: Option<Vec<Vec<Ext>>>,
    expr: Option<String>,
}

/// Defaults for command parameters; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub tolerance: Option<f64>,
    pub eps: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub delta: Option<f64>,
    pub terms: Option<u32>,
    pub eps_grid: Option<Vec<f64>>,
    pub rho: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub float_profile: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffSource {
    Table,
    Expr(String),
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub f: BiFunction,
    pub source: PayoffSource,
    pub grids: (Option<GridSpec>, Option<GridSpec>),
    pub options: Options,
}

pub fn parse_problem(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let default_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_problem_str(&text, &default_name)
}

pub fn parse_problem_str(text: &str, default_name: &str) -> Result<Problem, CliError> {
    let raw: RawProblem =
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("problem file: {e}")))?;
    let (rx, ry) = match (raw.space, raw.x, raw.y) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Input(
                "problem file: give either `space` or `x`/`y`, not both".into(),
            ))
        }
        (Some(s), None, None) => {
            let (sp, grid) = build_space(s, "space")?;
            ((sp.clone(), grid), (sp, grid))
        }
        (None, x, y) => {
            let (tx, ty) = table_shape(&raw.payoff);
            (space_or_default(x, "x", tx)?, space_or_default(y, "y", ty)?)
        }
    };
    let ((xs, gx), (ys, gy)) = (rx, ry);
    let options = raw.options;
    let (f, source) = match (raw.payoff.table, raw.payoff.expr) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(CliError::Input(
                "payoff: give exactly one of `table` or `expr`".into(),
            ))
        }
        (Some(table), None) => (table_payoff(table, xs, ys)?, PayoffSource::Table),
        (None, Some(src)) => (
            expr_payoff(&src, xs, ys, options.float_profile)?,
            PayoffSource::Expr(src),
        ),
    };
    if let Some(t) = options.tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Input(format!(
                "options.tolerance: must be finite and >= 0, got {t}"
            )));
        }
    }
    Ok(Problem {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        f,
        source,
        grids: (gx, gy),
        options,
    })
}

fn table_shape(p: &RawPayoff) -> (Option<usize>, Option<usize>) {
    match &p.table {
        Some(t) => (Some(t.len()), t.first().map(|r| r.len())),
        None => (None, None),
    }
}

type BuiltSpace = (Arc<MetricSpace>, Option<GridSpec>);

fn space_or_default(
    s: Option<RawSpace>,
    field: &str,
    len: Option<usize>,
) -> Result<BuiltSpace, CliError> {
    match (s, len) {
        (Some(s), _) => build_space(s, field),
        (None, Some(n)) => Ok((
            Arc::new(
                MetricSpace::discrete(n).map_err(|e| CliError::Input(format!("{field}: {e}")))?,
            ),
            None,
        )),
        (None, None) => Err(CliError::Input(format!(
            "{field}: missing space (required for expression payoffs)"
        ))),
    }
}

fn build_space(s: RawSpace, field: &str) -> Result<BuiltSpace, CliError> {
    let err = |e: saddlekit::Error| CliError::Input(format!("{field}: {e}"));
    let kinds = [
        s.grid.is_some(),
        s.coords.is_some(),
        s.discrete.is_some(),
        s.dist.is_some(),
    ];
    if kinds.iter().filter(|&&k| k).count() != 1 {
        return Err(CliError::Input(format!(
            "{field}: give exactly one of `grid`, `coords`, `discrete` or `dist`"
        )));
    }
    let (space, grid) = if let Some(g) = s.grid {
        if s.labels.is_some() {
            return Err(CliError::Input(format!(
                "{field}: grids are labelled by their samples"
            )));
        }
        let spec = GridSpec::new(g.lower, g.upper, g.lower_open, g.upper_open, g.n);
        (build_grid(&spec).map_err(err)?, Some(spec))
    } else if let Some(c) = s.coords {
        (MetricSpace::from_coords(c).map_err(err)?, None)
    } else if let Some(n) = s.discrete {
        (MetricSpace::discrete(n).map_err(err)?, None)
    } else {
        (validate_metric(s.dist.unwrap()).map_err(err)?, None)
    };
    let space = match s.labels {
        Some(l) => space.with_labels(l).map_err(err)?,
        None => space,
    };
    Ok((Arc::new(space), grid))
}

fn table_payoff(
    table: Vec<Vec<Ext>>,
    xs: Arc<MetricSpace>,
    ys: Arc<MetricSpace>,
) -> Result<BiFunction, CliError> {
    if table.len() != xs.len() {
        return Err(CliError::Input(format!(
            "payoff.table: {} rows but x has {} points",
            table.len(),
            xs.len()
        )));
    }
    if let Some((i, r)) = table.iter().enumerate().find(|(_, r)| r.len() != ys.len()) {
        return Err(CliError::Input(format!(
            "payoff.table: row {} has {} entries but y has {} points",
            i + 1,
            r.len(),
            ys.len()
        )));
    }
    let rows = table
        .into_iter()
        .map(|r| r.into_iter().map(|e| e.0).collect())
        .collect();
    BiFunction::new(xs, ys, rows).map_err(|e| CliError::Input(format!("payoff.table: {e}")))
}

fn expr_payoff(
    src: &str,
    xs: Arc<MetricSpace>,
    ys: Arc<MetricSpace>,
    float_profile: bool,
) -> Result<BiFunction, CliError> {
    let c = expr::compile(src, float_profile)
        .map_err(|e| CliError::Input(format!("payoff.expr: {e}")))?;
    let coords = |s: &MetricSpace, axis: &str| -> Result<Vec<f64>, CliError> {
        s.coords().map(<[f64]>::to_vec).ok_or_else(|| {
            CliError::Input(format!(
                "payoff.expr: {axis} has no coordinates; use `grid` or `coords`"
            ))
        })
    };
    let (cx, cy) = (coords(&xs, "x")?, coords(&ys, "y")?);
    let mut rows = Vec::with_capacity(cx.len());
    for &x in &cx {
        let mut row = Vec::with_capacity(cy.len());
        for &y in &cy {
            let v = c.expr.eval(x, y);
            if v.is_nan() || (v.is_infinite() && !c.allows_infinite) {
                return Err(CliError::Input(format!(
                    "payoff.expr: value {v} at (x={x}, y={y}); only expressions mentioning `inf` may be infinite"
                )));
            }
            row.push(v);
        }
        rows.push(row);
    }
    BiFunction::new(xs, ys, rows).map_err(|e| CliError::Input(format!("payoff.expr: {e}")))
}
