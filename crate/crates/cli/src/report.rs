//! Versioned reports: JSON (canonical), markdown digest, CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use saddlekit::ext::{self, fmt_ext};
use saddlekit::minimax::{
    gap_display, AssumptionReport, CounterexampleReport, EpsSaddleSet, MinimaxSummary,
    SaddleCertificate, SaddleCheck,
};
use saddlekit::perturb::{Axis, Budget, Perturbation};
use saddlekit::wellposed::{Offset, SampleOrigin, SolutionMapProbe, WellPosednessModulus};
use saddlekit::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    /// `"table"` or the expression source.
    pub payoff: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_grid: Option<GridSpec>,
}

/// A perturbation as reported; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTable {
    pub name: String,
    pub axis: Axis,
    pub anchor: usize,
    #[serde(with = "ext::vec")]
    pub values: Vec<f64>,
    pub norm: f64,
    pub budget: Budget,
    pub budget_holds: bool,
    pub construction: String,
}

impl PerturbationTable {
    pub fn new(name: &str, p: &Perturbation) -> Self {
        PerturbationTable {
            name: name.to_string(),
            axis: p.axis,
            anchor: p.anchor,
            values: p.values().to_vec(),
            norm: p.norm,
            budget: p.budget.clone(),
            budget_holds: p.budget.admits(p.norm),
            construction: p.construction.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub mode: String,
    /// Sign convention of `combined`, e.g. `f - k + r`.
    pub convention: String,
    pub x0: usize,
    pub y0: Option<usize>,
    pub parameters: BTreeMap<String, f64>,
    pub tables: Vec<PerturbationTable>,
    /// The perturbed payoff (or perturbed scalar function for min modes).
    #[serde(with = "ext::matrix")]
    pub combined: Vec<Vec<f64>>,
    pub certificate: Option<SaddleCertificate>,
    pub truncation_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub mode: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    /// Tolerance every assertion in this report was made under.
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<MinimaxSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddles: Option<Vec<SaddleCertificate>>,
    /// Point queried by `saddle-check`, 0-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddle_check: Option<SaddleCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_saddle: Option<EpsSaddleSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<WellPosednessModulus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<SolutionMapProbe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
    pub transcript: Vec<String>,
}

impl Report {
    pub fn new(command: &str, tolerance: f64) -> Self {
        Report {
            schema: SCHEMA,
            command: command.to_string(),
            tolerance,
            problem: None,
            summary: None,
            assumptions: None,
            saddles: None,
            point: None,
            saddle_check: None,
            eps_saddle: None,
            perturbation: None,
            modulus: None,
            probe: None,
            counterexample: None,
            verification: None,
            transcript: Vec::new(),
        }
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.transcript.push(line.into());
    }

    fn x_label(&self, i: usize) -> String {
        label(self.problem.as_ref().map(|p| &p.x_labels), 'x', i)
    }

    fn y_label(&self, j: usize) -> String {
        label(self.problem.as_ref().map(|p| &p.y_labels), 'y', j)
    }
}

fn label(labels: Option<&Vec<String>>, axis: char, i: usize) -> String {
    match labels.and_then(|l| l.get(i)) {
        Some(l) => format!("{axis}{} ({l})", i + 1),
        None => format!("{axis}{}", i + 1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Md,
    Csv,
}

pub fn render(r: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(r).expect("report serializes") + "\n"),
        Format::Md => Ok(markdown(r)),
        Format::Csv => csv_table(r),
    }
}

fn markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# saddlekit {}", r.command);
    if let Some(p) = &r.problem {
        let _ = writeln!(
            s,
            "\nProblem `{}`: |X| = {}, |Y| = {}, payoff {}.",
            p.name, p.nx, p.ny, p.payoff
        );
    }
    let _ = writeln!(s, "\nTolerance: {:?}", r.tolerance);
    if let Some(sm) = &r.summary {
        let _ = writeln!(s, "\n## Summary\n");
        let _ = writeln!(s, "| quantity | value |\n|---|---|");
        let _ = writeln!(s, "| V (supinf) | {} |", fmt_ext(sm.lower_value));
        let _ = writeln!(s, "| W (infsup) | {} |", fmt_ext(sm.upper_value));
        let _ = writeln!(s, "| gap | {} |", gap_display(sm.gap));
        let xs: Vec<String> = sm.sup_argset.iter().map(|&i| r.x_label(i)).collect();
        let ys: Vec<String> = sm.inf_argset.iter().map(|&j| r.y_label(j)).collect();
        let _ = writeln!(s, "| argmax v | {} |", xs.join(", "));
        let _ = writeln!(s, "| argmin w | {} |", ys.join(", "));
    }
    if let Some(p) = &r.perturbation {
        let _ = writeln!(s, "\n## Perturbation ({}, {})\n", p.mode, p.convention);
        let _ = writeln!(s, "| name | norm | budget | holds |\n|---|---|---|---|");
        for t in &p.tables {
            let _ = writeln!(
                s,
                "| {} | {} | {} {} ({}) | {} |",
                t.name,
                t.norm,
                t.budget.symbol(),
                t.budget.bound,
                t.budget.expression,
                t.budget_holds
            );
        }
    }
    if let Some(m) = &r.modulus {
        let _ = writeln!(s, "\n## Modulus\n\n| ε | diam | size |\n|---|---|---|");
        for ((e, d), (a, b)) in m.eps_grid.iter().zip(&m.diam).zip(&m.sizes) {
            let _ = writeln!(s, "| {e} | {d} | {a}×{b} |");
        }
    }
    if let Some(p) = &r.probe {
        let _ = writeln!(
            s,
            "\n## Probe\n\nρ = {}, seed = {}, trials = {}, samples run = {}, verdict: {}",
            p.rho,
            p.seed,
            p.trials,
            p.samples.len(),
            if p.escaped() { "escaped" } else { "contained" }
        );
    }
    if let Some(v) = &r.verification {
        let _ = writeln!(
            s,
            "\n## Verification ({})\n\n{} checks, {} failures",
            v.mode,
            v.checks,
            v.failures.len()
        );
    }
    let _ = writeln!(s, "\n## Transcript\n");
    for line in &r.transcript {
        let _ = writeln!(s, "- {line}");
    }
    s
}

fn csv_table(r: &Report) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(format!("csv: {e}"));
    if let Some(m) = &r.modulus {
        w.write_record(["eps", "diam", "x_size", "y_size"])
            .map_err(io)?;
        for ((e, d), (a, b)) in m.eps_grid.iter().zip(&m.diam).zip(&m.sizes) {
            w.write_record([e.to_string(), d.to_string(), a.to_string(), b.to_string()])
                .map_err(io)?;
        }
    } else if let Some(p) = &r.perturbation {
        w.write_record(["table", "axis", "index", "value", "norm", "budget"])
            .map_err(io)?;
        for t in &p.tables {
            for (i, v) in t.values.iter().enumerate() {
                w.write_record([
                    t.name.clone(),
                    format!("{:?}", t.axis),
                    (i + 1).to_string(),
                    fmt_ext(*v),
                    t.norm.to_string(),
                    t.budget.bound.to_string(),
                ])
                .map_err(io)?;
            }
        }
    } else if let Some(p) = &r.probe {
        w.write_record([
            "sample",
            "origin",
            "norm_x",
            "norm_y",
            "escaped",
            "solutions",
        ])
        .map_err(io)?;
        for (k, smp) in p.samples.iter().enumerate() {
            let origin = match &smp.origin {
                SampleOrigin::Center => "center".to_string(),
                SampleOrigin::Adversary { candidate } => {
                    format!("adversary x{} y{}", candidate.0 + 1, candidate.1 + 1)
                }
                SampleOrigin::Random { trial } => format!("random {trial}"),
            };
            let (nx, ny) = smp.offset.norms();
            let ny = match smp.offset {
                Offset::Joint { .. } => String::new(),
                Offset::Separable { .. } => ny.to_string(),
            };
            let sols: Vec<String> = smp
                .solutions
                .iter()
                .map(|(x, y)| format!("x{} y{}", x + 1, y + 1))
                .collect();
            w.write_record([
                k.to_string(),
                origin,
                nx.to_string(),
                ny,
                smp.escaped.to_string(),
                sols.join(" "),
            ])
            .map_err(io)?;
        }
    } else if let Some(c) = &r.counterexample {
        w.write_record([
            "n",
            "saddle_x",
            "saddle_y",
            "corner_distance",
            "corner_distance_exact",
        ])
        .map_err(io)?;
        w.write_record([
            c.n.to_string(),
            c.saddle_coords.0.to_string(),
            c.saddle_coords.1.to_string(),
            c.corner_distance.to_string(),
            format!(
                "{}/{}",
                c.corner_distance_exact.0, c.corner_distance_exact.1
            ),
        ])
        .map_err(io)?;
    } else if let Some(e) = &r.eps_saddle {
        w.write_record(["x", "y"]).map_err(io)?;
        for (x, y) in e.members() {
            w.write_record([r.x_label(x), r.y_label(y)]).map_err(io)?;
        }
    } else if let Some(sm) = &r.summary {
        w.write_record(["axis", "index", "marginal"]).map_err(io)?;
        for (i, v) in sm.v.iter().enumerate() {
            w.write_record(["x".to_string(), (i + 1).to_string(), fmt_ext(*v)])
                .map_err(io)?;
        }
        for (j, v) in sm.w.iter().enumerate() {
            w.write_record(["y".to_string(), (j + 1).to_string(), fmt_ext(*v)])
                .map_err(io)?;
        }
    } else {
        return Err(CliError::Input(format!("no CSV table for `{}`", r.command)));
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
