//! Table rendering for results files: estimators as rows, one column group
//! per covariate count.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use privshift::simulation::{ResultRow, Study, NO_TRANSFORM};

use crate::error::{CliError, CliResult};
use crate::io::{fmt_f64, write_atomic};
use crate::results;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    /// Interval coverage of the population effect (generalization).
    Coverage,
    /// MSE with its squared-bias and variance parts (generalization).
    Mse,
    /// Variance and relative efficiencies (precision).
    Precision,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Results CSV written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    pub format: Format,
    #[arg(long, value_enum)]
    pub table: TableKind,
    /// Decimal places in the rendered cells.
    #[arg(long, default_value_t = 3)]
    pub digits: usize,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write long-format squared-bias/variance data for stacked bars.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

/// A rendered table: header cells and body rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn row_name(r: &ResultRow) -> String {
    if r.transform == NO_TRANSFORM {
        r.estimator.to_string()
    } else {
        r.label()
    }
}

type Metric = (&'static str, fn(&ResultRow) -> Option<f64>);

fn metrics(kind: TableKind) -> (Study, Vec<Metric>) {
    match kind {
        TableKind::Coverage => (Study::Generalization, vec![("coverage", |r| r.coverage)]),
        TableKind::Mse => (
            Study::Generalization,
            vec![("mse", |r| r.mse), ("bias2", |r| r.bias2), ("variance", |r| r.variance)],
        ),
        TableKind::Precision => (
            Study::Precision,
            vec![("var", |r| r.var_tau), ("re_dm", |r| r.re_dm), ("re_reg", |r| r.re_reg)],
        ),
    }
}

/// Builds the table. Rows keep their first-appearance order in the results
/// file, which is the order the studies emit them in.
pub fn render(rows: &[ResultRow], kind: TableKind, digits: usize) -> CliResult<Rendered> {
    let (study, metrics) = metrics(kind);
    let rows: Vec<&ResultRow> = rows.iter().filter(|r| r.study == study).collect();
    if rows.is_empty() {
        return Err(CliError::Config(format!("no {study} rows for this table")));
    }
    let mut ps: Vec<usize> = rows.iter().map(|r| r.p).collect();
    ps.sort_unstable();
    ps.dedup();
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        let n = row_name(r);
        if !names.contains(&n) {
            names.push(n);
        }
    }
    let mut header = vec!["estimator".to_string()];
    for p in &ps {
        header.extend(metrics.iter().map(|(m, _)| format!("p={p} {m}")));
    }
    let body = names
        .iter()
        .map(|name| {
            let mut cells = vec![name.clone()];
            for p in &ps {
                let r = rows.iter().find(|r| r.p == *p && row_name(r) == *name);
                for (_, get) in &metrics {
                    cells.push(r.and_then(|r| get(r)).map(|v| format!("{v:.digits$}")).unwrap_or_default());
                }
            }
            cells
        })
        .collect();
    Ok(Rendered { header, rows: body })
}

pub fn to_markdown(t: &Rendered) -> String {
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    let mut out = line(&t.header);
    let rule: Vec<String> = t
        .header
        .iter()
        .enumerate()
        .map(|(i, _)| if i == 0 { ":--".to_string() } else { "--:".to_string() })
        .collect();
    out.push_str(&line(&rule));
    for r in &t.rows {
        out.push_str(&line(r));
    }
    out
}

pub fn to_csv(t: &Rendered) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&t.header).expect("in-memory write");
    for r in &t.rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
}

/// Parses a table produced by [`to_markdown`].
#[cfg(test)]
fn parse_markdown(text: &str) -> Rendered {
    let mut lines = text
        .lines()
        .filter(|l| l.starts_with('|'))
        .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect::<Vec<_>>());
    let header = lines.next().unwrap_or_default();
    let rows = lines.skip(1).collect();
    Rendered { header, rows }
}

/// Long format: `study,p,row,component,value` for squared bias and variance.
pub fn plot_data(rows: &[ResultRow]) -> String {
    let mut out = String::from("study,p,row,component,value\n");
    for r in rows.iter().filter(|r| r.study == Study::Generalization) {
        for (component, v) in [("bias2", r.bias2), ("variance", r.variance)] {
            if let Some(v) = v {
                out.push_str(&format!("{},{},{},{component},{}\n", r.study, r.p, row_name(r), fmt_f64(v)));
            }
        }
    }
    out
}

pub fn run(a: &ReportArgs) -> CliResult<()> {
    let rows = results::read(&a.input)?;
    if rows.is_empty() {
        return Err(CliError::Config(format!("{}: no result rows", a.input.display())));
    }
    let t = render(&rows, a.table, a.digits)?;
    let text = match a.format {
        Format::Markdown => to_markdown(&t),
        Format::Csv => to_csv(&t),
    };
    match &a.output {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(p) = &a.plot_data {
        write_atomic(p, plot_data(&rows).as_bytes())?;
    }
    Ok(())
}
