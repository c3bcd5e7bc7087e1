//! Results table CSV: one row per estimator and auxiliary release.

use std::path::Path;

use privshift::simulation::{ResultRow, Study};

use crate::error::{CliError, CliResult};
use crate::io::fmt_opt;

pub const COLUMNS: [&str; 12] = [
    "study", "p", "estimator", "transform", "mse", "bias2", "variance", "coverage", "var_tau", "re_dm", "re_reg",
    "failures",
];

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            r.study.to_string(),
            r.p.to_string(),
            r.estimator.to_string(),
            r.transform.clone(),
            fmt_opt(r.mse),
            fmt_opt(r.bias2),
            fmt_opt(r.variance),
            fmt_opt(r.coverage),
            fmt_opt(r.var_tau),
            fmt_opt(r.re_dm),
            fmt_opt(r.re_reg),
            r.failures.to_string(),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn read(path: &Path) -> CliResult<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != COLUMNS {
        return Err(CliError::Config(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            COLUMNS.join(","),
            header.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::Config(format!("{}: row {}: bad {what}", path.display(), i + 1));
        let opt = |j: usize| -> CliResult<Option<f64>> {
            match &rec[j] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| bad(COLUMNS[j])),
            }
        };
        rows.push(ResultRow {
            study: rec[0].parse::<Study>().map_err(|_| bad("study"))?,
            p: rec[1].parse().map_err(|_| bad("p"))?,
            estimator: rec[2].parse().map_err(|_| bad("estimator"))?,
            transform: rec[3].to_string(),
            mse: opt(4)?,
            bias2: opt(5)?,
            variance: opt(6)?,
            coverage: opt(7)?,
            var_tau: opt(8)?,
            re_dm: opt(9)?,
            re_reg: opt(10)?,
            failures: rec[11].parse().map_err(|_| bad("failures"))?,
        });
    }
    Ok(rows)
}
