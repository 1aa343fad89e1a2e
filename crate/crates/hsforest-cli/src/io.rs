//! CSV and JSON I/O for the command-line tools.
//!
//! Data files use the schema `time,status,treatment,x1..xp` with plain
//! decimal values, no quoting, and no missing entries. Floats are written in
//! Rust's shortest round-trip form, so simulate -> parse -> re-serialize is
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hsforest::data::Matrix;
use hsforest::sampler::{Dataset, OutcomeKind};

use crate::CliError;

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::usage(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.len() < 4 || cols[0] != "time" || cols[1] != "status" || cols[2] != "treatment" {
        return Err(CliError::usage(format!(
            "{}: header must be time,status,treatment,x1..xp",
            path.display()
        )));
    }
    let p = cols.len() - 3;
    for (j, name) in cols[3..].iter().enumerate() {
        let expect = format!("x{}", j + 1);
        if *name != expect {
            return Err(CliError::usage(format!(
                "{}: covariate column {} is named '{name}', expected '{expect}'",
                path.display(),
                j + 4
            )));
        }
    }

    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut treatment = Vec::new();
    let mut xcols: Vec<Vec<f64>> = vec![Vec::new(); p];
    for (idx, line) in lines {
        let row_no = idx + 1; // 1-based file line number
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 3 {
            return Err(CliError::usage(format!(
                "{}: row {row_no} has {} fields, expected {}",
                path.display(),
                fields.len(),
                p + 3
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64, CliError> {
            s.parse::<f64>().map_err(|_| {
                CliError::usage(format!(
                    "{}: row {row_no}: cannot parse {what} value '{s}'",
                    path.display()
                ))
            })
        };
        y.push(parse(fields[0], "time")?);
        let d = parse(fields[1], "status")?;
        let a = parse(fields[2], "treatment")?;
        if d != 0.0 && d != 1.0 {
            return Err(CliError::usage(format!(
                "{}: row {row_no}: status must be 0 or 1",
                path.display()
            )));
        }
        if a != 0.0 && a != 1.0 {
            return Err(CliError::usage(format!(
                "{}: row {row_no}: treatment must be 0 or 1",
                path.display()
            )));
        }
        delta.push(d as u8);
        treatment.push(a as u8);
        for (j, f) in fields[3..].iter().enumerate() {
            xcols[j].push(parse(f, "covariate")?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    let x = Matrix::from_columns(n, xcols).map_err(CliError::from_core)?;
    let data = Dataset {
        x,
        treatment,
        y,
        delta,
        outcome: OutcomeKind::Survival,
    };
    data.validate().map_err(CliError::from_core)?;
    Ok(data)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let p = data.x.n_cols();
    let mut out = String::from("time,status,treatment");
    for j in 1..=p {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..data.n() {
        let _ = write!(out, "{},{},{}", data.y[i], data.delta[i], data.treatment[i]);
        for j in 0..p {
            let _ = write!(out, ",{}", data.x.get(i, j));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// Ground-truth sidecar: the scalar ATE in a header comment, then the
/// row-aligned CATE column.
pub fn write_truth(path: &Path, truth_cate: &[f64], truth_ate: f64) -> Result<(), CliError> {
    let mut out = format!("# ate={truth_ate}\ncate\n");
    for t in truth_cate {
        let _ = writeln!(out, "{t}");
    }
    write_file(path, &out)
}

/// One row per retained draw: `ate,sigma2,cate_1..cate_n`.
pub fn write_draws(path: &Path, draws: &hsforest::PosteriorDraws) -> Result<(), CliError> {
    let n = draws.n_obs();
    let mut out = String::from("ate,sigma2");
    for i in 1..=n {
        let _ = write!(out, ",cate_{i}");
    }
    out.push('\n');
    for d in 0..draws.n_draws() {
        let _ = write!(out, "{},{}", draws.ate[d], draws.sigma2[d]);
        for v in &draws.cate[d] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, contents)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}
