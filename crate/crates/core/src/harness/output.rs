use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::run::ResultSet;
use crate::error::{Error, Result};

pub const LEARNING_CURVES: &str = "learning_curves.csv";
pub const SWEEP: &str = "sweep.csv";
pub const COMPLEXITY: &str = "complexity.csv";
pub const PROVENANCE: &str = "provenance.json";

const LEARNING_HEADER: [&str; 7] = [
    "iteration",
    "algorithm",
    "point_set",
    "nmse_mean_db",
    "nmse_std_db",
    "ac_mean_db",
    "ac_std_db",
];
const SWEEP_HEADER: [&str; 5] = ["freq_hz", "algorithm", "system", "nmse_ss_db", "ac_ss_db"];
const COMPLEXITY_HEADER: [&str; 18] = [
    "algorithm",
    "system",
    "node",
    "m",
    "l",
    "f",
    "m_k",
    "l_k",
    "c_k",
    "n_k",
    "fft_additions",
    "fft_multiplications",
    "processing_additions",
    "processing_multiplications",
    "additions",
    "multiplications",
    "counted_additions",
    "counted_multiplications",
];

/// Sixteen significant digits in scientific notation.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.15e}")
}

fn opt(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the four result files into `dir`, creating it if needed.
pub fn write_results(rs: &ResultSet, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = [LEARNING_CURVES, SWEEP, COMPLEXITY, PROVENANCE]
        .iter()
        .map(|f| dir.join(f))
        .collect();

    let learning = rs.learning_curves.iter().flat_map(|c| {
        let name = c.series.name();
        (0..c.iterations.len()).map(move |i| {
            vec![
                c.iterations[i].to_string(),
                name.clone(),
                c.point_set.as_str().to_string(),
                fmt_num(c.nmse.mean[i]),
                fmt_num(c.nmse.std[i]),
                fmt_num(c.ac.mean[i]),
                fmt_num(c.ac.std[i]),
            ]
        })
    });
    write_csv(&paths[0], &LEARNING_HEADER, learning)?;

    let sweep = rs.sweep.iter().map(|r| {
        vec![
            fmt_num(r.freq_hz),
            r.series.algorithm.clone(),
            r.series.system.clone(),
            fmt_num(r.nmse_ss_db),
            fmt_num(r.ac_ss_db),
        ]
    });
    write_csv(&paths[1], &SWEEP_HEADER, sweep)?;

    let complexity = rs.complexity.iter().map(|r| {
        let p = &r.profile;
        vec![
            r.series.algorithm.clone(),
            r.series.system.clone(),
            opt(r.node),
            opt(p.params.m),
            p.params.l.to_string(),
            p.params.fft_len.to_string(),
            opt(p.params.m_k),
            opt(p.params.l_k),
            opt(p.params.c_k),
            opt(p.params.n_k),
            fmt_num(p.fft_additions),
            fmt_num(p.fft_multiplications),
            p.processing_additions.to_string(),
            p.processing_multiplications.to_string(),
            fmt_num(p.additions),
            fmt_num(p.multiplications),
            r.counted.additions.to_string(),
            r.counted.multiplications.to_string(),
        ]
    });
    write_csv(&paths[2], &COMPLEXITY_HEADER, complexity)?;

    let mut json = serde_json::to_string_pretty(&rs.provenance).map_err(|e| Error::Io {
        path: paths[3].clone(),
        source: std::io::Error::other(e),
    })?;
    json.push('\n');
    fs::write(&paths[3], json).map_err(|e| Error::io(&paths[3], e))?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LearningCurveRecord {
    pub iteration: usize,
    pub algorithm: String,
    pub point_set: String,
    pub nmse_mean_db: f64,
    pub nmse_std_db: f64,
    pub ac_mean_db: f64,
    pub ac_std_db: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRecord {
    pub freq_hz: f64,
    pub algorithm: String,
    pub system: String,
    pub nmse_ss_db: f64,
    pub ac_ss_db: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn read_learning_curves(path: &Path) -> Result<Vec<LearningCurveRecord>> {
    read_csv(path)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRecord>> {
    read_csv(path)
}
