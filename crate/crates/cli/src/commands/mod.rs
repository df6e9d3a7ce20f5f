mod cam;
mod explain;
mod latent;
mod metrics;
mod mil;
pub(crate) mod segloss;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use xaikit_core::Tensor;

use crate::cli::Command;
use crate::error::{CliError, CliResult};
use crate::image::{write_pgm, write_ppm};
use crate::npy::{read_npy_file, write_npy_file};
use crate::report::Report;

pub(crate) struct Ctx {
    timing: bool,
    started: Instant,
}

impl Ctx {
    /// Writes the report to `path`, or to stdout without one.
    fn finish(&self, mut report: Report, path: Option<&Path>) -> CliResult<()> {
        if self.timing {
            report.wall_time_seconds = Some(self.started.elapsed().as_secs_f64());
        }
        match path {
            Some(p) => report.write(p),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(report.render().as_bytes())
                    .map_err(|e| CliError::io("<stdout>", e))
            }
        }
    }
}

pub(crate) fn dispatch(command: Command, timing: bool) -> CliResult<()> {
    let ctx = Ctx {
        timing,
        started: Instant::now(),
    };
    match command {
        Command::Cam(a) => cam::run(&ctx, &a),
        Command::Mil(a) => mil::run(&ctx, &a),
        Command::Lime(a) => explain::run_lime(&ctx, &a),
        Command::Shap(a) => explain::run_shap(&ctx, &a),
        Command::Tsne(a) => latent::run_tsne(&ctx, &a),
        Command::Landscape(a) => latent::run_landscape(&ctx, &a),
        Command::Metrics(a) => metrics::run(&ctx, &a),
        Command::SeglossCheck(a) => segloss::run(&ctx, &a),
        Command::PredictorStub(_) => unreachable!("handled before dispatch"),
    }
}

/// Every input must exist and every output directory must exist, before
/// any work starts.
fn check_paths(inputs: &[&Path], outputs: &[Option<&PathBuf>]) -> CliResult<()> {
    for p in inputs {
        if !p.is_file() {
            return Err(CliError::io(
                *p,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
    }
    for p in outputs.iter().flatten() {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty());
        if let Some(dir) = parent {
            if !dir.is_dir() {
                return Err(CliError::io(
                    *p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
                ));
            }
        }
    }
    Ok(())
}

fn load(path: &Path) -> CliResult<Tensor> {
    read_npy_file(path).map_err(|source| CliError::Npy {
        path: path.to_path_buf(),
        source,
    })
}

fn save(path: &Path, t: &Tensor) -> CliResult<()> {
    write_npy_file(path, t).map_err(|e| CliError::io(path, e))
}

fn save_image(path: &Path, map: &Tensor, color: bool) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let written = if color { write_ppm(&mut w, map) } else { write_pgm(&mut w, map) };
    written.and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Min-max scaling to `[0, 1]`; constant input maps to zeros.
fn unit_scale(t: &Tensor) -> Tensor {
    let lo = t.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    t.map(|v| if range > 0.0 { (v - lo) / range } else { 0.0 })
        .expect("scaled values are finite")
}

fn write_csv<S: serde::Serialize>(path: &Path, rows: &[S]) -> CliResult<()> {
    let table_err = |e: csv::Error| CliError::Table {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(table_err)?;
    for r in rows {
        w.serialize(r).map_err(table_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Named columns of a CSV file with a header row, as trimmed strings.
fn read_csv_columns(path: &Path, columns: &[&str]) -> CliResult<Vec<Vec<String>>> {
    let table_err = |message: String| CliError::Table {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| table_err(e.to_string()))?;
    let headers = r.headers().map_err(|e| table_err(e.to_string()))?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| table_err(format!("no column named {c:?}")))
        })
        .collect::<CliResult<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for record in r.records() {
        let record = record.map_err(|e| table_err(e.to_string()))?;
        for (col, &i) in out.iter_mut().zip(&idx) {
            col.push(record.get(i).unwrap_or("").trim().to_string());
        }
    }
    Ok(out)
}

fn parse_f64(path: &Path, row: usize, s: &str) -> CliResult<f64> {
    s.parse::<f64>().map_err(|_| CliError::Table {
        path: path.to_path_buf(),
        message: format!("row {}: {s:?} is not a number", row + 1),
    })
}
