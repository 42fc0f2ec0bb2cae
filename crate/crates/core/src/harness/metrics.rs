use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cells::CellKind;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "iteration,epoch,seconds,train_loss,valid_loss,units,cell,seed";

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub iteration: u64,
    /// Completed epochs.
    pub epoch: u64,
    pub seconds: f64,
    /// Mean training loss since the previous record.
    pub train_loss: f64,
    pub valid_loss: f64,
    pub units: &'static str,
    pub cell: CellKind,
    pub seed: u64,
}

impl MetricsRecord {
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{},{},{}",
            self.iteration,
            self.epoch,
            self.seconds,
            self.train_loss,
            self.valid_loss,
            self.units,
            self.cell,
            self.seed
        )
    }
}

/// Append-only metrics sink. Every row is flushed as it is written.
pub struct MetricsWriter {
    out: BufWriter<File>,
    last_iteration: Option<u64>,
}

impl MetricsWriter {
    /// Truncates `path` and writes the header.
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{METRICS_HEADER}")?;
        out.flush()?;
        Ok(MetricsWriter {
            out,
            last_iteration: None,
        })
    }

    /// Continues an existing file, writing the header only if it is empty.
    pub fn append(path: impl AsRef<Path>, after_iteration: u64) -> Result<Self> {
        let path = path.as_ref();
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{METRICS_HEADER}")?;
            out.flush()?;
        }
        Ok(MetricsWriter {
            out,
            last_iteration: Some(after_iteration),
        })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<()> {
        if self.last_iteration.is_some_and(|last| record.iteration <= last) {
            return Err(Error::contract(format!(
                "metrics must be appended in iteration order; got {} after {:?}",
                record.iteration, self.last_iteration
            )));
        }
        writeln!(self.out, "{}", record.to_csv_row())?;
        self.out.flush()?;
        self.last_iteration = Some(record.iteration);
        Ok(())
    }
}

/// Parses a metrics CSV written by [`MetricsWriter`].
pub fn read_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::contract("metrics file has an unexpected header"));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::contract(format!("bad metrics row '{line}'"));
            if f.len() != 8 {
                return Err(bad());
            }
            Ok(MetricsRecord {
                iteration: f[0].parse().map_err(|_| bad())?,
                epoch: f[1].parse().map_err(|_| bad())?,
                seconds: f[2].parse().map_err(|_| bad())?,
                train_loss: f[3].parse().map_err(|_| bad())?,
                valid_loss: f[4].parse().map_err(|_| bad())?,
                units: match f[5] {
                    "mse" => "mse",
                    "nats" => "nats",
                    _ => return Err(bad()),
                },
                cell: f[6].parse().map_err(|_| bad())?,
                seed: f[7].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
