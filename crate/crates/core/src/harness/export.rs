//! CSV artifacts. Every file starts with a fixed header; floats use the
//! shortest representation that parses back to the same value.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::ppo::{EpisodeSummary, IterationRecord};
use crate::{Error, Result};

pub const TRAIN_COLUMNS: &[&str] = &[
    "iter",
    "episodes",
    "mean_qoe",
    "actor_loss",
    "critic_loss",
    "clip_frac",
    "entropy",
];
pub const EVAL_COLUMNS: &[&str] = &["episode", "qoe", "mean_rate", "mean_recovery_acc", "rebuffer_s"];
pub const SWEEP_COLUMNS: &[&str] = &["param", "value", "mean_qoe", "std_qoe", "episodes"];
pub const CODEC_COLUMNS: &[&str] = &["step", "distortion"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub iter: usize,
    pub episodes: usize,
    pub mean_qoe: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub clip_frac: f64,
    pub entropy: f64,
}

impl From<&IterationRecord> for TrainRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            episodes: r.episodes,
            mean_qoe: r.mean_qoe,
            actor_loss: r.stats.actor_loss,
            critic_loss: r.stats.critic_loss,
            clip_frac: r.stats.clip_fraction,
            entropy: r.stats.entropy,
        }
    }
}

pub type EvalRow = EpisodeSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub mean_qoe: f64,
    pub std_qoe: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodecRow {
    pub step: usize,
    pub distortion: f64,
}

/// Row-at-a-time CSV writer that flushes after every row, so a partially
/// finished run leaves a valid prefix on disk.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: &Path, columns: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(file));
        writer.write_record(columns).map_err(|e| csv_error(path, e))?;
        let mut sink = Self {
            path: path.to_path_buf(),
            writer,
        };
        sink.flush()?;
        Ok(sink)
    }

    pub fn push<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer.serialize(row).map_err(|e| csv_error(&self.path, e))?;
        self.flush()
    }

    fn flush(&mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("csv", format!("{}: {other:?}", path.display())),
    }
}

pub fn write_csv<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> Result<()> {
    let mut sink = CsvSink::create(path, columns)?;
    for r in rows {
        sink.push(r)?;
    }
    Ok(())
}

/// Reads a CSV written by this module, checking the header.
pub fn read_csv<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(columns.iter().copied()) {
        return Err(Error::format(
            "csv",
            format!("{}: header {:?} differs from {columns:?}", path.display(), header),
        ));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_csv::<SweepRow>(&p, SWEEP_COLUMNS, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "param,value,mean_qoe,std_qoe,episodes\n");
        assert!(read_csv::<SweepRow>(&p, SWEEP_COLUMNS).unwrap().is_empty());
    }

    #[test]
    fn values_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows: Vec<TrainRow> = (0..20)
            .map(|i| TrainRow {
                iter: i,
                episodes: 4,
                mean_qoe: -1838.4842218742776 / (i as f64 + 1.0),
                actor_loss: 1e-300 * i as f64,
                critic_loss: std::f64::consts::PI * 1e10,
                clip_frac: 0.1 + 0.2,
                entropy: -0.0,
            })
            .collect();
        write_csv(&p, TRAIN_COLUMNS, &rows).unwrap();
        assert_eq!(read_csv::<TrainRow>(&p, TRAIN_COLUMNS).unwrap(), rows);
        assert!(read_csv::<TrainRow>(&p, EVAL_COLUMNS).is_err());
    }

    #[test]
    fn unwritable_path_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing").join("x.csv");
        assert!(matches!(write_csv::<CodecRow>(&p, CODEC_COLUMNS, &[]), Err(Error::Io { .. })));
    }
}
