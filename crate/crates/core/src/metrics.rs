//! Per-episode metrics log, its CSV form, and interaction frequency.
//!
//! The log is written after each episode from ground truth the agent never
//! sees. Everything a report needs is in the CSV, so reports can be rebuilt
//! without any model state.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    /// Any target object exceeded its movement threshold.
    pub target_moved: bool,
    pub planner_calls: usize,
    /// Mean exploration reward over the episode's frames; BEE only.
    pub mean_r_exp: Option<f64>,
    /// Mean over planner calls of the best candidate score.
    pub plan_top_score: Option<f64>,
    /// World-model losses averaged over the updates that followed the episode.
    pub vae_loss: f64,
    pub kl: f64,
    pub dyn_loss: f64,
    /// Largest pose change of each object during the episode.
    pub displacement: Vec<f64>,
}

const FIXED_COLUMNS: [&str; 8] = [
    "episode",
    "target_moved",
    "planner_calls",
    "mean_r_exp",
    "plan_top_score",
    "vae_loss",
    "kl",
    "dyn_loss",
];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsLog {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target_flags(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.target_moved).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let objects = self.rows.first().map_or(0, |r| r.displacement.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend((0..objects).map(|i| format!("disp_{i}")));
        w.write_record(&header)?;
        for r in &self.rows {
            if r.displacement.len() != objects {
                return Err(CoreError::Metrics(format!(
                    "episode {} has {} displacement values, expected {objects}",
                    r.episode,
                    r.displacement.len()
                )));
            }
            let mut rec = vec![
                r.episode.to_string(),
                u8::from(r.target_moved).to_string(),
                r.planner_calls.to_string(),
                opt(r.mean_r_exp),
                opt(r.plan_top_score),
                r.vae_loss.to_string(),
                r.kl.to_string(),
                r.dyn_loss.to_string(),
            ];
            rec.extend(r.displacement.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers()?.clone();
        for (i, name) in FIXED_COLUMNS.iter().enumerate() {
            if header.get(i) != Some(name) {
                return Err(CoreError::Metrics(format!("column {i} should be `{name}`")));
            }
        }
        let mut rows = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = |col: &str| CoreError::Metrics(format!("row {}: bad `{col}` value", line + 1));
            let num = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| bad(FIXED_COLUMNS[i])) };
            let maybe = |i: usize| -> Result<Option<f64>> {
                if rec[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let target_moved = match &rec[1] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("target_moved")),
            };
            rows.push(MetricsRow {
                episode: rec[0].parse().map_err(|_| bad("episode"))?,
                target_moved,
                planner_calls: rec[2].parse().map_err(|_| bad("planner_calls"))?,
                mean_r_exp: maybe(3)?,
                plan_top_score: maybe(4)?,
                vae_loss: num(5)?,
                kl: num(6)?,
                dyn_loss: num(7)?,
                displacement: (FIXED_COLUMNS.len()..rec.len())
                    .map(|i| rec[i].parse().map_err(|_| bad("disp")))
                    .collect::<Result<_>>()?,
            });
        }
        Ok(Self { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Fraction of flagged episodes in consecutive non-overlapping windows. A
/// trailing partial window is dropped.
pub fn interaction_frequency(flags: &[bool], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(CoreError::Metrics("window must be positive".into()));
    }
    if flags.len() < window {
        return Err(CoreError::Metrics(format!(
            "{} episodes is fewer than one window of {window}",
            flags.len()
        )));
    }
    Ok(flags
        .chunks_exact(window)
        .map(|c| c.iter().filter(|&&f| f).count() as f64 / window as f64)
        .collect())
}
