//! Sweeps of the exploration loop over one setting, and reports built from
//! the saved metrics files alone.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CoreError, Result};
use crate::explore::{run_batch_exploration, METRICS_FILE};
use crate::metrics::{interaction_frequency, MetricsLog};
use crate::relevance::RewardMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    RewardMode,
    LatentDim,
}

/// One swept setting and its values, parsed from `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<String>,
}

impl std::str::FromStr for Sweep {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let (key, values) = s
            .split_once('=')
            .ok_or_else(|| CoreError::Config(format!("sweep `{s}` should look like key=v1,v2")))?;
        let key = match key.trim() {
            "reward_mode" => SweepKey::RewardMode,
            "latent_dim" => SweepKey::LatentDim,
            other => return Err(CoreError::Config(format!("cannot sweep `{other}`"))),
        };
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(CoreError::Config("sweep needs at least one value".into()));
        }
        let sweep = Self { key, values };
        for v in &sweep.values {
            sweep.apply(&ExperimentConfig::default(), v)?;
        }
        Ok(sweep)
    }
}

impl Sweep {
    pub fn key_name(&self) -> &'static str {
        match self.key {
            SweepKey::RewardMode => "reward_mode",
            SweepKey::LatentDim => "latent_dim",
        }
    }

    pub fn apply(&self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        match self.key {
            SweepKey::RewardMode => c.reward_mode = value.parse::<RewardMode>().map_err(CoreError::Config)?,
            SweepKey::LatentDim => {
                c.world_model.latent_dim = value
                    .parse()
                    .ok()
                    .filter(|&d: &usize| d > 0)
                    .ok_or_else(|| CoreError::Config(format!("bad latent dim `{value}`")))?;
            }
        }
        Ok(c)
    }

    pub fn setting_label(&self, value: &str) -> String {
        format!("{}_{value}", self.key_name())
    }
}

/// Interaction-frequency curve of one setting across its runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub label: String,
    pub runs: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation over runs divided by √runs; zero for a
    /// single run.
    pub stderr: Vec<f64>,
    /// Population variance of each run's window frequencies, averaged over
    /// runs.
    pub across_window_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub window: usize,
    pub settings: Vec<SettingSummary>,
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Summarizes the window curves of several runs of one setting.
pub fn summarize(label: &str, curves: &[Vec<f64>]) -> Result<SettingSummary> {
    let windows = curves
        .iter()
        .map(Vec::len)
        .min()
        .filter(|&w| w > 0)
        .ok_or_else(|| CoreError::Metrics(format!("setting `{label}` has no complete window")))?;
    let r = curves.len() as f64;
    let mut mean = Vec::with_capacity(windows);
    let mut stderr = Vec::with_capacity(windows);
    for w in 0..windows {
        let xs: Vec<f64> = curves.iter().map(|c| c[w]).collect();
        let m = xs.iter().sum::<f64>() / r;
        mean.push(m);
        stderr.push(if curves.len() < 2 {
            0.0
        } else {
            let s2 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (r - 1.0);
            (s2 / r).sqrt()
        });
    }
    let across_window_variance = curves.iter().map(|c| variance(&c[..windows])).sum::<f64>() / r;
    Ok(SettingSummary {
        label: label.to_string(),
        runs: curves.len(),
        mean,
        stderr,
        across_window_variance,
    })
}

/// Metrics files of a setting directory: its own `metrics.csv`, or else those
/// of its immediate subdirectories in name order.
pub fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let own = dir.join(METRICS_FILE);
    if own.is_file() {
        return Ok(vec![own]);
    }
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path().join(METRICS_FILE))
        .filter(|p| p.is_file())
        .collect();
    found.sort();
    if found.is_empty() {
        return Err(CoreError::Metrics(format!("no {METRICS_FILE} under {}", dir.display())));
    }
    Ok(found)
}

/// Builds the report from saved metrics alone: one setting per directory.
pub fn build_report(setting_dirs: &[PathBuf], window: usize) -> Result<AblationReport> {
    let mut settings = Vec::with_capacity(setting_dirs.len());
    for dir in setting_dirs {
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        let curves = metrics_files(dir)?
            .iter()
            .map(|p| interaction_frequency(&MetricsLog::load(p)?.target_flags(), window))
            .collect::<Result<Vec<_>>>()?;
        settings.push(summarize(&label, &curves)?);
    }
    Ok(AblationReport { window, settings })
}

impl AblationReport {
    /// Long format: `setting,runs,window_index,episodes_end,mean_frequency,stderr,across_window_variance`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "setting",
            "runs",
            "window_index",
            "episodes_end",
            "mean_frequency",
            "stderr",
            "across_window_variance",
        ])?;
        for s in &self.settings {
            for (i, (m, e)) in s.mean.iter().zip(&s.stderr).enumerate() {
                w.write_record([
                    s.label.clone(),
                    s.runs.to_string(),
                    i.to_string(),
                    ((i + 1) * self.window).to_string(),
                    m.to_string(),
                    e.to_string(),
                    s.across_window_variance.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn setting(&self, label: &str) -> Option<&SettingSummary> {
        self.settings.iter().find(|s| s.label == label)
    }
}

/// Runs every `(value, seed)` cell into `out/<key>_<value>/seed_<seed>/`,
/// then writes `out/report.csv`.
pub fn run_ablation(
    base: &ExperimentConfig,
    sweep: &Sweep,
    seeds: &[u64],
    out: &Path,
    window: usize,
    mut progress: impl FnMut(&str, u64, usize),
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(CoreError::Config("ablation needs at least one seed".into()));
    }
    let mut dirs = Vec::with_capacity(sweep.values.len());
    for value in &sweep.values {
        let label = sweep.setting_label(value);
        let setting_dir = out.join(&label);
        for &seed in seeds {
            let mut cfg = sweep.apply(base, value)?;
            cfg.seed = seed;
            run_batch_exploration(&cfg, Some(&setting_dir.join(format!("seed_{seed}"))), |row| {
                progress(&label, seed, row.episode)
            })?;
        }
        dirs.push(setting_dir);
    }
    let report = build_report(&dirs, window)?;
    report.save(out.join("report.csv"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        let s: Sweep = "reward_mode=max,mean_plus_variance,single".parse().unwrap();
        assert_eq!(s.key, SweepKey::RewardMode);
        assert_eq!(s.values.len(), 3);
        let d: Sweep = "latent_dim=8,16,32,64".parse().unwrap();
        assert_eq!(d.apply(&ExperimentConfig::default(), "64").unwrap().world_model.latent_dim, 64);
        assert!("latent_dim=0".parse::<Sweep>().is_err());
        assert!("reward_mode=best".parse::<Sweep>().is_err());
        assert!("seed=1".parse::<Sweep>().is_err());
        assert!("reward_mode".parse::<Sweep>().is_err());
    }

    #[test]
    fn summary_statistics_by_hand() {
        let s = summarize("x", &[vec![0.2, 0.4, 0.9], vec![0.4, 0.4]]).unwrap();
        assert_eq!(s.mean.len(), 2);
        assert!((s.mean[0] - 0.3).abs() < 1e-12);
        // sample sd of {0.2, 0.4} is 0.1414..., over √2 → 0.1
        assert!((s.stderr[0] - 0.1).abs() < 1e-12);
        assert_eq!(s.stderr[1], 0.0);
        // variances: {0.2,0.4} → 0.01, {0.4,0.4} → 0
        assert!((s.across_window_variance - 0.005).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_stderr() {
        let s = summarize("x", &[vec![0.1, 0.3]]).unwrap();
        assert_eq!(s.stderr, vec![0.0, 0.0]);
        assert!(summarize("y", &[vec![]]).is_err());
    }
}
