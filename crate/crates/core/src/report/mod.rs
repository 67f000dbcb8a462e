//! Pipeline commands: detect, compare, replay and synth.
//!
//! Every command writes its outputs into one directory. Each delimited file
//! starts with the run manifest as `# ` comment lines, and a standalone
//! `manifest.json` carries the same manifest plus wall-clock timestamps.
//! Only the standalone file holds timestamps, so reruns with the same
//! inputs and settings produce byte-identical reports.

mod compare;
mod detect;
mod replay;
mod synth;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::DetectorConfig;
use crate::metrics::{MetricsError, SeverityBounds};
use crate::stats::{BootstrapConfig, CompareOptions, StatsError};
use crate::synth::{CorpusConfig, SynthError};
use crate::trajmodel::{EligibilityRule, RecordError};

pub use compare::{cmd_compare, CompareSummary, CURVE_POINTS, RISK_GRID_POINTS};
pub use detect::{cmd_detect, DetectSummary, EVENTS_FILE};
pub use replay::{
    cmd_replay, replay_series, KeyInstant, Phase, ReplayFrame, ReplaySummary, RECOVERY_FRAMES,
};
pub use synth::{cmd_synth, SynthSummary, CORPUS_FILE, LABELS_FILE};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INPUT: i32 = 3;
    pub const EMPTY: i32 = 4;
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Record { path: PathBuf, source: RecordError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: MetricsError },
    #[error("{0}")]
    NotFound(String),
    #[error("invalid settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl ReportError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Read { .. } | Self::Record { .. } | Self::Table { .. } | Self::NotFound(_) => {
                exit::INPUT
            }
            Self::Settings(_) | Self::Synth(SynthError::Config(_)) => exit::USAGE,
            _ => exit::INTERNAL,
        }
    }
}

/// Every tunable constant of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub detector: DetectorConfig,
    pub eligibility: EligibilityRule,
    pub severity: SeverityBounds,
    /// Lead-speed band of the speed-matched re-analysis, km/h.
    pub speed_match_kmh: [f64; 2],
    /// Bonferroni family size.
    pub family: usize,
    /// Gap thresholds of the share tests, m.
    pub gap_thresholds_m: Vec<f64>,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    /// Stop at the first malformed record instead of skipping it.
    pub strict: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let c = CompareOptions::default();
        Self {
            detector: DetectorConfig::default(),
            eligibility: EligibilityRule::default(),
            severity: c.severity,
            speed_match_kmh: c.speed_match_kmh,
            family: c.family,
            gap_thresholds_m: c.thresholds,
            bootstrap_resamples: c.bootstrap.resamples,
            confidence_level: c.bootstrap.level,
            strict: false,
        }
    }
}

impl Settings {
    /// Parse a TOML thresholds file; absent keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, ReportError> {
        let s: Self = toml::from_str(text).map_err(|e| ReportError::Settings(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let bad = |m: String| Err(ReportError::Settings(m));
        let [lo, hi] = self.speed_match_kmh;
        if !(lo <= hi) {
            return bad(format!("speed-match range {lo}..{hi} is empty"));
        }
        let SeverityBounds { critical, moderate } = self.severity;
        if !(0.0 < critical && critical <= moderate) {
            return bad(format!("severity bounds {critical}, {moderate} must be increasing and positive"));
        }
        if self.family == 0 {
            return bad("family size must be at least 1".into());
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) || self.bootstrap_resamples == 0 {
            return bad("bootstrap needs resamples > 0 and a level in (0, 1)".into());
        }
        let d = &self.detector;
        if d.min_lc_duration > d.max_lc_duration {
            return bad("lane-change duration bounds are reversed".into());
        }
        Ok(())
    }

    pub fn compare_options(&self, seed: u64) -> CompareOptions {
        CompareOptions {
            family: self.family,
            bootstrap: BootstrapConfig {
                resamples: self.bootstrap_resamples,
                level: self.confidence_level,
                seed,
            },
            thresholds: self.gap_thresholds_m.clone(),
            speed_match_kmh: self.speed_match_kmh,
            severity: self.severity,
            ..CompareOptions::default()
        }
    }
}

/// Provenance of one run, embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub settings: Settings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<CorpusConfig>,
    pub counts: BTreeMap<String, usize>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], seed: Option<u64>, settings: &Settings) -> Self {
        Self {
            tool: "cutin".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            seed,
            settings: settings.clone(),
            synth: None,
            counts: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn count(&mut self, key: &str, n: usize) {
        self.counts.insert(key.into(), n);
    }

    /// The manifest as comment-ready lines.
    pub fn header_lines(&self) -> Vec<String> {
        serde_json::to_string_pretty(self)
            .expect("manifest serialization cannot fail")
            .lines()
            .map(str::to_string)
            .collect()
    }

    fn write_header<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for line in self.header_lines() {
            writeln!(out, "# {line}")?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct StandaloneManifest<'a> {
    manifest: &'a RunManifest,
    started_unix_s: f64,
    finished_unix_s: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Output directory of one run.
struct OutDir {
    root: PathBuf,
    started: f64,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self, ReportError> {
        std::fs::create_dir_all(root).map_err(|source| ReportError::Write {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            started: unix_now(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Create `name` and run `body` on a buffered writer, mapping I/O errors.
    fn write<F>(&self, name: &str, body: F) -> Result<PathBuf, ReportError>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let wrap = |source| ReportError::Write {
            path: path.clone(),
            source,
        };
        let mut out = BufWriter::new(File::create(&path).map_err(wrap)?);
        body(&mut out).map_err(wrap)?;
        out.flush().map_err(wrap)?;
        Ok(path)
    }

    /// A delimited file: manifest header, then `rows` joined by commas.
    fn write_csv(
        &self,
        name: &str,
        manifest: &RunManifest,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, ReportError> {
        self.write(name, |out| {
            manifest.write_header(out)?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()
        })
    }

    /// A JSON document with the manifest under `"manifest"`.
    fn write_json<T: Serialize>(&self, name: &str, manifest: &RunManifest, body: &T) -> Result<PathBuf, ReportError> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            manifest: &'a RunManifest,
            report: &'a T,
        }
        let text = serde_json::to_string_pretty(&Doc {
            manifest,
            report: body,
        })?;
        self.write(name, |out| writeln!(out, "{text}"))
    }

    fn finish(&self, manifest: &RunManifest) -> Result<PathBuf, ReportError> {
        let text = serde_json::to_string_pretty(&StandaloneManifest {
            manifest,
            started_unix_s: self.started,
            finished_unix_s: unix_now(),
        })?;
        self.write(MANIFEST_FILE, |out| writeln!(out, "{text}"))
    }
}

fn open(path: &Path) -> Result<std::io::BufReader<File>, ReportError> {
    File::open(path)
        .map(std::io::BufReader::new)
        .map_err(|source| ReportError::Read {
            path: path.to_path_buf(),
            source,
        })
}

/// Shortest round-trip text of a float, empty for `None`.
fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
