//! Entry-frame safety metrics and gap-based severity.
//!
//! Every longitudinal quantity is measured along the target's heading at the
//! entry frame. Bumpers sit half a box length ahead of and behind the
//! centroid on that axis.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{CutInEvent, Side, TargetKind};
use crate::trajmodel::{AgentTrack, ReferenceFrame, Scenario};

/// m/s to km/h, applied only when emitting tables.
pub const KMH_PER_MPS: f64 = 3.6;

/// Frames over which the target's speed drop is measured.
pub const LEAD_DROP_FRAMES: usize = 20;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("track {0:?} not found")]
    UnknownTrack(String),
    #[error("track {track:?} has no valid state at frame {frame}")]
    InvalidState { track: String, frame: usize },
    #[error("no frame in {0}..={1} where cutter and target are both valid")]
    NoJointFrame(usize, usize),
    #[error("target has no valid frame in the {LEAD_DROP_FRAMES} frames after entry")]
    NoPostEntryFrame,
    #[error("events table: {0}")]
    Table(#[from] csv::Error),
    #[error("events table row {row}: {reason}")]
    Row { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Critical,
    Moderate,
    Low,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Critical, Severity::Moderate, Severity::Low];

    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Critical => "Critical",
            Severity::Moderate => "Moderate",
            Severity::Low => "Low",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

/// Gap thresholds, m: Critical below `critical`, Moderate below `moderate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityBounds {
    pub critical: f64,
    pub moderate: f64,
}

impl Default for SeverityBounds {
    fn default() -> Self {
        Self {
            critical: 5.0,
            moderate: 10.0,
        }
    }
}

impl SeverityBounds {
    pub fn classify(&self, gap_entry: f64) -> Severity {
        if gap_entry < self.critical {
            Severity::Critical
        } else if gap_entry < self.moderate {
            Severity::Moderate
        } else {
            Severity::Low
        }
    }
}

pub fn classify_severity(gap_entry: f64) -> Severity {
    SeverityBounds::default().classify(gap_entry)
}

/// Metrics of one event. Speeds in m/s, distances in m, times in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyMetrics {
    pub gap_entry: f64,
    /// `None` unless the target is closing on the cutter.
    pub ttc: Option<f64>,
    pub min_distance: f64,
    pub cutin_speed: f64,
    pub target_speed: f64,
    /// Cutter minus target.
    pub speed_diff: f64,
    pub lc_duration: f64,
    /// Positive when the target slowed down.
    pub lead_speed_drop: f64,
    pub severity: Severity,
}

impl SafetyMetrics {
    /// Rate at which the target closes on the cutter.
    pub fn closing_speed(&self) -> f64 {
        -self.speed_diff
    }
}

fn track<'a>(scenario: &'a Scenario, id: &str) -> Result<&'a AgentTrack, MetricsError> {
    scenario
        .track(id)
        .ok_or_else(|| MetricsError::UnknownTrack(id.to_string()))
}

fn state_at<'a>(
    track: &'a AgentTrack,
    frame: usize,
) -> Result<&'a crate::trajmodel::AgentState, MetricsError> {
    track.state(frame).ok_or_else(|| MetricsError::InvalidState {
        track: track.track_id.clone(),
        frame,
    })
}

/// Geometry shared by all metrics of one event.
struct EventAxes<'a> {
    cutter: &'a AgentTrack,
    target: &'a AgentTrack,
    axis: ReferenceFrame,
}

impl<'a> EventAxes<'a> {
    fn new(event: &CutInEvent, scenario: &'a Scenario) -> Result<Self, MetricsError> {
        let cutter = track(scenario, &event.cutter_id)?;
        let target = track(scenario, &event.target_id)?;
        let t = state_at(target, event.entry_frame)?;
        Ok(Self {
            cutter,
            target,
            axis: ReferenceFrame::new([t.x, t.y], t.heading),
        })
    }

    /// Cutter rear bumper minus target front bumper; negative when overlapping.
    fn separation(&self, frame: usize) -> Option<f64> {
        let c = self.cutter.state(frame)?;
        let t = self.target.state(frame)?;
        let sc = self.axis.project(c.x, c.y).s;
        let st = self.axis.project(t.x, t.y).s;
        Some((sc - c.length / 2.0) - (st + t.length / 2.0))
    }

    fn speed(&self, track: &AgentTrack, frame: usize) -> Result<f64, MetricsError> {
        let s = state_at(track, frame)?;
        Ok(self.axis.longitudinal(s.vx, s.vy))
    }
}

pub fn gap_at_entry(event: &CutInEvent, scenario: &Scenario) -> Result<f64, MetricsError> {
    let ax = EventAxes::new(event, scenario)?;
    state_at(ax.cutter, event.entry_frame)?;
    Ok(ax.separation(event.entry_frame).unwrap_or(0.0).max(0.0))
}

/// `gap / closing` when `closing > 0`.
pub fn time_to_collision(gap: f64, closing: f64) -> Option<f64> {
    (closing > 0.0).then(|| gap / closing)
}

pub fn min_distance(event: &CutInEvent, scenario: &Scenario) -> Result<f64, MetricsError> {
    let ax = EventAxes::new(event, scenario)?;
    (event.onset_frame..=event.completion_frame)
        .filter_map(|f| ax.separation(f))
        .map(|d| d.max(0.0))
        .reduce(f64::min)
        .ok_or(MetricsError::NoJointFrame(
            event.onset_frame,
            event.completion_frame,
        ))
}

/// Target speed at entry minus its speed [`LEAD_DROP_FRAMES`] later, or at its
/// last valid frame before then when the recording ends early.
pub fn lead_speed_drop(event: &CutInEvent, scenario: &Scenario) -> Result<f64, MetricsError> {
    let target = track(scenario, &event.target_id)?;
    let v0 = state_at(target, event.entry_frame)?.speed();
    let v1 = (event.entry_frame + 1..=event.entry_frame + LEAD_DROP_FRAMES)
        .rev()
        .find_map(|f| target.state(f))
        .ok_or(MetricsError::NoPostEntryFrame)?
        .speed();
    Ok(v0 - v1)
}

pub fn compute_all(event: &CutInEvent, scenario: &Scenario) -> Result<SafetyMetrics, MetricsError> {
    compute_all_with(event, scenario, &SeverityBounds::default())
}

pub fn compute_all_with(
    event: &CutInEvent,
    scenario: &Scenario,
    bounds: &SeverityBounds,
) -> Result<SafetyMetrics, MetricsError> {
    let ax = EventAxes::new(event, scenario)?;
    let gap_entry = gap_at_entry(event, scenario)?;
    let cutin_speed = ax.speed(ax.cutter, event.entry_frame)?;
    let target_speed = ax.speed(ax.target, event.entry_frame)?;
    let speed_diff = cutin_speed - target_speed;
    Ok(SafetyMetrics {
        gap_entry,
        ttc: time_to_collision(gap_entry, -speed_diff),
        min_distance: min_distance(event, scenario)?,
        cutin_speed,
        target_speed,
        speed_diff,
        lc_duration: (event.completion_frame - event.entry_frame) as f64 / scenario.frame_rate,
        lead_speed_drop: lead_speed_drop(event, scenario)?,
        severity: bounds.classify(gap_entry),
    })
}

/// One row of the events table, in emission units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub scenario_id: String,
    pub cutter_id: String,
    pub target_id: String,
    pub target_kind: TargetKind,
    pub side: Side,
    pub entry_frame: usize,
    pub gap_m: f64,
    pub ttc_s: Option<f64>,
    pub min_dist_m: f64,
    pub cutin_speed_kmh: f64,
    pub speed_diff_kmh: f64,
    pub lc_duration_s: f64,
    pub lead_speed_drop_kmh: f64,
    pub severity: Severity,
}

impl EventRow {
    pub fn new(event: &CutInEvent, m: &SafetyMetrics) -> Self {
        Self {
            scenario_id: event.scenario_id.clone(),
            cutter_id: event.cutter_id.clone(),
            target_id: event.target_id.clone(),
            target_kind: event.target_kind,
            side: event.side,
            entry_frame: event.entry_frame,
            gap_m: m.gap_entry,
            ttc_s: m.ttc,
            min_dist_m: m.min_distance,
            cutin_speed_kmh: m.cutin_speed * KMH_PER_MPS,
            speed_diff_kmh: m.speed_diff * KMH_PER_MPS,
            lc_duration_s: m.lc_duration,
            lead_speed_drop_kmh: m.lead_speed_drop * KMH_PER_MPS,
            severity: m.severity,
        }
    }

    /// Target (lead) speed at entry, km/h.
    pub fn target_speed_kmh(&self) -> f64 {
        self.cutin_speed_kmh - self.speed_diff_kmh
    }
}

pub const EVENT_COLUMNS: [&str; 14] = [
    "scenario_id",
    "cutter_id",
    "target_id",
    "target_kind",
    "side",
    "entry_frame",
    "gap_m",
    "ttc_s",
    "min_dist_m",
    "cutin_speed_kmh",
    "speed_diff_kmh",
    "lc_duration_s",
    "lead_speed_drop_kmh",
    "severity",
];

/// Write the events table. `preamble` lines are emitted first, each
/// prefixed with `# `; the header row is always written.
pub fn write_events_table<W: Write>(
    mut out: W,
    preamble: &[String],
    rows: &[EventRow],
) -> Result<(), MetricsError> {
    for line in preamble {
        writeln!(out, "# {line}").map_err(csv::Error::from)?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(EVENT_COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read an events table, skipping `#` comment lines.
pub fn read_events_table<R: Read>(input: R) -> Result<Vec<EventRow>, MetricsError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(EVENT_COLUMNS) {
        return Err(MetricsError::Row {
            row: 0,
            reason: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        });
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| MetricsError::Row {
                row: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
