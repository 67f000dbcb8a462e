//! Deterministic synthetic corpora with planted cut-ins.
//!
//! Every scenario is a straight multi-lane road along +x. The target drives
//! in lane `L1` centered on `y = 0`; the cutter starts in the adjacent lane
//! `L2` and merges ahead of it. Kinematics are closed-form, so each planted
//! event comes with its exact onset, entry and completion frames and its
//! exact metrics, which makes the generator an oracle for the detector and
//! the statistics downstream.

mod corpus;
mod plant;
mod profile;

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{Criterion, CutInEvent, Side, TargetKind};
use crate::metrics::SafetyMetrics;

pub use corpus::{
    generate_corpus, write_corpus, Corpus, CorpusConfig, Distributions, KindDistribution,
    PlantMix, Preset,
};
pub use plant::{plant_cutin, replay_twin, Planted, AV_ID, CUTTER_ID, LEAD_ID, REPLAY_TWIN_ID};
pub use profile::{LateralProfile, DRIFT_RAMP, DRIFT_SPEED};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible plant: {0}")]
    Infeasible(String),
    #[error("plant would not pass the detector: {0}")]
    NotPassable(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no passable draw for scenario {0} after {1} attempts")]
    Exhausted(usize, usize),
    #[error("label line {line}: {source}")]
    Label {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A distractor that must not be detected, named after what it gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Negative {
    /// Cutter below the minimum speed.
    LowSpeed,
    /// Merge from the shoulder, no source lane.
    ShoulderMerge,
    /// Entry too far ahead of the target.
    FarAhead,
    /// Lane change slower than the duration bound.
    SlowChange,
    /// Cutter ends up behind the target.
    Behind,
    /// Lateral creep that never reaches the lateral-speed bound.
    Creep,
    /// Cutter flagged as a stationary object.
    Stationary,
    /// Partial lane change that turns back.
    Aborted,
    /// No lane change at all.
    LaneKeep,
}

impl Negative {
    pub const ALL: [Negative; 9] = [
        Negative::LowSpeed,
        Negative::ShoulderMerge,
        Negative::FarAhead,
        Negative::SlowChange,
        Negative::Behind,
        Negative::Creep,
        Negative::Stationary,
        Negative::Aborted,
        Negative::LaneKeep,
    ];

    /// The single criterion this template fails, `None` for lane keeping.
    pub fn violated(self) -> Option<Criterion> {
        match self {
            Self::LowSpeed => Some(Criterion::C1),
            Self::ShoulderMerge => Some(Criterion::C2),
            Self::FarAhead => Some(Criterion::C3),
            Self::SlowChange => Some(Criterion::C4),
            Self::Behind => Some(Criterion::C5),
            Self::Creep => Some(Criterion::C6),
            Self::Stationary => Some(Criterion::C7),
            Self::Aborted => Some(Criterion::C8),
            Self::LaneKeep => None,
        }
    }

    /// The template spec: an AV-targeted cut-in from the left, changed just
    /// enough to fail [`Negative::violated`]. The creep, aborted and
    /// lane-keeping shapes have fixed lateral motion; their timing fields
    /// are ignored.
    pub fn template(self) -> PlantSpec {
        let base = PlantSpec {
            target_kind: TargetKind::Av,
            gap_entry: 8.0,
            cutter_speed: 12.0,
            target_speed: 12.0,
            lc_duration: 1.0,
            side: Side::Left,
            entry_time: 3.0,
            onset_lead: 1.5,
            lead_speed_drop: 0.0,
            lane_width: 3.6,
            noise_std: 0.0,
            negative: Some(self),
        };
        match self {
            Self::LowSpeed => PlantSpec {
                cutter_speed: 1.9,
                target_speed: 6.0,
                lc_duration: 0.8,
                ..base
            },
            // 23.2 m bumper gap puts the fronts 28 m apart.
            Self::FarAhead => PlantSpec {
                gap_entry: 23.2,
                ..base
            },
            Self::SlowChange => PlantSpec {
                lc_duration: 7.0,
                entry_time: 1.0,
                onset_lead: 0.8,
                ..base
            },
            // Centroids 8 m apart with the cutter behind.
            Self::Behind => PlantSpec {
                gap_entry: -8.0 - (plant::CAR_LENGTH + plant::AV_LENGTH) / 2.0,
                ..base
            },
            _ => base,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::LowSpeed => "low-speed",
            Self::ShoulderMerge => "shoulder-merge",
            Self::FarAhead => "far-ahead",
            Self::SlowChange => "slow-change",
            Self::Behind => "behind",
            Self::Creep => "creep",
            Self::Stationary => "stationary",
            Self::Aborted => "aborted",
            Self::LaneKeep => "lane-keep",
        }
    }
}

/// Parameters of one planted maneuver. Speeds are longitudinal, m/s, at the
/// entry frame; times are seconds from the first frame and are snapped to
/// the 10 Hz grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub target_kind: TargetKind,
    /// Cutter rear bumper minus target front bumper at entry, m.
    pub gap_entry: f64,
    pub cutter_speed: f64,
    pub target_speed: f64,
    /// Entry to completion.
    pub lc_duration: f64,
    pub side: Side,
    pub entry_time: f64,
    /// Onset to entry.
    pub onset_lead: f64,
    /// Target slow-down over the two seconds after entry, m/s.
    pub lead_speed_drop: f64,
    pub lane_width: f64,
    /// Positional jitter, m.
    pub noise_std: f64,
    /// `Some` for distractors.
    pub negative: Option<Negative>,
}

/// Ground truth for one planted event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedEvent {
    pub cutter_id: String,
    pub target_id: String,
    pub target_kind: TargetKind,
    pub side: Side,
    pub onset_frame: usize,
    pub entry_frame: usize,
    pub completion_frame: usize,
    pub planted: SafetyMetrics,
}

impl ExpectedEvent {
    pub fn to_event(&self, scenario_id: &str) -> CutInEvent {
        CutInEvent {
            scenario_id: scenario_id.to_string(),
            cutter_id: self.cutter_id.clone(),
            target_id: self.target_id.clone(),
            target_kind: self.target_kind,
            lane_id: plant::TARGET_LANE.to_string(),
            onset_frame: self.onset_frame,
            entry_frame: self.entry_frame,
            completion_frame: self.completion_frame,
            side: self.side,
            lc_duration: self.planted.lc_duration,
        }
    }
}

/// One line of the label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Label {
    pub scenario_id: String,
    pub expected_event: Option<ExpectedEvent>,
    pub violated_criterion: Option<Criterion>,
}

pub fn write_labels<W: Write>(mut out: W, labels: &[Label]) -> Result<(), SynthError> {
    for label in labels {
        serde_json::to_writer(&mut out, label).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_labels<R: BufRead>(input: R) -> Result<Vec<Label>, SynthError> {
    let mut labels = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(
            serde_json::from_str(&line).map_err(|source| SynthError::Label { line: i + 1, source })?,
        );
    }
    Ok(labels)
}

/// Piecewise-linear inverse CDF through `(probability, value)` knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct QuantileCurve(Vec<[f64; 2]>);

impl QuantileCurve {
    /// Knots must start at probability 0, end at 1, and be nondecreasing in
    /// both coordinates.
    pub fn new(knots: Vec<[f64; 2]>) -> Result<Self, SynthError> {
        let bad = |m: &str| Err(SynthError::Config(format!("quantile curve: {m}")));
        if knots.len() < 2 {
            return bad("needs at least two knots");
        }
        if knots.iter().flatten().any(|v| !v.is_finite()) {
            return bad("non-finite knot");
        }
        if knots[0][0] != 0.0 || knots[knots.len() - 1][0] != 1.0 {
            return bad("probabilities must run from 0 to 1");
        }
        if knots.windows(2).any(|w| w[1][0] < w[0][0] || w[1][1] < w[0][1]) {
            return bad("knots must be nondecreasing");
        }
        Ok(Self(knots))
    }

    pub fn median(&self) -> f64 {
        self.sample(0.5)
    }

    /// Value at probability `u`, clamped to `[0, 1]`.
    pub fn sample(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = &self.0;
        let i = k.partition_point(|p| p[0] <= u).clamp(1, k.len() - 1);
        let ([p0, v0], [p1, v1]) = (k[i - 1], k[i]);
        if p1 == p0 {
            return v1;
        }
        v0 + (v1 - v0) * (u - p0) / (p1 - p0)
    }

    /// Probability that a draw is strictly below `x`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        let k = &self.0;
        if x <= k[0][1] {
            return 0.0;
        }
        for w in k.windows(2) {
            let ([p0, v0], [p1, v1]) = (w[0], w[1]);
            if x <= v1 {
                return if v1 == v0 { p0 } else { p0 + (p1 - p0) * (x - v0) / (v1 - v0) };
            }
        }
        1.0
    }
}

impl TryFrom<Vec<[f64; 2]>> for QuantileCurve {
    type Error = SynthError;

    fn try_from(knots: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Self::new(knots)
    }
}

impl From<QuantileCurve> for Vec<[f64; 2]> {
    fn from(c: QuantileCurve) -> Self {
        c.0
    }
}
