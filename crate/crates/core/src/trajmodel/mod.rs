//! Scenario domain model.
//!
//! A [`Scenario`] is one fixed-rate recording: a set of agent tracks sampled on
//! a common frame clock, the lane centerlines they drive on, and the id of the
//! track that belongs to the autonomous vehicle. Everything in this module is
//! immutable after construction; [`Scenario::new`] is the single place where
//! the structural invariants are checked.

mod geometry;
mod io;

pub use geometry::{project_frame, FrameProjection, LanePoint, ReferenceFrame};
pub use io::{
    parse_scenario_stream, read_corpus, write_scenario, write_scenario_line, ParseMode,
    RecordError, ScenarioReader, FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Recording rate every scenario must use.
pub const FRAME_RATE_HZ: f64 = 10.0;
/// Seconds between consecutive frames.
pub const FRAME_DT: f64 = 1.0 / FRAME_RATE_HZ;
/// Lane width applied when a record omits it.
pub const DEFAULT_LANE_WIDTH_M: f64 = 3.6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("malformed record: {0}")]
    Schema(String),
    #[error("unsupported format_version {0}")]
    UnsupportedVersion(i64),
    #[error("frame rate must be 10 Hz, got {0}")]
    FrameRate(f64),
    #[error("duplicate AV designation: {0} tracks carry id {1:?}")]
    DuplicateAv(usize, String),
    #[error("no track carries the AV id {0:?}")]
    MissingAv(String),
    #[error("track {track:?} has {got} frames, expected {expected}")]
    FrameCount {
        track: String,
        got: usize,
        expected: usize,
    },
    #[error("lane {0:?}: {1}")]
    Lane(String, String),
    #[error("track {track:?} frame {frame}: {reason}")]
    State {
        track: String,
        frame: usize,
        reason: String,
    },
    #[error("unknown track {0:?}")]
    UnknownTrack(String),
    #[error("track {track:?} has no valid state at frame {frame}")]
    InvalidState { track: String, frame: usize },
    #[error("frame {0} outside scenario (frame_count {1})")]
    FrameOutOfRange(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentType {
    Vehicle,
    Pedestrian,
    Cyclist,
    Other,
}

impl AgentType {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Vehicle => "vehicle",
            Self::Pedestrian => "pedestrian",
            Self::Cyclist => "cyclist",
            Self::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vehicle" => Some(Self::Vehicle),
            "pedestrian" => Some(Self::Pedestrian),
            "cyclist" => Some(Self::Cyclist),
            "other" => Some(Self::Other),
            _ => None,
        }
    }
}

/// One agent sample. Invalid samples are stored as [`AgentState::INVALID`] so
/// that equal scenarios compare equal regardless of what the source carried
/// in occluded frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub vx: f64,
    pub vy: f64,
    pub length: f64,
    pub width: f64,
    pub valid: bool,
}

impl AgentState {
    pub const INVALID: AgentState = AgentState {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
        vx: 0.0,
        vy: 0.0,
        length: 0.0,
        width: 0.0,
        valid: false,
    };

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    fn check(&self) -> Result<(), String> {
        if !self.valid {
            return Ok(());
        }
        let fields = [
            self.x,
            self.y,
            self.heading,
            self.vx,
            self.vy,
            self.length,
            self.width,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.length <= 0.0 || self.width <= 0.0 {
            return Err("box extent must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub track_id: String,
    pub agent_type: AgentType,
    /// Object-type flag for parked or otherwise stationary objects.
    pub stationary: bool,
    pub states: Vec<AgentState>,
}

impl AgentTrack {
    pub fn state(&self, frame: usize) -> Option<&AgentState> {
        self.states.get(frame).filter(|s| s.valid)
    }

    pub fn is_vehicle(&self) -> bool {
        self.agent_type == AgentType::Vehicle
    }

    /// Largest speed over the valid frames, 0 for an all-invalid track.
    pub fn max_speed(&self) -> f64 {
        self.states
            .iter()
            .filter(|s| s.valid)
            .map(AgentState::speed)
            .fold(0.0, f64::max)
    }

    pub fn valid_frames(&self) -> impl Iterator<Item = (usize, &AgentState)> + '_ {
        self.states.iter().enumerate().filter(|(_, s)| s.valid)
    }
}

/// A lane centerline polyline with a constant width.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneGeometry {
    pub lane_id: String,
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
    /// `true` when the width came from [`DEFAULT_LANE_WIDTH_M`] rather than the record.
    pub width_defaulted: bool,
}

impl LaneGeometry {
    pub fn new(
        lane_id: impl Into<String>,
        centerline: Vec<[f64; 2]>,
        width: Option<f64>,
    ) -> Result<Self, ScenarioError> {
        let lane_id = lane_id.into();
        let bad = |msg: &str| ScenarioError::Lane(lane_id.clone(), msg.to_string());
        if centerline.len() < 2 {
            return Err(bad("centerline needs at least two points"));
        }
        if centerline.iter().flatten().any(|v| !v.is_finite()) {
            return Err(bad("non-finite centerline point"));
        }
        if centerline
            .windows(2)
            .any(|w| w[0][0] == w[1][0] && w[0][1] == w[1][1])
        {
            return Err(bad("coincident consecutive centerline points"));
        }
        let (width, width_defaulted) = match width {
            Some(w) if w.is_finite() && w > 0.0 => (w, false),
            Some(_) => return Err(bad("width must be positive")),
            None => (DEFAULT_LANE_WIDTH_M, true),
        };
        Ok(Self {
            lane_id,
            centerline,
            width,
            width_defaulted,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scenario_id: String,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub tracks: Vec<AgentTrack>,
    pub lanes: Vec<LaneGeometry>,
    pub av_track_id: String,
}

impl Scenario {
    pub fn new(
        scenario_id: impl Into<String>,
        frame_rate: f64,
        av_track_id: impl Into<String>,
        tracks: Vec<AgentTrack>,
        lanes: Vec<LaneGeometry>,
    ) -> Result<Self, ScenarioError> {
        let av_track_id = av_track_id.into();
        if (frame_rate - FRAME_RATE_HZ).abs() > 1e-9 {
            return Err(ScenarioError::FrameRate(frame_rate));
        }
        let av_count = tracks.iter().filter(|t| t.track_id == av_track_id).count();
        match av_count {
            0 => return Err(ScenarioError::MissingAv(av_track_id)),
            1 => {}
            n => return Err(ScenarioError::DuplicateAv(n, av_track_id)),
        }
        let frame_count = tracks[0].states.len();
        if frame_count == 0 {
            return Err(ScenarioError::Schema("tracks have no frames".into()));
        }
        for track in &tracks {
            if track.states.len() != frame_count {
                return Err(ScenarioError::FrameCount {
                    track: track.track_id.clone(),
                    got: track.states.len(),
                    expected: frame_count,
                });
            }
            for (frame, state) in track.states.iter().enumerate() {
                state.check().map_err(|reason| ScenarioError::State {
                    track: track.track_id.clone(),
                    frame,
                    reason,
                })?;
            }
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            frame_rate,
            frame_count,
            tracks,
            lanes,
            av_track_id,
        })
    }

    pub fn track(&self, id: &str) -> Option<&AgentTrack> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn av(&self) -> &AgentTrack {
        self.track(&self.av_track_id)
            .expect("constructor guarantees the AV track exists")
    }

    pub fn lane(&self, id: &str) -> Option<&LaneGeometry> {
        self.lanes.iter().find(|l| l.lane_id == id)
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate
    }

    /// Lane whose centerline is nearest to `(x, y)`; ties go to the
    /// lexicographically smallest lane id.
    pub fn nearest_lane(&self, x: f64, y: f64) -> Option<(&LaneGeometry, LanePoint)> {
        let mut best: Option<(&LaneGeometry, LanePoint)> = None;
        for lane in &self.lanes {
            let p = lane.locate(x, y);
            let better = match &best {
                None => true,
                Some((bl, bp)) => {
                    let (d, bd) = (p.offset.abs(), bp.offset.abs());
                    d < bd || (d == bd && lane.lane_id < bl.lane_id)
                }
            };
            if better {
                best = Some((lane, p));
            }
        }
        best
    }

    /// Apply a rigid motion (rotation by `angle` then translation) to every
    /// position, velocity, heading and centerline point.
    pub fn transformed(&self, angle: f64, tx: f64, ty: f64) -> Scenario {
        let (sin, cos) = angle.sin_cos();
        let rot = |x: f64, y: f64| (cos * x - sin * y, sin * x + cos * y);
        let mut out = self.clone();
        for track in &mut out.tracks {
            for s in track.states.iter_mut().filter(|s| s.valid) {
                let (x, y) = rot(s.x, s.y);
                let (vx, vy) = rot(s.vx, s.vy);
                s.x = x + tx;
                s.y = y + ty;
                s.vx = vx;
                s.vy = vy;
                s.heading += angle;
            }
        }
        for lane in &mut out.lanes {
            for p in &mut lane.centerline {
                let (x, y) = rot(p[0], p[1]);
                *p = [x + tx, y + ty];
            }
        }
        out
    }

    /// Reflect the scene across the map x-axis. Left and right swap.
    pub fn mirrored(&self) -> Scenario {
        let mut out = self.clone();
        for track in &mut out.tracks {
            for s in track.states.iter_mut().filter(|s| s.valid) {
                s.y = -s.y;
                s.vy = -s.vy;
                s.heading = -s.heading;
            }
        }
        for lane in &mut out.lanes {
            for p in &mut lane.centerline {
                p[1] = -p[1];
            }
        }
        out
    }
}

/// Thresholds of the speed-based eligibility screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EligibilityRule {
    pub min_speed: f64,
    pub min_frames: usize,
}

impl Default for EligibilityRule {
    fn default() -> Self {
        Self {
            min_speed: 5.0,
            min_frames: 50,
        }
    }
}

/// True iff the AV holds at least `min_speed` for `min_frames` consecutive
/// valid frames. Invalid frames break the run.
pub fn scenario_eligible(scenario: &Scenario, rule: &EligibilityRule) -> bool {
    let mut run = 0usize;
    for state in &scenario.av().states {
        if state.valid && state.speed() >= rule.min_speed {
            run += 1;
            if run >= rule.min_frames {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Signed perpendicular distance from the track's centroid at `frame` to the
/// lane centerline, positive to the left of the centerline direction.
pub fn lateral_offset(
    track: &AgentTrack,
    lane: &LaneGeometry,
    frame: usize,
) -> Result<f64, ScenarioError> {
    let state = track.state(frame).ok_or_else(|| ScenarioError::InvalidState {
        track: track.track_id.clone(),
        frame,
    })?;
    if lane
        .centerline
        .windows(2)
        .any(|w| w[0][0] == w[1][0] && w[0][1] == w[1][1])
    {
        return Err(ScenarioError::Lane(
            lane.lane_id.clone(),
            "degenerate centerline segment".into(),
        ));
    }
    Ok(lane.locate(state.x, state.y).offset)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn state(x: f64, y: f64, vx: f64, vy: f64) -> AgentState {
        AgentState {
            x,
            y,
            heading: vy.atan2(vx),
            vx,
            vy,
            length: 4.8,
            width: 1.9,
            valid: true,
        }
    }

    fn av_only(speeds: &[f64]) -> Scenario {
        let states = speeds.iter().map(|&v| state(0.0, 0.0, v, 0.0)).collect();
        let av = AgentTrack {
            track_id: "av".into(),
            agent_type: AgentType::Vehicle,
            stationary: false,
            states,
        };
        Scenario::new("s", 10.0, "av", vec![av], vec![]).unwrap()
    }

    #[test]
    fn eligibility_runs() {
        let rule = EligibilityRule::default();
        assert!(scenario_eligible(&av_only(&[6.0; 91]), &rule));
        assert!(!scenario_eligible(&av_only(&[4.9; 91]), &rule));

        let mut speeds = vec![6.0; 49];
        speeds.extend(std::iter::repeat(3.0).take(42));
        assert!(!scenario_eligible(&av_only(&speeds), &rule));
        speeds[49] = 5.0;
        assert!(scenario_eligible(&av_only(&speeds), &rule));
    }

    #[test]
    fn invalid_frame_breaks_run() {
        let mut s = av_only(&[6.0; 91]);
        s.tracks[0].states[45] = AgentState::INVALID;
        assert!(!scenario_eligible(&s, &EligibilityRule::default()));
    }

    #[test]
    fn rejects_duplicate_av_and_bad_rate() {
        let t = av_only(&[6.0; 3]).tracks[0].clone();
        let err = Scenario::new("s", 10.0, "av", vec![t.clone(), t.clone()], vec![]).unwrap_err();
        assert!(err.to_string().contains("duplicate AV designation"));
        let err = Scenario::new("s", 20.0, "av", vec![t], vec![]).unwrap_err();
        assert_eq!(err, ScenarioError::FrameRate(20.0));
    }

    #[test]
    fn lane_validation() {
        assert!(LaneGeometry::new("l", vec![[0.0, 0.0]], None).is_err());
        assert!(LaneGeometry::new("l", vec![[0.0, 0.0], [0.0, 0.0]], None).is_err());
        let lane = LaneGeometry::new("l", vec![[0.0, 0.0], [1.0, 0.0]], None).unwrap();
        assert_eq!(lane.width, DEFAULT_LANE_WIDTH_M);
        assert!(lane.width_defaulted);
    }

    #[test]
    fn lateral_offset_sign_and_value() {
        let lane = LaneGeometry::new("l", vec![[0.0, 0.0], [100.0, 0.0]], Some(3.6)).unwrap();
        let track = AgentTrack {
            track_id: "a".into(),
            agent_type: AgentType::Vehicle,
            stationary: false,
            states: vec![
                state(10.0, 0.0, 5.0, 0.0),
                state(10.0, 1.5, 5.0, 0.0),
                state(10.0, -1.5, 5.0, 0.0),
                AgentState::INVALID,
            ],
        };
        assert_eq!(lateral_offset(&track, &lane, 0).unwrap(), 0.0);
        assert!((lateral_offset(&track, &lane, 1).unwrap() - 1.5).abs() < 1e-12);
        assert!((lateral_offset(&track, &lane, 2).unwrap() + 1.5).abs() < 1e-12);
        assert!(lateral_offset(&track, &lane, 3).is_err());
    }

    #[test]
    fn nearest_lane_tie_breaks_on_id() {
        let l1 = LaneGeometry::new("b", vec![[0.0, 1.0], [10.0, 1.0]], None).unwrap();
        let l2 = LaneGeometry::new("a", vec![[0.0, -1.0], [10.0, -1.0]], None).unwrap();
        let av = av_only(&[6.0]).tracks.remove(0);
        let s = Scenario::new("s", 10.0, "av", vec![av], vec![l1, l2]).unwrap();
        assert_eq!(s.nearest_lane(5.0, 0.0).unwrap().0.lane_id, "a");
        assert_eq!(s.nearest_lane(5.0, 0.5).unwrap().0.lane_id, "b");
    }
}
