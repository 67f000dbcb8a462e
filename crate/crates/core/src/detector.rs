//! Rule-based cut-in detection.
//!
//! Candidates are lane-residency transitions: every frame at which a vehicle
//! moves from outside a lane to inside it opens a [`CandidateWindow`] that
//! spans from its previous exit from that lane to its next one. Each
//! candidate is paired with every vehicle whose nearest lane at the entry
//! frame is the entered lane, and the pair is scored against eight criteria.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajmodel::{AgentTrack, LaneGeometry, ReferenceFrame, Scenario, ScenarioError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("no crossing into lane {0:?} within the window")]
    NoCrossing(String),
    #[error("window {start}..={end} outside scenario (frame_count {frame_count})")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        frame_count: usize,
    },
    #[error("unknown lane {0:?}")]
    UnknownLane(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Every threshold the detector uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// c1: minimum cutter speed throughout the maneuver, m/s.
    pub min_speed: f64,
    /// c3: maximum front-to-front longitudinal distance at entry, m.
    pub max_entry_distance: f64,
    /// c4: admissible entry-to-completion duration, s.
    pub min_lc_duration: f64,
    pub max_lc_duration: f64,
    /// c6: minimum peak lateral speed, m/s.
    pub min_peak_lateral_speed: f64,
    /// c7: a track whose maximum speed stays below this is treated as stationary, m/s.
    pub stationary_speed: f64,
    /// c8: maximum distance from the target's lane center at completion, m.
    pub lane_center_tolerance: f64,
    /// Radius around the AV inside which HDV targets are admitted, m.
    pub hdv_radius: f64,
    /// Lane-center stabilization: offset and lateral-speed bounds.
    pub settle_offset: f64,
    pub settle_lateral_speed: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_speed: 2.0,
            max_entry_distance: 25.0,
            min_lc_duration: 0.5,
            max_lc_duration: 6.0,
            min_peak_lateral_speed: 0.3,
            stationary_speed: 0.5,
            lane_center_tolerance: 1.5,
            hdv_radius: 75.0,
            settle_offset: 0.5,
            settle_lateral_speed: 0.3,
        }
    }
}

impl DetectorConfig {
    fn lc_frames(&self, rate: f64) -> RangeInclusive<usize> {
        let lo = (self.min_lc_duration * rate).round() as usize;
        let hi = (self.max_lc_duration * rate).round() as usize;
        lo..=hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "AV")]
    Av,
    #[serde(rename = "HDV")]
    Hdv,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TargetKind::Av => "AV",
            TargetKind::Hdv => "HDV",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "AV" => Some(TargetKind::Av),
            "HDV" => Some(TargetKind::Hdv),
            _ => None,
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Side of the target lane the cutter came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The eight detection criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
}

impl Criterion {
    pub const ALL: [Criterion; 8] = [
        Criterion::C1,
        Criterion::C2,
        Criterion::C3,
        Criterion::C4,
        Criterion::C5,
        Criterion::C6,
        Criterion::C7,
        Criterion::C8,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            Criterion::C1 => "cutter speed >= 2 m/s throughout",
            Criterion::C2 => "crosses from an adjacent lane into the target lane",
            Criterion::C3 => "front bumper within 25 m of the target at entry",
            Criterion::C4 => "lane-change duration within [0.5, 6.0] s",
            Criterion::C5 => "cutter ahead of the target at completion",
            Criterion::C6 => "peak lateral speed >= 0.3 m/s",
            Criterion::C7 => "cutter is not stationary",
            Criterion::C8 => "within 1.5 m of the target's lane center at completion",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CriteriaVerdict {
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub c5: bool,
    pub c6: bool,
    pub c7: bool,
    pub c8: bool,
}

impl CriteriaVerdict {
    pub fn get(&self, c: Criterion) -> bool {
        self.as_array()[c.index()]
    }

    pub fn as_array(&self) -> [bool; 8] {
        [
            self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8,
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.as_array().iter().all(|&b| b)
    }

    pub fn failed(&self) -> Vec<Criterion> {
        Criterion::ALL
            .into_iter()
            .filter(|&c| !self.get(c))
            .collect()
    }
}

/// A lane-residency transition of one vehicle into one lane.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateWindow {
    pub lane_id: String,
    /// First frame after the previous exit from the lane (or the first valid frame).
    pub start: usize,
    /// Last frame inside the lane before the next exit (or the last valid frame).
    pub end: usize,
}

/// Onset, entry and completion of one maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManeuverFrames {
    pub onset: usize,
    pub entry: usize,
    pub completion: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInEvent {
    pub scenario_id: String,
    pub cutter_id: String,
    pub target_id: String,
    pub target_kind: TargetKind,
    pub lane_id: String,
    pub onset_frame: usize,
    pub entry_frame: usize,
    pub completion_frame: usize,
    pub side: Side,
    /// Entry-to-completion time, s.
    pub lc_duration: f64,
}

/// One scored (cutter, target, window) triple, kept in diagnostic mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateVerdict {
    pub scenario_id: String,
    pub cutter_id: String,
    pub target_id: String,
    /// `None` when the target is neither the AV nor an HDV inside the radius.
    pub target_kind: Option<TargetKind>,
    pub lane_id: String,
    pub frames: ManeuverFrames,
    pub side: Side,
    pub verdict: CriteriaVerdict,
}

impl CandidateVerdict {
    pub fn is_event(&self) -> bool {
        self.target_kind.is_some() && self.verdict.all_pass()
    }

    fn to_event(&self, rate: f64) -> Option<CutInEvent> {
        Some(CutInEvent {
            scenario_id: self.scenario_id.clone(),
            cutter_id: self.cutter_id.clone(),
            target_id: self.target_id.clone(),
            target_kind: self.target_kind?,
            lane_id: self.lane_id.clone(),
            onset_frame: self.frames.onset,
            entry_frame: self.frames.entry,
            completion_frame: self.frames.completion,
            side: self.side,
            lc_duration: (self.frames.completion - self.frames.entry) as f64 / rate,
        })
    }
}

fn inside(lane: &LaneGeometry, x: f64, y: f64) -> bool {
    lane.locate(x, y).offset.abs() < lane.half_width()
}

/// First frame in `window` at which the cutter is strictly inside the lane
/// boundary after having been outside at its previous valid frame.
pub fn find_entry_frame(
    cutter: &AgentTrack,
    target_lane: &LaneGeometry,
    window: RangeInclusive<usize>,
) -> Result<usize, DetectorError> {
    let mut prev_inside: Option<bool> = None;
    for f in window {
        let Some(s) = cutter.state(f) else { continue };
        let now = inside(target_lane, s.x, s.y);
        if now && prev_inside == Some(false) {
            return Ok(f);
        }
        prev_inside = Some(now);
    }
    Err(DetectorError::NoCrossing(target_lane.lane_id.clone()))
}

/// All lane-entry windows of one track, ordered by lane then entry.
pub fn candidate_windows(scenario: &Scenario, track: &AgentTrack) -> Vec<CandidateWindow> {
    let valid: Vec<usize> = track.valid_frames().map(|(f, _)| f).collect();
    let (Some(&first), Some(&last)) = (valid.first(), valid.last()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for lane in &scenario.lanes {
        let flags: Vec<bool> = valid
            .iter()
            .map(|&f| {
                let s = &track.states[f];
                inside(lane, s.x, s.y)
            })
            .collect();
        let mut start = first;
        let mut i = 1;
        while i < valid.len() {
            if flags[i] && !flags[i - 1] {
                let mut j = i;
                while j + 1 < valid.len() && flags[j + 1] {
                    j += 1;
                }
                out.push(CandidateWindow {
                    lane_id: lane.lane_id.clone(),
                    start,
                    end: valid[j],
                });
                start = valid.get(j + 1).copied().unwrap_or(last);
                i = j + 1;
            } else {
                if flags[i - 1] && !flags[i] {
                    start = valid[i];
                }
                i += 1;
            }
        }
    }
    out
}

/// Onset, entry and completion of a cutter's maneuver inside `window`.
pub fn maneuver_frames(
    scenario: &Scenario,
    cutter: &AgentTrack,
    window: &CandidateWindow,
    config: &DetectorConfig,
) -> Result<ManeuverFrames, DetectorError> {
    check_window(scenario, window)?;
    let lane = scenario
        .lane(&window.lane_id)
        .ok_or_else(|| DetectorError::UnknownLane(window.lane_id.clone()))?;
    let entry = find_entry_frame(cutter, lane, window.start..=window.end)?;
    let settled = |offset: f64, rate: f64| {
        offset.abs() <= config.settle_offset && rate.abs() <= config.settle_lateral_speed
    };
    let onset = (window.start..entry)
        .rev()
        .find(|&f| {
            cutter.state(f).is_some_and(|s| {
                scenario
                    .nearest_lane(s.x, s.y)
                    .is_some_and(|(_, p)| settled(p.offset, p.lateral_rate(s.vx, s.vy)))
            })
        })
        .unwrap_or(window.start);
    let completion = (entry..=window.end)
        .find(|&f| {
            cutter.state(f).is_some_and(|s| {
                let p = lane.locate(s.x, s.y);
                settled(p.offset, p.lateral_rate(s.vx, s.vy))
            })
        })
        .unwrap_or(window.end);
    Ok(ManeuverFrames {
        onset,
        entry,
        completion,
    })
}

fn check_window(scenario: &Scenario, window: &CandidateWindow) -> Result<(), DetectorError> {
    if window.start > window.end || window.end >= scenario.frame_count {
        return Err(DetectorError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            frame_count: scenario.frame_count,
        });
    }
    Ok(())
}

fn track<'a>(scenario: &'a Scenario, id: &str) -> Result<&'a AgentTrack, DetectorError> {
    scenario
        .track(id)
        .ok_or_else(|| ScenarioError::UnknownTrack(id.to_string()).into())
}

/// Side the cutter approached the lane from, judged at the last valid frame
/// before entry.
fn approach_side(cutter: &AgentTrack, lane: &LaneGeometry, entry: usize) -> Side {
    let offset = (0..entry)
        .rev()
        .find_map(|f| cutter.state(f))
        .map_or(0.0, |s| lane.locate(s.x, s.y).offset);
    if offset > 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// Score one (cutter, target, window) triple.
pub fn evaluate_criteria(
    scenario: &Scenario,
    cutter_id: &str,
    target_id: &str,
    window: &CandidateWindow,
    config: &DetectorConfig,
) -> Result<CriteriaVerdict, DetectorError> {
    let cutter = track(scenario, cutter_id)?;
    let target = track(scenario, target_id)?;
    let frames = maneuver_frames(scenario, cutter, window, config)?;
    let lane = scenario
        .lane(&window.lane_id)
        .ok_or_else(|| DetectorError::UnknownLane(window.lane_id.clone()))?;
    Ok(score(scenario, cutter, target, lane, frames, config))
}

fn score(
    scenario: &Scenario,
    cutter: &AgentTrack,
    target: &AgentTrack,
    lane: &LaneGeometry,
    ManeuverFrames {
        onset,
        entry,
        completion,
    }: ManeuverFrames,
    config: &DetectorConfig,
) -> CriteriaVerdict {
    let maneuver = onset..=completion;

    let c1 = maneuver
        .clone()
        .all(|f| cutter.state(f).is_some_and(|s| s.speed() >= config.min_speed));

    let c2 = entry
        .checked_sub(1)
        .and_then(|f| cutter.state(f))
        .is_some_and(|s| {
            scenario.lanes.iter().any(|a| {
                a.lane_id != lane.lane_id && a.locate(s.x, s.y).offset.abs() <= a.half_width()
            })
        });

    let axis = target
        .state(entry)
        .map(|t| ReferenceFrame::new([t.x, t.y], t.heading));
    let along = |tr: &AgentTrack, f: usize| {
        let frame = axis?;
        tr.state(f).map(|s| (frame.project(s.x, s.y).s, s.length))
    };

    let c3 = match (along(cutter, entry), along(target, entry)) {
        (Some((sc, lc)), Some((st, lt))) => {
            ((sc + lc / 2.0) - (st + lt / 2.0)).abs() <= config.max_entry_distance
        }
        _ => false,
    };

    let c4 = config
        .lc_frames(scenario.frame_rate)
        .contains(&(completion - entry));

    let c5 = match (along(cutter, completion), along(target, completion)) {
        (Some((sc, _)), Some((st, _))) => sc - st > 0.0,
        _ => false,
    };

    let c6 = maneuver
        .filter_map(|f| cutter.state(f))
        .map(|s| lane.locate(s.x, s.y).lateral_rate(s.vx, s.vy).abs())
        .fold(0.0, f64::max)
        >= config.min_peak_lateral_speed;

    let c7 = !cutter.stationary && cutter.max_speed() >= config.stationary_speed;

    let c8 = match (cutter.state(completion), target.state(completion)) {
        (Some(c), Some(t)) => scenario
            .nearest_lane(t.x, t.y)
            .is_some_and(|(tl, _)| {
                tl.locate(c.x, c.y).offset.abs() <= config.lane_center_tolerance
            }),
        _ => false,
    };

    CriteriaVerdict {
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        c8,
    }
}

/// AV, HDV, or `None` when the target is not an eligible comparison vehicle.
pub fn classify_target(
    scenario: &Scenario,
    target_id: &str,
    entry_frame: usize,
    config: &DetectorConfig,
) -> Option<TargetKind> {
    if target_id == scenario.av_track_id {
        return Some(TargetKind::Av);
    }
    let target = scenario.track(target_id)?;
    if !target.is_vehicle() {
        return None;
    }
    let t = target.state(entry_frame)?;
    let av = scenario.av().state(entry_frame)?;
    ((t.x - av.x).hypot(t.y - av.y) <= config.hdv_radius).then_some(TargetKind::Hdv)
}

/// Score every candidate (cutter, target, window) triple in the scenario,
/// regardless of outcome. Rows come back ordered by
/// (entry frame, cutter, target).
pub fn diagnose_cutins(scenario: &Scenario, config: &DetectorConfig) -> Vec<CandidateVerdict> {
    let mut rows = Vec::new();
    for cutter in scenario.tracks.iter().filter(|t| t.is_vehicle()) {
        if cutter.track_id == scenario.av_track_id {
            continue;
        }
        for window in candidate_windows(scenario, cutter) {
            let Ok(frames) = maneuver_frames(scenario, cutter, &window, config) else {
                continue;
            };
            let lane = scenario
                .lane(&window.lane_id)
                .expect("window lanes come from the scenario");
            let side = approach_side(cutter, lane, frames.entry);
            for target in &scenario.tracks {
                if target.track_id == cutter.track_id || !target.is_vehicle() {
                    continue;
                }
                let Some(t) = target.state(frames.entry) else {
                    continue;
                };
                let in_lane = scenario
                    .nearest_lane(t.x, t.y)
                    .is_some_and(|(l, _)| l.lane_id == lane.lane_id);
                if !in_lane {
                    continue;
                }
                rows.push(CandidateVerdict {
                    scenario_id: scenario.scenario_id.clone(),
                    cutter_id: cutter.track_id.clone(),
                    target_id: target.track_id.clone(),
                    target_kind: classify_target(scenario, &target.track_id, frames.entry, config),
                    lane_id: window.lane_id.clone(),
                    frames,
                    side,
                    verdict: score(scenario, cutter, target, lane, frames, config),
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.frames.entry, &a.cutter_id, &a.target_id).cmp(&(b.frames.entry, &b.cutter_id, &b.target_id))
    });
    rows
}

/// Detected cut-ins: one per (cutter, target) pair, earliest entry wins,
/// ordered by (entry frame, cutter, target). The caller is expected to have
/// screened the scenario for eligibility.
pub fn detect_cutins(
    scenario: &Scenario,
    config: &DetectorConfig,
) -> Vec<(CutInEvent, CriteriaVerdict)> {
    let mut seen: HashMap<(String, String), ()> = HashMap::new();
    diagnose_cutins(scenario, config)
        .into_iter()
        .filter(CandidateVerdict::is_event)
        .filter(|row| {
            seen.insert((row.cutter_id.clone(), row.target_id.clone()), ())
                .is_none()
        })
        .filter_map(|row| Some((row.to_event(scenario.frame_rate)?, row.verdict)))
        .collect()
}
