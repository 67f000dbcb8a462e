use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{num, open, OutDir, ReportError, RunManifest, Settings};
use crate::detector::{detect_cutins, CutInEvent};
use crate::trajmodel::{parse_scenario_stream, ReferenceFrame, Scenario};

/// Frames between completion and the recovery instant (3 s).
pub const RECOVERY_FRAMES: usize = 30;
const CI_FASTER: &str = "CI faster";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Before entry.
    FreeFlow,
    /// From entry up to completion.
    LaneChange,
    /// From completion on.
    Merged,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FreeFlow => "free-flow",
            Self::LaneChange => "lane-change",
            Self::Merged => "merged",
        }
    }

    fn of(frame: usize, event: &CutInEvent) -> Self {
        if frame < event.entry_frame {
            Self::FreeFlow
        } else if frame < event.completion_frame {
            Self::LaneChange
        } else {
            Self::Merged
        }
    }
}

/// Kinematics of one frame, measured along the target's heading at entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayFrame {
    pub frame: usize,
    pub t: f64,
    /// Bumper gap, m, floored at 0.
    pub gap: f64,
    /// Approach speed, target minus cutter, m/s.
    pub dv_app: f64,
    /// `gap / dv_app` while the target is closing.
    pub ttc: Option<f64>,
    /// Cutter offset from the entered lane's centerline, m, left positive.
    pub lateral_offset: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyInstant {
    pub name: String,
    pub frame: usize,
    pub t: f64,
    pub gap: f64,
    pub dv_app: f64,
    pub ttc: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySummary {
    pub event: CutInEvent,
    pub frames: Vec<ReplayFrame>,
    pub key_instants: Vec<KeyInstant>,
    pub files: Vec<PathBuf>,
}

/// Per-frame series over every frame where both vehicles are valid, plus the
/// onset, entry, completion and recovery instants.
pub fn replay_series(
    scenario: &Scenario,
    event: &CutInEvent,
) -> Result<(Vec<ReplayFrame>, Vec<KeyInstant>), ReportError> {
    let missing = |what: &str| ReportError::NotFound(format!("{what} not in scenario {}", scenario.scenario_id));
    let cutter = scenario.track(&event.cutter_id).ok_or_else(|| missing("cutter"))?;
    let target = scenario.track(&event.target_id).ok_or_else(|| missing("target"))?;
    let lane = scenario.lane(&event.lane_id).ok_or_else(|| missing("lane"))?;
    let t0 = target.state(event.entry_frame).ok_or_else(|| missing("target state at entry"))?;
    let axis = ReferenceFrame::new([t0.x, t0.y], t0.heading);

    let frames: Vec<ReplayFrame> = (0..scenario.frame_count)
        .filter_map(|f| {
            let (c, t) = (cutter.state(f)?, target.state(f)?);
            let sep = (axis.project(c.x, c.y).s - c.length / 2.0) - (axis.project(t.x, t.y).s + t.length / 2.0);
            let gap = sep.max(0.0);
            let dv_app = axis.longitudinal(t.vx, t.vy) - axis.longitudinal(c.vx, c.vy);
            Some(ReplayFrame {
                frame: f,
                t: scenario.frame_time(f),
                gap,
                dv_app,
                ttc: (dv_app > 0.0).then(|| gap / dv_app),
                lateral_offset: lane.locate(c.x, c.y).offset,
                phase: Phase::of(f, event),
            })
        })
        .collect();

    let at = |frame: usize| frames.iter().rev().find(|r| r.frame <= frame);
    let instants = [
        ("t0 (onset)", event.onset_frame),
        ("t_LC (entry)", event.entry_frame),
        ("t_end (merged)", event.completion_frame),
        ("t_end+3s (recovery)", event.completion_frame + RECOVERY_FRAMES),
    ];
    let key_instants = instants
        .into_iter()
        .filter_map(|(name, want)| {
            let r = at(want)?;
            let mut note = Vec::new();
            if r.dv_app <= 0.0 {
                note.push(CI_FASTER.to_string());
            }
            if r.frame != want {
                note.push(format!("frame {want} unavailable, using {}", r.frame));
            }
            Some(KeyInstant {
                name: name.to_string(),
                frame: r.frame,
                t: r.t,
                gap: r.gap,
                dv_app: r.dv_app,
                ttc: r.ttc,
                note: note.join("; "),
            })
        })
        .collect();
    Ok((frames, key_instants))
}

fn find_scenario(input: &Path, id: &str, strict: bool) -> Result<Scenario, ReportError> {
    for rec in parse_scenario_stream(open(input)?) {
        match rec {
            Ok(s) if s.scenario_id == id => return Ok(s),
            Ok(_) => {}
            Err(source) if strict => {
                return Err(ReportError::Record {
                    path: input.to_path_buf(),
                    source,
                })
            }
            Err(_) => {}
        }
    }
    Err(ReportError::NotFound(format!("scenario {id:?} not in {}", input.display())))
}

/// Replay the cut-in of `cutter_id` in front of `target_id`.
pub fn cmd_replay(
    input: &Path,
    scenario_id: &str,
    cutter_id: &str,
    target_id: &str,
    out_dir: &Path,
    settings: &Settings,
) -> Result<ReplaySummary, ReportError> {
    settings.validate()?;
    let scenario = find_scenario(input, scenario_id, settings.strict)?;
    let event = detect_cutins(&scenario, &settings.detector)
        .into_iter()
        .map(|(e, _)| e)
        .find(|e| e.cutter_id == cutter_id && e.target_id == target_id)
        .ok_or_else(|| {
            ReportError::NotFound(format!(
                "no cut-in by {cutter_id:?} in front of {target_id:?} in scenario {scenario_id:?}"
            ))
        })?;
    let (frames, key_instants) = replay_series(&scenario, &event)?;

    let dir = OutDir::create(out_dir)?;
    let mut manifest = RunManifest::new("replay", &[input], None, settings);
    manifest.count("frames", frames.len());
    manifest.notes.push(format!(
        "scenario {scenario_id}, cutter {cutter_id}, target {target_id}, onset {} entry {} completion {}",
        event.onset_frame, event.entry_frame, event.completion_frame
    ));
    let files = vec![
        dir.write_csv(
            "replay_timeseries.csv",
            &manifest,
            &["frame", "t_s", "gap_m", "dv_app_mps", "ttc_s", "lateral_offset_m", "phase"],
            frames.iter().map(|r| {
                vec![
                    r.frame.to_string(),
                    r.t.to_string(),
                    r.gap.to_string(),
                    r.dv_app.to_string(),
                    num(r.ttc),
                    r.lateral_offset.to_string(),
                    r.phase.as_str().to_string(),
                ]
            }),
        )?,
        dir.write_csv(
            "replay_key_instants.csv",
            &manifest,
            &["instant", "frame", "t_s", "gap_m", "dv_app_mps", "ttc_s", "note"],
            key_instants.iter().map(|k| {
                vec![
                    k.name.clone(),
                    k.frame.to_string(),
                    k.t.to_string(),
                    k.gap.to_string(),
                    k.dv_app.to_string(),
                    num(k.ttc),
                    k.note.clone(),
                ]
            }),
        )?,
    ];
    dir.finish(&manifest)?;
    Ok(ReplaySummary {
        event,
        frames,
        key_instants,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::DetectorConfig;
    use crate::synth::replay_twin;

    #[test]
    fn twin_key_instants() {
        let s = replay_twin().scenario;
        let (e, _) = detect_cutins(&s, &DetectorConfig::default()).remove(0);
        let (frames, keys) = replay_series(&s, &e).unwrap();
        assert_eq!(frames.len(), 91);
        let want = [(7, 12.0, None), (25, 7.6, Some(2.5)), (32, 5.0, Some(1.1)), (62, 5.5, None)];
        for (k, (frame, gap, ttc)) in keys.iter().zip(want) {
            assert_eq!(k.frame, frame);
            assert!((k.gap - gap).abs() < 0.01, "{} gap {}", k.name, k.gap);
            if let Some(ttc) = ttc {
                assert!((k.ttc.unwrap() - ttc).abs() < 0.05, "{} ttc {:?}", k.name, k.ttc);
            }
        }
        assert_eq!(keys[0].note, CI_FASTER);
        assert!((keys[1].dv_app - 3.0).abs() < 1e-9);
        assert!((keys[2].dv_app - 4.4).abs() < 1e-9);
        assert!(keys[3].dv_app.abs() < 0.1);
        assert!(frames.iter().all(|r| (r.dv_app > 0.0) == r.ttc.is_some()));
        let phases: Vec<Phase> = frames.iter().map(|r| r.phase).collect();
        assert_eq!(phases[24], Phase::FreeFlow);
        assert_eq!(phases[25], Phase::LaneChange);
        assert_eq!(phases[31], Phase::LaneChange);
        assert_eq!(phases[32], Phase::Merged);
    }
}
