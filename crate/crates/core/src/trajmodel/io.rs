//! Line-delimited JSON interchange format, one scenario per line.
//!
//! ```text
//! {"format_version":1,"scenario_id":"...","frame_rate_hz":10.0,"av_track_id":"av",
//!  "lanes":[{"lane_id":"L1","width_m":3.6,"centerline":[[x,y],...]}],
//!  "tracks":[{"track_id":"av","agent_type":"vehicle",
//!             "states":[[x,y,heading,vx,vy,length,width,1],null,...]}]}
//! ```
//!
//! An invalid frame may be written as `null` or as an 8-element row whose
//! last element is `0` (other elements may then be `null`). Tracks may carry
//! `"stationary": true` for parked objects. Blank lines and lines starting
//! with `#` are skipped.

use std::io::{BufRead, Write};

use serde::ser::SerializeTuple;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use super::{AgentState, AgentTrack, AgentType, LaneGeometry, Scenario, ScenarioError};

pub const FORMAT_VERSION: i64 = 1;

/// A record that failed to parse, tagged with its 1-based line number.
#[derive(Debug, Error)]
#[error("line {line}: {kind}")]
pub struct RecordError {
    pub line: usize,
    pub kind: ScenarioError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Report malformed records and keep going.
    Lenient,
    /// Stop at the first malformed record.
    Strict,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenarioIn {
    format_version: Option<i64>,
    scenario_id: String,
    frame_rate_hz: f64,
    av_track_id: String,
    lanes: Vec<RawLaneIn>,
    tracks: Vec<RawTrackIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaneIn {
    lane_id: String,
    #[serde(default)]
    width_m: Option<f64>,
    centerline: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrackIn {
    track_id: String,
    agent_type: String,
    #[serde(default)]
    stationary: bool,
    states: Vec<Option<[Option<f64>; 8]>>,
}

fn decode(line: &str) -> Result<Scenario, ScenarioError> {
    let raw: RawScenarioIn =
        serde_json::from_str(line).map_err(|e| ScenarioError::Schema(e.to_string()))?;
    match raw.format_version {
        Some(FORMAT_VERSION) => {}
        Some(v) => return Err(ScenarioError::UnsupportedVersion(v)),
        None => return Err(ScenarioError::Schema("missing field `format_version`".into())),
    }
    let lanes = raw
        .lanes
        .into_iter()
        .map(|l| LaneGeometry::new(l.lane_id, l.centerline, l.width_m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut tracks = Vec::with_capacity(raw.tracks.len());
    for t in raw.tracks {
        let agent_type = AgentType::parse(&t.agent_type).ok_or_else(|| {
            ScenarioError::Schema(format!("unknown agent_type {:?}", t.agent_type))
        })?;
        let states = t
            .states
            .iter()
            .enumerate()
            .map(|(frame, row)| decode_state(row.as_ref()).map_err(|reason| ScenarioError::State {
                track: t.track_id.clone(),
                frame,
                reason,
            }))
            .collect::<Result<Vec<_>, _>>()?;
        tracks.push(AgentTrack {
            track_id: t.track_id,
            agent_type,
            stationary: t.stationary,
            states,
        });
    }
    if tracks.is_empty() {
        return Err(ScenarioError::Schema("scenario has no tracks".into()));
    }
    Scenario::new(
        raw.scenario_id,
        raw.frame_rate_hz,
        raw.av_track_id,
        tracks,
        lanes,
    )
}

fn decode_state(row: Option<&[Option<f64>; 8]>) -> Result<AgentState, String> {
    let Some(row) = row else {
        return Ok(AgentState::INVALID);
    };
    match row[7] {
        Some(v) if v == 1.0 => {}
        Some(v) if v == 0.0 => return Ok(AgentState::INVALID),
        Some(v) => return Err(format!("valid flag must be 0 or 1, got {v}")),
        None => return Err("valid flag is null".into()),
    }
    let mut vals = [0.0; 7];
    for (dst, src) in vals.iter_mut().zip(row.iter()) {
        *dst = src.ok_or("null field in a valid state")?;
    }
    let [x, y, heading, vx, vy, length, width] = vals;
    Ok(AgentState {
        x,
        y,
        heading,
        vx,
        vy,
        length,
        width,
        valid: true,
    })
}

struct StateRow<'a>(&'a AgentState);

impl Serialize for StateRow<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let s = self.0;
        if !s.valid {
            return serializer.serialize_none();
        }
        let mut tup = serializer.serialize_tuple(8)?;
        for v in [s.x, s.y, s.heading, s.vx, s.vy, s.length, s.width] {
            tup.serialize_element(&v)?;
        }
        tup.serialize_element(&1u8)?;
        tup.end()
    }
}

#[derive(Serialize)]
struct RawScenarioOut<'a> {
    format_version: i64,
    scenario_id: &'a str,
    frame_rate_hz: f64,
    av_track_id: &'a str,
    lanes: Vec<RawLaneOut<'a>>,
    tracks: Vec<RawTrackOut<'a>>,
}

#[derive(Serialize)]
struct RawLaneOut<'a> {
    lane_id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    width_m: Option<f64>,
    centerline: &'a [[f64; 2]],
}

#[derive(Serialize)]
struct RawTrackOut<'a> {
    track_id: &'a str,
    agent_type: &'static str,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    stationary: bool,
    states: Vec<StateRow<'a>>,
}

/// Encode one scenario as a single JSON line (no trailing newline).
pub fn write_scenario(scenario: &Scenario) -> String {
    let raw = RawScenarioOut {
        format_version: FORMAT_VERSION,
        scenario_id: &scenario.scenario_id,
        frame_rate_hz: scenario.frame_rate,
        av_track_id: &scenario.av_track_id,
        lanes: scenario
            .lanes
            .iter()
            .map(|l| RawLaneOut {
                lane_id: &l.lane_id,
                width_m: (!l.width_defaulted).then_some(l.width),
                centerline: &l.centerline,
            })
            .collect(),
        tracks: scenario
            .tracks
            .iter()
            .map(|t| RawTrackOut {
                track_id: &t.track_id,
                agent_type: t.agent_type.as_str(),
                stationary: t.stationary,
                states: t.states.iter().map(StateRow).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&raw).expect("scenario serialization cannot fail")
}

pub fn write_scenario_line<W: Write>(out: &mut W, scenario: &Scenario) -> std::io::Result<()> {
    out.write_all(write_scenario(scenario).as_bytes())?;
    out.write_all(b"\n")
}

/// Streaming reader over an interchange byte stream. Blank and `#` lines are skipped.
pub struct ScenarioReader<R> {
    input: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> ScenarioReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for ScenarioReader<R> {
    type Item = Result<Scenario, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line_no += 1;
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    return Some(Err(RecordError {
                        line: self.line_no,
                        kind: ScenarioError::Schema(format!("read error: {e}")),
                    }))
                }
            }
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some(decode(line).map_err(|kind| RecordError {
                line: self.line_no,
                kind,
            }));
        }
    }
}

pub fn parse_scenario_stream<R: BufRead>(input: R) -> ScenarioReader<R> {
    ScenarioReader::new(input)
}

/// Read a whole corpus into memory. In lenient mode the malformed records are
/// returned alongside the good ones; in strict mode the first one aborts.
pub fn read_corpus<R: BufRead>(
    input: R,
    mode: ParseMode,
) -> Result<(Vec<Scenario>, Vec<RecordError>), RecordError> {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for rec in parse_scenario_stream(input) {
        match rec {
            Ok(s) => good.push(s),
            Err(e) if mode == ParseMode::Strict => return Err(e),
            Err(e) => bad.push(e),
        }
    }
    Ok((good, bad))
}
