use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::profile::LateralProfile;
use super::{ExpectedEvent, Label, Negative, PlantSpec, SynthError};
use crate::detector::{Side, TargetKind};
use crate::metrics::{SafetyMetrics, SeverityBounds, LEAD_DROP_FRAMES};
use crate::trajmodel::{
    scenario_eligible, AgentState, AgentTrack, AgentType, EligibilityRule, LaneGeometry, Scenario,
    FRAME_DT, FRAME_RATE_HZ,
};

pub const CUTTER_ID: &str = "cutter";
pub const AV_ID: &str = "av";
/// Target track of HDV-targeted plants.
pub const LEAD_ID: &str = "lead";
pub const REPLAY_TWIN_ID: &str = "replay-twin";

pub(crate) const TARGET_LANE: &str = "L1";
const SOURCE_LANE: &str = "L2";
const AV_LANE: &str = "L3";

pub(crate) const CAR_LENGTH: f64 = 4.8;
const CAR_WIDTH: f64 = 1.9;
pub(crate) const AV_LENGTH: f64 = 5.2;
const AV_WIDTH: f64 = 2.0;

const FRAMES: usize = 91;
const ANCHOR_X: f64 = 200.0;
const LANE_X: [f64; 2] = [-1000.0, 2000.0];
const SIMPSON_STEPS: usize = 64;

/// In HDV plants the AV drives in the far lane, this far behind the target.
const HDV_AV_BEHIND: f64 = 10.0;
const HDV_AV_MIN_SPEED: f64 = 8.0;
/// Time over which the target sheds `lead_speed_drop` after entry.
const DROP_DURATION: f64 = 2.0;
/// Latest admissible completion time.
const LATEST_SETTLE: f64 = 8.1;

// Margins that keep positives clear of every detector threshold.
const MIN_CUTTER_SPEED: f64 = 2.5;
const MAX_FRONT_GAP: f64 = 24.5;
const MIN_LEAD_AT_COMPLETION: f64 = 0.5;
const MIN_PEAK_LATERAL: f64 = 0.31;
const LC_FRAMES: std::ops::RangeInclusive<usize> = 5..=60;

/// A generated scenario and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub scenario: Scenario,
    pub label: Label,
}

#[derive(Debug, Clone, Copy)]
struct Frames {
    onset: usize,
    entry: usize,
    completion: usize,
}

struct Plan<'a> {
    id: &'a str,
    kind: TargetKind,
    side: Side,
    width: f64,
    source_lane: bool,
    stationary: bool,
    lateral: LateralProfile,
    target_speed: &'a dyn Fn(f64) -> f64,
    cutter_speed: &'a dyn Fn(f64) -> f64,
    /// Cutter centroid minus target centroid along +x at the entry frame.
    separation: f64,
    frames: Frames,
}

struct Built {
    scenario: Scenario,
    target_x: Vec<f64>,
    cutter_x: Vec<f64>,
    target_length: f64,
}

fn time(frame: usize) -> f64 {
    frame as f64 * FRAME_DT
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = (b - a) / SIMPSON_STEPS as f64;
    let inner: f64 = (1..SIMPSON_STEPS)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Per-frame positions of a speed profile, pinned to `anchor` at `entry`.
fn integrate(v: &dyn Fn(f64) -> f64, anchor: f64, entry: usize) -> Vec<f64> {
    let mut x = vec![0.0; FRAMES];
    x[entry] = anchor;
    for f in entry + 1..FRAMES {
        x[f] = x[f - 1] + simpson(v, time(f - 1), time(f));
    }
    for f in (0..entry).rev() {
        x[f] = x[f + 1] - simpson(v, time(f), time(f + 1));
    }
    x
}

fn vehicle(id: &str, states: Vec<AgentState>, stationary: bool) -> AgentTrack {
    AgentTrack {
        track_id: id.to_string(),
        agent_type: AgentType::Vehicle,
        stationary,
        states,
    }
}

fn state(x: f64, y: f64, vx: f64, vy: f64, length: f64, width: f64) -> AgentState {
    AgentState {
        x,
        y,
        heading: vy.atan2(vx),
        vx,
        vy,
        length,
        width,
        valid: true,
    }
}

fn lane(id: &str, y: f64, width: f64) -> LaneGeometry {
    LaneGeometry::new(id, vec![[LANE_X[0], y], [LANE_X[1], y]], Some(width))
        .expect("straight lanes are valid")
}

fn side_sign(side: Side) -> f64 {
    match side {
        Side::Left => 1.0,
        Side::Right => -1.0,
    }
}

fn assemble(plan: &Plan) -> Built {
    let s = side_sign(plan.side);
    let w = plan.width;
    let entry = plan.frames.entry;
    let target_x = integrate(plan.target_speed, ANCHOR_X, entry);
    let cutter_x = integrate(plan.cutter_speed, ANCHOR_X + plan.separation, entry);

    let cutter_states = (0..FRAMES)
        .map(|f| {
            let (p, pv) = plan.lateral.at(time(f));
            let vx = (plan.cutter_speed)(time(f));
            state(cutter_x[f], s * (w - p), vx, -s * pv, CAR_LENGTH, CAR_WIDTH)
        })
        .collect();
    let (target_id, target_length, target_width) = match plan.kind {
        TargetKind::Av => (AV_ID, AV_LENGTH, AV_WIDTH),
        TargetKind::Hdv => (LEAD_ID, CAR_LENGTH, CAR_WIDTH),
    };
    let target_states = (0..FRAMES)
        .map(|f| {
            let vx = (plan.target_speed)(time(f));
            state(target_x[f], 0.0, vx, 0.0, target_length, target_width)
        })
        .collect();

    let mut tracks = vec![
        vehicle(CUTTER_ID, cutter_states, plan.stationary),
        vehicle(target_id, target_states, false),
    ];
    let mut lanes = vec![lane(TARGET_LANE, 0.0, w)];
    if plan.source_lane {
        lanes.push(lane(SOURCE_LANE, s * w, w));
    }
    if plan.kind == TargetKind::Hdv {
        let v = (plan.target_speed)(time(entry)).max(HDV_AV_MIN_SPEED);
        let x0 = ANCHOR_X - HDV_AV_BEHIND;
        let states = (0..FRAMES)
            .map(|f| {
                let x = x0 + v * (time(f) - time(entry));
                state(x, -s * w, v, 0.0, AV_LENGTH, AV_WIDTH)
            })
            .collect();
        tracks.push(vehicle(AV_ID, states, false));
        lanes.push(lane(AV_LANE, -s * w, w));
    }
    let scenario = Scenario::new(plan.id, FRAME_RATE_HZ, AV_ID, tracks, lanes)
        .expect("generated scenarios satisfy the model invariants");
    Built {
        scenario,
        target_x,
        cutter_x,
        target_length,
    }
}

impl Built {
    fn bumper_gap(&self, f: usize) -> f64 {
        (self.cutter_x[f] - CAR_LENGTH / 2.0) - (self.target_x[f] + self.target_length / 2.0)
    }

    fn cutter(&self) -> &AgentTrack {
        self.scenario.track(CUTTER_ID).expect("cutter track exists")
    }
}

/// Exact metrics of the planted maneuver, from the noise-free kinematics.
fn planted_metrics(plan: &Plan, built: &Built) -> SafetyMetrics {
    let Frames {
        onset,
        entry,
        completion,
    } = plan.frames;
    let gap_entry = built.bumper_gap(entry).max(0.0);
    let cutin_speed = (plan.cutter_speed)(time(entry));
    let target_speed = (plan.target_speed)(time(entry));
    let speed_diff = cutin_speed - target_speed;
    let closing = -speed_diff;
    let after = (entry + LEAD_DROP_FRAMES).min(FRAMES - 1);
    SafetyMetrics {
        gap_entry,
        ttc: (closing > 0.0).then(|| gap_entry / closing),
        min_distance: (onset..=completion)
            .map(|f| built.bumper_gap(f).max(0.0))
            .fold(f64::INFINITY, f64::min),
        cutin_speed,
        target_speed,
        speed_diff,
        lc_duration: (completion - entry) as f64 / FRAME_RATE_HZ,
        lead_speed_drop: target_speed - (plan.target_speed)(time(after)),
        severity: SeverityBounds::default().classify(gap_entry),
    }
}

/// Analytic screen that a positive plant clears every criterion with margin.
fn check_passable(plan: &Plan, built: &Built) -> Result<(), SynthError> {
    let Frames {
        onset,
        entry,
        completion,
    } = plan.frames;
    let fail = |m: String| Err(SynthError::NotPassable(m));
    let cutter = built.cutter();
    let maneuver = || (onset..=completion).map(|f| &cutter.states[f]);
    let slowest = maneuver().map(AgentState::speed).fold(f64::INFINITY, f64::min);
    if slowest < MIN_CUTTER_SPEED {
        return fail(format!("cutter speed {slowest:.3} m/s"));
    }
    let front_gap = built.bumper_gap(entry) + CAR_LENGTH;
    if front_gap > MAX_FRONT_GAP {
        return fail(format!("front-to-front distance {front_gap:.3} m"));
    }
    if !LC_FRAMES.contains(&(completion - entry)) {
        return fail(format!("{} lane-change frames", completion - entry));
    }
    let lead = built.cutter_x[completion] - built.target_x[completion];
    if lead <= MIN_LEAD_AT_COMPLETION {
        return fail(format!("cutter lead at completion {lead:.3} m"));
    }
    let peak = maneuver().map(|s| s.vy.abs()).fold(0.0, f64::max);
    if peak < MIN_PEAK_LATERAL {
        return fail(format!("peak lateral speed {peak:.3} m/s"));
    }
    Ok(())
}

fn jitter(scenario: &mut Scenario, std: f64, seed: u64) -> Result<(), SynthError> {
    if std == 0.0 {
        return Ok(());
    }
    let noise = Normal::new(0.0, std)
        .map_err(|e| SynthError::Infeasible(format!("noise_std {std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in scenario.tracks.iter_mut().flat_map(|t| t.states.iter_mut()) {
        s.x += noise.sample(&mut rng);
        s.y += noise.sample(&mut rng);
    }
    Ok(())
}

fn finish(plan: &Plan, negative: Option<Negative>) -> Result<(Built, Label), SynthError> {
    let built = assemble(plan);
    if !scenario_eligible(&built.scenario, &EligibilityRule::default()) {
        return Err(SynthError::Infeasible("AV never holds the eligibility speed".into()));
    }
    let expected_event = match negative {
        Some(_) => None,
        None => {
            check_passable(plan, &built)?;
            Some(ExpectedEvent {
                cutter_id: CUTTER_ID.to_string(),
                target_id: match plan.kind {
                    TargetKind::Av => AV_ID,
                    TargetKind::Hdv => LEAD_ID,
                }
                .to_string(),
                target_kind: plan.kind,
                side: plan.side,
                onset_frame: plan.frames.onset,
                entry_frame: plan.frames.entry,
                completion_frame: plan.frames.completion,
                planted: planted_metrics(plan, &built),
            })
        }
    };
    let label = Label {
        scenario_id: plan.id.to_string(),
        expected_event,
        violated_criterion: negative.and_then(Negative::violated),
    };
    Ok((built, label))
}

fn frames_of(spec: &PlantSpec) -> Result<Frames, SynthError> {
    let bad = |m: String| Err(SynthError::Infeasible(m));
    let numbers = [
        spec.gap_entry,
        spec.cutter_speed,
        spec.target_speed,
        spec.lc_duration,
        spec.entry_time,
        spec.onset_lead,
        spec.lead_speed_drop,
        spec.lane_width,
        spec.noise_std,
    ];
    if numbers.iter().any(|v| !v.is_finite()) {
        return bad("non-finite parameter".into());
    }
    if spec.entry_time < 0.0 || spec.lc_duration <= 0.0 || spec.onset_lead <= 0.0 {
        return bad("times must be positive".into());
    }
    if spec.noise_std < 0.0 {
        return bad("noise_std must be nonnegative".into());
    }
    if spec.entry_time + spec.lc_duration > LATEST_SETTLE + 1e-9 {
        return bad(format!(
            "entry {} s + duration {} s ends after {LATEST_SETTLE} s",
            spec.entry_time, spec.lc_duration
        ));
    }
    let to_frames = |t: f64| (t * FRAME_RATE_HZ).round() as usize;
    let entry = to_frames(spec.entry_time);
    let lead = to_frames(spec.onset_lead);
    if lead < 2 || lead > entry {
        return bad(format!("onset {} s before entry at {} s", spec.onset_lead, spec.entry_time));
    }
    if entry + LEAD_DROP_FRAMES >= FRAMES {
        return bad(format!("entry at {} s leaves no room for the lead drop", spec.entry_time));
    }
    Ok(Frames {
        onset: entry - lead,
        entry,
        completion: entry + to_frames(spec.lc_duration),
    })
}

/// Build one scenario from `spec`. Positive specs must clear every detector
/// criterion with margin ([`SynthError::NotPassable`] otherwise); negative
/// specs come back with a label naming the criterion they violate. `seed`
/// only drives the positional jitter.
pub fn plant_cutin(id: &str, spec: &PlantSpec, seed: u64) -> Result<Planted, SynthError> {
    let frames = frames_of(spec)?;
    let t_entry = time(frames.entry);
    let lateral = match spec.negative {
        Some(Negative::Creep) => LateralProfile::creep(1.0125, 0.25),
        Some(Negative::Aborted) => LateralProfile::aborted(2.03, 4.0, 2.6),
        Some(Negative::LaneKeep) => LateralProfile::creep(0.0, 0.0),
        _ => LateralProfile::lane_change(
            spec.lane_width,
            time(frames.onset) + FRAME_DT / 2.0,
            t_entry - FRAME_DT / 2.0,
            time(frames.completion) - FRAME_DT / 2.0,
        )
        .ok_or_else(|| SynthError::Infeasible("no lateral profile fits the frames".into()))?,
    };
    let (v_t, drop) = (spec.target_speed, spec.lead_speed_drop);
    let target_speed = move |t: f64| {
        let u = ((t - t_entry) / DROP_DURATION).clamp(0.0, 1.0);
        v_t - drop * (1.0 - (PI * u).cos()) / 2.0
    };
    let v_c = spec.cutter_speed;
    let cutter_speed = move |_: f64| v_c;
    let target_length = match spec.target_kind {
        TargetKind::Av => AV_LENGTH,
        TargetKind::Hdv => CAR_LENGTH,
    };
    let plan = Plan {
        id,
        kind: spec.target_kind,
        side: spec.side,
        width: spec.lane_width,
        source_lane: spec.negative != Some(Negative::ShoulderMerge),
        stationary: spec.negative == Some(Negative::Stationary),
        lateral,
        target_speed: &target_speed,
        cutter_speed: &cutter_speed,
        separation: spec.gap_entry + (CAR_LENGTH + target_length) / 2.0,
        frames,
    };
    let (mut built, label) = finish(&plan, spec.negative)?;
    jitter(&mut built.scenario, spec.noise_std, seed)?;
    Ok(Planted {
        scenario: built.scenario,
        label,
    })
}

/// Closing speed (target minus cutter) of the replay twin at time `t`.
fn twin_closing(t: f64) -> f64 {
    match t {
        t if t <= 0.7 => -0.3,
        t if t <= 2.5 => {
            let u = (t - 0.7) / 1.8;
            -0.3 + 3.3 * (1.0 - (1.0 - u).powf(4.9398))
        }
        t if t <= 3.2 => 3.0 + 1.4 * ((t - 2.5) / 0.7).powf(0.96),
        t if t <= 6.2 => {
            let u = (t - 3.2) / 3.0;
            4.4 * (1.0 - u).powi(8) + 0.05 * u - 1.0208 * 4.0 * u * (1.0 - u)
        }
        _ => 0.05,
    }
}

fn twin_target_speed(t: f64) -> f64 {
    if t <= 3.2 {
        15.0
    } else {
        10.6 + twin_closing(t)
    }
}

fn twin_cutter_speed(t: f64) -> f64 {
    if t <= 3.2 {
        15.0 - twin_closing(t)
    } else {
        10.6
    }
}

/// The representative AV-targeted case: onset at frame 7 with a 12.0 m gap
/// while the cutter is still faster, entry at frame 25 with 7.6 m closing at
/// 3.0 m/s, merged at frame 32 with 5.0 m closing at 4.4 m/s, and 5.5 m with
/// speeds matched three seconds later.
pub fn replay_twin() -> Planted {
    let frames = Frames {
        onset: 7,
        entry: 25,
        completion: 32,
    };
    let plan = Plan {
        id: REPLAY_TWIN_ID,
        kind: TargetKind::Av,
        side: Side::Left,
        width: 3.6,
        source_lane: true,
        stationary: false,
        lateral: LateralProfile::lane_change(3.6, 0.75, 2.45, 3.15)
            .expect("the twin's frames admit a profile"),
        target_speed: &twin_target_speed,
        cutter_speed: &twin_cutter_speed,
        separation: 7.6 + (CAR_LENGTH + AV_LENGTH) / 2.0,
        frames,
    };
    let (built, label) = finish(&plan, None).expect("the twin is a passable plant");
    Planted {
        scenario: built.scenario,
        label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{detect_cutins, diagnose_cutins, DetectorConfig};
    use crate::metrics::compute_all;
    use crate::trajmodel::write_scenario;

    fn positive(kind: TargetKind, side: Side) -> PlantSpec {
        PlantSpec {
            target_kind: kind,
            gap_entry: 7.6,
            cutter_speed: 14.0,
            target_speed: 12.5,
            lc_duration: 1.2,
            side,
            entry_time: 3.3,
            onset_lead: 1.4,
            lead_speed_drop: 0.8,
            lane_width: 3.6,
            noise_std: 0.0,
            negative: None,
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let f = |t: f64| 3.0 * t * t * t - t + 2.0;
        let exact = |t: f64| 0.75 * t.powi(4) - 0.5 * t * t + 2.0 * t;
        assert!((simpson(&f, 0.3, 1.7) - (exact(1.7) - exact(0.3))).abs() < 1e-12);
    }

    #[test]
    fn planted_positive_is_detected_with_its_frames() {
        for kind in [TargetKind::Av, TargetKind::Hdv] {
            for side in [Side::Left, Side::Right] {
                let p = plant_cutin("s", &positive(kind, side), 1).unwrap();
                let want = p.label.expected_event.clone().unwrap();
                assert_eq!((want.onset_frame, want.entry_frame, want.completion_frame), (19, 33, 45));
                let events = detect_cutins(&p.scenario, &DetectorConfig::default());
                assert_eq!(events.len(), 1, "{kind} {side}");
                let (e, _) = &events[0];
                assert_eq!(e, &want.to_event("s"));
                let m = compute_all(e, &p.scenario).unwrap();
                let planted = want.planted;
                assert!((m.gap_entry - 7.6).abs() < 1e-9);
                assert!((planted.gap_entry - 7.6).abs() < 1e-9);
                assert!((m.cutin_speed - 14.0).abs() < 1e-12);
                assert!((m.speed_diff - 1.5).abs() < 1e-12);
                assert_eq!(m.ttc, None);
                assert!((m.lead_speed_drop - 0.8).abs() < 1e-12);
                assert!((m.lc_duration - 1.2).abs() < 1e-12);
                assert!((m.min_distance - planted.min_distance).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn each_negative_fails_only_its_criterion() {
        let cfg = DetectorConfig::default();
        for neg in Negative::ALL {
            let p = plant_cutin("n", &neg.template(), 0).unwrap();
            assert!(p.label.expected_event.is_none());
            assert!(detect_cutins(&p.scenario, &cfg).is_empty(), "{}", neg.as_str());
            let rows: Vec<_> = diagnose_cutins(&p.scenario, &cfg)
                .into_iter()
                .filter(|r| r.target_id == AV_ID)
                .collect();
            match neg.violated() {
                Some(c) => {
                    assert_eq!(rows.len(), 1, "{}", neg.as_str());
                    assert_eq!(rows[0].verdict.failed(), vec![c], "{}", neg.as_str());
                }
                None => assert!(rows.is_empty()),
            }
        }
    }

    #[test]
    fn replay_twin_key_instants() {
        let p = replay_twin();
        let e = p.label.expected_event.clone().unwrap();
        let m = e.planted;
        assert!((m.gap_entry - 7.6).abs() < 1e-9);
        assert!((m.ttc.unwrap() - 7.6 / 3.0).abs() < 1e-9);
        assert_eq!((e.onset_frame, e.entry_frame, e.completion_frame), (7, 25, 32));
        let events = detect_cutins(&p.scenario, &DetectorConfig::default());
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].0, e.to_event(REPLAY_TWIN_ID));
        let gap = |f: usize| {
            let c = p.scenario.track(CUTTER_ID).unwrap().states[f];
            let t = p.scenario.track(AV_ID).unwrap().states[f];
            (c.x - c.length / 2.0) - (t.x + t.length / 2.0)
        };
        for (f, want) in [(7, 12.0), (25, 7.6), (32, 5.0), (62, 5.5)] {
            assert!((gap(f) - want).abs() < 1e-3, "frame {f}: {}", gap(f));
        }
        assert!((twin_closing(3.2) - 4.4).abs() < 1e-12);
        assert!(twin_closing(0.7) < 0.0);
    }

    #[test]
    fn deterministic_and_seed_only_moves_noise() {
        let spec = positive(TargetKind::Av, Side::Left);
        let a = write_scenario(&plant_cutin("s", &spec, 1).unwrap().scenario);
        assert_eq!(a, write_scenario(&plant_cutin("s", &spec, 2).unwrap().scenario));
        let noisy = PlantSpec {
            noise_std: 0.05,
            ..spec
        };
        let b = write_scenario(&plant_cutin("s", &noisy, 1).unwrap().scenario);
        assert_eq!(b, write_scenario(&plant_cutin("s", &noisy, 1).unwrap().scenario));
        assert_ne!(b, write_scenario(&plant_cutin("s", &noisy, 2).unwrap().scenario));
    }

    #[test]
    fn rejects_infeasible_and_impassable_specs() {
        let spec = positive(TargetKind::Av, Side::Left);
        let late = PlantSpec {
            entry_time: 5.0,
            lc_duration: 3.5,
            ..spec
        };
        assert!(matches!(plant_cutin("s", &late, 0), Err(SynthError::Infeasible(_))));
        let far = PlantSpec {
            gap_entry: 21.0,
            ..spec
        };
        assert!(matches!(plant_cutin("s", &far, 0), Err(SynthError::NotPassable(_))));
        let slow = PlantSpec {
            lc_duration: 6.5,
            entry_time: 1.5,
            ..spec
        };
        assert!(matches!(plant_cutin("s", &slow, 0), Err(SynthError::NotPassable(_))));
        let early = PlantSpec {
            onset_lead: 4.0,
            ..spec
        };
        assert!(matches!(plant_cutin("s", &early, 0), Err(SynthError::Infeasible(_))));
    }
}
