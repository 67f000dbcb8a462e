//! Lateral motion profiles built from raised-cosine velocity ramps.

use std::f64::consts::PI;

/// Lateral speed while drifting inside a lane, m/s.
pub const DRIFT_SPEED: f64 = 0.15;
/// Duration of the ramp from rest to drift speed, s.
pub const DRIFT_RAMP: f64 = 1.0;
/// Lateral distance covered by that ramp.
const DRIFT_RAMP_DIST: f64 = DRIFT_SPEED * DRIFT_RAMP / 2.0;
/// Offset from a lane center that counts as settled.
const SETTLE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    t0: f64,
    dur: f64,
    p0: f64,
    v0: f64,
    v1: f64,
}

impl Segment {
    fn eval(&self, t: f64) -> (f64, f64) {
        let s = (t - self.t0).clamp(0.0, self.dur);
        let dv = self.v1 - self.v0;
        if dv == 0.0 {
            return (self.p0 + self.v0 * s, self.v0);
        }
        if self.dur == 0.0 {
            return (self.p0, self.v1);
        }
        let w = PI / self.dur;
        let v = self.v0 + dv * (1.0 - (w * s).cos()) / 2.0;
        let p = self.p0 + self.v0 * s + dv / 2.0 * (s - (w * s).sin() / w);
        (p, v)
    }

    fn end(&self) -> (f64, f64) {
        self.eval(self.t0 + self.dur)
    }
}

/// Lateral progress `p(t)` toward the destination lane, with `p' = v(t)`.
/// Before the first segment the vehicle rests at the first segment's start;
/// after the last it continues at the final speed.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralProfile {
    segments: Vec<Segment>,
}

impl LateralProfile {
    fn from_pieces(t_start: f64, p_start: f64, pieces: &[(f64, f64, f64)]) -> Self {
        let mut segments = Vec::with_capacity(pieces.len());
        let (mut t, mut p) = (t_start, p_start);
        for &(dur, v0, v1) in pieces {
            let seg = Segment {
                t0: t,
                dur,
                p0: p,
                v0,
                v1,
            };
            p = seg.end().0;
            t += dur;
            segments.push(seg);
        }
        Self { segments }
    }

    /// Constant lateral speed from `p0` at time 0.
    pub fn creep(p0: f64, speed: f64) -> Self {
        Self {
            segments: vec![Segment {
                t0: 0.0,
                dur: f64::INFINITY,
                p0,
                v0: speed,
                v1: speed,
            }],
        }
    }

    /// Out to `peak` and back to 0 over `dur` seconds from `t0`, four
    /// quarter-length speed ramps.
    pub fn aborted(t0: f64, dur: f64, peak: f64) -> Self {
        let q = dur / 4.0;
        let v = peak / q;
        Self::from_pieces(t0, 0.0, &[(q, 0.0, v), (q, v, 0.0), (q, 0.0, -v), (q, -v, 0.0)])
    }

    /// Full lane change across a lane of width `w`: settled in the source
    /// lane (p <= 0.5) until `t_onset`, crosses `w / 2` at `t_cross`, and is
    /// settled in the destination lane (p >= w - 0.5, slow) from `t_settle`.
    pub fn lane_change(w: f64, t_onset: f64, t_cross: f64, t_settle: f64) -> Option<Self> {
        let band = w / 2.0 - SETTLE;
        let (d_pre, d_post) = (t_cross - t_onset, t_settle - t_cross);
        let slowest = band / DRIFT_SPEED;
        if band <= 0.0 || d_pre <= 0.0 || d_post <= 0.0 || d_pre > slowest || d_post > slowest {
            return None;
        }
        let v_c = 2.0 * band / (0.8 * d_pre.min(d_post)) - DRIFT_SPEED;
        let fastest = 2.0 * band / (v_c + DRIFT_SPEED);
        let ramp = |d: f64| {
            let theta = (slowest - d) / (slowest - fastest);
            let d1 = theta * band;
            (2.0 * d1 / (v_c + DRIFT_SPEED), d1)
        };
        let (t1_pre, d1_pre) = ramp(d_pre);
        let (t1_post, d1_post) = ramp(d_post);
        let cruise_pre = (w / 2.0 - d1_pre - DRIFT_RAMP_DIST) / DRIFT_SPEED;
        let cruise_post = (w / 2.0 - d1_post - DRIFT_RAMP_DIST) / DRIFT_SPEED;
        let t_start = t_cross - t1_pre - cruise_pre - DRIFT_RAMP;
        Some(Self::from_pieces(
            t_start,
            0.0,
            &[
                (DRIFT_RAMP, 0.0, DRIFT_SPEED),
                (cruise_pre, DRIFT_SPEED, DRIFT_SPEED),
                (t1_pre, DRIFT_SPEED, v_c),
                (t1_post, v_c, DRIFT_SPEED),
                (cruise_post, DRIFT_SPEED, DRIFT_SPEED),
                (DRIFT_RAMP, DRIFT_SPEED, 0.0),
            ],
        ))
    }

    /// Progress and lateral speed at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let first = &self.segments[0];
        if t < first.t0 {
            return (first.p0, 0.0);
        }
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|s| t >= s.t0)
            .expect("t is past the first segment");
        let (p, v) = seg.eval(t);
        if t > seg.t0 + seg.dur {
            (p + v * (t - seg.t0 - seg.dur), v)
        } else {
            (p, v)
        }
    }

    pub fn peak_speed(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.v0.abs().max(s.v1.abs()))
            .fold(0.0, f64::max)
    }
}
