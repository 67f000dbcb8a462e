use super::{LaneGeometry, Scenario, ScenarioError};

/// Position of a point relative to a lane centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePoint {
    /// Arc length along the centerline to the foot point; negative before the
    /// first vertex, past the total length beyond the last one.
    pub station: f64,
    /// Signed distance to the centerline, positive to the left.
    pub offset: f64,
    /// Unit tangent of the segment the point was matched to.
    pub tangent: [f64; 2],
}

impl LanePoint {
    /// Left-pointing unit normal.
    pub fn normal(&self) -> [f64; 2] {
        [-self.tangent[1], self.tangent[0]]
    }

    /// Component of a velocity along the left normal (rate of change of `offset`).
    pub fn lateral_rate(&self, vx: f64, vy: f64) -> f64 {
        let n = self.normal();
        vx * n[0] + vy * n[1]
    }
}

impl LaneGeometry {
    /// Match a point to its nearest centerline segment. The first and last
    /// segments are extended as rays so that points beyond the ends of the
    /// polyline still get a perpendicular offset.
    pub fn locate(&self, x: f64, y: f64) -> LanePoint {
        let last = self.centerline.len() - 2;
        let mut best: Option<(f64, LanePoint)> = None;
        let mut station0 = 0.0;
        for (i, w) in self.centerline.windows(2).enumerate() {
            let [ax, ay] = w[0];
            let (dx, dy) = (w[1][0] - ax, w[1][1] - ay);
            let len = dx.hypot(dy);
            let (px, py) = (x - ax, y - ay);
            let mut t = (px * dx + py * dy) / (len * len);
            if i > 0 {
                t = t.max(0.0);
            }
            if i < last {
                t = t.min(1.0);
            }
            let (fx, fy) = (ax + t * dx, ay + t * dy);
            let dist = (x - fx).hypot(y - fy);
            let cross = dx * py - dy * px;
            let offset = if cross < 0.0 { -dist } else { dist };
            let candidate = LanePoint {
                station: station0 + t * len,
                offset,
                tangent: [dx / len, dy / len],
            };
            if best.as_ref().map_or(true, |(d, _)| dist < *d) {
                best = Some((dist, candidate));
            }
            station0 += len;
        }
        best.expect("lane has at least one segment").1
    }
}

/// Longitudinal/lateral coordinates in a reference agent's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameProjection {
    /// Along the reference heading.
    pub s: f64,
    /// Signed lateral, left positive.
    pub l: f64,
}

/// Rigid frame anchored at a reference pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFrame {
    pub origin: [f64; 2],
    pub heading: f64,
    cos: f64,
    sin: f64,
}

impl ReferenceFrame {
    pub fn new(origin: [f64; 2], heading: f64) -> Self {
        let (sin, cos) = heading.sin_cos();
        Self {
            origin,
            heading,
            cos,
            sin,
        }
    }

    /// Frame of a track's valid state at `frame`.
    pub fn of_track(
        scenario: &Scenario,
        track_id: &str,
        frame: usize,
    ) -> Result<Self, ScenarioError> {
        let track = scenario
            .track(track_id)
            .ok_or_else(|| ScenarioError::UnknownTrack(track_id.to_string()))?;
        if frame >= scenario.frame_count {
            return Err(ScenarioError::FrameOutOfRange(frame, scenario.frame_count));
        }
        let st = track.state(frame).ok_or_else(|| ScenarioError::InvalidState {
            track: track_id.to_string(),
            frame,
        })?;
        Ok(Self::new([st.x, st.y], st.heading))
    }

    pub fn project(&self, x: f64, y: f64) -> FrameProjection {
        let (dx, dy) = (x - self.origin[0], y - self.origin[1]);
        FrameProjection {
            s: self.cos * dx + self.sin * dy,
            l: -self.sin * dx + self.cos * dy,
        }
    }

    /// Component of a velocity along the reference heading.
    pub fn longitudinal(&self, vx: f64, vy: f64) -> f64 {
        self.cos * vx + self.sin * vy
    }
}

/// Project every valid state of every track into the frame of
/// `reference_track` at `reference_frame`. Tracks come back in scenario order,
/// invalid frames as `None`.
pub fn project_frame(
    scenario: &Scenario,
    reference_track: &str,
    reference_frame: usize,
) -> Result<Vec<(String, Vec<Option<FrameProjection>>)>, ScenarioError> {
    let frame = ReferenceFrame::of_track(scenario, reference_track, reference_frame)?;
    Ok(scenario
        .tracks
        .iter()
        .map(|t| {
            let series = t
                .states
                .iter()
                .map(|s| s.valid.then(|| frame.project(s.x, s.y)))
                .collect();
            (t.track_id.clone(), series)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajmodel::{AgentState, AgentTrack, AgentType};

    fn lane(points: Vec<[f64; 2]>) -> LaneGeometry {
        LaneGeometry::new("l", points, Some(3.6)).unwrap()
    }

    /// Brute-force signed distance: densely sample every segment (and the
    /// two end rays) and take the nearest sample.
    fn brute_distance(points: &[[f64; 2]], x: f64, y: f64) -> f64 {
        let mut best = f64::INFINITY;
        let n = points.len();
        for i in 0..n - 1 {
            let (a, b) = (points[i], points[i + 1]);
            let lo = if i == 0 { -50.0 } else { 0.0 };
            let hi = if i == n - 2 { 50.0 } else { 1.0 };
            let steps = 200_000;
            for k in 0..=steps {
                let t = lo + (hi - lo) * k as f64 / steps as f64;
                let px = a[0] + t * (b[0] - a[0]);
                let py = a[1] + t * (b[1] - a[1]);
                best = best.min((x - px).hypot(y - py));
            }
        }
        best
    }

    #[test]
    fn straight_lane_offsets() {
        let l = lane(vec![[0.0, 0.0], [100.0, 0.0]]);
        assert_eq!(l.locate(50.0, 0.0).offset, 0.0);
        assert!((l.locate(50.0, 1.5).offset - 1.5).abs() < 1e-12);
        // Beyond both ends the first/last segment is extrapolated.
        assert!((l.locate(-20.0, -1.0).offset + 1.0).abs() < 1e-12);
        assert!((l.locate(130.0, 2.0).offset - 2.0).abs() < 1e-12);
        assert!((l.locate(130.0, 2.0).station - 130.0).abs() < 1e-12);
    }

    #[test]
    fn corner_matches_brute_force_and_is_continuous() {
        let pts = vec![[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]];
        let l = lane(pts.clone());
        // Walk a path around the outside and inside of the corner in small
        // steps, as an agent would between frames.
        let mut prev: Option<f64> = None;
        for k in 0..=60 {
            let t = k as f64 / 60.0;
            let (x, y) = (6.0 + 8.0 * t, -2.0 + 6.0 * t);
            let got = l.locate(x, y).offset;
            let expect = brute_distance(&pts, x, y);
            assert!(
                (got.abs() - expect).abs() < 1e-3,
                "({x},{y}): {got} vs {expect}"
            );
            if let Some(p) = prev {
                // Step length bounds the change of the offset.
                assert!((got - p).abs() <= (8.0f64).hypot(6.0) / 60.0 + 1e-9);
            }
            prev = Some(got);
        }
    }

    #[test]
    fn mirrored_point_flips_sign() {
        let l = lane(vec![[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]]);
        let a = l.locate(12.0, 0.7).offset;
        let b = l.locate(12.0, -0.7).offset;
        assert!((a + b).abs() < 1e-12 && a > 0.0);
    }

    fn track(id: &str, x: f64, y: f64, heading: f64) -> AgentTrack {
        AgentTrack {
            track_id: id.into(),
            agent_type: AgentType::Vehicle,
            stationary: false,
            states: vec![AgentState {
                x,
                y,
                heading,
                vx: heading.cos(),
                vy: heading.sin(),
                length: 4.0,
                width: 2.0,
                valid: true,
            }],
        }
    }

    #[test]
    fn projection_axes_and_isometry() {
        let h = 0.7f64;
        let s = Scenario::new(
            "s",
            10.0,
            "ref",
            vec![
                track("ref", 3.0, 4.0, h),
                track("ahead", 3.0 + 10.0 * h.cos(), 4.0 + 10.0 * h.sin(), h),
                track("other", 3.0 + 7.3 * 0.3f64.cos(), 4.0 + 7.3 * 0.3f64.sin(), 0.0),
            ],
            vec![],
        )
        .unwrap();
        let proj = project_frame(&s, "ref", 0).unwrap();
        let get = |i: usize| proj[i].1[0].unwrap();
        assert_eq!(get(0), FrameProjection { s: 0.0, l: 0.0 });
        assert!((get(1).s - 10.0).abs() < 1e-12 && get(1).l.abs() < 1e-12);
        let d = get(2).s.hypot(get(2).l);
        assert!((d - 7.3).abs() < 1e-9);
        assert!(project_frame(&s, "missing", 0).is_err());
    }
}
