//! Builders for hand-made scenarios in unit tests.

use crate::trajmodel::{AgentState, AgentTrack, AgentType, LaneGeometry};

pub const FRAMES: usize = 91;

#[derive(Debug, Clone, Copy)]
pub struct Kin {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Kin {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }
}

/// A 4.8 m x 1.9 m vehicle heading along +x.
pub fn track(id: &str, f: impl Fn(usize) -> Option<Kin>) -> AgentTrack {
    AgentTrack {
        track_id: id.into(),
        agent_type: AgentType::Vehicle,
        stationary: false,
        states: (0..FRAMES)
            .map(|i| match f(i) {
                Some(k) => AgentState {
                    x: k.x,
                    y: k.y,
                    heading: 0.0,
                    vx: k.vx,
                    vy: k.vy,
                    length: 4.8,
                    width: 1.9,
                    valid: true,
                },
                None => AgentState::INVALID,
            })
            .collect(),
    }
}

/// `n` straight 3.6 m lanes along +x, `L1` centered on y = 0, `L2` on 3.6, ...
pub fn lanes(n: usize) -> Vec<LaneGeometry> {
    (0..n)
        .map(|i| {
            let y = 3.6 * i as f64;
            LaneGeometry::new(format!("L{}", i + 1), vec![[-500.0, y], [1500.0, y]], Some(3.6))
                .unwrap()
        })
        .collect()
}
