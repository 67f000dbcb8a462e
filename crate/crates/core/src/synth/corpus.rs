use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plant::{plant_cutin, replay_twin, Planted};
use super::{write_labels, Label, Negative, PlantSpec, QuantileCurve, SynthError};
use crate::detector::{Side, TargetKind};
use crate::metrics::KMH_PER_MPS;
use crate::trajmodel::{write_scenario_line, Scenario, FRAME_DT};

const MAX_ATTEMPTS: usize = 1000;

/// Share of positives per target kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantMix {
    pub av: f64,
    pub hdv: f64,
}

impl Default for PlantMix {
    fn default() -> Self {
        Self { av: 0.5, hdv: 0.5 }
    }
}

/// Marginals of the per-kind maneuver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KindDistribution {
    /// Bumper gap at entry, m.
    pub gap_m: QuantileCurve,
    pub target_speed_kmh: QuantileCurve,
    /// Cutter minus target, m/s.
    pub speed_diff_mps: QuantileCurve,
    pub lead_speed_drop_mps: QuantileCurve,
}

fn curve(knots: &[[f64; 2]]) -> QuantileCurve {
    QuantileCurve::new(knots.to_vec()).expect("built-in curves are valid")
}

impl KindDistribution {
    pub fn av() -> Self {
        Self {
            gap_m: curve(&[[0.0, 1.0], [0.091, 5.0], [0.5, 7.58], [0.68, 10.0], [0.95, 16.0], [1.0, 19.0]]),
            target_speed_kmh: curve(&[[0.0, 30.0], [0.5, 44.6], [1.0, 75.0]]),
            speed_diff_mps: curve(&[[0.0, -1.5], [0.086, 0.0], [0.5, 1.92], [1.0, 5.0]]),
            lead_speed_drop_mps: curve(&[[0.0, 0.0], [0.5, 0.67], [1.0, 2.0]]),
        }
    }

    pub fn hdv() -> Self {
        Self {
            gap_m: curve(&[[0.0, 1.0], [0.144, 5.0], [0.5, 9.57], [0.518, 10.0], [0.95, 17.0], [1.0, 19.0]]),
            target_speed_kmh: curve(&[[0.0, 22.0], [0.5, 34.0], [1.0, 70.0]]),
            speed_diff_mps: curve(&[[0.0, -1.5], [0.2, 0.0], [0.5, 1.06], [1.0, 4.0]]),
            lead_speed_drop_mps: curve(&[[0.0, 0.0], [0.5, 0.39], [1.0, 1.5]]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Distributions {
    pub av: KindDistribution,
    pub hdv: KindDistribution,
    /// Entry-to-completion frames.
    pub lc_frames: QuantileCurve,
    /// Inclusive range of onset-to-entry frames.
    pub onset_lead_frames: [usize; 2],
    /// Inclusive range of entry frames.
    pub entry_frame: [usize; 2],
    /// Probability that a positive merges from the left.
    pub left_share: f64,
}

impl Default for Distributions {
    fn default() -> Self {
        Self {
            av: KindDistribution::av(),
            hdv: KindDistribution::hdv(),
            lc_frames: curve(&[[0.0, 5.0], [0.5, 6.0], [0.9, 15.0], [1.0, 40.0]]),
            onset_lead_frames: [10, 25],
            entry_frame: [25, 40],
            left_share: 0.42,
        }
    }
}

impl Distributions {
    pub fn for_kind(&self, kind: TargetKind) -> &KindDistribution {
        match kind {
            TargetKind::Av => &self.av,
            TargetKind::Hdv => &self.hdv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_scenarios: usize,
    /// Share of scenarios built from negative templates, split evenly
    /// across [`Negative::ALL`].
    pub negative_fraction: f64,
    pub plant_mix: PlantMix,
    pub seed: u64,
    /// Put the replay twin in the first slot.
    pub replay_twin: bool,
    pub noise_std: f64,
    pub lane_width: f64,
    pub distributions: Distributions,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_scenarios: 200,
            negative_fraction: 0.3,
            plant_mix: PlantMix::default(),
            seed: 20240601,
            replay_twin: false,
            noise_std: 0.0,
            lane_width: 3.6,
            distributions: Distributions::default(),
        }
    }
}

impl CorpusConfig {
    /// Parse a TOML corpus file; absent keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let c: Self = toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        let PlantMix { av, hdv } = self.plant_mix;
        if !(av >= 0.0 && hdv >= 0.0) || ((av + hdv) - 1.0).abs() > 1e-9 {
            return bad(format!("plant_mix must be nonnegative and sum to 1, got {av} + {hdv}"));
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return bad(format!("negative_fraction {} outside [0, 1]", self.negative_fraction));
        }
        let d = &self.distributions;
        if !(0.0..=1.0).contains(&d.left_share) {
            return bad(format!("left_share {} outside [0, 1]", d.left_share));
        }
        for (name, [lo, hi]) in [("onset_lead_frames", d.onset_lead_frames), ("entry_frame", d.entry_frame)] {
            if lo > hi {
                return bad(format!("{name} range {lo}..={hi} is empty"));
            }
        }
        if !(self.noise_std >= 0.0) || !(self.lane_width > 1.0) {
            return bad("noise_std must be >= 0 and lane_width > 1 m".into());
        }
        if self.replay_twin && self.n_scenarios == 0 {
            return bad("replay_twin needs at least one scenario".into());
        }
        Ok(())
    }
}

/// Named configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// 200 scenarios, 30 % negatives, even target mix.
    Default,
    /// 700 AV-targeted and 3000 HDV-targeted positives, no negatives.
    PaperMimic,
    /// The single replay-twin scenario.
    ReplayTwin,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Default, Preset::PaperMimic, Preset::ReplayTwin];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Default => "default",
            Self::PaperMimic => "paper-mimic",
            Self::ReplayTwin => "replay-twin",
        }
    }

    pub fn config(self, seed: u64) -> CorpusConfig {
        let base = CorpusConfig {
            seed,
            ..CorpusConfig::default()
        };
        match self {
            Self::Default => base,
            Self::PaperMimic => CorpusConfig {
                n_scenarios: 3700,
                negative_fraction: 0.0,
                plant_mix: PlantMix {
                    av: 700.0 / 3700.0,
                    hdv: 3000.0 / 3700.0,
                },
                ..base
            },
            Self::ReplayTwin => CorpusConfig {
                n_scenarios: 1,
                negative_fraction: 0.0,
                replay_twin: true,
                ..base
            },
        }
    }
}

impl FromStr for Preset {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SynthError::Config(format!("unknown preset {s:?}")))
    }
}

/// Scenarios and labels in matching order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub scenarios: Vec<Scenario>,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Twin,
    Positive(TargetKind),
    Negative(Negative),
}

/// Largest-remainder apportionment of `n` over `weights`; ties go to the
/// earlier entry.
fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle().take(short) {
        counts[i] += 1;
    }
    counts
}

/// Per-scenario seed, a SplitMix64 finalizer over `(seed, index)`.
fn scenario_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn slots(config: &CorpusConfig) -> Vec<Slot> {
    let drawn = config.n_scenarios - usize::from(config.replay_twin);
    let nf = config.negative_fraction;
    let counts = apportion(
        drawn,
        &[nf, (1.0 - nf) * config.plant_mix.av, (1.0 - nf) * config.plant_mix.hdv],
    );
    let per_negative = apportion(counts[0], &[1.0; Negative::ALL.len()]);
    let mut slots: Vec<Slot> = Negative::ALL
        .into_iter()
        .zip(per_negative)
        .flat_map(|(n, k)| std::iter::repeat_n(Slot::Negative(n), k))
        .chain(std::iter::repeat_n(Slot::Positive(TargetKind::Av), counts[1]))
        .chain(std::iter::repeat_n(Slot::Positive(TargetKind::Hdv), counts[2]))
        .collect();
    slots.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    if config.replay_twin {
        slots.insert(0, Slot::Twin);
    }
    slots
}

/// Draw a passable positive. The gap is drawn once so that its planted
/// marginal is exactly the configured curve; the other parameters are
/// redrawn until the plant clears every criterion.
fn draw_positive(
    id: &str,
    index: usize,
    kind: TargetKind,
    config: &CorpusConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Planted, SynthError> {
    let d = &config.distributions;
    let k = d.for_kind(kind);
    let gap = k.gap_m.sample(rng.random());
    for _ in 0..MAX_ATTEMPTS {
        let entry = rng.random_range(d.entry_frame[0]..=d.entry_frame[1]);
        let lead = rng.random_range(d.onset_lead_frames[0]..=d.onset_lead_frames[1]);
        let lc = d.lc_frames.sample(rng.random()).round();
        let target_speed = k.target_speed_kmh.sample(rng.random()) / KMH_PER_MPS;
        let diff = k.speed_diff_mps.sample(rng.random());
        let drop = k.lead_speed_drop_mps.sample(rng.random());
        let side = if rng.random::<f64>() < d.left_share {
            Side::Left
        } else {
            Side::Right
        };
        let spec = PlantSpec {
            target_kind: kind,
            gap_entry: gap,
            cutter_speed: target_speed + diff,
            target_speed,
            lc_duration: lc * FRAME_DT,
            side,
            entry_time: entry as f64 * FRAME_DT,
            onset_lead: lead as f64 * FRAME_DT,
            lead_speed_drop: drop,
            lane_width: config.lane_width,
            noise_std: config.noise_std,
            negative: None,
        };
        match plant_cutin(id, &spec, rng.random()) {
            Ok(p) => return Ok(p),
            Err(SynthError::NotPassable(_) | SynthError::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SynthError::Exhausted(index, MAX_ATTEMPTS))
}

fn build(index: usize, slot: Slot, config: &CorpusConfig) -> Result<Planted, SynthError> {
    let id = format!("syn-{index:05}");
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(config.seed, index));
    match slot {
        Slot::Twin => Ok(replay_twin()),
        Slot::Positive(kind) => draw_positive(&id, index, kind, config, &mut rng),
        Slot::Negative(n) => {
            let spec = PlantSpec {
                noise_std: config.noise_std,
                ..n.template()
            };
            plant_cutin(&id, &spec, rng.random())
        }
    }
}

/// Generate the corpus described by `config`. Output depends only on the
/// config, never on the worker count.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Corpus, SynthError> {
    config.validate()?;
    let planted: Vec<Planted> = slots(config)
        .into_par_iter()
        .enumerate()
        .map(|(i, slot)| build(i, slot, config))
        .collect::<Result<_, _>>()?;
    let (scenarios, labels) = planted.into_iter().map(|p| (p.scenario, p.label)).unzip();
    Ok(Corpus { scenarios, labels })
}

/// Write scenarios as interchange lines and labels as JSON lines.
pub fn write_corpus<S: Write, L: Write>(
    corpus: &Corpus,
    mut scenarios: S,
    labels: L,
) -> Result<(), SynthError> {
    for s in &corpus.scenarios {
        write_scenario_line(&mut scenarios, s)?;
    }
    write_labels(labels, &corpus.labels)
}
