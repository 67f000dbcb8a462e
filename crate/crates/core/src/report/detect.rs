use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{open, OutDir, ReportError, RunManifest, Settings};
use crate::detector::{detect_cutins, Side, TargetKind};
use crate::metrics::{compute_all_with, write_events_table, EventRow};
use crate::trajmodel::{parse_scenario_stream, scenario_eligible, Scenario};

pub const EVENTS_FILE: &str = "events.csv";
/// Scenarios held in memory at once.
const CHUNK: usize = 256;
/// Malformed-record line numbers listed in the manifest before truncating.
const LISTED_ERRORS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSummary {
    pub scenarios: usize,
    pub eligible: usize,
    pub skipped_records: usize,
    pub events: usize,
    pub by_kind_side: BTreeMap<(TargetKind, Side), usize>,
    pub events_path: PathBuf,
    pub manifest_path: PathBuf,
    /// Set when the table came out empty.
    pub warning: Option<String>,
}

#[derive(Default)]
struct Outcome {
    eligible: bool,
    rows: Vec<EventRow>,
    metric_failures: Vec<String>,
    defaulted_widths: usize,
}

fn process(scenario: &Scenario, settings: &Settings) -> Outcome {
    let mut out = Outcome {
        defaulted_widths: scenario.lanes.iter().filter(|l| l.width_defaulted).count(),
        ..Outcome::default()
    };
    if !scenario_eligible(scenario, &settings.eligibility) {
        return out;
    }
    out.eligible = true;
    for (event, _) in detect_cutins(scenario, &settings.detector) {
        match compute_all_with(&event, scenario, &settings.severity) {
            Ok(m) => out.rows.push(EventRow::new(&event, &m)),
            Err(e) => out.metric_failures.push(format!(
                "{} {}->{} at frame {}: {e}",
                event.scenario_id, event.cutter_id, event.target_id, event.entry_frame
            )),
        }
    }
    out
}

/// Detect every cut-in in the corpus at `input` and write the events table.
/// Scenarios are read in bounded chunks and scored on the current rayon
/// pool; rows are ordered by (scenario, entry frame, cutter, target).
pub fn cmd_detect(input: &Path, out_dir: &Path, settings: &Settings) -> Result<DetectSummary, ReportError> {
    settings.validate()?;
    let dir = OutDir::create(out_dir)?;
    let mut manifest = RunManifest::new("detect", &[input], None, settings);

    let mut reader = parse_scenario_stream(open(input)?);
    let mut rows = Vec::new();
    let (mut scenarios, mut eligible, mut defaulted) = (0, 0, 0);
    let mut bad_lines = Vec::new();
    let mut failures = Vec::new();
    loop {
        let mut chunk = Vec::with_capacity(CHUNK);
        for rec in reader.by_ref() {
            match rec {
                Ok(s) => chunk.push(s),
                Err(source) if settings.strict => {
                    return Err(ReportError::Record {
                        path: input.to_path_buf(),
                        source,
                    })
                }
                Err(e) => bad_lines.push(e),
            }
            if chunk.len() == CHUNK {
                break;
            }
        }
        if chunk.is_empty() {
            break;
        }
        scenarios += chunk.len();
        let outcomes: Vec<Outcome> = chunk.par_iter().map(|s| process(s, settings)).collect();
        for o in outcomes {
            eligible += usize::from(o.eligible);
            defaulted += o.defaulted_widths;
            rows.extend(o.rows);
            failures.extend(o.metric_failures);
        }
    }
    rows.sort_by(|a, b| {
        (&a.scenario_id, a.entry_frame, &a.cutter_id, &a.target_id)
            .cmp(&(&b.scenario_id, b.entry_frame, &b.cutter_id, &b.target_id))
    });

    let mut by_kind_side = BTreeMap::new();
    for r in &rows {
        *by_kind_side.entry((r.target_kind, r.side)).or_insert(0) += 1;
    }
    manifest.count("scenarios_read", scenarios);
    manifest.count("records_skipped", bad_lines.len());
    manifest.count("scenarios_eligible", eligible);
    manifest.count("events", rows.len());
    for kind in [TargetKind::Av, TargetKind::Hdv] {
        for side in [Side::Left, Side::Right] {
            let n = by_kind_side.get(&(kind, side)).copied().unwrap_or(0);
            manifest.count(&format!("events_{}_{}", kind.as_str().to_lowercase(), side), n);
        }
    }
    manifest.count("metric_failures", failures.len());
    manifest.count("lanes_width_defaulted", defaulted);
    if defaulted > 0 {
        manifest
            .notes
            .push(format!("{defaulted} lanes had no width; {} m applied", crate::trajmodel::DEFAULT_LANE_WIDTH_M));
    }
    for e in bad_lines.iter().take(LISTED_ERRORS) {
        manifest.notes.push(format!("skipped record: {e}"));
    }
    manifest.notes.extend(failures.iter().take(LISTED_ERRORS).map(|f| format!("metrics failed: {f}")));
    let warning = rows.is_empty().then(|| {
        let w = "no events detected; the table is empty".to_string();
        manifest.notes.push(w.clone());
        w
    });

    let events_path = dir.write(EVENTS_FILE, |out| {
        write_events_table(out, &manifest.header_lines(), &rows).map_err(std::io::Error::other)
    })?;
    let manifest_path = dir.finish(&manifest)?;
    Ok(DetectSummary {
        scenarios,
        eligible,
        skipped_records: bad_lines.len(),
        events: rows.len(),
        by_kind_side,
        events_path,
        manifest_path,
        warning,
    })
}
