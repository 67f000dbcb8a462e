use std::path::{Path, PathBuf};

use super::{OutDir, ReportError, RunManifest, Settings};
use crate::detector::TargetKind;
use crate::synth::{generate_corpus, write_labels, CorpusConfig};
use crate::trajmodel::write_scenario_line;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub scenarios: usize,
    pub positives_av: usize,
    pub positives_hdv: usize,
    pub negatives: usize,
    pub corpus_path: PathBuf,
    pub labels_path: PathBuf,
    pub manifest: RunManifest,
}

/// Generate a corpus and its labels. Both files open with the manifest as
/// `#` lines, which the interchange and label readers skip.
pub fn cmd_synth(config: &CorpusConfig, out_dir: &Path) -> Result<SynthSummary, ReportError> {
    let corpus = generate_corpus(config)?;
    let dir = OutDir::create(out_dir)?;
    let mut manifest = RunManifest::new("synth", &[], Some(config.seed), &Settings::default());
    manifest.synth = Some(config.clone());

    let kind_count = |k: TargetKind| {
        corpus
            .labels
            .iter()
            .filter(|l| l.expected_event.as_ref().is_some_and(|e| e.target_kind == k))
            .count()
    };
    let (av, hdv) = (kind_count(TargetKind::Av), kind_count(TargetKind::Hdv));
    let negatives = corpus.scenarios.len() - av - hdv;
    manifest.count("scenarios", corpus.scenarios.len());
    manifest.count("positives_av", av);
    manifest.count("positives_hdv", hdv);
    manifest.count("negatives", negatives);

    let corpus_path = dir.write(CORPUS_FILE, |out| {
        manifest.write_header(out)?;
        corpus.scenarios.iter().try_for_each(|s| write_scenario_line(out, s))
    })?;
    let labels_path = dir.write(LABELS_FILE, |out| {
        manifest.write_header(out)?;
        write_labels(out, &corpus.labels).map_err(std::io::Error::other)
    })?;
    dir.finish(&manifest)?;
    Ok(SynthSummary {
        scenarios: corpus.scenarios.len(),
        positives_av: av,
        positives_hdv: hdv,
        negatives,
        corpus_path,
        labels_path,
        manifest,
    })
}
