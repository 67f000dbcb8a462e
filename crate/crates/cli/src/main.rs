use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cutin_core::detector::{Side, TargetKind};
use cutin_core::report::{
    cmd_compare, cmd_detect, cmd_replay, cmd_synth, exit, ReportError, Settings,
};
use cutin_core::synth::{CorpusConfig, Preset};

const DEFAULT_SEED: u64 = 20240601;

/// Cut-in mining, surrogate safety metrics and AV/HDV comparison.
///
/// Exit codes: 0 success, 1 internal error, 2 usage or settings error,
/// 3 unreadable or malformed input, 4 empty result (no events, or a single
/// population to compare).
#[derive(Debug, Parser)]
#[command(name = "cutin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect cut-ins in an interchange corpus and write the events table.
    Detect(Common),
    /// Compare AV-targeted against HDV-targeted events.
    Compare(Common),
    /// Per-frame replay of one cut-in.
    Replay(ReplayArgs),
    /// Generate a labelled synthetic corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Corpus (detect, replay) or events table (compare).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Bonferroni family size.
    #[arg(long)]
    family_size: Option<usize>,
    /// Gap bounds of the critical and moderate classes, m, as `LO,HI`.
    #[arg(long, value_parser = parse_pair)]
    severity_bounds: Option<[f64; 2]>,
    /// Lead-speed band of the speed-matched re-analysis, km/h, as `LO,HI`.
    #[arg(long, value_parser = parse_pair)]
    speed_match_range: Option<[f64; 2]>,
    /// TOML file overriding any pipeline constant.
    #[arg(long)]
    thresholds_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    cutter: String,
    #[arg(long)]
    target: String,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Named configuration: default, paper-mimic or replay-twin.
    #[arg(long, default_value = "default", conflicts_with = "config")]
    preset: Preset,
    /// TOML corpus configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of scenarios.
    #[arg(short = 'n', long)]
    n_scenarios: Option<usize>,
    #[arg(long)]
    negative_fraction: Option<f64>,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok([num(lo)?, num(hi)?])
}

fn read_text(path: &Path) -> Result<String, ReportError> {
    std::fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_path_buf(),
        source,
    })
}

impl Common {
    fn settings(&self) -> Result<Settings, ReportError> {
        let mut s = match &self.thresholds_file {
            Some(p) => Settings::from_toml(&read_text(p)?)?,
            None => Settings::default(),
        };
        s.strict |= self.strict;
        if let Some(f) = self.family_size {
            s.family = f;
        }
        if let Some([critical, moderate]) = self.severity_bounds {
            s.severity.critical = critical;
            s.severity.moderate = moderate;
        }
        if let Some(r) = self.speed_match_range {
            s.speed_match_kmh = r;
        }
        s.validate()?;
        Ok(s)
    }

    fn input(&self) -> Result<&Path, ReportError> {
        self.input
            .as_deref()
            .ok_or_else(|| ReportError::Settings("--input is required".into()))
    }
}

/// A finished command: `Some` carries an empty-result warning.
type Outcome = Result<Option<String>, ReportError>;

fn detect(c: &Common) -> Outcome {
    let s = cmd_detect(c.input()?, &c.output_dir, &c.settings()?)?;
    println!(
        "{} scenarios read, {} eligible, {} skipped records, {} events",
        s.scenarios, s.eligible, s.skipped_records, s.events
    );
    for kind in [TargetKind::Av, TargetKind::Hdv] {
        let n = |side| s.by_kind_side.get(&(kind, side)).copied().unwrap_or(0);
        println!(
            "  HDV->{:<3}  left {:>6}  right {:>6}",
            kind.as_str(),
            n(Side::Left),
            n(Side::Right)
        );
    }
    println!("wrote {}", s.events_path.display());
    Ok(s.warning)
}

fn compare(c: &Common) -> Outcome {
    let s = cmd_compare(c.input()?, &c.output_dir, &c.settings()?, c.seed)?;
    println!("{} AV-targeted, {} HDV-targeted events", s.n_a, s.n_b);
    if let Some(r) = &s.report {
        for m in &r.metrics {
            match &m.result {
                Some(t) => println!(
                    "  {:<20} median {:>9.3} vs {:>9.3}  p_bonf {:.3e}  delta {:+.3}",
                    m.metric, t.median_a, t.median_b, t.p_bonferroni, t.cliffs_delta
                ),
                None => println!("  {:<20} {}", m.metric, m.status),
            }
        }
    }
    println!("wrote {} files to {}", s.files.len(), c.output_dir.display());
    Ok(s.warning)
}

fn replay(a: &ReplayArgs) -> Outcome {
    let c = &a.common;
    let s = cmd_replay(c.input()?, &a.scenario, &a.cutter, &a.target, &c.output_dir, &c.settings()?)?;
    println!("{:<22} {:>5} {:>7} {:>8} {:>8} {:>7}  note", "instant", "frame", "t_s", "gap_m", "dv_mps", "ttc_s");
    for k in &s.key_instants {
        let ttc = k.ttc.map(|t| format!("{t:.2}")).unwrap_or_default();
        println!(
            "{:<22} {:>5} {:>7.1} {:>8.2} {:>+8.2} {:>7}  {}",
            k.name, k.frame, k.t, k.gap, k.dv_app, ttc, k.note
        );
    }
    Ok(None)
}

fn synth(a: &SynthArgs) -> Outcome {
    let mut config = match &a.config {
        Some(p) => CorpusConfig::from_toml(&read_text(p)?)?,
        None => a.preset.config(a.common.seed),
    };
    if a.config.is_some() && a.common.seed != DEFAULT_SEED {
        config.seed = a.common.seed;
    }
    if let Some(n) = a.n_scenarios {
        config.n_scenarios = n;
    }
    if let Some(f) = a.negative_fraction {
        config.negative_fraction = f;
    }
    config.validate()?;
    let s = cmd_synth(&config, &a.common.output_dir)?;
    for line in s.manifest.header_lines() {
        println!("{line}");
    }
    Ok(None)
}

fn run(cli: &Cli) -> Outcome {
    let common = match &cli.command {
        Command::Detect(c) | Command::Compare(c) => c,
        Command::Replay(a) => &a.common,
        Command::Synth(a) => &a.common,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| ReportError::Settings(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Detect(c) => detect(c),
        Command::Compare(c) => compare(c),
        Command::Replay(a) => replay(a),
        Command::Synth(a) => synth(a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(None) => exit::OK,
        Ok(Some(warning)) => {
            eprintln!("warning: {warning}");
            exit::EMPTY
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
