//! `liouville-lab`: build leveled expander graphs and run the walk,
//! operator, and spectral experiments against them from the shell.
//!
//! Every run writes its artifacts plus a `manifest.json` recording the
//! fully resolved configuration and a sha256 per artifact, so reruns can
//! be checked byte-for-byte. Nothing here depends on wall-clock time.
//!
//! Exit codes: 0 success, 2 bad arguments / unreadable or malformed
//! inputs, 3 expander generation gave up, 4 a numeric guard tripped.

mod commands;

use clap::{Parser, Subcommand, ValueEnum};
use liouville_core::{Error, ExpanderModel, Result, VertexId, WalkConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const WORKERS_ENV: &str = "LIOUVILLE_LAB_WORKERS";

#[derive(Parser)]
#[command(name = "liouville-lab", version, about = "random-walk laboratory for leveled expander graphs")]
struct Cli {
    /// TOML file with fallback values for seed, workers, walks, out.
    /// Flags beat the file; the file beats environment and defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory that receives artifacts and manifest.json.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for Monte Carlo commands. Changes wall time only:
    /// outputs are byte-identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph and certify the per-level expander gaps.
    ///
    /// Writes graph.txt and gaps.csv.
    Build {
        /// Number of levels below the root.
        #[arg(long)]
        depth: u32,
        /// Master seed; level seeds are derived from it.
        #[arg(long)]
        seed: Option<u64>,
        /// Random model for the 3-regular level graphs.
        #[arg(long, value_enum, default_value_t)]
        model: ModelArg,
        /// Smallest acceptable certified gap per level.
        #[arg(long, default_value_t = 0.02)]
        min_gap: f64,
        /// Resampling budget per level before giving up (exit 3).
        #[arg(long, default_value_t = 100)]
        max_retries: u32,
    },

    /// Check row sums, column sums, operator norms, and the three-term
    /// decomposition of the level transfer operators.
    ///
    /// Writes transfer_checks.csv.
    Verify {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Largest operator level to materialize (clamped to depth-1 and
        /// the materialization cap).
        #[arg(long)]
        n_max: Option<u32>,
    },

    /// Push two point masses level by level and tabulate how their
    /// harmonic measures merge.
    ///
    /// Writes decay.csv.
    Decay {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// First source, as level:index or (level,index).
        #[arg(long, value_parser = parse_vertex)]
        u: VertexId,
        /// Second source.
        #[arg(long, value_parser = parse_vertex)]
        v: VertexId,
        #[arg(long)]
        n_max: Option<u32>,
    },

    /// Monte Carlo histogram of visits to one level before the walk
    /// first leaves the ball below it, started one level further down.
    ///
    /// Writes visits.csv and visits_summary.json.
    Visits {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Observed level n; the walk starts at (n+1, 0).
        #[arg(long)]
        level: u32,
        #[arg(long)]
        walks: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Harmonic measure of a level as seen from one start vertex,
    /// either exactly or by Monte Carlo.
    ///
    /// Writes mc_harmonic.csv (mc) or exact_harmonic.csv (exact).
    Harmonic {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Start vertex, as level:index or (level,index).
        #[arg(long, value_parser = parse_vertex)]
        start: VertexId,
        /// Absorbing level.
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value_t)]
        method: MethodArg,
        #[arg(long)]
        walks: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Edge expansion of the top ball: exhaustive over every nonempty
    /// subset when the ball is small, greedy descent otherwise.
    ///
    /// Writes cheeger.csv.
    Cheeger {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        /// Universe is all vertices at levels 0..=LEVELS.
        #[arg(long, default_value_t = 3)]
        levels: u32,
        /// Seed for the greedy fallback on large universes.
        #[arg(long)]
        seed: Option<u64>,
    },

    /// Harmonic-measure non-uniformity of the tree whose right child
    /// keeps two slots: per-level max/min density from the root.
    ///
    /// Writes unbalanced.csv.
    Unbalanced {
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long)]
        n_max: Option<u32>,
    },

    /// Return probability p_t of the walk to its start vertex, with the
    /// root's value raised to the matching power for comparison.
    ///
    /// Writes return.csv.
    Return {
        #[arg(long, value_name = "FILE")]
        graph: PathBuf,
        #[arg(long, value_parser = parse_vertex, default_value = "0:0")]
        vertex: VertexId,
        #[arg(long, default_value_t = 20)]
        t_max: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
enum ModelArg {
    #[default]
    Pairing,
    CycleMatching,
}

impl From<ModelArg> for ExpanderModel {
    fn from(m: ModelArg) -> ExpanderModel {
        match m {
            ModelArg::Pairing => ExpanderModel::Pairing,
            ModelArg::CycleMatching => ExpanderModel::CycleMatching,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
enum MethodArg {
    #[default]
    Mc,
    Exact,
}

/// Accepts `level:index` and `(level,index)`.
fn parse_vertex(s: &str) -> std::result::Result<VertexId, String> {
    let trimmed = s.trim();
    let inner = trimmed
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .unwrap_or(trimmed);
    let (l, i) = inner
        .split_once(':')
        .or_else(|| inner.split_once(','))
        .ok_or_else(|| format!("expected level:index or (level,index), got {s:?}"))?;
    let level: u32 = l.trim().parse().map_err(|e| format!("bad level {l:?}: {e}"))?;
    let index: u64 = i.trim().parse().map_err(|e| format!("bad index {i:?}: {e}"))?;
    if level > 30 {
        return Err(format!("level {level} exceeds the supported maximum 30"));
    }
    if index >> level != 0 {
        return Err(format!("index {index} out of range for level {level} (need < 2^{level})"));
    }
    Ok(VertexId::new(level, index))
}

/// Fallback values read from `--config`; every field loses to the
/// matching flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDefaults {
    seed: Option<u64>,
    workers: Option<usize>,
    walks: Option<u64>,
    out: Option<PathBuf>,
}

fn load_defaults(path: Option<&Path>) -> Result<FileDefaults> {
    let Some(path) = path else {
        return Ok(FileDefaults::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::invalid_argument(format!("config file {}: {e}", path.display())))
}

struct Resolved {
    out: PathBuf,
    workers: usize,
    seed: u64,
    walks: u64,
}

/// flag > config file > environment > built-in default.
fn resolve(cli: &Cli, seed: Option<u64>, walks: Option<u64>, file: &FileDefaults) -> Result<Resolved> {
    let workers = match cli.workers.or(file.workers) {
        Some(w) => w,
        None => match std::env::var(WORKERS_ENV) {
            Ok(raw) => raw
                .trim()
                .parse()
                .map_err(|e| Error::invalid_argument(format!("{WORKERS_ENV}={raw:?}: {e}")))?,
            Err(std::env::VarError::NotPresent) => 1,
            Err(e) => return Err(Error::invalid_argument(format!("{WORKERS_ENV}: {e}"))),
        },
    };
    if workers == 0 {
        return Err(Error::invalid_argument("workers must be at least 1"));
    }
    Ok(Resolved {
        out: cli
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        workers,
        seed: seed.or(file.seed).unwrap_or(1),
        walks: walks.or(file.walks).unwrap_or(1_000_000),
    })
}

fn run(cli: Cli) -> Result<()> {
    let file = load_defaults(cli.config.as_deref())?;
    match cli.command {
        Command::Build { depth, seed, model, min_gap, max_retries } => {
            let r = resolve(&cli, seed, None, &file)?;
            commands::build(&r.out, depth, r.seed, model.into(), min_gap, max_retries)
        }
        Command::Verify { ref graph, n_max } => {
            let r = resolve(&cli, None, None, &file)?;
            commands::verify(&r.out, graph, n_max)
        }
        Command::Decay { ref graph, u, v, n_max } => {
            let r = resolve(&cli, None, None, &file)?;
            commands::decay(&r.out, graph, u, v, n_max)
        }
        Command::Visits { ref graph, level, walks, seed } => {
            let r = resolve(&cli, seed, walks, &file)?;
            let cfg = WalkConfig::new(r.seed, r.walks).with_workers(r.workers);
            commands::visits(&r.out, graph, level, &cfg)
        }
        Command::Harmonic { ref graph, start, level, method, walks, seed } => {
            let r = resolve(&cli, seed, walks, &file)?;
            let cfg = WalkConfig::new(r.seed, r.walks).with_workers(r.workers);
            commands::harmonic(&r.out, graph, start, level, method == MethodArg::Exact, &cfg)
        }
        Command::Cheeger { ref graph, levels, seed } => {
            let r = resolve(&cli, seed, None, &file)?;
            commands::cheeger(&r.out, graph, levels, r.seed)
        }
        Command::Unbalanced { depth, n_max } => {
            let r = resolve(&cli, None, None, &file)?;
            commands::unbalanced(&r.out, depth, n_max)
        }
        Command::Return { ref graph, vertex, t_max } => {
            let r = resolve(&cli, None, None, &file)?;
            commands::return_probability(&r.out, graph, vertex, t_max)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::Parse { .. } | Error::Validation(_) | Error::Io(_) => 2,
        Error::GenerationFailed { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertex_parser_accepts_both_spellings() {
        assert_eq!(parse_vertex("2:3").unwrap(), VertexId::new(2, 3));
        assert_eq!(parse_vertex("(2,3)").unwrap(), VertexId::new(2, 3));
        assert_eq!(parse_vertex(" 0:0 ").unwrap(), VertexId::ROOT);
    }

    #[test]
    fn vertex_parser_rejects_out_of_range_and_garbage() {
        assert!(parse_vertex("2:4").is_err());
        assert!(parse_vertex("0:1").is_err());
        assert!(parse_vertex("31:0").is_err());
        assert!(parse_vertex("2;3").is_err());
        assert!(parse_vertex("(2,3").is_err());
        assert!(parse_vertex("x:1").is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from([
            "liouville-lab", "--out", "runs/a", "build", "--depth", "4", "--seed", "9",
            "--model", "cycle-matching",
        ])
        .unwrap();
        match cli.command {
            Command::Build { depth: 4, seed: Some(9), model: ModelArg::CycleMatching, .. } => {}
            _ => panic!("wrong parse"),
        }
    }
}
