//! One function per subcommand. Each builds or loads a graph, runs the
//! core routine, writes the CSV artifacts through [`RunDir`], and closes
//! the run with a manifest naming the resolved configuration and the
//! sha256 of every artifact.

use liouville_core::graph::{read_graph_file, serialize_graph};
use liouville_core::operator::MATERIALIZE_CAP;
use liouville_core::reports::{
    cheeger_csv, decay_csv, gap_rows, gaps_csv, mc_harmonic_csv, return_csv, transfer_check_row,
    transfer_checks_csv, unbalanced_csv, visits_csv, UnbalancedRow,
};
use liouville_core::spectral::{
    ball, cheeger_brute, cheeger_search, return_exponent, Heuristic, SearchInit,
    MAX_BRUTE_UNIVERSE,
};
use liouville_core::{
    build_graph, build_unbalanced_tree, harmonic_measure_exact, liouville_report,
    mc_expected_visits, mc_harmonic_measure, propagate_measure, Error, ExpanderConfig,
    ExpanderModel, HarmonicMeasure, MeasureMethod, Result, VertexId, WalkConfig,
};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const GRAPH_FILE: &str = "graph.txt";

/// Names the offending path in I/O failures; bare ENOENT is useless at
/// the shell.
fn load_graph(path: &Path) -> Result<liouville_core::LeveledGraph> {
    read_graph_file(path).map_err(|e| match e {
        Error::Io(io) => Error::invalid_argument(format!("graph file {}: {io}", path.display())),
        other => other,
    })
}

/// A decay table counts as merged once the summed absolute density
/// difference drops below this.
const MERGE_THRESHOLD: f64 = 0.05;

/// Collects artifacts for one run; `finish` seals them into
/// manifest.json. The manifest carries no timestamp so that reruns with
/// equal configuration are byte-identical.
struct RunDir {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl RunDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunDir { dir: dir.to_path_buf(), artifacts: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.artifacts
            .insert(name.to_string(), hex::encode(Sha256::digest(contents.as_bytes())));
        println!("wrote {}", path.display());
        Ok(())
    }

    fn finish(mut self, command: &str, config: serde_json::Value) -> Result<()> {
        let manifest = json!({
            "command": command,
            "config": config,
            "versions": {
                "liouville-core": liouville_core::VERSION,
                "liouville-lab": env!("CARGO_PKG_VERSION"),
            },
            "artifacts": std::mem::take(&mut self.artifacts),
        });
        let text = serde_json::to_string_pretty(&manifest)
            .expect("manifest values are plain strings and numbers");
        let path = self.dir.join("manifest.json");
        fs::write(&path, format!("{text}\n"))?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

pub fn build(
    out: &Path,
    depth: u32,
    seed: u64,
    model: ExpanderModel,
    min_gap: f64,
    max_retries: u32,
) -> Result<()> {
    let config = ExpanderConfig { model, min_gap, max_retries };
    let g = build_graph(depth, seed, &config)?;
    let rows = gap_rows(&g)?;
    if let Some(worst) = rows.iter().min_by(|a, b| a.lambda.total_cmp(&b.lambda)) {
        println!("built depth-{depth} graph; smallest certified gap {:.6} at level {}", worst.lambda, worst.level);
    } else {
        println!("built depth-0 graph (a single vertex)");
    }
    let mut run = RunDir::create(out)?;
    run.write(GRAPH_FILE, &serialize_graph(&g))?;
    run.write("gaps.csv", &gaps_csv(&rows))?;
    run.finish(
        "build",
        json!({
            "depth": depth,
            "seed": seed,
            "model": model.as_str(),
            "min_gap": min_gap,
            "max_retries": max_retries,
        }),
    )
}

pub fn verify(out: &Path, graph: &Path, n_max: Option<u32>) -> Result<()> {
    let g = load_graph(graph)?;
    let cap = MATERIALIZE_CAP.min(g.depth().saturating_sub(1));
    let hi = n_max.unwrap_or(cap).min(cap);
    let mut rows = Vec::new();
    if g.depth() > 0 {
        for n in 0..=hi {
            rows.push(transfer_check_row(&g, n)?);
        }
    }
    let mut run = RunDir::create(out)?;
    run.write("transfer_checks.csv", &transfer_checks_csv(&rows))?;
    run.finish(
        "verify",
        json!({ "graph": graph.display().to_string(), "n_max": hi }),
    )
}

pub fn decay(out: &Path, graph: &Path, u: VertexId, v: VertexId, n_max: Option<u32>) -> Result<()> {
    let g = load_graph(graph)?;
    let hi = n_max.unwrap_or(g.depth()).min(g.depth());
    let rows = liouville_report(&g, u, v, hi)?;
    match rows.iter().find(|r| r.sum_abs_diff < MERGE_THRESHOLD) {
        Some(row) => println!("sum_abs_diff first drops below {MERGE_THRESHOLD} at n={}", row.n),
        None => println!("sum_abs_diff stays at or above {MERGE_THRESHOLD} through n={hi}"),
    }
    let mut run = RunDir::create(out)?;
    run.write("decay.csv", &decay_csv(&rows))?;
    run.finish(
        "decay",
        json!({
            "graph": graph.display().to_string(),
            "u": u.to_string(),
            "v": v.to_string(),
            "n_max": hi,
        }),
    )
}

pub fn visits(out: &Path, graph: &Path, level: u32, cfg: &WalkConfig) -> Result<()> {
    let g = load_graph(graph)?;
    if level == 0 || level >= g.depth() {
        return Err(Error::invalid_argument(format!(
            "observed level must satisfy 1 <= level <= depth-1 = {}; got {level}",
            g.depth().saturating_sub(1)
        )));
    }
    let start = VertexId::new(level + 1, 0);
    let stats = mc_expected_visits(&g, start, cfg)?;
    println!(
        "mean visits {:.6} +- {:.6} over {} walks ({} censored)",
        stats.mean(),
        stats.std_error_of_mean(),
        stats.walks,
        stats.censored
    );
    let summary = json!({
        "level": level,
        "start": start.to_string(),
        "walks": stats.walks,
        "censored": stats.censored,
        "seed": cfg.master_seed,
        "mean": stats.mean(),
        "std_error": stats.std_error_of_mean(),
        "zero_fraction": stats.zero_fraction(),
    });
    let summary_text = serde_json::to_string_pretty(&summary)
        .expect("summary values are plain strings and numbers");
    let mut run = RunDir::create(out)?;
    run.write("visits.csv", &visits_csv(&stats))?;
    run.write("visits_summary.json", &format!("{summary_text}\n"))?;
    run.finish(
        "visits",
        json!({
            "graph": graph.display().to_string(),
            "level": level,
            "walks": cfg.walks,
            "seed": cfg.master_seed,
            "workers": cfg.workers,
        }),
    )
}

pub fn harmonic(
    out: &Path,
    graph: &Path,
    start: VertexId,
    level: u32,
    exact: bool,
    cfg: &WalkConfig,
) -> Result<()> {
    let g = load_graph(graph)?;
    let mut run = RunDir::create(out)?;
    let mut config = json!({
        "graph": graph.display().to_string(),
        "start": start.to_string(),
        "level": level,
        "method": if exact { "exact" } else { "mc" },
    });
    if exact {
        let mu = harmonic_measure_exact(&g, start, level)?;
        run.write("exact_harmonic.csv", &mc_harmonic_csv(&mu))?;
    } else {
        let mu = mc_harmonic_measure(&g, start, level, cfg)?;
        if let MeasureMethod::MonteCarlo { walks, censored } = mu.method {
            println!("absorbed {} of {walks} walks ({censored} censored)", walks - censored);
        }
        run.write("mc_harmonic.csv", &mc_harmonic_csv(&mu))?;
        let extra = config.as_object_mut().expect("config is an object");
        extra.insert("walks".into(), json!(cfg.walks));
        extra.insert("seed".into(), json!(cfg.master_seed));
        extra.insert("workers".into(), json!(cfg.workers));
    }
    run.finish("harmonic", config)
}

pub fn cheeger(out: &Path, graph: &Path, levels: u32, seed: u64) -> Result<()> {
    let g = load_graph(graph)?;
    if levels >= g.depth() {
        return Err(Error::invalid_argument(format!(
            "--levels must stay above the clipped bottom level: need levels < depth = {}",
            g.depth()
        )));
    }
    let universe = ball(&g, VertexId::ROOT, levels)?;
    let result = if universe.len() <= MAX_BRUTE_UNIVERSE {
        cheeger_brute(&g, &universe, MAX_BRUTE_UNIVERSE)?
    } else {
        cheeger_search(
            &g,
            SearchInit::Ball { center: VertexId::ROOT, radius: levels },
            universe.len(),
            Heuristic::Greedy,
            seed,
        )?
    };
    println!(
        "min boundary/size {:.6} at |S|={} ({})",
        result.ratio,
        result.witness.len(),
        if result.exhaustive { "exhaustive" } else { "greedy" }
    );
    let desc = format!("levels<={levels}");
    let exhaustive = result.exhaustive;
    let mut run = RunDir::create(out)?;
    run.write("cheeger.csv", &cheeger_csv(&[(desc, result)]))?;
    run.finish(
        "cheeger",
        json!({
            "graph": graph.display().to_string(),
            "levels": levels,
            "seed": seed,
            "exhaustive": exhaustive,
        }),
    )
}

pub fn unbalanced(out: &Path, depth: u32, n_max: Option<u32>) -> Result<()> {
    let g = build_unbalanced_tree(depth)?;
    let hi = n_max.unwrap_or(depth).min(depth);
    let mut rows = Vec::new();
    let mut mu = HarmonicMeasure::point_mass(VertexId::ROOT);
    for n in 1..=hi {
        mu = propagate_measure(&g, &mu)?;
        let len = mu.weights.len() as f64;
        let max = mu.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = mu.weights.iter().copied().fold(f64::INFINITY, f64::min);
        rows.push(UnbalancedRow {
            n,
            max_density: max * len,
            min_density: min * len,
            ratio: max / min,
        });
    }
    match rows.last() {
        Some(last) => println!("density ratio reaches {:.6} at n={}", last.ratio, last.n),
        None => println!("nothing to tabulate below level 1"),
    }
    let mut run = RunDir::create(out)?;
    run.write("unbalanced.csv", &unbalanced_csv(&rows))?;
    run.finish("unbalanced", json!({ "depth": depth, "n_max": hi }))
}

pub fn return_probability(out: &Path, graph: &Path, vertex: VertexId, t_max: u32) -> Result<()> {
    let g = load_graph(graph)?;
    let rows = return_exponent(&g, vertex, t_max)?;
    let mut run = RunDir::create(out)?;
    run.write("return.csv", &return_csv(&rows))?;
    run.finish(
        "return",
        json!({
            "graph": graph.display().to_string(),
            "vertex": vertex.to_string(),
            "t_max": t_max,
        }),
    )
}
