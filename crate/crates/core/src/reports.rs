//! CSV renderers for every tabular artifact. One function per schema, all
//! returning the full file contents; headers are part of the contract and
//! covered by golden tests. Floats are printed with 17 significant digits so
//! a reader can round-trip them losslessly; absent optional values render as
//! empty cells.

use crate::error::Result;
use crate::graph::LeveledGraph;
use crate::operator::{
    decomposition_residual, transfer_matrix, DecayRow, HarmonicMeasure, MATERIALIZE_CAP,
};
use crate::spectral::{expander_gap, CheegerResult, ReturnRow};
use crate::walk::VisitStats;

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

pub const DECAY_HEADER: &str =
    "n,l1,l2,linf,sum_abs_diff,tv,lambda_n,bound_1_minus_half_lambda,ratio_l2";

pub fn decay_csv(rows: &[DecayRow]) -> String {
    let mut out = String::from(DECAY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n,
            float(r.l1),
            float(r.l2),
            float(r.linf),
            float(r.sum_abs_diff),
            float(r.tv),
            opt_float(r.lambda),
            opt_float(r.bound),
            opt_float(r.ratio_l2),
        ));
    }
    out
}

pub const TRANSFER_CHECKS_HEADER: &str =
    "n,row_sum_max_err,col_sum_max_err,norm_1to1,norm_inf,decomposition_residual";

/// Whole-operator health numbers for one level.
#[derive(Debug, Clone, Copy)]
pub struct TransferCheckRow {
    pub n: u32,
    pub row_sum_max_err: f64,
    pub col_sum_max_err: f64,
    pub norm_1to1: f64,
    pub norm_inf: f64,
    /// Only for levels where the three-factor identity applies.
    pub decomposition_residual: Option<f64>,
}

/// Materializes the level-n operator and measures how far it drifts from
/// its exact laws (rows sum to 1, columns to 1/2, both norms 1).
pub fn transfer_check_row(g: &LeveledGraph, n: u32) -> Result<TransferCheckRow> {
    let t = transfer_matrix(g, n)?;
    let row_sum_max_err = t
        .row_sums()
        .into_iter()
        .fold(0.0f64, |m, s| m.max((s - 1.0).abs()));
    let col_sum_max_err = t
        .col_sums()
        .into_iter()
        .fold(0.0f64, |m, s| m.max((s - 0.5).abs()));
    let norms = t.norms();
    let decomposition = if (2..MATERIALIZE_CAP).contains(&n) && n + 1 <= g.depth() {
        Some(decomposition_residual(g, n)?)
    } else {
        None
    };
    Ok(TransferCheckRow {
        n,
        row_sum_max_err,
        col_sum_max_err,
        norm_1to1: norms.norm_1to1,
        norm_inf: norms.norm_inf_to_inf,
        decomposition_residual: decomposition,
    })
}

pub fn transfer_checks_csv(rows: &[TransferCheckRow]) -> String {
    let mut out = String::from(TRANSFER_CHECKS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n,
            float(r.row_sum_max_err),
            float(r.col_sum_max_err),
            float(r.norm_1to1),
            float(r.norm_inf),
            opt_float(r.decomposition_residual),
        ));
    }
    out
}

pub const MC_HARMONIC_HEADER: &str = "vertex_index,frequency,std_err";

/// Empirical measure table; the std_err column is empty for exact measures.
pub fn mc_harmonic_csv(mu: &HarmonicMeasure) -> String {
    let mut out = String::from(MC_HARMONIC_HEADER);
    out.push('\n');
    for (i, w) in mu.weights.iter().enumerate() {
        let se = mu.std_errors.as_ref().map(|s| s[i]);
        out.push_str(&format!("{},{},{}\n", i, float(*w), opt_float(se)));
    }
    out
}

pub const VISITS_HEADER: &str = "v,count";

pub fn visits_csv(stats: &VisitStats) -> String {
    let mut out = String::from(VISITS_HEADER);
    out.push('\n');
    for (v, c) in stats.histogram.iter().enumerate() {
        out.push_str(&format!("{v},{c}\n"));
    }
    out
}

pub const GAPS_HEADER: &str = "level,m,model,seed,lambda,mu_star,method,residual";

#[derive(Debug, Clone)]
pub struct GapRow {
    pub level: u32,
    pub m: u64,
    pub model: Option<String>,
    pub seed: u64,
    pub lambda: f64,
    pub mu_star: f64,
    pub method: String,
    pub residual: f64,
}

/// One certified row per expander layer below the root, reusing the
/// build-time certificate when the layer carries one.
pub fn gap_rows(g: &LeveledGraph) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for level in 1..=g.depth() {
        let Some(layer) = g.layer(level) else {
            continue;
        };
        let report = match &layer.certificate {
            Some(r) => r.clone(),
            None => expander_gap(layer)?,
        };
        rows.push(GapRow {
            level,
            m: layer.num_vertices,
            model: layer.model.map(|m| m.as_str().to_string()),
            seed: layer.generator_seed,
            lambda: report.gap,
            mu_star: report.mu_star,
            method: report.method.as_str().to_string(),
            residual: report.residual,
        });
    }
    Ok(rows)
}

pub fn gaps_csv(rows: &[GapRow]) -> String {
    let mut out = String::from(GAPS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.level,
            r.m,
            r.model.as_deref().unwrap_or(""),
            r.seed,
            float(r.lambda),
            float(r.mu_star),
            r.method,
            float(r.residual),
        ));
    }
    out
}

pub const CHEEGER_HEADER: &str = "universe_desc,ratio,set_size,exhaustive";

pub fn cheeger_csv(rows: &[(String, CheegerResult)]) -> String {
    let mut out = String::from(CHEEGER_HEADER);
    out.push('\n');
    for (desc, r) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            desc,
            float(r.ratio),
            r.witness.len(),
            r.exhaustive,
        ));
    }
    out
}

pub const RETURN_HEADER: &str = "t,p_t,p_t_pow";

pub fn return_csv(rows: &[ReturnRow]) -> String {
    let mut out = String::from(RETURN_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.t,
            float(r.p_t),
            float(r.p_t_root),
        ));
    }
    out
}

pub const UNBALANCED_HEADER: &str = "n,max_density,min_density,ratio";

/// Non-uniformity of the unbalanced tree's harmonic measure from the root.
#[derive(Debug, Clone, Copy)]
pub struct UnbalancedRow {
    pub n: u32,
    pub max_density: f64,
    pub min_density: f64,
    pub ratio: f64,
}

pub fn unbalanced_csv(rows: &[UnbalancedRow]) -> String {
    let mut out = String::from(UNBALANCED_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n,
            float(r.max_density),
            float(r.min_density),
            float(r.ratio),
        ));
    }
    out
}

// ============================================================================
// tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, ExpanderConfig, VertexId};
    use crate::operator::liouville_report;
    use crate::spectral::cheeger_brute;
    use crate::walk::{mc_expected_visits, mc_harmonic_measure, WalkConfig};

    fn standard(depth: u32, seed: u64) -> LeveledGraph {
        build_graph(depth, seed, &ExpanderConfig::default()).unwrap()
    }

    #[test]
    fn float_cells_carry_seventeen_significant_digits() {
        assert_eq!(float(0.5), "5.0000000000000000e-1");
        assert_eq!(float(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(opt_float(None), "");
        let parsed: f64 = float(std::f64::consts::PI).parse().unwrap();
        assert_eq!(parsed.to_bits(), std::f64::consts::PI.to_bits());
    }

    #[test]
    fn decay_schema_is_stable() {
        let g = standard(4, 1);
        let rows = liouville_report(&g, VertexId::new(2, 0), VertexId::new(2, 3), 4).unwrap();
        let csv = decay_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,l1,l2,linf,sum_abs_diff,tv,lambda_n,bound_1_minus_half_lambda,ratio_l2"
        );
        assert_eq!(csv.lines().count(), 1 + rows.len());
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 9);
        assert!(first.starts_with("2,"));
        // last row has no forward ratio: trailing empty cell
        assert!(csv.trim_end().lines().last().unwrap().ends_with(','));
    }

    #[test]
    fn transfer_checks_schema_is_stable() {
        let g = standard(4, 2);
        let rows: Vec<TransferCheckRow> = (0..=3)
            .map(|n| transfer_check_row(&g, n).unwrap())
            .collect();
        let csv = transfer_checks_csv(&rows);
        assert!(csv.starts_with(
            "n,row_sum_max_err,col_sum_max_err,norm_1to1,norm_inf,decomposition_residual\n"
        ));
        for line in csv.lines().skip(1) {
            assert_eq!(line.split(',').count(), 6);
        }
        // the three-factor identity starts at n=2
        assert!(rows[0].decomposition_residual.is_none());
        assert!(rows[1].decomposition_residual.is_none());
        assert!(rows[2].decomposition_residual.unwrap() < 1e-10);
        assert!(rows[3].decomposition_residual.unwrap() < 1e-10);
        assert!(rows[1].row_sum_max_err < 1e-10);
    }

    #[test]
    fn harmonic_and_visits_schemas_are_stable() {
        let g = standard(3, 3);
        let cfg = WalkConfig::new(9, 2_000);
        let mu = mc_harmonic_measure(&g, VertexId::ROOT, 2, &cfg).unwrap();
        let csv = mc_harmonic_csv(&mu);
        assert!(csv.starts_with("vertex_index,frequency,std_err\n"));
        assert_eq!(csv.lines().count(), 1 + 4);
        for line in csv.lines().skip(1) {
            assert_eq!(line.split(',').count(), 3);
            assert!(!line.ends_with(','), "MC rows carry std errors");
        }

        let stats = mc_expected_visits(&g, VertexId::new(2, 1), &cfg).unwrap();
        let csv = visits_csv(&stats);
        assert!(csv.starts_with("v,count\n"));
        let total: u64 = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, stats.valid());
    }

    #[test]
    fn exact_measures_render_with_empty_error_cells() {
        let mu = HarmonicMeasure::point_mass(VertexId::new(1, 0));
        let csv = mc_harmonic_csv(&mu);
        assert_eq!(
            csv,
            "vertex_index,frequency,std_err\n0,1.0000000000000000e0,\n1,0.0000000000000000e0,\n"
        );
    }

    #[test]
    fn gaps_schema_reuses_build_certificates() {
        let g = standard(4, 5);
        let rows = gap_rows(&g).unwrap();
        assert_eq!(rows.len(), 4);
        let csv = gaps_csv(&rows);
        assert!(csv.starts_with("level,m,model,seed,lambda,mu_star,method,residual\n"));
        assert_eq!(rows[0].m, 2);
        assert_eq!(rows[1].model.as_deref(), Some("forced"));
        assert_eq!(rows[3].m, 16);
        for r in &rows {
            assert_eq!(r.method, "dense");
            assert!(r.residual < 1e-10);
        }
        // level-2 K4 gap is exactly 2/3
        assert!((rows[1].lambda - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cheeger_and_return_schemas_are_stable() {
        let g = standard(4, 1);
        let universe: Vec<VertexId> = (0..3usize).map(VertexId::from_flat).collect();
        let r = cheeger_brute(&g, &universe, 20).unwrap();
        let csv = cheeger_csv(&[("levels0..=1;size=3".into(), r)]);
        assert!(csv.starts_with("universe_desc,ratio,set_size,exhaustive\n"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",true"));

        let rows = crate::spectral::return_exponent(&g, VertexId::ROOT, 6).unwrap();
        let csv = return_csv(&rows);
        assert!(csv.starts_with("t,p_t,p_t_pow\n"));
        assert!(csv.lines().nth(1).unwrap().starts_with("2,5.0000000000000000e-1,"));
    }

    #[test]
    fn unbalanced_schema_is_stable() {
        let rows = [UnbalancedRow {
            n: 2,
            max_density: 2.0,
            min_density: 0.5,
            ratio: 4.0,
        }];
        let csv = unbalanced_csv(&rows);
        assert!(csv.starts_with("n,max_density,min_density,ratio\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
