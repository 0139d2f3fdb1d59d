//! Two-agent subformations: each edge `(i, j)` on its own, and how their
//! verdicts compare with the verdict for the whole formation.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::Tolerances;
use crate::criterion::{check, Verdict};
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::numerics::{is_stabilizable, solve_matrix_equation, LinearSolveReport, NumericsError};
use crate::serde_util;

/// Subformation `{i, j}` for the edge `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEntry {
    #[serde(with = "serde_util::one_based")]
    pub from: usize,
    #[serde(with = "serde_util::one_based")]
    pub to: usize,
    pub stabilizable: bool,
    /// `B_i N_ij = A_j − A_i`.
    pub gain: LinearSolveReport,
    /// `B_i k̃_ij = A_i d_ij`.
    pub offset: LinearSolveReport,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseReport {
    /// Sorted by `(from, to)`.
    pub pairs: Vec<PairEntry>,
    pub all_stable: bool,
}

impl PairwiseReport {
    pub fn pair(&self, from: usize, to: usize) -> Option<&PairEntry> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>8}  {:>13}  {:>12}  {:>12}  verdict",
            "edge", "stabilizable", "res(N_ij)", "res(k~_ij)"
        );
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:>8}  {:>13}  {:>12.3e}  {:>12.3e}  {}",
                format!("({},{})", p.from + 1, p.to + 1),
                p.stabilizable,
                p.gain.relative_residual,
                p.offset.relative_residual,
                p.verdict
            );
        }
        out
    }
}

/// Checks every edge as a two-agent formation with leader `j` and follower `i`.
pub fn analyze_pairs(spec: &FormationSpec, tol: &Tolerances) -> Result<PairwiseReport, NumericsError> {
    let mut edges: Vec<_> = spec.edges.iter().collect();
    edges.sort_by_key(|e| (e.from, e.to));
    let mut pairs = Vec::with_capacity(edges.len());
    for e in edges {
        let follower = &spec.agents[e.from];
        let leader = &spec.agents[e.to];
        let stabilizable = is_stabilizable(&follower.a, &follower.b, tol)?.stabilizable;
        let gain = solve_matrix_equation(&follower.b, &(&leader.a - &follower.a), tol);
        let rhs = &follower.a * &e.d;
        let offset = solve_matrix_equation(&follower.b, &DMatrix::from_column_slice(spec.n, 1, rhs.as_slice()), tol);
        let ok = stabilizable && gain.solvable && offset.solvable;
        pairs.push(PairEntry {
            from: e.from,
            to: e.to,
            stabilizable,
            gain,
            offset,
            verdict: if ok { Verdict::Stable } else { Verdict::Unstable },
        });
    }
    let all_stable = pairs.iter().all(|p| p.verdict == Verdict::Stable);
    Ok(PairwiseReport { pairs, all_stable })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairClass {
    BothStable,
    BothUnstable,
    PairsStableFormationUnstable,
    FormationStablePairUnstable,
}

impl std::fmt::Display for PairClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairClass::BothStable => "both-stable",
            PairClass::BothUnstable => "both-unstable",
            PairClass::PairsStableFormationUnstable => "pairs-stable-formation-unstable",
            PairClass::FormationStablePairUnstable => "formation-stable-pair-unstable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossComparison {
    pub formation: Verdict,
    pub pairs: PairwiseReport,
    pub class: PairClass,
    /// Edges whose two-agent verdict is unstable (1-based on output).
    #[serde(with = "serde_util::one_based_pairs")]
    pub unstable_pairs: Vec<(usize, usize)>,
}

/// Runs the formation criterion and the pairwise analysis and classifies
/// how they relate.
pub fn cross_compare(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    tol: &Tolerances,
) -> Result<CrossComparison, NumericsError> {
    let formation = check(spec, decomp, tol)?.overall;
    let pairs = analyze_pairs(spec, tol)?;
    let unstable_pairs: Vec<(usize, usize)> = pairs
        .pairs
        .iter()
        .filter(|p| p.verdict == Verdict::Unstable)
        .map(|p| (p.from, p.to))
        .collect();
    // "Both" refers to the formation verdict and the pairs as a group: the
    // group is stable only when every pair is.
    let class = match (formation == Verdict::Stable, pairs.all_stable) {
        (true, true) => PairClass::BothStable,
        (false, false) => PairClass::BothUnstable,
        (false, true) => PairClass::PairsStableFormationUnstable,
        (true, false) => PairClass::FormationStablePairUnstable,
    };
    Ok(CrossComparison {
        formation,
        pairs,
        class,
        unstable_pairs,
    })
}
