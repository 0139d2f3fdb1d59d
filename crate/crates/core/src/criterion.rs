//! Decision procedure for linear internal stability and the accompanying
//! evidence report, plus verification of concrete controllers.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::config::Tolerances;
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::numerics::{
    is_hurwitz_with, is_stabilizable, solve_matrix_equation, Eigenvalue, HurwitzReport, LinearSolveReport,
    NumericsError,
};
use crate::serde_util;
use crate::synthesis::ControllerSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
        })
    }
}

/// Structural special case of the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Corollary {
    None,
    /// More than one leader: every leader must share one Hurwitz matrix and
    /// followers can ignore their parents' states.
    MultiLeader,
    /// One leader and one parent per follower: displacement consistency is automatic.
    InTree,
}

impl std::fmt::Display for Corollary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Corollary::None => "none",
            Corollary::MultiLeader => "multi_leader",
            Corollary::InTree => "in_tree",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Pass,
    Fail,
    /// Holds for structural reasons; still computed.
    Vacuous,
    /// Follows from other passing conditions; still computed.
    Implied,
    /// Evaluated for information only; does not enter the verdict.
    Informational,
}

impl ConditionStatus {
    pub fn is_satisfied(self) -> bool {
        !matches!(self, ConditionStatus::Fail)
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            ConditionStatus::Pass
        } else {
            ConditionStatus::Fail
        }
    }
}

impl std::fmt::Display for ConditionStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConditionStatus::Pass => "PASS",
            ConditionStatus::Fail => "FAIL",
            ConditionStatus::Vacuous => "PASS (vacuous)",
            ConditionStatus::Implied => "PASS (implied)",
            ConditionStatus::Informational => "INFO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizabilityEntry {
    #[serde(with = "serde_util::one_based")]
    pub node: usize,
    pub stabilizable: bool,
    pub witness: Option<Eigenvalue>,
    pub tested: Vec<Eigenvalue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizabilityCondition {
    pub status: ConditionStatus,
    pub entries: Vec<StabilizabilityEntry>,
}

/// Solvability of `B_i N_i = A_1 − A_i` and `B_i k̃_i = A_i D_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityEntry {
    #[serde(with = "serde_util::one_based")]
    pub node: usize,
    /// Equation for the aggregate gain `N_i`.
    pub gain: LinearSolveReport,
    /// Equation for the offset `k̃_i` (solution is an `m × 1` matrix).
    pub offset: LinearSolveReport,
    pub pass: bool,
}

impl SolvabilityEntry {
    pub fn aggregate_gain(&self) -> &DMatrix<f64> {
        &self.gain.solution
    }

    pub fn offset_vector(&self) -> DVector<f64> {
        self.offset.solution.column(0).into_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityCondition {
    pub status: ConditionStatus,
    pub entries: Vec<SolvabilityEntry>,
}

/// `d_ij` against `D_i − D_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementEntry {
    #[serde(with = "serde_util::one_based")]
    pub from: usize,
    #[serde(with = "serde_util::one_based")]
    pub to: usize,
    #[serde(with = "serde_util::vector")]
    pub expected: DVector<f64>,
    /// `d_ij − (D_i − D_j)`.
    #[serde(with = "serde_util::vector")]
    pub defect: DVector<f64>,
    pub defect_norm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisplacementCondition {
    pub status: ConditionStatus,
    pub entries: Vec<DisplacementEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderDefect {
    #[serde(with = "serde_util::one_based")]
    pub node: usize,
    /// `‖A_i − A_1‖_F`.
    pub defect_norm: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderCondition {
    pub status: ConditionStatus,
    /// Whether this condition enters the verdict (more than one leader).
    pub binding: bool,
    pub leader_defects: Vec<LeaderDefect>,
    pub reference_hurwitz: HurwitzReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub overall: Verdict,
    pub applicable_corollary: Corollary,
    #[serde(with = "serde_util::one_based")]
    pub reference_leader: usize,
    pub leader_count: usize,
    /// `1 + ‖A_1‖_F + max ‖d_ij‖`; equality defects are compared with `ε_solve · scale`.
    pub scale: f64,
    pub condition1: StabilizabilityCondition,
    pub condition2: SolvabilityCondition,
    pub condition3: DisplacementCondition,
    pub condition4: LeaderCondition,
}

impl CriterionReport {
    pub fn is_stable(&self) -> bool {
        self.overall == Verdict::Stable
    }

    /// Condition-2 entry of follower `i`.
    pub fn solvability(&self, i: usize) -> Option<&SolvabilityEntry> {
        self.condition2.entries.iter().find(|e| e.node == i)
    }

    pub fn displacement(&self, from: usize, to: usize) -> Option<&DisplacementEntry> {
        self.condition3.entries.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable table listing every condition.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "verdict: {}", self.overall);
        let _ = writeln!(out, "corollary: {}", self.applicable_corollary);
        let _ = writeln!(
            out,
            "reference leader: {}  leaders: {}  scale: {:.6e}",
            self.reference_leader + 1,
            self.leader_count,
            self.scale
        );

        let _ = writeln!(out, "\n[1] stabilizability of (A_i, B_i): {}", self.condition1.status);
        let _ = writeln!(out, "  {:>6}  {:>13}  witness", "node", "stabilizable");
        for e in &self.condition1.entries {
            let w = e.witness.map_or("-".to_string(), |w| w.to_string());
            let _ = writeln!(out, "  {:>6}  {:>13}  {}", e.node + 1, e.stabilizable, w);
        }

        let _ = writeln!(out, "\n[2] gain and offset equations: {}", self.condition2.status);
        let _ = writeln!(
            out,
            "  {:>6}  {:>12}  {:>12}  {:>6}  N_i / k~_i",
            "node", "res(N)", "res(k~)", "pass"
        );
        for e in &self.condition2.entries {
            let _ = writeln!(
                out,
                "  {:>6}  {:>12.3e}  {:>12.3e}  {:>6}  {} / {}",
                e.node + 1,
                e.gain.relative_residual,
                e.offset.relative_residual,
                e.pass,
                fmt_matrix(&e.gain.solution),
                fmt_matrix(&e.offset.solution.transpose()),
            );
        }

        let _ = writeln!(out, "\n[3] displacement consistency: {}", self.condition3.status);
        let _ = writeln!(out, "  {:>8}  {:>12}  {:>6}  defect", "edge", "|defect|", "pass");
        for e in &self.condition3.entries {
            let _ = writeln!(
                out,
                "  {:>8}  {:>12.3e}  {:>6}  {}",
                format!("({},{})", e.from + 1, e.to + 1),
                e.defect_norm,
                e.pass,
                fmt_vector(&e.defect)
            );
        }

        let _ = writeln!(
            out,
            "\n[4] leader matrices: {}{}",
            self.condition4.status,
            if self.condition4.binding { "" } else { " (non-binding, single leader)" }
        );
        for e in &self.condition4.leader_defects {
            let _ = writeln!(out, "  leader {:>3}  |A_i - A_1| = {:.3e}  pass {}", e.node + 1, e.defect_norm, e.pass);
        }
        let h = &self.condition4.reference_hurwitz;
        let _ = writeln!(
            out,
            "  A_1 spectral abscissa {:.6}  hurwitz {}",
            h.spectral_abscissa, h.is_hurwitz
        );
        out
    }
}

pub(crate) fn fmt_vector(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) fn fmt_matrix(m: &DMatrix<f64>) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let parts: Vec<String> = r.iter().map(|x| format!("{x:.6}")).collect();
            format!("[{}]", parts.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// `MultiLeader` with more than one leader, `InTree` with one leader and a
/// single parent per follower, otherwise `None`.
pub fn classify(_spec: &FormationSpec, decomp: &LevelDecomposition) -> Corollary {
    if decomp.l0() > 1 {
        Corollary::MultiLeader
    } else if decomp.is_in_tree() {
        Corollary::InTree
    } else {
        Corollary::None
    }
}

/// `1 + ‖A_1‖_F + max ‖d_ij‖`.
pub fn defect_scale(spec: &FormationSpec, decomp: &LevelDecomposition) -> f64 {
    let a1 = &spec.agents[decomp.reference_leader()].a;
    let dmax = spec.edges.iter().map(|e| e.d.norm()).fold(0.0, f64::max);
    1.0 + a1.norm() + dmax
}

/// Evaluates all four conditions for every follower, edge and leader.
pub fn check(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    tol: &Tolerances,
) -> Result<CriterionReport, NumericsError> {
    let corollary = classify(spec, decomp);
    let reference = decomp.reference_leader();
    let a1 = &spec.agents[reference].a;
    let scale = defect_scale(spec, decomp);
    let equality_tol = tol.solve * scale;

    let mut followers: Vec<usize> = decomp.followers().collect();
    followers.sort_unstable();

    let mut c1 = Vec::with_capacity(followers.len());
    let mut c2 = Vec::with_capacity(followers.len());
    for &i in &followers {
        let agent = &spec.agents[i];
        let r = is_stabilizable(&agent.a, &agent.b, tol)?;
        c1.push(StabilizabilityEntry {
            node: i,
            stabilizable: r.stabilizable,
            witness: r.witness,
            tested: r.tested,
        });

        let gain = solve_matrix_equation(&agent.b, &(a1 - &agent.a), tol);
        let rhs = &agent.a * &decomp.cumulative_offset[i];
        let offset = solve_matrix_equation(&agent.b, &DMatrix::from_column_slice(spec.n, 1, rhs.as_slice()), tol);
        c2.push(SolvabilityEntry {
            node: i,
            pass: gain.solvable && offset.solvable,
            gain,
            offset,
        });
    }

    let mut edges: Vec<_> = spec.edges.iter().collect();
    edges.sort_by_key(|e| (e.from, e.to));
    let c3: Vec<DisplacementEntry> = edges
        .iter()
        .map(|e| {
            let expected = &decomp.cumulative_offset[e.from] - &decomp.cumulative_offset[e.to];
            let defect = &e.d - &expected;
            let defect_norm = defect.norm();
            DisplacementEntry {
                from: e.from,
                to: e.to,
                expected,
                defect,
                defect_norm,
                pass: defect_norm <= equality_tol,
            }
        })
        .collect();

    let leader_defects: Vec<LeaderDefect> = decomp
        .leaders
        .iter()
        .map(|&i| {
            let defect_norm = (&spec.agents[i].a - a1).norm();
            LeaderDefect {
                node: i,
                defect_norm,
                pass: defect_norm <= equality_tol,
            }
        })
        .collect();
    let reference_hurwitz = is_hurwitz_with(a1, tol)?;
    let binding = decomp.l0() > 1;

    let status1 = ConditionStatus::from_bool(c1.iter().all(|e| e.stabilizable));
    let status2 = ConditionStatus::from_bool(c2.iter().all(|e| e.pass));
    let status3 = if corollary == Corollary::InTree {
        ConditionStatus::Vacuous
    } else {
        ConditionStatus::from_bool(c3.iter().all(|e| e.pass))
    };
    let status4 = if binding {
        ConditionStatus::from_bool(reference_hurwitz.is_hurwitz && leader_defects.iter().all(|e| e.pass))
    } else {
        ConditionStatus::Informational
    };
    let status1 = if corollary == Corollary::MultiLeader && status2 == ConditionStatus::Pass && status4 == ConditionStatus::Pass {
        ConditionStatus::Implied
    } else {
        status1
    };

    let stable = [status1, status2, status3, status4].iter().all(|s| s.is_satisfied());
    Ok(CriterionReport {
        overall: if stable { Verdict::Stable } else { Verdict::Unstable },
        applicable_corollary: corollary,
        reference_leader: reference,
        leader_count: decomp.l0(),
        scale,
        condition1: StabilizabilityCondition { status: status1, entries: c1 },
        condition2: SolvabilityCondition { status: status2, entries: c2 },
        condition3: DisplacementCondition { status: status3, entries: c3 },
        condition4: LeaderCondition {
            status: status4,
            binding,
            leader_defects,
            reference_hurwitz,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("controller dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FollowerHurwitz {
    #[serde(with = "serde_util::one_based")]
    pub node: usize,
    /// Spectral abscissa of `A_i + B_i S_i`.
    pub spectral_abscissa: f64,
    pub is_hurwitz: bool,
}

/// Closed-loop consistency of a controller: all agents must share one
/// closed-loop matrix `M_i` and one offset term `m_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerVerification {
    /// `max ‖M_i − M_j‖_F` over edges.
    pub max_gain_defect: f64,
    /// `max ‖m_i − m_j‖` over edges.
    pub max_offset_defect: f64,
    pub tolerance: f64,
    pub followers: Vec<FollowerHurwitz>,
    pub pass: bool,
}

/// Per-agent `M_i = A_i + B_i (S_i + Σ K_is)` and
/// `m_i = B_i (k_i − S_i D_i − Σ K_is D_s) − A_i D_i`; leaders use zero gains.
pub fn closed_loop_terms(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
) -> (Vec<DMatrix<f64>>, Vec<DVector<f64>>) {
    let mut big_m = Vec::with_capacity(spec.len());
    let mut small_m = Vec::with_capacity(spec.len());
    for (i, agent) in spec.agents.iter().enumerate() {
        let d_i = &decomp.cumulative_offset[i];
        match ctrl.follower(i) {
            Some(f) => {
                let total = f.total_gain();
                big_m.push(&agent.a + &agent.b * total);
                let mut inner = &f.offset - &f.s * d_i;
                for g in &f.parent_gains {
                    inner -= &g.gain * &decomp.cumulative_offset[g.parent];
                }
                small_m.push(&agent.b * inner - &agent.a * d_i);
            }
            None => {
                big_m.push(agent.a.clone());
                small_m.push(-(&agent.a * d_i));
            }
        }
    }
    (big_m, small_m)
}

pub(crate) fn check_controller_shape(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
) -> Result<(), VerifyError> {
    let mismatch = |msg: String| Err(VerifyError::DimensionMismatch(msg));
    if ctrl.n != spec.n || ctrl.m != spec.m {
        return mismatch(format!(
            "controller is for n = {}, m = {}; formation has n = {}, m = {}",
            ctrl.n, ctrl.m, spec.n, spec.m
        ));
    }
    for f in &ctrl.followers {
        if f.node >= spec.len() || decomp.is_leader(f.node) {
            return mismatch(format!("node {} is not a follower", f.node + 1));
        }
        if f.s.shape() != (spec.m, spec.n) || f.offset.len() != spec.m {
            return mismatch(format!("follower {} has wrongly shaped S or k", f.node + 1));
        }
        for g in &f.parent_gains {
            if !decomp.parents[f.node].contains(&g.parent) {
                return mismatch(format!("node {} does not follow {}", f.node + 1, g.parent + 1));
            }
            if g.gain.shape() != (spec.m, spec.n) {
                return mismatch(format!("gain K_({},{}) is wrongly shaped", f.node + 1, g.parent + 1));
            }
        }
    }
    Ok(())
}

/// Checks a controller against the closed-loop equalities that internal
/// stability forces, plus Hurwitz stability of every `A_i + B_i S_i`.
/// Followers missing from the controller are treated as uncontrolled.
pub fn verify_controller(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
    tol: &Tolerances,
) -> Result<ControllerVerification, VerifyError> {
    check_controller_shape(spec, decomp, ctrl)?;
    let (big_m, small_m) = closed_loop_terms(spec, decomp, ctrl);
    let mut max_gain_defect: f64 = 0.0;
    let mut max_offset_defect: f64 = 0.0;
    for e in &spec.edges {
        max_gain_defect = max_gain_defect.max((&big_m[e.from] - &big_m[e.to]).norm());
        max_offset_defect = max_offset_defect.max((&small_m[e.from] - &small_m[e.to]).norm());
    }

    let mut followers = Vec::new();
    let mut ids: Vec<usize> = decomp.followers().collect();
    ids.sort_unstable();
    for i in ids {
        let agent = &spec.agents[i];
        let closed = match ctrl.follower(i) {
            Some(f) => &agent.a + &agent.b * &f.s,
            None => agent.a.clone(),
        };
        let h = is_hurwitz_with(&closed, tol)?;
        followers.push(FollowerHurwitz {
            node: i,
            spectral_abscissa: h.spectral_abscissa,
            is_hurwitz: h.is_hurwitz,
        });
    }

    let tolerance = tol.solve * defect_scale(spec, decomp);
    let pass = max_gain_defect <= tolerance
        && max_offset_defect <= tolerance
        && followers.iter().all(|f| f.is_hurwitz);
    Ok(ControllerVerification {
        max_gain_defect,
        max_offset_defect,
        tolerance,
        followers,
        pass,
    })
}
