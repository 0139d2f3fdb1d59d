use nalgebra::DVector;
use thiserror::Error;

use super::SimulationTrace;
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::synthesis::ControllerSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentityError {
    #[error("nodes {} and {} are not two distinct parents of {}", j + 1, s + 1, i + 1)]
    NotSiblingParents { i: usize, j: usize, s: usize },
}

/// `Σ z_{a,p(a)}` along the designated-parent chain from `v` to its leader.
fn chain_sum(trace: &SimulationTrace, decomp: &LevelDecomposition, k: usize, v: usize, n: usize) -> DVector<f64> {
    let mut sum = DVector::zeros(n);
    let chain = decomp.parent_chain(v);
    for w in chain.windows(2) {
        let e = trace.edge_index(w[0], w[1]).expect("parent edge is in the trace");
        sum += &trace.errors[k][e];
    }
    sum
}

/// Norms of `z_is − z_ij − R_js(z) − (x_{l_j} − x_{l_s})` on the grid, where
/// `R_js` is the error sum along the parent chain of `j` minus that of `s`.
/// Vanishes identically when the displacements are consistent.
pub fn chain_residual(
    trace: &SimulationTrace,
    decomp: &LevelDecomposition,
    edge: (usize, usize),
    s: usize,
) -> Result<Vec<f64>, IdentityError> {
    let (i, j) = edge;
    let parents = &decomp.parents[i];
    if j == s || !parents.contains(&j) || !parents.contains(&s) {
        return Err(IdentityError::NotSiblingParents { i, j, s });
    }
    let eij = trace.edge_index(i, j).expect("edge in trace");
    let eis = trace.edge_index(i, s).expect("edge in trace");
    let n = trace.errors[0][eij].len();
    let (lj, ls) = (decomp.leader_reach[j], decomp.leader_reach[s]);
    Ok((0..trace.len())
        .map(|k| {
            let r = chain_sum(trace, decomp, k, j, n) - chain_sum(trace, decomp, k, s, n);
            let mut res = &trace.errors[k][eis] - &trace.errors[k][eij] - r;
            if lj != ls {
                res -= &trace.relative[k][lj] - &trace.relative[k][ls];
            }
            res.norm()
        })
        .collect())
}

/// Largest deviation between a three-point finite-difference derivative of
/// every edge error and the right-hand side
/// `A_1 z_ij − B_i Σ K_is z_is + B_j Σ K_jν z_jν − δ_j B_j u_j`,
/// over interior grid points away from input discontinuities.
pub fn error_dynamics_check(
    trace: &SimulationTrace,
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
) -> f64 {
    let a1 = &spec.agents[decomp.reference_leader()].a;
    let t = &trace.times;
    let coupling = |v: usize, k: usize| -> DVector<f64> {
        let mut acc = DVector::zeros(spec.n);
        if let Some(f) = ctrl.follower(v) {
            let mut ku = DVector::zeros(spec.m);
            for g in &f.parent_gains {
                let e = trace.edge_index(v, g.parent).expect("edge in trace");
                ku += &g.gain * &trace.errors[k][e];
            }
            acc = &spec.agents[v].b * ku;
        }
        acc
    };
    let mut worst: f64 = 0.0;
    for k in 1..trace.len().saturating_sub(1) {
        if trace.metadata.breakpoints.contains(&t[k]) {
            continue;
        }
        let (h1, h2) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        for (e, &(i, j)) in trace.edges.iter().enumerate() {
            let (zm, z0, zp) = (&trace.errors[k - 1][e], &trace.errors[k][e], &trace.errors[k + 1][e]);
            let fd = (zp * (h1 * h1) - zm * (h2 * h2) + z0 * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h1 + h2));
            let mut rhs = a1 * z0 - coupling(i, k) + coupling(j, k);
            if decomp.is_leader(j) {
                rhs -= &spec.agents[j].b * &trace.inputs[k][j];
            }
            worst = worst.max((fd - rhs).norm());
        }
    }
    worst
}
