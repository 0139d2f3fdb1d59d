//! Affine follower controllers `u_i = S_i x_i + Σ_s K_is x_s + k_i`.
//!
//! Every stabilizing controller arises from a Hurwitz gain `S_i`, a solution
//! `N_i` of the gain equation, a solution `k̃_i` of the offset equation and a
//! split of `N_i − S_i` over the parents of `i`.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Tolerances;
use crate::criterion::{verify_controller, CriterionReport, VerifyError};
use crate::levels::LevelDecomposition;
use crate::model::FormationSpec;
use crate::numerics::{is_hurwitz_with, stabilize, NumericsError};
use crate::serde_util;

/// Gain `K_is` applied to parent `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParentGain {
    #[serde(with = "serde_util::one_based")]
    pub parent: usize,
    #[serde(with = "serde_util::matrix")]
    pub gain: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerController {
    #[serde(with = "serde_util::one_based")]
    pub node: usize,
    #[serde(rename = "S", with = "serde_util::matrix")]
    pub s: DMatrix<f64>,
    /// `K_is`; parents without an entry get a zero gain.
    #[serde(rename = "K")]
    pub parent_gains: Vec<ParentGain>,
    #[serde(rename = "k", with = "serde_util::vector")]
    pub offset: DVector<f64>,
    /// `N_i = S_i + Σ K_is`.
    #[serde(rename = "N", with = "serde_util::matrix")]
    pub aggregate_gain: DMatrix<f64>,
    /// `k̃_i = k_i − S_i D_i − Σ K_is D_s`.
    #[serde(rename = "k_tilde", with = "serde_util::vector")]
    pub base_offset: DVector<f64>,
}

impl FollowerController {
    /// `S_i + Σ K_is`, summed in parent order.
    pub fn total_gain(&self) -> DMatrix<f64> {
        let mut total = self.s.clone();
        for g in &self.parent_gains {
            total += &g.gain;
        }
        total
    }

    /// Agents whose state this controller reads (itself first).
    pub fn referenced_nodes(&self) -> Vec<usize> {
        let mut out = vec![self.node];
        out.extend(self.parent_gains.iter().map(|g| g.parent));
        out
    }

    /// Input for a full state vector indexed by node.
    pub fn input(&self, states: &[DVector<f64>]) -> DVector<f64> {
        let mut u = &self.s * &states[self.node] + &self.offset;
        for g in &self.parent_gains {
            u += &g.gain * &states[g.parent];
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSet {
    pub n: usize,
    pub m: usize,
    /// How the controller was produced, e.g. `parent_only`.
    pub strategy: String,
    /// One entry per follower, ascending node id.
    pub followers: Vec<FollowerController>,
}

#[derive(Debug, Error)]
pub enum ControllerLoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed controller file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ControllerSet {
    pub fn follower(&self, i: usize) -> Option<&FollowerController> {
        self.followers.iter().find(|f| f.node == i)
    }

    /// All gains and offsets zero; every parent listed.
    pub fn zero(spec: &FormationSpec, decomp: &LevelDecomposition) -> Self {
        let (n, m) = (spec.n, spec.m);
        let mut ids: Vec<usize> = decomp.followers().collect();
        ids.sort_unstable();
        let followers = ids
            .into_iter()
            .map(|i| FollowerController {
                node: i,
                s: DMatrix::zeros(m, n),
                parent_gains: decomp.parents[i]
                    .iter()
                    .map(|&p| ParentGain {
                        parent: p,
                        gain: DMatrix::zeros(m, n),
                    })
                    .collect(),
                offset: DVector::zeros(m),
                aggregate_gain: DMatrix::zeros(m, n),
                base_offset: DVector::zeros(m),
            })
            .collect();
        ControllerSet {
            n,
            m,
            strategy: "zero".to_string(),
            followers,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("controller serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ControllerLoadError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ControllerLoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| ControllerLoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// How `N_i − S_i` is divided among the parents of a follower.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitStrategy {
    /// Everything on the designated parent `p(i)`.
    ParentOnly,
    /// Equal shares over `L_i`.
    Uniform,
    /// Per-follower weights over its parents, summing to one. Followers
    /// without an entry use `ParentOnly`.
    Custom(BTreeMap<usize, BTreeMap<usize, f64>>),
}

impl SplitStrategy {
    pub fn tag(&self) -> &'static str {
        match self {
            SplitStrategy::ParentOnly => "parent_only",
            SplitStrategy::Uniform => "uniform",
            SplitStrategy::Custom(_) => "custom",
        }
    }

    fn weights(&self, decomp: &LevelDecomposition, i: usize) -> Result<Vec<(usize, f64)>, SynthesisError> {
        let parents = &decomp.parents[i];
        match self {
            SplitStrategy::ParentOnly => Ok(vec![(decomp.parent[i], 1.0)]),
            SplitStrategy::Uniform => {
                let w = 1.0 / parents.len() as f64;
                Ok(parents.iter().map(|&p| (p, w)).collect())
            }
            SplitStrategy::Custom(map) => match map.get(&i) {
                None => Ok(vec![(decomp.parent[i], 1.0)]),
                Some(ws) => {
                    let invalid = |reason: String| SynthesisError::InvalidWeights { node: i, reason };
                    if let Some(s) = ws.keys().find(|s| !parents.contains(s)) {
                        return Err(invalid(format!("{} is not a parent", s + 1)));
                    }
                    if ws.values().any(|w| !w.is_finite()) {
                        return Err(invalid("non-finite weight".into()));
                    }
                    let total: f64 = ws.values().sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(invalid(format!("weights sum to {total}")));
                    }
                    Ok(ws.iter().map(|(&s, &w)| (s, w)).collect())
                }
            },
        }
    }
}

impl FromStr for SplitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parent-only" | "parent_only" => Ok(SplitStrategy::ParentOnly),
            "uniform" => Ok(SplitStrategy::Uniform),
            other => Err(format!("unknown split strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("the formation is not internally stable; no controller exists")]
    NotStable,
    #[error("leader-independent control needs a Hurwitz reference leader matrix")]
    LeaderNotHurwitz,
    #[error("invalid split weights for node {}: {reason}", node + 1)]
    InvalidWeights { node: usize, reason: String },
    #[error("node {} is not a follower of this controller", node + 1)]
    NotAFollower { node: usize },
    #[error("state of node {} is missing", node + 1)]
    MissingState { node: usize },
    #[error("synthesized controller failed verification: {0}")]
    Verification(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

impl From<VerifyError> for SynthesisError {
    fn from(e: VerifyError) -> Self {
        SynthesisError::Verification(e.to_string())
    }
}

/// Rounds `S` to a dyadic grid 40 bits below the magnitude of `S` and `N`.
/// On that grid `N − S` and `S + (N − S)` are exact for the small integer
/// data typical of hand-made instances, so the closed loop of every follower
/// reproduces `A_1` without rounding. The perturbation (relative `2⁻⁴⁰`) is
/// far below every tolerance.
fn quantize_gain(s: &DMatrix<f64>, aggregate: &DMatrix<f64>) -> DMatrix<f64> {
    let mag = s.amax().max(aggregate.amax());
    if mag == 0.0 || !mag.is_finite() {
        return s.clone();
    }
    let q = 2f64.powi(mag.log2().floor() as i32 - 40);
    s.map(|x| (x / q).round() * q)
}

/// Stabilizing gain for one follower, quantized when that keeps it stabilizing.
fn follower_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    aggregate: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<DMatrix<f64>, SynthesisError> {
    let s = stabilize(a, b, tol)?;
    let q = quantize_gain(&s, aggregate);
    if is_hurwitz_with(&(a + b * &q), tol)?.is_hurwitz {
        Ok(q)
    } else {
        Ok(s)
    }
}

/// Assembles `K_is` and `k_i` from `S_i`, `N_i`, `k̃_i` and split weights.
/// The last weighted parent absorbs the remainder so `Σ K_is = N_i − S_i`.
fn assemble(
    decomp: &LevelDecomposition,
    i: usize,
    s: DMatrix<f64>,
    aggregate: DMatrix<f64>,
    base_offset: DVector<f64>,
    weights: &[(usize, f64)],
) -> FollowerController {
    let residual = &aggregate - &s;
    let mut parent_gains = Vec::with_capacity(weights.len());
    let mut assigned = DMatrix::zeros(s.nrows(), s.ncols());
    for (idx, &(p, w)) in weights.iter().enumerate() {
        let gain = if idx + 1 == weights.len() {
            &residual - &assigned
        } else {
            &residual * w
        };
        assigned += &gain;
        parent_gains.push(ParentGain { parent: p, gain });
    }
    let mut offset = &base_offset + &s * &decomp.cumulative_offset[i];
    for g in &parent_gains {
        offset += &g.gain * &decomp.cumulative_offset[g.parent];
    }
    FollowerController {
        node: i,
        s,
        parent_gains,
        offset,
        aggregate_gain: aggregate,
        base_offset,
    }
}

fn sorted_followers(decomp: &LevelDecomposition) -> Vec<usize> {
    let mut ids: Vec<usize> = decomp.followers().collect();
    ids.sort_unstable();
    ids
}

fn solutions(report: &CriterionReport, i: usize) -> (DMatrix<f64>, DVector<f64>) {
    let e = report.solvability(i).expect("report covers every follower");
    (e.aggregate_gain().clone(), e.offset_vector())
}

fn finish(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    strategy: &str,
    followers: Vec<FollowerController>,
    tol: &Tolerances,
) -> Result<ControllerSet, SynthesisError> {
    let ctrl = ControllerSet {
        n: spec.n,
        m: spec.m,
        strategy: strategy.to_string(),
        followers,
    };
    let v = verify_controller(spec, decomp, &ctrl, tol)?;
    if !v.pass {
        return Err(SynthesisError::Verification(format!(
            "gain defect {:e}, offset defect {:e}, tolerance {:e}",
            v.max_gain_defect, v.max_offset_defect, v.tolerance
        )));
    }
    Ok(ctrl)
}

/// Default controller: Bass gain for `S_i`, minimum-norm `N_i`, `k̃_i`, and
/// the requested split.
pub fn synthesize(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    report: &CriterionReport,
    strategy: &SplitStrategy,
    tol: &Tolerances,
) -> Result<ControllerSet, SynthesisError> {
    if !report.is_stable() {
        return Err(SynthesisError::NotStable);
    }
    let mut followers = Vec::new();
    for i in sorted_followers(decomp) {
        let agent = &spec.agents[i];
        let (aggregate, base_offset) = solutions(report, i);
        let s = follower_gain(&agent.a, &agent.b, &aggregate, tol)?;
        let weights = strategy.weights(decomp, i)?;
        followers.push(assemble(decomp, i, s, aggregate, base_offset, &weights));
    }
    finish(spec, decomp, strategy.tag(), followers, tol)
}

/// Controller that ignores every parent: `S_i = N_i`, `K_is = 0`,
/// `u_i = N_i (x_i + D_i) + k̃_i`. Requires `A_1` Hurwitz, which the
/// criterion enforces whenever there is more than one leader.
pub fn synthesize_leader_independent(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    report: &CriterionReport,
    tol: &Tolerances,
) -> Result<ControllerSet, SynthesisError> {
    if !report.is_stable() {
        return Err(SynthesisError::NotStable);
    }
    if !report.condition4.reference_hurwitz.is_hurwitz {
        return Err(SynthesisError::LeaderNotHurwitz);
    }
    let followers = sorted_followers(decomp)
        .into_iter()
        .map(|i| {
            let (aggregate, base_offset) = solutions(report, i);
            let offset = &aggregate * &decomp.cumulative_offset[i] + &base_offset;
            FollowerController {
                node: i,
                s: aggregate.clone(),
                parent_gains: Vec::new(),
                offset,
                aggregate_gain: aggregate,
                base_offset,
            }
        })
        .collect();
    finish(spec, decomp, "leader_independent", followers, tol)
}

/// `S_i x_i + Σ K_is x_s + k_i` for follower `i`.
pub fn control_input(
    ctrl: &ControllerSet,
    i: usize,
    states: &BTreeMap<usize, DVector<f64>>,
) -> Result<DVector<f64>, SynthesisError> {
    let f = ctrl.follower(i).ok_or(SynthesisError::NotAFollower { node: i })?;
    let state = |v: usize| states.get(&v).ok_or(SynthesisError::MissingState { node: v });
    let mut u = &f.s * state(i)? + &f.offset;
    for g in &f.parent_gains {
        u += &g.gain * state(g.parent)?;
    }
    Ok(u)
}

const PERTURBATION_TRIES: usize = 50;

fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Samples `count` members of the stabilizing family. The first is the
/// default parent-only controller; the others perturb `S_i` (rejecting
/// non-Hurwitz draws, falling back to the base gain after 50 tries), add
/// random kernel components to `N_i` and `k̃_i`, and split `N_i − S_i` with
/// random positive weights.
pub fn enumerate_family<R: Rng + ?Sized>(
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    report: &CriterionReport,
    count: usize,
    rng: &mut R,
    tol: &Tolerances,
) -> Result<Vec<ControllerSet>, SynthesisError> {
    if !report.is_stable() {
        return Err(SynthesisError::NotStable);
    }
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    out.push(synthesize(spec, decomp, report, &SplitStrategy::ParentOnly, tol)?);

    let base: Vec<(usize, DMatrix<f64>)> = out[0].followers.iter().map(|f| (f.node, f.s.clone())).collect();
    let (n, m) = (spec.n, spec.m);
    for _ in 1..count {
        let mut followers = Vec::new();
        for (i, s0) in &base {
            let i = *i;
            let agent = &spec.agents[i];
            let entry = report.solvability(i).expect("report covers every follower");

            let scale = 0.5 * (1.0 + s0.norm()) / ((m * n) as f64).sqrt();
            let mut s = s0.clone();
            for _ in 0..PERTURBATION_TRIES {
                let candidate = s0 + normal_matrix(rng, m, n) * scale;
                if is_hurwitz_with(&(&agent.a + &agent.b * &candidate), tol)?.is_hurwitz {
                    s = candidate;
                    break;
                }
            }

            let kernel = &entry.gain.kernel;
            let mut aggregate = entry.aggregate_gain().clone();
            let mut base_offset = entry.offset_vector();
            if kernel.ncols() > 0 {
                aggregate += kernel * normal_matrix(rng, kernel.ncols(), n);
                base_offset += kernel * normal_matrix(rng, kernel.ncols(), 1).column(0);
            }

            let parents = &decomp.parents[i];
            let raw: Vec<f64> = parents.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let weights: Vec<(usize, f64)> = parents.iter().zip(&raw).map(|(&p, &w)| (p, w / total)).collect();
            followers.push(assemble(decomp, i, s, aggregate, base_offset, &weights));
        }
        out.push(finish(spec, decomp, "family", followers, tol)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::criterion::check;
    use crate::levels::decompose;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(spec: &FormationSpec) -> (LevelDecomposition, CriterionReport) {
        let d = decompose(spec).unwrap();
        let r = check(spec, &d, &Tolerances::default()).unwrap();
        (d, r)
    }

    #[test]
    fn parent_only_on_chain() {
        let spec = corpus::example2();
        let (d, r) = setup(&spec);
        let c = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &Tolerances::default()).unwrap();
        assert_eq!(c.followers.len(), 2);
        for f in &c.followers {
            assert_eq!(f.parent_gains.len(), 1);
            assert_eq!(f.parent_gains[0].parent, d.parent[f.node]);
            // K = N − S and S + K = N hold exactly thanks to the dyadic gain.
            assert_eq!(f.total_gain(), f.aggregate_gain);
            let expected_k = &f.base_offset
                + &f.s * &d.cumulative_offset[f.node]
                + &f.parent_gains[0].gain * &d.cumulative_offset[f.parent_gains[0].parent];
            assert!((&f.offset - expected_k).norm() < 1e-12);
        }
    }

    #[test]
    fn ideal_states_give_offset_only() {
        let spec = corpus::example2();
        let (d, r) = setup(&spec);
        let c = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &Tolerances::default()).unwrap();
        let states: BTreeMap<usize, DVector<f64>> = (0..3).map(|i| (i, -d.cumulative_offset[i].clone())).collect();
        for (node, k) in [(1, -1.0), (2, -4.0)] {
            let u = control_input(&c, node, &states).unwrap();
            assert!((u[0] - k).abs() < 1e-9, "{u}");
        }
    }

    #[test]
    fn missing_state_and_zero_controller() {
        let spec = corpus::example2();
        let (d, _) = setup(&spec);
        let z = ControllerSet::zero(&spec, &d);
        let mut states = BTreeMap::new();
        states.insert(1, DVector::from_column_slice(&[3.0, -1.0]));
        assert_eq!(
            control_input(&z, 1, &states),
            Err(SynthesisError::MissingState { node: 0 })
        );
        states.insert(0, DVector::from_column_slice(&[5.0, 7.0]));
        assert_eq!(control_input(&z, 1, &states).unwrap(), DVector::zeros(1));
        assert_eq!(control_input(&z, 0, &states), Err(SynthesisError::NotAFollower { node: 0 }));
    }

    #[test]
    fn uniform_equals_parent_only_for_single_parent() {
        let spec = corpus::example2();
        let (d, r) = setup(&spec);
        let tol = Tolerances::default();
        let a = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &tol).unwrap();
        let b = synthesize(&spec, &d, &r, &SplitStrategy::Uniform, &tol).unwrap();
        assert_eq!(a.followers, b.followers);
    }

    #[test]
    fn uniform_split_on_triangle_sums_to_residual() {
        let spec = corpus::triangle();
        let (d, r) = setup(&spec);
        let c = synthesize(&spec, &d, &r, &SplitStrategy::Uniform, &Tolerances::default()).unwrap();
        let f = c.follower(2).unwrap();
        assert_eq!(f.parent_gains.len(), 2);
        assert!((f.total_gain() - &f.aggregate_gain).norm() < 1e-12);
    }

    #[test]
    fn custom_weights_are_validated() {
        let spec = corpus::triangle();
        let (d, r) = setup(&spec);
        let tol = Tolerances::default();
        let bad = SplitStrategy::Custom(BTreeMap::from([(2, BTreeMap::from([(0, 0.3), (1, 0.3)]))]));
        assert!(matches!(
            synthesize(&spec, &d, &r, &bad, &tol),
            Err(SynthesisError::InvalidWeights { node: 2, .. })
        ));
        let good = SplitStrategy::Custom(BTreeMap::from([(2, BTreeMap::from([(0, 0.25), (1, 0.75)]))]));
        let c = synthesize(&spec, &d, &r, &good, &tol).unwrap();
        let f = c.follower(2).unwrap();
        let k0 = &f.parent_gains[0].gain;
        let residual = &f.aggregate_gain - &f.s;
        assert!((k0 - residual * 0.25).norm() < 1e-12);
    }

    #[test]
    fn leader_independent_on_stable_multi_leader_instance() {
        // Two identical Hurwitz leaders with consistent displacements.
        let mut spec = corpus::remark5();
        spec.edges[1].d = spec.edges[0].d.clone();
        let (d, r) = setup(&spec);
        assert!(r.is_stable());
        let c = synthesize_leader_independent(&spec, &d, &r, &Tolerances::default()).unwrap();
        let f = c.follower(2).unwrap();
        assert!(f.parent_gains.is_empty());
        assert_eq!(f.s, f.aggregate_gain);
        let want = &f.aggregate_gain * &d.cumulative_offset[2] + &f.base_offset;
        assert_eq!(f.offset, want);
    }

    #[test]
    fn leader_independent_rejects_unstable_leader() {
        let spec = corpus::example2();
        let (d, r) = setup(&spec);
        assert_eq!(
            synthesize_leader_independent(&spec, &d, &r, &Tolerances::default()),
            Err(SynthesisError::LeaderNotHurwitz)
        );
    }

    #[test]
    fn unstable_instance_is_refused() {
        let spec = corpus::example1();
        let (d, r) = setup(&spec);
        assert_eq!(
            synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &Tolerances::default()),
            Err(SynthesisError::NotStable)
        );
    }

    #[test]
    fn family_members_verify_and_vary() {
        let spec = corpus::example2();
        let (d, r) = setup(&spec);
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fam = enumerate_family(&spec, &d, &r, 10, &mut rng, &tol).unwrap();
        assert_eq!(fam.len(), 10);
        for c in &fam {
            assert!(verify_controller(&spec, &d, c, &tol).unwrap().pass);
        }
        let mut distinct: Vec<&DMatrix<f64>> = Vec::new();
        for c in &fam {
            let s = &c.follower(1).unwrap().s;
            if !distinct.contains(&s) {
                distinct.push(s);
            }
        }
        assert!(distinct.len() >= 2);

        let single = enumerate_family(&spec, &d, &r, 1, &mut rng, &tol).unwrap();
        let default = synthesize(&spec, &d, &r, &SplitStrategy::ParentOnly, &tol).unwrap();
        assert_eq!(single, vec![default]);
    }

    #[test]
    fn family_is_deterministic_per_seed() {
        let spec = corpus::triangle();
        let (d, r) = setup(&spec);
        let tol = Tolerances::default();
        let a = enumerate_family(&spec, &d, &r, 4, &mut ChaCha8Rng::seed_from_u64(3), &tol).unwrap();
        let b = enumerate_family(&spec, &d, &r, 4, &mut ChaCha8Rng::seed_from_u64(3), &tol).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let spec = corpus::triangle();
        let (d, r) = setup(&spec);
        let c = synthesize(&spec, &d, &r, &SplitStrategy::Uniform, &Tolerances::default()).unwrap();
        let back = ControllerSet::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
