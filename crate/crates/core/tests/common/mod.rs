//! Shared generators for integration tests.
#![allow(dead_code)]

use formation_core::model::{AgentDynamics, Edge, FormationSpec};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Shifting by `‖M‖_F + 0.5` moves every eigenvalue of `M` left of `−0.5`.
pub fn hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = gaussian(rng, n, n);
    let shift = m.norm() + 0.5;
    m - DMatrix::identity(n, n) * shift
}

/// Random weakly connected DAG on `len` nodes, `leaders` of which have no
/// parents. Nodes are numbered topologically before `shuffle` is applied.
/// Returns the parent lists.
pub fn random_dag(rng: &mut ChaCha8Rng, len: usize, leaders: usize, shuffle: bool) -> (Vec<Vec<usize>>, Vec<usize>) {
    assert!(leaders >= 1 && leaders < len || len == 1 && leaders == 1);
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (i, ps) in parents.iter_mut().enumerate().skip(leaders) {
        if i == leaders {
            // The first follower ties every leader into one component.
            *ps = (0..leaders).collect();
            continue;
        }
        *ps = (0..i).filter(|_| rng.random_bool(0.35)).collect();
        if ps.is_empty() {
            ps.push(rng.random_range(0..i));
        }
    }
    let mut perm: Vec<usize> = (0..len).collect();
    if shuffle {
        perm.shuffle(rng);
    }
    let mut out = vec![Vec::new(); len];
    for (i, ps) in parents.into_iter().enumerate() {
        let mut mapped: Vec<usize> = ps.into_iter().map(|j| perm[j]).collect();
        mapped.sort_unstable();
        out[perm[i]] = mapped;
    }
    (out, perm)
}

/// A stable instance by construction: every leader shares a Hurwitz `A_1`,
/// followers get `A_i = A_1 − B_i N_i`, offsets come from
/// `D_i = A_i⁻¹ B_i k̃_i` and displacements are `d_ij = D_i − D_j`.
pub struct Feasible {
    pub spec: FormationSpec,
    pub offsets: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
}

pub fn feasible_instance(rng: &mut ChaCha8Rng, max_len: usize, max_n: usize, max_m: usize) -> Feasible {
    let len = rng.random_range(2..=max_len);
    let leaders = rng.random_range(1..=(len - 1).min(2));
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let (parents, _) = random_dag(rng, len, leaders, true);
    loop {
        if let Some(f) = try_feasible(rng, &parents, n, m) {
            return f;
        }
    }
}

fn try_feasible(rng: &mut ChaCha8Rng, parents: &[Vec<usize>], n: usize, m: usize) -> Option<Feasible> {
    let len = parents.len();
    let a1 = hurwitz(rng, n);
    let mut agents = Vec::with_capacity(len);
    let mut offsets = Vec::with_capacity(len);
    let mut gains = Vec::with_capacity(len);
    for ps in parents {
        let b = gaussian(rng, n, m);
        if ps.is_empty() {
            agents.push(AgentDynamics { a: a1.clone(), b });
            offsets.push(DVector::zeros(n));
            gains.push(DMatrix::zeros(m, n));
            continue;
        }
        let gain = gaussian(rng, m, n);
        let a = &a1 - &b * &gain;
        let k_tilde = gaussian_vector(rng, m);
        let d = a.clone().lu().solve(&(&b * k_tilde))?;
        if !d.iter().all(|v| v.is_finite()) || d.norm() > 1e3 {
            return None;
        }
        agents.push(AgentDynamics { a, b });
        offsets.push(d);
        gains.push(gain);
    }
    let mut edges = Vec::new();
    for (i, ps) in parents.iter().enumerate() {
        for &j in ps {
            edges.push(Edge {
                from: i,
                to: j,
                d: &offsets[i] - &offsets[j],
            });
        }
    }
    Some(Feasible {
        spec: FormationSpec { n, m, agents, edges },
        offsets,
        gains,
    })
}

/// Structure only: `A = −I`, `B = I`, distinct constant displacements.
pub fn structural_instance(parents: &[Vec<usize>], n: usize) -> FormationSpec {
    let agents = parents
        .iter()
        .map(|_| AgentDynamics {
            a: -DMatrix::identity(n, n),
            b: DMatrix::identity(n, n),
        })
        .collect();
    let edges = parents
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| ps.iter().map(move |&j| (i, j)))
        .enumerate()
        .map(|(k, (i, j))| Edge {
            from: i,
            to: j,
            d: DVector::from_element(n, k as f64 + 1.0),
        })
        .collect();
    FormationSpec { n, m: n, agents, edges }
}

/// Checks every structural invariant of a level decomposition against the
/// definitions, computed here from scratch.
pub fn check_levels(
    spec: &FormationSpec,
    d: &formation_core::LevelDecomposition,
) -> Result<(), String> {
    let len = spec.len();
    let parents = spec.parents();
    // Longest path to a leader, by memoized recursion.
    fn depth(i: usize, parents: &[Vec<usize>], memo: &mut [Option<usize>]) -> usize {
        if let Some(v) = memo[i] {
            return v;
        }
        let v = parents[i].iter().map(|&j| depth(j, parents, memo) + 1).max().unwrap_or(0);
        memo[i] = Some(v);
        v
    }
    let mut memo = vec![None; len];
    for i in 0..len {
        let want = depth(i, &parents, &mut memo);
        if d.order[i] != want {
            return Err(format!("order of {i} is {}, longest path {want}", d.order[i]));
        }
    }
    for e in &spec.edges {
        if d.order[e.from] <= d.order[e.to] {
            return Err(format!("edge ({},{}) does not descend", e.from, e.to));
        }
    }
    let mut seen = vec![false; len];
    let mut prev: Option<usize> = None;
    for &v in &d.renumbering {
        if std::mem::replace(&mut seen[v], true) {
            return Err(format!("{v} renumbered twice"));
        }
        if let Some(u) = prev {
            if (d.order[u], u) >= (d.order[v], v) {
                return Err("renumbering not sorted by (level, id)".into());
            }
        }
        prev = Some(v);
    }
    if seen.iter().any(|s| !s) {
        return Err("renumbering misses a node".into());
    }
    for i in 0..len {
        if d.rank[d.renumbering[i]] != i {
            return Err("rank is not the inverse of renumbering".into());
        }
        if parents[i].is_empty() {
            if !d.leaders.contains(&i) || d.parent[i] != i || d.leader_reach[i] != i {
                return Err(format!("leader {i} misdescribed"));
            }
            if d.cumulative_offset[i].norm() != 0.0 {
                return Err(format!("leader {i} has nonzero offset"));
            }
            continue;
        }
        let best = *parents[i].iter().max_by_key(|&&j| d.rank[j]).unwrap();
        if d.parent[i] != best {
            return Err(format!("p({i}) = {}, expected {best}", d.parent[i]));
        }
        let mut v = i;
        let mut offset = DVector::zeros(spec.n);
        while !parents[v].is_empty() {
            offset += &spec.edge(v, d.parent[v]).unwrap().d;
            v = d.parent[v];
        }
        if d.leader_reach[i] != v {
            return Err(format!("l({i}) = {}, expected {v}", d.leader_reach[i]));
        }
        if (&offset - &d.cumulative_offset[i]).norm() > 1e-12 * (1.0 + offset.norm()) {
            return Err(format!("D_{i} mismatch"));
        }
    }
    let by_level: usize = d.levels.iter().map(Vec::len).sum();
    if by_level != len || d.levels.iter().enumerate().any(|(k, lv)| lv.iter().any(|&v| d.order[v] != k)) {
        return Err("levels disagree with the order function".into());
    }
    Ok(())
}
