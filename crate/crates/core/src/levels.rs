//! Level structure of an acyclic formation graph: levels `V_0..V_r`, the order
//! function, designated parents, cumulative displacements and leader reach.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DVector;
use serde::Serialize;

use crate::model::{FormationSpec, ValidationError, ValidationIssue};
use crate::serde_util;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDecomposition {
    /// `levels[k]` = `V_k`, ascending node index.
    #[serde(with = "serde_util::one_based_nested")]
    pub levels: Vec<Vec<usize>>,
    /// Order function `O(i)`.
    pub order: Vec<usize>,
    /// Designated parent `p(i)`; `p(i) = i` for leaders.
    #[serde(with = "serde_util::one_based_vec")]
    pub parent: Vec<usize>,
    /// `D_i`.
    #[serde(with = "serde_util::vectors")]
    pub cumulative_offset: Vec<DVector<f64>>,
    /// `l_i = p^{O(i)}(i)`.
    #[serde(with = "serde_util::one_based_vec")]
    pub leader_reach: Vec<usize>,
    /// Nodes listed level by level, ascending id inside a level.
    #[serde(with = "serde_util::one_based_vec")]
    pub renumbering: Vec<usize>,
    /// Inverse of `renumbering`: position of each node.
    #[serde(skip)]
    pub rank: Vec<usize>,
    /// `V_0`, ascending.
    #[serde(with = "serde_util::one_based_vec")]
    pub leaders: Vec<usize>,
    /// `L_i`, ascending.
    #[serde(with = "serde_util::one_based_nested")]
    pub parents: Vec<Vec<usize>>,
}

impl LevelDecomposition {
    pub fn l0(&self) -> usize {
        self.leaders.len()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn is_leader(&self, i: usize) -> bool {
        self.order[i] == 0
    }

    /// The reference leader whose matrix plays the role of `A_1`: the first
    /// node of the renumbering.
    pub fn reference_leader(&self) -> usize {
        self.renumbering[0]
    }

    /// Followers in renumbered order.
    pub fn followers(&self) -> impl Iterator<Item = usize> + '_ {
        self.renumbering.iter().copied().filter(|&i| self.order[i] > 0)
    }

    /// `i, p(i), p²(i), …, l_i`.
    pub fn parent_chain(&self, i: usize) -> Vec<usize> {
        let mut chain = vec![i];
        let mut v = i;
        while self.parent[v] != v {
            v = self.parent[v];
            chain.push(v);
        }
        chain
    }

    /// `D_i` by the explicit sum over the parent chain.
    pub fn cumulative_offset_explicit(&self, spec: &FormationSpec, i: usize) -> DVector<f64> {
        let chain = self.parent_chain(i);
        let mut sum = DVector::zeros(spec.n);
        for w in chain.windows(2) {
            sum += &spec.edge(w[0], w[1]).expect("parent edge exists").d;
        }
        sum
    }

    /// Single leader and every follower has exactly one parent.
    pub fn is_in_tree(&self) -> bool {
        self.l0() == 1 && self.followers().all(|i| self.parents[i].len() == 1)
    }
}

/// Computes the level structure. Expects a validated instance; a cycle still
/// surfaces as an error instead of a panic.
pub fn decompose(spec: &FormationSpec) -> Result<LevelDecomposition, ValidationError> {
    let l = spec.len();
    let parents = spec.parents();
    let mut children = vec![Vec::new(); l];
    for (i, ps) in parents.iter().enumerate() {
        for &j in ps {
            children[j].push(i);
        }
    }

    // Level of i is one more than the deepest parent, which is exactly the
    // first k with L_i ⊆ V_0 ∪ … ∪ V_{k-1}.
    let mut order = vec![usize::MAX; l];
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..l).filter(|&i| pending[i] == 0).collect();
    for &i in &queue {
        order[i] = 0;
    }
    while let Some(j) = queue.pop_front() {
        for &i in &children[j] {
            pending[i] -= 1;
            if pending[i] == 0 {
                order[i] = parents[i].iter().map(|&s| order[s]).max().unwrap() + 1;
                queue.push_back(i);
            }
        }
    }
    if let Some(stuck) = (0..l).find(|&i| order[i] == usize::MAX) {
        return Err(ValidationError {
            issues: vec![ValidationIssue::CycleDetected {
                cycle: vec![stuck, stuck],
            }],
        });
    }

    let depth = order.iter().copied().max().map_or(0, |r| r + 1);
    let mut levels = vec![Vec::new(); depth];
    for i in 0..l {
        levels[order[i]].push(i);
    }
    let renumbering: Vec<usize> = levels.iter().flatten().copied().collect();
    let mut rank = vec![0; l];
    for (pos, &i) in renumbering.iter().enumerate() {
        rank[i] = pos;
    }

    // p(i) = parent with the largest renumbered id; it always sits one level up.
    let mut parent = (0..l).collect::<Vec<_>>();
    let mut cumulative_offset = vec![DVector::zeros(spec.n); l];
    let mut leader_reach = (0..l).collect::<Vec<_>>();
    for &i in &renumbering {
        if let Some(&p) = parents[i].iter().max_by_key(|&&j| rank[j]) {
            parent[i] = p;
            let d = &spec.edge(i, p).expect("edge exists").d;
            cumulative_offset[i] = d + &cumulative_offset[p];
            leader_reach[i] = leader_reach[p];
        }
    }

    Ok(LevelDecomposition {
        leaders: levels.first().cloned().unwrap_or_default(),
        levels,
        order,
        parent,
        cumulative_offset,
        leader_reach,
        renumbering,
        rank,
        parents,
    })
}

/// Vertex with directed paths to two distinct leaders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiLeaderWitness {
    #[serde(with = "serde_util::one_based")]
    pub vertex: usize,
    #[serde(with = "serde_util::one_based")]
    pub leader_a: usize,
    #[serde(with = "serde_util::one_based")]
    pub leader_b: usize,
    #[serde(with = "serde_util::one_based_vec")]
    pub path_a: Vec<usize>,
    #[serde(with = "serde_util::one_based_vec")]
    pub path_b: Vec<usize>,
}

/// For a weakly connected DAG with more than one leader, finds a vertex from
/// which two distinct leaders are reachable, with explicit shortest paths.
/// The vertex is the first such node in the renumbering; the leaders are the
/// two smallest it reaches.
pub fn find_multi_leader_witness(
    decomp: &LevelDecomposition,
    spec: &FormationSpec,
) -> Option<MultiLeaderWitness> {
    if decomp.l0() < 2 {
        return None;
    }
    let l = spec.len();
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); l];
    for &i in &decomp.renumbering {
        if decomp.is_leader(i) {
            reach[i].insert(i);
        } else {
            let merged: BTreeSet<usize> = decomp.parents[i]
                .iter()
                .flat_map(|&s| reach[s].iter().copied())
                .collect();
            reach[i] = merged;
        }
        if reach[i].len() >= 2 {
            let mut it = reach[i].iter().copied();
            let (a, b) = (it.next().unwrap(), it.next().unwrap());
            return Some(MultiLeaderWitness {
                vertex: i,
                leader_a: a,
                leader_b: b,
                path_a: shortest_path(decomp, i, a),
                path_b: shortest_path(decomp, i, b),
            });
        }
    }
    None
}

fn shortest_path(decomp: &LevelDecomposition, from: usize, to: usize) -> Vec<usize> {
    let l = decomp.len();
    let mut pred = vec![usize::MAX; l];
    pred[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &w in &decomp.parents[v] {
            if pred[w] == usize::MAX {
                pred[w] = v;
                queue.push_back(w);
            }
        }
    }
    let mut path = vec![to];
    let mut v = to;
    while v != from {
        v = pred[v];
        path.push(v);
    }
    path.reverse();
    path
}
