//! Formation instances: agent dynamics, the follows-digraph and its edge
//! displacements, plus exhaustive validation.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::serde_util;

/// Linear agent dynamics `ẋ = A x + B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDynamics {
    #[serde(rename = "A", with = "serde_util::matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "serde_util::matrix")]
    pub b: DMatrix<f64>,
}

/// Edge `(from, to)`: agent `from` follows agent `to` and ideally keeps
/// `x_from + d = x_to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    #[serde(with = "serde_util::one_based")]
    pub from: usize,
    #[serde(with = "serde_util::one_based")]
    pub to: usize,
    #[serde(with = "serde_util::vector")]
    pub d: DVector<f64>,
}

/// A complete problem instance. This is also the on-disk JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormationSpec {
    pub n: usize,
    pub m: usize,
    pub agents: Vec<AgentDynamics>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed formation file: {0}")]
    Parse(#[from] serde_json::Error),
}

impl FormationSpec {
    pub fn from_json(text: &str) -> Result<Self, LoadError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("formation spec serializes")
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// `L_i` for every agent: the agents it follows, ascending.
    pub fn parents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for e in &self.edges {
            out[e.from].push(e.to);
        }
        for l in &mut out {
            l.sort_unstable();
            l.dedup();
        }
        out
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&Edge> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    /// Copy of the instance with node ids permuted: old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> FormationSpec {
        let mut agents = self.agents.clone();
        for (old, agent) in self.agents.iter().enumerate() {
            agents[perm[old]] = agent.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                from: perm[e.from],
                to: perm[e.to],
                d: e.d.clone(),
            })
            .collect();
        FormationSpec {
            n: self.n,
            m: self.m,
            agents,
            edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixRole {
    A,
    B,
    #[serde(rename = "d")]
    Displacement,
}

/// One violated instance invariant. Node ids are 0-based in memory and
/// 1-based when displayed or serialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum ValidationIssue {
    EmptyFormation,
    ZeroDimension { n: usize, m: usize },
    DimensionMismatch {
        /// Agent index, or the `from` node of an edge for displacements.
        #[serde(with = "serde_util::one_based")]
        agent: usize,
        matrix: MatrixRole,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    NonFinite {
        #[serde(with = "serde_util::one_based")]
        agent: usize,
        matrix: MatrixRole,
    },
    UnknownNode { edge: usize, node_id: usize },
    SelfLoop {
        #[serde(with = "serde_util::one_based")]
        node: usize,
    },
    DuplicateEdge {
        #[serde(with = "serde_util::one_based")]
        from: usize,
        #[serde(with = "serde_util::one_based")]
        to: usize,
    },
    CycleDetected {
        /// Closed walk `v_0 → v_1 → … → v_0` along edges.
        #[serde(with = "serde_util::one_based_vec")]
        cycle: Vec<usize>,
    },
    NotWeaklyConnected {
        #[serde(with = "serde_util::one_based_nested")]
        components: Vec<Vec<usize>>,
    },
}

fn ids(v: &[usize]) -> String {
    v.iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyFormation => write!(f, "formation has no agents"),
            Self::ZeroDimension { n, m } => write!(f, "dimensions must be positive (n = {n}, m = {m})"),
            Self::DimensionMismatch {
                agent,
                matrix,
                expected,
                actual,
            } => match matrix {
                MatrixRole::Displacement => write!(
                    f,
                    "displacement on an edge from node {}: expected length {}, got {}",
                    agent + 1,
                    expected.0,
                    actual.0
                ),
                _ => write!(
                    f,
                    "agent {}: {:?} is {}×{}, expected {}×{}",
                    agent + 1,
                    matrix,
                    actual.0,
                    actual.1,
                    expected.0,
                    expected.1
                ),
            },
            Self::NonFinite { agent, matrix } => {
                write!(f, "agent {}: {:?} has non-finite entries", agent + 1, matrix)
            }
            Self::UnknownNode { edge, node_id } => {
                write!(f, "edge #{}: node id {node_id} does not exist", edge + 1)
            }
            Self::SelfLoop { node } => write!(f, "self-loop at node {}", node + 1),
            Self::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge ({}, {})", from + 1, to + 1)
            }
            Self::CycleDetected { cycle } => write!(f, "cycle detected: {}", ids(cycle)),
            Self::NotWeaklyConnected { components } => {
                let parts: Vec<String> = components.iter().map(|c| format!("{{{}}}", ids(c))).collect();
                write!(f, "graph is not weakly connected; components {}", parts.join(" "))
            }
        }
    }
}

/// All violations found in an instance.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub struct ValidationError {
    pub issues: Vec<ValidationIssue>,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid formation ({} issue(s))", self.issues.len())?;
        for issue in &self.issues {
            write!(f, "\n  - {issue}")?;
        }
        Ok(())
    }
}

impl ValidationError {
    pub fn only_disconnected(&self) -> bool {
        self.issues
            .iter()
            .all(|i| matches!(i, ValidationIssue::NotWeaklyConnected { .. }))
    }
}

/// Checks every instance invariant and reports all violations at once.
pub fn validate(spec: FormationSpec) -> Result<FormationSpec, ValidationError> {
    let issues = collect_issues(&spec);
    if issues.is_empty() {
        Ok(spec)
    } else {
        Err(ValidationError { issues })
    }
}

fn collect_issues(spec: &FormationSpec) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let l = spec.len();
    if l == 0 {
        issues.push(ValidationIssue::EmptyFormation);
    }
    if spec.n == 0 || spec.m == 0 {
        issues.push(ValidationIssue::ZeroDimension { n: spec.n, m: spec.m });
    }
    for (i, agent) in spec.agents.iter().enumerate() {
        for (role, mat, expected) in [
            (MatrixRole::A, &agent.a, (spec.n, spec.n)),
            (MatrixRole::B, &agent.b, (spec.n, spec.m)),
        ] {
            let actual = mat.shape();
            if actual != expected {
                issues.push(ValidationIssue::DimensionMismatch {
                    agent: i,
                    matrix: role,
                    expected,
                    actual,
                });
            } else if mat.iter().any(|v| !v.is_finite()) {
                issues.push(ValidationIssue::NonFinite { agent: i, matrix: role });
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut adjacency = vec![Vec::new(); l];
    for (k, e) in spec.edges.iter().enumerate() {
        let mut ok = true;
        for node in [e.from, e.to] {
            if node >= l {
                issues.push(ValidationIssue::UnknownNode {
                    edge: k,
                    node_id: node + 1,
                });
                ok = false;
            }
        }
        if e.d.len() != spec.n {
            issues.push(ValidationIssue::DimensionMismatch {
                agent: e.from,
                matrix: MatrixRole::Displacement,
                expected: (spec.n, 1),
                actual: (e.d.len(), 1),
            });
        } else if e.d.iter().any(|v| !v.is_finite()) {
            issues.push(ValidationIssue::NonFinite {
                agent: e.from,
                matrix: MatrixRole::Displacement,
            });
        }
        if !ok {
            continue;
        }
        if e.from == e.to {
            issues.push(ValidationIssue::SelfLoop { node: e.from });
            continue;
        }
        if !seen.insert((e.from, e.to)) {
            issues.push(ValidationIssue::DuplicateEdge { from: e.from, to: e.to });
            continue;
        }
        adjacency[e.from].push(e.to);
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    if let Some(cycle) = find_cycle(&adjacency) {
        issues.push(ValidationIssue::CycleDetected { cycle });
    }
    let components = weak_components(&adjacency);
    if components.len() > 1 {
        issues.push(ValidationIssue::NotWeaklyConnected { components });
    }
    issues
}

/// Iterative DFS; returns a closed walk when a back edge is found.
fn find_cycle(adjacency: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let l = adjacency.len();
    let mut mark = vec![Mark::New; l];
    for root in 0..l {
        if mark[root] != Mark::New {
            continue;
        }
        let mut path = vec![root];
        let mut cursor = vec![0usize];
        mark[root] = Mark::Active;
        while let Some(&v) = path.last() {
            let c = cursor.last_mut().unwrap();
            if let Some(&w) = adjacency[v].get(*c) {
                *c += 1;
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::Active;
                        path.push(w);
                        cursor.push(0);
                    }
                    Mark::Active => {
                        let start = path.iter().position(|&u| u == w).unwrap();
                        let mut cycle = path[start..].to_vec();
                        cycle.push(w);
                        return Some(cycle);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[v] = Mark::Done;
                path.pop();
                cursor.pop();
            }
        }
    }
    None
}

/// Weak components, each sorted, ordered by smallest member.
pub(crate) fn weak_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let l = adjacency.len();
    let mut undirected = vec![Vec::new(); l];
    for (v, adj) in adjacency.iter().enumerate() {
        for &w in adj {
            undirected[v].push(w);
            undirected[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; l];
    let mut out = Vec::new();
    for root in 0..l {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![root];
        let mut stack = vec![root];
        comp[root] = id;
        while let Some(v) = stack.pop() {
            for &w in &undirected[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// A weak component extracted as its own instance. `nodes[k]` is the
/// original index of the component's node `k`.
#[derive(Debug, Clone)]
pub struct Component {
    pub nodes: Vec<usize>,
    pub spec: FormationSpec,
}

/// Splits an instance into weak components (internal stability of the whole
/// is equivalent to that of every component).
pub fn split_components(spec: &FormationSpec) -> Vec<Component> {
    let mut adjacency = vec![Vec::new(); spec.len()];
    for e in &spec.edges {
        if e.from < spec.len() && e.to < spec.len() {
            adjacency[e.from].push(e.to);
        }
    }
    weak_components(&adjacency)
        .into_iter()
        .map(|nodes| {
            let mut local = vec![usize::MAX; spec.len()];
            for (k, &v) in nodes.iter().enumerate() {
                local[v] = k;
            }
            let agents = nodes.iter().map(|&v| spec.agents[v].clone()).collect();
            let edges = spec
                .edges
                .iter()
                .filter(|e| e.from < spec.len() && local[e.from] != usize::MAX)
                .map(|e| Edge {
                    from: local[e.from],
                    to: local[e.to],
                    d: e.d.clone(),
                })
                .collect();
            Component {
                nodes,
                spec: FormationSpec {
                    n: spec.n,
                    m: spec.m,
                    agents,
                    edges,
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(n: usize, m: usize) -> AgentDynamics {
        AgentDynamics {
            a: -DMatrix::identity(n, n),
            b: DMatrix::zeros(n, m),
        }
    }

    fn spec(l: usize, edges: &[(usize, usize)]) -> FormationSpec {
        FormationSpec {
            n: 2,
            m: 1,
            agents: (0..l).map(|_| agent(2, 1)).collect(),
            edges: edges
                .iter()
                .map(|&(i, j)| Edge {
                    from: i - 1,
                    to: j - 1,
                    d: DVector::zeros(2),
                })
                .collect(),
        }
    }

    #[test]
    fn triangle_is_valid() {
        assert!(validate(spec(3, &[(2, 1), (3, 1), (3, 2)])).is_ok());
    }

    #[test]
    fn two_cycle_detected() {
        let err = validate(spec(2, &[(1, 2), (2, 1)])).unwrap_err();
        assert_eq!(
            err.issues,
            vec![ValidationIssue::CycleDetected { cycle: vec![0, 1, 0] }]
        );
    }

    #[test]
    fn disjoint_agents_not_connected() {
        let err = validate(spec(2, &[])).unwrap_err();
        assert_eq!(
            err.issues,
            vec![ValidationIssue::NotWeaklyConnected {
                components: vec![vec![0], vec![1]]
            }]
        );
        assert!(err.only_disconnected());
    }

    #[test]
    fn reports_every_violation() {
        let mut s = spec(3, &[(2, 1), (2, 1), (3, 3)]);
        s.agents[1].b = DMatrix::zeros(3, 1);
        s.edges[0].d = DVector::zeros(1);
        let err = validate(s).unwrap_err();
        let kinds: Vec<String> = err
            .issues
            .iter()
            .map(|i| format!("{i:?}").split([' ', '{']).next().unwrap().to_string())
            .collect();
        assert_eq!(
            kinds,
            vec!["DimensionMismatch", "DimensionMismatch", "DuplicateEdge", "SelfLoop", "NotWeaklyConnected"]
        );
        let text = err.to_string();
        assert!(text.contains("duplicate edge (2, 1)"));
        assert!(text.contains("self-loop at node 3"));
    }

    #[test]
    fn longer_cycle_witness_is_a_closed_walk() {
        let s = spec(4, &[(1, 2), (2, 3), (3, 4), (4, 2)]);
        let err = validate(s.clone()).unwrap_err();
        let ValidationIssue::CycleDetected { cycle } = &err.issues[0] else {
            panic!("expected cycle")
        };
        assert_eq!(cycle.first(), cycle.last());
        for w in cycle.windows(2) {
            assert!(s.edge(w[0], w[1]).is_some());
        }
    }

    #[test]
    fn unknown_node_reported() {
        let mut s = spec(2, &[(2, 1)]);
        s.edges.push(Edge {
            from: 5,
            to: 0,
            d: DVector::zeros(2),
        });
        let err = validate(s).unwrap_err();
        assert!(matches!(err.issues[0], ValidationIssue::UnknownNode { node_id: 6, .. }));
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"n":2,"m":1,
            "agents":[{"A":[[1,0],[0,2]],"B":[[0],[0]]},{"A":[[0,-1],[-1,1]],"B":[[1],[1]]}],
            "edges":[{"from":2,"to":1,"d":[2,1]}]}"#;
        let s = FormationSpec::from_json(text).unwrap();
        assert_eq!(s.edges[0].from, 1);
        assert_eq!(s.agents[1].a[(1, 0)], -1.0);
        assert_eq!(FormationSpec::from_json(&s.to_json()).unwrap(), s);
        assert!(FormationSpec::from_json("{\"n\":2").is_err());
    }

    #[test]
    fn split_components_renumbers_locally() {
        let s = spec(4, &[(3, 1), (4, 2)]);
        let parts = split_components(&s);
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].nodes, vec![0, 2]);
        assert_eq!(parts[1].nodes, vec![1, 3]);
        assert_eq!((parts[1].spec.edges[0].from, parts[1].spec.edges[0].to), (1, 0));
        assert!(validate(parts[0].spec.clone()).is_ok());
    }
}
