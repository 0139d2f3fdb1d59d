//! Built-in instances with known verdicts, used by `formation demo` and the tests.
//!
//! Free choices in the textbook instances are pinned here: the three-agent
//! triangle with equal displacements uses `A = −I` and `d = e₁`.

use nalgebra::{DMatrix, DVector};

use crate::criterion::Verdict;
use crate::model::{AgentDynamics, Edge, FormationSpec};
use crate::pairwise::PairClass;

fn agent(a: DMatrix<f64>, b: DMatrix<f64>) -> AgentDynamics {
    AgentDynamics { a, b }
}

/// Edge with 1-based endpoints, as written in instance files.
fn edge(from: usize, to: usize, d: &[f64]) -> Edge {
    Edge {
        from: from - 1,
        to: to - 1,
        d: DVector::from_column_slice(d),
    }
}

fn rows(n: usize, m: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, m, data)
}

/// Triangle `E = {(2,1),(3,1),(3,2)}` with `A = −I` for everyone,
/// `B = A d` and all displacements equal to `d = e₁` (n = 2, m = 1).
/// Every two-agent subformation is stable, the formation is not.
pub fn example1() -> FormationSpec {
    let a = -DMatrix::<f64>::identity(2, 2);
    let d = [1.0, 0.0];
    let b = &a * DMatrix::from_column_slice(2, 1, &d);
    FormationSpec {
        n: 2,
        m: 1,
        agents: vec![agent(a.clone(), b.clone()), agent(a.clone(), b.clone()), agent(a, b)],
        edges: vec![edge(2, 1, &d), edge(3, 1, &d), edge(3, 2, &d)],
    }
}

/// Chain `3 → 2 → 1` with an unstable leader. The formation is stable while
/// the subformation `{3, 2}` is not.
pub fn example2() -> FormationSpec {
    FormationSpec {
        n: 2,
        m: 1,
        agents: vec![
            agent(rows(2, 2, &[1.0, 0.0, 0.0, 2.0]), rows(2, 1, &[0.0, 0.0])),
            agent(rows(2, 2, &[0.0, -1.0, -1.0, 1.0]), rows(2, 1, &[1.0, 1.0])),
            agent(rows(2, 2, &[0.0, -1.0, -2.0, 0.0]), rows(2, 1, &[1.0, 2.0])),
        ],
        edges: vec![edge(3, 2, &[2.0, 3.0]), edge(2, 1, &[2.0, 1.0])],
    }
}

/// Two leaders `1, 2` followed by agent `3` with `d_31 ≠ d_32`
/// (n = m = 2, `A = −I`, `B = I`). Both pairs are stable; the displacement
/// condition cannot hold.
pub fn remark5() -> FormationSpec {
    let a = -DMatrix::<f64>::identity(2, 2);
    let b = DMatrix::<f64>::identity(2, 2);
    FormationSpec {
        n: 2,
        m: 2,
        agents: vec![agent(a.clone(), b.clone()), agent(a.clone(), b.clone()), agent(a, b)],
        edges: vec![edge(3, 1, &[1.0, 0.0]), edge(3, 2, &[0.0, 1.0])],
    }
}

/// Triangle whose displacements close up (`d_31 = d_32 + d_21`), with
/// oscillating agents; stable. The pair `{3, 2}` alone is not, because
/// `A_3 d_32` is not in the range of `B_3`.
pub fn triangle() -> FormationSpec {
    let a = rows(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    FormationSpec {
        n: 2,
        m: 1,
        agents: vec![
            agent(a.clone(), rows(2, 1, &[0.0, 0.0])),
            agent(a.clone(), rows(2, 1, &[0.0, -1.0])),
            agent(a, rows(2, 1, &[1.0, -1.0])),
        ],
        edges: vec![edge(2, 1, &[1.0, 0.0]), edge(3, 1, &[1.0, 1.0]), edge(3, 2, &[0.0, 1.0])],
    }
}

/// One Hurwitz agent, no edges.
pub fn single_agent() -> FormationSpec {
    FormationSpec {
        n: 2,
        m: 1,
        agents: vec![agent(rows(2, 2, &[-1.0, 0.5, 0.0, -2.0]), rows(2, 1, &[0.0, 1.0]))],
        edges: vec![],
    }
}

/// A bundled instance with the outcomes it is known to produce.
#[derive(Debug, Clone)]
pub struct Demo {
    pub name: &'static str,
    pub summary: &'static str,
    pub spec: FormationSpec,
    pub verdict: Verdict,
    pub pair_class: PairClass,
    /// 1-based edges expected to be unstable as two-agent subformations.
    pub unstable_pairs: Vec<(usize, usize)>,
    /// 1-based edges expected to violate displacement consistency.
    pub inconsistent_edges: Vec<(usize, usize)>,
}

pub const DEMO_NAMES: [&str; 4] = ["example1", "example2", "remark5", "triangle"];

pub fn demo(name: &str) -> Option<Demo> {
    let d = match name {
        "example1" => Demo {
            name: "example1",
            summary: "triangle, equal displacements: every pair stable, formation unstable",
            spec: example1(),
            verdict: Verdict::Unstable,
            pair_class: PairClass::PairsStableFormationUnstable,
            unstable_pairs: vec![],
            inconsistent_edges: vec![(3, 1)],
        },
        "example2" => Demo {
            name: "example2",
            summary: "chain with unstable leader: formation stable, pair (3,2) unstable",
            spec: example2(),
            verdict: Verdict::Stable,
            pair_class: PairClass::FormationStablePairUnstable,
            unstable_pairs: vec![(3, 2)],
            inconsistent_edges: vec![],
        },
        "remark5" => Demo {
            name: "remark5",
            summary: "two leaders, one follower: condition d_31 = d_32 violated",
            spec: remark5(),
            verdict: Verdict::Unstable,
            pair_class: PairClass::PairsStableFormationUnstable,
            unstable_pairs: vec![],
            inconsistent_edges: vec![(3, 1)],
        },
        "triangle" => Demo {
            name: "triangle",
            summary: "triangle with closing displacements d_31 = d_32 + d_21: stable, pair (3,2) unstable",
            spec: triangle(),
            verdict: Verdict::Stable,
            pair_class: PairClass::FormationStablePairUnstable,
            unstable_pairs: vec![(3, 2)],
            inconsistent_edges: vec![],
        },
        _ => return None,
    };
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn every_demo_validates() {
        for name in DEMO_NAMES {
            let d = demo(name).unwrap();
            assert_eq!(d.name, name);
            validate(d.spec).unwrap();
        }
        validate(single_agent()).unwrap();
        assert!(demo("nope").is_none());
    }

    #[test]
    fn equal_displacement_triangle_inputs() {
        let s = example1();
        // B = A d with A = −I, d = e₁.
        assert_eq!(s.agents[1].b, rows(2, 1, &[-1.0, 0.0]));
        assert!(s.edges.iter().all(|e| e.d == DVector::from_column_slice(&[1.0, 0.0])));
    }
}
