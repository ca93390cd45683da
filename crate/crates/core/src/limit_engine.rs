//! Inverse sequences of graphs at finite depth.
//!
//! Points of the inverse limit never materialize as infinite sequences: a
//! depth-n [`Thread`] stores only its level index and last vertex, since
//! the bonding maps force the whole prefix. A depth-n thread is exactly
//! the cylinder determined by its last vertex.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_core::{
    check_graph_cover, Graph, GraphError, GraphHom, Relation, Vertex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Homomorphisms,
    Covers,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LimitError {
    #[error("bonding list has {bonding} maps but {levels} levels need {}", levels.saturating_sub(1))]
    LengthMismatch { levels: usize, bonding: usize },
    #[error("bonding map {index} does not connect level {index} to level {}", index - 1)]
    BondingEndpointMismatch { index: usize },
    #[error("depth {depth} out of range 0..={max}")]
    DepthOutOfRange { depth: usize, max: usize },
    #[error("vertex {0} is not a vertex of level {1}")]
    UnknownVertex(Vertex, usize),
    #[error("cover axiom violated: vertex {vertex} at level {level} has no outgoing edge")]
    NoOutgoingEdge { vertex: Vertex, level: usize },
    #[error("cover axiom violated: out-edges of {vertex} at level {level} project to both {first} and {second}")]
    AmbiguousSuccessor {
        vertex: Vertex,
        level: usize,
        first: Vertex,
        second: Vertex,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One axiom failure found by [`GraphSequence::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceViolation {
    pub level: usize,
    pub description: String,
}

impl std::fmt::Display for SequenceViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "level {}: {}", self.level, self.description)
    }
}

/// A finite inverse sequence of graphs with bonding homomorphisms
/// `bonding(i): levels[i] → levels[i-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SequenceRepr", into = "SequenceRepr")]
pub struct GraphSequence {
    levels: Vec<Graph>,
    bonding: Vec<GraphHom>,
    kind: SequenceKind,
}

#[derive(Serialize, Deserialize, Clone)]
struct SequenceRepr {
    kind: SequenceKind,
    levels: Vec<Graph>,
    bonding: Vec<HomRepr>,
}

#[derive(Serialize, Deserialize, Clone)]
struct HomRepr {
    map: BTreeMap<Vertex, Vertex>,
}

impl TryFrom<SequenceRepr> for GraphSequence {
    type Error = LimitError;
    fn try_from(r: SequenceRepr) -> Result<Self, LimitError> {
        let mut bonding = Vec::with_capacity(r.bonding.len());
        for (i, h) in r.bonding.into_iter().enumerate() {
            if i + 1 >= r.levels.len() {
                return Err(LimitError::LengthMismatch {
                    levels: r.levels.len(),
                    bonding: i + 1,
                });
            }
            bonding.push(GraphHom::new(
                r.levels[i + 1].clone(),
                r.levels[i].clone(),
                h.map,
            )?);
        }
        GraphSequence::new(r.levels, bonding, r.kind)
    }
}

impl From<GraphSequence> for SequenceRepr {
    fn from(s: GraphSequence) -> Self {
        SequenceRepr {
            kind: s.kind,
            levels: s.levels,
            bonding: s
                .bonding
                .into_iter()
                .map(|h| HomRepr {
                    map: h.map().clone(),
                })
                .collect(),
        }
    }
}

impl GraphSequence {
    /// Structural construction: lengths and endpoints must line up.
    /// Axioms of the declared kind are checked separately by [`Self::validate`].
    pub fn new(
        levels: Vec<Graph>,
        bonding: Vec<GraphHom>,
        kind: SequenceKind,
    ) -> Result<Self, LimitError> {
        if levels.is_empty() || bonding.len() != levels.len() - 1 {
            return Err(LimitError::LengthMismatch {
                levels: levels.len(),
                bonding: bonding.len(),
            });
        }
        for (i, phi) in bonding.iter().enumerate() {
            if phi.source() != &levels[i + 1] || phi.target() != &levels[i] {
                return Err(LimitError::BondingEndpointMismatch { index: i + 1 });
            }
        }
        Ok(GraphSequence {
            levels,
            bonding,
            kind,
        })
    }

    pub fn levels(&self) -> &[Graph] {
        &self.levels
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    /// Maximum depth (index of the deepest level).
    pub fn max_depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// The bonding map `φ_i: levels[i] → levels[i-1]`, `1 ≤ i ≤ max_depth`.
    pub fn bonding(&self, i: usize) -> &GraphHom {
        &self.bonding[i - 1]
    }

    pub fn bonding_maps(&self) -> &[GraphHom] {
        &self.bonding
    }

    /// Checks every level/bonding invariant for the declared kind.
    pub fn validate(&self) -> Vec<SequenceViolation> {
        let mut out = Vec::new();
        for i in 1..=self.max_depth() {
            let phi = self.bonding(i);
            if let Some((u, v)) = phi.homomorphism_witness() {
                out.push(SequenceViolation {
                    level: i,
                    description: format!(
                        "bonding map is not a homomorphism: edge ({u}, {v}) has no image edge"
                    ),
                });
            }
        }
        if self.kind == SequenceKind::Covers {
            for (i, g) in self.levels.iter().enumerate() {
                if let Some(v) = g.edge_surjectivity_witness() {
                    out.push(SequenceViolation {
                        level: i,
                        description: format!("level graph is not edge-surjective at vertex {v}"),
                    });
                }
            }
            for i in 1..=self.max_depth() {
                if let Err(violation) = check_graph_cover(self.bonding(i)) {
                    out.push(SequenceViolation {
                        level: i,
                        description: format!("bonding map is not a graph cover: {violation}"),
                    });
                }
            }
        }
        out
    }

    fn check_depth(&self, n: usize) -> Result<(), LimitError> {
        if n > self.max_depth() {
            return Err(LimitError::DepthOutOfRange {
                depth: n,
                max: self.max_depth(),
            });
        }
        Ok(())
    }

    /// Builds a depth-n thread from its last vertex; the prefix is forced.
    pub fn thread(&self, depth: usize, last: &str) -> Result<Thread, LimitError> {
        self.check_depth(depth)?;
        if !self.levels[depth].vertices().contains(last) {
            return Err(LimitError::UnknownVertex(last.to_string(), depth));
        }
        Ok(Thread {
            depth,
            last: last.to_string(),
        })
    }

    /// The full vertex tuple `(x_0, …, x_n)` of a thread.
    pub fn thread_path(&self, t: &Thread) -> Vec<Vertex> {
        let mut path = vec![t.last.clone()];
        for i in (1..=t.depth).rev() {
            let prev = self.bonding(i).apply(path.last().unwrap()).clone();
            path.push(prev);
        }
        path.reverse();
        path
    }

    /// All depth-n threads; one per vertex of `levels[n]` by totality of
    /// the bonding maps.
    pub fn enumerate_threads(&self, n: usize) -> Result<Vec<Thread>, LimitError> {
        self.check_depth(n)?;
        Ok(self.levels[n]
            .vertices()
            .iter()
            .map(|v| Thread {
                depth: n,
                last: v.clone(),
            })
            .collect())
    }

    /// The levelwise edge relation on depth-n threads: `(x, y)` related
    /// iff `(x_i, y_i)` is an edge at every level `i ≤ n`.
    pub fn thread_edge_relation(&self, n: usize) -> Result<Relation, LimitError> {
        self.check_depth(n)?;
        let domain: BTreeSet<Vertex> = self.levels[n].vertices().clone();
        // a related pair is in particular an edge at level n, so it
        // suffices to project each top edge down and check the rest
        let mut pairs = BTreeSet::new();
        for (u, v) in self.levels[n].edges() {
            let mut a = u;
            let mut b = v;
            let mut ok = true;
            for i in (1..=n).rev() {
                let phi = self.bonding(i);
                a = phi.apply(a);
                b = phi.apply(b);
                if !self.levels[i - 1].has_edge(a, b) {
                    ok = false;
                    break;
                }
            }
            if ok {
                pairs.insert((u.clone(), v.clone()));
            }
        }
        Ok(Relation::new(domain.clone(), domain, pairs)?)
    }

    /// The unique depth-(n-1) thread levelwise adjacent to `t` below its
    /// top level. Defined for cover sequences, where +directionality
    /// makes the out-edge choice irrelevant.
    pub fn cover_successor(&self, t: &Thread) -> Result<Thread, LimitError> {
        assert!(t.depth >= 1, "cover_successor needs depth >= 1");
        let n = t.depth;
        let phi = self.bonding(n);
        let mut projected: Option<Vertex> = None;
        for head in self.levels[n].out_neighbors(&t.last) {
            let p = phi.apply(head).clone();
            match &projected {
                None => projected = Some(p),
                Some(q) if *q != p => {
                    return Err(LimitError::AmbiguousSuccessor {
                        vertex: t.last.clone(),
                        level: n,
                        first: q.clone(),
                        second: p,
                    })
                }
                _ => {}
            }
        }
        let last = projected.ok_or_else(|| LimitError::NoOutgoingEdge {
            vertex: t.last.clone(),
            level: n,
        })?;
        Ok(Thread {
            depth: n - 1,
            last,
        })
    }

    /// Whether every depth-(n-1) thread arises as a cover successor.
    pub fn surjectivity_at_depth(&self, n: usize) -> Result<bool, LimitError> {
        assert!(n >= 1);
        self.check_depth(n)?;
        let mut hit: BTreeSet<Vertex> = BTreeSet::new();
        for t in self.enumerate_threads(n)? {
            hit.insert(self.cover_successor(&t)?.last);
        }
        Ok(self.levels[n - 1].vertices().iter().all(|v| hit.contains(v)))
    }
}

/// A depth-n compatible vertex tuple, stored as its last vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Thread {
    pub depth: usize,
    #[serde(rename = "last_vertex")]
    pub last: Vertex,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::GraphKind;

    fn s(x: &str) -> String {
        x.to_string()
    }

    fn loop_graph(name: &str) -> Graph {
        Graph::directed([s(name)], [(s(name), s(name))]).unwrap()
    }

    fn two_cycle() -> Graph {
        Graph::directed([s("a"), s("b")], [(s("a"), s("b")), (s("b"), s("a"))]).unwrap()
    }

    fn four_cycle() -> Graph {
        Graph::directed(
            [s("w"), s("x"), s("y"), s("z")],
            [
                (s("w"), s("x")),
                (s("x"), s("y")),
                (s("y"), s("z")),
                (s("z"), s("w")),
            ],
        )
        .unwrap()
    }

    /// loop ← 2-cycle ← 4-cycle, each bonding a cover.
    fn cover_tower() -> GraphSequence {
        let g0 = loop_graph("r");
        let g1 = two_cycle();
        let g2 = four_cycle();
        let phi1 = GraphHom::new(
            g1.clone(),
            g0.clone(),
            [(s("a"), s("r")), (s("b"), s("r"))],
        )
        .unwrap();
        let phi2 = GraphHom::new(
            g2.clone(),
            g1.clone(),
            [
                (s("w"), s("a")),
                (s("y"), s("a")),
                (s("x"), s("b")),
                (s("z"), s("b")),
            ],
        )
        .unwrap();
        GraphSequence::new(vec![g0, g1, g2], vec![phi1, phi2], SequenceKind::Covers).unwrap()
    }

    #[test]
    fn single_level_validates() {
        let seq =
            GraphSequence::new(vec![loop_graph("r")], vec![], SequenceKind::Covers).unwrap();
        assert!(seq.validate().is_empty());
    }

    #[test]
    fn cover_tower_validates() {
        assert!(cover_tower().validate().is_empty());
    }

    #[test]
    fn broken_tower_reports_witness() {
        let seq = cover_tower();
        // delete one edge from level 1
        let g1 = Graph::directed([s("a"), s("b")], [(s("a"), s("b"))]).unwrap();
        let phi1 = GraphHom::new(
            g1.clone(),
            seq.levels()[0].clone(),
            [(s("a"), s("r")), (s("b"), s("r"))],
        )
        .unwrap();
        let phi2 = GraphHom::new(
            seq.levels()[2].clone(),
            g1.clone(),
            [
                (s("w"), s("a")),
                (s("y"), s("a")),
                (s("x"), s("b")),
                (s("z"), s("b")),
            ],
        )
        .unwrap();
        let broken = GraphSequence::new(
            vec![seq.levels()[0].clone(), g1, seq.levels()[2].clone()],
            vec![phi1, phi2],
            SequenceKind::Covers,
        )
        .unwrap();
        let report = broken.validate();
        assert!(!report.is_empty());
        assert!(report.iter().any(|v| v.level == 1));
    }

    #[test]
    fn thread_counts_match_level_sizes() {
        let seq = cover_tower();
        assert_eq!(seq.enumerate_threads(0).unwrap().len(), 1);
        assert_eq!(seq.enumerate_threads(1).unwrap().len(), 2);
        assert_eq!(seq.enumerate_threads(2).unwrap().len(), 4);
        assert!(seq.enumerate_threads(3).is_err());
    }

    #[test]
    fn thread_path_is_forced_prefix() {
        let seq = cover_tower();
        let t = seq.thread(2, "w").unwrap();
        assert_eq!(seq.thread_path(&t), vec![s("r"), s("a"), s("w")]);
    }

    #[test]
    fn root_loop_edge_relation() {
        let seq = cover_tower();
        let r = seq.thread_edge_relation(0).unwrap();
        assert!(r.contains("r", "r"));
        assert_eq!(r.pairs().len(), 1);
    }

    #[test]
    fn deleting_top_edge_removes_exactly_those_pairs() {
        let seq = cover_tower();
        let full = seq.thread_edge_relation(2).unwrap();
        assert!(full.contains("w", "x"));

        let g2 = Graph::directed(
            [s("w"), s("x"), s("y"), s("z")],
            [(s("x"), s("y")), (s("y"), s("z")), (s("z"), s("w"))],
        )
        .unwrap();
        let phi2 = GraphHom::new(
            g2.clone(),
            seq.levels()[1].clone(),
            [
                (s("w"), s("a")),
                (s("y"), s("a")),
                (s("x"), s("b")),
                (s("z"), s("b")),
            ],
        )
        .unwrap();
        let cut = GraphSequence::new(
            vec![seq.levels()[0].clone(), seq.levels()[1].clone(), g2],
            vec![seq.bonding(1).clone(), phi2],
            SequenceKind::Homomorphisms,
        )
        .unwrap();
        let pruned = cut.thread_edge_relation(2).unwrap();
        let mut diff: Vec<_> = full.pairs().difference(pruned.pairs()).cloned().collect();
        diff.sort();
        assert_eq!(diff, vec![(s("w"), s("x"))]);
    }

    #[test]
    fn cover_successor_traces_unique_out_edge() {
        let seq = cover_tower();
        let t = seq.thread(2, "w").unwrap();
        // w → x, x ↦ b
        let succ = seq.cover_successor(&t).unwrap();
        assert_eq!(succ, Thread { depth: 1, last: s("b") });
    }

    #[test]
    fn loop_sequence_successor_is_self() {
        let g0 = loop_graph("p");
        let g1 = loop_graph("p");
        let phi = GraphHom::new(g1.clone(), g0.clone(), [(s("p"), s("p"))]).unwrap();
        let seq =
            GraphSequence::new(vec![g0, g1], vec![phi], SequenceKind::Covers).unwrap();
        let t = seq.thread(1, "p").unwrap();
        let succ = seq.cover_successor(&t).unwrap();
        assert_eq!(succ.last, s("p"));
        assert_eq!(succ.depth, 0);
    }

    #[test]
    fn surjectivity_holds_on_cover_tower() {
        let seq = cover_tower();
        assert!(seq.surjectivity_at_depth(1).unwrap());
        assert!(seq.surjectivity_at_depth(2).unwrap());
    }

    #[test]
    fn sequence_json_round_trip() {
        let seq = cover_tower();
        let j = serde_json::to_string(&seq).unwrap();
        let back: GraphSequence = serde_json::from_str(&j).unwrap();
        assert_eq!(seq, back);
    }

    #[test]
    fn symmetric_levels_compose_with_relation_machinery() {
        let f = Graph::symmetric([s("a"), s("b")], [(s("a"), s("a")), (s("b"), s("b"))]).unwrap();
        assert_eq!(f.kind(), GraphKind::Symmetric);
        let rel = f.edge_relation();
        assert!(rel.contains("a", "a"));
    }
}
