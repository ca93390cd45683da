//! Finite graphs, homomorphisms and relation algebra.
//!
//! Vertices are opaque string tokens scoped to one graph; identity across
//! levels of a sequence is expressed only through [`GraphHom`] mappings.
//! Symmetric graphs store both ordered pairs so the edge set of a
//! non-directed graph is usable as a [`Relation`] verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vertex = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Directed,
    Symmetric,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) has an endpoint outside the vertex set")]
    DanglingEdge(Vertex, Vertex),
    #[error("symmetric graph is missing the reverse of edge ({0}, {1})")]
    MissingReverse(Vertex, Vertex),
    #[error("mapping is not defined on source vertex {0}")]
    UnmappedVertex(Vertex),
    #[error("mapping sends {0} to {1}, which is not a target vertex")]
    ImageOutsideTarget(Vertex, Vertex),
    #[error("mapping is defined on {0}, which is not a source vertex")]
    SpuriousVertex(Vertex),
    #[error("relation pair ({0}, {1}) leaves the declared domains")]
    PairOutsideDomain(Vertex, Vertex),
    #[error("relation domains do not compose: right domain of R differs from left domain of Q")]
    DomainMismatch,
    #[error("vertex {0} is outside the relation's left domain")]
    VertexOutsideDomain(Vertex),
    #[error("equivalence closure requires equal left and right domains")]
    NotEndorelation,
}

/// A finite graph: vertex set plus a binary edge relation on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    vertices: BTreeSet<Vertex>,
    edges: BTreeSet<(Vertex, Vertex)>,
    kind: GraphKind,
}

#[derive(Serialize, Deserialize, Clone)]
struct GraphRepr {
    vertices: Vec<Vertex>,
    edges: Vec<(Vertex, Vertex)>,
    kind: GraphKind,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = GraphError;
    fn try_from(r: GraphRepr) -> Result<Self, GraphError> {
        Graph::new(r.vertices, r.edges, r.kind)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            vertices: g.vertices.into_iter().collect(),
            edges: g.edges.into_iter().collect(),
            kind: g.kind,
        }
    }
}

impl Graph {
    pub fn new(
        vertices: impl IntoIterator<Item = Vertex>,
        edges: impl IntoIterator<Item = (Vertex, Vertex)>,
        kind: GraphKind,
    ) -> Result<Self, GraphError> {
        let vertices: BTreeSet<Vertex> = vertices.into_iter().collect();
        let edges: BTreeSet<(Vertex, Vertex)> = edges.into_iter().collect();
        for (u, v) in &edges {
            if !vertices.contains(u) || !vertices.contains(v) {
                return Err(GraphError::DanglingEdge(u.clone(), v.clone()));
            }
        }
        if kind == GraphKind::Symmetric {
            for (u, v) in &edges {
                if !edges.contains(&(v.clone(), u.clone())) {
                    return Err(GraphError::MissingReverse(u.clone(), v.clone()));
                }
            }
        }
        Ok(Graph {
            vertices,
            edges,
            kind,
        })
    }

    /// Builds a symmetric graph, closing the edge set under reversal.
    pub fn symmetric(
        vertices: impl IntoIterator<Item = Vertex>,
        edges: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<Self, GraphError> {
        let mut closed = BTreeSet::new();
        for (u, v) in edges {
            closed.insert((v.clone(), u.clone()));
            closed.insert((u, v));
        }
        Graph::new(vertices, closed, GraphKind::Symmetric)
    }

    pub fn directed(
        vertices: impl IntoIterator<Item = Vertex>,
        edges: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<Self, GraphError> {
        Graph::new(vertices, edges, GraphKind::Directed)
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn edges(&self) -> &BTreeSet<(Vertex, Vertex)> {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn has_edge(&self, u: &str, v: &str) -> bool {
        self.edges.contains(&(u.to_string(), v.to_string()))
    }

    pub fn out_neighbors<'a>(&'a self, v: &'a str) -> impl Iterator<Item = &'a Vertex> {
        self.edges
            .range((v.to_string(), String::new())..)
            .take_while(move |(u, _)| u == v)
            .map(|(_, w)| w)
    }

    /// The edge set viewed as a relation on the vertex set.
    pub fn edge_relation(&self) -> Relation {
        Relation {
            left: self.vertices.clone(),
            right: self.vertices.clone(),
            pairs: self.edges.clone(),
        }
    }

    /// First vertex missing an incoming or outgoing edge, if any.
    pub fn edge_surjectivity_witness(&self) -> Option<&Vertex> {
        let mut has_out: BTreeSet<&Vertex> = BTreeSet::new();
        let mut has_in: BTreeSet<&Vertex> = BTreeSet::new();
        for (u, v) in &self.edges {
            has_out.insert(u);
            has_in.insert(v);
        }
        self.vertices
            .iter()
            .find(|v| !has_out.contains(v) || !has_in.contains(v))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph G {\n");
        for v in &self.vertices {
            let _ = writeln!(out, "  \"{v}\";");
        }
        for (u, v) in &self.edges {
            let _ = writeln!(out, "  \"{u}\" -> \"{v}\";");
        }
        out.push_str("}\n");
        out
    }
}

/// A total vertex mapping between two graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphHom {
    source: Graph,
    target: Graph,
    map: BTreeMap<Vertex, Vertex>,
}

impl GraphHom {
    pub fn new(
        source: Graph,
        target: Graph,
        map: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<Self, GraphError> {
        let map: BTreeMap<Vertex, Vertex> = map.into_iter().collect();
        for v in source.vertices() {
            match map.get(v) {
                None => return Err(GraphError::UnmappedVertex(v.clone())),
                Some(w) if !target.vertices().contains(w) => {
                    return Err(GraphError::ImageOutsideTarget(v.clone(), w.clone()))
                }
                _ => {}
            }
        }
        if let Some(v) = map.keys().find(|v| !source.vertices().contains(*v)) {
            return Err(GraphError::SpuriousVertex(v.clone()));
        }
        Ok(GraphHom {
            source,
            target,
            map,
        })
    }

    pub fn identity(g: &Graph) -> Self {
        let map = g.vertices().iter().map(|v| (v.clone(), v.clone())).collect();
        GraphHom {
            source: g.clone(),
            target: g.clone(),
            map,
        }
    }

    pub fn source(&self) -> &Graph {
        &self.source
    }

    pub fn target(&self) -> &Graph {
        &self.target
    }

    pub fn map(&self) -> &BTreeMap<Vertex, Vertex> {
        &self.map
    }

    pub fn apply(&self, v: &str) -> &Vertex {
        &self.map[v]
    }

    /// Composition `other ∘ self`, defined when targets and sources line up.
    pub fn then(&self, other: &GraphHom) -> Result<GraphHom, GraphError> {
        if self.target != other.source {
            return Err(GraphError::DomainMismatch);
        }
        let map = self
            .map
            .iter()
            .map(|(v, w)| (v.clone(), other.apply(w).clone()))
            .collect::<BTreeMap<_, _>>();
        GraphHom::new(self.source.clone(), other.target.clone(), map)
    }

    /// First source edge whose image is not a target edge, if any.
    pub fn homomorphism_witness(&self) -> Option<(&Vertex, &Vertex)> {
        self.source
            .edges()
            .iter()
            .find(|(u, v)| !self.target.edges().contains(&(
                self.apply(u).clone(),
                self.apply(v).clone(),
            )))
            .map(|(u, v)| (u, v))
    }

    /// First target edge not hit by the edge image, if any.
    pub fn edge_surjectivity_witness(&self) -> Option<&(Vertex, Vertex)> {
        let image: BTreeSet<(Vertex, Vertex)> = self
            .source
            .edges()
            .iter()
            .map(|(u, v)| (self.apply(u).clone(), self.apply(v).clone()))
            .collect();
        self.target.edges().iter().find(|e| !image.contains(e))
    }

    /// First pair of out-edges from one vertex with distinct images, if any.
    pub fn plus_directional_witness(&self) -> Option<(&Vertex, &Vertex, &Vertex)> {
        let mut by_tail: BTreeMap<&Vertex, Vec<&Vertex>> = BTreeMap::new();
        for (u, v) in self.source.edges() {
            by_tail.entry(u).or_default().push(v);
        }
        for (u, heads) in by_tail {
            if let Some((first, rest)) = heads.split_first() {
                for h in rest {
                    if self.apply(h) != self.apply(first) {
                        return Some((u, first, h));
                    }
                }
            }
        }
        None
    }
}

pub fn is_homomorphism(phi: &GraphHom) -> bool {
    phi.homomorphism_witness().is_none()
}

pub fn is_edge_surjective_graph(g: &Graph) -> bool {
    g.edge_surjectivity_witness().is_none()
}

pub fn is_edge_surjective_hom(phi: &GraphHom) -> bool {
    phi.edge_surjectivity_witness().is_none()
}

pub fn is_plus_directional(phi: &GraphHom) -> bool {
    phi.plus_directional_witness().is_none()
}

/// Which part of the graph-cover definition fails first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverViolation {
    SourceNotEdgeSurjective(Vertex),
    TargetNotEdgeSurjective(Vertex),
    NotHomomorphism(Vertex, Vertex),
    NotEdgeSurjectiveHom(Vertex, Vertex),
    NotPlusDirectional(Vertex, Vertex, Vertex),
}

impl std::fmt::Display for CoverViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoverViolation::SourceNotEdgeSurjective(v) => {
                write!(f, "source graph not edge-surjective at vertex {v}")
            }
            CoverViolation::TargetNotEdgeSurjective(v) => {
                write!(f, "target graph not edge-surjective at vertex {v}")
            }
            CoverViolation::NotHomomorphism(u, v) => {
                write!(f, "edge ({u}, {v}) does not map to a target edge")
            }
            CoverViolation::NotEdgeSurjectiveHom(u, v) => {
                write!(f, "target edge ({u}, {v}) is not in the edge image")
            }
            CoverViolation::NotPlusDirectional(u, v, w) => {
                write!(f, "out-edges ({u}, {v}) and ({u}, {w}) have distinct images")
            }
        }
    }
}

/// Checks the full graph-cover definition, reporting the first violation.
pub fn check_graph_cover(phi: &GraphHom) -> Result<(), CoverViolation> {
    if let Some(v) = phi.source().edge_surjectivity_witness() {
        return Err(CoverViolation::SourceNotEdgeSurjective(v.clone()));
    }
    if let Some(v) = phi.target().edge_surjectivity_witness() {
        return Err(CoverViolation::TargetNotEdgeSurjective(v.clone()));
    }
    if let Some((u, v)) = phi.homomorphism_witness() {
        return Err(CoverViolation::NotHomomorphism(u.clone(), v.clone()));
    }
    if let Some((u, v, w)) = phi.plus_directional_witness() {
        return Err(CoverViolation::NotPlusDirectional(
            u.clone(),
            v.clone(),
            w.clone(),
        ));
    }
    if let Some((u, v)) = phi.edge_surjectivity_witness() {
        return Err(CoverViolation::NotEdgeSurjectiveHom(u.clone(), v.clone()));
    }
    Ok(())
}

pub fn is_graph_cover(phi: &GraphHom) -> bool {
    check_graph_cover(phi).is_ok()
}

/// A binary relation between two finite sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    left: BTreeSet<Vertex>,
    right: BTreeSet<Vertex>,
    pairs: BTreeSet<(Vertex, Vertex)>,
}

impl Relation {
    pub fn new(
        left: impl IntoIterator<Item = Vertex>,
        right: impl IntoIterator<Item = Vertex>,
        pairs: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<Self, GraphError> {
        let left: BTreeSet<Vertex> = left.into_iter().collect();
        let right: BTreeSet<Vertex> = right.into_iter().collect();
        let pairs: BTreeSet<(Vertex, Vertex)> = pairs.into_iter().collect();
        for (v, w) in &pairs {
            if !left.contains(v) || !right.contains(w) {
                return Err(GraphError::PairOutsideDomain(v.clone(), w.clone()));
            }
        }
        Ok(Relation { left, right, pairs })
    }

    pub fn identity(domain: impl IntoIterator<Item = Vertex>) -> Self {
        let dom: BTreeSet<Vertex> = domain.into_iter().collect();
        let pairs = dom.iter().map(|v| (v.clone(), v.clone())).collect();
        Relation {
            left: dom.clone(),
            right: dom,
            pairs,
        }
    }

    pub fn left_domain(&self) -> &BTreeSet<Vertex> {
        &self.left
    }

    pub fn right_domain(&self) -> &BTreeSet<Vertex> {
        &self.right
    }

    pub fn pairs(&self) -> &BTreeSet<(Vertex, Vertex)> {
        &self.pairs
    }

    pub fn contains(&self, v: &str, w: &str) -> bool {
        self.pairs.contains(&(v.to_string(), w.to_string()))
    }
}

/// Relation composition: `(v, u) ∈ QR` iff some `w` has `(v, w) ∈ R` and `(w, u) ∈ Q`.
pub fn compose_relations(q: &Relation, r: &Relation) -> Result<Relation, GraphError> {
    if r.right != q.left {
        return Err(GraphError::DomainMismatch);
    }
    let mut by_first: BTreeMap<&Vertex, Vec<&Vertex>> = BTreeMap::new();
    for (w, u) in &q.pairs {
        by_first.entry(w).or_default().push(u);
    }
    let mut pairs = BTreeSet::new();
    for (v, w) in &r.pairs {
        if let Some(us) = by_first.get(w) {
            for u in us {
                pairs.insert((v.clone(), (*u).clone()));
            }
        }
    }
    Ok(Relation {
        left: r.left.clone(),
        right: q.right.clone(),
        pairs,
    })
}

/// The image set `Rv = {w | (v, w) ∈ R}`.
pub fn relation_image(r: &Relation, v: &str) -> Result<BTreeSet<Vertex>, GraphError> {
    if !r.left.contains(v) {
        return Err(GraphError::VertexOutsideDomain(v.to_string()));
    }
    Ok(r.pairs
        .iter()
        .filter(|(a, _)| a == v)
        .map(|(_, w)| w.clone())
        .collect())
}

/// A partition of a finite set into disjoint nonempty classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    classes: Vec<BTreeSet<Vertex>>,
    class_of: BTreeMap<Vertex, usize>,
}

impl Partition {
    pub fn classes(&self) -> &[BTreeSet<Vertex>] {
        &self.classes
    }

    pub fn class_index(&self, v: &str) -> Option<usize> {
        self.class_of.get(v).copied()
    }

    pub fn class_of(&self, v: &str) -> Option<&BTreeSet<Vertex>> {
        self.class_index(v).map(|i| &self.classes[i])
    }

    pub fn same_class(&self, v: &str, w: &str) -> bool {
        match (self.class_index(v), self.class_index(w)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }

    fn unite(&mut self, a: usize, b: usize) {
        let mut a = self.find(a);
        let mut b = self.find(b);
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Partition induced by the reflexive-symmetric-transitive closure of an
/// endorelation.
pub fn equivalence_closure(r: &Relation) -> Result<Partition, GraphError> {
    if r.left != r.right {
        return Err(GraphError::NotEndorelation);
    }
    let elems: Vec<&Vertex> = r.left.iter().collect();
    let index: BTreeMap<&Vertex, usize> = elems.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut uf = UnionFind::new(elems.len());
    for (v, w) in &r.pairs {
        uf.unite(index[v], index[w]);
    }
    let mut by_root: BTreeMap<usize, BTreeSet<Vertex>> = BTreeMap::new();
    for (i, v) in elems.iter().enumerate() {
        by_root.entry(uf.find(i)).or_default().insert((*v).clone());
    }
    let classes: Vec<BTreeSet<Vertex>> = by_root.into_values().collect();
    let mut class_of = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        for v in class {
            class_of.insert(v.clone(), i);
        }
    }
    Ok(Partition { classes, class_of })
}
