//! From dynamical systems to twinned sequences and back: cover
//! refinement under the C1–C5 conditions, level graph construction, the
//! clopen partition path for subshifts, and the decoder with conjugacy
//! diagnostics.
//!
//! Cover refinement searches for a granularity rather than deriving one
//! from a Lebesgue-number bound: candidate covers are generated
//! backend-specifically and verified exactly, halving the target piece
//! size (or extending the cylinder length) until the conditions hold or a
//! configured cap is exceeded.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_core::{relation_image, Graph, GraphError, GraphHom, Relation, Vertex};
use crate::limit_engine::{GraphSequence, LimitError, SequenceKind, Thread};
use crate::systems::{
    self, rat, Cover, CylinderSet, Interval, IntervalSet, OpenSet, Rat, System, SystemError,
};
use crate::twinned_engine::{TwinnedError, TwinnedSequence};

/// Halvings of the target piece size tried per level on the interval
/// backend before giving up.
const PL_REFINE_MAX_HALVINGS: u32 = 24;
/// Extra cylinder symbols tried per level on the shift backend.
const SHIFT_REFINE_MAX_EXTRA: usize = 32;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("refinement cap exceeded at level {level}: {last_failure}")]
    RefinementCapExceeded { level: usize, last_failure: String },
    #[error("level {level} element {element} is contained in no previous element (C5)")]
    UncoveredElement { level: usize, element: usize },
    #[error("zero-dimensional path needs a shift backend, got {0}")]
    WrongBackend(String),
    #[error("empty enclosure for thread at depth {depth}, vertex {vertex}: encoding is inconsistent")]
    EmptyEnclosure { depth: usize, vertex: Vertex },
    #[error("vertex table inconsistent with twinned sequence: {0}")]
    InconsistentBundle(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Twinned(#[from] TwinnedError),
    #[error(transparent)]
    Limit(#[from] LimitError),
}

/// One vertex of a level graph: a cover element together with the parent
/// it is filed under. The same element appears once per containing
/// parent, which is what makes the bonding map well defined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedVertex {
    pub id: Vertex,
    pub level: usize,
    /// Vertex id at level `level - 1`; `None` only for the root.
    pub parent: Option<Vertex>,
    /// Index into the level's cover elements.
    pub set_id: usize,
}

/// A cover with its fattening radius ε = max{mesh f(𝒰), mesh 𝒰}
/// (replaced by a small positive resolution when both meshes vanish,
/// which happens only on discrete backends).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverLevel {
    pub cover: Cover,
    #[serde(with = "crate::systems::rat")]
    pub epsilon: Rat,
}

/// Which of the cover-sequence conditions failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// Level 0 is {X} and no element is empty.
    C1,
    /// ε-fattened elements refine the previous level and the doubled
    /// fattened meshes stay below the previous ε.
    C2,
    /// mesh ≤ 2^{-i}.
    C3,
    /// Every previous element is exactly the union of the current
    /// elements it contains.
    C5,
    /// Stored ε does not match the cover.
    Epsilon,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::C5 => "C5",
            Condition::Epsilon => "epsilon",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionViolation {
    pub level: usize,
    pub condition: Condition,
    pub detail: String,
}

impl std::fmt::Display for ConditionViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at level {}: {}", self.condition, self.level, self.detail)
    }
}

/// A system encoded as a twinned sequence, keeping the covers and the
/// tag table needed to decode threads back into the space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EncodingRepr", into = "EncodingRepr")]
pub struct Encoding {
    system: System,
    levels: Vec<CoverLevel>,
    twinned: TwinnedSequence,
    vertex_table: Vec<Vec<TaggedVertex>>,
    #[serde(skip)]
    index: Vec<HashMap<Vertex, usize>>,
}

#[derive(Serialize, Deserialize, Clone)]
struct EncodingRepr {
    system: System,
    levels: Vec<CoverLevel>,
    twinned: TwinnedSequence,
    vertex_table: Vec<Vec<TaggedVertex>>,
}

impl TryFrom<EncodingRepr> for Encoding {
    type Error = EncodeError;
    fn try_from(r: EncodingRepr) -> Result<Self, EncodeError> {
        Encoding::assemble(r.system, r.levels, r.twinned, r.vertex_table)
    }
}

impl From<Encoding> for EncodingRepr {
    fn from(e: Encoding) -> Self {
        EncodingRepr {
            system: e.system,
            levels: e.levels,
            twinned: e.twinned,
            vertex_table: e.vertex_table,
        }
    }
}

impl Encoding {
    /// Structural consistency (ids, parents, set indices) plus index
    /// construction; the axioms themselves are checked by
    /// [`TwinnedSequence::validate`] and [`verify_conditions`].
    pub fn assemble(
        system: System,
        levels: Vec<CoverLevel>,
        twinned: TwinnedSequence,
        vertex_table: Vec<Vec<TaggedVertex>>,
    ) -> Result<Encoding, EncodeError> {
        if levels.len() != twinned.g_levels().len() || vertex_table.len() != levels.len() {
            return Err(EncodeError::InconsistentBundle(
                "levels, graphs and vertex table have different lengths".into(),
            ));
        }
        let mut index = Vec::with_capacity(vertex_table.len());
        for (i, tags) in vertex_table.iter().enumerate() {
            let mut m = HashMap::with_capacity(tags.len());
            for (k, t) in tags.iter().enumerate() {
                if t.level != i {
                    return Err(EncodeError::InconsistentBundle(format!(
                        "tag {} filed at level {i} claims level {}",
                        t.id, t.level
                    )));
                }
                if t.set_id >= levels[i].cover.elements.len() {
                    return Err(EncodeError::InconsistentBundle(format!(
                        "tag {} references missing cover element {}",
                        t.id, t.set_id
                    )));
                }
                if m.insert(t.id.clone(), k).is_some() {
                    return Err(EncodeError::InconsistentBundle(format!(
                        "duplicate vertex id {} at level {i}",
                        t.id
                    )));
                }
            }
            if twinned.g_levels()[i]
                .vertices()
                .iter()
                .any(|v| !m.contains_key(v))
            {
                return Err(EncodeError::InconsistentBundle(format!(
                    "level {i} graph has vertices missing from the tag table"
                )));
            }
            index.push(m);
        }
        Ok(Encoding {
            system,
            levels,
            twinned,
            vertex_table,
            index,
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn levels(&self) -> &[CoverLevel] {
        &self.levels
    }

    pub fn twinned(&self) -> &TwinnedSequence {
        &self.twinned
    }

    pub fn vertex_table(&self) -> &[Vec<TaggedVertex>] {
        &self.vertex_table
    }

    pub fn max_depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn tagged_vertex(&self, level: usize, id: &str) -> Option<&TaggedVertex> {
        let k = *self.index.get(level)?.get(id)?;
        Some(&self.vertex_table[level][k])
    }

    /// The open set behind a level vertex.
    pub fn underlying_set(&self, level: usize, id: &str) -> Option<&OpenSet> {
        let t = self.tagged_vertex(level, id)?;
        Some(&self.levels[level].cover.elements[t.set_id])
    }
}

/// ε for a cover: max{mesh f(𝒰), mesh 𝒰}, with a positive fallback
/// resolution when both meshes are zero (singleton elements on a
/// discrete backend), chosen small enough that ε-fattening is the
/// identity on such elements.
pub fn epsilon_for(sys: &System, cover: &Cover) -> Result<Rat, SystemError> {
    let e = systems::image_mesh(sys, cover)?.max(systems::mesh(sys, cover)?);
    if e > rat::rat_zero() {
        return Ok(e);
    }
    Ok(match sys {
        System::Finite(f) => match f.min_positive_distance() {
            Some(d) => d / rat::rat(2, 1),
            None => rat::rat_one(),
        },
        System::Shift(_) => {
            let max_len = cover
                .elements
                .iter()
                .map(|e| match e {
                    OpenSet::Cylinders { words } => words.max_len(),
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            rat::two_pow_neg(max_len as u32 + 2)
        }
        // a finite open cover of [0, 1] always has an element of positive
        // diameter, so this branch is unreachable for valid covers
        System::PlInterval(_) => rat::rat_one(),
    })
}

/// The relation f^𝒰 on cover elements: (U, V) related iff f(U) ∩ V ≠ ∅.
/// Elements are keyed by their decimal index in the cover.
pub fn f_relation(sys: &System, cover: &Cover) -> Result<Relation, EncodeError> {
    let labels: Vec<Vertex> = (0..cover.elements.len()).map(|k| k.to_string()).collect();
    let bidx = BoundsIndex::build(&cover.elements);
    let mut pairs = BTreeSet::new();
    for (a, u) in cover.elements.iter().enumerate() {
        let img = systems::image(sys, u)?;
        for b in candidate_indices(&bidx, &img, cover.elements.len()) {
            if systems::intersects(sys, &img, &cover.elements[b])? {
                pairs.insert((labels[a].clone(), labels[b].clone()));
            }
        }
    }
    Ok(Relation::new(labels.clone(), labels, pairs)?)
}

/// Exact check of the cover-sequence conditions for every level.
pub fn verify_conditions(sys: &System, levels: &[CoverLevel]) -> Vec<ConditionViolation> {
    let mut out = Vec::new();
    if levels.is_empty() {
        return out;
    }
    for (i, level) in levels.iter().enumerate() {
        if let Err(e) = level.cover.validate(sys) {
            out.push(ConditionViolation {
                level: i,
                condition: Condition::C1,
                detail: e.to_string(),
            });
        }
        match epsilon_for(sys, &level.cover) {
            Ok(e) if e == level.epsilon => {}
            Ok(e) => out.push(ConditionViolation {
                level: i,
                condition: Condition::Epsilon,
                detail: format!(
                    "stored ε = {} but the cover gives {}",
                    rat::format_rat(&level.epsilon),
                    rat::format_rat(&e)
                ),
            }),
            Err(e) => out.push(ConditionViolation {
                level: i,
                condition: Condition::Epsilon,
                detail: e.to_string(),
            }),
        }
    }
    // C1 proper: level 0 is the one-element cover {X}
    let whole = sys.whole();
    let l0 = &levels[0].cover;
    let is_whole = l0.elements.len() == 1
        && systems::subset(sys, &whole, &l0.elements[0]).unwrap_or(false)
        && systems::subset(sys, &l0.elements[0], &whole).unwrap_or(false);
    if !is_whole {
        out.push(ConditionViolation {
            level: 0,
            condition: Condition::C1,
            detail: "level 0 must be the single-element cover {X}".into(),
        });
    }
    for i in 1..levels.len() {
        out.extend(check_level_pair(sys, &levels[i - 1], &levels[i], i));
    }
    out
}

/// C2, C3 and C5 for one consecutive pair, with `i` the true level index
/// of `cand`.
fn check_level_pair(
    sys: &System,
    prev: &CoverLevel,
    cand: &CoverLevel,
    i: usize,
) -> Vec<ConditionViolation> {
    let mut out = Vec::new();
    let fail = |condition, detail: String| ConditionViolation {
        level: i,
        condition,
        detail,
    };

    // C3: mesh ≤ 2^{-i}
    match systems::mesh(sys, &cand.cover) {
        Ok(m) => {
            if m > rat::two_pow_neg(i as u32) {
                out.push(fail(
                    Condition::C3,
                    format!("mesh = {} > 2^-{i}", rat::format_rat(&m)),
                ));
            }
        }
        Err(e) => out.push(fail(Condition::C3, e.to_string())),
    }

    // C2: fattened elements refine the previous level, and the doubled
    // fattened meshes stay strictly below the previous ε
    let fattened: Vec<OpenSet> = match cand
        .cover
        .elements
        .iter()
        .map(|e| systems::fatten(sys, e, &cand.epsilon))
        .collect::<Result<_, _>>()
    {
        Ok(v) => v,
        Err(e) => {
            out.push(fail(Condition::C2, e.to_string()));
            return out;
        }
    };
    let prev_idx = BoundsIndex::build(&prev.cover.elements);
    for (k, fat) in fattened.iter().enumerate() {
        let contained = candidate_indices(&prev_idx, fat, prev.cover.elements.len())
            .into_iter()
            .any(|p| systems::subset(sys, fat, &prev.cover.elements[p]).unwrap_or(false));
        if !contained {
            out.push(fail(
                Condition::C2,
                format!("ε-fattening of element {k} fits in no previous element"),
            ));
            break;
        }
    }
    let fat_cover = Cover::new(fattened);
    match (systems::mesh(sys, &fat_cover), systems::image_mesh(sys, &fat_cover)) {
        (Ok(m), Ok(im)) => {
            let doubled = rat::rat(2, 1) * m.max(im);
            if doubled >= prev.epsilon {
                out.push(fail(
                    Condition::C2,
                    format!(
                        "2·max fattened mesh = {} ≥ previous ε = {}",
                        rat::format_rat(&doubled),
                        rat::format_rat(&prev.epsilon)
                    ),
                ));
            }
        }
        (Err(e), _) | (_, Err(e)) => out.push(fail(Condition::C2, e.to_string())),
    }

    // C5: every previous element is exactly the union of the current
    // elements contained in it
    let cand_idx = BoundsIndex::build(&cand.cover.elements);
    for (p, parent) in prev.cover.elements.iter().enumerate() {
        let mut union: Option<OpenSet> = None;
        for k in candidate_indices(&cand_idx, parent, cand.cover.elements.len()) {
            let u = &cand.cover.elements[k];
            if systems::subset(sys, u, parent).unwrap_or(false) {
                union = Some(match union {
                    None => u.clone(),
                    Some(acc) => match systems::union(sys, &acc, u) {
                        Ok(x) => x,
                        Err(e) => {
                            out.push(fail(Condition::C5, e.to_string()));
                            return out;
                        }
                    },
                });
            }
        }
        let exact = match &union {
            None => false,
            Some(acc) => systems::subset(sys, parent, acc).unwrap_or(false),
        };
        if !exact {
            out.push(fail(
                Condition::C5,
                format!("previous element {p} is not the union of its refinements"),
            ));
            break;
        }
    }

    out
}

/// Refine one cover level into the next, searching granularities until
/// the conditions hold exactly.
pub fn refine_cover(
    sys: &System,
    previous: &CoverLevel,
    i: usize,
) -> Result<CoverLevel, EncodeError> {
    assert!(i >= 1, "level 0 is fixed to {{X}}");
    match sys {
        System::Finite(f) => {
            let elements: Vec<OpenSet> = f
                .points()
                .iter()
                .map(|p| OpenSet::finite([p.clone()]))
                .collect();
            let cover = Cover::new(elements);
            let epsilon = epsilon_for(sys, &cover)?;
            let cand = CoverLevel { cover, epsilon };
            let report = check_level_pair(sys, previous, &cand, i);
            match report.first() {
                None => Ok(cand),
                Some(v) => Err(EncodeError::RefinementCapExceeded {
                    level: i,
                    last_failure: format!("singleton cover fails: {v}"),
                }),
            }
        }
        System::Shift(s) => {
            let prev_len = previous
                .cover
                .elements
                .iter()
                .map(|e| match e {
                    OpenSet::Cylinders { words } => words.max_len(),
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            let mut last_failure = String::from("no candidate tried");
            for len in prev_len + 1..=prev_len + SHIFT_REFINE_MAX_EXTRA {
                let elements: Vec<OpenSet> = s
                    .allowed_words(len)
                    .into_iter()
                    .map(|w| OpenSet::cylinders(CylinderSet::cylinder(s, w)))
                    .collect();
                let cover = Cover::new(elements);
                let epsilon = epsilon_for(sys, &cover)?;
                let cand = CoverLevel { cover, epsilon };
                match check_level_pair(sys, previous, &cand, i).first() {
                    None => return Ok(cand),
                    Some(v) => last_failure = format!("cylinder length {len}: {v}"),
                }
            }
            Err(EncodeError::RefinementCapExceeded {
                level: i,
                last_failure,
            })
        }
        System::PlInterval(_) => {
            // target piece size: 2·stride ≤ 2s, so s = 2^{-i}/2 meets C3
            // on the first try; halve until C2 holds as well
            let mut s = rat::two_pow_neg(i as u32) / rat::rat(2, 1);
            let mut last_failure = String::from("no candidate tried");
            for _ in 0..PL_REFINE_MAX_HALVINGS {
                let cover = split_interval_cover(&previous.cover, &s);
                let epsilon = epsilon_for(sys, &cover)?;
                let cand = CoverLevel { cover, epsilon };
                match check_level_pair(sys, previous, &cand, i).first() {
                    None => return Ok(cand),
                    Some(v) => last_failure = format!("piece size {}: {v}", rat::format_rat(&s)),
                }
                s /= rat::rat(2, 1);
            }
            Err(EncodeError::RefinementCapExceeded {
                level: i,
                last_failure,
            })
        }
    }
}

/// Splits every constituent interval of every parent into overlapping
/// open pieces of stride ≤ `s` (piece diameter ≤ 2·stride), clipped to
/// the parent so each parent is exactly the union of its pieces.
fn split_interval_cover(parents: &Cover, s: &Rat) -> Cover {
    let mut elements: Vec<OpenSet> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for parent in &parents.elements {
        let OpenSet::Interval { intervals } = parent else {
            continue;
        };
        for iv in intervals.intervals() {
            let width = &iv.hi - &iv.lo;
            if width == rat::rat_zero() {
                continue; // degenerate closed point: kept by a neighbour
            }
            let k = ceil_div(&width, s).max(1);
            let stride = &width / Rat::from_integer(k.into());
            // overlap collar of stride/4: wide enough that an edge piece
            // fattened by ε still fits inside the neighbouring parent,
            // narrow enough to keep element counts near W/stride
            let margin = &stride / rat::rat(4, 1);
            for j in 0..k {
                let lo = &iv.lo + &stride * Rat::from_integer(j.into()) - &margin;
                let hi = &iv.lo + &stride * Rat::from_integer((j + 1).into()) + &margin;
                let piece = IntervalSet::from_intervals([Interval::new(lo, false, hi, false)
                    .expect("positive width")])
                .intersection(&IntervalSet::from_intervals([iv.clone()]));
                if piece.is_empty() {
                    continue;
                }
                let set = OpenSet::interval(piece);
                let key = serde_json::to_string(&set).expect("serializable");
                if seen.insert(key) {
                    elements.push(set);
                }
            }
        }
    }
    Cover::new(elements)
}

fn ceil_div(a: &Rat, b: &Rat) -> u64 {
    let q = a / b;
    let f = q.floor();
    let n = f.to_integer();
    let n: u64 = n.try_into().expect("nonnegative small quotient");
    if q == f.clone() {
        n
    } else {
        n + 1
    }
}

/// Sorted endpoint bounds over interval-backed sets, used to avoid
/// quadratic pair scans on the interval backend. `None` on the other
/// backends (whose levels are small enough for exhaustive scans).
struct BoundsIndex {
    by_lo: Vec<(Rat, usize)>,
    max_width: Rat,
}

impl BoundsIndex {
    fn build(sets: &[OpenSet]) -> Option<BoundsIndex> {
        let mut by_lo = Vec::with_capacity(sets.len());
        let mut max_width = rat::rat_zero();
        for (k, s) in sets.iter().enumerate() {
            let (lo, hi) = pl_bounds(s)?;
            let w = &hi - &lo;
            if w > max_width {
                max_width = w;
            }
            by_lo.push((lo, k));
        }
        by_lo.sort();
        Some(BoundsIndex { by_lo, max_width })
    }

    /// Indices whose bounding interval can overlap [qlo, qhi].
    fn overlapping(&self, qlo: &Rat, qhi: &Rat) -> Vec<usize> {
        let floor = qlo - &self.max_width;
        let start = self.by_lo.partition_point(|(lo, _)| *lo < floor);
        self.by_lo[start..]
            .iter()
            .take_while(|(lo, _)| lo <= qhi)
            .map(|(_, k)| *k)
            .collect()
    }
}

fn pl_bounds(set: &OpenSet) -> Option<(Rat, Rat)> {
    if let OpenSet::Interval { intervals } = set {
        Some((
            intervals.min_endpoint()?.clone(),
            intervals.max_endpoint()?.clone(),
        ))
    } else {
        None
    }
}

fn candidate_indices(idx: &Option<BoundsIndex>, query: &OpenSet, total: usize) -> Vec<usize> {
    match (idx, pl_bounds(query)) {
        (Some(ix), Some((qlo, qhi))) => ix.overlapping(&qlo, &qhi),
        _ => (0..total).collect(),
    }
}

/// The graphs of one level plus its tag table and bonding assignment.
pub struct LevelGraphs {
    pub g: Graph,
    pub f: Graph,
    pub bonding_map: BTreeMap<Vertex, Vertex>,
    pub tags: Vec<TaggedVertex>,
}

/// Tags for level `i`: one copy of each cover element per parent
/// containing it, sorted by (parent order, set_id).
fn tags_for_level(
    sys: &System,
    levels: &[CoverLevel],
    i: usize,
    parent_tags: &[TaggedVertex],
) -> Result<Vec<TaggedVertex>, EncodeError> {
    if i == 0 {
        return Ok(vec![TaggedVertex {
            id: "n0_0".into(),
            level: 0,
            parent: None,
            set_id: 0,
        }]);
    }
    let elements = &levels[i].cover.elements;
    let bidx = BoundsIndex::build(elements);
    let mut tags = Vec::new();
    let mut covered = vec![false; elements.len()];
    for p in parent_tags {
        let parent_set = &levels[i - 1].cover.elements[p.set_id];
        let mut members: Vec<usize> = candidate_indices(&bidx, parent_set, elements.len())
            .into_iter()
            .filter(|&k| systems::subset(sys, &elements[k], parent_set).unwrap_or(false))
            .collect();
        members.sort_unstable();
        for k in members {
            covered[k] = true;
            tags.push(TaggedVertex {
                id: format!("n{i}_{}", tags.len()),
                level: i,
                parent: Some(p.id.clone()),
                set_id: k,
            });
        }
    }
    if let Some(k) = covered.iter().position(|c| !c) {
        return Err(EncodeError::UncoveredElement {
            level: i,
            element: k,
        });
    }
    Ok(tags)
}

/// Level graphs from tags: G-edges by image intersection, F-edges by
/// ε-fattened intersection, both computed on the underlying elements and
/// expanded to the tagged copies; the bonding map returns each tag's
/// parent.
fn graphs_for_level(
    sys: &System,
    levels: &[CoverLevel],
    i: usize,
    tags: Vec<TaggedVertex>,
) -> Result<LevelGraphs, EncodeError> {
    let level = &levels[i];
    let elements = &level.cover.elements;
    let m = elements.len();

    let images: Vec<OpenSet> = elements
        .iter()
        .map(|e| systems::image(sys, e))
        .collect::<Result<_, _>>()?;
    let fattened: Vec<OpenSet> = elements
        .iter()
        .map(|e| systems::fatten(sys, e, &level.epsilon))
        .collect::<Result<_, _>>()?;

    let bidx = BoundsIndex::build(elements);
    let fat_idx = BoundsIndex::build(&fattened);

    // element-level relations; tags sharing a set_id share all edges
    let mut g_rel: Vec<Vec<usize>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut row = Vec::new();
        for b in candidate_indices(&bidx, &images[a], m) {
            if systems::intersects(sys, &images[a], &elements[b])? {
                row.push(b);
            }
        }
        g_rel.push(row);
    }
    let mut f_rel: Vec<Vec<usize>> = Vec::with_capacity(m);
    for a in 0..m {
        let mut row = Vec::new();
        for b in candidate_indices(&fat_idx, &fattened[a], m) {
            if systems::intersects(sys, &fattened[a], &fattened[b])? {
                row.push(b);
            }
        }
        f_rel.push(row);
    }

    let mut by_set: Vec<Vec<&TaggedVertex>> = vec![Vec::new(); m];
    for t in &tags {
        by_set[t.set_id].push(t);
    }

    let vertices: Vec<Vertex> = tags.iter().map(|t| t.id.clone()).collect();
    let mut g_edges: Vec<(Vertex, Vertex)> = Vec::new();
    let mut f_edges: Vec<(Vertex, Vertex)> = Vec::new();
    for (ea, row) in g_rel.iter().enumerate() {
        for &eb in row {
            for a in &by_set[ea] {
                for b in &by_set[eb] {
                    g_edges.push((a.id.clone(), b.id.clone()));
                }
            }
        }
    }
    for (ea, row) in f_rel.iter().enumerate() {
        for &eb in row {
            for a in &by_set[ea] {
                for b in &by_set[eb] {
                    f_edges.push((a.id.clone(), b.id.clone()));
                }
            }
        }
    }

    let g = Graph::directed(vertices.clone(), g_edges)?;
    let f = Graph::symmetric(vertices, f_edges)?;
    let bonding_map: BTreeMap<Vertex, Vertex> = tags
        .iter()
        .filter_map(|t| t.parent.as_ref().map(|p| (t.id.clone(), p.clone())))
        .collect();
    Ok(LevelGraphs {
        g,
        f,
        bonding_map,
        tags,
    })
}

/// Builds the level-`i` graphs from an already-refined cover list,
/// reconstructing the tag tables of the lower levels.
pub fn build_level(
    sys: &System,
    levels: &[CoverLevel],
    i: usize,
) -> Result<LevelGraphs, EncodeError> {
    assert!(i < levels.len());
    let mut parent_tags = tags_for_level(sys, levels, 0, &[])?;
    for j in 1..=i {
        let tags = tags_for_level(sys, levels, j, &parent_tags)?;
        if j == i {
            return graphs_for_level(sys, levels, i, tags);
        }
        parent_tags = tags;
    }
    graphs_for_level(sys, levels, 0, parent_tags)
}

/// Encodes a system to the given depth: refines covers level by level
/// and assembles the twinned sequence with its tag table.
pub fn encode(sys: &System, depth: usize) -> Result<Encoding, EncodeError> {
    let cover0 = Cover::new(vec![sys.whole()]);
    let epsilon0 = epsilon_for(sys, &cover0)?;
    let mut levels = vec![CoverLevel {
        cover: cover0,
        epsilon: epsilon0,
    }];

    let root = tags_for_level(sys, &levels, 0, &[])?;
    let mut built = vec![graphs_for_level(sys, &levels, 0, root)?];
    for i in 1..=depth {
        let next = refine_cover(sys, &levels[i - 1], i)?;
        levels.push(next);
        let tags = tags_for_level(sys, &levels, i, &built[i - 1].tags)?;
        built.push(graphs_for_level(sys, &levels, i, tags)?);
    }

    let mut g_levels = Vec::with_capacity(built.len());
    let mut f_levels = Vec::with_capacity(built.len());
    let mut vertex_table = Vec::with_capacity(built.len());
    let mut bonding = Vec::new();
    for (i, lg) in built.iter().enumerate() {
        if i >= 1 {
            bonding.push(GraphHom::new(
                lg.g.clone(),
                built[i - 1].g.clone(),
                lg.bonding_map.clone(),
            )?);
        }
        g_levels.push(lg.g.clone());
        f_levels.push(lg.f.clone());
        vertex_table.push(lg.tags.clone());
    }
    let twinned = TwinnedSequence::new(g_levels, f_levels, bonding)?;
    Encoding::assemble(sys.clone(), levels, twinned, vertex_table)
}

/// The clopen partition path for subshifts: level i is the partition
/// into i-cylinders with the relation f^{𝒰_i} as edges and inclusion as
/// bonding. Every bonding map of the result is a graph cover.
pub fn encode_zero_dim(sys: &System, depth: usize) -> Result<GraphSequence, EncodeError> {
    let s = match sys {
        System::Shift(s) => s,
        System::Finite(_) => return Err(EncodeError::WrongBackend("finite".into())),
        System::PlInterval(_) => return Err(EncodeError::WrongBackend("pl_interval".into())),
    };
    let sep = if s.alphabet().iter().all(|a| a.len() == 1) {
        ""
    } else {
        "|"
    };
    let word_id = |w: &[String]| -> Vertex {
        if w.is_empty() {
            "ε".to_string()
        } else {
            w.join(sep)
        }
    };
    let mut graphs: Vec<Graph> = Vec::with_capacity(depth + 1);
    let mut bonding: Vec<GraphHom> = Vec::new();
    let mut prev_words: Vec<crate::systems::Word> = Vec::new();
    for i in 0..=depth {
        let words = s.allowed_words(i);
        let vertices: Vec<Vertex> = words.iter().map(|w| word_id(w)).collect();
        let mut edges: Vec<(Vertex, Vertex)> = Vec::new();
        for u in &words {
            for v in &words {
                // f(C(u)) meets C(v) iff the words overlap-merge to the
                // allowed word u[0]·v
                let ok = if i == 0 {
                    true
                } else if v[..v.len() - 1] == u[1..] {
                    let mut merged = vec![u[0].clone()];
                    merged.extend(v.iter().cloned());
                    s.is_allowed(&merged)
                } else {
                    false
                };
                if ok {
                    edges.push((word_id(u), word_id(v)));
                }
            }
        }
        let g = Graph::directed(vertices, edges)?;
        if i >= 1 {
            let map: BTreeMap<Vertex, Vertex> = words
                .iter()
                .map(|w| (word_id(w), word_id(&w[..i - 1])))
                .collect();
            bonding.push(GraphHom::new(g.clone(), graphs[i - 1].clone(), map)?);
        }
        graphs.push(g);
        prev_words = words;
    }
    let _ = prev_words;
    Ok(GraphSequence::new(graphs, bonding, SequenceKind::Covers)?)
}

/// Rebuilds every level graph from the bundle's covers and compares with
/// the stored graphs, catching any tampered vertex, edge or bonding
/// assignment. Returns the first discrepancy.
pub fn recheck_graphs(enc: &Encoding) -> Result<Option<String>, EncodeError> {
    let sys = enc.system();
    let levels = enc.levels();
    let ts = enc.twinned();
    let mut parent_tags: Vec<TaggedVertex> = Vec::new();
    for i in 0..levels.len() {
        let tags = tags_for_level(sys, levels, i, &parent_tags)?;
        if tags != enc.vertex_table()[i] {
            return Ok(Some(format!("level {i}: vertex table does not match the covers")));
        }
        let built = graphs_for_level(sys, levels, i, tags)?;
        if built.g != ts.g_levels()[i] {
            return Ok(Some(format!("level {i}: G-graph does not match the covers")));
        }
        if built.f != ts.f_levels()[i] {
            return Ok(Some(format!("level {i}: F-graph does not match the covers")));
        }
        if i >= 1 && &built.bonding_map != ts.bonding(i).map() {
            return Ok(Some(format!("level {i}: bonding map does not match the covers")));
        }
        parent_tags = built.tags;
    }
    Ok(None)
}

/// The decoder: the exact intersection of the closures of the sets along
/// a thread — the finite-depth enclosure of the point ψ maps the
/// thread's class to.
pub fn decode_psi(enc: &Encoding, t: &Thread) -> Result<OpenSet, EncodeError> {
    let path = enc.twinned().thread_path(t);
    let sys = enc.system();
    let mut acc: Option<OpenSet> = None;
    for (i, v) in path.iter().enumerate() {
        let set = enc
            .underlying_set(i, v)
            .ok_or_else(|| EncodeError::InconsistentBundle(format!("unknown vertex {v}")))?;
        let closed = systems::closure(sys, set)?;
        acc = Some(match acc {
            None => closed,
            Some(a) => systems::intersection_nonempty_closed(sys, &a, &closed)?,
        });
    }
    let enclosure = acc.expect("path is nonempty");
    if enclosure.is_empty() {
        return Err(EncodeError::EmptyEnclosure {
            depth: t.depth,
            vertex: t.last.clone(),
        });
    }
    Ok(enclosure)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacySample {
    pub thread: Vertex,
    pub class_members: BTreeSet<Vertex>,
    pub image_members: BTreeSet<Vertex>,
    #[serde(with = "crate::systems::rat")]
    pub class_diameter: Rat,
    #[serde(with = "crate::systems::rat")]
    pub image_diameter: Rat,
    pub commutes: bool,
    pub within_bound: bool,
    /// Exact f(A) = B on the finite backend when both enclosures are
    /// singletons; `None` otherwise.
    pub exact_equal: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConjugacyReport {
    pub depth: usize,
    pub seed: u64,
    pub requested_samples: usize,
    pub samples: Vec<ConjugacySample>,
    pub failures: usize,
}

impl ConjugacyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Samples depth-n classes and checks that the decoded dynamics commute:
/// f(A) meets B where A is the enclosure of the class and B the
/// enclosure of its image class one level down, both with diameter at
/// most 2^{-(n-1)}.
///
/// Classes are taken as raw F-neighbourhoods of the sampled thread — the
/// finite-depth approximants of the limit classes. (The equivalence
/// closure is the right quotient only in the limit: at finite depth it
/// over-merges on connected spaces, where overlapping cover elements
/// chain across the whole space.)
pub fn conjugacy_check(
    enc: &Encoding,
    depth: usize,
    samples: usize,
    seed: u64,
) -> Result<ConjugacyReport, EncodeError> {
    assert!(depth >= 1, "conjugacy check needs depth >= 1");
    let sys = enc.system();
    let ts = enc.twinned();
    let raw = ts.f_relation_at_depth(depth)?;
    let vertices: Vec<&Vertex> = ts.g_levels()[depth].vertices().iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = samples.min(vertices.len());
    let picked = rand::seq::index::sample(&mut rng, vertices.len(), count);

    let bound = rat::two_pow_neg((depth - 1) as u32);
    let mut report = ConjugacyReport {
        depth,
        seed,
        requested_samples: samples,
        samples: Vec::with_capacity(count),
        failures: 0,
    };
    for pi in picked.iter() {
        let x = vertices[pi];
        let mut members = relation_image(&raw, x)?;
        members.insert(x.clone());
        // image class one level down: successors' prefixes
        let phi = ts.bonding(depth);
        let mut image_members: BTreeSet<Vertex> = BTreeSet::new();
        for y in &members {
            for w in ts.g_levels()[depth].out_neighbors(y) {
                image_members.insert(phi.apply(w).clone());
            }
        }
        let enclosure_union = |ids: &BTreeSet<Vertex>, d: usize| -> Result<OpenSet, EncodeError> {
            let mut acc: Option<OpenSet> = None;
            for id in ids {
                let e = decode_psi(enc, &Thread {
                    depth: d,
                    last: id.clone(),
                })?;
                acc = Some(match acc {
                    None => e,
                    Some(a) => systems::union(sys, &a, &e)?,
                });
            }
            Ok(acc.expect("class is nonempty"))
        };
        let a = enclosure_union(&members, depth)?;
        let b = enclosure_union(&image_members, depth - 1)?;
        let fa = systems::image(sys, &a)?;
        let commutes = systems::intersects(sys, &fa, &b)?;
        let a_diam = systems::diam(sys, &a)?;
        let b_diam = systems::diam(sys, &b)?;
        let within_bound = a_diam <= bound && b_diam <= bound;
        let exact_equal = match sys {
            System::Finite(_) => {
                let singleton = |s: &OpenSet| match s {
                    OpenSet::Finite { points } => points.len() == 1,
                    _ => false,
                };
                if singleton(&a) && singleton(&b) {
                    Some(fa == b)
                } else {
                    None
                }
            }
            _ => None,
        };
        if !commutes || !within_bound || exact_equal == Some(false) {
            report.failures += 1;
        }
        report.samples.push(ConjugacySample {
            thread: x.clone(),
            class_members: members,
            image_members,
            class_diameter: a_diam,
            image_diameter: b_diam,
            commutes,
            within_bound,
            exact_equal,
        });
    }
    Ok(report)
}
