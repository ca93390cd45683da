//! Exact dynamical-system backends and their open-set algebra.
//!
//! Three backends are supported, all with decidable rational arithmetic:
//! finite metric systems, continuous piecewise linear self-maps of [0, 1]
//! and one-sided subshifts of finite type. No floating point is used
//! anywhere; axiom checks are strict inequalities and must be decided
//! exactly.

pub mod finite;
pub mod interval;
pub mod pl;
pub mod rat;
pub mod shift;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use finite::FiniteSystem;
pub use interval::{Interval, IntervalSet};
pub use pl::PlIntervalMap;
pub use rat::Rat;
pub use shift::{CylinderSet, ShiftSystem, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SystemError {
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("open set belongs to a different backend")]
    BackendMismatch,
    #[error("operation undefined on the empty set")]
    EmptySet,
    #[error("invalid cover: {0}")]
    InvalidCover(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum System {
    Finite(FiniteSystem),
    PlInterval(PlIntervalMap),
    Shift(ShiftSystem),
}

/// A backend-tagged exactly representable subset of the state space.
/// Interval variants may carry closed endpoints (closures, PL images);
/// the other two backends are clopen throughout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum OpenSet {
    Finite { points: BTreeSet<String> },
    Interval { intervals: IntervalSet },
    Cylinders { words: CylinderSet },
}

impl OpenSet {
    pub fn finite(points: impl IntoIterator<Item = String>) -> OpenSet {
        OpenSet::Finite {
            points: points.into_iter().collect(),
        }
    }

    pub fn interval(intervals: IntervalSet) -> OpenSet {
        OpenSet::Interval { intervals }
    }

    pub fn cylinders(words: CylinderSet) -> OpenSet {
        OpenSet::Cylinders { words }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            OpenSet::Finite { points } => points.is_empty(),
            OpenSet::Interval { intervals } => intervals.is_empty(),
            OpenSet::Cylinders { words } => words.is_empty(),
        }
    }
}

impl System {
    /// The whole state space as a set.
    pub fn whole(&self) -> OpenSet {
        match self {
            System::Finite(f) => OpenSet::finite(f.points().iter().cloned()),
            System::PlInterval(_) => OpenSet::interval(IntervalSet::whole()),
            System::Shift(_) => OpenSet::cylinders(CylinderSet::whole()),
        }
    }

    pub fn space_diameter(&self) -> Rat {
        match self {
            System::Finite(f) => f.space_diameter(),
            System::PlInterval(_) => rat::rat_one(),
            System::Shift(s) => CylinderSet::whole().diameter(s),
        }
    }
}

/// Exact forward image `f(U)`. For the PL backend the result may have
/// closed endpoints (attained extrema).
pub fn image(sys: &System, u: &OpenSet) -> Result<OpenSet, SystemError> {
    match (sys, u) {
        (System::Finite(f), OpenSet::Finite { points }) => Ok(OpenSet::finite(f.image(points))),
        (System::PlInterval(m), OpenSet::Interval { intervals }) => {
            Ok(OpenSet::interval(m.image(intervals)))
        }
        (System::Shift(s), OpenSet::Cylinders { words }) => {
            Ok(OpenSet::cylinders(words.image(s)))
        }
        _ => Err(SystemError::BackendMismatch),
    }
}

/// Exact open ε-neighbourhood `B(U, ε)`.
pub fn fatten(sys: &System, u: &OpenSet, eps: &Rat) -> Result<OpenSet, SystemError> {
    assert!(eps > &rat::rat_zero(), "epsilon must be positive");
    match (sys, u) {
        (System::Finite(f), OpenSet::Finite { points }) => {
            Ok(OpenSet::finite(f.fatten(points, eps)))
        }
        (System::PlInterval(_), OpenSet::Interval { intervals }) => {
            Ok(OpenSet::interval(intervals.fatten(eps)))
        }
        (System::Shift(s), OpenSet::Cylinders { words }) => {
            Ok(OpenSet::cylinders(words.fatten(s, eps)))
        }
        _ => Err(SystemError::BackendMismatch),
    }
}

/// Topological closure; finite and shift sets are clopen already.
pub fn closure(sys: &System, u: &OpenSet) -> Result<OpenSet, SystemError> {
    match (sys, u) {
        (System::Finite(_), OpenSet::Finite { .. })
        | (System::Shift(_), OpenSet::Cylinders { .. }) => Ok(u.clone()),
        (System::PlInterval(_), OpenSet::Interval { intervals }) => {
            Ok(OpenSet::interval(intervals.closure()))
        }
        _ => Err(SystemError::BackendMismatch),
    }
}

pub fn intersects(sys: &System, a: &OpenSet, b: &OpenSet) -> Result<bool, SystemError> {
    match (sys, a, b) {
        (System::Finite(_), OpenSet::Finite { points: p }, OpenSet::Finite { points: q }) => {
            Ok(p.intersection(q).next().is_some())
        }
        (
            System::PlInterval(_),
            OpenSet::Interval { intervals: x },
            OpenSet::Interval { intervals: y },
        ) => Ok(x.intersects(y)),
        (
            System::Shift(s),
            OpenSet::Cylinders { words: x },
            OpenSet::Cylinders { words: y },
        ) => Ok(x.intersects(s, y)),
        _ => Err(SystemError::BackendMismatch),
    }
}

pub fn subset(sys: &System, a: &OpenSet, b: &OpenSet) -> Result<bool, SystemError> {
    match (sys, a, b) {
        (System::Finite(_), OpenSet::Finite { points: p }, OpenSet::Finite { points: q }) => {
            Ok(p.is_subset(q))
        }
        (
            System::PlInterval(_),
            OpenSet::Interval { intervals: x },
            OpenSet::Interval { intervals: y },
        ) => Ok(x.subset_of(y)),
        (
            System::Shift(s),
            OpenSet::Cylinders { words: x },
            OpenSet::Cylinders { words: y },
        ) => Ok(x.subset_of(s, y)),
        _ => Err(SystemError::BackendMismatch),
    }
}

pub fn union(sys: &System, a: &OpenSet, b: &OpenSet) -> Result<OpenSet, SystemError> {
    match (sys, a, b) {
        (System::Finite(_), OpenSet::Finite { points: p }, OpenSet::Finite { points: q }) => {
            Ok(OpenSet::finite(p.union(q).cloned()))
        }
        (
            System::PlInterval(_),
            OpenSet::Interval { intervals: x },
            OpenSet::Interval { intervals: y },
        ) => Ok(OpenSet::interval(x.union(y))),
        (
            System::Shift(s),
            OpenSet::Cylinders { words: x },
            OpenSet::Cylinders { words: y },
        ) => Ok(OpenSet::cylinders(x.union(s, y))),
        _ => Err(SystemError::BackendMismatch),
    }
}

pub fn intersection_nonempty_closed(
    sys: &System,
    a: &OpenSet,
    b: &OpenSet,
) -> Result<OpenSet, SystemError> {
    match (sys, a, b) {
        (System::Finite(_), OpenSet::Finite { points: p }, OpenSet::Finite { points: q }) => {
            Ok(OpenSet::finite(p.intersection(q).cloned()))
        }
        (
            System::PlInterval(_),
            OpenSet::Interval { intervals: x },
            OpenSet::Interval { intervals: y },
        ) => Ok(OpenSet::interval(x.intersection(y))),
        (
            System::Shift(s),
            OpenSet::Cylinders { words: x },
            OpenSet::Cylinders { words: y },
        ) => {
            let n = x.max_len().max(y.max_len());
            let xs = x.refine(s, n);
            let ys = y.refine(s, n);
            Ok(OpenSet::cylinders(CylinderSet::from_words(
                s,
                xs.intersection(&ys).cloned(),
            )))
        }
        _ => Err(SystemError::BackendMismatch),
    }
}

/// Exact diameter; errors on the empty set.
pub fn diam(sys: &System, u: &OpenSet) -> Result<Rat, SystemError> {
    if u.is_empty() {
        return Err(SystemError::EmptySet);
    }
    match (sys, u) {
        (System::Finite(f), OpenSet::Finite { points }) => Ok(f.diameter(points)),
        (System::PlInterval(_), OpenSet::Interval { intervals }) => {
            Ok(intervals.diameter().expect("nonempty"))
        }
        (System::Shift(s), OpenSet::Cylinders { words }) => Ok(words.diameter(s)),
        _ => Err(SystemError::BackendMismatch),
    }
}

/// A finite open cover: nonempty elements whose union is the whole space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cover {
    pub elements: Vec<OpenSet>,
}

impl Cover {
    pub fn new(elements: Vec<OpenSet>) -> Cover {
        Cover { elements }
    }

    /// Checks the cover axioms: no empty element and union = X.
    pub fn validate(&self, sys: &System) -> Result<(), SystemError> {
        if self.elements.is_empty() {
            return Err(SystemError::InvalidCover("no elements".into()));
        }
        if let Some(i) = self.elements.iter().position(|e| e.is_empty()) {
            return Err(SystemError::InvalidCover(format!("element {i} is empty")));
        }
        let mut acc = self.elements[0].clone();
        for e in &self.elements[1..] {
            acc = union(sys, &acc, e)?;
        }
        if !subset(sys, &sys.whole(), &acc)? {
            return Err(SystemError::InvalidCover("union is not the whole space".into()));
        }
        Ok(())
    }
}

/// `mesh U = max over elements of diam`.
pub fn mesh(sys: &System, cover: &Cover) -> Result<Rat, SystemError> {
    let mut best = rat::rat_zero();
    for e in &cover.elements {
        let d = diam(sys, e)?;
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// Mesh of the image family `f(U) = {f(U) : U ∈ 𝒰}`.
pub fn image_mesh(sys: &System, cover: &Cover) -> Result<Rat, SystemError> {
    let mut best = rat::rat_zero();
    for e in &cover.elements {
        let d = diam(sys, &image(sys, e)?)?;
        if d > best {
            best = d;
        }
    }
    Ok(best)
}

/// A certified positive lower bound on the Lebesgue number: every set of
/// diameter below the bound lies inside one cover element.
pub fn lebesgue_lower_bound(sys: &System, cover: &Cover) -> Result<Rat, SystemError> {
    cover.validate(sys)?;
    match sys {
        System::Finite(f) => {
            let points: Vec<&String> = f.points().iter().collect();
            let n = points.len();
            assert!(n <= 20, "finite Lebesgue bound is exhaustive over subsets");
            let mut worst: Option<Rat> = None;
            for mask in 1u32..(1 << n) {
                let sub: BTreeSet<String> = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| points[i].clone())
                    .collect();
                let fits = cover.elements.iter().any(|e| match e {
                    OpenSet::Finite { points } => sub.is_subset(points),
                    _ => false,
                });
                if !fits {
                    let d = f.diameter(&sub);
                    if worst.as_ref().map_or(true, |w| d < *w) {
                        worst = Some(d);
                    }
                }
            }
            match worst {
                Some(d) => Ok(d),
                None => {
                    let d = f.space_diameter();
                    Ok(if d > rat::rat_zero() { d } else { rat::rat_one() })
                }
            }
        }
        System::PlInterval(_) => {
            let mut intervals: Vec<Interval> = Vec::new();
            for e in &cover.elements {
                if let OpenSet::Interval { intervals: set } = e {
                    intervals.extend(set.intervals().iter().cloned());
                }
            }
            // drop intervals contained in another single interval
            let kept: Vec<Interval> = intervals
                .iter()
                .filter(|a| {
                    !intervals
                        .iter()
                        .any(|b| b != *a && a.subset_of(b))
                })
                .cloned()
                .collect();
            let mut kept = kept;
            kept.sort_by(|a, b| a.lo.cmp(&b.lo).then(a.hi.cmp(&b.hi)));
            kept.dedup();
            if kept.len() == 1 {
                return Ok(rat::rat_one());
            }
            let mut min_overlap: Option<Rat> = None;
            for w in kept.windows(2) {
                let overlap = &w[0].hi - &w[1].lo;
                if overlap <= rat::rat_zero() {
                    return Err(SystemError::InvalidCover(
                        "consecutive intervals do not overlap".into(),
                    ));
                }
                if min_overlap.as_ref().map_or(true, |m| overlap < *m) {
                    min_overlap = Some(overlap);
                }
            }
            Ok(min_overlap.expect("at least two intervals") / rat::rat(2, 1))
        }
        System::Shift(s) => {
            let max_len = cover
                .elements
                .iter()
                .map(|e| match e {
                    OpenSet::Cylinders { words } => words.max_len(),
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            for m in 0..=max_len {
                let all_fit = s.allowed_words(m).into_iter().all(|w| {
                    let c = OpenSet::cylinders(CylinderSet::cylinder(s, w));
                    cover
                        .elements
                        .iter()
                        .any(|e| subset(sys, &c, e).unwrap_or(false))
                });
                if all_fit {
                    return Ok(if m == 0 {
                        let d = sys.space_diameter();
                        if d > rat::rat_zero() {
                            d
                        } else {
                            rat::rat_one()
                        }
                    } else {
                        rat::two_pow_neg((m - 1) as u32)
                    });
                }
            }
            Err(SystemError::InvalidCover(
                "no cylinder level fits inside a single element".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::rat::rat;
    use super::*;

    fn tent() -> System {
        System::PlInterval(PlIntervalMap::tent())
    }

    fn overlap_cover() -> Cover {
        Cover::new(vec![
            OpenSet::interval(IntervalSet::from_intervals([Interval::new(
                rat(0, 1),
                true,
                rat(3, 5),
                false,
            )
            .unwrap()])),
            OpenSet::interval(IntervalSet::from_intervals([Interval::new(
                rat(2, 5),
                false,
                rat(1, 1),
                true,
            )
            .unwrap()])),
        ])
    }

    #[test]
    fn tent_image_of_prefix() {
        let u = OpenSet::interval(IntervalSet::from_intervals([Interval::new(
            rat(0, 1),
            true,
            rat(3, 5),
            false,
        )
        .unwrap()]));
        let img = image(&tent(), &u).unwrap();
        assert_eq!(img, OpenSet::interval(IntervalSet::whole()));
    }

    #[test]
    fn mesh_of_overlap_cover() {
        assert_eq!(mesh(&tent(), &overlap_cover()).unwrap(), rat(3, 5));
    }

    #[test]
    fn lebesgue_bound_is_half_overlap() {
        assert_eq!(
            lebesgue_lower_bound(&tent(), &overlap_cover()).unwrap(),
            rat(1, 10)
        );
    }

    #[test]
    fn lebesgue_bound_whole_space_cover() {
        let c = Cover::new(vec![OpenSet::interval(IntervalSet::whole())]);
        assert_eq!(lebesgue_lower_bound(&tent(), &c).unwrap(), rat(1, 1));
    }

    #[test]
    fn lebesgue_finite_singletons() {
        let sys = System::Finite(FiniteSystem::swap());
        let c = Cover::new(vec![
            OpenSet::finite(["p".to_string()]),
            OpenSet::finite(["q".to_string()]),
        ]);
        assert_eq!(lebesgue_lower_bound(&sys, &c).unwrap(), rat(1, 1));
    }

    #[test]
    fn lebesgue_shift_partition() {
        let s = ShiftSystem::full_two();
        let sys = System::Shift(s.clone());
        let c = Cover::new(vec![
            OpenSet::cylinders(CylinderSet::cylinder(&s, vec!["0".into()])),
            OpenSet::cylinders(CylinderSet::cylinder(&s, vec!["1".into()])),
        ]);
        // every 1-cylinder fits, so δ = 2^0 = 1
        assert_eq!(lebesgue_lower_bound(&sys, &c).unwrap(), rat(1, 1));
    }

    #[test]
    fn cover_validation_rejects_gap() {
        let c = Cover::new(vec![OpenSet::interval(IntervalSet::from_intervals([
            Interval::new(rat(0, 1), true, rat(1, 2), false).unwrap(),
        ]))]);
        assert!(c.validate(&tent()).is_err());
    }

    #[test]
    fn subset_and_intersects_interval_cases() {
        let sys = tent();
        let a = OpenSet::interval(IntervalSet::from_intervals([Interval::new(
            rat(0, 1),
            true,
            rat(1, 2),
            false,
        )
        .unwrap()]));
        let b = OpenSet::interval(IntervalSet::from_intervals([Interval::new(
            rat(1, 2),
            false,
            rat(1, 1),
            true,
        )
        .unwrap()]));
        assert!(!intersects(&sys, &a, &b).unwrap());
        assert!(subset(&sys, &a, &sys.whole()).unwrap());
    }

    #[test]
    fn diam_of_fattened_grows_at_most_two_eps() {
        let sys = tent();
        let u = OpenSet::interval(IntervalSet::from_intervals([Interval::new(
            rat(1, 4),
            false,
            rat(1, 2),
            false,
        )
        .unwrap()]));
        let eps = rat(1, 8);
        let fat = fatten(&sys, &u, &eps).unwrap();
        let d0 = diam(&sys, &u).unwrap();
        let d1 = diam(&sys, &fat).unwrap();
        assert!(d1 <= d0 + rat(2, 1) * eps);
    }

    #[test]
    fn system_json_round_trip() {
        let sys = tent();
        let j = serde_json::to_string(&sys).unwrap();
        let back: System = serde_json::from_str(&j).unwrap();
        assert_eq!(sys, back);
    }
}
