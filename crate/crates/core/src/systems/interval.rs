//! Exact finite unions of subintervals of [0, 1].
//!
//! Endpoints carry open/closed flags so that images of open sets under
//! piecewise linear maps (which may attain extrema) and closures are both
//! representable. The normal form is sorted, pairwise disjoint and
//! non-mergeable.

use serde::{Deserialize, Serialize};

use super::rat::{self, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "super::rat")]
    pub lo: Rat,
    pub lo_closed: bool,
    #[serde(with = "super::rat")]
    pub hi: Rat,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: Rat, lo_closed: bool, hi: Rat, hi_closed: bool) -> Option<Interval> {
        let iv = Interval {
            lo,
            lo_closed,
            hi,
            hi_closed,
        };
        if iv.is_empty() {
            None
        } else {
            Some(iv)
        }
    }

    pub fn closed(lo: Rat, hi: Rat) -> Option<Interval> {
        Interval::new(lo, true, hi, true)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains_point(&self, x: &Rat) -> bool {
        let above = *x > self.lo || (*x == self.lo && self.lo_closed);
        let below = *x < self.hi || (*x == self.hi && self.hi_closed);
        above && below
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo.clone(), self.lo_closed)
        } else if self.lo < other.lo {
            (other.lo.clone(), other.lo_closed)
        } else {
            (self.lo.clone(), self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi.clone(), self.hi_closed)
        } else if self.hi > other.hi {
            (other.hi.clone(), other.hi_closed)
        } else {
            (self.hi.clone(), self.hi_closed && other.hi_closed)
        };
        Interval::new(lo, lo_closed, hi, hi_closed)
    }

    /// Whether the union with `other` is a single interval (they overlap
    /// or touch with at least one closed endpoint). Assumes self.lo ≤ other.lo.
    fn merges_with(&self, other: &Interval) -> bool {
        if self.hi > other.lo {
            true
        } else if self.hi == other.lo {
            self.hi_closed || other.lo_closed
        } else {
            false
        }
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        match self.intersect(other) {
            Some(cap) => cap == *self,
            None => false,
        }
    }
}

/// Normalized finite union of intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> IntervalSet {
        IntervalSet { intervals: vec![] }
    }

    pub fn from_intervals(items: impl IntoIterator<Item = Interval>) -> IntervalSet {
        let mut intervals: Vec<Interval> =
            items.into_iter().filter(|iv| !iv.is_empty()).collect();
        intervals.sort_by(|a, b| {
            a.lo.cmp(&b.lo)
                .then(b.lo_closed.cmp(&a.lo_closed))
                .then(a.hi.cmp(&b.hi))
        });
        let mut out: Vec<Interval> = Vec::new();
        for iv in intervals {
            match out.last_mut() {
                Some(last) if last.merges_with(&iv) => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                        last.hi_closed = iv.hi_closed;
                    } else if iv.hi == last.hi {
                        last.hi_closed = last.hi_closed || iv.hi_closed;
                    }
                }
                _ => out.push(iv),
            }
        }
        IntervalSet { intervals: out }
    }

    pub fn whole() -> IntervalSet {
        IntervalSet::from_intervals([Interval::closed(rat::rat_zero(), rat::rat_one()).unwrap()])
    }

    pub fn point(x: Rat) -> IntervalSet {
        IntervalSet::from_intervals([Interval::closed(x.clone(), x).unwrap()])
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains_point(&self, x: &Rat) -> bool {
        self.intervals.iter().any(|iv| iv.contains_point(x))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(
            self.intervals
                .iter()
                .chain(other.intervals.iter())
                .cloned(),
        )
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut pieces = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                if let Some(c) = a.intersect(b) {
                    pieces.push(c);
                }
            }
        }
        IntervalSet::from_intervals(pieces)
    }

    pub fn intersects(&self, other: &IntervalSet) -> bool {
        !self.intersection(other).is_empty()
    }

    pub fn subset_of(&self, other: &IntervalSet) -> bool {
        self.intervals
            .iter()
            .all(|a| other.intervals.iter().any(|b| a.subset_of(b)))
    }

    /// Topological closure: every endpoint becomes closed.
    pub fn closure(&self) -> IntervalSet {
        IntervalSet::from_intervals(self.intervals.iter().map(|iv| Interval {
            lo: iv.lo.clone(),
            lo_closed: true,
            hi: iv.hi.clone(),
            hi_closed: true,
        }))
    }

    /// Open ε-neighbourhood within X = [0, 1] (relative topology: the
    /// result may be closed at 0 or 1).
    pub fn fatten(&self, eps: &Rat) -> IntervalSet {
        assert!(eps > &rat::rat_zero());
        IntervalSet::from_intervals(self.intervals.iter().filter_map(|iv| {
            let lo = &iv.lo - eps;
            let hi = &iv.hi + eps;
            let (lo, lo_closed) = if lo <= rat::rat_zero() {
                (rat::rat_zero(), true)
            } else {
                (lo, false)
            };
            let (hi, hi_closed) = if hi >= rat::rat_one() {
                (rat::rat_one(), true)
            } else {
                (hi, false)
            };
            Interval::new(lo, lo_closed, hi, hi_closed)
        }))
    }

    /// Max endpoint minus min endpoint; zero on a point, error on empty.
    pub fn diameter(&self) -> Option<Rat> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Some(&last.hi - &first.lo)
    }

    pub fn min_endpoint(&self) -> Option<&Rat> {
        self.intervals.first().map(|iv| &iv.lo)
    }

    pub fn max_endpoint(&self) -> Option<&Rat> {
        self.intervals.last().map(|iv| &iv.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rat::rat;

    fn half_open(lo: Rat, hi: Rat) -> Interval {
        Interval::new(lo, true, hi, false).unwrap()
    }

    #[test]
    fn normalization_merges_touching_closed() {
        let s = IntervalSet::from_intervals([
            Interval::closed(rat(0, 1), rat(1, 2)).unwrap(),
            Interval::new(rat(1, 2), false, rat(1, 1), true).unwrap(),
        ]);
        assert_eq!(s, IntervalSet::whole());
    }

    #[test]
    fn normalization_keeps_open_gap() {
        let s = IntervalSet::from_intervals([
            half_open(rat(0, 1), rat(1, 2)),
            Interval::new(rat(1, 2), false, rat(1, 1), true).unwrap(),
        ]);
        assert_eq!(s.intervals().len(), 2);
    }

    #[test]
    fn open_gap_does_not_intersect() {
        let a = IntervalSet::from_intervals([half_open(rat(0, 1), rat(1, 2))]);
        let b = IntervalSet::from_intervals([Interval::new(
            rat(1, 2),
            false,
            rat(1, 1),
            true,
        )
        .unwrap()]);
        assert!(!a.intersects(&b));
    }

    #[test]
    fn overlap_intersects() {
        let a = IntervalSet::from_intervals([Interval::new(
            rat(2, 5),
            false,
            rat(1, 1),
            true,
        )
        .unwrap()]);
        let b = IntervalSet::from_intervals([half_open(rat(0, 1), rat(3, 5))]);
        assert!(a.intersects(&b));
    }

    #[test]
    fn fatten_shifts_endpoints() {
        let u = IntervalSet::from_intervals([half_open(rat(1, 4), rat(1, 2))]);
        let f = u.fatten(&rat(1, 8));
        let expected = IntervalSet::from_intervals([Interval::new(
            rat(1, 8),
            false,
            rat(5, 8),
            false,
        )
        .unwrap()]);
        assert_eq!(f, expected);
    }

    #[test]
    fn closure_closes_endpoints() {
        let u = IntervalSet::from_intervals([half_open(rat(0, 1), rat(1, 2))]);
        assert_eq!(
            u.closure(),
            IntervalSet::from_intervals([Interval::closed(rat(0, 1), rat(1, 2)).unwrap()])
        );
    }

    #[test]
    fn diameter_spans_union() {
        let u = IntervalSet::from_intervals([half_open(rat(0, 1), rat(3, 5))]);
        assert_eq!(u.diameter(), Some(rat(3, 5)));
    }
}
