//! Continuous piecewise linear self-maps of [0, 1] with rational
//! breakpoints, evaluated exactly.

use serde::{Deserialize, Serialize};

use super::interval::{Interval, IntervalSet};
use super::rat::{self, Rat};
use super::SystemError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlRepr", into = "PlRepr")]
pub struct PlIntervalMap {
    breakpoints: Vec<Rat>,
    values: Vec<Rat>,
}

#[derive(Serialize, Deserialize, Clone)]
struct PlRepr {
    #[serde(with = "super::rat::vec_serde")]
    breakpoints: Vec<Rat>,
    #[serde(with = "super::rat::vec_serde")]
    values: Vec<Rat>,
}

impl TryFrom<PlRepr> for PlIntervalMap {
    type Error = SystemError;
    fn try_from(r: PlRepr) -> Result<Self, SystemError> {
        PlIntervalMap::new(r.breakpoints, r.values)
    }
}

impl From<PlIntervalMap> for PlRepr {
    fn from(m: PlIntervalMap) -> Self {
        PlRepr {
            breakpoints: m.breakpoints,
            values: m.values,
        }
    }
}

impl PlIntervalMap {
    pub fn new(breakpoints: Vec<Rat>, values: Vec<Rat>) -> Result<Self, SystemError> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(SystemError::Invalid(
                "need matching breakpoint/value lists with at least two entries".into(),
            ));
        }
        if breakpoints[0] != rat::rat_zero() || *breakpoints.last().unwrap() != rat::rat_one() {
            return Err(SystemError::Invalid("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SystemError::Invalid("breakpoints must be strictly increasing".into()));
        }
        if values
            .iter()
            .any(|v| *v < rat::rat_zero() || *v > rat::rat_one())
        {
            return Err(SystemError::Invalid("values must lie in [0, 1]".into()));
        }
        Ok(PlIntervalMap {
            breakpoints,
            values,
        })
    }

    /// The tent map: 0, 1/2, 1 ↦ 0, 1, 0.
    pub fn tent() -> PlIntervalMap {
        PlIntervalMap::new(
            vec![rat::rat_zero(), rat::rat(1, 2), rat::rat_one()],
            vec![rat::rat_zero(), rat::rat_one(), rat::rat_zero()],
        )
        .unwrap()
    }

    pub fn breakpoints(&self) -> &[Rat] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        assert!(*x >= rat::rat_zero() && *x <= rat::rat_one());
        let j = self
            .breakpoints
            .windows(2)
            .position(|w| *x >= w[0] && *x <= w[1])
            .expect("x within [0,1]");
        let (b0, b1) = (&self.breakpoints[j], &self.breakpoints[j + 1]);
        let (v0, v1) = (&self.values[j], &self.values[j + 1]);
        v0 + (v1 - v0) * (x - b0) / (b1 - b0)
    }

    /// Exact image of a set; endpoint open/closed flags track whether the
    /// corresponding extremum is attained.
    pub fn image(&self, set: &IntervalSet) -> IntervalSet {
        let mut pieces = Vec::new();
        for iv in set.intervals() {
            for j in 0..self.breakpoints.len() - 1 {
                let piece = Interval::closed(
                    self.breakpoints[j].clone(),
                    self.breakpoints[j + 1].clone(),
                )
                .unwrap();
                let part = match IntervalSet::from_intervals([piece])
                    .intersection(&IntervalSet::from_intervals([iv.clone()]))
                    .intervals()
                    .first()
                {
                    Some(p) => p.clone(),
                    None => continue,
                };
                let f_lo = self.eval(&part.lo);
                let f_hi = self.eval(&part.hi);
                let img = if f_lo <= f_hi {
                    Interval::new(f_lo, part.lo_closed, f_hi, part.hi_closed)
                } else {
                    Interval::new(f_hi, part.hi_closed, f_lo, part.lo_closed)
                };
                if let Some(img) = img {
                    pieces.push(img);
                } else {
                    // degenerate: constant piece over a half-open point
                    // range cannot occur, the part is nonempty so the
                    // constant value is attained
                    let c = self.eval(&part.lo);
                    pieces.push(Interval::closed(c.clone(), c).unwrap());
                }
            }
        }
        IntervalSet::from_intervals(pieces)
    }
}
