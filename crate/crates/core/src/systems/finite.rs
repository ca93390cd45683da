//! Finite metric systems: a finite point set with an exact rational
//! metric and a total self-map.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rat::{self, Rat};
use super::SystemError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FiniteRepr", into = "FiniteRepr")]
pub struct FiniteSystem {
    points: Vec<String>,
    metric: Vec<Vec<Rat>>,
    map: BTreeMap<String, String>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize, Clone)]
struct FiniteRepr {
    points: Vec<String>,
    metric: Vec<MetricRow>,
    map: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize, Clone)]
struct MetricRow(#[serde(with = "super::rat::vec_serde")] Vec<Rat>);

impl TryFrom<FiniteRepr> for FiniteSystem {
    type Error = SystemError;
    fn try_from(r: FiniteRepr) -> Result<Self, SystemError> {
        FiniteSystem::new(r.points, r.metric.into_iter().map(|m| m.0).collect(), r.map)
    }
}

impl From<FiniteSystem> for FiniteRepr {
    fn from(f: FiniteSystem) -> Self {
        FiniteRepr {
            points: f.points,
            metric: f.metric.into_iter().map(MetricRow).collect(),
            map: f.map,
        }
    }
}

impl FiniteSystem {
    pub fn new(
        points: Vec<String>,
        metric: Vec<Vec<Rat>>,
        map: BTreeMap<String, String>,
    ) -> Result<Self, SystemError> {
        let n = points.len();
        if n == 0 {
            return Err(SystemError::Invalid("empty point set".into()));
        }
        let index: BTreeMap<String, usize> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        if index.len() != n {
            return Err(SystemError::Invalid("duplicate point names".into()));
        }
        if metric.len() != n || metric.iter().any(|row| row.len() != n) {
            return Err(SystemError::Invalid("metric matrix shape mismatch".into()));
        }
        for i in 0..n {
            if metric[i][i] != rat::rat_zero() {
                return Err(SystemError::Invalid(format!(
                    "metric diagonal nonzero at {}",
                    points[i]
                )));
            }
            for j in 0..n {
                if metric[i][j] != metric[j][i] {
                    return Err(SystemError::Invalid("metric not symmetric".into()));
                }
                if i != j && metric[i][j] <= rat::rat_zero() {
                    return Err(SystemError::Invalid(format!(
                        "metric not positive between {} and {}",
                        points[i], points[j]
                    )));
                }
                for k in 0..n {
                    if metric[i][j].clone() + &metric[j][k] < metric[i][k] {
                        return Err(SystemError::Invalid("triangle inequality fails".into()));
                    }
                }
            }
        }
        for p in &points {
            match map.get(p) {
                None => {
                    return Err(SystemError::Invalid(format!("map undefined at {p}")));
                }
                Some(q) if !index.contains_key(q) => {
                    return Err(SystemError::Invalid(format!(
                        "map sends {p} to unknown point {q}"
                    )));
                }
                _ => {}
            }
        }
        Ok(FiniteSystem {
            points,
            metric,
            map,
            index,
        })
    }

    /// Two named points at mutual distance 1, swapped by the map.
    pub fn swap() -> FiniteSystem {
        FiniteSystem::new(
            vec!["p".into(), "q".into()],
            vec![
                vec![rat::rat_zero(), rat::rat_one()],
                vec![rat::rat_one(), rat::rat_zero()],
            ],
            [("p".into(), "q".into()), ("q".into(), "p".into())].into(),
        )
        .unwrap()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn apply(&self, p: &str) -> &str {
        &self.map[p]
    }

    pub fn distance(&self, p: &str, q: &str) -> &Rat {
        &self.metric[self.index[p]][self.index[q]]
    }

    pub fn image(&self, set: &BTreeSet<String>) -> BTreeSet<String> {
        set.iter().map(|p| self.map[p].clone()).collect()
    }

    pub fn fatten(&self, set: &BTreeSet<String>, eps: &Rat) -> BTreeSet<String> {
        self.points
            .iter()
            .filter(|q| set.iter().any(|p| self.distance(p, q) < eps))
            .cloned()
            .collect()
    }

    pub fn diameter(&self, set: &BTreeSet<String>) -> Rat {
        let mut best = rat::rat_zero();
        for p in set {
            for q in set {
                let d = self.distance(p, q);
                if *d > best {
                    best = d.clone();
                }
            }
        }
        best
    }

    pub fn space_diameter(&self) -> Rat {
        self.diameter(&self.points.iter().cloned().collect())
    }

    pub fn min_positive_distance(&self) -> Option<Rat> {
        let mut best: Option<Rat> = None;
        for p in &self.points {
            for q in &self.points {
                if p == q {
                    continue;
                }
                let d = self.distance(p, q);
                if best.as_ref().map_or(true, |b| d < b) {
                    best = Some(d.clone());
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rat::rat;

    #[test]
    fn swap_image() {
        let sys = FiniteSystem::swap();
        let img = sys.image(&["p".to_string()].into());
        assert_eq!(img, ["q".to_string()].into());
    }

    #[test]
    fn fatten_below_min_distance_is_identity() {
        let sys = FiniteSystem::swap();
        let set: BTreeSet<String> = ["p".to_string()].into();
        assert_eq!(sys.fatten(&set, &rat(1, 2)), set);
    }

    #[test]
    fn triangle_inequality_is_enforced() {
        let bad = FiniteSystem::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![rat(0, 1), rat(1, 1), rat(5, 1)],
                vec![rat(1, 1), rat(0, 1), rat(1, 1)],
                vec![rat(5, 1), rat(1, 1), rat(0, 1)],
            ],
            [
                ("a".into(), "a".into()),
                ("b".into(), "b".into()),
                ("c".into(), "c".into()),
            ]
            .into(),
        );
        assert!(bad.is_err());
    }
}
