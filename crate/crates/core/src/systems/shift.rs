//! One-sided subshifts of finite type over a finite alphabet, with the
//! metric d(x, y) = 2^{-k} where k is the first disagreement index.
//!
//! Open sets are finite unions of position-0 cylinders, stored as the
//! antichain of their defining words.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::rat::{self, Rat};
use super::SystemError;

pub type Word = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ShiftRepr", into = "ShiftRepr")]
pub struct ShiftSystem {
    alphabet: Vec<String>,
    transitions: BTreeSet<(String, String)>,
}

#[derive(Serialize, Deserialize, Clone)]
struct ShiftRepr {
    alphabet: Vec<String>,
    transitions: Vec<(String, String)>,
}

impl TryFrom<ShiftRepr> for ShiftSystem {
    type Error = SystemError;
    fn try_from(r: ShiftRepr) -> Result<Self, SystemError> {
        ShiftSystem::new(r.alphabet, r.transitions)
    }
}

impl From<ShiftSystem> for ShiftRepr {
    fn from(s: ShiftSystem) -> Self {
        ShiftRepr {
            alphabet: s.alphabet,
            transitions: s.transitions.into_iter().collect(),
        }
    }
}

impl ShiftSystem {
    pub fn new(
        alphabet: Vec<String>,
        transitions: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, SystemError> {
        if alphabet.is_empty() {
            return Err(SystemError::Invalid("empty alphabet".into()));
        }
        let symbols: BTreeSet<&String> = alphabet.iter().collect();
        if symbols.len() != alphabet.len() {
            return Err(SystemError::Invalid("duplicate symbols".into()));
        }
        let transitions: BTreeSet<(String, String)> = transitions.into_iter().collect();
        if transitions.is_empty() {
            return Err(SystemError::Invalid("empty transition set".into()));
        }
        for (a, b) in &transitions {
            if !symbols.contains(a) || !symbols.contains(b) {
                return Err(SystemError::Invalid(format!(
                    "transition ({a}, {b}) uses unknown symbols"
                )));
            }
        }
        for a in &alphabet {
            if !transitions.iter().any(|(x, _)| x == a) {
                return Err(SystemError::Invalid(format!(
                    "symbol {a} admits no right extension; the shift is not total"
                )));
            }
        }
        Ok(ShiftSystem {
            alphabet,
            transitions,
        })
    }

    pub fn full(symbols: &[&str]) -> ShiftSystem {
        let alphabet: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
        let transitions = alphabet
            .iter()
            .flat_map(|a| alphabet.iter().map(move |b| (a.clone(), b.clone())))
            .collect::<Vec<_>>();
        ShiftSystem::new(alphabet, transitions).unwrap()
    }

    pub fn full_two() -> ShiftSystem {
        ShiftSystem::full(&["0", "1"])
    }

    /// The golden-mean shift: binary, 11 forbidden.
    pub fn golden_mean() -> ShiftSystem {
        ShiftSystem::new(
            vec!["0".into(), "1".into()],
            [
                ("0".to_string(), "0".to_string()),
                ("0".to_string(), "1".to_string()),
                ("1".to_string(), "0".to_string()),
            ],
        )
        .unwrap()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn transitions(&self) -> &BTreeSet<(String, String)> {
        &self.transitions
    }

    pub fn is_allowed(&self, w: &[String]) -> bool {
        w.windows(2)
            .all(|p| self.transitions.contains(&(p[0].clone(), p[1].clone())))
            && w.iter().all(|s| self.alphabet.contains(s))
    }

    fn successors<'a>(&'a self, a: &'a str) -> impl Iterator<Item = &'a String> {
        self.transitions
            .iter()
            .filter(move |(x, _)| x == a)
            .map(|(_, y)| y)
    }

    /// All allowed words of length `n` (the empty word for `n = 0`).
    pub fn allowed_words(&self, n: usize) -> Vec<Word> {
        let mut words: Vec<Word> = vec![vec![]];
        for _ in 0..n {
            let mut next = Vec::new();
            for w in &words {
                match w.last() {
                    None => {
                        for a in &self.alphabet {
                            let mut e = w.clone();
                            e.push(a.clone());
                            next.push(e);
                        }
                    }
                    Some(last) => {
                        for b in self.successors(last) {
                            let mut e = w.clone();
                            e.push(b.clone());
                            next.push(e);
                        }
                    }
                }
            }
            words = next;
        }
        words
    }

    /// All allowed extensions of `w` to length `n ≥ |w|`.
    fn extensions(&self, w: &Word, n: usize) -> Vec<Word> {
        let mut words = vec![w.clone()];
        while words.first().map_or(false, |x| x.len() < n) {
            let mut next = Vec::new();
            for x in &words {
                match x.last() {
                    None => {
                        for a in &self.alphabet {
                            let mut e = x.clone();
                            e.push(a.clone());
                            next.push(e);
                        }
                    }
                    Some(last) => {
                        for b in self.successors(last) {
                            let mut e = x.clone();
                            e.push(b.clone());
                            next.push(e);
                        }
                    }
                }
            }
            words = next;
        }
        words
    }

    /// Sup-diameter of the cylinder C(w): 2^{-j} where j is the first
    /// position at which two points of C(w) can disagree; 0 if C(w) is a
    /// single point.
    pub fn cylinder_diameter(&self, w: &Word) -> Rat {
        let mut pos = w.len();
        let mut current = w.last().cloned();
        let mut seen: BTreeSet<Option<String>> = BTreeSet::new();
        loop {
            let choices: Vec<String> = match &current {
                None => self.alphabet.clone(),
                Some(a) => self.successors(a).cloned().collect(),
            };
            if choices.len() >= 2 {
                return rat::two_pow_neg(pos as u32);
            }
            if !seen.insert(current.clone()) {
                return rat::rat_zero(); // deterministic cycle: singleton
            }
            current = Some(choices[0].clone());
            pos += 1;
        }
    }
}

/// Normalized finite union of cylinders: every word allowed, no word a
/// prefix-extension of another in the set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CylinderSet {
    words: BTreeSet<Word>,
}

fn is_prefix(p: &[String], w: &[String]) -> bool {
    p.len() <= w.len() && w[..p.len()] == *p
}

impl CylinderSet {
    pub fn empty() -> CylinderSet {
        CylinderSet {
            words: BTreeSet::new(),
        }
    }

    pub fn whole() -> CylinderSet {
        CylinderSet {
            words: [vec![]].into(),
        }
    }

    pub fn from_words(sys: &ShiftSystem, words: impl IntoIterator<Item = Word>) -> CylinderSet {
        let allowed: Vec<Word> = words.into_iter().filter(|w| sys.is_allowed(w)).collect();
        let mut keep = BTreeSet::new();
        'outer: for w in &allowed {
            for p in &allowed {
                if p != w && is_prefix(p, w) {
                    continue 'outer; // subsumed by a shorter cylinder
                }
            }
            keep.insert(w.clone());
        }
        CylinderSet { words: keep }
    }

    pub fn cylinder(sys: &ShiftSystem, word: Word) -> CylinderSet {
        CylinderSet::from_words(sys, [word])
    }

    pub fn words(&self) -> &BTreeSet<Word> {
        &self.words
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.words.iter().map(|w| w.len()).max().unwrap_or(0)
    }

    /// The set as allowed words of exactly length `n ≥ max_len`.
    pub fn refine(&self, sys: &ShiftSystem, n: usize) -> BTreeSet<Word> {
        let mut out = BTreeSet::new();
        for w in &self.words {
            if w.len() >= n {
                out.insert(w.clone());
            } else {
                out.extend(sys.extensions(w, n));
            }
        }
        out
    }

    pub fn union(&self, sys: &ShiftSystem, other: &CylinderSet) -> CylinderSet {
        CylinderSet::from_words(sys, self.words.iter().chain(other.words.iter()).cloned())
    }

    pub fn intersects(&self, sys: &ShiftSystem, other: &CylinderSet) -> bool {
        let _ = sys;
        self.words.iter().any(|u| {
            other
                .words
                .iter()
                .any(|v| is_prefix(u, v) || is_prefix(v, u))
        })
    }

    pub fn subset_of(&self, sys: &ShiftSystem, other: &CylinderSet) -> bool {
        let n = self.max_len().max(other.max_len());
        let mine = self.refine(sys, n);
        mine.iter().all(|w| {
            other
                .words
                .iter()
                .any(|v| is_prefix(v, w))
        })
    }

    /// Image under the left shift: drops the first symbol of each word.
    pub fn image(&self, sys: &ShiftSystem) -> CylinderSet {
        let mut out: Vec<Word> = Vec::new();
        for w in &self.words {
            if w.is_empty() {
                // shift of the whole space: symbols with an incoming edge
                for b in sys.alphabet() {
                    if sys.transitions().iter().any(|(_, y)| y == b) {
                        out.push(vec![b.clone()]);
                    }
                }
            } else {
                out.push(w[1..].to_vec());
            }
        }
        CylinderSet::from_words(sys, out)
    }

    /// Open ε-ball around the set: truncates words to the level at which
    /// cylinders have diameter below ε.
    pub fn fatten(&self, sys: &ShiftSystem, eps: &Rat) -> CylinderSet {
        match rat::level_for_epsilon(eps) {
            None => CylinderSet::whole(),
            Some(m) => CylinderSet::from_words(
                sys,
                self.words
                    .iter()
                    .map(|w| w[..w.len().min(m as usize)].to_vec()),
            ),
        }
    }

    pub fn diameter(&self, sys: &ShiftSystem) -> Rat {
        let n = self.max_len();
        let refined: Vec<Word> = self.refine(sys, n).into_iter().collect();
        let mut min_diff: Option<usize> = None;
        for (i, u) in refined.iter().enumerate() {
            for v in &refined[i + 1..] {
                let j = u.iter().zip(v.iter()).position(|(a, b)| a != b);
                if let Some(j) = j {
                    min_diff = Some(min_diff.map_or(j, |m| m.min(j)));
                }
            }
        }
        match min_diff {
            Some(j) => rat::two_pow_neg(j as u32),
            None => match refined.first() {
                Some(w) => sys.cylinder_diameter(w),
                None => rat::rat_zero(),
            },
        }
    }
}
