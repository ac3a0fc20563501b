//! Non-crossing pairings of `2n` boundary points.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A perfect matching of `{0, .., 2n-1}` stored as sorted pairs `(a, b)`
/// with `a < b`. Serialized 1-based, e.g. `[[1,4],[2,3]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkPattern {
    pairs: Vec<(usize, usize)>,
}

impl LinkPattern {
    /// Builds a pattern from 0-based pairs, validating that they form a
    /// non-crossing perfect matching.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let p = Self::canonical(pairs);
        p.validate()?;
        Ok(p)
    }

    /// Builds a pattern from 1-based pairs.
    pub fn from_one_based(pairs: &[[usize; 2]]) -> Result<Self> {
        let mut zero = Vec::with_capacity(pairs.len());
        for &[a, b] in pairs {
            if a == 0 || b == 0 {
                return Err(Error::InvalidInput(
                    "pattern indices are 1-based".to_string(),
                ));
            }
            zero.push((a - 1, b - 1));
        }
        Self::new(zero)
    }

    /// Pairing without the non-crossing check. Used to report traced
    /// endpoint pairings before classification.
    pub(crate) fn unchecked(pairs: Vec<(usize, usize)>) -> Self {
        Self::canonical(pairs)
    }

    fn canonical(pairs: Vec<(usize, usize)>) -> Self {
        let mut pairs: Vec<(usize, usize)> = pairs
            .into_iter()
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort_unstable();
        LinkPattern { pairs }
    }

    fn validate(&self) -> Result<()> {
        let m = 2 * self.pairs.len();
        if m == 0 {
            return Err(Error::InvalidInput("pattern is empty".to_string()));
        }
        let mut seen = vec![false; m];
        for &(a, b) in &self.pairs {
            if b >= m || a == b || seen[a] || seen[b] {
                return Err(Error::InvalidInput(format!(
                    "pattern {self} is not a perfect matching of 1..={m}"
                )));
            }
            seen[a] = true;
            seen[b] = true;
        }
        if !self.is_non_crossing() {
            return Err(Error::InvalidInput(format!("pattern {self} is crossing")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn one_based(&self) -> Vec<[usize; 2]> {
        self.pairs.iter().map(|&(a, b)| [a + 1, b + 1]).collect()
    }

    /// Index paired with `j`.
    pub fn partner(&self, j: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(a, b)| {
            if a == j {
                Some(b)
            } else if b == j {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn is_non_crossing(&self) -> bool {
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            for &(c, d) in &self.pairs[i + 1..] {
                if (a < c && c < b && b < d) || (c < a && a < d && d < b) {
                    return false;
                }
            }
        }
        true
    }

    /// `{{1,2},{3,4},...}`
    pub fn neighbor(n: usize) -> Self {
        Self::canonical((0..n).map(|k| (2 * k, 2 * k + 1)).collect())
    }

    /// `{{1,2n},{2,2n-1},...}`
    pub fn rainbow(n: usize) -> Self {
        Self::canonical((0..n).map(|k| (k, 2 * n - 1 - k)).collect())
    }

    /// All `C_n` non-crossing patterns in a fixed order.
    pub fn all(n: usize) -> Vec<LinkPattern> {
        let mut out: Vec<LinkPattern> = matchings(0, 2 * n)
            .into_iter()
            .map(Self::canonical)
            .collect();
        out.sort();
        out
    }
}

fn matchings(lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
    if lo >= hi {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut k = lo + 1;
    while k < hi {
        let inner = matchings(lo + 1, k);
        let outer = matchings(k + 1, hi);
        for a in &inner {
            for b in &outer {
                let mut m = Vec::with_capacity(a.len() + b.len() + 1);
                m.push((lo, k));
                m.extend_from_slice(a);
                m.extend_from_slice(b);
                out.push(m);
            }
        }
        k += 2;
    }
    out
}

/// Catalan number `C_n`.
pub fn catalan(n: usize) -> usize {
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c as usize
}

impl fmt::Display for LinkPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, &(a, b)) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{{},{}}}", a + 1, b + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for LinkPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinkPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<[usize; 2]>::deserialize(d)?;
        LinkPattern::from_one_based(&raw).map_err(serde::de::Error::custom)
    }
}
