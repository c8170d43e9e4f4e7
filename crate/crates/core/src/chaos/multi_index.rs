use std::fmt;

use serde::{Deserialize, Serialize};

use super::hermite::factorial;

/// A finitely supported map `direction → degree` with all degrees `≥ 1`,
/// kept sorted by direction.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<(usize, u32)>", into = "Vec<(usize, u32)>")]
pub struct MultiIndex(Vec<(usize, u32)>);

impl From<Vec<(usize, u32)>> for MultiIndex {
    fn from(pairs: Vec<(usize, u32)>) -> Self {
        MultiIndex::from_pairs(&pairs)
    }
}

impl From<MultiIndex> for Vec<(usize, u32)> {
    fn from(m: MultiIndex) -> Self {
        m.0
    }
}

impl MultiIndex {
    pub fn empty() -> Self {
        MultiIndex(Vec::new())
    }

    pub fn single(dir: usize, degree: u32) -> Self {
        if degree == 0 {
            MultiIndex::empty()
        } else {
            MultiIndex(vec![(dir, degree)])
        }
    }

    /// Builds an index from `(direction, degree)` pairs; repeated directions add up.
    pub fn from_pairs(pairs: &[(usize, u32)]) -> Self {
        let mut out = MultiIndex::empty();
        for &(d, k) in pairs {
            out = out.shifted(d, k as i64).unwrap_or_default();
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn degree(&self, dir: usize) -> u32 {
        self.0
            .binary_search_by_key(&dir, |e| e.0)
            .map_or(0, |i| self.0[i].1)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|e| e.1).sum()
    }

    /// `α! = Π_j α_j!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|e| factorial(e.1)).product()
    }

    /// `α + k e_dir`, or `None` if a degree would become negative.
    pub fn shifted(&self, dir: usize, k: i64) -> Option<MultiIndex> {
        let mut v = self.0.clone();
        match v.binary_search_by_key(&dir, |e| e.0) {
            Ok(i) => {
                let d = v[i].1 as i64 + k;
                if d < 0 {
                    return None;
                }
                if d == 0 {
                    v.remove(i);
                } else {
                    v[i].1 = d as u32;
                }
            }
            Err(i) => {
                if k < 0 {
                    return None;
                }
                if k > 0 {
                    v.insert(i, (dir, k as u32));
                }
            }
        }
        Some(MultiIndex(v))
    }

    /// Largest direction referenced, if any.
    pub fn max_direction(&self) -> Option<usize> {
        self.0.last().map(|e| e.0)
    }

    /// Relabels directions through `map`.
    pub fn remap(&self, map: &[usize]) -> MultiIndex {
        let pairs: Vec<(usize, u32)> = self.0.iter().map(|&(d, k)| (map[d], k)).collect();
        MultiIndex::from_pairs(&pairs)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|(d, k)| format!("He{k}(x{d})")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifting_and_degrees() {
        let a = MultiIndex::from_pairs(&[(3, 2), (1, 1), (3, 1)]);
        assert_eq!(a.entries(), &[(1, 1), (3, 3)]);
        assert_eq!(a.total(), 4);
        assert_eq!(a.factorial(), 6.0);
        assert_eq!(a.shifted(1, -1).unwrap(), MultiIndex::single(3, 3));
        assert!(a.shifted(2, -1).is_none());
        assert_eq!(a.shifted(0, 2).unwrap().entries(), &[(0, 2), (1, 1), (3, 3)]);
        assert_eq!(a.to_string(), "He1(x1)*He3(x3)");
    }

    #[test]
    fn json_form() {
        let a = MultiIndex::from_pairs(&[(0, 2), (4, 1)]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[0,2],[4,1]]");
        assert_eq!(serde_json::from_str::<MultiIndex>(&s).unwrap(), a);
    }
}
