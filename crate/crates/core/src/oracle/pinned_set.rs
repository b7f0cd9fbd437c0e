use serde::{Deserialize, Serialize};

/// A subset `A` of the interior sites, stored as a membership table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PinnedSet {
    members: Vec<bool>,
}

impl PinnedSet {
    pub fn empty(n_sites: usize) -> Self {
        PinnedSet {
            members: vec![false; n_sites],
        }
    }

    pub fn from_indices(n_sites: usize, indices: &[usize]) -> Self {
        let mut s = Self::empty(n_sites);
        for &i in indices {
            s.members[i] = true;
        }
        s
    }

    pub fn from_bools(members: Vec<bool>) -> Self {
        PinnedSet { members }
    }

    /// Bit `i` of `mask` marks site `i`.
    pub fn from_mask(n_sites: usize, mask: u64) -> Self {
        PinnedSet {
            members: (0..n_sites).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .fold(0u64, |acc, (i, _)| acc | 1 << i)
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.members[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.members[i] = false;
    }

    pub fn n_sites(&self) -> usize {
        self.members.len()
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| i)
    }

    pub fn complement(&self) -> PinnedSet {
        PinnedSet {
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn is_disjoint(&self, other: &PinnedSet) -> bool {
        self.members
            .iter()
            .zip(&other.members)
            .all(|(a, b)| !(*a && *b))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.members
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let s = PinnedSet::from_indices(5, &[0, 3]);
        assert_eq!(s.mask(), 0b1001);
        assert_eq!(PinnedSet::from_mask(5, 0b1001), s);
        assert_eq!(s.len(), 2);
        assert!(s.contains(3) && !s.contains(1));
        assert!(s.is_disjoint(&PinnedSet::from_indices(5, &[1, 2])));
        assert_eq!(s.complement().len(), 3);
    }
}
