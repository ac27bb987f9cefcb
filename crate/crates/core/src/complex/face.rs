use std::fmt;

/// A partial assignment of spins to sites.
///
/// Stored densely: slot `v` holds the spin index assigned to site `v`, if any.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    assignment: Vec<Option<usize>>,
}

impl Face {
    pub fn empty(d: usize) -> Self {
        Face { assignment: vec![None; d] }
    }

    /// A full face (facet) from a dense spin assignment.
    pub fn full(spins: &[usize]) -> Self {
        Face { assignment: spins.iter().map(|&s| Some(s)).collect() }
    }

    pub fn from_pairs(d: usize, pairs: &[(usize, usize)]) -> Self {
        let mut face = Face::empty(d);
        for &(site, spin) in pairs {
            face.assignment[site] = Some(spin);
        }
        face
    }

    pub fn d(&self) -> usize {
        self.assignment.len()
    }

    pub fn get(&self, site: usize) -> Option<usize> {
        self.assignment[site]
    }

    pub fn contains_site(&self, site: usize) -> bool {
        self.assignment[site].is_some()
    }

    /// Copy of `self` with `site` assigned to `spin`.
    pub fn with(&self, site: usize, spin: usize) -> Self {
        let mut f = self.clone();
        f.assignment[site] = Some(spin);
        f
    }

    pub fn without(&self, site: usize) -> Self {
        let mut f = self.clone();
        f.assignment[site] = None;
        f
    }

    pub fn dim(&self) -> usize {
        self.assignment.iter().filter(|s| s.is_some()).count()
    }

    pub fn codim(&self) -> usize {
        self.d() - self.dim()
    }

    /// V(σ): the assigned sites in site order.
    pub fn sites(&self) -> Vec<usize> {
        (0..self.d()).filter(|&v| self.assignment[v].is_some()).collect()
    }

    pub fn free_sites(&self) -> Vec<usize> {
        (0..self.d()).filter(|&v| self.assignment[v].is_none()).collect()
    }

    /// V(σ) as a bit mask over site indices.
    pub fn site_mask(&self) -> u64 {
        self.sites().iter().fold(0u64, |m, &v| m | (1 << v))
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(v, s)| s.map(|s| (v, s)))
            .collect()
    }

    /// True when the dense facet assignment extends this face.
    pub fn is_contained_in(&self, facet: &[usize]) -> bool {
        self.assignment
            .iter()
            .zip(facet)
            .all(|(a, &s)| a.is_none_or(|a| a == s))
    }

    /// True when every assignment of `self` also appears in `other`.
    pub fn is_subface_of(&self, other: &Face) -> bool {
        self.assignment
            .iter()
            .zip(&other.assignment)
            .all(|(a, b)| a.is_none() || a == b)
    }

    /// Union of two faces; `None` if they assign different spins to a site.
    pub fn union(&self, other: &Face) -> Option<Face> {
        let mut out = self.clone();
        for (slot, b) in out.assignment.iter_mut().zip(&other.assignment) {
            match (*slot, *b) {
                (Some(x), Some(y)) if x != y => return None,
                (None, Some(y)) => *slot = Some(y),
                _ => {}
            }
        }
        Some(out)
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, s)) in self.pairs().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}:{s}")?;
        }
        write!(f, "}}")
    }
}
