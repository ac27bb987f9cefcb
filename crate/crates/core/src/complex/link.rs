use super::{Face, SpinSystem};
use crate::error::{Error, Result};

/// The link `(X_τ, μ_τ)` of a positive-probability face τ.
///
/// Facets are referenced by index into the parent system; `weights` holds
/// the conditional distribution μ_τ over them.
#[derive(Clone, Debug)]
pub struct LinkView<'a> {
    system: &'a SpinSystem,
    base: Face,
    mass: f64,
    residual: Vec<usize>,
    spins: Vec<Vec<usize>>,
    facets: Vec<usize>,
    weights: Vec<f64>,
}

impl<'a> LinkView<'a> {
    pub(crate) fn root(system: &'a SpinSystem) -> Self {
        Self::new(system, &Face::empty(system.d())).expect("root link of a valid system")
    }

    pub fn new(system: &'a SpinSystem, tau: &Face) -> Result<Self> {
        if tau.d() != system.d() {
            return Err(Error::Dimension(format!(
                "face over {} sites, system has {}",
                tau.d(),
                system.d()
            )));
        }
        let mut facets = Vec::new();
        let mut raw = Vec::new();
        for (i, (f, &w)) in system.facets().iter().zip(system.weights()).enumerate() {
            if tau.is_contained_in(f) {
                facets.push(i);
                raw.push(w);
            }
        }
        Self::from_parts(system, tau.clone(), facets, raw)
    }

    fn from_parts(
        system: &'a SpinSystem,
        base: Face,
        facets: Vec<usize>,
        raw: Vec<f64>,
    ) -> Result<Self> {
        let mass: f64 = raw.iter().sum();
        if facets.is_empty() || mass <= 0.0 {
            return Err(Error::EmptyLink);
        }
        let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();
        let residual = base.free_sites();
        let mut present: Vec<Vec<bool>> = residual
            .iter()
            .map(|&v| vec![false; system.spin_count(v)])
            .collect();
        for &fi in &facets {
            let f = &system.facets()[fi];
            for (slot, &v) in present.iter_mut().zip(&residual) {
                slot[f[v]] = true;
            }
        }
        let spins = present
            .into_iter()
            .map(|p| (0..p.len()).filter(|&s| p[s]).collect())
            .collect();
        Ok(LinkView {
            system,
            base,
            mass,
            residual,
            spins,
            facets,
            weights,
        })
    }

    /// Conditions this link further on `extra`, using μ_τ rather than μ.
    pub fn link(&self, extra: &Face) -> Result<LinkView<'a>> {
        let base = self.base.union(extra).ok_or(Error::EmptyLink)?;
        let mut facets = Vec::new();
        let mut raw = Vec::new();
        for (&fi, &w) in self.facets.iter().zip(&self.weights) {
            if extra.is_contained_in(&self.system.facets()[fi]) {
                facets.push(fi);
                raw.push(w);
            }
        }
        let mut out = Self::from_parts(self.system, base, facets, raw)?;
        out.mass *= self.mass;
        Ok(out)
    }

    pub fn system(&self) -> &'a SpinSystem {
        self.system
    }

    pub fn base(&self) -> &Face {
        &self.base
    }

    /// P_{σ∼μ}[τ ⊆ σ].
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn codim(&self) -> usize {
        self.residual.len()
    }

    pub fn residual_sites(&self) -> &[usize] {
        &self.residual
    }

    /// Spins of residual site `self.residual_sites()[i]` compatible with τ.
    pub fn residual_spins(&self, i: usize) -> &[usize] {
        &self.spins[i]
    }

    pub fn spins_of_site(&self, site: usize) -> &[usize] {
        let i = self
            .residual
            .iter()
            .position(|&v| v == site)
            .expect("site is residual in this link");
        &self.spins[i]
    }

    pub fn facet_indices(&self) -> &[usize] {
        &self.facets
    }

    /// μ_τ, aligned with [`Self::facet_indices`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn facets(&self) -> impl Iterator<Item = (&'a [usize], f64)> + '_ {
        let all = self.system.facets();
        self.facets
            .iter()
            .zip(&self.weights)
            .map(move |(&i, &w)| (all[i].as_slice(), w))
    }

    /// X_τ(1) as `(site, spin)` pairs in residual-site then spin order.
    pub fn vertices(&self) -> Vec<(usize, usize)> {
        self.residual
            .iter()
            .zip(&self.spins)
            .flat_map(|(&v, ss)| ss.iter().map(move |&s| (v, s)))
            .collect()
    }

    pub fn contains_vertex(&self, site: usize, spin: usize) -> bool {
        self.residual
            .iter()
            .position(|&v| v == site)
            .is_some_and(|i| self.spins[i].contains(&spin))
    }

    /// P_{ω∼μ_τ}[(site, spin) ∈ ω].
    pub fn marginal(&self, site: usize, spin: usize) -> f64 {
        self.facets()
            .filter(|(f, _)| f[site] == spin)
            .map(|(_, w)| w)
            .sum()
    }

    /// P_{ω∼μ_τ}[x, y ∈ ω].
    pub fn pair_marginal(&self, x: (usize, usize), y: (usize, usize)) -> f64 {
        self.facets()
            .filter(|(f, _)| f[x.0] == x.1 && f[y.0] == y.1)
            .map(|(_, w)| w)
            .sum()
    }
}
