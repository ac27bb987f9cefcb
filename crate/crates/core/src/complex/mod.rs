//! Weighted d-partite complexes, viewed as multi-state spin systems.
//!
//! A [`SpinSystem`] holds the sites `V`, a spin list `S_v` per site and an
//! explicit table of facets (full configurations) with their probabilities.
//! Faces are partial assignments; conditioning on a face gives a [`LinkView`].

mod document;
mod face;
mod faces;
mod generate;
mod link;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub use document::{FacetDocument, SiteDocument, SystemDocument, WalkDocument, WalkEdgeDocument};
pub use face::Face;
pub use faces::{enumerate_faces, faces_extending, is_connected, skeleton_components, Connectivity};
pub use generate::{
    path_system, perturbed_product_system, quarantine_predicate, quarantine_system,
    random_system, Graph, QUARANTINE, SICK,
};
pub use link::LinkView;

/// Hard cap on the number of stored facets.
pub const MAX_FACETS: usize = 10_000_000;

/// Items removed while normalizing a system at construction time.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PruningReport {
    pub zero_weight_facets: usize,
    pub merged_duplicate_facets: usize,
    /// `(site, spin)` names of spins that occur in no positive-weight facet.
    pub pruned_spins: Vec<(String, String)>,
}

impl PruningReport {
    pub fn is_empty(&self) -> bool {
        self.zero_weight_facets == 0
            && self.merged_duplicate_facets == 0
            && self.pruned_spins.is_empty()
    }
}

/// A multi-state spin system with an explicit distribution over configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    sites: Vec<String>,
    spins: Vec<Vec<String>>,
    facets: Vec<Vec<usize>>,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    report: PruningReport,
}

impl SpinSystem {
    /// Builds a validated, normalized system.
    ///
    /// Facets are dense spin-index arrays in site order. Zero-weight facets are
    /// dropped, duplicates merged, and spins without support pruned. Weights
    /// are rescaled to sum to one unless they already do to within 1e-14.
    pub fn new(
        sites: Vec<String>,
        spins: Vec<Vec<String>>,
        facets: Vec<(Vec<usize>, f64)>,
    ) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Malformed("no sites".into()));
        }
        if sites.len() > 63 {
            return Err(Error::SizeCap(format!("{} sites (max 63)", sites.len())));
        }
        if spins.len() != sites.len() {
            return Err(Error::Malformed("spin lists do not match sites".into()));
        }
        for (name, list) in sites.iter().zip(&spins) {
            if list.is_empty() {
                return Err(Error::EmptySpins(name.clone()));
            }
        }
        for (i, a) in sites.iter().enumerate() {
            if sites[..i].contains(a) {
                return Err(Error::Malformed(format!("duplicate site `{a}`")));
            }
        }
        for (name, list) in sites.iter().zip(&spins) {
            for (i, s) in list.iter().enumerate() {
                if list[..i].contains(s) {
                    return Err(Error::Malformed(format!("duplicate spin `{s}` at site `{name}`")));
                }
            }
        }
        if facets.len() > MAX_FACETS {
            return Err(Error::SizeCap(format!("{} facets", facets.len())));
        }

        let d = sites.len();
        let mut report = PruningReport::default();
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut order: Vec<Vec<usize>> = Vec::new();
        for (assignment, w) in facets {
            if assignment.len() != d {
                return Err(Error::Malformed(format!(
                    "facet assigns {} sites, expected {d}",
                    assignment.len()
                )));
            }
            for (v, &s) in assignment.iter().enumerate() {
                if s >= spins[v].len() {
                    return Err(Error::UnknownSpin {
                        site: sites[v].clone(),
                        spin: format!("#{s}"),
                    });
                }
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Malformed(format!("invalid weight {w}")));
            }
            if w == 0.0 {
                report.zero_weight_facets += 1;
                continue;
            }
            match merged.get_mut(&assignment) {
                Some(acc) => {
                    *acc += w;
                    report.merged_duplicate_facets += 1;
                }
                None => {
                    merged.insert(assignment.clone(), w);
                    order.push(assignment);
                }
            }
        }
        if order.is_empty() {
            return Err(Error::AllZeroWeights);
        }

        // Prune spins that never occur, then reindex.
        let mut used = spins.iter().map(|l| vec![false; l.len()]).collect::<Vec<_>>();
        for a in &order {
            for (v, &s) in a.iter().enumerate() {
                used[v][s] = true;
            }
        }
        let mut remap: Vec<Vec<Option<usize>>> = Vec::with_capacity(d);
        let mut kept_spins = Vec::with_capacity(d);
        for v in 0..d {
            let mut next = 0;
            let mut map = vec![None; spins[v].len()];
            let mut kept = Vec::new();
            for (s, name) in spins[v].iter().enumerate() {
                if used[v][s] {
                    map[s] = Some(next);
                    next += 1;
                    kept.push(name.clone());
                } else {
                    report.pruned_spins.push((sites[v].clone(), name.clone()));
                }
            }
            remap.push(map);
            kept_spins.push(kept);
        }

        let mut facets = Vec::with_capacity(order.len());
        let mut weights = Vec::with_capacity(order.len());
        for a in order {
            let w = merged[&a];
            facets.push(
                a.iter()
                    .enumerate()
                    .map(|(v, &s)| remap[v][s].expect("used spin"))
                    .collect::<Vec<_>>(),
            );
            weights.push(w);
        }
        normalize(&mut weights);

        let mut offsets = Vec::with_capacity(d + 1);
        let mut acc = 0;
        for list in &kept_spins {
            offsets.push(acc);
            acc += list.len();
        }
        offsets.push(acc);

        Ok(SpinSystem {
            sites,
            spins: kept_spins,
            facets,
            weights,
            offsets,
            report,
        })
    }

    pub fn d(&self) -> usize {
        self.sites.len()
    }

    pub fn site_names(&self) -> &[String] {
        &self.sites
    }

    pub fn site_name(&self, v: usize) -> &str {
        &self.sites[v]
    }

    pub fn site_index(&self, name: &str) -> Option<usize> {
        self.sites.iter().position(|s| s == name)
    }

    pub fn spins(&self, v: usize) -> &[String] {
        &self.spins[v]
    }

    pub fn spin_count(&self, v: usize) -> usize {
        self.spins[v].len()
    }

    pub fn spin_index(&self, v: usize, name: &str) -> Option<usize> {
        self.spins[v].iter().position(|s| s == name)
    }

    pub fn facets(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn pruning(&self) -> &PruningReport {
        &self.report
    }

    /// Total number of (site, spin) vertices, |X(1)|.
    pub fn num_vertices(&self) -> usize {
        self.offsets[self.d()]
    }

    /// Global index of the vertex `(site, spin)` in X(1).
    pub fn vertex_id(&self, site: usize, spin: usize) -> usize {
        self.offsets[site] + spin
    }

    pub fn vertex(&self, id: usize) -> (usize, usize) {
        let site = self.offsets.partition_point(|&o| o <= id) - 1;
        (site, id - self.offsets[site])
    }

    /// P_{σ∼μ}[face ⊆ σ].
    pub fn face_mass(&self, face: &Face) -> f64 {
        self.facets
            .iter()
            .zip(&self.weights)
            .filter(|(f, _)| face.is_contained_in(f))
            .map(|(_, w)| w)
            .sum()
    }

    /// μ(σ) for a full configuration, zero if it is not a facet.
    pub fn facet_weight(&self, assignment: &[usize]) -> f64 {
        self.facets
            .iter()
            .position(|f| f.as_slice() == assignment)
            .map_or(0.0, |i| self.weights[i])
    }

    pub fn root(&self) -> LinkView<'_> {
        LinkView::root(self)
    }

    pub fn link(&self, tau: &Face) -> Result<LinkView<'_>> {
        LinkView::new(self, tau)
    }

    pub fn face_label(&self, face: &Face) -> String {
        let parts: Vec<String> = face
            .pairs()
            .into_iter()
            .map(|(v, s)| format!("{}={}", self.sites[v], self.spins[v][s]))
            .collect();
        format!("{{{}}}", parts.join(","))
    }

    pub fn to_document(&self) -> SystemDocument {
        SystemDocument::from_system(self)
    }

    pub fn from_document(doc: &SystemDocument) -> Result<Self> {
        doc.to_system()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SystemDocument = serde_json::from_str(text)?;
        doc.to_system()
    }
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-14 {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
}
