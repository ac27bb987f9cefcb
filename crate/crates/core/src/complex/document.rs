use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SpinSystem;
use crate::error::{Error, Result};

/// On-disk form of a spin system, with an optional walk graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub sites: Vec<SiteDocument>,
    pub facets: Vec<FacetDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDocument {
    pub name: String,
    pub spins: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacetDocument {
    pub assignment: BTreeMap<String, String>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkDocument {
    pub boundary: Vec<String>,
    pub edges: Vec<WalkEdgeDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkEdgeDocument {
    pub from: String,
    pub to: String,
    pub p: f64,
}

impl SystemDocument {
    pub fn from_system(system: &SpinSystem) -> Self {
        let sites = (0..system.d())
            .map(|v| SiteDocument {
                name: system.site_name(v).to_string(),
                spins: system.spins(v).to_vec(),
            })
            .collect();
        let facets = system
            .facets()
            .iter()
            .zip(system.weights())
            .map(|(f, &weight)| FacetDocument {
                assignment: f
                    .iter()
                    .enumerate()
                    .map(|(v, &s)| (system.site_name(v).to_string(), system.spins(v)[s].clone()))
                    .collect(),
                weight,
            })
            .collect();
        SystemDocument { sites, facets, walk: None }
    }

    pub fn to_system(&self) -> Result<SpinSystem> {
        let names: Vec<String> = self.sites.iter().map(|s| s.name.clone()).collect();
        let spins: Vec<Vec<String>> = self.sites.iter().map(|s| s.spins.clone()).collect();
        for site in &self.sites {
            if site.spins.is_empty() {
                return Err(Error::EmptySpins(site.name.clone()));
            }
        }
        let mut facets = Vec::with_capacity(self.facets.len());
        for facet in &self.facets {
            for key in facet.assignment.keys() {
                if !names.contains(key) {
                    return Err(Error::UnknownSite(key.clone()));
                }
            }
            let mut dense = Vec::with_capacity(names.len());
            for (name, list) in names.iter().zip(&spins) {
                let spin = facet
                    .assignment
                    .get(name)
                    .ok_or_else(|| Error::Malformed(format!("facet does not assign site `{name}`")))?;
                let s = list.iter().position(|x| x == spin).ok_or_else(|| Error::UnknownSpin {
                    site: name.clone(),
                    spin: spin.clone(),
                })?;
                dense.push(s);
            }
            facets.push((dense, facet.weight));
        }
        SpinSystem::new(names, spins, facets)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}
