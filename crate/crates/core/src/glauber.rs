//! Glauber dynamics: pick a site uniformly, re-sample its spin from the
//! conditional law given all other spins.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::SpinSystem;
use crate::error::{Error, Result};
use crate::spectra::symmetric_eigenvalues;

/// Largest state count for which the exact transition matrix is built.
pub const MAX_CHAIN_STATES: usize = 20_000;
/// Largest state count for the dense eigensolve behind [`spectral_gap`].
pub const MAX_EIGEN_STATES: usize = 3_000;

/// Resampling groups: facets that agree off one site.
#[derive(Clone, Debug)]
struct Groups {
    /// `member_of[facet·d + u]` is the group of `facet` when `u` is resampled.
    member_of: Vec<usize>,
    /// Facet indices of each group with their cumulative conditional weights.
    groups: Vec<(Vec<usize>, Vec<f64>)>,
}

impl Groups {
    fn build(system: &SpinSystem) -> Self {
        let d = system.d();
        let n = system.num_facets();
        let mut member_of = vec![0; n * d];
        let mut groups: Vec<(Vec<usize>, Vec<f64>)> = Vec::new();
        for u in 0..d {
            let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
            for (i, f) in system.facets().iter().enumerate() {
                let mut key = f.clone();
                key[u] = usize::MAX;
                let g = *index.entry(key).or_insert_with(|| {
                    groups.push((Vec::new(), Vec::new()));
                    groups.len() - 1
                });
                groups[g].0.push(i);
                member_of[i * d + u] = g;
            }
        }
        let weights = system.weights();
        for (members, cum) in &mut groups {
            let total: f64 = members.iter().map(|&i| weights[i]).sum();
            let mut acc = 0.0;
            for &i in members.iter() {
                acc += weights[i] / total;
                cum.push(acc);
            }
        }
        Groups { member_of, groups }
    }
}

/// Exact Glauber chain on the facets of a system, stored sparsely by row.
#[derive(Clone, Debug)]
pub struct GlauberChain {
    pub mu: Vec<f64>,
    /// `rows[σ]` lists `(σ′, P_G(σ, σ′))` with merged duplicates.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl GlauberChain {
    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n > MAX_EIGEN_STATES {
            return Err(Error::SizeCap(format!("dense chain matrix with {n} states")));
        }
        let mut p = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, x) in row {
                p[(i, j)] += x;
            }
        }
        Ok(p)
    }

    /// `x ↦ x P_G` for a row distribution.
    pub fn step_distribution(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if x[i] != 0.0 {
                for &(j, p) in row {
                    out[j] += x[i] * p;
                }
            }
        }
        out
    }

    /// Largest deviation from `Σ_σ′ P(σ,σ′) = 1`.
    pub fn row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|μP − μ|`.
    pub fn stationarity_error(&self) -> f64 {
        let next = self.step_distribution(&self.mu);
        next.iter().zip(&self.mu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest `|μ(σ)P(σ,σ′) − μ(σ′)P(σ′,σ)|`.
    pub fn detailed_balance_error(&self) -> f64 {
        let lookup = |i: usize, j: usize| {
            self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
        };
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                worst = worst.max((self.mu[i] * p - self.mu[j] * lookup(j, i)).abs());
            }
        }
        worst
    }
}

/// `P_G(σ, σ′) = (1/d)·Σ_u [σ, σ′ agree off u]·μ_{σ∖u}(σ′_u)`.
pub fn transition_matrix(system: &SpinSystem) -> Result<GlauberChain> {
    let n = system.num_facets();
    if n > MAX_CHAIN_STATES {
        return Err(Error::SizeCap(format!("{n} states exceeds the exact-chain limit {MAX_CHAIN_STATES}")));
    }
    let d = system.d();
    let groups = Groups::build(system);
    let weights = system.weights();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: HashMap<usize, f64> = HashMap::new();
        for u in 0..d {
            let (members, _) = &groups.groups[groups.member_of[i * d + u]];
            let total: f64 = members.iter().map(|&j| weights[j]).sum();
            for &j in members {
                *row.entry(j).or_insert(0.0) += weights[j] / total / d as f64;
            }
        }
        let mut row: Vec<(usize, f64)> = row.into_iter().collect();
        row.sort_unstable_by_key(|e| e.0);
        rows.push(row);
    }
    Ok(GlauberChain { mu: weights.to_vec(), rows })
}

/// Second-largest eigenvalue of `P_G`, through `D^{1/2} P D^{−1/2}`.
pub fn second_eigenvalue(chain: &GlauberChain) -> Result<f64> {
    if chain.len() < 2 {
        return Ok(0.0);
    }
    let p = chain.dense()?;
    let s: Vec<f64> = chain.mu.iter().map(|m| m.sqrt()).collect();
    let sym = DMatrix::from_fn(p.nrows(), p.ncols(), |i, j| {
        // average the two triangles to absorb round-off asymmetry
        0.5 * (s[i] * p[(i, j)] / s[j] + s[j] * p[(j, i)] / s[i])
    });
    Ok(symmetric_eigenvalues(&sym)[1])
}

/// `1 − λ₂(P_G)`.
pub fn spectral_gap(chain: &GlauberChain) -> Result<f64> {
    Ok(1.0 - second_eigenvalue(chain)?)
}

/// `(1/2)·Σ|p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Simulator sharing the resampling groups across runs.
#[derive(Clone, Debug)]
pub struct GlauberSampler<'a> {
    system: &'a SpinSystem,
    groups: Groups,
}

/// Summary of one simulated trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct ChainRun {
    pub seed: u64,
    pub start: usize,
    pub steps: u64,
    /// Facet index of the final state.
    pub final_state: usize,
    /// Time-averaged site marginals, `[site][spin]`.
    pub marginals: Vec<Vec<f64>>,
    /// Batch-means standard errors of `marginals`.
    pub standard_errors: Vec<Vec<f64>>,
    #[serde(skip)]
    pub visits: Vec<u64>,
}

const BATCHES: u64 = 50;

impl<'a> GlauberSampler<'a> {
    pub fn new(system: &'a SpinSystem) -> Self {
        GlauberSampler { system, groups: Groups::build(system) }
    }

    fn step(&self, state: usize, rng: &mut ChaCha8Rng) -> usize {
        let d = self.system.d();
        let u = rng.gen_range(0..d);
        let (members, cum) = &self.groups.groups[self.groups.member_of[state * d + u]];
        let r: f64 = rng.gen();
        let k = cum.partition_point(|&c| c <= r).min(members.len() - 1);
        members[k]
    }

    /// Runs `steps` moves from facet `start`. Marginals average the states
    /// after each move (the start state alone when `steps = 0`).
    pub fn run(&self, start: usize, steps: u64, seed: u64) -> Result<ChainRun> {
        let sys = self.system;
        if start >= sys.num_facets() || sys.weights()[start] <= 0.0 {
            return Err(Error::Precondition(format!("start facet {start} has zero weight")));
        }
        let d = sys.d();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut visits = vec![0u64; sys.num_facets()];
        let batch_len = (steps / BATCHES).max(1);
        let mut batch_counts: Vec<Vec<Vec<f64>>> = Vec::new();
        let mut current: Vec<Vec<f64>> = (0..d).map(|v| vec![0.0; sys.spin_count(v)]).collect();
        let mut in_batch = 0u64;
        let mut state = start;
        for _ in 0..steps {
            state = self.step(state, &mut rng);
            visits[state] += 1;
            for (v, &s) in sys.facets()[state].iter().enumerate() {
                current[v][s] += 1.0;
            }
            in_batch += 1;
            if in_batch == batch_len {
                batch_counts.push(std::mem::replace(
                    &mut current,
                    (0..d).map(|v| vec![0.0; sys.spin_count(v)]).collect(),
                ));
                in_batch = 0;
            }
        }
        if steps == 0 {
            visits[start] = 1;
        }
        let total: u64 = visits.iter().sum();
        let mut marginals: Vec<Vec<f64>> = (0..d).map(|v| vec![0.0; sys.spin_count(v)]).collect();
        for (i, &c) in visits.iter().enumerate() {
            for (v, &s) in sys.facets()[i].iter().enumerate() {
                marginals[v][s] += c as f64 / total as f64;
            }
        }
        let nb = batch_counts.len();
        let standard_errors = (0..d)
            .map(|v| {
                (0..sys.spin_count(v))
                    .map(|s| {
                        if nb < 2 {
                            return f64::NAN;
                        }
                        let means: Vec<f64> = batch_counts.iter().map(|b| b[v][s] / batch_len as f64).collect();
                        let m = means.iter().sum::<f64>() / nb as f64;
                        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nb - 1) as f64;
                        (var / nb as f64).sqrt()
                    })
                    .collect()
            })
            .collect();
        Ok(ChainRun { seed, start, steps, final_state: state, marginals, standard_errors, visits })
    }

    /// Final states of `runs` independent chains, as an empirical distribution.
    pub fn final_distribution(&self, start: usize, steps: u64, runs: usize, seed: u64) -> Result<Vec<f64>> {
        let finals: Vec<usize> = (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
                let mut state = start;
                for _ in 0..steps {
                    state = self.step(state, &mut rng);
                }
                state
            })
            .collect();
        let mut dist = vec![0.0; self.system.num_facets()];
        for s in finals {
            dist[s] += 1.0 / runs as f64;
        }
        Ok(dist)
    }
}

/// [`GlauberSampler::run`] for a one-off trajectory.
pub fn run_chain(system: &SpinSystem, start: usize, steps: u64, seed: u64) -> Result<ChainRun> {
    GlauberSampler::new(system).run(start, steps, seed)
}

/// Exact site marginals of μ, `[site][spin]`.
pub fn exact_marginals(system: &SpinSystem) -> Vec<Vec<f64>> {
    let root = system.root();
    (0..system.d())
        .map(|v| (0..system.spin_count(v)).map(|s| root.marginal(v, s)).collect())
        .collect()
}

/// Distribution after `t` steps from a point mass at `start`.
pub fn distribution_after(chain: &GlauberChain, start: usize, t: usize) -> Vec<f64> {
    let mut x = vec![0.0; chain.len()];
    x[start] = 1.0;
    for _ in 0..t {
        x = chain.step_distribution(&x);
    }
    x
}
