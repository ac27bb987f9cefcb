//! Fixture generators: random, quarantine, path (Markov chain) and
//! near-product systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_connected, SpinSystem, MAX_FACETS};
use crate::error::{Error, Result};

pub const SICK: &str = "sick";
pub const QUARANTINE: &str = "quarantine";

/// Simple undirected graph on sites `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for &(a, b) in &edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Precondition(format!("bad edge ({a},{b}) on {n} vertices")));
            }
        }
        Ok(Graph { n, edges })
    }

    pub fn empty(n: usize) -> Self {
        Graph { n, edges: Vec::new() }
    }

    pub fn path(n: usize) -> Self {
        Graph { n, edges: (1..n).map(|i| (i - 1, i)).collect() }
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.edges.push((n - 1, 0));
        }
        g
    }

    /// Disjoint edges (0,1), (2,3), ...
    pub fn matching(pairs: usize) -> Self {
        Graph {
            n: 2 * pairs,
            edges: (0..pairs).map(|i| (2 * i, 2 * i + 1)).collect(),
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u))
    }
}

fn site_names(d: usize) -> Vec<String> {
    (0..d).map(|v| format!("s{v}")).collect()
}

/// Calls `f` on every configuration of `d` sites with `q` spins each,
/// in odometer order with site 0 varying slowest.
fn for_each_config(d: usize, q: usize, mut f: impl FnMut(&[usize])) {
    let mut cur = vec![0usize; d];
    loop {
        f(&cur);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < q {
                break;
            }
            cur[i] = 0;
        }
    }
}

fn config_count(d: usize, q: usize) -> Result<usize> {
    (q as u128)
        .checked_pow(d as u32)
        .filter(|&n| n <= MAX_FACETS as u128)
        .map(|n| n as usize)
        .ok_or_else(|| Error::SizeCap(format!("{q}^{d} configurations exceeds {MAX_FACETS}")))
}

/// The per-edge quarantine constraint: if `a` is sick then `b` is quarantined.
pub fn quarantine_predicate(a: usize, b: usize) -> bool {
    // spin 0 is "sick", spin 1 is "quarantine"
    a != 0 || b == 1
}

/// Uniform distribution over configurations where every friend of a sick
/// site is in quarantine. Spins are `sick`, `quarantine`, `act3`..`act{q}`.
pub fn quarantine_system(graph: &Graph, q: usize) -> Result<SpinSystem> {
    if q < 2 {
        return Err(Error::Precondition("quarantine systems need q >= 2".into()));
    }
    if graph.n == 0 {
        return Err(Error::Precondition("empty site set".into()));
    }
    config_count(graph.n, q)?;
    let mut spins = vec![SICK.to_string(), QUARANTINE.to_string()];
    spins.extend((3..=q).map(|i| format!("act{i}")));
    let mut facets = Vec::new();
    for_each_config(graph.n, q, |c| {
        let ok = graph
            .edges
            .iter()
            .all(|&(u, v)| quarantine_predicate(c[u], c[v]) && quarantine_predicate(c[v], c[u]));
        if ok {
            facets.push((c.to_vec(), 1.0));
        }
    });
    SpinSystem::new(site_names(graph.n), vec![spins; graph.n], facets)
}

/// Random sparse system: each of the `spins^d` configurations is kept with
/// probability `density` and given an i.i.d. uniform(0,1] weight. Retries
/// until the system is connected, at most 100 attempts.
pub fn random_system(d: usize, spins: usize, density: f64, seed: u64) -> Result<SpinSystem> {
    if d < 2 || spins < 1 {
        return Err(Error::Precondition("random systems need d >= 2 and spins >= 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Precondition(format!("density {density} not in (0,1]")));
    }
    config_count(d, spins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..spins).map(|s| format!("x{s}")).collect();
    for _ in 0..100 {
        let sub_seed: u64 = rng.gen();
        let mut sub = ChaCha8Rng::seed_from_u64(sub_seed);
        let mut facets = Vec::new();
        for_each_config(d, spins, |c| {
            if density >= 1.0 || sub.gen::<f64>() < density {
                facets.push((c.to_vec(), 1.0 - sub.gen::<f64>()));
            }
        });
        if facets.is_empty() {
            continue;
        }
        let sys = SpinSystem::new(site_names(d), vec![names.clone(); d], facets)?;
        if is_connected(&sys).connected {
            return Ok(sys);
        }
    }
    Err(Error::Generator(format!(
        "no connected system after 100 attempts (d={d}, spins={spins}, density={density}, seed={seed})"
    )))
}

/// Markov-chain ("path") system: μ(s) ∝ ∏_i f_i(s_i, s_{i+1}) with factor
/// entries uniform in [1, 3]. The entry ratio bound keeps every consecutive
/// codim-2 link at λ₂ ≤ 1/2; non-consecutive pairs are conditionally independent.
pub fn path_system(d: usize, spins: usize, seed: u64) -> Result<SpinSystem> {
    if d < 2 || spins < 1 {
        return Err(Error::Precondition("path systems need d >= 2 and spins >= 1".into()));
    }
    config_count(d, spins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors: Vec<Vec<Vec<f64>>> = (1..d)
        .map(|_| {
            (0..spins)
                .map(|_| (0..spins).map(|_| rng.gen_range(1.0..=3.0)).collect())
                .collect()
        })
        .collect();
    let mut facets = Vec::new();
    for_each_config(d, spins, |c| {
        let w: f64 = (1..d).map(|i| factors[i - 1][c[i - 1]][c[i]]).product();
        facets.push((c.to_vec(), w));
    });
    let names: Vec<String> = (0..spins).map(|s| format!("x{s}")).collect();
    SpinSystem::new(site_names(d), vec![names; d], facets)
}

/// Product measure with random site marginals, each facet weight multiplied
/// by `1 + strength·U[-1,1]`. Small `strength` gives weakly correlated links.
pub fn perturbed_product_system(
    d: usize,
    spins: usize,
    strength: f64,
    seed: u64,
) -> Result<SpinSystem> {
    if d < 2 || spins < 1 {
        return Err(Error::Precondition("need d >= 2 and spins >= 1".into()));
    }
    if !(0.0..1.0).contains(&strength) {
        return Err(Error::Precondition(format!("strength {strength} not in [0,1)")));
    }
    config_count(d, spins)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let marginals: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..spins).map(|_| rng.gen_range(0.5..1.5)).collect())
        .collect();
    let mut facets = Vec::new();
    for_each_config(d, spins, |c| {
        let base: f64 = c.iter().enumerate().map(|(v, &s)| marginals[v][s]).product();
        let noise = 1.0 + strength * rng.gen_range(-1.0..=1.0);
        facets.push((c.to_vec(), base * noise));
    });
    let names: Vec<String> = (0..spins).map(|s| format!("x{s}")).collect();
    SpinSystem::new(site_names(d), vec![names; d], facets)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force filter of every q^d tuple through the edge predicate.
    fn filter_count(graph: &Graph, q: usize) -> usize {
        let mut n = 0;
        for_each_config(graph.n, q, |c| {
            let mut ok = true;
            for &(u, v) in &graph.edges {
                if (c[u] == 0 && c[v] != 1) || (c[v] == 0 && c[u] != 1) {
                    ok = false;
                }
            }
            if ok {
                n += 1;
            }
        });
        n
    }

    #[test]
    fn single_edge_q3() {
        let g = Graph::path(2);
        let sys = quarantine_system(&g, 3).unwrap();
        assert_eq!(sys.num_facets(), filter_count(&g, 3));
        assert_eq!(sys.num_facets(), 6);
    }

    #[test]
    fn empty_graph_is_uniform_product() {
        let sys = quarantine_system(&Graph::empty(2), 3).unwrap();
        assert_eq!(sys.num_facets(), 9);
        assert!(sys.weights().iter().all(|&w| (w - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn triangle_q5() {
        let g = Graph::cycle(3);
        let sys = quarantine_system(&g, 5).unwrap();
        assert_eq!(sys.num_facets(), filter_count(&g, 5));
    }

    #[test]
    fn quarantine_size_cap() {
        assert!(matches!(
            quarantine_system(&Graph::empty(12), 10),
            Err(Error::SizeCap(_))
        ));
    }

    #[test]
    fn random_full_density() {
        let sys = random_system(3, 3, 1.0, 0).unwrap();
        assert_eq!(sys.num_facets(), 27);
    }

    #[test]
    fn random_is_deterministic() {
        let a = random_system(4, 3, 0.7, 99).unwrap();
        let b = random_system(4, 3, 0.7, 99).unwrap();
        assert_eq!(a, b);
        let c = random_system(4, 3, 0.7, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_d3_connected() {
        let sys = random_system(3, 3, 0.7, 7).unwrap();
        assert!(is_connected(&sys).connected);
    }

    #[test]
    fn odometer_enumerates_all() {
        let mut seen = Vec::new();
        for_each_config(2, 3, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[0], vec![0, 0]);
        assert_eq!(seen[1], vec![0, 1]);
        assert_eq!(seen[8], vec![2, 2]);
    }
}
