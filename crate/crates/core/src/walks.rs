//! Absorbing random walks: hitting probabilities `𝕎_U[u→v]`, certificate
//! matrices and a walk sampler.
//!
//! Vertices `0..n_interior` are the interior `V`; the remaining ones are the
//! boundary `B`. Subsets of `V` are `u64` bit masks. Walks stop on reaching
//! `B`, so boundary rows of `W` are never read by the solvers.

use nalgebra::{DMatrix, DVector};
use petgraph::graph::DiGraph;
use petgraph::visit::{Bfs, Reversed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{SpinSystem, WalkDocument, WalkEdgeDocument};
use crate::error::{Error, Result};

/// Round-off below this magnitude is clamped to zero.
pub const CLAMP: f64 = 1e-13;
/// Interior rows of `W` must sum to one within this tolerance.
pub const ROW_TOL: f64 = 1e-12;
pub const MAX_WALK_STEPS: usize = 10_000_000;

/// A walk graph on `V ∪ B` with transition matrix `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkGraph {
    names: Vec<String>,
    n_interior: usize,
    w: DMatrix<f64>,
}

impl WalkGraph {
    /// Builds a walk graph from `(from, to, p)` triples over vertex indices.
    /// Interior rows must be stochastic; boundary rows are unconstrained.
    pub fn new(
        interior: Vec<String>,
        boundary: Vec<String>,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n_interior = interior.len();
        if n_interior == 0 || n_interior > 64 {
            return Err(Error::InvalidWalk(format!("{n_interior} interior vertices (need 1..=64)")));
        }
        let mut names = interior;
        names.extend(boundary);
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::InvalidWalk(format!("duplicate vertex `{a}`")));
            }
        }
        let n = names.len();
        let mut w = DMatrix::zeros(n, n);
        for &(a, b, p) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidWalk(format!("edge ({a},{b}) out of range")));
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidWalk(format!("edge ({a},{b}) has weight {p}")));
            }
            w[(a, b)] += p;
        }
        let g = WalkGraph { names, n_interior, w };
        g.check_rows()?;
        Ok(g)
    }

    fn check_rows(&self) -> Result<()> {
        for u in 0..self.n_interior {
            let s = self.w.row(u).sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidWalk(format!(
                    "row of `{}` sums to {s}, expected 1",
                    self.names[u]
                )));
            }
        }
        Ok(())
    }

    /// Walk graph aligned with a system's sites, read from a document.
    pub fn from_document(doc: &WalkDocument, system: &SpinSystem) -> Result<Self> {
        let interior: Vec<String> = system.site_names().to_vec();
        let mut names = interior.clone();
        for b in &doc.boundary {
            if interior.contains(b) {
                return Err(Error::InvalidWalk(format!("`{b}` is both a site and a boundary vertex")));
            }
            names.push(b.clone());
        }
        let index = |name: &str| {
            names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::InvalidWalk(format!("unknown walk vertex `{name}`")))
        };
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            edges.push((index(&e.from)?, index(&e.to)?, e.p));
        }
        let g = WalkGraph::new(interior, doc.boundary.clone(), &edges)?;
        let check = g.validate_absorbing(0);
        if !check.absorbing {
            return Err(Error::InvalidWalk(format!(
                "not absorbing: {:?} cannot reach the boundary",
                check.unreachable.iter().map(|&v| g.name(v)).collect::<Vec<_>>()
            )));
        }
        Ok(g)
    }

    pub fn to_document(&self) -> WalkDocument {
        let n = self.len();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if self.w[(a, b)] > 0.0 {
                    edges.push(WalkEdgeDocument {
                        from: self.names[a].clone(),
                        to: self.names[b].clone(),
                        p: self.w[(a, b)],
                    });
                }
            }
        }
        WalkDocument {
            boundary: self.names[self.n_interior..].to_vec(),
            edges,
        }
    }

    /// The path walk on sites `1..=d` with boundary `{0, d+1}` and every
    /// edge weight 1/2. Interior vertex `i - 1` is site `i`.
    pub fn path(d: usize) -> Result<Self> {
        let interior: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
        Self::path_named(interior)
    }

    /// [`Self::path`] with interior vertices named in path order.
    pub fn path_named(interior: Vec<String>) -> Result<Self> {
        let order: Vec<usize> = (0..interior.len()).collect();
        Self::path_over(interior, &order)
    }

    /// Path walk visiting interior vertices in `order`, with boundary
    /// `start` and `end` at its two ends and every edge weight 1/2.
    pub fn path_over(interior: Vec<String>, order: &[usize]) -> Result<Self> {
        let d = interior.len();
        if d == 0 {
            return Err(Error::InvalidWalk("empty path".into()));
        }
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..d).collect::<Vec<_>>() {
            return Err(Error::InvalidWalk(format!("{order:?} is not an ordering of {d} vertices")));
        }
        let (left, right) = (d, d + 1);
        let mut edges = Vec::new();
        for i in 0..d {
            let prev = if i == 0 { left } else { order[i - 1] };
            let next = if i + 1 == d { right } else { order[i + 1] };
            edges.push((order[i], prev, 0.5));
            edges.push((order[i], next, 0.5));
        }
        edges.push((left, order[0], 1.0));
        edges.push((right, order[d - 1], 1.0));
        WalkGraph::new(interior, vec!["start".into(), "end".into()], &edges)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        v >= self.n_interior
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn w(&self, a: usize, b: usize) -> f64 {
        self.w[(a, b)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Bit mask of the whole interior.
    pub fn interior_mask(&self) -> u64 {
        if self.n_interior == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_interior) - 1
        }
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.len() {
            return Err(Error::InvalidWalk(format!("unknown vertex {v}")));
        }
        Ok(())
    }

    fn check_mask(&self, mask: u64) -> Result<()> {
        if mask & !self.interior_mask() != 0 {
            return Err(Error::InvalidWalk(format!("set {mask:#x} is not a subset of V")));
        }
        Ok(())
    }

    /// Interior vertices reachable from `extra ∪ B` backwards, i.e. that can
    /// reach the (enlarged) boundary.
    pub fn validate_absorbing(&self, extra: u64) -> Absorption {
        let n = self.len();
        let mut g = DiGraph::<(), ()>::with_capacity(n + 1, n * n);
        let nodes: Vec<_> = (0..=n).map(|_| g.add_node(())).collect();
        let sink = nodes[n];
        for a in 0..self.n_interior {
            if extra & (1 << a) != 0 {
                g.add_edge(nodes[a], sink, ());
                continue;
            }
            for b in 0..n {
                if self.w[(a, b)] > 0.0 {
                    g.add_edge(nodes[a], nodes[b], ());
                }
            }
        }
        for b in self.n_interior..n {
            g.add_edge(nodes[b], sink, ());
        }
        let rev = Reversed(&g);
        let mut bfs = Bfs::new(rev, sink);
        let mut seen = vec![false; n + 1];
        while let Some(x) = bfs.next(rev) {
            seen[x.index()] = true;
        }
        let unreachable: Vec<usize> = (0..self.n_interior).filter(|&v| !seen[v]).collect();
        Absorption {
            absorbing: unreachable.is_empty(),
            unreachable,
        }
    }

    /// `h(x) = Σ_{ℓ ≥ 1}` weight of walks `x → v` whose interior vertices all
    /// lie in `z`, for every vertex `x`. Boundary sources get 0.
    pub fn first_passage(&self, z: u64, v: usize) -> Result<Vec<f64>> {
        let zs: Vec<usize> = (0..self.n_interior).filter(|&i| z & (1 << i) != 0).collect();
        let m = zs.len();
        let mut sol = DVector::zeros(m);
        if m > 0 {
            let mut a = DMatrix::identity(m, m);
            let mut c = DVector::zeros(m);
            for (i, &x) in zs.iter().enumerate() {
                for (j, &y) in zs.iter().enumerate() {
                    a[(i, j)] -= self.w[(x, y)];
                }
                c[i] = self.w[(x, v)];
            }
            sol = a.lu().solve(&c).ok_or(Error::Singular)?;
        }
        let mut h = vec![0.0; self.len()];
        for (x, hx) in h.iter_mut().enumerate().take(self.n_interior) {
            let mut s = self.w[(x, v)];
            for (j, &y) in zs.iter().enumerate() {
                s += self.w[(x, y)] * sol[j];
            }
            *hx = clamp(s)?;
        }
        Ok(h)
    }

    /// `𝕎_U[u→v]`: total weight of walks from `u` to `v` whose intermediate
    /// vertices avoid `U ∪ B`.
    pub fn hitting_prob(&self, avoid: u64, u: usize, v: usize) -> Result<f64> {
        self.check_vertex(u)?;
        Ok(self.hitting_column(avoid, v)?[u])
    }

    /// `𝕎_U[x→v]` for every source `x ∈ V ∪ B`.
    pub fn hitting_column(&self, avoid: u64, v: usize) -> Result<Vec<f64>> {
        self.check_vertex(v)?;
        self.check_mask(avoid)?;
        let free = self.interior_mask() & !avoid;
        let mut col = if !self.is_boundary(v) && free & (1 << v) != 0 {
            // Revisits of v allowed: first passage times the return series.
            let mut h = self.first_passage(free & !(1 << v), v)?;
            let ret = self.return_series(h[v])?;
            for x in h.iter_mut() {
                *x *= ret;
            }
            h[v] = ret;
            h
        } else {
            let mut h = self.first_passage(free, v)?;
            h[v] += 1.0;
            h
        };
        // boundary sources never move
        for (x, c) in col.iter_mut().enumerate().skip(self.n_interior) {
            *c = if x == v { 1.0 } else { 0.0 };
        }
        Ok(col)
    }

    fn return_series(&self, first_return: f64) -> Result<f64> {
        if first_return >= 1.0 {
            return Err(Error::Singular);
        }
        Ok(1.0 / (1.0 - first_return))
    }

    /// Certificate matrices over the residual interior `V ∖ extra`.
    pub fn hitting_matrix(&self, extra: u64) -> Result<HittingMatrix> {
        self.check_mask(extra)?;
        let free = self.interior_mask() & !extra;
        let sites: Vec<usize> = (0..self.n_interior).filter(|&i| free & (1 << i) != 0).collect();
        let k = sites.len();
        let mut m_prime = DMatrix::zeros(k, k);
        for (j, &v) in sites.iter().enumerate() {
            let h = self.first_passage(free & !(1 << v), v)?;
            for (i, &u) in sites.iter().enumerate() {
                if i != j {
                    m_prime[(i, j)] = h[u];
                }
            }
        }
        let m = crate::spectra::symmetrize(&m_prime);
        Ok(HittingMatrix { sites, m_prime, m })
    }

    /// `E_{Q∼𝒲[u]}[d(Q) − 2]` with `extra` promoted to the boundary.
    pub fn expected_distinct(&self, extra: u64, u: usize) -> Result<f64> {
        let hm = self.hitting_matrix(extra)?;
        let i = hm
            .sites
            .iter()
            .position(|&x| x == u)
            .ok_or_else(|| Error::Precondition(format!("vertex {u} is not residual")))?;
        Ok(hm.m_prime.row(i).sum())
    }

    /// Samples one walk from `u` until it reaches `B ∪ extra`.
    pub fn sample_walk<R: Rng + ?Sized>(&self, extra: u64, u: usize, rng: &mut R) -> Result<WalkRecord> {
        self.check_vertex(u)?;
        self.check_mask(extra)?;
        let stops = |x: usize| self.is_boundary(x) || extra & (1 << x) != 0;
        let mut vertices = vec![u];
        let mut cur = u;
        if !self.is_boundary(u) {
            loop {
                if vertices.len() > MAX_WALK_STEPS {
                    return Err(Error::InvalidWalk(format!(
                        "walk from `{}` exceeded {MAX_WALK_STEPS} steps",
                        self.names[u]
                    )));
                }
                let r: f64 = rng.gen();
                let mut acc = 0.0;
                let mut next = None;
                for b in 0..self.len() {
                    let p = self.w[(cur, b)];
                    if p > 0.0 {
                        acc += p;
                        next = Some(b);
                        if r < acc {
                            break;
                        }
                    }
                }
                cur = next.ok_or_else(|| Error::InvalidWalk("vertex with no out-edges".into()))?;
                vertices.push(cur);
                if stops(cur) {
                    break;
                }
            }
        }
        let mut seen = vertices.clone();
        seen.sort_unstable();
        seen.dedup();
        Ok(WalkRecord {
            steps: vertices.len() - 1,
            distinct: seen.len(),
            vertices,
        })
    }

    /// [`Self::sample_walk`] with a fresh ChaCha8 stream for `seed`.
    pub fn sample_walk_seeded(&self, extra: u64, u: usize, seed: u64) -> Result<WalkRecord> {
        self.sample_walk(extra, u, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

fn clamp(x: f64) -> Result<f64> {
    if x < -CLAMP || !x.is_finite() {
        return Err(Error::Singular);
    }
    Ok(x.max(0.0))
}

/// Result of the absorbing check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Absorption {
    pub absorbing: bool,
    /// Interior vertices with no path to the boundary.
    pub unreachable: Vec<usize>,
}

/// `M′(u,v) = 𝕎_{extra∪{v}}[u→v]` and its symmetrization.
#[derive(Clone, Debug)]
pub struct HittingMatrix {
    /// Interior vertex of each row / column.
    pub sites: Vec<usize>,
    pub m_prime: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

/// One sampled absorbing walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkRecord {
    pub vertices: Vec<usize>,
    /// Number of edges, `|Q|`.
    pub steps: usize,
    /// Number of distinct vertices, `d(Q)`.
    pub distinct: usize,
}

/// Random absorbing graph: `n` interior vertices, each with a pendant
/// boundary vertex `b_v`. Interior edges (self-loops included) appear with
/// probability `density`; every vertex keeps a positive exit to `b_v`.
pub fn random_absorbing_graph(n: usize, density: f64, seed: u64) -> Result<WalkGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let boundary: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for v in 0..n {
            let p = if u == v { density / 4.0 } else { density };
            if rng.gen::<f64>() < p {
                row.push((v, 1.0 - rng.gen::<f64>()));
            }
        }
        row.push((n + u, 0.05 + rng.gen::<f64>()));
        let total: f64 = row.iter().map(|e| e.1).sum();
        edges.extend(row.into_iter().map(|(v, x)| (u, v, x / total)));
        edges.push((n + u, u, 1.0));
    }
    WalkGraph::new(interior, boundary, &edges)
}
