//! Commutative π maps built from hitting probabilities, α vectors and their
//! cones, the recursive polynomials `p_σ`, and Hessian certificates.
//!
//! Vectors are indexed by global vertex id (see [`SpinSystem::vertex_id`]);
//! entries outside the relevant link are ignored on input and zero on output.

mod expand;
mod hessian;
mod poly;
mod sweep;

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::complex::{Face, SpinSystem};
use crate::error::{Error, Result};
use crate::walks::WalkGraph;

pub use expand::{dense_expand, Poly, EXPAND_MAX_CODIM, EXPAND_MAX_VARS};
pub use hessian::{
    codim2_hessian, codim2_hypothesis, directional_product, directional_product_symbolic,
    huv_certificate, huv_certificates, Codim2Hessian, HuvCertificate, HypothesisReport,
    HypothesisViolation,
};
pub use poly::{directional_derivative, poly_eval, poly_table, POLY_MAX_FACES};
pub use sweep::{derivative_hessian, lorentzian_sweep, Counterexample, SweepReport};

/// Largest site count for which the hitting table is built (2^d site sets).
pub const MAX_LORENTZ_SITES: usize = 12;
/// `cone_member` enumerates every extension face, so it is gated by codimension.
pub const CONE_MAX_CODIM: usize = 6;
/// Tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Tolerance for eigenvalue inequalities.
pub const EIGEN_TOL: f64 = 1e-9;

/// π-map coefficients and polynomial machinery for a system paired with a
/// walk graph whose interior vertices are the sites.
pub struct LorentzContext<'a> {
    system: &'a SpinSystem,
    walk: &'a WalkGraph,
    d: usize,
    /// `hit[(mask·d + target)·d + source] = 𝕎_mask[source → target]`.
    hit: Vec<f64>,
    hypothesis: OnceLock<HypothesisReport>,
}

/// Membership test flavour for [`cone_member`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeMode {
    Strict,
    Closure,
}

/// `α_σ(w)` as a global vector supported on `X_σ(1)`.
#[derive(Clone, Debug)]
pub struct AlphaVector {
    pub base: Face,
    pub target: usize,
    pub entries: Vec<f64>,
}

impl<'a> LorentzContext<'a> {
    /// Builds the hitting table eagerly; afterwards the context is read-only.
    pub fn new(system: &'a SpinSystem, walk: &'a WalkGraph) -> Result<Self> {
        let d = system.d();
        if walk.n_interior() != d {
            return Err(Error::Dimension(format!(
                "walk has {} interior vertices, system has {d} sites",
                walk.n_interior()
            )));
        }
        for v in 0..d {
            if walk.name(v) != system.site_name(v) {
                return Err(Error::InvalidWalk(format!(
                    "interior vertex {v} is `{}`, expected site `{}`",
                    walk.name(v),
                    system.site_name(v)
                )));
            }
        }
        if d > MAX_LORENTZ_SITES {
            return Err(Error::SizeCap(format!(
                "hitting table over {d} sites exceeds the limit of {MAX_LORENTZ_SITES}"
            )));
        }
        let blocks: Vec<Vec<f64>> = (0..1u64 << d)
            .into_par_iter()
            .map(|mask| {
                let mut block = Vec::with_capacity(d * d);
                for target in 0..d {
                    let col = walk.hitting_column(mask, target)?;
                    block.extend_from_slice(&col[..d]);
                }
                Ok(block)
            })
            .collect::<Result<_>>()?;
        Ok(LorentzContext {
            system,
            walk,
            d,
            hit: blocks.concat(),
            hypothesis: OnceLock::new(),
        })
    }

    pub fn system(&self) -> &'a SpinSystem {
        self.system
    }

    pub fn walk(&self) -> &'a WalkGraph {
        self.walk
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn slot(&self, mask: u64, source: usize, target: usize) -> usize {
        (mask as usize * self.d + target) * self.d + source
    }

    /// `𝕎_mask[source → target]` over sites.
    pub fn hitting(&self, mask: u64, source: usize, target: usize) -> f64 {
        self.hit[self.slot(mask, source, target)]
    }

    /// `φ_σ(v, u) = 𝕎_{V(σ)∪{u}}[v → u]`, keyed by the site set of σ.
    pub fn phi(&self, sigma_mask: u64, v: usize, u: usize) -> f64 {
        self.hitting(sigma_mask | 1 << u, v, u)
    }

    /// Adds `delta` to one table entry. Only for building non-walk controls;
    /// the result generally violates the decomposition identity.
    pub fn perturb_hitting(&mut self, mask: u64, source: usize, target: usize, delta: f64) {
        let i = self.slot(mask, source, target);
        self.hit[i] += delta;
    }

    pub(crate) fn facets_of(&self, face: &Face) -> Vec<usize> {
        self.system
            .facets()
            .iter()
            .enumerate()
            .filter(|(_, f)| face.is_contained_in(f))
            .map(|(i, _)| i)
            .collect()
    }

    /// Vertices of the link spanned by `facets` on the free sites of `face`,
    /// ordered by site then spin.
    pub(crate) fn link_vertices(&self, face: &Face, facets: &[usize]) -> Vec<(usize, usize)> {
        let mut seen = HashSet::new();
        let all = self.system.facets();
        for &i in facets {
            for v in face.free_sites() {
                seen.insert((v, all[i][v]));
            }
        }
        let mut out: Vec<_> = seen.into_iter().collect();
        out.sort_unstable();
        out
    }

    /// Children `ρ ∪ {x}` of `face` grouped with the facets containing them.
    pub(crate) fn children(&self, face: &Face, facets: &[usize]) -> BTreeMap<(usize, usize), Vec<usize>> {
        let all = self.system.facets();
        let mut out: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for v in face.free_sites() {
            for &i in facets {
                out.entry((v, all[i][v])).or_default().push(i);
            }
        }
        out
    }

    /// One π step from `face` along `x`, written for the vertices of the child link.
    pub(crate) fn pi_step(
        &self,
        face: &Face,
        x: (usize, usize),
        t: &[f64],
        child_vertices: &[(usize, usize)],
    ) -> Vec<f64> {
        let mask = face.site_mask();
        let tx = t[self.system.vertex_id(x.0, x.1)];
        let mut out = vec![0.0; t.len()];
        for &(v, s) in child_vertices {
            let id = self.system.vertex_id(v, s);
            out[id] = t[id] - self.phi(mask, v, x.0) * tx;
        }
        out
    }

    fn check_face(&self, sigma: &Face) -> Result<Vec<usize>> {
        if sigma.d() != self.d {
            return Err(Error::Dimension(format!("face over {} sites, system has {}", sigma.d(), self.d)));
        }
        let facets = self.facets_of(sigma);
        if facets.is_empty() {
            return Err(Error::EmptyLink);
        }
        Ok(facets)
    }

    fn check_vector(&self, t: &[f64]) -> Result<()> {
        if t.len() != self.system.num_vertices() {
            return Err(Error::Dimension(format!(
                "vector of length {}, expected {}",
                t.len(),
                self.system.num_vertices()
            )));
        }
        Ok(())
    }

    pub(crate) fn random_vector(&self, vertices: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut t = vec![0.0; self.system.num_vertices()];
        for &(v, s) in vertices {
            t[self.system.vertex_id(v, s)] = rng.gen_range(-1.0..=1.0);
        }
        t
    }
}

/// `π_{σ+x}(t)`: `t_y − φ_σ(site(y), site(x))·t_x` on every vertex `y` of `X_{σ∪x}(1)`.
pub fn pi_apply(ctx: &LorentzContext<'_>, sigma: &Face, x: (usize, usize), t: &[f64]) -> Result<Vec<f64>> {
    ctx.check_vector(t)?;
    let facets = ctx.check_face(sigma)?;
    if sigma.contains_site(x.0) {
        return Err(Error::Precondition(format!("site {} is already assigned", x.0)));
    }
    let child = sigma.with(x.0, x.1);
    let child_facets: Vec<usize> = facets
        .into_iter()
        .filter(|&i| ctx.system.facets()[i][x.0] == x.1)
        .collect();
    if child_facets.is_empty() {
        return Err(Error::Precondition(format!("vertex {x:?} is not in the link")));
    }
    let vertices = ctx.link_vertices(&child, &child_facets);
    Ok(ctx.pi_step(sigma, x, t, &vertices))
}

/// `π_{σ+τ}` as consecutive single steps in the order given.
pub fn pi_sequence(ctx: &LorentzContext<'_>, sigma: &Face, tau: &[(usize, usize)], t: &[f64]) -> Result<Vec<f64>> {
    let mut face = sigma.clone();
    let mut cur = t.to_vec();
    for &x in tau {
        cur = pi_apply(ctx, &face, x, &cur)?;
        face = face.with(x.0, x.1);
    }
    Ok(cur)
}

/// Both composition orders of `π` along `{x, y}` agree on `trials` random vectors.
pub fn check_commutativity(
    ctx: &LorentzContext<'_>,
    sigma: &Face,
    x: (usize, usize),
    y: (usize, usize),
    trials: usize,
    seed: u64,
) -> Result<bool> {
    if x.0 == y.0 {
        return Err(Error::Precondition("x and y share a site".into()));
    }
    let top = sigma.with(x.0, x.1).with(y.0, y.1);
    let facets = ctx.check_face(sigma)?;
    if ctx.facets_of(&top).is_empty() {
        return Err(Error::Precondition(format!("{{{x:?}, {y:?}}} is not a face of the link")));
    }
    let vertices = ctx.link_vertices(sigma, &facets);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let t = ctx.random_vector(&vertices, &mut rng);
        let a = pi_sequence(ctx, sigma, &[x, y], &t)?;
        let b = pi_sequence(ctx, sigma, &[y, x], &t)?;
        if a.iter().zip(&b).any(|(p, q)| (p - q).abs() > IDENTITY_TOL) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Outcome of checking commutativity over every face and every admissible pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommutativitySummary {
    pub pairs_checked: usize,
    pub failures: Vec<(Face, (usize, usize), (usize, usize))>,
}

/// Runs [`check_commutativity`] for all `σ` and all `{x, y} ∈ X_σ(2)`.
pub fn commutativity_sweep(ctx: &LorentzContext<'_>, trials: usize, seed: u64) -> Result<CommutativitySummary> {
    let mut jobs = Vec::new();
    for codim in 2..=ctx.d {
        for sigma in crate::complex::enumerate_faces(ctx.system, codim)? {
            let facets = ctx.facets_of(&sigma);
            let verts = ctx.link_vertices(&sigma, &facets);
            for (i, &x) in verts.iter().enumerate() {
                for &y in &verts[i + 1..] {
                    if x.0 != y.0 && !ctx.facets_of(&sigma.with(x.0, x.1).with(y.0, y.1)).is_empty() {
                        jobs.push((sigma.clone(), x, y));
                    }
                }
            }
        }
    }
    let results: Vec<bool> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (s, x, y))| check_commutativity(ctx, s, *x, *y, trials, seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    let failures = jobs
        .iter()
        .zip(&results)
        .filter(|(_, &ok)| !ok)
        .map(|(j, _)| j.clone())
        .collect();
    Ok(CommutativitySummary { pairs_checked: jobs.len(), failures })
}

/// `α_σ(w)_{us_u} = 𝕎_{V(σ)}[u → w]` over `X_σ(1)`.
pub fn alpha_vector(ctx: &LorentzContext<'_>, sigma: &Face, w: usize) -> Result<AlphaVector> {
    let facets = ctx.check_face(sigma)?;
    if w >= ctx.d || sigma.contains_site(w) {
        return Err(Error::Precondition(format!("site {w} is not free in the face")));
    }
    let mask = sigma.site_mask();
    let mut entries = vec![0.0; ctx.system.num_vertices()];
    for (u, s) in ctx.link_vertices(sigma, &facets) {
        let value = ctx.hitting(mask, u, w);
        if u == w && value < 1.0 - IDENTITY_TOL {
            return Err(Error::InvalidWalk(format!("self-hitting weight {value} of site {w} is below 1")));
        }
        entries[ctx.system.vertex_id(u, s)] = value;
    }
    Ok(AlphaVector { base: sigma.clone(), target: w, entries })
}

/// `Σ_w α_σ(w)` over the free sites, the canonical interior point of the cone.
pub fn alpha_sum(ctx: &LorentzContext<'_>, sigma: &Face) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; ctx.system.num_vertices()];
    for w in sigma.free_sites() {
        let a = alpha_vector(ctx, sigma, w)?;
        for (x, y) in acc.iter_mut().zip(&a.entries) {
            *x += y;
        }
    }
    Ok(acc)
}

/// π-positivity of `v`: every `π_{σ+τ}(v)` is positive (or nonnegative within
/// `1e-12` in closure mode) on `X_{σ∪τ}(1)`, for every face `τ` of the link.
pub fn cone_member(ctx: &LorentzContext<'_>, sigma: &Face, v: &[f64], mode: ConeMode) -> Result<bool> {
    ctx.check_vector(v)?;
    let facets = ctx.check_face(sigma)?;
    if sigma.codim() > CONE_MAX_CODIM {
        return Err(Error::SizeCap(format!(
            "cone membership at codimension {} exceeds {CONE_MAX_CODIM}",
            sigma.codim()
        )));
    }
    let mut seen = HashSet::new();
    Ok(cone_rec(ctx, sigma, &facets, v, mode, &mut seen))
}

fn cone_rec(
    ctx: &LorentzContext<'_>,
    face: &Face,
    facets: &[usize],
    t: &[f64],
    mode: ConeMode,
    seen: &mut HashSet<Face>,
) -> bool {
    if !seen.insert(face.clone()) {
        return true;
    }
    let verts = ctx.link_vertices(face, facets);
    let ok = verts.iter().all(|&(v, s)| {
        let x = t[ctx.system.vertex_id(v, s)];
        match mode {
            ConeMode::Strict => x > 0.0,
            ConeMode::Closure => x >= -1e-12,
        }
    });
    if !ok {
        return false;
    }
    for (x, child_facets) in ctx.children(face, facets) {
        let child = face.with(x.0, x.1);
        if seen.contains(&child) {
            continue;
        }
        let cv = ctx.link_vertices(&child, &child_facets);
        let next = ctx.pi_step(face, x, t, &cv);
        if !cone_rec(ctx, &child, &child_facets, &next, mode, seen) {
            return false;
        }
    }
    true
}
