use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{alpha_vector, dense_expand, LorentzContext, EIGEN_TOL};
use crate::complex::Face;
use crate::error::{Error, Result};
use crate::influence::codim2_spectra;
use crate::spectra::{bipartite_pair_operator, lambda2_selfadjoint, one_positive_eigenvalue};
use crate::verdict::Verdict;

/// Hessian of the quadratic `p_σ` on a codimension-2 face with free sites `u < v`.
#[derive(Clone, Debug)]
pub struct Codim2Hessian {
    pub sigma: Face,
    pub u: usize,
    pub v: usize,
    /// Link vertices, `u`-spins first.
    pub labels: Vec<(usize, usize)>,
    /// `A(x, y) = μ(σ ∪ {x, y})`, unnormalized.
    pub adjacency: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    /// Diagonal coefficient on `u`-spins, `𝕎_{V(σ)∪{u}}[v → u]`.
    pub coeff_u: f64,
    /// Diagonal coefficient on `v`-spins, `𝕎_{V(σ)∪{v}}[u → v]`.
    pub coeff_v: f64,
}

/// `H = A_σ − M_σ`, with `M_σ(x, x) = coeff·deg_A(x)`.
///
/// The coefficient is the π-map coefficient. It equals the one-step weight
/// `W(v, u)` unless `v` carries a self-loop.
pub fn codim2_hessian(ctx: &LorentzContext<'_>, sigma: &Face) -> Result<Codim2Hessian> {
    if sigma.codim() != 2 {
        return Err(Error::CodimOutOfRange { codim: sigma.codim(), d: 2 });
    }
    let facets = ctx.check_face(sigma)?;
    let free = sigma.free_sites();
    let (u, v) = (free[0], free[1]);
    let labels = ctx.link_vertices(sigma, &facets);
    let n = labels.len();
    let pos = |x: (usize, usize)| labels.binary_search(&x).expect("link vertex");
    let mut a = DMatrix::zeros(n, n);
    for &i in &facets {
        let f = &ctx.system.facets()[i];
        let (x, y) = (pos((u, f[u])), pos((v, f[v])));
        let w = ctx.system.weights()[i];
        a[(x, y)] += w;
        a[(y, x)] += w;
    }
    let mask = sigma.site_mask();
    let coeff_u = ctx.phi(mask, v, u);
    let coeff_v = ctx.phi(mask, u, v);
    let mut h = a.clone();
    for (i, &(site, _)) in labels.iter().enumerate() {
        let deg: f64 = a.row(i).sum();
        h[(i, i)] -= if site == u { coeff_u } else { coeff_v } * deg;
    }
    Ok(Codim2Hessian {
        sigma: sigma.clone(),
        u,
        v,
        labels,
        adjacency: a,
        hessian: h,
        coeff_u,
        coeff_v,
    })
}

/// A codimension-2 face where `λ₂(P_σ) > sqrt(W(u,v)·W(v,u))`.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisViolation {
    pub face: String,
    pub u: usize,
    pub v: usize,
    pub lambda2: f64,
    pub bound: f64,
}

/// Result of checking the codimension-2 premise on every face.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub faces_checked: usize,
    pub violations: Vec<HypothesisViolation>,
}

impl HypothesisReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `λ₂(P_σ) ≤ sqrt(W(u,v)·W(v,u)) + 1e-9` on all codimension-2 faces.
pub fn codim2_hypothesis<'c>(ctx: &'c LorentzContext<'_>) -> Result<&'c HypothesisReport> {
    if let Some(r) = ctx.hypothesis.get() {
        return Ok(r);
    }
    let walk = ctx.walk;
    let mut violations = Vec::new();
    let spectra = codim2_spectra(ctx.system)?;
    for (face, (u, v), l2) in &spectra {
        let bound = (walk.w(*u, *v) * walk.w(*v, *u)).sqrt();
        if *l2 > bound + EIGEN_TOL {
            violations.push(HypothesisViolation {
                face: ctx.system.face_label(face),
                u: *u,
                v: *v,
                lambda2: *l2,
                bound,
            });
        }
    }
    let report = HypothesisReport { faces_checked: spectra.len(), violations };
    Ok(ctx.hypothesis.get_or_init(|| report))
}

fn check_ordering(sigma: &Face, ordering: &[usize]) -> Result<()> {
    let mut sorted = ordering.to_vec();
    sorted.sort_unstable();
    if sorted != sigma.free_sites() {
        return Err(Error::Precondition(format!(
            "ordering {ordering:?} is not a permutation of the free sites"
        )));
    }
    Ok(())
}

/// Closed form of `[∏_i ∇_{α(v_i)}] p_σ(π_σ(t))`:
/// `∏_i 𝕎_{V(σ)∪{v_1..v_{i−1}}}[v_i → v_i] · Σ_{facets ⊇ σ} μ`.
pub fn directional_product(ctx: &LorentzContext<'_>, sigma: &Face, ordering: &[usize]) -> Result<f64> {
    let facets = ctx.check_face(sigma)?;
    check_ordering(sigma, ordering)?;
    let mut mask = sigma.site_mask();
    let mut value: f64 = facets.iter().map(|&i| ctx.system.weights()[i]).sum();
    for &v in ordering {
        value *= ctx.hitting(mask, v, v);
        mask |= 1 << v;
    }
    Ok(value)
}

/// The same quantity by exact differentiation of the dense expansion along
/// `α_σ(v_1), …, α_σ(v_m)`.
pub fn directional_product_symbolic(ctx: &LorentzContext<'_>, sigma: &Face, ordering: &[usize]) -> Result<f64> {
    check_ordering(sigma, ordering)?;
    let mut p = dense_expand(ctx, sigma)?;
    for &v in ordering {
        p = p.directional(&alpha_vector(ctx, sigma, v)?.entries);
    }
    Ok(p.coefficient(&[]))
}

/// Pairwise certificate `λ₂(P_{u,v}) ≤ sqrt(𝕎_u[v→u]·𝕎_v[u→v])`.
#[derive(Clone, Debug, Serialize)]
pub struct HuvCertificate {
    pub u: usize,
    pub v: usize,
    #[serde(skip)]
    pub labels: Vec<(usize, usize)>,
    #[serde(skip)]
    pub hessian: DMatrix<f64>,
    /// `𝕎_u[v → u]`.
    pub hit_vu: f64,
    /// `𝕎_v[u → v]`.
    pub hit_uv: f64,
    pub bound: f64,
    pub lambda2_actual: f64,
    pub one_positive: bool,
    pub hypothesis_ok: bool,
    pub verdict: Verdict,
}

/// `H_{u,v} = A_{u,v} − D_{u,v}·M_{u,v}` on `S_u ∪ S_v`, its eigenvalue
/// check, and the resulting bound on `λ₂(P_{u,v})`.
pub fn huv_certificate(ctx: &LorentzContext<'_>, u: usize, v: usize) -> Result<HuvCertificate> {
    if u == v || u >= ctx.d || v >= ctx.d {
        return Err(Error::Precondition(format!("({u}, {v}) is not a pair of distinct sites")));
    }
    let hypothesis_ok = codim2_hypothesis(ctx)?.holds();
    let root = ctx.system.root();
    let op = bipartite_pair_operator(&root, u, v)?;
    let labels = op.labels().to_vec();
    let a = op.adjacency().clone();
    let hit_vu = ctx.hitting(1 << u, v, u);
    let hit_uv = ctx.hitting(1 << v, u, v);
    let mut h = a.clone();
    for (i, &(site, _)) in labels.iter().enumerate() {
        let deg: f64 = a.row(i).sum();
        h[(i, i)] -= if site == u { hit_vu } else { hit_uv } * deg;
    }
    let one_positive = one_positive_eigenvalue(&h)?;
    let bound = (hit_vu * hit_uv).sqrt();
    let lambda2_actual = lambda2_selfadjoint(&op)?;
    let verdict = if !hypothesis_ok {
        Verdict::HypothesisFailed
    } else if one_positive && lambda2_actual <= bound + EIGEN_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(HuvCertificate {
        u,
        v,
        labels,
        hessian: h,
        hit_vu,
        hit_uv,
        bound,
        lambda2_actual,
        one_positive,
        hypothesis_ok,
        verdict,
    })
}

/// [`huv_certificate`] for every pair `u < v`.
pub fn huv_certificates(ctx: &LorentzContext<'_>) -> Result<Vec<HuvCertificate>> {
    codim2_hypothesis(ctx)?;
    let pairs: Vec<(usize, usize)> = (0..ctx.d)
        .flat_map(|u| (u + 1..ctx.d).map(move |v| (u, v)))
        .collect();
    pairs.into_par_iter().map(|(u, v)| huv_certificate(ctx, u, v)).collect()
}
