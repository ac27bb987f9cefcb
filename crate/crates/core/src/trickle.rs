//! Certified bounds on link eigenvalues from absorbing walks.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::{enumerate_faces, is_connected, skeleton_components, Face, SpinSystem};
use crate::error::{Error, Result};
use crate::influence::{codim2_spectra, spectral_influence_matrix};
use crate::spectra::{lambda2_selfadjoint, lambda_max_symmetric, skeleton_operator};
use crate::verdict::Verdict;
use crate::walks::WalkGraph;

/// Slack allowed on every eigenvalue inequality.
pub const CERT_TOL: f64 = 1e-9;
/// Entries of `𝓘` at or below this are treated as absent couplings.
pub const SUPPORT_TOL: f64 = 1e-12;
const PERRON_TOL: f64 = 1e-13;
const PERRON_MAX_ITER: usize = 2_000_000;

/// Perron eigenpair of a nonnegative symmetric irreducible matrix.
#[derive(Clone, Debug)]
pub struct PerronPair {
    pub value: f64,
    /// L1-normalized, entrywise positive.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Power iteration on `m + I` from the all-ones vector, stopped once the
/// Collatz–Wielandt ratios `(m x)_u / x_u` agree within `1e-13`.
pub fn perron_vector(m: &DMatrix<f64>) -> Result<PerronPair> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::Dimension("Perron vector of an empty or non-square matrix".into()));
    }
    let mut x = vec![1.0 / n as f64; n];
    for it in 0..PERRON_MAX_ITER {
        let mx: Vec<f64> = (0..n).map(|u| (0..n).map(|v| m[(u, v)] * x[v]).sum()).collect();
        if x.iter().any(|&xi| xi <= 0.0) {
            return Err(Error::NonConvergence("Perron iterate lost positivity".into()));
        }
        let ratios: Vec<f64> = mx.iter().zip(&x).map(|(a, b)| a / b).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= PERRON_TOL {
            return Ok(PerronPair { value: 0.5 * (lo + hi), vector: x, iterations: it });
        }
        let next: Vec<f64> = mx.iter().zip(&x).map(|(a, b)| a + b).collect();
        let norm: f64 = next.iter().sum();
        x = next.into_iter().map(|v| v / norm).collect();
    }
    Err(Error::NonConvergence(format!("Perron iteration did not settle in {PERRON_MAX_ITER} steps")))
}

/// Walk graph built from `𝓘`, with its component data.
#[derive(Clone, Debug)]
pub struct AutoWalk {
    pub walk: WalkGraph,
    /// Connected components of the support graph of `𝓘`.
    pub components: Vec<Vec<usize>>,
    /// `ε_i = 1 − λ_max(𝓘_i)` per component.
    pub epsilons: Vec<f64>,
    pub perron: Vec<Vec<f64>>,
}

impl AutoWalk {
    /// `ε = min_i ε_i = 1 − λ_max(𝓘)`.
    pub fn epsilon(&self) -> f64 {
        self.epsilons.iter().copied().fold(1.0, f64::min)
    }
}

fn support_components(ci: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = ci.nrows();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut i = 0;
        while i < members.len() {
            let u = members[i];
            for v in 0..n {
                if comp[v] == usize::MAX && ci[(u, v)] > SUPPORT_TOL {
                    comp[v] = id;
                    members.push(v);
                }
            }
            i += 1;
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Boundary vertex `b_v` per site, `W(u,v) = 𝓘(u,v)·x_i(v)/x_i(u)` inside
/// each component, `W(v, b_v) = ε_i` and `W(b_v, v) = 1`.
pub fn construct_walk_from_ci(system: &SpinSystem, ci: &DMatrix<f64>) -> Result<AutoWalk> {
    let d = system.d();
    if ci.nrows() != d || ci.ncols() != d {
        return Err(Error::Dimension(format!("𝓘 is {}x{}, expected {d}x{d}", ci.nrows(), ci.ncols())));
    }
    let lmax = lambda_max_symmetric(ci);
    if lmax >= 1.0 - 1e-12 {
        return Err(Error::NoSpectralGap(lmax));
    }
    let components = support_components(ci);
    let mut edges = Vec::new();
    let mut epsilons = Vec::with_capacity(components.len());
    let mut perron = Vec::with_capacity(components.len());
    for members in &components {
        let sub = DMatrix::from_fn(members.len(), members.len(), |a, b| {
            let x = ci[(members[a], members[b])];
            if x > SUPPORT_TOL {
                x
            } else {
                0.0
            }
        });
        let pair = perron_vector(&sub)?;
        let eps = 1.0 - pair.value;
        for (a, &u) in members.iter().enumerate() {
            for (b, &v) in members.iter().enumerate() {
                if sub[(a, b)] > 0.0 {
                    edges.push((u, v, sub[(a, b)] * pair.vector[b] / pair.vector[a]));
                }
            }
            edges.push((u, d + u, eps));
            edges.push((d + u, u, 1.0));
        }
        epsilons.push(eps);
        perron.push(pair.vector);
    }
    let boundary: Vec<String> = system.site_names().iter().map(|s| format!("{s}#b")).collect();
    let walk = WalkGraph::new(system.site_names().to_vec(), boundary, &edges)?;
    let check = walk.validate_absorbing(0);
    if !check.absorbing {
        return Err(Error::InvalidWalk(format!("constructed walk is not absorbing at {:?}", check.unreachable)));
    }
    Ok(AutoWalk { walk, components, epsilons, perron })
}

/// Eigenvalue bounds and the exact value for one link.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    #[serde(skip)]
    pub tau: Face,
    pub face: String,
    pub codim: usize,
    /// `λ_max(M_τ)/(k−1)`.
    pub bound_m: f64,
    /// `max_u E[d(Q)−2]/(k−1)`.
    pub bound_distinct: f64,
    /// `(1−ε)²/((k−1)ε)`, when an ε is supplied.
    pub bound_main: Option<f64>,
    /// `(1−ε)/((k−1)ε)`, the bound the geometric tail estimate yields.
    pub bound_main_corrected: Option<f64>,
    /// Exact `λ₂(P_τ)`.
    pub actual: f64,
    pub connected: bool,
    pub hypothesis_ok: bool,
    pub verdict: Verdict,
}

impl Certificate {
    /// Re-derives the verdict under another tolerance.
    pub fn verdict_with(&self, tol: f64) -> Verdict {
        if !self.connected {
            Verdict::NotApplicable
        } else if !self.hypothesis_ok {
            Verdict::HypothesisFailed
        } else if self.actual <= self.bound_m.min(self.bound_distinct) + tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Codimension-2 faces violating `λ₂(P_σ) ≤ sqrt(W(u,v)·W(v,u))`.
pub fn hypothesis_violations(system: &SpinSystem, walk: &WalkGraph) -> Result<Vec<Face>> {
    Ok(codim2_spectra(system)?
        .into_iter()
        .filter(|(_, (u, v), l2)| *l2 > (walk.w(*u, *v) * walk.w(*v, *u)).sqrt() + CERT_TOL)
        .map(|(f, _, _)| f)
        .collect())
}

/// Certifies one link against the walk. The premise is checked on the
/// codimension-2 faces extending τ.
pub fn certify_link(system: &SpinSystem, walk: &WalkGraph, tau: &Face) -> Result<Certificate> {
    let bad = hypothesis_violations(system, walk)?;
    certify_with(system, walk, tau, &bad, None)
}

fn certify_with(
    system: &SpinSystem,
    walk: &WalkGraph,
    tau: &Face,
    violations: &[Face],
    epsilon: Option<f64>,
) -> Result<Certificate> {
    let k = tau.codim();
    if k < 2 {
        return Err(Error::CodimOutOfRange { codim: k, d: system.d() });
    }
    if walk.n_interior() != system.d() {
        return Err(Error::Dimension("walk interior does not match the sites".into()));
    }
    let link = system.link(tau)?;
    let connected = skeleton_components(&link).len() == 1;
    let op = skeleton_operator(&link)?;
    let actual = lambda2_selfadjoint(&op)?;
    let hm = walk.hitting_matrix(tau.site_mask())?;
    let scale = (k - 1) as f64;
    let bound_m = lambda_max_symmetric(&hm.m) / scale;
    let max_row = (0..hm.sites.len())
        .map(|i| hm.m_prime.row(i).sum())
        .fold(0.0, f64::max);
    let bound_distinct = max_row / scale;
    let hypothesis_ok = !violations.iter().any(|s| tau.is_subface_of(s));
    let mut cert = Certificate {
        tau: tau.clone(),
        face: system.face_label(tau),
        codim: k,
        bound_m,
        bound_distinct,
        bound_main: epsilon.map(|e| (1.0 - e).powi(2) / (scale * e)),
        bound_main_corrected: epsilon.map(|e| (1.0 - e) / (scale * e)),
        actual,
        connected,
        hypothesis_ok,
        verdict: Verdict::Pass,
    };
    cert.verdict = cert.verdict_with(CERT_TOL);
    Ok(cert)
}

/// Certificates for every positive-probability face of codimension ≥ 2,
/// in enumeration order.
pub fn certify_all(system: &SpinSystem, walk: &WalkGraph, epsilon: Option<f64>) -> Result<Vec<Certificate>> {
    let bad = hypothesis_violations(system, walk)?;
    let mut faces = Vec::new();
    for k in 2..=system.d() {
        faces.extend(enumerate_faces(system, k)?);
    }
    faces
        .par_iter()
        .map(|tau| certify_with(system, walk, tau, &bad, epsilon))
        .collect()
}

/// A face where the stated bound `(1−ε)²/((k−1)ε)` fails.
#[derive(Clone, Debug, Serialize)]
pub struct MainViolation {
    pub face: String,
    pub codim: usize,
    pub actual: f64,
    pub bound: f64,
    pub corrected_bound: f64,
}

/// Outcome of certifying a system with the walk built from `𝓘`.
#[derive(Clone, Debug, Serialize)]
pub struct MainTheoremReport {
    pub lambda_max_ci: f64,
    pub epsilon: f64,
    pub components: Vec<Vec<usize>>,
    pub epsilons: Vec<f64>,
    /// `max_τ (k−1)·λ₂(P_τ)`.
    pub eta: f64,
    /// `(1−ε)²/ε`.
    pub eta_bound: f64,
    /// `(1−ε)/ε`.
    pub eta_bound_corrected: f64,
    /// Every face satisfies `λ₂(P_τ) ≤ (1−ε)²/((k−1)ε) + 1e-9`.
    pub holds_stated: bool,
    /// Every face satisfies `λ₂(P_τ) ≤ (1−ε)/((k−1)ε) + 1e-9`.
    pub holds_corrected: bool,
    pub main_violations: Vec<MainViolation>,
    pub certificates_pass: bool,
    pub certificates: Vec<Certificate>,
    #[serde(skip)]
    pub walk: WalkGraph,
}

/// Builds the walk from `𝓘`, certifies every link and checks the
/// ε-dependent bounds.
pub fn main_theorem_report(system: &SpinSystem) -> Result<MainTheoremReport> {
    let conn = is_connected(system);
    if !conn.connected {
        return Err(Error::Disconnected(format!(
            "link of {} is disconnected",
            conn.witness.map(|f| system.face_label(&f)).unwrap_or_default()
        )));
    }
    let ci = spectral_influence_matrix(system)?;
    let lambda_max_ci = lambda_max_symmetric(&ci);
    let auto = construct_walk_from_ci(system, &ci)?;
    // the Perron values match λ_max(𝓘) and are exact on singleton components
    let epsilon = auto.epsilon();
    let certificates = certify_all(system, &auto.walk, Some(epsilon))?;
    let mut main_violations = Vec::new();
    let mut eta: f64 = 0.0;
    let mut holds_corrected = true;
    for c in &certificates {
        eta = eta.max(c.actual * (c.codim - 1) as f64);
        let bound = c.bound_main.expect("epsilon supplied");
        let corrected = c.bound_main_corrected.expect("epsilon supplied");
        if c.actual > corrected + CERT_TOL {
            holds_corrected = false;
        }
        if c.actual > bound + CERT_TOL {
            main_violations.push(MainViolation {
                face: c.face.clone(),
                codim: c.codim,
                actual: c.actual,
                bound,
                corrected_bound: corrected,
            });
        }
    }
    Ok(MainTheoremReport {
        lambda_max_ci,
        epsilon,
        components: auto.components.clone(),
        epsilons: auto.epsilons.clone(),
        eta,
        eta_bound: (1.0 - epsilon).powi(2) / epsilon,
        eta_bound_corrected: (1.0 - epsilon) / epsilon,
        holds_stated: main_violations.is_empty(),
        holds_corrected,
        main_violations,
        certificates_pass: certificates.iter().all(|c| c.verdict.is_pass()),
        certificates,
        walk: auto.walk,
    })
}

/// One face checked by [`oppenheim_check`].
#[derive(Clone, Debug, Serialize)]
pub struct OppenheimFace {
    pub face: String,
    pub codim: usize,
    pub actual: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OppenheimReport {
    pub epsilon: f64,
    /// Every codimension-2 link has `λ₂ ≤ (1−ε)/d`.
    pub hypothesis_ok: bool,
    pub faces: Vec<OppenheimFace>,
    pub holds: bool,
    pub verdict: Verdict,
}

/// Checks `λ₂(P_σ) ≤ (1−ε)/(d−(k−2)(1−ε))` on every face of codimension
/// `k ≥ 2`, after verifying the codimension-2 premise `λ₂ ≤ (1−ε)/d`.
pub fn oppenheim_check(system: &SpinSystem, epsilon: f64) -> Result<OppenheimReport> {
    let d = system.d() as f64;
    let hypothesis_ok = codim2_spectra(system)?
        .iter()
        .all(|(_, _, l2)| *l2 <= (1.0 - epsilon) / d + CERT_TOL);
    let mut faces = Vec::new();
    for k in 2..=system.d() {
        faces.extend(enumerate_faces(system, k)?);
    }
    let checked: Vec<OppenheimFace> = faces
        .par_iter()
        .map(|tau| {
            let k = tau.codim();
            let actual = lambda2_selfadjoint(&skeleton_operator(&system.link(tau)?)?)?;
            Ok(OppenheimFace {
                face: system.face_label(tau),
                codim: k,
                actual,
                bound: (1.0 - epsilon) / (d - (k as f64 - 2.0) * (1.0 - epsilon)),
            })
        })
        .collect::<Result<_>>()?;
    let holds = checked.iter().all(|f| f.actual <= f.bound + CERT_TOL);
    let verdict = match (hypothesis_ok, holds) {
        (false, _) => Verdict::HypothesisFailed,
        (true, true) => Verdict::Pass,
        (true, false) => Verdict::Fail,
    };
    Ok(OppenheimReport { epsilon, hypothesis_ok, faces: checked, holds, verdict })
}

/// Largest ε for which the codimension-2 premise of [`oppenheim_check`] holds.
pub fn oppenheim_epsilon(system: &SpinSystem) -> Result<f64> {
    let worst = codim2_spectra(system)?
        .iter()
        .map(|(_, _, l2)| l2.max(0.0))
        .fold(0.0, f64::max);
    Ok(1.0 - system.d() as f64 * worst)
}

/// A codimension-2 face breaking the top-link property.
#[derive(Clone, Debug, Serialize)]
pub struct TopLinkViolation {
    pub face: String,
    pub consecutive: bool,
    pub lambda2: f64,
    pub required: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathComplexReport {
    pub ordering: Vec<usize>,
    pub top_link_ok: bool,
    pub top_link_violations: Vec<TopLinkViolation>,
    /// `Σ_j 𝕎_i[j → i]` per site `i`, the sums of the `i`-th column of `M′_∅`.
    pub incoming_sums: Vec<f64>,
    pub sums_ok: bool,
    pub max_actual: f64,
    pub all_at_most_half: bool,
    pub certificates: Vec<Certificate>,
}

/// Path walk over `ordering` with every interior index equal to its site.
pub fn path_walk(system: &SpinSystem, ordering: &[usize]) -> Result<WalkGraph> {
    WalkGraph::path_over(system.site_names().to_vec(), ordering)
}

/// Checks the top-link property along `ordering`, the incoming hitting sums
/// `(d−1)/2`, and certifies `λ₂(P_τ) ≤ 1/2` on every face.
pub fn path_complex_certify(system: &SpinSystem, ordering: &[usize]) -> Result<PathComplexReport> {
    let d = system.d();
    let walk = path_walk(system, ordering)?;
    let mut pos = vec![0usize; d];
    for (i, &v) in ordering.iter().enumerate() {
        pos[v] = i;
    }
    let mut top_link_violations = Vec::new();
    for (face, (u, v), l2) in codim2_spectra(system)? {
        let consecutive = pos[u].abs_diff(pos[v]) == 1;
        let required = if consecutive { 0.5 } else { 0.0 };
        if l2 > required + CERT_TOL {
            top_link_violations.push(TopLinkViolation {
                face: system.face_label(&face),
                consecutive,
                lambda2: l2,
                required,
            });
        }
    }
    let hm = walk.hitting_matrix(0)?;
    let incoming_sums: Vec<f64> = (0..d).map(|j| hm.m_prime.column(j).sum()).collect();
    let target = (d as f64 - 1.0) / 2.0;
    let sums_ok = incoming_sums.iter().all(|s| (s - target).abs() <= 1e-10);
    let certificates = certify_all(system, &walk, None)?;
    let max_actual = certificates.iter().map(|c| c.actual).fold(f64::NEG_INFINITY, f64::max);
    Ok(PathComplexReport {
        ordering: ordering.to_vec(),
        top_link_ok: top_link_violations.is_empty(),
        top_link_violations,
        incoming_sums,
        sums_ok,
        max_actual,
        all_at_most_half: certificates.iter().all(|c| c.actual <= 0.5 + CERT_TOL),
        certificates,
    })
}
