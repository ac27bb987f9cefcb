//! Pairwise influence matrices: the Dobrushin matrix `I`, the spectral
//! influence matrix `𝓘`, the correlation matrix `Ψ` and the block-matrix
//! eigenvalue bound used to compare them.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::complex::{enumerate_faces, is_connected, Face, LinkView, SpinSystem};
use crate::error::{Error, Result};
use crate::spectra::{
    general_eigenvalues,
    lambda2_selfadjoint, lambda_max_symmetric, skeleton_operator, spectral_radius, symmetrize,
};

/// `I(u, v) = I_{v→u}`: the largest change in u's conditional marginal
/// caused by changing only the spin at v.
///
/// Conditionings of zero probability are skipped; a pair without two valid
/// conditionings gets influence 0.
pub fn dobrushin_matrix(system: &SpinSystem) -> DMatrix<f64> {
    let d = system.d();
    let entries: Vec<(usize, usize, f64)> = (0..d)
        .flat_map(|u| (0..d).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(u, v)| (u, v, influence_of(system, v, u)))
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for (u, v, x) in entries {
        m[(u, v)] = x;
    }
    m
}

/// `I_{v→u}` by exhaustive maximization over contexts on `V ∖ {u, v}`.
pub fn influence_of(system: &SpinSystem, v: usize, u: usize) -> f64 {
    let qu = system.spin_count(u);
    // context -> (spin of v -> unnormalized conditional of u)
    let mut groups: HashMap<Vec<usize>, BTreeMap<usize, Vec<f64>>> = HashMap::new();
    for (f, &w) in system.facets().iter().zip(system.weights()) {
        let mut key = f.clone();
        key[u] = usize::MAX;
        key[v] = usize::MAX;
        let dist = groups
            .entry(key)
            .or_default()
            .entry(f[v])
            .or_insert_with(|| vec![0.0; qu]);
        dist[f[u]] += w;
    }
    let mut best = 0.0f64;
    for by_spin in groups.values() {
        let conds: Vec<Vec<f64>> = by_spin
            .values()
            .map(|raw| {
                let t: f64 = raw.iter().sum();
                raw.iter().map(|x| x / t).collect()
            })
            .collect();
        for i in 0..conds.len() {
            for j in i + 1..conds.len() {
                best = best.max(tv(&conds[i], &conds[j]));
            }
        }
    }
    best.min(1.0)
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// λ₂ of one codimension-2 link, with the two-vertex convention (value 0).
pub fn codim2_lambda2(link: &LinkView<'_>) -> Result<f64> {
    let op = skeleton_operator(link)?;
    if op.len() <= 2 {
        return Ok(0.0);
    }
    lambda2_selfadjoint(&op)
}

/// λ₂(P_τ) for every positive-probability face τ of codimension 2, in
/// enumeration order, with the free pair `(u, v)`, `u < v`.
pub fn codim2_spectra(system: &SpinSystem) -> Result<Vec<(Face, (usize, usize), f64)>> {
    let faces = enumerate_faces(system, 2)?;
    faces
        .into_par_iter()
        .map(|tau| {
            let free = tau.free_sites();
            let l2 = codim2_lambda2(&system.link(&tau)?)?;
            Ok((tau, (free[0], free[1]), l2))
        })
        .collect()
}

/// `𝓘(u, v) = max λ₂(P_τ)` over codimension-2 faces missing exactly u and v,
/// clamped below at 0.
pub fn spectral_influence_matrix(system: &SpinSystem) -> Result<DMatrix<f64>> {
    let d = system.d();
    let mut m = DMatrix::zeros(d, d);
    if d < 2 {
        return Ok(m);
    }
    for (_, (u, v), l2) in codim2_spectra(system)? {
        let x = l2.max(0.0);
        if x > m[(u, v)] {
            m[(u, v)] = x;
            m[(v, u)] = x;
        }
    }
    Ok(m)
}

/// Correlation matrix over the link's vertices.
#[derive(Clone, Debug)]
pub struct PsiMatrix {
    pub labels: Vec<(usize, usize)>,
    pub psi: DMatrix<f64>,
    pub eta: f64,
}

/// Imaginary parts of the top of Ψ's spectrum must be below this.
pub const PSI_IMAG_TOL: f64 = 1e-8;

/// `Ψ(x, y) = P[y | x] − P[y]` for vertices on distinct sites, 0 otherwise;
/// `η = λ_max(Ψ)`.
pub fn psi_matrix(link: &LinkView<'_>) -> Result<PsiMatrix> {
    let labels = link.vertices();
    let n = labels.len();
    let marg: Vec<f64> = labels.iter().map(|&(v, s)| link.marginal(v, s)).collect();
    let mut joint = DMatrix::<f64>::zeros(n, n);
    let pos: HashMap<(usize, usize), usize> =
        labels.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let residual = link.residual_sites();
    for (f, w) in link.facets() {
        for (a, &x) in residual.iter().enumerate() {
            let i = pos[&(x, f[x])];
            for &y in &residual[a + 1..] {
                let j = pos[&(y, f[y])];
                joint[(i, j)] += w;
                joint[(j, i)] += w;
            }
        }
    }
    let psi = DMatrix::from_fn(n, n, |i, j| {
        if labels[i].0 == labels[j].0 {
            0.0
        } else {
            joint[(i, j)] / marg[i] - marg[j]
        }
    });
    let eta = if n == 0 {
        0.0
    } else {
        let ev = general_eigenvalues(&psi)?;
        let top = ev
            .iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .expect("nonempty spectrum");
        if top.im.abs() > PSI_IMAG_TOL {
            return Err(Error::InvalidMatrix(format!(
                "top eigenvalue of Ψ has imaginary part {}",
                top.im
            )));
        }
        top.re
    };
    Ok(PsiMatrix { labels, psi, eta })
}

/// `(1/2)·sqrt(max_{i,j} Σ_s |a_is − a_js| · max_{i,j} Σ_s |b_is − b_js|)`
/// for `P = [[0, A], [B, 0]]` with constant row sums `a`.
pub fn appendix_bipartite_bound(a: &DMatrix<f64>, b: &DMatrix<f64>, row_sum: f64) -> Result<f64> {
    if a.ncols() != b.nrows() || a.nrows() != b.ncols() {
        return Err(Error::Dimension(format!(
            "A is {}x{}, B is {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    for (name, m) in [("A", a), ("B", b)] {
        for i in 0..m.nrows() {
            let s = m.row(i).sum();
            if (s - row_sum).abs() > 1e-10 {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} of {name} sums to {s}, expected {row_sum}"
                )));
            }
        }
    }
    Ok(0.5 * (max_row_l1_gap(a) * max_row_l1_gap(b)).sqrt())
}

fn max_row_l1_gap(m: &DMatrix<f64>) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.nrows() {
        for j in i + 1..m.nrows() {
            best = best.max((m.row(i) - m.row(j)).abs().sum());
        }
    }
    best
}

/// Both influence matrices and their leading eigenvalues.
#[derive(Clone, Debug)]
pub struct InfluenceBundle {
    pub i: DMatrix<f64>,
    pub ci: DMatrix<f64>,
    pub rho_i: f64,
    pub lambda_max_ci: f64,
}

pub fn influence_bundle(system: &SpinSystem) -> Result<InfluenceBundle> {
    let i = dobrushin_matrix(system);
    let ci = spectral_influence_matrix(system)?;
    Ok(InfluenceBundle {
        rho_i: spectral_radius(&i)?.value,
        lambda_max_ci: lambda_max_symmetric(&ci),
        i,
        ci,
    })
}

/// Comparison of the two influence matrices.
#[derive(Clone, Debug, Serialize)]
pub struct InfluenceComparison {
    pub lambda_max_ci: f64,
    pub rho_ci: f64,
    pub rho_i: f64,
    /// `λ_max(𝓘) = ρ(𝓘)` within 1e-9.
    pub perron_equal: bool,
    /// `ρ(𝓘) ≤ ρ(I) + 1e-9`.
    pub dominated: bool,
    /// `𝓘 ≤ Ī` entrywise within 1e-9.
    pub entrywise: bool,
}

impl InfluenceComparison {
    pub fn holds(&self) -> bool {
        self.perron_equal && self.dominated && self.entrywise
    }
}

pub fn verify_i_vs_ci(system: &SpinSystem) -> Result<InfluenceComparison> {
    let conn = is_connected(system);
    if !conn.connected {
        let witness = conn.witness.map(|f| system.face_label(&f)).unwrap_or_default();
        return Err(Error::Disconnected(format!("link {witness} has a disconnected skeleton")));
    }
    let b = influence_bundle(system)?;
    Ok(compare(&b))
}

pub fn compare(b: &InfluenceBundle) -> InfluenceComparison {
    let rho_ci = spectral_radius(&b.ci).map(|r| r.value).unwrap_or(f64::NAN);
    let ibar = symmetrize(&b.i);
    let entrywise = b.ci.iter().zip(ibar.iter()).all(|(c, i)| *c <= i + 1e-9);
    InfluenceComparison {
        lambda_max_ci: b.lambda_max_ci,
        rho_ci,
        rho_i: b.rho_i,
        perron_equal: (b.lambda_max_ci - rho_ci).abs() <= 1e-9,
        dominated: rho_ci <= b.rho_i + 1e-9,
        entrywise,
    }
}
