//! Dense spectral kernels: skeleton walk operators, self-adjoint second
//! eigenvalues, spectral radii of nonnegative matrices, sign counts and the
//! bipartite / d-partite eigenvalue lemmas.

use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::complex::LinkView;
use crate::error::{Error, Result};

/// Simple random walk on a weighted skeleton.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    labels: Vec<(usize, usize)>,
    a: DMatrix<f64>,
    degrees: Vec<f64>,
    pruned: Vec<(usize, usize)>,
}

impl WalkOperator {
    /// Builds `P = D⁻¹A` from a symmetric nonnegative adjacency matrix.
    /// Zero-degree vertices are removed and listed in [`Self::pruned`].
    pub fn from_adjacency(a: DMatrix<f64>, labels: Vec<(usize, usize)>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || labels.len() != n {
            return Err(Error::Dimension(format!(
                "adjacency {}x{} with {} labels",
                a.nrows(),
                a.ncols(),
                labels.len()
            )));
        }
        if a.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidMatrix("adjacency has negative or non-finite entries".into()));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMatrix("adjacency is not symmetric".into()));
                }
            }
        }
        let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
        let keep: Vec<usize> = (0..n).filter(|&i| deg[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(Error::InvalidMatrix("all edges have zero weight".into()));
        }
        let pruned = (0..n).filter(|&i| deg[i] <= 0.0).map(|i| labels[i]).collect();
        let a = a.select_rows(&keep).select_columns(&keep);
        Ok(WalkOperator {
            labels: keep.iter().map(|&i| labels[i]).collect(),
            degrees: keep.iter().map(|&i| deg[i]).collect(),
            a,
            pruned,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Vertex labels as `(site, spin)` pairs.
    pub fn labels(&self) -> &[(usize, usize)] {
        &self.labels
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn pruned(&self) -> &[(usize, usize)] {
        &self.pruned
    }

    /// The row-stochastic matrix `D⁻¹A`.
    pub fn transition(&self) -> DMatrix<f64> {
        let mut p = self.a.clone();
        for (i, &d) in self.degrees.iter().enumerate() {
            p.row_mut(i).scale_mut(1.0 / d);
        }
        p
    }

    /// Stationary distribution, proportional to degrees.
    pub fn stationary(&self) -> Vec<f64> {
        let total: f64 = self.degrees.iter().sum();
        self.degrees.iter().map(|d| d / total).collect()
    }

    /// `D^{-1/2} A D^{-1/2}`, symmetric and similar to `P`.
    pub fn normalized(&self) -> DMatrix<f64> {
        let s: Vec<f64> = self.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        DMatrix::from_fn(self.len(), self.len(), |i, j| s[i] * self.a[(i, j)] * s[j])
    }

    /// Eigenvalues of `P`, sorted descending.
    pub fn spectrum(&self) -> Vec<f64> {
        symmetric_eigenvalues(&self.normalized())
    }
}

/// Local index of each link vertex, in [`LinkView::vertices`] order.
fn vertex_index(link: &LinkView<'_>) -> (Vec<(usize, usize)>, Vec<Vec<Option<usize>>>) {
    let verts = link.vertices();
    let sys = link.system();
    let mut index: Vec<Vec<Option<usize>>> =
        (0..sys.d()).map(|v| vec![None; sys.spin_count(v)]).collect();
    for (i, &(v, s)) in verts.iter().enumerate() {
        index[v][s] = Some(i);
    }
    (verts, index)
}

/// Weighted skeleton of a link: `A(x, y) = P_{ω∼μ_τ}[x, y ∈ ω]`.
pub fn skeleton_operator(link: &LinkView<'_>) -> Result<WalkOperator> {
    if link.codim() < 2 {
        return Err(Error::Precondition(format!(
            "skeleton needs codimension >= 2, got {}",
            link.codim()
        )));
    }
    let (verts, index) = vertex_index(link);
    let residual = link.residual_sites();
    let mut a = DMatrix::zeros(verts.len(), verts.len());
    for (f, w) in link.facets() {
        for (i, &x) in residual.iter().enumerate() {
            let ix = index[x][f[x]].expect("link vertex");
            for &y in &residual[i + 1..] {
                let iy = index[y][f[y]].expect("link vertex");
                a[(ix, iy)] += w;
                a[(iy, ix)] += w;
            }
        }
    }
    WalkOperator::from_adjacency(a, verts)
}

/// Bipartite graph `G_{u,v}` on `S_u ∪ S_v` with pair-marginal weights.
pub fn bipartite_pair_operator(link: &LinkView<'_>, u: usize, v: usize) -> Result<WalkOperator> {
    if u == v {
        return Err(Error::Precondition("pair operator needs distinct sites".into()));
    }
    let residual = link.residual_sites();
    if !residual.contains(&u) || !residual.contains(&v) {
        return Err(Error::Precondition(format!("sites {u}, {v} must both be free in the link")));
    }
    let su = link.spins_of_site(u);
    let sv = link.spins_of_site(v);
    let n = su.len() + sv.len();
    let mut labels: Vec<(usize, usize)> = su.iter().map(|&s| (u, s)).collect();
    labels.extend(sv.iter().map(|&s| (v, s)));
    let mut a = DMatrix::zeros(n, n);
    for (f, w) in link.facets() {
        let i = su.iter().position(|&s| s == f[u]).expect("spin in link");
        let j = su.len() + sv.iter().position(|&s| s == f[v]).expect("spin in link");
        a[(i, j)] += w;
        a[(j, i)] += w;
    }
    WalkOperator::from_adjacency(a, labels)
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Eigenvalues of a general square matrix via a real Schur form with a
/// bounded iteration count.
pub fn general_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<nalgebra::Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension("matrix is not square".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 1000 * m.nrows().max(10))
        .ok_or_else(|| Error::NonConvergence(format!("Schur form of a {0}x{0} matrix", m.nrows())))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn lambda_max_symmetric(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Second-largest eigenvalue of `P`, through its symmetric conjugate.
pub fn lambda2_selfadjoint(op: &WalkOperator) -> Result<f64> {
    if op.len() < 2 {
        return Err(Error::Dimension(format!("operator has {} vertices", op.len())));
    }
    Ok(op.spectrum()[1])
}

/// Spectral radius with a Collatz–Wielandt bracket.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub converged: bool,
    /// `‖Aⁿ‖_F^{1/n}` at n = 2^10, as an independent sanity check.
    pub norm_estimate: f64,
}

pub const RADIUS_TOL: f64 = 1e-10;
pub const RADIUS_MAX_ITER: usize = 100_000;

/// ρ(A) for a nonnegative square matrix.
///
/// The matrix is split into strongly connected blocks; each irreducible block
/// is handled by power iteration on `B + I`, which is primitive, with the
/// bracket `min (Bx)_i/x_i ≤ ρ(B) ≤ max (Bx)_i/x_i`.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<SpectralRadius> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("{}x{} is not square", n, a.ncols())));
    }
    if a.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidMatrix("entries must be finite and nonnegative".into()));
    }
    if n == 0 {
        return Ok(SpectralRadius {
            value: 0.0,
            lower: 0.0,
            upper: 0.0,
            converged: true,
            norm_estimate: 0.0,
        });
    }
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] > 0.0 && i != j {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut out = SpectralRadius {
        value: 0.0,
        lower: 0.0,
        upper: 0.0,
        converged: true,
        norm_estimate: frobenius_power_estimate(a, 10),
    };
    for comp in tarjan_scc(&g) {
        let idx: Vec<usize> = comp.iter().map(|x| x.index()).collect();
        let block = a.select_rows(&idx).select_columns(&idx);
        let (lo, hi, ok) = if idx.len() == 1 {
            (block[(0, 0)], block[(0, 0)], true)
        } else {
            irreducible_bracket(&block)
        };
        out.lower = out.lower.max(lo);
        out.upper = out.upper.max(hi);
        out.converged &= ok;
    }
    out.value = 0.5 * (out.lower + out.upper);
    Ok(out)
}

fn irreducible_bracket(block: &DMatrix<f64>) -> (f64, f64, bool) {
    let m = block.nrows();
    let mut x = nalgebra::DVector::from_element(m, 1.0 / m as f64);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..RADIUS_MAX_ITER {
        let y = block * &x + &x;
        lo = f64::INFINITY;
        hi = 0.0;
        for i in 0..m {
            let r = y[i] / x[i];
            lo = f64::min(lo, r);
            hi = f64::max(hi, r);
        }
        let s = y.sum();
        x = y / s;
        if hi - lo <= RADIUS_TOL * hi.max(1.0) {
            return (lo - 1.0, hi - 1.0, true);
        }
    }
    ((lo - 1.0).max(0.0), hi - 1.0, false)
}

/// `‖A^{2^k}‖_F^{1/2^k}` by repeated squaring with rescaling.
fn frobenius_power_estimate(a: &DMatrix<f64>, k: u32) -> f64 {
    let mut m = a.clone();
    let mut log_scale = 0.0f64;
    let mut power = 1.0f64;
    for _ in 0..k {
        let norm = m.norm();
        if norm == 0.0 {
            return 0.0;
        }
        m /= norm;
        log_scale = 2.0 * (log_scale + norm.ln());
        m = &m * &m;
        power *= 2.0;
    }
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / power).exp()
}

/// `Ā(i, j) = sqrt(A(i, j)·A(j, i))`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] * a[(j, i)]).sqrt())
}

/// Count of eigenvalues above `1e-9·max(1, ‖H‖_F)`.
pub fn positive_eigen_count(h: &DMatrix<f64>) -> usize {
    let tol = 1e-9 * h.norm().max(1.0);
    symmetric_eigenvalues(h).iter().filter(|&&x| x > tol).count()
}

/// True iff the symmetric matrix has at most one positive eigenvalue.
pub fn one_positive_eigenvalue(h: &DMatrix<f64>) -> Result<bool> {
    check_symmetric(h, 1e-12)?;
    Ok(positive_eigen_count(h) <= 1)
}

fn check_symmetric(h: &DMatrix<f64>, tol: f64) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::Dimension("matrix is not square".into()));
    }
    let scale = h.amax().max(1.0);
    for i in 0..h.nrows() {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > tol * scale {
                return Err(Error::InvalidMatrix(format!("not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// The four conditions of the bipartite eigenvalue lemma, evaluated separately.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartiteConditions {
    /// `N − S` has at most one positive eigenvalue.
    pub rank_one_s: bool,
    /// `N − sqrt(s_X s_Y)·I` has at most one positive eigenvalue.
    pub rank_one_mean: bool,
    /// `λ₂(P) ≤ sqrt(s_X s_Y)`.
    pub lambda2_bound: bool,
    /// `λ₂(P − S) ≤ 0`.
    pub shifted_lambda2: bool,
}

impl BipartiteConditions {
    pub fn agree(&self) -> bool {
        let v = [self.rank_one_s, self.rank_one_mean, self.lambda2_bound, self.shifted_lambda2];
        v.iter().all(|&b| b == v[0])
    }
}

/// Evaluates the lemma's conditions for adjacency `a` with parts
/// `X = {i : in_x[i]}` and `Y` its complement. `N = D^{-1/2} A D^{-1/2}`.
pub fn bipartite_equivalences(
    a: &DMatrix<f64>,
    in_x: &[bool],
    s_x: f64,
    s_y: f64,
) -> Result<BipartiteConditions> {
    let n = a.nrows();
    if in_x.len() != n {
        return Err(Error::Dimension("part mask length".into()));
    }
    if s_x < 0.0 || s_y < 0.0 {
        return Err(Error::Precondition("s_X and s_Y must be nonnegative".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] != 0.0 && in_x[i] == in_x[j] {
                return Err(Error::NotBipartite);
            }
        }
    }
    let labels = (0..n).map(|i| (usize::from(!in_x[i]), i)).collect();
    let op = WalkOperator::from_adjacency(a.clone(), labels)?;
    if !op.pruned().is_empty() {
        return Err(Error::InvalidMatrix("isolated vertex".into()));
    }
    let nmat = op.normalized();
    let mean = (s_x * s_y).sqrt();
    let s_diag = DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            0.0
        } else if in_x[i] {
            s_x
        } else {
            s_y
        }
    });
    let minus_s = &nmat - &s_diag;
    let minus_mean = &nmat - DMatrix::<f64>::identity(n, n) * mean;
    let tol = 1e-9 * nmat.norm().max(1.0);
    let spec = op.spectrum();
    let shifted = symmetric_eigenvalues(&minus_s);
    Ok(BipartiteConditions {
        rank_one_s: positive_eigen_count(&minus_s) <= 1,
        rank_one_mean: positive_eigen_count(&minus_mean) <= 1,
        lambda2_bound: spec.get(1).is_none_or(|&l2| l2 <= mean + tol),
        shifted_lambda2: shifted.get(1).is_none_or(|&l2| l2 <= tol),
    })
}

/// Upper bound `λ_max(M)/(k − 1)` on λ₂ of a k-partite skeleton, given
/// `M(u, v) ≥ λ₂(P_{u,v})` for every pair of parts.
pub fn dpartite_bound(m: &DMatrix<f64>) -> Result<f64> {
    let k = m.nrows();
    if k < 2 {
        return Err(Error::Dimension("need at least two parts".into()));
    }
    check_symmetric(m, 1e-12)?;
    for i in 0..k {
        if m[(i, i)] != 0.0 {
            return Err(Error::InvalidMatrix("nonzero diagonal".into()));
        }
    }
    if m.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidMatrix("negative entry".into()));
    }
    Ok(lambda_max_symmetric(m) / (k as f64 - 1.0))
}

/// [`dpartite_bound`] for a link, with `M` indexed by its residual sites.
/// When `check` is set, the premise `M(u,v) ≥ λ₂(P_{u,v}) − 1e-12` is verified.
pub fn dpartite_combine(link: &LinkView<'_>, m: &DMatrix<f64>, check: bool) -> Result<f64> {
    let residual = link.residual_sites();
    if m.nrows() != residual.len() {
        return Err(Error::Dimension(format!(
            "M is {}x{} but the link has {} free sites",
            m.nrows(),
            m.ncols(),
            residual.len()
        )));
    }
    if check {
        for (i, &u) in residual.iter().enumerate() {
            for (j, &v) in residual.iter().enumerate().skip(i + 1) {
                let l2 = lambda2_selfadjoint(&bipartite_pair_operator(link, u, v)?)?;
                if m[(i, j)] < l2 - 1e-12 {
                    return Err(Error::Precondition(format!(
                        "M({u},{v}) = {} is below the pair eigenvalue {l2}",
                        m[(i, j)]
                    )));
                }
            }
        }
    }
    dpartite_bound(m)
}

/// Pairwise matrix `M(u, v) = max(λ₂(P_{u,v}), 0)` over the link's free sites.
pub fn pair_lambda2_matrix(link: &LinkView<'_>) -> Result<DMatrix<f64>> {
    let residual = link.residual_sites();
    let k = residual.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let op = bipartite_pair_operator(link, residual[i], residual[j])?;
            let l2 = if op.len() < 2 { 0.0 } else { lambda2_selfadjoint(&op)?.max(0.0) };
            m[(i, j)] = l2;
            m[(j, i)] = l2;
        }
    }
    Ok(m)
}
