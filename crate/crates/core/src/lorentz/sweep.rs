use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{alpha_vector, cone_member, directional_derivative, poly_table, ConeMode, LorentzContext, CONE_MAX_CODIM};
use crate::complex::Face;
use crate::error::{Error, Result};
use crate::spectra::positive_eigen_count;

/// Hessian of `∇_{v_1}⋯∇_{v_{m}} p_σ` for `m = codim(σ) − 2` directions,
/// over the link vertices of σ (returned alongside).
pub fn derivative_hessian(
    ctx: &LorentzContext<'_>,
    sigma: &Face,
    dirs: &[Vec<f64>],
) -> Result<(Vec<(usize, usize)>, DMatrix<f64>)> {
    let k = sigma.codim();
    if k < 2 || dirs.len() != k - 2 {
        return Err(Error::Dimension(format!(
            "{} directions for a Hessian at codimension {k}",
            dirs.len()
        )));
    }
    let facets = ctx.check_face(sigma)?;
    let labels = ctx.link_vertices(sigma, &facets);
    let m = dirs.len();
    let n = ctx.system.num_vertices();
    let mut h = DMatrix::zeros(labels.len(), labels.len());
    for subset in 0u32..1 << m {
        let mut s = vec![0.0; n];
        for (i, dir) in dirs.iter().enumerate() {
            if subset & 1 << i != 0 {
                for (a, b) in s.iter_mut().zip(dir) {
                    *a += b;
                }
            }
        }
        let table = poly_table(ctx, sigma, &s)?;
        let part = second_derivatives(ctx, sigma, &labels, &table);
        if (m - subset.count_ones() as usize) % 2 == 0 {
            h += part;
        } else {
            h -= part;
        }
    }
    Ok((labels, h))
}

/// `∂_x ∂_y p_σ` at the point whose face table is given.
fn second_derivatives(
    ctx: &LorentzContext<'_>,
    sigma: &Face,
    labels: &[(usize, usize)],
    table: &HashMap<Face, f64>,
) -> DMatrix<f64> {
    let mask = sigma.site_mask();
    let value = |x: (usize, usize), y: (usize, usize)| {
        table
            .get(&sigma.with(x.0, x.1).with(y.0, y.1))
            .copied()
            .unwrap_or(0.0)
    };
    let n = labels.len();
    let mut h = DMatrix::zeros(n, n);
    for (i, &x) in labels.iter().enumerate() {
        for (j, &y) in labels.iter().enumerate() {
            if x.0 != y.0 {
                h[(i, j)] = value(x, y);
                h[(i, i)] -= ctx.phi(mask, y.0, x.0) * value(x, y);
            }
        }
    }
    h
}

/// One failed check found by [`lorentzian_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    /// `cone`, `P-strict`, `Q-strict`, `P-closure` or `Q-closure`.
    pub kind: String,
    pub sample: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub face: String,
    pub codim: usize,
    pub samples: usize,
    pub cone_checked: bool,
    pub counterexamples: Vec<Counterexample>,
}

impl SweepReport {
    pub fn clean(&self) -> bool {
        self.counterexamples.is_empty()
    }
}

/// Samples direction tuples from the cone (positive combinations of α vectors)
/// and from its closure (single α vectors), and checks positivity of the full
/// directional derivative and the one-positive-eigenvalue property of the
/// Hessian after `codim − 2` derivatives.
pub fn lorentzian_sweep(
    ctx: &LorentzContext<'_>,
    sigma: &Face,
    num_directions: usize,
    seed: u64,
) -> Result<SweepReport> {
    let k = sigma.codim();
    if k < 2 {
        return Err(Error::CodimOutOfRange { codim: k, d: ctx.d });
    }
    let free = sigma.free_sites();
    let alphas: Vec<Vec<f64>> = free
        .iter()
        .map(|&w| alpha_vector(ctx, sigma, w).map(|a| a.entries))
        .collect::<Result<_>>()?;
    let cone_checked = k <= CONE_MAX_CODIM;
    let found: Vec<Vec<Counterexample>> = (0..num_directions)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut out = Vec::new();
            let strict: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let mut v = vec![0.0; ctx.system.num_vertices()];
                    for a in &alphas {
                        let c: f64 = rng.gen_range(1.0..2.0);
                        for (x, y) in v.iter_mut().zip(a) {
                            *x += c * y;
                        }
                    }
                    v
                })
                .collect();
            if cone_checked {
                for v in &strict {
                    if !cone_member(ctx, sigma, v, ConeMode::Strict)? {
                        out.push(Counterexample { kind: "cone".into(), sample: i, value: 0.0 });
                    }
                }
            }
            let closure: Vec<Vec<f64>> = (0..k).map(|_| alphas[rng.gen_range(0..alphas.len())].clone()).collect();
            for (dirs, strict_mode) in [(&strict, true), (&closure, false)] {
                let p = directional_derivative(ctx, sigma, dirs)?;
                let tag = if strict_mode { "strict" } else { "closure" };
                let p_ok = if strict_mode { p > 0.0 } else { p >= -1e-10 };
                if !p_ok {
                    out.push(Counterexample { kind: format!("P-{tag}"), sample: i, value: p });
                }
                let (_, h) = derivative_hessian(ctx, sigma, &dirs[..k - 2])?;
                let count = positive_eigen_count(&h);
                if count > 1 {
                    out.push(Counterexample { kind: format!("Q-{tag}"), sample: i, value: count as f64 });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        face: ctx.system.face_label(sigma),
        codim: k,
        samples: num_directions,
        cone_checked,
        counterexamples: found.into_iter().flatten().collect(),
    })
}
