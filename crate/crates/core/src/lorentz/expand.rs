use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use super::LorentzContext;
use crate::complex::Face;
use crate::error::{Error, Result};

pub const EXPAND_MAX_CODIM: usize = 4;
pub const EXPAND_MAX_VARS: usize = 24;

/// Polynomial in global vertex variables. Keys are sorted multisets of
/// variable ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: BTreeMap<Vec<usize>, f64>,
}

impl Poly {
    pub fn constant(c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(Vec::new(), c);
        }
        Poly { terms }
    }

    pub fn coefficient(&self, monomial: &[usize]) -> f64 {
        let mut key = monomial.to_vec();
        key.sort_unstable();
        self.terms.get(&key).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c * m.iter().map(|&i| t[i]).product::<f64>())
            .sum()
    }

    fn add_term(&mut self, mut monomial: Vec<usize>, c: f64) {
        monomial.sort_unstable();
        *self.terms.entry(monomial).or_insert(0.0) += c;
    }

    /// `∂/∂t_var`.
    pub fn partial(&self, var: usize) -> Poly {
        let mut out = Poly::default();
        for (m, &c) in &self.terms {
            let power = m.iter().filter(|&&i| i == var).count();
            if power == 0 {
                continue;
            }
            let mut rest = m.clone();
            let pos = rest.iter().position(|&i| i == var).expect("power > 0");
            rest.remove(pos);
            out.add_term(rest, c * power as f64);
        }
        out
    }

    /// `∇_v = Σ_i v_i ∂/∂t_i`.
    pub fn directional(&self, v: &[f64]) -> Poly {
        let mut out = Poly::default();
        for (m, &c) in &self.terms {
            for (k, &i) in m.iter().enumerate() {
                if v[i] == 0.0 {
                    continue;
                }
                let mut rest = m.clone();
                rest.remove(k);
                out.add_term(rest, c * v[i]);
            }
        }
        out
    }

    pub fn gradient(&self, t: &[f64]) -> Vec<f64> {
        (0..t.len()).map(|i| self.partial(i).eval(t)).collect()
    }

    /// Hessian of a quadratic form over `vars`.
    pub fn quadratic_hessian(&self, vars: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(vars.len(), vars.len(), |a, b| {
            let c = self.coefficient(&[vars[a], vars[b]]);
            if a == b {
                2.0 * c
            } else {
                c
            }
        })
    }

    fn scale(&mut self, c: f64) {
        for v in self.terms.values_mut() {
            *v *= c;
        }
    }
}

/// Exact monomial expansion of `p_σ`, composing each π map symbolically.
pub fn dense_expand(ctx: &LorentzContext<'_>, sigma: &Face) -> Result<Poly> {
    let facets = ctx.check_face(sigma)?;
    let nvars = ctx.link_vertices(sigma, &facets).len();
    if sigma.codim() > EXPAND_MAX_CODIM || nvars > EXPAND_MAX_VARS {
        return Err(Error::SizeCap(format!(
            "dense expansion needs codim <= {EXPAND_MAX_CODIM} and <= {EXPAND_MAX_VARS} variables \
             (got {} and {nvars})",
            sigma.codim()
        )));
    }
    let mut memo = HashMap::new();
    Ok(expand_rec(ctx, sigma, &facets, &mut memo))
}

fn expand_rec(ctx: &LorentzContext<'_>, face: &Face, facets: &[usize], memo: &mut HashMap<Face, Poly>) -> Poly {
    if let Some(p) = memo.get(face) {
        return p.clone();
    }
    let k = face.codim();
    let poly = if k == 0 {
        Poly::constant(facets.iter().map(|&i| ctx.system.weights()[i]).sum())
    } else {
        let mask = face.site_mask();
        let mut acc = Poly::default();
        for (x, child_facets) in ctx.children(face, facets) {
            let child = face.with(x.0, x.1);
            let sub = expand_rec(ctx, &child, &child_facets, memo);
            let xid = ctx.system.vertex_id(x.0, x.1);
            // substitute t_y -> t_y - φ·t_x, then multiply by t_x
            for (m, &c) in &sub.terms {
                let coeffs: Vec<f64> = m
                    .iter()
                    .map(|&y| ctx.phi(mask, ctx.system.vertex(y).0, x.0))
                    .collect();
                for pick in 0u32..1 << m.len() {
                    let mut mono = Vec::with_capacity(m.len() + 1);
                    let mut coef = c;
                    for (j, &y) in m.iter().enumerate() {
                        if pick & 1 << j != 0 {
                            mono.push(xid);
                            coef *= -coeffs[j];
                        } else {
                            mono.push(y);
                        }
                    }
                    if coef != 0.0 {
                        mono.push(xid);
                        acc.add_term(mono, coef);
                    }
                }
            }
        }
        acc.scale(1.0 / k as f64);
        acc
    };
    memo.insert(face.clone(), poly.clone());
    poly
}
