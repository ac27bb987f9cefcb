use std::collections::HashMap;

use super::LorentzContext;
use crate::complex::Face;
use crate::error::{Error, Result};

/// Bound on `∏ (1 + |spins on free site|)`, an upper estimate of the number
/// of faces visited by one evaluation.
pub const POLY_MAX_FACES: f64 = 4_000_000.0;

impl LorentzContext<'_> {
    fn poly_gate(&self, sigma: &Face, facets: &[usize]) -> Result<()> {
        let verts = self.link_vertices(sigma, facets);
        let mut estimate = 1.0f64;
        for v in sigma.free_sites() {
            estimate *= 1.0 + verts.iter().filter(|x| x.0 == v).count() as f64;
        }
        if estimate > POLY_MAX_FACES {
            return Err(Error::SizeCap(format!(
                "polynomial evaluation would visit up to {estimate:.0} faces"
            )));
        }
        Ok(())
    }

    /// Memoized recursion. The argument reaching a face depends only on the
    /// face, because the π maps commute.
    fn eval_rec(&self, face: &Face, facets: &[usize], t: &[f64], memo: &mut HashMap<Face, f64>) -> f64 {
        if let Some(&v) = memo.get(face) {
            return v;
        }
        let k = face.codim();
        let value = if k == 0 {
            facets.iter().map(|&i| self.system.weights()[i]).sum()
        } else {
            let mut acc = 0.0;
            for (x, child_facets) in self.children(face, facets) {
                let child = face.with(x.0, x.1);
                let tx = t[self.system.vertex_id(x.0, x.1)];
                let p = match memo.get(&child) {
                    Some(&p) => p,
                    None => {
                        let cv = self.link_vertices(&child, &child_facets);
                        let next = self.pi_step(face, x, t, &cv);
                        self.eval_rec(&child, &child_facets, &next, memo)
                    }
                };
                acc += tx * p;
            }
            acc / k as f64
        };
        memo.insert(face.clone(), value);
        value
    }
}

/// `p_σ(t)` by the recursion `(d−|σ|)·p_σ(t) = Σ_x t_x·p_{σ∪x}(π_{σ+x}(t))`.
pub fn poly_eval(ctx: &LorentzContext<'_>, sigma: &Face, t: &[f64]) -> Result<f64> {
    Ok(poly_table(ctx, sigma, t)?[sigma])
}

/// Every value `p_ρ(π_{σ+(ρ∖σ)}(t))` for faces `ρ ⊇ σ` reached by the recursion.
pub fn poly_table(ctx: &LorentzContext<'_>, sigma: &Face, t: &[f64]) -> Result<HashMap<Face, f64>> {
    ctx.check_vector(t)?;
    let facets = ctx.check_face(sigma)?;
    ctx.poly_gate(sigma, &facets)?;
    let mut memo = HashMap::new();
    ctx.eval_rec(sigma, &facets, t, &mut memo);
    Ok(memo)
}

/// `∇_{v_1}⋯∇_{v_m} p_σ` for `m = codim(σ)` directions, a constant, by
/// polarization: `Σ_{S ⊆ [m]} (−1)^{m−|S|} p_σ(Σ_{i∈S} v_i)`.
pub fn directional_derivative(ctx: &LorentzContext<'_>, sigma: &Face, dirs: &[Vec<f64>]) -> Result<f64> {
    let m = sigma.codim();
    if dirs.len() != m {
        return Err(Error::Dimension(format!("{} directions for a degree-{m} polynomial", dirs.len())));
    }
    polarize(ctx, m, dirs, |s| poly_eval(ctx, sigma, s))
}

/// `Σ_{S ⊆ [m]} (−1)^{m−|S|} f(Σ_{i∈S} v_i)` over the first `m` directions.
pub(crate) fn polarize<T, F>(ctx: &LorentzContext<'_>, m: usize, dirs: &[Vec<f64>], mut f: F) -> Result<T>
where
    T: Default + std::ops::AddAssign + std::ops::Neg<Output = T>,
    F: FnMut(&[f64]) -> Result<T>,
{
    if m > 20 {
        return Err(Error::SizeCap(format!("polarization over {m} directions")));
    }
    let n = ctx.system.num_vertices();
    let mut acc = T::default();
    for subset in 0u32..1 << m {
        let mut s = vec![0.0; n];
        for (i, dir) in dirs.iter().take(m).enumerate() {
            if subset & 1 << i != 0 {
                for (a, b) in s.iter_mut().zip(dir) {
                    *a += b;
                }
            }
        }
        let value = f(&s)?;
        if (m - subset.count_ones() as usize) % 2 == 0 {
            acc += value;
        } else {
            acc += -value;
        }
    }
    Ok(acc)
}
