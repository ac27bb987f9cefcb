use std::collections::BTreeSet;

use super::{Face, LinkView, SpinSystem};
use crate::error::{Error, Result};

/// All positive-probability faces of the given codimension.
///
/// Ordered by the assigned site set (lexicographic), then by spins.
pub fn enumerate_faces(system: &SpinSystem, codim: usize) -> Result<Vec<Face>> {
    let d = system.d();
    if codim > d {
        return Err(Error::CodimOutOfRange { codim, d });
    }
    let mut out = Vec::new();
    for sites in combinations(d, d - codim) {
        let projections: BTreeSet<Vec<usize>> = system
            .facets()
            .iter()
            .map(|f| sites.iter().map(|&v| f[v]).collect())
            .collect();
        for spins in projections {
            let pairs: Vec<(usize, usize)> = sites.iter().copied().zip(spins).collect();
            out.push(Face::from_pairs(d, &pairs));
        }
    }
    Ok(out)
}

/// Positive-probability faces extending `base` with the given codimension.
pub fn faces_extending(system: &SpinSystem, base: &Face, codim: usize) -> Result<Vec<Face>> {
    Ok(enumerate_faces(system, codim)?
        .into_iter()
        .filter(|f| base.is_subface_of(f))
        .collect())
}

/// k-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Result of the connectivity check over all links of codimension ≥ 2.
#[derive(Clone, Debug)]
pub struct Connectivity {
    pub connected: bool,
    /// First face (in enumeration order) whose skeleton is disconnected.
    pub witness: Option<Face>,
    /// Connected components of the witness skeleton, as `(site, spin)` lists.
    pub components: Vec<Vec<(usize, usize)>>,
}

/// Connected components of the weighted skeleton of a link.
pub fn skeleton_components(link: &LinkView<'_>) -> Vec<Vec<(usize, usize)>> {
    let verts = link.vertices();
    let sys = link.system();
    let index = |v: usize, s: usize| verts.iter().position(|&x| x == (v, s)).expect("vertex");
    let mut parent: Vec<usize> = (0..verts.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let residual = link.residual_sites();
    if residual.len() >= 2 {
        for &fi in link.facet_indices() {
            let f = &sys.facets()[fi];
            let first = index(residual[0], f[residual[0]]);
            for &v in &residual[1..] {
                let a = find(&mut parent, first);
                let b = find(&mut parent, index(v, f[v]));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for (i, &x) in verts.iter().enumerate() {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(x),
            None => groups.push((r, vec![x])),
        }
    }
    groups.into_iter().map(|g| g.1).collect()
}

/// True iff every positive-probability link of codimension ≥ 2 has a
/// connected skeleton.
pub fn is_connected(system: &SpinSystem) -> Connectivity {
    for codim in 2..=system.d() {
        for face in enumerate_faces(system, codim).expect("codim in range") {
            let link = system.link(&face).expect("enumerated faces have positive mass");
            let comps = skeleton_components(&link);
            if comps.len() > 1 {
                return Connectivity {
                    connected: false,
                    witness: Some(face),
                    components: comps,
                };
            }
        }
    }
    Connectivity {
        connected: true,
        witness: None,
        components: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::random_system;

    fn names(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn uniform_product(d: usize, q: usize) -> SpinSystem {
        let sites = (0..d).map(|v| format!("s{v}")).collect();
        let spins = (0..d).map(|_| (0..q).map(|s| format!("{s}")).collect()).collect();
        let mut facets = Vec::new();
        let total = q.pow(d as u32);
        for idx in 0..total {
            let mut a = Vec::with_capacity(d);
            let mut r = idx;
            for _ in 0..d {
                a.push(r % q);
                r /= q;
            }
            facets.push((a, 1.0));
        }
        SpinSystem::new(sites, spins, facets).unwrap()
    }

    #[test]
    fn extremes_of_codimension() {
        let sys = random_system(3, 2, 0.9, 4).unwrap();
        let facets = enumerate_faces(&sys, 0).unwrap();
        assert_eq!(facets.len(), sys.num_facets());
        let top = enumerate_faces(&sys, 3).unwrap();
        assert_eq!(top, vec![Face::empty(3)]);
        assert!(enumerate_faces(&sys, 4).is_err());
    }

    #[test]
    fn counts_match_bruteforce() {
        let sys = random_system(3, 3, 0.6, 21).unwrap();
        // Oracle: every subset of sites × every spin tuple, kept if some facet extends it.
        let mut per_codim = [0usize; 4];
        for mask in 0u32..8 {
            let sites: Vec<usize> = (0..3).filter(|v| mask & (1 << v) != 0).collect();
            let mut tuples = vec![vec![]];
            for &v in &sites {
                let mut next = Vec::new();
                for t in &tuples {
                    for s in 0..sys.spin_count(v) {
                        let mut t2: Vec<(usize, usize)> = t.clone();
                        t2.push((v, s));
                        next.push(t2);
                    }
                }
                tuples = next;
            }
            for t in tuples {
                let face = Face::from_pairs(3, &t);
                if sys.facets().iter().any(|f| face.is_contained_in(f)) {
                    per_codim[3 - sites.len()] += 1;
                }
            }
        }
        let mut total = 0;
        for (codim, &count) in per_codim.iter().enumerate() {
            let faces = enumerate_faces(&sys, codim).unwrap();
            assert_eq!(faces.len(), count, "codim {codim}");
            total += faces.len();
        }
        assert_eq!(total, per_codim.iter().sum::<usize>());
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let sys = uniform_product(3, 2);
        let faces = enumerate_faces(&sys, 1).unwrap();
        // assigned sites first, then their spins
        let keys: Vec<(Vec<usize>, Vec<usize>)> = faces
            .iter()
            .map(|f| (f.sites(), f.pairs().iter().map(|p| p.1).collect()))
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(faces.len(), 12);
    }

    #[test]
    fn product_is_connected() {
        assert!(is_connected(&uniform_product(3, 3)).connected);
    }

    #[test]
    fn disjoint_support_is_disconnected_at_root() {
        let sys = SpinSystem::new(
            names(&["u", "v", "w"]),
            vec![names(&["a", "b"]), names(&["a", "b"]), names(&["a", "b"])],
            vec![(vec![0, 0, 0], 1.0), (vec![1, 1, 1], 1.0)],
        )
        .unwrap();
        let c = is_connected(&sys);
        assert!(!c.connected);
        assert_eq!(c.witness, Some(Face::empty(3)));
        assert_eq!(c.components.len(), 2);
    }

    #[test]
    fn sparse_systems_match_bfs_oracle() {
        for seed in 0..30u64 {
            // density low enough that some systems are disconnected
            let sys = match random_system_unchecked(3, 3, 0.35, seed) {
                Some(s) => s,
                None => continue,
            };
            let mut oracle = true;
            for codim in 2..=3 {
                for face in enumerate_faces(&sys, codim).unwrap() {
                    if !bfs_connected(&sys, &face) {
                        oracle = false;
                    }
                }
            }
            assert_eq!(is_connected(&sys).connected, oracle, "seed {seed}");
        }
    }

    fn random_system_unchecked(d: usize, q: usize, density: f64, seed: u64) -> Option<SpinSystem> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let sites = (0..d).map(|v| format!("s{v}")).collect();
        let spins = (0..d).map(|_| (0..q).map(|s| format!("{s}")).collect()).collect();
        let mut facets = Vec::new();
        for idx in 0..q.pow(d as u32) {
            if rng.gen::<f64>() < density {
                let mut a = Vec::new();
                let mut r = idx;
                for _ in 0..d {
                    a.push(r % q);
                    r /= q;
                }
                facets.push((a, 1.0 - rng.gen::<f64>()));
            }
        }
        SpinSystem::new(sites, spins, facets).ok()
    }

    /// Plain BFS over the skeleton of one link, built from pair marginals.
    fn bfs_connected(sys: &SpinSystem, face: &Face) -> bool {
        let link = sys.link(face).unwrap();
        let verts = link.vertices();
        let mut seen = vec![false; verts.len()];
        let mut queue = vec![0];
        seen[0] = true;
        while let Some(i) = queue.pop() {
            for j in 0..verts.len() {
                if !seen[j] && verts[i].0 != verts[j].0 && link.pair_marginal(verts[i], verts[j]) > 0.0 {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}
