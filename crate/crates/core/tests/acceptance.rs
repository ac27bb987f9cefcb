//! Acceptance harness: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use spectral_trickle::complex::{
    enumerate_faces, is_connected, path_system, perturbed_product_system, quarantine_system, random_system, Graph,
};
use spectral_trickle::glauber::{exact_marginals, run_chain, second_eigenvalue, transition_matrix};
use spectral_trickle::influence::{
    appendix_bipartite_bound, dobrushin_matrix, influence_bundle, spectral_influence_matrix, verify_i_vs_ci,
};
use spectral_trickle::lorentz::{codim2_hessian, commutativity_sweep, huv_certificates, LorentzContext};
use spectral_trickle::spectra::{
    general_eigenvalues, lambda_max_symmetric, one_positive_eigenvalue, spectral_radius, symmetrize,
};
use spectral_trickle::trickle::{
    certify_all, construct_walk_from_ci, main_theorem_report, oppenheim_check, oppenheim_epsilon, path_complex_certify,
};
use spectral_trickle::walks::random_absorbing_graph;
use spectral_trickle::{SpinSystem, WalkGraph};

const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Corpus for criteria 1 to 4: sparse random systems alternate with
/// perturbed product measures, d ∈ {3,4,5} and 2 to 4 spins.
fn corpus() -> Vec<(String, SpinSystem)> {
    (0..100u64)
        .into_par_iter()
        .map(|i| {
            let d = 3 + (i % 3) as usize;
            let spins = 2 + ((i / 3) % 3) as usize;
            if i % 2 == 0 {
                let density = [1.0, 0.8, 0.6][((i / 6) % 3) as usize];
                let sys = random_system(d, spins, density, i)
                    .or_else(|_| random_system(d, spins, 1.0, i))
                    .expect("dense random systems are connected");
                (format!("random(d={d},q={spins},p={density},seed={i})"), sys)
            } else {
                let strength = 0.5 + 0.45 * ((i * 37) % 10) as f64 / 9.0;
                let sys = perturbed_product_system(d, spins, strength, i).expect("product generator");
                (format!("product(d={d},q={spins},s={strength:.2},seed={i})"), sys)
            }
        })
        .collect()
}

fn auto_walk(sys: &SpinSystem) -> Option<(WalkGraph, f64)> {
    let ci = spectral_influence_matrix(sys).ok()?;
    let auto = construct_walk_from_ci(sys, &ci).ok()?;
    let eps = auto.epsilon();
    Some((auto.walk, eps))
}

fn criterion_1(corpus: &[(String, SpinSystem)]) -> Outcome {
    let start = Instant::now();
    let results: Vec<Option<String>> = corpus
        .par_iter()
        .map(|(name, sys)| {
            let c = match verify_i_vs_ci(sys) {
                Ok(c) => c,
                Err(e) => return Some(format!("{name}: {e}")),
            };
            let ok = c.lambda_max_ci <= c.rho_i + TOL && (c.lambda_max_ci - c.rho_ci).abs() <= TOL;
            (!ok).then(|| format!("{name}: λmax={} ρ(𝓘)={} ρ(I)={}", c.lambda_max_ci, c.rho_ci, c.rho_i))
        })
        .collect();
    let bad: Vec<&String> = results.iter().flatten().collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = bad.is_empty() && secs < 300.0;
    outcome(
        pass,
        format!("{}/{} systems, {secs:.1}s{}", corpus.len() - bad.len(), corpus.len(), first(&bad)),
    )
}

fn first(bad: &[&String]) -> String {
    bad.first().map(|b| format!("; first failure {b}")).unwrap_or_default()
}

fn criterion_2(corpus: &[(String, SpinSystem)]) -> Outcome {
    struct Row {
        faces: usize,
        violations: usize,
        corrected: bool,
        worst: Option<(f64, String)>,
    }
    let results: Vec<Option<Row>> = corpus
        .par_iter()
        .map(|(name, sys)| {
            let b = influence_bundle(sys).ok()?;
            if 1.0 - b.lambda_max_ci <= 0.05 {
                return None;
            }
            let r = main_theorem_report(sys).ok()?;
            let worst = r
                .main_violations
                .iter()
                .max_by(|a, b| (a.actual - a.bound).total_cmp(&(b.actual - b.bound)))
                .map(|v| {
                    (
                        v.actual - v.bound,
                        format!(
                            "{name} {} (k={}, ε={:.4}): λ₂ {:.4} > {:.4}, corrected bound {:.4}",
                            v.face, v.codim, r.epsilon, v.actual, v.bound, v.corrected_bound
                        ),
                    )
                });
            Some(Row {
                faces: r.certificates.len(),
                violations: r.main_violations.len(),
                corrected: r.holds_corrected,
                worst,
            })
        })
        .collect();
    let eligible: Vec<Row> = results.into_iter().flatten().collect();
    let faces: usize = eligible.iter().map(|e| e.faces).sum();
    let violating: Vec<&Row> = eligible.iter().filter(|e| e.violations > 0).collect();
    let bad_faces: usize = violating.iter().map(|e| e.violations).sum();
    let corrected = eligible.iter().filter(|e| e.corrected).count();
    let worst = violating
        .iter()
        .filter_map(|e| e.worst.as_ref())
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|w| format!("; worst {}", w.1))
        .unwrap_or_default();
    outcome(
        !eligible.is_empty() && violating.is_empty(),
        format!(
            "{} systems with ε > 0.05, {faces} faces, {bad_faces} faces in {} systems above (1−ε)²/((k−1)ε); (1−ε)/((k−1)ε) holds in {corrected}/{}{worst}",
            eligible.len(),
            violating.len(),
            eligible.len()
        ),
    )
}

fn criterion_3(corpus: &[(String, SpinSystem)]) -> Outcome {
    let results: Vec<Option<Result<usize, String>>> = corpus
        .par_iter()
        .map(|(name, sys)| {
            let (walk, _) = auto_walk(sys)?;
            let certs = match certify_all(sys, &walk, None) {
                Ok(c) => c,
                Err(e) => return Some(Err(format!("{name}: {e}"))),
            };
            for c in &certs {
                if !c.hypothesis_ok || !c.verdict.is_pass() {
                    return Some(Err(format!("{name} {}: {:?}", c.face, c.verdict)));
                }
                if c.actual > c.bound_m + TOL || c.bound_m > c.bound_distinct + TOL || c.bound_distinct > 1.0 + TOL {
                    return Some(Err(format!(
                        "{name} {}: actual {} bound_M {} distinct {}",
                        c.face, c.actual, c.bound_m, c.bound_distinct
                    )));
                }
            }
            Some(Ok(certs.len()))
        })
        .collect();
    let with_walk: Vec<_> = results.iter().flatten().collect();
    let faces: usize = with_walk.iter().filter_map(|r| r.as_ref().ok()).sum();
    let bad: Vec<&String> = with_walk.iter().filter_map(|r| r.as_ref().err()).collect();
    outcome(
        !with_walk.is_empty() && bad.is_empty(),
        format!(
            "{} systems with λmax(𝓘) < 1 ({} without a gap skipped), {faces} certificates{}",
            with_walk.len(),
            corpus.len() - with_walk.len(),
            first(&bad)
        ),
    )
}

fn criterion_4(corpus: &[(String, SpinSystem)]) -> Outcome {
    let results: Vec<Option<Result<(usize, usize), String>>> = corpus
        .par_iter()
        .map(|(name, sys)| {
            let (walk, _) = auto_walk(sys)?;
            let ctx = LorentzContext::new(sys, &walk).ok()?;
            let huv = match huv_certificates(&ctx) {
                Ok(h) => h,
                Err(e) => return Some(Err(format!("{name}: {e}"))),
            };
            if !huv.first().is_none_or(|h| h.hypothesis_ok) {
                return None;
            }
            for h in &huv {
                if h.lambda2_actual > h.bound + TOL || !h.one_positive {
                    return Some(Err(format!(
                        "{name} ({},{}): λ₂ {} bound {} one-positive {}",
                        h.u, h.v, h.lambda2_actual, h.bound, h.one_positive
                    )));
                }
            }
            let faces = enumerate_faces(sys, 2).ok()?;
            for f in &faces {
                let ok = codim2_hessian(&ctx, f).and_then(|h| one_positive_eigenvalue(&h.hessian));
                if !matches!(ok, Ok(true)) {
                    return Some(Err(format!("{name} {}: codim-2 Hessian {ok:?}", sys.face_label(f))));
                }
            }
            Some(Ok((huv.len(), faces.len())))
        })
        .collect();
    let checked: Vec<_> = results.iter().flatten().collect();
    let pairs: usize = checked.iter().filter_map(|r| r.as_ref().ok()).map(|x| x.0).sum();
    let hessians: usize = checked.iter().filter_map(|r| r.as_ref().ok()).map(|x| x.1).sum();
    let bad: Vec<&String> = checked.iter().filter_map(|r| r.as_ref().err()).collect();
    outcome(
        !checked.is_empty() && bad.is_empty(),
        format!("{} systems, {pairs} site pairs, {hessians} codim-2 Hessians{}", checked.len(), first(&bad)),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for t in 0..200u64 {
        let n = rng.gen_range(3..=7);
        let g = random_absorbing_graph(n, rng.gen_range(0.3..0.9), 1000 + t).unwrap();
        let v = rng.gen_range(0..n);
        let u = (v + rng.gen_range(1..n)) % n;
        let w = if t % 4 == 0 { v } else { (v + rng.gen_range(1..n)) % n };
        let mut mask = 0u64;
        for x in 0..n {
            if x != v && rng.gen::<f64>() < 0.3 {
                mask |= 1 << x;
            }
        }
        let with_v = mask | 1 << v;
        let lhs = g.hitting_prob(mask, u, w).unwrap();
        let rhs = if w == v {
            g.hitting_prob(with_v, u, v).unwrap() * g.hitting_prob(mask, v, v).unwrap()
        } else {
            g.hitting_prob(with_v, u, w).unwrap() + g.hitting_prob(with_v, u, v).unwrap() * g.hitting_prob(mask, v, w).unwrap()
        };
        worst = worst.max((lhs - rhs).abs());
    }
    let decomposition = worst <= 1e-10;

    // expected distinct vertices: linear solve vs Monte Carlo
    let g = random_absorbing_graph(6, 0.7, 77).unwrap();
    let extra = 1u64 << 4;
    let u = 1;
    let exact = g.expected_distinct(extra, u).unwrap();
    let n = 100_000u64;
    let samples: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|s| (g.sample_walk_seeded(extra, u, 9_000_000 + s).unwrap().distinct - 2) as f64)
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let z = (mean - exact).abs() / se;

    let mut absorb: f64 = 0.0;
    for seed in 0..20u64 {
        let g = random_absorbing_graph(5, 0.6, 500 + seed).unwrap();
        let extra = if seed % 2 == 0 { 0 } else { 1u64 << (seed % 5) };
        for u in (0..5).filter(|&u| extra & (1 << u) == 0) {
            let total: f64 = (0..g.len())
                .filter(|&x| g.is_boundary(x) || extra & (1 << x) != 0)
                .map(|x| g.hitting_prob(extra, u, x).unwrap())
                .sum();
            absorb = absorb.max((total - 1.0).abs());
        }
    }
    outcome(
        decomposition && z <= 3.0 && absorb <= 1e-10,
        format!(
            "decomposition max error {worst:.2e} over 200 tuples; E[d(Q)−2] {exact:.5} vs MC {mean:.5} (z = {z:.2}, 10^5 walks); absorption max error {absorb:.2e}"
        ),
    )
}

fn criterion_6(corpus: &[(String, SpinSystem)]) -> Outcome {
    let picked: Vec<(&String, &SpinSystem, WalkGraph)> = corpus
        .iter()
        .filter(|(_, s)| s.d() <= 4 && s.num_facets() <= 64)
        .filter_map(|(n, s)| auto_walk(s).map(|(w, _)| (n, s, w)))
        .take(8)
        .collect();
    let mut pairs = 0;
    let mut failures = Vec::new();
    for (name, sys, walk) in &picked {
        let ctx = LorentzContext::new(sys, walk).unwrap();
        let s = commutativity_sweep(&ctx, 50, 6).unwrap();
        pairs += s.pairs_checked;
        if !s.failures.is_empty() {
            failures.push(format!("{name}: {} pairs", s.failures.len()));
        }
    }
    // negative control: one corrupted hitting value
    let (_, sys, walk) = &picked[0];
    let mut bad = LorentzContext::new(sys, walk).unwrap();
    bad.perturb_hitting(1 << 0, 2, 0, 0.1);
    let control = commutativity_sweep(&bad, 50, 6).unwrap();
    let control_fails = !control.failures.is_empty();
    outcome(
        !picked.is_empty() && failures.is_empty() && control_fails,
        format!(
            "{} systems, {pairs} (σ, x, y) triples × 50 vectors{}; perturbed control flags {} triples",
            picked.len(),
            failures.first().map(|f| format!("; failure {f}")).unwrap_or_default(),
            control.failures.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=10 {
        let hm = WalkGraph::path(d).unwrap().hitting_matrix(0).unwrap();
        let target = (d as f64 - 1.0) / 2.0;
        for j in 0..d {
            worst = worst.max((hm.m_prime.column(j).sum() - target).abs());
        }
    }
    let mut systems = 0;
    let mut certs = 0;
    let mut bad = Vec::new();
    for (d, spins) in [(3, 2), (3, 3), (4, 2), (4, 3), (5, 2), (5, 3), (6, 2), (7, 2)] {
        for seed in 0..3 {
            let sys = path_system(d, spins, seed).unwrap();
            let order: Vec<usize> = (0..d).collect();
            let r = path_complex_certify(&sys, &order).unwrap();
            systems += 1;
            certs += r.certificates.len();
            if !(r.top_link_ok && r.all_at_most_half && r.certificates.iter().all(|c| c.verdict.is_pass())) {
                bad.push(format!("path(d={d},q={spins},seed={seed}) max λ₂ {}", r.max_actual));
            }
        }
    }
    outcome(
        worst <= 1e-10 && bad.is_empty(),
        format!(
            "incoming hitting sums of M′_∅ equal (d−1)/2 for d=2..10, max error {worst:.2e}; {systems} path systems, {certs} certificates ≤ 1/2{}",
            bad.first().map(|b| format!("; failure {b}")).unwrap_or_default()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut systems = 0;
    let mut faces = 0;
    let mut bad = Vec::new();
    for (i, (d, spins, strength)) in [(3, 2, 0.2), (3, 3, 0.2), (4, 2, 0.15), (4, 3, 0.1), (5, 2, 0.1), (6, 2, 0.05)]
        .into_iter()
        .enumerate()
    {
        for seed in 0..3u64 {
            let sys = perturbed_product_system(d, spins, strength, 100 * i as u64 + seed).unwrap();
            let eps = oppenheim_epsilon(&sys).unwrap();
            if eps <= 0.0 {
                continue;
            }
            let r = oppenheim_check(&sys, eps).unwrap();
            systems += 1;
            faces += r.faces.len();
            if !(r.hypothesis_ok && r.holds) {
                bad.push(format!("d={d} q={spins} seed={seed}"));
            }
        }
    }
    outcome(
        systems > 0 && bad.is_empty(),
        format!("{systems} systems, {faces} faces{}", bad.first().map(|b| format!("; failure {b}")).unwrap_or_default()),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut eig_checked = 0;
    let mut eig_bad = 0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=5);
        let a_sum = rng.gen_range(0.5..2.0);
        let mut block = |r: usize, c: usize| {
            let mut x = DMatrix::from_fn(r, c, |_, _| if rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen::<f64>() });
            for i in 0..r {
                if x.row(i).sum() == 0.0 {
                    x[(i, 0)] = 1.0;
                }
                let s = x.row(i).sum();
                for j in 0..c {
                    x[(i, j)] *= a_sum / s;
                }
            }
            x
        };
        let a = block(m, n);
        let b = block(n, m);
        let bound = appendix_bipartite_bound(&a, &b, a_sum).unwrap();
        let mut p = DMatrix::zeros(m + n, m + n);
        p.view_mut((0, m), (m, n)).copy_from(&a);
        p.view_mut((m, 0), (n, m)).copy_from(&b);
        for z in general_eigenvalues(&p).unwrap() {
            let trivial = (z.re.abs() - a_sum).abs() < 1e-8 && z.im.abs() < 1e-8;
            if trivial {
                continue;
            }
            eig_checked += 1;
            if z.norm() > bound + TOL {
                eig_bad += 1;
            }
        }
    }
    let mut rho_bad = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=8);
        let a = DMatrix::from_fn(n, n, |_, _| if rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen::<f64>() });
        let r = spectral_radius(&a).unwrap().value;
        let rbar = lambda_max_symmetric(&symmetrize(&a));
        if rbar > r + TOL {
            rho_bad += 1;
        }
    }
    outcome(
        eig_bad == 0 && rho_bad == 0,
        format!(
            "{eig_checked} nontrivial eigenvalues, {eig_bad} above the bound; {rho_bad}/500 matrices with ρ(Ā) > ρ(A)"
        ),
    )
}

fn criterion_10(corpus: &[(String, SpinSystem)]) -> Outcome {
    let mut chains = 0;
    let mut worst_stat: f64 = 0.0;
    let mut worst_db: f64 = 0.0;
    for (_, sys) in corpus.iter().step_by(5) {
        let c = transition_matrix(sys).unwrap();
        chains += 1;
        worst_stat = worst_stat.max(c.stationarity_error());
        worst_db = worst_db.max(c.detailed_balance_error());
    }
    let mut eig_err: f64 = 0.0;
    for d in 2..=5 {
        for spins in [2, 3] {
            let sys = perturbed_product_system(d, spins, 0.0, d as u64).unwrap();
            let chain = transition_matrix(&sys).unwrap();
            let expect = (d as f64 - 1.0) / d as f64;
            let mut ev: Vec<f64> = general_eigenvalues(&chain.dense().unwrap()).unwrap().iter().map(|z| z.re).collect();
            ev.sort_by(|a, b| b.total_cmp(a));
            let sym = second_eigenvalue(&chain).unwrap();
            eig_err = eig_err.max((ev[1] - expect).abs()).max((sym - expect).abs());
        }
    }
    let mut z_max: f64 = 0.0;
    for (sys, seed) in [
        (random_system(3, 2, 1.0, 10).unwrap(), 1u64),
        (quarantine_system(&Graph::path(3), 3).unwrap(), 2),
    ] {
        let run = run_chain(&sys, 0, 100_000, seed).unwrap();
        let exact = exact_marginals(&sys);
        for v in 0..sys.d() {
            for s in 0..sys.spin_count(v) {
                let z = (run.marginals[v][s] - exact[v][s]).abs() / run.standard_errors[v][s];
                z_max = z_max.max(z);
            }
        }
    }
    outcome(
        worst_stat <= 1e-10 && worst_db <= 1e-10 && eig_err <= 1e-9 && z_max <= 3.0,
        format!(
            "{chains} exact chains, stationarity {worst_stat:.1e}, detailed balance {worst_db:.1e}; product λ₂ error {eig_err:.1e}; max marginal z-score {z_max:.2} at 10^5 steps"
        ),
    )
}

fn criterion_11() -> Outcome {
    let graph = Graph::path(3);
    let q = 64;
    let delta = graph.max_degree() as f64;
    assert!(delta <= (q as f64).sqrt() / 4.0);
    let sys = quarantine_system(&graph, q).unwrap();
    let connected = is_connected(&sys).connected;
    let i = dobrushin_matrix(&sys);
    let ci = spectral_influence_matrix(&sys).unwrap();
    let lmax = lambda_max_symmetric(&ci);
    let mut max_i: f64 = 0.0;
    for u in 0..3 {
        for v in 0..3 {
            if graph.adjacent(u, v) {
                max_i = max_i.max(i[(v, u)]);
            }
        }
    }
    let floor = 1.0 - 4.0 / q as f64;
    outcome(
        connected && lmax <= 0.5 && max_i >= floor,
        format!(
            "path on 3 sites, q = {q}, Δ = {delta}: λmax(𝓘) = {lmax:.6}, max I(v→u) = {max_i:.6} ≥ {floor:.6}, ρ(I) = {:.6}",
            spectral_radius(&i).unwrap().value
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let corpus = corpus();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 influence comparison", Box::new(|| criterion_1(&corpus))),
        ("2 stated ε bound", Box::new(|| criterion_2(&corpus))),
        ("3 auto-walk certificates", Box::new(|| criterion_3(&corpus))),
        ("4 pair bound and Hessians", Box::new(|| criterion_4(&corpus))),
        ("5 random-walk identities", Box::new(criterion_5)),
        ("6 π-map commutativity", Box::new(|| criterion_6(&corpus))),
        ("7 path complexes", Box::new(criterion_7)),
        ("8 link-to-link descent", Box::new(criterion_8)),
        ("9 bipartite bound and ρ(Ā)", Box::new(criterion_9)),
        ("10 Glauber dynamics", Box::new(|| criterion_10(&corpus))),
        ("11 quarantine showcase", Box::new(criterion_11)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria pass in {:.1}s",
        checks.len() - failed,
        checks.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
