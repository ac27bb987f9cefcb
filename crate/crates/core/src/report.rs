//! Report assembly: JSON envelope, certificate CSV and a plain-text summary.

use std::fmt::Write as _;

use serde::Serialize;

use crate::complex::{is_connected, PruningReport, SpinSystem};
use crate::error::Result;
use crate::glauber::{
    distribution_after, exact_marginals, spectral_gap, transition_matrix, tv_distance, ChainRun,
    GlauberSampler, MAX_CHAIN_STATES, MAX_EIGEN_STATES,
};
use crate::influence::{compare, influence_bundle, InfluenceComparison};
use crate::trickle::{main_theorem_report, Certificate, CERT_TOL};
use crate::verdict::Verdict;
use crate::walks::{WalkGraph, CLAMP, ROW_TOL};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerances in force when a report was produced.
#[derive(Clone, Debug, Serialize)]
pub struct Tolerances {
    pub certificate: f64,
    pub row_stochastic: f64,
    pub stationarity: f64,
    pub perron_equality: f64,
    pub hitting_clamp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            certificate: CERT_TOL,
            row_stochastic: ROW_TOL,
            stationarity: 1e-10,
            perron_equality: 1e-9,
            hitting_clamp: CLAMP,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemDigest {
    pub d: usize,
    pub sites: Vec<String>,
    pub spin_sizes: Vec<usize>,
    pub facets: usize,
    pub connected: bool,
    /// A face whose link skeleton is disconnected, if any.
    pub disconnected_witness: Option<String>,
    pub pruning: PruningReport,
}

impl SystemDigest {
    pub fn of(system: &SpinSystem) -> Self {
        let conn = is_connected(system);
        SystemDigest {
            d: system.d(),
            sites: system.site_names().to_vec(),
            spin_sizes: (0..system.d()).map(|v| system.spin_count(v)).collect(),
            facets: system.num_facets(),
            connected: conn.connected,
            disconnected_witness: conn.witness.map(|f| system.face_label(&f)),
            pruning: system.pruning().clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InfluenceSection {
    /// Dobrushin matrix, `i[v][u] = I_{v→u}`.
    pub i: Vec<Vec<f64>>,
    pub ci: Vec<Vec<f64>>,
    pub rho_i: f64,
    pub lambda_max_ci: f64,
    pub max_influence: f64,
    pub comparison: InfluenceComparison,
}

#[derive(Clone, Debug, Serialize)]
pub struct MainSection {
    pub epsilon: f64,
    pub component_epsilons: Vec<f64>,
    pub eta: f64,
    pub eta_bound: f64,
    pub eta_bound_corrected: f64,
    pub holds_stated: bool,
    pub holds_corrected: bool,
    pub stated_bound_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingSummary {
    /// Facet index the exact distributions start from.
    pub start: usize,
    /// `(t, TV(δ_start P^t, μ))` at doubling times.
    pub tv: Vec<(usize, f64)>,
    /// First listed time with TV ≤ 1/4.
    pub t_quarter: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlauberSection {
    pub states: usize,
    pub gap: Option<f64>,
    pub row_error: f64,
    pub stationarity_error: f64,
    pub detailed_balance_error: f64,
    pub mixing: MixingSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct WalkSection {
    /// `auto`, `path` or `file`.
    pub kind: String,
    pub document: crate::complex::WalkDocument,
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleSection {
    pub steps: u64,
    pub seed: u64,
    pub runs: Vec<ChainRun>,
    pub exact_marginals: Vec<Vec<f64>>,
}

/// Top-level report; sections are filled by the command that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub tolerances: Tolerances,
    pub system: SystemDigest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub influence: Option<InfluenceSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub main: Option<MainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkSection>,
    pub certificates: Vec<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glauber: Option<GlauberSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSection>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn new(command: &str, system: &SpinSystem, tolerances: Tolerances) -> Self {
        let mut notes = Vec::new();
        let pruning = system.pruning();
        if !pruning.pruned_spins.is_empty() {
            notes.push(format!("{} zero-probability spins pruned", pruning.pruned_spins.len()));
        }
        AnalysisReport {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            tolerances,
            system: SystemDigest::of(system),
            influence: None,
            main: None,
            walk: None,
            certificates: Vec::new(),
            glauber: None,
            sample: None,
            notes,
        }
    }

    /// Any certificate failing or any comparison that must hold failing.
    pub fn has_violation(&self) -> bool {
        let cert = self.certificates.iter().any(|c| c.verdict == Verdict::Fail);
        let infl = self.influence.as_ref().is_some_and(|s| self.system.connected && !s.comparison.holds());
        let main = self.main.as_ref().is_some_and(|m| !m.holds_corrected);
        cert || infl || main
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Influence matrices and their comparison.
pub fn influence_section(system: &SpinSystem) -> Result<InfluenceSection> {
    let b = influence_bundle(system)?;
    let d = system.d();
    let max_influence = (0..d)
        .flat_map(|v| (0..d).filter(move |&u| u != v).map(move |u| (v, u)))
        .map(|(v, u)| b.i[(v, u)])
        .fold(0.0, f64::max);
    Ok(InfluenceSection {
        i: rows(&b.i),
        ci: rows(&b.ci),
        rho_i: b.rho_i,
        lambda_max_ci: b.lambda_max_ci,
        max_influence,
        comparison: compare(&b),
    })
}

/// Exact chain diagnostics; `None` above the exact-chain cap.
pub fn glauber_section(system: &SpinSystem, horizon: usize) -> Result<Option<GlauberSection>> {
    if system.num_facets() > MAX_CHAIN_STATES {
        return Ok(None);
    }
    let chain = transition_matrix(system)?;
    let gap = if chain.len() <= MAX_EIGEN_STATES { Some(spectral_gap(&chain)?) } else { None };
    let mut x = distribution_after(&chain, 0, 0);
    let mut tv = vec![(0, tv_distance(&x, &chain.mu)?)];
    let mut t = 0;
    let mut next = 1;
    while next <= horizon {
        while t < next {
            x = chain.step_distribution(&x);
            t += 1;
        }
        tv.push((t, tv_distance(&x, &chain.mu)?));
        next *= 2;
    }
    let t_quarter = tv.iter().find(|e| e.1 <= 0.25).map(|e| e.0);
    Ok(Some(GlauberSection {
        states: chain.len(),
        gap,
        row_error: chain.row_error(),
        stationarity_error: chain.stationarity_error(),
        detailed_balance_error: chain.detailed_balance_error(),
        mixing: MixingSummary { start: 0, tv, t_quarter },
    }))
}

/// Influence, the ε-driven certificates and the Glauber section.
pub fn analyze(system: &SpinSystem, tolerances: Tolerances, horizon: usize) -> Result<AnalysisReport> {
    let mut report = AnalysisReport::new("analyze", system, tolerances);
    report.influence = Some(influence_section(system)?);
    if !report.system.connected {
        report.notes.push("system is disconnected: main theorem not applicable".into());
    } else {
        match main_theorem_report(system) {
            Ok(main) => {
                let tol = report.tolerances.certificate;
                report.main = Some(MainSection {
                    epsilon: main.epsilon,
                    component_epsilons: main.epsilons.clone(),
                    eta: main.eta,
                    eta_bound: main.eta_bound,
                    eta_bound_corrected: main.eta_bound_corrected,
                    holds_stated: main.holds_stated,
                    holds_corrected: main.holds_corrected,
                    stated_bound_violations: main.main_violations.len(),
                });
                report.walk = Some(walk_section("auto", &main.walk));
                report.certificates = with_tolerance(main.certificates, tol);
            }
            Err(crate::Error::NoSpectralGap(l)) => {
                report.notes.push(format!("no spectral gap (λ_max = {l}): main theorem not applicable"));
            }
            Err(e) => return Err(e),
        }
    }
    report.glauber = glauber_section(system, horizon)?;
    Ok(report)
}

/// Re-derives verdicts under `tol`.
pub fn with_tolerance(mut certs: Vec<Certificate>, tol: f64) -> Vec<Certificate> {
    for c in &mut certs {
        c.verdict = c.verdict_with(tol);
    }
    certs
}

/// Simulated chains from `start`, seeds `seed, seed+1, …`.
pub fn sample_section(system: &SpinSystem, start: usize, steps: u64, seed: u64, chains: usize) -> Result<SampleSection> {
    let sampler = GlauberSampler::new(system);
    let runs = (0..chains as u64)
        .map(|i| sampler.run(start, steps, seed.wrapping_add(i)))
        .collect::<Result<_>>()?;
    Ok(SampleSection { steps, seed, runs, exact_marginals: exact_marginals(system) })
}

pub fn walk_section(kind: &str, walk: &WalkGraph) -> WalkSection {
    WalkSection { kind: kind.into(), document: walk.to_document() }
}

pub const CSV_HEADER: &str = "face,codim,bound_M,bound_distinct,bound_main,actual,hypothesis_ok,pass";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per certificate, floats with 17 significant digits.
pub fn certificates_csv(certs: &[Certificate]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in certs {
        let main = c.bound_main.map(|b| format!("{b:.16e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{:.16e},{:.16e},{},{:.16e},{},{}",
            csv_field(&c.face),
            c.codim,
            c.bound_m,
            c.bound_distinct,
            main,
            c.actual,
            c.hypothesis_ok,
            c.verdict.as_str()
        );
    }
    out
}

/// Plain-text summary for terminals.
pub fn render_table(report: &AnalysisReport, max_rows: usize) -> String {
    let mut out = String::new();
    let s = &report.system;
    let _ = writeln!(out, "{} {} {}", report.tool, report.version, report.command);
    let _ = writeln!(
        out,
        "sites {}  spins {:?}  facets {}  connected {}",
        s.d, s.spin_sizes, s.facets, s.connected
    );
    if let Some(inf) = &report.influence {
        let _ = writeln!(
            out,
            "rho(I) {:.6}  lambda_max(cI) {:.6}  max I(v->u) {:.6}  cI<=I {}",
            inf.rho_i,
            inf.lambda_max_ci,
            inf.max_influence,
            inf.comparison.holds()
        );
    }
    if let Some(m) = &report.main {
        let _ = writeln!(
            out,
            "epsilon {:.6}  eta {:.6}  stated bound {}  corrected bound {}",
            m.epsilon, m.eta, m.holds_stated, m.holds_corrected
        );
    }
    if let Some(g) = &report.glauber {
        let gap = g.gap.map_or("-".to_string(), |x| format!("{x:.6}"));
        let tq = g.mixing.t_quarter.map_or("-".to_string(), |t| t.to_string());
        let _ = writeln!(out, "glauber states {}  gap {gap}  t(1/4) from facet 0 {tq}", g.states);
    }
    if let Some(smp) = &report.sample {
        for r in &smp.runs {
            let _ = writeln!(out, "chain seed {} start {} final {}", r.seed, r.start, r.final_state);
        }
    }
    if !report.certificates.is_empty() {
        let count = |v: Verdict| report.certificates.iter().filter(|c| c.verdict == v).count();
        let _ = writeln!(
            out,
            "certificates {}  pass {}  fail {}  hypothesis-failed {}  not-applicable {}",
            report.certificates.len(),
            count(Verdict::Pass),
            count(Verdict::Fail),
            count(Verdict::HypothesisFailed),
            count(Verdict::NotApplicable)
        );
        let _ = writeln!(out, "{:<40} {:>5} {:>12} {:>12} {:>12}  verdict", "face", "codim", "bound_M", "distinct", "actual");
        for c in report.certificates.iter().take(max_rows) {
            let _ = writeln!(
                out,
                "{:<40} {:>5} {:>12.6} {:>12.6} {:>12.6}  {}",
                c.face,
                c.codim,
                c.bound_m,
                c.bound_distinct,
                c.actual,
                c.verdict.as_str()
            );
        }
        if report.certificates.len() > max_rows {
            let _ = writeln!(out, "... {} more rows in the CSV", report.certificates.len() - max_rows);
        }
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}
