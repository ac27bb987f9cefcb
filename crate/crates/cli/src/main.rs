use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use spectral_trickle::complex::{
    path_system, quarantine_system, random_system, Graph, SystemDocument, WalkDocument,
};
use spectral_trickle::influence::spectral_influence_matrix;
use spectral_trickle::report::{
    analyze, certificates_csv, render_table, sample_section, walk_section, with_tolerance, AnalysisReport, Tolerances,
};
use spectral_trickle::trickle::{certify_all, construct_walk_from_ci, path_complex_certify, path_walk, CERT_TOL};
use spectral_trickle::{SpinSystem, WalkGraph};

const THREADS_ENV: &str = "SPECTRAL_TRICKLE_THREADS";

#[derive(Parser)]
#[command(name = "spectral-trickle", version, about = "Spectral influence and trickle-down certificates for spin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Influence matrices, the auto-walk certificates and Glauber diagnostics.
    Analyze {
        input: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
        /// Largest time for the exact TV profile.
        #[arg(long, default_value_t = 1024)]
        horizon: usize,
    },
    /// Per-face eigenvalue certificates against an absorbing walk.
    Certify {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = WalkKind::Auto)]
        walk: WalkKind,
        /// Walk-graph JSON for `--walk file`; defaults to the input's `walk` key.
        #[arg(long)]
        walk_file: Option<PathBuf>,
        /// Comma-separated site order for `--walk path`.
        #[arg(long, value_delimiter = ',')]
        order: Vec<String>,
        /// Only certify faces of this codimension.
        #[arg(long)]
        codim: Option<usize>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Simulates Glauber dynamics.
    Sample {
        input: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Facet index every chain starts from.
        #[arg(long, default_value_t = 0)]
        start: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Writes a generated system document.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for `<name>.report.json` and `<name>.certificates.csv`.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output stem; defaults to the input file stem.
    #[arg(long)]
    name: Option<String>,
    /// Tolerance added to every certificate bound.
    #[arg(long, default_value_t = CERT_TOL)]
    tol: f64,
    /// Certificate rows printed to stdout.
    #[arg(long, default_value_t = 40)]
    rows: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WalkKind {
    Auto,
    Path,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Path,
    Cycle,
    Matching,
    Empty,
}

#[derive(Subcommand)]
enum GenKind {
    /// Random sparse system with i.i.d. weights.
    Random {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 3)]
        spins: usize,
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Uniform measure on quarantine-respecting configurations of a graph.
    Quarantine {
        #[arg(long, value_enum, default_value_t = GraphKind::Cycle)]
        graph: GraphKind,
        /// Number of sites (pairs for `matching`).
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        q: usize,
    },
    /// Markov-chain system along the site order.
    Path {
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        spins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<(SystemDocument, SpinSystem)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: SystemDocument =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let system = doc.to_system().with_context(|| format!("loading {}", path.display()))?;
    Ok((doc, system))
}

fn stem(out: &OutputArgs, input: &Path) -> String {
    out.name.clone().unwrap_or_else(|| {
        input.file_stem().map_or("system".into(), |s| s.to_string_lossy().into_owned())
    })
}

fn write_outputs(out: &OutputArgs, input: &Path, report: &AnalysisReport, csv: bool) -> anyhow::Result<()> {
    fs::create_dir_all(&out.out_dir).with_context(|| format!("creating {}", out.out_dir.display()))?;
    let name = stem(out, input);
    let json = out.out_dir.join(format!("{name}.report.json"));
    fs::write(&json, report.to_json()).with_context(|| format!("writing {}", json.display()))?;
    if csv {
        let path = out.out_dir.join(format!("{name}.certificates.csv"));
        fs::write(&path, certificates_csv(&report.certificates))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", render_table(report, out.rows));
    Ok(())
}

fn exit_code(report: &AnalysisReport) -> u8 {
    if report.has_violation() {
        2
    } else {
        0
    }
}

fn tolerances(out: &OutputArgs) -> Tolerances {
    Tolerances { certificate: out.tol, ..Tolerances::default() }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Analyze { input, out, horizon } => {
            let (_, system) = load(&input)?;
            let report = analyze(&system, tolerances(&out), horizon)?;
            write_outputs(&out, &input, &report, true)?;
            Ok(exit_code(&report))
        }
        Command::Certify { input, walk, walk_file, order, codim, out } => {
            let (doc, system) = load(&input)?;
            let mut report = AnalysisReport::new("certify", &system, tolerances(&out));
            let (graph, epsilon) = match walk {
                WalkKind::Auto => {
                    let auto = construct_walk_from_ci(&system, &spectral_influence_matrix(&system)?)?;
                    let eps = auto.epsilon();
                    (auto.walk, Some(eps))
                }
                WalkKind::Path => {
                    let ordering = site_order(&system, &order)?;
                    let path = path_complex_certify(&system, &ordering)?;
                    report.notes.push(format!(
                        "top-link property {}; incoming hitting sums equal (d-1)/2: {}",
                        if path.top_link_ok { "holds" } else { "fails" },
                        path.sums_ok
                    ));
                    (path_walk(&system, &ordering)?, None)
                }
                WalkKind::File => (file_walk(&doc, walk_file.as_deref(), &system)?, None),
            };
            if let Some(k) = codim {
                if k < 2 || k > system.d() {
                    bail!("--codim {k} outside 2..={}", system.d());
                }
            }
            let certs = certify_all(&system, &graph, epsilon)?
                .into_iter()
                .filter(|c| codim.is_none_or(|k| c.codim == k))
                .collect();
            report.certificates = with_tolerance(certs, out.tol);
            report.walk = Some(walk_section(
                match walk {
                    WalkKind::Auto => "auto",
                    WalkKind::Path => "path",
                    WalkKind::File => "file",
                },
                &graph,
            ));
            write_outputs(&out, &input, &report, true)?;
            Ok(exit_code(&report))
        }
        Command::Sample { input, steps, seed, chains, start, out } => {
            if chains == 0 {
                bail!("--chains must be positive");
            }
            let (_, system) = load(&input)?;
            let mut report = AnalysisReport::new("sample", &system, tolerances(&out));
            report.sample = Some(sample_section(&system, start, steps, seed, chains)?);
            write_outputs(&out, &input, &report, false)?;
            Ok(0)
        }
        Command::Gen { kind, output } => {
            let system = match kind {
                GenKind::Random { d, spins, density, seed } => random_system(d, spins, density, seed)?,
                GenKind::Quarantine { graph, n, q } => {
                    let g = match graph {
                        GraphKind::Path => Graph::path(n),
                        GraphKind::Cycle => Graph::cycle(n),
                        GraphKind::Matching => Graph::matching(n),
                        GraphKind::Empty => Graph::empty(n),
                    };
                    quarantine_system(&g, q)?
                }
                GenKind::Path { d, spins, seed } => path_system(d, spins, seed)?,
            };
            let text = system.to_document().to_json_pretty() + "\n";
            match output {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn site_order(system: &SpinSystem, order: &[String]) -> anyhow::Result<Vec<usize>> {
    if order.is_empty() {
        return Ok((0..system.d()).collect());
    }
    let ordering: Vec<usize> = order
        .iter()
        .map(|n| system.site_index(n).ok_or_else(|| anyhow!("unknown site `{n}` in --order")))
        .collect::<anyhow::Result<_>>()?;
    let mut sorted = ordering.clone();
    sorted.sort_unstable();
    if sorted != (0..system.d()).collect::<Vec<_>>() {
        bail!("--order must list every site exactly once");
    }
    Ok(ordering)
}

fn file_walk(doc: &SystemDocument, walk_file: Option<&Path>, system: &SpinSystem) -> anyhow::Result<WalkGraph> {
    let walk_doc = match walk_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            // accept a bare walk document or one nested under `walk`
            let inner = value.get("walk").cloned().unwrap_or(value);
            serde_json::from_value::<WalkDocument>(inner).with_context(|| format!("parsing walk in {}", path.display()))?
        }
        None => doc.walk.clone().ok_or_else(|| anyhow!("--walk file needs --walk-file or a `walk` key in the input"))?,
    };
    Ok(WalkGraph::from_document(&walk_doc, system)?)
}
