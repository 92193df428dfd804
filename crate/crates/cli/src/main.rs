use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use eprlab::channel::{scan_random_states, scan_states, simulate, ChannelConfig, ScanOptions};
use eprlab::graph::{classify, DEFAULT_PERFECTION_TOLERANCE};
use eprlab::invariance::{assess, ProbeOptions, ReportVerdict, DEFAULT_PROBES};
use eprlab::io::{parse_basis, parse_density, to_json};
use eprlab::parallel::Workers;
use eprlab::qudit::{joint_distribution, random_state, validate_density, DensityMatrix, OrthonormalBasis, PureState, StateKind};
use eprlab::rng::{derive_seed, stream};
use eprlab::pauli;

const EXIT_FALSIFIED: u8 = 1;
const EXIT_ERROR: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;
const TAG_NAMED_STATE: u64 = 21;

/// Invariant perfect correlations of bipartite qudit states.
#[derive(Debug, Parser)]
#[command(name = "eprlab", version)]
struct Cli {
    /// Write a run manifest (command, arguments, seed, input digests) to this path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pauli decomposition of a two-qubit state.
    Decompose(InputArgs),
    /// Perfect-correlation verdict in one measurement basis.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        /// computational, fourier, or a basis JSON file.
        #[arg(long, default_value = "computational")]
        basis: String,
        #[arg(long, default_value_t = DEFAULT_PERFECTION_TOLERANCE)]
        tol: f64,
    },
    /// Certify the singlet or produce a two-basis counterexample (exit 0 / 1 / 3).
    Falsify {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        probes: usize,
        #[command(flatten)]
        run: RunArgs,
        /// Refine the worst probed basis by local search.
        #[arg(long)]
        refine: bool,
    },
    /// Monte Carlo of collective U⊗U noise.
    Simulate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value = "computational")]
        basis: String,
        /// Also write per-trial success probabilities as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Minimum invariance defect over random states.
    Scan {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=8))]
        dim: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 100)]
        probes: usize,
        #[arg(long)]
        refine: bool,
        /// Scan this single named state instead of random ones.
        #[arg(long)]
        state: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Density matrix JSON file.
    #[arg(conflicts_with = "state", required_unless_present = "state")]
    input: Option<PathBuf>,
    /// singlet, phi-plus, phi-minus, max-entangled:D, maximally-mixed:D, or mixed:D.
    #[arg(long)]
    state: Option<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, env = "EPRLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses all available cores.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    seed: Option<u64>,
    version: &'static str,
    input_digests: BTreeMap<String, String>,
    timestamp: String,
}

struct Session {
    inputs: BTreeMap<String, String>,
}

impl Session {
    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    fn density(&mut self, input: &InputArgs, seed: u64) -> Result<DensityMatrix> {
        let rho = match (&input.input, &input.state) {
            (Some(path), _) => {
                let text = self.read(path)?;
                parse_density(&text).with_context(|| format!("invalid state in {}", path.display()))?
            }
            (None, Some(name)) => named_state(name, seed)?,
            (None, None) => bail!("an input file or --state is required"),
        };
        Ok(rho)
    }

    fn basis(&mut self, choice: &str, d: usize) -> Result<OrthonormalBasis> {
        Ok(match choice {
            "computational" => OrthonormalBasis::computational(d),
            "fourier" => OrthonormalBasis::fourier(d),
            path => {
                let text = self.read(Path::new(path))?;
                parse_basis(&text).with_context(|| format!("invalid basis in {path}"))?
            }
        })
    }
}

fn named_state(name: &str, seed: u64) -> Result<DensityMatrix> {
    let (base, dim) = match name.split_once(':') {
        Some((b, d)) => {
            let d: usize = d.parse().with_context(|| format!("bad dimension in --state {name}"))?;
            if !(2..=8).contains(&d) {
                bail!("--state dimension must be in 2..=8, got {d}");
            }
            (b, Some(d))
        }
        None => (name, None),
    };
    let rho = match (base, dim) {
        ("singlet", None) => PureState::singlet().density(),
        ("phi-plus", None) => PureState::phi_plus().density(),
        ("phi-minus", None) => PureState::phi_minus().density(),
        ("max-entangled", Some(d)) => PureState::max_entangled(d).density(),
        ("maximally-mixed", Some(d)) => DensityMatrix::maximally_mixed(d),
        ("mixed", Some(d)) => random_state(d, StateKind::Mixed, &mut stream(derive_seed(seed, TAG_NAMED_STATE, 0), 0))?,
        _ => bail!("unknown --state {name}"),
    };
    let d = rho.local_dim();
    Ok(validate_density(rho.into_matrix(), d, true)?)
}

fn write_manifest(path: &Path, cli_command: &str, seed: Option<u64>, session: &Session) -> Result<()> {
    let manifest = RunManifest {
        command: cli_command.to_string(),
        argv: std::env::args().collect(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
        input_digests: session.inputs.clone(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };
    fs::write(path, to_json(&manifest) + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<u8> {
    let mut session = Session { inputs: BTreeMap::new() };
    let mut exit = 0;
    let (name, seed) = match &cli.command {
        Command::Decompose(input) => {
            let rho = session.density(input, 0)?;
            if rho.local_dim() != 2 || !rho.is_bipartite() {
                bail!("decompose requires local_dim 2 (got {})", rho.local_dim());
            }
            let decomp = pauli::decompose(&rho)?;
            println!("{}", to_json(&decomp));
            eprintln!("alpha = {:?}, beta = {:?}", decomp.alpha().as_slice(), decomp.beta().as_slice());
            ("decompose", None)
        }
        Command::Classify { input, basis, tol } => {
            let rho = session.density(input, 0)?;
            let basis = session.basis(basis, rho.local_dim())?;
            let verdict = classify(&joint_distribution(&rho, &basis)?, *tol)?;
            println!("{}", to_json(&verdict));
            eprintln!("{:?}: signature {}, leakage {:.3e}", verdict.status, verdict.signature, verdict.leakage);
            ("classify", None)
        }
        Command::Falsify { input, probes, run, refine } => {
            let rho = session.density(input, run.seed)?;
            let report = assess(
                &rho,
                &ProbeOptions {
                    n_random_bases: *probes,
                    refine: *refine,
                    seed: run.seed,
                    workers: Workers(run.workers),
                },
            )?;
            println!("{}", to_json(&report));
            exit = match report.verdict {
                ReportVerdict::Certified => 0,
                ReportVerdict::Falsified => EXIT_FALSIFIED,
                ReportVerdict::Inconclusive => EXIT_INCONCLUSIVE,
            };
            match &report.witness {
                Some(w) => eprintln!(
                    "falsified ({:?}): {} vs {}",
                    w.kind, w.verdict_1.signature, w.verdict_2.signature
                ),
                None => eprintln!("{:?}, defect {:.3e}", report.verdict, report.defect),
            }
            ("falsify", Some(run.seed))
        }
        Command::Simulate { input, trials, basis, csv, run } => {
            let rho = session.density(input, run.seed)?;
            let basis = session.basis(basis, rho.local_dim())?;
            let config = ChannelConfig::with_basis(rho, *trials, run.seed, basis)?;
            let stats = simulate(&config, Workers(run.workers))?;
            println!("{}", to_json(&stats));
            eprintln!(
                "declared map {:?}: mean {:.6} ± {:.2e}, min {:.6}",
                config.declared_map().as_slice(),
                stats.mean,
                stats.std_error,
                stats.min
            );
            if let Some(path) = csv {
                fs::write(path, stats.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
                let mut side = path.clone().into_os_string();
                side.push(".manifest.json");
                write_manifest(Path::new(&side), "simulate", Some(run.seed), &session)?;
            }
            ("simulate", Some(run.seed))
        }
        Command::Scan { dim, count, probes, refine, state, run } => {
            let opts = ScanOptions {
                probes_per_state: *probes,
                refine: *refine,
                seed: run.seed,
                workers: Workers(run.workers),
            };
            let report = match state {
                Some(name) => {
                    let rho = named_state(name, run.seed)?;
                    if rho.local_dim() as u64 != *dim {
                        bail!("--state has local_dim {} but --dim is {dim}", rho.local_dim());
                    }
                    scan_states(vec![("forced", rho)], &opts)?
                }
                None => scan_random_states(*dim as usize, *count, &opts)?,
            };
            println!("{}", to_json(&report));
            eprintln!(
                "min defect {:.6e} at state {} ({})",
                report.min_defect, report.argmin.index, report.argmin.kind
            );
            ("scan", Some(run.seed))
        }
    };
    if let Some(path) = &cli.manifest {
        write_manifest(path, name, seed, &session)?;
    }
    Ok(exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
