use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use orthoclust::bench::{
    generate_instance, nmse_contribution, run_algorithm, run_sweep, to_db, Algorithm, ExperimentSpec,
    InstanceFile, InstanceParams, MatrixKind,
};
use orthoclust::checks;
use orthoclust::oc::{FormationMode, OcConfig};
use orthoclust::priors::{PriorConfig, PriorKind};

#[derive(Parser)]
#[command(name = "orthoclust", version, about = "Bayesian sparse recovery by orthogonal clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    PartialDft,
    Toeplitz,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum PriorArg {
    Gaussian,
    Unknown,
}

impl From<PriorArg> for PriorKind {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Gaussian => PriorKind::Gaussian,
            PriorArg::Unknown => PriorKind::Unknown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Oc,
    OcFixedL,
    Omp,
    OmpRefined,
    Oracle,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Oc => Algorithm::Oc,
            AlgorithmArg::OcFixedL => Algorithm::OcFixedL,
            AlgorithmArg::Omp => Algorithm::Omp,
            AlgorithmArg::OmpRefined => Algorithm::OmpRefined,
            AlgorithmArg::Oracle => Algorithm::Oracle,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic instance and write it as JSON.
    Gen {
        #[arg(long, default_value_t = 800)]
        n: usize,
        /// Measurements; ignored for Toeplitz (implied by the decimation).
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, default_value_t = 0.01)]
        p: f64,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        snr_db: f64,
        #[arg(long, value_enum, default_value = "partial-dft")]
        matrix: MatrixArg,
        #[arg(long, default_value_t = 20)]
        taps: usize,
        #[arg(long, default_value_t = 4)]
        decimation: usize,
        #[arg(long, value_enum, default_value = "gaussian")]
        prior: PriorArg,
        #[arg(long, default_value_t = 1.0)]
        signal_variance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Recover one instance and write the estimate as JSON.
    Recover {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "oc")]
        algorithm: AlgorithmArg,
        #[arg(long, default_value_t = 32)]
        cluster_len: usize,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        tail_probability: Option<f64>,
        /// Supports kept per level when a cluster is searched greedily.
        #[arg(long)]
        beam_width: Option<usize>,
        /// Merge clusters closer than this many columns (default: cluster length).
        #[arg(long)]
        min_separation: Option<usize>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Run a sweep described by a JSON spec and write CSV.
    Sweep {
        #[arg(long, short)]
        spec: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Report runtimes (the CSV is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Run the small-dimension equivalence suites.
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            n,
            m,
            p,
            snr_db,
            matrix,
            taps,
            decimation,
            prior,
            signal_variance,
            seed,
            out,
        } => {
            let matrix = match matrix {
                MatrixArg::PartialDft => MatrixKind::PartialDft { z: 0 },
                MatrixArg::Toeplitz => MatrixKind::SubsampledToeplitz { taps, decimation },
                MatrixArg::Dense => MatrixKind::DenseGaussian,
            };
            let prior = PriorConfig::new(p, signal_variance, prior.into())?;
            let params = InstanceParams {
                n,
                m,
                matrix,
                prior: prior.clone(),
                snr_db,
                max_redraws: 1000,
            };
            let generated = generate_instance(&params, seed)?;
            let file = InstanceFile {
                instance: generated.instance,
                prior,
            };
            fs::write(&out, serde_json::to_string(&file)?).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} (N={}, M={}, sigma_n^2={:.4e}, support size {})",
                out.display(),
                file.instance.matrix.n(),
                file.instance.matrix.m(),
                file.instance.noise_variance,
                file.instance.support().map_or(0, |s| s.len())
            );
        }
        Command::Recover {
            input,
            algorithm,
            cluster_len,
            budget,
            tail_probability,
            beam_width,
            min_separation,
            out,
        } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let file: InstanceFile = serde_json::from_str(&text).context("parsing instance file")?;
            file.instance.validate()?;
            let mut oc = OcConfig {
                cluster_len,
                mode: FormationMode::VariableLength,
                ..OcConfig::default()
            };
            if let Some(b) = budget {
                oc.budget = b;
            }
            if let Some(t) = tail_probability {
                oc.tail_probability = t;
            }
            if let Some(w) = beam_width {
                oc.beam_width = w;
            }
            oc.min_separation = min_separation;
            let alg: Algorithm = algorithm.into();
            let output = run_algorithm(alg, &file.instance, &file.prior, &oc, cluster_len)?;
            let nmse = match &file.instance.truth {
                Some(x) => nmse_contribution(&output.estimate, x).ok(),
                None => None,
            };
            let report = serde_json::json!({
                "algorithm": alg.name(),
                "estimate": output.estimate,
                "nmse": nmse,
                "clusters": output.clusters,
                "hypotheses": output.hypotheses,
            });
            match &out {
                Some(path) => fs::write(path, serde_json::to_string(&report)?)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{report}"),
            }
            let support = output.estimate.iter().filter(|v| v.norm() > 0.0).count();
            eprint!("{}: {} non-zero entries", alg.name(), support);
            if let Some(c) = output.clusters {
                eprint!(", {c} clusters");
            }
            if let Some(e) = nmse {
                eprint!(", NMSE {:.3} dB", to_db(e));
            }
            eprintln!();
        }
        Command::Sweep { spec, out, timing } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            let mut spec: ExperimentSpec = serde_json::from_str(&text).context("parsing sweep spec")?;
            spec.timing |= timing;
            let output = run_sweep(&spec)?;
            let csv = output.to_csv();
            match out {
                Some(path) => fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => std::io::stdout().write_all(csv.as_bytes())?,
            }
            if output.rejections > 0 {
                eprintln!("redrew {} all-zero truths", output.rejections);
            }
        }
        Command::OracleCheck { seed } => {
            let results = checks::run_all(seed)?;
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {} (deviation {:.3e}, tolerance {:.0e})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.deviation,
                    r.tolerance
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                eprintln!("{failed} of {} checks failed", results.len());
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
