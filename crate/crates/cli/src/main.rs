use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use blind_ep::config_model::{sample_graph, sample_quotient_degrees, GenConfig, PlantedSpec};
use blind_ep::eval::fixtures::fixtures_report;
use blind_ep::eval::{
    concentration_diagnostic, rows_to_csv, run_sweep, summarize, Algorithm, ExperimentConfig,
};
use blind_ep::io::{self, GraphSidecar};
use blind_ep::signal::{covariance_of, generate_samples, FilterSpec, SignalModel};
use blind_ep::spectral::{spectral_extract_detailed, DEFAULT_RESTARTS};
use blind_ep::wl::{robust_blind_wl, MatrixOracle, RobustConfig};
use blind_ep::Partition;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "blind-ep",
    version,
    about = "Recover equitable partitions from graph filter outputs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph with a planted equitable partition.
    Generate {
        /// Planted spec JSON ({"sizes": [...], "D": [[...]]}); drawn at random if absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Graph file (`.json`, anything else is the text edge list); a
        /// `<out>.meta.json` sidecar records spec, seed and planted partition.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        class_size: usize,
        #[arg(long, default_value_t = 4)]
        max_deg: usize,
    },
    /// Draw filtered signals from a generated graph.
    Sample {
        /// Graph written by `generate`; its sidecar supplies the partition.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 0.7)]
        alpha: f64,
        #[arg(long, default_value_t = 300)]
        s: usize,
        /// Filter coefficients h_0,h_1,... of f(A).
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        filter: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Binary sample file by default, one-sample-per-line CSV with `csv`.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Recover a partition from samples or a covariance matrix.
    Extract {
        /// Binary sample file from `sample`.
        #[arg(
            long,
            conflicts_with = "covariance",
            required_unless_present = "covariance"
        )]
        samples: Option<PathBuf>,
        /// Dense covariance matrix as CSV.
        #[arg(long)]
        covariance: Option<PathBuf>,
        #[arg(long, value_parser = parse_algorithm, default_value = "spectral")]
        algorithm: Algorithm,
        /// Number of classes (spectral only).
        #[arg(long)]
        k: Option<usize>,
        /// RobustConfig JSON for robust_blind_wl.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_RESTARTS)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sidecar or partition JSON to score against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid from an ExperimentConfig JSON file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Print per-cell means to stderr.
        #[arg(long)]
        summary: bool,
    },
    /// Decay of the sample covariance error over the config's s grid.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Check the two counterexample graphs; exit code 2 on any mismatch.
    Fixtures {
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: blind_ep::Error| e.to_string())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn sidecar_path(graph: &Path) -> PathBuf {
    let mut name = graph.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn generate(
    config: Option<&Path>,
    seed: u64,
    out: &Path,
    k: usize,
    class_size: usize,
    max_deg: usize,
) -> Result<()> {
    let spec: PlantedSpec = match config {
        Some(path) => read_json(path)?,
        None => sample_quotient_degrees(k, max_deg, &vec![class_size; k], seed)?,
    };
    let generator = GenConfig::default();
    let (g, planted) = sample_graph(&spec, &generator, seed)?;
    let text = if out.extension().is_some_and(|e| e == "json") {
        io::graph_to_json(&g)
    } else {
        io::graph_to_text(&g)
    };
    emit(Some(out), &text)?;
    let sidecar = GraphSidecar {
        spec,
        seed,
        generator,
        planted,
    };
    emit(
        Some(&sidecar_path(out)),
        &serde_json::to_string_pretty(&sidecar)?,
    )?;
    eprintln!(
        "wrote {} nodes, {} edges to {}",
        g.n(),
        g.edges().len(),
        out.display()
    );
    Ok(())
}

fn load_truth(path: &Path) -> Result<Partition> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(sidecar) = serde_json::from_str::<GraphSidecar>(&text) {
        return Ok(sidecar.planted);
    }
    Ok(io::partition_from_json(&text)?)
}

#[allow(clippy::too_many_arguments)]
fn sample(
    graph: &Path,
    alpha: f64,
    s: usize,
    filter: Vec<f64>,
    seed: u64,
    out: &Path,
    format: Option<Format>,
) -> Result<()> {
    let g = io::load_graph(graph).with_context(|| format!("loading {}", graph.display()))?;
    let planted = load_truth(&sidecar_path(graph))?;
    let model = SignalModel::new(g, planted, alpha, FilterSpec::new(filter)?)?;
    let ss = generate_samples(&model, s, seed)?;
    match format {
        Some(Format::Csv) => emit(Some(out), &io::samples_to_csv(&ss))?,
        Some(Format::Json) => bail!("samples are written as binary or CSV"),
        None => {
            let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
            io::write_samples(&ss, BufWriter::new(file))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Extraction {
    algorithm: &'static str,
    classes: usize,
    partition: Partition,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigengap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<u8>,
}

#[allow(clippy::too_many_arguments)]
fn extract(
    samples: Option<&Path>,
    covariance: Option<&Path>,
    algorithm: Algorithm,
    k: Option<usize>,
    config: Option<&Path>,
    restarts: usize,
    seed: u64,
    truth: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let sigma = match (samples, covariance) {
        (Some(path), _) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            covariance_of(&io::read_samples(BufReader::new(file))?.samples)
        }
        (None, Some(path)) => io::matrix_from_csv(&std::fs::read_to_string(path)?)?,
        (None, None) => bail!("one of --samples or --covariance is required"),
    };
    let mut result = match algorithm {
        Algorithm::Spectral => {
            let Some(k) = k else {
                bail!("--k is required for the spectral algorithm");
            };
            let e = spectral_extract_detailed(&sigma, k, restarts, seed)?;
            Extraction {
                algorithm: algorithm.name(),
                classes: e.partition.k(),
                partition: e.partition,
                eigengap: e.eigengap,
                converged: None,
                accuracy: None,
            }
        }
        Algorithm::RobustBlindWl => {
            let cfg: RobustConfig = match config {
                Some(path) => read_json(path)?,
                None => RobustConfig::default(),
            };
            let oracle = MatrixOracle::approximate(sigma.clone());
            let o = robust_blind_wl(&oracle, sigma.nrows(), &cfg, seed)?;
            Extraction {
                algorithm: algorithm.name(),
                classes: o.partition.k(),
                partition: o.partition,
                eigengap: None,
                converged: Some(o.converged),
                accuracy: None,
            }
        }
    };
    if let Some(path) = truth {
        let planted = load_truth(path)?;
        result.accuracy = Some(blind_ep::eval::graph_accuracy(&result.partition, &planted));
    }
    emit(out, &(serde_json::to_string(&result)? + "\n"))
}

fn sweep(
    config: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
    show_summary: bool,
) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    let rows = run_sweep(&cfg)?;
    let text = match format {
        Format::Csv => rows_to_csv(&rows, true),
        Format::Json => serde_json::to_string_pretty(&rows)? + "\n",
    };
    emit(out, &text)?;
    if show_summary {
        for c in summarize(&rows) {
            eprintln!(
                "alpha={} s={} {}: accuracy {:.3} over {} trials, median cost {}",
                c.alpha,
                c.s,
                c.algorithm.name(),
                c.mean_accuracy,
                c.scored,
                c.median_node_cost
                    .map_or("-".into(), |v| format!("{v:.3e}"))
            );
        }
    }
    Ok(())
}

fn diagnose(config: &Path, seed: Option<u64>, out: Option<&Path>, format: Format) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.master_seed = seed;
    }
    let reports = concentration_diagnostic(&cfg)?;
    let text = match format {
        Format::Json => serde_json::to_string_pretty(&reports)? + "\n",
        Format::Csv => {
            let mut t = String::from("alpha,s,median_error,median_population_gap,median_mixed_gap,gap_condition_rate,slope,effective_rank\n");
            for r in &reports {
                for p in &r.points {
                    t.push_str(&format!(
                        "{},{},{:e},{:e},{:e},{},{},{}\n",
                        r.alpha,
                        p.s,
                        p.median_error,
                        p.median_population_gap,
                        p.median_mixed_gap,
                        p.gap_condition_rate,
                        r.slope,
                        r.effective_rank
                    ));
                }
            }
            t
        }
    };
    emit(out, &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            config,
            seed,
            out,
            k,
            class_size,
            max_deg,
        } => generate(config.as_deref(), seed, &out, k, class_size, max_deg),
        Command::Sample {
            graph,
            alpha,
            s,
            filter,
            seed,
            out,
            format,
        } => sample(&graph, alpha, s, filter, seed, &out, format),
        Command::Extract {
            samples,
            covariance,
            algorithm,
            k,
            config,
            restarts,
            seed,
            truth,
            out,
        } => extract(
            samples.as_deref(),
            covariance.as_deref(),
            algorithm,
            k,
            config.as_deref(),
            restarts,
            seed,
            truth.as_deref(),
            out.as_deref(),
        ),
        Command::Sweep {
            config,
            seed,
            out,
            format,
            summary,
        } => sweep(&config, seed, out.as_deref(), format, summary),
        Command::Diagnose {
            config,
            seed,
            out,
            format,
        } => diagnose(&config, seed, out.as_deref(), format),
        Command::Fixtures { format } => {
            return match fixtures_report() {
                Ok(report) => {
                    match format {
                        Some(Format::Json) => match serde_json::to_string_pretty(&report) {
                            Ok(s) => println!("{s}"),
                            Err(e) => {
                                eprintln!("error: {e}");
                                return ExitCode::from(1);
                            }
                        },
                        _ => print!("{report}"),
                    }
                    if report.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
