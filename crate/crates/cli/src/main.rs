//! `bmprior` — subcommand pipeline for learning pairwise Boltzmann-machine
//! priors from binarized images and analyzing the result.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod reports;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use bmprior_core::analysis::{
    coupling_histogram, distance_profile, field_and_magnetization_histograms, fit_exponential,
    frustration_count, link_list, spectrum_of_image, spectrum_of_patches, LinkKind,
    DEFAULT_COUPLING_BIN, DEFAULT_FIELD_BINS, DEFAULT_FRUSTRATION_THRESHOLD,
};
use bmprior_core::gibbs::{learn_mc, specific_heat_sweep, LearnConfig, McConfig};
use bmprior_core::imageio::{binarize, read_pbm, read_pgm, write_pbm, Dither, DEFAULT_THRESHOLD};
use bmprior_core::invising::{infer_ba, infer_nmf};
use bmprior_core::patchset::{
    compute_moments, patchify, patchset_from_bytes, patchset_to_bytes, PatchSet, MAGIC,
};
use bmprior_core::priormodel::{build_prior_with_cut, extract_params, generate_patches, PriorFile};

use reports::{
    AnalysisReport, FitOutcome, Fits, HistogramSection, LinkSection, ModelReport, ModelSummary,
    MomentsReport, MomentsSummary, Profiles, Provenance, REPORT_VERSION,
};

#[derive(Parser)]
#[command(
    name = "bmprior",
    version,
    about = "Learn and analyze pairwise Boltzmann-machine priors of binarized images",
    disable_help_subcommand = true
)]
struct Cli {
    /// Worker threads (default: all cores, or BMPRIOR_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a PGM image to a bit-packed PBM of ±1 spins.
    Binarize(BinarizeArgs),
    /// Cut PBM images into L×L patches and write one patch file.
    Patchify(PatchifyArgs),
    /// Accumulate magnetizations and connected correlations of a patch file.
    Moments(MomentsArgs),
    /// Infer couplings and fields from a moments report.
    Infer(InferArgs),
    /// Run the full lattice analysis of a model report.
    Analyze(AnalyzeArgs),
    /// Sweep the temperature and measure the specific heat.
    Heat(HeatArgs),
    /// Radially binned Fourier amplitude spectrum of patches or an image.
    Spectrum(SpectrumArgs),
    /// Extract the six prior parameters from a model report.
    ExportPrior(ExportPriorArgs),
    /// Sample synthetic patches from a prior parameter file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct BinarizeArgs {
    /// Input PGM (P2 or P5).
    input: PathBuf,
    /// Output PBM (P4).
    #[arg(short, long)]
    output: PathBuf,
    /// Dither method: riemersma, floyd, or none.
    #[arg(long, default_value = "riemersma")]
    dither: Dither,
    /// Threshold as a fraction of maxval; exact ties map to white.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args)]
struct PatchifyArgs {
    /// Input PBM images.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Patch side L.
    #[arg(long)]
    size: usize,
    /// Output patch file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MomentsArgs {
    /// Input patch file.
    input: PathBuf,
    /// Output moments report (JSON).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    /// Input moments report (JSON).
    input: PathBuf,
    /// Output model report (JSON).
    #[arg(short, long)]
    output: PathBuf,
    /// Estimator: nmf, ba, or mc.
    #[arg(long)]
    method: String,
    /// Covariance ridge; omitted means automatic.
    #[arg(long)]
    ridge: Option<f64>,
    /// Gradient tolerance of Monte-Carlo learning.
    #[arg(long, default_value_t = 1e-3)]
    grad_tol: f64,
    /// Measured sweeps per chain (mc).
    #[arg(long, default_value_t = 10_000)]
    sweeps: usize,
    /// Burn-in sweeps per chain (mc).
    #[arg(long, default_value_t = 1_000)]
    burn_in: usize,
    /// Independent chains (mc).
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Learning iteration cap (mc).
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// RNG seed (mc).
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input model report (JSON).
    model: PathBuf,
    /// Output analysis report (JSON).
    #[arg(short, long)]
    output: PathBuf,
    /// Moments report for field/magnetization histograms.
    #[arg(long)]
    moments: Option<PathBuf>,
    /// Patch file for the spectrum slope.
    #[arg(long)]
    patches: Option<PathBuf>,
    /// Exponential fit range, e.g. 2:6.
    #[arg(long, default_value = "2:6")]
    fit_range: String,
    /// Minimum |w| for a plaquette link to count as frustrated.
    #[arg(long, default_value_t = DEFAULT_FRUSTRATION_THRESHOLD)]
    frustration_threshold: f64,
    /// Coupling histogram bin width.
    #[arg(long, default_value_t = DEFAULT_COUPLING_BIN)]
    bin_width: f64,
    /// Bins of the field/magnetization histograms.
    #[arg(long, default_value_t = DEFAULT_FIELD_BINS)]
    bins: usize,
}

#[derive(Args)]
struct HeatArgs {
    /// Input model report (JSON).
    model: PathBuf,
    /// Output CSV (T,C,C_stderr).
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    tmin: f64,
    #[arg(long)]
    tmax: f64,
    /// Number of grid points.
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 10_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 1_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Input: a patch file or a square PBM image (detected by magic).
    input: PathBuf,
    /// Output CSV (f,amplitude).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ExportPriorArgs {
    /// Input model report (JSON).
    model: PathBuf,
    /// Output prior parameter file (JSON).
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Prior parameter file (JSON).
    #[arg(long)]
    params: PathBuf,
    /// Number of patches to draw.
    #[arg(long)]
    count: usize,
    /// Lattice side of the generated patches.
    #[arg(long, default_value_t = 16)]
    size: usize,
    /// Post-burn-in sweeps per patch chain.
    #[arg(long, default_value_t = 50)]
    sweeps: usize,
    /// Burn-in sweeps per patch chain.
    #[arg(long, default_value_t = 1_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output patch file.
    #[arg(short, long)]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version print to stdout and succeed
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Err(code) = configure_threads(cli.threads) {
        return code;
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<(), ExitCode> {
    let from_env = std::env::var("BMPRIOR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(threads) = flag.or(from_env) {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return Err(ExitCode::from(1));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| {
                eprintln!("error: cannot configure thread pool: {e}");
                ExitCode::from(2)
            })?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Binarize(args) => cmd_binarize(args),
        Command::Patchify(args) => cmd_patchify(args),
        Command::Moments(args) => cmd_moments(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Heat(args) => cmd_heat(args),
        Command::Spectrum(args) => cmd_spectrum(args),
        Command::ExportPrior(args) => cmd_export_prior(args),
        Command::Generate(args) => cmd_generate(args),
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn load_model(path: &Path) -> Result<ModelReport> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing model report {}", path.display()))
}

fn load_patches(path: &Path) -> Result<PatchSet> {
    let bytes = read_file(path)?;
    patchset_from_bytes(&bytes).with_context(|| format!("parsing patch file {}", path.display()))
}

fn cmd_binarize(args: BinarizeArgs) -> Result<()> {
    let bytes = read_file(&args.input)?;
    let gray = read_pgm(&bytes).with_context(|| format!("parsing {}", args.input.display()))?;
    let binary = binarize(&gray, args.dither, args.threshold)?;
    write_file(&args.output, &write_pbm(&binary))
}

fn cmd_patchify(args: PatchifyArgs) -> Result<()> {
    let mut combined: Option<PatchSet> = None;
    for input in &args.inputs {
        let bytes = read_file(input)?;
        let img = read_pbm(&bytes).with_context(|| format!("parsing {}", input.display()))?;
        let ps =
            patchify(&img, args.size).with_context(|| format!("tiling {}", input.display()))?;
        combined = Some(match combined {
            None => ps,
            Some(mut acc) => {
                acc.extend(ps)?;
                acc
            }
        });
    }
    let combined = combined.ok_or_else(|| anyhow!("no input images"))?;
    write_file(&args.output, &patchset_to_bytes(&combined))
}

fn cmd_moments(args: MomentsArgs) -> Result<()> {
    let ps = load_patches(&args.input)?;
    let moments = compute_moments(&ps)?;
    let report = MomentsReport {
        report_version: REPORT_VERSION,
        provenance: Provenance::new(vec![path_str(&args.input)], None),
        moments,
    };
    write_json(&args.output, &report)
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let bytes = read_file(&args.input)?;
    let report: MomentsReport = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing moments report {}", args.input.display()))?;
    let moments = report.moments;

    let (model, method, converged, iterations, residual, seed) = match args.method.as_str() {
        "nmf" => (
            infer_nmf(&moments, args.ridge)?,
            "nmf",
            None,
            None,
            None,
            None,
        ),
        "ba" => (
            infer_ba(&moments, args.ridge)?,
            "ba",
            None,
            None,
            None,
            None,
        ),
        "mc" => {
            let init = infer_nmf(&moments, args.ridge)?;
            let cfg = LearnConfig {
                grad_tol: args.grad_tol,
                max_iters: args.max_iters,
                mc: McConfig {
                    sweeps: args.sweeps,
                    burn_in: args.burn_in,
                    chains: args.chains,
                    seed: args.seed,
                    temperature: 1.0,
                },
                ..LearnConfig::default()
            };
            let outcome = learn_mc(&moments, &cfg, &init)?;
            for entry in &outcome.trace {
                eprintln!(
                    "{},{:.6e},{}",
                    entry.iter,
                    entry.grad_inf_norm,
                    entry.step.as_str()
                );
            }
            if !outcome.converged {
                eprintln!(
                    "warning: learning stopped unconverged after {} iterations \
                     (gradient ∞-norm {:.3e})",
                    outcome.iterations, outcome.residual
                );
            }
            (
                outcome.model,
                "mc",
                Some(outcome.converged),
                Some(outcome.iterations),
                Some(outcome.residual),
                Some(args.seed),
            )
        }
        other => return Err(anyhow!("unknown method `{other}` (expected nmf, ba or mc)")),
    };

    let report = ModelReport {
        report_version: REPORT_VERSION,
        provenance: Provenance::new(vec![path_str(&args.input)], seed),
        method: method.into(),
        model,
        converged,
        iterations,
        residual,
    };
    write_json(&args.output, &report)
}

fn parse_fit_range(text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(anyhow!("fit range must look like 2:6, got `{text}`"));
    }
    let lo: usize = parts[0].parse().context("fit range lower bound")?;
    let hi: usize = parts[1].parse().context("fit range upper bound")?;
    if lo >= hi {
        return Err(anyhow!("fit range must be increasing, got `{text}`"));
    }
    Ok((lo, hi))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let model_report = load_model(&args.model)?;
    let model = &model_report.model;
    let (r_min, r_max) = parse_fit_range(&args.fit_range)?;

    let mut inputs = vec![path_str(&args.model)];
    let profile_a = distance_profile(model, (1, 1))?;
    let profile_b = distance_profile(model, (2, 2))?;
    let fits = Fits {
        sublattice_a: FitOutcome::from_result(fit_exponential(&profile_a, r_min, r_max)),
        sublattice_b: FitOutcome::from_result(fit_exponential(&profile_b, r_min, r_max)),
    };

    let moments = match &args.moments {
        Some(path) => {
            inputs.push(path_str(path));
            let bytes = read_file(path)?;
            let report: MomentsReport = serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing moments report {}", path.display()))?;
            Some(report.moments)
        }
        None => None,
    };
    let (fields_hist, mag_hist) = match &moments {
        Some(m) => {
            let (f, mu) = field_and_magnetization_histograms(model, m, args.bins)?;
            (Some(f), Some(mu))
        }
        None => (None, None),
    };

    let spectrum_slope = match &args.patches {
        Some(path) => {
            inputs.push(path_str(path));
            let ps = load_patches(path)?;
            let curve = spectrum_of_patches(&ps)?;
            curve.slope.is_finite().then_some(curve.slope)
        }
        None => None,
    };

    let report = AnalysisReport {
        report_version: REPORT_VERSION,
        provenance: Provenance::new(inputs, None),
        model_summary: ModelSummary::of(model),
        moments_summary: moments.as_ref().map(MomentsSummary::of),
        profiles: Profiles {
            sublattice_a: profile_a,
            sublattice_b: profile_b,
        },
        fits,
        histograms: HistogramSection {
            nn: coupling_histogram(model, LinkKind::Nn, args.bin_width)?,
            nnn: coupling_histogram(model, LinkKind::Nnn, args.bin_width)?,
            fields: fields_hist,
            magnetizations: mag_hist,
        },
        links: LinkSection {
            nn: link_list(model, LinkKind::Nn)?,
            nnn: link_list(model, LinkKind::Nnn)?,
        },
        frustration: frustration_count(model, args.frustration_threshold)?,
        spectrum_slope,
    };
    write_json(&args.output, &report)
}

fn cmd_heat(args: HeatArgs) -> Result<()> {
    if args.steps < 1 {
        return Err(anyhow!("--steps must be at least 1"));
    }
    let model_report = load_model(&args.model)?;
    let grid: Vec<f64> = if args.steps == 1 {
        vec![args.tmin]
    } else {
        (0..args.steps)
            .map(|k| args.tmin + (args.tmax - args.tmin) * k as f64 / (args.steps - 1) as f64)
            .collect()
    };
    let cfg = McConfig {
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        chains: args.chains,
        seed: args.seed,
        temperature: 1.0,
    };
    let curve = specific_heat_sweep(&model_report.model, &grid, &cfg)?;
    eprintln!("peak: C = {:.6} at T = {}", curve.peak_c, curve.peak_t);
    write_file(&args.output, curve.to_csv().as_bytes())
}

fn cmd_spectrum(args: SpectrumArgs) -> Result<()> {
    let bytes = read_file(&args.input)?;
    let curve = if bytes.starts_with(MAGIC) {
        spectrum_of_patches(&patchset_from_bytes(&bytes)?)?
    } else {
        let img = read_pbm(&bytes).with_context(|| {
            format!("{} is neither a patch file nor a PBM", args.input.display())
        })?;
        spectrum_of_image(&img)?
    };
    eprintln!(
        "log-log slope {:.4} over |f| in [{:.2}, {:.2}]",
        curve.slope, curve.slope_range.0, curve.slope_range.1
    );
    write_file(&args.output, curve.to_csv().as_bytes())
}

fn cmd_export_prior(args: ExportPriorArgs) -> Result<()> {
    let model_report = load_model(&args.model)?;
    let model = &model_report.model;
    let params = extract_params(model)?;
    let h0 = model.fields().iter().sum::<f64>() / model.n() as f64;
    write_json(&args.output, &PriorFile::new(params, h0))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let bytes = read_file(&args.params)?;
    let prior: PriorFile = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing prior file {}", args.params.display()))?;
    let model = build_prior_with_cut(&prior.params(), args.size, prior.h0, prior.r_cut)?;
    let cfg = McConfig {
        sweeps: args.sweeps,
        burn_in: args.burn_in,
        chains: 1,
        seed: args.seed,
        temperature: 1.0,
    };
    let ps = generate_patches(&model, args.count, &cfg)?;
    write_file(&args.output, &patchset_to_bytes(&ps))
}
