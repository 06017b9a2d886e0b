use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsp_cli::config::{ExperimentConfig, ExperimentId, GraphModel};
use gsp_cli::error::{CliError, Result};
use gsp_cli::runner::{run, summarize_file, write_outputs};
use gsp_cli::schema::config_schema;
use gsp_core::alpha::{alpha_estimate, DEFAULT_ALPHA_MAX_NODES};
use gsp_core::bounds::BoundsReport;
use gsp_core::graphs::{
    gen_erdos_renyi, gen_preferential_attachment, gen_random_weighted, spectral_basis, Graph,
};
use gsp_core::interp::mse;
use gsp_core::kpca::{
    build_projector_with_set, gram_matrix, kpca_basis, sub_project, two_circles, PolyKernel,
    ReducedProjector,
};
use gsp_core::samplers::{
    exhaustive_logdet, exhaustive_optimal, greedy_generic, greedy_mse, rank_leverage,
    sample_leverage, sample_uniform, LogDetObjective, DEFAULT_EXHAUSTIVE_CAP,
};
use gsp_core::signals::{Prior, PriorSpec};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "gsp",
    version,
    about = "Sampling-set selection and interpolation of bandlimited graph signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random graph as JSON.
    Generate(GenerateArgs),
    /// Choose a sampling set.
    Sample(SampleArgs),
    /// Universal MSE bounds and set-size requirements.
    Bounds(BoundsArgs),
    /// Exact α-supermodularity constant and its lower bounds.
    Alpha(AlphaArgs),
    /// Run or summarize an experiment.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Subsampled kernel PCA.
    #[command(subcommand)]
    Kpca(KpcaCommand),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long)]
    n: usize,
    /// Edge probability for Erdős–Rényi graphs.
    #[arg(long, default_value_t = 0.2)]
    edge_probability: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    ErdosRenyi,
    PreferentialAttachment,
    RandomWeighted,
}

impl From<ModelArg> for GraphModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::ErdosRenyi => GraphModel::ErdosRenyi,
            ModelArg::PreferentialAttachment => GraphModel::PreferentialAttachment,
            ModelArg::RandomWeighted => GraphModel::RandomWeighted,
        }
    }
}

/// A graph plus either a prior file or a homoscedastic prior on its top-|K| band.
#[derive(Args)]
struct PriorArgs {
    /// Graph JSON written by `generate`.
    #[arg(long)]
    graph: PathBuf,
    /// Prior JSON `{lambda, lambda_w, H, K}`; overrides the flags below.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// `|K|`, the number of largest-magnitude eigenvectors kept.
    #[arg(long, default_value_t = 5)]
    bandwidth: usize,
    #[arg(long, default_value_t = 1.0)]
    signal_variance: f64,
    #[arg(long, default_value_t = 1e-2)]
    sigma_w2: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Greedy,
    GreedyLogdet,
    Uniform,
    Leverage,
    RankLeverage,
    Exhaustive,
    ExhaustiveLogdet,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    prior: PriorArgs,
    #[arg(long, value_enum, default_value = "greedy")]
    sampler: SamplerArg,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest number of subsets an exhaustive sampler may evaluate.
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP as u64)]
    cap: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// MSE targets for the set-size bound.
    #[arg(long, num_args = 1..)]
    eta: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlphaArgs {
    #[command(flatten)]
    prior: PriorArgs,
    /// Largest graph for the exact enumeration.
    #[arg(long, default_value_t = DEFAULT_ALPHA_MAX_NODES)]
    max_nodes: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Run an experiment and write results.csv, plot.csv, summary.json and metadata.json.
    Run(RunArgs),
    /// Summarize a results.csv.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, required_unless_present_any = ["print_schema", "preset"])]
    config: Option<PathBuf>,
    /// Run an experiment's preset instead of a config file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Print the config JSON Schema and exit.
    #[arg(long)]
    print_schema: bool,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// results.csv from `experiment run`.
    table: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum KpcaCommand {
    /// Fit kPCA, pick landmark points and write the reduced projector.
    Train(TrainArgs),
    /// Project points with a trained reduced projector.
    Project(ProjectArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Training points, one comma-separated row per point, no header.
    #[arg(long, required_unless_present = "two_circles")]
    data: Option<PathBuf>,
    /// Use this many synthetic two-circle points instead of a data file.
    #[arg(long, conflicts_with = "data")]
    two_circles: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    radial_noise: f64,
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long, default_value_t = 4)]
    components: usize,
    /// Number of landmark points.
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 1e-6)]
    sigma_w2: f64,
    #[arg(long, value_enum, default_value = "greedy")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProjectArgs {
    /// Model JSON written by `kpca train`.
    #[arg(long)]
    model: PathBuf,
    /// Points to project, one comma-separated row per point.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Sample(a) => sample(a),
        Command::Bounds(a) => bounds(a),
        Command::Alpha(a) => alpha(a),
        Command::Experiment(ExperimentCommand::Run(a)) => experiment_run(a),
        Command::Experiment(ExperimentCommand::Summarize(a)) => {
            let summary = summarize_file(&a.table)?;
            emit(a.out.as_deref(), &serde_json::to_string_pretty(&summary)?)
        }
        Command::Kpca(KpcaCommand::Train(a)) => kpca_train(a),
        Command::Kpca(KpcaCommand::Project(a)) => kpca_project(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `text` to `out`, or to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let g = match GraphModel::from(a.model) {
        GraphModel::ErdosRenyi => gen_erdos_renyi(a.n, a.edge_probability, a.seed)?,
        GraphModel::PreferentialAttachment => gen_preferential_attachment(a.n, a.seed)?,
        GraphModel::RandomWeighted => gen_random_weighted(a.n, a.seed)?,
    };
    emit(a.out.as_deref(), &g.to_json()?)
}

fn load_prior(a: &PriorArgs) -> Result<Prior> {
    let g = Graph::from_json(&read(&a.graph)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.graph.display())))?;
    let basis = spectral_basis(&g)?;
    match &a.prior {
        Some(path) => {
            let spec: PriorSpec = serde_json::from_str(&read(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Ok(Prior::from_spec(&basis, &spec)?)
        }
        None => Ok(Prior::homoscedastic(
            &basis.select_band(a.bandwidth)?,
            a.signal_variance,
            a.sigma_w2,
        )?),
    }
}

fn select(
    prior: &Prior,
    sampler: SamplerArg,
    budget: usize,
    seed: u64,
    cap: u64,
) -> Result<Vec<usize>> {
    let n = prior.n();
    let set = match sampler {
        SamplerArg::Greedy => greedy_mse(prior, budget)?.set,
        SamplerArg::GreedyLogdet => greedy_generic(&LogDetObjective(prior), n, budget)?.set,
        SamplerArg::Uniform => sample_uniform(n, budget, seed)?,
        SamplerArg::Leverage => sample_leverage(prior, budget, seed)?,
        SamplerArg::RankLeverage => rank_leverage(prior, budget)?,
        SamplerArg::Exhaustive => exhaustive_optimal(prior, budget, cap as u128)?.set,
        SamplerArg::ExhaustiveLogdet => exhaustive_logdet(prior, budget, cap as u128)?.set,
    };
    Ok(set.indices().to_vec())
}

fn sample(a: SampleArgs) -> Result<()> {
    let prior = load_prior(&a.prior)?;
    let set = select(&prior, a.sampler, a.budget, a.seed, a.cap)?;
    let value = mse(&prior, &set)?;
    let out = json!({
        "sampler": a.sampler.to_possible_value().map(|v| v.get_name().to_string()),
        "indices": set,
        "mse": value,
        "empty_mse": mse(&prior, &[])?,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn bounds(a: BoundsArgs) -> Result<()> {
    let prior = load_prior(&a.prior)?;
    let r = BoundsReport::new(&prior)?;
    let lower: Vec<f64> = (0..=prior.n())
        .map(|m| r.lower(m))
        .collect::<gsp_core::Result<_>>()?;
    let mut set_size = Vec::new();
    for &eta in &a.eta {
        let b = r.set_size(eta)?;
        set_size.push(json!({"eta": eta, "l_bound": b.l_bound, "size_bound": b.size_bound, "tight_size": b.tight_size}));
    }
    let out = json!({
        "bandwidth": r.bandwidth,
        "upper": r.upper,
        "lower": lower,
        "uniform_recovery": r.uniform_recovery(),
        "ell": r.ell,
        "ell_max": r.ell_max,
        "set_size": set_size,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn alpha(a: AlphaArgs) -> Result<()> {
    let prior = load_prior(&a.prior)?;
    let est = alpha_estimate(&prior, a.max_nodes)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&est)?)
}

fn experiment_run(a: RunArgs) -> Result<()> {
    if a.print_schema {
        return emit(None, &serde_json::to_string_pretty(&config_schema())?);
    }
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), _) => ExperimentConfig::from_json(&read(path)?)?,
        (None, Some(id)) => ExperimentConfig::preset(ExperimentId::parse(id)?),
        (None, None) => return Err(CliError::Config("--config or --preset is required".into())),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = a.trials {
        cfg.trials = trials;
    }
    if let Some(out) = a.out {
        cfg.output = Some(out);
    }
    let dir = match &cfg.output {
        Some(d) => d.clone(),
        None => return Err(CliError::Config("no output directory; pass --out".into())),
    };
    let output = run(&cfg, a.jobs)?;
    let files = write_outputs(&output, &dir)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let p = rec
            .iter()
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        points.push(p);
    }
    Ok(points)
}

fn kpca_train(a: TrainArgs) -> Result<()> {
    let data = match (&a.data, a.two_circles) {
        (Some(path), _) => read_points(path)?,
        (None, Some(n)) => two_circles(n, a.radial_noise, a.seed)?.0,
        (None, None) => {
            return Err(CliError::Config(
                "--data or --two-circles is required".into(),
            ))
        }
    };
    let model = kpca_basis(
        &gram_matrix(&data, PolyKernel::new(a.degree)?)?,
        a.components,
    )?;
    let prior = model.prior(a.sigma_w2)?;
    let set = select(
        &prior,
        a.sampler,
        a.budget,
        a.seed,
        DEFAULT_EXHAUSTIVE_CAP as u64,
    )?;
    let proj = build_projector_with_set(&model, &set, a.sigma_w2)?;
    let landmarks: Vec<&Vec<f64>> = proj.indices.iter().map(|&i| &data[i]).collect();
    let projector: serde_json::Value = serde_json::from_str(&proj.to_json()?)?;
    let out = json!({
        "projector": projector,
        "landmarks": landmarks,
        "training_points": data.len(),
        "reduction_ratio": proj.reduction_ratio(data.len()),
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&out)?)
}

fn kpca_project(a: ProjectArgs) -> Result<()> {
    let bundle: serde_json::Value = serde_json::from_str(&read(&a.model)?)?;
    let bad = || CliError::Config(format!("{}: not a kpca model", a.model.display()));
    let mut proj =
        ReducedProjector::from_json(&bundle.get("projector").ok_or_else(bad)?.to_string())?;
    let landmarks: Vec<Vec<f64>> =
        serde_json::from_value(bundle.get("landmarks").ok_or_else(bad)?.clone())?;
    if landmarks.len() != proj.indices.len() {
        return Err(bad());
    }
    // The landmarks are stored in projector order, so re-index them densely.
    proj.indices = (0..landmarks.len()).collect();
    let kernel = proj.kernel;
    let mut w = csv::Writer::from_writer(Vec::new());
    for y in read_points(&a.data)? {
        let z = sub_project(&proj, &landmarks, &kernel, &y)?;
        w.write_record(z.iter().map(|v| gsp_cli::table::format_float(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Check(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv output is UTF-8");
    match &a.out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
