//! `qgnn` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgnn::config::RunConfig;
use qgnn::graph::{build_event_graphs, load_subgraph_dir, toy_subgraph, EdgeStats, SubGraph};
use qgnn::hitdata::{generate_events, load_event_dir, write_event_to_dir, PtRange};
use qgnn::model::{gradient_check, Architecture, Checkpoint, ModelParams, ShotSampling};
use qgnn::plot::{histogram, histogram_chart, line_chart, Series};
use qgnn::train::{evaluate, metrics_csv, parse_metrics_csv, train, HISTOGRAM_BINS};
use qgnn::QgnnError;

const GRADCHECK_TOLERANCE: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-4;

#[derive(Parser)]
#[command(
    name = "qgnn",
    version,
    about = "Quantum graph neural network for track-segment classification"
)]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic helical-track events as CSV file pairs.
    Gen(GenArgs),
    /// Apply selection cuts and write 16 sector subgraphs per event.
    Build(BuildArgs),
    /// Train a model and write metrics.csv plus a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a directory of subgraphs.
    Eval(EvalArgs),
    /// Compare exact gradients with finite differences on a random toy graph.
    #[command(alias = "grad-check")]
    Gradcheck(GradcheckArgs),
    /// Emit SVG loss/AUC curves and hit histograms.
    Plot(PlotArgs),
    /// Print per-subgraph node, edge and label counts.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of events.
    #[arg(long)]
    events: Option<usize>,
    /// Tracks per event.
    #[arg(long)]
    tracks: Option<usize>,
    /// Noise hits as a fraction of track hits, in [0, 1).
    #[arg(long)]
    noise: Option<f64>,
    /// Lower edge of the generated pT range (GeV).
    #[arg(long)]
    pt_min: Option<f64>,
    /// Upper edge of the generated pT range (GeV).
    #[arg(long)]
    pt_max: Option<f64>,
    /// Run seed; each event derives its own seed from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    /// Directory of event CSV pairs.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory for subgraph files.
    #[arg(long)]
    out: PathBuf,
    /// Selection-cut config file (keys pt_min, phi_slope_max, z0_max, eta_min, eta_max).
    #[arg(long)]
    cuts: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of subgraph files.
    #[arg(long)]
    graphs: PathBuf,
    /// Output directory for metrics.csv and checkpoint.txt.
    #[arg(long)]
    out: PathBuf,
    /// Message-passing iterations.
    #[arg(long)]
    nit: Option<usize>,
    /// Passes over the training split.
    #[arg(long)]
    epochs: Option<usize>,
    /// ADAM learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Seed for initialization, split and shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Training subgraphs.
    #[arg(long)]
    n_train: Option<usize>,
    /// Validation subgraphs.
    #[arg(long)]
    n_val: Option<usize>,
    /// Validation cadence in optimizer steps.
    #[arg(long)]
    val_every: Option<usize>,
    /// `tree` (exact contraction) or `statevector`.
    #[arg(long)]
    backend: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of subgraph files.
    #[arg(long)]
    graphs: PathBuf,
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// `tree` (exact contraction) or `statevector`.
    #[arg(long)]
    backend: Option<String>,
    /// Estimate each expectation from this many shots instead of exactly.
    #[arg(long)]
    shots: Option<u64>,
    /// Seed for shot sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for score histograms of true and fake edges.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the toy graph and parameters.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Message-passing iterations.
    #[arg(long, default_value_t = 1)]
    nit: usize,
    /// Toy graph size.
    #[arg(long, default_value_t = 10)]
    nodes: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// metrics.csv written by `train`.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Subgraph directory for r/φ/z hit histograms.
    #[arg(long)]
    graphs: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    /// Directory of subgraph files.
    #[arg(long)]
    graphs: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numeric(m) => m,
        }
    }
}

impl From<QgnnError> for Failure {
    fn from(e: QgnnError) -> Self {
        let msg = e.to_string();
        match e {
            QgnnError::Config(_) => Failure::Usage(msg),
            QgnnError::Numeric(_) => Failure::Numeric(msg),
            _ => Failure::Data(msg),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(k) = cli.threads {
        cfg.threads = (k > 0).then_some(k);
    }
    if let Some(k) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(cfg, a),
        Command::Build(a) => cmd_build(cfg, a),
        Command::Train(a) => cmd_train(cfg, a),
        Command::Eval(a) => cmd_eval(cfg, a),
        Command::Gradcheck(a) => cmd_gradcheck(cfg, a),
        Command::Plot(a) => cmd_plot(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn set(cfg: &mut RunConfig, key: &str, value: Option<impl ToString>) -> CmdResult {
    match value {
        Some(v) => cfg.set(key, &v.to_string()).map_err(Failure::from),
        None => Ok(()),
    }
}

fn validated(cfg: RunConfig) -> Result<RunConfig, Failure> {
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen(mut cfg: RunConfig, a: GenArgs) -> CmdResult {
    set(&mut cfg, "events", a.events)?;
    set(&mut cfg, "tracks", a.tracks)?;
    set(&mut cfg, "noise", a.noise)?;
    set(&mut cfg, "pt_lo", a.pt_min)?;
    set(&mut cfg, "pt_hi", a.pt_max)?;
    set(&mut cfg, "seed", a.seed)?;
    let cfg = validated(cfg)?;
    let events = generate_events(&cfg.generator, cfg.n_events, cfg.train.seed)?;
    create_dir(&a.out)?;
    let mut n_hits = 0;
    for e in &events {
        write_event_to_dir(e, &a.out)?;
        n_hits += e.hits.len();
    }
    let PtRange { min, max } = cfg.generator.pt_range;
    println!(
        "wrote {} events ({n_hits} hits, {} tracks/event, pT [{min}, {max}] GeV) to {}",
        events.len(),
        cfg.generator.n_tracks,
        a.out.display()
    );
    Ok(())
}

fn cmd_build(mut cfg: RunConfig, a: BuildArgs) -> CmdResult {
    match &a.cuts {
        Some(path) if path.exists() => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text, path).map_err(|e| Failure::Usage(e.to_string()))?;
            println!("cuts from {}", path.display());
        }
        Some(path) => println!("cuts file {} not found; using default selection cuts", path.display()),
        None => println!("no cuts file; using default selection cuts"),
    }
    let cfg = validated(cfg)?;
    let c = &cfg.cuts;
    println!(
        "  pt > {} GeV, |phi slope| < {}, |z0| < {} mm, eta in [{}, {}]",
        c.pt_min, c.phi_slope_max, c.z0_max, c.eta_min, c.eta_max
    );
    let events = load_event_dir(&a.input)?;
    if events.is_empty() {
        return Err(Failure::Data(format!("no events found in {}", a.input.display())));
    }
    create_dir(&a.out)?;
    let mut total = EdgeStats::default();
    let mut n_files = 0;
    for e in &events {
        let (graphs, stats) = build_event_graphs(e, &cfg.cuts, &cfg.normalization)?;
        for g in &graphs {
            g.write(&a.out)?;
            n_files += 1;
        }
        total.merge(&stats);
    }
    println!(
        "{} events -> {n_files} subgraphs, {} edges ({} true of {} truth segments)",
        events.len(),
        total.edges,
        total.true_edges,
        total.truth_segments
    );
    println!("efficiency {:.4}  purity {:.4}", total.efficiency(), total.purity());
    if total.zero_dr_skipped > 0 {
        println!("skipped {} same-radius pairs", total.zero_dr_skipped);
    }
    Ok(())
}

fn load_graphs(dir: &Path) -> Result<Vec<SubGraph>, Failure> {
    let graphs = load_subgraph_dir(dir)?;
    if graphs.is_empty() {
        return Err(Failure::Data(format!("no subgraph files in {}", dir.display())));
    }
    Ok(graphs)
}

fn cmd_train(mut cfg: RunConfig, a: TrainArgs) -> CmdResult {
    set(&mut cfg, "n_iterations", a.nit)?;
    set(&mut cfg, "epochs", a.epochs)?;
    set(&mut cfg, "learning_rate", a.lr)?;
    set(&mut cfg, "seed", a.seed)?;
    set(&mut cfg, "n_train", a.n_train)?;
    set(&mut cfg, "n_val", a.n_val)?;
    set(&mut cfg, "val_every", a.val_every)?;
    set(&mut cfg, "backend", a.backend)?;
    let cfg = validated(cfg)?;
    let graphs = load_graphs(&a.graphs)?;
    let run = train(&graphs, &cfg.train)?;
    create_dir(&a.out)?;
    let metrics = a.out.join("metrics.csv");
    write_file(&metrics, &metrics_csv(&run.records))?;
    let checkpoint = a.out.join("checkpoint.txt");
    run.checkpoint.write(&checkpoint)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} steps, baseline AUC {}, final AUC {}",
        run.records.last().map_or(0, |r| r.step),
        fmt(run.baseline_auc()),
        fmt(run.final_auc())
    );
    println!("wrote {} and {}", metrics.display(), checkpoint.display());
    match run.failure {
        Some(e) => Err(Failure::Numeric(format!(
            "training stopped early, last good checkpoint kept: {e}"
        ))),
        None => Ok(()),
    }
}

fn cmd_eval(mut cfg: RunConfig, a: EvalArgs) -> CmdResult {
    set(&mut cfg, "backend", a.backend)?;
    set(&mut cfg, "shots", a.shots)?;
    let cfg = validated(cfg)?;
    let checkpoint = Checkpoint::read(&a.checkpoint)?;
    let graphs = load_graphs(&a.graphs)?;
    let mut arch = Architecture::new(cfg.train.backend);
    arch.shots = cfg.shots.map(|shots| ShotSampling { shots, seed: a.seed });
    let summary = evaluate(&checkpoint.params, &graphs, &arch, cfg.train.clamp_eps)?;
    let excluded = summary.n_empty + summary.n_single_class;
    match summary.auc {
        Some(auc) => println!("auc {auc:.6}"),
        None => println!("auc n/a (no subgraph with both classes)"),
    }
    println!("loss {:.6}", summary.mean_loss);
    println!(
        "subgraphs {}  excluded from AUC {excluded} ({} without edges, {} single-class)",
        summary.n_graphs, summary.n_empty, summary.n_single_class
    );
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        for (name, counts) in [("true", &summary.hist_true), ("fake", &summary.hist_fake)] {
            let svg = histogram_chart(
                &format!("output score, {name} edges"),
                "score",
                "edges",
                counts,
                0.0,
                1.0,
            );
            write_file(&dir.join(format!("score_{name}.svg")), &svg)?;
        }
    }
    Ok(())
}

fn cmd_gradcheck(cfg: RunConfig, a: GradcheckArgs) -> CmdResult {
    let arch = Architecture::new(cfg.train.backend);
    let graph = toy_subgraph(a.seed, a.nodes, 4)?;
    let params = ModelParams::random(&arch, a.nit, a.seed)?;
    let dev = gradient_check(&graph, &params, &arch, cfg.train.clamp_eps, GRADCHECK_STEP)?;
    println!(
        "toy graph: {} nodes, {} edges, {} parameters",
        graph.n_nodes(),
        graph.n_edges(),
        params.n_params()
    );
    println!("max |exact - finite difference| = {dev:.3e}");
    if dev > GRADCHECK_TOLERANCE {
        return Err(Failure::Numeric(format!(
            "deviation {dev:.3e} exceeds {GRADCHECK_TOLERANCE:e}"
        )));
    }
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> CmdResult {
    if a.metrics.is_none() && a.graphs.is_none() {
        return Err(Failure::Usage("plot needs --metrics and/or --graphs".into()));
    }
    create_dir(&a.out)?;
    if let Some(path) = &a.metrics {
        let text = fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let records = parse_metrics_csv(&text, path)?;
        let pts = |f: &dyn Fn(&qgnn::train::TrainRecord) -> Option<f64>| -> Vec<(f64, f64)> {
            records
                .iter()
                .filter_map(|r| f(r).map(|v| (r.step as f64, v)))
                .collect()
        };
        let loss = line_chart(
            "loss",
            "step",
            "weighted BCE",
            &[
                Series {
                    label: "train",
                    points: pts(&|r| r.train_loss),
                },
                Series {
                    label: "validation",
                    points: pts(&|r| r.val_loss),
                },
            ],
        );
        let auc = line_chart(
            "validation AUC",
            "step",
            "AUC",
            &[Series {
                label: "validation",
                points: pts(&|r| r.val_auc),
            }],
        );
        write_file(&a.out.join("loss.svg"), &loss)?;
        write_file(&a.out.join("auc.svg"), &auc)?;
        println!("wrote loss.svg and auc.svg");
    }
    if let Some(dir) = &a.graphs {
        let graphs = load_graphs(dir)?;
        let norm = qgnn::graph::Normalization::default();
        let (mut r, mut phi, mut z) = (Vec::new(), Vec::new(), Vec::new());
        for g in &graphs {
            let sector = g.provenance().phi_sector;
            for &f in g.node_features() {
                let [hr, hphi, hz] = norm.cylindrical(f, sector);
                r.push(hr);
                phi.push(hphi);
                z.push(hz);
            }
        }
        let pi = std::f64::consts::PI;
        for (name, unit, values, lo, hi) in [
            ("r", "r [mm]", &r, 0.0, norm.r_scale),
            ("phi", "phi [rad]", &phi, -pi, pi),
            ("z", "z [mm]", &z, -norm.z_offset, norm.z_scale - norm.z_offset),
        ] {
            let counts = histogram(values, HISTOGRAM_BINS, lo, hi);
            write_file(
                &a.out.join(format!("hist_{name}.svg")),
                &histogram_chart(name, unit, "hits", &counts, lo, hi),
            )?;
        }
        println!("wrote hist_r.svg, hist_phi.svg and hist_z.svg from {} hits", r.len());
    }
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    let graphs = load_graphs(&a.graphs)?;
    println!("{:<28} {:>6} {:>6} {:>6}", "subgraph", "nodes", "edges", "true");
    let (mut n, mut e, mut t) = (0, 0, 0);
    for g in &graphs {
        println!(
            "{:<28} {:>6} {:>6} {:>6}",
            g.provenance().id(),
            g.n_nodes(),
            g.n_edges(),
            g.n_true()
        );
        n += g.n_nodes();
        e += g.n_edges();
        t += g.n_true();
    }
    println!("{:<28} {n:>6} {e:>6} {t:>6}", format!("total ({})", graphs.len()));
    Ok(())
}
