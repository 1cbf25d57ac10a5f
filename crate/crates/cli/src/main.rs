//! `unrectify` command-line front end. Every number printed here comes
//! straight from a library call; this file only parses and formats.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use unrectify::graph::file::{read_network, read_network_builder, write_network};
use unrectify::stability::{certify, rescale_with_report, StabilityReport};
use unrectify::Dag;
use unrectify_harness::{
    run_fusion_stack, run_lenet_partition, run_regions_2d, run_stability_gain, DataSource, ExperimentConfig,
    PartitionRow,
};

const THREADS_VAR: &str = "UNRECTIFY_THREADS";

// Exit statuses shared by every command.
const EXIT_OK: u8 = 0;
const EXIT_NEGATIVE: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "unrectify", version, about = "Build, analyse and certify piecewise-linear networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network description; exits 1 when the graph is invalid.
    Validate { net: PathBuf },
    /// Print every node with its role, level and dimension.
    Levels { net: PathBuf },
    /// Evaluate a network on one comma-separated input row.
    Eval {
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        input: String,
    },
    /// Partition statistics of a random stack of fusion modules.
    FusionStack(FusionArgs),
    /// Level sums, certificate and empirical gain, before and after rescaling.
    StabilityGain(GainArgs),
    /// Partition statistics of LeNet-5 at levels 3, 4, 7 and 8.
    LenetPartition(LenetArgs),
    /// Region counts of the planar example networks.
    #[command(name = "regions-2d")]
    Regions2d(RegionsArgs),
    /// Certify Lipschitz stability; exits 0 when certified, 1 when not.
    Certify { net: PathBuf },
    /// Rescale weights so that every level sum is at most 1.
    Rescale {
        net: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Use Frobenius norms, which never underestimate the spectral ones.
        #[arg(long)]
        frobenius: bool,
    },
}

#[derive(Args)]
struct FusionArgs {
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pairs per region beyond which distances are estimated.
    #[arg(long)]
    pair_cap: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GainArgs {
    /// Print the rescaled network's table instead of the unscaled one.
    /// Both are always computed and written.
    #[arg(long)]
    scaled: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Sample pairs evaluated for the gain; all pairs when they fit.
    #[arg(long)]
    pairs: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LenetArgs {
    /// Directory holding train-images-idx3-ubyte and train-labels-idx1-ubyte.
    #[arg(long, conflicts_with = "synthetic")]
    mnist_dir: Option<PathBuf>,
    /// Use standard-normal images instead of MNIST.
    #[arg(long)]
    synthetic: bool,
    /// Number of images used.
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionsArgs {
    /// Lattice points per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Validate { net } => validate(&net),
        Command::Levels { net } => levels(&load(&net)?),
        Command::Eval { net, input } => eval(&load(&net)?, &input),
        Command::FusionStack(a) => fusion_stack(a),
        Command::StabilityGain(a) => stability_gain(a),
        Command::LenetPartition(a) => lenet_partition(a),
        Command::Regions2d(a) => regions_2d(a),
        Command::Certify { net } => {
            let report = certify(&load(&net)?)?;
            print_report(&report);
            Ok(if report.certified() { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::Rescale { net, out, frobenius } => rescale(&load(&net)?, &out, frobenius),
    }
}

fn load(path: &Path) -> anyhow::Result<Dag> {
    Ok(read_network(path)?)
}

fn validate(path: &Path) -> anyhow::Result<u8> {
    let report = read_network_builder(path)?.validate();
    println!("nodes {}, arcs {}", report.node_count, report.arc_count);
    if report.is_valid() {
        println!("valid");
        Ok(EXIT_OK)
    } else {
        println!("invalid: {}", report.summary());
        Ok(EXIT_NEGATIVE)
    }
}

fn levels(dag: &Dag) -> anyhow::Result<u8> {
    println!("{:>6} {:>10} {:>6} {:>6}", "node", "role", "level", "dim");
    for &v in dag.topo_order() {
        let role = dag.node(v)?.role.name();
        println!("{:>6} {:>10} {:>6} {:>6}", v.0, role, dag.level(v), dag.dim(v));
    }
    println!("max level {}", dag.max_level());
    Ok(EXIT_OK)
}

fn parse_row(row: &str) -> anyhow::Result<Vec<f64>> {
    row.split(',')
        .enumerate()
        .map(|(i, field)| {
            let field = field.trim();
            field
                .parse()
                .with_context(|| format!("input field {i} ({field:?}) is not a number"))
        })
        .collect()
}

fn eval(dag: &Dag, row: &str) -> anyhow::Result<u8> {
    let y = dag.eval(&parse_row(row)?)?;
    let fields: Vec<String> = y.iter().map(f64::to_string).collect();
    println!("{}", fields.join(","));
    Ok(EXIT_OK)
}

fn print_partition_rows(rows: &[PartitionRow]) {
    println!(
        "{:>5} {:>20} {:>8} {:>10} {:>14} {:>10}",
        "level", "channel", "regions", "max_points", "max_distance", "multi"
    );
    for r in rows {
        println!(
            "{:>5} {:>20} {:>8} {:>10} {:>14.6} {:>10}",
            r.layer_or_node,
            r.channel,
            r.stats.region_count,
            r.stats.max_points_per_region,
            r.stats.max_intra_region_distance,
            r.stats.multi_member_point_count
        );
    }
}

fn print_report(report: &StabilityReport) {
    println!("d = {}", report.d);
    println!("{:>5} {:>14} {:>14} {:>14}", "level", "sum", "frob_sum", "C");
    println!("{:>5} {:>14} {:>14} {:>14.6}", 0, "", "", report.certified_c[0]);
    for s in &report.level_sums {
        println!(
            "{:>5} {:>14.6} {:>14.6} {:>14.6}",
            s.level, s.sum, s.frob_sum, report.certified_c[s.level]
        );
    }
    for f in &report.residual_flags {
        let verdict = if f.satisfied() { "holds" } else { "fails" };
        println!(
            "residual at node {} (from {} via {}): |I + W'W| = {:.6}, {verdict}",
            f.add, f.input, f.hidden, f.norm
        );
    }
    match report.stable_from {
        Some(m) => println!("certified: level sums at most 1 from level {m}, bound {}", report.bound_at(report.max_level())),
        None => println!("not certified: the last level sum exceeds 1"),
    }
}

fn fusion_stack(a: FusionArgs) -> anyhow::Result<u8> {
    let d = ExperimentConfig::fusion_stack();
    let cfg = ExperimentConfig {
        dims: a.dims.unwrap_or(d.dims),
        layer_count: a.layers.unwrap_or(d.layer_count),
        sample_count: a.samples.unwrap_or(d.sample_count),
        seed: a.seed.unwrap_or(d.seed),
        pair_budget: a.pair_cap.unwrap_or(d.pair_budget),
        output_dir: a.out,
        ..d
    };
    let run = run_fusion_stack(&cfg)?;
    println!("{} samples, dims {}, {} layers", cfg.sample_count, cfg.dims, cfg.layer_count);
    print_partition_rows(&run.rows);
    Ok(EXIT_OK)
}

fn stability_gain(a: GainArgs) -> anyhow::Result<u8> {
    let d = ExperimentConfig::stability_gain();
    let cfg = ExperimentConfig {
        dims: a.dims.unwrap_or(d.dims),
        layer_count: a.layers.unwrap_or(d.layer_count),
        sample_count: a.samples.unwrap_or(d.sample_count),
        seed: a.seed.unwrap_or(d.seed),
        pair_budget: a.pairs.unwrap_or(d.pair_budget),
        output_dir: a.out,
        ..d
    };
    let run = run_stability_gain(&cfg)?;
    let (label, shown) = if a.scaled {
        ("rescaled", &run.rescaled)
    } else {
        ("unscaled", &run.unscaled)
    };
    println!("{label} network, {} sample pairs", shown.curve.pairs_used);
    print_report(&shown.report);
    println!("{:>5} {:>14}", "level", "max_gain");
    for p in &shown.curve.points {
        println!("{:>5} {:>14.6}", p.level, p.max_gain);
    }
    if a.scaled {
        for s in &run.scales {
            println!("level {} weights scaled by {:.6}", s.level, s.factor);
        }
    }
    Ok(EXIT_OK)
}

fn lenet_partition(a: LenetArgs) -> anyhow::Result<u8> {
    let d = ExperimentConfig::lenet_partition();
    let cfg = ExperimentConfig {
        sample_count: a.subset.unwrap_or(d.sample_count),
        seed: a.seed.unwrap_or(d.seed),
        output_dir: a.out,
        mnist_dir: if a.synthetic { None } else { a.mnist_dir },
        ..d
    };
    let run = run_lenet_partition(&cfg)?;
    match &run.source {
        DataSource::Mnist(dir) => println!("{} MNIST images from {}", run.sample_count, dir.display()),
        DataSource::Synthetic => println!("{} synthetic standard-normal images", run.sample_count),
    }
    print_partition_rows(&run.rows);
    Ok(EXIT_OK)
}

fn regions_2d(a: RegionsArgs) -> anyhow::Result<u8> {
    let d = ExperimentConfig::regions_2d();
    let run = run_regions_2d(&ExperimentConfig {
        grid_n: a.grid.unwrap_or(d.grid_n),
        output_dir: a.out,
        ..d
    })?;
    println!("{:>16} {:>14} {:>8}", "network", "probe", "regions");
    for r in &run.rows {
        println!("{:>16} {:>14} {:>8}", r.network, r.probe, r.region_count);
    }
    Ok(EXIT_OK)
}

fn rescale(dag: &Dag, out: &Path, frobenius: bool) -> anyhow::Result<u8> {
    let outcome = rescale_with_report(dag, frobenius)?;
    for s in &outcome.scaled {
        println!("level {} weights scaled by {:.6}", s.level, s.factor);
    }
    for level in &outcome.unresolved {
        log::warn!("level {level}: weight-free arcs alone exceed 1; left unscaled");
    }
    write_network(out, &outcome.dag)?;
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}
