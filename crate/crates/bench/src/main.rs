use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdl_bench::loss_curve::{loss_curve, write_loss_curve};
use mdl_bench::{
    run_experiment, run_method, summarize, write_rows, write_summary, BenchError, Config,
    ExperimentSpec, FitSettings, Kind, Method, Result,
};
use mdl_svm::data::{load_shard, save_shard, shard_file_name};
use mdl_svm::rff::sample_rff;
use mdl_svm::{partition, simgen, Dataset, PartitionPolicy, RngState, SimModel, Vector};

/// Stream tag for the random feature map, kept apart from the data stream.
const RFF_STREAM: u64 = 0x5246_4600;

#[derive(Parser)]
#[command(
    name = "mdl-bench",
    version,
    about = "Distributed SVM estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw simulation data and write it as shard files.
    Simulate(SimulateArgs),
    /// Fit one method on a shard directory.
    Fit(FitArgs),
    /// Run a Monte Carlo experiment and write result rows as CSV.
    Experiment(ExperimentArgs),
    /// Sample the smoothed hinge against the hinge.
    LossCurve(LossCurveArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    /// Number of shard files.
    #[arg(long, default_value_t = 1)]
    shards: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Map features through random Fourier features: `d,sigma`.
    #[arg(long, value_parser = parse_rff)]
    rff: Option<(usize, f64)>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Directory of shard files.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "mdl", value_parser = parse_method)]
    method: Method,
    /// Rounds; defaults to the number the bandwidth schedule needs.
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    inner_iters: u32,
    /// Direction of the interval: `v0`, `e<j>`, or comma-separated entries.
    #[arg(long, default_value = "v0")]
    ci: String,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    kind: String,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Override any config key, e.g. `--set n=2000,10000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Result CSV; the summary goes to `<out>.summary.csv`. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LossCurveArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    h: Vec<f64>,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    lo: f64,
    #[arg(long, default_value_t = 3.0)]
    hi: f64,
    #[arg(long, default_value_t = 601)]
    points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rff(s: &str) -> std::result::Result<(usize, f64), String> {
    let (d, sigma) = s.split_once(',').ok_or("expected `d,sigma`")?;
    let d = d
        .trim()
        .parse()
        .map_err(|e| format!("feature count: {e}"))?;
    let sigma = sigma
        .trim()
        .parse()
        .map_err(|e| format!("kernel scale: {e}"))?;
    Ok((d, sigma))
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse()
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let state = RngState::new(args.seed, 0);
    let mut data = simgen::gen(&SimModel::new(args.p), args.n, &mut state.start())?;
    if let Some((d, sigma)) = args.rff {
        let map = sample_rff(args.p, d, sigma, &mut state.child(RFF_STREAM).start())?;
        data = map.apply_dataset(&data)?;
    }
    fs::create_dir_all(&args.out)?;
    let shards = partition(&data, args.shards, &PartitionPolicy::RemainderLast)?;
    for shard in &shards {
        save_shard(shard, &args.out.join(shard_file_name(shard.id)))?;
    }
    println!(
        "wrote {} shards of {} rows (p = {}) to {}",
        shards.len(),
        data.n(),
        data.p(),
        args.out.display()
    );
    Ok(())
}

fn direction(spec: &str, p: usize) -> Result<Vector> {
    let bad = |detail: String| BenchError::BadValue {
        key: "ci".into(),
        detail,
    };
    if spec == "v0" {
        return Ok(simgen::v0(p));
    }
    if let Some(j) = spec.strip_prefix('e') {
        let j: usize = j.parse().map_err(|e| bad(format!("`{spec}`: {e}")))?;
        if j > p {
            return Err(bad(format!("coordinate {j} out of range 0..={p}")));
        }
        let mut v = Vector::zeros(p + 1);
        v[j] = 1.0;
        return Ok(v);
    }
    let entries: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse().map_err(|e| bad(format!("`{s}`: {e}"))))
        .collect::<Result<_>>()?;
    if entries.len() != p + 1 {
        return Err(bad(format!(
            "need {} entries, got {}",
            p + 1,
            entries.len()
        )));
    }
    Ok(Vector::from_vec(entries))
}

fn fit(args: &FitArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.data)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mdls"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(BenchError::InvalidSpec(format!(
            "no shard files in {}",
            args.data.display()
        )));
    }
    let shards = paths
        .iter()
        .map(|p| load_shard(p))
        .collect::<mdl_svm::Result<Vec<_>>>()?;
    let p = shards[0].p();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    for s in &shards {
        labels.extend_from_slice(s.labels());
        features.extend_from_slice(s.features());
    }
    let pooled = Dataset::new(p, labels, features)?;
    let sizes: Vec<usize> = shards.iter().map(|s| s.len()).collect();
    let q = match args.q {
        Some(q) => q,
        None => {
            let m = sizes[mdl_svm::mdl::initializer_shard(&sizes)];
            mdl_svm::required_rounds(pooled.n(), m, p)?
        }
    };
    let v = direction(&args.ci, p)?;
    let settings = FitSettings {
        q,
        c0: args.c0,
        lambda: args.lambda,
        inner_iters: args.inner_iters,
        level: args.level,
    };
    let out = run_method(args.method, &shards, &pooled, &v, &settings)?;
    let coefs: Vec<String> = out.estimate.iter().map(|b| format!("{b:.6}")).collect();
    println!("method    {}", args.method);
    println!("shards    {} (n = {}, p = {})", shards.len(), pooled.n(), p);
    println!("rounds    {q}");
    println!("estimate  {}", coefs.join(" "));
    println!("center    {:.6}", out.ci.center);
    println!("se        {:.6}", out.se);
    println!("half      {:.6}", out.ci.half_width);
    println!(
        "interval  [{:.6}, {:.6}] at level {}",
        out.ci.lo(),
        out.ci.hi(),
        out.ci.level
    );
    println!("messages  {} ({} bytes)", out.msgs, out.bytes);
    Ok(())
}

/// Returns whether any run failed.
fn experiment(args: &ExperimentArgs) -> Result<bool> {
    let kind: Kind = args
        .kind
        .parse()
        .map_err(|e: String| BenchError::InvalidSpec(e))?;
    let mut cfg = match &args.config {
        Some(path) => Config::parse(&fs::read_to_string(path)?)?,
        None => Config::default(),
    };
    for a in &args.overrides {
        cfg.push_assignment(a)?;
    }
    if let Some(seed) = args.seed {
        cfg.set("seed", seed);
    }
    if let Some(reps) = args.reps {
        cfg.set("reps", reps);
    }
    let mut spec = ExperimentSpec::defaults(kind);
    spec.apply(&cfg)?;
    spec.validate()?;

    if kind == Kind::LossCurve {
        write_loss_curve(
            &loss_curve(&spec.h, -3.0, 3.0, 601)?,
            open_out(args.out.as_deref())?,
        )?;
        return Ok(false);
    }
    let rows = run_experiment(&spec)?;
    write_rows(&rows, open_out(args.out.as_deref())?)?;
    let summary = summarize(&rows, spec.level)?;
    match &args.out {
        Some(path) => {
            let mut name = path.as_os_str().to_owned();
            name.push(".summary.csv");
            write_summary(&summary, BufWriter::new(File::create(PathBuf::from(name))?))?;
        }
        None => {
            println!();
            write_summary(&summary, io::stdout().lock())?;
        }
    }
    let failed = rows.iter().filter(|r| r.is_error()).count();
    if failed > 0 {
        eprintln!(
            "{failed} of {} runs failed; see the error column",
            rows.len()
        );
    }
    Ok(failed > 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a).map(|_| false),
        Command::Fit(a) => fit(a).map(|_| false),
        Command::Experiment(a) => experiment(a),
        Command::LossCurve(a) => loss_curve(&a.h, a.lo, a.hi, a.points)
            .and_then(|pts| write_loss_curve(&pts, open_out(a.out.as_deref())?))
            .map(|_| false),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
