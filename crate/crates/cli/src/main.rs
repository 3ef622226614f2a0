use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dghomog::mcmc::KernelVariant;
use dghomog::oracle::{self, orbit_bfs, symmetry_report, tv_from_uniform};
use dghomog::panel::{discretize_capacity, DEFAULT_BIN_WIDTH, DEFAULT_NUM_BINS};
use dghomog::simgen::{simulate_panel, SimConfig, DEFAULT_BURN_IN};
use dghomog::study::{render_table, results_csv, run_study, StudyCell, StudySpec};
use dghomog::{load_panel, run_test, write_panel, ChainConfig, Statistic, SupportSpec};

const SEED_ENV: &str = "DGHOMOG_SEED";

#[derive(Parser)]
#[command(name = "dghomog", version, about = "Homogeneity test for dynamic discrete game panels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a panel CSV for homogeneity and print the result as JSON.
    Run(RunArgs),
    /// Simulate an entry-game panel and write it as CSV.
    Simulate(SimulateArgs),
    /// Rejection rates over simulated panels.
    Study(StudyArgs),
    /// Brute-force checks of the chain on small panels.
    Verify(VerifyArgs),
    /// Map capacities (one per line) to bin ids.
    Discretize(DiscretizeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "tau1")]
    stat: Statistic,
    #[arg(long = "K", default_value_t = 10_000)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Overridden by DGHOMOG_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// State alphabet size; inferred from the data when omitted.
    #[arg(long, requires = "actions")]
    states: Option<u32>,
    #[arg(long, requires = "states")]
    actions: Option<u32>,
    /// Also write the JSON result here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long = "T")]
    t: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
}

#[derive(Args)]
struct StudyArgs {
    /// JSON study spec; replaces the inline flags.
    #[arg(long, conflicts_with_all = ["n", "t", "lambda"])]
    spec: Option<PathBuf>,
    #[arg(long, required_unless_present = "spec")]
    n: Option<usize>,
    #[arg(long = "T", required_unless_present = "spec")]
    t: Option<usize>,
    #[arg(long, required_unless_present = "spec")]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    #[arg(long = "K", default_value_t = 2000)]
    k: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', default_value = "tau1,tau2")]
    stats: Vec<Statistic>,
    /// Overridden by DGHOMOG_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Check one preset; all presets when omitted.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value_t = 200_000)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.02)]
    max_tv: f64,
    /// Check a deliberately broken kernel; the run should fail.
    #[arg(long)]
    inject_fault: bool,
}

#[derive(Args)]
struct DiscretizeArgs {
    /// One capacity per line; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    #[arg(long, default_value_t = DEFAULT_NUM_BINS)]
    bins: u32,
}

/// Bad input exits with 2, anything else with 1.
enum Failure {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

trait InputContext<T> {
    fn input(self, what: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self, what: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(what.to_string())))
    }
}

fn seed_override(flag: u64) -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Input(anyhow::anyhow!("{SEED_ENV}=`{v}` is not a u64"))),
        Err(_) => Ok(flag),
    }
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let support = match (args.states, args.actions) {
        (Some(s), Some(a)) => Some(SupportSpec::new(s, a).input("invalid support")?),
        _ => None,
    };
    let file = File::open(&args.input)
        .input(&format!("cannot open {}", args.input.display()))?;
    let panel = load_panel(BufReader::new(file), support)
        .input(&format!("cannot read panel {}", args.input.display()))?;
    let config = ChainConfig::new(args.k, seed_override(args.seed)?).input("invalid chain length")?;
    let result = match run_test(&panel, &config, args.stat, args.alpha) {
        Err(e @ dghomog::testing::TestError::InvalidAlpha(_)) => return Err(Failure::Input(e.into())),
        other => other.context("test failed")?,
    };
    let json = serde_json::to_string_pretty(&result).context("serialize result")?;
    println!("{json}");
    if let Some(path) = args.output {
        std::fs::write(&path, format!("{json}\n"))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let config = SimConfig {
        burn_in: args.burn_in,
        ..SimConfig::new(args.n, args.t, args.lambda, seed_override(args.seed)?)
            .input("invalid simulation settings")?
    };
    let panel = simulate_panel(&config).input("invalid simulation settings")?;
    let file = File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    write_panel(&panel, io::BufWriter::new(file)).context("write panel")?;
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<(), Failure> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .input(&format!("cannot read {}", path.display()))?;
            serde_json::from_str::<StudySpec>(&text).input("invalid study spec")?
        }
        None => StudySpec {
            cells: vec![StudyCell {
                n: args.n.expect("required by clap"),
                t: args.t.expect("required by clap"),
                lambda: args.lambda.expect("required by clap"),
            }],
            replications: args.replications,
            k: args.k,
            alpha: args.alpha,
            stats: args.stats.clone(),
            master_seed: args.seed,
            burn_in: args.burn_in,
        },
    };
    if let Ok(v) = std::env::var(SEED_ENV) {
        spec.master_seed = v
            .trim()
            .parse()
            .map_err(|_| Failure::Input(anyhow::anyhow!("{SEED_ENV}=`{v}` is not a u64")))?;
    }
    for cell in &spec.cells {
        SimConfig::new(cell.n, cell.t, cell.lambda, 0).input("invalid study cell")?;
    }
    if !(spec.alpha > 0.0 && spec.alpha < 1.0) {
        return Err(Failure::Input(anyhow::anyhow!("alpha must lie in (0, 1)")));
    }
    if args.jobs == Some(0) {
        return Err(Failure::Input(anyhow::anyhow!("--jobs must be at least 1")));
    }
    let results = match run_study(&spec, args.jobs) {
        Err(e @ dghomog::study::StudyError::Empty) => return Err(Failure::Input(e.into())),
        other => other.context("study failed")?,
    };
    print!("{}", results_csv(&results));
    eprint!("{}", render_table(&results));
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let names: Vec<String> = match args.preset {
        Some(name) => vec![name],
        None => oracle::PRESETS.iter().map(|s| s.to_string()).collect(),
    };
    let variant = if args.inject_fault {
        KernelVariant::ActionSetOffByOne
    } else {
        KernelVariant::Exact
    };
    let mut failed = false;
    for name in names {
        let x = oracle::preset(&name).input("unknown preset")?;
        let orbit = orbit_bfs(&x).context("orbit enumeration")?;
        let report = symmetry_report(&x, variant).context("kernel check")?;
        let tv = tv_from_uniform(&orbit, &x, args.steps, args.seed).context("chain run")?;
        let ok = report.passed() && tv < args.max_tv;
        failed |= !ok;
        println!(
            "{name}: orbit {}, symmetric {}, row sums ok {}, TV {tv:.4} -> {}",
            orbit.len(),
            report.asymmetric_pairs == 0,
            report.bad_rows == 0,
            if ok { "ok" } else { "FAILED" }
        );
    }
    if failed {
        return Err(Failure::Internal(anyhow::anyhow!("oracle checks failed")));
    }
    Ok(())
}

fn cmd_discretize(args: DiscretizeArgs) -> Result<(), Failure> {
    let reader: Box<dyn BufRead> = match &args.input {
        Some(path) => Box::new(BufReader::new(
            File::open(path).input(&format!("cannot open {}", path.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let mut values = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line.context("read input")?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(
            line.parse::<f64>()
                .input(&format!("line {}: `{line}` is not a number", k + 1))?,
        );
    }
    let bins = discretize_capacity(&values, args.bin_width, args.bins).input("cannot bin values")?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    for b in bins {
        writeln!(out, "{b}").context("write output")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Study(a) => cmd_study(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Discretize(a) => cmd_discretize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
