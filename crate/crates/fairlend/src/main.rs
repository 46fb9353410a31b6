//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairlend::analysis::decompose_with_epsilon;
use fairlend::counterfactual::{
    adjusted_parity, baseline_gain, common_marginal, monotone_coupling,
};
use fairlend::env::Group;
use fairlend::error::{Error, Result};
use fairlend::harness::{resolve_config, run_experiment, ExperimentSpec};
use fairlend::policy::PolicyParams;
use fairlend::trainer::{Algo, Mode, TrainConfig};

#[derive(Parser)]
#[command(
    name = "fairlend",
    about = "Train and analyze fairness-constrained lending policies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one algorithm across seeds and write CSV/SVG artifacts.
    Train(TrainArgs),
    /// Print the effect decomposition of a policy on an environment.
    Decompose(DecomposeArgs),
    /// Train several algorithms side by side for comparison charts.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonEnvArgs {
    /// Path to a TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset: setting1, setting2 or setting3.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct CommonTrainArgs {
    /// Output directory for CSV and SVG artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated RNG seeds, one run per seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Estimation mode: oracle or sampled.
    #[arg(long)]
    mode: Option<String>,
    /// KL penalty weight.
    #[arg(long)]
    beta_kl: Option<f64>,
    /// Squared-parity penalty weight.
    #[arg(long)]
    beta_c: Option<f64>,
    /// Benefit-fairness penalty weight.
    #[arg(long)]
    beta_lambda: Option<f64>,
    /// Similarity radius of the benefit-fairness penalty.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Fold the baseline qualification gap into the constraint.
    #[arg(long)]
    adjusted: bool,
    /// Override the number of training iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Override the number of episodes collected per iteration.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    env: CommonEnvArgs,
    #[command(flatten)]
    train: CommonTrainArgs,
    /// Algorithm: ppo, ppo-c or ppo-cb.
    #[arg(long, default_value = "ppo-c")]
    algo: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    env: CommonEnvArgs,
    #[command(flatten)]
    train: CommonTrainArgs,
    /// Comma-separated algorithms to run side by side.
    #[arg(long, value_delimiter = ',', default_value = "ppo,ppo-c")]
    algo: Vec<String>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    env: CommonEnvArgs,
    /// Policy checkpoint to analyze; defaults to the uniform policy.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Similarity radius of the benefit-fairness gap.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also print baseline gains and the adjusted parity.
    #[arg(long)]
    adjusted: bool,
    /// Optional directory for coupling CSV dumps.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algo(text: &str) -> Result<Algo> {
    Algo::parse(text)
        .ok_or_else(|| Error::Config(format!("unknown algo {text:?}, expected ppo, ppo-c or ppo-cb")))
}

fn apply_train_overrides(cfg: &mut TrainConfig, args: &CommonTrainArgs) -> Result<()> {
    if let Some(mode) = &args.mode {
        cfg.mode = Mode::parse(mode)
            .ok_or_else(|| Error::Config(format!("unknown mode {mode:?}, expected oracle or sampled")))?;
    }
    if let Some(v) = args.beta_kl {
        cfg.beta_kl = v;
    }
    if let Some(v) = args.beta_c {
        cfg.beta_c = v;
    }
    if let Some(v) = args.beta_lambda {
        cfg.beta_lambda = v;
    }
    if let Some(v) = args.epsilon {
        cfg.epsilon = v;
    }
    if args.adjusted {
        cfg.adjusted_constraint = true;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.episodes {
        cfg.episodes_per_iter = v;
    }
    cfg.validate()
}

fn run_training(env_args: &CommonEnvArgs, train_args: &CommonTrainArgs, algos: Vec<Algo>) -> Result<()> {
    let (env, mut train_cfg) =
        resolve_config(env_args.config.as_deref(), env_args.preset.as_deref())?;
    apply_train_overrides(&mut train_cfg, train_args)?;
    let spec = ExperimentSpec {
        env,
        train: train_cfg,
        algos,
        seeds: train_args.seeds.clone(),
        out_dir: train_args.out.clone(),
    };
    let manifest = run_experiment(&spec)?;
    println!("wrote {} artifacts:", manifest.all_paths().len());
    for path in manifest.all_paths() {
        println!("  {}", path.display());
    }
    Ok(())
}

fn run_decompose(args: &DecomposeArgs) -> Result<()> {
    let (env, train_cfg) = resolve_config(args.env.config.as_deref(), args.env.preset.as_deref())?;
    let params = match &args.policy {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(format!("reading policy {}", path.display()), e))?;
            let params = PolicyParams::from_table_string(&text)?;
            if params.num_levels() != env.num_levels {
                return Err(Error::Config(format!(
                    "policy has {} levels but the environment has {}",
                    params.num_levels(),
                    env.num_levels
                )));
            }
            params
        }
        None => PolicyParams::zeros(env.num_levels),
    };
    let epsilon = args.epsilon.unwrap_or(train_cfg.epsilon);
    let report = decompose_with_epsilon(&params, &env, epsilon)?;
    println!("c_pi            {:>12.6}", report.c_pi);
    println!("dpe             {:>12.6}", report.dpe);
    println!("ipe             {:>12.6}", report.ipe);
    println!("spe             {:>12.6}", report.spe);
    println!("lambda          {:>12.6}", report.lambda_metric);
    println!("wasserstein     {:>12.6}", report.wasserstein_gap);
    println!("loan_rate_plus  {:>12.6}", report.loan_rate[0]);
    println!("loan_rate_minus {:>12.6}", report.loan_rate[1]);
    if args.adjusted {
        let g_plus = baseline_gain(Group::Plus, &env);
        let g_minus = baseline_gain(Group::Minus, &env);
        println!("baseline_gain_plus  {g_plus:>12.6}");
        println!("baseline_gain_minus {g_minus:>12.6}");
        println!("adjusted_c_pi   {:>12.6}", adjusted_parity(&params, &env));
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let marginal = common_marginal(&env);
        for s in Group::BOTH {
            let coupling = monotone_coupling(&marginal, env.init_dist(s));
            let path = dir.join(format!("coupling_{}.csv", s.label()));
            std::fs::write(&path, coupling.to_csv_string())
                .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let algo = parse_algo(&args.algo)?;
            run_training(&args.env, &args.train, vec![algo])
        }
        Command::Sweep(args) => {
            let algos = args
                .algo
                .iter()
                .map(|a| parse_algo(a))
                .collect::<Result<Vec<_>>>()?;
            run_training(&args.env, &args.train, algos)
        }
        Command::Decompose(args) => run_decompose(&args),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
