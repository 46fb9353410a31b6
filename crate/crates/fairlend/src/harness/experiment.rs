//! Multi-seed, multi-algorithm experiment orchestration.
//!
//! Each (algorithm, seed) pair trains in its own thread with its own RNG
//! stream and streams metric rows to its own CSV file as iterations
//! finish. After all runs complete, per-algorithm seed averages are
//! written alongside one chart per metric showing the per-seed traces and
//! the seed mean.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::harness::csv::{CsvStream, MetricRow, METRIC_COLUMNS};
use crate::harness::svg::{emit_svg, Series};
use crate::trainer::{train_with_observer, Algo, TrainConfig};

/// A complete experiment request.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub env: EnvConfig,
    pub train: TrainConfig,
    /// Algorithms to run side by side.
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

/// Everything an experiment wrote, by kind.
#[derive(Debug, Clone, Default)]
pub struct ArtifactManifest {
    pub run_csvs: Vec<PathBuf>,
    pub averaged_csvs: Vec<PathBuf>,
    pub charts: Vec<PathBuf>,
    pub policies: Vec<PathBuf>,
}

impl ArtifactManifest {
    pub fn all_paths(&self) -> Vec<&PathBuf> {
        self.run_csvs
            .iter()
            .chain(&self.averaged_csvs)
            .chain(&self.charts)
            .chain(&self.policies)
            .collect()
    }
}

fn algo_color(algo: Algo) -> &'static str {
    match algo {
        Algo::Ppo => "#1f77b4",
        Algo::PpoC => "#d62728",
        Algo::PpoCb => "#2ca02c",
    }
}

fn probe_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating output directory {}", dir.display()), e))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"probe")
        .map_err(|e| Error::io(format!("output directory {} not writable", dir.display()), e))?;
    std::fs::remove_file(&probe)
        .map_err(|e| Error::io(format!("cleaning probe file in {}", dir.display()), e))?;
    Ok(())
}

struct RunOutput {
    algo: Algo,
    seed: u64,
    rows: Vec<MetricRow>,
    csv_path: PathBuf,
    policy_path: PathBuf,
}

fn run_single(
    env: &EnvConfig,
    train_cfg: &TrainConfig,
    algo: Algo,
    seed: u64,
    out_dir: &Path,
) -> Result<RunOutput> {
    let csv_path = out_dir.join(format!("run_{}_seed{}.csv", algo.label(), seed));
    let policy_path = out_dir.join(format!("policy_{}_seed{}.txt", algo.label(), seed));
    let mut stream = CsvStream::create(&csv_path)?;
    let mut rows = Vec::with_capacity(train_cfg.iterations);
    let mut cfg = train_cfg.clone();
    cfg.algo = algo;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let history = train_with_observer(env, &cfg, &mut rng, |iteration, record| {
        let row = MetricRow::from_record(iteration, seed, algo, record);
        stream.append(&row)?;
        rows.push(row);
        Ok(())
    })?;
    std::fs::write(&policy_path, history.final_params.to_table_string())
        .map_err(|e| Error::io(format!("writing {}", policy_path.display()), e))?;
    Ok(RunOutput {
        algo,
        seed,
        rows,
        csv_path,
        policy_path,
    })
}

fn averaged_header() -> String {
    let mut columns = vec!["iteration".to_string(), "algo".to_string()];
    columns.extend(METRIC_COLUMNS.iter().map(|c| c.to_string()));
    columns.join(",")
}

/// Mean of each metric across seeds, per iteration. Columns match the
/// per-run schema minus the seed.
fn write_averaged(algo: Algo, runs: &[&RunOutput], path: &Path) -> Result<()> {
    let iterations = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    let mut out = averaged_header();
    out.push('\n');
    for it in 0..iterations {
        let mut line = format!("{},{}", it, algo.label());
        for column in METRIC_COLUMNS {
            let mean = runs.iter().map(|r| r.rows[it].metric(column)).sum::<f64>()
                / runs.len() as f64;
            line.push_str(&format!(",{mean}"));
        }
        out.push_str(&line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn chart_for_metric(
    column: &str,
    outputs: &[RunOutput],
    algos: &[Algo],
    path: &Path,
) -> Result<()> {
    let mut series = Vec::new();
    for &algo in algos {
        let runs: Vec<&RunOutput> = outputs.iter().filter(|r| r.algo == algo).collect();
        if runs.is_empty() {
            continue;
        }
        for run in &runs {
            series.push(Series {
                label: format!("{} seed {}", algo.label(), run.seed),
                color: algo_color(algo).to_string(),
                stroke_width: 1.0,
                opacity: 0.3,
                in_legend: false,
                points: run
                    .rows
                    .iter()
                    .map(|row| (row.iteration as f64, row.metric(column)))
                    .collect(),
            });
        }
        let iterations = runs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
        let mean_points: Vec<(f64, f64)> = (0..iterations)
            .map(|it| {
                let mean = runs.iter().map(|r| r.rows[it].metric(column)).sum::<f64>()
                    / runs.len() as f64;
                (it as f64, mean)
            })
            .collect();
        series.push(Series {
            label: algo.label().to_string(),
            color: algo_color(algo).to_string(),
            stroke_width: 2.5,
            opacity: 1.0,
            in_legend: true,
            points: mean_points,
        });
    }
    emit_svg(column, "iteration", column, &series, path)
}

/// Run every (algorithm, seed) pair of the spec, writing per-run CSVs and
/// policy checkpoints as runs progress, then seed-averaged CSVs and one
/// chart per metric. Config and output problems surface before any
/// training starts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ArtifactManifest> {
    spec.env.validate()?;
    spec.train.validate()?;
    if spec.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    if spec.algos.is_empty() {
        return Err(Error::Config("at least one algorithm is required".into()));
    }
    probe_writable(&spec.out_dir)?;

    // One thread per (algo, seed); each owns its RNG stream and files.
    let mut outputs: Vec<RunOutput> = Vec::new();
    let results: Vec<Result<RunOutput>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for &algo in &spec.algos {
            for &seed in &spec.seeds {
                let env = &spec.env;
                let train_cfg = &spec.train;
                let out_dir = spec.out_dir.clone();
                handles.push(scope.spawn(move || {
                    run_single(env, train_cfg, algo, seed, &out_dir)
                }));
            }
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });
    for result in results {
        outputs.push(result?);
    }

    let mut manifest = ArtifactManifest::default();
    for output in &outputs {
        manifest.run_csvs.push(output.csv_path.clone());
        manifest.policies.push(output.policy_path.clone());
    }

    for &algo in &spec.algos {
        let runs: Vec<&RunOutput> = outputs.iter().filter(|r| r.algo == algo).collect();
        let path = spec.out_dir.join(format!("avg_{}.csv", algo.label()));
        write_averaged(algo, &runs, &path)?;
        manifest.averaged_csvs.push(path);
    }

    for column in METRIC_COLUMNS {
        let path = spec.out_dir.join(format!("chart_{column}.svg"));
        chart_for_metric(column, &outputs, &spec.algos, &path)?;
        manifest.charts.push(path);
    }

    Ok(manifest)
}
