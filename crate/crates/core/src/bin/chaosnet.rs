use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chaosnet::data::DatasetId;
use chaosnet::experiment::{
    emit_svg_bars, grid_search, read_runs_csv, replicate_table, run_suite, write_runs_csv,
    DataStore, ExperimentConfig, ReplicateOptions, ResultTable, RunRow,
};
use chaosnet::maps::{self, MapKind, MapParams};
use chaosnet::{Error, Result};

#[derive(Parser)]
#[command(name = "chaosnet", version, about = "Chaotic feature transforms for small CNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration for each of its seeds.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// `--key=value` overrides applied after the config file.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run every cell of a standard result table (variants x samples per class x maps).
    Replicate {
        #[arg(long)]
        table: DatasetId,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Restrict to these samples-per-class values.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Stratified k-fold selection over a grid of settings.
    Gridsearch {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=v1|v2|...`; the grid is the product of all axes.
        #[arg(long = "grid", required = true)]
        axes: Vec<String>,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Diagnostics.
    Diag {
        #[command(subcommand)]
        what: Diag,
    },
    /// Grouped bar chart of a results CSV.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Diag {
    /// Lyapunov estimates and orbit statistics of every map.
    Maps {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = maps::DEFAULT_X0)]
        x0: f64,
    },
}

fn load_config(path: Option<&PathBuf>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    config.apply_overrides(overrides)?;
    config.validate()?;
    Ok(config)
}

fn train(config: ExperimentConfig, jobs: usize) -> Result<()> {
    let store = DataStore::for_config(&config);
    let work: Vec<_> = config.seeds.iter().map(|&s| (config.clone(), s)).collect();
    let mut rows = Vec::new();
    for result in run_suite(&work, jobs, &store) {
        let r = result?;
        println!(
            "{} {} k={} map={} seed={} macro_f1={:.4} accuracy={:.4} final_loss={:.4} ({:.1}s)",
            r.dataset,
            r.variant,
            r.samples_per_class,
            r.map,
            r.seed,
            r.macro_f1(),
            r.eval.accuracy(),
            r.epoch_losses.last().copied().unwrap_or(f64::NAN),
            r.wall_seconds
        );
        rows.push(RunRow::from(&r));
    }
    let mean = rows.iter().map(|r| r.macro_f1).sum::<f64>() / rows.len() as f64;
    println!("mean macro_f1 over {} seeds: {mean:.4}", rows.len());
    std::fs::create_dir_all(&config.out_dir)?;
    let path = config.out_dir.join(format!("train-{}.csv", config.hash()));
    write_runs_csv(&path, &rows)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn replicate(
    dataset: DatasetId,
    mut config: ExperimentConfig,
    seeds: Option<Vec<u64>>,
    jobs: usize,
    k: Option<Vec<usize>>,
) -> Result<()> {
    config.dataset = dataset;
    if let Some(s) = seeds {
        config.seeds = s;
    }
    let out = config.out_dir.join(dataset.as_str());
    let store = DataStore::for_config(&config);
    let mut opts = ReplicateOptions::new(config);
    opts.parallelism = jobs;
    opts.sample_sizes = k;
    let rep = replicate_table(dataset, &opts, &store, &out)?;
    println!("{}", rep.table.format_text());
    println!("{}", rep.gains.format_text(false));
    for p in [&rep.results_csv, &rep.means_csv, &rep.gains_csv, &rep.svg] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn grid_candidates(base: &ExperimentConfig, axes: &[String]) -> Result<Vec<ExperimentConfig>> {
    let mut candidates = vec![base.clone()];
    for axis in axes {
        let (key, values) = axis
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("grid axis `{axis}` is not key=v1|v2")))?;
        let mut next = Vec::new();
        for c in &candidates {
            for v in values.split('|') {
                let mut c = c.clone();
                c.set(key, v)?;
                next.push(c);
            }
        }
        candidates = next;
    }
    Ok(candidates)
}

fn gridsearch(base: ExperimentConfig, axes: &[String], folds: usize, seed: u64) -> Result<()> {
    let candidates = grid_candidates(&base, axes)?;
    let store = DataStore::for_config(&base);
    let result = grid_search(&candidates, folds, seed, &store)?;
    for (i, c) in result.candidates.iter().enumerate() {
        let marker = if i == result.best { "*" } else { " " };
        let folds: Vec<String> = c.fold_f1.iter().map(|f| format!("{f:.4}")).collect();
        println!(
            "{marker} [{i}] mean={:.4} folds=[{}] params={} {}",
            c.mean_f1,
            folds.join(", "),
            c.num_parameters,
            c.config.canonical().trim_end().replace('\n', " ")
        );
    }
    Ok(())
}

fn diag_maps(n: usize, x0: f64) -> Result<()> {
    let params = MapParams::default();
    let p = params.p();
    println!("{:<10} {:>10} {:>10} {:>8} {:>8} {:>8}", "map", "lyapunov", "expected", "min", "max", "mean");
    for kind in [MapKind::Logistic, MapKind::SkewTent, MapKind::Sine] {
        let lambda = maps::estimate_lyapunov(kind, x0, n, &params)?;
        let orbit = maps::iterate(kind, x0, n, &params)?;
        let (lo, hi) = orbit.iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        let mean = orbit.iter().sum::<f64>() / orbit.len() as f64;
        let expected = match kind {
            MapKind::Logistic if params.r() == 4.0 => format!("{:.4}", std::f64::consts::LN_2),
            MapKind::SkewTent => format!("{:.4}", -p * p.ln() - (1.0 - p) * (1.0 - p).ln()),
            _ => "-".into(),
        };
        println!("{:<10} {lambda:>10.4} {expected:>10} {lo:>8.4} {hi:>8.4} {mean:>8.4}", kind.as_str());
    }
    println!("orbit length {n}, x0 {x0}, r {}, p {p}", params.r());
    Ok(())
}

fn plot(input: &Path, out: &Path) -> Result<()> {
    let rows = read_runs_csv(input)?;
    let first = rows
        .first()
        .ok_or_else(|| Error::Data(format!("{} has no rows", input.display())))?;
    let dataset: DatasetId = first.dataset.parse()?;
    let table = ResultTable::from_runs(dataset, &rows)?;
    emit_svg_bars(&table, out)?;
    println!("{}", table.format_text());
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            jobs,
            overrides,
        } => train(load_config(config.as_ref(), &overrides)?, jobs),
        Command::Replicate {
            table,
            seeds,
            config,
            jobs,
            k,
            overrides,
        } => replicate(table, load_config(config.as_ref(), &overrides)?, seeds, jobs, k),
        Command::Gridsearch {
            config,
            axes,
            folds,
            seed,
            overrides,
        } => gridsearch(load_config(config.as_ref(), &overrides)?, &axes, folds, seed),
        Command::Diag {
            what: Diag::Maps { n, x0 },
        } => diag_maps(n, x0),
        Command::Plot { input, out } => plot(&input, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
