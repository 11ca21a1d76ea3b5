use clap::{Parser, Subcommand};
use gradsteer::harness::checkpoint::load_checkpoint;
use gradsteer::harness::config::{ExperimentConfig, HarnessError};
use gradsteer::harness::recipes::{
    recipe_class_bias, recipe_curriculum, recipe_robust_sweep, rerender_run, DEFAULT_ALPHAS,
};
use gradsteer::harness::train::{evaluate, make_eval_set, train};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "gradsteer", about = "Gradient-reweighted source separation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the config's test set.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a named experiment recipe.
    Recipe {
        #[command(subcommand)]
        which: Recipe,
    },
    /// Re-render a run directory's CSVs into SVG reports.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Subcommand)]
enum Recipe {
    /// Robustness sweep over alpha (the sweep table and histogram).
    RobustSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated alpha values; defaults to 0,1/15,1/10,1/5.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Curriculum schedule vs uniform baseline convergence comparison.
    Curriculum {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Class-biased training on fixed class pairs.
    ClassBias {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_thread_pool() {
    if let Ok(threads) = std::env::var("GRADSTEER_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn run() -> Result<(), HarnessError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.run.seed = seed;
            }
            if let Some(out) = out {
                cfg.run.out_dir = out;
            }
            let artifacts = train(&cfg)?;
            let t = &artifacts.final_test;
            println!(
                "run complete: out_dir={} test mean SI-SDRi {:.3} dB (q05 {:.3}, q50 {:.3})",
                artifacts.out_dir.display(),
                t.mean,
                t.quantile(5.0),
                t.quantile(50.0)
            );
        }
        Command::Eval { checkpoint, config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ckpt = load_checkpoint::<f64>(&checkpoint)?;
            let spec = cfg.mix_spec();
            let bank = cfg.class_bank()?;
            let test_set = make_eval_set(&spec, &bank, cfg.eval.n_test, cfg.run.seed, true)?;
            let (report, _) = evaluate(&ckpt.model, &ckpt.params, &test_set, &cfg.eval.quantiles)?;
            println!("{}", gradsteer::harness::metrics::METRICS_CSV_HEADER);
            println!("{}", report.csv_row(ckpt.epoch, "test"));
            for (class, (mean, count)) in &report.per_class {
                println!("class {class}: mean SI-SDRi {mean:.3} dB over {count} sources");
            }
        }
        Command::Recipe { which } => match which {
            Recipe::RobustSweep { config, seeds, out, alphas } => {
                let cfg = ExperimentConfig::load(&config)?;
                let out = out.unwrap_or_else(|| cfg.run.out_dir.join("robust_sweep"));
                let seed_list: Vec<u64> = (0..seeds).collect();
                let alphas = alphas.unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
                let sweep = recipe_robust_sweep(&cfg, &alphas, &seed_list, &out)?;
                println!("sweep written to {}", sweep.out_dir.display());
            }
            Recipe::Curriculum { config, seeds, out } => {
                let cfg = ExperimentConfig::load(&config)?;
                let out = out.unwrap_or_else(|| cfg.run.out_dir.join("curriculum"));
                let seed_list: Vec<u64> = (0..seeds).collect();
                let cmp = recipe_curriculum(&cfg, &seed_list, &out)?;
                println!("comparison written to {}", cmp.out_dir.display());
            }
            Recipe::ClassBias { config, seeds, out } => {
                let cfg = ExperimentConfig::load(&config)?;
                let out = out.unwrap_or_else(|| cfg.run.out_dir.join("class_bias"));
                let seed_list: Vec<u64> = (0..seeds).collect();
                let settings = [(0.0, 0.0), (0.0, 3.0), (3.0, 0.0)];
                let table = recipe_class_bias(&cfg, &settings, &seed_list, &out)?;
                println!("table written to {}", table.out_dir.display());
            }
        },
        Command::Report { run } => {
            rerender_run(&run)?;
            println!("reports re-rendered in {}", run.display());
        }
    }
    Ok(())
}

fn main() {
    init_thread_pool();
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
