use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedfair::datasets::{load_adult, load_compas, DatasetKind};
use fedfair::harness::{
    emit_plot_data, run_baseline, run_experiment, ExperimentConfig, ExperimentResult, Layout,
};
use fedfair::metrics::render;
use fedfair::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fedfair",
    version,
    about = "Federated bias-mitigation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a raw Adult or Compas CSV to the canonical format.
    PrepareData {
        dataset: DatasetKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic raw table with the layout of the public file.
    SynthData {
        dataset: DatasetKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to the size of the public file.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Run a federated experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the centralized baseline of an experiment.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect result directories into one plot-data CSV.
    PlotData {
        #[arg(long)]
        layout: Layout,
        /// Result directories or `result.json` files.
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn print_summary(r: &ExperimentResult, dir: &Path) {
    let m = |k: &str| {
        let s = r.summary.get(k);
        format!(
            "{}±{}",
            render(s.and_then(|s| s.mean)),
            render(s.and_then(|s| s.std))
        )
    };
    println!(
        "{} [{}] spd {} eod {} aod {} di {} acc {} f1 {} -> {}",
        r.name,
        r.method_tag(),
        m("spd"),
        m("eod"),
        m("aod"),
        m("di"),
        m("accuracy"),
        m("f1"),
        dir.display()
    );
}

fn run_all(
    config: &Path,
    out: Option<PathBuf>,
    run: fn(&ExperimentConfig) -> Result<ExperimentResult>,
) -> Result<()> {
    let cfg = ExperimentConfig::from_path(config)?;
    let out = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set `out`".into()))?;
    let expanded = cfg.expand();
    let nested = expanded.len() > 1;
    for c in expanded {
        let dir = if nested {
            out.join(&c.name)
        } else {
            out.clone()
        };
        let result = run(&c)?;
        result.write_to(&dir)?;
        print_summary(&result, &dir);
    }
    Ok(())
}

fn read_result(path: &Path) -> Result<ExperimentResult> {
    if path.is_dir() {
        ExperimentResult::read_from(path)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrepareData {
            dataset,
            input,
            out,
        } => {
            let d = match dataset {
                DatasetKind::Adult => load_adult(&input)?,
                DatasetKind::Compas => load_compas(&input)?,
            };
            d.write_csv(create(&out)?)?;
            println!("{dataset}: {} samples -> {}", d.len(), out.display());
        }
        Command::SynthData {
            dataset,
            out,
            seed,
            rows,
        } => {
            let w = create(&out)?;
            match (dataset, rows) {
                (DatasetKind::Adult, Some(n)) => fedfair::surrogate::write_adult(w, n, seed)?,
                (DatasetKind::Compas, Some(n)) => fedfair::surrogate::write_compas(w, n, seed)?,
                (kind, None) => {
                    drop(w);
                    fedfair::surrogate::write_raw(kind, &out, seed)?
                }
            }
            println!("{dataset}: synthetic raw table -> {}", out.display());
        }
        Command::Run { config, out } => run_all(&config, out, run_experiment)?,
        Command::Baseline { config, out } => run_all(&config, out, run_baseline)?,
        Command::PlotData {
            layout,
            inputs,
            out,
        } => {
            let results = inputs
                .iter()
                .map(|p| read_result(p))
                .collect::<Result<Vec<_>>>()?;
            emit_plot_data(&results, layout, create(&out)?)?;
            println!("{} results -> {}", results.len(), out.display());
        }
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    let record = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{record}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", e.to_string().trim_end().to_string()),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
