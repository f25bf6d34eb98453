use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use rfsom_core::dataset::{load_attributes, load_csv, LabelColumn, Normalization};
use rfsom_core::experiment::{
    predict, run_experiment, train_model, tree_sweep, visualize, ExperimentConfig, Method, DEFAULT_TREE_COUNTS,
};
use rfsom_core::som::SomHyperParams;
use rfsom_core::{Dataset64, ModelBundle64};

#[derive(Parser)]
#[command(name = "rfsom", version, about = "RF, SOM and RF-SOM experiments on tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validated accuracy of RF, SOM and RF-SOM.
    Experiment(Common),
    /// Accuracy of RF and RF-SOM across tree counts.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated tree counts.
        #[arg(long, value_delimiter = ',')]
        tree_counts: Option<Vec<usize>>,
    },
    /// SOM and RF-SOM coxcomb grids plus MDS and RF-MDS scatter plots.
    Visualize(Common),
    /// Trains one classifier on the full data set and writes a model bundle.
    Train {
        #[command(flatten)]
        common: Common,
        /// rf, som or rfsom.
        #[arg(long, default_value = "rfsom")]
        method: Method,
        /// Output path of the model bundle.
        #[arg(long)]
        model: PathBuf,
    },
    /// Predicts one class index per row.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Column to drop before predicting.
        #[arg(long)]
        label_col: Option<String>,
        /// The input has no label column.
        #[arg(long)]
        no_label: bool,
        #[arg(long)]
        no_header: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label column: `last`, a zero-based index or a header name.
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    no_header: bool,
    /// Map size as PxQ.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    trees: Option<usize>,
    /// Attributes tried per split.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Name used for output files; defaults to the data file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    name: Option<String>,
    data: Option<PathBuf>,
    label_col: Option<String>,
    header: Option<bool>,
    grid: Option<String>,
    trees: Option<usize>,
    m: Option<usize>,
    folds: Option<usize>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    normalize: Option<bool>,
    out: Option<PathBuf>,
    som: Option<SomHyperParams>,
    alpha_label: Option<f64>,
    tree_counts: Option<Vec<usize>>,
}

struct Resolved {
    data: Dataset64,
    config: ExperimentConfig,
    out: PathBuf,
    tree_counts: Option<Vec<usize>>,
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (p, q) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid `{s}` is not of the form PxQ"))?;
    Ok((
        p.trim().parse().with_context(|| format!("bad grid rows in `{s}`"))?,
        q.trim().parse().with_context(|| format!("bad grid columns in `{s}`"))?,
    ))
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Paths in a config file are relative to the file itself.
fn relative_to(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn resolve(flags: Common) -> Result<Resolved> {
    let file = match &flags.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    let base = flags.config.as_deref().and_then(Path::parent);

    let data_path = flags
        .data
        .or_else(|| file.data.map(|p| relative_to(base, p)))
        .context("no data file given (--data or `data` in the config)")?;
    let label: LabelColumn = flags
        .label_col
        .or(file.label_col)
        .unwrap_or_else(|| "last".into())
        .parse()?;
    let header = !flags.no_header && file.header.unwrap_or(true);
    let data: Dataset64 =
        load_csv(&data_path, &label, header).with_context(|| format!("loading {}", data_path.display()))?;

    let grid = flags.grid.or(file.grid).context("no grid size given (--grid PxQ)")?;
    let (rows, cols) = parse_grid(&grid)?;
    let name = flags.name.or(file.name).unwrap_or_else(|| {
        data_path
            .file_stem()
            .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned())
    });

    let mut cfg = ExperimentConfig::new(name, rows, cols);
    if let Some(som) = file.som {
        cfg.som = som;
    }
    if let Some(e) = flags.epochs {
        cfg.som.e_stop = e;
    }
    cfg.alpha_label = file.alpha_label;
    if let Some(t) = flags.trees.or(file.trees) {
        cfg.trees = t;
    }
    cfg.attributes_per_split = flags.m.or(file.m);
    if let Some(k) = flags.folds.or(file.folds) {
        cfg.folds = k;
    }
    let seeds = match (flags.seed, flags.seeds) {
        (Some(s), _) => Some(vec![s]),
        (None, Some(list)) => Some(list),
        (None, None) => file.seeds.or(file.seed.map(|s| vec![s])),
    };
    if let Some(s) = seeds {
        cfg.seeds = s;
    }
    if flags.no_normalize || file.normalize == Some(false) {
        cfg.normalization = Normalization::None;
    }
    cfg.validate()?;

    let out = flags
        .out
        .or_else(|| file.out.map(|p| relative_to(base, p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Resolved {
        data,
        config: cfg,
        out,
        tree_counts: file.tree_counts,
    })
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Experiment(flags) => {
            let r = resolve(flags)?;
            let report = run_experiment(&r.data, &r.config)?;
            let name = &r.config.dataset;
            let table = report.to_table();
            write(&r.out.join(format!("{name}_report.json")), &report.to_json()?)?;
            write(&r.out.join(format!("{name}_report.txt")), &table)?;
            let timings = serde_json::to_string_pretty(&report.timings)? + "\n";
            write(&r.out.join(format!("{name}_timings.json")), &timings)?;
            print!("{table}");
        }
        Command::Sweep { common, tree_counts } => {
            let r = resolve(common)?;
            let counts = tree_counts
                .or(r.tree_counts)
                .unwrap_or_else(|| DEFAULT_TREE_COUNTS.to_vec());
            let report = tree_sweep(&r.data, &r.config, &counts)?;
            let name = &r.config.dataset;
            let table = report.to_table();
            write(&r.out.join(format!("{name}_sweep.json")), &report.to_json()?)?;
            write(&r.out.join(format!("{name}_sweep.txt")), &table)?;
            write(&r.out.join(format!("{name}_sweep.svg")), &report.to_svg()?)?;
            print!("{table}");
        }
        Command::Visualize(flags) => {
            let r = resolve(flags)?;
            let v = visualize(&r.data, &r.config)?;
            for path in v.write_to(&r.out, &r.config.dataset)? {
                println!("{}", path.display());
            }
            println!(
                "negative eigenvalue mass: MDS {:.4}, RF-MDS {:.4}",
                v.mds_negative_mass, v.rfmds_negative_mass
            );
        }
        Command::Train { common, method, model } => {
            let r = resolve(common)?;
            let bundle = train_model(&r.data, method, &r.config)?;
            write(&model, &bundle.to_json()?)?;
        }
        Command::Predict {
            model,
            data,
            label_col,
            no_label,
            no_header,
            out,
        } => {
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let bundle = ModelBundle64::from_json(&text).with_context(|| format!("loading {}", model.display()))?;
            if no_label && label_col.is_some() {
                bail!("--label-col and --no-label are mutually exclusive");
            }
            let label = if no_label {
                None
            } else {
                Some(label_col.as_deref().unwrap_or("last").parse::<LabelColumn>()?)
            };
            let table = load_attributes::<f64>(&data, label.as_ref(), !no_header)
                .with_context(|| format!("loading {}", data.display()))?;
            let predictions = predict(&bundle, table.rows())?;
            let mut body = String::with_capacity(predictions.len() * 3);
            for p in predictions {
                body.push_str(&p.to_string());
                body.push('\n');
            }
            match out {
                Some(path) => write(&path, &body)?,
                None => io::stdout().lock().write_all(body.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
