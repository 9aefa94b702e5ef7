//! The `experiment` subcommand: run the Monte Carlo harness and write the
//! EDF, p-value, plot-data and manifest artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;
use serde::Serialize;

use rotatest::model::ModelSpec;
use rotatest::montecarlo::{run_experiment, CellOutcome, ExperimentConfig, ExperimentKind};
use rotatest::permtest::{pvalue_matrix_with, PValueConvention};
use rotatest::rng::RngFactory;

use crate::{config, svg};

#[derive(Args)]
pub struct ExperimentArgs {
    /// Which experiment: 1 fits each generator's own model, 2 fits the
    /// logistic model to every generator.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    experiment: Option<u8>,
    /// Comma-separated group sizes from {1,2,3}.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Total Bernoulli trials per replication.
    #[arg(long)]
    trials: Option<usize>,
    /// Replications per (generator, group size) cell.
    #[arg(long)]
    reps: Option<usize>,
    /// Covariate grid intervals between 0 and 2.
    #[arg(long)]
    grid: Option<usize>,
    /// Master seed (falls back to ROTATEST_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated generator models.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Randomizations per p-value.
    #[arg(long)]
    perms: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// key=value config file; flags win on conflict.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write static SVG plots of the EDF curves.
    #[arg(long)]
    svg: bool,
    /// P-value convention: raw count/N or (count+1)/(N+1).
    #[arg(long, value_parser = ["raw", "plus-one"])]
    pvalue_convention: Option<String>,
}

struct Resolved {
    experiment: u8,
    m_values: Vec<usize>,
    trials: usize,
    reps: usize,
    grid: usize,
    seed: u64,
    models: Vec<String>,
    out: PathBuf,
    perms: usize,
    jobs: Option<usize>,
    svg: bool,
    convention: PValueConvention,
}

fn resolve(args: ExperimentArgs) -> Result<Resolved, String> {
    let file = match &args.config {
        Some(path) => config::parse_file(path)?,
        None => Default::default(),
    };
    let resolved = Resolved {
        experiment: args
            .experiment
            .or(config::parse_value(&file, "experiment")?)
            .unwrap_or(1),
        m_values: args
            .m
            .or(config::parse_list(&file, "m")?)
            .unwrap_or_else(|| vec![1, 2, 3]),
        trials: args
            .trials
            .or(config::parse_value(&file, "trials")?)
            .unwrap_or(96),
        reps: args
            .reps
            .or(config::parse_value(&file, "reps")?)
            .unwrap_or(5000),
        grid: args
            .grid
            .or(config::parse_value(&file, "grid")?)
            .unwrap_or(100),
        seed: args
            .seed
            .or(config::parse_value(&file, "seed")?)
            .or_else(crate::env_seed)
            .unwrap_or(0),
        models: args
            .models
            .or(config::parse_list(&file, "models")?)
            .unwrap_or_else(|| {
                ["logistic", "exponential", "normal", "beta"]
                    .map(String::from)
                    .to_vec()
            }),
        out: args
            .out
            .or(config::parse_value(&file, "out")?)
            .unwrap_or_else(|| PathBuf::from("rotatest-out")),
        perms: args
            .perms
            .or(config::parse_value(&file, "perms")?)
            .unwrap_or(10_000),
        jobs: args.jobs.or(config::parse_value(&file, "jobs")?),
        svg: args.svg || config::parse_value(&file, "svg")?.unwrap_or(false),
        convention: match args
            .pvalue_convention
            .or_else(|| file.get("pvalue_convention").cloned())
            .as_deref()
        {
            None | Some("raw") => PValueConvention::Raw,
            Some("plus-one") => PValueConvention::PlusOne,
            Some(other) => return Err(format!("unknown p-value convention '{other}'")),
        },
    };
    if !(1..=2).contains(&resolved.experiment) {
        return Err(format!("experiment must be 1 or 2, got {}", resolved.experiment));
    }
    for name in &resolved.models {
        if ModelSpec::builtin(name).is_none() {
            return Err(format!(
                "unknown model '{name}' (built-ins: logistic, exponential, normal, beta)"
            ));
        }
    }
    if resolved.perms == 0 {
        return Err("perms must be positive".into());
    }
    Ok(resolved)
}

#[derive(Serialize)]
struct ConfigEcho {
    experiment: u8,
    m_values: Vec<usize>,
    trials: usize,
    replications: usize,
    grid_points: usize,
    master_seed: u64,
    models: Vec<String>,
    permutations: usize,
    pvalue_convention: String,
    jobs: Option<usize>,
    svg: bool,
    out_dir: String,
}

#[derive(Serialize)]
struct CellManifest {
    experiment: u8,
    generator: String,
    fitted: String,
    m: usize,
    path: String,
    replications: usize,
    resamples: usize,
    boundary_count: usize,
    degenerate_groups: u64,
}

#[derive(Serialize)]
struct RunManifest {
    tool_version: String,
    created_utc: String,
    finished_utc: String,
    status: String,
    error: Option<String>,
    config: ConfigEcho,
    cells: Vec<CellManifest>,
    pvalue_csv: Option<String>,
    pvalue_json: Option<String>,
    plot_files: Vec<String>,
    svg_files: Vec<String>,
    model_curves: Option<String>,
    total_resamples: usize,
    total_boundary: usize,
}

pub fn run(args: ExperimentArgs) -> ExitCode {
    let resolved = match resolve(args) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(jobs) = resolved.jobs {
        // Ignore the error when a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match execute(&resolved) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn config_echo(r: &Resolved) -> ConfigEcho {
    ConfigEcho {
        experiment: r.experiment,
        m_values: r.m_values.clone(),
        trials: r.trials,
        replications: r.reps,
        grid_points: r.grid,
        master_seed: r.seed,
        models: r.models.clone(),
        permutations: r.perms,
        pvalue_convention: match r.convention {
            PValueConvention::Raw => "raw".into(),
            PValueConvention::PlusOne => "plus-one".into(),
        },
        jobs: r.jobs,
        svg: r.svg,
        out_dir: r.out.display().to_string(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn execute(r: &Resolved) -> Result<ExitCode, String> {
    std::fs::create_dir_all(&r.out)
        .map_err(|e| format!("cannot create output directory {}: {e}", r.out.display()))?;
    let created = chrono::Utc::now().to_rfc3339();

    let models: Vec<ModelSpec> = r
        .models
        .iter()
        .map(|name| ModelSpec::builtin(name).expect("validated in resolve"))
        .collect();
    let kind = if r.experiment == 1 {
        ExperimentKind::CorrectFit
    } else {
        ExperimentKind::LogisticFit
    };
    let config = ExperimentConfig {
        total_trials: r.trials,
        m_values: r.m_values.clone(),
        replications: r.reps,
        grid_points: r.grid,
        master_seed: r.seed,
        experiment: kind,
    };

    let cells = match run_experiment(&config, &models) {
        Ok(cells) => cells,
        Err(e) => {
            let manifest = RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                created_utc: created,
                finished_utc: chrono::Utc::now().to_rfc3339(),
                status: "aborted".into(),
                error: Some(e.to_string()),
                config: config_echo(r),
                cells: Vec::new(),
                pvalue_csv: None,
                pvalue_json: None,
                plot_files: Vec::new(),
                svg_files: Vec::new(),
                model_curves: None,
                total_resamples: 0,
                total_boundary: 0,
            };
            write(
                &r.out.join("run_manifest.json"),
                &serde_json::to_string_pretty(&manifest).unwrap(),
            )?;
            eprintln!("error: {e}");
            return Ok(ExitCode::from(1));
        }
    };

    let mut manifest_cells = Vec::new();
    for cell in &cells {
        let s = &cell.sample;
        let name = format!(
            "edf_exp{}_m{}_{}_fitted_{}.csv",
            r.experiment, s.m, s.generator, s.fitted
        );
        let path = r.out.join(&name);
        write(&path, &edf_csv(r, cell))?;
        manifest_cells.push(CellManifest {
            experiment: r.experiment,
            generator: s.generator.clone(),
            fitted: s.fitted.clone(),
            m: s.m,
            path: name,
            replications: s.values.len(),
            resamples: cell.resamples,
            boundary_count: s.boundary_count,
            degenerate_groups: cell.degenerate_groups,
        });
    }

    let samples: Vec<_> = cells.iter().map(|c| c.sample.clone()).collect();
    let factory = RngFactory::new(r.seed);
    let matrix = pvalue_matrix_with(&samples, r.perms, &factory, r.convention);
    let pvalue_csv = format!("pvalues_exp{}.csv", r.experiment);
    let pvalue_json = format!("pvalues_exp{}.json", r.experiment);
    write(&r.out.join(&pvalue_csv), &matrix.to_csv())?;
    write(&r.out.join(&pvalue_json), &matrix.to_json())?;

    let mut plot_files = Vec::new();
    let mut svg_files = Vec::new();
    for &m in &r.m_values {
        let series: Vec<_> = samples.iter().filter(|s| s.m == m).collect();
        let plot_name = format!("plot_exp{}_m{m}.tsv", r.experiment);
        write(&r.out.join(&plot_name), &plot_tsv(&series))?;
        plot_files.push(plot_name);
        if r.svg {
            let svg_name = format!("edf_exp{}_m{m}.svg", r.experiment);
            let title = format!(
                "Experiment {}: EDFs of KS statistics, m = {m}",
                r.experiment
            );
            write(&r.out.join(&svg_name), &svg::edf_curves(&series, &title))?;
            svg_files.push(svg_name);
        }
    }

    let curves_name = "model_curves.tsv".to_string();
    write(&r.out.join(&curves_name), &model_curves_tsv(&models)?)?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        created_utc: created,
        finished_utc: chrono::Utc::now().to_rfc3339(),
        status: "ok".into(),
        error: None,
        config: config_echo(r),
        total_resamples: cells.iter().map(|c| c.resamples).sum(),
        total_boundary: cells.iter().map(|c| c.sample.boundary_count).sum(),
        cells: manifest_cells,
        pvalue_csv: Some(pvalue_csv),
        pvalue_json: Some(pvalue_json),
        plot_files,
        svg_files,
        model_curves: Some(curves_name),
    };
    write(
        &r.out.join("run_manifest.json"),
        &serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    println!(
        "experiment {} done: {} cells, outputs in {}",
        r.experiment,
        cells.len(),
        r.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn edf_csv(r: &Resolved, cell: &CellOutcome) -> String {
    let s = &cell.sample;
    let mut out = String::new();
    out.push_str(&format!("# tool: rotatest {}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("# experiment: {}\n", r.experiment));
    out.push_str(&format!("# generator: {}\n", s.generator));
    out.push_str(&format!("# fitted: {}\n", s.fitted));
    out.push_str(&format!("# m: {}\n", s.m));
    out.push_str(&format!("# trials: {}\n", r.trials));
    out.push_str(&format!("# replications: {}\n", s.values.len()));
    out.push_str(&format!("# grid_points: {}\n", r.grid));
    out.push_str(&format!("# master_seed: {}\n", r.seed));
    out.push_str(&format!("# boundary_count: {}\n", s.boundary_count));
    out.push_str(&format!("# resamples: {}\n", cell.resamples));
    out.push_str(&format!("# degenerate_groups: {}\n", cell.degenerate_groups));
    out.push_str("ks\n");
    for v in &s.values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Long-format plot data: one row per replication per model series, the
/// sorted KS value against its cumulative probability.
fn plot_tsv(series: &[&rotatest::montecarlo::EDFSample]) -> String {
    let mut out = String::from("model\tks\tcum_prob\n");
    for sample in series {
        let n = sample.values.len();
        for (i, v) in sample.values.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{v}\t{}\n",
                sample.generator,
                (i + 1) as f64 / n as f64
            ));
        }
    }
    out
}

/// Failure probabilities of every model at its true parameter over the
/// covariate grid (the models figure).
fn model_curves_tsv(models: &[ModelSpec]) -> Result<String, String> {
    let mut out = String::from("x");
    for model in models {
        out.push('\t');
        out.push_str(model.name());
    }
    out.push('\n');
    for k in 0..=100 {
        let x = 2.0 * k as f64 / 100.0;
        out.push_str(&format!("{x}"));
        for model in models {
            let (p, _) = model
                .evaluate(x, model.theta0())
                .map_err(|e| e.to_string())?;
            out.push_str(&format!("\t{p}"));
        }
        out.push('\n');
    }
    Ok(out)
}
