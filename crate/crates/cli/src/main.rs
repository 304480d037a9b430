//! `windcast` command-line interface.

mod config;
mod error;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use windcast::data::{
    apply_norm, build_windows, fit_norm, format_timestamp, ingest_csv, synth_windfarm, write_csv_file, SynthParams,
    TurbineCurve, WindSeries,
};
use windcast::eval::{rmse, run_experiment1, run_experiment2, run_experiment3};
use windcast::models::{build_model_with_dims, save_model, train_stage1, Architecture};
use windcast::pipeline::{make_plan, run_backtest, write_manifest, write_records_csv};
use windcast::report::build_report;

use config::{load_config, Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "windcast", version, about = "Two-stage short-term wind power forecasting")]
struct Cli {
    /// Sectioned `key = value` config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one synthetic farm CSV per farm into --out.
    Synth,
    /// Parse and validate the --data files.
    IngestCheck,
    /// Train the --arch network on the first stage-1 window of the first data file.
    Train,
    /// Full two-stage backtest of the first data file with --blender.
    Backtest,
    /// Run experiment 1 (architectures), 2 (blenders) or 3 (TSF vs persistence).
    Exp {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
    },
    /// Render tables and plot CSVs from experiment output in --out.
    Report,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Self::Synth => "synth".into(),
            Self::IngestCheck => "ingest-check".into(),
            Self::Train => "train".into(),
            Self::Backtest => "backtest".into(),
            Self::Exp { which } => format!("exp {which}"),
            Self::Report => "report".into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("windcast: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    match &cli.command {
        Command::Synth => synth(&cfg)?,
        Command::IngestCheck => ingest_check(&cfg)?,
        Command::Train => train(&cfg)?,
        Command::Backtest => backtest(&cfg)?,
        Command::Exp { which } => experiment(*which, &cfg)?,
        Command::Report => report(&cfg)?,
    }
    write_run_manifest(&cfg, &cli.command.name())
}

fn write_run_manifest(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out)?;
    let text = format!(
        "# windcast {}\n# command: {command}\n# rerun: windcast --config manifest.toml {command}\n\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()
    );
    fs::write(cfg.out.join("manifest.toml"), text)?;
    Ok(())
}

fn synth_params(cfg: &RunConfig, farm: usize) -> SynthParams {
    SynthParams::farm(farm, cfg.seed.wrapping_mul(31).wrapping_add(farm as u64), cfg.days)
}

fn synth_all(cfg: &RunConfig) -> Result<Vec<WindSeries>, CliError> {
    if cfg.days == 0 || cfg.farms == 0 {
        return Err(CliError::Usage("days and farms must be positive".into()));
    }
    (1..=cfg.farms)
        .map(|k| synth_windfarm(&synth_params(cfg, k)).map_err(CliError::from))
        .collect()
}

fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let series = synth_all(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out.display())))?;
    for s in &series {
        let path = cfg.out.join(format!("{}.csv", s.farm_id));
        write_csv_file(s, &path)?;
        println!("{}: {} rows, capacity {} MW", path.display(), s.len(), s.capacity_mw);
    }
    Ok(())
}

fn capacity_for(path: &Path, cfg: &RunConfig) -> Result<f64, CliError> {
    if cfg.capacity_mw > 0.0 {
        return Ok(cfg.capacity_mw);
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.as_str() {
        "wf1" => Ok(TurbineCurve::wf1().capacity),
        "wf2" => Ok(TurbineCurve::wf2().capacity),
        "wf3" => Ok(TurbineCurve::wf3().capacity),
        _ => Err(CliError::Usage(format!(
            "{}: set capacity_mw (no preset for farm `{stem}`)",
            path.display()
        ))),
    }
}

fn load_all(cfg: &RunConfig) -> Result<Vec<WindSeries>, CliError> {
    if cfg.data.is_empty() {
        return Err(CliError::Usage("no data files; pass --data a.csv[,b.csv]".into()));
    }
    cfg.data
        .iter()
        .map(|p| {
            if !p.is_file() {
                return Err(CliError::Data(format!("{}: no such file", p.display())));
            }
            let cap = capacity_for(p, cfg)?;
            ingest_csv(p, cap).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn ingest_check(cfg: &RunConfig) -> Result<(), CliError> {
    for (p, s) in cfg.data.iter().zip(load_all(cfg)?) {
        let (lo, hi) = s
            .power
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!(
            "{}: ok, {} rows ({} days) {} .. {}, power {lo}..{hi} MW of {} MW",
            p.display(),
            s.len(),
            s.len() as f64 / 96.0,
            format_timestamp(&s.timestamps[0]),
            format_timestamp(s.timestamps.last().expect("non-empty")),
            s.capacity_mw
        );
    }
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let series = load_all(cfg)?.remove(0);
    let arch: Architecture = cfg.architecture()?;
    let plan = make_plan(series.len(), &cfg.plan())?;
    let cycle = plan.cycles().remove(0);
    let stats = fit_norm(&series, cycle.s_t1.clone())?;
    let norm = apply_norm(&series, &stats);
    let tr = build_windows(&norm, cycle.s_t1.clone(), cfg.horizon, cfg.history)?;
    let va = build_windows(&norm, cycle.s_v1.clone(), cfg.horizon, cfg.history)?;
    let model = build_model_with_dims(arch, cfg.seed, stats, cfg.dims())?;
    let trained = train_stage1(&model, &tr, &va, &cfg.train())?;
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("{}_{}.model", series.farm_id, arch.tag()));
    save_model(&trained, BufWriter::new(File::create(&path)?))?;
    println!(
        "{arch}: {} epochs, best validation RMSE {:.4} MW -> {}",
        trained.meta.epochs_run,
        trained.meta.best_val_rmse,
        path.display()
    );
    Ok(())
}

fn backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let series = load_all(cfg)?.remove(0);
    let method = cfg.method()?;
    let plan = make_plan(series.len(), &cfg.plan())?;
    let pcfg = cfg.pipeline(cfg.threads);
    let records = run_backtest(&series, &plan, method, cfg.seed, &pcfg)?;
    fs::create_dir_all(&cfg.out)?;
    write_records_csv(&records, &series, BufWriter::new(File::create(cfg.out.join("records.csv"))?))?;
    write_manifest(
        &records,
        &series,
        &plan,
        &pcfg,
        cfg.seed,
        BufWriter::new(File::create(cfg.out.join("backtest_manifest.txt"))?),
    )?;
    let y: Vec<f64> = records.iter().flat_map(|r| r.y_real.iter().copied()).collect();
    let b: Vec<f64> = records.iter().flat_map(|r| r.blend.iter().flatten().copied()).collect();
    println!(
        "{}: {} days, {} forecasts, {} RMSE {:.4} MW",
        series.farm_id,
        records.len(),
        y.len(),
        method.tag(),
        rmse(&y, &b).map_err(|e| CliError::Runtime(e.to_string()))?
    );
    for (k, a) in Architecture::ALL.iter().enumerate() {
        let p: Vec<f64> = records.iter().flat_map(|r| r.stage1[k].iter().copied()).collect();
        println!("  {a} RMSE {:.4} MW", rmse(&y, &p).map_err(|e| CliError::Runtime(e.to_string()))?);
    }
    Ok(())
}

fn experiment(which: u8, cfg: &RunConfig) -> Result<(), CliError> {
    let series = if cfg.data.is_empty() { synth_all(cfg)? } else { load_all(cfg)? };
    let ecfg = cfg.experiment();
    let table = match which {
        1 => {
            let out = run_experiment1(&series, &ecfg)?;
            out.write_dir(&cfg.out)?;
            out.accuracy
        }
        2 => {
            let out = run_experiment2(&series, &ecfg)?;
            out.write_dir(&cfg.out)?;
            for s in &out.scenarios {
                for r in &s.rows {
                    println!("scenario {} {}: RMSE above {} MW = {:.4}", s.farm, r.method, s.threshold, r.rmse_out);
                }
            }
            out.accuracy
        }
        _ => {
            let out = run_experiment3(&series, &ecfg)?;
            out.write_dir(&cfg.out)?;
            out.accuracy
        }
    };
    for r in &table.rows {
        println!("{} {} {}: RMSE {:.4} MAE {:.4}", r.farm, r.season, r.method, r.rmse, r.mae);
    }
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let bundle = build_report(&cfg.out)?;
    for name in bundle.files.keys() {
        println!("{}", cfg.out.join(name).display());
    }
    Ok(())
}
