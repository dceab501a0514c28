use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use wavecast_core::checkpoint;
use wavecast_core::config::RunConfig;
use wavecast_core::ensemble::DeepEnsemble;
use wavecast_core::metrics::{MetricsReport, ReliabilityCurve};
use wavecast_core::pipeline::{self, Prepared};
use wavecast_core::series::{self, TimeSeries};
use wavecast_core::synthwave::{generate, preset};

use crate::{
    CalibrateArgs, Cli, Command, ConfigCommand, EvaluateArgs, PredictArgs, SweepArgs, SynthArgs,
    TrainArgs,
};

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl From<wavecast_core::Error> for CliError {
    fn from(e: wavecast_core::Error) -> Self {
        CliError {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError {
        code: "io",
        message: format!("{}: {e}", path.display()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| io_error(path, e))
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(wavecast_core::Error::from)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn write_curve(path: &Path, curve: &ReliabilityCurve) -> Result<()> {
    Ok(curve.write_csv(create(path)?)?)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

struct Context {
    config: Option<PathBuf>,
    jobs: Option<usize>,
}

impl Context {
    fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config whose architecture fields follow the checkpoint.
    fn config_for(&self, ens: &DeepEnsemble) -> Result<RunConfig> {
        let mut cfg = self.load_config()?;
        cfg.slice.window = ens.arch.window;
        cfg.slice.interval = ens.arch.interval;
        cfg.hidden = ens.arch.hidden;
        cfg.var_floor = ens.arch.var_floor;
        cfg.models = ens.len();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_series(path: &Path, cfg: &RunConfig) -> Result<TimeSeries> {
    Ok(series::read_csv(open(path)?, cfg.dt, cfg.input_unit)?)
}

fn load_checkpoint(path: &Path) -> Result<DeepEnsemble> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(checkpoint::from_bytes(&bytes)?)
}

fn save_checkpoint(path: &Path, ens: &DeepEnsemble) -> Result<()> {
    write_bytes(path, &checkpoint::to_bytes(ens)?)
}

/// Re-slices a series with the checkpoint's normalization and checks units.
fn prepare_for(ens: &DeepEnsemble, series: &TimeSeries, cfg: &RunConfig) -> Result<Prepared> {
    let prepared = pipeline::prepare(series, cfg, Some(ens.norm))?;
    if prepared.unit != ens.unit {
        return Err(wavecast_core::Error::UnitMismatch {
            expected: ens.unit,
            found: prepared.unit,
        }
        .into());
    }
    Ok(prepared)
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Context {
        config: cli.config,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Calibrate(a) => calibrate(&ctx, a),
        Command::Predict(a) => predict(a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Config(ConfigCommand::Init { out }) => config_init(out),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec = preset(a.preset, a.seed);
    if let Some(d) = a.duration {
        spec.duration = d;
    }
    if let Some(dt) = a.dt {
        spec.dt = dt;
    }
    if let Some(n) = a.noise_std {
        spec.noise_std = n;
    }
    let s = generate(&spec)?;
    series::write_csv(&s, create(&a.out)?)?;
    log::info!(
        "wrote {} samples ({:?}) to {}",
        s.len(),
        a.preset,
        a.out.display()
    );
    Ok(())
}

fn train(ctx: &Context, a: TrainArgs) -> Result<()> {
    let mut cfg = ctx.load_config()?;
    if let Some(m) = a.models {
        cfg.models = m;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    cfg.validate()?;
    let s = read_series(&a.data, &cfg)?;
    let prepared = pipeline::prepare(&s, &cfg, None)?;
    log::info!(
        "training {} member(s) on {} windows ({} validation)",
        cfg.models,
        prepared.train.len(),
        prepared.val.len()
    );
    let (ens, reports) = pipeline::fit(&prepared, &cfg)?;
    save_checkpoint(&a.out, &ens)?;
    for (i, r) in reports.iter().enumerate() {
        log::info!(
            "member {i}: best epoch {} of {}, val NLL {:.5}, {:.1}s",
            r.best_epoch,
            r.epochs_run(),
            r.val_nll[r.best_epoch - 1],
            r.wall_clock_secs
        );
    }
    if let Some(dir) = &a.report_dir {
        ensure_dir(dir)?;
        for (i, r) in reports.iter().enumerate() {
            r.write_csv(create(&dir.join(format!("member_{i}_curve.csv")))?)?;
        }
        let members: Vec<_> = reports
            .iter()
            .zip(&ens.seeds)
            .map(|(r, seed)| {
                json!({
                    "seed": seed,
                    "best_epoch": r.best_epoch,
                    "epochs_run": r.epochs_run(),
                    "best_val_nll": r.val_nll[r.best_epoch - 1],
                    "wall_clock_secs": r.wall_clock_secs,
                })
            })
            .collect();
        write_json(
            &dir.join("train_summary.json"),
            &json!({ "arch": ens.arch, "norm": ens.norm, "unit": ens.unit, "members": members }),
        )?;
    }
    Ok(())
}

fn write_index_table(path: &Path, report: &MetricsReport) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| CliError::from(wavecast_core::Error::from(e));
    wtr.write_record(["index", "rmse", "mape", "r2", "auce"])
        .map_err(csv_err)?;
    for ix in &report.per_index {
        wtr.write_record([
            ix.index.to_string(),
            ix.rmse.to_string(),
            ix.mape.map_or(String::new(), |m| m.to_string()),
            ix.r2.to_string(),
            ix.auce.to_string(),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| io_error(path, e))
}

fn evaluate(ctx: &Context, a: EvaluateArgs) -> Result<()> {
    let ens = load_checkpoint(&a.checkpoint)?;
    let cfg = ctx.config_for(&ens)?;
    let s = read_series(&a.data, &cfg)?;
    let prepared = prepare_for(&ens, &s, &cfg)?;
    let ev =
        pipeline::evaluate_dataset(&ens, prepared.split(a.split), &cfg.ci_levels, a.calibrated)?;
    ensure_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("metrics.json"), &ev.report)?;
    write_index_table(&a.out_dir.join("per_index.csv"), &ev.report)?;
    write_curve(&a.out_dir.join("reliability.csv"), &ev.curve)?;
    for (k, c) in &ev.index_curves {
        write_curve(&a.out_dir.join(format!("reliability_index_{k}.csv")), c)?;
    }
    println!(
        "{:?} split: {} samples, RMSE {:.5} {}, R² {:.4}, AUCE {:.4}",
        a.split,
        ev.report.samples,
        ev.report.rmse,
        ev.report.unit.as_str(),
        ev.report.r2,
        ev.report.auce
    );
    Ok(())
}

fn calibrate(ctx: &Context, a: CalibrateArgs) -> Result<()> {
    let mut ens = load_checkpoint(&a.checkpoint)?;
    let mut cfg = ctx.config_for(&ens)?;
    if let Some(m) = a.method {
        cfg.calibration = m;
    }
    let s = read_series(&a.data, &cfg)?;
    let prepared = prepare_for(&ens, &s, &cfg)?;
    let report = pipeline::calibrate(&mut ens, &prepared, &cfg)?;
    if report.degenerate {
        log::warn!("scaling factor {} hit the clamp range", report.s);
    }
    save_checkpoint(a.out.as_deref().unwrap_or(&a.checkpoint), &ens)?;
    ensure_dir(&a.report_dir)?;
    write_json(&a.report_dir.join("calibration.json"), &report)?;
    if let Some(c) = &report.curve_before {
        write_curve(&a.report_dir.join("reliability_before.csv"), c)?;
    }
    if let Some(c) = &report.curve_after {
        write_curve(&a.report_dir.join("reliability_after.csv"), c)?;
    }
    println!(
        "s = {:.6}; validation AUCE {:.4} -> {:.4}",
        report.s, report.auce_before, report.auce_after
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let ens = load_checkpoint(&a.checkpoint)?;
    let window = series::read_csv(open(&a.window)?, 1.0, ens.unit)?;
    if window.len() != ens.arch.window {
        return Err(wavecast_core::Error::Shape(format!(
            "window file has {} values, expected {}",
            window.len(),
            ens.arch.window
        ))
        .into());
    }
    let f = ens.predict(window.values(), a.calibrated)?;
    match &a.out {
        Some(path) => f.write_csv(create(path)?)?,
        None => f.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn sweep(ctx: &Context, a: SweepArgs) -> Result<()> {
    let cfg = ctx.load_config()?;
    let values = pipeline::parse_values(&a.values)?;
    let s = read_series(&a.data, &cfg)?;
    let rows = pipeline::sweep(&s, &cfg, a.param, &values)?;
    pipeline::write_sweep_csv(&rows, create(&a.out)?)?;
    Ok(())
}

fn config_init(out: Option<PathBuf>) -> Result<()> {
    let mut text = RunConfig::default().to_json()?;
    text.push('\n');
    match out {
        Some(path) => write_bytes(&path, text.as_bytes()),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| io_error(Path::new("<stdout>"), e)),
    }
}
