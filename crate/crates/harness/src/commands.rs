//! One function per CLI subcommand. Each writes its files under `out` and
//! returns a compact JSON summary for stdout.

use std::path::{Path, PathBuf};

use riloss_core::bounds::convergence_study;
use riloss_core::data::DatasetStats;
use riloss_core::forecaster::checkpoint;
use riloss_core::loss::{crossterm_mc, projection_matrix, tradeoff_curve, LossKind, TradeoffConfig};
use riloss_core::stats::{mean, spearman};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{check_snr, RunConfig};
use crate::error::{at, HarnessError, Result};
use crate::friedman::{friedman, MetricTable};
use crate::output::{ensure_dir, write_csv, write_csv_records, write_json};
use crate::pipeline::{prepare, run_once, seeds, RunTiming, SeedRun, Setting};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub snr: Option<Vec<f64>>,
    pub repeats: Option<usize>,
    pub table: Option<PathBuf>,
    pub acknowledge_datasets: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Ablation,
    Robustness,
    Friedman,
    Tradeoff,
    Crossterm,
    Bounds,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Ablation => "ablation",
            Command::Robustness => "robustness",
            Command::Friedman => "friedman",
            Command::Tradeoff => "tradeoff",
            Command::Crossterm => "crossterm",
            Command::Bounds => "bounds",
            Command::Sweep => "sweep",
        }
    }
}

pub fn apply_overrides(cfg: &mut RunConfig, cmd: Command, ov: &Overrides) -> Result<()> {
    if let Some(seed) = ov.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &ov.out {
        cfg.run.out = out.clone();
    }
    if let Some(r) = ov.repeats {
        if r == 0 {
            return Err(HarnessError::config("--repeats", "must be at least 1"));
        }
        cfg.run.repeats = r;
    }
    if let Some(t) = &ov.table {
        cfg.friedman.table = Some(t.clone());
    }
    if let Some(snr) = &ov.snr {
        if snr.is_empty() {
            return Err(HarnessError::config("--snr", "list is empty"));
        }
        for v in snr {
            check_snr("--snr", *v)?;
        }
        match cmd {
            Command::Robustness => cfg.robustness.snr_db = snr.clone(),
            Command::Sweep => cfg.sweep.snr_db = snr.clone(),
            Command::Train | Command::Ablation => match snr.as_slice() {
                [one] => cfg.data.snr_db = Some(*one),
                _ => {
                    return Err(HarnessError::config(
                        "--snr",
                        format!("`{}` takes a single value", cmd.name()),
                    ))
                }
            },
            _ => return Err(HarnessError::config("--snr", format!("not used by `{}`", cmd.name()))),
        }
    }
    Ok(())
}

pub fn run(cmd: Command, cfg: &RunConfig, ack: bool) -> Result<Value> {
    let out = cfg.run.out.clone();
    ensure_dir(&out)?;
    match cmd {
        Command::Train => cmd_train(cfg, &out, ack),
        Command::Ablation => cmd_ablation(cfg, &out, ack),
        Command::Robustness => cmd_robustness(cfg, &out, ack),
        Command::Sweep => cmd_sweep(cfg, &out, ack),
        Command::Friedman => cmd_friedman(cfg, &out),
        Command::Tradeoff => cmd_tradeoff(cfg, &out),
        Command::Crossterm => cmd_crossterm(cfg, &out),
        Command::Bounds => cmd_bounds(cfg, &out),
    }
}

/// Result of `train`. Deterministic given config and seed; timings live in
/// `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub loss_kind: LossKind,
    pub lookback: usize,
    pub horizon: usize,
    pub snr_db: Option<f64>,
    /// Means over `runs`.
    pub test_mse: f64,
    pub test_mae: f64,
    pub runs: Vec<SeedRun>,
    pub dataset: DatasetStats,
    pub config: String,
}

#[derive(Debug, Serialize)]
struct HistoryRow {
    seed: u64,
    epoch: usize,
    train_loss: f64,
    train_mse: f64,
    hsic_value: f64,
    val_loss: Option<f64>,
    val_mse: Option<f64>,
}

fn history_rows(runs: &[SeedRun]) -> Vec<HistoryRow> {
    runs.iter()
        .flat_map(|r| {
            r.history.iter().map(|h| HistoryRow {
                seed: r.seed,
                epoch: h.epoch,
                train_loss: h.train_loss,
                train_mse: h.train_mse,
                hsic_value: h.hsic_value,
                val_loss: h.val_loss,
                val_mse: h.val_mse,
            })
        })
        .collect()
}

fn cmd_train(cfg: &RunConfig, out: &Path, ack: bool) -> Result<Value> {
    let kind = cfg.train.loss_kind;
    let mut runs = Vec::new();
    let mut timings = Vec::new();
    let mut stats = None;
    for seed in seeds(cfg) {
        let setting = Setting {
            horizon: cfg.data.horizon,
            snr_db: cfg.data.snr_db,
            seed,
        };
        let data = prepare(cfg, setting, ack)?;
        let (run, timing, model) = run_once(cfg, &data, kind, setting)?;
        let ckpt = out.join(format!("model_seed{seed}.ckpt"));
        checkpoint::save(&model, &ckpt).map_err(at("run.out"))?;
        runs.push(run);
        timings.push(timing);
        stats.get_or_insert(data.stats);
    }
    let report = RunReport {
        command: "train".into(),
        loss_kind: kind,
        lookback: cfg.data.lookback,
        horizon: cfg.data.horizon,
        snr_db: cfg.data.snr_db,
        test_mse: mean(&runs.iter().map(|r| r.test_mse).collect::<Vec<_>>()),
        test_mae: mean(&runs.iter().map(|r| r.test_mae).collect::<Vec<_>>()),
        dataset: stats.expect("at least one repeat"),
        runs,
        config: cfg.echo(),
    };
    write_json(&out.join("report.json"), &report)?;
    write_json(&out.join("timing.json"), &json!({ "runs": timings }))?;
    write_csv(&out.join("history.csv"), &history_rows(&report.runs))?;
    Ok(json!({
        "command": "train",
        "out": out,
        "loss_kind": kind,
        "test_mse": report.test_mse,
        "test_mae": report.test_mae,
    }))
}

/// One aggregated cell of a multi-run study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub horizon: usize,
    pub snr_db: Option<f64>,
    pub loss_kind: LossKind,
    pub runs: usize,
    pub test_mse: f64,
    pub test_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRun {
    pub horizon: usize,
    pub snr_db: Option<f64>,
    pub loss_kind: LossKind,
    #[serde(flatten)]
    pub run: SeedRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub command: String,
    pub rows: Vec<StudyRow>,
    pub runs: Vec<LabeledRun>,
    pub config: String,
}

/// Trains every kind on every (horizon, snr, seed) cell. Data are prepared
/// once per cell so all kinds see identical inputs.
fn study(
    cfg: &RunConfig,
    ack: bool,
    horizons: &[usize],
    snrs: &[Option<f64>],
    kinds: &[LossKind],
    seed_list: &[u64],
) -> Result<(Vec<LabeledRun>, Vec<RunTiming>)> {
    let mut runs = Vec::new();
    let mut timings = Vec::new();
    for &horizon in horizons {
        for &snr_db in snrs {
            for &seed in seed_list {
                let setting = Setting { horizon, snr_db, seed };
                let data = prepare(cfg, setting, ack)?;
                for &kind in kinds {
                    let (run, timing, _) = run_once(cfg, &data, kind, setting)?;
                    runs.push(LabeledRun {
                        horizon,
                        snr_db,
                        loss_kind: kind,
                        run,
                    });
                    timings.push(timing);
                }
            }
        }
    }
    Ok((runs, timings))
}

fn aggregate(runs: &[LabeledRun]) -> Vec<StudyRow> {
    let mut rows: Vec<StudyRow> = Vec::new();
    for r in runs {
        if rows
            .iter()
            .any(|row| row.horizon == r.horizon && row.snr_db == r.snr_db && row.loss_kind == r.loss_kind)
        {
            continue;
        }
        let cell: Vec<&SeedRun> = runs
            .iter()
            .filter(|o| o.horizon == r.horizon && o.snr_db == r.snr_db && o.loss_kind == r.loss_kind)
            .map(|o| &o.run)
            .collect();
        rows.push(StudyRow {
            horizon: r.horizon,
            snr_db: r.snr_db,
            loss_kind: r.loss_kind,
            runs: cell.len(),
            test_mse: mean(&cell.iter().map(|c| c.test_mse).collect::<Vec<_>>()),
            test_mae: mean(&cell.iter().map(|c| c.test_mae).collect::<Vec<_>>()),
        });
    }
    rows
}

fn write_study(
    name: &str,
    cfg: &RunConfig,
    out: &Path,
    runs: Vec<LabeledRun>,
    timings: &[RunTiming],
) -> Result<StudyReport> {
    let report = StudyReport {
        command: name.into(),
        rows: aggregate(&runs),
        runs,
        config: cfg.echo(),
    };
    write_csv(&out.join(format!("{name}.csv")), &report.rows)?;
    write_json(&out.join(format!("{name}.json")), &report)?;
    write_json(&out.join("timing.json"), &json!({ "runs": timings }))?;
    Ok(report)
}

fn cmd_ablation(cfg: &RunConfig, out: &Path, ack: bool) -> Result<Value> {
    let horizons = if cfg.ablation.horizons.is_empty() {
        vec![cfg.data.horizon]
    } else {
        cfg.ablation.horizons.clone()
    };
    let (runs, timings) = study(
        cfg,
        ack,
        &horizons,
        &[cfg.data.snr_db],
        &cfg.ablation.kinds,
        &seeds(cfg),
    )?;
    let report = write_study("ablation", cfg, out, runs, &timings)?;
    Ok(json!({ "command": "ablation", "out": out, "rows": report.rows }))
}

fn cmd_robustness(cfg: &RunConfig, out: &Path, ack: bool) -> Result<Value> {
    if cfg.robustness.snr_db.is_empty() {
        return Err(HarnessError::config("robustness.snr_db", "list is empty"));
    }
    let snrs: Vec<Option<f64>> = cfg.robustness.snr_db.iter().copied().map(Some).collect();
    let (runs, timings) = study(cfg, ack, &[cfg.data.horizon], &snrs, &cfg.robustness.kinds, &seeds(cfg))?;
    let report = write_study("robustness", cfg, out, runs, &timings)?;
    Ok(json!({ "command": "robustness", "out": out, "rows": report.rows }))
}

fn cmd_sweep(cfg: &RunConfig, out: &Path, ack: bool) -> Result<Value> {
    let s = &cfg.sweep;
    let horizons = if s.horizons.is_empty() {
        vec![cfg.data.horizon]
    } else {
        s.horizons.clone()
    };
    let snrs: Vec<Option<f64>> = if s.snr_db.is_empty() {
        vec![cfg.data.snr_db]
    } else {
        s.snr_db.iter().copied().map(Some).collect()
    };
    let seed_list = if s.seeds.is_empty() {
        seeds(cfg)
    } else {
        s.seeds.clone()
    };
    let (runs, timings) = study(cfg, ack, &horizons, &snrs, &s.kinds, &seed_list)?;
    let report = write_study("sweep", cfg, out, runs, &timings)?;

    // settings × kinds table of test MSE, ready for `friedman`
    let mut header = vec!["setting".to_string()];
    header.extend(s.kinds.iter().map(|k| k.name().to_string()));
    let mut rows = Vec::new();
    for chunk in report.runs.chunks(s.kinds.len()) {
        let first = &chunk[0];
        let snr = first.snr_db.map_or("none".to_string(), |v| v.to_string());
        let mut row = vec![format!("h{}_snr{}_seed{}", first.horizon, snr, first.run.seed)];
        row.extend(chunk.iter().map(|r| r.run.test_mse.to_string()));
        rows.push(row);
    }
    write_csv_records(&out.join("sweep_wide.csv"), &header, &rows)?;
    Ok(json!({ "command": "sweep", "out": out, "runs": report.runs.len() }))
}

fn cmd_friedman(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let path = cfg.friedman.table.as_ref().ok_or_else(|| {
        HarnessError::config(
            "friedman.table",
            "no metric table given (use --table or [friedman].table)",
        )
    })?;
    let table = MetricTable::read_csv(path)?;
    let report = friedman(&table, cfg.friedman.lower_is_better, cfg.friedman.q_alpha)?;
    write_json(&out.join("friedman.json"), &report)?;
    let mut header = vec!["setting".to_string()];
    header.extend(table.methods.iter().cloned());
    let rows: Vec<Vec<String>> = table
        .settings
        .iter()
        .zip(table.ranks(cfg.friedman.lower_is_better))
        .map(|(s, r)| std::iter::once(s.clone()).chain(r.iter().map(f64::to_string)).collect())
        .collect();
    write_csv_records(&out.join("ranks.csv"), &header, &rows)?;
    Ok(json!({ "command": "friedman", "out": out, "report": report }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffSummary {
    pub tau: f64,
    pub argmin_rho: f64,
    pub min_ri: f64,
    /// Spearman correlation of MSE with the noise ratio.
    pub mse_rank_trend: f64,
}

pub fn summarize_tradeoff(rows: &[riloss_core::loss::TradeoffRow], taus: &[f64]) -> Vec<TradeoffSummary> {
    taus.iter()
        .map(|&tau| {
            let curve: Vec<_> = rows.iter().filter(|r| r.tau == tau).collect();
            let best = curve
                .iter()
                .min_by(|a, b| a.ri.total_cmp(&b.ri))
                .expect("non-empty curve");
            let rho: Vec<f64> = curve.iter().map(|r| r.rho).collect();
            let mse: Vec<f64> = curve.iter().map(|r| r.mse).collect();
            TradeoffSummary {
                tau,
                argmin_rho: best.rho,
                min_ri: best.ri,
                mse_rank_trend: spearman(&rho, &mse),
            }
        })
        .collect()
}

fn cmd_tradeoff(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let t = &cfg.tradeoff;
    if t.steps < 2 {
        return Err(HarnessError::config("tradeoff.steps", "need at least 2 steps"));
    }
    if t.taus.is_empty() {
        return Err(HarnessError::config("tradeoff.taus", "list is empty"));
    }
    let tc = TradeoffConfig {
        taus: t.taus.clone(),
        rhos: TradeoffConfig::linspace_rhos(t.steps),
        points: t.points,
        seed: cfg.run.seed,
        mode: t.mode,
    };
    let rows = tradeoff_curve(&tc).map_err(at("tradeoff"))?;
    let summary = summarize_tradeoff(&rows, &t.taus);
    write_csv(&out.join("tradeoff.csv"), &rows)?;
    write_json(
        &out.join("tradeoff.json"),
        &json!({ "summary": summary, "config": cfg.echo() }),
    )?;
    Ok(json!({ "command": "tradeoff", "out": out, "rows": rows.len(), "summary": summary }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosstermRow {
    pub projection: String,
    pub index: usize,
    pub sigma: f64,
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
    pub z: f64,
}

fn cmd_crossterm(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let c = &cfg.crossterm;
    if c.projections.is_empty() || c.sigmas.is_empty() {
        return Err(HarnessError::config(
            "crossterm.projections",
            "need at least one projection and one sigma",
        ));
    }
    let mut mats = Vec::new();
    for kind in &c.projections {
        let count = if kind == "random" { c.random_count } else { 1 };
        for i in 0..count {
            let seed = cfg.run.seed.wrapping_add(mats.len() as u64);
            let p = projection_matrix(kind, c.horizon, seed).map_err(at("crossterm"))?;
            mats.push((kind.clone(), i, p));
        }
    }
    let mut rows = Vec::new();
    for (m, (kind, i, p)) in mats.iter().enumerate() {
        for (j, &sigma) in c.sigmas.iter().enumerate() {
            let seed = cfg.run.seed ^ ((m as u64) << 32 | j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let r = crossterm_mc(p.view(), sigma, c.trials, seed).map_err(at("crossterm"))?;
            rows.push(CrosstermRow {
                projection: kind.clone(),
                index: *i,
                sigma,
                empirical: r.empirical,
                analytic: r.analytic,
                stderr: r.stderr,
                z: r.z_score(),
            });
        }
    }
    write_csv(&out.join("crossterm.csv"), &rows)?;
    Ok(json!({ "command": "crossterm", "out": out, "rows": rows }))
}

fn cmd_bounds(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut bc = cfg.bounds.clone();
    bc.seed = cfg.run.seed;
    bc.bound.seed = cfg.run.seed;
    let study = convergence_study(&bc).map_err(at("bounds"))?;
    write_csv(&out.join("bounds.csv"), &study.rows)?;
    write_json(
        &out.join("bounds.json"),
        &json!({ "study": study, "config": cfg.echo() }),
    )?;
    Ok(json!({
        "command": "bounds",
        "out": out,
        "reference": study.reference,
        "loglog_slope": study.loglog_slope,
        "rows": study.rows.len(),
    }))
}
