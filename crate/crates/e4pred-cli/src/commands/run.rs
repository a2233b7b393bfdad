//! Evaluate one cell of the grid: an application mode at one window
//! length, gating choice and lead time. Also the compute path the grid
//! scheduler calls for every cell it visits.

use serde::{Deserialize, Serialize};

use e4pred::activity::{load_model, ActivityModel};
use e4pred::dsp::PreprocessedSession;
use e4pred::grid::{Condition, GridCell};
use e4pred::metrics::MetricsReport;
use e4pred::nn::{load_params, ModelParams};
use e4pred::seed;
use e4pred::trainflow::{run_seeds, seeds_for, ApplicationMode, RunConfig, RunResult};
use e4pred::windowing::WindowConfig;

use crate::commands::{load_preprocessed, Ctx};
use crate::config::Config;
use crate::layout::write_json;
use crate::manifest::{self, Manifest};
use crate::UsageError;

/// Everything written for one evaluated cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub key: String,
    pub window_len_s: u32,
    pub activity_gate: bool,
    pub mode: ApplicationMode,
    pub lead_s: u32,
    pub threshold: f64,
    pub seeds: Vec<u64>,
    pub report: MetricsReport,
    pub runs: Vec<RunResult>,
}

/// Seeds are keyed by condition and lead but not by mode, so every mode
/// of one cell family trains and evaluates on identical splits.
fn cell_seeds(config: &Config, condition: &Condition, lead_s: u32) -> Vec<u64> {
    let family = format!("{}_l{}", condition.label(), lead_s);
    let root = seed::substream_keyed(config.seed, "cell", &family);
    seeds_for(root, config.seeds_per_cell)
}

pub fn load_gate(ctx: &Ctx, window_len_s: u32) -> anyhow::Result<ActivityModel> {
    let path = ctx.layout.activity_model(window_len_s);
    load_model(&path)
        .map_err(|e| anyhow::anyhow!("{e}; run `e4pred tune-activity` first"))
}

pub fn load_pretrained(ctx: &Ctx) -> anyhow::Result<ModelParams<f64>> {
    load_params(&ctx.layout.pretrained_params())
        .map_err(|e| anyhow::anyhow!("{e}; run `e4pred pretrain` first"))
}

pub fn evaluate_cell(
    ctx: &Ctx,
    sessions: &[PreprocessedSession<f64>],
    pretrained: Option<&ModelParams<f64>>,
    gate: Option<&ActivityModel>,
    cell: &GridCell,
) -> anyhow::Result<CellResult> {
    let seeds = cell_seeds(&ctx.config, &cell.condition, cell.lead_s);
    let cfg = RunConfig {
        window: WindowConfig {
            window_len_s: cell.condition.window_len_s,
            lead_s: cell.lead_s,
            rate_hz: ctx.config.rate_hz,
        },
        gate: gate.cloned(),
        seed: 0, // overridden per repetition
        threshold: ctx.config.threshold,
        train: ctx.config.train(),
    };
    let (report, runs) = run_seeds(cell.mode, sessions, pretrained, &cfg, &seeds)?;
    Ok(CellResult {
        key: cell.key(),
        window_len_s: cell.condition.window_len_s,
        activity_gate: cell.condition.activity_gate,
        mode: cell.mode,
        lead_s: cell.lead_s,
        threshold: ctx.config.threshold,
        seeds,
        report,
        runs,
    })
}

pub fn run(
    ctx: &Ctx,
    mode: ApplicationMode,
    window: u32,
    lead: u32,
    gate: bool,
    force: bool,
) -> anyhow::Result<()> {
    if window != 60 && window != 300 {
        return Err(UsageError(format!("window {window} is not 60 or 300")).into());
    }
    if lead % 60 != 0 || lead > 300 {
        return Err(UsageError(format!(
            "lead {lead} is not a multiple of 60 at most 300"
        ))
        .into());
    }

    let cell = GridCell {
        condition: Condition {
            window_len_s: window,
            activity_gate: gate,
        },
        mode,
        lead_s: lead,
    };
    let key = cell.key();
    let path = ctx.layout.result_file(&key);
    if path.exists() && !force {
        let existing: CellResult = crate::layout::read_json(&path)?;
        println!(
            "{key}: f1 {:.4} +/- {:.4} (existing result; --force recomputes)",
            existing.report.f1_mean, existing.report.f1_std
        );
        return Ok(());
    }

    let sessions = load_preprocessed(ctx)?;
    let pretrained = if mode.uses_pretrained() {
        Some(load_pretrained(ctx)?)
    } else {
        None
    };
    let gate_model = if gate {
        Some(load_gate(ctx, window)?)
    } else {
        None
    };

    manifest::write(
        ctx,
        Manifest {
            seeds: cell_seeds(&ctx.config, &cell.condition, cell.lead_s),
            inputs: vec!["preprocessed".into()],
            outputs: vec![format!("results/{key}.json")],
            ..Manifest::new(ctx, format!("run_{key}"))
        },
    )?;

    let result = evaluate_cell(
        ctx,
        &sessions,
        pretrained.as_ref(),
        gate_model.as_ref(),
        &cell,
    )?;
    write_json(&path, &result)?;
    println!(
        "{key}: f1 {:.4} +/- {:.4}, accuracy {:.4}, auc {:.4}",
        result.report.f1_mean,
        result.report.f1_std,
        result.report.accuracy_mean,
        result.report.auc
    );
    Ok(())
}
