//! Export the result table, the pooled ROC of each condition's best cell,
//! and the score-by-lead overview from whatever the grid has recorded so
//! far. Works on an empty grid: the table then has its header and row
//! labels with every score blank, and the plots only their axes.

use std::io::{ErrorKind, Write};

use e4pred::grid::{export_table, load_state, Condition, GridCell, GridState, LEADS_S};
use e4pred::trainflow::ApplicationMode;

use crate::commands::run::CellResult;
use crate::commands::Ctx;
use crate::layout::read_json;
use crate::manifest::{self, Manifest};
use crate::svg;

/// The recorded cell with the highest score in one condition block; on a
/// tie the earlier cell in table order wins.
fn best_cell(state: &GridState, condition: &Condition) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    for mode in ApplicationMode::ALL {
        for lead_s in LEADS_S {
            let key = GridCell {
                condition: *condition,
                mode,
                lead_s,
            }
            .key();
            if let Some(f1) = state.recorded(&key) {
                if best.as_ref().is_none_or(|&(_, b)| f1 > b) {
                    best = Some((key, f1));
                }
            }
        }
    }
    best
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    manifest::write(
        ctx,
        Manifest {
            inputs: vec!["grid.json".into(), "results".into()],
            outputs: vec!["table.csv".into(), "roc.svg".into(), "leads.svg".into()],
            ..Manifest::new(ctx, "report")
        },
    )?;

    let state_path = ctx.layout.grid_state();
    let state = if state_path.exists() {
        load_state(&state_path)?
    } else {
        GridState::new()
    };

    let mut curves = Vec::new();
    for condition in &Condition::ALL {
        let Some((key, f1)) = best_cell(&state, condition) else {
            continue;
        };
        let path = ctx.layout.result_file(&key);
        if !path.exists() {
            log::warn!("recorded cell {key} has no result file; skipping its curve");
            continue;
        }
        let cell: CellResult = read_json(&path)?;
        curves.push((format!("{key} (f1 {f1:.3})"), cell.report.roc_points));
    }

    let table = export_table(&state);
    std::fs::write(ctx.layout.table_file(), &table)?;
    std::fs::write(ctx.layout.roc_file(), svg::roc_curves(&curves))?;
    std::fs::write(ctx.layout.leads_file(), svg::f1_by_lead(&state))?;

    // The files are already on disk; a reader closing the pipe early
    // (`report | head`) is not a failure.
    let summary = format!(
        "{} of 120 cells recorded; wrote {}, {} and {}\n",
        state.history.len(),
        ctx.layout.table_file().display(),
        ctx.layout.roc_file().display(),
        ctx.layout.leads_file().display()
    );
    let mut stdout = std::io::stdout().lock();
    match stdout
        .write_all(table.as_bytes())
        .and_then(|()| stdout.write_all(summary.as_bytes()))
        .and_then(|()| stdout.flush())
    {
        Err(e) if e.kind() == ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}
