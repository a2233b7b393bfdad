//! Walk the evaluation grid. The scheduler proposes batches (a column of
//! leads or a row of modes, whichever follows the best score so far); this
//! command evaluates them, persisting state after every cell so an
//! interrupted walk resumes exactly where it stopped.

use e4pred::activity::ActivityModel;
use e4pred::grid::{export_table, load_state, next_batch, save_state, GridState};
use e4pred::nn::ModelParams;

use crate::commands::run::{evaluate_cell, load_gate, load_pretrained, CellResult};
use crate::commands::{load_preprocessed, Ctx};
use crate::layout::{read_json, write_json};
use crate::manifest::{self, Manifest};

pub fn run(ctx: &Ctx, budget: Option<usize>) -> anyhow::Result<()> {
    let state_path = ctx.layout.grid_state();
    let mut state = if state_path.exists() {
        load_state(&state_path)?
    } else {
        GridState::new()
    };

    manifest::write(
        ctx,
        Manifest {
            inputs: vec!["preprocessed".into(), "grid.json".into()],
            outputs: vec!["grid.json".into(), "table.csv".into()],
            ..Manifest::new(ctx, "grid")
        },
    )?;

    let sessions = load_preprocessed(ctx)?;
    // Loaded on first use: a budgeted walk may never reach the cells that
    // need them.
    let mut pretrained: Option<ModelParams<f64>> = None;
    let mut gates: [Option<ActivityModel>; 2] = [None, None];

    let mut recorded = 0usize;
    'walk: while !state.is_complete() {
        let batch = next_batch(&state);
        for cell in batch {
            if budget.is_some_and(|b| recorded >= b) {
                break 'walk;
            }
            let key = cell.key();
            let result_path = ctx.layout.result_file(&key);
            let f1 = if result_path.exists() {
                let existing: CellResult = read_json(&result_path)?;
                existing.report.f1_mean
            } else {
                let base = if cell.mode.uses_pretrained() {
                    if pretrained.is_none() {
                        pretrained = Some(load_pretrained(ctx)?);
                    }
                    pretrained.as_ref()
                } else {
                    None
                };
                let gate = if cell.condition.activity_gate {
                    let slot = usize::from(cell.condition.window_len_s == 300);
                    if gates[slot].is_none() {
                        gates[slot] = Some(load_gate(ctx, cell.condition.window_len_s)?);
                    }
                    gates[slot].as_ref()
                } else {
                    None
                };
                let result = evaluate_cell(ctx, &sessions, base, gate, &cell)?;
                write_json(&result_path, &result)?;
                result.report.f1_mean
            };
            state.record(&key, f1)?;
            save_state(&state, &state_path)?;
            recorded += 1;
            println!("[{:>3}/120] {key}: f1 {f1:.4}", state.history.len());
        }
    }

    std::fs::write(ctx.layout.table_file(), export_table(&state))?;
    println!(
        "{} of 120 cells recorded; table written to {}",
        state.history.len(),
        ctx.layout.table_file().display()
    );
    Ok(())
}
