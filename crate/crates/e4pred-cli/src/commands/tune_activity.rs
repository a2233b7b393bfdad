//! Fit the motion classifier once per window length on the calibration
//! intervals of every session that has them.

use serde::Serialize;

use e4pred::activity::{baseline_windows_from_sessions, save_model, tune, TuneReport};

use crate::commands::{load_preprocessed, Ctx};
use crate::layout::write_json;
use crate::manifest::{self, Manifest};

#[derive(Serialize)]
struct TuningSummary {
    window_len_s: u32,
    n_windows: usize,
    method: String,
    threshold: f64,
    report: TuneReport,
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let sessions = load_preprocessed(ctx)?;

    manifest::write(
        ctx,
        Manifest {
            inputs: vec!["preprocessed".into()],
            outputs: vec![
                "activity_model_w60.json".into(),
                "activity_model_w300.json".into(),
                "activity_tuning.json".into(),
            ],
            ..Manifest::new(ctx, "tune-activity")
        },
    )?;

    let mut summaries = Vec::new();
    for window_len_s in [60u32, 300] {
        let windows = baseline_windows_from_sessions(&sessions, window_len_s);
        let (model, report) = tune(&windows, window_len_s)?;
        save_model(&model, &ctx.layout.activity_model(window_len_s))?;
        println!(
            "w{}: {:?} threshold {:.6}, balanced accuracy {:.4} on {} windows",
            window_len_s,
            model.method,
            model.threshold,
            report.balanced_accuracy,
            windows.len()
        );
        summaries.push(TuningSummary {
            window_len_s,
            n_windows: windows.len(),
            method: format!("{:?}", model.method),
            threshold: model.threshold,
            report,
        });
    }
    write_json(&ctx.layout.activity_report(), &summaries)?;
    Ok(())
}
