//! Turn every raw session into aligned model-rate channels and persist
//! them as JSON, one file per subject-week. Logs the pipeline stages in
//! execution order with their counts, including a dataset preview per
//! window length so the event fraction is visible before any training.

use e4pred::dsp::{preprocess_session, PreprocessPlan};
use e4pred::e4::read_session;
use e4pred::seed;
use e4pred::trainflow::build_dataset;
use e4pred::windowing::WindowConfig;

use crate::commands::Ctx;
use crate::layout::write_json;
use crate::manifest::{self, Manifest};

/// Pipeline stage names in execution order, written alongside the data so
/// downstream tooling can state what the files went through.
pub const STAGES: [&str; 5] = ["filter", "resample", "window", "standardize", "undersample"];

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let dirs = ctx.layout.session_dirs()?;
    if dirs.is_empty() {
        anyhow::bail!("no raw sessions; run `e4pred generate` first");
    }

    let out_dir = ctx.layout.preprocessed_dir();
    let inputs: Vec<String> = dirs.iter().map(|d| ctx.layout.relative(d)).collect();
    manifest::write(
        ctx,
        Manifest {
            inputs,
            outputs: vec!["preprocessed".into(), "stages.json".into()],
            ..Manifest::new(ctx, "preprocess")
        },
    )?;
    write_json(&ctx.layout.stages_file(), &STAGES)?;

    let plan = PreprocessPlan::standard();
    let mut sessions = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let session = read_session::<f64>(dir)?;
        let pre = preprocess_session(&session, &plan, ctx.config.rate_hz)?;
        let name = format!("{}_w{:02}.json", pre.subject_id, pre.week_index);
        write_json(&out_dir.join(name), &pre)?;
        sessions.push(pre);
    }

    println!(
        "filter: {} sessions through the standard per-channel plan",
        sessions.len()
    );
    println!("resample: all channels aligned at {} Hz", ctx.config.rate_hz);
    // Ungated lead-0 preview per window length; the per-cell datasets are
    // rebuilt with their own seeds at run time.
    for window_len_s in [60u32, 300] {
        let window = WindowConfig {
            window_len_s,
            lead_s: 0,
            rate_hz: ctx.config.rate_hz,
        };
        let preview = seed::substream_keyed(
            ctx.config.seed,
            "preview",
            &format!("w{window_len_s}"),
        );
        let (_, summary) = build_dataset(&sessions, &window, None, preview)?;
        println!(
            "window w{window_len_s}: {} event windows, {} skipped near other events",
            summary.n_events, summary.skipped_buffer_overlap
        );
        println!("standardize: per window, observation-wise");
        println!(
            "undersample w{window_len_s}: {} windows, {} events (fraction {:.3})",
            summary.n_examples,
            summary.n_events,
            summary.n_events as f64 / summary.n_examples as f64
        );
    }

    println!(
        "preprocessed {} sessions at {} Hz into {}",
        sessions.len(),
        ctx.config.rate_hz,
        out_dir.display()
    );
    Ok(())
}
