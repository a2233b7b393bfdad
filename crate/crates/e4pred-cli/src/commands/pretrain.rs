//! Build the four auxiliary corpora, train the reconstruction network on
//! all of them pooled, then the classification head, and persist the
//! parameters for the pretrained application modes.

use e4pred::dsp::{preprocess_session, PreprocessPlan, PreprocessedSession};
use e4pred::e4::synth::generate_corpus;
use e4pred::nn::{save_params, TrainConfig};
use e4pred::seed;
use e4pred::trainflow::{pretrain, CorpusStyle, PretrainConfig};
use e4pred::windowing::WindowConfig;

use crate::commands::Ctx;
use crate::layout::write_json;
use crate::manifest::{self, Manifest};

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    manifest::write(
        ctx,
        Manifest {
            seeds: vec![seed::substream(ctx.config.seed, "pretrain")],
            inputs: CorpusStyle::ALL.iter().map(|s| s.label().to_string()).collect(),
            outputs: vec!["pretrained.json".into(), "pretrain_report.json".into()],
            ..Manifest::new(ctx, "pretrain")
        },
    )?;

    let plan = PreprocessPlan::standard();
    let mut corpora: Vec<(String, Vec<PreprocessedSession<f64>>)> = Vec::new();
    for style in CorpusStyle::ALL {
        let syn = style.config(ctx.config.seed);
        let sessions = generate_corpus::<f64>(&syn)?;
        let pre = sessions
            .iter()
            .map(|s| preprocess_session(s, &plan, ctx.config.rate_hz))
            .collect::<Result<Vec<_>, _>>()?;
        log::info!("{}: {} sessions", style.label(), pre.len());
        corpora.push((style.label().to_string(), pre));
    }

    let stage = TrainConfig {
        epochs: ctx.config.pretrain_epochs,
        ..ctx.config.train()
    };
    let cfg = PretrainConfig {
        window: WindowConfig {
            window_len_s: 300,
            lead_s: 0,
            rate_hz: ctx.config.rate_hz,
        },
        ae: stage,
        head: stage,
        seed: seed::substream(ctx.config.seed, "pretrain"),
    };
    let (params, report) = pretrain(&corpora, &cfg)?;

    save_params(&params, &ctx.layout.pretrained_params())?;
    write_json(&ctx.layout.pretrain_report(), &report)?;

    println!(
        "pretrained on {} windows; reconstruction val loss {:.6}",
        report.n_windows, report.ae.best_val_loss
    );
    for (corpus, f1) in &report.holdout_f1 {
        println!("  held-out {corpus}: f1 {f1:.4}");
    }
    Ok(())
}
