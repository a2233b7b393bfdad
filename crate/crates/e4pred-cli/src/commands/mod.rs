pub mod generate;
pub mod grid;
pub mod preprocess;
pub mod pretrain;
pub mod report;
pub mod run;
pub mod tune_activity;

use anyhow::Context;

use e4pred::dsp::PreprocessedSession;

use crate::config::Config;
use crate::layout::{read_json, Layout};

pub struct Ctx {
    pub config: Config,
    /// Config file as given on the command line, kept for manifests.
    pub config_path: Option<String>,
    pub layout: Layout,
}

/// Every preprocessed session, in file order (subject then week).
pub fn load_preprocessed(ctx: &Ctx) -> anyhow::Result<Vec<PreprocessedSession<f64>>> {
    let files = ctx
        .layout
        .preprocessed_files()
        .context("no preprocessed sessions; run `e4pred preprocess` first")?;
    if files.is_empty() {
        anyhow::bail!("no preprocessed sessions; run `e4pred preprocess` first");
    }
    files.iter().map(|p| read_json(p)).collect()
}
