//! Per-command manifests. Written before any computation so a crashed or
//! interrupted run still documents what it was asked to do. Contents are
//! a pure function of the command line and the planned file set; no
//! timestamps, hostnames or other run-local state. Planned files are
//! listed relative to the output root so two runs of the same
//! configuration plan identical file sets wherever they land.

use serde::Serialize;

use crate::commands::Ctx;
use crate::config::Config;
use crate::layout::write_json;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    /// Command name, also the manifest's file name. Per-cell commands
    /// append the cell key so manifests never collide.
    pub command: String,
    pub version: &'static str,
    /// Config file as given on the command line; absent when defaults ran.
    pub config_path: Option<String>,
    /// Output root as given on the command line.
    pub out_dir: String,
    /// Resolved configuration after flag overrides.
    pub config: &'a Config,
    /// Concrete seeds the command will consume, when it derives any
    /// beyond the root seed in the config.
    pub seeds: Vec<u64>,
    /// Input files or corpus names.
    pub inputs: Vec<String>,
    /// Files the command intends to write.
    pub outputs: Vec<String>,
}

impl<'a> Manifest<'a> {
    pub fn new(ctx: &'a Ctx, command: impl Into<String>) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION"),
            config_path: ctx.config_path.clone(),
            out_dir: ctx.layout.root.display().to_string(),
            config: &ctx.config,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

pub fn write(ctx: &Ctx, mut manifest: Manifest) -> anyhow::Result<()> {
    manifest.inputs.sort();
    manifest.outputs.sort();
    let path = ctx
        .layout
        .manifest_dir()
        .join(format!("{}.json", manifest.command));
    write_json(&path, &manifest)
}
