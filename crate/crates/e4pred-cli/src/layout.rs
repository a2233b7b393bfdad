//! Fixed layout of the output directory. Every command addresses files
//! through here so paths stay consistent between runs and tests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn raw_dir(&self) -> PathBuf {
        self.root.join("raw")
    }

    /// All raw session directories, sorted by subject then week so every
    /// traversal order is reproducible.
    pub fn session_dirs(&self) -> anyhow::Result<Vec<PathBuf>> {
        let raw = self.raw_dir();
        // A missing directory means nothing was generated yet, which the
        // callers report with a pointer at the generate step.
        if !raw.exists() {
            return Ok(Vec::new());
        }
        let mut dirs = Vec::new();
        for subject in sorted_entries(&raw)? {
            if !subject.is_dir() {
                continue;
            }
            for week in sorted_entries(&subject)? {
                if week.is_dir() {
                    dirs.push(week);
                }
            }
        }
        Ok(dirs)
    }

    pub fn preprocessed_dir(&self) -> PathBuf {
        self.root.join("preprocessed")
    }

    pub fn preprocessed_files(&self) -> anyhow::Result<Vec<PathBuf>> {
        if !self.preprocessed_dir().exists() {
            return Ok(Vec::new());
        }
        let files = sorted_entries(&self.preprocessed_dir())?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        Ok(files)
    }

    pub fn stages_file(&self) -> PathBuf {
        self.root.join("stages.json")
    }

    pub fn activity_model(&self, window_len_s: u32) -> PathBuf {
        self.root.join(format!("activity_model_w{window_len_s}.json"))
    }

    pub fn activity_report(&self) -> PathBuf {
        self.root.join("activity_tuning.json")
    }

    pub fn pretrained_params(&self) -> PathBuf {
        self.root.join("pretrained.json")
    }

    pub fn pretrain_report(&self) -> PathBuf {
        self.root.join("pretrain_report.json")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.root.join("results")
    }

    pub fn result_file(&self, cell_key: &str) -> PathBuf {
        self.results_dir().join(format!("{cell_key}.json"))
    }

    pub fn grid_state(&self) -> PathBuf {
        self.root.join("grid.json")
    }

    pub fn table_file(&self) -> PathBuf {
        self.root.join("table.csv")
    }

    pub fn roc_file(&self) -> PathBuf {
        self.root.join("roc.svg")
    }

    pub fn leads_file(&self) -> PathBuf {
        self.root.join("leads.svg")
    }

    pub fn manifest_dir(&self) -> PathBuf {
        self.root.join("manifests")
    }

    /// Path relative to the output root, with forward slashes, for
    /// manifests that must not depend on where the root lives.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}

fn sorted_entries(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", dir.display()))?
        .into_iter()
        .map(|e| e.path())
        .collect();
    paths.sort();
    Ok(paths)
}

/// Serialize as pretty JSON with a trailing newline, creating parent
/// directories. All tool outputs go through here.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
