//! The evaluation grid and its adaptive scheduler.
//!
//! The grid is 4 conditions x 5 modes x 6 lead times = 120 cells. The
//! scheduler explores it in alternating phases: first every
//! (condition, mode) pair at lead 0, then the best pair's remaining leads
//! (a row), then the best lead's remaining pairs (a column), and so on,
//! always picking the highest F1 of the phase just completed among rows
//! and columns not yet expanded. Ties go to the earlier cell in grid
//! order. After six column phases every cell has been visited.
//!
//! State is nothing but the flat log of recorded scores; the next batch
//! is re-derived from it on every call, so replaying a log reproduces the
//! schedule exactly.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::trainflow::ApplicationMode;

/// Lead times in seconds, one column per minute.
pub const LEADS_S: [u32; 6] = [0, 60, 120, 180, 240, 300];

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("{0:?} is not a grid cell key")]
    UnknownCell(String),
    #[error("cell {0} was already recorded")]
    AlreadyRecorded(String),
    #[error("cell {key} scored a non-finite F1 ({f1})")]
    NonFiniteScore { key: String, f1: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// Window length and gating choice of one grid block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub window_len_s: u32,
    pub activity_gate: bool,
}

impl Condition {
    /// Block order of the result table.
    pub const ALL: [Condition; 4] = [
        Condition {
            window_len_s: 300,
            activity_gate: true,
        },
        Condition {
            window_len_s: 300,
            activity_gate: false,
        },
        Condition {
            window_len_s: 60,
            activity_gate: true,
        },
        Condition {
            window_len_s: 60,
            activity_gate: false,
        },
    ];

    pub fn label(&self) -> String {
        format!(
            "w{}_{}",
            self.window_len_s,
            if self.activity_gate { "gate" } else { "nogate" }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub condition: Condition,
    pub mode: ApplicationMode,
    pub lead_s: u32,
}

impl GridCell {
    /// Stable identifier, also used for per-cell result files.
    pub fn key(&self) -> String {
        format!(
            "{}_{}_l{}",
            self.condition.label(),
            self.mode.label(),
            self.lead_s
        )
    }

    /// Every cell in grid order: condition blocks, modes within a block,
    /// leads within a mode.
    pub fn all() -> Vec<GridCell> {
        let mut cells = Vec::with_capacity(120);
        for condition in Condition::ALL {
            for mode in ApplicationMode::ALL {
                for lead_s in LEADS_S {
                    cells.push(GridCell {
                        condition,
                        mode,
                        lead_s,
                    });
                }
            }
        }
        cells
    }
}

/// One recorded evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub key: String,
    pub f1: f64,
}

/// The scheduler's entire state: the ordered log of recorded cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub history: Vec<GridRecord>,
}

impl GridState {
    pub fn new() -> Self {
        GridState::default()
    }

    /// Rebuild a state from a log, validating every entry.
    pub fn replay(records: &[GridRecord]) -> Result<Self, GridError> {
        let mut state = GridState::new();
        for r in records {
            state.record(&r.key, r.f1)?;
        }
        Ok(state)
    }

    pub fn recorded(&self, key: &str) -> Option<f64> {
        self.history.iter().find(|r| r.key == key).map(|r| r.f1)
    }

    pub fn record(&mut self, key: &str, f1: f64) -> Result<(), GridError> {
        if !GridCell::all().iter().any(|c| c.key() == key) {
            return Err(GridError::UnknownCell(key.to_string()));
        }
        if self.recorded(key).is_some() {
            return Err(GridError::AlreadyRecorded(key.to_string()));
        }
        if !f1.is_finite() {
            return Err(GridError::NonFiniteScore {
                key: key.to_string(),
                f1,
            });
        }
        self.history.push(GridRecord {
            key: key.to_string(),
            f1,
        });
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.history.len() == GridCell::all().len()
    }

    fn scores(&self) -> BTreeMap<String, f64> {
        self.history
            .iter()
            .map(|r| (r.key.clone(), r.f1))
            .collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Target {
    Column(u32),
    Row(Condition, ApplicationMode),
}

fn column_cells(lead_s: u32) -> Vec<GridCell> {
    Condition::ALL
        .into_iter()
        .flat_map(|condition| {
            ApplicationMode::ALL.into_iter().map(move |mode| GridCell {
                condition,
                mode,
                lead_s,
            })
        })
        .collect()
}

fn row_cells(condition: Condition, mode: ApplicationMode) -> Vec<GridCell> {
    LEADS_S
        .into_iter()
        .map(|lead_s| GridCell {
            condition,
            mode,
            lead_s,
        })
        .collect()
}

/// The unevaluated cells of the phase the schedule is currently in, empty
/// once the grid is complete. Derived purely from the recorded scores.
pub fn next_batch(state: &GridState) -> Vec<GridCell> {
    let scores = state.scores();
    let mut expanded_rows: HashSet<(Condition, ApplicationMode)> = HashSet::new();
    let mut expanded_cols: HashSet<u32> = HashSet::new();
    let mut target = Target::Column(0);
    loop {
        let cells = match target {
            Target::Column(lead) => column_cells(lead),
            Target::Row(condition, mode) => row_cells(condition, mode),
        };
        let missing: Vec<GridCell> = cells
            .iter()
            .filter(|c| !scores.contains_key(&c.key()))
            .copied()
            .collect();
        if !missing.is_empty() {
            return missing;
        }
        match target {
            Target::Column(lead) => {
                expanded_cols.insert(lead);
                let mut best: Option<((Condition, ApplicationMode), f64)> = None;
                for cell in column_cells(lead) {
                    let pair = (cell.condition, cell.mode);
                    if expanded_rows.contains(&pair) {
                        continue;
                    }
                    let f1 = scores[&cell.key()];
                    if best.as_ref().is_none_or(|&(_, b)| f1 > b) {
                        best = Some((pair, f1));
                    }
                }
                let Some(((condition, mode), _)) = best else {
                    return Vec::new();
                };
                expanded_rows.insert((condition, mode));
                target = Target::Row(condition, mode);
            }
            Target::Row(condition, mode) => {
                expanded_rows.insert((condition, mode));
                let mut best: Option<(u32, f64)> = None;
                for cell in row_cells(condition, mode) {
                    if expanded_cols.contains(&cell.lead_s) {
                        continue;
                    }
                    let f1 = scores[&cell.key()];
                    if best.as_ref().is_none_or(|&(_, b)| f1 > b) {
                        best = Some((cell.lead_s, f1));
                    }
                }
                let Some((lead, _)) = best else {
                    return Vec::new();
                };
                target = Target::Column(lead);
            }
        }
    }
}

/// The result table as CSV: one row per (condition, mode) in grid order,
/// one column per lead, blanks where the scheduler has not been.
pub fn export_table(state: &GridState) -> String {
    let mut out = String::from("condition,mode,0min,1min,2min,3min,4min,5min\n");
    for condition in Condition::ALL {
        for mode in ApplicationMode::ALL {
            out.push_str(&condition.label());
            out.push(',');
            out.push_str(mode.label());
            for lead_s in LEADS_S {
                let cell = GridCell {
                    condition,
                    mode,
                    lead_s,
                };
                out.push(',');
                if let Some(f1) = state.recorded(&cell.key()) {
                    out.push_str(&format!("{f1:.6}"));
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_state(state: &GridState, path: &Path) -> Result<(), GridError> {
    let mut text = serde_json::to_string_pretty(state).map_err(|source| GridError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_state(path: &Path) -> Result<GridState, GridError> {
    let text = fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let state: GridState = serde_json::from_str(&text).map_err(|source| GridError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    GridState::replay(&state.history)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_index(condition: Condition, mode: ApplicationMode) -> usize {
        let c = Condition::ALL.iter().position(|&x| x == condition).unwrap();
        let m = ApplicationMode::ALL.iter().position(|&x| x == mode).unwrap();
        c * 5 + m
    }

    #[test]
    fn the_grid_has_120_cells_in_block_order() {
        let cells = GridCell::all();
        assert_eq!(cells.len(), 120);
        assert_eq!(cells[0].key(), "w300_gate_pretrained_direct_l0");
        assert_eq!(cells[5].key(), "w300_gate_pretrained_direct_l300");
        assert_eq!(cells[6].key(), "w300_gate_pretrained_random_ft_l0");
        assert_eq!(cells[30].key(), "w300_nogate_pretrained_direct_l0");
        assert_eq!(cells[60].key(), "w60_gate_pretrained_direct_l0");
        assert_eq!(cells[119].key(), "w60_nogate_uninit_personalized_l300");
        let mut keys: Vec<String> = cells.iter().map(|c| c.key()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 120);
    }

    #[test]
    fn the_first_batch_is_the_lead_zero_column() {
        let batch = next_batch(&GridState::new());
        assert_eq!(batch.len(), 20);
        assert!(batch.iter().all(|c| c.lead_s == 0));
        assert_eq!(batch[0].condition, Condition::ALL[0]);
        assert_eq!(batch[0].mode, ApplicationMode::ALL[0]);
        assert_eq!(batch[19].condition, Condition::ALL[3]);
        assert_eq!(batch[19].mode, ApplicationMode::ALL[4]);
    }

    #[test]
    fn the_schedule_follows_the_best_row_then_the_best_column() {
        let mut state = GridState::new();
        // Lead-0 column: pair (C0, M1) wins, (C1, M0) and (C1, M1) tie
        // behind it, everything else stays distinct and small.
        for cell in next_batch(&state) {
            let i = pair_index(cell.condition, cell.mode);
            let f1 = match i {
                0 => 0.2,
                1 => 0.7,
                5 => 0.3,
                6 => 0.3,
                _ => 0.01 * i as f64,
            };
            state.record(&cell.key(), f1).unwrap();
        }

        let row = next_batch(&state);
        assert_eq!(row.len(), 5);
        assert!(row
            .iter()
            .all(|c| c.condition == Condition::ALL[0] && c.mode == ApplicationMode::ALL[1]));
        assert_eq!(
            row.iter().map(|c| c.lead_s).collect::<Vec<_>>(),
            [60, 120, 180, 240, 300]
        );
        // The five-minute lead wins the row.
        for cell in row {
            let f1 = if cell.lead_s == 300 { 0.75 } else { 0.4 };
            state.record(&cell.key(), f1).unwrap();
        }

        let column = next_batch(&state);
        assert_eq!(column.len(), 19, "winning row's cell is already done");
        assert!(column.iter().all(|c| c.lead_s == 300));
        assert!(!column
            .iter()
            .any(|c| c.condition == Condition::ALL[0] && c.mode == ApplicationMode::ALL[1]));
        // Pair (C1, M1) wins the five-minute column.
        for cell in column {
            let i = pair_index(cell.condition, cell.mode);
            let f1 = if i == 6 { 0.6 } else { 0.005 * i as f64 };
            state.record(&cell.key(), f1).unwrap();
        }

        let next_row = next_batch(&state);
        assert_eq!(next_row.len(), 4);
        assert!(next_row
            .iter()
            .all(|c| c.condition == Condition::ALL[1] && c.mode == ApplicationMode::ALL[1]));
        assert_eq!(
            next_row.iter().map(|c| c.lead_s).collect::<Vec<_>>(),
            [60, 120, 180, 240]
        );
    }

    #[test]
    fn the_schedule_tiles_the_whole_grid() {
        let mut state = GridState::new();
        let mut batches = 0;
        loop {
            let batch = next_batch(&state);
            if batch.is_empty() {
                break;
            }
            batches += 1;
            assert!(batches <= 11, "alternation must finish in 11 phases");
            for (i, cell) in batch.iter().enumerate() {
                // Arbitrary but distinct scores.
                let f1 = ((state.history.len() * 7 + i * 3) % 97) as f64 / 97.0;
                state.record(&cell.key(), f1).unwrap();
            }
        }
        assert_eq!(batches, 11);
        assert!(state.is_complete());
        assert_eq!(state.history.len(), 120);
    }

    #[test]
    fn recording_is_validated() {
        let mut state = GridState::new();
        assert!(matches!(
            state.record("w300_gate_bogus_l0", 0.5),
            Err(GridError::UnknownCell(_))
        ));
        state.record("w300_gate_pretrained_direct_l0", 0.5).unwrap();
        assert!(matches!(
            state.record("w300_gate_pretrained_direct_l0", 0.6),
            Err(GridError::AlreadyRecorded(_))
        ));
        assert!(matches!(
            state.record("w300_gate_pretrained_direct_l60", f64::NAN),
            Err(GridError::NonFiniteScore { .. })
        ));
    }

    #[test]
    fn a_saved_log_replays_to_the_same_schedule() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.json");
        let mut state = GridState::new();
        for (i, cell) in next_batch(&state).into_iter().enumerate() {
            state.record(&cell.key(), 0.03 * i as f64).unwrap();
        }
        save_state(&state, &path).unwrap();
        let loaded = load_state(&path).unwrap();
        assert_eq!(state, loaded);
        assert_eq!(next_batch(&state), next_batch(&loaded));
        let replayed = GridState::replay(&state.history).unwrap();
        assert_eq!(replayed, state);
    }

    #[test]
    fn the_table_prints_every_row_with_blanks_for_unvisited_cells() {
        let mut state = GridState::new();
        state.record("w300_gate_pretrained_direct_l0", 0.5).unwrap();
        let table = export_table(&state);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 21);
        assert_eq!(lines[0], "condition,mode,0min,1min,2min,3min,4min,5min");
        assert_eq!(lines[1], "w300_gate,pretrained_direct,0.500000,,,,,");
        assert_eq!(lines[2], "w300_gate,pretrained_random_ft,,,,,,");
        assert!(lines[20].starts_with("w60_nogate,uninit_personalized,"));
    }
}
