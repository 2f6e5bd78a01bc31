//! Append-only command journal with snapshot acceleration.
//!
//! Every committed command becomes one JSON line carrying its sequence
//! number, the command itself, the post-state hash, and a hash sealing the
//! entry. Replaying the journal from the empty state reproduces the engine
//! state bit for bit; a snapshot written every [`SNAPSHOT_INTERVAL`]
//! commands lets startup skip the prefix. A torn final line (the crash
//! case) is dropped and the file truncated back to the last sealed entry;
//! damage anywhere else halts replay with the offending sequence number.
//!
//! [`SNAPSHOT_INTERVAL`]: crate::engine::SNAPSHOT_INTERVAL

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{apply_command, Command, EngineState, STATE_VERSION};

pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("journal entry {seq} (line {line}) is corrupt: {reason}")]
    Corrupt { seq: u64, line: usize, reason: String },
    #[error("journal entry {seq} failed to apply: {error}")]
    Apply { seq: u64, error: String },
    #[error("journal entry {seq} result hash does not match the replayed state")]
    HashMismatch { seq: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub version: u32,
    pub seq: u64,
    /// Wall-clock milliseconds at commit; metadata only, never part of the
    /// engine state hash.
    pub ts_ms: u64,
    pub command: Command,
    pub result_hash: String,
    #[serde(default)]
    pub entry_hash: String,
}

impl JournalEntry {
    fn compute_hash(&self) -> String {
        let mut unsealed = self.clone();
        unsealed.entry_hash = String::new();
        let json = serde_json::to_vec(&unsealed).expect("entry serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn seal(mut self) -> Self {
        self.entry_hash = self.compute_hash();
        self
    }

    pub fn integrity_ok(&self) -> bool {
        self.entry_hash == self.compute_hash()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub version: u32,
    pub seq: u64,
    pub state_hash: String,
    pub state: EngineState,
}

/// Result of replaying journal text.
#[derive(Debug)]
pub struct ReplayOutcome {
    pub state: EngineState,
    pub last_seq: u64,
    pub final_hash: String,
    /// Byte length of the journal prefix that replayed cleanly.
    pub good_len: usize,
    /// Whether a torn trailing line was dropped.
    pub torn_tail: bool,
}

/// Replay journal text on top of `state`, which must already reflect every
/// entry with seq <= `from_seq`. Entries up to `from_seq` are integrity-
/// checked but not reapplied.
pub fn replay_journal_from(
    mut state: EngineState,
    from_seq: u64,
    text: &str,
) -> Result<ReplayOutcome, ReplayError> {
    let mut last_seq = from_seq;
    let mut good_len = 0usize;
    let mut torn_tail = false;
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (idx, raw) in lines.iter().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\n');
        let line_complete = raw.ends_with('\n');
        if line.is_empty() {
            offset += raw.len();
            if line_complete {
                good_len = offset;
            }
            continue;
        }
        let is_last = idx == lines.len() - 1;
        let entry: JournalEntry = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(err) => {
                if is_last {
                    // Torn tail from an interrupted append.
                    torn_tail = true;
                    break;
                }
                return Err(ReplayError::Corrupt {
                    seq: last_seq + 1,
                    line: line_no,
                    reason: err.to_string(),
                });
            }
        };
        if !entry.integrity_ok() {
            return Err(ReplayError::Corrupt {
                seq: entry.seq,
                line: line_no,
                reason: "entry hash mismatch".into(),
            });
        }
        let expected = last_seq + 1;
        if entry.seq != expected && entry.seq > from_seq {
            return Err(ReplayError::Corrupt {
                seq: entry.seq,
                line: line_no,
                reason: format!("expected seq {expected}"),
            });
        }
        if entry.seq > from_seq {
            apply_command(&mut state, &entry.command).map_err(|e| ReplayError::Apply {
                seq: entry.seq,
                error: e.to_string(),
            })?;
            if state.state_hash() != entry.result_hash {
                return Err(ReplayError::HashMismatch { seq: entry.seq });
            }
            last_seq = entry.seq;
        }
        offset += raw.len();
        good_len = offset;
    }
    let final_hash = state.state_hash();
    Ok(ReplayOutcome {
        state,
        last_seq,
        final_hash,
        good_len,
        torn_tail,
    })
}

/// Replay journal text from the empty state.
pub fn replay_journal(text: &str) -> Result<ReplayOutcome, ReplayError> {
    replay_journal_from(EngineState::new(), 0, text)
}

// ---------------------------------------------------------------------------
// On-disk persistence

#[derive(Debug)]
pub struct JournalWriter {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl JournalWriter {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }
}

#[derive(Debug)]
pub struct Persistence {
    dir: PathBuf,
    writer: JournalWriter,
}

impl Persistence {
    /// Load (or initialize) a state directory: snapshot first when present,
    /// journal tail on top, truncating any torn final line.
    pub fn open(dir: &Path) -> Result<(EngineState, Persistence), PersistError> {
        std::fs::create_dir_all(dir)?;
        let journal_path = dir.join(JOURNAL_FILE);
        let snapshot_path = dir.join(SNAPSHOT_FILE);

        let (base_state, base_seq) = if snapshot_path.exists() {
            let raw = std::fs::read_to_string(&snapshot_path)?;
            let doc: SnapshotDoc = serde_json::from_str(&raw)
                .map_err(|e| PersistError::CorruptSnapshot(e.to_string()))?;
            if doc.state.state_hash() != doc.state_hash {
                return Err(PersistError::CorruptSnapshot(
                    "state hash does not match snapshot content".into(),
                ));
            }
            (doc.state, doc.seq)
        } else {
            (EngineState::new(), 0)
        };

        let text = if journal_path.exists() {
            std::fs::read_to_string(&journal_path)?
        } else {
            String::new()
        };
        let outcome = replay_journal_from(base_state, base_seq, &text)?;
        if outcome.torn_tail {
            log::warn!(
                "dropping torn journal tail after {} committed entries",
                outcome.last_seq
            );
            let file = OpenOptions::new().write(true).open(&journal_path)?;
            file.set_len(outcome.good_len as u64)?;
            file.sync_all()?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)?;
        let writer = JournalWriter {
            path: journal_path,
            file,
            next_seq: outcome.last_seq + 1,
        };
        Ok((
            outcome.state,
            Persistence {
                dir: dir.to_path_buf(),
                writer,
            },
        ))
    }

    pub fn append(&mut self, command: &Command, result_hash: &str) -> Result<(), PersistError> {
        let ts_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let entry = JournalEntry {
            version: STATE_VERSION,
            seq: self.writer.next_seq,
            ts_ms,
            command: command.clone(),
            result_hash: result_hash.to_string(),
            entry_hash: String::new(),
        }
        .seal();
        let mut line = serde_json::to_vec(&entry).expect("entry serializes");
        line.push(b'\n');
        self.writer.file.write_all(&line)?;
        self.writer.file.sync_data()?;
        self.writer.next_seq += 1;
        Ok(())
    }

    pub fn write_snapshot(&self, state: &EngineState) -> Result<(), PersistError> {
        let doc = SnapshotDoc {
            version: STATE_VERSION,
            seq: self.writer.next_seq - 1,
            state_hash: state.state_hash(),
            state: state.clone(),
        };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec_pretty(&doc).expect("snapshot serializes"))?;
        std::fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        Ok(())
    }

    pub fn journal(&self) -> &JournalWriter {
        &self.writer
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
