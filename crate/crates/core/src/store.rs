//! Durable, append-only storage of memory entries.
//!
//! The store is a UTF-8 JSON Lines file: a header record
//! `{"praxis_version": 1}` followed by one entry per line. Appends are
//! flushed and fsynced before returning. A syntactically damaged *final*
//! line is treated as a crash artifact and dropped on load; damage anywhere
//! else is an error naming the line. Entry ids are assigned sequentially
//! from 0 and verified on load.

use std::fs::{File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{
    ActionRecord, EntryId, EnvState, InternalState, MemoryEntry, StateError,
};

/// Version tag written to the header line.
pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing header record on line {line}")]
    MissingHeader { line: usize },
    #[error("unsupported store version {found} (supported: {STORE_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("entry ids not sequential at line {line}: expected {expected}, found {found}")]
    NonSequentialIds {
        line: usize,
        expected: u64,
        found: u64,
    },
    #[error("trajectory has no steps")]
    EmptySteps,
    #[error("trajectory chaining violation at step {step}: observation does not match the previous post-observation")]
    Chaining { step: usize },
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    praxis_version: u32,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    id: u64,
    env_pre: EnvState,
    directive: String,
    progress: String,
    action: ActionRecord,
    env_post: EnvState,
    success: bool,
    ts: i64,
}

impl EntryLine {
    fn from_entry(entry: &MemoryEntry) -> Self {
        Self {
            id: entry.id,
            env_pre: entry.env_pre.clone(),
            directive: entry.internal.directive().to_owned(),
            progress: entry.internal.progress_note().to_owned(),
            action: entry.action.clone(),
            env_post: entry.env_post.clone(),
            success: entry.episode_success,
            ts: entry.created_at,
        }
    }

    fn into_entry(self) -> Result<MemoryEntry, StateError> {
        Ok(MemoryEntry {
            id: self.id,
            env_pre: self.env_pre,
            internal: InternalState::new(self.directive, self.progress)?,
            action: self.action,
            env_post: self.env_post,
            episode_success: self.success,
            created_at: self.ts,
        })
    }
}

/// Fields of an entry about to be appended; the store assigns the id.
#[derive(Debug, Clone)]
pub struct NewEntry {
    pub env_pre: EnvState,
    pub internal: InternalState,
    pub action: ActionRecord,
    pub env_post: EnvState,
    pub episode_success: bool,
    pub created_at: i64,
}

/// One recorded episode: the ingestion source for memory entries. Each
/// step's post-observation must equal the next step's observation (as
/// canonical states).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode_id: String,
    pub directive: String,
    pub steps: Vec<TrajectoryStep>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub obs: Vec<String>,
    pub progress: String,
    pub action: ActionRecord,
    pub post_obs: Vec<String>,
}

impl TrajectoryRecord {
    /// Check the non-empty and chaining invariants. The reported step is the
    /// 0-based index of the step whose observation does not match its
    /// predecessor's post-observation.
    pub fn validate(&self) -> Result<(), StoreError> {
        if self.steps.is_empty() {
            return Err(StoreError::EmptySteps);
        }
        if self.directive.trim().is_empty() {
            return Err(StoreError::State(StateError::BlankDirective));
        }
        for (i, pair) in self.steps.windows(2).enumerate() {
            let post = EnvState::from_observation(&pair[0].post_obs);
            let next = EnvState::from_observation(&pair[1].obs);
            if post != next {
                return Err(StoreError::Chaining { step: i + 1 });
            }
        }
        Ok(())
    }
}

/// Append-only memory store, optionally backed by a JSON Lines file.
#[derive(Debug)]
pub struct MemoryStore {
    entries: Vec<MemoryEntry>,
    file: Option<File>,
}

impl MemoryStore {
    /// Volatile store with no backing file.
    pub fn in_memory() -> Self {
        Self {
            entries: Vec::new(),
            file: None,
        }
    }

    /// Open a store file for reading and appending, creating it if absent.
    /// A damaged tail record is dropped and the file truncated to the clean
    /// prefix so later appends stay well-formed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .open(path)?;
        let text = std::fs::read_to_string(path)?;
        let (entries, clean_len) = parse_store(&text)?;
        if clean_len < text.len() {
            file.set_len(clean_len as u64)?;
        }
        file.seek(SeekFrom::End(0))?;
        let mut store = Self {
            entries,
            file: Some(file),
        };
        if clean_len == 0 {
            store.write_lines(&[serde_json::to_string(&HeaderLine {
                praxis_version: STORE_FORMAT_VERSION,
            })
            .expect("header serializes")])?;
        }
        Ok(store)
    }

    /// Read a snapshot of a store file. Does not keep a write handle.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let (entries, _) = parse_store(&text)?;
        Ok(Self {
            entries,
            file: None,
        })
    }

    /// Write the full store (header plus all entries) to `path`.
    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let mut file = File::create(path.as_ref())?;
        let mut out = String::new();
        out.push_str(
            &serde_json::to_string(&HeaderLine {
                praxis_version: STORE_FORMAT_VERSION,
            })
            .expect("header serializes"),
        );
        out.push('\n');
        for entry in &self.entries {
            out.push_str(
                &serde_json::to_string(&EntryLine::from_entry(entry)).expect("entry serializes"),
            );
            out.push('\n');
        }
        file.write_all(out.as_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn entries(&self) -> &[MemoryEntry] {
        &self.entries
    }

    pub fn entry(&self, id: EntryId) -> Option<&MemoryEntry> {
        self.entries.get(id as usize)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_id(&self) -> EntryId {
        self.entries.len() as EntryId
    }

    /// Append one entry. Durable (flushed and fsynced) before returning when
    /// the store is file-backed.
    pub fn append(&mut self, new: NewEntry) -> Result<EntryId, StoreError> {
        let ids = self.append_batch(vec![new])?;
        Ok(ids[0])
    }

    /// Ingest one trajectory: one entry per step, all carrying the episode's
    /// success flag and `created_at`. Validates the whole record before
    /// appending anything. Returns the assigned ids.
    pub fn ingest_trajectory(
        &mut self,
        record: &TrajectoryRecord,
        created_at: i64,
    ) -> Result<Vec<EntryId>, StoreError> {
        record.validate()?;
        let batch: Vec<NewEntry> = record
            .steps
            .iter()
            .map(|step| {
                Ok(NewEntry {
                    env_pre: EnvState::from_observation(&step.obs),
                    internal: InternalState::new(&record.directive, &step.progress)?,
                    action: step.action.clone(),
                    env_post: EnvState::from_observation(&step.post_obs),
                    episode_success: record.success,
                    created_at,
                })
            })
            .collect::<Result<_, StateError>>()?;
        self.append_batch(batch)
    }

    fn append_batch(&mut self, batch: Vec<NewEntry>) -> Result<Vec<EntryId>, StoreError> {
        let mut ids = Vec::with_capacity(batch.len());
        let mut staged = Vec::with_capacity(batch.len());
        let mut lines = Vec::with_capacity(batch.len());
        for new in batch {
            let id = self.next_id() + staged.len() as u64;
            let entry = MemoryEntry {
                id,
                env_pre: new.env_pre,
                internal: new.internal,
                action: new.action,
                env_post: new.env_post,
                episode_success: new.episode_success,
                created_at: new.created_at,
            };
            lines.push(
                serde_json::to_string(&EntryLine::from_entry(&entry)).expect("entry serializes"),
            );
            ids.push(id);
            staged.push(entry);
        }
        self.write_lines(&lines)?;
        self.entries.extend(staged);
        Ok(ids)
    }

    fn write_lines(&mut self, lines: &[String]) -> Result<(), StoreError> {
        if let Some(file) = &mut self.file {
            let mut buf = String::new();
            for line in lines {
                buf.push_str(line);
                buf.push('\n');
            }
            file.write_all(buf.as_bytes())?;
            file.sync_data()?;
        }
        Ok(())
    }
}

/// Parse store text. Returns the entries and the byte length of the clean
/// prefix (everything except a syntactically damaged final line).
fn parse_store(text: &str) -> Result<(Vec<MemoryEntry>, usize), StoreError> {
    // (line number, byte offset of line start, content)
    let mut content_lines: Vec<(usize, usize, &str)> = Vec::new();
    let mut offset = 0;
    for (i, raw) in text.split_inclusive('\n').enumerate() {
        let line = raw.strip_suffix('\n').unwrap_or(raw);
        if !line.trim().is_empty() {
            content_lines.push((i + 1, offset, line));
        }
        offset += raw.len();
    }
    if content_lines.is_empty() {
        return Ok((Vec::new(), 0));
    }

    let mut entries = Vec::new();
    let mut clean_len = text.len();
    let last = content_lines.len() - 1;
    for (pos, &(lineno, start, line)) in content_lines.iter().enumerate() {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            // A syntax error on the final line is a truncated append; the
            // record is dropped and the clean prefix ends before it.
            Err(_) if pos == last => {
                clean_len = start;
                break;
            }
            Err(e) => {
                return Err(StoreError::Malformed {
                    line: lineno,
                    message: e.to_string(),
                })
            }
        };
        if pos == 0 {
            let header: HeaderLine = serde_json::from_value(value)
                .map_err(|_| StoreError::MissingHeader { line: lineno })?;
            if header.praxis_version != STORE_FORMAT_VERSION {
                return Err(StoreError::UnsupportedVersion {
                    found: header.praxis_version,
                });
            }
            continue;
        }
        let parsed: EntryLine =
            serde_json::from_value(value).map_err(|e| StoreError::Malformed {
                line: lineno,
                message: e.to_string(),
            })?;
        let expected = entries.len() as u64;
        if parsed.id != expected {
            return Err(StoreError::NonSequentialIds {
                line: lineno,
                expected,
                found: parsed.id,
            });
        }
        let entry = parsed.into_entry().map_err(|e| StoreError::Malformed {
            line: lineno,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok((entries, clean_len))
}

/// Read a JSON Lines file of trajectory records. Blank lines are skipped;
/// malformed lines are errors naming the line.
pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>, StoreError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord =
            serde_json::from_str(line).map_err(|e| StoreError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Write trajectory records as JSON Lines.
pub fn write_trajectories(
    path: impl AsRef<Path>,
    records: &[TrajectoryRecord],
) -> Result<(), StoreError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("trajectory serializes"));
        out.push('\n');
    }
    std::fs::write(path.as_ref(), out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{canonicalize_token, ActionKind};

    fn action(target: &str) -> ActionRecord {
        ActionRecord::new(ActionKind::Click, canonicalize_token(target).unwrap(), None)
    }

    fn new_entry(env: &[&str], directive: &str) -> NewEntry {
        NewEntry {
            env_pre: EnvState::from_observation(env),
            internal: InternalState::new(directive, "").unwrap(),
            action: action("submit button"),
            env_post: EnvState::from_observation(env),
            episode_success: true,
            created_at: 7,
        }
    }

    fn step(obs: &[&str], post: &[&str]) -> TrajectoryStep {
        TrajectoryStep {
            obs: obs.iter().map(|s| s.to_string()).collect(),
            progress: "step".into(),
            action: action("link"),
            post_obs: post.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn append_assigns_sequential_ids() {
        let mut store = MemoryStore::in_memory();
        assert_eq!(store.append(new_entry(&["a"], "x")).unwrap(), 0);
        assert_eq!(store.append(new_entry(&["b"], "x")).unwrap(), 1);
        assert_eq!(store.next_id(), 2);
    }

    #[test]
    fn ingest_produces_one_entry_per_step() {
        let mut store = MemoryStore::in_memory();
        let record = TrajectoryRecord {
            episode_id: "e0".into(),
            directive: "reach the end".into(),
            steps: vec![step(&["a"], &["b"]), step(&["b"], &["c"]), step(&["c"], &["d"])],
            success: true,
        };
        let ids = store.ingest_trajectory(&record, 11).unwrap();
        assert_eq!(ids, vec![0, 1, 2]);
        assert!(store.entries().iter().all(|e| e.episode_success));
        assert_eq!(store.entries()[1].env_pre, EnvState::from_observation(&["b"]));
    }

    #[test]
    fn ingest_rejects_broken_chaining_naming_the_step() {
        let mut store = MemoryStore::in_memory();
        let record = TrajectoryRecord {
            episode_id: "e0".into(),
            directive: "reach the end".into(),
            steps: vec![step(&["a"], &["b"]), step(&["b"], &["c"]), step(&["x"], &["d"])],
            success: false,
        };
        match store.ingest_trajectory(&record, 0) {
            Err(StoreError::Chaining { step }) => assert_eq!(step, 2),
            other => panic!("expected chaining violation, got {other:?}"),
        }
        assert!(store.is_empty(), "validation failures must append nothing");
    }

    #[test]
    fn ingest_rejects_empty_trajectories() {
        let mut store = MemoryStore::in_memory();
        let record = TrajectoryRecord {
            episode_id: "e0".into(),
            directive: "objective".into(),
            steps: vec![],
            success: true,
        };
        assert!(matches!(
            store.ingest_trajectory(&record, 0),
            Err(StoreError::EmptySteps)
        ));
    }

    #[test]
    fn mixed_corpus_yields_contiguous_ids() {
        let mut store = MemoryStore::in_memory();
        let first = TrajectoryRecord {
            episode_id: "e0".into(),
            directive: "first objective".into(),
            steps: vec![step(&["a"], &["b"]), step(&["b"], &["c"]), step(&["c"], &["d"])],
            success: true,
        };
        let second = TrajectoryRecord {
            episode_id: "e1".into(),
            directive: "second objective".into(),
            steps: vec![step(&["p"], &["q"]), step(&["q"], &["r"])],
            success: false,
        };
        store.ingest_trajectory(&first, 0).unwrap();
        store.ingest_trajectory(&second, 0).unwrap();
        let ids: Vec<_> = store.entries().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn save_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        let mut store = MemoryStore::in_memory();
        for i in 0..5 {
            store
                .append(new_entry(&["a", &format!("t{i}")], "an objective"))
                .unwrap();
        }
        store.save_snapshot(&path).unwrap();
        let loaded = MemoryStore::load(&path).unwrap();
        assert_eq!(loaded.entries(), store.entries());
    }

    #[test]
    fn empty_file_loads_as_empty_store() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        std::fs::write(&path, "").unwrap();
        let store = MemoryStore::load(&path).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn missing_field_is_an_error_citing_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        std::fs::write(
            &path,
            "{\"praxis_version\": 1}\n{\"id\": 0, \"env_pre\": [\"a\"]}\n{\"praxis_version\": 1}\n",
        )
        .unwrap();
        match MemoryStore::load(&path) {
            Err(StoreError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line 2, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        std::fs::write(&path, "{\"praxis_version\": 9}\n").unwrap();
        assert!(matches!(
            MemoryStore::load(&path),
            Err(StoreError::UnsupportedVersion { found: 9 })
        ));
    }

    #[test]
    fn truncated_tail_is_dropped_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        {
            let mut store = MemoryStore::open(&path).unwrap();
            store.append(new_entry(&["a"], "first")).unwrap();
            store.append(new_entry(&["b"], "second")).unwrap();
        }
        // Simulate a crash mid-append at the byte level.
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        let store = MemoryStore::load(&path).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.entries()[0].internal.directive(), "first");
    }

    #[test]
    fn open_truncates_damage_and_appends_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        {
            let mut store = MemoryStore::open(&path).unwrap();
            store.append(new_entry(&["a"], "first")).unwrap();
        }
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        {
            let mut store = MemoryStore::open(&path).unwrap();
            assert_eq!(store.len(), 0);
            assert_eq!(store.append(new_entry(&["c"], "third")).unwrap(), 0);
        }
        let reloaded = MemoryStore::load(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        assert_eq!(reloaded.entries()[0].internal.directive(), "third");
    }

    #[test]
    fn append_is_durable_before_return() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        let mut store = MemoryStore::open(&path).unwrap();
        store.append(new_entry(&["a"], "persisted")).unwrap();
        // Fresh read from disk without touching the open handle.
        let independent = MemoryStore::load(&path).unwrap();
        assert_eq!(independent.len(), 1);
    }

    #[test]
    fn non_sequential_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.jsonl");
        let mut store = MemoryStore::in_memory();
        store.append(new_entry(&["a"], "x")).unwrap();
        store.save_snapshot(&path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str(&text.lines().nth(1).unwrap().replace("\"id\":0", "\"id\":5"));
        text.push('\n');
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            MemoryStore::load(&path),
            Err(StoreError::NonSequentialIds { expected: 1, found: 5, .. })
        ));
    }

    #[test]
    fn wire_format_matches_documented_schema() {
        let entry = MemoryEntry {
            id: 0,
            env_pre: EnvState::from_observation(&["b", "a"]),
            internal: InternalState::new("goal", "note").unwrap(),
            action: ActionRecord::new(
                ActionKind::Type,
                canonicalize_token("search box").unwrap(),
                Some("red shoes".into()),
            ),
            env_post: EnvState::from_observation(&["c"]),
            episode_success: false,
            created_at: 42,
        };
        let json = serde_json::to_string(&EntryLine::from_entry(&entry)).unwrap();
        assert_eq!(
            json,
            "{\"id\":0,\"env_pre\":[\"a\",\"b\"],\"directive\":\"goal\",\"progress\":\"note\",\
             \"action\":{\"kind\":\"type\",\"target\":\"search box\",\"arg\":\"red shoes\"},\
             \"env_post\":[\"c\"],\"success\":false,\"ts\":42}"
        );
    }
}
