//! Filesystem persistence for sessions and their artifacts.
//!
//! ```text
//! <root>/<session_id>/session.json     the SessionRecord
//! <root>/<session_id>/<digest>.png     images and masks, named by content digest
//! ```
//!
//! Every file is written to a temporary name and renamed into place.
//! Callers write artifacts before the record that references them, so an
//! interrupted stage leaves at worst an unreferenced artifact, never a
//! record pointing at a missing file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::codec::{self, CodecError};
use crate::model::{ArtifactId, ArtifactRef, BinaryMask, RasterImage, SessionRecord};

const RECORD_FILE: &str = "session.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("session {0} not found")]
    NotFound(String),
    #[error("artifact {0} not found")]
    MissingArtifact(ArtifactId),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("corrupt store entry {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("injected fault at {0}")]
    Injected(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_owned(), source }
}

/// Test hook that simulates a crash at a chosen write step.
///
/// Each atomic write has two steps: writing the temporary file and renaming
/// it into place. Once the armed step is reached that step and every later
/// one fail, as if the process had died there.
#[derive(Debug, Clone, Default)]
pub struct FaultInjector {
    state: Arc<Mutex<FaultState>>,
}

#[derive(Debug, Default)]
struct FaultState {
    countdown: Option<usize>,
    crashed_at: Option<String>,
    steps_seen: usize,
}

impl FaultInjector {
    /// Fail at the `step`-th upcoming write step (0 = the very next one).
    pub fn arm(&self, step: usize) {
        let mut s = self.state.lock().unwrap();
        s.countdown = Some(step);
        s.crashed_at = None;
    }

    pub fn disarm(&self) {
        let mut s = self.state.lock().unwrap();
        s.countdown = None;
        s.crashed_at = None;
    }

    /// Label of the step where the simulated crash happened.
    pub fn crashed_at(&self) -> Option<String> {
        self.state.lock().unwrap().crashed_at.clone()
    }

    /// Total write steps observed since creation.
    pub fn steps_seen(&self) -> usize {
        self.state.lock().unwrap().steps_seen
    }

    fn check(&self, label: String) -> Result<(), StoreError> {
        let mut s = self.state.lock().unwrap();
        s.steps_seen += 1;
        if let Some(at) = &s.crashed_at {
            return Err(StoreError::Injected(format!("{label} (after crash at {at})")));
        }
        match s.countdown {
            Some(0) => {
                s.countdown = None;
                s.crashed_at = Some(label.clone());
                Err(StoreError::Injected(label))
            }
            Some(n) => {
                s.countdown = Some(n - 1);
                Ok(())
            }
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
    faults: FaultInjector,
}

fn check_session_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_owned()))
    }
}

impl ArtifactStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Self { root, faults: FaultInjector::default() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn faults(&self) -> &FaultInjector {
        &self.faults
    }

    fn session_dir(&self, session_id: &str) -> Result<PathBuf, StoreError> {
        check_session_id(session_id)?;
        Ok(self.root.join(session_id))
    }

    fn artifact_path(&self, session_id: &str, id: &ArtifactId) -> Result<PathBuf, StoreError> {
        Ok(self.session_dir(session_id)?.join(format!("{id}.png")))
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("?").to_owned();
        let dir = path.parent().expect("store paths have a parent");
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let tmp = dir.join(format!(".{name}.{}.tmp", uuid::Uuid::new_v4().simple()));

        self.faults.check(format!("write {name}"))?;
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
        drop(file);

        self.faults.check(format!("rename {name}"))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn save_record(&self, record: &SessionRecord) -> Result<(), StoreError> {
        let path = self.session_dir(&record.session_id)?.join(RECORD_FILE);
        let json = serde_json::to_vec_pretty(record).expect("records always serialize");
        self.write_atomic(&path, &json)
    }

    pub fn load_record(&self, session_id: &str) -> Result<SessionRecord, StoreError> {
        let path = self.session_dir(session_id)?.join(RECORD_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(session_id.to_owned()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt { path, reason: e.to_string() })
    }

    pub fn exists(&self, session_id: &str) -> bool {
        self.session_dir(session_id).map(|d| d.join(RECORD_FILE).is_file()).unwrap_or(false)
    }

    /// All sessions with a readable record, oldest first.
    pub fn list_sessions(&self) -> Result<Vec<SessionRecord>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let Some(name) = entry.file_name().to_str().map(str::to_owned) else { continue };
            if check_session_id(&name).is_err() || !entry.path().join(RECORD_FILE).is_file() {
                continue;
            }
            out.push(self.load_record(&name)?);
        }
        out.sort_by(|a, b| (a.created_at, &a.session_id).cmp(&(b.created_at, &b.session_id)));
        Ok(out)
    }

    fn put_png(&self, session_id: &str, id: &ArtifactId, encode: impl FnOnce() -> Vec<u8>) -> Result<(), StoreError> {
        let path = self.artifact_path(session_id, id)?;
        if path.is_file() {
            return Ok(());
        }
        self.write_atomic(&path, &encode())
    }

    pub fn put_image(&self, session_id: &str, image: &RasterImage) -> Result<ArtifactRef, StoreError> {
        let aref = ArtifactRef::of_image(image);
        self.put_png(session_id, &aref.id, || codec::encode_png(image))?;
        Ok(aref)
    }

    pub fn put_mask(&self, session_id: &str, mask: &BinaryMask) -> Result<ArtifactRef, StoreError> {
        let aref = ArtifactRef::of_mask(mask);
        self.put_png(session_id, &aref.id, || codec::encode_mask_png(mask))?;
        Ok(aref)
    }

    pub fn has_artifact(&self, session_id: &str, id: &ArtifactId) -> bool {
        self.artifact_path(session_id, id).map(|p| p.is_file()).unwrap_or(false)
    }

    /// Raw PNG bytes of a stored artifact.
    pub fn png_bytes(&self, session_id: &str, id: &ArtifactId) -> Result<Vec<u8>, StoreError> {
        let path = self.artifact_path(session_id, id)?;
        fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                StoreError::MissingArtifact(id.clone())
            } else {
                io_err(&path)(e)
            }
        })
    }

    fn corrupt(&self, session_id: &str, id: &ArtifactId, reason: impl ToString) -> StoreError {
        let path = self.artifact_path(session_id, id).unwrap_or_default();
        StoreError::Corrupt { path, reason: reason.to_string() }
    }

    /// Loads an image and checks it against its digest.
    pub fn get_image(&self, session_id: &str, aref: &ArtifactRef) -> Result<RasterImage, StoreError> {
        let bytes = self.png_bytes(session_id, &aref.id)?;
        let image = codec::decode_png(&bytes).map_err(|e: CodecError| self.corrupt(session_id, &aref.id, e))?;
        if image.digest() != aref.id {
            return Err(self.corrupt(session_id, &aref.id, "content does not match digest"));
        }
        Ok(image)
    }

    /// Loads a mask and checks it against its digest.
    pub fn get_mask(&self, session_id: &str, aref: &ArtifactRef) -> Result<BinaryMask, StoreError> {
        let bytes = self.png_bytes(session_id, &aref.id)?;
        let mask = codec::decode_mask_png(&bytes).map_err(|e| self.corrupt(session_id, &aref.id, e))?;
        if mask.digest() != aref.id {
            return Err(self.corrupt(session_id, &aref.id, "content does not match digest"));
        }
        Ok(mask)
    }

    /// References in `record` (and its history) with no file behind them.
    pub fn dangling_refs(&self, record: &SessionRecord) -> Vec<ArtifactId> {
        let sid = &record.session_id;
        let mut ids: Vec<ArtifactId> = record.artifact_refs().into_iter().map(|a| a.id.clone()).collect();
        ids.extend(record.history.iter().filter_map(|h| h.artifact.clone()));
        ids.sort();
        ids.dedup();
        ids.into_iter().filter(|id| !self.has_artifact(sid, id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ImageSize, PromptRecord, SteppingClock};

    fn record(id: &str) -> SessionRecord {
        let clock = SteppingClock::default();
        SessionRecord::new(id, PromptRecord::new("p", "t"), 1, ImageSize { width: 16, height: 16 }, &clock)
    }

    #[test]
    fn record_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let rec = record("abc");
        store.save_record(&rec).unwrap();
        assert_eq!(store.load_record("abc").unwrap(), rec);
        assert!(matches!(store.load_record("nope"), Err(StoreError::NotFound(_))));
        assert!(matches!(store.load_record("../x"), Err(StoreError::InvalidId(_))));
        assert_eq!(store.list_sessions().unwrap().len(), 1);
    }

    #[test]
    fn artifacts_are_content_addressed_and_verified() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let img = RasterImage::filled(4, 4, [1, 2, 3]).unwrap();
        let a = store.put_image("s", &img).unwrap();
        assert_eq!(a, store.put_image("s", &img).unwrap());
        assert_eq!(store.get_image("s", &a).unwrap(), img);

        let mask = BinaryMask::from_fn(4, 4, |x, _| x == 1).unwrap();
        let m = store.put_mask("s", &mask).unwrap();
        assert_eq!(store.get_mask("s", &m).unwrap(), mask);

        // swap the file contents behind the digest
        let other = codec::encode_png(&RasterImage::filled(4, 4, [9, 9, 9]).unwrap());
        fs::write(dir.path().join("s").join(format!("{}.png", a.id)), other).unwrap();
        assert!(matches!(store.get_image("s", &a), Err(StoreError::Corrupt { .. })));
    }

    #[test]
    fn injected_fault_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let img = RasterImage::filled(4, 4, [1, 2, 3]).unwrap();
        store.faults().arm(1);
        assert!(matches!(store.put_image("s", &img), Err(StoreError::Injected(_))));
        assert!(!store.has_artifact("s", &img.digest()));
        assert_eq!(store.faults().crashed_at().as_deref(), Some(format!("rename {}.png", img.digest()).as_str()));
        // still down until disarmed
        assert!(store.save_record(&record("s")).is_err());
        store.faults().disarm();
        store.save_record(&record("s")).unwrap();
    }
}
