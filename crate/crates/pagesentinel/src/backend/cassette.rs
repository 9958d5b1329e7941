//! Record/replay of backend traffic.
//!
//! A cassette is a JSONL file mapping request fingerprints to raw replies.
//! Recording wraps a live backend and appends every exchange; replaying
//! serves recorded replies without any backend at all. Because the
//! pipeline keeps all variable content in the system prompt and pins the
//! user turn, fingerprints are stable across runs: a recorded evaluation
//! can be re-run offline, byte for byte.

use super::{Backend, BackendError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

/// Stable fingerprint of one request: sha-256 over the system prompt, a
/// record-separator byte, and the user prompt.
pub fn request_fingerprint(system: &str, user: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(system.as_bytes());
    hasher.update([0x1e]);
    hasher.update(user.as_bytes());
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct CassetteLine {
    hash: String,
    reply: String,
}

/// Pass-through backend that appends every exchange to a cassette file.
pub struct CassetteRecorder<B> {
    inner: B,
    writer: Mutex<BufWriter<File>>,
}

impl<B: Backend> CassetteRecorder<B> {
    pub fn create(path: &Path, inner: B) -> Result<Self, BackendError> {
        let file = File::create(path)?;
        Ok(CassetteRecorder {
            inner,
            writer: Mutex::new(BufWriter::new(file)),
        })
    }
}

impl<B: Backend> Backend for CassetteRecorder<B> {
    fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let reply = self.inner.complete(system, user)?;
        let line = CassetteLine {
            hash: request_fingerprint(system, user),
            reply: reply.clone(),
        };
        let mut writer = self.writer.lock().expect("cassette writer lock");
        serde_json::to_writer(&mut *writer, &line)
            .map_err(|err| BackendError::Io(std::io::Error::other(err)))?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(reply)
    }

    fn name(&self) -> &'static str {
        "cassette-recorder"
    }
}

/// Backend that answers purely from a recorded cassette.
pub struct CassetteReplayer {
    replies: HashMap<String, String>,
    path: PathBuf,
}

impl CassetteReplayer {
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path)?;
        let mut replies = HashMap::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteLine = serde_json::from_str(&line)
                .map_err(|err| BackendError::Io(std::io::Error::other(err)))?;
            replies.insert(entry.hash, entry.reply);
        }
        Ok(CassetteReplayer {
            replies,
            path: path.to_path_buf(),
        })
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl Backend for CassetteReplayer {
    fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let fingerprint = request_fingerprint(system, user);
        self.replies.get(&fingerprint).cloned().ok_or_else(|| {
            log::error!(
                "cassette {} has no entry for fingerprint {fingerprint}",
                self.path.display()
            );
            BackendError::CassetteMiss { fingerprint }
        })
    }

    fn name(&self) -> &'static str {
        "cassette-replayer"
    }
}
