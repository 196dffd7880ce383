//! Disk-backed keyed store for the reference change signature of one
//! category.
//!
//! On-disk format (text, `\n` line endings, decimal integers):
//!
//! ```text
//! ODSIG 1
//! category <name>
//! lssc <N>
//! rec <num> <id> <val>      (N lines, keys 1..=N in order)
//! ```
//!
//! Loading is strict: any byte sequence that is not exactly the canonical
//! encoding of a valid signature is reported as corrupt.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Value, VarId};
use crate::monitor::ChangeEvent;

pub const MAGIC: &str = "ODSIG 1";

/// One stored low-store change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LsRecord {
    pub num: u64,
    pub id: VarId,
    pub val: Value,
}

impl From<ChangeEvent> for LsRecord {
    fn from(c: ChangeEvent) -> Self {
        LsRecord {
            num: c.num,
            id: c.id,
            val: c.val,
        }
    }
}

/// A frozen signature: records keyed densely by `1..=lssc`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub category: String,
    pub records: Vec<LsRecord>,
    pub lssc: u64,
}

#[derive(Debug, Error)]
pub enum SigError {
    #[error("cannot access signature file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt signature file{}: {reason}", path.as_ref().map(|p| format!(" {}", p.display())).unwrap_or_default())]
    Corrupt {
        path: Option<PathBuf>,
        reason: String,
    },
    #[error("signature file belongs to category `{found}`, expected `{expected}`")]
    CategoryMismatch { expected: String, found: String },
    #[error("record key {got} is not dense: expected {expected}")]
    NonDenseKey { expected: u64, got: u64 },
    #[error("record key {0} already stored")]
    DuplicateKey(u64),
    #[error("change count {count} does not match {records} stored records")]
    CountMismatch { count: u64, records: u64 },
    #[error("change count already set")]
    CountAlreadySet,
    #[error("change count not set")]
    CountUnset,
    #[error("signature is frozen")]
    Frozen,
    #[error("invalid category name `{0}`")]
    InvalidCategory(String),
}

impl Signature {
    pub fn get_record(&self, num: u64) -> Option<&LsRecord> {
        let idx = usize::try_from(num.checked_sub(1)?).ok()?;
        self.records.get(idx)
    }

    /// Checks the dense-key invariants.
    pub fn check(&self) -> Result<(), SigError> {
        if !valid_category(&self.category) {
            return Err(SigError::InvalidCategory(self.category.clone()));
        }
        if self.lssc != self.records.len() as u64 {
            return Err(SigError::CountMismatch {
                count: self.lssc,
                records: self.records.len() as u64,
            });
        }
        for (i, r) in self.records.iter().enumerate() {
            let expected = i as u64 + 1;
            if r.num != expected {
                return Err(SigError::NonDenseKey {
                    expected,
                    got: r.num,
                });
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "category {}", self.category);
        let _ = writeln!(out, "lssc {}", self.lssc);
        for r in &self.records {
            let _ = writeln!(out, "rec {} {} {}", r.num, r.id.0, r.val);
        }
        out
    }

    pub fn decode(text: &str) -> Result<Signature, SigError> {
        let corrupt = |reason: String| SigError::Corrupt { path: None, reason };
        if !text.ends_with('\n') {
            return Err(corrupt("missing final newline".into()));
        }
        let mut lines = text[..text.len() - 1].split('\n');
        if lines.next() != Some(MAGIC) {
            return Err(corrupt("bad header".into()));
        }
        let category = lines
            .next()
            .and_then(|l| l.strip_prefix("category "))
            .ok_or_else(|| corrupt("missing category line".into()))?
            .to_string();
        let lssc: u64 = lines
            .next()
            .and_then(|l| l.strip_prefix("lssc "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| corrupt("missing or malformed lssc line".into()))?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(' ').collect();
            let rec = match fields.as_slice() {
                ["rec", num, id, val] => (|| {
                    Some(LsRecord {
                        num: num.parse().ok()?,
                        id: VarId(id.parse().ok().filter(|&v| v > 0)?),
                        val: val.parse().ok()?,
                    })
                })(),
                _ => None,
            };
            records.push(rec.ok_or_else(|| corrupt(format!("malformed record line {}", i + 4)))?);
        }
        let sig = Signature {
            category,
            records,
            lssc,
        };
        sig.check().map_err(|e| corrupt(e.to_string()))?;
        // Reject anything that is not byte-for-byte canonical (e.g. `+1`, `01`).
        if sig.encode() != text {
            return Err(corrupt("non-canonical encoding".into()));
        }
        Ok(sig)
    }
}

fn valid_category(name: &str) -> bool {
    !name.is_empty() && !name.contains('\n')
}

/// Store handle used while a signature is being built and afterwards for
/// lookups. Records live in memory; the file is written when the count is
/// set (and on explicit [`SignatureStore::save`]).
#[derive(Debug)]
pub struct SignatureStore {
    path: Option<PathBuf>,
    category: String,
    records: Vec<LsRecord>,
    lssc: Option<u64>,
}

impl SignatureStore {
    /// Opens `path` for `category`. A missing file yields an empty store; an
    /// existing one must hold a valid signature for the same category.
    pub fn open(path: impl AsRef<Path>, category: &str) -> Result<SignatureStore, SigError> {
        let path = path.as_ref().to_path_buf();
        if !valid_category(category) {
            return Err(SigError::InvalidCategory(category.into()));
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Ok(SignatureStore {
                    path: Some(path),
                    category: category.into(),
                    records: Vec::new(),
                    lssc: None,
                })
            }
            Err(source) => return Err(SigError::Io { path, source }),
        };
        let text = String::from_utf8(bytes).map_err(|_| SigError::Corrupt {
            path: Some(path.clone()),
            reason: "not UTF-8".into(),
        })?;
        let sig = Signature::decode(&text).map_err(|e| match e {
            SigError::Corrupt { reason, .. } => SigError::Corrupt {
                path: Some(path.clone()),
                reason,
            },
            other => other,
        })?;
        if sig.category != category {
            return Err(SigError::CategoryMismatch {
                expected: category.into(),
                found: sig.category,
            });
        }
        Ok(SignatureStore {
            path: Some(path),
            category: sig.category,
            records: sig.records,
            lssc: Some(sig.lssc),
        })
    }

    /// Opens `path` discarding any previous content.
    pub fn create(path: impl AsRef<Path>, category: &str) -> Result<SignatureStore, SigError> {
        let path = path.as_ref();
        match fs::remove_file(path) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(source) => {
                return Err(SigError::Io {
                    path: path.into(),
                    source,
                })
            }
        }
        Self::open(path, category)
    }

    /// A store without a backing file.
    pub fn in_memory(category: &str) -> Result<SignatureStore, SigError> {
        if !valid_category(category) {
            return Err(SigError::InvalidCategory(category.into()));
        }
        Ok(SignatureStore {
            path: None,
            category: category.into(),
            records: Vec::new(),
            lssc: None,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn put_record(&mut self, r: LsRecord) -> Result<(), SigError> {
        if self.lssc.is_some() {
            return Err(SigError::Frozen);
        }
        let expected = self.records.len() as u64 + 1;
        if r.num < expected {
            return Err(SigError::DuplicateKey(r.num));
        }
        if r.num != expected {
            return Err(SigError::NonDenseKey {
                expected,
                got: r.num,
            });
        }
        self.records.push(r);
        Ok(())
    }

    /// `None` is a miss: no record with that key.
    pub fn get_record(&self, num: u64) -> Option<&LsRecord> {
        let idx = usize::try_from(num.checked_sub(1)?).ok()?;
        self.records.get(idx)
    }

    /// Stores the total change count, freezing the signature and persisting
    /// it when file-backed.
    pub fn set_count(&mut self, lssc: u64) -> Result<(), SigError> {
        if self.lssc.is_some() {
            return Err(SigError::CountAlreadySet);
        }
        if lssc != self.records.len() as u64 {
            return Err(SigError::CountMismatch {
                count: lssc,
                records: self.records.len() as u64,
            });
        }
        self.lssc = Some(lssc);
        self.save()
    }

    pub fn get_count(&self) -> Option<u64> {
        self.lssc
    }

    pub fn save(&self) -> Result<(), SigError> {
        let sig = self.signature()?;
        if let Some(path) = &self.path {
            fs::write(path, sig.encode()).map_err(|source| SigError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }

    /// The frozen signature; fails while the count is unset.
    pub fn signature(&self) -> Result<Signature, SigError> {
        let lssc = self.lssc.ok_or(SigError::CountUnset)?;
        Ok(Signature {
            category: self.category.clone(),
            records: self.records.clone(),
            lssc,
        })
    }
}
