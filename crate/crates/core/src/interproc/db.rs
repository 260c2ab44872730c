use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::symstate::Summary;

const MAGIC: &[u8; 8] = b"DVGSUMDB";
pub const DB_FORMAT_VERSION: u32 = 1;
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("summary database I/O: {0}")]
    Io(#[from] io::Error),
    #[error("summary database was written by format {format} / tool {tool}; expected format {DB_FORMAT_VERSION} / tool {TOOL_VERSION}")]
    VersionMismatch { format: u32, tool: String },
    #[error("summary database is corrupt: {0}")]
    Corrupt(String),
}

#[derive(Serialize, Deserialize)]
struct Entry {
    name: String,
    key: String,
    summary: Summary,
}

/// Persisted summaries, each tagged with the content key it was computed for.
#[derive(Debug, Clone, Default)]
pub struct SummaryDb {
    entries: BTreeMap<String, (String, Arc<Summary>)>,
}

impl SummaryDb {
    pub fn insert(&mut self, name: String, key: String, summary: Arc<Summary>) {
        self.entries.insert(name, (key, summary));
    }

    /// The stored summary if it was computed for the same content key.
    pub fn lookup(&self, name: &str, key: &str) -> Option<Arc<Summary>> {
        self.entries
            .get(name)
            .filter(|(k, _)| k == key)
            .map(|(_, s)| s.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<(), DbError> {
        out.write_all(MAGIC)?;
        out.write_all(&DB_FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(TOOL_VERSION.len() as u32).to_le_bytes())?;
        out.write_all(TOOL_VERSION.as_bytes())?;
        out.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, (key, summary)) in &self.entries {
            let e = Entry {
                name: name.clone(),
                key: key.clone(),
                summary: (**summary).clone(),
            };
            let bytes = serde_json::to_vec(&e).map_err(|e| DbError::Corrupt(e.to_string()))?;
            out.write_all(&(bytes.len() as u64).to_le_bytes())?;
            out.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self, DbError> {
        let corrupt = |what: &str| DbError::Corrupt(what.to_string());
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| corrupt("truncated header"))?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let format = read_u32(input).map_err(|_| corrupt("truncated header"))?;
        let tlen = read_u32(input).map_err(|_| corrupt("truncated header"))? as usize;
        if tlen > 256 {
            return Err(corrupt("bad tool version"));
        }
        let mut tool = vec![0u8; tlen];
        input
            .read_exact(&mut tool)
            .map_err(|_| corrupt("truncated header"))?;
        let tool = String::from_utf8(tool).map_err(|_| corrupt("bad tool version"))?;
        if format != DB_FORMAT_VERSION || tool != TOOL_VERSION {
            return Err(DbError::VersionMismatch { format, tool });
        }
        let n = read_u32(input).map_err(|_| corrupt("truncated header"))?;
        let mut db = SummaryDb::default();
        for i in 0..n {
            let mut len = [0u8; 8];
            input
                .read_exact(&mut len)
                .map_err(|_| DbError::Corrupt(format!("truncated entry {i}")))?;
            let len = u64::from_le_bytes(len);
            let mut bytes = Vec::new();
            input.take(len).read_to_end(&mut bytes)?;
            if bytes.len() as u64 != len {
                return Err(DbError::Corrupt(format!("truncated entry {i}")));
            }
            let e: Entry = serde_json::from_slice(&bytes)
                .map_err(|e| DbError::Corrupt(format!("entry {i}: {e}")))?;
            db.insert(e.name, e.key, Arc::new(e.summary));
        }
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(corrupt("trailing bytes"));
        }
        Ok(db)
    }

    /// A missing file is an empty database.
    pub fn load(path: &Path) -> Result<Self, DbError> {
        match std::fs::File::open(path) {
            Ok(f) => Self::read_from(&mut io::BufReader::new(f)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DbError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, &buf)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

fn read_u32(input: &mut impl Read) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SummaryDb {
        let mut db = SummaryDb::default();
        let s = Summary {
            procedure: "f".into(),
            params: vec!["x".into()],
            specs: Vec::new(),
            k: 3,
            truncated: false,
            incomplete: false,
            unify_failures: 0,
        };
        db.insert("f".into(), "abc".into(), Arc::new(s));
        db
    }

    #[test]
    fn round_trip() {
        let db = sample();
        let mut buf = Vec::new();
        db.write_to(&mut buf).unwrap();
        let back = SummaryDb::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert!(back.lookup("f", "abc").is_some());
        assert!(back.lookup("f", "other").is_none());
    }

    #[test]
    fn rejects_damage() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            SummaryDb::read_from(&mut bad.as_slice()),
            Err(DbError::Corrupt(_))
        ));
        let short = &buf[..buf.len() - 3];
        assert!(matches!(
            SummaryDb::read_from(&mut &short[..]),
            Err(DbError::Corrupt(_))
        ));
        let mut versioned = buf.clone();
        versioned[8] = 99;
        assert!(matches!(
            SummaryDb::read_from(&mut versioned.as_slice()),
            Err(DbError::VersionMismatch { format: 99, .. })
        ));
    }
}
