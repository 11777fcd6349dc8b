use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::corpus::ChunkId;
use crate::error::{Error, Result};

/// Ids of ground-truth chunks already judged contradictory.
///
/// On disk: one 16-digit hex id per line in ascending order. Blank lines and
/// lines starting with `#` are ignored on load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChunkBin {
    ids: BTreeSet<ChunkId>,
}

impl ChunkBin {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(source: &str) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for (n, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let id = ChunkId::from_hex(line).ok_or_else(|| {
                Error::InsufficientData(format!("bin line {}: {line:?} is not a chunk id", n + 1))
            })?;
            ids.insert(id);
        }
        Ok(Self { ids })
    }

    /// Loads a bin; a missing file is an empty bin.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(s) => Self::parse(&s),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.ids.len() * 17);
        for id in &self.ids {
            out.push_str(&id.to_hex());
            out.push('\n');
        }
        out
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = sibling(path, "tmp");
        fs::write(&tmp, self.render()).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, id: ChunkId) -> bool {
        self.ids.contains(&id)
    }

    /// Returns whether the id was new.
    pub fn insert(&mut self, id: ChunkId) -> bool {
        self.ids.insert(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ChunkId> + '_ {
        self.ids.iter().copied()
    }
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".");
    name.push(ext);
    path.with_file_name(name)
}

/// Exclusive claim on a bin file, held as `<bin>.lock` until dropped.
#[derive(Debug)]
pub struct BinLock {
    path: PathBuf,
}

impl BinLock {
    pub fn acquire(bin_path: &Path) -> Result<Self> {
        let path = sibling(bin_path, "lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(bin_path.to_path_buf()))
            }
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for BinLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
