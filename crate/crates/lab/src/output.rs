//! Output directory with atomic (temp file + rename) writes and content hashes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::LabError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Collects every file a scenario writes, in write order.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, LabError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| LabError::Io { path: root.clone(), source })?;
        Ok(Self { root, files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes `name` atomically; the file is not recorded in the manifest list.
    pub fn write_untracked(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, LabError> {
        let path = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp{}", std::process::id()));
        let io = |source| LabError::Io { path: path.clone(), source };
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        fs::rename(&tmp, &path).map_err(io)?;
        Ok(path)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), LabError> {
        self.write_untracked(name, bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileRecord { name: name.to_owned(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), LabError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Runs `fill` against an in-memory CSV writer and writes the result.
    pub fn write_csv(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
    ) -> Result<(), LabError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn writes_and_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path().join("nested")).unwrap();
        out.write("a.txt", b"one").unwrap();
        out.write("a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(out.root().join("a.txt")).unwrap(), b"two");
        assert_eq!(out.files().len(), 1);
        assert_eq!(out.files()[0].bytes, 3);
        let leftovers: Vec<_> = std::fs::read_dir(out.root())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with('.'))
            .collect();
        assert!(leftovers.is_empty());
    }
}
