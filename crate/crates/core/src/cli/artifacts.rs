//! Output files are staged as hidden temporaries and renamed into place
//! together; anything staged or renamed is removed if the run fails, and
//! an output directory created for the run is removed again.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub struct ArtifactWriter {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
    created_dir: bool,
    committed: bool,
}

impl ArtifactWriter {
    /// Creates the output directory if needed and checks it is writable.
    pub fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let writer = Self {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
            created_dir,
            committed: false,
        };
        let probe = dir.join(format!(".write-probe-{}", std::process::id()));
        fs::write(&probe, b"").map_err(|e| io_error(dir, e))?;
        let _ = fs::remove_file(&probe);
        Ok(writer)
    }

    pub fn stage(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let temp = self.dir.join(format!(".{name}.tmp-{}", std::process::id()));
        fs::write(&temp, contents).map_err(|e| io_error(&temp, e))?;
        self.staged.push((temp, target));
        Ok(())
    }

    /// Renames every staged file into place, returning the final paths.
    /// On failure, files already renamed are removed as well.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::new();
        for (temp, target) in &self.staged {
            if let Err(e) = fs::rename(temp, target) {
                for path in &done {
                    let _ = fs::remove_file(path);
                }
                return Err(io_error(target, e));
            }
            done.push(target.clone());
        }
        self.committed = true;
        Ok(done)
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if !self.committed {
            for (temp, _) in &self.staged {
                let _ = fs::remove_file(temp);
            }
            if self.created_dir {
                // only succeeds while empty
                let _ = fs::remove_dir(&self.dir);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_writer_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut w = ArtifactWriter::new(dir.path()).unwrap();
            w.stage("a.txt", b"x").unwrap();
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

        let fresh = dir.path().join("new");
        drop(ArtifactWriter::new(&fresh).unwrap());
        assert!(!fresh.exists());

        let mut w = ArtifactWriter::new(dir.path()).unwrap();
        w.stage("a.txt", b"x").unwrap();
        w.stage("b.txt", b"y").unwrap();
        let paths = w.commit().unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(fs::read(dir.path().join("b.txt")).unwrap(), b"y");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
