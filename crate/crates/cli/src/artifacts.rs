//! Artifact writing and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Writes files into one output directory and records their digests.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// `name` must be a bare file name.
    pub fn write(&mut self, name: &str, contents: &[u8]) -> std::io::Result<()> {
        if name.contains('/') || name.contains('\\') || name.starts_with('.') {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("artifact name `{name}` must be a plain file name"),
            ));
        }
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> std::io::Result<()> {
        let mut text = String::with_capacity(64 * (rows.len() + 1));
        text.push_str(header);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }
}

/// Formats a CSV cell; missing values are left empty.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub experiment: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    pub seeds: &'a serde_json::Value,
    pub wall_time_s: f64,
    pub files: &'a [FileRecord],
}

/// Writes `manifest.json` after every other artifact.
pub fn write_manifest<C: Serialize>(
    writer: &ArtifactWriter,
    experiment: &str,
    config: &C,
    seeds: &serde_json::Value,
    wall_time_s: f64,
) -> std::io::Result<()> {
    let m = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        config,
        seeds,
        wall_time_s,
        files: writer.files(),
    };
    let mut text = serde_json::to_string_pretty(&m).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(writer.dir().join("manifest.json"), text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn rejects_paths_outside_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(dir.path()).unwrap();
        assert!(w.write("../x.csv", b"a").is_err());
        assert!(w.write("sub/x.csv", b"a").is_err());
        w.write("x.csv", b"a").unwrap();
        assert_eq!(w.files().len(), 1);
    }
}
