use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Writes files under one root, each through a temporary sibling that is
/// renamed into place, and keeps a deterministic run log.
#[derive(Debug)]
pub struct Sink {
    root: PathBuf,
    log: Vec<String>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Sink {
            root,
            log: Vec::new(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log(&mut self, line: impl Into<String>) {
        let line = line.into();
        log::info!("{line}");
        self.log.push(line);
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_bytes(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_text(&mut self, rel: impl AsRef<Path>, text: &str) -> CliResult<PathBuf> {
        self.write_bytes(rel, text.as_bytes())
    }

    /// Buffer whatever `fill` writes, then store it atomically.
    pub fn write_with(
        &mut self,
        rel: impl AsRef<Path>,
        fill: impl FnOnce(&mut Vec<u8>) -> rankaudit::Result<()>,
        module: &'static str,
    ) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|source| CliError::Core { module, source })?;
        self.write_bytes(rel, &buf)
    }

    pub fn write_json<S: serde::Serialize>(&mut self, rel: impl AsRef<Path>, value: &S) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
        text.push('\n');
        self.write_text(rel, &text)
    }

    pub fn finish_log(&mut self) -> CliResult<PathBuf> {
        let mut text = self.log.join("\n");
        text.push('\n');
        self.write_text("run.log", &text)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}
