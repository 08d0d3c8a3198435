use std::fs;
use std::path::{Path, PathBuf};

use mmot_core::Result;
use serde::Serialize;

/// The output directory of one run, remembering what was written.
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root.join("plots"))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `name`, recorded as an output.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.file(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
