//! `manifest.json`: the list of patches a command operates on.

use std::path::{Component, Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use pansharp_core::raster::write_atomic;
use pansharp_core::SensorSpec;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Original-resolution inputs; no-reference metrics.
    Full,
    /// Wald-degraded inputs with the original MS as reference.
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub id: String,
    pub pan: PathBuf,
    pub ms: PathBuf,
    /// Ground truth at PAN scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fused: Option<PathBuf>,
    /// PAN at MS scale, if it should not be derived by blur + decimation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pan_reduced: Option<PathBuf>,
}

impl Patch {
    pub fn new(id: impl Into<String>, pan: impl Into<PathBuf>, ms: impl Into<PathBuf>) -> Self {
        Self {
            id: id.into(),
            pan: pan.into(),
            ms: ms.into(),
            reference: None,
            fused: None,
            pan_reduced: None,
        }
    }

    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [Some(&self.pan), Some(&self.ms), self.reference.as_ref(), self.fused.as_ref(), self.pan_reduced.as_ref()]
            .into_iter()
            .flatten()
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            Some(&mut self.pan),
            Some(&mut self.ms),
            self.reference.as_mut(),
            self.fused.as_mut(),
            self.pan_reduced.as_mut(),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Directory that relative patch paths resolve against. Not stored; set
    /// to the manifest's directory on load.
    #[serde(skip)]
    pub root: PathBuf,
    pub sensor: SensorSpec,
    pub mode: Mode,
    /// Dataset name or fusion method that produced `fused`.
    pub tag: String,
    pub patches: Vec<Patch>,
}

impl RunManifest {
    pub fn new(root: impl Into<PathBuf>, sensor: SensorSpec, mode: Mode, tag: impl Into<String>) -> Self {
        Self {
            root: root.into(),
            sensor,
            mode,
            tag: tag.into(),
            patches: Vec::new(),
        }
    }

    /// Loads `path`, or `path/manifest.json` when `path` is a directory, and
    /// checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let mut m: RunManifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
        m.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        m.sensor.validate()?;
        let mut seen = std::collections::HashSet::new();
        for p in &m.patches {
            ensure!(seen.insert(p.id.as_str()), "duplicate patch id '{}' in {}", p.id, file.display());
            for rel in p.paths() {
                let abs = m.resolve(rel);
                ensure!(abs.is_file(), "patch '{}': missing file {}", p.id, abs.display());
            }
        }
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Returns a copy rooted at `new_root`, rewriting every path so it still
    /// points at the same file.
    pub fn rebase(&self, new_root: &Path) -> Result<Self> {
        let mut out = self.clone();
        let new_root = absolute(new_root)?;
        let old_root = absolute(&self.root)?;
        for patch in &mut out.patches {
            for p in patch.paths_mut() {
                let abs = if p.is_absolute() { p.clone() } else { old_root.join(&*p) };
                *p = relative_to(&normalize(&abs), &new_root);
            }
        }
        out.root = new_root;
        Ok(out)
    }

    /// Writes `dir/manifest.json` atomically.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        let path = dir.join(MANIFEST_FILE);
        write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    let abs = if p.is_absolute() { p.to_path_buf() } else { std::env::current_dir()?.join(p) };
    Ok(normalize(&abs))
}

/// Removes `.` and folds `..` lexically.
fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// `target` relative to `base` when it lives below it, else `target`.
fn relative_to(target: &Path, base: &Path) -> PathBuf {
    match target.strip_prefix(base) {
        Ok(rel) => rel.to_path_buf(),
        Err(_) => target.to_path_buf(),
    }
}

/// Rejects ids that would escape the output directory or collide on disk.
pub fn check_patch_id(id: &str) -> Result<()> {
    if id.is_empty() || id.starts_with('.') || !id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
        bail!("invalid patch id '{id}': use letters, digits, '-', '_' or '.'");
    }
    Ok(())
}
