use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{io_err, DatasetError};
use crate::mesh::MeshFormat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            _ => Err(format!("unknown split `{s}` (expected train, val or test)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: PathBuf,
    /// Index into `class_names`.
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Entry identifier: the relative path without extension.
    pub fn object_id(entry: &ManifestEntry) -> String {
        entry.path.with_extension("").to_string_lossy().replace('\\', "/")
    }
}

fn sorted_dir(path: &Path) -> Result<Vec<(String, PathBuf)>, DatasetError> {
    let mut out = Vec::new();
    for item in fs::read_dir(path).map_err(io_err(path))? {
        let item = item.map_err(io_err(path))?;
        out.push((item.file_name().to_string_lossy().into_owned(), item.path()));
    }
    out.sort();
    Ok(out)
}

/// Walks `<root>/<class>/{train,test}/*.{off,ply}`. Classes are the sorted
/// subdirectory names; each must contain both splits.
pub fn scan_modelnet_layout(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let mut entries = Vec::new();
    let mut class_names = Vec::new();
    for (class, dir) in sorted_dir(root)? {
        if !dir.is_dir() {
            continue;
        }
        let label = class_names.len();
        for split in [Split::Train, Split::Test] {
            let sdir = dir.join(split.as_str());
            if !sdir.is_dir() {
                return Err(DatasetError::MissingSplit {
                    class,
                    split: split.as_str(),
                });
            }
            for (name, file) in sorted_dir(&sdir)? {
                let is_mesh = file
                    .extension()
                    .and_then(|e| e.to_str())
                    .and_then(MeshFormat::from_extension)
                    .is_some();
                if is_mesh && file.is_file() {
                    entries.push(ManifestEntry {
                        path: PathBuf::from(&class).join(split.as_str()).join(name),
                        label,
                        split,
                    });
                }
            }
        }
        class_names.push(class);
    }
    Ok(DatasetManifest {
        root: root.to_path_buf(),
        entries,
        class_names,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MappingTarget {
    Class(String),
    Ignore,
}

/// Many-to-one source-to-target class table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMapping {
    pub table: BTreeMap<String, MappingTarget>,
    /// Target classes in label order.
    pub targets: Vec<String>,
}

impl ClassMapping {
    /// Parses `source<TAB>target` lines; `#` starts a comment and the target
    /// `ignore` drops the class. Targets take label order by first
    /// appearance.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut table = BTreeMap::new();
        let mut targets: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| DatasetError::Mapping { line: i + 1, msg };
            let (src, dst) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `source<TAB>target`".into()))?;
            let (src, dst) = (src.trim(), dst.trim());
            if src.is_empty() || dst.is_empty() || dst.contains('\t') {
                return Err(err("expected exactly one source and one target".into()));
            }
            let target = if dst == "ignore" {
                MappingTarget::Ignore
            } else {
                if !targets.iter().any(|t| t == dst) {
                    targets.push(dst.to_string());
                }
                MappingTarget::Class(dst.to_string())
            };
            if table.insert(src.to_string(), target).is_some() {
                return Err(err(format!("class `{src}` mapped twice")));
            }
        }
        Ok(Self { table, targets })
    }

    /// Replaces the target label order, which must cover every target.
    pub fn with_targets(mut self, targets: Vec<String>) -> Result<Self, DatasetError> {
        for t in self.table.values() {
            if let MappingTarget::Class(c) = t {
                if !targets.contains(c) {
                    return Err(DatasetError::UnknownTarget(c.clone()));
                }
            }
        }
        self.targets = targets;
        Ok(self)
    }

    pub fn identity(classes: &[String]) -> Self {
        Self {
            table: classes
                .iter()
                .map(|c| (c.clone(), MappingTarget::Class(c.clone())))
                .collect(),
            targets: classes.to_vec(),
        }
    }
}

/// Relabels entries into the target classes; entries whose class maps to
/// `ignore` are dropped and unmapped classes are an error.
pub fn apply_class_mapping(manifest: &DatasetManifest, mapping: &ClassMapping) -> Result<DatasetManifest, DatasetError> {
    let mut new_label = Vec::with_capacity(manifest.class_names.len());
    for c in &manifest.class_names {
        let target = mapping
            .table
            .get(c)
            .ok_or_else(|| DatasetError::UnmappedClass(c.clone()))?;
        new_label.push(match target {
            MappingTarget::Ignore => None,
            MappingTarget::Class(t) => Some(
                mapping
                    .targets
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| DatasetError::UnknownTarget(t.clone()))?,
            ),
        });
    }
    let entries = manifest
        .entries
        .iter()
        .filter_map(|e| {
            new_label[e.label].map(|label| ManifestEntry {
                label,
                ..e.clone()
            })
        })
        .collect();
    Ok(DatasetManifest {
        root: manifest.root.clone(),
        entries,
        class_names: mapping.targets.clone(),
    })
}
