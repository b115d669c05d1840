//! Dataset layout, class mapping, text formats for part graphs and
//! checkpoints, and the featurized-graph cache.

mod cache;
mod checkpoint;
mod graph;
mod manifest;
mod text;

use thiserror::Error;

pub use cache::{cache_key, FeatureCache};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use graph::{featurize_object, load_part_graph, save_part_graph, SerializedPartGraph, GRAPH_MAGIC, GRAPH_VERSION};
pub use manifest::{
    apply_class_mapping, scan_modelnet_layout, ClassMapping, DatasetManifest, ManifestEntry, MappingTarget, Split,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tensor {name}: expected shape {expected:?}, found {got:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("class `{class}` has no `{split}` directory")]
    MissingSplit { class: String, split: &'static str },
    #[error("mapping line {line}: {msg}")]
    Mapping { line: usize, msg: String },
    #[error("class `{0}` has no entry in the class mapping")]
    UnmappedClass(String),
    #[error("mapping target `{0}` is not in the target class list")]
    UnknownTarget(String),
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}
