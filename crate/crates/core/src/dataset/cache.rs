use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::{io_err, load_part_graph, save_part_graph, DatasetError, SerializedPartGraph};
use crate::features::FeatureConfig;
use crate::sampler::SamplerConfig;
use crate::scalar::Real;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Hex SHA-256 over the mesh bytes, every sampler and feature setting and
/// the normal-smoothing pass count.
pub fn cache_key<T: Real>(mesh_bytes: &[u8], sampler: &SamplerConfig<T>, features: &FeatureConfig, passes: usize) -> String {
    let mut h = Sha256::new();
    h.update((mesh_bytes.len() as u64).to_le_bytes());
    h.update(mesh_bytes);
    let echo = format!(
        "tau={} scale={} max_parts={} seed={} area={} points={} lrf={} angle={} fseed={} passes={passes}",
        sampler.angle_threshold,
        sampler.threshold_scale,
        sampler.max_parts,
        sampler.seed,
        sampler.area_weighted_centers,
        features.n_points,
        features.lrf_mode.as_str(),
        features.include_angle,
        features.seed,
    );
    h.update(echo.as_bytes());
    hex::encode(h.finalize())
}

/// Directory of serialized graphs named by cache key.
#[derive(Clone, Debug)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, DatasetError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.graph"))
    }

    /// A cached graph, or `None` when absent.
    pub fn get<T: Real>(&self, key: &str) -> Result<Option<SerializedPartGraph<T>>, DatasetError> {
        let path = self.path(key);
        match fs::read_to_string(&path) {
            Ok(text) => load_part_graph(&text).map(Some).map_err(|source| DatasetError::Format {
                path: path.display().to_string(),
                source,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Writes to a unique temporary file, then renames it into place.
    pub fn put<T: Real>(&self, key: &str, graph: &SerializedPartGraph<T>) -> Result<(), DatasetError> {
        let path = self.path(key);
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(save_part_graph(graph).as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io_err(&path)(e)
        })
    }
}
