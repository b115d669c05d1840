//! Mesh to network-input graph: normals, angles, parts, per-part point sets.

use thiserror::Error;

use crate::features::{featurize_part, FeatureConfig, FeatureError, PartPointSet};
use crate::mesh::{
    compute_average_angles, compute_triangle_normals, smooth_normals_passes, AngleField, MeshError, NormalField,
    TriangleMesh,
};
use crate::sampler::{build_part_graph, sample_parts, PartGraph, SamplerConfig, SamplerError};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("part {part}: {source}")]
    Feature { part: usize, source: FeatureError },
}

/// A mesh with its raw and smoothed normals and the angle field derived from
/// the smoothed normals.
#[derive(Clone, Debug)]
pub struct PreparedMesh<T> {
    pub mesh: TriangleMesh<T>,
    pub raw_normals: NormalField<T>,
    pub normals: NormalField<T>,
    pub angles: AngleField<T>,
}

impl<T: Real> PreparedMesh<T> {
    pub fn new(mesh: TriangleMesh<T>, smoothing_passes: usize) -> Result<Self, MeshError> {
        let raw_normals = compute_triangle_normals(&mesh)?;
        let normals = smooth_normals_passes(&mesh, &raw_normals, smoothing_passes);
        let angles = compute_average_angles(&mesh, &normals);
        Ok(Self {
            mesh,
            raw_normals,
            normals,
            angles,
        })
    }
}

/// Network input for one object: canonical point sets per part plus the
/// overlap edges between them.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizedGraph<T> {
    pub parts: Vec<PartPointSet<T>>,
    pub edges: Vec<(usize, usize)>,
}

impl<T: Real> FeaturizedGraph<T> {
    pub fn n_nodes(&self) -> usize {
        self.parts.len()
    }

    /// Keeps the listed nodes (in the given order) and the edges among them.
    pub fn induced(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.parts.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(a, b)| remap[a] != usize::MAX && remap[b] != usize::MAX)
            .map(|&(a, b)| {
                let (x, y) = (remap[a], remap[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        edges.sort_unstable();
        Self {
            parts: keep.iter().map(|&i| self.parts[i].clone()).collect(),
            edges,
        }
    }
}

pub fn sample_graph<T: Real>(prepared: &PreparedMesh<T>, sampler: &SamplerConfig<T>) -> Result<PartGraph<T>, PipelineError> {
    let parts = sample_parts(&prepared.mesh, &prepared.angles, sampler)?;
    Ok(build_part_graph(parts))
}

pub fn featurize_graph<T: Real>(
    prepared: &PreparedMesh<T>,
    graph: &PartGraph<T>,
    features: &FeatureConfig,
) -> Result<FeaturizedGraph<T>, PipelineError> {
    let parts = graph
        .parts
        .iter()
        .enumerate()
        .map(|(i, part)| {
            featurize_part(part, i, &prepared.mesh, &prepared.normals, &prepared.angles, features)
                .map_err(|source| PipelineError::Feature { part: i, source })
        })
        .collect::<Result<_, _>>()?;
    Ok(FeaturizedGraph {
        parts,
        edges: graph.edges.clone(),
    })
}

/// Sampling followed by featurization.
pub fn featurize<T: Real>(
    prepared: &PreparedMesh<T>,
    sampler: &SamplerConfig<T>,
    features: &FeatureConfig,
) -> Result<(PartGraph<T>, FeaturizedGraph<T>), PipelineError> {
    let graph = sample_graph(prepared, sampler)?;
    let featurized = featurize_graph(prepared, &graph, features)?;
    Ok((graph, featurized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::test_meshes::unit_cube;

    #[test]
    fn induced_subgraph_reindexes_edges() {
        let cube = PreparedMesh::new(unit_cube(), 1).unwrap();
        let sampler = SamplerConfig { angle_threshold: 1.0, ..Default::default() };
        let features = FeatureConfig { n_points: 8, ..Default::default() };
        let (_, g) = featurize(&cube, &sampler, &features).unwrap();
        assert!(g.n_nodes() >= 2);
        let sub = g.induced(&[1, 0]);
        assert_eq!(sub.parts[0], g.parts[1]);
        let had = g.edges.contains(&(0, 1));
        assert_eq!(sub.edges.contains(&(0, 1)), had);
        assert!(g.induced(&[]).parts.is_empty());
    }
}
