use super::text::{parse_bool, parse_enum, Reader, Writer};
use super::FormatError;
use crate::features::{FeatureConfig, LRFrame, LrfFallback, PartPointSet};
use crate::mesh::{load_mesh, LoadOptions, MeshFormat};
use crate::pipeline::{featurize, FeaturizedGraph, PipelineError, PreparedMesh};
use crate::sampler::SamplerConfig;
use crate::scalar::Real;
use crate::train::LabeledGraph;

pub const GRAPH_MAGIC: &str = "partgnn-graph";
pub const GRAPH_VERSION: u32 = 1;

/// A featurized object together with the configuration that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SerializedPartGraph<T> {
    pub object_id: String,
    pub label: usize,
    pub sampler: SamplerConfig<T>,
    pub features: FeatureConfig,
    pub graph: FeaturizedGraph<T>,
}

impl<T: Real> SerializedPartGraph<T> {
    pub fn to_labeled(&self) -> LabeledGraph<T> {
        LabeledGraph {
            id: self.object_id.clone(),
            label: self.label,
            graph: self.graph.clone(),
            threshold_scale: self.sampler.threshold_scale.as_f64(),
        }
    }

    pub fn into_labeled(self) -> LabeledGraph<T> {
        LabeledGraph {
            threshold_scale: self.sampler.threshold_scale.as_f64(),
            id: self.object_id,
            label: self.label,
            graph: self.graph,
        }
    }
}

pub fn save_part_graph<T: Real>(g: &SerializedPartGraph<T>) -> String {
    let mut w = Writer::new(GRAPH_MAGIC, GRAPH_VERSION);
    w.text("object_id", &g.object_id);
    w.line("label", [g.label]);
    w.line("sampler.angle_threshold", [g.sampler.angle_threshold]);
    w.line("sampler.threshold_scale", [g.sampler.threshold_scale]);
    w.line("sampler.max_parts", [g.sampler.max_parts]);
    w.line("sampler.seed", [g.sampler.seed]);
    w.line("sampler.area_weighted_centers", [g.sampler.area_weighted_centers]);
    w.line("features.n_points", [g.features.n_points]);
    w.line("features.lrf_mode", [g.features.lrf_mode.as_str()]);
    w.line("features.include_angle", [g.features.include_angle]);
    w.line("features.seed", [g.features.seed]);
    w.line("parts", [g.graph.parts.len()]);
    for p in &g.graph.parts {
        w.line("part", [p.part_index]);
        w.line("fallback", [p.fallback.map_or("none", |f| f.as_str())]);
        w.line("origin", p.lrf.origin);
        w.line("axes", p.lrf.axes.iter().flatten());
        w.line("points", [p.n_points(), p.n_columns]);
        for r in 0..p.n_points() {
            let row = p.row(r);
            w.out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "));
            w.out.push('\n');
        }
    }
    w.line("edges", [g.graph.edges.len()]);
    for &(a, b) in &g.graph.edges {
        w.line(&a.to_string(), [b]);
    }
    w.finish()
}

pub fn load_part_graph<T: Real>(text: &str) -> Result<SerializedPartGraph<T>, FormatError> {
    let mut r = Reader::open(text, GRAPH_MAGIC, GRAPH_VERSION)?;
    let object_id = r.text("object_id")?;
    let label = r.value("label")?;
    let sampler = SamplerConfig {
        angle_threshold: r.value("sampler.angle_threshold")?,
        threshold_scale: r.value("sampler.threshold_scale")?,
        max_parts: r.value("sampler.max_parts")?,
        seed: r.value("sampler.seed")?,
        area_weighted_centers: {
            let s = r.expect("sampler.area_weighted_centers")?;
            parse_bool(&r, s)?
        },
    };
    let features = FeatureConfig {
        n_points: r.value("features.n_points")?,
        lrf_mode: {
            let s = r.expect("features.lrf_mode")?;
            parse_enum(&r, s)?
        },
        include_angle: {
            let s = r.expect("features.include_angle")?;
            parse_bool(&r, s)?
        },
        seed: r.value("features.seed")?,
    };
    let n_parts: usize = r.value("parts")?;
    let mut parts = Vec::with_capacity(n_parts.min(1 << 16));
    for _ in 0..n_parts {
        let part_index = r.value("part")?;
        let fallback = {
            let s = r.expect("fallback")?.trim();
            if s == "none" {
                None
            } else {
                Some(parse_enum::<LrfFallback>(&r, s)?)
            }
        };
        let o: Vec<T> = r.fixed("origin", 3)?;
        let a: Vec<T> = r.fixed("axes", 9)?;
        let dims: Vec<usize> = r.fixed("points", 2)?;
        let points = r.matrix(dims[0], dims[1])?;
        parts.push(PartPointSet {
            points,
            n_columns: dims[1],
            lrf: LRFrame {
                origin: [o[0], o[1], o[2]],
                axes: [[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]],
            },
            part_index,
            fallback,
        });
    }
    let n_edges: usize = r.value("edges")?;
    let flat: Vec<usize> = r.matrix(n_edges, 2)?;
    let edges: Vec<(usize, usize)> = flat.chunks_exact(2).map(|e| (e[0], e[1])).collect();
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n_parts || b >= n_parts) {
        return Err(r.err(format!("edge ({a}, {b}) outside {n_parts} parts")));
    }
    r.finish()?;
    Ok(SerializedPartGraph {
        object_id,
        label,
        sampler,
        features,
        graph: FeaturizedGraph { parts, edges },
    })
}

/// Parses, prepares, samples and featurizes one mesh file's bytes.
pub fn featurize_object<T: Real>(
    bytes: &[u8],
    format: MeshFormat,
    object_id: &str,
    label: usize,
    sampler: &SamplerConfig<T>,
    features: &FeatureConfig,
    smoothing_passes: usize,
) -> Result<SerializedPartGraph<T>, PipelineError> {
    let mesh = load_mesh(bytes, format, &LoadOptions::default())?;
    let prepared = PreparedMesh::new(mesh, smoothing_passes)?;
    let (_, graph) = featurize(&prepared, sampler, features)?;
    Ok(SerializedPartGraph {
        object_id: object_id.to_string(),
        label,
        sampler: sampler.clone(),
        features: features.clone(),
        graph,
    })
}
