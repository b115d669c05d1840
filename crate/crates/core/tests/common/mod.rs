#![allow(dead_code)]

use std::collections::VecDeque;

use partgnn::features::{FeatureConfig, LrfMode};
use partgnn::mesh::{AngleField, LoadOptions, TriangleMesh};
use partgnn::pipeline::{featurize, PreparedMesh};
use partgnn::rng::SeededRng;
use partgnn::sampler::{SamplerConfig, THRESHOLD_SLACK};
use partgnn::train::{generate_synthetic_dataset, synthesize, LabeledGraph, RotationMode, SynthConfig};

pub fn mesh(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> TriangleMesh<f64> {
    TriangleMesh::from_raw(vertices, triangles, &LoadOptions::default()).unwrap()
}

/// Axis-aligned unit cube, two outward triangles per face.
pub fn cube() -> TriangleMesh<f64> {
    let mut v = Vec::new();
    for i in 0..8 {
        v.push([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let t = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    mesh(v, t)
}

/// Two rows of `cols` quads bent along a circular arc, so every interior
/// edge carries a fold. Seen from the middle triangle it has three rings.
pub fn strip(cols: usize) -> TriangleMesh<f64> {
    let mut v = Vec::new();
    for row in 0..3 {
        for c in 0..=cols {
            let a = c as f64 * 0.35;
            v.push([a.cos(), a.sin(), row as f64 * 0.5]);
        }
    }
    let w = cols + 1;
    let mut t = Vec::new();
    for row in 0..2 {
        for c in 0..cols {
            let (a, b) = (row * w + c, row * w + c + 1);
            let (d, e) = (a + w, b + w);
            t.push([a, e, b]);
            t.push([a, d, e]);
        }
    }
    mesh(v, t)
}

/// Breadth-first distances over shared-edge adjacency, recomputed from the
/// triangle index lists.
fn ring_distances(mesh: &TriangleMesh<f64>, center: usize) -> Vec<Option<usize>> {
    let tris = mesh.triangles();
    let shares_edge = |a: usize, b: usize| {
        a != b && tris[a].iter().filter(|v| tris[b].contains(v)).count() == 2
    };
    let mut dist = vec![None; tris.len()];
    dist[center] = Some(0);
    let mut queue = VecDeque::from([center]);
    while let Some(t) = queue.pop_front() {
        for nb in 0..tris.len() {
            if dist[nb].is_none() && shares_edge(t, nb) {
                dist[nb] = Some(dist[t].unwrap() + 1);
                queue.push_back(nb);
            }
        }
    }
    dist
}

/// Brute-force part sampler: each part is the smallest ball of whole rings
/// around its center whose angle sum reaches the threshold.
pub fn oracle_parts(
    mesh: &TriangleMesh<f64>,
    angles: &AngleField<f64>,
    cfg: &SamplerConfig<f64>,
) -> Vec<(usize, Vec<usize>, f64)> {
    let n = mesh.n_triangles();
    let limit = cfg.angle_threshold * cfg.threshold_scale * (1.0 - THRESHOLD_SLACK);
    let mut rng = SeededRng::new(cfg.seed);
    let mut owned = vec![false; n];
    let mut out = Vec::new();
    while out.len() < cfg.max_parts {
        let free: Vec<usize> = (0..n).filter(|&t| !owned[t]).collect();
        if free.is_empty() {
            break;
        }
        let center = free[rng.below(free.len())];
        let dist = ring_distances(mesh, center);
        let max_ring = dist.iter().flatten().copied().max().unwrap();
        let mut radius = 0;
        let ball = |r: usize| -> Vec<usize> { (0..n).filter(|&t| dist[t].is_some_and(|d| d <= r)).collect() };
        let sum = |set: &[usize]| set.iter().map(|&t| angles.avg_angle[t]).sum::<f64>();
        while sum(&ball(radius)) < limit && radius < max_ring {
            radius += 1;
        }
        let set = ball(radius);
        for &t in &set {
            owned[t] = true;
        }
        let acc = sum(&set);
        out.push((center, set, acc));
    }
    out
}

pub fn synthetic_mesh(seed: u64) -> TriangleMesh<f64> {
    let cfg = SynthConfig {
        rotation: RotationMode::None,
        scale_range: (1.0, 1.0),
        ..Default::default()
    };
    synthesize((seed % 4) as usize, &cfg, &mut SeededRng::new(seed))
}

pub fn prepared(mesh: TriangleMesh<f64>) -> PreparedMesh<f64> {
    PreparedMesh::new(mesh, 1).unwrap()
}

/// Featurized synthetic objects with Z-rotations and random scales.
pub fn synthetic_set(
    seed: u64,
    per_class: usize,
    n_points: usize,
    max_parts: usize,
    lrf_mode: LrfMode,
) -> Vec<LabeledGraph<f64>> {
    let objects = generate_synthetic_dataset::<f64>(&SynthConfig {
        n_per_class: per_class,
        seed,
        ..Default::default()
    });
    objects
        .into_iter()
        .map(|o| {
            let sampler = SamplerConfig {
                max_parts,
                seed,
                ..Default::default()
            };
            let features = FeatureConfig {
                n_points,
                lrf_mode,
                include_angle: true,
                seed,
            };
            let (_, graph) = featurize(&prepared(o.mesh), &sampler, &features).unwrap();
            LabeledGraph {
                id: o.name,
                label: o.label,
                graph,
                threshold_scale: 1.0,
            }
        })
        .collect()
}
