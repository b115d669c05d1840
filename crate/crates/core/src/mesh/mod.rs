//! Indexed triangle meshes with edge-based triangle adjacency.

mod normals;
mod parse;

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{self, Vec3};
use crate::scalar::Real;

pub use normals::{
    compute_average_angles, compute_triangle_normals, smooth_normals, smooth_normals_passes,
    AngleField, NormalField,
};
pub use parse::{load_mesh, write_off, MeshFormat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported mesh format: {0}")]
    Unsupported(String),
    #[error("triangle {triangle} references vertex {vertex} but mesh has {n_vertices} vertices")]
    InvalidIndex {
        triangle: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("{0} non-manifold edges (more than two incident triangles)")]
    NonManifold(usize),
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Reject non-manifold edges instead of truncating their adjacency.
    pub strict: bool,
}

/// What load-time filtering changed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub dropped_degenerate: usize,
    pub non_manifold_edges: usize,
    /// Polygons with more than three corners split into triangle fans.
    pub triangulated_polygons: usize,
}

/// Relative sine below which a triangle counts as zero-area.
const DEGENERATE_SINE: f64 = 1e-12;

/// Indexed triangle set. Triangles are counter-clockwise for outward normals;
/// `adjacency[t]` lists the triangles sharing a full edge with `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[usize; 3]>,
    adjacency: Vec<Vec<usize>>,
    report: LoadReport,
}

impl<T: Real> TriangleMesh<T> {
    /// Validates indices, drops zero-area triangles and builds adjacency.
    pub fn from_raw(
        vertices: Vec<Vec3<T>>,
        triangles: Vec<[usize; 3]>,
        opts: &LoadOptions,
    ) -> Result<Self, MeshError> {
        let n_vertices = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.into_iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= n_vertices) {
                return Err(MeshError::InvalidIndex {
                    triangle: t,
                    vertex: v,
                    n_vertices,
                });
            }
            if is_degenerate(&vertices, tri) {
                dropped += 1;
            } else {
                kept.push(tri);
            }
        }
        let (adjacency, non_manifold) = build_adjacency(&vertices, &kept);
        if opts.strict && non_manifold > 0 {
            return Err(MeshError::NonManifold(non_manifold));
        }
        Ok(Self {
            vertices,
            triangles: kept,
            adjacency,
            report: LoadReport {
                dropped_degenerate: dropped,
                non_manifold_edges: non_manifold,
                triangulated_polygons: 0,
            },
        })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn neighbors(&self, t: usize) -> &[usize] {
        &self.adjacency[t]
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn load_report(&self) -> LoadReport {
        self.report
    }

    pub(crate) fn set_triangulated(&mut self, n: usize) {
        self.report.triangulated_polygons = n;
    }

    pub fn corners(&self, t: usize) -> [Vec3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.corners(t);
        geom::norm(geom::cross(geom::sub(b, a), geom::sub(c, a))) * T::lit(0.5)
    }

    /// Same topology with every vertex passed through `f`.
    pub fn map_vertices(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn is_degenerate<T: Real>(vertices: &[Vec3<T>], tri: [usize; 3]) -> bool {
    let [a, b, c] = tri;
    if a == b || b == c || a == c {
        return true;
    }
    let e1 = geom::sub(vertices[b], vertices[a]);
    let e2 = geom::sub(vertices[c], vertices[a]);
    let cross = geom::norm(geom::cross(e1, e2));
    let scale = geom::norm(e1) * geom::norm(e2);
    !(cross > T::lit(DEGENERATE_SINE) * scale) || cross <= T::min_positive_value()
}

fn build_adjacency<T: Real>(vertices: &[Vec3<T>], triangles: &[[usize; 3]]) -> (Vec<Vec<usize>>, usize) {
    let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            edges.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_default().push(t);
        }
    }
    let area = |t: usize| {
        let [a, b, c] = triangles[t];
        geom::norm(geom::cross(
            geom::sub(vertices[b], vertices[a]),
            geom::sub(vertices[c], vertices[a]),
        ))
    };
    let mut non_manifold = 0;
    for incident in edges.values_mut() {
        if incident.len() > 2 {
            non_manifold += 1;
            incident.sort_by(|&x, &y| {
                area(y)
                    .partial_cmp(&area(x))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(x.cmp(&y))
            });
            incident.truncate(2);
        }
    }
    let adjacency = triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let mut nbrs: Vec<usize> = Vec::with_capacity(3);
            for k in 0..3 {
                let incident = &edges[&edge_key(tri[k], tri[(k + 1) % 3])];
                if !incident.contains(&t) {
                    continue;
                }
                for &o in incident {
                    if o != t && !nbrs.contains(&o) {
                        nbrs.push(o);
                    }
                }
            }
            nbrs
        })
        .collect();
    (adjacency, non_manifold)
}

#[inline]
fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
pub(crate) mod test_meshes {
    use super::*;

    /// Unit cube, two counter-clockwise triangles per face.
    pub fn unit_cube() -> TriangleMesh<f64> {
        let v = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0],
            [0.0, 1.0, 1.0],
        ];
        let t = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriangleMesh::from_raw(v, t, &LoadOptions::default()).unwrap()
    }

    /// `n x n` grid of unit squares in the z = 0 plane.
    pub fn flat_grid(n: usize) -> TriangleMesh<f64> {
        let idx = |i: usize, j: usize| i * (n + 1) + j;
        let mut v = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                v.push([j as f64, i as f64, 0.0]);
            }
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push([idx(i, j), idx(i, j + 1), idx(i + 1, j + 1)]);
                t.push([idx(i, j), idx(i + 1, j + 1), idx(i + 1, j)]);
            }
        }
        TriangleMesh::from_raw(v, t, &LoadOptions::default()).unwrap()
    }
}
