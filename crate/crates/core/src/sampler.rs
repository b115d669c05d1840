//! Part sampling by angle-bounded breadth-first growth, and the part-overlap graph.
//!
//! A part starts at a randomly drawn triangle that no earlier part contains and
//! grows one full ring of edge neighbors at a time. Every newly reached
//! triangle adds its average angle to the part's accumulator; growth stops
//! after the ring that brings the accumulator to the threshold, or when the
//! frontier runs dry. Growth may cross into triangles owned by earlier parts,
//! which is what makes overlap edges between parts possible.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::mesh::{AngleField, TriangleMesh};
use crate::rng::SeededRng;
use crate::scalar::Real;

/// Relative slack on the stopping comparison.
pub const THRESHOLD_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("angle field has {got} entries for {expected} triangles")]
    AngleMismatch { expected: usize, got: usize },
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig<T> {
    /// Accumulated-angle threshold in radians.
    pub angle_threshold: T,
    pub max_parts: usize,
    pub seed: u64,
    /// Multiplier on the threshold, used to re-sample at test time.
    pub threshold_scale: T,
    /// Draw centers proportionally to triangle area instead of uniformly.
    pub area_weighted_centers: bool,
}

impl<T: Real> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            angle_threshold: T::TAU(),
            max_parts: 32,
            seed: 0,
            threshold_scale: T::one(),
            area_weighted_centers: false,
        }
    }
}

impl<T: Real> SamplerConfig<T> {
    pub fn effective_threshold(&self) -> T {
        self.angle_threshold * self.threshold_scale
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.angle_threshold.is_finite() && self.angle_threshold > T::zero()) {
            return Err(SamplerError::InvalidConfig("angle threshold must be finite and > 0".into()));
        }
        if !(self.threshold_scale.is_finite() && self.threshold_scale >= T::one()) {
            return Err(SamplerError::InvalidConfig("threshold scale must be finite and >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Part<T> {
    pub center_triangle: usize,
    /// Triangles in breadth-first discovery order, starting with the center.
    pub triangles: Vec<usize>,
    pub accumulated_angle: T,
}

/// Parts plus undirected overlap edges `(i, j)` with `i < j`, sorted.
/// Self-loops are implied for every node.
#[derive(Clone, Debug, PartialEq)]
pub struct PartGraph<T> {
    pub parts: Vec<Part<T>>,
    pub edges: Vec<(usize, usize)>,
}

pub fn sample_parts<T: Real>(
    mesh: &TriangleMesh<T>,
    angles: &AngleField<T>,
    cfg: &SamplerConfig<T>,
) -> Result<Vec<Part<T>>, SamplerError> {
    let n = mesh.n_triangles();
    if n == 0 {
        return Err(SamplerError::EmptyMesh);
    }
    if angles.avg_angle.len() != n {
        return Err(SamplerError::AngleMismatch {
            expected: n,
            got: angles.avg_angle.len(),
        });
    }
    cfg.validate()?;

    let limit = cfg.effective_threshold() * (T::one() - T::lit(THRESHOLD_SLACK));
    let areas: Vec<T> = if cfg.area_weighted_centers {
        (0..n).map(|t| mesh.triangle_area(t)).collect()
    } else {
        Vec::new()
    };
    let mut rng = SeededRng::new(cfg.seed);
    let mut owned = vec![false; n];
    // Visit marks stamped with the part index.
    let mut stamp = vec![usize::MAX; n];
    let mut parts = Vec::new();

    while parts.len() < cfg.max_parts {
        let free: Vec<usize> = (0..n).filter(|&t| !owned[t]).collect();
        if free.is_empty() {
            break;
        }
        let center = if cfg.area_weighted_centers {
            draw_weighted(&mut rng, &free, &areas)
        } else {
            free[rng.below(free.len())]
        };

        let id = parts.len();
        stamp[center] = id;
        let mut triangles = vec![center];
        let mut acc = angles.avg_angle[center];
        let mut ring_start = 0;
        while acc < limit {
            let ring_end = triangles.len();
            for k in ring_start..ring_end {
                let t = triangles[k];
                for &nb in mesh.neighbors(t) {
                    if stamp[nb] != id {
                        stamp[nb] = id;
                        triangles.push(nb);
                        acc += angles.avg_angle[nb];
                    }
                }
            }
            if triangles.len() == ring_end {
                break;
            }
            ring_start = ring_end;
        }
        for &t in &triangles {
            owned[t] = true;
        }
        parts.push(Part {
            center_triangle: center,
            triangles,
            accumulated_angle: acc,
        });
    }
    Ok(parts)
}

fn draw_weighted<T: Real>(rng: &mut SeededRng, free: &[usize], areas: &[T]) -> usize {
    let total: f64 = free.iter().map(|&t| areas[t].as_f64()).sum();
    let target = rng.unit() * total;
    let mut run = 0.0;
    for &t in free {
        run += areas[t].as_f64();
        if target < run {
            return t;
        }
    }
    *free.last().expect("free set is non-empty")
}

/// Connects every pair of parts that share at least one triangle.
pub fn build_part_graph<T: Real>(parts: Vec<Part<T>>) -> PartGraph<T> {
    let n_tri = parts
        .iter()
        .flat_map(|p| p.triangles.iter())
        .max()
        .map_or(0, |&m| m + 1);
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); n_tri];
    for (i, p) in parts.iter().enumerate() {
        for &t in &p.triangles {
            if owners[t].last() != Some(&i) {
                owners[t].push(i);
            }
        }
    }
    let mut edges = BTreeSet::new();
    for list in &owners {
        for (a, &i) in list.iter().enumerate() {
            for &j in &list[a + 1..] {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    PartGraph {
        parts,
        edges: edges.into_iter().collect(),
    }
}

impl<T: Real> PartGraph<T> {
    pub fn n_nodes(&self) -> usize {
        self.parts.len()
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::mesh::test_meshes::*;
    use crate::mesh::{compute_average_angles, compute_triangle_normals};

    fn part(tris: &[usize]) -> Part<f64> {
        Part {
            center_triangle: tris[0],
            triangles: tris.to_vec(),
            accumulated_angle: 0.0,
        }
    }

    fn cube_angles() -> (TriangleMesh<f64>, AngleField<f64>) {
        let cube = unit_cube();
        let raw = compute_triangle_normals(&cube).unwrap();
        let a = compute_average_angles(&cube, &raw);
        (cube, a)
    }

    #[test]
    fn flat_grid_yields_one_part() {
        let g = flat_grid(5);
        let raw = compute_triangle_normals(&g).unwrap();
        let a = compute_average_angles(&g, &raw);
        for tau in [0.01, 1.0, 100.0] {
            let cfg = SamplerConfig {
                angle_threshold: tau,
                seed: 5,
                ..Default::default()
            };
            let parts = sample_parts(&g, &a, &cfg).unwrap();
            assert_eq!(parts.len(), 1);
            assert_eq!(parts[0].triangles.len(), g.n_triangles());
            assert_eq!(parts[0].accumulated_angle, 0.0);
        }
    }

    #[test]
    fn cube_parts_stop_after_first_ring_at_pi() {
        let (cube, a) = cube_angles();
        let cfg = SamplerConfig {
            angle_threshold: PI,
            ..Default::default()
        };
        let parts = sample_parts(&cube, &a, &cfg).unwrap();
        for p in &parts {
            // center (pi/3) + one ring of three (pi) = 4 pi / 3 >= pi
            assert_eq!(p.triangles.len(), 4);
            assert!((p.accumulated_angle - 4.0 * PI / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_max_parts_is_empty() {
        let (cube, a) = cube_angles();
        let cfg = SamplerConfig {
            max_parts: 0,
            ..Default::default()
        };
        assert!(sample_parts(&cube, &a, &cfg).unwrap().is_empty());
    }

    #[test]
    fn centers_are_fresh_and_parts_connected() {
        let (cube, a) = cube_angles();
        for seed in 0..20 {
            let cfg = SamplerConfig {
                angle_threshold: PI / 2.0,
                seed,
                ..Default::default()
            };
            let parts = sample_parts(&cube, &a, &cfg).unwrap();
            for (i, p) in parts.iter().enumerate() {
                assert_eq!(p.triangles[0], p.center_triangle);
                assert!(parts[..i].iter().all(|q| !q.triangles.contains(&p.center_triangle)));
                for &t in &p.triangles[1..] {
                    assert!(cube.neighbors(t).iter().any(|nb| p.triangles.contains(nb)));
                }
            }
        }
    }

    #[test]
    fn max_parts_prefix_property() {
        let (cube, a) = cube_angles();
        let base = SamplerConfig {
            angle_threshold: 0.5,
            seed: 3,
            ..Default::default()
        };
        let all = sample_parts(&cube, &a, &base).unwrap();
        for k in 0..all.len() {
            let some = sample_parts(&cube, &a, &SamplerConfig { max_parts: k, ..base.clone() }).unwrap();
            assert_eq!(&all[..k], &some[..]);
        }
    }

    #[test]
    fn empty_mesh_and_bad_config() {
        let cube = unit_cube();
        let (_, a) = cube_angles();
        let short = AngleField { avg_angle: vec![0.0; 3] };
        assert!(matches!(
            sample_parts(&cube, &short, &SamplerConfig::default()),
            Err(SamplerError::AngleMismatch { .. })
        ));
        let bad = SamplerConfig { threshold_scale: 0.5, ..Default::default() };
        assert!(matches!(sample_parts(&cube, &a, &bad), Err(SamplerError::InvalidConfig(_))));
    }

    #[test]
    fn area_weighted_centers_are_deterministic() {
        let (cube, a) = cube_angles();
        let cfg = SamplerConfig {
            angle_threshold: 0.5,
            area_weighted_centers: true,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(sample_parts(&cube, &a, &cfg).unwrap(), sample_parts(&cube, &a, &cfg).unwrap());
    }

    #[test]
    fn graph_edges_from_shared_triangles() {
        let g = build_part_graph(vec![part(&[0, 1, 2]), part(&[2, 3])]);
        assert_eq!(g.edges, vec![(0, 1)]);
        let g = build_part_graph(vec![part(&[0, 1]), part(&[2, 3])]);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn chain_of_five_parts_is_a_path() {
        let parts: Vec<_> = (0..5).map(|i| part(&[10 * i, 10 * i + 5, 10 * (i + 1)])).collect();
        // Brute-force oracle over all pairs.
        let mut oracle = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                if parts[i].triangles.iter().any(|t| parts[j].triangles.contains(t)) {
                    oracle.push((i, j));
                }
            }
        }
        let g = build_part_graph(parts);
        assert_eq!(g.edges, oracle);
        assert_eq!(g.edges, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }
}
