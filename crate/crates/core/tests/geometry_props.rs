mod common;

use std::collections::BTreeSet;

use approx::assert_abs_diff_eq;
use partgnn::features::{FeatureConfig, LrfMode};
use partgnn::geom::{angle_between, det, mat_mul, mat_vec, norm, quaternion, scale, transpose};
use partgnn::mesh::{compute_average_angles, compute_triangle_normals, smooth_normals, TriangleMesh};
use partgnn::pipeline::featurize;
use partgnn::rng::SeededRng;
use partgnn::sampler::{build_part_graph, sample_parts, SamplerConfig};
use partgnn::train::{synthesize, RotationMode, SynthConfig};
use proptest::prelude::*;

use common::{cube, oracle_parts, prepared, strip, synthetic_mesh};

fn small_mesh(seed: u64) -> TriangleMesh<f64> {
    let cfg = SynthConfig {
        rotation: RotationMode::None,
        scale_range: (1.0, 1.0),
        resolution: 4,
        cut_probability: 0.3,
        ..Default::default()
    };
    synthesize((seed % 4) as usize, &cfg, &mut SeededRng::new(seed))
}

fn rotation() -> impl Strategy<Value = [[f64; 3]; 3]> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_filter("non-degenerate quaternion", |q| q.iter().map(|v| v * v).sum::<f64>() > 1e-3)
        .prop_map(|q| {
            let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
            quaternion(q.map(|v| v / n))
        })
}

fn max_adjacent_normal_angle(mesh: &TriangleMesh<f64>, normals: &[[f64; 3]]) -> f64 {
    (0..mesh.n_triangles())
        .flat_map(|t| mesh.neighbors(t).iter().map(move |&nb| (t, nb)))
        .map(|(a, b)| angle_between(normals[a], normals[b]))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn angle_field_is_rotation_and_scale_invariant(seed in 0u64..200, r in rotation(), s in 0.01f64..100.0) {
        let mesh = small_mesh(seed);
        let base = prepared(mesh.clone()).angles.avg_angle;
        let rotated = prepared(mesh.map_vertices(|v| mat_vec(&r, v))).angles.avg_angle;
        let scaled = prepared(mesh.map_vertices(|v| scale(v, s))).angles.avg_angle;
        for ((a, b), c) in base.iter().zip(&rotated).zip(&scaled) {
            prop_assert!((a - b).abs() < 1e-7);
            prop_assert!((a - c).abs() < 1e-9);
            prop_assert!((0.0..=std::f64::consts::PI).contains(a));
        }
    }

    #[test]
    fn normals_are_unit_and_adjacency_is_symmetric(seed in 0u64..200) {
        let mesh = small_mesh(seed);
        let raw = compute_triangle_normals(&mesh).unwrap();
        let smooth = smooth_normals(&mesh, &raw);
        for n in raw.triangle_normals.iter().chain(&smooth.triangle_normals) {
            prop_assert!((norm(*n) - 1.0).abs() < 1e-9);
        }
        for t in 0..mesh.n_triangles() {
            prop_assert!(mesh.neighbors(t).len() <= 3);
            for &nb in mesh.neighbors(t) {
                prop_assert!(mesh.neighbors(nb).contains(&t));
            }
        }
        let angles = compute_average_angles(&mesh, &smooth);
        for t in 0..mesh.n_triangles() {
            if mesh.neighbors(t).is_empty() {
                prop_assert_eq!(angles.avg_angle[t], 0.0);
            }
        }
    }

    #[test]
    fn smoothing_contracts_closed_meshes(seed in 0u64..200) {
        let cfg = SynthConfig { rotation: RotationMode::None, resolution: 4, ..Default::default() };
        let mesh = synthesize::<f64>((seed % 4) as usize, &cfg, &mut SeededRng::new(seed));
        let raw = compute_triangle_normals(&mesh).unwrap();
        let smooth = smooth_normals(&mesh, &raw);
        let before = max_adjacent_normal_angle(&mesh, &raw.triangle_normals);
        let after = max_adjacent_normal_angle(&mesh, &smooth.triangle_normals);
        prop_assert!(after <= before + 1e-12, "{} > {}", after, before);
    }

    #[test]
    fn sampling_is_rotation_and_scale_invariant(seed in 0u64..200, r in rotation(), s in 0.01f64..100.0, tau in 0.5f64..8.0) {
        let mesh = small_mesh(seed);
        let cfg = SamplerConfig { angle_threshold: tau, seed, ..Default::default() };
        let graph = |m: TriangleMesh<f64>| {
            let p = prepared(m);
            build_part_graph(sample_parts(&p.mesh, &p.angles, &cfg).unwrap())
        };
        let base = graph(mesh.clone());
        let moved = graph(mesh.map_vertices(|v| scale(mat_vec(&r, v), s)));
        prop_assert_eq!(base.edges, moved.edges);
        prop_assert_eq!(base.parts.len(), moved.parts.len());
        for (a, b) in base.parts.iter().zip(&moved.parts) {
            prop_assert_eq!(&a.triangles, &b.triangles);
        }
    }

    #[test]
    fn parts_match_brute_force_oracle(seed in 0u64..200, tau in 0.1f64..10.0, scale_factor in 1.0f64..2.0, max_parts in 0usize..40) {
        let p = prepared(small_mesh(seed));
        let cfg = SamplerConfig { angle_threshold: tau, threshold_scale: scale_factor, max_parts, seed, ..Default::default() };
        let parts = sample_parts(&p.mesh, &p.angles, &cfg).unwrap();
        let expected = oracle_parts(&p.mesh, &p.angles, &cfg);
        prop_assert_eq!(parts.len(), expected.len());
        for (part, (center, set, acc)) in parts.iter().zip(&expected) {
            let mut tris = part.triangles.clone();
            tris.sort_unstable();
            prop_assert_eq!(part.center_triangle, *center);
            prop_assert_eq!(&tris, set);
            prop_assert!((part.accumulated_angle - acc).abs() < 1e-9);
        }
    }

    #[test]
    fn part_and_graph_invariants(seed in 0u64..200, tau in 0.1f64..10.0, max_parts in 0usize..40) {
        let p = prepared(small_mesh(seed));
        let cfg = SamplerConfig { angle_threshold: tau, max_parts, seed, ..Default::default() };
        let parts = sample_parts(&p.mesh, &p.angles, &cfg).unwrap();
        prop_assert_eq!(&parts, &sample_parts(&p.mesh, &p.angles, &cfg).unwrap());
        let more = sample_parts(&p.mesh, &p.angles, &SamplerConfig { max_parts: max_parts + 5, ..cfg.clone() }).unwrap();
        prop_assert_eq!(&parts[..], &more[..parts.len()]);
        let mut seen = BTreeSet::new();
        for part in &parts {
            prop_assert_eq!(part.triangles[0], part.center_triangle);
            prop_assert!(!seen.contains(&part.center_triangle));
            let sum: f64 = part.triangles.iter().map(|&t| p.angles.avg_angle[t]).sum();
            prop_assert!((sum - part.accumulated_angle).abs() < 1e-9);
            let set: BTreeSet<usize> = part.triangles.iter().copied().collect();
            prop_assert_eq!(set.len(), part.triangles.len());
            for &t in &part.triangles[1..] {
                prop_assert!(p.mesh.neighbors(t).iter().any(|nb| set.contains(nb)));
            }
            seen.extend(set);
        }
        let graph = build_part_graph(parts);
        prop_assert!(graph.n_nodes() <= max_parts);
        for i in 0..graph.n_nodes() {
            for j in i + 1..graph.n_nodes() {
                let shared = graph.parts[i].triangles.iter().any(|t| graph.parts[j].triangles.contains(t));
                prop_assert_eq!(shared, graph.edges.binary_search(&(i, j)).is_ok());
            }
        }
        prop_assert!(graph.edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn point_sets_are_canonical(seed in 0u64..200, n_points in 4usize..64, z_mode in any::<bool>(), include_angle in any::<bool>()) {
        let p = prepared(small_mesh(seed));
        let features = FeatureConfig {
            n_points,
            lrf_mode: if z_mode { LrfMode::Z } else { LrfMode::Pca },
            include_angle,
            seed,
        };
        let (_, g) = featurize(&p, &SamplerConfig { seed, ..Default::default() }, &features).unwrap();
        for part in &g.parts {
            prop_assert_eq!(part.n_points(), n_points);
            prop_assert_eq!(part.n_columns, if include_angle { 4 } else { 3 });
            let axes = part.lrf.axes;
            let gram = mat_mul(&axes, &transpose(&axes));
            for (i, row) in gram.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((v - expected).abs() < 1e-7);
                }
            }
            prop_assert!((det(&axes) - 1.0).abs() < 1e-7);
            let radius = (0..n_points)
                .map(|r| norm([part.row(r)[0], part.row(r)[1], part.row(r)[2]]))
                .fold(0.0, f64::max);
            prop_assert!(radius == 0.0 || (radius - 1.0).abs() < 1e-9);
            if include_angle {
                for r in 0..n_points {
                    prop_assert!((0.0..=std::f64::consts::PI).contains(&part.row(r)[3]));
                }
            }
        }
    }
}

#[test]
fn cube_and_strip_match_oracle_at_unit_scale_multiples() {
    for mesh in [cube(), strip(4), strip(7)] {
        let p = prepared(mesh);
        for tau in [0.3, 1.0, 3.0, 100.0] {
            for seed in 0..5 {
                let cfg = SamplerConfig { angle_threshold: tau, seed, ..Default::default() };
                let parts = sample_parts(&p.mesh, &p.angles, &cfg).unwrap();
                let expected = oracle_parts(&p.mesh, &p.angles, &cfg);
                assert_eq!(parts.len(), expected.len());
                for (part, (_, set, acc)) in parts.iter().zip(&expected) {
                    let mut tris = part.triangles.clone();
                    tris.sort_unstable();
                    assert_eq!(&tris, set);
                    assert_abs_diff_eq!(part.accumulated_angle, *acc, epsilon = 1e-12);
                }
            }
        }
    }
}

#[test]
fn strip_has_three_rings_around_its_middle() {
    let p = prepared(strip(4));
    assert_eq!(p.mesh.n_triangles(), 16);
    let cfg = SamplerConfig { angle_threshold: 1e6, max_parts: 1, ..Default::default() };
    let part = &sample_parts(&p.mesh, &p.angles, &cfg).unwrap()[0];
    assert_eq!(part.triangles.len(), 16);
    assert!(p.angles.avg_angle.iter().all(|&a| a > 0.0));
}

#[test]
fn too_few_points_is_rejected() {
    let p = prepared(synthetic_mesh(0));
    let features = FeatureConfig { n_points: 3, ..Default::default() };
    assert!(featurize(&p, &SamplerConfig::default(), &features).is_err());
}
