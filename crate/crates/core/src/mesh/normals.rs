//! Triangle normals, one-ring normal smoothing and per-triangle average angles.

use super::{MeshError, TriangleMesh};
use crate::geom::{self, Vec3};
use crate::scalar::Real;

const MIN_NORMAL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NormalField<T> {
    pub triangle_normals: Vec<Vec3<T>>,
    /// Empty for raw fields.
    pub vertex_normals: Vec<Vec3<T>>,
    pub smoothed: bool,
    /// Averages that cancelled out and fell back to a raw normal.
    pub fallbacks: usize,
}

/// Mean angle in radians between each triangle's normal and its neighbors'.
#[derive(Clone, Debug, PartialEq)]
pub struct AngleField<T> {
    pub avg_angle: Vec<T>,
}

pub fn compute_triangle_normals<T: Real>(mesh: &TriangleMesh<T>) -> Result<NormalField<T>, MeshError> {
    let triangle_normals = (0..mesh.n_triangles())
        .map(|t| {
            if super::is_degenerate(mesh.vertices(), mesh.triangles()[t]) {
                return Err(MeshError::DegenerateTriangle(t));
            }
            let [a, b, c] = mesh.corners(t);
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            geom::normalize(n, T::zero()).ok_or(MeshError::DegenerateTriangle(t))
        })
        .collect::<Result<_, _>>()?;
    Ok(NormalField {
        triangle_normals,
        vertex_normals: Vec::new(),
        smoothed: false,
        fallbacks: 0,
    })
}

/// One low-pass pass: vertex normals average their incident triangle normals,
/// then triangle normals average their three vertex normals.
pub fn smooth_normals<T: Real>(mesh: &TriangleMesh<T>, raw: &NormalField<T>) -> NormalField<T> {
    let nv = mesh.vertices().len();
    let min = T::lit(MIN_NORMAL);
    let mut sums = vec![[T::zero(); 3]; nv];
    let mut first_incident: Vec<Option<usize>> = vec![None; nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for &v in tri {
            sums[v] = geom::add(sums[v], raw.triangle_normals[t]);
            first_incident[v].get_or_insert(t);
        }
    }
    let mut fallbacks = 0;
    // Normalizing a sum gives the same direction as normalizing the mean.
    let vertex_normals: Vec<Vec3<T>> = sums
        .iter()
        .zip(&first_incident)
        .map(|(&s, first)| match (geom::normalize(s, min), first) {
            (Some(n), _) => n,
            (None, Some(t)) => {
                fallbacks += 1;
                raw.triangle_normals[*t]
            }
            // Unreferenced vertex.
            (None, None) => [T::zero(), T::zero(), T::one()],
        })
        .collect();
    let triangle_normals = mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, &[a, b, c])| {
            let s = geom::add(geom::add(vertex_normals[a], vertex_normals[b]), vertex_normals[c]);
            geom::normalize(s, min).unwrap_or_else(|| {
                fallbacks += 1;
                raw.triangle_normals[t]
            })
        })
        .collect();
    NormalField {
        triangle_normals,
        vertex_normals,
        smoothed: true,
        fallbacks: raw.fallbacks + fallbacks,
    }
}

/// `passes` repeated smoothing passes; zero passes returns `raw` unchanged.
pub fn smooth_normals_passes<T: Real>(
    mesh: &TriangleMesh<T>,
    raw: &NormalField<T>,
    passes: usize,
) -> NormalField<T> {
    let mut field = raw.clone();
    for _ in 0..passes {
        field = smooth_normals(mesh, &field);
    }
    field
}

pub fn compute_average_angles<T: Real>(mesh: &TriangleMesh<T>, normals: &NormalField<T>) -> AngleField<T> {
    let avg_angle = mesh
        .adjacency()
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            if nbrs.is_empty() {
                return T::zero();
            }
            let ni = normals.triangle_normals[i];
            let total: T = nbrs
                .iter()
                .map(|&j| geom::angle_between(ni, normals.triangle_normals[j]))
                .sum();
            total / T::from_count(nbrs.len())
        })
        .collect();
    AngleField { avg_angle }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    use super::super::test_meshes::*;
    use super::super::LoadOptions;
    use super::*;

    fn single(a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> TriangleMesh<f64> {
        TriangleMesh::from_raw(vec![a, b, c], vec![[0, 1, 2]], &LoadOptions::default()).unwrap()
    }

    #[test]
    fn axis_aligned_normal_and_winding() {
        let m = single([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(compute_triangle_normals(&m).unwrap().triangle_normals[0], [0.0, 0.0, 1.0]);
        let m = single([0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]);
        assert_eq!(compute_triangle_normals(&m).unwrap().triangle_normals[0], [0.0, 0.0, -1.0]);
    }

    #[test]
    fn normal_is_rotation_equivariant() {
        let r = geom::axis_angle(geom::normalize([1.0, 2.0, -0.5], 0.0).unwrap(), 1.234);
        let m = single([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).map_vertices(|p| geom::mat_vec(&r, p));
        let n = compute_triangle_normals(&m).unwrap().triangle_normals[0];
        let expect = geom::mat_vec(&r, [0.0, 0.0, 1.0]);
        for k in 0..3 {
            assert!((n[k] - expect[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_grid_smoothing_is_fixed_point() {
        let g = flat_grid(3);
        let raw = compute_triangle_normals(&g).unwrap();
        let s = smooth_normals(&g, &raw);
        assert!(s.smoothed);
        assert_eq!(s.triangle_normals, raw.triangle_normals);
        let a = compute_average_angles(&g, &s);
        assert!(a.avg_angle.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn isolated_triangle_smoothing_is_identity() {
        let m = single([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 3.0]);
        let raw = compute_triangle_normals(&m).unwrap();
        let s = smooth_normals(&m, &raw);
        for k in 0..3 {
            assert!((s.triangle_normals[0][k] - raw.triangle_normals[0][k]).abs() < 1e-15);
        }
    }

    #[test]
    fn cube_smoothed_face_triangle_matches_hand_oracle() {
        // Triangle 0 = (0, 2, 1) on the bottom face, raw normal -z.
        // Incident raw normals per corner (cube triangulation in test_meshes):
        //   v0: t0,t1 (-z), t4,t5 (-y), t10,t11 (-x) -> (-2,-2,-2)
        //   v2: t0,t1 (-z), t6,t7 (+y), t8 (+x)      -> ( 1, 2,-2)
        //   v1: t0 (-z), t4 (-y), t8,t9 (+x)         -> ( 2,-1,-1)
        let n0 = geom::normalize([-2.0, -2.0, -2.0], 0.0).unwrap();
        let n2 = geom::normalize([1.0, 2.0, -2.0], 0.0).unwrap();
        let n1 = geom::normalize([2.0, -1.0, -1.0], 0.0).unwrap();
        let expect = geom::normalize(geom::add(geom::add(n0, n1), n2), 0.0).unwrap();

        let cube = unit_cube();
        let raw = compute_triangle_normals(&cube).unwrap();
        let s = smooth_normals(&cube, &raw);
        for k in 0..3 {
            assert!((s.triangle_normals[0][k] - expect[k]).abs() < 1e-12);
        }
        // Tilted away from the face normal but still mostly -z.
        assert!(s.triangle_normals[0][2] < -0.5 && s.triangle_normals[0][2] > -1.0);
        for n in s.triangle_normals.iter().chain(&s.vertex_normals) {
            assert!((geom::norm(*n) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn opposing_normals_fall_back_to_raw() {
        // Two triangles on the same vertices with opposite winding cancel.
        let v = vec![[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = TriangleMesh::from_raw(v, vec![[0, 1, 2], [0, 2, 1]], &LoadOptions::default()).unwrap();
        let raw = compute_triangle_normals(&m).unwrap();
        let s = smooth_normals(&m, &raw);
        assert!(s.fallbacks > 0);
        for n in s.triangle_normals.iter().chain(&s.vertex_normals) {
            assert!((geom::norm(*n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hinge_at_right_angle() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        // Floor (normal +z) and wall (normal +y) hinged on the x axis.
        let m = TriangleMesh::from_raw(v, vec![[0, 1, 2], [0, 3, 1]], &LoadOptions::default()).unwrap();
        let raw = compute_triangle_normals(&m).unwrap();
        let a = compute_average_angles(&m, &raw);
        for x in a.avg_angle {
            assert!((x - FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn cube_raw_average_angle_is_third_pi() {
        let cube = unit_cube();
        let raw = compute_triangle_normals(&cube).unwrap();
        let a = compute_average_angles(&cube, &raw);
        // Brute force: for each triangle, angles to the triangles sharing two vertices.
        for i in 0..12 {
            let mut angles = Vec::new();
            for j in 0..12 {
                let shared = cube.triangles()[i].iter().filter(|v| cube.triangles()[j].contains(v)).count();
                if i != j && shared == 2 {
                    let d = geom::dot(raw.triangle_normals[i], raw.triangle_normals[j]);
                    angles.push(d.clamp(-1.0, 1.0).acos());
                }
            }
            let oracle = angles.iter().sum::<f64>() / angles.len() as f64;
            assert!((oracle - FRAC_PI_3).abs() < 1e-12);
            assert!((a.avg_angle[i] - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_triangle_angle_is_zero() {
        let m = single([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let raw = compute_triangle_normals(&m).unwrap();
        assert_eq!(compute_average_angles(&m, &raw).avg_angle, vec![0.0]);
    }
}
