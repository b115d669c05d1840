//! Per-part point sets in a local reference frame.
//!
//! Each part is resampled to a fixed number of surface points, expressed in a
//! local frame (PCA-based or anchored to the global vertical axis), rescaled
//! to the unit sphere and optionally tagged with the source triangle's
//! average angle.

use thiserror::Error;

use crate::geom::{self, Mat3, Vec3};
use crate::mesh::{AngleField, NormalField, TriangleMesh};
use crate::rng::SeededRng;
use crate::sampler::Part;
use crate::scalar::Real;

const EIGEN_TIE: f64 = 1e-9;
const SKEW_TIE: f64 = 1e-9;
const HORIZONTAL_MIN: f64 = 1e-9;
const MIN_PART_AREA: f64 = 1e-18;
const MIN_EXTENT: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("part has zero total area")]
    ZeroArea,
    #[error("part references triangle {0} outside the mesh")]
    InvalidTriangle(usize),
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("invalid feature config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LrfMode {
    Pca,
    Z,
}

impl LrfMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LrfMode::Pca => "pca",
            LrfMode::Z => "z",
        }
    }
}

impl std::str::FromStr for LrfMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pca" => Ok(Self::Pca),
            "z" => Ok(Self::Z),
            _ => Err(format!("unknown LRF mode `{s}` (expected pca or z)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureConfig {
    pub n_points: usize,
    pub lrf_mode: LrfMode,
    pub include_angle: bool,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            n_points: 250,
            lrf_mode: LrfMode::Pca,
            include_angle: true,
            seed: 0,
        }
    }
}

impl FeatureConfig {
    pub fn n_columns(&self) -> usize {
        if self.include_angle {
            4
        } else {
            3
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.n_points < 4 {
            return Err(FeatureError::InvalidConfig("n_points must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawPoint<T> {
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
    pub angle: T,
}

/// Right-handed orthonormal frame; `axes` rows are the local x, y, z axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LRFrame<T> {
    pub origin: Vec3<T>,
    pub axes: Mat3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LrfFallback {
    /// PCA eigenvalues tied; the Z frame was used instead.
    DegenerateCovariance,
    /// Mean normal was vertical; x came from the horizontal PCA axis.
    VerticalNormal,
    /// Both the normal and the main PCA axis were vertical; x = (1, 0, 0).
    VerticalNormalAxis,
}

impl LrfFallback {
    pub fn as_str(self) -> &'static str {
        match self {
            LrfFallback::DegenerateCovariance => "degenerate_covariance",
            LrfFallback::VerticalNormal => "vertical_normal",
            LrfFallback::VerticalNormalAxis => "vertical_normal_axis",
        }
    }
}

impl std::str::FromStr for LrfFallback {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "degenerate_covariance" => Ok(Self::DegenerateCovariance),
            "vertical_normal" => Ok(Self::VerticalNormal),
            "vertical_normal_axis" => Ok(Self::VerticalNormalAxis),
            _ => Err(format!("unknown LRF fallback `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartPointSet<T> {
    /// Row-major `n_points x n_columns`.
    pub points: Vec<T>,
    pub n_columns: usize,
    pub lrf: LRFrame<T>,
    pub part_index: usize,
    pub fallback: Option<LrfFallback>,
}

impl<T: Real> PartPointSet<T> {
    pub fn n_points(&self) -> usize {
        self.points.len() / self.n_columns.max(1)
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.points[i * self.n_columns..(i + 1) * self.n_columns]
    }

    /// True when the PCA frame could not be resolved.
    pub fn is_degenerate(&self) -> bool {
        self.fallback == Some(LrfFallback::DegenerateCovariance)
    }
}

/// `n_points` area-weighted surface samples over the part's triangles.
pub fn sample_surface_points<T: Real>(
    part: &Part<T>,
    mesh: &TriangleMesh<T>,
    normals: &NormalField<T>,
    angles: &AngleField<T>,
    n_points: usize,
    rng: &mut SeededRng,
) -> Result<Vec<RawPoint<T>>, FeatureError> {
    let mut cumulative = Vec::with_capacity(part.triangles.len());
    let mut total = T::zero();
    for &t in &part.triangles {
        if t >= mesh.n_triangles() {
            return Err(FeatureError::InvalidTriangle(t));
        }
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total >= T::lit(MIN_PART_AREA)) {
        return Err(FeatureError::ZeroArea);
    }
    let points = (0..n_points)
        .map(|_| {
            let target = T::lit(rng.unit()) * total;
            let k = cumulative
                .partition_point(|&c| c <= target)
                .min(cumulative.len() - 1);
            let t = part.triangles[k];
            let [a, b, c] = mesh.corners(t);
            let s1 = T::lit(rng.unit()).sqrt();
            let r2 = T::lit(rng.unit());
            let wa = T::one() - s1;
            let wb = s1 * (T::one() - r2);
            let wc = s1 * r2;
            let position = geom::add(geom::add(geom::scale(a, wa), geom::scale(b, wb)), geom::scale(c, wc));
            RawPoint {
                position,
                normal: normals.triangle_normals[t],
                angle: angles.avg_angle[t],
            }
        })
        .collect();
    Ok(points)
}

fn centered_covariance<T: Real>(points: &[RawPoint<T>], origin: Vec3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for p in points {
        let d = geom::sub(p.position, origin);
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += d[i] * d[j];
            }
        }
    }
    let inv = T::one() / T::from_count(points.len());
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
    c
}

fn mean_normal<T: Real>(points: &[RawPoint<T>]) -> Vec3<T> {
    geom::mean(points.iter().map(|p| p.normal))
}

/// Sign for `axis` from the standardized third moment of the projections;
/// near-symmetric sets fall back to making the largest component positive.
fn skew_sign<T: Real>(points: &[RawPoint<T>], origin: Vec3<T>, axis: Vec3<T>) -> T {
    let (mut m2, mut m3) = (T::zero(), T::zero());
    for p in points {
        let s = geom::dot(geom::sub(p.position, origin), axis);
        m2 += s * s;
        m3 += s * s * s;
    }
    let n = T::from_count(points.len());
    let (m2, m3) = (m2 / n, m3 / n);
    let skew = if m2 > T::zero() { m3 / (m2 * m2.sqrt()) } else { T::zero() };
    if skew.abs() >= T::lit(SKEW_TIE) {
        return skew.signum();
    }
    let k = (0..3)
        .max_by(|&i, &j| {
            axis[i]
                .abs()
                .partial_cmp(&axis[j].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(j.cmp(&i))
        })
        .unwrap_or(0);
    if axis[k] < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

fn frame_from_zx<T: Real>(origin: Vec3<T>, z: Vec3<T>, x: Vec3<T>) -> Option<LRFrame<T>> {
    let x = geom::normalize(geom::sub(x, geom::scale(z, geom::dot(x, z))), T::lit(1e-12))?;
    let y = geom::cross(z, x);
    Some(LRFrame { origin, axes: [x, y, z] })
}

/// PCA frame: z = least-variance axis oriented along the mean normal,
/// x = main axis oriented by skew, y = z x x. Tied eigenvalues fall back to
/// the Z frame and are flagged.
pub fn compute_pca_lrf<T: Real>(points: &[RawPoint<T>]) -> Result<(LRFrame<T>, Option<LrfFallback>), FeatureError> {
    if points.len() < 3 {
        return Err(FeatureError::TooFewPoints { need: 3, got: points.len() });
    }
    let origin = geom::mean(points.iter().map(|p| p.position));
    let cov = centered_covariance(points, origin);
    let (vals, vecs) = geom::symmetric_eigen(&cov);
    let tie = T::lit(EIGEN_TIE) * vals[0];
    let degenerate = !(vals[0] > T::zero()) || vals[1] - vals[2] < tie || vals[0] - vals[1] < tie;
    if !degenerate {
        let mut z = vecs[2];
        if geom::dot(z, mean_normal(points)) < T::zero() {
            z = geom::scale(z, -T::one());
        }
        let x = geom::scale(vecs[0], skew_sign(points, origin, vecs[0]));
        if let Some(frame) = frame_from_zx(origin, z, x) {
            return Ok((frame, None));
        }
    }
    let (frame, _) = compute_z_lrf(points)?;
    Ok((frame, Some(LrfFallback::DegenerateCovariance)))
}

/// Frame anchored to the global vertical: z = (0, 0, 1), x = horizontal part
/// of the mean normal.
pub fn compute_z_lrf<T: Real>(points: &[RawPoint<T>]) -> Result<(LRFrame<T>, Option<LrfFallback>), FeatureError> {
    if points.is_empty() {
        return Err(FeatureError::TooFewPoints { need: 1, got: 0 });
    }
    let origin = geom::mean(points.iter().map(|p| p.position));
    let z = [T::zero(), T::zero(), T::one()];
    let m = mean_normal(points);
    let horizontal = [m[0], m[1], T::zero()];
    if geom::norm(horizontal) >= T::lit(HORIZONTAL_MIN) {
        if let Some(f) = frame_from_zx(origin, z, horizontal) {
            return Ok((f, None));
        }
    }
    let cov = centered_covariance(points, origin);
    let (vals, vecs) = geom::symmetric_eigen(&cov);
    let main = [vecs[0][0], vecs[0][1], T::zero()];
    if vals[0] > T::zero() && geom::norm(main) >= T::lit(HORIZONTAL_MIN) {
        let main = geom::normalize(main, T::zero()).expect("checked norm");
        let x = geom::scale(main, skew_sign(points, origin, main));
        if let Some(f) = frame_from_zx(origin, z, x) {
            return Ok((f, Some(LrfFallback::VerticalNormal)));
        }
    }
    let x = [T::one(), T::zero(), T::zero()];
    Ok((
        LRFrame { origin, axes: [x, geom::cross(z, x), z] },
        Some(LrfFallback::VerticalNormalAxis),
    ))
}

/// Local coordinates scaled so the farthest point has norm 1, plus the angle
/// column when requested.
pub fn canonicalize<T: Real>(
    points: &[RawPoint<T>],
    lrf: &LRFrame<T>,
    include_angle: bool,
    part_index: usize,
) -> PartPointSet<T> {
    let local: Vec<Vec3<T>> = points
        .iter()
        .map(|p| geom::mat_vec(&lrf.axes, geom::sub(p.position, lrf.origin)))
        .collect();
    let max = local.iter().map(|&v| geom::norm(v)).fold(T::zero(), T::max);
    let inv = if max < T::lit(MIN_EXTENT) { T::zero() } else { T::one() / max };
    let n_columns = if include_angle { 4 } else { 3 };
    let mut out = Vec::with_capacity(points.len() * n_columns);
    for (v, p) in local.iter().zip(points) {
        out.extend(v.iter().map(|&c| c * inv));
        if include_angle {
            out.push(p.angle);
        }
    }
    PartPointSet {
        points: out,
        n_columns,
        lrf: *lrf,
        part_index,
        fallback: None,
    }
}

/// Samples, frames and canonicalizes one part with its own derived seed.
pub fn featurize_part<T: Real>(
    part: &Part<T>,
    part_index: usize,
    mesh: &TriangleMesh<T>,
    normals: &NormalField<T>,
    angles: &AngleField<T>,
    cfg: &FeatureConfig,
) -> Result<PartPointSet<T>, FeatureError> {
    cfg.validate()?;
    let mut rng = SeededRng::derived(cfg.seed, &[part_index as u64]);
    let raw = sample_surface_points(part, mesh, normals, angles, cfg.n_points, &mut rng)?;
    let (lrf, fallback) = match cfg.lrf_mode {
        LrfMode::Pca => compute_pca_lrf(&raw)?,
        LrfMode::Z => compute_z_lrf(&raw)?,
    };
    let mut set = canonicalize(&raw, &lrf, cfg.include_angle, part_index);
    set.fallback = fallback;
    Ok(set)
}
