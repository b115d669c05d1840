//! Small fixed-size vector helpers and a 3x3 symmetric eigen-solver.

use crate::scalar::Real;

pub type Vec3<T> = [T; 3];
/// Row-major 3x3 matrix.
pub type Mat3<T> = [[T; 3]; 3];

#[inline]
pub fn add<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Unit vector along `a`, or `None` when `|a| < min_norm`.
#[inline]
pub fn normalize<T: Real>(a: Vec3<T>, min_norm: T) -> Option<Vec3<T>> {
    let n = norm(a);
    if n < min_norm || !n.is_finite() {
        None
    } else {
        Some(scale(a, T::one() / n))
    }
}

/// Angle between two unit vectors.
///
/// Uses `atan2(|a x b|, a . b)`, which equals `acos(clamp(a . b))` but stays
/// accurate for nearly parallel vectors.
#[inline]
pub fn angle_between<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    norm(cross(a, b)).atan2(dot(a, b))
}

pub fn mean<T: Real>(points: impl IntoIterator<Item = Vec3<T>>) -> Vec3<T> {
    let mut acc = [T::zero(); 3];
    let mut n = 0usize;
    for p in points {
        acc = add(acc, p);
        n += 1;
    }
    if n == 0 {
        acc
    } else {
        scale(acc, T::one() / T::from_count(n))
    }
}

#[inline]
pub fn mat_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

pub fn det<T: Real>(m: &Mat3<T>) -> T {
    dot(m[0], cross(m[1], m[2]))
}

pub fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

/// Rotation by `angle` about the unit `axis` (Rodrigues).
pub fn axis_angle<T: Real>(axis: Vec3<T>, angle: T) -> Mat3<T> {
    let (s, c) = angle.sin_cos();
    let t = T::one() - c;
    let [x, y, z] = axis;
    [
        [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
        [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
        [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
    ]
}

/// Rotation from a unit quaternion `(w, x, y, z)`.
pub fn quaternion<T: Real>(q: [T; 4]) -> Mat3<T> {
    let two = T::lit(2.0);
    let [w, x, y, z] = q;
    [
        [
            T::one() - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            T::one() - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            T::one() - two * (x * x + y * y),
        ],
    ]
}

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues in descending order and the matching unit eigenvectors
/// (one per row).
pub fn symmetric_eigen<T: Real>(m: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut a = *m;
    // Columns of v accumulate the rotations.
    let mut v = identity::<T>();
    let scale_ref = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| a[i][j].abs())
        .fold(T::zero(), T::max);
    if scale_ref == T::zero() {
        return ([T::zero(); 3], identity());
    }
    let tiny = T::epsilon() * T::epsilon() * scale_ref;
    for _sweep in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= tiny {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() <= tiny {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            // a <- J^T a J with J the (p, q) Givens rotation
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = [a[order[0]][order[0]], a[order[1]][order[1]], a[order[2]][order[2]]];
    let vt = transpose(&v);
    let vectors = [vt[order[0]], vt[order[1]], vt[order[2]]];
    (values, vectors)
}
