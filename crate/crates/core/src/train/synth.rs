//! Procedural convex primitives for desk-scale training runs.

use std::collections::HashMap;

use crate::geom::{self, Mat3, Vec3};
use crate::mesh::{LoadOptions, TriangleMesh};
use crate::rng::SeededRng;
use crate::scalar::Real;

pub const SYNTH_CLASSES: [&str; 4] = ["box", "cylinder", "cone", "sphere"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationMode {
    None,
    /// Uniform random rotation about the vertical axis.
    Z,
    /// Uniform random rotation in SO(3).
    So3,
}

impl RotationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RotationMode::None => "none",
            RotationMode::Z => "z",
            RotationMode::So3 => "so3",
        }
    }
}

impl std::str::FromStr for RotationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "z" => Ok(Self::Z),
            "so3" => Ok(Self::So3),
            _ => Err(format!("unknown rotation `{s}` (expected none, z or so3)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub seed: u64,
    pub rotation: RotationMode,
    /// Uniform scale bounds; the factor is drawn log-uniformly.
    pub scale_range: (f64, f64),
    /// Probability that an object loses the triangles beyond a random plane.
    pub cut_probability: f64,
    /// Subdivisions along the coarsest direction of each primitive.
    pub resolution: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 10,
            seed: 0,
            rotation: RotationMode::Z,
            scale_range: (0.2, 5.0),
            cut_probability: 0.0,
            resolution: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticObject<T> {
    /// `<class>_<index>`, unique within one generated set.
    pub name: String,
    pub label: usize,
    pub mesh: TriangleMesh<T>,
}

/// Class-interleaved objects, deterministic per `(seed, class, index)`.
pub fn generate_synthetic_dataset<T: Real>(cfg: &SynthConfig) -> Vec<SyntheticObject<T>> {
    let mut out = Vec::with_capacity(cfg.n_per_class * SYNTH_CLASSES.len());
    for i in 0..cfg.n_per_class {
        for (label, class) in SYNTH_CLASSES.iter().enumerate() {
            let mut rng = SeededRng::derived(cfg.seed, &[label as u64, i as u64]);
            out.push(SyntheticObject {
                name: format!("{class}_{i:04}"),
                label,
                mesh: synthesize(label, cfg, &mut rng),
            });
        }
    }
    out
}

/// One object of class `label` drawn from `rng`.
pub fn synthesize<T: Real>(label: usize, cfg: &SynthConfig, rng: &mut SeededRng) -> TriangleMesh<T> {
    let k = cfg.resolution.max(3);
    let mut soup = match label % SYNTH_CLASSES.len() {
        0 => boxed(
            [rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)],
            k,
        ),
        1 => cylinder(rng.uniform(0.3, 0.7), rng.uniform(0.8, 2.0), 1.0, 2 * k, k),
        2 => cylinder(rng.uniform(0.4, 0.8), rng.uniform(0.8, 2.0), 0.0, 2 * k, k),
        _ => sphere(
            [rng.uniform(0.85, 1.15), rng.uniform(0.85, 1.15), rng.uniform(0.85, 1.15)],
            2 * k,
            k,
        ),
    };
    soup.orient_outward();
    let rot = match cfg.rotation {
        RotationMode::None => geom::identity(),
        RotationMode::Z => geom::axis_angle([0.0, 0.0, 1.0], rng.uniform(0.0, std::f64::consts::TAU)),
        RotationMode::So3 => random_rotation(rng),
    };
    let (lo, hi) = cfg.scale_range;
    let s = rng.uniform(lo.ln(), hi.ln()).exp();
    soup.transform(&rot, s);
    if rng.bernoulli(cfg.cut_probability) {
        soup.cut(rng);
    }
    let vertices = soup.vertices.iter().map(|v| v.map(T::lit)).collect();
    TriangleMesh::from_raw(vertices, soup.triangles, &LoadOptions::default()).expect("valid by construction")
}

/// Uniform rotation from a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut SeededRng) -> Mat3<f64> {
    loop {
        let q = [rng.normal(), rng.normal(), rng.normal(), rng.normal()];
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            return geom::quaternion(q.map(|v| v / n));
        }
    }
}

struct Soup {
    vertices: Vec<Vec3<f64>>,
    triangles: Vec<[usize; 3]>,
}

impl Soup {
    fn quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    /// Flips triangles facing the centroid; valid for convex shapes.
    fn orient_outward(&mut self) {
        let center = geom::mean(self.vertices.iter().copied());
        for t in &mut self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let n = geom::cross(geom::sub(b, a), geom::sub(c, a));
            let mid = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
            if geom::dot(n, geom::sub(mid, center)) < 0.0 {
                t.swap(1, 2);
            }
        }
    }

    fn transform(&mut self, rot: &Mat3<f64>, s: f64) {
        for v in &mut self.vertices {
            *v = geom::scale(geom::mat_vec(rot, *v), s);
        }
    }

    /// Drops triangles whose centroid lies beyond a random plane that keeps
    /// the centroid of the shape, then compacts the vertices.
    fn cut(&mut self, rng: &mut SeededRng) {
        let center = geom::mean(self.vertices.iter().copied());
        let radius = self
            .vertices
            .iter()
            .map(|&v| geom::norm(geom::sub(v, center)))
            .fold(0.0, f64::max);
        let dir = loop {
            let d = [rng.normal(), rng.normal(), rng.normal()];
            if let Some(n) = geom::normalize(d, 1e-6) {
                break n;
            }
        };
        let offset = rng.uniform(0.1, 0.6) * radius;
        let kept: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .copied()
            .filter(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                let mid = geom::scale(geom::add(geom::add(a, b), c), 1.0 / 3.0);
                geom::dot(geom::sub(mid, center), dir) <= offset
            })
            .collect();
        let mut remap = HashMap::new();
        let mut vertices = Vec::new();
        let triangles = kept
            .iter()
            .map(|t| {
                t.map(|i| {
                    *remap.entry(i).or_insert_with(|| {
                        vertices.push(self.vertices[i]);
                        vertices.len() - 1
                    })
                })
            })
            .collect();
        self.vertices = vertices;
        self.triangles = triangles;
    }
}

/// Box surface with a `k x k` grid per face, vertices welded on the lattice.
fn boxed(dims: [f64; 3], k: usize) -> Soup {
    let mut soup = Soup {
        vertices: Vec::new(),
        triangles: Vec::new(),
    };
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vid = |p: [usize; 3], soup: &mut Soup| -> usize {
        *index.entry(p).or_insert_with(|| {
            soup.vertices
                .push([0, 1, 2].map(|a| (p[a] as f64 / k as f64 - 0.5) * dims[a]));
            soup.vertices.len() - 1
        })
    };
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, k] {
            for i in 0..k {
                for j in 0..k {
                    let corner = |di: usize, dj: usize| {
                        let mut p = [0; 3];
                        p[axis] = side;
                        p[u] = i + di;
                        p[v] = j + dj;
                        p
                    };
                    let a = vid(corner(0, 0), &mut soup);
                    let b = vid(corner(1, 0), &mut soup);
                    let c = vid(corner(1, 1), &mut soup);
                    let d = vid(corner(0, 1), &mut soup);
                    soup.quad(a, b, c, d);
                }
            }
        }
    }
    soup
}

/// Closed frustum along z from radius `r` at the bottom to `r * top` at the
/// top; `top == 0` gives a cone with a single apex vertex.
fn cylinder(r: f64, h: f64, top: f64, segments: usize, rings: usize) -> Soup {
    let mut soup = Soup {
        vertices: Vec::new(),
        triangles: Vec::new(),
    };
    let ring_at = |soup: &mut Soup, z: f64, radius: f64| -> usize {
        let start = soup.vertices.len();
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            soup.vertices.push([radius * a.cos(), radius * a.sin(), z]);
        }
        start
    };
    let stitch = |soup: &mut Soup, lo: usize, hi: usize| {
        for s in 0..segments {
            let t = (s + 1) % segments;
            soup.quad(lo + s, lo + t, hi + t, hi + s);
        }
    };
    let fan = |soup: &mut Soup, ring: usize, center: Vec3<f64>| {
        soup.vertices.push(center);
        let c = soup.vertices.len() - 1;
        for s in 0..segments {
            soup.triangles.push([ring + s, ring + (s + 1) % segments, c]);
        }
    };
    let side_rings = if top == 0.0 { rings } else { rings + 1 };
    let side: Vec<usize> = (0..side_rings)
        .map(|j| {
            let t = j as f64 / rings as f64;
            ring_at(&mut soup, (t - 0.5) * h, r * (1.0 - t + t * top))
        })
        .collect();
    for w in side.windows(2) {
        stitch(&mut soup, w[0], w[1]);
    }
    if top == 0.0 {
        fan(&mut soup, *side.last().expect("rings"), [0.0, 0.0, 0.5 * h]);
    }
    let mut caps = vec![(side[0], -0.5 * h, r)];
    if top != 0.0 {
        caps.push((*side.last().expect("rings"), 0.5 * h, r * top));
    }
    for (edge, z, radius) in caps {
        let cap_rings = (rings / 2).max(1);
        let mut outer = edge;
        for q in (1..cap_rings).rev() {
            let inner = ring_at(&mut soup, z, radius * q as f64 / cap_rings as f64);
            stitch(&mut soup, outer, inner);
            outer = inner;
        }
        fan(&mut soup, outer, [0.0, 0.0, z]);
    }
    soup
}

/// Latitude-longitude ellipsoid with single-vertex poles.
fn sphere(radii: [f64; 3], segments: usize, rings: usize) -> Soup {
    let mut soup = Soup {
        vertices: vec![[0.0, 0.0, -radii[2]]],
        triangles: Vec::new(),
    };
    let mut starts = Vec::new();
    for j in 1..rings {
        let phi = std::f64::consts::PI * j as f64 / rings as f64;
        starts.push(soup.vertices.len());
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            soup.vertices.push([
                radii[0] * phi.sin() * a.cos(),
                radii[1] * phi.sin() * a.sin(),
                -radii[2] * phi.cos(),
            ]);
        }
    }
    soup.vertices.push([0.0, 0.0, radii[2]]);
    let north = soup.vertices.len() - 1;
    for s in 0..segments {
        let t = (s + 1) % segments;
        soup.triangles.push([0, starts[0] + t, starts[0] + s]);
        let last = *starts.last().expect("rings");
        soup.triangles.push([last + s, last + t, north]);
    }
    for w in starts.windows(2) {
        for s in 0..segments {
            let t = (s + 1) % segments;
            soup.quad(w[0] + s, w[0] + t, w[1] + t, w[1] + s);
        }
    }
    soup
}
