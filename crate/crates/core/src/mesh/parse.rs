//! ASCII OFF and PLY readers.

use std::str::FromStr;

use super::{LoadOptions, MeshError, TriangleMesh};
use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    PlyAscii,
}

impl MeshFormat {
    /// Guess from a file extension (`off` or `ply`, case-insensitive).
    pub fn from_extension(ext: &str) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "off" => Some(Self::Off),
            "ply" => Some(Self::PlyAscii),
            _ => None,
        }
    }
}

pub fn load_mesh<T: Real>(
    bytes: &[u8],
    format: MeshFormat,
    opts: &LoadOptions,
) -> Result<TriangleMesh<T>, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::Parse {
        line: 0,
        msg: format!("not UTF-8 text: {e}"),
    })?;
    let (vertices, polygons) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::PlyAscii => parse_ply(text)?,
    };
    let mut triangulated = 0;
    let mut triangles = Vec::with_capacity(polygons.len());
    for poly in polygons {
        if poly.len() > 3 {
            triangulated += 1;
        }
        for k in 1..poly.len() - 1 {
            triangles.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    let mut mesh = TriangleMesh::from_raw(vertices, triangles, opts)?;
    mesh.set_triangulated(triangulated);
    Ok(mesh)
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines with `#` comments removed, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn num<N: FromStr>(tok: &str, line: usize, what: &str) -> Result<N, MeshError> {
    tok.parse()
        .map_err(|_| perr(line, format!("invalid {what} `{tok}`")))
}

fn vertex<T: Real>(toks: &[&str], line: usize) -> Result<Vec3<T>, MeshError> {
    if toks.len() < 3 {
        return Err(perr(line, "vertex needs three coordinates"));
    }
    let mut p = [T::zero(); 3];
    for k in 0..3 {
        let v: f64 = num(toks[k], line, "coordinate")?;
        if !v.is_finite() {
            return Err(perr(line, "non-finite coordinate"));
        }
        p[k] = T::lit(v);
    }
    Ok(p)
}

type Parsed<T> = (Vec<Vec3<T>>, Vec<Vec<usize>>);

fn parse_off<T: Real>(text: &str) -> Result<Parsed<T>, MeshError> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| perr(hline, "missing OFF header"))?;
    // Some exporters glue the counts onto the header (`OFF12 8 0`).
    let (cline, counts) = if rest.trim().is_empty() {
        lines.next().ok_or_else(|| perr(hline, "missing counts line"))?
    } else {
        (hline, rest.trim())
    };
    let counts: Vec<&str> = counts.split_whitespace().collect();
    if counts.len() < 2 {
        return Err(perr(cline, "counts line needs vertex and face counts"));
    }
    let nv: usize = num(counts[0], cline, "vertex count")?;
    let nf: usize = num(counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(0, format!("expected {nv} vertices, found {i}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        vertices.push(vertex(&toks, ln)?);
    }
    let mut faces = Vec::with_capacity(nf);
    for i in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(0, format!("expected {nf} faces, found {i}")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        faces.push(polygon(&toks, ln)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, format!("data after the declared {nf} faces")));
    }
    Ok((vertices, faces))
}

fn polygon(toks: &[&str], line: usize) -> Result<Vec<usize>, MeshError> {
    let n: usize = num(toks.first().copied().unwrap_or(""), line, "polygon size")?;
    if n < 3 {
        return Err(perr(line, "polygon with fewer than three corners"));
    }
    if toks.len() < n + 1 {
        return Err(perr(line, format!("polygon declares {n} corners")));
    }
    toks[1..=n].iter().map(|t| num(t, line, "vertex index")).collect()
}

#[derive(Debug)]
enum PlyProperty {
    Scalar(String),
    List(String),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn parse_ply<T: Real>(text: &str) -> Result<Parsed<T>, MeshError> {
    let mut lines = content_lines(text);
    match lines.next() {
        Some((_, "ply")) => {}
        Some((ln, _)) => return Err(perr(ln, "missing ply magic")),
        None => return Err(perr(1, "empty file")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut ascii = false;
    loop {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "missing end_header"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks[0] {
            "format" => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(MeshError::Unsupported(format!(
                        "PLY format `{}` (only ascii is supported)",
                        toks.get(1).unwrap_or(&"")
                    )));
                }
                ascii = true;
            }
            "comment" | "obj_info" => {}
            "element" => {
                if toks.len() != 3 {
                    return Err(perr(ln, "element needs a name and a count"));
                }
                elements.push(PlyElement {
                    name: toks[1].to_string(),
                    count: num(toks[2], ln, "element count")?,
                    properties: Vec::new(),
                });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| perr(ln, "property before any element"))?;
                let prop = match toks.get(1) {
                    Some(&"list") if toks.len() == 5 => PlyProperty::List(toks[4].to_string()),
                    Some(_) if toks.len() == 3 => PlyProperty::Scalar(toks[2].to_string()),
                    _ => return Err(perr(ln, "malformed property")),
                };
                el.properties.push(prop);
            }
            "end_header" => break,
            other => return Err(perr(ln, format!("unknown header keyword `{other}`"))),
        }
    }
    if !ascii {
        return Err(perr(0, "missing format line"));
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        let xyz = if el.name == "vertex" {
            let find = |n: &str| {
                el.properties
                    .iter()
                    .position(|p| matches!(p, PlyProperty::Scalar(s) if s == n))
                    .ok_or_else(|| perr(0, format!("vertex element lacks property `{n}`")))
            };
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            None
        };
        let face_list = if el.name == "face" {
            Some(
                el.properties
                    .iter()
                    .position(|p| {
                        matches!(p, PlyProperty::List(s) if s == "vertex_indices" || s == "vertex_index")
                    })
                    .ok_or_else(|| perr(0, "face element lacks a vertex_indices list"))?,
            )
        } else {
            None
        };
        for i in 0..el.count {
            let (ln, l) = lines.next().ok_or_else(|| {
                perr(0, format!("expected {} `{}` rows, found {i}", el.count, el.name))
            })?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            let mut values: Vec<&[&str]> = Vec::with_capacity(el.properties.len());
            let mut pos = 0;
            for prop in &el.properties {
                let width = match prop {
                    PlyProperty::Scalar(_) => 1,
                    PlyProperty::List(_) => {
                        let n: usize = num(toks.get(pos).copied().unwrap_or(""), ln, "list length")?;
                        n + 1
                    }
                };
                if pos + width > toks.len() {
                    return Err(perr(ln, format!("row too short for `{}`", el.name)));
                }
                values.push(&toks[pos..pos + width]);
                pos += width;
            }
            if pos != toks.len() {
                return Err(perr(ln, format!("row too long for `{}`", el.name)));
            }
            if let Some([x, y, z]) = xyz {
                vertices.push(vertex::<T>(&[values[x][0], values[y][0], values[z][0]], ln)?);
            }
            if let Some(f) = face_list {
                faces.push(polygon(values[f], ln)?);
            }
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(perr(ln, "data after the declared elements"));
    }
    Ok((vertices, faces))
}

/// OFF text with shortest round-trip decimal coordinates.
pub fn write_off<T: Real>(mesh: &TriangleMesh<T>) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "OFF\n{} {} 0", mesh.vertices().len(), mesh.n_triangles());
    for [x, y, z] in mesh.vertices() {
        let _ = writeln!(s, "{x} {y} {z}");
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn off(s: &str) -> Result<TriangleMesh<f64>, MeshError> {
        load_mesh(s.as_bytes(), MeshFormat::Off, &LoadOptions::default())
    }

    #[test]
    fn single_triangle_off() {
        let m = off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(m.n_triangles(), 1);
        assert!(m.neighbors(0).is_empty());
    }

    #[test]
    fn face_count_mismatch_is_parse_error() {
        let err = off("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }));
        let err = off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 0 2 1\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(off(""), Err(MeshError::Parse { .. })));
        assert!(matches!(off("PFF\n3 1 0\n"), Err(MeshError::Parse { .. })));
        assert!(matches!(off("OFF\nthree 1 0\n"), Err(MeshError::Parse { .. })));
    }

    #[test]
    fn comments_blank_lines_and_glued_counts() {
        let src = "# exported\nOFF4 1 0\n\n0 0 0\n1 0 0 # corner\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let m = off(src);
        // One quad -> two fan triangles sharing the diagonal.
        let m = m.unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.load_report().triangulated_polygons, 1);
        assert_eq!(m.neighbors(0), &[1]);
    }

    #[test]
    fn unit_cube_off_adjacency() {
        let src = "OFF
8 12 0
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
3 0 2 1
3 0 3 2
3 4 5 6
3 4 6 7
3 0 1 5
3 0 5 4
3 2 3 7
3 2 7 6
3 1 2 6
3 1 6 5
3 0 4 7
3 0 7 3
";
        let m = off(src).unwrap();
        assert_eq!(m.n_triangles(), 12);
        assert!(m.adjacency().iter().all(|a| a.len() == 3));
    }

    #[test]
    fn ply_ascii_with_extra_properties() {
        let src = "ply
format ascii 1.0
comment made by hand
element vertex 4
property float x
property float y
property float z
property uchar red
element face 2
property list uchar int vertex_indices
property int flags
end_header
0 0 0 255
1 0 0 255
1 1 0 255
0 1 0 255
3 0 1 2 7
3 0 2 3 7
";
        let m: TriangleMesh<f64> =
            load_mesh(src.as_bytes(), MeshFormat::PlyAscii, &LoadOptions::default()).unwrap();
        assert_eq!(m.n_triangles(), 2);
        assert_eq!(m.vertices()[2], [1.0, 1.0, 0.0]);
        assert_eq!(m.neighbors(1), &[0]);
    }

    #[test]
    fn binary_ply_is_unsupported() {
        let src = "ply\nformat binary_little_endian 1.0\nend_header\n";
        let err = load_mesh::<f64>(src.as_bytes(), MeshFormat::PlyAscii, &LoadOptions::default())
            .unwrap_err();
        assert!(matches!(err, MeshError::Unsupported(_)));
    }

    #[test]
    fn truncated_ply_is_parse_error() {
        let src = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nend_header\n0 0 0\n1 0 0\n";
        let err = load_mesh::<f64>(src.as_bytes(), MeshFormat::PlyAscii, &LoadOptions::default())
            .unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }));
    }
}
