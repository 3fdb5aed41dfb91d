//! Closed triangle meshes bounding smooth domains.

use crate::error::{Error, Result};
use nalgebra::{Point3, Vector3};
use serde::Serialize;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Relative floor below which a face counts as degenerate:
/// `area >= DEGENERATE_AREA_REL * (bbox diagonal)^2`.
pub const DEGENERATE_AREA_REL: f64 = 1e-12;

/// A closed, connected, outward-oriented triangulated surface.
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<[usize; 3]>,
    /// Per-vertex outward unit normals (area-weighted average of face normals).
    pub normals: Vec<Vector3<f64>>,
}

/// Diagnostics from [`TriangleMesh::validate`].
#[derive(Debug, Clone, Serialize)]
pub struct MeshDiagnostics {
    pub vertex_count: usize,
    pub face_count: usize,
    pub open_edges: usize,
    pub overshared_edges: usize,
    pub components: usize,
    pub signed_volume: f64,
    pub area: f64,
    pub min_face_area: f64,
    pub degenerate_faces: usize,
    pub euler_characteristic: i64,
    pub genus: i64,
    pub closed: bool,
    pub connected: bool,
    pub outward: bool,
    pub pass: bool,
}

impl TriangleMesh {
    /// Build a mesh from raw arrays, computing per-vertex normals.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::UnsupportedInput(format!(
                    "face {i} references vertex out of range"
                )));
            }
        }
        let mut mesh = TriangleMesh {
            vertices,
            faces,
            normals: Vec::new(),
        };
        mesh.recompute_normals();
        Ok(mesh)
    }

    pub fn recompute_normals(&mut self) {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let n = self.face_area_vector(f);
            for &v in f {
                normals[v] += n;
            }
        }
        for n in &mut normals {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.normals = normals;
    }

    fn face_area_vector(&self, f: &[usize; 3]) -> Vector3<f64> {
        let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
        0.5 * (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, i: usize) -> f64 {
        self.face_area_vector(&self.faces[i]).norm()
    }

    pub fn face_normal(&self, i: usize) -> Vector3<f64> {
        let v = self.face_area_vector(&self.faces[i]);
        let n = v.norm();
        if n > 0.0 {
            v / n
        } else {
            Vector3::zeros()
        }
    }

    pub fn face_centroid(&self, i: usize) -> Point3<f64> {
        let f = &self.faces[i];
        Point3::from(
            (self.vertices[f[0]].coords + self.vertices[f[1]].coords + self.vertices[f[2]].coords)
                / 3.0,
        )
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|i| self.face_area(i)).sum()
    }

    /// Signed enclosed volume via the divergence theorem; positive iff
    /// the winding is outward.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) =
                    (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
            })
            .sum()
    }

    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    /// Barycentric vertex area weights (one third of each incident face).
    pub fn vertex_areas(&self) -> Vec<f64> {
        let mut areas = vec![0.0; self.vertices.len()];
        for (i, f) in self.faces.iter().enumerate() {
            let a = self.face_area(i) / 3.0;
            for &v in f {
                areas[v] += a;
            }
        }
        areas
    }

    /// Vertex-to-vertex adjacency (sorted, deduplicated).
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    fn edge_census(&self) -> (usize, usize, usize) {
        let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += 1;
            }
        }
        let open = edges.values().filter(|&&c| c == 1).count();
        let over = edges.values().filter(|&&c| c > 2).count();
        (edges.len(), open, over)
    }

    fn face_components(&self) -> usize {
        // union-find over faces joined by shared edges
        let mut parent: Vec<usize> = (0..self.faces.len()).collect();
        fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut edge_face: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                if let Some(&other) = edge_face.get(&key) {
                    let (ra, rb) = (find(&mut parent, fi), find(&mut parent, other));
                    if ra != rb {
                        parent[ra] = rb;
                    }
                } else {
                    edge_face.insert(key, fi);
                }
            }
        }
        let mut roots: Vec<usize> = (0..self.faces.len())
            .map(|i| find(&mut parent, i))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Full diagnostics; `pass` is true iff all mesh invariants hold.
    pub fn validate(&self) -> MeshDiagnostics {
        let (edge_count, open, over) = self.edge_census();
        let components = if self.faces.is_empty() {
            0
        } else {
            self.face_components()
        };
        let volume = self.signed_volume();
        let floor = DEGENERATE_AREA_REL * self.bbox_diagonal().powi(2);
        let mut min_area = f64::INFINITY;
        let mut degenerate = 0;
        for i in 0..self.faces.len() {
            let a = self.face_area(i);
            min_area = min_area.min(a);
            if a < floor {
                degenerate += 1;
            }
        }
        let euler = self.vertices.len() as i64 - edge_count as i64 + self.faces.len() as i64;
        let closed = open == 0 && over == 0;
        let connected = components == 1;
        let outward = volume > 0.0;
        MeshDiagnostics {
            vertex_count: self.vertices.len(),
            face_count: self.faces.len(),
            open_edges: open,
            overshared_edges: over,
            components,
            signed_volume: volume,
            area: self.area(),
            min_face_area: min_area,
            degenerate_faces: degenerate,
            euler_characteristic: euler,
            genus: (2 - euler) / 2,
            closed,
            connected,
            outward,
            pass: closed && connected && outward && degenerate == 0,
        }
    }

    /// Error out unless every invariant holds.
    pub fn ensure_valid(&self) -> Result<()> {
        let d = self.validate();
        if !d.closed {
            return Err(Error::NotClosed {
                open_edges: d.open_edges,
                overshared_edges: d.overshared_edges,
            });
        }
        if !d.connected {
            return Err(Error::NotConnected {
                components: d.components,
            });
        }
        if !d.outward {
            return Err(Error::BadOrientation {
                volume: d.signed_volume,
            });
        }
        if d.degenerate_faces > 0 {
            let floor = DEGENERATE_AREA_REL * self.bbox_diagonal().powi(2);
            let first = (0..self.faces.len())
                .find(|&i| self.face_area(i) < floor)
                .unwrap_or(0);
            return Err(Error::DegenerateFaces {
                count: d.degenerate_faces,
                first,
                floor,
            });
        }
        Ok(())
    }

    /// Generalized winding number test: strictly inside iff the summed
    /// solid angle is close to 4 pi.
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        let mut total = 0.0;
        for f in &self.faces {
            let a = self.vertices[f[0]] - p;
            let b = self.vertices[f[1]] - p;
            let c = self.vertices[f[2]] - p;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total > 2.0 * std::f64::consts::PI
    }

    /// Distance from a point to the surface (exact point-triangle minimum).
    pub fn distance_to_surface(&self, p: &Point3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for f in &self.faces {
            let d = point_triangle_distance(
                p,
                &self.vertices[f[0]],
                &self.vertices[f[1]],
                &self.vertices[f[2]],
            );
            best = best.min(d);
        }
        best
    }

    /// Conformal inversion about an interior `center`:
    /// `x -> center + scale (x - center)/|x - center|^2`.
    ///
    /// Returns the boundary of the inverted domain. The map reverses the
    /// co-orientation twice (ambient reflection times inside/outside swap),
    /// so the winding is kept and the result is validated outward.
    pub fn invert(&self, center: &Point3<f64>, scale: f64) -> Result<TriangleMesh> {
        if scale <= 0.0 {
            return Err(Error::Config("inversion scale must be positive".into()));
        }
        let floor = 1e-3 * self.bbox_diagonal();
        let dist = self.distance_to_surface(center);
        if !self.contains(center) || dist < floor {
            return Err(Error::BadInversionCenter {
                min_dist: dist,
                floor,
            });
        }
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let d = v - center;
                center + scale * d / d.norm_squared()
            })
            .collect();
        let out = TriangleMesh::new(vertices, self.faces.clone())?;
        out.ensure_valid()?;
        Ok(out)
    }

    pub fn translated(&self, t: &Vector3<f64>) -> TriangleMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            *v += t;
        }
        m
    }

    pub fn scaled(&self, s: f64) -> TriangleMesh {
        let mut m = self.clone();
        for v in &mut m.vertices {
            v.coords *= s;
        }
        m
    }

    /// Write ASCII OFF.
    pub fn write_off<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "OFF")?;
        writeln!(w, "{} {} 0", self.vertices.len(), self.faces.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
        }
        Ok(())
    }

    pub fn save_off<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_off(std::io::BufWriter::new(file))
    }

    /// Read ASCII OFF or OBJ depending on the extension.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<TriangleMesh> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Self::read_off(reader),
            Some("obj") => Self::read_obj(reader),
            other => Err(Error::UnsupportedInput(format!(
                "unknown mesh extension {other:?}; expected .off or .obj"
            ))),
        }
    }

    pub fn read_off<R: BufRead>(reader: R) -> Result<TriangleMesh> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("");
            tokens.extend(body.split_whitespace().map(|s| s.to_string()));
        }
        let mut it = tokens.into_iter();
        let magic = it.next().unwrap_or_default();
        if magic != "OFF" {
            return Err(Error::UnsupportedInput("missing OFF header".into()));
        }
        let parse = |s: Option<String>, what: &str| -> Result<f64> {
            s.ok_or_else(|| Error::UnsupportedInput(format!("truncated OFF file at {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::UnsupportedInput(format!("bad {what}: {e}")))
        };
        let nv = parse(it.next(), "vertex count")? as usize;
        let nf = parse(it.next(), "face count")? as usize;
        let _ne = parse(it.next(), "edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let x = parse(it.next(), &format!("vertex {i}"))?;
            let y = parse(it.next(), &format!("vertex {i}"))?;
            let z = parse(it.next(), &format!("vertex {i}"))?;
            vertices.push(Point3::new(x, y, z));
        }
        let mut faces = Vec::with_capacity(nf);
        for i in 0..nf {
            let k = parse(it.next(), &format!("face {i} arity"))? as usize;
            if k != 3 {
                return Err(Error::UnsupportedInput(format!(
                    "face {i} has {k} vertices; triangles only"
                )));
            }
            let a = parse(it.next(), &format!("face {i}"))? as usize;
            let b = parse(it.next(), &format!("face {i}"))? as usize;
            let c = parse(it.next(), &format!("face {i}"))? as usize;
            faces.push([a, b, c]);
        }
        TriangleMesh::new(vertices, faces)
    }

    pub fn read_obj<R: BufRead>(reader: R) -> Result<TriangleMesh> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let mut coord = [0.0; 3];
                    for c in &mut coord {
                        *c = parts
                            .next()
                            .ok_or_else(|| {
                                Error::UnsupportedInput("short vertex line in OBJ".into())
                            })?
                            .parse::<f64>()
                            .map_err(|e| Error::UnsupportedInput(format!("bad vertex: {e}")))?;
                    }
                    vertices.push(Point3::new(coord[0], coord[1], coord[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = parts
                        .map(|tok| {
                            tok.split('/')
                                .next()
                                .unwrap_or("")
                                .parse::<usize>()
                                .map_err(|e| Error::UnsupportedInput(format!("bad face: {e}")))
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::UnsupportedInput(format!(
                            "face with {} vertices; triangles only",
                            idx.len()
                        )));
                    }
                    faces.push([idx[0] - 1, idx[1] - 1, idx[2] - 1]);
                }
                _ => {}
            }
        }
        TriangleMesh::new(vertices, faces)
    }
}

/// Exact distance from a point to a triangle.
pub fn point_triangle_distance(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (ap - t * ab).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (ap - t * ac).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - t * (c - b)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (ap - v * ab - w * ac).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Octahedron with outward winding.
    pub(crate) fn octahedron() -> TriangleMesh {
        let vertices = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(0.0, 0.0, -1.0),
        ];
        let faces = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        TriangleMesh::new(vertices, faces).unwrap()
    }

    #[test]
    fn octahedron_is_valid() {
        let m = octahedron();
        let d = m.validate();
        assert!(d.pass, "{d:?}");
        assert_eq!(d.euler_characteristic, 2);
        assert_eq!(d.genus, 0);
        assert_relative_eq!(d.signed_volume, 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_face_opens_edges() {
        let mut m = octahedron();
        m.faces.pop();
        let d = m.validate();
        assert!(!d.pass);
        assert_eq!(d.open_edges, 3);
    }

    #[test]
    fn two_components_detected() {
        let m = octahedron();
        let far = m.translated(&Vector3::new(10.0, 0.0, 0.0));
        let offset = m.vertices.len();
        let mut vertices = m.vertices.clone();
        vertices.extend(far.vertices.iter().cloned());
        let mut faces = m.faces.clone();
        faces.extend(far.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        let combined = TriangleMesh::new(vertices, faces).unwrap();
        let d = combined.validate();
        assert_eq!(d.components, 2);
        assert!(!d.pass);
    }

    #[test]
    fn inverted_winding_fails_orientation() {
        let mut m = octahedron();
        for f in &mut m.faces {
            f.swap(1, 2);
        }
        let d = m.validate();
        assert!(!d.outward);
    }

    #[test]
    fn contains_and_distance() {
        let m = octahedron();
        assert!(m.contains(&Point3::new(0.1, 0.1, 0.1)));
        assert!(!m.contains(&Point3::new(1.0, 1.0, 1.0)));
        // distance from origin to the plane x+y+z=1 is 1/sqrt(3)
        assert_relative_eq!(
            m.distance_to_surface(&Point3::origin()),
            1.0 / 3.0f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn off_roundtrip() {
        let m = octahedron();
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let m2 = TriangleMesh::read_off(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(m.faces, m2.faces);
        for (a, b) in m.vertices.iter().zip(&m2.vertices) {
            assert_relative_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn obj_parsing() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 3 2\nf 1 2 4\nf 2 3 4\nf 1 4 3\n";
        let m = TriangleMesh::read_obj(std::io::Cursor::new(obj)).unwrap();
        assert_eq!(m.faces.len(), 4);
        assert!(m.validate().closed);
    }

    #[test]
    fn inversion_requires_interior_center() {
        let m = octahedron();
        assert!(m.invert(&Point3::new(5.0, 0.0, 0.0), 1.0).is_err());
    }
}
