//! Isosurface extraction on uniform grids.
//!
//! Cells are contoured by tracing the cut-edge cycles directly: cut points
//! live on grid edges (shared between cells), and on each cell face the cut
//! edges are paired using the bilinear asymptotic decider, so the pairing is
//! identical for the two cells sharing the face and the output is watertight
//! without a case table. Polygons are oriented along the field gradient and
//! fan-triangulated.

use crate::domains::AnalyticDomain;
use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use std::collections::HashMap;

/// Uniform sampling grid: `dims` counts cells per axis.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub origin: Point3<f64>,
    pub cell: f64,
    pub dims: [usize; 3],
}

impl GridSpec {
    pub fn node_counts(&self) -> [usize; 3] {
        [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1]
    }

    pub fn node_point(&self, ix: usize, iy: usize, iz: usize) -> Point3<f64> {
        Point3::new(
            self.origin.x + self.cell * ix as f64,
            self.origin.y + self.cell * iy as f64,
            self.origin.z + self.cell * iz as f64,
        )
    }

    pub fn node_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let [nx, ny, _] = self.node_counts();
        (iz * ny + iy) * nx + ix
    }

    /// Evaluate a field at all grid nodes, parallelized over z-slabs.
    pub fn sample<F: Fn(&Point3<f64>) -> f64 + Sync>(&self, f: &F) -> Vec<f64> {
        let [nx, ny, nz] = self.node_counts();
        let mut values = vec![0.0; nx * ny * nz];
        values
            .par_chunks_mut(nx * ny)
            .enumerate()
            .for_each(|(iz, slab)| {
                for iy in 0..ny {
                    for ix in 0..nx {
                        slab[iy * nx + ix] = f(&self.node_point(ix, iy, iz));
                    }
                }
            });
        values
    }
}

// cell corner offsets in (x, y, z)
const CORNER: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

// cell edges as corner pairs; axis is the direction of the edge
const EDGE: [([usize; 2], usize); 12] = [
    ([0, 1], 0),
    ([2, 3], 0),
    ([4, 5], 0),
    ([6, 7], 0),
    ([0, 2], 1),
    ([1, 3], 1),
    ([4, 6], 1),
    ([5, 7], 1),
    ([0, 4], 2),
    ([1, 5], 2),
    ([2, 6], 2),
    ([3, 7], 2),
];

// faces: (corner quad in cyclic order, the four cell-edge ids on the sides)
// sides listed in the same cyclic order as the corners
const FACE: [([usize; 4], [usize; 4]); 6] = [
    ([0, 1, 3, 2], [0, 5, 1, 4]),   // z = 0
    ([4, 5, 7, 6], [2, 7, 3, 6]),   // z = 1
    ([0, 1, 5, 4], [0, 9, 2, 8]),   // y = 0
    ([2, 3, 7, 6], [1, 11, 3, 10]), // y = 1
    ([0, 2, 6, 4], [4, 10, 6, 8]),  // x = 0
    ([1, 3, 7, 5], [5, 11, 7, 9]),  // x = 1
];

fn pair_face_edges(vals: [f64; 4], cuts: [bool; 4]) -> Vec<(usize, usize)> {
    let n = cuts.iter().filter(|&&c| c).count();
    match n {
        0 => Vec::new(),
        2 => {
            let ids: Vec<usize> = (0..4).filter(|&i| cuts[i]).collect();
            vec![(ids[0], ids[1])]
        }
        4 => {
            // ambiguous face: corners alternate in sign around the quad;
            // the bilinear saddle value decides which diagonal connects
            let (a, b, c, d) = (vals[0], vals[1], vals[2], vals[3]);
            let denom = a + c - b - d;
            let saddle = if denom.abs() > 1e-300 {
                (a * c - b * d) / denom
            } else {
                0.0
            };
            // sides: 0 between corners 0-1, 1 between 1-2, 2 between 2-3,
            // 3 between 3-0. If the saddle has the sign of corners 0 and 2,
            // that diagonal's regions connect and contours hug corners 1, 3.
            if saddle.signum() == a.signum() {
                vec![(0, 1), (2, 3)]
            } else {
                vec![(3, 0), (1, 2)]
            }
        }
        _ => Vec::new(), // cannot happen with nonzero corner values
    }
}

/// Extract the zero isosurface of nodal `values` on `grid`.
///
/// Returns raw (unsmoothed) vertices and triangles; vertex order and face
/// order are deterministic functions of the input.
pub fn isosurface(grid: &GridSpec, values: &[f64]) -> (Vec<Point3<f64>>, Vec<[usize; 3]>) {
    let [nx, ny, nz] = grid.node_counts();
    assert_eq!(values.len(), nx * ny * nz);
    let eps = 1e-12
        * values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
    let val = |ix: usize, iy: usize, iz: usize| -> f64 {
        let v = values[grid.node_index(ix, iy, iz)];
        // keep nodes off the surface so every cut is interior to an edge
        if v == 0.0 {
            eps
        } else {
            v
        }
    };

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut vertex_of_edge: HashMap<u64, usize> = HashMap::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    let edge_key = |ix: usize, iy: usize, iz: usize, axis: usize| -> u64 {
        (((iz * ny + iy) * nx + ix) * 3 + axis) as u64
    };

    for iz in 0..grid.dims[2] {
        for iy in 0..grid.dims[1] {
            for ix in 0..grid.dims[0] {
                let corner_val: Vec<f64> = CORNER
                    .iter()
                    .map(|c| val(ix + c[0], iy + c[1], iz + c[2]))
                    .collect();
                let inside_mask: u8 = (0..8)
                    .map(|i| ((corner_val[i] < 0.0) as u8) << i)
                    .fold(0, |a, b| a | b);
                if inside_mask == 0 || inside_mask == 0xff {
                    continue;
                }

                // cut points on this cell's edges (global vertex ids)
                let mut cell_vertex = [usize::MAX; 12];
                for (ei, (pair, axis)) in EDGE.iter().enumerate() {
                    let (va, vb) = (corner_val[pair[0]], corner_val[pair[1]]);
                    if (va < 0.0) == (vb < 0.0) {
                        continue;
                    }
                    let c = CORNER[pair[0]];
                    let key = edge_key(ix + c[0], iy + c[1], iz + c[2], *axis);
                    let id = *vertex_of_edge.entry(key).or_insert_with(|| {
                        // clamped interpolation keeps triangles non-degenerate
                        let t = (va / (va - vb)).clamp(0.05, 0.95);
                        let mut p = grid.node_point(ix + c[0], iy + c[1], iz + c[2]);
                        p[*axis] += t * grid.cell;
                        vertices.push(p);
                        vertices.len() - 1
                    });
                    cell_vertex[ei] = id;
                }

                // pair cut edges on each face; each cut edge gets exactly
                // two partners, giving disjoint cycles
                let mut partners: [[usize; 2]; 12] = [[usize::MAX; 2]; 12];
                let mut add_partner = |a: usize, b: usize| {
                    let slot = if partners[a][0] == usize::MAX { 0 } else { 1 };
                    partners[a][slot] = b;
                };
                for (quad, sides) in FACE.iter() {
                    let vals4 = [
                        corner_val[quad[0]],
                        corner_val[quad[1]],
                        corner_val[quad[2]],
                        corner_val[quad[3]],
                    ];
                    let cuts4 = [
                        cell_vertex[sides[0]] != usize::MAX,
                        cell_vertex[sides[1]] != usize::MAX,
                        cell_vertex[sides[2]] != usize::MAX,
                        cell_vertex[sides[3]] != usize::MAX,
                    ];
                    for (sa, sb) in pair_face_edges(vals4, cuts4) {
                        add_partner(sides[sa], sides[sb]);
                        add_partner(sides[sb], sides[sa]);
                    }
                }

                // walk cycles
                let mut used = [false; 12];
                for start in 0..12 {
                    if cell_vertex[start] == usize::MAX || used[start] {
                        continue;
                    }
                    let mut cycle = vec![start];
                    used[start] = true;
                    let mut prev = usize::MAX;
                    let mut cur = start;
                    loop {
                        let next = if partners[cur][0] != prev && partners[cur][0] != usize::MAX
                        {
                            partners[cur][0]
                        } else {
                            partners[cur][1]
                        };
                        if next == usize::MAX || next == start {
                            break;
                        }
                        used[next] = true;
                        cycle.push(next);
                        prev = cur;
                        cur = next;
                    }
                    if cycle.len() < 3 {
                        continue;
                    }

                    let pts: Vec<Point3<f64>> =
                        cycle.iter().map(|&e| vertices[cell_vertex[e]]).collect();
                    // Newell normal vs trilinear gradient orients the polygon
                    // with its normal toward increasing field values
                    let mut normal = Vector3::zeros();
                    for i in 0..pts.len() {
                        let a = pts[i];
                        let b = pts[(i + 1) % pts.len()];
                        normal += a.coords.cross(&b.coords);
                    }
                    let grad = trilinear_gradient(&corner_val);
                    let mut order: Vec<usize> = cycle.iter().map(|&e| cell_vertex[e]).collect();
                    if normal.dot(&grad) < 0.0 {
                        order.reverse();
                    }
                    for i in 1..order.len() - 1 {
                        faces.push([order[0], order[i], order[i + 1]]);
                    }
                }
            }
        }
    }

    (vertices, faces)
}

fn trilinear_gradient(c: &[f64]) -> Vector3<f64> {
    // average of the four edge differences along each axis
    Vector3::new(
        (c[1] - c[0]) + (c[3] - c[2]) + (c[5] - c[4]) + (c[7] - c[6]),
        (c[2] - c[0]) + (c[3] - c[1]) + (c[6] - c[4]) + (c[7] - c[5]),
        (c[4] - c[0]) + (c[5] - c[1]) + (c[6] - c[2]) + (c[7] - c[3]),
    )
}

/// Tangential Laplacian smoothing followed by projection onto the zero set.
pub fn smooth_and_project<P>(
    vertices: &mut [Point3<f64>],
    faces: &[[usize; 3]],
    iterations: usize,
    project: P,
) where
    P: Fn(&Point3<f64>) -> Point3<f64> + Sync,
{
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for f in faces {
        for k in 0..3 {
            adj[f[k]].push(f[(k + 1) % 3]);
            adj[f[k]].push(f[(k + 2) % 3]);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    for _ in 0..iterations {
        let moved: Vec<Point3<f64>> = (0..vertices.len())
            .into_par_iter()
            .map(|i| {
                if adj[i].is_empty() {
                    return vertices[i];
                }
                let mut c = Vector3::zeros();
                for &j in &adj[i] {
                    c += vertices[j].coords;
                }
                c /= adj[i].len() as f64;
                let target = Point3::from(vertices[i].coords + 0.5 * (c - vertices[i].coords));
                project(&target)
            })
            .collect();
        vertices.copy_from_slice(&moved);
    }
}

/// Mesh an analytic domain at the given subdivision level
/// (`2^resolution` grid cells per unit length).
pub fn generate(domain: &AnalyticDomain, resolution: u32) -> Result<TriangleMesh> {
    if resolution < 3 {
        return Err(Error::Config(format!(
            "resolution {resolution} below coarse floor 3"
        )));
    }
    generate_with_cell(domain, 0.5f64.powi(resolution as i32))
}

/// Mesh an analytic domain with an explicit grid cell size.
pub fn generate_with_cell(domain: &AnalyticDomain, cell: f64) -> Result<TriangleMesh> {
    let (lo, hi) = domain.bbox();
    let dims = [
        ((hi.x - lo.x) / cell).ceil() as usize,
        ((hi.y - lo.y) / cell).ceil() as usize,
        ((hi.z - lo.z) / cell).ceil() as usize,
    ];
    if dims.iter().any(|&d| d < 2) {
        return Err(Error::Mesher("grid too coarse for domain box".into()));
    }
    let grid = GridSpec {
        origin: lo,
        cell,
        dims,
    };
    let values = grid.sample(&|p| domain.value(p));
    let (mut vertices, faces) = isosurface(&grid, &values);
    if vertices.is_empty() {
        return Err(Error::Mesher("no zero crossing found in grid".into()));
    }
    let tol = 1e-8 * (hi - lo).norm();
    smooth_and_project(&mut vertices, &faces, 3, |p| domain.project(p, tol));
    let mesh = TriangleMesh::new(vertices, faces)?;
    mesh.ensure_valid()?;
    Ok(mesh)
}

/// Pick a cell size that yields roughly `target_panels` triangles.
pub fn cell_for_panels(domain: &AnalyticDomain, target_panels: usize) -> Result<f64> {
    // measure the area on a coarse mesh, then size cells from the
    // empirical two-triangles-per-surface-cell rate
    let (lo, hi) = domain.bbox();
    let coarse = (hi - lo).norm() / 40.0;
    let probe = generate_with_cell(domain, coarse)?;
    let area = probe.area();
    Ok((2.0 * area / target_panels as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_level4_euler_and_area() {
        let d = AnalyticDomain::Ball {
            center: [0.0; 3],
            radius: 1.0,
        };
        let m = generate(&d, 4).unwrap();
        let diag = m.validate();
        assert!(diag.pass, "{diag:?}");
        assert_eq!(diag.euler_characteristic, 2);
        assert_relative_eq!(diag.area, 4.0 * PI, max_relative = 5e-3);
        // vertices lie on the zero set
        for v in m.vertices.iter().step_by(17) {
            assert!(d.value(v).abs() < 1e-7);
        }
    }

    #[test]
    fn ellipsoid_level4_volume() {
        let d = AnalyticDomain::Ellipsoid {
            a: 2.0,
            b: 1.0,
            c: 1.0,
        };
        let m = generate(&d, 4).unwrap();
        assert!(m.validate().pass);
        assert_relative_eq!(
            m.signed_volume(),
            4.0 / 3.0 * PI * 2.0,
            max_relative = 1e-2
        );
    }

    #[test]
    fn dumbbell_level5_connected_genus0() {
        let d = AnalyticDomain::dumbbell(10.0);
        let m = generate(&d, 5).unwrap();
        let diag = m.validate();
        assert!(diag.pass, "{diag:?}");
        assert_eq!(diag.genus, 0);
        // min distance from the tube axis to the surface near x = 0:
        // bisect the level function along the axis normal (the oracle),
        // then check the mesh agrees
        let mut lo = 0.0;
        let mut hi = 0.5;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if d.value(&Point3::new(0.0, mid, 0.0)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mesh_dist = m.distance_to_surface(&Point3::origin());
        assert!(
            (mesh_dist - lo).abs() < 0.2 * 0.1,
            "axis distance {mesh_dist} vs oracle {lo}"
        );
    }

    #[test]
    fn generate_scaling_consistency() {
        // generate(ball(0, r)) = r * generate(ball(0, 1)) for equal
        // cell-per-radius resolution
        let unit = generate_with_cell(
            &AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            1.0 / 16.0,
        )
        .unwrap();
        let double = generate_with_cell(
            &AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: 2.0,
            },
            2.0 / 16.0,
        )
        .unwrap();
        assert_eq!(unit.vertices.len(), double.vertices.len());
        for (a, b) in unit.vertices.iter().zip(&double.vertices) {
            assert!((2.0 * a.coords - b.coords).norm() < 1e-6);
        }
    }

    #[test]
    fn coarse_resolution_rejected() {
        let d = AnalyticDomain::Ball {
            center: [0.0; 3],
            radius: 1.0,
        };
        assert!(generate(&d, 2).is_err());
    }
}
