//! Medial-axis quantities, the distance-gradient flow, and ball certificates.
//!
//! The boundary is represented by a dense `h`-covering point sample with
//! outward normals. For an interior point `x`, `R` is the distance to the
//! sample, `Gamma~` the samples within `(1+lambda) R`, `F` and `Theta` the
//! radius and center of their smallest enclosing ball, and
//! `grad = (x - Theta)/R`; `|grad|^2 = 1 - F^2/R^2` holds up to the
//! tolerance band. The flow is explicit Euler on `grad` (the field is
//! discontinuous, so higher order buys nothing).

use crate::domains::AnalyticDomain;
use crate::error::{Error, Result};
use crate::marching::generate_with_cell;
use crate::mesh::TriangleMesh;
use crate::seb::smallest_enclosing_ball;
use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

// ---------------------------------------------------------------------------
// geodesic direction grids

/// Unit directions from an icosphere at the given subdivision level
/// (level 4 gives the 2562-point grid used for sphere neighborhood checks).
pub fn geodesic_directions(level: u32) -> Vec<Vector3<f64>> {
    let (verts, _) = geodesic_sphere(level);
    verts
}

/// Icosphere vertices and faces at a subdivision level.
pub fn geodesic_sphere(level: u32) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = vec![
        Vector3::new(-1.0, t, 0.0),
        Vector3::new(1.0, t, 0.0),
        Vector3::new(-1.0, -t, 0.0),
        Vector3::new(1.0, -t, 0.0),
        Vector3::new(0.0, -1.0, t),
        Vector3::new(0.0, 1.0, t),
        Vector3::new(0.0, -1.0, -t),
        Vector3::new(0.0, 1.0, -t),
        Vector3::new(t, 0.0, -1.0),
        Vector3::new(t, 0.0, 1.0),
        Vector3::new(-t, 0.0, -1.0),
        Vector3::new(-t, 0.0, 1.0),
    ]
    .into_iter()
    .map(|v| v.normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    verts.push((verts[a] + verts[b]).normalize());
                    verts.len() - 1
                });
            }
            next_faces.push([f[0], mid[0], mid[2]]);
            next_faces.push([f[1], mid[1], mid[0]]);
            next_faces.push([f[2], mid[2], mid[1]]);
            next_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = next_faces;
    }
    (verts, faces)
}

// ---------------------------------------------------------------------------
// spatial index

struct SpatialGrid {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl SpatialGrid {
    fn build(points: &[Point3<f64>], cell: f64) -> SpatialGrid {
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(Self::key_of(p, cell))
                .or_default()
                .push(i as u32);
        }
        SpatialGrid { cell, buckets }
    }

    fn key_of(p: &Point3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Index and squared distance of the nearest point.
    fn nearest(&self, points: &[Point3<f64>], q: &Point3<f64>) -> (u32, f64) {
        let center = Self::key_of(q, self.cell);
        let mut best = (u32::MAX, f64::INFINITY);
        let mut ring = 0i64;
        loop {
            let mut any = false;
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let key = (center.0 + dx, center.1 + dy, center.2 + dz);
                        if let Some(ids) = self.buckets.get(&key) {
                            any = true;
                            for &i in ids {
                                let d2 = (points[i as usize] - q).norm_squared();
                                if d2 < best.1 || (d2 == best.1 && i < best.0) {
                                    best = (i, d2);
                                }
                            }
                        }
                    }
                }
            }
            // once a candidate exists, one extra ring guarantees correctness
            if best.0 != u32::MAX {
                let safe = (best.1.sqrt() / self.cell).ceil() as i64 + 1;
                if ring >= safe {
                    return best;
                }
            }
            if !any && ring > 0 && best.0 == u32::MAX && ring > 4096 {
                return best;
            }
            ring += 1;
        }
    }

    fn within_radius(&self, points: &[Point3<f64>], q: &Point3<f64>, r: f64) -> Vec<u32> {
        let r2 = r * r;
        let lo = Self::key_of(&Point3::new(q.x - r, q.y - r, q.z - r), self.cell);
        let hi = Self::key_of(&Point3::new(q.x + r, q.y + r, q.z + r), self.cell);
        let mut out = Vec::new();
        for kx in lo.0..=hi.0 {
            for ky in lo.1..=hi.1 {
                for kz in lo.2..=hi.2 {
                    if let Some(ids) = self.buckets.get(&(kx, ky, kz)) {
                        for &i in ids {
                            if (points[i as usize] - q).norm_squared() <= r2 {
                                out.push(i);
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

// ---------------------------------------------------------------------------
// boundary sampling

/// Dense `h`-covering sample of the boundary with outward normals.
pub struct BoundarySampling {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub h: f64,
    grid: SpatialGrid,
    bbox: (Point3<f64>, Point3<f64>),
}

impl BoundarySampling {
    /// Sample the faces of a mesh at spacing `h`.
    pub fn from_mesh(mesh: &TriangleMesh, h: f64) -> Result<BoundarySampling> {
        mesh.ensure_valid()?;
        let mut points = Vec::new();
        let mut normals = Vec::new();
        for (fi, f) in mesh.faces.iter().enumerate() {
            let (a, b, c) = (
                mesh.vertices[f[0]].coords,
                mesh.vertices[f[1]].coords,
                mesh.vertices[f[2]].coords,
            );
            let n = mesh.face_normal(fi);
            let max_edge = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let parts = ((max_edge / (0.8 * h)).ceil() as usize).max(1);
            sample_face_lattice(&a, &b, &c, parts, |p| {
                points.push(Point3::from(p));
                normals.push(n);
            });
        }
        Ok(Self::assemble(points, normals, h))
    }

    /// Sample an analytic boundary at spacing `h` (meshed coarsely, then
    /// every sample is projected back onto the zero set).
    pub fn from_analytic(domain: &AnalyticDomain, h: f64) -> Result<BoundarySampling> {
        let (lo, hi) = domain.bbox();
        let diag = (hi - lo).norm();
        let mesh = generate_with_cell(domain, (2.0 * h).min(diag / 48.0))?;
        let mut points = Vec::new();
        let mut normals = Vec::new();
        let tol = 1e-10 * diag;
        for (fi, f) in mesh.faces.iter().enumerate() {
            let (a, b, c) = (
                mesh.vertices[f[0]].coords,
                mesh.vertices[f[1]].coords,
                mesh.vertices[f[2]].coords,
            );
            let max_edge = (b - a).norm().max((c - b).norm()).max((a - c).norm());
            let parts = ((max_edge / (0.8 * h)).ceil() as usize).max(1);
            let _ = fi;
            sample_face_lattice(&a, &b, &c, parts, |p| {
                let q = domain.project(&Point3::from(p), tol);
                let g = domain.gradient(&q);
                let gn = g.norm();
                if gn > 1e-12 {
                    points.push(q);
                    normals.push(g / gn);
                }
            });
        }
        Ok(Self::assemble(points, normals, h))
    }

    fn assemble(points: Vec<Point3<f64>>, normals: Vec<Vector3<f64>>, h: f64) -> BoundarySampling {
        let grid = SpatialGrid::build(&points, 2.0 * h);
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        BoundarySampling {
            points,
            normals,
            h,
            grid,
            bbox: (lo, hi),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        self.bbox
    }

    pub fn bbox_diagonal(&self) -> f64 {
        (self.bbox.1 - self.bbox.0).norm()
    }

    /// Distance to the nearest boundary sample.
    pub fn distance(&self, q: &Point3<f64>) -> f64 {
        self.grid.nearest(&self.points, q).1.sqrt()
    }

    /// Signed test against the nearest sample's outward normal.
    pub fn inside(&self, q: &Point3<f64>) -> bool {
        let (i, _) = self.grid.nearest(&self.points, q);
        if i == u32::MAX {
            return false;
        }
        (q - self.points[i as usize]).dot(&self.normals[i as usize]) < 0.0
    }

    fn gamma_band(&self, q: &Point3<f64>, radius: f64) -> Vec<u32> {
        self.grid.within_radius(&self.points, q, radius)
    }
}

fn sample_face_lattice<F: FnMut(Vector3<f64>)>(
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
    parts: usize,
    mut emit: F,
) {
    let n = parts as f64;
    for i in 0..parts {
        for j in 0..(parts - i) {
            let (fi, fj) = (i as f64, j as f64);
            // centroid of the upward sub-triangle
            let (u, v) = ((3.0 * fi + 1.0) / (3.0 * n), (3.0 * fj + 1.0) / (3.0 * n));
            emit(a + u * (b - a) + v * (c - a));
            if j + i + 1 < parts {
                // centroid of the downward sub-triangle
                let (u, v) = ((3.0 * fi + 2.0) / (3.0 * n), (3.0 * fj + 2.0) / (3.0 * n));
                emit(a + u * (b - a) + v * (c - a));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// medial data

/// Medial quantities at an interior point.
#[derive(Debug, Clone, Serialize)]
pub struct MedialPoint {
    pub x: [f64; 3],
    /// Distance to the boundary sample.
    pub r: f64,
    /// Number of samples in the `(1+lambda) R` band.
    pub gamma_count: usize,
    /// Radius of the smallest ball enclosing the band.
    pub f: f64,
    /// Center of that ball.
    pub theta: [f64; 3],
    /// `(x - Theta)/R`.
    pub grad: [f64; 3],
    pub grad_norm_sq: f64,
    /// Largest angle `yxz` over near-closest samples `y, z`.
    pub separation_angle: f64,
}

/// Compute medial data at `x`; `lambda` is the closest-sample tolerance band.
pub fn medial_data(
    x: &Point3<f64>,
    sampling: &BoundarySampling,
    lambda: f64,
) -> Result<MedialPoint> {
    if !(lambda > 0.0 && lambda <= 0.1) {
        return Err(Error::Config(format!("lambda {lambda} outside (0, 0.1]")));
    }
    if !sampling.inside(x) {
        return Err(Error::OutsideDomain {
            x: x.x,
            y: x.y,
            z: x.z,
        });
    }
    let r = sampling.distance(x);
    if r < sampling.h {
        return Err(Error::TooNearBoundary {
            dist: r,
            h: sampling.h,
        });
    }
    let gamma = sampling.gamma_band(x, (1.0 + lambda) * r);
    let pts: Vec<Point3<f64>> = gamma
        .iter()
        .map(|&i| sampling.points[i as usize])
        .collect();
    let ball = smallest_enclosing_ball(&pts);
    let grad = (x - ball.center) / r;
    let angle = separation_angle(x, &pts);
    Ok(MedialPoint {
        x: [x.x, x.y, x.z],
        r,
        gamma_count: pts.len(),
        f: ball.radius,
        theta: [ball.center.x, ball.center.y, ball.center.z],
        grad: [grad.x, grad.y, grad.z],
        grad_norm_sq: grad.norm_squared(),
        separation_angle: angle,
    })
}

/// Gradient-only medial evaluation used inside flows (skips the angle).
fn medial_grad(x: &Point3<f64>, sampling: &BoundarySampling, lambda: f64) -> Option<(f64, Vector3<f64>)> {
    if !sampling.inside(x) {
        return None;
    }
    let r = sampling.distance(x);
    if r <= 0.0 {
        return None;
    }
    let gamma = sampling.gamma_band(x, (1.0 + lambda) * r);
    let pts: Vec<Point3<f64>> = gamma
        .iter()
        .map(|&i| sampling.points[i as usize])
        .collect();
    let ball = smallest_enclosing_ball(&pts);
    Some((r, (x - ball.center) / r))
}

/// Max pairwise angle of the directions from `x` to the given samples.
/// Large sets are strided down; the extremes along fixed directions are
/// kept so antipodal pairs survive the subsampling.
fn separation_angle(x: &Point3<f64>, pts: &[Point3<f64>]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut dirs: Vec<Vector3<f64>> = Vec::new();
    let cap = 1400;
    if pts.len() > cap {
        let stride = pts.len().div_ceil(cap);
        for p in pts.iter().step_by(stride) {
            dirs.push((p - x).normalize());
        }
        for probe in geodesic_directions(1) {
            let best = pts
                .iter()
                .map(|p| (p - x).normalize())
                .max_by(|a, b| a.dot(&probe).partial_cmp(&b.dot(&probe)).unwrap())
                .unwrap();
            dirs.push(best);
        }
    } else {
        dirs = pts.iter().map(|p| (p - x).normalize()).collect();
    }
    let mut min_dot = 1.0f64;
    for i in 0..dirs.len() {
        for j in (i + 1)..dirs.len() {
            min_dot = min_dot.min(dirs[i].dot(&dirs[j]));
        }
    }
    min_dot.clamp(-1.0, 1.0).acos()
}

// ---------------------------------------------------------------------------
// flow

/// Explicit-Euler trajectory of the distance-gradient flow.
#[derive(Debug, Clone, Serialize)]
pub struct FlowTrajectory {
    pub points: Vec<[f64; 3]>,
    pub r: Vec<f64>,
    pub grad_sq: Vec<f64>,
    pub step: f64,
    /// Polyline length, `sum step |grad|`.
    pub path_length: f64,
    /// `|R(end) - R(start) - sum step |grad|^2|`.
    pub r_identity_residual: f64,
}

impl FlowTrajectory {
    pub fn end(&self) -> Point3<f64> {
        let p = *self.points.last().unwrap();
        Point3::new(p[0], p[1], p[2])
    }
}

/// Flow `x0` for `duration` with step size `step <= h`.
pub fn flow(
    x0: &Point3<f64>,
    sampling: &BoundarySampling,
    duration: f64,
    step: f64,
    lambda: f64,
) -> Result<FlowTrajectory> {
    if step > sampling.h * (1.0 + 1e-9) {
        return Err(Error::Config(format!(
            "flow step {step} exceeds sampling h {}",
            sampling.h
        )));
    }
    if !duration.is_finite() {
        return Err(Error::Config("flow duration must be finite".into()));
    }
    let mut x = *x0;
    let mut points = vec![[x.x, x.y, x.z]];
    let mut rs = Vec::new();
    let mut gs = Vec::new();
    let mut integral = 0.0;
    let mut length = 0.0;
    let steps = (duration / step).ceil() as usize;
    for _ in 0..steps {
        let (r, grad) = medial_grad(&x, sampling, lambda).ok_or(Error::OutsideDomain {
            x: x.x,
            y: x.y,
            z: x.z,
        })?;
        rs.push(r);
        gs.push(grad.norm_squared());
        // fixed point: nothing moves
        if grad.norm_squared() < 1e-10 {
            break;
        }
        // shrink the step if the discretized move would exit the domain
        let mut dt = step;
        let mut moved = false;
        while dt >= sampling.h / 64.0 {
            let next = x + dt * grad;
            if sampling.inside(&next) && sampling.distance(&next) > 0.0 {
                integral += dt * grad.norm_squared();
                length += dt * grad.norm();
                x = next;
                points.push([x.x, x.y, x.z]);
                moved = true;
                break;
            }
            dt *= 0.5;
        }
        if !moved {
            return Err(Error::FlowExited {
                x: x.x,
                y: x.y,
                z: x.z,
            });
        }
    }
    // closing R sample at the endpoint
    let r_end = sampling.distance(&x);
    rs.push(r_end);
    let residual = (r_end - rs[0] - integral).abs();
    Ok(FlowTrajectory {
        points,
        r: rs,
        grad_sq: gs,
        step,
        path_length: length,
        r_identity_residual: residual,
    })
}

// ---------------------------------------------------------------------------
// extremal balls

/// An inscribed ball with two boundary contacts at a separation angle.
#[derive(Debug, Clone, Serialize)]
pub struct ABall {
    pub center: [f64; 3],
    pub radius: f64,
    pub angle: f64,
}

fn interior_grid(sampling: &BoundarySampling, per_axis: usize) -> Vec<Point3<f64>> {
    let (lo, hi) = sampling.bbox();
    let mut out = Vec::new();
    for ix in 0..per_axis {
        for iy in 0..per_axis {
            for iz in 0..per_axis {
                let frac = |i: usize| (i as f64 + 0.5) / per_axis as f64;
                let p = Point3::new(
                    lo.x + frac(ix) * (hi.x - lo.x),
                    lo.y + frac(iy) * (hi.y - lo.y),
                    lo.z + frac(iz) * (hi.z - lo.z),
                );
                if sampling.inside(&p) && sampling.distance(&p) > 2.0 * sampling.h {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Largest inscribed ball: flow seeded from a coarse interior grid, then
/// pattern refinement of the best endpoint. Also checks the hemisphere
/// property: every closed hemisphere of the sphere holds a near-contact
/// sample, at sampling resolution.
pub fn find_max_ball(sampling: &BoundarySampling) -> Result<(Point3<f64>, f64, bool)> {
    let lambda = 0.01;
    let seeds = interior_grid(sampling, 5);
    if seeds.is_empty() {
        return Err(Error::Config("no interior seed points found".into()));
    }
    let diag = sampling.bbox_diagonal();
    let endpoints: Vec<Point3<f64>> = seeds
        .par_iter()
        .filter_map(|s| {
            flow(s, sampling, 0.6 * diag, sampling.h, lambda)
                .ok()
                .map(|t| t.end())
        })
        .collect();
    let mut best = Point3::origin();
    let mut best_r = f64::NEG_INFINITY;
    for p in endpoints.iter().chain(seeds.iter()) {
        let r = sampling.distance(p);
        if r > best_r {
            best_r = r;
            best = *p;
        }
    }
    let (center, radius) = pattern_search(sampling, &best, |s, p| s.distance(p), true);
    // hemisphere property of the contact set
    let contacts = sampling.gamma_band(&center, radius * (1.0 + 2.0 * lambda) + sampling.h);
    let dirs: Vec<Vector3<f64>> = contacts
        .iter()
        .map(|&i| (sampling.points[i as usize] - center).normalize())
        .collect();
    let tol = -(2.0 * sampling.h / radius + 0.02);
    let hemisphere_ok = geodesic_directions(4)
        .iter()
        .all(|w| dirs.iter().any(|d| d.dot(w) >= tol));
    Ok((center, radius, hemisphere_ok))
}

fn pattern_search<F>(
    sampling: &BoundarySampling,
    start: &Point3<f64>,
    score: F,
    maximize: bool,
) -> (Point3<f64>, f64)
where
    F: Fn(&BoundarySampling, &Point3<f64>) -> f64,
{
    let mut x = *start;
    let mut val = score(sampling, &x);
    let mut step = 4.0 * sampling.h;
    let dirs = [
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    while step > sampling.h / 16.0 {
        let mut improved = false;
        for d in &dirs {
            let cand = x + step * d;
            if !sampling.inside(&cand) {
                continue;
            }
            let v = score(sampling, &cand);
            if (maximize && v > val) || (!maximize && v < val) {
                x = cand;
                val = v;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, val)
}

/// Result of the minimal-angle-ball search.
#[derive(Debug, Clone, Serialize)]
pub struct MinABall {
    pub best: ABall,
    /// All distinct candidate balls discovered during the search.
    pub discovered: Vec<ABall>,
}

/// Smallest inscribed ball whose contact set spans an angle of at least
/// `theta` (default pi/4). Candidates come from flow-visited points, a
/// coarse interior grid, and low-`|grad|` screening; the best one is then
/// refined by pattern descent under the angle constraint.
pub fn find_min_a_ball(
    sampling: &BoundarySampling,
    theta: f64,
) -> Result<MinABall> {
    if !(theta > 0.0 && theta < std::f64::consts::PI) {
        return Err(Error::Config(format!("theta {theta} outside (0, pi)")));
    }
    let lambda = 0.01;
    let seeds = interior_grid(sampling, 6);
    if seeds.is_empty() {
        return Err(Error::Config("no interior seed points found".into()));
    }
    let diag = sampling.bbox_diagonal();

    // candidate points: seeds plus every fourth flow-visited point
    let mut candidates: Vec<Point3<f64>> = seeds.clone();
    let visited: Vec<Vec<Point3<f64>>> = seeds
        .par_iter()
        .filter_map(|s| {
            flow(s, sampling, 0.6 * diag, sampling.h, lambda).ok().map(|t| {
                t.points
                    .iter()
                    .step_by(4)
                    .map(|p| Point3::new(p[0], p[1], p[2]))
                    .collect()
            })
        })
        .collect();
    for v in visited {
        candidates.extend(v);
    }

    // screen: keep candidates whose angle clears theta, or whose gradient
    // is small enough that the angle bound applies
    let screen = (theta / 2.0).cos().powi(2);
    let evaluated: Vec<Option<MedialPoint>> = candidates
        .par_iter()
        .map(|c| medial_data(c, sampling, lambda).ok())
        .collect();
    let mut discovered: Vec<ABall> = Vec::new();
    let mut best_r_any = f64::INFINITY;
    for md in evaluated.into_iter().flatten() {
        best_r_any = best_r_any.min(md.r);
        if md.separation_angle >= theta || md.grad_norm_sq <= screen {
            if md.separation_angle >= theta {
                discovered.push(ABall {
                    center: md.x,
                    radius: md.r,
                    angle: md.separation_angle,
                });
            }
        }
    }
    if discovered.is_empty() {
        return Err(Error::NoAngleCandidate {
            theta,
            best_r: best_r_any,
        });
    }

    // deterministic dedup: sort by radius, keep balls 3h apart
    discovered.sort_by(|a, b| {
        a.radius
            .partial_cmp(&b.radius)
            .unwrap()
            .then(a.center[0].partial_cmp(&b.center[0]).unwrap())
    });
    let mut kept: Vec<ABall> = Vec::new();
    for b in discovered {
        let p = Point3::new(b.center[0], b.center[1], b.center[2]);
        if kept.iter().all(|k| {
            (Point3::new(k.center[0], k.center[1], k.center[2]) - p).norm() > 3.0 * sampling.h
        }) {
            kept.push(b);
        }
    }

    // descend on the smallest candidate, keeping the angle constraint
    let b0 = kept[0].clone();
    let start = Point3::new(b0.center[0], b0.center[1], b0.center[2]);
    let constrained = |s: &BoundarySampling, p: &Point3<f64>| -> f64 {
        match medial_data(p, s, lambda) {
            Ok(md) if md.separation_angle >= theta => md.r,
            _ => f64::INFINITY,
        }
    };
    let (center, radius) = pattern_search(sampling, &start, constrained, false);
    let best_md = medial_data(&center, sampling, lambda)?;
    let best = if radius.is_finite() && best_md.separation_angle >= theta {
        ABall {
            center: [center.x, center.y, center.z],
            radius,
            angle: best_md.separation_angle,
        }
    } else {
        b0
    };
    Ok(MinABall {
        best,
        discovered: kept,
    })
}

// ---------------------------------------------------------------------------
// certificates

/// Ball-sandwich certificate around an inscribed ball.
#[derive(Debug, Clone, Serialize)]
pub struct BallCertificate {
    pub ball: ABall,
    /// Smallest eps with all boundary samples inside `B(p, r(1+eps))`.
    pub sandwich_epsilon: f64,
    /// Whether the sphere lies within `eps_check * r` of the boundary.
    pub neighborhood_ok: bool,
    /// Tolerance used for the neighborhood and witness checks.
    pub eps_check: f64,
    /// Discovered angle-balls violating the neighborhood property.
    pub witnesses: Vec<ABall>,
}

/// Build the sandwich certificate for `ball`, checking the neighborhood
/// property at `eps_check` for the ball and for every discovered angle-ball.
pub fn sandwich(
    sampling: &BoundarySampling,
    ball: &ABall,
    discovered: &[ABall],
    eps_check: f64,
) -> Result<BallCertificate> {
    let p = Point3::new(ball.center[0], ball.center[1], ball.center[2]);
    let r = ball.radius;
    let clearance = sampling.distance(&p);
    if clearance < r - 2.0 * sampling.h {
        return Err(Error::Config(format!(
            "ball of radius {r} is not inside the domain (clearance {clearance})"
        )));
    }
    let mut eps = 0.0f64;
    for y in &sampling.points {
        eps = eps.max((y - p).norm() / r - 1.0);
    }
    let sphere_ok = |center: &Point3<f64>, radius: f64, dirs: &[Vector3<f64>]| -> bool {
        dirs.iter().all(|w| {
            let q = center + radius * w;
            sampling.distance(&q) <= eps_check * radius + sampling.h
        })
    };
    let dirs_fine = geodesic_directions(4);
    let neighborhood_ok = sphere_ok(&p, r, &dirs_fine);
    let dirs_coarse = geodesic_directions(3);
    let witnesses: Vec<ABall> = discovered
        .iter()
        .filter(|b| {
            let c = Point3::new(b.center[0], b.center[1], b.center[2]);
            !sphere_ok(&c, b.radius, &dirs_coarse)
        })
        .cloned()
        .collect();
    Ok(BallCertificate {
        ball: ball.clone(),
        sandwich_epsilon: eps,
        neighborhood_ok,
        eps_check,
        witnesses,
    })
}

/// Gromov-Hausdorff style bound from flow path lengths.
#[derive(Debug, Clone, Serialize)]
pub struct GhBound {
    /// `2 x` the longest flow path into the ball; `None` when some flow
    /// failed to enter within budget (the infinity flag).
    pub bound: Option<f64>,
    pub max_path_length: f64,
    pub reached: usize,
    pub total: usize,
}

/// Flow every sample of `Omega \ B` into `B` and bound the GH distance by
/// twice the longest path found.
pub fn gh_bound(sampling: &BoundarySampling, ball: &ABall) -> Result<GhBound> {
    let lambda = 0.01;
    let p = Point3::new(ball.center[0], ball.center[1], ball.center[2]);
    let r = ball.radius;
    let diag = sampling.bbox_diagonal();

    let mut starts: Vec<Point3<f64>> = Vec::new();
    let stride = (sampling.len() / 400).max(1);
    for i in (0..sampling.len()).step_by(stride) {
        let q = sampling.points[i] - 1.5 * sampling.h * sampling.normals[i];
        if sampling.inside(&q) && (q - p).norm() > r {
            starts.push(q);
        }
    }
    for q in interior_grid(sampling, 7) {
        if (q - p).norm() > r {
            starts.push(q);
        }
    }
    let total = starts.len();
    if total == 0 {
        return Ok(GhBound {
            bound: Some(0.0),
            max_path_length: 0.0,
            reached: total,
            total,
        });
    }

    let budget = 3.0 * diag;
    let results: Vec<Option<f64>> = starts
        .par_iter()
        .map(|s| {
            let mut x = *s;
            let mut length = 0.0;
            let steps = (budget / sampling.h).ceil() as usize;
            for _ in 0..steps {
                if (x - p).norm() <= r {
                    return Some(length);
                }
                match medial_grad(&x, sampling, lambda) {
                    Some((_, grad)) => {
                        if grad.norm_squared() < 1e-10 {
                            return None; // stalled at a fixed point outside B
                        }
                        let next = x + sampling.h * grad;
                        if !sampling.inside(&next) {
                            return None;
                        }
                        length += sampling.h * grad.norm();
                        x = next;
                    }
                    None => return None,
                }
            }
            None
        })
        .collect();

    let mut max_len = 0.0f64;
    let mut reached = 0;
    let mut all = true;
    for r in &results {
        match r {
            Some(l) => {
                reached += 1;
                max_len = max_len.max(*l);
            }
            None => all = false,
        }
    }
    Ok(GhBound {
        bound: if all { Some(2.0 * max_len) } else { None },
        max_path_length: max_len,
        reached,
        total,
    })
}

/// Flow-retraction evidence: all interior samples reach the ball after
/// flowing for `time * radius`.
#[derive(Debug, Clone, Serialize)]
pub struct RetractionReport {
    pub pass: bool,
    pub failed: usize,
    pub total: usize,
    pub max_final_clearance: f64,
}

pub fn retraction_check(
    sampling: &BoundarySampling,
    ball: &ABall,
    time: f64,
) -> Result<RetractionReport> {
    let lambda = 0.01;
    let p = Point3::new(ball.center[0], ball.center[1], ball.center[2]);
    let r = ball.radius;
    let samples = interior_grid(sampling, 8);
    let duration = time * r;
    let results: Vec<(bool, f64)> = samples
        .par_iter()
        .map(|s| {
            let end = match flow(s, sampling, duration, sampling.h.min(duration), lambda) {
                Ok(t) => t.end(),
                Err(_) => *s,
            };
            let d = (end - p).norm();
            (d < r, d - r)
        })
        .collect();
    let failed = results.iter().filter(|(ok, _)| !ok).count();
    let max_clearance = results.iter().fold(0.0f64, |m, (_, d)| m.max(*d));
    Ok(RetractionReport {
        pass: failed == 0,
        failed,
        total: results.len(),
        max_final_clearance: max_clearance,
    })
}

/// Diagnostic for the neck-connectivity radius between two interior points:
/// the largest clearance `r` at which they connect through
/// `{x : R(x) >= r}`, by bisection over a flood fill on an interior lattice.
pub fn connectivity_radius(
    sampling: &BoundarySampling,
    a: &Point3<f64>,
    b: &Point3<f64>,
    per_axis: usize,
) -> Result<f64> {
    let (lo, hi) = sampling.bbox();
    let n = per_axis.max(16);
    let cell = Vector3::new(
        (hi.x - lo.x) / n as f64,
        (hi.y - lo.y) / n as f64,
        (hi.z - lo.z) / n as f64,
    );
    let idx = |p: &Point3<f64>| -> (usize, usize, usize) {
        (
            (((p.x - lo.x) / cell.x) as usize).min(n - 1),
            (((p.y - lo.y) / cell.y) as usize).min(n - 1),
            (((p.z - lo.z) / cell.z) as usize).min(n - 1),
        )
    };
    // clearance per lattice node
    let clearances: Vec<f64> = (0..n * n * n)
        .into_par_iter()
        .map(|i| {
            let (ix, iy, iz) = (i % n, (i / n) % n, i / (n * n));
            let p = Point3::new(
                lo.x + (ix as f64 + 0.5) * cell.x,
                lo.y + (iy as f64 + 0.5) * cell.y,
                lo.z + (iz as f64 + 0.5) * cell.z,
            );
            if sampling.inside(&p) {
                sampling.distance(&p)
            } else {
                -1.0
            }
        })
        .collect();
    let connected = |r: f64| -> bool {
        let key = |t: (usize, usize, usize)| t.0 + n * (t.1 + n * t.2);
        let (sa, sb) = (idx(a), idx(b));
        if clearances[key(sa)] < r || clearances[key(sb)] < r {
            return false;
        }
        let mut seen = vec![false; n * n * n];
        let mut queue = std::collections::VecDeque::new();
        seen[key(sa)] = true;
        queue.push_back(sa);
        while let Some(cur) = queue.pop_front() {
            if cur == sb {
                return true;
            }
            let (x, y, z) = (cur.0 as i64, cur.1 as i64, cur.2 as i64);
            for (dx, dy, dz) in [
                (1i64, 0i64, 0i64),
                (-1, 0, 0),
                (0, 1, 0),
                (0, -1, 0),
                (0, 0, 1),
                (0, 0, -1),
            ] {
                let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                if nx < 0 || ny < 0 || nz < 0 || nx >= n as i64 || ny >= n as i64 || nz >= n as i64
                {
                    continue;
                }
                let t = (nx as usize, ny as usize, nz as usize);
                let k = key(t);
                if !seen[k] && clearances[k] >= r {
                    seen[k] = true;
                    queue.push_back(t);
                }
            }
        }
        false
    };
    let r_max = sampling.distance(a).min(sampling.distance(b));
    if !connected(0.0) {
        return Ok(0.0);
    }
    let (mut lo_r, mut hi_r) = (0.0, r_max);
    for _ in 0..30 {
        let mid = 0.5 * (lo_r + hi_r);
        if connected(mid) {
            lo_r = mid;
        } else {
            hi_r = mid;
        }
    }
    Ok(lo_r)
}
