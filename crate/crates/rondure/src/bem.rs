//! Single-layer boundary elements for the exterior capacitary potential.
//!
//! Piecewise-constant densities, collocation at panel centroids, dense
//! direct solve. The self and near interactions use the closed-form
//! potential of a constant source over a flat triangle; probes and flux
//! terms refine near panels by recursive subdivision. The capacity comes
//! out in the convention `cap(B_R) = 4 pi R`, as the total single-layer
//! charge; a flux form is computed as a consistency check.

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use nalgebra::{Matrix3, Point3, Vector3};
use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;

pub const DEFAULT_PANEL_BUDGET: usize = 20_000;

/// Distance (in equivalent panel diameters) beyond which one-point
/// quadrature is used; inside it, panels are subdivided or integrated
/// in closed form.
const NEAR_FACTOR: f64 = 3.0;

/// Evaluation floor: probes must stay this many equivalent diameters
/// away from the nearest panel.
const BAND_FACTOR: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct Panel {
    pub v: [Point3<f64>; 3],
    pub centroid: Point3<f64>,
    pub normal: Vector3<f64>,
    pub area: f64,
    /// Equivalent circle diameter `2 sqrt(area/pi)`.
    pub d_eq: f64,
}

/// Solved exterior Dirichlet field for `u = 1` on the boundary.
pub struct PotentialField {
    pub panels: Vec<Panel>,
    pub sigma: Vec<f64>,
    pub capacity: f64,
    pub capacity_flux: f64,
    /// Residual `max |u - 1|` re-evaluated at the collocation points.
    pub bc_residual: f64,
    /// Residual at off-centroid surface points (quality diagnostic).
    pub held_out_residual: f64,
    /// Charge-weighted centroid; the far field looks like a monopole here.
    pub charge_center: Point3<f64>,
    pub max_d_eq: f64,
    /// Median boundary gradient magnitude, the scale for `|grad w|` floors.
    pub boundary_grad_scale: f64,
    grid: CentroidGrid,
}

/// Field values of `u` and `w = -log u` at an exterior point.
#[derive(Debug, Clone, Serialize)]
pub struct LogPotentialProbe {
    pub point: [f64; 3],
    pub u: f64,
    pub grad_u: [f64; 3],
    /// Second derivatives of `u`, row-major symmetric.
    pub hess_u: [[f64; 3]; 3],
    pub w: f64,
    pub grad_w: [f64; 3],
    pub hess_w: [[f64; 3]; 3],
}

impl LogPotentialProbe {
    pub fn grad_w_vec(&self) -> Vector3<f64> {
        Vector3::new(self.grad_w[0], self.grad_w[1], self.grad_w[2])
    }

    pub fn hess_w_mat(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.hess_w[i][j])
    }

    /// Harmonicity diagnostic `|tr hess u| / |grad u|`.
    pub fn laplacian_residual(&self) -> f64 {
        let tr = self.hess_u[0][0] + self.hess_u[1][1] + self.hess_u[2][2];
        let g = Vector3::new(self.grad_u[0], self.grad_u[1], self.grad_u[2]).norm();
        tr.abs() / g.max(1e-300)
    }

    /// Mean curvature of the level set of `w` through this point,
    /// `H = |grad w| - <grad |grad w|, grad w>/|grad w|^2`.
    pub fn level_mean_curvature(&self) -> f64 {
        let g = self.grad_w_vec();
        let gn = g.norm();
        let hess = self.hess_w_mat();
        gn - g.dot(&(hess * g)) / (gn * gn * gn)
    }

    /// Squared traceless second fundamental form of the level set.
    pub fn level_asq(&self) -> f64 {
        let g = self.grad_w_vec();
        let gn = g.norm();
        let n = g / gn;
        let hess = self.hess_w_mat();
        let p = Matrix3::identity() - n * n.transpose();
        let shape = p * hess * p / gn;
        let tr = shape.trace();
        let frob2 = shape.norm_squared();
        (frob2 - 0.5 * tr * tr).max(0.0)
    }
}

#[derive(Default, Clone, Copy)]
struct Eval {
    u: f64,
    grad: Vector3<f64>,
    hess: Matrix3<f64>,
}

impl Eval {
    fn zero() -> Eval {
        Eval {
            u: 0.0,
            grad: Vector3::zeros(),
            hess: Matrix3::zeros(),
        }
    }
}

struct CentroidGrid {
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl CentroidGrid {
    fn build(panels: &[Panel]) -> CentroidGrid {
        let cell = panels
            .iter()
            .map(|p| p.d_eq)
            .fold(0.0f64, f64::max)
            .max(1e-12)
            * 2.0;
        let mut buckets: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in panels.iter().enumerate() {
            let k = Self::key(&p.centroid, cell);
            buckets.entry(k).or_default().push(i as u32);
        }
        CentroidGrid { cell, buckets }
    }

    fn key(p: &Point3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn nearest(&self, panels: &[Panel], q: &Point3<f64>) -> (usize, f64) {
        let center = Self::key(q, self.cell);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let key = (center.0 + dx, center.1 + dy, center.2 + dz);
                        if let Some(ids) = self.buckets.get(&key) {
                            for &i in ids {
                                let d2 = (panels[i as usize].centroid - q).norm_squared();
                                if d2 < best.1 {
                                    best = (i as usize, d2);
                                }
                            }
                        }
                    }
                }
            }
            if best.0 != usize::MAX {
                let safe = (best.1.sqrt() / self.cell).ceil() as i64 + 1;
                if ring >= safe {
                    return (best.0, best.1.sqrt());
                }
            }
            ring += 1;
            if ring > 1_000_000 {
                return (best.0, best.1.sqrt());
            }
        }
    }
}

fn build_panels(mesh: &TriangleMesh) -> Vec<Panel> {
    (0..mesh.faces.len())
        .map(|i| {
            let f = &mesh.faces[i];
            let v = [
                mesh.vertices[f[0]],
                mesh.vertices[f[1]],
                mesh.vertices[f[2]],
            ];
            let area = mesh.face_area(i);
            Panel {
                v,
                centroid: mesh.face_centroid(i),
                normal: mesh.face_normal(i),
                area,
                d_eq: 2.0 * (area / PI).sqrt(),
            }
        })
        .collect()
}

/// Closed-form `int_T dA / |p - y|` for a flat triangle.
///
/// Edge terms in the asinh form plus the solid-angle correction for
/// off-plane points; valid everywhere except on the triangle's edges.
fn triangle_potential(p: &Point3<f64>, v: &[Point3<f64>; 3], normal: &Vector3<f64>) -> f64 {
    let h = (p - v[0]).dot(normal);
    let rho = p - h * normal;
    let mut total = 0.0;
    for k in 0..3 {
        let (a, b) = (v[k], v[(k + 1) % 3]);
        let edge = b - a;
        let len = edge.norm();
        if len < 1e-300 {
            continue;
        }
        let lhat = edge / len;
        let uhat = lhat.cross(normal);
        let te = (a - rho).dot(&uhat);
        let lm = (a - rho).dot(&lhat);
        let lp = (b - rho).dot(&lhat);
        let r0sq = te * te + h * h;
        let r0 = r0sq.sqrt();
        if r0 < 1e-14 * len {
            continue; // p on the edge line; the contribution vanishes
        }
        let fe = (lp / r0).asinh() - (lm / r0).asinh();
        let rp = (lp * lp + r0sq).sqrt();
        let rm = (lm * lm + r0sq).sqrt();
        let beta =
            (te * lp).atan2(r0sq + h.abs() * rp) - (te * lm).atan2(r0sq + h.abs() * rm);
        total += te * fe - h.abs() * beta;
    }
    total
}

fn point_source(x: &Point3<f64>, y: &Point3<f64>, q: f64, out: &mut Eval) {
    let d = x - y;
    let r2 = d.norm_squared();
    let r = r2.sqrt();
    let inv = 1.0 / (4.0 * PI * r);
    out.u += q * inv;
    let g = -q / (4.0 * PI * r2 * r);
    out.grad += g * d;
    // (3 d d^T - r^2 I) / (4 pi r^5)
    let c = q / (4.0 * PI * r2 * r2 * r);
    out.hess += c * (3.0 * d * d.transpose() - r2 * Matrix3::identity());
}

fn subdivided_source(
    x: &Point3<f64>,
    v: &[Point3<f64>; 3],
    sigma: f64,
    depth: u32,
    out: &mut Eval,
) {
    let centroid = Point3::from((v[0].coords + v[1].coords + v[2].coords) / 3.0);
    let area = 0.5 * (v[1] - v[0]).cross(&(v[2] - v[0])).norm();
    let d_eq = 2.0 * (area / PI).sqrt();
    let dist = (x - centroid).norm();
    if depth == 0 || dist >= NEAR_FACTOR * d_eq {
        point_source(x, &centroid, sigma * area, out);
        return;
    }
    let m01 = Point3::from(0.5 * (v[0].coords + v[1].coords));
    let m12 = Point3::from(0.5 * (v[1].coords + v[2].coords));
    let m20 = Point3::from(0.5 * (v[2].coords + v[0].coords));
    for sub in [
        [v[0], m01, m20],
        [m01, v[1], m12],
        [m20, m12, v[2]],
        [m01, m12, m20],
    ] {
        subdivided_source(x, &sub, sigma, depth - 1, out);
    }
}

impl PotentialField {
    /// Solve the exterior Dirichlet problem on a validated mesh.
    pub fn solve(mesh: &TriangleMesh, tolerance: f64) -> Result<PotentialField> {
        Self::solve_with_budget(mesh, tolerance, DEFAULT_PANEL_BUDGET)
    }

    pub fn solve_with_budget(
        mesh: &TriangleMesh,
        tolerance: f64,
        budget: usize,
    ) -> Result<PotentialField> {
        mesh.ensure_valid()?;
        let panels = build_panels(mesh);
        let n = panels.len();
        if n > budget {
            return Err(Error::PanelBudget { panels: n, budget });
        }
        let floor = crate::mesh::DEGENERATE_AREA_REL * mesh.bbox_diagonal().powi(2);
        for (i, p) in panels.iter().enumerate() {
            if p.area < floor {
                return Err(Error::IllConditioned {
                    panel: i,
                    area: p.area,
                });
            }
        }

        // collocation matrix
        let mut a = Array2::<f64>::zeros((n, n));
        {
            let rows: Vec<(usize, &mut [f64])> = a
                .as_slice_mut()
                .unwrap()
                .chunks_mut(n)
                .enumerate()
                .collect();
            rows.into_par_iter().for_each(|(i, row)| {
                let x = panels[i].centroid;
                for (j, pj) in panels.iter().enumerate() {
                    let dist = (x - pj.centroid).norm();
                    row[j] = if dist < NEAR_FACTOR * pj.d_eq {
                        triangle_potential(&x, &pj.v, &pj.normal) / (4.0 * PI)
                    } else {
                        pj.area / (4.0 * PI * dist)
                    };
                }
            });
        }

        let rhs = Array1::<f64>::ones(n);
        let sigma_nd = a
            .solve(&rhs)
            .map_err(|e| Error::LinearSolve(format!("{e}")))?;
        let sigma: Vec<f64> = sigma_nd.to_vec();

        // residual re-evaluated through the same quadrature path
        let residuals: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| (a.row(i).dot(&sigma_nd) - 1.0).abs())
            .collect();
        let bc_residual = residuals.iter().cloned().fold(0.0, f64::max);
        if bc_residual > tolerance.max(1e-10) {
            return Err(Error::BcResidual {
                residual: bc_residual,
                tol: tolerance.max(1e-10),
            });
        }
        drop(a);

        let capacity: f64 = panels
            .iter()
            .zip(&sigma)
            .map(|(p, s)| s * p.area)
            .sum();
        if !(capacity > 0.0) {
            return Err(Error::LinearSolve(format!(
                "nonpositive capacity {capacity}"
            )));
        }
        let charge_center = Point3::from(
            panels
                .iter()
                .zip(&sigma)
                .map(|(p, s)| s * p.area * p.centroid.coords)
                .fold(Vector3::zeros(), |acc, v| acc + v)
                / capacity,
        );

        // exterior normal derivative at collocation points via the jump
        // relation; the principal-value self term vanishes on flat panels
        let fluxes: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = panels[i].centroid;
                let nu = panels[i].normal;
                let mut acc = Eval::zero();
                for (j, pj) in panels.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let dist = (x - pj.centroid).norm();
                    if dist < NEAR_FACTOR * pj.d_eq {
                        subdivided_source(&x, &pj.v, sigma[j], 6, &mut acc);
                    } else {
                        point_source(&x, &pj.centroid, sigma[j] * pj.area, &mut acc);
                    }
                }
                nu.dot(&acc.grad) - 0.5 * sigma[i]
            })
            .collect();
        let capacity_flux: f64 = panels
            .iter()
            .zip(&fluxes)
            .map(|(p, f)| -f * p.area)
            .sum();
        let mut grads: Vec<f64> = fluxes.iter().map(|f| f.abs()).collect();
        grads.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let boundary_grad_scale = grads[n / 2];

        let max_d_eq = panels.iter().map(|p| p.d_eq).fold(0.0, f64::max);
        let grid = CentroidGrid::build(&panels);
        let mut field = PotentialField {
            panels,
            sigma,
            capacity,
            capacity_flux,
            bc_residual,
            held_out_residual: 0.0,
            charge_center,
            max_d_eq,
            boundary_grad_scale,
            grid,
        };

        // held-out surface residual at off-centroid points (diagnostic)
        let stride = (n / 300).max(1);
        let held: Vec<f64> = (0..n)
            .step_by(stride)
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|i| {
                let p = &field.panels[i];
                let pt = Point3::from(
                    0.5 * p.v[0].coords + 0.25 * p.v[1].coords + 0.25 * p.v[2].coords,
                );
                (field.eval_surface_u(&pt) - 1.0).abs()
            })
            .collect();
        field.held_out_residual = held.iter().cloned().fold(0.0, f64::max);
        Ok(field)
    }

    /// `u` at a point on (or near) the surface, all near panels in closed form.
    fn eval_surface_u(&self, x: &Point3<f64>) -> f64 {
        let mut u = 0.0;
        for (j, pj) in self.panels.iter().enumerate() {
            let dist = (x - pj.centroid).norm();
            u += if dist < NEAR_FACTOR * pj.d_eq {
                self.sigma[j] * triangle_potential(x, &pj.v, &pj.normal) / (4.0 * PI)
            } else {
                self.sigma[j] * pj.area / (4.0 * PI * dist)
            };
        }
        u
    }

    /// Raw field evaluation without band checks (used internally by the
    /// level-set extractor, which verifies its outputs afterwards).
    pub fn eval_raw(&self, x: &Point3<f64>) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let mut acc = Eval::zero();
        for (j, pj) in self.panels.iter().enumerate() {
            let dist = (x - pj.centroid).norm();
            if dist < NEAR_FACTOR * pj.d_eq {
                subdivided_source(x, &pj.v, self.sigma[j], 8, &mut acc);
            } else {
                point_source(x, &pj.centroid, self.sigma[j] * pj.area, &mut acc);
            }
        }
        (acc.u, acc.grad, acc.hess)
    }

    /// Raw `u` only (cheaper; used for volume grid sampling).
    pub fn eval_u_raw(&self, x: &Point3<f64>) -> f64 {
        let mut u = 0.0;
        for (j, pj) in self.panels.iter().enumerate() {
            let dist = (x - pj.centroid).norm();
            if dist < NEAR_FACTOR * pj.d_eq {
                u += self.sigma[j] * triangle_potential(x, &pj.v, &pj.normal) / (4.0 * PI);
            } else {
                u += self.sigma[j] * pj.area / (4.0 * PI * dist);
            }
        }
        u
    }

    /// `w = -log u` without band checks.
    pub fn eval_w_raw(&self, x: &Point3<f64>) -> f64 {
        -self.eval_u_raw(x).max(1e-300).ln()
    }

    /// Distance to the nearest panel centroid and that panel's band floor.
    pub fn near_field_floor(&self, x: &Point3<f64>) -> (f64, f64) {
        let (j, dist) = self.grid.nearest(&self.panels, x);
        (dist, BAND_FACTOR * self.panels[j].d_eq)
    }

    fn is_exterior(&self, x: &Point3<f64>) -> bool {
        let (j, _) = self.grid.nearest(&self.panels, x);
        let p = &self.panels[j];
        (x - p.centroid).dot(&p.normal) > 0.0
    }

    /// Full probe of `u`, `w` and their derivatives at an exterior point
    /// outside the near-field band.
    pub fn probe(&self, x: &Point3<f64>) -> Result<LogPotentialProbe> {
        let (dist, floor) = self.near_field_floor(x);
        if dist < floor || !self.is_exterior(x) {
            return Err(Error::NearField { dist, floor });
        }
        Ok(self.probe_unchecked(x))
    }

    pub fn probe_unchecked(&self, x: &Point3<f64>) -> LogPotentialProbe {
        let (u, grad, hess) = self.eval_raw(x);
        let w = -u.max(1e-300).ln();
        let grad_w = -grad / u;
        let hess_w = -hess / u + grad * grad.transpose() / (u * u);
        LogPotentialProbe {
            point: [x.x, x.y, x.z],
            u,
            grad_u: [grad.x, grad.y, grad.z],
            hess_u: [
                [hess[(0, 0)], hess[(0, 1)], hess[(0, 2)]],
                [hess[(1, 0)], hess[(1, 1)], hess[(1, 2)]],
                [hess[(2, 0)], hess[(2, 1)], hess[(2, 2)]],
            ],
            w,
            grad_w: [grad_w.x, grad_w.y, grad_w.z],
            hess_w: [
                [hess_w[(0, 0)], hess_w[(0, 1)], hess_w[(0, 2)]],
                [hess_w[(1, 0)], hess_w[(1, 1)], hess_w[(1, 2)]],
                [hess_w[(2, 0)], hess_w[(2, 1)], hess_w[(2, 2)]],
            ],
        }
    }

    /// Stored capacity plus the flux-form consistency gap.
    pub fn capacity_with_gap(&self) -> (f64, f64) {
        (
            self.capacity,
            (self.capacity - self.capacity_flux).abs() / self.capacity,
        )
    }

    /// Conservative floor on sweep levels: the largest `w` observed at the
    /// band edge over a panel subsample.
    pub fn t_floor(&self) -> f64 {
        let stride = (self.panels.len() / 200).max(1);
        let mut floor = 0.0f64;
        for p in self.panels.iter().step_by(stride) {
            let x = p.centroid + (BAND_FACTOR * p.d_eq * 1.05) * p.normal;
            floor = floor.max(self.eval_w_raw(&x));
        }
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::AnalyticDomain;
    use crate::marching::{generate, generate_with_cell};
    use approx::assert_relative_eq;

    fn unit_sphere_mesh() -> TriangleMesh {
        generate(
            &AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: 1.0,
            },
            4,
        )
        .unwrap()
    }

    #[test]
    fn triangle_potential_matches_subdivision() {
        // oracle: deep recursive subdivision with point sources
        let v = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.1, 0.0),
            Point3::new(0.2, 0.9, 0.0),
        ];
        let normal = Vector3::z();
        let probes = [
            Point3::new(0.4, 0.3, 0.0),  // in plane, inside
            Point3::new(0.4, 0.3, 0.5),  // above
            Point3::new(2.0, -1.0, 0.3), // outside
            Point3::new(-0.5, 0.2, -0.7),
        ];
        for p in &probes {
            let exact = triangle_potential(p, &v, &normal);
            let mut acc = Eval::zero();
            subdivided_source(p, &v, 1.0, 12, &mut acc);
            let quad = 4.0 * PI * acc.u;
            assert_relative_eq!(exact, quad, max_relative = 2e-3);
        }
    }

    #[test]
    fn sphere_capacity_and_probe() {
        let mesh = unit_sphere_mesh();
        let field = PotentialField::solve(&mesh, 1e-6).unwrap();
        assert_relative_eq!(field.capacity, 4.0 * PI, max_relative = 0.01);
        let (_, gap) = field.capacity_with_gap();
        assert!(gap < 0.02, "flux consistency gap {gap}");

        // u = 1/r outside the unit sphere
        let p = field.probe(&Point3::new(0.0, 0.0, 3.0)).unwrap();
        assert_relative_eq!(p.u, 1.0 / 3.0, max_relative = 0.01);
        assert_relative_eq!(
            Vector3::from(p.grad_u).norm(),
            1.0 / 9.0,
            max_relative = 0.015
        );
        assert_relative_eq!(p.w, 3.0f64.ln(), epsilon = 0.01);

        // grad w = x/|x|^2
        let p2 = field.probe(&Point3::new(2.0, 0.0, 0.0)).unwrap();
        let gw = p2.grad_w_vec();
        assert_relative_eq!(gw.x, 0.5, max_relative = 0.02);
        assert!(gw.y.abs() < 5e-3 && gw.z.abs() < 5e-3);

        // level-set curvature of {w = log 2}: sphere radius 2, H = 1
        assert_relative_eq!(p2.level_mean_curvature(), 1.0, max_relative = 0.03);
        assert!(p2.level_asq() < 1e-3);
    }

    #[test]
    fn probe_rejects_near_field_and_interior() {
        let mesh = unit_sphere_mesh();
        let field = PotentialField::solve(&mesh, 1e-6).unwrap();
        assert!(matches!(
            field.probe(&Point3::new(0.2, 0.0, 0.0)),
            Err(Error::NearField { .. })
        ));
        assert!(matches!(
            field.probe(&Point3::new(1.001, 0.0, 0.0)),
            Err(Error::NearField { .. })
        ));
        assert!(field.probe(&Point3::new(1.6, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn capacity_scales_and_translates() {
        let mesh = unit_sphere_mesh();
        let base = PotentialField::solve(&mesh, 1e-6).unwrap().capacity;

        let translated = mesh.translated(&Vector3::new(3.0, -2.0, 1.0));
        let cap_t = PotentialField::solve(&translated, 1e-6).unwrap().capacity;
        assert_relative_eq!(cap_t, base, max_relative = 1e-10);

        let scaled = mesh.scaled(2.0);
        let cap_s = PotentialField::solve(&scaled, 1e-6).unwrap().capacity;
        assert_relative_eq!(cap_s, 2.0 * base, max_relative = 1e-6);
    }

    #[test]
    fn harmonicity_at_random_exterior_points() {
        use rand::{Rng, SeedableRng};
        let mesh = generate_with_cell(
            &AnalyticDomain::Ellipsoid {
                a: 2.0,
                b: 1.0,
                c: 1.0,
            },
            0.09,
        )
        .unwrap();
        let field = PotentialField::solve(&mesh, 1e-6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut max_res = 0.0f64;
        let mut count = 0;
        while count < 100 {
            let p = Point3::new(
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            );
            if let Ok(probe) = field.probe(&p) {
                max_res = max_res.max(probe.laplacian_residual());
                count += 1;
            }
        }
        assert!(max_res < 1e-3, "max harmonicity residual {max_res}");
    }

    #[test]
    fn capacity_converges_under_refinement() {
        let d = AnalyticDomain::Ball {
            center: [0.0; 3],
            radius: 1.0,
        };
        let coarse = generate_with_cell(&d, 0.14).unwrap();
        let fine = generate_with_cell(&d, 0.14 / std::f64::consts::SQRT_2).unwrap();
        assert!(fine.faces.len() >= 1036 * coarse.faces.len() / 618); // ~2x panels
        let cap_c = PotentialField::solve(&coarse, 1e-6).unwrap().capacity;
        let cap_f = PotentialField::solve(&fine, 1e-6).unwrap().capacity;
        let (e_c, e_f) = ((cap_c - 4.0 * PI).abs(), (cap_f - 4.0 * PI).abs());
        assert!(
            e_f <= 0.5 * e_c,
            "error {e_c} -> {e_f} under panel doubling"
        );
    }

    #[test]
    fn nested_capacity_monotone() {
        let inner = generate_with_cell(
            &AnalyticDomain::Ellipsoid {
                a: 1.5,
                b: 0.8,
                c: 0.8,
            },
            0.09,
        )
        .unwrap();
        let outer = generate_with_cell(
            &AnalyticDomain::Ellipsoid {
                a: 2.0,
                b: 1.0,
                c: 1.0,
            },
            0.11,
        )
        .unwrap();
        let cap_i = PotentialField::solve(&inner, 1e-6).unwrap().capacity;
        let cap_o = PotentialField::solve(&outer, 1e-6).unwrap().capacity;
        assert!(cap_i < cap_o, "cap {cap_i} !< {cap_o}");
    }

    #[test]
    fn ellipsoid_capacity_closed_form() {
        // prolate spheroid a=2, b=c=1: cap = 4 pi sqrt(3)/ln(2+sqrt(3))
        let mesh = generate_with_cell(
            &AnalyticDomain::Ellipsoid {
                a: 2.0,
                b: 1.0,
                c: 1.0,
            },
            0.075,
        )
        .unwrap();
        let field = PotentialField::solve(&mesh, 1e-6).unwrap();
        let exact = 16.527174043782799;
        assert_relative_eq!(field.capacity, exact, max_relative = 0.02);
    }

    #[test]
    fn level_set_consistency_unit_sphere() {
        // {u = s} is the sphere of radius 1/s
        let mesh = unit_sphere_mesh();
        let field = PotentialField::solve(&mesh, 1e-6).unwrap();
        for &s in &[0.9f64, 0.5, 0.25] {
            let t = -s.ln();
            // bisect w = t along a ray
            let dir = Vector3::new(0.3, -0.5, 0.81).normalize();
            let (mut lo, mut hi) = (1.3, 40.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if field.eval_w_raw(&Point3::from(mid * dir)) < t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!(
                (lo - 1.0 / s).abs() < 0.01 / s,
                "level s={s}: radius {lo} vs {}",
                1.0 / s
            );
        }
    }
}
