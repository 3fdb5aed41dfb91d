//! Discrete curvature from quadric fits.
//!
//! Mean curvature uses the sum convention (unit sphere has `H = 2`). Each
//! vertex gets a least-squares quadric over its 2-ring in the local normal
//! frame; vertices with degenerate stars are flagged and excluded from
//! surface integrals, with the excluded area fraction reported.

use crate::error::Result;
use crate::mesh::TriangleMesh;
use nalgebra::{Matrix2, SMatrix, SVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;

/// Per-vertex curvature data for a closed mesh.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureField {
    /// Mean curvature (sum of principal curvatures), 1/length.
    pub h: Vec<f64>,
    /// Squared traceless second fundamental form, 1/length^2.
    pub asq: Vec<f64>,
    /// Barycentric vertex area weights; sums to the surface area.
    pub area_weights: Vec<f64>,
    /// Vertices excluded from integrals (degenerate stars).
    pub excluded: Vec<bool>,
    pub excluded_area_fraction: f64,
}

impl CurvatureField {
    pub fn mean_h(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.h.len() {
            if !self.excluded[i] {
                num += self.area_weights[i] * self.h[i];
                den += self.area_weights[i];
            }
        }
        num / den
    }

    pub fn mean_asq(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..self.asq.len() {
            if !self.excluded[i] {
                num += self.area_weights[i] * self.asq[i];
                den += self.area_weights[i];
            }
        }
        num / den
    }

    /// Surface integral of `|Aring|^2`.
    pub fn integral_asq(&self) -> f64 {
        (0..self.asq.len())
            .filter(|&i| !self.excluded[i])
            .map(|i| self.area_weights[i] * self.asq[i])
            .sum()
    }
}

/// Quadric-fit curvature over 2-ring neighborhoods.
pub fn curvature(mesh: &TriangleMesh) -> Result<CurvatureField> {
    mesh.ensure_valid()?;
    let adj = mesh.vertex_adjacency();
    let area_weights = mesh.vertex_areas();
    let n = mesh.vertices.len();

    let per_vertex: Vec<Option<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| fit_vertex(mesh, &adj, i))
        .collect();

    let mut h = vec![0.0; n];
    let mut asq = vec![0.0; n];
    let mut excluded = vec![false; n];
    let mut excluded_area = 0.0;
    for i in 0..n {
        match per_vertex[i] {
            Some((hi, ai)) => {
                h[i] = hi;
                asq[i] = ai;
            }
            None => {
                excluded[i] = true;
                excluded_area += area_weights[i];
            }
        }
    }
    let total_area: f64 = area_weights.iter().sum();
    Ok(CurvatureField {
        h,
        asq,
        area_weights,
        excluded,
        excluded_area_fraction: excluded_area / total_area,
    })
}

fn fit_vertex(mesh: &TriangleMesh, adj: &[Vec<usize>], i: usize) -> Option<(f64, f64)> {
    // 2-ring neighborhood
    let mut ring: Vec<usize> = Vec::new();
    for &j in &adj[i] {
        ring.push(j);
        for &k in &adj[j] {
            if k != i {
                ring.push(k);
            }
        }
    }
    ring.sort_unstable();
    ring.dedup();
    if ring.len() < 5 {
        return None;
    }

    let normal = mesh.normals[i];
    if normal.norm_squared() < 0.5 {
        return None;
    }
    // local tangent frame
    let helper = if normal.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = normal.cross(&helper).normalize();
    let e2 = normal.cross(&e1);

    // least squares for z = a x^2 + b xy + c y^2 + d x + e y
    let mut ata = SMatrix::<f64, 5, 5>::zeros();
    let mut atb = SVector::<f64, 5>::zeros();
    let origin = mesh.vertices[i];
    for &j in &ring {
        let d = mesh.vertices[j] - origin;
        let (x, y, z) = (d.dot(&e1), d.dot(&e2), d.dot(&normal));
        let row = SVector::<f64, 5>::from([x * x, x * y, y * y, x, y]);
        ata += row * row.transpose();
        atb += z * row;
    }
    let sol = ata.lu().solve(&atb)?;
    let (a, b, c, d, e) = (sol[0], sol[1], sol[2], sol[3], sol[4]);

    // first/second fundamental forms of the graph at the origin; the
    // outward normal makes a convex surface bend away, so the shape
    // operator is the negated Weingarten map of the height function
    let w = (1.0 + d * d + e * e).sqrt();
    let ff1 = Matrix2::new(1.0 + d * d, d * e, d * e, 1.0 + e * e);
    let ff2 = Matrix2::new(2.0 * a, b, b, 2.0 * c) / w;
    let shape = -ff1.try_inverse()? * ff2;
    let tr = shape.trace();
    let det = shape.determinant();
    let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
    let (k1, k2) = (0.5 * (tr + disc), 0.5 * (tr - disc));
    Some((k1 + k2, 0.5 * (k1 - k2).powi(2)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::AnalyticDomain;
    use crate::marching::generate;

    fn sphere(radius: f64, level: u32) -> TriangleMesh {
        generate(
            &AnalyticDomain::Ball {
                center: [0.0; 3],
                radius,
            },
            level,
        )
        .unwrap()
    }

    #[test]
    fn unit_sphere_h_near_two() {
        let field = curvature(&sphere(1.0, 5)).unwrap();
        let mh = field.mean_h();
        assert!((1.96..=2.04).contains(&mh), "mean H = {mh}");
        assert!(field.mean_asq() < 0.01, "mean asq = {}", field.mean_asq());
        assert!(field.excluded_area_fraction < 0.01);
    }

    #[test]
    fn radius_two_sphere_scales() {
        let field = curvature(&sphere(2.0, 4)).unwrap();
        let mh = field.mean_h();
        assert!((mh - 1.0).abs() < 0.02, "mean H = {mh}");
    }

    #[test]
    fn ellipsoid_umbilicity_defect() {
        let mesh = generate(
            &AnalyticDomain::Ellipsoid {
                a: 2.0,
                b: 1.0,
                c: 1.0,
            },
            5,
        )
        .unwrap();
        let field = curvature(&mesh).unwrap();
        let defect = field.integral_asq();
        // dense-quadrature oracle on the closed-form principal curvatures:
        // int (k1 - k2)^2 / 2 da = 5.77047
        assert!(defect > 0.5, "defect = {defect}");
        assert!(
            (defect - 5.77047).abs() < 0.3,
            "defect = {defect} vs oracle 5.77047"
        );
    }

    #[test]
    fn convergence_under_refinement() {
        // halving the edge length must at least halve |mean H - 2|
        let coarse = curvature(&sphere(1.0, 4)).unwrap();
        let fine = curvature(&sphere(1.0, 5)).unwrap();
        let e_coarse = (coarse.mean_h() - 2.0).abs();
        let e_fine = (fine.mean_h() - 2.0).abs();
        assert!(
            e_fine <= 0.5 * e_coarse + 1e-4,
            "coarse {e_coarse}, fine {e_fine}"
        );
    }

    #[test]
    fn area_weights_sum_to_area() {
        let mesh = sphere(1.0, 4);
        let field = curvature(&mesh).unwrap();
        let total: f64 = field.area_weights.iter().sum();
        assert!((total - mesh.area()).abs() < 1e-9 * mesh.area());
    }
}
