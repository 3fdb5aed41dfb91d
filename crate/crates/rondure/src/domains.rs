//! Analytic domain families and their level functions.
//!
//! Every domain is given by a smooth function negative inside, positive
//! outside, with nonvanishing gradient on the zero set. The dumbbell blends
//! its three primitives with an exponential smooth-minimum whose sharpness
//! is configurable; the blend decays fast enough that the neck radius is
//! preserved to machine precision.

use crate::error::{Error, Result};
use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Analytic domain kinds with their parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum AnalyticDomain {
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned ellipsoid centered at the origin with semi-axes a, b, c.
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Two unit balls at (+-2, 0, 0) joined by a tube of radius 1/k,
    /// blended with an exponential smooth-min of the given sharpness.
    Dumbbell {
        k: f64,
        smoothing: f64,
    },
    /// Unit sphere with `2m` outward bumps of the given amplitude around
    /// the equator: `r = 1 + amplitude * sin^{2m}(theta) cos^2(m phi)`.
    BumpedSphere {
        amplitude: f64,
        frequency: u32,
    },
    /// Unit ball minus a cavity of radius `epsilon` centered at (0,0,-1),
    /// blended with a fillet where the two spheres meet.
    SlitBall {
        epsilon: f64,
        fillet: f64,
    },
    /// Conformal inversion of another domain about an interior point:
    /// the zero set is the image of the inner zero set under
    /// `x -> center + scale (x - center)/|x - center|^2`.
    Inverted {
        inner: Box<AnalyticDomain>,
        center: [f64; 3],
        scale: f64,
    },
}

impl AnalyticDomain {
    pub fn dumbbell(k: f64) -> AnalyticDomain {
        AnalyticDomain::Dumbbell {
            k,
            smoothing: 0.25 / k,
        }
    }

    pub fn slit_ball(epsilon: f64) -> AnalyticDomain {
        AnalyticDomain::SlitBall {
            epsilon,
            fillet: epsilon / 20.0,
        }
    }

    /// Level function value; negative inside.
    pub fn value(&self, p: &Point3<f64>) -> f64 {
        match self {
            AnalyticDomain::Ball { center, radius } => {
                (p - Point3::from(*center)).norm() - radius
            }
            AnalyticDomain::Ellipsoid { a, b, c } => {
                (p.x / a).powi(2) + (p.y / b).powi(2) + (p.z / c).powi(2) - 1.0
            }
            AnalyticDomain::Dumbbell { k, smoothing } => {
                let (f1, f2, f3) = dumbbell_parts(p, *k);
                smooth_min(&[f1, f2, f3], *smoothing)
            }
            AnalyticDomain::BumpedSphere {
                amplitude,
                frequency,
            } => {
                let r = p.coords.norm();
                if r < 1e-12 {
                    return -1.0;
                }
                let m = *frequency as i32;
                let (re, _) = complex_pow(p.x, p.y, m);
                r - 1.0 - amplitude * re * re / r.powi(2 * m)
            }
            AnalyticDomain::SlitBall { epsilon, fillet } => {
                let f1 = p.coords.norm() - 1.0;
                let f2 = epsilon - (p - Point3::new(0.0, 0.0, -1.0)).norm();
                // intersection of {f1<0} and {f2<0} = smooth max
                -smooth_min(&[-f1, -f2], *fillet)
            }
            AnalyticDomain::Inverted {
                inner,
                center,
                scale,
            } => {
                let c = Point3::from(*center);
                let d = p - c;
                let r2 = d.norm_squared();
                if r2 < 1e-24 {
                    return -1.0;
                }
                -inner.value(&(c + scale / r2 * d))
            }
        }
    }

    /// Level function gradient.
    pub fn gradient(&self, p: &Point3<f64>) -> Vector3<f64> {
        match self {
            AnalyticDomain::Ball { center, .. } => {
                let d = p - Point3::from(*center);
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vector3::zeros()
                }
            }
            AnalyticDomain::Ellipsoid { a, b, c } => Vector3::new(
                2.0 * p.x / (a * a),
                2.0 * p.y / (b * b),
                2.0 * p.z / (c * c),
            ),
            AnalyticDomain::Dumbbell { k, smoothing } => {
                let (f1, f2, f3) = dumbbell_parts(p, *k);
                let g1 = unit_or_zero(p - Point3::new(2.0, 0.0, 0.0));
                let g2 = unit_or_zero(p - Point3::new(-2.0, 0.0, 0.0));
                let g3 = tube_gradient(p, *k);
                smooth_min_gradient(&[f1, f2, f3], &[g1, g2, g3], *smoothing)
            }
            AnalyticDomain::BumpedSphere {
                amplitude,
                frequency,
            } => {
                let r = p.coords.norm();
                if r < 1e-12 {
                    return Vector3::zeros();
                }
                let m = *frequency as i32;
                let (re, _) = complex_pow(p.x, p.y, m);
                let (re1, im1) = complex_pow(p.x, p.y, m - 1);
                let rhat = p.coords / r;
                // grad of Re(z^m)^2 in the xy plane
                let gb = Vector3::new(
                    2.0 * re * m as f64 * re1,
                    -2.0 * re * m as f64 * im1,
                    0.0,
                );
                let rm = r.powi(2 * m);
                rhat - *amplitude * (gb / rm - 2.0 * m as f64 * re * re / (rm * r) * rhat)
            }
            AnalyticDomain::SlitBall { epsilon, fillet } => {
                let f1 = p.coords.norm() - 1.0;
                let d2 = p - Point3::new(0.0, 0.0, -1.0);
                let f2 = epsilon - d2.norm();
                let g1 = unit_or_zero(p.coords);
                let g2 = -unit_or_zero(d2);
                -smooth_min_gradient(&[-f1, -f2], &[-g1, -g2], *fillet)
            }
            AnalyticDomain::Inverted {
                inner,
                center,
                scale,
            } => {
                let c = Point3::from(*center);
                let d = p - c;
                let r2 = d.norm_squared();
                if r2 < 1e-24 {
                    return Vector3::zeros();
                }
                let q = c + scale / r2 * d;
                let g = inner.gradient(&q);
                // J^T g with J = (scale/r2)(I - 2 dhat dhat^T), J symmetric
                let dhat = d / r2.sqrt();
                -(scale / r2) * (g - 2.0 * dhat.dot(&g) * dhat)
            }
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.value(p) < 0.0
    }

    /// Sampling box with a safety margin around the zero set.
    pub fn bbox(&self) -> (Point3<f64>, Point3<f64>) {
        match self {
            AnalyticDomain::Ball { center, radius } => {
                let c = Point3::from(*center);
                let m = 1.25 * radius;
                (
                    Point3::new(c.x - m, c.y - m, c.z - m),
                    Point3::new(c.x + m, c.y + m, c.z + m),
                )
            }
            AnalyticDomain::Ellipsoid { a, b, c } => {
                let (ma, mb, mc) = (1.25 * a, 1.25 * b, 1.25 * c);
                (Point3::new(-ma, -mb, -mc), Point3::new(ma, mb, mc))
            }
            AnalyticDomain::Dumbbell { .. } => {
                (Point3::new(-3.4, -1.4, -1.4), Point3::new(3.4, 1.4, 1.4))
            }
            AnalyticDomain::BumpedSphere { amplitude, .. } => {
                let m = 1.25 * (1.0 + amplitude);
                (Point3::new(-m, -m, -m), Point3::new(m, m, m))
            }
            AnalyticDomain::SlitBall { .. } => {
                (Point3::new(-1.25, -1.25, -1.25), Point3::new(1.25, 1.25, 1.25))
            }
            AnalyticDomain::Inverted {
                inner,
                center,
                scale,
            } => {
                // the image of the inner boundary lies within
                // scale / dist(center, boundary) of the center
                let c = Point3::from(*center);
                let dist = inner_boundary_distance(inner, &c);
                let m = 1.25 * scale / dist.max(1e-9);
                (
                    Point3::new(c.x - m, c.y - m, c.z - m),
                    Point3::new(c.x + m, c.y + m, c.z + m),
                )
            }
        }
    }

    /// Newton-project a point onto the zero set along the gradient.
    pub fn project(&self, p: &Point3<f64>, tol: f64) -> Point3<f64> {
        let mut x = *p;
        for _ in 0..30 {
            let v = self.value(&x);
            if v.abs() < tol {
                return x;
            }
            let g = self.gradient(&x);
            let g2 = g.norm_squared();
            if g2 < 1e-30 {
                return x;
            }
            x -= v / g2 * g;
        }
        x
    }

    /// Parse a generator string like `ball`, `ball:0,0,0,1`,
    /// `ellipsoid:2,1,1`, `dumbbell:10`, `bumped:0.05,3`, `slitball:0.15`.
    pub fn parse(spec: &str) -> Result<AnalyticDomain> {
        let mut parts = spec.splitn(2, ':');
        let kind = parts.next().unwrap_or("");
        let args: Vec<f64> = match parts.next() {
            Some(rest) => rest
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad generator argument {s:?}: {e}")))
                })
                .collect::<Result<_>>()?,
            None => Vec::new(),
        };
        match (kind, args.as_slice()) {
            ("ball", []) => Ok(AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: 1.0,
            }),
            ("ball", [r]) => Ok(AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: *r,
            }),
            ("ball", [x, y, z, r]) => Ok(AnalyticDomain::Ball {
                center: [*x, *y, *z],
                radius: *r,
            }),
            ("ellipsoid", [a, b, c]) => Ok(AnalyticDomain::Ellipsoid {
                a: *a,
                b: *b,
                c: *c,
            }),
            ("dumbbell", [k]) => Ok(AnalyticDomain::dumbbell(*k)),
            ("dumbbell", [k, s]) => Ok(AnalyticDomain::Dumbbell {
                k: *k,
                smoothing: *s,
            }),
            ("bumped", [a, m]) => Ok(AnalyticDomain::BumpedSphere {
                amplitude: *a,
                frequency: *m as u32,
            }),
            ("slitball", [e]) => Ok(AnalyticDomain::slit_ball(*e)),
            ("slitball", [e, f]) => Ok(AnalyticDomain::SlitBall {
                epsilon: *e,
                fillet: *f,
            }),
            _ => Err(Error::Config(format!("unknown generator spec {spec:?}"))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            AnalyticDomain::Ball { center, radius } => {
                format!("ball(({},{},{}),{})", center[0], center[1], center[2], radius)
            }
            AnalyticDomain::Ellipsoid { a, b, c } => format!("ellipsoid({a},{b},{c})"),
            AnalyticDomain::Dumbbell { k, smoothing } => {
                format!("dumbbell(k={k},smoothing={smoothing})")
            }
            AnalyticDomain::BumpedSphere {
                amplitude,
                frequency,
            } => format!("bumped-sphere(amplitude={amplitude},frequency={frequency})"),
            AnalyticDomain::SlitBall { epsilon, fillet } => {
                format!("slit-ball(epsilon={epsilon},fillet={fillet})")
            }
            AnalyticDomain::Inverted {
                inner,
                center,
                scale,
            } => format!(
                "inverted({},center=({},{},{}),scale={})",
                inner.describe(),
                center[0],
                center[1],
                center[2],
                scale
            ),
        }
    }
}

fn unit_or_zero(v: Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n > 1e-300 {
        v / n
    } else {
        Vector3::zeros()
    }
}

fn dumbbell_parts(p: &Point3<f64>, k: f64) -> (f64, f64, f64) {
    let f1 = (p - Point3::new(2.0, 0.0, 0.0)).norm() - 1.0;
    let f2 = (p - Point3::new(-2.0, 0.0, 0.0)).norm() - 1.0;
    let radial = (p.y * p.y + p.z * p.z).sqrt() - 1.0 / k;
    let axial = p.x.abs() - 2.0;
    (f1, f2, radial.max(axial))
}

fn tube_gradient(p: &Point3<f64>, k: f64) -> Vector3<f64> {
    let radial = (p.y * p.y + p.z * p.z).sqrt() - 1.0 / k;
    let axial = p.x.abs() - 2.0;
    if radial >= axial {
        let r = (p.y * p.y + p.z * p.z).sqrt();
        if r > 1e-300 {
            Vector3::new(0.0, p.y / r, p.z / r)
        } else {
            Vector3::zeros()
        }
    } else {
        Vector3::new(p.x.signum(), 0.0, 0.0)
    }
}

/// Exponential smooth minimum: `-rho ln(sum exp(-v_i / rho))`.
pub fn smooth_min(values: &[f64], rho: f64) -> f64 {
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = values.iter().map(|v| (-(v - vmin) / rho).exp()).sum();
    vmin - rho * sum.ln()
}

fn smooth_min_gradient(values: &[f64], grads: &[Vector3<f64>], rho: f64) -> Vector3<f64> {
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|v| (-(v - vmin) / rho).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut g = Vector3::zeros();
    for (w, gv) in weights.iter().zip(grads) {
        g += (*w / total) * *gv;
    }
    g
}

/// `Re`, `Im` of `(x + i y)^m` for `m >= 0`.
fn complex_pow(x: f64, y: f64, m: i32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m.max(0) {
        let nre = re * x - im * y;
        im = re * y + im * x;
        re = nre;
    }
    (re, im)
}

fn inner_boundary_distance(inner: &AnalyticDomain, c: &Point3<f64>) -> f64 {
    // bisect along rays to find the nearest zero crossing; coarse but
    // only used to size the sampling box
    let mut best = f64::INFINITY;
    let dirs = crate::medial::geodesic_directions(1);
    for d in &dirs {
        let mut lo = 0.0;
        let mut hi = 1e-3;
        if inner.value(c) >= 0.0 {
            continue;
        }
        while inner.value(&(c + hi * d)) < 0.0 && hi < 1e6 {
            lo = hi;
            hi *= 2.0;
        }
        if hi >= 1e6 {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inner.value(&(c + mid * d)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(lo);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_level_function() {
        let d = AnalyticDomain::Ball {
            center: [0.0; 3],
            radius: 2.0,
        };
        assert!(d.contains(&Point3::new(1.0, 0.0, 0.0)));
        assert!(!d.contains(&Point3::new(3.0, 0.0, 0.0)));
        assert_relative_eq!(d.value(&Point3::new(0.0, 3.0, 0.0)), 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let domains = [
            AnalyticDomain::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 },
            AnalyticDomain::dumbbell(10.0),
            AnalyticDomain::BumpedSphere { amplitude: 0.05, frequency: 3 },
            AnalyticDomain::slit_ball(0.15),
            AnalyticDomain::Inverted {
                inner: Box::new(AnalyticDomain::dumbbell(10.0)),
                center: [0.0; 3],
                scale: 0.1,
            },
        ];
        let probes = [
            Point3::new(0.9, 0.4, 0.2),
            Point3::new(1.7, 0.2, -0.3),
            Point3::new(0.3, -0.8, 0.5),
        ];
        for d in &domains {
            for p in &probes {
                let g = d.gradient(p);
                let h = 1e-6;
                for k in 0..3 {
                    let mut pp = *p;
                    let mut pm = *p;
                    pp[k] += h;
                    pm[k] -= h;
                    let fd = (d.value(&pp) - d.value(&pm)) / (2.0 * h);
                    assert!(
                        (fd - g[k]).abs() < 1e-5 * (1.0 + g.norm()),
                        "{}: component {k}: fd {fd} vs {}",
                        d.describe(),
                        g[k]
                    );
                }
            }
        }
    }

    #[test]
    fn dumbbell_neck_radius_preserved() {
        // zero of the level function along the axis normal at x = 0;
        // the blend must keep it within 20% of 1/k
        let d = AnalyticDomain::dumbbell(10.0);
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
        assert_relative_eq!(lo, 0.1, epsilon = 0.02);
    }

    #[test]
    fn bumped_sphere_radial_range() {
        let d = AnalyticDomain::BumpedSphere {
            amplitude: 0.05,
            frequency: 3,
        };
        // surface radius in [1, 1.05]: inside at r=0.99 in all directions,
        // outside at r=1.06
        for i in 0..50 {
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / 50.0;
            for j in 0..50 {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / 50.0;
                let dir = Vector3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                );
                assert!(d.value(&Point3::from(0.99 * dir)) < 0.0);
                assert!(d.value(&Point3::from(1.0601 * dir)) > 0.0);
            }
        }
    }

    #[test]
    fn inverted_ball_is_ball() {
        // inversion of the unit ball about its center is the unit ball
        let inv = AnalyticDomain::Inverted {
            inner: Box::new(AnalyticDomain::Ball {
                center: [0.0; 3],
                radius: 1.0,
            }),
            center: [0.0; 3],
            scale: 1.0,
        };
        for r in [0.5, 0.9, 1.1, 2.0] {
            let p = Point3::new(r, 0.0, 0.0);
            assert_eq!(inv.value(&p) < 0.0, r < 1.0, "r = {r}");
        }
    }

    #[test]
    fn parse_round_trips() {
        assert_eq!(
            AnalyticDomain::parse("ellipsoid:2,1,1").unwrap(),
            AnalyticDomain::Ellipsoid { a: 2.0, b: 1.0, c: 1.0 }
        );
        assert!(AnalyticDomain::parse("torus:1").is_err());
    }
}
