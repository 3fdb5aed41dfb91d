//! Smallest enclosing ball of a 3D point set.
//!
//! Incremental Welzl scheme with a move-to-front order and deterministic
//! tie-breaking by index: no randomization, so results are reproducible
//! bit-for-bit across runs.

use nalgebra::{Matrix3, Point3, Vector3};

#[derive(Debug, Clone, Copy)]
pub struct Ball {
    pub center: Point3<f64>,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &Point3<f64>, slack: f64) -> bool {
        (p - self.center).norm_squared() <= self.radius * self.radius + slack
    }
}

fn ball2(a: &Point3<f64>, b: &Point3<f64>) -> Ball {
    let center = Point3::from(0.5 * (a.coords + b.coords));
    Ball {
        center,
        radius: (a - center).norm(),
    }
}

fn circumball3(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Ball> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let d = 2.0 * n.norm_squared();
    if d < 1e-300 {
        return None;
    }
    let rel = (ab.norm_squared() * ac.cross(&n) + ac.norm_squared() * n.cross(&ab)) / d;
    let center = a + rel;
    Some(Ball {
        center,
        radius: rel.norm(),
    })
}

fn circumball4(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    d: &Point3<f64>,
) -> Option<Ball> {
    let rows = [b - a, c - a, d - a];
    let m = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
    let rhs = 0.5
        * Vector3::new(
            rows[0].norm_squared(),
            rows[1].norm_squared(),
            rows[2].norm_squared(),
        );
    let inv = m.try_inverse()?;
    let rel = inv * rhs;
    let center = a + rel;
    Some(Ball {
        center,
        radius: rel.norm(),
    })
}

/// Smallest ball with `boundary` on its surface enclosing `pts[order[..n]]`.
fn mb_with_boundary(pts: &[Point3<f64>], order: &mut [usize], n: usize, boundary: &[Point3<f64>]) -> Ball {
    let mut ball = match boundary.len() {
        1 => Ball {
            center: boundary[0],
            radius: 0.0,
        },
        2 => ball2(&boundary[0], &boundary[1]),
        3 => circumball3(&boundary[0], &boundary[1], &boundary[2])
            .unwrap_or_else(|| ball2(&boundary[0], &boundary[2])),
        _ => {
            return circumball4(&boundary[0], &boundary[1], &boundary[2], &boundary[3])
                .unwrap_or_else(|| ball2(&boundary[0], &boundary[3]))
        }
    };
    let slack = 1e-12 * (1.0 + ball.radius * ball.radius);
    let mut i = 0;
    while i < n {
        let p = pts[order[i]];
        if !ball.contains(&p, slack) {
            let mut bnd = boundary.to_vec();
            bnd.push(p);
            ball = mb_with_boundary(pts, order, i, &bnd);
            order[..=i].rotate_right(1);
        }
        i += 1;
    }
    ball
}

/// Smallest enclosing ball of a point set; exact up to roundoff.
pub fn smallest_enclosing_ball(pts: &[Point3<f64>]) -> Ball {
    if pts.is_empty() {
        return Ball {
            center: Point3::origin(),
            radius: 0.0,
        };
    }
    let mut order: Vec<usize> = (0..pts.len()).collect();
    let mut ball = Ball {
        center: pts[0],
        radius: 0.0,
    };
    let mut i = 1;
    while i < pts.len() {
        let p = pts[order[i]];
        let slack = 1e-12 * (1.0 + ball.radius * ball.radius);
        if !ball.contains(&p, slack) {
            ball = mb_with_boundary(pts, &mut order, i, &[p]);
            order[..=i].rotate_right(1);
        }
        i += 1;
    }
    ball
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(pts: &[Point3<f64>]) -> Ball {
        // try all candidate balls defined by 2, 3, or 4 support points
        let n = pts.len();
        let mut best = Ball {
            center: pts[0],
            radius: f64::INFINITY,
        };
        let mut consider = |b: Ball| {
            let ok = pts
                .iter()
                .all(|p| (p - b.center).norm() <= b.radius + 1e-9);
            if ok && b.radius < best.radius {
                best = b;
            }
        };
        for i in 0..n {
            for j in (i + 1)..n {
                consider(ball2(&pts[i], &pts[j]));
                for k in (j + 1)..n {
                    if let Some(b) = circumball3(&pts[i], &pts[j], &pts[k]) {
                        consider(b);
                    }
                    for l in (k + 1)..n {
                        if let Some(b) = circumball4(&pts[i], &pts[j], &pts[k], &pts[l]) {
                            consider(b);
                        }
                    }
                }
            }
        }
        best
    }

    #[test]
    fn simple_cases() {
        let pts = vec![Point3::new(-1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let b = smallest_enclosing_ball(&pts);
        assert!((b.radius - 1.0).abs() < 1e-12);
        assert!(b.center.coords.norm() < 1e-12);

        let tetra = vec![
            Point3::new(1.0, 1.0, 1.0),
            Point3::new(1.0, -1.0, -1.0),
            Point3::new(-1.0, 1.0, -1.0),
            Point3::new(-1.0, -1.0, 1.0),
        ];
        let b = smallest_enclosing_ball(&tetra);
        assert!((b.radius - 3.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn ring_gives_ring_ball() {
        // points on a circle of radius 0.6 at height z = 0.8
        let pts: Vec<Point3<f64>> = (0..40)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 40.0;
                Point3::new(0.6 * a.cos(), 0.6 * a.sin(), 0.8)
            })
            .collect();
        let b = smallest_enclosing_ball(&pts);
        assert!((b.radius - 0.6 * (std::f64::consts::PI / 40.0).cos()).abs() < 1e-3);
        assert!((b.center - Point3::new(0.0, 0.0, 0.8)).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn matches_brute_force(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..10);
            let pts: Vec<Point3<f64>> = (0..n)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let fast = smallest_enclosing_ball(&pts);
            let slow = brute_force(&pts);
            prop_assert!((fast.radius - slow.radius).abs() < 1e-7,
                "fast {} vs brute {}", fast.radius, slow.radius);
            for p in &pts {
                prop_assert!((p - fast.center).norm() <= fast.radius + 1e-7);
            }
        }
    }
}
