//! Quantizer cells as convex polygons and their probability under an
//! isotropic Gaussian.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::math::{self, GaussLegendre};
use crate::Point;

pub type Polygon = Vec<Point>;

/// Keeps the part of `poly` where `normal . p <= offset`.
pub fn clip_half_plane(poly: &[Point], normal: Point, offset: f64) -> Polygon {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let fa = normal.dot(a) - offset;
        let fb = normal.dot(b) - offset;
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push(a + (b - a) * t);
        }
    }
    out
}

/// Axis-aligned square `[-half, half]^2`, counter-clockwise.
pub fn square(half: f64) -> Polygon {
    alloc::vec![
        Point::new(-half, -half),
        Point::new(half, -half),
        Point::new(half, half),
        Point::new(-half, half),
    ]
}

/// Voronoi cell of `points[site]` among `points[members]`, clipped to the
/// square of half-width `half`.
pub fn voronoi_cell(points: &[Point], members: &[usize], site: usize, half: f64) -> Polygon {
    let p = points[site];
    let mut poly = square(half);
    for &m in members {
        if m == site {
            continue;
        }
        let q = points[m];
        // |y-p|^2 <= |y-q|^2  <=>  2 (q-p).y <= |q|^2 - |p|^2
        let normal = (q - p) * 2.0;
        let offset = q.norm_sqr() - p.norm_sqr();
        poly = clip_half_plane(&poly, normal, offset);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

/// Signed area (positive for counter-clockwise).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum::<f64>() * 0.5
}

/// Probability mass of isotropic Gaussians over convex polygons.
#[derive(Clone, Debug)]
pub struct GaussianMass {
    gl: GaussLegendre,
    panels: usize,
}

impl Default for GaussianMass {
    fn default() -> Self {
        Self {
            gl: GaussLegendre::new(20),
            panels: 4,
        }
    }
}

impl GaussianMass {
    /// `(1/2pi) * integral_0^theta exp(-h^2 / (2 cos^2 phi)) dphi` for
    /// `0 <= theta < pi/2` (Owen's T in angular form).
    fn owen_t(&self, h: f64, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if h > 40.0 {
            return 0.0;
        }
        let h2 = 0.5 * h * h;
        let v = self.gl.integrate(0.0, theta, self.panels, |phi| {
            let c = math::cos(phi);
            if c <= 0.0 {
                0.0
            } else {
                math::exp(-h2 / (c * c))
            }
        });
        v / (2.0 * PI)
    }

    /// Mass of a counter-clockwise convex polygon under a Gaussian with the
    /// given mean and per-dimension standard deviation.
    pub fn polygon(&self, poly: &[Point], mean: Point, sigma: f64) -> f64 {
        let n = poly.len();
        if n < 3 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            let a = poly[i] - mean;
            let b = poly[(i + 1) % n] - mean;
            total += self.wedge(a, b, sigma);
        }
        total.clamp(0.0, 1.0)
    }

    /// Signed mass of the triangle (origin, a, b).
    fn wedge(&self, a: Point, b: Point, sigma: f64) -> f64 {
        let e = b - a;
        let len2 = e.norm_sqr();
        if len2 == 0.0 {
            return 0.0;
        }
        // foot of the perpendicular from the origin onto the edge line
        let t = -a.dot(e) / len2;
        let foot = a + e * t;
        let d = foot.norm();
        let scale = a.norm().max(b.norm());
        if d <= 1e-14 * scale {
            return 0.0;
        }
        let u = foot * (1.0 / d);
        let v = Point::new(-u.im, u.re);
        let ang = |p: Point| math::atan2(p.dot(v), p.dot(u)).clamp(-FRAC_PI_2, FRAC_PI_2);
        let h = d / sigma;
        let g = |theta: f64| {
            let tt = self.owen_t(h, theta.abs());
            theta / (2.0 * PI) - if theta < 0.0 { -tt } else { tt }
        };
        g(ang(b)) - g(ang(a))
    }
}

/// Mass of `[lo, hi]` under a scalar normal.
pub fn interval_mass(lo: f64, hi: f64, mean: f64, sigma: f64) -> f64 {
    let z = |x: f64| {
        if x == f64::INFINITY {
            1.0
        } else if x == f64::NEG_INFINITY {
            0.0
        } else {
            math::normal_cdf((x - mean) / sigma)
        }
    };
    // use the upper tail when both ends are above the mean for accuracy
    if lo > mean {
        let q = |x: f64| if x == f64::INFINITY { 0.0 } else { 0.5 * math::erfc((x - mean) / (sigma * core::f64::consts::SQRT_2)) };
        (q(lo) - q(hi)).max(0.0)
    } else {
        (z(hi) - z(lo)).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_half_plane_masses() {
        let gm = GaussianMass::default();
        let big = square(60.0);
        assert!((gm.polygon(&big, Point::new(0.3, -0.2), 1.0) - 1.0).abs() < 1e-12);
        // right half plane
        let half = clip_half_plane(&big, Point::new(-1.0, 0.0), 0.0);
        assert!((gm.polygon(&half, Point::ZERO, 1.0) - 0.5).abs() < 1e-12);
        // quadrant shifted away from the mean: product of normal cdfs
        let quad = clip_half_plane(&clip_half_plane(&big, Point::new(-1.0, 0.0), -0.7), Point::new(0.0, -1.0), 0.4);
        let want = (1.0 - math::normal_cdf(0.7)) * (1.0 - math::normal_cdf(-0.4));
        assert!((gm.polygon(&quad, Point::ZERO, 1.0) - want).abs() < 1e-10);
    }

    #[test]
    fn rectangle_matches_product_of_intervals() {
        let gm = GaussianMass::default();
        let rect = alloc::vec![
            Point::new(-0.5, 0.2),
            Point::new(1.5, 0.2),
            Point::new(1.5, 2.0),
            Point::new(-0.5, 2.0),
        ];
        let (mu, s) = (Point::new(0.1, 0.9), 0.7);
        let want = interval_mass(-0.5, 1.5, mu.re, s) * interval_mass(0.2, 2.0, mu.im, s);
        assert!((gm.polygon(&rect, mu, s) - want).abs() < 1e-10);
    }

    #[test]
    fn voronoi_cells_tile() {
        let pts: Vec<Point> = (0..7).map(|i| Point::new(math::cos(i as f64), math::sin(2.0 * i as f64))).collect();
        let members: Vec<usize> = (0..7).collect();
        let total: f64 = members.iter().map(|&s| polygon_area(&voronoi_cell(&pts, &members, s, 10.0))).sum();
        assert!((total - 400.0).abs() < 1e-9);
    }
}
