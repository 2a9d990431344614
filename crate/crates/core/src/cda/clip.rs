//! Intersection of a triangle with an axis-aligned rectangle.

use crate::mesh::{signed_area, Point};

fn clip_half_plane(poly: &[Point], inside: impl Fn(Point) -> f64) -> Vec<Point> {
    // `inside(p) >= 0` keeps p; the boundary is where the signed function is zero.
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (fa, fb) = (inside(a), inside(b));
        if fa >= 0.0 {
            out.push(a);
        }
        if (fa >= 0.0) != (fb >= 0.0) {
            let t = fa / (fa - fb);
            out.push(Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
        }
    }
    out
}

/// Sutherland-Hodgman clip of a counter-clockwise triangle against
/// `[x0, x1] × [y0, y1]`, fan-triangulated. Empty when they do not overlap.
pub fn clip_triangle(tri: [Point; 3], x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[Point; 3]> {
    let mut poly = tri.to_vec();
    poly = clip_half_plane(&poly, |p| p.x - x0);
    if poly.len() >= 3 {
        poly = clip_half_plane(&poly, |p| x1 - p.x);
    }
    if poly.len() >= 3 {
        poly = clip_half_plane(&poly, |p| p.y - y0);
    }
    if poly.len() >= 3 {
        poly = clip_half_plane(&poly, |p| y1 - p.y);
    }
    if poly.len() < 3 {
        return Vec::new();
    }
    (1..poly.len() - 1)
        .map(|k| [poly[0], poly[k], poly[k + 1]])
        .filter(|t| signed_area(t[0], t[1], t[2]) > 0.0)
        .collect()
}
