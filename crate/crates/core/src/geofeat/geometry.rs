//! Distances, local projection and the minimum enclosing circle.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed::rng_for;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Great-circle distance in kilometers between two (lat, lon) pairs in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Equirectangular projection to meters about a reference latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub origin_lat: f64,
    pub origin_lon: f64,
}

impl Projection {
    /// Centers the projection on the mean position of `latlon` pairs.
    pub fn about_mean<'a>(latlon: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for c in latlon {
            lat += c[0];
            lon += c[1];
            n += 1;
        }
        let n = n.max(1) as f64;
        Self {
            origin_lat: lat / n,
            origin_lon: lon / n,
        }
    }

    /// Returns `[east, north]` in meters.
    pub fn project(&self, lat: f64, lon: f64) -> [f64; 2] {
        let r = EARTH_RADIUS_KM * 1000.0;
        [
            r * (lon - self.origin_lon).to_radians() * self.origin_lat.to_radians().cos(),
            r * (lat - self.origin_lat).to_radians(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

const MULTIPLICATIVE_EPSILON: f64 = 1.0 + 1e-14;

impl Circle {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        dist(self.center, p) <= self.radius * MULTIPLICATIVE_EPSILON + 1e-12
    }

    fn diameter(a: [f64; 2], b: [f64; 2]) -> Self {
        let center = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        Self {
            center,
            radius: dist(center, a).max(dist(center, b)),
        }
    }

    /// Circle through three points, `None` when they are collinear.
    fn circumscribed(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<Self> {
        // Translate to the bounding-box center for precision.
        let ox = (a[0].min(b[0]).min(c[0]) + a[0].max(b[0]).max(c[0])) / 2.0;
        let oy = (a[1].min(b[1]).min(c[1]) + a[1].max(b[1]).max(c[1])) / 2.0;
        let (ax, ay) = (a[0] - ox, a[1] - oy);
        let (bx, by) = (b[0] - ox, b[1] - oy);
        let (cx, cy) = (c[0] - ox, c[1] - oy);
        let d = (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by)) * 2.0;
        if d == 0.0 {
            return None;
        }
        let a2 = ax * ax + ay * ay;
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let x = ox + (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
        let y = oy + (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
        let center = [x, y];
        let radius = dist(center, a).max(dist(center, b)).max(dist(center, c));
        Some(Self { center, radius })
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Smallest circle containing every point, by randomized incremental
/// construction. The shuffle uses a fixed seed so results are reproducible.
///
/// Returns `None` for an empty slice.
pub fn min_enclosing_circle(points: &[[f64; 2]]) -> Option<Circle> {
    if points.is_empty() {
        return None;
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut rng_for(0x5EED_C1C1E, points.len() as u64));

    let mut circle: Option<Circle> = None;
    for i in 0..pts.len() {
        if circle.is_none_or(|c| !c.contains(pts[i])) {
            circle = Some(circle_with_one(&pts[..i], pts[i]));
        }
    }
    circle
}

fn circle_with_one(pts: &[[f64; 2]], p: [f64; 2]) -> Circle {
    let mut c = Circle {
        center: p,
        radius: 0.0,
    };
    for (i, &q) in pts.iter().enumerate() {
        if !c.contains(q) {
            c = if c.radius == 0.0 {
                Circle::diameter(p, q)
            } else {
                circle_with_two(&pts[..i], p, q)
            };
        }
    }
    c
}

fn circle_with_two(pts: &[[f64; 2]], p: [f64; 2], q: [f64; 2]) -> Circle {
    let circ = Circle::diameter(p, q);
    let mut left: Option<Circle> = None;
    let mut right: Option<Circle> = None;
    for &r in pts {
        if circ.contains(r) {
            continue;
        }
        let side = cross(p, q, r);
        let Some(c) = Circle::circumscribed(p, q, r) else {
            continue;
        };
        if side > 0.0 && left.is_none_or(|l| cross(p, q, c.center) > cross(p, q, l.center)) {
            left = Some(c);
        } else if side < 0.0
            && right.is_none_or(|rt| cross(p, q, c.center) < cross(p, q, rt.center))
        {
            right = Some(c);
        }
    }
    match (left, right) {
        (None, None) => circ,
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (Some(l), Some(r)) => {
            if l.radius <= r.radius {
                l
            } else {
                r
            }
        }
    }
}

/// Radius of the smallest circle enclosing `points` given as 1-D or 2-D rows.
pub fn enclosing_radius(points: &[Vec<f64>]) -> Option<f64> {
    let pts: Vec<[f64; 2]> = points
        .iter()
        .map(|c| [c[0], c.get(1).copied().unwrap_or(0.0)])
        .collect();
    min_enclosing_circle(&pts).map(|c| c.radius)
}
