//! Planar geometry helpers shared by the map, tagger and scenario modules.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Point, u: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * u, self.y + (o.y - self.y) * u)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Removes 2*pi jumps so consecutive headings differ by less than pi.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut prev: Option<f64> = None;
    for &a in angles {
        let v = match prev {
            None => a,
            Some(p) => p + normalize_angle(a - p),
        };
        out.push(v);
        prev = Some(v);
    }
    out
}

/// Centered moving average over a time window (`half_width` seconds each side).
pub fn moving_average(times: &[f64], values: &[f64], half_width: f64) -> Vec<f64> {
    debug_assert_eq!(times.len(), values.len());
    let n = values.len();
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        while hi < n && times[hi] <= times[i] + half_width + 1e-9 {
            hi += 1;
        }
        while times[lo] < times[i] - half_width - 1e-9 {
            lo += 1;
        }
        let window = &values[lo..hi];
        out.push(window.iter().sum::<f64>() / window.len() as f64);
    }
    out
}

/// Derivative by central differences (one-sided at the ends).
pub fn central_diff(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (values[b] - values[a]) / (times[b] - times[a])
        })
        .collect()
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length along the polyline of the foot point.
    pub station: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub offset: f64,
    /// Euclidean distance to the foot point.
    pub distance: f64,
    /// How far beyond the first or last vertex the point lies along the
    /// end segment; zero for points abeam the polyline.
    pub overshoot: f64,
    /// Direction of the segment the point projects onto.
    pub heading: f64,
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

pub fn project_onto_polyline(points: &[Point], p: Point) -> Option<Projection> {
    let mut best: Option<Projection> = None;
    let mut station = 0.0;
    let last = points.len().saturating_sub(2);
    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let ab = b.sub(a);
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            continue;
        }
        let len = len2.sqrt();
        let raw = p.sub(a).dot(ab) / len2;
        let u = raw.clamp(0.0, 1.0);
        let foot = a.lerp(b, u);
        let distance = p.dist(foot);
        let overshoot = if i == 0 && raw < 0.0 {
            -raw * len
        } else if i == last && raw > 1.0 {
            (raw - 1.0) * len
        } else {
            0.0
        };
        let offset = if overshoot > 0.0 {
            ab.cross(p.sub(a)) / len
        } else {
            let side = ab.cross(p.sub(a));
            if side >= 0.0 {
                distance
            } else {
                -distance
            }
        };
        if best.map_or(true, |bp| distance < bp.distance) {
            best = Some(Projection {
                station: station + u * len,
                offset,
                distance,
                overshoot,
                heading: ab.y.atan2(ab.x),
            });
        }
        station += len;
    }
    best
}

/// Point at arc length `station` plus a signed lateral `offset` (left positive).
pub fn point_on_polyline(points: &[Point], station: f64, offset: f64) -> Option<Point> {
    let mut acc = 0.0;
    let n = points.len();
    if n < 2 {
        return None;
    }
    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        if len == 0.0 {
            continue;
        }
        if station <= acc + len || i == n - 2 {
            let u = (station - acc) / len;
            let dir = b.sub(a).scale(1.0 / len);
            let normal = Point::new(-dir.y, dir.x);
            return Some(a.lerp(b, u).add(normal.scale(offset)));
        }
        acc += len;
    }
    None
}

/// Resamples a polyline to `n` points equally spaced in arc length.
pub fn resample_by_arc_length(points: &[Point], n: usize) -> Vec<Point> {
    if points.is_empty() || n == 0 {
        return Vec::new();
    }
    let total = polyline_length(points);
    if n == 1 || total == 0.0 {
        return vec![points[0]; n];
    }
    let mut cumulative = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        cumulative.push(acc);
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0usize;
    for k in 0..n {
        let s = total * k as f64 / (n - 1) as f64;
        while seg + 2 < points.len() && cumulative[seg + 1] < s {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let u = if span > 0.0 {
            ((s - cumulative[seg]) / span).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg].lerp(points[seg + 1], u));
    }
    out
}

/// Linear interpolation of a sampled signal at `t` (clamped to the ends).
pub fn interp(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if n == 0 {
        return f64::NAN;
    }
    if t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&x| x <= t);
    let (t0, t1) = (times[i - 1], times[i]);
    let u = (t - t0) / (t1 - t0);
    values[i - 1] + (values[i] - values[i - 1]) * u
}
