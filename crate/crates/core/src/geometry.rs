//! Planar geometry: vectors, polylines with arc-length parametrization, and
//! oriented bounding boxes.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_heading(heading: f64) -> Self {
        Vec2::new(heading.cos(), heading.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle in radians into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Wraps degrees into [0, 360).
pub fn wrap_degrees(a: f64) -> f64 {
    let r = a.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Wraps degrees into (-180, 180].
pub fn wrap_degrees_signed(a: f64) -> f64 {
    let r = wrap_degrees(a);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest point.
    pub s: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Polyline {
    /// Drops repeated vertices; returns `None` for fewer than two distinct points.
    pub fn new(points: Vec<Vec2>) -> Option<Self> {
        let mut pts: Vec<Vec2> = Vec::with_capacity(points.len());
        for p in points {
            if pts.last().map_or(true, |q: &Vec2| q.distance(p) > 1e-9) {
                pts.push(p);
            }
        }
        if pts.len() < 2 {
            return None;
        }
        let mut cumulative = Vec::with_capacity(pts.len());
        cumulative.push(0.0);
        for w in pts.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + w[0].distance(w[1]));
        }
        Some(Polyline { points: pts, cumulative })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn start(&self) -> Vec2 {
        self.points[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cumulative.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Point at arc length `s`; extrapolates linearly beyond either end.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let i = self.segment_at(s);
        let a = self.points[i];
        let b = self.points[i + 1];
        let len = self.cumulative[i + 1] - self.cumulative[i];
        a + (b - a) * ((s - self.cumulative[i]) / len)
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        let i = self.segment_at(s);
        (self.points[i + 1] - self.points[i]).heading()
    }

    pub fn start_heading(&self) -> f64 {
        (self.points[1] - self.points[0]).heading()
    }

    pub fn end_heading(&self) -> f64 {
        let n = self.points.len();
        (self.points[n - 1] - self.points[n - 2]).heading()
    }

    /// Closest point over all segments; ties go to the smaller arc length.
    pub fn project(&self, p: Vec2) -> Projection {
        self.project_within(p, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Closest point among the segments overlapping arc lengths `[s0, s1]`.
    pub fn project_within(&self, p: Vec2, s0: f64, s1: f64) -> Projection {
        let n = self.points.len() - 1;
        let first = if s0 <= 0.0 { 0 } else { self.segment_at(s0) };
        let last = if s1 >= self.length() { n - 1 } else { self.segment_at(s1).max(first) };
        let mut best: Option<Projection> = None;
        for i in first..=last {
            let a = self.points[i];
            let b = self.points[i + 1];
            let d = b - a;
            let len2 = d.dot(d);
            let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
            let q = a + d * t;
            let dist = p.distance(q);
            if best.map_or(true, |bp| dist < bp.distance - 1e-12) {
                let lateral = d.normalized().cross(p - q);
                let lateral = if dist < 1e-12 { 0.0 } else { lateral.signum() * dist };
                best = Some(Projection {
                    s: self.cumulative[i] + t * len2.sqrt(),
                    lateral,
                    distance: dist,
                });
            }
        }
        best.unwrap()
    }

    /// Parallel curve shifted `d` meters to the left (negative: right), with
    /// mitred vertices.
    pub fn offset(&self, d: f64) -> Polyline {
        if d == 0.0 {
            return self.clone();
        }
        let n = self.points.len();
        let dirs: Vec<Vec2> = self.points.windows(2).map(|w| (w[1] - w[0]).normalized()).collect();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let normal = if i == 0 {
                dirs[0].perp()
            } else if i == n - 1 {
                dirs[n - 2].perp()
            } else {
                let a = dirs[i - 1].perp();
                let b = dirs[i].perp();
                let m = (a + b).normalized();
                // mitre length, capped for sharp corners
                m * (1.0 / m.dot(a).max(0.25))
            };
            out.push(self.points[i] + normal * d);
        }
        Polyline::new(out).expect("offset of a valid polyline is valid")
    }

    pub fn reversed(&self) -> Polyline {
        let mut pts = self.points.clone();
        pts.reverse();
        Polyline::new(pts).unwrap()
    }

    /// Sub-curve between arc lengths `s0 < s1` (clamped to the curve).
    pub fn slice(&self, s0: f64, s1: f64) -> Option<Polyline> {
        let s0 = s0.clamp(0.0, self.length());
        let s1 = s1.clamp(0.0, self.length());
        if s1 - s0 < 1e-9 {
            return None;
        }
        let mut pts = vec![self.point_at(s0)];
        for (i, &c) in self.cumulative.iter().enumerate() {
            if c > s0 && c < s1 {
                pts.push(self.points[i]);
            }
        }
        pts.push(self.point_at(s1));
        Polyline::new(pts)
    }

    /// Concatenation; a duplicated joint vertex is dropped.
    pub fn concat(parts: &[&Polyline]) -> Option<Polyline> {
        let mut pts = Vec::new();
        for p in parts {
            pts.extend_from_slice(&p.points);
        }
        Polyline::new(pts)
    }

    pub fn total_turn(&self) -> f64 {
        self.points
            .windows(3)
            .map(|w| wrap_angle((w[2] - w[1]).heading() - (w[1] - w[0]).heading()))
            .sum()
    }
}

/// Sample spacing (m) of generated curves. Lateral offsets measured against
/// the polyline carry chord errors of about `spacing² / 8r`.
pub const CURVE_SPACING: f64 = 0.2;

/// Cubic Bezier from `p0` leaving along `h0` to `p3` arriving along `h3`,
/// sampled every [`CURVE_SPACING`] or finer.
pub fn bezier_connector(p0: Vec2, h0: f64, p3: Vec2, h3: f64) -> Vec<Vec2> {
    let k = (0.4 * p0.distance(p3)).max(6.0);
    let p1 = p0 + Vec2::from_heading(h0) * k;
    let p2 = p3 - Vec2::from_heading(h3) * k;
    // the control polygon bounds the curve length
    let hull = p0.distance(p1) + p1.distance(p2) + p2.distance(p3);
    let n = ((hull / CURVE_SPACING).ceil() as usize).max(16);
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let u = 1.0 - t;
            p0 * (u * u * u) + p1 * (3.0 * u * u * t) + p2 * (3.0 * u * t * t) + p3 * (t * t * t)
        })
        .collect()
}

/// Keyhole turnaround: from `p0` heading `h0` to the point `w` meters to the
/// left, heading the opposite way. Runs straight for half of
/// [`KEYHOLE_BLEND`], swings right, loops left on radius `r`, swings right
/// again and runs straight back out. The whole path is then smoothed over
/// [`KEYHOLE_BLEND`] so that the curvature ramps instead of stepping.
pub fn uturn_keyhole(p0: Vec2, h0: f64, w: f64, r: f64) -> Vec<Vec2> {
    let spacing = CURVE_SPACING / 2.0;
    let half = (KEYHOLE_BLEND / (2.0 * spacing)).round() as usize;
    let fwd = Vec2::from_heading(h0);
    let end = p0 + fwd.perp() * w;
    let along = |from: Vec2, j: isize| from + fwd * (j as f64 * spacing);
    let h = half as isize;
    // run-in and run-out of twice the half-window; the outer halves only
    // feed the average and are cut off again
    let mut pts: Vec<Vec2> = (-h..h).map(|j| along(p0, j)).collect();
    pts.extend(keyhole_arcs(along(p0, h), h0, w, r, spacing));
    pts.extend((1..=2 * h).map(|j| along(end, h - j)));
    let smooth = moving_average(&pts, half);
    let mut out = smooth[half..smooth.len() - half].to_vec();
    out[0] = p0;
    *out.last_mut().expect("non-empty") = end;
    out
}

/// Length (m) over which the keyhole's curvature changes are spread.
pub const KEYHOLE_BLEND: f64 = 4.0;

/// Centered moving average over `2·half + 1` points, with the window shrunk
/// near the ends.
fn moving_average(pts: &[Vec2], half: usize) -> Vec<Vec2> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let k = half.min(i).min(n - 1 - i);
            let sum = pts[i - k..=i + k].iter().fold(Vec2::new(0.0, 0.0), |acc, &p| acc + p);
            sum * (1.0 / (2 * k + 1) as f64)
        })
        .collect()
}

fn keyhole_arcs(p0: Vec2, h0: f64, w: f64, r: f64, spacing: f64) -> Vec<Vec2> {
    let cos_phi = ((w / (2.0 * r)) + 1.0) / 2.0;
    let phi = cos_phi.clamp(-1.0, 1.0).acos();
    let fwd = Vec2::from_heading(h0);
    let left = fwd.perp();
    let local = |x: f64, y: f64| p0 + fwd * x + left * y;
    let mut pts = Vec::new();
    let steps = ((r * phi / spacing).ceil() as usize).max(8);
    // first right-hand arc, centre at (0, -r)
    for i in 0..=steps {
        let a = phi * i as f64 / steps as f64;
        pts.push(local(r * a.sin(), -r * (1.0 - a.cos())));
    }
    // big left-hand loop around (2 r sin phi, w / 2)
    let cx = 2.0 * r * phi.sin();
    let cy = w / 2.0;
    let big = std::f64::consts::PI + 2.0 * phi;
    let start = -std::f64::consts::FRAC_PI_2 - phi;
    let loop_steps = ((r * big / spacing).ceil() as usize).max(3 * steps);
    for i in 1..=loop_steps {
        let a = start + big * i as f64 / loop_steps as f64;
        pts.push(local(cx + r * a.cos(), cy + r * a.sin()));
    }
    // closing right-hand arc, mirror of the first
    for i in (0..steps).rev() {
        let a = phi * i as f64 / steps as f64;
        pts.push(local(r * a.sin(), w + r * (1.0 - a.cos())));
    }
    pts
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| a.distance(*b) < 1e-9);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn point_in_convex(poly: &[Vec2], p: Vec2) -> bool {
    if poly.len() < 3 {
        return false;
    }
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b - a).cross(p - a) >= -1e-9
    })
}

/// Oriented rectangle centred at `center`, long axis along `heading`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Obb {
            center,
            heading,
            half_length: length / 2.0,
            half_width: width / 2.0,
        }
    }

    pub fn axes(&self) -> [Vec2; 2] {
        let u = Vec2::from_heading(self.heading);
        [u, u.perp()]
    }

    /// Counter-clockwise, starting front-left.
    pub fn corners(&self) -> [Vec2; 4] {
        let [u, v] = self.axes();
        let l = u * self.half_length;
        let w = v * self.half_width;
        [
            self.center + l + w,
            self.center - l + w,
            self.center - l - w,
            self.center + l - w,
        ]
    }

    fn extent_on(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.dot(axis);
        let [u, v] = self.axes();
        let r = self.half_length * u.dot(axis).abs() + self.half_width * v.dot(axis).abs();
        (c - r, c + r)
    }

    /// Separating-axis test; touching boxes do not overlap.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let axes = self.axes().into_iter().chain(other.axes());
        for axis in axes {
            let (a0, a1) = self.extent_on(axis);
            let (b0, b1) = other.extent_on(axis);
            if a1 <= b0 || b1 <= a0 {
                return false;
            }
        }
        true
    }

    /// Minimum surface-to-surface distance, 0 when overlapping.
    pub fn distance(&self, other: &Obb) -> f64 {
        if self.overlaps(other) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            for j in 0..4 {
                let d = segment_distance(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4]);
                best = best.min(d);
            }
        }
        best
    }
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let t = ((p - a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
    p.distance(a + d * t)
}

fn segment_distance(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let denom = d1.cross(d2);
    if denom.abs() > 1e-12 {
        let t = (b0 - a0).cross(d2) / denom;
        let u = (b0 - a0).cross(d1) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return 0.0;
        }
    }
    point_segment_distance(a0, b0, b1)
        .min(point_segment_distance(a1, b0, b1))
        .min(point_segment_distance(b0, a0, a1))
        .min(point_segment_distance(b1, a0, a1))
}
