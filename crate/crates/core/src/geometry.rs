//! Planar points, axis-aligned rectangles and perimeter queries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Moves from `self` toward `target` by at most `step`.
    pub fn toward(self, target: Point, step: f64) -> Point {
        let d = self.distance(target);
        if d <= step || d == 0.0 {
            target
        } else {
            let f = step / d;
            Point::new(
                self.x + f * (target.x - self.x),
                self.y + f * (target.y - self.y),
            )
        }
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
///
/// A rectangle with zero width or height is empty: it is what a robot with
/// no workload holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    pub fn from_origin(origin: Point, width: f64, height: f64) -> Self {
        Rect::new(origin, Point::new(origin.x + width, origin.y + height))
    }

    /// Degenerate rectangle at `at`.
    pub fn empty_at(at: Point) -> Self {
        Rect::new(at, at)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.width() * self.height()
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Corners in counterclockwise order starting at the bottom-left.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }

    /// Edges as (start, end) pairs, counterclockwise from the bottom edge.
    pub fn edges(&self) -> [(Point, Point); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }
}

pub fn perimeter(region: &Rect) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(2.0 * (region.width() + region.height()))
}

/// Euclidean distance from `point` to the perimeter of `region`, whether the
/// point lies inside or outside.
pub fn boundary_distance(point: Point, region: &Rect) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if region.contains(point) {
        Ok((point.x - region.min.x)
            .min(region.max.x - point.x)
            .min(point.y - region.min.y)
            .min(region.max.y - point.y))
    } else {
        let dx = (region.min.x - point.x)
            .max(0.0)
            .max(point.x - region.max.x);
        let dy = (region.min.y - point.y)
            .max(0.0)
            .max(point.y - region.max.y);
        Ok(dx.hypot(dy))
    }
}

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

/// Closest point of the perimeter of a non-empty `region` to `point`.
pub fn nearest_perimeter_point(point: Point, region: &Rect) -> Point {
    if !region.contains(point) {
        return Point::new(
            point.x.clamp(region.min.x, region.max.x),
            point.y.clamp(region.min.y, region.max.y),
        );
    }
    let candidates = [
        (point.y - region.min.y, Point::new(point.x, region.min.y)),
        (region.max.x - point.x, Point::new(region.max.x, point.y)),
        (region.max.y - point.y, Point::new(point.x, region.max.y)),
        (point.x - region.min.x, Point::new(region.min.x, point.y)),
    ];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    best.1
}

/// Counterclockwise arc length from the bottom-left corner to `point`, which
/// must lie on the perimeter (it is projected onto it first).
pub fn arc_coordinate(point: Point, region: &Rect) -> f64 {
    let p = nearest_perimeter_point(point, region);
    let (w, h) = (region.width(), region.height());
    let eps = 1e-12 * (1.0 + w + h);
    if (p.y - region.min.y).abs() <= eps && p.x < region.max.x {
        p.x - region.min.x
    } else if (p.x - region.max.x).abs() <= eps && p.y < region.max.y {
        w + (p.y - region.min.y)
    } else if (p.y - region.max.y).abs() <= eps && p.x > region.min.x {
        w + h + (region.max.x - p.x)
    } else {
        2.0 * w + h + (region.max.y - p.y)
    }
}

/// Point at counterclockwise arc length `s` (taken modulo the perimeter).
pub fn point_at_arc(region: &Rect, s: f64) -> Point {
    let (w, h) = (region.width(), region.height());
    let p = 2.0 * (w + h);
    let s = s.rem_euclid(p);
    if s < w {
        Point::new(region.min.x + s, region.min.y)
    } else if s < w + h {
        Point::new(region.max.x, region.min.y + (s - w))
    } else if s < 2.0 * w + h {
        Point::new(region.max.x - (s - w - h), region.max.y)
    } else {
        Point::new(region.min.x, region.max.y - (s - 2.0 * w - h))
    }
}

/// Index (0..4) of the corner a counterclockwise traveller at arc length `s`
/// is heading to.
pub fn next_corner_index(region: &Rect, s: f64) -> usize {
    let (w, h) = (region.width(), region.height());
    let s = s.rem_euclid(2.0 * (w + h));
    if s < w {
        1
    } else if s < w + h {
        2
    } else if s < 2.0 * w + h {
        3
    } else {
        0
    }
}
