//! Axis-aligned boxes shared by the scene generator, the renderer and the
//! topometric mapper.

use serde::{Deserialize, Serialize};

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Self {
        Aabb { min, max }
    }

    pub fn from_center_extent(center: Point3, extent: Point3) -> Self {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = center[i] - extent[i] / 2.0;
            max[i] = center[i] + extent[i] / 2.0;
        }
        Aabb { min, max }
    }

    /// Tight bound of a point set, `None` when the set is empty.
    pub fn from_points<I: IntoIterator<Item = Point3>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = Aabb::new(first, first);
        for p in it {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: Point3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(other.min);
        b.include(other.max);
        b
    }

    pub fn center(&self) -> Point3 {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        ]
    }

    pub fn extent(&self) -> Point3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e[0].max(0.0) * e[1].max(0.0) * e[2].max(0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| {
            !(self.max[i] > self.min[i]) || !self.min[i].is_finite() || !self.max[i].is_finite()
        })
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_with_tolerance(&self, p: Point3, tol: f64) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - tol && p[i] <= self.max[i] + tol)
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn clamp(&self, p: Point3) -> Point3 {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
            p[2].clamp(self.min[2], self.max[2]),
        ]
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = self.min[i].max(other.min[i]);
            max[i] = self.max[i].min(other.max[i]);
            if min[i] > max[i] {
                return None;
            }
        }
        Some(Aabb { min, max })
    }

    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter = self.intersection(other).map(|b| b.volume()).unwrap_or(0.0);
        let union = self.volume() + other.volume() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Euclidean distance from `p` to the closest point of the box (0 inside).
    pub fn distance_to(&self, p: Point3) -> f64 {
        let q = self.clamp(p);
        distance(p, q)
    }

    /// Slab test. Returns the entry parameter `t > t_min` of the ray
    /// `origin + t * dir`, or the exit parameter when the origin is inside.
    pub fn ray_hit(&self, origin: Point3, dir: Point3, t_min: f64) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        if t0 > t_min {
            Some(t0)
        } else if t1 > t_min {
            Some(t1)
        } else {
            None
        }
    }
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_of_identical_and_disjoint_boxes() {
        let a = Aabb::new([0.0; 3], [1.0; 3]);
        assert!((a.iou(&a) - 1.0).abs() < 1e-12);
        let b = Aabb::new([2.0; 3], [3.0; 3]);
        assert_eq!(a.iou(&b), 0.0);
        let c = Aabb::new([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]);
        assert!((a.iou(&c) - 0.5 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn ray_hits_front_face() {
        let b = Aabb::new([2.0, -1.0, -1.0], [3.0, 1.0, 1.0]);
        let t = b.ray_hit([0.0; 3], [1.0, 0.0, 0.0], 1e-9).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(b.ray_hit([0.0; 3], [-1.0, 0.0, 0.0], 1e-9).is_none());
        assert!(b.ray_hit([0.0; 3], [0.0, 1.0, 0.0], 1e-9).is_none());
    }

    #[test]
    fn distance_is_zero_inside() {
        let b = Aabb::new([0.0; 3], [1.0; 3]);
        assert_eq!(b.distance_to([0.5; 3]), 0.0);
        assert!((b.distance_to([2.0, 0.5, 0.5]) - 1.0).abs() < 1e-12);
    }
}
