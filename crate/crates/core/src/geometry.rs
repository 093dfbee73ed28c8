//! Planar geometry in metres.

use serde::{Deserialize, Serialize};

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Point<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Self) -> F {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point a fraction `t` of the way from `self` to `other`.
    pub fn lerp(self, other: Self, t: F) -> Self {
        Self::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<F> {
    pub min: Point<F>,
    pub max: Point<F>,
}

impl<F: Real> Rect<F> {
    pub fn new(x0: F, y0: F, x1: F, y1: F) -> Self {
        Self { min: Point::new(x0.min(x1), y0.min(y1)), max: Point::new(x0.max(x1), y0.max(y1)) }
    }

    pub fn centered(c: Point<F>, width: F, height: F) -> Self {
        let two = F::one() + F::one();
        Self::new(c.x - width / two, c.y - height / two, c.x + width / two, c.y + height / two)
    }

    pub fn width(&self) -> F {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> F {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> F {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point<F>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Euclidean distance from `p` to the closest point of the rectangle.
    pub fn distance_to(&self, p: Point<F>) -> F {
        let dx = (self.min.x - p.x).max(F::zero()).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(F::zero()).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    pub fn within(&self, bounds: &Rect<F>) -> bool {
        bounds.contains(self.min) && bounds.contains(self.max)
    }
}

/// Whether a disc of radius `r` centred at `c` touches the rectangle.
pub fn disc_hits_rect<F: Real>(c: Point<F>, r: F, rect: &Rect<F>) -> bool {
    rect.distance_to(c) <= r
}

/// Whether two discs overlap (touching counts).
pub fn discs_overlap<F: Real>(a: Point<F>, ra: F, b: Point<F>, rb: F) -> bool {
    a.distance(b) <= ra + rb
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        let a = Point::new(0.0_f64, 0.0);
        let b = Point::new(3.0, 4.0);
        assert_eq!(a.distance(b), 5.0);
        assert_eq!(Point::new(0.0_f32, 0.0).distance(Point::new(3.0, 4.0)), 5.0_f32);
    }

    #[test]
    fn rect_distance() {
        let r = Rect::new(0.0_f64, 0.0, 1.0, 1.0);
        assert_eq!(r.distance_to(Point::new(0.5, 0.5)), 0.0);
        assert_eq!(r.distance_to(Point::new(2.0, 0.5)), 1.0);
        assert!((r.distance_to(Point::new(4.0, 5.0)) - 5.0).abs() < 1e-12);
        assert!(disc_hits_rect(Point::new(1.2, 0.5), 0.25, &r));
        assert!(!disc_hits_rect(Point::new(1.3, 0.5), 0.25, &r));
    }
}
