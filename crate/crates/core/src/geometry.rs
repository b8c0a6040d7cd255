//! Exact planar geometry on spacetime cells `(i, t)`: directions, convex
//! hulls, scaled polygons and Hausdorff distance.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Point = (BigRational, BigRational);

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// A line through the origin in the `(i, t)` plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line {
    /// The time axis `i = 0`.
    Vertical,
    /// `t = s · i`; slope 0 is the space axis.
    Slope(BigRational),
}

/// A line thickened to the closed band of points within distance `thickness`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Direction {
    pub line: Line,
    pub thickness: BigRational,
}

impl Direction {
    pub fn vertical(thickness: BigRational) -> Self {
        Self {
            line: Line::Vertical,
            thickness,
        }
    }

    pub fn slope(s: BigRational, thickness: BigRational) -> Self {
        Self {
            line: Line::Slope(s),
            thickness,
        }
    }

    /// The line `d·t + i = 0`, along which `σ^d` is not expansive.
    pub fn shift_line(d: i64, thickness: BigRational) -> Self {
        if d == 0 {
            Self::vertical(thickness)
        } else {
            Self::slope(rat(-1, d), thickness)
        }
    }

    /// Exact test `dist((i, t), line) ≤ thickness`.
    pub fn contains(&self, i: i64, t: i64) -> bool {
        let r2 = &self.thickness * &self.thickness;
        match &self.line {
            Line::Vertical => int(i * i) <= r2,
            Line::Slope(s) => {
                let e = int(t) - s * int(i);
                e.clone() * e <= r2 * (int(1) + s * s)
            }
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.line {
            Line::Vertical => write!(f, "vertical (r = {})", self.thickness),
            Line::Slope(s) => write!(f, "slope {} (r = {})", s, self.thickness),
        }
    }
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i128 {
    (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
}

/// Counter-clockwise hull without collinear points (monotone chain).
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// A convex polygon with exact vertices in counter-clockwise order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Hull of integer points, scaled by `1/n`.
    pub fn scaled_hull(points: &[(i64, i64)], n: i64) -> Self {
        let s = rat(1, n);
        Self {
            vertices: convex_hull(points)
                .into_iter()
                .map(|(x, y)| (int(x) * &s, int(y) * &s))
                .collect(),
        }
    }

    /// The `ℓ¹` ball scaled by `r`: vertices `(±r, 0)`, `(0, ±r)`.
    pub fn diamond(r: BigRational) -> Self {
        let z = BigRational::zero();
        Self {
            vertices: vec![
                (r.clone(), z.clone()),
                (z.clone(), r.clone()),
                (-r.clone(), z.clone()),
                (z, -r),
            ],
        }
    }

    /// Closed containment.
    pub fn contains(&self, p: &Point) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => v[0] == *p,
            2 => on_segment(&v[0], &v[1], p),
            k => (0..k).all(|j| {
                let a = &v[j];
                let b = &v[(j + 1) % k];
                (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0) >= BigRational::zero()
            }),
        }
    }

    pub fn contains_polygon(&self, other: &Polygon) -> bool {
        other.vertices.iter().all(|p| self.contains(p))
    }

    /// Squared distance from `p` to the closed region.
    pub fn dist_sq(&self, p: &Point) -> BigRational {
        if self.contains(p) {
            return BigRational::zero();
        }
        let v = &self.vertices;
        let k = v.len();
        if k == 1 {
            return dist_sq(&v[0], p);
        }
        (0..k)
            .map(|j| seg_dist_sq(&v[j], &v[(j + 1) % k], p))
            .min()
            .expect("nonempty polygon")
    }

    /// Exact squared Hausdorff distance; attained at vertices for convex sets.
    pub fn hausdorff_sq(&self, other: &Polygon) -> BigRational {
        let one = self.vertices.iter().map(|p| other.dist_sq(p));
        let two = other.vertices.iter().map(|p| self.dist_sq(p));
        one.chain(two).max().unwrap_or_else(BigRational::zero)
    }

    pub fn hausdorff(&self, other: &Polygon) -> f64 {
        self.hausdorff_sq(other).to_f64().unwrap_or(f64::INFINITY).sqrt()
    }

    /// One `x_num/x_den,y_num/y_den` line per vertex.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for (x, y) in &self.vertices {
            s.push_str(&format!("{}/{},{}/{}\n", x.numer(), x.denom(), y.numer(), y.denom()));
        }
        s
    }
}

fn dist_sq(a: &Point, b: &Point) -> BigRational {
    let dx = &a.0 - &b.0;
    let dy = &a.1 - &b.1;
    &dx * &dx + &dy * &dy
}

fn seg_dist_sq(a: &Point, b: &Point, p: &Point) -> BigRational {
    let dx = &b.0 - &a.0;
    let dy = &b.1 - &a.1;
    let len = &dx * &dx + &dy * &dy;
    if len.is_zero() {
        return dist_sq(a, p);
    }
    let mut u = ((&p.0 - &a.0) * &dx + (&p.1 - &a.1) * &dy) / len;
    if u.is_negative() {
        u = BigRational::zero();
    } else if u > int(1) {
        u = int(1);
    }
    let q = (&a.0 + &u * &dx, &a.1 + &u * &dy);
    dist_sq(&q, p)
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    let cr = (&b.0 - &a.0) * (&p.1 - &a.1) - (&b.1 - &a.1) * (&p.0 - &a.0);
    cr.is_zero()
        && (&p.0 - &a.0) * (&p.0 - &b.0) <= BigRational::zero()
        && (&p.1 - &a.1) * (&p.1 - &b.1) <= BigRational::zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior() {
        let pts = [(0, 0), (2, 0), (2, 2), (0, 2), (1, 1), (1, 0)];
        assert_eq!(convex_hull(&pts), vec![(0, 0), (2, 0), (2, 2), (0, 2)]);
    }

    #[test]
    fn diamond_contains_and_excludes() {
        let d = Polygon::diamond(int(1));
        assert!(d.contains(&(rat(1, 2), rat(1, 2))));
        assert!(!d.contains(&(rat(3, 4), rat(1, 2))));
        assert!(d.contains(&(int(-1), int(0))));
    }

    #[test]
    fn hausdorff_between_nested_diamonds() {
        let a = Polygon::diamond(int(1));
        let b = Polygon::diamond(int(2));
        assert_eq!(a.hausdorff_sq(&b), int(1));
        assert_eq!(a.hausdorff_sq(&a), int(0));
    }

    #[test]
    fn bands() {
        let v = Direction::vertical(int(1));
        assert!(v.contains(1, 100));
        assert!(!v.contains(2, 0));
        let s = Direction::shift_line(1, rat(1, 2));
        assert!(s.contains(-5, 5));
        assert!(!s.contains(5, 5));
        let h = Direction::slope(int(0), int(1));
        assert!(h.contains(50, 1));
        assert!(!h.contains(0, 2));
    }

    #[test]
    fn export_format() {
        let p = Polygon::new(vec![(rat(1, 2), int(0))]);
        assert_eq!(p.export(), "1/2,0/1\n");
    }
}
