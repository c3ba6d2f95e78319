use core::ops::{Add, AddAssign, Mul, Neg, Sub};
use serde::{Deserialize, Serialize};

/// A point in the real plane, used for constellation symbols, channel
/// observations and reconstruction values alike.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
}

impl Point {
    pub const ZERO: Point = Point { re: 0.0, im: 0.0 };

    #[inline]
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    #[inline]
    pub fn norm(self) -> f64 {
        crate::math::sqrt(self.norm_sqr())
    }

    #[inline]
    pub fn dist_sqr(self, other: Point) -> f64 {
        (self - other).norm_sqr()
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.re * other.re + self.im * other.im
    }

    /// z-component of the 3-D cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.re * other.im - self.im * other.re
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = (crate::math::sin(angle), crate::math::cos(angle));
        Point::new(c * self.re - s * self.im, s * self.re + c * self.im)
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl AddAssign for Point {
    #[inline]
    fn add_assign(&mut self, rhs: Point) {
        self.re += rhs.re;
        self.im += rhs.im;
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.re * rhs, self.im * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.re, -self.im)
    }
}
