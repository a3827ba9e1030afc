//! Doubly periodic rectangle `[0, l1) x [0, l2)` sampled on a uniform grid.
//!
//! Node `(i1, i2)` sits at `(i1 * h1, i2 * h2)` and is stored at flat index
//! `i1 * n2 + i2`, so the second axis is contiguous.

use std::f64::consts::PI;

use crate::error::{NsError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
    /// Fraction of each axis' modes retained by the dealiasing mask.
    pub dealias_fraction: f64,
}

impl GridSpec {
    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        Self::with_dealias(n1, n2, l1, l2, 2.0 / 3.0)
    }

    pub fn square(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, l, l)
    }

    pub fn with_dealias(n1: usize, n2: usize, l1: f64, l2: f64, dealias_fraction: f64) -> Result<Self> {
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if n < 8 || n % 2 != 0 {
                return Err(NsError::InvalidGrid(format!("{name} = {n} must be even and >= 8")));
            }
        }
        for (name, l) in [("l1", l1), ("l2", l2)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(NsError::InvalidGrid(format!("{name} = {l} must be finite and positive")));
            }
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(NsError::InvalidGrid(format!(
                "dealias fraction {dealias_fraction} must lie in (0, 1]"
            )));
        }
        Ok(Self { n1, n2, l1, l2, dealias_fraction })
    }

    /// Same physical domain with both resolutions multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::with_dealias(self.n1 * factor, self.n2 * factor, self.l1, self.l2, self.dealias_fraction)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn h1(&self) -> f64 {
        self.l1 / self.n1 as f64
    }

    #[inline]
    pub fn h2(&self) -> f64 {
        self.l2 / self.n2 as f64
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }

    pub fn min_length(&self) -> f64 {
        self.l1.min(self.l2)
    }

    /// Largest radius allowed for balls that must not wrap onto themselves.
    pub fn max_radius(&self) -> f64 {
        self.min_length() / 4.0
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    #[inline]
    pub fn node(&self, i1: usize, i2: usize) -> Point {
        [i1 as f64 * self.h1(), i2 as f64 * self.h2()]
    }

    #[inline]
    pub fn node_of(&self, idx: usize) -> Point {
        self.node(idx / self.n2, idx % self.n2)
    }

    pub fn center(&self) -> Point {
        self.node(self.n1 / 2, self.n2 / 2)
    }

    /// Nearest grid node (periodic) to an arbitrary point.
    pub fn nearest_node(&self, p: Point) -> (usize, usize) {
        let i1 = (p[0] / self.h1()).round().rem_euclid(self.n1 as f64) as usize % self.n1;
        let i2 = (p[1] / self.h2()).round().rem_euclid(self.n2 as f64) as usize % self.n2;
        (i1, i2)
    }

    /// Signed integer mode index for FFT slot `i` of an axis with `n` points.
    #[inline]
    pub fn mode_index(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    pub fn k1(&self, i1: usize) -> f64 {
        2.0 * PI * Self::mode_index(i1, self.n1) as f64 / self.l1
    }

    #[inline]
    pub fn k2(&self, i2: usize) -> f64 {
        2.0 * PI * Self::mode_index(i2, self.n2) as f64 / self.l2
    }

    /// Wavenumber vectors for every slot, in storage order.
    pub fn wavenumbers(&self) -> Vec<[f64; 2]> {
        let k1: Vec<f64> = (0..self.n1).map(|i| self.k1(i)).collect();
        let k2: Vec<f64> = (0..self.n2).map(|i| self.k2(i)).collect();
        let mut out = Vec::with_capacity(self.len());
        for a in &k1 {
            for b in &k2 {
                out.push([*a, *b]);
            }
        }
        out
    }

    /// True for slots carrying the Nyquist frequency on either axis.
    #[inline]
    pub fn is_nyquist(&self, i1: usize, i2: usize) -> bool {
        i1 == self.n1 / 2 || i2 == self.n2 / 2
    }

    /// Two-thirds style mask: keep slots whose integer index magnitude lies
    /// below `dealias_fraction * n / 2` on both axes.
    pub fn dealias_mask(&self) -> Vec<bool> {
        let c1 = self.dealias_fraction * self.n1 as f64 / 2.0;
        let c2 = self.dealias_fraction * self.n2 as f64 / 2.0;
        let mut mask = Vec::with_capacity(self.len());
        for i1 in 0..self.n1 {
            let m1 = Self::mode_index(i1, self.n1).unsigned_abs() as f64;
            for i2 in 0..self.n2 {
                let m2 = Self::mode_index(i2, self.n2).unsigned_abs() as f64;
                mask.push(m1 < c1 && m2 < c2 && !self.is_nyquist(i1, i2));
            }
        }
        mask
    }

    /// Minimum-image displacement `a - b` on the torus.
    #[inline]
    pub fn min_image(&self, a: Point, b: Point) -> Point {
        [wrap(a[0] - b[0], self.l1), wrap(a[1] - b[1], self.l2)]
    }

    /// Minimum-image displacement represented by FFT slot `(i1, i2)`.
    #[inline]
    pub fn displacement(&self, i1: usize, i2: usize) -> Point {
        [
            Self::mode_index(i1, self.n1) as f64 * self.h1(),
            Self::mode_index(i2, self.n2) as f64 * self.h2(),
        ]
    }
}

/// Reduce `d` into `[-l/2, l/2)`.
#[inline]
pub fn wrap(d: f64, l: f64) -> f64 {
    d - l * (d / l + 0.5).floor()
}

#[inline]
pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(GridSpec::new(6, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(9, 8, 1.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 0.0, 1.0).is_err());
        assert!(GridSpec::new(8, 8, 1.0, f64::NAN).is_err());
        assert!(GridSpec::new(8, 8, 1.0, 1.0).is_ok());
    }

    #[test]
    fn wavenumbers_are_centered() {
        let g = GridSpec::square(8, 2.0 * PI).unwrap();
        let ks: Vec<f64> = (0..8).map(|i| g.k1(i)).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn wrap_maps_into_half_open_window() {
        assert_eq!(wrap(0.75, 1.0), -0.25);
        assert_eq!(wrap(-0.5, 1.0), -0.5);
        assert_eq!(wrap(0.5, 1.0), -0.5);
        assert!((wrap(2.3, 1.0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn dealias_mask_keeps_two_thirds() {
        let g = GridSpec::square(12, 1.0).unwrap();
        let mask = g.dealias_mask();
        let kept: Vec<i64> = (0..12).filter(|&i| mask[g.index(i, 0)]).map(|i| GridSpec::mode_index(i, 12)).collect();
        assert_eq!(kept, vec![0, 1, 2, 3, -3, -2, -1]);
    }
}
