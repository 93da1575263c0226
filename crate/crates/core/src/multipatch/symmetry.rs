//! The dihedral group of the unit square.

use serde::{Deserialize, Serialize};

/// Maps standardized coordinates `(u, v)` to native coordinates `(ξ1, ξ2)`:
/// first the axes are optionally swapped, then each native axis is
/// optionally reversed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SquareSymmetry {
    pub swap: bool,
    pub flip1: bool,
    pub flip2: bool,
}

impl SquareSymmetry {
    pub const IDENTITY: Self = Self {
        swap: false,
        flip1: false,
        flip2: false,
    };

    pub fn all() -> [Self; 8] {
        let mut out = [Self::IDENTITY; 8];
        for (n, s) in out.iter_mut().enumerate() {
            *s = Self {
                swap: n & 4 != 0,
                flip1: n & 2 != 0,
                flip2: n & 1 != 0,
            };
        }
        out
    }

    /// Whether the map keeps orientation (an even number of reflections).
    pub fn preserves_orientation(&self) -> bool {
        !(self.swap ^ self.flip1 ^ self.flip2)
    }

    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let (a, b) = if self.swap { (v, u) } else { (u, v) };
        (
            if self.flip1 { 1.0 - a } else { a },
            if self.flip2 { 1.0 - b } else { b },
        )
    }

    pub fn inverse(&self) -> Self {
        if self.swap {
            Self {
                swap: true,
                flip1: self.flip2,
                flip2: self.flip1,
            }
        } else {
            *self
        }
    }

    /// `self ∘ other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &Self) -> Self {
        // Determine the composite from its action on the two axis points.
        let f = |u, v| {
            let (a, b) = other.apply(u, v);
            self.apply(a, b)
        };
        let o = f(0.0, 0.0);
        let e1 = f(1.0, 0.0);
        let swap = e1.0 == o.0;
        Self {
            swap,
            flip1: o.0 == 1.0,
            flip2: o.1 == 1.0,
        }
    }

    /// Index version of [`Self::apply`] on a `d × d` coefficient grid.
    pub fn apply_index(&self, m: usize, n: usize, d: usize) -> (usize, usize) {
        let (a, b) = if self.swap { (n, m) } else { (m, n) };
        (
            if self.flip1 { d - 1 - a } else { a },
            if self.flip2 { d - 1 - b } else { b },
        )
    }

    /// Converts a row-major grid given in standardized indices into native
    /// indices.
    pub fn to_native_grid(&self, grid: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for m in 0..d {
            for n in 0..d {
                let (a, b) = self.apply_index(m, n, d);
                out[a * d + b] = grid[m * d + n];
            }
        }
        out
    }

    /// Converts a native grid into standardized indices.
    pub fn to_standard_grid(&self, grid: &[f64], d: usize) -> Vec<f64> {
        self.inverse().to_native_grid(grid, d)
    }

    /// Native corner index (0: c00, 1: c10, 2: c11, 3: c01) of the
    /// standardized corner `(a, b)` with `a, b ∈ {0, 1}`.
    pub fn native_corner(&self, a: u8, b: u8) -> usize {
        let (x, y) = self.apply(a as f64, b as f64);
        corner_index(x == 1.0, y == 1.0)
    }
}

/// Corner index of `(x1, x2) ∈ {0,1}²` in counterclockwise order.
pub fn corner_index(x1: bool, x2: bool) -> usize {
    match (x1, x2) {
        (false, false) => 0,
        (true, false) => 1,
        (true, true) => 2,
        (false, true) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_laws() {
        for s in SquareSymmetry::all() {
            assert_eq!(s.compose(&s.inverse()), SquareSymmetry::IDENTITY);
            assert_eq!(s.inverse().compose(&s), SquareSymmetry::IDENTITY);
            for t in SquareSymmetry::all() {
                let c = s.compose(&t);
                for (u, v) in [(0.2, 0.7), (0.9, 0.1)] {
                    let (a, b) = t.apply(u, v);
                    let (x, y) = s.apply(a, b);
                    let (x2, y2) = c.apply(u, v);
                    assert!((x - x2).abs() < 1e-15 && (y - y2).abs() < 1e-15);
                }
                assert_eq!(
                    c.preserves_orientation(),
                    s.preserves_orientation() == t.preserves_orientation()
                );
            }
        }
    }

    #[test]
    fn grid_round_trip() {
        let d = 4;
        let g: Vec<f64> = (0..d * d).map(|x| x as f64).collect();
        for s in SquareSymmetry::all() {
            assert_eq!(s.to_standard_grid(&s.to_native_grid(&g, d), d), g);
        }
    }

    #[test]
    fn rotations_are_orientation_preserving() {
        let count = SquareSymmetry::all()
            .iter()
            .filter(|s| s.preserves_orientation())
            .count();
        assert_eq!(count, 4);
    }
}
