//! Folding of 2-D relative displacements into one non-negative integer.
//!
//! Cells around the origin are numbered ring by ring. Ring `r` (Chebyshev
//! radius `r`) owns the codes `[(2r-1)², (2r+1)²)`; its first cell is
//! `(r, r-1)` and it is walked clockwise: down the east column, west along
//! the south row, up the west column, then east along the north row.
//!
//! ```text
//! 42 43 44 45 46 47 48
//! 41 20 21 22 23 24 25
//! 40 19  6  7  8  9 26
//! 39 18  5  0  1 10 27
//! 38 17  4  3  2 11 28
//! 37 16 15 14 13 12 29
//! 36 35 34 33 32 31 30
//! ```

/// Signed cell offset; `dx` grows eastward, `dy` grows northward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Displacement {
    pub dx: i64,
    pub dy: i64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement { dx: 0, dy: 0 };

    pub const fn new(dx: i64, dy: i64) -> Self {
        Self { dx, dy }
    }

    /// Chebyshev length, i.e. the spiral ring.
    pub fn ring(self) -> u64 {
        self.dx.unsigned_abs().max(self.dy.unsigned_abs())
    }
}

impl std::ops::Add for Displacement {
    type Output = Displacement;
    fn add(self, o: Displacement) -> Displacement {
        Displacement::new(self.dx + o.dx, self.dy + o.dy)
    }
}

impl std::ops::Sub for Displacement {
    type Output = Displacement;
    fn sub(self, o: Displacement) -> Displacement {
        Displacement::new(self.dx - o.dx, self.dy - o.dy)
    }
}

impl std::ops::Neg for Displacement {
    type Output = Displacement;
    fn neg(self) -> Displacement {
        Displacement::new(-self.dx, -self.dy)
    }
}

impl std::ops::AddAssign for Displacement {
    fn add_assign(&mut self, o: Displacement) {
        *self = *self + o;
    }
}

impl std::ops::SubAssign for Displacement {
    fn sub_assign(&mut self, o: Displacement) {
        *self = *self - o;
    }
}

/// Largest code used by displacements of Chebyshev length `<= radius`.
pub fn max_code_for_radius(radius: u64) -> u64 {
    (2 * radius + 1) * (2 * radius + 1) - 1
}

pub fn encode(d: Displacement) -> u64 {
    let r = d.ring() as i64;
    if r == 0 {
        return 0;
    }
    let base = ((2 * r - 1) * (2 * r - 1)) as u64;
    let Displacement { dx, dy } = d;
    let offset = if dx == r && dy < r {
        (r - 1) - dy
    } else if dy == -r && dx < r {
        2 * r + (r - 1) - dx
    } else if dx == -r {
        4 * r + dy + r - 1
    } else {
        6 * r + dx + r - 1
    };
    base + offset as u64
}

pub fn decode(code: u64) -> Displacement {
    if code == 0 {
        return Displacement::ZERO;
    }
    let s = code.isqrt();
    let r = s.div_ceil(2);
    let offset = (code - (2 * r - 1) * (2 * r - 1)) as i64;
    let r = r as i64;
    let side = offset / (2 * r);
    let along = offset % (2 * r);
    match side {
        0 => Displacement::new(r, r - 1 - along),
        1 => Displacement::new(r - 1 - along, -r),
        2 => Displacement::new(-r, -r + 1 + along),
        _ => Displacement::new(-r + 1 + along, r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Codes of the 7x7 neighbourhood, rows top-down, centre at (3, 3).
    const GRID: [[u64; 7]; 7] = [
        [42, 43, 44, 45, 46, 47, 48],
        [41, 20, 21, 22, 23, 24, 25],
        [40, 19, 6, 7, 8, 9, 26],
        [39, 18, 5, 0, 1, 10, 27],
        [38, 17, 4, 3, 2, 11, 28],
        [37, 16, 15, 14, 13, 12, 29],
        [36, 35, 34, 33, 32, 31, 30],
    ];

    #[test]
    fn matches_reference_grid() {
        for (row, line) in GRID.iter().enumerate() {
            for (col, &code) in line.iter().enumerate() {
                let d = Displacement::new(col as i64 - 3, 3 - row as i64);
                assert_eq!(encode(d), code, "{d:?}");
                assert_eq!(decode(code), d);
            }
        }
    }

    #[test]
    fn anchors() {
        assert_eq!(encode(Displacement::new(0, 0)), 0);
        assert_eq!(encode(Displacement::new(2, 2)), 24);
        assert_eq!(encode(Displacement::new(-2, 0)), 18);
        assert_eq!(encode(Displacement::new(1, 0)), 1);
        assert_eq!(encode(Displacement::new(0, 1)), 7);
        assert_eq!(encode(Displacement::new(1, 1)), 8);
        assert_eq!(encode(Displacement::new(2, 1)), 9);
        // The third worked movement (-2, 2) sits at 20 on the grid; 16 is (-2, -2).
        assert_eq!(encode(Displacement::new(-2, 2)), 20);
        assert_eq!(encode(Displacement::new(-2, -2)), 16);
        assert_eq!(decode(24), Displacement::new(2, 2));
    }

    #[test]
    fn ring_boundaries() {
        for code in 0..10_000u64 {
            let d = decode(code);
            let r = d.ring();
            if r > 0 {
                assert!((2 * r - 1) * (2 * r - 1) <= code && code < (2 * r + 1) * (2 * r + 1));
            }
            assert_eq!(encode(d), code);
        }
        assert_eq!(max_code_for_radius(0), 0);
        assert_eq!(max_code_for_radius(1), 8);
        assert_eq!(max_code_for_radius(2), 24);
    }
}
