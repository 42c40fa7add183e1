use std::fmt;

use serde::{Deserialize, Serialize};

/// Exponents `(i, j, k)` of the monomial `x^i y^j z^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MomentOrder {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl MomentOrder {
    pub const ZERO: MomentOrder = MomentOrder::new(0, 0, 0);
    pub const X: MomentOrder = MomentOrder::new(1, 0, 0);
    pub const Y: MomentOrder = MomentOrder::new(0, 1, 0);
    pub const Z: MomentOrder = MomentOrder::new(0, 0, 1);
    pub const FIRST: [MomentOrder; 3] = [Self::X, Self::Y, Self::Z];

    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }

    pub fn total(&self) -> usize {
        self.i + self.j + self.k
    }

    /// Position in the graded layout: all monomials of total order `n`
    /// follow those of order `n - 1`, and within one order `i` then `j`
    /// decrease.
    pub fn index(&self) -> usize {
        let n = self.total();
        let a = n - self.i;
        monomial_count(n as isize - 1) + a * (a + 1) / 2 + (a - self.j)
    }

    pub fn shifted(&self, di: usize, dj: usize, dk: usize) -> Self {
        Self::new(self.i + di, self.j + dj, self.k + dk)
    }

    /// Evaluates the monomial at a point.
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        x.powi(self.i as i32) * y.powi(self.j as i32) * z.powi(self.k as i32)
    }
}

impl fmt::Display for MomentOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.i, self.j, self.k)
    }
}

/// Number of monomials with total order `<= max_order`; zero for negative input.
pub fn monomial_count(max_order: isize) -> usize {
    if max_order < 0 {
        return 0;
    }
    let n = max_order as usize;
    (n + 1) * (n + 2) * (n + 3) / 6
}

/// All monomials up to `max_order` in [`MomentOrder::index`] order.
pub fn monomials(max_order: usize) -> Vec<MomentOrder> {
    let mut out = Vec::with_capacity(monomial_count(max_order as isize));
    for n in 0..=max_order {
        for i in (0..=n).rev() {
            for j in (0..=n - i).rev() {
                out.push(MomentOrder::new(i, j, n - i - j));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_dense_and_consistent() {
        let all = monomials(9);
        assert_eq!(all.len(), 220);
        for (idx, o) in all.iter().enumerate() {
            assert_eq!(o.index(), idx, "{o}");
        }
        assert_eq!(MomentOrder::ZERO.index(), 0);
        assert_eq!(MomentOrder::X.index(), 1);
        assert_eq!(MomentOrder::Z.index(), 3);
    }

    #[test]
    fn counts() {
        assert_eq!(monomial_count(-1), 0);
        assert_eq!(monomial_count(0), 1);
        assert_eq!(monomial_count(1), 4);
        assert_eq!(monomial_count(21), 2024);
    }
}
