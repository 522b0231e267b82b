//! Real Hadamard matrices of order `2^a · m`, `m ∈ {1, 12, 20}`.
//!
//! The order-12 and order-20 cores come from the Paley construction over
//! GF(11) and GF(19); larger orders are Sylvester doublings of a core,
//! `H = H_{2^a} ⊗ H_m`. A fast transform applies `H` (or `Hᵀ`) in
//! `O(L (a + m))` operations without forming the matrix.

use crate::error::{MashError, Result};
use crate::linalg::C64;

const CORE_ORDERS: [usize; 3] = [1, 12, 20];

/// Split `order = 2^a · m` with `m` a supported core order.
pub fn factor_order(order: usize) -> Result<(u32, usize)> {
    if order == 0 {
        return Err(MashError::HadamardOrder { order });
    }
    for &m in &CORE_ORDERS {
        if order % m == 0 && (order / m).is_power_of_two() {
            return Ok(((order / m).trailing_zeros(), m));
        }
    }
    Err(MashError::HadamardOrder { order })
}

pub fn is_admissible(order: usize) -> bool {
    factor_order(order).is_ok()
}

/// Paley type-I Hadamard matrix of order `q + 1` for a prime `q ≡ 3 (mod 4)`.
fn paley(q: usize) -> Vec<i8> {
    let n = q + 1;
    let mut is_residue = vec![false; q];
    for x in 1..q {
        is_residue[(x * x) % q] = true;
    }
    let chi = |d: usize| -> i8 {
        if d == 0 {
            0
        } else if is_residue[d] {
            1
        } else {
            -1
        }
    };
    // H = I + S with S = [[0, 1ᵀ], [-1, Q]] and Q the Jacobsthal matrix.
    let mut h = vec![0i8; n * n];
    for i in 0..n {
        for j in 0..n {
            let s = match (i, j) {
                (0, 0) => 0,
                (0, _) => 1,
                (_, 0) => -1,
                _ => chi((j + q - i) % q),
            };
            h[i * n + j] = s + i8::from(i == j);
        }
    }
    h
}

fn core(m: usize) -> Vec<i8> {
    match m {
        1 => vec![1],
        12 => paley(11),
        20 => paley(19),
        _ => unreachable!("unsupported core order {m}"),
    }
}

/// Dense `±1` Hadamard matrix in row-major order.
pub fn matrix(order: usize) -> Result<Vec<i8>> {
    let (a, m) = factor_order(order)?;
    let base = core(m);
    let s = 1usize << a;
    let mut out = vec![0i8; order * order];
    for i in 0..order {
        for j in 0..order {
            let (is, ib) = (i / m, i % m);
            let (js, jb) = (j / m, j % m);
            let sylvester = if (is & js).count_ones() % 2 == 0 { 1 } else { -1 };
            out[i * order + j] = sylvester * base[ib * m + jb];
        }
    }
    debug_assert_eq!(s * m, order);
    Ok(out)
}

/// Precomputed fast Hadamard transform of a fixed order.
#[derive(Debug, Clone)]
pub struct HadamardPlan {
    order: usize,
    core_order: usize,
    core: Vec<f64>,
}

impl HadamardPlan {
    pub fn new(order: usize) -> Result<Self> {
        let (_, m) = factor_order(order)?;
        Ok(Self {
            order,
            core_order: m,
            core: core(m).into_iter().map(f64::from).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// In-place `v ← H v` (or `Hᵀ v`), unnormalized.
    pub fn apply(&self, v: &mut [C64], transpose: bool) {
        assert_eq!(v.len(), self.order, "Hadamard transform length");
        let m = self.core_order;
        if m > 1 {
            let mut buf = vec![C64::new(0.0, 0.0); m];
            for chunk in v.chunks_exact_mut(m) {
                for (i, out) in buf.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, &x) in chunk.iter().enumerate() {
                        let h = if transpose {
                            self.core[j * m + i]
                        } else {
                            self.core[i * m + j]
                        };
                        acc += x * h;
                    }
                    *out = acc;
                }
                chunk.copy_from_slice(&buf);
            }
        }
        let blocks = self.order / m;
        let mut half = 1;
        while half < blocks {
            for start in (0..blocks).step_by(2 * half) {
                for k in start..start + half {
                    for b in 0..m {
                        let i = k * m + b;
                        let j = (k + half) * m + b;
                        let (x, y) = (v[i], v[j]);
                        v[i] = x + y;
                        v[j] = x - y;
                    }
                }
            }
            half *= 2;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_hadamard(h: &[i8], n: usize) -> bool {
        (0..n).all(|i| {
            (0..n).all(|j| {
                let dot: i32 = (0..n).map(|k| i32::from(h[i * n + k]) * i32::from(h[j * n + k])).sum();
                dot == if i == j { n as i32 } else { 0 }
            })
        })
    }

    #[test]
    fn admissible_orders() {
        for n in [1, 2, 4, 8, 12, 16, 20, 24, 40, 48, 64, 80, 96, 128] {
            assert!(is_admissible(n), "{n}");
        }
        for n in [0, 3, 6, 10, 28, 36, 100] {
            assert!(!is_admissible(n), "{n}");
        }
        assert!(matches!(matrix(100), Err(MashError::HadamardOrder { order: 100 })));
    }

    #[test]
    fn matrices_are_orthogonal() {
        for n in [1, 2, 12, 16, 20, 40, 96] {
            assert!(is_hadamard(&matrix(n).unwrap(), n), "order {n}");
        }
    }

    #[test]
    fn sylvester_order_two() {
        assert_eq!(matrix(2).unwrap(), vec![1, 1, 1, -1]);
    }

    #[test]
    fn fast_transform_matches_dense() {
        for n in [8, 12, 24, 96] {
            let h = matrix(n).unwrap();
            let plan = HadamardPlan::new(n).unwrap();
            let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (3.0 * i as f64).cos())).collect();
            for transpose in [false, true] {
                let mut y = x.clone();
                plan.apply(&mut y, transpose);
                for i in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..n {
                        let e = if transpose { h[j * n + i] } else { h[i * n + j] };
                        acc += x[j] * f64::from(e);
                    }
                    assert!((acc - y[i]).norm() < 1e-10, "order {n} transpose {transpose}");
                }
            }
        }
    }
}
