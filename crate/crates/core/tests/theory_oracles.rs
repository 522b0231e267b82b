use mash::theory::{pbar, pbar_complement};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

/// `α^{−R} ((L − R/α)/(L − R))^{L−R}` in exact arithmetic for integer `α`.
fn exact_complement(alpha: i64, l: i64, r: i64) -> BigRational {
    let a = BigRational::from_integer(BigInt::from(alpha));
    let ratio = (BigRational::from_integer(BigInt::from(l)) - BigRational::from_integer(BigInt::from(r)) / &a)
        / BigRational::from_integer(BigInt::from(l - r));
    let mut out = BigRational::one();
    for _ in 0..r {
        out /= &a;
    }
    for _ in 0..(l - r) {
        out *= &ratio;
    }
    out
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap()
}

#[test]
fn complement_matches_exact_rationals() {
    for &(alpha, l, r) in &[(2i64, 100i64, 16i64), (4, 100, 16), (2, 100, 4), (4, 100, 4), (3, 64, 8), (10, 100, 30)] {
        let exact = exact_complement(alpha, l, r);
        let approx = pbar_complement(alpha as f64, l as usize, r as usize).unwrap();
        let reference = to_f64(&exact);
        assert!((approx - reference).abs() <= 1e-12 * reference, "{alpha} {l} {r}: {approx} vs {reference}");
    }
}

#[test]
fn rational_oracle_frozen_values() {
    let q = exact_complement(2, 100, 16);
    let v = to_f64(&q);
    assert!((v - pbar_complement(2.0, 100, 16).unwrap()).abs() < 1e-12 * v);
    assert!((1.0 - v - pbar(2.0, 100, 16).unwrap()).abs() < 1e-15);
    assert!((v - 0.03178612136011503).abs() < 1e-15);
    assert!((to_f64(&exact_complement(4, 100, 4)) - 0.07493769736489188).abs() < 1e-15);
}
