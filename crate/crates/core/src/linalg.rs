//! Dense complex linear algebra helpers on top of `nalgebra`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn cn<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix with i.i.d. CN(0, variance) entries, drawn in column-major order.
pub fn complex_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMat {
    let scale = variance.sqrt();
    CMat::from_iterator(rows, cols, (0..rows * cols).map(|_| cn(rng) * scale))
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖A Aᴴ − I‖_max`.
pub fn unitarity_error(a: &CMat) -> f64 {
    let n = a.nrows();
    max_abs(&(a * a.adjoint() - identity(n)))
}

/// Compact SVD with singular values sorted in decreasing order.
pub struct Svd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v_t: CMat,
}

fn to_faer(a: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD; the decomposition is delegated to `faer`, whose complex SVD is
/// reliable on rank-deficient inputs.
pub fn svd(a: &CMat) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: CMat::zeros(m, 0),
            sigma: Vec::new(),
            v_t: CMat::zeros(0, n),
        };
    }
    let dec = to_faer(a).thin_svd().expect("SVD did not converge");
    let (u, s, v) = (dec.U(), dec.S().column_vector(), dec.V());
    Svd {
        u: CMat::from_fn(m, k, |r, c| u[(r, c)]),
        sigma: (0..k).map(|i| s[i].re).collect(),
        v_t: CMat::from_fn(k, n, |r, c| v[(c, r)].conj()),
    }
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows().min(a.ncols()) == 0 {
        return Vec::new();
    }
    to_faer(a).singular_values().expect("SVD did not converge")
}

pub fn spectral_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// The `r` leading left-singular vectors of `a` as a `rows × r` matrix.
pub fn leading_left_singular(a: &CMat, r: usize) -> CMat {
    let dec = svd(a);
    let r = r.min(dec.sigma.len());
    dec.u.columns(0, r).into_owned()
}

/// Orthonormal basis of the numerical column space (`σ > rel_tol · σ₁`).
pub fn column_space(a: &CMat, rel_tol: f64) -> CMat {
    let dec = svd(a);
    let cutoff = dec.sigma.first().copied().unwrap_or(0.0) * rel_tol;
    let rank = dec.sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count();
    dec.u.columns(0, rank).into_owned()
}

/// Moore–Penrose pseudo-inverse; singular values below `rel_tol · σ₁` are dropped.
pub fn pinv(a: &CMat, rel_tol: f64) -> CMat {
    let (m, n) = a.shape();
    let dec = svd(a);
    let cutoff = dec.sigma.first().copied().unwrap_or(0.0) * rel_tol;
    let mut out = CMat::zeros(n, m);
    for (i, &s) in dec.sigma.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let v = dec.v_t.row(i).adjoint();
            let u = dec.u.column(i).adjoint();
            out += (v * u) * C64::from(1.0 / s);
        }
    }
    out
}

/// Pseudo-inverse of a full-row-rank matrix, `Aᴴ (A Aᴴ)⁻¹`.
pub fn right_pinv(a: &CMat) -> CMat {
    let gram = a * a.adjoint();
    match gram.clone().cholesky() {
        Some(ch) => a.adjoint() * ch.inverse(),
        None => pinv(a, 1e-10),
    }
}

/// Solve `A X = B` for Hermitian positive (semi)definite `A`.
///
/// Falls back to the pseudo-inverse when the Cholesky factorization fails.
pub fn solve_hpd(a: &CMat, b: &CMat) -> CMat {
    match a.clone().cholesky() {
        Some(ch) => ch.solve(b),
        None => pinv(a, 1e-13) * b,
    }
}

/// Orthonormalize the columns of `a` (thin QR factor).
pub fn orthonormalize(a: &CMat) -> CMat {
    if a.ncols() == 0 {
        return a.clone();
    }
    a.clone().qr().q()
}

/// Sine of the largest principal angle between the column spaces of two
/// matrices with orthonormal columns (symmetric in its arguments).
pub fn subspace_sin_angle(q1: &CMat, q2: &CMat) -> f64 {
    if q1.ncols() != q2.ncols() {
        return 1.0;
    }
    if q1.ncols() == 0 {
        return 0.0;
    }
    let r12 = q2 - q1 * (q1.adjoint() * q2);
    let r21 = q1 - q2 * (q2.adjoint() * q1);
    spectral_norm(&r12).max(spectral_norm(&r21))
}

pub fn select_columns(a: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(a.nrows(), cols.len(), |r, c| a[(r, cols[c])])
}

pub fn hconcat(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows(), "hconcat row mismatch");
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Projector `I − Q Qᴴ` for a matrix `q` with orthonormal columns.
pub fn complement_projector(q: &CMat, dim: usize) -> CMat {
    if q.ncols() == 0 {
        return identity(dim);
    }
    identity(dim) - q * q.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn svd_is_sorted_and_reconstructs() {
        let mut g = rng::seeded("t", 1, &[]);
        let a = complex_gaussian(&mut g, 7, 5, 1.0);
        let d = svd(&a);
        assert!(d.sigma.windows(2).all(|w| w[0] >= w[1]));
        let s = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            d.sigma.iter().map(|&x| C64::from(x)),
        ));
        assert!(max_abs(&(&d.u * s * &d.v_t - &a)) < 1e-12);
    }

    #[test]
    fn svd_reconstructs_rank_one_products() {
        for t in 0..50 {
            let mut g = rng::seeded("rank1", t, &[]);
            let a = complex_gaussian(&mut g, 64, 1, 1.0) * complex_gaussian(&mut g, 1, 16, 1.0);
            let d = svd(&a);
            let u1 = d.u.column(0).into_owned();
            let residual = &a - &u1 * (u1.adjoint() * &a);
            assert!(residual.norm() < 1e-12 * a.norm(), "trial {t}");
            assert!(d.sigma[1] < 1e-12 * d.sigma[0]);
        }
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let mut g = rng::seeded("t", 2, &[]);
        let u = complex_gaussian(&mut g, 6, 2, 1.0);
        let v = complex_gaussian(&mut g, 2, 4, 1.0);
        let a = &u * &v;
        let p = pinv(&a, 1e-10);
        assert!(max_abs(&(&a * &p * &a - &a)) < 1e-10);
        assert!(max_abs(&(&p * &a * &p - &p)) < 1e-10);
    }

    #[test]
    fn principal_angle_of_rotated_basis_is_zero() {
        let mut g = rng::seeded("t", 3, &[]);
        let q = orthonormalize(&complex_gaussian(&mut g, 8, 3, 1.0));
        let rot = orthonormalize(&complex_gaussian(&mut g, 3, 3, 1.0));
        assert!(subspace_sin_angle(&q, &(&q * rot)) < 1e-12);
        let other = orthonormalize(&complex_gaussian(&mut g, 8, 3, 1.0));
        assert!(subspace_sin_angle(&q, &other) > 0.1);
    }

    #[test]
    fn solve_hpd_matches_inverse() {
        let mut g = rng::seeded("t", 4, &[]);
        let a = complex_gaussian(&mut g, 5, 5, 1.0);
        let h = &a * a.adjoint() + identity(5);
        let b = complex_gaussian(&mut g, 5, 2, 1.0);
        let x = solve_hpd(&h, &b);
        assert!(max_abs(&(&h * x - b)) < 1e-10);
    }
}
