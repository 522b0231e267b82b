use crate::linalg::{complement_projector, complex_gaussian, leading_left_singular, orthonormalize, singular_values, svd, CMat};
use crate::rng;

/// Singular values below this fraction of the largest are treated as round-off.
const NUMERICAL_FLOOR: f64 = 1e-10;
const OVERSAMPLING: usize = 5;

/// Number of singular values of the training block above `β √(B N₀)`.
pub fn estimate_rank(y_j: &CMat, n0: f64, beta: f64) -> usize {
    count_above(&singular_values(y_j), y_j.nrows(), n0, beta)
}

/// Number of (descending) singular values above `β √(B N₀)`, ignoring
/// round-off relative to the largest one.
pub fn count_above(sigma: &[f64], antennas: usize, n0: f64, beta: f64) -> usize {
    count_above_scaled(sigma, antennas, n0, beta, 0.0)
}

/// As [`count_above`], with round-off judged against `scale` (typically the
/// norm of the whole raised frame) when that exceeds the largest value.
pub fn count_above_scaled(sigma: &[f64], antennas: usize, n0: f64, beta: f64, scale: f64) -> usize {
    let Some(&top) = sigma.first() else {
        return 0;
    };
    let threshold = (beta * (antennas as f64 * n0).sqrt()).max(NUMERICAL_FLOOR * top.max(scale));
    sigma.iter().filter(|&&s| s > threshold).count()
}

/// Largest admissible rank estimate, `min(R, B − U)`.
pub fn rank_cap(antennas: usize, redundancy: usize, ues: usize) -> usize {
    redundancy.min(antennas.saturating_sub(ues))
}

/// `I − U Uᴴ` with `U` the `rank` leading left-singular vectors of `y_j`.
pub fn scope_projector(y_j: &CMat, rank: usize) -> CMat {
    scope_projector_from(&leading_left_singular(y_j, rank), y_j.nrows())
}

pub fn scope_projector_from(q: &CMat, dim: usize) -> CMat {
    complement_projector(q, dim)
}

/// Leading `r`-dimensional left-singular subspace of `e` by randomized
/// block subspace iteration.
///
/// The block has `r + 5` columns (capped by the dimensions); its first
/// columns come from `warm` when supplied. `iters` power steps
/// `Q ← orth(E Eᴴ Q)` are followed by a Rayleigh–Ritz step on `Qᴴ E`.
/// The result has orthonormal columns.
pub fn approx_svd(e: &CMat, r: usize, iters: usize, warm: Option<&CMat>) -> CMat {
    let (b, l) = e.shape();
    let r = r.min(b).min(l);
    if r == 0 {
        return CMat::zeros(b, 0);
    }
    let k = (r + OVERSAMPLING).min(b).min(l);
    let mut start = CMat::zeros(b, k);
    let mut filled = 0;
    if let Some(w) = warm.filter(|w| w.nrows() == b) {
        filled = w.ncols().min(k);
        start.columns_mut(0, filled).copy_from(&w.columns(0, filled));
    }
    if filled < k {
        let mut g = rng::seeded("mash/approx_svd", 0, &[b as u64, l as u64, k as u64]);
        let omega = complex_gaussian(&mut g, l, k - filled, 1.0);
        start.columns_mut(filled, k - filled).copy_from(&(e * omega));
    }
    let mut q = orthonormalize(&start);
    for _ in 0..iters {
        q = orthonormalize(&(e * (e.adjoint() * &q)));
    }
    let small = svd(&(q.adjoint() * e));
    let keep = r.min(small.sigma.len());
    q * small.u.columns(0, keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, subspace_sin_angle, C64};

    fn rank_one(b: usize, l: usize, c: f64, seed: u64) -> CMat {
        let mut g = rng::seeded("t", seed, &[]);
        let u = complex_gaussian(&mut g, b, 1, 1.0);
        let v = complex_gaussian(&mut g, l, 1, 1.0);
        let u = &u / C64::from(u.norm());
        let v = &v / C64::from(v.norm());
        u * v.adjoint() * C64::from(c)
    }

    #[test]
    fn rank_of_zero_and_rank_one() {
        assert_eq!(estimate_rank(&CMat::zeros(64, 16), 1.0, 2.0), 0);
        let n0 = 0.5;
        let c = 10.0 * 2.0 * (64.0f64 * n0).sqrt();
        assert_eq!(estimate_rank(&rank_one(64, 16, c, 1), n0, 2.0), 1);
        assert_eq!(estimate_rank(&rank_one(64, 16, c, 1), 0.0, 2.0), 1);
    }

    #[test]
    fn pure_noise_has_rank_zero() {
        let n0 = 0.7;
        let zero = (0..1000)
            .filter(|&t| {
                let y = complex_gaussian(&mut rng::seeded("noise", 2, &[t]), 64, 16, n0);
                estimate_rank(&y, n0, 2.0) == 0
            })
            .count();
        assert!(zero >= 990, "{zero}");
    }

    #[test]
    fn projector_laws() {
        let y = complex_gaussian(&mut rng::seeded("t", 3, &[]), 12, 6, 1.0);
        for rank in 0..=6 {
            let p = scope_projector(&y, rank);
            assert!(max_abs(&(&p - p.adjoint())) < 1e-12);
            assert!(max_abs(&(&p * &p - &p)) < 1e-10);
            assert!((p.trace().re - (12 - rank) as f64).abs() < 1e-10);
        }
        assert_eq!(scope_projector(&y, 0), CMat::identity(12, 12));
    }

    #[test]
    fn projector_nulls_noiseless_barrage() {
        let mut g = rng::seeded("t", 4, &[]);
        let j = complex_gaussian(&mut g, 8, 1, 1.0);
        let w = gaussian_row(&mut g, 16);
        let y = &j * &w;
        let y_j = y.columns(0, 4).into_owned();
        let rank = estimate_rank(&y_j, 0.0, 2.0);
        assert_eq!(rank, 1);
        let p = scope_projector(&y_j, rank);
        assert!((&p * &y).norm() < 1e-9 * y.norm());
    }

    fn gaussian_row(g: &mut rng::StreamRng, l: usize) -> CMat {
        complex_gaussian(g, 1, l, 1.0)
    }

    #[test]
    fn approx_svd_exact_on_low_rank() {
        let mut g = rng::seeded("t", 5, &[]);
        let a = complex_gaussian(&mut g, 20, 3, 1.0) * complex_gaussian(&mut g, 3, 30, 1.0);
        let q = approx_svd(&a, 3, 1, None);
        assert!(subspace_sin_angle(&q, &leading_left_singular(&a, 3)) < 1e-10);
        assert!(max_abs(&(q.adjoint() * &q - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn approx_svd_matches_exact_on_random() {
        let e = complex_gaussian(&mut rng::seeded("t", 6, &[]), 8, 12, 1.0);
        let q = approx_svd(&e, 2, 10, None);
        assert!(subspace_sin_angle(&q, &leading_left_singular(&e, 2)) < 1e-8);
    }

    #[test]
    fn approx_svd_with_gap() {
        let mut g = rng::seeded("t", 7, &[]);
        let strong = complex_gaussian(&mut g, 64, 4, 1.0) * complex_gaussian(&mut g, 4, 84, 1.0) * C64::from(30.0);
        let e = &strong + complex_gaussian(&mut g, 64, 84, 1.0);
        let sigma = singular_values(&e);
        assert!(sigma[3] / sigma[4] > 10.0);
        let q = approx_svd(&e, 4, 3, None);
        assert!(subspace_sin_angle(&q, &leading_left_singular(&e, 4)) < 1e-6);
        let warm = approx_svd(&e, 4, 3, Some(&q));
        assert!(subspace_sin_angle(&warm, &leading_left_singular(&e, 4)) < 1e-6);
    }

    #[test]
    fn approx_svd_rank_zero_is_empty() {
        let e = complex_gaussian(&mut rng::seeded("t", 8, &[]), 8, 12, 1.0);
        let q = approx_svd(&e, 0, 3, None);
        assert_eq!(q.shape(), (8, 0));
        assert_eq!(scope_projector_from(&q, 8), CMat::identity(8, 8));
    }

    #[test]
    fn rank_cap_keeps_signal_dimensions() {
        assert_eq!(rank_cap(64, 16, 16), 16);
        assert_eq!(rank_cap(20, 16, 16), 4);
        assert_eq!(rank_cap(8, 4, 10), 0);
    }
}
