use crate::framing::ReceiveBlocks;
use crate::linalg::{hconcat, identity, right_pinv, solve_hpd, CMat, C64};

/// `Ĥ = Y_T S_T⁺`.
pub fn ls_channel(y_t: &CMat, pilots: &CMat) -> CMat {
    y_t * right_pinv(pilots)
}

/// `(Ĥᴴ Ĥ + N₀ I)⁻¹ Ĥᴴ Y_D`.
pub fn lmmse_detect(h: &CMat, y_d: &CMat, n0: f64) -> CMat {
    let u = h.ncols();
    let gram = h.adjoint() * h + identity(u) * C64::from(n0);
    solve_hpd(&gram, &(h.adjoint() * y_d))
}

pub(crate) fn projected_lmmse(p: &CMat, blocks: &ReceiveBlocks, pilots: &CMat, n0: f64) -> CMat {
    let h_p = ls_channel(&(p * &blocks.pilot), pilots);
    lmmse_detect(&h_p, &(p * &blocks.data), n0)
}

/// Channel estimate `(I − Y_J (T R I + Y_Jᴴ Y_J)⁻¹ Y_Jᴴ) Y_T S_T⁺`, which
/// inverts only an `R × R` matrix. `T` is the pilot length.
pub fn mash_l_channel_small(y_j: &CMat, y_t: &CMat, pilots: &CMat) -> CMat {
    let h_ls = ls_channel(y_t, pilots);
    let r = y_j.ncols();
    if r == 0 {
        return h_ls;
    }
    let t = pilots.ncols() as f64;
    let m = identity(r) * C64::from(t * r as f64) + y_j.adjoint() * y_j;
    &h_ls - y_j * solve_hpd(&m, &(y_j.adjoint() * &h_ls))
}

/// Channel estimate `(I + Ĉ_J / T)⁻¹ Y_T S_T⁺` with `Ĉ_J = Y_J Y_Jᴴ / R`.
pub fn mash_l_channel_big(y_j: &CMat, y_t: &CMat, pilots: &CMat) -> CMat {
    let h_ls = ls_channel(y_t, pilots);
    let b = y_t.nrows();
    let r = y_j.ncols().max(1) as f64;
    let t = pilots.ncols() as f64;
    let a = identity(b) + y_j * y_j.adjoint() * C64::from(1.0 / (r * t));
    solve_hpd(&a, &h_ls)
}

/// `A_(1:U) Y_D` with `A = (N₀ I + Gᴴ G)⁻¹ Gᴴ`, `G = [Ĥ, Y_J / √R]`.
pub fn mash_l_detect_small(h: &CMat, y_j: &CMat, y_d: &CMat, n0: f64) -> CMat {
    let u = h.ncols();
    let r = y_j.ncols();
    if r == 0 {
        return lmmse_detect(h, y_d, n0);
    }
    let g = hconcat(h, &(y_j * C64::from(1.0 / (r as f64).sqrt())));
    let gram = g.adjoint() * &g + identity(u + r) * C64::from(n0);
    let z = solve_hpd(&gram, &(g.adjoint() * y_d));
    z.rows(0, u).into_owned()
}

/// `Ĥᴴ (Ĥ Ĥᴴ + N₀ I + Ĉ_J)⁻¹ Y_D`.
pub fn mash_l_detect_big(h: &CMat, y_j: &CMat, y_d: &CMat, n0: f64) -> CMat {
    let b = h.nrows();
    let r = y_j.ncols().max(1) as f64;
    let cov = h * h.adjoint() + identity(b) * C64::from(n0) + y_j * y_j.adjoint() * C64::from(1.0 / r);
    h.adjoint() * solve_hpd(&cov, y_d)
}
