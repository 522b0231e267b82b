use crate::framing::Constellation;
use crate::linalg::{frob2, hconcat, leading_left_singular, pinv, spectral_norm, svd, CMat, C64};

use super::linear::{ls_channel, projected_lmmse};
use super::subspace::{approx_svd, scope_projector_from};
use super::{DetectionResult, DetectorInput, Diagnostics, StepRule};

const TAU_MIN: f64 = 1e-6;
const TAU_MAX: f64 = 1e2;
const PINV_TOL: f64 = 1e-10;

fn clip(x: f64, a: f64) -> f64 {
    x.clamp(-a, a)
}

/// Entrywise proximal step: scaled clipping while `α τ < 1`, otherwise the
/// nearest constellation point.
pub fn prox_g(s: C64, tau: f64, alpha: f64, constellation: &Constellation) -> C64 {
    if alpha * tau < 1.0 {
        let z = s / (1.0 - tau * alpha);
        let a = constellation.clip;
        C64::new(clip(z.re, a), clip(z.im, a))
    } else {
        constellation.nearest(s)
    }
}

/// `E − Q (Qᴴ E)`: applies `I − Q Qᴴ` without forming it.
fn project_out(q: &CMat, e: &CMat) -> CMat {
    if q.ncols() == 0 {
        return e.clone();
    }
    e - q * (q.adjoint() * e)
}

/// `‖(I − Q Qᴴ)(Y_D − Ĥ S_D)‖²`.
pub fn mash_s_objective(y_d: &CMat, h: &CMat, s_d: &CMat, q: &CMat) -> f64 {
    frob2(&project_out(q, &(y_d - h * s_d)))
}

/// `‖(I − Q Qᴴ) Y (I − S⁺ S)‖²` with `Y = [Y_T, Y_D]`.
pub fn mash_m_objective(y: &CMat, s: &CMat, q: &CMat) -> f64 {
    let h = y * pinv(s, PINV_TOL);
    frob2(&project_out(q, &(y - h * s)))
}

/// `−2 (Y S⁺)ᴴ (I − Q Qᴴ) Y (I − S⁺ S)`.
pub fn mash_m_gradient(y: &CMat, s: &CMat, q: &CMat) -> CMat {
    let h = y * pinv(s, PINV_TOL);
    let pe = project_out(q, &(y - &h * s));
    h.adjoint() * pe * C64::from(-2.0)
}

struct Stepper {
    rule: StepRule,
    base: f64,
    prev: Option<(CMat, CMat, f64)>,
}

impl Stepper {
    fn new(rule: StepRule, h: &CMat) -> Self {
        let lip = 2.0 * spectral_norm(h).powi(2);
        let default = if lip > 0.0 { 1.0 / lip } else { TAU_MAX };
        let base = match rule {
            StepRule::Fixed(Some(tau)) => tau,
            _ => default,
        };
        Self { rule, base, prev: None }
    }

    fn next(&mut self, s: &CMat, grad: &CMat) -> f64 {
        let tau = match (self.rule, &self.prev) {
            (StepRule::BarzilaiBorwein, Some((s_prev, g_prev, tau_prev))) => {
                let ds = s - s_prev;
                let dg = grad - g_prev;
                let num = frob2(&ds);
                let den = ds.dotc(&dg).re;
                let tau = if den > 0.0 && num > 0.0 { num / den } else { *tau_prev };
                if tau.is_finite() {
                    tau.clamp(TAU_MIN, TAU_MAX)
                } else {
                    *tau_prev
                }
            }
            _ => self.base,
        };
        self.prev = Some((s.clone(), grad.clone(), tau));
        tau
    }

    /// Halve `tau` towards the base step until `eval` does not increase the
    /// objective beyond `f_now`.
    fn descend(&mut self, tau: f64, f_now: f64, eval: impl Fn(f64) -> (CMat, f64)) -> (f64, CMat) {
        let mut tau = tau;
        loop {
            let (cand, f) = eval(tau);
            if f <= f_now || tau <= self.base {
                if let Some(prev) = self.prev.as_mut() {
                    prev.2 = tau;
                }
                return (tau, cand);
            }
            tau = (0.5 * tau).max(self.base);
        }
    }
}

fn subspace(input: &DetectorInput<'_>, e: &CMat, rank: usize, warm: &CMat) -> CMat {
    if input.params.exact_svd {
        leading_left_singular(e, rank)
    } else {
        approx_svd(e, rank, input.params.approx_svd_iters, Some(warm))
    }
}

struct Init {
    h: CMat,
    rank: usize,
    scope: CMat,
    s_d: CMat,
}

fn initialize(input: &DetectorInput<'_>) -> Init {
    let b = input.blocks;
    let rank = input.rank();
    let scope = svd(&b.jam).u.columns(0, rank.min(b.jam.ncols().min(b.jam.nrows()))).into_owned();
    let p0 = scope_projector_from(&scope, b.antennas());
    let s_d = projected_lmmse(&p0, b, input.pilots, input.n0);
    Init {
        h: ls_channel(&b.pilot, input.pilots),
        rank,
        scope,
        s_d,
    }
}

pub(crate) fn mash_s(input: &DetectorInput<'_>) -> DetectionResult {
    let Init { h, rank, scope, mut s_d } = initialize(input);
    let b = input.blocks;
    let y = hconcat(&b.pilot, &b.data);
    let (alpha, c) = (input.params.prox_alpha, input.constellation);
    let mut stepper = Stepper::new(input.params.step_rule, &h);
    let mut q = scope;
    let mut diag = Diagnostics::default();
    for _ in 0..input.params.t_max {
        let e = &y - &h * hconcat(input.pilots, &s_d);
        q = subspace(input, &e, rank, &q);
        let residual = project_out(&q, &(&b.data - &h * &s_d));
        let f_now = frob2(&residual);
        diag.objective.push(f_now);
        let grad = h.adjoint() * residual * C64::from(-2.0);
        let tau = stepper.next(&s_d, &grad);
        let (tau, next) = stepper.descend(tau, f_now, |tau| {
            let cand = (&s_d - &grad * C64::from(tau)).map(|z| prox_g(z, tau, alpha, c));
            let f = mash_s_objective(&b.data, &h, &cand, &q);
            (cand, f)
        });
        diag.step.push(tau);
        s_d = next;
    }
    DetectionResult::new(s_d, rank, diag, input.constellation)
}

pub(crate) fn mash_m(input: &DetectorInput<'_>) -> DetectionResult {
    let Init { h, rank, scope, s_d } = initialize(input);
    let b = input.blocks;
    let t = input.pilots.ncols();
    let y = hconcat(&b.pilot, &b.data);
    let (alpha, c) = (input.params.prox_alpha, input.constellation);
    let mut stepper = Stepper::new(input.params.step_rule, &h);
    let mut s = hconcat(input.pilots, &s_d);
    let mut q = scope;
    let mut diag = Diagnostics::default();
    for _ in 0..input.params.t_max {
        let h_s = &y * pinv(&s, PINV_TOL);
        let e = &y - &h_s * &s;
        q = subspace(input, &e, rank, &q);
        let pe = project_out(&q, &e);
        let f_now = frob2(&pe);
        diag.objective.push(f_now);
        let grad = h_s.adjoint() * pe * C64::from(-2.0);
        let tau = stepper.next(&s, &grad);
        let (tau, next) = stepper.descend(tau, f_now, |tau| {
            let mut cand = (&s - &grad * C64::from(tau)).map(|z| prox_g(z, tau, alpha, c));
            cand.columns_mut(0, t).copy_from(input.pilots);
            let f = mash_m_objective(&y, &cand, &q);
            (cand, f)
        });
        diag.step.push(tau);
        s = next;
    }
    let s_d = s.columns(t, s.ncols() - t).into_owned();
    DetectionResult::new(s_d, rank, diag, input.constellation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, orthonormalize};
    use crate::rng;

    #[test]
    fn prox_examples() {
        let c = Constellation::qpsk();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let hard = prox_g(C64::new(0.3, 0.9), 0.4, 2.5, &c);
        assert!((hard - C64::new(h, h)).norm() < 1e-15);
        let z = prox_g(C64::new(3.0, -0.5), 0.0, 2.5, &c);
        assert!((z - C64::new(2f64.sqrt(), -0.5)).norm() < 1e-15);
        let z = prox_g(C64::new(0.1, 0.0), 0.2, 2.5, &c);
        assert!((z - C64::new(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mash_m_gradient_matches_finite_differences() {
        let mut g = rng::seeded("t", 1, &[]);
        let y = complex_gaussian(&mut g, 10, 12, 1.0);
        let s = complex_gaussian(&mut g, 3, 12, 1.0);
        let q = orthonormalize(&complex_gaussian(&mut g, 10, 2, 1.0));
        let grad = mash_m_gradient(&y, &s, &q);
        for seed in 0..5 {
            let dir = complex_gaussian(&mut rng::seeded("dir", seed, &[]), 3, 12, 1.0);
            let eps = 1e-6;
            let plus = mash_m_objective(&y, &(&s + &dir * C64::from(eps)), &q);
            let minus = mash_m_objective(&y, &(&s - &dir * C64::from(eps)), &q);
            let fd = (plus - minus) / (2.0 * eps);
            let analytic = grad.dotc(&dir).re;
            assert!((fd - analytic).abs() < 1e-5 * analytic.abs().max(1.0), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn mash_s_gradient_matches_finite_differences() {
        let mut g = rng::seeded("t", 2, &[]);
        let y_d = complex_gaussian(&mut g, 10, 12, 1.0);
        let h = complex_gaussian(&mut g, 10, 3, 1.0);
        let s = complex_gaussian(&mut g, 3, 12, 1.0);
        let q = orthonormalize(&complex_gaussian(&mut g, 10, 2, 1.0));
        let grad = h.adjoint() * project_out(&q, &(&y_d - &h * &s)) * C64::from(-2.0);
        let dir = complex_gaussian(&mut g, 3, 12, 1.0);
        let eps = 1e-6;
        let fd = (mash_s_objective(&y_d, &h, &(&s + &dir * C64::from(eps)), &q)
            - mash_s_objective(&y_d, &h, &(&s - &dir * C64::from(eps)), &q))
            / (2.0 * eps);
        let analytic = grad.dotc(&dir).re;
        assert!((fd - analytic).abs() < 1e-5 * analytic.abs().max(1.0));
    }
}
