//! Executable checks of the residual-interference guarantee for
//! single-antenna barrage jammers and of the barrage property of raised
//! jammer interference.

use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{MashError, Result};
use crate::framing::FrameLayout;
use crate::jammers::{gen_jammer_tx, JammerSpec};
use crate::linalg::{column_space, complex_gaussian, frob2, leading_left_singular, singular_values, subspace_sin_angle, svd, CMat};
use crate::rng;
use crate::stats::{binomial_se, fit_slope, ks_test};
use crate::transforms::{Secret, Transform, TransformKind, TransformSpec};

fn check_pbar_domain(alpha: f64, frame_len: usize, redundancy: usize) -> Result<()> {
    if !(alpha > 1.0) {
        return Err(MashError::Domain(format!("threshold must exceed 1, got {alpha}")));
    }
    if redundancy >= frame_len {
        return Err(MashError::Domain(format!("need R < L, got R={redundancy} L={frame_len}")));
    }
    Ok(())
}

fn log_pbar_complement(alpha: f64, frame_len: usize, redundancy: usize) -> f64 {
    let (l, r) = (frame_len as f64, redundancy as f64);
    if redundancy == 0 {
        return 0.0;
    }
    // (L − R/α)/(L − R) = 1 + R (1 − 1/α)/(L − R)
    -r * alpha.ln() + (l - r) * (r * (1.0 - 1.0 / alpha) / (l - r)).ln_1p()
}

/// `1 − P̄(α) = α^{−R} ((L − R/α)/(L − R))^{L−R}`, the probability bound of
/// the residual-interference inequality failing.
pub fn pbar_complement(alpha: f64, frame_len: usize, redundancy: usize) -> Result<f64> {
    check_pbar_domain(alpha, frame_len, redundancy)?;
    Ok(log_pbar_complement(alpha, frame_len, redundancy).exp().min(1.0))
}

/// `P̄(α)`, evaluated in log space.
pub fn pbar(alpha: f64, frame_len: usize, redundancy: usize) -> Result<f64> {
    check_pbar_domain(alpha, frame_len, redundancy)?;
    Ok((-log_pbar_complement(alpha, frame_len, redundancy).exp_m1()).max(0.0))
}

/// Log-log slope of `1 − P̄(α)` over `points` log-spaced thresholds.
pub fn pbar_slope(frame_len: usize, redundancy: usize, alpha_lo: f64, alpha_hi: f64, points: usize) -> Result<f64> {
    check_pbar_domain(alpha_lo, frame_len, redundancy)?;
    let points = points.max(2);
    let (lo, hi) = (alpha_lo.ln(), alpha_hi.ln());
    let x: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&la| log_pbar_complement(la.exp(), frame_len, redundancy))
        .collect();
    Ok(fit_slope(&x, &y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Setup {
    pub frame_len: usize,
    pub redundancy: usize,
    pub bs_antennas: usize,
    pub n0: f64,
    /// Threshold `α` of the inequality.
    pub alpha: f64,
    /// Standard deviation of the jammer channel entries.
    pub jammer_gain: f64,
    /// Jammer antennas; anything above 1 is exploratory (no guarantee).
    pub jammer_antennas: usize,
}

impl Default for Prop1Setup {
    fn default() -> Self {
        Self {
            frame_len: 100,
            redundancy: 16,
            bs_antennas: 64,
            n0: 1.0,
            alpha: 2.0,
            jammer_gain: 30.0,
            jammer_antennas: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Report {
    pub alpha: f64,
    pub frame_len: usize,
    pub redundancy: usize,
    pub trials: usize,
    pub violation_count: usize,
    /// `P̄(α)`.
    pub bound_probability: f64,
    pub empirical_violation_rate: f64,
    /// Per-trial violation indicators.
    pub violations: Vec<bool>,
    /// Largest ratio of residual power to the right-hand side.
    pub max_ratio: f64,
}

impl Prop1Report {
    /// Empirical rate within `1 − P̄(α)` plus three binomial standard errors.
    pub fn within_guarantee(&self) -> bool {
        let p = 1.0 - self.bound_probability;
        self.empirical_violation_rate <= p + 3.0 * binomial_se(p, self.trials as u64)
    }
}

/// Monte-Carlo check of `‖P j wᵀ‖²/L ≤ 12 α ‖N_[1:R]‖²/R` with
/// `P = I − u₁u₁ᴴ` from the leading left-singular vector of the training block.
pub fn check_prop1(setup: &Prop1Setup, trials: usize, seed: u64) -> Result<Prop1Report> {
    let Prop1Setup {
        frame_len: l,
        redundancy: r,
        bs_antennas: b,
        n0,
        alpha,
        jammer_gain,
        jammer_antennas: i,
    } = *setup;
    let bound_probability = pbar(alpha, l, r)?;
    if r == 0 || b == 0 || i == 0 {
        return Err(MashError::Domain("need R, B and I positive".into()));
    }
    let mut violations = Vec::with_capacity(trials);
    let mut max_ratio = 0.0f64;
    for t in 0..trials {
        let mut g = rng::seeded("mash/prop1", seed, &[t as u64]);
        let j = complex_gaussian(&mut g, b, i, 1.0) * crate::linalg::C64::from(jammer_gain);
        let w = complex_gaussian(&mut g, i, l, 1.0);
        let n = complex_gaussian(&mut g, b, l, n0);
        let interference = &j * &w;
        let training = (&interference + &n).columns(0, r).into_owned();
        let u1 = leading_left_singular(&training, i);
        let residual = &interference - &u1 * (u1.adjoint() * &interference);
        let lhs = frob2(&residual) / l as f64;
        let rhs = 12.0 * alpha * frob2(&n.columns(0, r).into_owned()) / r as f64;
        let floor = 1e-20 * frob2(&interference) / l as f64;
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        violations.push(lhs > rhs + floor);
    }
    let violation_count = violations.iter().filter(|&&v| v).count();
    Ok(Prop1Report {
        alpha,
        frame_len: l,
        redundancy: r,
        trials,
        violation_count,
        bound_probability,
        empirical_violation_rate: violation_count as f64 / trials.max(1) as f64,
        violations,
        max_ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Setup {
    pub bs_antennas: usize,
    pub frame_len: usize,
    pub redundancy: usize,
    /// Pilot slots of the baseline clock the jammer may target.
    pub pilot_len: usize,
}

impl Default for Thm1Setup {
    fn default() -> Self {
        Self {
            bs_antennas: 16,
            frame_len: 64,
            redundancy: 8,
            pilot_len: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Report {
    pub trials: usize,
    /// Largest sine of the principal angle between `col(JW)` and `col(JW̄)`.
    pub max_scope_angle: f64,
    /// Largest singular-value deviation relative to `σ₁`.
    pub max_sigma_error: f64,
    /// Trials whose numerical ranks differ before and after raising.
    pub rank_mismatches: usize,
    /// Whether every trial had rank-1 interference.
    pub rank_one: bool,
    /// Energy fractions of the temporal direction in the first `R` samples.
    pub fractions: Vec<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_p_value: Option<f64>,
}

impl Thm1Report {
    pub fn scope_ok(&self) -> bool {
        self.rank_mismatches == 0 && self.max_scope_angle < 1e-8
    }

    pub fn profile_ok(&self) -> bool {
        self.max_sigma_error < 1e-9
    }

    /// The KS test does not reject at `significance`; vacuous for higher ranks.
    pub fn uniformity_ok(&self, significance: f64) -> bool {
        self.ks_p_value.is_none_or(|p| p >= significance)
    }
}

/// Energy fraction of a unit vector in its first `r` coordinates.
fn head_fraction(v: &[f64], r: usize) -> f64 {
    let total: f64 = v.iter().sum();
    v[..r].iter().sum::<f64>() / total
}

fn temporal_energy(a: &CMat) -> Vec<f64> {
    let dec = svd(a);
    dec.v_t.row(0).iter().map(|z| z.norm_sqr()).collect()
}

const RANK_TOL: f64 = 1e-10;

/// Compare jammer interference before and after raising by a fresh exact
/// Haar transform per trial.
///
/// With `raise = false` the temporal statistic is computed on the physical
/// interference instead, which shows what the raising buys.
pub fn check_thm1_with(spec: &JammerSpec, setup: &Thm1Setup, trials: usize, seed: u64, raise: bool) -> Result<Thm1Report> {
    let Thm1Setup {
        bs_antennas: b,
        frame_len: l,
        redundancy: r,
        pilot_len: t,
    } = *setup;
    spec.validate()?;
    let layout = FrameLayout::baseline(l, r, t)?;
    let mut report = Thm1Report {
        trials,
        max_scope_angle: 0.0,
        max_sigma_error: 0.0,
        rank_mismatches: 0,
        rank_one: true,
        fractions: Vec::with_capacity(trials),
        ks_statistic: None,
        ks_p_value: None,
    };
    for trial in 0..trials as u64 {
        let mut g = rng::seeded("mash/thm1", seed, &[trial]);
        let j = complex_gaussian(&mut g, b, spec.antennas, 1.0);
        // Independent of the transform, as the jammer cannot see the secret.
        let x = complex_gaussian(&mut g, spec.antennas.max(1), l, 1.0);
        let w = gen_jammer_tx(spec, &layout, &j, &x, &mut g)?;
        let secret = Secret::from_bytes(&rng::derive_seed("mash/thm1/secret", &seed.to_le_bytes(), &[trial]));
        let transform = Transform::new(&TransformSpec::new(TransformKind::ExactHaar, l, r, secret)?)?;
        let phys = &j * &w;
        let raised = transform.raise(&phys)?;
        let q1 = column_space(&phys, RANK_TOL);
        let q2 = column_space(&raised, RANK_TOL);
        if q1.ncols() != q2.ncols() {
            report.rank_mismatches += 1;
        } else {
            report.max_scope_angle = report.max_scope_angle.max(subspace_sin_angle(&q1, &q2));
        }
        let s1 = singular_values(&phys);
        let s2 = singular_values(&raised);
        let top = s1.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let err = s1.iter().zip(&s2).map(|(a, c)| (a - c).abs() / top).fold(0.0, f64::max);
        report.max_sigma_error = report.max_sigma_error.max(err);
        if q1.ncols() == 1 {
            let target = if raise { &raised } else { &phys };
            report.fractions.push(head_fraction(&temporal_energy(target), r));
        } else {
            report.rank_one = false;
        }
    }
    if report.rank_one && !report.fractions.is_empty() {
        let beta = Beta::new(r as f64, (l - r) as f64).map_err(|e| MashError::Domain(e.to_string()))?;
        let (d, p) = ks_test(&report.fractions, |x| beta.cdf(x));
        report.ks_statistic = Some(d);
        report.ks_p_value = Some(p);
    }
    Ok(report)
}

pub fn check_thm1(spec: &JammerSpec, setup: &Thm1Setup, trials: usize, seed: u64) -> Result<Thm1Report> {
    check_thm1_with(spec, setup, trials, seed, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbar_edge_cases() {
        assert_eq!(pbar(2.0, 100, 0).unwrap(), 0.0);
        assert!(pbar_complement(1e12, 100, 16).unwrap() < 1e-100);
        assert!(pbar(1e12, 100, 16).unwrap() >= 1.0 - 1e-15);
        assert!(pbar(1.0, 100, 16).is_err());
        assert!(pbar(2.0, 16, 16).is_err());
    }

    #[test]
    fn pbar_is_increasing_in_alpha() {
        let mut last = 0.0;
        for a in [1.5, 2.0, 4.0, 8.0, 100.0] {
            let p = pbar(a, 100, 4).unwrap();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn complement_matches_direct_evaluation() {
        for (a, l, r) in [(2.0f64, 100usize, 4usize), (4.0, 100, 16), (10.0, 50, 2)] {
            let direct = a.powi(-(r as i32)) * ((l as f64 - r as f64 / a) / (l - r) as f64).powi((l - r) as i32);
            let c = pbar_complement(a, l, r).unwrap();
            assert!((c - direct).abs() <= 1e-12 * direct);
            assert!((pbar(a, l, r).unwrap() - (1.0 - direct)).abs() < 1e-14);
        }
    }

    #[test]
    fn noiseless_prop1_never_violates() {
        let setup = Prop1Setup {
            n0: 0.0,
            ..Default::default()
        };
        let rep = check_prop1(&setup, 50, 1).unwrap();
        assert_eq!(rep.violation_count, 0);
    }

    #[test]
    fn barrage_raised_scope_is_exact() {
        let spec = JammerSpec::new(crate::jammers::JammerKind::Barrage1, 1);
        let rep = check_thm1(&spec, &Thm1Setup::default(), 50, 2).unwrap();
        assert!(rep.scope_ok() && rep.profile_ok());
        assert_eq!(rep.fractions.len(), 50);
    }
}
