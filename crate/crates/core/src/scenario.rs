//! Channels, noise and power normalization for one uplink frame
//! `Y = H X + J W + N`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MashError, Result};
use crate::hadamard;
use crate::linalg::{complex_gaussian, frob2, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    /// i.i.d. CN(0, 1) entries.
    RayleighIid,
    /// Unit-modulus half-wavelength ULA steering vectors in a 120° sector.
    UlaLos,
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelModel::RayleighIid => "rayleigh_iid",
            ChannelModel::UlaLos => "ula_los",
        })
    }
}

impl FromStr for ChannelModel {
    type Err = MashError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rayleigh_iid" | "rayleigh" => Ok(ChannelModel::RayleighIid),
            "ula_los" | "ula" => Ok(ChannelModel::UlaLos),
            other => Err(MashError::Config(format!("unknown channel model '{other}'"))),
        }
    }
}

/// Dimensions and powers of the simulated uplink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// BS antennas `B`.
    #[serde(alias = "B")]
    pub bs_antennas: usize,
    /// UEs `U`.
    #[serde(alias = "U")]
    pub ues: usize,
    /// Antennas `I` of multi-antenna jammers (single-antenna types use 1).
    #[serde(alias = "I")]
    pub jammer_antennas: usize,
    /// Frame length `L`.
    #[serde(alias = "L")]
    pub frame_len: usize,
    /// Redundancy `R`.
    #[serde(alias = "R")]
    pub redundancy: usize,
    /// Pilot length `T` (equal to `U` for square Hadamard pilots).
    #[serde(alias = "T")]
    pub pilot_len: usize,
    /// Jammer-to-average-UE receive power ratio; `-inf` disables the jammer.
    pub rho_db: f64,
    pub snr_db: f64,
    /// Explicit noise variance `N₀`; overrides `snr_db` when set.
    pub noise_var: Option<f64>,
    pub channel_model: ChannelModel,
    /// Half-range of UE receive-power control around the median; `inf` disables it.
    pub power_control_db: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            bs_antennas: 64,
            ues: 16,
            jammer_antennas: 10,
            frame_len: 100,
            redundancy: 16,
            pilot_len: 16,
            rho_db: 30.0,
            snr_db: 10.0,
            noise_var: None,
            channel_model: ChannelModel::RayleighIid,
            power_control_db: 3.0,
        }
    }
}

impl SystemConfig {
    pub fn message_len(&self) -> usize {
        self.frame_len - self.redundancy
    }

    pub fn data_len(&self) -> usize {
        self.frame_len - self.redundancy - self.pilot_len
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(MashError::Config(msg));
        if self.bs_antennas == 0 || self.ues == 0 {
            return fail("B and U must be positive".into());
        }
        if self.jammer_antennas == 0 || self.jammer_antennas >= self.bs_antennas {
            return fail(format!(
                "need 0 < I < B, got I={} B={}",
                self.jammer_antennas, self.bs_antennas
            ));
        }
        if self.redundancy >= self.frame_len {
            return fail(format!("need R < L, got R={} L={}", self.redundancy, self.frame_len));
        }
        if self.pilot_len != self.ues {
            return fail(format!("square pilots need T = U, got T={} U={}", self.pilot_len, self.ues));
        }
        if self.redundancy + self.pilot_len >= self.frame_len {
            return fail(format!(
                "no data samples left: L={} R={} T={}",
                self.frame_len, self.redundancy, self.pilot_len
            ));
        }
        if !hadamard::is_admissible(self.ues) {
            return Err(MashError::HadamardOrder { order: self.ues });
        }
        if self.noise_var.is_some_and(|n0| !(n0 >= 0.0)) {
            return fail("noise variance must be non-negative".into());
        }
        if self.noise_var.is_none() && self.snr_db.is_nan() {
            return fail("SNR must be a number".into());
        }
        if !(self.power_control_db >= 0.0) {
            return fail("power control range must be non-negative".into());
        }
        Ok(())
    }
}

/// UE and jammer channel matrices for one coherence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    /// `B × U`.
    pub h: CMat,
    /// `B × I`.
    pub j: CMat,
}

const SECTOR_DEG: f64 = 120.0;
const MIN_SEPARATION_DEG: f64 = 1.0;
const ANGLE_RETRIES: usize = 1000;

/// Half-wavelength ULA response `a(θ)_b = exp(−jπ b sin θ)`.
pub fn steering_vector(antennas: usize, theta_rad: f64) -> Vec<C64> {
    let phase = -std::f64::consts::PI * theta_rad.sin();
    (0..antennas).map(|b| C64::from_polar(1.0, phase * b as f64)).collect()
}

fn draw_angles<R: Rng + ?Sized>(rng: &mut R, ues: usize, jammer_antennas: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let half = SECTOR_DEG / 2.0;
    // The jammer array occupies consecutive angles one separation apart.
    let jammer_span = (jammer_antennas.saturating_sub(1)) as f64 * MIN_SEPARATION_DEG;
    if jammer_span > SECTOR_DEG {
        return Err(MashError::Scenario(format!(
            "{jammer_antennas} jammer antennas do not fit in the sector"
        )));
    }
    for _ in 0..ANGLE_RETRIES {
        let ue: Vec<f64> = (0..ues).map(|_| rng.random_range(-half..half)).collect();
        let start = rng.random_range(-half..=(half - jammer_span));
        let jam: Vec<f64> = (0..jammer_antennas)
            .map(|i| start + i as f64 * MIN_SEPARATION_DEG)
            .collect();
        let separated = |a: f64, b: f64| (a - b).abs() >= MIN_SEPARATION_DEG;
        let ue_ok = (0..ues).all(|i| (i + 1..ues).all(|k| separated(ue[i], ue[k])));
        let cross_ok = ue.iter().all(|&a| jam.iter().all(|&b| separated(a, b)));
        if ue_ok && cross_ok {
            return Ok((ue, jam));
        }
    }
    Err(MashError::Scenario(format!(
        "could not place {ues} UEs and {jammer_antennas} jammer antennas with {MIN_SEPARATION_DEG}° separation \
         after {ANGLE_RETRIES} attempts"
    )))
}

/// Scale each column so its energy lies within `±range_db` of the median.
pub fn apply_power_control(h: &mut CMat, range_db: f64) {
    if !range_db.is_finite() || h.ncols() == 0 {
        return;
    }
    let energies: Vec<f64> = h.column_iter().map(|c| c.norm_squared()).collect();
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let factor = 10f64.powf(range_db / 10.0);
    let (lo, hi) = (median / factor, median * factor);
    for (u, &e) in energies.iter().enumerate() {
        if e > 0.0 {
            let target = e.clamp(lo, hi);
            let s = (target / e).sqrt();
            h.column_mut(u).iter_mut().for_each(|z| *z *= s);
        }
    }
}

pub fn gen_channels<R: Rng + ?Sized>(cfg: &SystemConfig, jammer_antennas: usize, rng: &mut R) -> Result<ChannelPair> {
    let (b, u) = (cfg.bs_antennas, cfg.ues);
    let (mut h, j) = match cfg.channel_model {
        ChannelModel::RayleighIid => (
            complex_gaussian(rng, b, u, 1.0),
            complex_gaussian(rng, b, jammer_antennas, 1.0),
        ),
        ChannelModel::UlaLos => {
            let (ue, jam) = draw_angles(rng, u, jammer_antennas)?;
            let build = |angles: &[f64]| {
                let cols: Vec<Vec<C64>> = angles.iter().map(|a| steering_vector(b, a.to_radians())).collect();
                CMat::from_fn(b, angles.len(), |r, c| cols[c][r])
            };
            (build(&ue), build(&jam))
        }
    };
    apply_power_control(&mut h, cfg.power_control_db);
    Ok(ChannelPair { h, j })
}

/// Scale `w_raw` so that `‖J W‖²_F = 10^{ρ/10} · ‖H‖²_F · L / U`.
pub fn scale_jammer(w_raw: &CMat, h: &CMat, j: &CMat, cfg: &SystemConfig) -> Result<CMat> {
    if cfg.rho_db == f64::NEG_INFINITY {
        return Ok(CMat::zeros(w_raw.nrows(), w_raw.ncols()));
    }
    let energy = frob2(&(j * w_raw));
    if !(energy > 0.0) {
        return Err(MashError::Jammer("cannot scale a silent jammer to a finite power ratio".into()));
    }
    let target = 10f64.powf(cfg.rho_db / 10.0) * frob2(h) * w_raw.ncols() as f64 / h.ncols() as f64;
    Ok(w_raw * C64::from((target / energy).sqrt()))
}

/// Realized `ρ = ‖J W‖² / (‖H‖² L / U)` in dB.
pub fn realized_rho_db(w: &CMat, h: &CMat, j: &CMat) -> f64 {
    let signal = frob2(h) * w.ncols() as f64 / h.ncols() as f64;
    10.0 * (frob2(&(j * w)) / signal).log10()
}

/// `N₀ = ‖H‖²_F / (B · 10^{SNR/10})`, unless the config pins `N₀`.
pub fn noise_variance(cfg: &SystemConfig, h: &CMat) -> f64 {
    if let Some(n0) = cfg.noise_var {
        return n0;
    }
    frob2(h) / (h.nrows() as f64 * 10f64.powf(cfg.snr_db / 10.0))
}

pub fn gen_noise<R: Rng + ?Sized>(rng: &mut R, n0: f64, rows: usize, cols: usize) -> CMat {
    complex_gaussian(rng, rows, cols, n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn default_config_is_valid() {
        SystemConfig::default().validate().unwrap();
        let bad = SystemConfig {
            jammer_antennas: 64,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SystemConfig {
            pilot_len: 8,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rayleigh_energy() {
        let cfg = SystemConfig {
            power_control_db: f64::INFINITY,
            ..Default::default()
        };
        let trials = 1000;
        let mean: f64 = (0..trials)
            .map(|t| frob2(&gen_channels(&cfg, 1, &mut rng::seeded("t", 0, &[t])).unwrap().h))
            .sum::<f64>()
            / trials as f64;
        assert!((mean / 1024.0 - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn power_control_clips_to_range() {
        let cfg = SystemConfig::default();
        for t in 0..20 {
            let pair = gen_channels(&cfg, 1, &mut rng::seeded("t", 1, &[t])).unwrap();
            let mut e: Vec<f64> = pair.h.column_iter().map(|c| c.norm_squared()).collect();
            e.sort_by(f64::total_cmp);
            let median = 0.5 * (e[7] + e[8]);
            let bound = 10f64.powf(0.3) * (1.0 + 1e-12);
            assert!(e.iter().all(|&x| x / median <= bound && median / x <= bound));
        }
    }

    #[test]
    fn broadside_steering_vector() {
        let a = steering_vector(4, 0.0);
        assert!(a.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn ula_angles_are_separated() {
        let cfg = SystemConfig {
            channel_model: ChannelModel::UlaLos,
            ..Default::default()
        };
        let pair = gen_channels(&cfg, 10, &mut rng::seeded("t", 2, &[])).unwrap();
        assert_eq!(pair.h.shape(), (64, 16));
        assert_eq!(pair.j.shape(), (64, 10));
        assert!(pair.h.iter().chain(pair.j.iter()).all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let crowded = SystemConfig {
            ues: 200,
            pilot_len: 200,
            frame_len: 300,
            channel_model: ChannelModel::UlaLos,
            ..Default::default()
        };
        assert!(matches!(
            gen_channels(&crowded, 1, &mut rng::seeded("t", 3, &[])),
            Err(MashError::Scenario(_))
        ));
    }

    #[test]
    fn jammer_scaling_hits_the_target_ratio() {
        let cfg = SystemConfig::default();
        let mut g = rng::seeded("t", 4, &[]);
        let pair = gen_channels(&cfg, 1, &mut g).unwrap();
        let w_raw = complex_gaussian(&mut g, 1, 100, 1.0);
        let w = scale_jammer(&w_raw, &pair.h, &pair.j, &cfg).unwrap();
        assert!((realized_rho_db(&w, &pair.h, &pair.j) - 30.0).abs() < 1e-9);
        let w2 = scale_jammer(&(&w_raw * C64::from(2.0)), &pair.h, &pair.j, &cfg).unwrap();
        assert!(crate::linalg::max_abs(&(&w2 - &w)) < 1e-12 * crate::linalg::max_abs(&w));
        let off = SystemConfig {
            rho_db: f64::NEG_INFINITY,
            ..Default::default()
        };
        assert_eq!(frob2(&scale_jammer(&w_raw, &pair.h, &pair.j, &off).unwrap()), 0.0);
        assert!(scale_jammer(&CMat::zeros(1, 100), &pair.h, &pair.j, &cfg).is_err());
    }

    #[test]
    fn noise_variance_from_snr() {
        let h = CMat::from_element(64, 16, C64::new(1.0, 0.0));
        let cfg = SystemConfig {
            snr_db: 0.0,
            ..Default::default()
        };
        // ‖H‖² = B·U at 0 dB gives N₀ = ‖H‖² / B = U.
        assert!((noise_variance(&cfg, &h) - 16.0).abs() < 1e-12);
        let inf = SystemConfig {
            snr_db: f64::INFINITY,
            ..Default::default()
        };
        assert_eq!(noise_variance(&inf, &h), 0.0);
    }

    #[test]
    fn noise_has_the_requested_variance() {
        let n0 = 0.3;
        let n = gen_noise(&mut rng::seeded("t", 5, &[]), n0, 100, 100);
        let mean = frob2(&n) / 1e4;
        // |n|^2 ~ Exp(mean n0), std n0.
        assert!((mean - n0).abs() < 4.0 * n0 / 100.0, "{mean}");
    }
}
