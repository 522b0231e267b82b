//! Jammer-mitigating detectors operating on `[Y_J | Y_T | Y_D]` blocks.
//!
//! MASH receivers consume raised blocks; the baselines consume the slots
//! gathered from an interleaved frame. The math is the same either way.

mod jmd;
mod linear;
mod subspace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, MashError, Result};
use crate::framing::{Constellation, ReceiveBlocks};
use crate::linalg::{singular_values, CMat};

pub use jmd::{mash_m_gradient, mash_m_objective, mash_s_objective, prox_g};
pub use linear::{
    lmmse_detect, ls_channel, mash_l_channel_big, mash_l_channel_small, mash_l_detect_big, mash_l_detect_small,
};
pub use subspace::{approx_svd, count_above, count_above_scaled, estimate_rank, rank_cap, scope_projector, scope_projector_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    Pos,
    MashL,
    MashS,
    MashM,
    Jl,
    Unmitigated,
    Lmmse,
    Maed,
}

impl Receiver {
    pub const ALL: [Receiver; 8] = [
        Receiver::Pos,
        Receiver::MashL,
        Receiver::MashS,
        Receiver::MashM,
        Receiver::Jl,
        Receiver::Unmitigated,
        Receiver::Lmmse,
        Receiver::Maed,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Receiver::Pos => "pos",
            Receiver::MashL => "mash-l",
            Receiver::MashS => "mash-s",
            Receiver::MashM => "mash-m",
            Receiver::Jl => "jl",
            Receiver::Unmitigated => "unmitigated",
            Receiver::Lmmse => "lmmse",
            Receiver::Maed => "maed",
        }
    }

    /// Whether the legitimate system embeds its message with a secret transform.
    pub fn uses_embedding(self) -> bool {
        matches!(self, Receiver::Pos | Receiver::MashL | Receiver::MashS | Receiver::MashM)
    }

    /// The jammerless reference system never sees the jammer.
    pub fn bypasses_jammer(self) -> bool {
        self == Receiver::Jl
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Receiver {
    type Err = MashError;

    fn from_str(s: &str) -> Result<Self> {
        Receiver::ALL
            .into_iter()
            .find(|r| r.key() == s.trim())
            .ok_or_else(|| MashError::Config(format!("unknown receiver '{s}'")))
    }
}

impl Serialize for Receiver {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for Receiver {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step; `None` uses `1 / (2 ‖Ĥ‖²)`.
    Fixed(Option<f64>),
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Rank threshold multiplier `β`.
    pub beta: f64,
    pub t_max: usize,
    /// Constellation-attraction parameter of the proximal step.
    pub prox_alpha: f64,
    pub step_rule: StepRule,
    /// Power iterations of the approximate SVD.
    pub approx_svd_iters: usize,
    /// Use an exact SVD instead of subspace iteration inside the JMD loops.
    pub exact_svd: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            t_max: 10,
            prox_alpha: 2.5,
            step_rule: StepRule::BarzilaiBorwein,
            approx_svd_iters: 3,
            exact_svd: false,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(MashError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.prox_alpha >= 0.0) {
            return Err(MashError::Config(format!("prox alpha must be non-negative, got {}", self.prox_alpha)));
        }
        if let StepRule::Fixed(Some(tau)) = self.step_rule {
            if !(tau >= 0.0) {
                return Err(MashError::Config(format!("step size must be non-negative, got {tau}")));
            }
        }
        Ok(())
    }
}

/// Per-iteration record of the iterative detectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub objective: Vec<f64>,
    pub step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// `U × D` symbol estimates.
    pub s_hat: CMat,
    /// Row-major: UE, then symbol, then bit.
    pub bits_hat: Vec<u8>,
    pub rank_est: usize,
    pub diagnostics: Diagnostics,
}

impl DetectionResult {
    pub(crate) fn new(s_hat: CMat, rank_est: usize, diagnostics: Diagnostics, constellation: &Constellation) -> Self {
        let row_major: Vec<_> = s_hat.transpose().iter().copied().collect();
        let bits_hat = constellation.demap(&row_major);
        Self {
            s_hat,
            bits_hat,
            rank_est,
            diagnostics,
        }
    }
}

/// Inputs shared by all detectors.
#[derive(Debug, Clone, Copy)]
pub struct DetectorInput<'a> {
    pub blocks: &'a ReceiveBlocks,
    /// `U × T` pilots.
    pub pilots: &'a CMat,
    pub n0: f64,
    pub params: &'a DetectorParams,
    pub constellation: &'a Constellation,
    /// Replaces the thresholded rank estimate when set (still capped).
    pub rank: Option<usize>,
}

impl DetectorInput<'_> {
    pub(crate) fn check(&self) -> Result<()> {
        self.params.validate()?;
        let b = self.blocks.antennas();
        check_dims("pilot block", (b, self.pilots.ncols()), self.blocks.pilot.shape())?;
        if self.blocks.data.nrows() != b {
            return Err(MashError::Dimension {
                context: "data block",
                expected: format!("{b} rows"),
                actual: format!("{} rows", self.blocks.data.nrows()),
            });
        }
        if self.pilots.nrows() > self.pilots.ncols() {
            return Err(MashError::Config(format!(
                "{} UEs need at least as many pilots, got {}",
                self.pilots.nrows(),
                self.pilots.ncols()
            )));
        }
        if !(self.n0 >= 0.0) {
            return Err(MashError::Domain(format!("noise variance must be non-negative, got {}", self.n0)));
        }
        Ok(())
    }

    pub fn ues(&self) -> usize {
        self.pilots.nrows()
    }

    /// `Î*` from the training block, capped at `min(R, B − U)`.
    pub fn rank(&self) -> usize {
        let b = self.blocks.antennas();
        let raw = self
            .rank
            .unwrap_or_else(|| {
                let sigma = singular_values(&self.blocks.jam);
                count_above_scaled(&sigma, b, self.n0, self.params.beta, self.blocks.norm())
            });
        raw.min(rank_cap(b, self.blocks.jam.ncols(), self.ues()))
    }
}

/// Orthogonal projection onto the complement of the estimated jammer scope,
/// LS channel estimate and LMMSE detection.
pub fn detect_pos(input: &DetectorInput<'_>) -> Result<DetectionResult> {
    input.check()?;
    let rank = input.rank();
    let p = scope_projector(&input.blocks.jam, rank);
    let s = linear::projected_lmmse(&p, input.blocks, input.pilots, input.n0);
    Ok(DetectionResult::new(s, rank, Diagnostics::default(), input.constellation))
}

/// Jammer-resilient LMMSE built from the training-block covariance.
pub fn detect_mash_l(input: &DetectorInput<'_>) -> Result<DetectionResult> {
    input.check()?;
    let b = input.blocks;
    let h = mash_l_channel_small(&b.jam, &b.pilot, input.pilots);
    let s = mash_l_detect_small(&h, &b.jam, &b.data, input.n0);
    let rank = input.rank();
    Ok(DetectionResult::new(s, rank, Diagnostics::default(), input.constellation))
}

/// LS channel estimate and LMMSE detection ignoring the jammer entirely.
pub fn detect_plain(input: &DetectorInput<'_>) -> Result<DetectionResult> {
    input.check()?;
    let h = ls_channel(&input.blocks.pilot, input.pilots);
    let s = lmmse_detect(&h, &input.blocks.data, input.n0);
    Ok(DetectionResult::new(s, 0, Diagnostics::default(), input.constellation))
}

pub fn detect_mash_s(input: &DetectorInput<'_>) -> Result<DetectionResult> {
    input.check()?;
    Ok(jmd::mash_s(input))
}

pub fn detect_mash_m(input: &DetectorInput<'_>) -> Result<DetectionResult> {
    input.check()?;
    Ok(jmd::mash_m(input))
}

/// Run the receiver selected by `receiver` on already separated blocks.
pub fn detect(receiver: Receiver, input: &DetectorInput<'_>) -> Result<DetectionResult> {
    match receiver {
        Receiver::Pos => detect_pos(input),
        Receiver::MashL | Receiver::Lmmse => detect_mash_l(input),
        Receiver::MashS => detect_mash_s(input),
        Receiver::MashM | Receiver::Maed => detect_mash_m(input),
        Receiver::Jl | Receiver::Unmitigated => detect_plain(input),
    }
}
