//! Reciprocal MASH: every UE embeds with its own secret and the BS detects
//! each UE separately, treating the other UEs as additional interference.

use crate::error::{MashError, Result};
use crate::framing::{Constellation, MessageFrame, ReceiveBlocks};
use crate::linalg::{singular_values, CMat};
use crate::receivers::{count_above_scaled, detect, rank_cap, DetectionResult, DetectorInput, DetectorParams, Receiver};
use crate::rng;
use crate::scenario::SystemConfig;
use crate::transforms::{Secret, Transform, TransformKind, TransformSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalConfig {
    pub per_ue_secrets: Vec<Secret>,
    /// Sample offset of each UE's frame clock, in `[0, L)`.
    pub frame_offsets: Vec<usize>,
    pub detector: Receiver,
    /// Rank threshold multiplier used instead of the common-mode one.
    pub rank_beta: f64,
    pub t_max: usize,
}

impl ReciprocalConfig {
    /// Per-UE secrets derived from `master`, zero offsets.
    pub fn from_master(master: u64, ues: usize, detector: Receiver) -> Self {
        let per_ue_secrets = (0..ues as u64)
            .map(|u| Secret::from_bytes(&rng::derive_seed("mash/reciprocal/secret", &master.to_le_bytes(), &[u])))
            .collect();
        Self {
            per_ue_secrets,
            frame_offsets: vec![0; ues],
            detector,
            rank_beta: 1.0,
            t_max: 5,
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<usize>) -> Self {
        self.frame_offsets = offsets;
        self
    }

    pub fn ues(&self) -> usize {
        self.per_ue_secrets.len()
    }

    /// All UEs share one frame clock.
    pub fn synchronized(&self) -> bool {
        self.frame_offsets.windows(2).all(|w| w[0] == w[1])
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.per_ue_secrets.len() != cfg.ues || self.frame_offsets.len() != cfg.ues {
            return Err(MashError::Config(format!(
                "reciprocal mode needs {} secrets and offsets, got {} and {}",
                cfg.ues,
                self.per_ue_secrets.len(),
                self.frame_offsets.len()
            )));
        }
        if let Some(&off) = self.frame_offsets.iter().find(|&&o| o >= cfg.frame_len) {
            return Err(MashError::Config(format!("frame offset {off} is not below L = {}", cfg.frame_len)));
        }
        if !matches!(
            self.detector,
            Receiver::Pos | Receiver::MashL | Receiver::MashS | Receiver::MashM
        ) {
            return Err(MashError::Config(format!(
                "receiver {} has no reciprocal variant",
                self.detector
            )));
        }
        Ok(())
    }

    /// Detector parameters of the single-UE problems.
    pub fn params(&self, base: &DetectorParams) -> DetectorParams {
        DetectorParams {
            beta: self.rank_beta,
            t_max: self.t_max,
            ..base.clone()
        }
    }

    /// Transform of UE `u` for frame `frame_index`.
    pub fn ue_spec(&self, kind: TransformKind, cfg: &SystemConfig, u: usize, frame_index: u64) -> Result<TransformSpec> {
        Ok(TransformSpec::new(kind, cfg.frame_len, cfg.redundancy, self.per_ue_secrets[u].clone())?.with_frame(frame_index))
    }
}

/// Warning text when `R < I* + U − 1`; reciprocal detection then degrades.
pub fn redundancy_warning(interference_rank: usize, ues: usize, redundancy: usize) -> Option<String> {
    let needed = interference_rank + ues.saturating_sub(1);
    (redundancy < needed).then(|| {
        format!("redundancy R = {redundancy} is below I* + U - 1 = {needed}; reciprocal detection will degrade")
    })
}

/// Per-UE single-row messages: pilot row `u` of `pilots`, data on top.
pub fn split_message(msg: &MessageFrame, u: usize) -> MessageFrame {
    MessageFrame {
        pilots: msg.pilots.rows(u, 1).into_owned(),
        data: msg.data.rows(u, 1).into_owned(),
        bits: {
            let per_ue = msg.bits.len() / msg.ues();
            msg.bits[u * per_ue..(u + 1) * per_ue].to_vec()
        },
    }
}

/// Physical UE transmit signals on a shared timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalTx {
    /// `U × width`; UE `u`'s frame `m` occupies columns `m L + offset_u ..`.
    pub timeline: CMat,
    pub frame_len: usize,
    pub offsets: Vec<usize>,
    /// Index of the frame the BS detects within each UE's frame sequence.
    pub current_frame: usize,
}

impl ReciprocalTx {
    pub fn width(&self) -> usize {
        self.timeline.ncols()
    }

    /// First column of UE `u`'s current frame.
    pub fn window_start(&self, u: usize) -> usize {
        self.current_frame * self.frame_len + self.offsets[u]
    }

    /// The length-`L` window of `signal` aligned to UE `u`.
    pub fn window(&self, signal: &CMat, u: usize) -> CMat {
        signal.columns(self.window_start(u), self.frame_len).into_owned()
    }
}

/// Place every UE's embedded frames on a common timeline.
///
/// `frames[u][m]` is `x_(u),m = s_(u),m C∥_u` (a `1 × L` row). With a single
/// frame per UE all offsets must be zero; with three frames the middle one
/// is detected and its neighbours provide the straddling interference.
pub fn build_reciprocal_tx(frames: &[Vec<CMat>], offsets: &[usize], frame_len: usize) -> Result<ReciprocalTx> {
    let ues = frames.len();
    let count = frames.first().map_or(0, Vec::len);
    if offsets.len() != ues || frames.iter().any(|f| f.len() != count) || count == 0 {
        return Err(MashError::Config("every UE needs the same number of frames and one offset".into()));
    }
    let max_offset = offsets.iter().copied().max().unwrap_or(0);
    if max_offset >= frame_len {
        return Err(MashError::Config(format!("frame offset {max_offset} is not below L = {frame_len}")));
    }
    let current_frame = count / 2;
    if count == 1 && max_offset > 0 {
        return Err(MashError::Config("unsynchronized UEs need neighbouring frames".into()));
    }
    let width = count * frame_len + max_offset;
    let mut timeline = CMat::zeros(ues, width);
    for (u, seq) in frames.iter().enumerate() {
        for (m, x) in seq.iter().enumerate() {
            if x.shape() != (1, frame_len) {
                return Err(MashError::Dimension {
                    context: "reciprocal frame",
                    expected: format!("1x{frame_len}"),
                    actual: format!("{}x{}", x.nrows(), x.ncols()),
                });
            }
            timeline.view_mut((u, m * frame_len + offsets[u]), (1, frame_len)).copy_from(x);
        }
    }
    Ok(ReciprocalTx {
        timeline,
        frame_len,
        offsets: offsets.to_vec(),
        current_frame,
    })
}

/// Rank from singular values averaged over the UEs' raised training blocks.
pub fn shared_rank(jam_blocks: &[CMat], n0: f64, beta: f64, scale: f64) -> usize {
    let Some(first) = jam_blocks.first() else {
        return 0;
    };
    let mut mean = singular_values(first);
    for block in &jam_blocks[1..] {
        for (m, s) in mean.iter_mut().zip(singular_values(block)) {
            *m += s;
        }
    }
    mean.iter_mut().for_each(|m| *m /= jam_blocks.len() as f64);
    count_above_scaled(&mean, first.nrows(), n0, beta, scale)
}

/// Raise UE `u`'s window with its own transform.
pub fn raise_for_ue(window: &CMat, transform: &Transform, pilot_len: usize) -> Result<ReceiveBlocks> {
    transform.raise_split(window, pilot_len)
}

/// Single-UE detection on raised blocks; `rank` overrides the per-UE estimate.
pub fn detect_reciprocal(
    blocks: &ReceiveBlocks,
    pilot: &CMat,
    n0: f64,
    cfg: &ReciprocalConfig,
    params: &DetectorParams,
    constellation: &Constellation,
    rank: Option<usize>,
) -> Result<DetectionResult> {
    let params = cfg.params(params);
    let input = DetectorInput {
        blocks,
        pilots: pilot,
        n0,
        params: &params,
        constellation,
        rank: rank.map(|r| r.min(rank_cap(blocks.antennas(), blocks.jam.ncols(), 1))),
    };
    detect(cfg.detector, &input)
}

/// Detect every UE of a reciprocal frame from the physical receive signal.
#[allow(clippy::too_many_arguments)]
pub fn detect_all(
    y: &CMat,
    tx: &ReciprocalTx,
    transforms: &[Transform],
    pilots: &CMat,
    n0: f64,
    cfg: &ReciprocalConfig,
    params: &DetectorParams,
    constellation: &Constellation,
) -> Result<Vec<DetectionResult>> {
    let t = pilots.ncols();
    let blocks = (0..cfg.ues())
        .map(|u| raise_for_ue(&tx.window(y, u), &transforms[u], t))
        .collect::<Result<Vec<_>>>()?;
    let rank = if cfg.synchronized() {
        let jams: Vec<CMat> = blocks.iter().map(|b| b.jam.clone()).collect();
        let scale = blocks.iter().map(ReceiveBlocks::norm).fold(0.0, f64::max);
        Some(shared_rank(&jams, n0, cfg.rank_beta, scale))
    } else {
        None
    };
    blocks
        .iter()
        .enumerate()
        .map(|(u, b)| detect_reciprocal(b, &pilots.rows(u, 1).into_owned(), n0, cfg, params, constellation, rank))
        .collect()
}
