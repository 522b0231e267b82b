//! Monte-Carlo engine: per-trial simulation, SNR sweeps and CSV output.
//!
//! Every random quantity of trial `t` is drawn from its own stream keyed by
//! the master seed and `t`, so all receivers, jammers and SNR points see the
//! same channels, messages, secrets and unit-variance noise.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MashError, Result};
use crate::framing::{build_baseline_frame, make_pilots, Constellation, FrameLayout, MessageFrame, ReceiveBlocks};
use crate::jammers::{gen_jammer_tx, JammerKind, JammerSpec};
use crate::linalg::{complex_gaussian, CMat, C64};
use crate::receivers::{detect, DetectionResult, DetectorInput, DetectorParams, Receiver};
use crate::reciprocal::{build_reciprocal_tx, detect_all, split_message, ReciprocalConfig};
use crate::rng;
use crate::scenario::{gen_channels, noise_variance, scale_jammer, ChannelPair, SystemConfig};
use crate::stats::binomial_se;
use crate::transforms::{Secret, Transform, TransformKind, TransformSpec};

pub const CSV_HEADER: &str =
    "snr_db,receiver,jammer,transform,mode,trials,bit_errors,bits_total,ber,mer_percent,mean_rank_est";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// All UEs share one secret and are detected jointly.
    #[default]
    Common,
    /// Per-UE secrets and per-UE detection.
    Reciprocal,
}

impl Mode {
    pub fn key(self) -> &'static str {
        match self {
            Mode::Common => "common",
            Mode::Reciprocal => "reciprocal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Mode {
    type Err = MashError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "common" => Ok(Mode::Common),
            "reciprocal" => Ok(Mode::Reciprocal),
            other => Err(MashError::Config(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub cfg: SystemConfig,
    pub snr_points: Vec<f64>,
    pub receivers: Vec<Receiver>,
    pub jammers: Vec<JammerSpec>,
    pub trials_per_point: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub transform_kind: TransformKind,
    pub params: DetectorParams,
    /// Per-UE frame offsets in reciprocal mode; zero when absent.
    pub frame_offsets: Option<Vec<usize>>,
}

impl SweepPlan {
    /// Plan with the default system for `mode` and `transform_kind`.
    pub fn defaults(mode: Mode, transform_kind: TransformKind) -> Self {
        Self {
            cfg: default_system(mode, transform_kind),
            snr_points: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            receivers: vec![Receiver::MashL],
            jammers: vec![JammerSpec::new(JammerKind::Barrage1, 1)],
            trials_per_point: 100,
            master_seed: 0,
            mode,
            transform_kind,
            params: DetectorParams::default(),
            frame_offsets: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cfg.validate()?;
        self.params.validate()?;
        if self.trials_per_point == 0 {
            return Err(MashError::Config("need at least one trial per point".into()));
        }
        if self.snr_points.is_empty() || self.receivers.is_empty() || self.jammers.is_empty() {
            return Err(MashError::Config("plan needs SNR points, receivers and jammers".into()));
        }
        if let Some(snr) = self.snr_points.iter().find(|s| s.is_nan()) {
            return Err(MashError::Config(format!("invalid SNR point {snr}")));
        }
        for j in &self.jammers {
            j.validate()?;
            if j.antennas >= self.cfg.bs_antennas {
                return Err(MashError::Config(format!(
                    "jammer {} has {} antennas, need fewer than B = {}",
                    j.kind, j.antennas, self.cfg.bs_antennas
                )));
            }
            if j.kind == JammerKind::Repeat && j.antennas > self.cfg.ues {
                return Err(MashError::Config(format!(
                    "repeat jammer with I = {} cannot repeat only U = {} UEs",
                    j.antennas, self.cfg.ues
                )));
            }
        }
        TransformSpec::new(
            self.transform_kind,
            self.cfg.frame_len,
            self.cfg.redundancy,
            Secret::from_u64(0),
        )?;
        if self.mode == Mode::Reciprocal {
            for &r in &self.receivers {
                self.reciprocal_config(r).validate(&self.cfg)?;
            }
        }
        Ok(())
    }

    pub(crate) fn reciprocal_config(&self, receiver: Receiver) -> ReciprocalConfig {
        let cfg = ReciprocalConfig::from_master(self.master_seed, self.cfg.ues, receiver);
        match &self.frame_offsets {
            Some(off) => cfg.with_offsets(off.clone()),
            None => cfg,
        }
    }

    /// `(snr, receiver, jammer)` of every row, in output order.
    pub fn row_keys(&self) -> Vec<(f64, Receiver, usize)> {
        let mut keys = Vec::new();
        for &snr in &self.snr_points {
            for &r in &self.receivers {
                for j in 0..self.jammers.len() {
                    keys.push((snr, r, j));
                }
            }
        }
        keys
    }
}

/// Default system: `B=64, U=16, L=100, R=16, T=16, I=10`; the WHT
/// construction needs `L=96`, reciprocal runs use `U=8, I=6`.
pub fn default_system(mode: Mode, transform_kind: TransformKind) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    if transform_kind == TransformKind::ApproxWht {
        cfg.frame_len = 96;
    }
    if mode == Mode::Reciprocal {
        cfg.ues = 8;
        cfg.pilot_len = 8;
        cfg.jammer_antennas = 6;
    }
    cfg
}

/// Outcome of one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub bit_errors: u64,
    pub bits: u64,
    /// `‖Ŝ_D − S_D‖_F`.
    pub error_norm: f64,
    /// `‖S_D‖_F`.
    pub reference_norm: f64,
    pub rank_est: f64,
}

/// MER in percent: mean error norm over mean reference norm.
pub fn compute_mer(error_norm_sum: f64, reference_norm_sum: f64) -> f64 {
    if reference_norm_sum > 0.0 {
        100.0 * error_norm_sum / reference_norm_sum
    } else {
        0.0
    }
}

fn trial_secret(master: u64) -> Secret {
    Secret::from_bytes(&rng::derive_seed("mash/secret", &master.to_le_bytes(), &[]))
}

fn jammer_stream(master: u64, trial: u64, jammer: &JammerSpec, block: u64) -> rng::StreamRng {
    rng::seeded("mash/jammer", master, &[trial, rng::tag(jammer.kind.key()), block])
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

struct TrialInputs {
    cfg: SystemConfig,
    pair: ChannelPair,
    pilots: CMat,
    constellation: Constellation,
    layout: FrameLayout,
    n0: f64,
}

fn prepare(plan: &SweepPlan, snr_db: f64, jammer: &JammerSpec, trial: u64) -> Result<TrialInputs> {
    let cfg = SystemConfig {
        snr_db,
        ..plan.cfg.clone()
    };
    let antennas = jammer.antennas.max(1);
    let pair = gen_channels(&cfg, antennas, &mut rng::seeded("mash/channel", plan.master_seed, &[trial]))?;
    let n0 = noise_variance(&cfg, &pair.h);
    let layout = FrameLayout::baseline(cfg.frame_len, cfg.redundancy, cfg.pilot_len)?;
    Ok(TrialInputs {
        pilots: make_pilots(cfg.ues)?,
        constellation: Constellation::qpsk(),
        cfg,
        pair,
        layout,
        n0,
    })
}

fn jammer_active(receiver: Receiver, jammer: &JammerSpec, cfg: &SystemConfig) -> bool {
    !receiver.bypasses_jammer() && jammer.kind != JammerKind::None && cfg.rho_db != f64::NEG_INFINITY
}

/// Scaled jammer interference `J W` over `width` samples, generated in
/// frame-length blocks against the baseline clock.
fn jammer_interference(
    plan: &SweepPlan,
    inputs: &TrialInputs,
    jammer: &JammerSpec,
    x: &CMat,
    trial: u64,
) -> Result<CMat> {
    let l = inputs.cfg.frame_len;
    let width = x.ncols();
    let b = inputs.cfg.bs_antennas;
    let mut out = CMat::zeros(b, width);
    for block in 0..width.div_ceil(l) {
        let start = block * l;
        let len = l.min(width - start);
        let mut x_block = CMat::zeros(x.nrows(), l);
        x_block.columns_mut(0, len).copy_from(&x.columns(start, len));
        let mut g = jammer_stream(plan.master_seed, trial, jammer, block as u64);
        let raw = gen_jammer_tx(jammer, &inputs.layout, &inputs.pair.j, &x_block, &mut g)?;
        let w = scale_jammer(&raw, &inputs.pair.h, &inputs.pair.j, &inputs.cfg)?;
        out.columns_mut(start, len).copy_from(&(&inputs.pair.j * w).columns(0, len));
    }
    Ok(out)
}

fn unit_noise(plan: &SweepPlan, trial: u64, rows: usize, cols: usize) -> CMat {
    complex_gaussian(&mut rng::seeded("mash/noise", plan.master_seed, &[trial]), rows, cols, 1.0)
}

fn finish(msg: &MessageFrame, det: &DetectionResult) -> TrialResult {
    TrialResult {
        bit_errors: count_errors(&det.bits_hat, &msg.bits),
        bits: msg.bits.len() as u64,
        error_norm: (&det.s_hat - &msg.data).norm(),
        reference_norm: msg.data.norm(),
        rank_est: det.rank_est as f64,
    }
}

/// Secret transforms of one trial, shared by every row of a sweep.
#[derive(Default)]
pub struct TransformCache {
    map: HashMap<(Option<usize>, u64), Transform>,
}

impl TransformCache {
    fn get(&mut self, ue: Option<usize>, frame: u64, make: impl FnOnce() -> Result<TransformSpec>) -> Result<&Transform> {
        if !self.map.contains_key(&(ue, frame)) {
            let t = Transform::new(&make()?)?;
            self.map.insert((ue, frame), t);
        }
        Ok(&self.map[&(ue, frame)])
    }
}

/// Simulate one frame of one sweep row.
pub fn run_trial(plan: &SweepPlan, snr_db: f64, receiver: Receiver, jammer: &JammerSpec, trial: u64) -> Result<TrialResult> {
    run_trial_cached(plan, snr_db, receiver, jammer, trial, &mut TransformCache::default())
}

/// [`run_trial`] reusing the transforms in `cache`, which must only hold
/// transforms of this `plan` and `trial`.
pub fn run_trial_cached(
    plan: &SweepPlan,
    snr_db: f64,
    receiver: Receiver,
    jammer: &JammerSpec,
    trial: u64,
    cache: &mut TransformCache,
) -> Result<TrialResult> {
    match plan.mode {
        Mode::Common => run_common_trial(plan, snr_db, receiver, jammer, trial, cache),
        Mode::Reciprocal => run_reciprocal_trial(plan, snr_db, receiver, jammer, trial, cache),
    }
}

fn run_common_trial(
    plan: &SweepPlan,
    snr_db: f64,
    receiver: Receiver,
    jammer: &JammerSpec,
    trial: u64,
    cache: &mut TransformCache,
) -> Result<TrialResult> {
    let inputs = prepare(plan, snr_db, jammer, trial)?;
    let cfg = &inputs.cfg;
    let msg = MessageFrame::random(
        &mut rng::seeded("mash/message", plan.master_seed, &[trial]),
        inputs.pilots.clone(),
        cfg.data_len(),
        &inputs.constellation,
    )?;
    let transform = if receiver.uses_embedding() {
        Some(cache.get(None, trial, || {
            Ok(TransformSpec::new(plan.transform_kind, cfg.frame_len, cfg.redundancy, trial_secret(plan.master_seed))?
                .with_frame(trial))
        })?)
    } else {
        None
    };
    let x = match &transform {
        Some(t) => t.embed(&msg.symbols())?,
        None => build_baseline_frame(&msg, &inputs.layout)?,
    };
    let mut y = &inputs.pair.h * &x;
    if jammer_active(receiver, jammer, cfg) {
        y += jammer_interference(plan, &inputs, jammer, &x, trial)?;
    }
    y += unit_noise(plan, trial, cfg.bs_antennas, cfg.frame_len) * C64::from(inputs.n0.sqrt());
    let blocks = match transform {
        Some(t) => t.raise_split(&y, cfg.pilot_len)?,
        None => ReceiveBlocks::gather(&y, &inputs.layout)?,
    };
    let input = DetectorInput {
        blocks: &blocks,
        pilots: &inputs.pilots,
        n0: inputs.n0,
        params: &plan.params,
        constellation: &inputs.constellation,
        rank: None,
    };
    Ok(finish(&msg, &detect(receiver, &input)?))
}

fn run_reciprocal_trial(
    plan: &SweepPlan,
    snr_db: f64,
    receiver: Receiver,
    jammer: &JammerSpec,
    trial: u64,
    cache: &mut TransformCache,
) -> Result<TrialResult> {
    let inputs = prepare(plan, snr_db, jammer, trial)?;
    let cfg = &inputs.cfg;
    let rc = plan.reciprocal_config(receiver);
    rc.validate(cfg)?;
    let frames = if rc.frame_offsets.iter().all(|&o| o == 0) { 1 } else { 3 };
    let current = frames / 2;
    let mut msg_rng = rng::seeded("mash/message", plan.master_seed, &[trial]);
    let msgs = (0..frames)
        .map(|_| MessageFrame::random(&mut msg_rng, inputs.pilots.clone(), cfg.data_len(), &inputs.constellation))
        .collect::<Result<Vec<_>>>()?;
    let mut transforms = Vec::with_capacity(cfg.ues);
    let mut rows = Vec::with_capacity(cfg.ues);
    for u in 0..cfg.ues {
        let mut ue_rows = Vec::with_capacity(frames);
        for (m, msg) in msgs.iter().enumerate() {
            let frame = (trial << 2) | m as u64;
            let t = cache.get(Some(u), frame, || rc.ue_spec(plan.transform_kind, cfg, u, frame))?;
            ue_rows.push(t.embed(&split_message(msg, u).symbols())?);
            if m == current {
                transforms.push(t.clone());
            }
        }
        rows.push(ue_rows);
    }
    let tx = build_reciprocal_tx(&rows, &rc.frame_offsets, cfg.frame_len)?;
    let mut y = &inputs.pair.h * &tx.timeline;
    if jammer_active(receiver, jammer, cfg) {
        y += jammer_interference(plan, &inputs, jammer, &tx.timeline, trial)?;
    }
    y += unit_noise(plan, trial, cfg.bs_antennas, tx.width()) * C64::from(inputs.n0.sqrt());
    let dets = detect_all(&y, &tx, &transforms, &inputs.pilots, inputs.n0, &rc, &plan.params, &inputs.constellation)?;
    let msg = &msgs[current];
    let mut s_hat = CMat::zeros(cfg.ues, cfg.data_len());
    let mut bits_hat = Vec::with_capacity(msg.bits.len());
    for (u, det) in dets.iter().enumerate() {
        s_hat.set_row(u, &det.s_hat.row(0));
        bits_hat.extend_from_slice(&det.bits_hat);
    }
    let rank = dets.iter().map(|d| d.rank_est as f64).sum::<f64>() / dets.len() as f64;
    let combined = DetectionResult {
        s_hat,
        bits_hat,
        rank_est: 0,
        diagnostics: Default::default(),
    };
    Ok(TrialResult {
        rank_est: rank,
        ..finish(msg, &combined)
    })
}

/// Aggregated statistics of one `(snr, receiver, jammer)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub receiver: Receiver,
    pub jammer: String,
    pub transform: TransformKind,
    pub mode: Mode,
    /// Successful trials.
    pub trials: usize,
    pub bit_errors: u64,
    pub bits_total: u64,
    pub ber: f64,
    pub mer_percent: f64,
    pub mean_rank_est: f64,
    pub failures: usize,
    /// First failure message, if any trial failed.
    pub error: Option<String>,
}

impl SweepRow {
    pub fn ber_se(&self) -> f64 {
        binomial_se(self.ber, self.bits_total)
    }
}

#[derive(Serialize)]
struct CsvRecord<'a> {
    snr_db: f64,
    receiver: &'a str,
    jammer: &'a str,
    transform: &'a str,
    mode: &'a str,
    trials: usize,
    bit_errors: u64,
    bits_total: u64,
    ber: f64,
    mer_percent: f64,
    mean_rank_est: f64,
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MashError::Config(format!("CSV output failed: {e}"));
    for row in rows {
        w.serialize(CsvRecord {
            snr_db: row.snr_db,
            receiver: row.receiver.key(),
            jammer: &row.jammer,
            transform: row.transform.key(),
            mode: row.mode.key(),
            trials: row.trials,
            bit_errors: row.bit_errors,
            bits_total: row.bits_total,
            ber: row.ber,
            mer_percent: row.mer_percent,
            mean_rank_est: row.mean_rank_est,
        })
        .map_err(io)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    }
    w.flush().map_err(|e| MashError::Config(format!("CSV output failed: {e}")))?;
    Ok(())
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV is ASCII"))
}

/// Worker cap from `MASH_SIM_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("MASH_SIM_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Run all rows of a plan with the worker count from the environment.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    run_sweep_with_threads(plan, threads_from_env())
}

/// Run all rows of a plan on `threads` workers (rayon's default when `None`).
/// The output does not depend on the worker count.
pub fn run_sweep_with_threads(plan: &SweepPlan, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| MashError::Config(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(|| sweep_rows(plan)))
        }
        None => Ok(sweep_rows(plan)),
    }
}

fn sweep_rows(plan: &SweepPlan) -> Vec<SweepRow> {
    let keys = plan.row_keys();
    let per_trial: Vec<Vec<Result<TrialResult>>> = (0..plan.trials_per_point as u64)
        .into_par_iter()
        .map(|t| {
            let mut cache = TransformCache::default();
            keys.iter()
                .map(|&(snr, receiver, j)| run_trial_cached(plan, snr, receiver, &plan.jammers[j], t, &mut cache))
                .collect()
        })
        .collect();
    keys.iter()
        .enumerate()
        .map(|(row, &(snr, receiver, j))| {
            aggregate(plan, snr, receiver, &plan.jammers[j], per_trial.iter().map(|r| &r[row]))
        })
        .collect()
}

fn aggregate<'a>(
    plan: &SweepPlan,
    snr_db: f64,
    receiver: Receiver,
    jammer: &JammerSpec,
    results: impl Iterator<Item = &'a Result<TrialResult>>,
) -> SweepRow {
    let mut row = SweepRow {
        snr_db,
        receiver,
        jammer: jammer.kind.key().to_string(),
        transform: plan.transform_kind,
        mode: plan.mode,
        trials: 0,
        bit_errors: 0,
        bits_total: 0,
        ber: 0.0,
        mer_percent: 0.0,
        mean_rank_est: 0.0,
        failures: 0,
        error: None,
    };
    let (mut err_sum, mut ref_sum, mut rank_sum) = (0.0, 0.0, 0.0);
    for r in results {
        match r {
            Ok(t) => {
                row.trials += 1;
                row.bit_errors += t.bit_errors;
                row.bits_total += t.bits;
                err_sum += t.error_norm;
                ref_sum += t.reference_norm;
                rank_sum += t.rank_est;
            }
            Err(e) => {
                row.failures += 1;
                row.error.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if row.bits_total > 0 {
        row.ber = row.bit_errors as f64 / row.bits_total as f64;
    }
    row.mer_percent = compute_mer(err_sum, ref_sum);
    if row.trials > 0 {
        row.mean_rank_est = rank_sum / row.trials as f64;
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mer_examples() {
        assert_eq!(compute_mer(0.0, 5.0), 0.0);
        assert_eq!(compute_mer(5.0, 5.0), 100.0);
    }

    #[test]
    fn default_systems() {
        assert_eq!(default_system(Mode::Common, TransformKind::ApproxWht).frame_len, 96);
        let r = default_system(Mode::Reciprocal, TransformKind::ExactHaar);
        assert_eq!((r.ues, r.pilot_len, r.jammer_antennas), (8, 8, 6));
        SweepPlan::defaults(Mode::Reciprocal, TransformKind::ApproxWht).validate().unwrap();
    }

    #[test]
    fn row_order_is_snr_receiver_jammer() {
        let mut plan = SweepPlan::defaults(Mode::Common, TransformKind::ExactHaar);
        plan.snr_points = vec![0.0, 5.0];
        plan.receivers = vec![Receiver::MashL, Receiver::Lmmse];
        plan.jammers = vec![JammerSpec::new(JammerKind::Barrage1, 1), JammerSpec::new(JammerKind::Pilot1, 1)];
        let keys = plan.row_keys();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[1], (0.0, Receiver::MashL, 1));
        assert_eq!(keys[2], (0.0, Receiver::Lmmse, 0));
        assert_eq!(keys[4].0, 5.0);
    }
}
