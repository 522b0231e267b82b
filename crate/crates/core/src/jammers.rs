//! Adversary models producing the jammer transmit matrix `W ∈ C^{I×L}`.
//!
//! Generators see the channels, the physical UE transmit signal and the
//! baseline frame clock but never the secret transform.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MashError, Result};
use crate::framing::FrameLayout;
use crate::linalg::{complex_gaussian, svd, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JammerKind {
    /// No jammer.
    None,
    /// ① single-antenna, all samples.
    Barrage1,
    /// ② single-antenna, data slots.
    Data1,
    /// ③ single-antenna, pilot slots.
    Pilot1,
    /// ④ single-antenna, random sparse slots.
    Sparse1,
    /// ⑤ multi-antenna eigenbeamforming.
    Eigenbeam,
    /// ⑥ multi-antenna, data slots.
    DataMulti,
    /// ⑦ multi-antenna with switching beamformers.
    DynamicBeam,
    /// ⑧ multi-antenna, repeats the UE signals.
    Repeat,
}

impl JammerKind {
    pub const ALL: [JammerKind; 8] = [
        JammerKind::Barrage1,
        JammerKind::Data1,
        JammerKind::Pilot1,
        JammerKind::Sparse1,
        JammerKind::Eigenbeam,
        JammerKind::DataMulti,
        JammerKind::DynamicBeam,
        JammerKind::Repeat,
    ];

    pub fn key(self) -> &'static str {
        match self {
            JammerKind::None => "none",
            JammerKind::Barrage1 => "barrage1",
            JammerKind::Data1 => "data1",
            JammerKind::Pilot1 => "pilot1",
            JammerKind::Sparse1 => "sparse1",
            JammerKind::Eigenbeam => "eigenbeam",
            JammerKind::DataMulti => "data_multi",
            JammerKind::DynamicBeam => "dynamic_beam",
            JammerKind::Repeat => "repeat",
        }
    }

    pub fn is_single_antenna(self) -> bool {
        matches!(
            self,
            JammerKind::None | JammerKind::Barrage1 | JammerKind::Data1 | JammerKind::Pilot1 | JammerKind::Sparse1
        )
    }
}

impl fmt::Display for JammerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for JammerKind {
    type Err = MashError;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim() {
            "none" => JammerKind::None,
            "barrage1" | "1" => JammerKind::Barrage1,
            "data1" | "2" => JammerKind::Data1,
            "pilot1" | "3" => JammerKind::Pilot1,
            "sparse1" | "4" => JammerKind::Sparse1,
            "eigenbeam" | "5" => JammerKind::Eigenbeam,
            "data_multi" | "6" => JammerKind::DataMulti,
            "dynamic_beam" | "7" => JammerKind::DynamicBeam,
            "repeat" | "8" => JammerKind::Repeat,
            other => return Err(MashError::Config(format!("unknown jammer '{other}'"))),
        };
        Ok(kind)
    }
}

impl Serialize for JammerKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.key())
    }
}

impl<'de> Deserialize<'de> for JammerKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JammerSpec {
    pub kind: JammerKind,
    /// Transmit antennas `I`.
    pub antennas: usize,
    pub sparse_fraction: f64,
    pub dyn_active_rows: usize,
    pub dyn_hold_prob: f64,
    pub repeat_delay: usize,
}

impl Default for JammerSpec {
    fn default() -> Self {
        Self {
            kind: JammerKind::Barrage1,
            antennas: 1,
            sparse_fraction: 0.1,
            dyn_active_rows: 8,
            dyn_hold_prob: 0.95,
            repeat_delay: 1,
        }
    }
}

impl JammerSpec {
    /// Spec with default parameters; single-antenna kinds force `I = 1` and
    /// the active-row count is capped at `I`.
    pub fn new(kind: JammerKind, antennas: usize) -> Self {
        let antennas = if kind.is_single_antenna() { 1 } else { antennas };
        Self {
            kind,
            antennas,
            dyn_active_rows: Self::default().dyn_active_rows.min(antennas),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(MashError::Jammer(msg));
        if self.antennas == 0 {
            return fail("jammer needs at least one antenna".into());
        }
        if self.kind.is_single_antenna() && self.antennas != 1 {
            return fail(format!("{} is a single-antenna jammer", self.kind));
        }
        if !(self.sparse_fraction > 0.0 && self.sparse_fraction <= 1.0) {
            return fail(format!("sparse fraction must lie in (0, 1], got {}", self.sparse_fraction));
        }
        if self.kind == JammerKind::DynamicBeam && (self.dyn_active_rows == 0 || self.dyn_active_rows > self.antennas) {
            return fail(format!(
                "active rows must lie in 1..={}, got {}",
                self.antennas, self.dyn_active_rows
            ));
        }
        if !(0.0..=1.0).contains(&self.dyn_hold_prob) {
            return fail(format!("hold probability must lie in [0, 1], got {}", self.dyn_hold_prob));
        }
        Ok(())
    }
}

/// Per-sample beamformers `A_k` of the dynamic jammer.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSchedule {
    /// Distinct beamformers in order of appearance.
    pub beams: Vec<CMat>,
    /// `beam_of[k]` indexes the beamformer used at sample `k`.
    pub beam_of: Vec<usize>,
}

impl BeamSchedule {
    pub fn at(&self, k: usize) -> &CMat {
        &self.beams[self.beam_of[k]]
    }
}

fn draw_beam<R: Rng + ?Sized>(rng: &mut R, antennas: usize, active: usize) -> CMat {
    let rows = index::sample(rng, antennas, active);
    let entries = complex_gaussian(rng, active, antennas, 1.0);
    let mut a = CMat::zeros(antennas, antennas);
    for (n, r) in rows.iter().enumerate() {
        a.set_row(r, &entries.row(n));
    }
    a
}

/// Draws the hold/redraw events for all samples first, then one row set and
/// entry matrix per redraw.
pub fn dynamic_beam_schedule<R: Rng + ?Sized>(spec: &JammerSpec, frame_len: usize, rng: &mut R) -> BeamSchedule {
    let redraw: Vec<bool> = (1..frame_len).map(|_| !rng.random_bool(spec.dyn_hold_prob)).collect();
    let mut beams = vec![draw_beam(rng, spec.antennas, spec.dyn_active_rows)];
    let mut beam_of = Vec::with_capacity(frame_len);
    if frame_len > 0 {
        beam_of.push(0);
    }
    for &r in &redraw {
        if r {
            beams.push(draw_beam(rng, spec.antennas, spec.dyn_active_rows));
        }
        beam_of.push(beams.len() - 1);
    }
    BeamSchedule { beams, beam_of }
}

fn on_slots<R: Rng + ?Sized>(rng: &mut R, antennas: usize, frame_len: usize, slots: &[usize]) -> CMat {
    let values = complex_gaussian(rng, antennas, slots.len(), 1.0);
    let mut w = CMat::zeros(antennas, frame_len);
    for (n, &k) in slots.iter().enumerate() {
        w.set_column(k, &values.column(n));
    }
    w
}

/// Unscaled jammer transmit matrix for one frame.
///
/// `layout` is the baseline frame clock; `x` is the UEs' physical transmit
/// matrix (only read by the repeat jammer).
pub fn gen_jammer_tx<R: Rng + ?Sized>(
    spec: &JammerSpec,
    layout: &FrameLayout,
    j: &CMat,
    x: &CMat,
    rng: &mut R,
) -> Result<CMat> {
    spec.validate()?;
    let (i, l) = (spec.antennas, layout.frame_len);
    if j.ncols() != i {
        return Err(MashError::Dimension {
            context: "jammer channel",
            expected: format!("{i} columns"),
            actual: format!("{} columns", j.ncols()),
        });
    }
    let w = match spec.kind {
        JammerKind::None => CMat::zeros(i, l),
        JammerKind::Barrage1 => complex_gaussian(rng, i, l, 1.0),
        JammerKind::Data1 | JammerKind::DataMulti => on_slots(rng, i, l, &layout.data),
        JammerKind::Pilot1 => on_slots(rng, i, l, &layout.pilots),
        JammerKind::Sparse1 => {
            let count = ((spec.sparse_fraction * l as f64).ceil() as usize).min(l);
            if count == 0 {
                return Err(MashError::Jammer("sparse jammer has no active slots".into()));
            }
            let mut slots = index::sample(rng, l, count).into_vec();
            slots.sort_unstable();
            on_slots(rng, i, l, &slots)
        }
        JammerKind::Eigenbeam => {
            let v = svd(j).v_t.adjoint();
            let w_tilde = complex_gaussian(rng, v.ncols(), l, 1.0);
            let mut w = &v * w_tilde;
            if w.nrows() < i {
                w = w.resize_vertically(i, C64::new(0.0, 0.0));
            }
            w
        }
        JammerKind::DynamicBeam => {
            let schedule = dynamic_beam_schedule(spec, l, rng);
            let w_tilde = complex_gaussian(rng, i, l, 1.0);
            let mut w = CMat::zeros(i, l);
            for k in 0..l {
                w.set_column(k, &(schedule.at(k) * w_tilde.column(k)));
            }
            w
        }
        JammerKind::Repeat => {
            if i > x.nrows() {
                return Err(MashError::Jammer(format!(
                    "repeat jammer with I={i} cannot repeat only {} UE signals",
                    x.nrows()
                )));
            }
            if x.ncols() != l {
                return Err(MashError::Dimension {
                    context: "repeat jammer input",
                    expected: format!("{l} samples"),
                    actual: format!("{} samples", x.ncols()),
                });
            }
            let d = spec.repeat_delay.min(l);
            let mut w = CMat::zeros(i, l);
            if d < l {
                w.view_mut((0, d), (i, l - d)).copy_from(&x.view((0, 0), (i, l - d)));
            }
            w
        }
    };
    Ok(w)
}
