//! TOML sweep descriptions.
//!
//! ```toml
//! seed = 7
//! trials = 200
//! snr = "-10:10:5"
//! receivers = ["mash-l", "lmmse"]
//! jammers = ["barrage1", "eigenbeam"]
//! transform = "exact"
//!
//! [system]
//! B = 64
//! rho_db = 30
//!
//! [detector]
//! beta = 2.0
//!
//! [jammer]
//! antennas = 10
//! ```

use serde::Deserialize;

use crate::error::{MashError, Result};
use crate::harness::{default_system, Mode, SweepPlan};
use crate::jammers::{JammerKind, JammerSpec};
use crate::receivers::{DetectorParams, Receiver};
use crate::scenario::SystemConfig;
use crate::transforms::TransformKind;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    Text(String),
    List(Vec<f64>),
}

impl SnrSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            SnrSpec::Text(s) => parse_snr_points(s),
            SnrSpec::List(v) => Ok(v.clone()),
        }
    }
}

/// Parse `a:b:step` (inclusive), a comma list, or a single value.
pub fn parse_snr_points(s: &str) -> Result<Vec<f64>> {
    let bad = || MashError::Config(format!("invalid SNR specification '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|k| ((a + k as f64 * step) * 1e9).round() / 1e9).collect())
        }
        [_] => s.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerOptions {
    /// Antennas of multi-antenna jammers; defaults to the system's `I`.
    pub antennas: Option<usize>,
    pub sparse_fraction: Option<f64>,
    pub dyn_active_rows: Option<usize>,
    pub dyn_hold_prob: Option<f64>,
    pub repeat_delay: Option<usize>,
}

/// A sweep as read from a TOML file.  Every field is optional; command-line
/// flags are merged on top with [`SweepFile::overlay`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr: Option<SnrSpec>,
    pub receivers: Option<Vec<Receiver>>,
    pub jammers: Option<Vec<JammerKind>>,
    pub mode: Option<String>,
    pub transform: Option<String>,
    pub frame_offsets: Option<Vec<usize>>,
    #[serde(default)]
    pub system: toml::Table,
    #[serde(default)]
    pub detector: toml::Table,
    #[serde(default)]
    pub jammer: JammerOptions,
}

impl SweepFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| MashError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MashError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: SweepFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f; } )* };
        }
        take!(seed, trials, snr, receivers, jammers, mode, transform, frame_offsets);
        self.system.extend(top.system);
        self.detector.extend(top.detector);
        let j = top.jammer;
        self.jammer = JammerOptions {
            antennas: j.antennas.or(self.jammer.antennas),
            sparse_fraction: j.sparse_fraction.or(self.jammer.sparse_fraction),
            dyn_active_rows: j.dyn_active_rows.or(self.jammer.dyn_active_rows),
            dyn_hold_prob: j.dyn_hold_prob.or(self.jammer.dyn_hold_prob),
            repeat_delay: j.repeat_delay.or(self.jammer.repeat_delay),
        };
        self
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.as_deref().map_or(Ok(Mode::Common), str::parse)
    }

    pub fn transform(&self) -> Result<TransformKind> {
        self.transform.as_deref().map_or(Ok(TransformKind::ExactHaar), str::parse)
    }

    /// Resolve into a validated plan.
    pub fn to_plan(&self) -> Result<SweepPlan> {
        let mode = self.mode()?;
        let transform = self.transform()?;
        let cfg = system_from_table(&self.system, mode, transform)?;
        let params: DetectorParams = self
            .detector
            .clone()
            .try_into()
            .map_err(|e| MashError::Config(format!("invalid [detector]: {e}")))?;
        let mut plan = SweepPlan::defaults(mode, transform);
        if let Some(snr) = &self.snr {
            plan.snr_points = snr.points()?;
        }
        if let Some(r) = &self.receivers {
            plan.receivers = r.clone();
        }
        let kinds = self.jammers.clone().unwrap_or_else(|| vec![JammerKind::Barrage1]);
        plan.jammers = kinds.into_iter().map(|k| self.jammer_spec(k, &cfg)).collect();
        plan.trials_per_point = self.trials.unwrap_or(plan.trials_per_point);
        plan.master_seed = self.seed.unwrap_or(plan.master_seed);
        plan.frame_offsets = self.frame_offsets.clone();
        plan.cfg = cfg;
        plan.params = params;
        plan.validate()?;
        Ok(plan)
    }

    fn jammer_spec(&self, kind: JammerKind, cfg: &SystemConfig) -> JammerSpec {
        let o = &self.jammer;
        let mut spec = JammerSpec::new(kind, o.antennas.unwrap_or(cfg.jammer_antennas));
        if let Some(v) = o.sparse_fraction {
            spec.sparse_fraction = v;
        }
        if let Some(v) = o.dyn_active_rows {
            spec.dyn_active_rows = v;
        }
        if let Some(v) = o.dyn_hold_prob {
            spec.dyn_hold_prob = v;
        }
        if let Some(v) = o.repeat_delay {
            spec.repeat_delay = v;
        }
        spec
    }
}

fn has(table: &toml::Table, keys: &[&str]) -> bool {
    keys.iter().any(|k| table.contains_key(*k))
}

/// `[system]` over the defaults of `mode` and `transform`.  An unset pilot
/// length follows `U`.
pub fn system_from_table(table: &toml::Table, mode: Mode, transform: TransformKind) -> Result<SystemConfig> {
    let mut cfg: SystemConfig = table
        .clone()
        .try_into()
        .map_err(|e| MashError::Config(format!("invalid [system]: {e}")))?;
    let base = default_system(mode, transform);
    if !has(table, &["frame_len", "L"]) {
        cfg.frame_len = base.frame_len;
    }
    if !has(table, &["ues", "U"]) {
        cfg.ues = base.ues;
    }
    if !has(table, &["jammer_antennas", "I"]) {
        cfg.jammer_antennas = base.jammer_antennas;
    }
    if !has(table, &["pilot_len", "T"]) {
        cfg.pilot_len = cfg.ues;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_ranges() {
        assert_eq!(parse_snr_points("-10:10:5").unwrap(), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
        assert_eq!(parse_snr_points("0:1:0.1").unwrap().len(), 11);
        assert_eq!(parse_snr_points("0:1:0.1").unwrap()[3], 0.3);
        assert_eq!(parse_snr_points("3").unwrap(), vec![3.0]);
        assert_eq!(parse_snr_points("0, 5").unwrap(), vec![0.0, 5.0]);
        for bad in ["", "1:0:1", "0:1:0", "a:b:c", "0:1"] {
            assert!(parse_snr_points(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn full_file() {
        let f = SweepFile::parse(
            r#"
            seed = 7
            trials = 3
            snr = [0.0, 10.0]
            receivers = ["mash-l", "lmmse"]
            jammers = ["eigenbeam", "pilot1"]
            [system]
            B = 32
            rho_db = 20
            [detector]
            beta = 3.0
            [jammer]
            antennas = 4
            "#,
        )
        .unwrap();
        let plan = f.to_plan().unwrap();
        assert_eq!(plan.cfg.bs_antennas, 32);
        assert_eq!(plan.cfg.rho_db, 20.0);
        assert_eq!(plan.params.beta, 3.0);
        assert_eq!(plan.jammers[0].antennas, 4);
        assert_eq!(plan.jammers[1].antennas, 1);
        assert_eq!((plan.master_seed, plan.trials_per_point), (7, 3));
    }

    #[test]
    fn mode_dependent_defaults() {
        let wht = SweepFile::parse("transform = \"wht\"").unwrap().to_plan().unwrap();
        assert_eq!(wht.cfg.frame_len, 96);
        let explicit = SweepFile::parse("transform = \"wht\"\n[system]\nL = 192").unwrap().to_plan().unwrap();
        assert_eq!(explicit.cfg.frame_len, 192);
        let rec = SweepFile::parse("mode = \"reciprocal\"").unwrap().to_plan().unwrap();
        assert_eq!((rec.cfg.ues, rec.cfg.pilot_len, rec.cfg.jammer_antennas), (8, 8, 6));
        let u4 = SweepFile::parse("[system]\nU = 4").unwrap().to_plan().unwrap();
        assert_eq!(u4.cfg.pilot_len, 4);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(SweepFile::parse("bogus = 1").is_err());
        assert!(SweepFile::parse("[system]\nfoo = 1").unwrap().to_plan().is_err());
        assert!(SweepFile::parse("transform = \"nope\"").unwrap().to_plan().is_err());
        assert!(SweepFile::parse("[system]\nI = 64").unwrap().to_plan().is_err());
        assert!(SweepFile::parse("trials = 0").unwrap().to_plan().is_err());
    }

    #[test]
    fn overlay_prefers_top() {
        let base = SweepFile::parse("seed = 1\ntrials = 5\n[system]\nB = 32").unwrap();
        let top = SweepFile::parse("seed = 2\n[system]\nrho_db = 0").unwrap();
        let m = base.overlay(top);
        assert_eq!((m.seed, m.trials), (Some(2), Some(5)));
        assert_eq!(m.system.len(), 2);
    }
}
