//! Legitimate transmit signals: constellation, pilots, and the two frame
//! formats (secret-subspace embedded and baseline interleaved).

use rand::Rng;

use crate::error::{check_dims, MashError, Result};
use crate::hadamard;
use crate::linalg::{select_columns, CMat, C64};
use crate::transforms::Transform;

/// A unit-average-energy constellation with a bit labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    /// `points[label]` is the symbol carrying the bits of `label` (MSB first).
    pub points: Vec<C64>,
    pub bits_per_symbol: usize,
    /// Half-width used to clip real and imaginary parts in the proximal step.
    pub clip: f64,
}

impl Constellation {
    /// Gray-mapped QPSK: bit pair `b0 b1` maps to `((1 − 2 b0) + j (1 − 2 b1)) / √2`.
    ///
    /// | bits | symbol          |
    /// |------|-----------------|
    /// | 00   | ( 1 + j) / √2   |
    /// | 01   | ( 1 − j) / √2   |
    /// | 10   | (−1 + j) / √2   |
    /// | 11   | (−1 − j) / √2   |
    pub fn qpsk() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let points = (0..4u8)
            .map(|label| {
                let b0 = f64::from((label >> 1) & 1);
                let b1 = f64::from(label & 1);
                C64::new((1.0 - 2.0 * b0) * h, (1.0 - 2.0 * b1) * h)
            })
            .collect();
        Self {
            points,
            bits_per_symbol: 2,
            clip: std::f64::consts::SQRT_2,
        }
    }

    pub fn nearest_label(&self, z: C64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (label, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best.1 {
                best = (label, d);
            }
        }
        best.0
    }

    pub fn nearest(&self, z: C64) -> C64 {
        self.points[self.nearest_label(z)]
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<C64>> {
        let k = self.bits_per_symbol;
        if bits.len() % k != 0 {
            return Err(MashError::Config(format!(
                "{} bits is not a multiple of {k} bits per symbol",
                bits.len()
            )));
        }
        Ok(bits
            .chunks_exact(k)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
                self.points[label]
            })
            .collect())
    }

    pub fn demap(&self, symbols: &[C64]) -> Vec<u8> {
        let k = self.bits_per_symbol;
        let mut bits = Vec::with_capacity(symbols.len() * k);
        for &z in symbols {
            let label = self.nearest_label(z);
            for shift in (0..k).rev() {
                bits.push(((label >> shift) & 1) as u8);
            }
        }
        bits
    }
}

/// Orthogonal `±1` pilots: the `U × U` Hadamard matrix.
pub fn make_pilots(ues: usize) -> Result<CMat> {
    let h = hadamard::matrix(ues)?;
    Ok(CMat::from_fn(ues, ues, |i, j| C64::from(f64::from(h[i * ues + j]))))
}

/// One frame's message `S = [S_T, S_D]` and the bits carried by `S_D`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageFrame {
    pub pilots: CMat,
    pub data: CMat,
    /// Row-major: UE, then data symbol, then bit within the symbol.
    pub bits: Vec<u8>,
}

impl MessageFrame {
    pub fn from_bits(pilots: CMat, bits: Vec<u8>, data_len: usize, constellation: &Constellation) -> Result<Self> {
        let ues = pilots.nrows();
        let expected = ues * data_len * constellation.bits_per_symbol;
        if bits.len() != expected {
            return Err(MashError::Dimension {
                context: "message bits",
                expected: expected.to_string(),
                actual: bits.len().to_string(),
            });
        }
        let syms = constellation.map_bits(&bits)?;
        let data = CMat::from_fn(ues, data_len, |u, d| syms[u * data_len + d]);
        Ok(Self { pilots, data, bits })
    }

    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        pilots: CMat,
        data_len: usize,
        constellation: &Constellation,
    ) -> Result<Self> {
        let n = pilots.nrows() * data_len * constellation.bits_per_symbol;
        let bits = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        Self::from_bits(pilots, bits, data_len, constellation)
    }

    pub fn ues(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn pilot_len(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn data_len(&self) -> usize {
        self.data.ncols()
    }

    /// `[S_T, S_D]`.
    pub fn symbols(&self) -> CMat {
        crate::linalg::hconcat(&self.pilots, &self.data)
    }
}

/// Slot assignment of a baseline frame (0-based sample indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub frame_len: usize,
    pub training: Vec<usize>,
    pub pilots: Vec<usize>,
    pub data: Vec<usize>,
    /// Whether the victims embed their message (the slots remain those of
    /// the baseline frame, which is what timing-aware jammers target).
    pub embedded: bool,
}

impl FrameLayout {
    /// Training slot `i ∈ 1..=R` sits at 1-based position `⌈i L / R⌉`; the
    /// remaining slots carry `T` pilots and then data, in order.
    pub fn baseline(frame_len: usize, redundancy: usize, pilot_len: usize) -> Result<Self> {
        if redundancy + pilot_len > frame_len {
            return Err(MashError::Config(format!(
                "R + T = {} exceeds L = {frame_len}",
                redundancy + pilot_len
            )));
        }
        let training: Vec<usize> = (1..=redundancy)
            .map(|i| (i * frame_len).div_ceil(redundancy) - 1)
            .collect();
        let mut is_training = vec![false; frame_len];
        training.iter().for_each(|&k| is_training[k] = true);
        let rest: Vec<usize> = (0..frame_len).filter(|&k| !is_training[k]).collect();
        let (pilots, data) = rest.split_at(pilot_len);
        Ok(Self {
            frame_len,
            training,
            pilots: pilots.to_vec(),
            data: data.to_vec(),
            embedded: false,
        })
    }

    pub fn with_embedding(mut self, embedded: bool) -> Self {
        self.embedded = embedded;
        self
    }

    pub fn redundancy(&self) -> usize {
        self.training.len()
    }

    pub fn message_slots(&self) -> Vec<usize> {
        self.pilots.iter().chain(&self.data).copied().collect()
    }
}

/// Receive samples split into jammer-training, pilot and data blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveBlocks {
    pub jam: CMat,
    pub pilot: CMat,
    pub data: CMat,
}

impl ReceiveBlocks {
    /// Frobenius norm of the whole raised block.
    pub fn norm(&self) -> f64 {
        (self.jam.norm_squared() + self.pilot.norm_squared() + self.data.norm_squared()).sqrt()
    }

    /// Column split `[R | T | rest]` of a raised block.
    pub fn split(full: &CMat, redundancy: usize, pilot_len: usize) -> Self {
        let n = full.ncols();
        Self {
            jam: full.columns(0, redundancy).into_owned(),
            pilot: full.columns(redundancy, pilot_len).into_owned(),
            data: full
                .columns(redundancy + pilot_len, n - redundancy - pilot_len)
                .into_owned(),
        }
    }

    /// Gather the baseline frame's slots from a physical receive block.
    pub fn gather(y: &CMat, layout: &FrameLayout) -> Result<Self> {
        check_dims("gather", (y.nrows(), layout.frame_len), y.shape())?;
        Ok(Self {
            jam: select_columns(y, &layout.training),
            pilot: select_columns(y, &layout.pilots),
            data: select_columns(y, &layout.data),
        })
    }

    pub fn antennas(&self) -> usize {
        self.jam.nrows()
    }
}

/// `X = [S_T, S_D] C∥`.
pub fn build_mash_frame(msg: &MessageFrame, transform: &Transform) -> Result<CMat> {
    transform.embed(&msg.symbols())
}

/// Zeros at the training slots, `S_T` then `S_D` elsewhere.
pub fn build_baseline_frame(msg: &MessageFrame, layout: &FrameLayout) -> Result<CMat> {
    let s = msg.symbols();
    let slots = layout.message_slots();
    check_dims("baseline frame", (msg.ues(), slots.len()), s.shape())?;
    let mut x = CMat::zeros(msg.ues(), layout.frame_len);
    for (j, &slot) in slots.iter().enumerate() {
        x.set_column(slot, &s.column(j));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob2, max_abs};
    use crate::rng;
    use crate::transforms::{Secret, TransformKind, TransformSpec};

    #[test]
    fn qpsk_table() {
        let q = Constellation::qpsk();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(q.map_bits(&[0, 0]).unwrap(), vec![C64::new(h, h)]);
        assert_eq!(q.map_bits(&[1, 1]).unwrap(), vec![C64::new(-h, -h)]);
        let energy: f64 = q.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / 4.0;
        assert!((energy - 1.0).abs() < 1e-15);
        assert!(q.map_bits(&[0, 1, 1]).is_err());
    }

    #[test]
    fn qpsk_neighbours_differ_in_one_bit() {
        let q = Constellation::qpsk();
        for a in 0..4usize {
            for b in 0..4usize {
                let d = (q.points[a] - q.points[b]).norm();
                if (d - std::f64::consts::SQRT_2).abs() < 1e-12 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn demap_inverts_map_and_tolerates_small_errors() {
        let q = Constellation::qpsk();
        let bits = vec![0, 0, 0, 1, 1, 0, 1, 1];
        let syms = q.map_bits(&bits).unwrap();
        assert_eq!(q.demap(&syms), bits);
        let eps = [C64::new(0.07, -0.05), C64::new(-0.09, 0.0), C64::new(0.0, 0.099), C64::new(-0.06, -0.06)];
        let noisy: Vec<C64> = syms.iter().zip(eps).map(|(s, e)| s + e).collect();
        assert_eq!(q.demap(&noisy), bits);
    }

    #[test]
    fn pilots_are_orthogonal() {
        let p = make_pilots(2).unwrap();
        assert_eq!(p, CMat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0].map(C64::from)));
        let p = make_pilots(16).unwrap();
        assert!(p.iter().all(|z| z.im == 0.0 && z.re.abs() == 1.0));
        assert!(max_abs(&(&p * p.adjoint() - CMat::identity(16, 16) * C64::from(16.0))) < 1e-12);
        assert!(make_pilots(6).is_err());
    }

    #[test]
    fn baseline_training_slots_are_evenly_spread() {
        let layout = FrameLayout::baseline(10, 2, 3).unwrap();
        assert_eq!(layout.training, vec![4, 9]);
        assert_eq!(layout.pilots, vec![0, 1, 2]);
        assert_eq!(layout.data, vec![3, 5, 6, 7, 8]);
        let layout = FrameLayout::baseline(100, 16, 16).unwrap();
        assert_eq!(layout.data.len(), 68);
        let mut all: Vec<usize> = layout.training.iter().chain(&layout.pilots).chain(&layout.data).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn baseline_frame_round_trip_and_energy() {
        let q = Constellation::qpsk();
        let mut g = rng::seeded("t", 0, &[]);
        let msg = MessageFrame::random(&mut g, make_pilots(4).unwrap(), 6, &q).unwrap();
        let layout = FrameLayout::baseline(12, 2, 4).unwrap();
        let x = build_baseline_frame(&msg, &layout).unwrap();
        for &k in &layout.training {
            assert!(x.column(k).iter().all(|z| *z == C64::from(0.0)));
        }
        let back = select_columns(&x, &layout.message_slots());
        assert_eq!(back, msg.symbols());
        assert!((frob2(&x) - frob2(&msg.symbols())).abs() < 1e-12);
    }

    #[test]
    fn mash_and_baseline_frames_have_equal_energy() {
        let q = Constellation::qpsk();
        let mut g = rng::seeded("t", 1, &[]);
        let msg = MessageFrame::random(&mut g, make_pilots(4).unwrap(), 6, &q).unwrap();
        let spec = TransformSpec::new(TransformKind::ExactHaar, 12, 2, Secret::from_u64(3)).unwrap();
        let t = Transform::new(&spec).unwrap();
        let xm = build_mash_frame(&msg, &t).unwrap();
        let xb = build_baseline_frame(&msg, &FrameLayout::baseline(12, 2, 4).unwrap()).unwrap();
        assert!((frob2(&xm) - frob2(&xb)).abs() < 1e-10);
        // Per-UE energy is spread over the L samples.
        for u in 0..4 {
            let e: f64 = xm.row(u).iter().map(|z| z.norm_sqr()).sum();
            assert!((e / 12.0 - 10.0 / 12.0).abs() < 1e-10);
        }
    }
}
