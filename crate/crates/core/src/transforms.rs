//! Secret unitary embedding and raising transforms.
//!
//! A frame transform is a unitary `C = [C⊥; C∥] ∈ C^{L×L}` derived from a
//! shared secret and a frame counter. UEs embed their length-`K` message
//! rows as `x = s C∥`; the base station raises the receive block as
//! `Ȳ = Y Cᴴ`, whose first `R` columns then contain no UE signal.
//!
//! Three constructions are provided:
//! * [`TransformKind::ExactHaar`]: QR of an i.i.d. complex Gaussian matrix
//!   with the phase correction that makes the result exactly Haar.
//! * [`TransformKind::ApproxDft`] and [`TransformKind::ApproxWht`]:
//!   `C = F D₁ F D₂ F` with `F` the unitary DFT or Walsh–Hadamard matrix and
//!   `D₁, D₂` Rademacher diagonals. These are applied with fast transforms
//!   and never materialized unless asked for.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, MashError, Result};
use crate::framing::ReceiveBlocks;
use crate::hadamard::{self, HadamardPlan};
use crate::linalg::{complex_gaussian, CMat, C64, ZERO};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    ExactHaar,
    ApproxDft,
    ApproxWht,
}

impl TransformKind {
    pub fn key(self) -> &'static str {
        match self {
            TransformKind::ExactHaar => "exact",
            TransformKind::ApproxDft => "dft",
            TransformKind::ApproxWht => "wht",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for TransformKind {
    type Err = MashError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_haar" | "haar" => Ok(TransformKind::ExactHaar),
            "dft" | "approx_dft" => Ok(TransformKind::ApproxDft),
            "wht" | "approx_wht" => Ok(TransformKind::ApproxWht),
            other => Err(MashError::Config(format!(
                "unknown transform '{other}' (expected exact, dft or wht)"
            ))),
        }
    }
}

/// The shared secret, held as opaque bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Secret([u8; 32]);

impl Secret {
    /// Secret from arbitrary key material (hashed to 256 bits).
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Secret(rng::derive_seed("mash/secret", bytes, &[]))
    }

    pub fn from_u64(seed: u64) -> Self {
        Self::from_bytes(&seed.to_le_bytes())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(..)")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub frame_len: usize,
    pub redundancy: usize,
    pub secret: Secret,
    /// Frame counter; a fresh transform is derived for every frame.
    pub frame_index: u64,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, frame_len: usize, redundancy: usize, secret: Secret) -> Result<Self> {
        if frame_len == 0 || redundancy >= frame_len {
            return Err(MashError::Config(format!(
                "need 0 <= R < L, got L={frame_len}, R={redundancy}"
            )));
        }
        if kind == TransformKind::ApproxWht && !hadamard::is_admissible(frame_len) {
            return Err(MashError::HadamardOrder { order: frame_len });
        }
        Ok(Self {
            kind,
            frame_len,
            redundancy,
            secret,
            frame_index: 0,
        })
    }

    pub fn with_frame(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    /// Message length `K = L − R`.
    pub fn message_len(&self) -> usize {
        self.frame_len - self.redundancy
    }

    fn stream(&self, domain: &str) -> rng::StreamRng {
        rng::stream(domain, self.secret.as_bytes(), &[self.frame_index, self.frame_len as u64])
    }
}

/// An explicitly materialized `L × L` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMat);

impl UnitaryMatrix {
    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_inner(self) -> CMat {
        self.0
    }

    pub fn unitarity_error(&self) -> f64 {
        crate::linalg::unitarity_error(&self.0)
    }
}

/// Exactly Haar-distributed `C` from the spec's secret and frame index.
pub fn generate_exact_haar(spec: &TransformSpec) -> Result<UnitaryMatrix> {
    if spec.kind != TransformKind::ExactHaar {
        return Err(MashError::Config(format!("expected an exact Haar spec, got {}", spec.kind)));
    }
    let n = spec.frame_len;
    let mut g = spec.stream("mash/transform/haar");
    let gauss = complex_gaussian(&mut g, n, n, 1.0);
    let qr = gauss.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryMatrix(q))
}

/// Materialized `C = F D₁ F D₂ F` for the approximate kinds.
pub fn generate_approx_haar(spec: &TransformSpec) -> Result<UnitaryMatrix> {
    let fast = FastTransform::from_spec(spec)?;
    Ok(UnitaryMatrix(fast.materialize()))
}

#[derive(Clone)]
enum BaseTransform {
    Dft {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
    },
    Wht(HadamardPlan),
}

impl BaseTransform {
    fn new(kind: TransformKind, n: usize) -> Result<Self> {
        match kind {
            TransformKind::ApproxDft => {
                let mut planner = FftPlanner::new();
                Ok(BaseTransform::Dft {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            }
            TransformKind::ApproxWht => Ok(BaseTransform::Wht(HadamardPlan::new(n)?)),
            TransformKind::ExactHaar => Err(MashError::Config(
                "exact Haar transforms have no fast factorization".into(),
            )),
        }
    }

    /// `v ← Fᵀ v`.
    fn apply_transpose(&self, v: &mut [C64]) {
        let scale = 1.0 / (v.len() as f64).sqrt();
        match self {
            BaseTransform::Dft { forward, .. } => forward.process(v),
            BaseTransform::Wht(plan) => plan.apply(v, true),
        }
        v.iter_mut().for_each(|x| *x *= scale);
    }

    /// `v ← F̄ v`.
    fn apply_conj(&self, v: &mut [C64]) {
        let scale = 1.0 / (v.len() as f64).sqrt();
        match self {
            BaseTransform::Dft { inverse, .. } => inverse.process(v),
            BaseTransform::Wht(plan) => plan.apply(v, false),
        }
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

#[derive(Clone)]
struct FastTransform {
    base: BaseTransform,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl FastTransform {
    fn from_spec(spec: &TransformSpec) -> Result<Self> {
        let base = BaseTransform::new(spec.kind, spec.frame_len)?;
        let mut g = spec.stream("mash/transform/rademacher");
        let mut signs = |n: usize| -> Vec<f64> {
            (0..n).map(|_| if g.random::<bool>() { 1.0 } else { -1.0 }).collect()
        };
        let d1 = signs(spec.frame_len);
        let d2 = signs(spec.frame_len);
        Ok(Self { base, d1, d2 })
    }

    /// Row-vector product `z ← z C`, i.e. `zᵀ ← Fᵀ D₂ Fᵀ D₁ Fᵀ zᵀ`.
    fn right_multiply(&self, z: &mut [C64]) {
        self.base.apply_transpose(z);
        z.iter_mut().zip(&self.d1).for_each(|(x, d)| *x *= *d);
        self.base.apply_transpose(z);
        z.iter_mut().zip(&self.d2).for_each(|(x, d)| *x *= *d);
        self.base.apply_transpose(z);
    }

    /// Row-vector product `y ← y Cᴴ`, i.e. `yᵀ ← F̄ D₁ F̄ D₂ F̄ yᵀ`.
    fn right_multiply_adjoint(&self, y: &mut [C64]) {
        self.base.apply_conj(y);
        y.iter_mut().zip(&self.d2).for_each(|(x, d)| *x *= *d);
        self.base.apply_conj(y);
        y.iter_mut().zip(&self.d1).for_each(|(x, d)| *x *= *d);
        self.base.apply_conj(y);
    }

    fn materialize(&self) -> CMat {
        let n = self.d1.len();
        let mut c = CMat::zeros(n, n);
        let mut row = vec![ZERO; n];
        for i in 0..n {
            row.iter_mut().for_each(|x| *x = ZERO);
            row[i] = C64::new(1.0, 0.0);
            self.right_multiply(&mut row);
            for (j, x) in row.iter().enumerate() {
                c[(i, j)] = *x;
            }
        }
        c
    }
}

#[derive(Clone)]
enum Realization {
    Dense { c: CMat, c_adj: CMat },
    Fast(FastTransform),
}

/// One frame's transform, ready to embed and raise.
#[derive(Clone)]
pub struct Transform {
    spec: TransformSpec,
    real: Realization,
}

impl fmt::Debug for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transform")
            .field("kind", &self.spec.kind)
            .field("frame_len", &self.spec.frame_len)
            .field("redundancy", &self.spec.redundancy)
            .field("frame_index", &self.spec.frame_index)
            .field("fast", &matches!(self.real, Realization::Fast(_)))
            .finish()
    }
}

impl Transform {
    pub fn new(spec: &TransformSpec) -> Result<Self> {
        let real = match spec.kind {
            TransformKind::ExactHaar => {
                let c = generate_exact_haar(spec)?.into_inner();
                let c_adj = c.adjoint();
                Realization::Dense { c, c_adj }
            }
            _ => Realization::Fast(FastTransform::from_spec(spec)?),
        };
        Ok(Self { spec: spec.clone(), real })
    }

    /// Approximate-Haar transform with caller-chosen diagonals.
    pub fn approx_with_diagonals(spec: &TransformSpec, d1: Vec<f64>, d2: Vec<f64>) -> Result<Self> {
        let n = spec.frame_len;
        if d1.len() != n || d2.len() != n {
            return Err(MashError::Dimension {
                context: "approx_with_diagonals",
                expected: format!("{n}"),
                actual: format!("{}/{}", d1.len(), d2.len()),
            });
        }
        let base = BaseTransform::new(spec.kind, n)?;
        Ok(Self {
            spec: spec.clone(),
            real: Realization::Fast(FastTransform { base, d1, d2 }),
        })
    }

    pub fn spec(&self) -> &TransformSpec {
        &self.spec
    }

    pub fn is_fast(&self) -> bool {
        matches!(self.real, Realization::Fast(_))
    }

    pub fn matrix(&self) -> UnitaryMatrix {
        match &self.real {
            Realization::Dense { c, .. } => UnitaryMatrix(c.clone()),
            Realization::Fast(f) => UnitaryMatrix(f.materialize()),
        }
    }

    /// The same `C`, switched to explicit matrix products.
    pub fn to_dense(&self) -> Self {
        let c = self.matrix().into_inner();
        let c_adj = c.adjoint();
        Self {
            spec: self.spec.clone(),
            real: Realization::Dense { c, c_adj },
        }
    }

    /// `X = S C∥` for a `U × K` message.
    pub fn embed(&self, s: &CMat) -> Result<CMat> {
        let (l, r, k) = (self.spec.frame_len, self.spec.redundancy, self.spec.message_len());
        check_dims("embed", (s.nrows(), k), s.shape())?;
        match &self.real {
            Realization::Dense { c, .. } => Ok(s * c.rows(r, k)),
            Realization::Fast(f) => {
                let mut x = CMat::zeros(s.nrows(), l);
                let mut row = vec![ZERO; l];
                for u in 0..s.nrows() {
                    row[..r].iter_mut().for_each(|z| *z = ZERO);
                    for j in 0..k {
                        row[r + j] = s[(u, j)];
                    }
                    f.right_multiply(&mut row);
                    for (j, z) in row.iter().enumerate() {
                        x[(u, j)] = *z;
                    }
                }
                Ok(x)
            }
        }
    }

    /// `Ȳ = Y Cᴴ` for a `B × L` receive block.
    pub fn raise(&self, y: &CMat) -> Result<CMat> {
        let l = self.spec.frame_len;
        check_dims("raise", (y.nrows(), l), y.shape())?;
        match &self.real {
            Realization::Dense { c_adj, .. } => Ok(y * c_adj),
            Realization::Fast(f) => {
                let mut out = CMat::zeros(y.nrows(), l);
                let mut row = vec![ZERO; l];
                for b in 0..y.nrows() {
                    for (j, z) in row.iter_mut().enumerate() {
                        *z = y[(b, j)];
                    }
                    f.right_multiply_adjoint(&mut row);
                    for (j, z) in row.iter().enumerate() {
                        out[(b, j)] = *z;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Raise and split into `[Ȳ_J | Ȳ_T | Ȳ_D]` with `pilot_len` pilot columns.
    pub fn raise_split(&self, y: &CMat, pilot_len: usize) -> Result<ReceiveBlocks> {
        let k = self.spec.message_len();
        if pilot_len > k {
            return Err(MashError::Config(format!("pilot length {pilot_len} exceeds K={k}")));
        }
        let full = self.raise(y)?;
        Ok(ReceiveBlocks::split(&full, self.spec.redundancy, pilot_len))
    }
}

pub fn apply_embed(s: &CMat, transform: &Transform) -> Result<CMat> {
    transform.embed(s)
}

pub fn apply_raise(y: &CMat, transform: &Transform, pilot_len: usize) -> Result<ReceiveBlocks> {
    transform.raise_split(y, pilot_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob2, max_abs, unitarity_error};

    fn spec(kind: TransformKind, l: usize, r: usize, seed: u64) -> TransformSpec {
        TransformSpec::new(kind, l, r, Secret::from_u64(seed)).unwrap()
    }

    #[test]
    fn exact_haar_is_unitary_and_deterministic() {
        let s = spec(TransformKind::ExactHaar, 4, 1, 9);
        let c = generate_exact_haar(&s).unwrap();
        assert!(c.unitarity_error() < 1e-12);
        assert_eq!(c, generate_exact_haar(&s).unwrap());
        let other = generate_exact_haar(&s.clone().with_frame(1)).unwrap();
        assert_ne!(c, other);
    }

    #[test]
    fn one_by_one_haar_has_unit_modulus() {
        let s = spec(TransformKind::ExactHaar, 1, 0, 3);
        let c = generate_exact_haar(&s).unwrap();
        assert!((c.as_matrix()[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn haar_entries_have_mean_energy_one_over_l() {
        // E|C_11|^2 = 1/2 for L = 2; |C_11|^2 ~ Uniform(0,1) so var = 1/12.
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|seed| {
                let c = generate_exact_haar(&spec(TransformKind::ExactHaar, 2, 1, seed)).unwrap();
                c.as_matrix()[(0, 0)].norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn wht_orders() {
        assert!(TransformSpec::new(TransformKind::ApproxWht, 96, 16, Secret::from_u64(1)).is_ok());
        let err = TransformSpec::new(TransformKind::ApproxWht, 100, 16, Secret::from_u64(1)).unwrap_err();
        assert!(err.to_string().contains("admissible"), "{err}");
        let c = generate_approx_haar(&spec(TransformKind::ApproxWht, 8, 2, 5)).unwrap();
        assert!(c.unitarity_error() < 1e-12);
    }

    #[test]
    fn dft_with_identity_diagonals_is_dft_cubed() {
        let n = 4;
        let s = spec(TransformKind::ApproxDft, n, 1, 0);
        let t = Transform::approx_with_diagonals(&s, vec![1.0; n], vec![1.0; n]).unwrap();
        let w = -2.0 * std::f64::consts::PI / n as f64;
        let f = CMat::from_fn(n, n, |j, k| C64::from_polar(1.0 / (n as f64).sqrt(), w * (j * k) as f64));
        let expected = &f * &f * &f;
        assert!(max_abs(&(t.matrix().into_inner() - expected)) < 1e-12);
    }

    #[test]
    fn zero_message_embeds_to_zero() {
        let t = Transform::new(&spec(TransformKind::ExactHaar, 10, 3, 1)).unwrap();
        let x = t.embed(&CMat::zeros(2, 7)).unwrap();
        assert_eq!(max_abs(&x), 0.0);
    }

    #[test]
    fn embed_rejects_wrong_width() {
        let t = Transform::new(&spec(TransformKind::ExactHaar, 10, 3, 1)).unwrap();
        assert!(matches!(t.embed(&CMat::zeros(2, 8)), Err(MashError::Dimension { .. })));
        assert!(matches!(t.raise(&CMat::zeros(2, 9)), Err(MashError::Dimension { .. })));
    }

    #[test]
    fn raise_inverts_embed_for_all_kinds() {
        let mut g = rng::seeded("t", 0, &[]);
        for kind in [TransformKind::ExactHaar, TransformKind::ApproxDft, TransformKind::ApproxWht] {
            let t = Transform::new(&spec(kind, 16, 4, 11)).unwrap();
            let s = complex_gaussian(&mut g, 3, 12, 1.0);
            let x = t.embed(&s).unwrap();
            for u in 0..3 {
                let a: f64 = s.row(u).iter().map(|z| z.norm_sqr()).sum();
                let b: f64 = x.row(u).iter().map(|z| z.norm_sqr()).sum();
                assert!((a - b).abs() < 1e-10 * a);
            }
            let blocks = t.raise_split(&x, 2).unwrap();
            assert!(max_abs(&blocks.jam) < 1e-10);
            assert!(max_abs(&(crate::linalg::hconcat(&blocks.pilot, &blocks.data) - s)) < 1e-10);
        }
    }

    #[test]
    fn fast_and_dense_paths_agree() {
        let mut g = rng::seeded("t", 1, &[]);
        for kind in [TransformKind::ApproxDft, TransformKind::ApproxWht] {
            let fast = Transform::new(&spec(kind, 24, 5, 4)).unwrap();
            let dense = fast.to_dense();
            assert!(fast.is_fast() && !dense.is_fast());
            let s = complex_gaussian(&mut g, 4, 19, 1.0);
            let (xf, xd) = (fast.embed(&s).unwrap(), dense.embed(&s).unwrap());
            assert!(frob2(&(&xf - &xd)).sqrt() < 1e-10 * frob2(&xd).sqrt());
            let y = complex_gaussian(&mut g, 6, 24, 1.0);
            let (yf, yd) = (fast.raise(&y).unwrap(), dense.raise(&y).unwrap());
            assert!(frob2(&(&yf - &yd)).sqrt() < 1e-10 * frob2(&yd).sqrt());
        }
    }

    #[test]
    fn raising_preserves_frobenius_norm() {
        let t = Transform::new(&spec(TransformKind::ExactHaar, 12, 2, 8)).unwrap();
        let mut y = CMat::zeros(3, 12);
        for b in 0..3 {
            y[(b, 5)] = C64::new(b as f64 + 1.0, -0.5);
        }
        let ybar = t.raise(&y).unwrap();
        assert!((frob2(&ybar) - frob2(&y)).abs() < 1e-10 * frob2(&y));
    }

    #[test]
    fn approx_is_unitary() {
        for (kind, l) in [(TransformKind::ApproxDft, 100), (TransformKind::ApproxWht, 96)] {
            let c = generate_approx_haar(&spec(kind, l, 16, 2)).unwrap();
            assert!(unitarity_error(c.as_matrix()) < 1e-12);
        }
    }
}
