//! Toy trapdoor claw-free and injective function families over a keyed Feistel
//! permutation, plus the Z₄ arithmetic used by the state-preparation verifier.
//!
//! The instantiation is insecure on purpose: it meets the functional contract
//! (two-to-one with a trapdoor-recoverable claw, or injective) and nothing more.
//! The adaptive hardcore bit and collapsing properties are UNSATISFIED-BY-TOY.

use crate::qcore::C64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MIN_N: u32 = 4;
pub const MAX_N: u32 = 32;
const ROUNDS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TcfError {
    #[error("preimage length must be even and within [{MIN_N}, {MAX_N}], got {0}")]
    BadWidth(u32),
    #[error("value {0:#x} has no preimage")]
    NoPreimage(u64),
    #[error("bit string length must be even, got {0}")]
    OddLength(u32),
    #[error("the two preimages coincide, the phase code is undefined")]
    Undefined,
    #[error("Z4 digit out of range: {0}")]
    BadDigit(u8),
    #[error("Z4 vector has {got} digits, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("input {0:#x} does not fit the domain")]
    OutOfDomain(u64),
    #[error("malformed key: {0}")]
    BadKey(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TcfMode {
    TwoToOne,
    Injective,
}

impl TcfMode {
    pub fn letter(self) -> &'static str {
        match self {
            TcfMode::TwoToOne => "f",
            TcfMode::Injective => "g",
        }
    }
}

fn check_width(n: u32) -> Result<(), TcfError> {
    if n % 2 != 0 || !(MIN_N..=MAX_N).contains(&n) {
        return Err(TcfError::BadWidth(n));
    }
    Ok(())
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn round_keys(seed: &[u8; 16]) -> [u64; ROUNDS] {
    let mut keys = [0u64; ROUNDS];
    for half in 0..2u8 {
        let digest = Sha256::new().chain_update(seed).chain_update([half]).finalize();
        for j in 0..4 {
            let bytes: [u8; 8] = digest[8 * j..8 * j + 8].try_into().expect("8 bytes");
            keys[4 * half as usize + j] = u64::from_le_bytes(bytes);
        }
    }
    keys
}

/// Keyed permutation of {0,1}^(n+1): alternating Feistel rounds over a left half of
/// ⌊(n+1)/2⌋ bits and a right half of the remaining bits.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Feistel {
    keys: [u64; ROUNDS],
    left: u32,
    right: u32,
}

impl Feistel {
    fn new(seed: &[u8; 16], width: u32) -> Self {
        Feistel { keys: round_keys(seed), left: width / 2, right: width - width / 2 }
    }

    fn forward(&self, z: u64) -> u64 {
        let (ml, mr) = (mask(self.left), mask(self.right));
        let (mut l, mut r) = (z >> self.right, z & mr);
        for (i, k) in self.keys.iter().enumerate() {
            if i % 2 == 0 {
                l ^= mix(k ^ r) & ml;
            } else {
                r ^= mix(k ^ l) & mr;
            }
        }
        (l << self.right) | r
    }

    fn backward(&self, z: u64) -> u64 {
        let (ml, mr) = (mask(self.left), mask(self.right));
        let (mut l, mut r) = (z >> self.right, z & mr);
        for (i, k) in self.keys.iter().enumerate().rev() {
            if i % 2 == 0 {
                l ^= mix(k ^ r) & ml;
            } else {
                r ^= mix(k ^ l) & mr;
            }
        }
        (l << self.right) | r
    }
}

/// Evaluation key. Fields stay private so code holding only this handle cannot
/// branch on the family it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    n: u32,
    seed: [u8; 16],
    tag: u8,
    shift: u64,
    perm: Feistel,
}

impl PublicKey {
    fn build(n: u32, seed: [u8; 16], tag: u8, shift: u64) -> Self {
        PublicKey { n, seed, tag, shift, perm: Feistel::new(&seed, n + 1) }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// h(b, x) = π((tag·b) ∥ (x ⊕ b·shift)).
    pub fn eval(&self, b: u8, x: u64) -> Result<u64, TcfError> {
        if b > 1 {
            return Err(TcfError::OutOfDomain(u64::from(b)));
        }
        if x > mask(self.n) {
            return Err(TcfError::OutOfDomain(x));
        }
        let bb = u64::from(b);
        let top = u64::from(self.tag) * bb;
        let low = x ^ (bb * self.shift);
        Ok(self.perm.forward((top << self.n) | low))
    }

    /// seed(16) ∥ tag(1) ∥ shift(8, LE) ∥ n(1).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.seed.to_vec();
        out.push(self.tag);
        out.extend_from_slice(&self.shift.to_le_bytes());
        out.push(self.n as u8);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TcfError> {
        if bytes.len() != 26 {
            return Err(TcfError::BadKey(format!("public key has {} bytes, expected 26", bytes.len())));
        }
        let seed: [u8; 16] = bytes[..16].try_into().expect("16 bytes");
        let tag = bytes[16];
        let shift = u64::from_le_bytes(bytes[17..25].try_into().expect("8 bytes"));
        let n = u32::from(bytes[25]);
        check_width(n)?;
        if tag > 1 || shift > mask(n) {
            return Err(TcfError::BadKey("tag or shift out of range".into()));
        }
        Ok(PublicKey::build(n, seed, tag, shift))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcfKeyPair {
    mode: TcfMode,
    n: u32,
    pk: PublicKey,
    delta: u64,
}

/// Nonzero claw shift with at least one bit set at an even position, so the claw
/// differs in J and the phase code is uniform over d.
fn sample_delta<R: Rng + ?Sized>(n: u32, rng: &mut R) -> u64 {
    let even: u64 = (0..n).step_by(2).map(|i| 1u64 << i).sum();
    loop {
        let d = rng.gen::<u64>() & mask(n);
        if d & even != 0 {
            return d;
        }
    }
}

pub fn gen<R: Rng + ?Sized>(mode: TcfMode, n: u32, rng: &mut R) -> Result<TcfKeyPair, TcfError> {
    check_width(n)?;
    let mut seed = [0u8; 16];
    rng.fill(&mut seed[..]);
    let (pk, delta) = match mode {
        TcfMode::TwoToOne => {
            let delta = sample_delta(n, rng);
            (PublicKey::build(n, seed, 0, delta), delta)
        }
        TcfMode::Injective => (PublicKey::build(n, seed, 1, 0), 0),
    };
    Ok(TcfKeyPair { mode, n, pk, delta })
}

/// Preimage set of an image: one entry for injective keys, both claw members
/// ordered by leading bit for two-to-one keys.
pub type Preimages = Vec<(u8, u64)>;

impl TcfKeyPair {
    pub fn mode(&self) -> TcfMode {
        self.mode
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn public(&self) -> &PublicKey {
        &self.pk
    }

    /// Zero for injective keys.
    pub fn claw_shift(&self) -> u64 {
        self.delta
    }

    pub fn eval(&self, b: u8, x: u64) -> Result<u64, TcfError> {
        self.pk.eval(b, x)
    }

    /// mode(1) ∥ Δ(8, LE).
    pub fn trapdoor_bytes(&self) -> Vec<u8> {
        let mut out = vec![u8::from(self.mode == TcfMode::Injective)];
        out.extend_from_slice(&self.delta.to_le_bytes());
        out
    }

    pub fn invert(&self, y: u64) -> Result<Preimages, TcfError> {
        if y > mask(self.n + 1) {
            return Err(TcfError::NoPreimage(y));
        }
        let z = self.pk.perm.backward(y);
        let top = (z >> self.n) as u8;
        let low = z & mask(self.n);
        match self.mode {
            TcfMode::TwoToOne if top == 0 => Ok(vec![(0, low), (1, low ^ self.delta)]),
            TcfMode::TwoToOne => Err(TcfError::NoPreimage(y)),
            TcfMode::Injective => Ok(vec![(top, low)]),
        }
    }

    pub fn to_json(&self) -> KeyJson {
        KeyJson {
            mode: self.mode.letter().into(),
            n: self.n,
            pk: self.pk.to_hex(),
            td: hex::encode(self.trapdoor_bytes()),
        }
    }

    pub fn from_json(j: &KeyJson) -> Result<Self, TcfError> {
        let bad = |m: &str| TcfError::BadKey(m.into());
        let pk = PublicKey::from_bytes(&hex::decode(&j.pk).map_err(|e| bad(&e.to_string()))?)?;
        let td = hex::decode(&j.td).map_err(|e| bad(&e.to_string()))?;
        if td.len() != 9 || pk.n != j.n {
            return Err(bad("trapdoor length or width mismatch"));
        }
        let mode = match (j.mode.as_str(), td[0]) {
            ("f", 0) => TcfMode::TwoToOne,
            ("g", 1) => TcfMode::Injective,
            _ => return Err(bad("mode letter disagrees with trapdoor")),
        };
        let delta = u64::from_le_bytes(td[1..9].try_into().expect("8 bytes"));
        let consistent = match mode {
            TcfMode::TwoToOne => pk.tag == 0 && pk.shift == delta && delta != 0,
            TcfMode::Injective => pk.tag == 1 && pk.shift == 0 && delta == 0,
        };
        if !consistent {
            return Err(bad("public key and trapdoor disagree"));
        }
        Ok(TcfKeyPair { mode, n: j.n, pk, delta })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyJson {
    pub mode: String,
    pub n: u32,
    pub pk: String,
    pub td: String,
}

/// Hands the simulated honest prover the preimage register it would physically
/// hold after measuring the image, without exposing the trapdoor or the family.
#[derive(Debug, Clone)]
pub struct PreimageOracle {
    keys: TcfKeyPair,
}

impl PreimageOracle {
    pub fn new(keys: TcfKeyPair) -> Self {
        PreimageOracle { keys }
    }

    pub fn public(&self) -> &PublicKey {
        self.keys.public()
    }

    pub fn collapse(&self, y: u64) -> Result<Preimages, TcfError> {
        self.keys.invert(y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Z4Vector(Vec<u8>);

impl Z4Vector {
    pub fn new(digits: Vec<u8>) -> Result<Self, TcfError> {
        if let Some(&d) = digits.iter().find(|&&d| d > 3) {
            return Err(TcfError::BadDigit(d));
        }
        Ok(Z4Vector(digits))
    }

    pub fn zero(w: usize) -> Self {
        Z4Vector(vec![0; w])
    }

    pub fn random<R: Rng + ?Sized>(w: usize, rng: &mut R) -> Self {
        Z4Vector((0..w).map(|_| rng.gen_range(0..4u8)).collect())
    }

    /// Digit j sits at bits 2j, 2j+1 of the packed integer.
    pub fn from_packed(packed: u64, w: usize) -> Self {
        Z4Vector((0..w).map(|j| ((packed >> (2 * j)) & 3) as u8).collect())
    }

    pub fn packed(&self) -> u64 {
        self.0.iter().enumerate().map(|(j, &d)| u64::from(d) << (2 * j)).sum()
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &Z4Vector) -> Result<u8, TcfError> {
        if self.len() != other.len() {
            return Err(TcfError::BadLength { expected: self.len(), got: other.len() });
        }
        let s: u32 = self.0.iter().zip(&other.0).map(|(&a, &b)| u32::from(a) * u32::from(b)).sum();
        Ok((s % 4) as u8)
    }
}

/// J(x)_j = x_{2j} + 2·x_{2j+1}, bits counted from the least significant.
pub fn j_encode(x: u64, n: u32) -> Result<Z4Vector, TcfError> {
    if n % 2 != 0 {
        return Err(TcfError::OddLength(n));
    }
    if x > mask(n) {
        return Err(TcfError::OutOfDomain(x));
    }
    Ok(Z4Vector::from_packed(x, (n / 2) as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// t = d·(J(x₁) − J(x₀)) mod 4.
pub fn theta_code(d: &Z4Vector, x0: u64, x1: u64, n: u32) -> Result<u8, TcfError> {
    if x0 == x1 {
        return Err(TcfError::Undefined);
    }
    let (j0, j1) = (j_encode(x0, n)?, j_encode(x1, n)?);
    let diff = Z4Vector(j1.0.iter().zip(&j0.0).map(|(&a, &b)| (4 + a - b) % 4).collect());
    d.dot(&diff)
}

pub fn split_code(t: u8) -> (Axis, u8) {
    (if t & 1 == 0 { Axis::X } else { Axis::Y }, t >> 1)
}

pub fn join_code(axis: Axis, v: u8) -> u8 {
    u8::from(axis == Axis::Y) + 2 * v
}

pub fn w_v_from_d(d: &Z4Vector, x0: u64, x1: u64, n: u32) -> Result<(Axis, u8), TcfError> {
    Ok(split_code(theta_code(d, x0, x1, n)?))
}

/// Exact outcome of measuring the preimage register in the Z₄ Fourier basis.
/// Entry d (packed) holds P(d) and the normalised residual qubit on the b register.
pub fn fourier_measurement(pre: &[(u8, u64)], n: u32) -> Result<Vec<(f64, [C64; 2])>, TcfError> {
    check_width(n)?;
    if n > 8 {
        return Err(TcfError::BadWidth(n));
    }
    let w = (n / 2) as usize;
    let size = 1usize << n;
    let amp = C64::new(1.0 / (pre.len() as f64).sqrt(), 0.0);
    let mut branches = [vec![C64::new(0.0, 0.0); size], vec![C64::new(0.0, 0.0); size]];
    for &(b, x) in pre {
        if b > 1 || x as usize >= size {
            return Err(TcfError::OutOfDomain(x));
        }
        // J(x) packed coincides with x itself.
        branches[b as usize][x as usize] += amp;
    }
    let phase = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    for psi in branches.iter_mut() {
        for j in 0..w {
            let stride = 1usize << (2 * j);
            for base in 0..size {
                if (base >> (2 * j)) & 3 != 0 {
                    continue;
                }
                let v: [C64; 4] = std::array::from_fn(|k| psi[base + k * stride]);
                for d in 0..4 {
                    psi[base + d * stride] = (0..4).map(|k| v[k] * phase[(d * k) % 4]).sum::<C64>() * 0.5;
                }
            }
        }
    }
    Ok((0..size)
        .map(|d| {
            let q = [branches[0][d], branches[1][d]];
            let p = q[0].norm_sqr() + q[1].norm_sqr();
            let s = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
            (p, [q[0] * s, q[1] * s])
        })
        .collect())
}
