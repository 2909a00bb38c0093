//! Remote preparation of one of six qubit states through a classical interaction:
//! verifier state machine, an honest prover, JSONL transcripts and the QRAC tally.

use crate::par::run_chunked;
use crate::qcore::{sample_index, PureState, QError, RngState, C64};
use crate::tcf::{
    fourier_measurement, gen, join_code, split_code, theta_code, Axis, PreimageOracle, Preimages,
    PublicKey, TcfError, TcfKeyPair, TcfMode, Z4Vector,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RspError {
    #[error(transparent)]
    Tcf(#[from] TcfError),
    #[error(transparent)]
    Q(#[from] QError),
    #[error("no QRAC records were collected")]
    EmptyQrac,
    #[error("round count must be positive")]
    NoRounds,
    #[error("brute-force prover supports widths up to 8, got {0}")]
    BruteForceWidth(u32),
    #[error("transcript output failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundTag {
    R1,
    R2a,
    R2b,
    R3a,
    R3b,
}

impl RoundTag {
    pub fn can_follow(self, prev: RoundTag) -> bool {
        matches!(
            (prev, self),
            (RoundTag::R1, RoundTag::R2a | RoundTag::R2b) | (RoundTag::R2b, RoundTag::R3a | RoundTag::R3b)
        )
    }
}

/// Single-qubit observables the verifier may ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    X,
    #[serde(rename = "X-Y")]
    XMinusY,
    Y,
    #[serde(rename = "X+Y")]
    XPlusY,
    Z,
}

impl Observable {
    pub const ALL: [Observable; 5] = [Observable::X, Observable::XMinusY, Observable::Y, Observable::XPlusY, Observable::Z];

    /// Bloch direction of the +1 eigenvector.
    pub fn axis(self) -> [f64; 3] {
        match self {
            Observable::X => [1.0, 0.0, 0.0],
            Observable::XMinusY => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0],
            Observable::Y => [0.0, 1.0, 0.0],
            Observable::XPlusY => [FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0],
            Observable::Z => [0.0, 0.0, 1.0],
        }
    }

    pub fn is_diagonal(self) -> bool {
        matches!(self, Observable::XMinusY | Observable::XPlusY)
    }

    fn matches_axis(self, a: Axis) -> bool {
        matches!((self, a), (Observable::X, Axis::X) | (Observable::Y, Axis::Y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitLabel {
    /// (|0⟩ + e^{iθ}|1⟩)/√2 with θ = code · π/2.
    PlusTheta(u8),
    Basis(u8),
}

impl QubitLabel {
    /// Position in the order |0⟩, |1⟩, |+⟩, |−⟩, |i⟩, |−i⟩.
    pub fn six_state_index(self) -> usize {
        match self {
            QubitLabel::Basis(b) => b as usize,
            QubitLabel::PlusTheta(t) => [2, 4, 3, 5][(t & 3) as usize],
        }
    }

    pub fn ket(self) -> PureState {
        let amps = match self {
            QubitLabel::Basis(0) => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            QubitLabel::Basis(_) => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            QubitLabel::PlusTheta(t) => {
                [C64::new(FRAC_1_SQRT_2, 0.0), C64::from_polar(FRAC_1_SQRT_2, FRAC_PI_2 * f64::from(t & 3))]
            }
        };
        PureState::from_slice(&amps).expect("unit vector")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProverQubit {
    pub label: QubitLabel,
    pub state: PureState,
}

impl ProverQubit {
    pub fn new(label: QubitLabel) -> Self {
        ProverQubit { label, state: label.ket() }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let a = self.state.amps();
        let c = a[0].conj() * a[1];
        [2.0 * c.re, 2.0 * c.im, a[0].norm_sqr() - a[1].norm_sqr()]
    }

    /// Probability of the +1 outcome (reported as v = 0).
    pub fn prob_zero(&self, c: Observable) -> f64 {
        let r = self.bloch();
        let n = c.axis();
        (0.5 * (1.0 + r[0] * n[0] + r[1] * n[1] + r[2] * n[2])).clamp(0.0, 1.0)
    }
}

pub fn prover_basis_measure<R: Rng + ?Sized>(qubit: &ProverQubit, c: Observable, rng: &mut R) -> u8 {
    u8::from(rng.gen::<f64>() >= qubit.prob_zero(c))
}

/// What the verifier holds after the first round.
#[derive(Debug, Clone)]
pub struct VerifierSession {
    pub g: u8,
    keys: TcfKeyPair,
}

impl VerifierSession {
    pub fn keys(&self) -> &TcfKeyPair {
        &self.keys
    }

    pub fn public(&self) -> &PublicKey {
        self.keys.public()
    }
}

pub fn verifier_begin<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<VerifierSession, RspError> {
    let g = rng.gen_range(0..2u8);
    let mode = if g == 0 { TcfMode::TwoToOne } else { TcfMode::Injective };
    Ok(VerifierSession { g, keys: gen(mode, n, rng)? })
}

/// The collapsed preimage register held by the prover after it measured y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProverCommitState {
    n: u32,
    preimages: Preimages,
}

impl ProverCommitState {
    pub fn preimages(&self) -> &[(u8, u64)] {
        &self.preimages
    }
}

pub fn honest_prover_commit<R: Rng + ?Sized>(oracle: &PreimageOracle, rng: &mut R) -> Result<(u64, ProverCommitState), RspError> {
    let pk = oracle.public();
    let b = rng.gen_range(0..2u8);
    let x = rng.gen_range(0..1u64 << pk.n());
    let y = pk.eval(b, x)?;
    let preimages = oracle.collapse(y)?;
    Ok((y, ProverCommitState { n: pk.n(), preimages }))
}

pub fn prover_preimage<R: Rng + ?Sized>(state: &ProverCommitState, rng: &mut R) -> (u8, u64) {
    match state.preimages.as_slice() {
        [one] => *one,
        many => many[rng.gen_range(0..many.len())],
    }
}

/// Fourier-basis measurement of the preimage register. The analytic form draws d
/// uniformly and builds the residual qubit in closed form.
pub fn prover_measurement<R: Rng + ?Sized>(state: &ProverCommitState, rng: &mut R) -> (Z4Vector, ProverQubit) {
    let d = Z4Vector::random((state.n / 2) as usize, rng);
    let label = match state.preimages.as_slice() {
        [(b, _)] => QubitLabel::Basis(*b),
        [(_, x0), (_, x1), ..] => QubitLabel::PlusTheta(theta_code(&d, *x0, *x1, state.n).expect("distinct claw")),
        [] => QubitLabel::Basis(0),
    };
    (d, ProverQubit::new(label))
}

/// Same measurement by explicit transform of the full preimage register.
pub fn prover_measurement_brute<R: Rng + ?Sized>(state: &ProverCommitState, rng: &mut R) -> Result<(Z4Vector, ProverQubit), RspError> {
    if state.n > 8 {
        return Err(RspError::BruteForceWidth(state.n));
    }
    let table = fourier_measurement(&state.preimages, state.n)?;
    let probs: Vec<f64> = table.iter().map(|(p, _)| *p).collect();
    let packed = sample_index(&probs, rng.gen::<f64>());
    let residual = PureState::from_slice(&table[packed].1)?;
    let candidates = (0..2).map(QubitLabel::Basis).chain((0..4).map(QubitLabel::PlusTheta));
    let label = candidates
        .max_by(|a, b| {
            let fa = residual.inner(&a.ket()).norm();
            let fb = residual.inner(&b.ket()).norm();
            fa.total_cmp(&fb)
        })
        .expect("non-empty");
    Ok((Z4Vector::from_packed(packed as u64, (state.n / 2) as usize), ProverQubit { label, state: residual }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AbortReason {
    /// Image without preimage, wrong equation length or a non-bit answer.
    Malformed,
    /// R2a: the returned pair is not a preimage of y.
    PreimageMismatch,
    /// R3a: Z asked on a basis state and the answer disagrees.
    BasisMismatch,
    /// R3a A: asked the preparation axis and the answer disagrees.
    AxisMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RspVerdict {
    Pass,
    Abort(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QracRecord {
    pub axis: Axis,
    pub v_hat: u8,
    pub c: Observable,
    pub v: u8,
}

impl QracRecord {
    /// Bit the optimal code returns: with u = 2(axis + 2v̂) + 1, (X−Y)/√2 recovers
    /// u₀ (0 iff u ∈ {1, 7}) and (X+Y)/√2 recovers u₂ (0 iff u ∈ {1, 3}).
    pub fn expected(&self) -> u8 {
        let u = 2 * join_code(self.axis, self.v_hat) + 1;
        match self.c {
            Observable::XMinusY => u8::from(!matches!(u, 1 | 7)),
            _ => u8::from(!matches!(u, 1 | 3)),
        }
    }

    pub fn success(&self) -> bool {
        self.v == self.expected()
    }
}

pub fn qrac_statistic(records: &[QracRecord]) -> Result<f64, RspError> {
    if records.is_empty() {
        return Err(RspError::EmptyQrac);
    }
    Ok(records.iter().filter(|r| r.success()).count() as f64 / records.len() as f64)
}

pub fn qrac_optimum() -> f64 {
    0.5 + 0.5 * FRAC_1_SQRT_2
}

/// Verifier side of R2a.
pub fn verifier_check_preimage(g: u8, expected: &[(u8, u64)], answer: (u8, u64)) -> RspVerdict {
    let ok = match g {
        0 => expected.iter().any(|&(b, x)| b == answer.0 && x == answer.1),
        _ => expected.first() == Some(&answer),
    };
    if answer.0 > 1 {
        RspVerdict::Abort(AbortReason::Malformed)
    } else if ok {
        RspVerdict::Pass
    } else {
        RspVerdict::Abort(AbortReason::PreimageMismatch)
    }
}

/// Outcome of the R3a consistency round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Consistency {
    Pass,
    Abort(AbortReason),
    Qrac(QracRecord),
}

pub fn verifier_check_consistency(g: u8, b_hat: u8, code: Option<(Axis, u8)>, c: Observable, v: u8) -> Consistency {
    if v > 1 {
        return Consistency::Abort(AbortReason::Malformed);
    }
    if g == 1 {
        if c == Observable::Z && v != b_hat {
            return Consistency::Abort(AbortReason::BasisMismatch);
        }
        return Consistency::Pass;
    }
    match code {
        Some((axis, v_hat)) if c.matches_axis(axis) && v != v_hat => Consistency::Abort(AbortReason::AxisMismatch),
        Some((axis, v_hat)) if c.is_diagonal() => Consistency::Qrac(QracRecord { axis, v_hat, c, v }),
        _ => Consistency::Pass,
    }
}

/// A prover as seen by the verifier: only messages cross the boundary.
pub trait Prover {
    fn commit<R: Rng + ?Sized>(&mut self, oracle: &PreimageOracle, rng: &mut R) -> Result<u64, RspError>;
    fn preimage<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (u8, u64);
    fn equation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Z4Vector, RspError>;
    fn measure<R: Rng + ?Sized>(&mut self, c: Observable, rng: &mut R) -> u8;
    /// Qubit left after the equation round, if the prover keeps one.
    fn qubit(&self) -> Option<&ProverQubit>;
}

#[derive(Debug, Clone, Default)]
pub struct HonestProver {
    brute_force: bool,
    state: Option<ProverCommitState>,
    qubit: Option<ProverQubit>,
}

impl HonestProver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn brute_force() -> Self {
        HonestProver { brute_force: true, ..Self::default() }
    }
}

impl Prover for HonestProver {
    fn commit<R: Rng + ?Sized>(&mut self, oracle: &PreimageOracle, rng: &mut R) -> Result<u64, RspError> {
        let (y, st) = honest_prover_commit(oracle, rng)?;
        self.state = Some(st);
        self.qubit = None;
        Ok(y)
    }

    fn preimage<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (u8, u64) {
        prover_preimage(self.state.as_ref().expect("commit first"), rng)
    }

    fn equation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Z4Vector, RspError> {
        let st = self.state.as_ref().expect("commit first");
        let (d, q) = if self.brute_force { prover_measurement_brute(st, rng)? } else { prover_measurement(st, rng) };
        self.qubit = Some(q);
        Ok(d)
    }

    fn measure<R: Rng + ?Sized>(&mut self, c: Observable, rng: &mut R) -> u8 {
        prover_basis_measure(self.qubit.as_ref().expect("equation first"), c, rng)
    }

    fn qubit(&self) -> Option<&ProverQubit> {
        self.qubit.as_ref()
    }
}

/// Honest in every round except R2a, where it flips the low bit of the preimage.
#[derive(Debug, Clone, Default)]
pub struct WrongPreimageProver(HonestProver);

impl WrongPreimageProver {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Prover for WrongPreimageProver {
    fn commit<R: Rng + ?Sized>(&mut self, oracle: &PreimageOracle, rng: &mut R) -> Result<u64, RspError> {
        self.0.commit(oracle, rng)
    }

    fn preimage<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (u8, u64) {
        let (b, x) = self.0.preimage(rng);
        (b, x ^ 1)
    }

    fn equation<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Z4Vector, RspError> {
        self.0.equation(rng)
    }

    fn measure<R: Rng + ?Sized>(&mut self, c: Observable, rng: &mut R) -> u8 {
        self.0.measure(c, rng)
    }

    fn qubit(&self) -> Option<&ProverQubit> {
        self.0.qubit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationMsg {
    pub d: u64,
    pub w_hat: Option<Axis>,
    pub v_hat: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RspTranscript {
    pub round: u64,
    pub g: u8,
    pub pk: String,
    pub y: u64,
    pub path: Vec<RoundTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preimage: Option<(u8, u64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equation: Option<EquationMsg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub challenge: Option<(Observable, u8)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qrac: Option<QracRecord>,
    pub verdict: RspVerdict,
    /// Six-state index of the prepared qubit, known to the verifier on R3b.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

impl RspTranscript {
    pub fn aborted(&self) -> bool {
        matches!(self.verdict, RspVerdict::Abort(_))
    }

    pub fn reached_r3b(&self) -> bool {
        self.path.last() == Some(&RoundTag::R3b)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// One full protocol instance against `prover`.
pub fn run_instance<P: Prover, R: Rng + ?Sized>(round: u64, n: u32, prover: &mut P, rng: &mut R) -> Result<RspTranscript, RspError> {
    let session = verifier_begin(n, rng)?;
    let oracle = PreimageOracle::new(session.keys.clone());
    let y = prover.commit(&oracle, rng)?;
    let mut t = RspTranscript {
        round,
        g: session.g,
        pk: session.public().to_hex(),
        y,
        path: vec![RoundTag::R1],
        preimage: None,
        equation: None,
        challenge: None,
        qrac: None,
        verdict: RspVerdict::Pass,
        label: None,
    };
    let expected = match session.keys.invert(y) {
        Ok(p) => p,
        Err(_) => {
            t.verdict = RspVerdict::Abort(AbortReason::Malformed);
            return Ok(t);
        }
    };
    if rng.gen::<bool>() {
        t.path.push(RoundTag::R2a);
        let answer = prover.preimage(rng);
        t.preimage = Some(answer);
        t.verdict = verifier_check_preimage(session.g, &expected, answer);
        return Ok(t);
    }
    t.path.push(RoundTag::R2b);
    let d = prover.equation(rng)?;
    if d.len() != (n / 2) as usize {
        t.verdict = RspVerdict::Abort(AbortReason::Malformed);
        return Ok(t);
    }
    let code = if session.g == 0 {
        Some(split_code(theta_code(&d, expected[0].1, expected[1].1, n)?))
    } else {
        None
    };
    t.equation = Some(EquationMsg { d: d.packed(), w_hat: code.map(|c| c.0), v_hat: code.map(|c| c.1) });
    let b_hat = expected[0].0;
    if rng.gen::<bool>() {
        t.path.push(RoundTag::R3a);
        let c = Observable::ALL[rng.gen_range(0..5)];
        let v = prover.measure(c, rng);
        t.challenge = Some((c, v));
        match verifier_check_consistency(session.g, b_hat, code, c, v) {
            Consistency::Pass => {}
            Consistency::Abort(r) => t.verdict = RspVerdict::Abort(r),
            Consistency::Qrac(rec) => t.qrac = Some(rec),
        }
        return Ok(t);
    }
    t.path.push(RoundTag::R3b);
    let label = match code {
        Some((axis, v_hat)) => QubitLabel::PlusTheta(join_code(axis, v_hat)),
        None => QubitLabel::Basis(b_hat),
    };
    t.label = Some(label.six_state_index());
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RspSummary {
    pub schema: String,
    pub n: u32,
    pub rounds: u64,
    pub seed: u64,
    pub aborts: u64,
    pub r3b: u64,
    pub labels: [u64; 6],
    pub qrac_events: u64,
    pub qrac_rate: Option<f64>,
}

/// Runs independent honest instances; round i lives in chunk i / CHUNK with its own stream.
pub fn run_honest_rounds(n: u32, rounds: u64, rng: RngState, workers: usize) -> Result<Vec<RspTranscript>, RspError> {
    run_rounds_with(&HonestProver::new(), n, rounds, rng, workers)
}

/// Same layout as `run_honest_rounds` against a fresh clone of `prover` per chunk.
pub fn run_rounds_with<P: Prover + Clone + Sync>(prover: &P, n: u32, rounds: u64, rng: RngState, workers: usize) -> Result<Vec<RspTranscript>, RspError> {
    if rounds == 0 {
        return Err(RspError::NoRounds);
    }
    let parts = run_chunked(rounds, workers, |chunk, len| -> Result<Vec<RspTranscript>, RspError> {
        let mut r = rng.child(chunk).rng();
        let mut prover = prover.clone();
        (0..len).map(|i| run_instance(chunk * crate::par::CHUNK + i, n, &mut prover, &mut r)).collect()
    });
    let mut out = Vec::with_capacity(rounds as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn summarize(n: u32, seed: u64, transcripts: &[RspTranscript]) -> RspSummary {
    let mut labels = [0u64; 6];
    let mut qrac = Vec::new();
    for t in transcripts {
        if let Some(l) = t.label {
            labels[l] += 1;
        }
        if let Some(q) = t.qrac {
            qrac.push(q);
        }
    }
    RspSummary {
        schema: crate::games::SCHEMA.into(),
        n,
        rounds: transcripts.len() as u64,
        seed,
        aborts: transcripts.iter().filter(|t| t.aborted()).count() as u64,
        r3b: labels.iter().sum(),
        labels,
        qrac_events: qrac.len() as u64,
        qrac_rate: qrac_statistic(&qrac).ok(),
    }
}

pub fn write_jsonl<W: Write>(mut out: W, transcripts: &[RspTranscript]) -> Result<(), RspError> {
    for t in transcripts {
        writeln!(out, "{}", t.to_json_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
