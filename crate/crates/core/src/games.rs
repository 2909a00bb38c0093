//! Semi-quantum games with six-state quantum inputs, witness-weighted scoring
//! and a CHSH harness.

use crate::par::run_chunked;
use crate::qcore::{
    identity, kron, partial_trace_matrix, projector, sample_index, six_state, DensityMatrix, Ket,
    Mat, Povm, QError, RngState, C64, TOL,
};
use crate::qcore::named::bell_ket;
use crate::witness::{beta_l1, Beta, Witness};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const SCHEMA: &str = "nelsim/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("delta must lie in (0,1), got {0}")]
    BadDelta(f64),
    #[error("eta must be positive, got {0}")]
    BadEta(f64),
    #[error("rounds must be at least 1")]
    NoRounds,
    #[error("strategy effect is not a valid binary measurement: {0}")]
    BadEffect(String),
    #[error("separable source weights must be positive and sum to 1 (sum {0})")]
    BadWeights(f64),
    #[error("six-state index out of range: ({0}, {1})")]
    BadIndex(usize, usize),
    #[error(transparent)]
    Q(#[from] QError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Entangled,
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub rounds: u64,
    pub ell: u32,
    pub delta: f64,
    pub mode: Mode,
}

impl GameConfig {
    pub fn new(rounds: u64, ell: u32, delta: f64, mode: Mode) -> Result<Self, GameError> {
        if rounds == 0 {
            return Err(GameError::NoRounds);
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(GameError::BadDelta(delta));
        }
        Ok(GameConfig { rounds, ell, delta, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "ENTANGLED")]
    Entangled,
    #[serde(rename = "NOT-ENTANGLED")]
    NotEntangled,
}

impl Verdict {
    /// Decision rule: a strictly negative score certifies entanglement.
    pub fn from_score(i_hat: f64) -> Self {
        if i_hat < 0.0 {
            Verdict::Entangled
        } else {
            Verdict::NotEntangled
        }
    }
}

/// Convex mixture of product states; a fresh component is drawn every round.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSource {
    components: Vec<(f64, DensityMatrix, DensityMatrix)>,
}

impl SeparableSource {
    pub fn new(components: Vec<(f64, DensityMatrix, DensityMatrix)>) -> Result<Self, GameError> {
        let sum: f64 = components.iter().map(|c| c.0).sum();
        if components.is_empty() || components.iter().any(|c| !(c.0 > 0.0)) || (sum - 1.0).abs() > TOL {
            return Err(GameError::BadWeights(sum));
        }
        for (_, a, b) in &components {
            for s in [a, b] {
                if s.dim() != 2 {
                    return Err(QError::DimMismatch { expected: 2, got: s.dim() }.into());
                }
            }
        }
        Ok(SeparableSource { components })
    }

    pub fn product(a: DensityMatrix, b: DensityMatrix) -> Result<Self, GameError> {
        Self::new(vec![(1.0, a, b)])
    }

    /// Product of the two marginals of a two-qubit state.
    pub fn marginals_of(rho: &DensityMatrix) -> Result<Self, GameError> {
        let a = DensityMatrix::new(partial_trace_matrix(rho.matrix(), 0b01)?)?;
        let b = DensityMatrix::new(partial_trace_matrix(rho.matrix(), 0b10)?)?;
        Self::product(a, b)
    }

    pub fn components(&self) -> &[(f64, DensityMatrix, DensityMatrix)] {
        &self.components
    }

    pub fn density(&self) -> DensityMatrix {
        let mut m = Mat::zeros(4, 4);
        for (w, a, b) in &self.components {
            m += kron(a.matrix(), b.matrix()) * C64::new(*w, 0.0);
        }
        DensityMatrix::new(m).expect("mixture of product states")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Entangled(DensityMatrix),
    Separable(SeparableSource),
}

impl Source {
    pub fn mode(&self) -> Mode {
        match self {
            Source::Entangled(_) => Mode::Entangled,
            Source::Separable(_) => Mode::Separable,
        }
    }
}

/// Single-bit answer rule declared by its "answer 1" effect on input ⊗ share.
#[derive(Debug, Clone, PartialEq)]
pub struct SqgStrategy {
    name: String,
    effect: Mat,
}

pub(crate) fn swap4() -> Mat {
    let mut s = Mat::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
        s[(i, j)] = C64::new(1.0, 0.0);
    }
    s
}

pub(crate) fn phi_plus_projector() -> Mat {
    projector(&bell_ket("phi+").expect("known"))
}

impl SqgStrategy {
    pub fn from_effect(name: &str, effect: Mat) -> Result<Self, GameError> {
        if effect.nrows() != 4 || effect.ncols() != 4 {
            return Err(GameError::BadEffect(format!("expected 4x4, got {}x{}", effect.nrows(), effect.ncols())));
        }
        Povm::from_matrices(vec![identity(4) - &effect, effect.clone()])
            .map_err(|e| GameError::BadEffect(e.to_string()))?;
        Ok(SqgStrategy { name: name.to_string(), effect })
    }

    /// Answer 1 iff the input and share project onto φ⁺.
    pub fn honest_bell() -> Self {
        SqgStrategy { name: "honest-bell".into(), effect: phi_plus_projector() }
    }

    pub fn constant(bit: u8) -> Self {
        let e = if bit == 1 { identity(4) } else { Mat::zeros(4, 4) };
        SqgStrategy { name: format!("always-{bit}"), effect: e }
    }

    pub fn uniform() -> Self {
        SqgStrategy { name: "uniform".into(), effect: identity(4) * C64::new(0.5, 0.0) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn effect(&self) -> &Mat {
        &self.effect
    }

    pub fn povm(&self) -> Povm {
        Povm::from_matrices(vec![identity(4) - &self.effect, self.effect.clone()]).expect("checked at construction")
    }

    /// Probability of answering 1 on a product of local input and share.
    pub fn answer_prob(&self, input: &DensityMatrix, share: &DensityMatrix) -> f64 {
        let joint = kron(input.matrix(), share.matrix());
        (&self.effect * joint).trace().re.clamp(0.0, 1.0)
    }

    pub fn answer<R: Rng + ?Sized>(&self, input: &DensityMatrix, share: &DensityMatrix, rng: &mut R) -> u8 {
        u8::from(rng.gen::<f64>() < self.answer_prob(input, share))
    }
}

/// Exact joint distribution [[P(0,0), P(0,1)], [P(1,0), P(1,1)]] as one trace over
/// the ordering (input_A, share_A, share_B, input_B).
pub fn joint_by_trace(a: &SqgStrategy, b: &SqgStrategy, rho: &DensityMatrix, tau: &DensityMatrix, omega: &DensityMatrix) -> [[f64; 2]; 2] {
    let state = kron(&kron(tau.matrix(), rho.matrix()), omega.matrix());
    let sw = swap4();
    let eb = &sw * b.effect() * &sw;
    let ea = [identity(4) - a.effect(), a.effect().clone()];
    let eb = [identity(4) - &eb, eb];
    let mut out = [[0.0; 2]; 2];
    for (x, ea) in ea.iter().enumerate() {
        for (y, eb) in eb.iter().enumerate() {
            out[x][y] = (kron(ea, eb) * &state).trace().re;
        }
    }
    out
}

/// Player A measures first; B then measures the share conditioned on A's outcome.
/// Returns (P(a=1), [P(b=1 | a=0), P(b=1 | a=1)]).
pub fn sequential_conditionals(a: &SqgStrategy, b: &SqgStrategy, rho: &DensityMatrix, tau: &DensityMatrix, omega: &DensityMatrix) -> (f64, [f64; 2]) {
    let state = kron(tau.matrix(), rho.matrix());
    let ea = [identity(4) - a.effect(), a.effect().clone()];
    let mut pa = [0.0; 2];
    let mut pb = [0.0; 2];
    for (x, e) in ea.iter().enumerate() {
        let lifted = kron(e, &identity(2));
        let unnorm = partial_trace_matrix(&(&lifted * &state), 0b100).expect("three qubits");
        let p = unnorm.trace().re.max(0.0);
        pa[x] = p;
        pb[x] = if p > 1e-300 {
            let cond = unnorm / C64::new(p, 0.0);
            (b.effect() * kron(omega.matrix(), &cond)).trace().re.clamp(0.0, 1.0)
        } else {
            0.0
        };
    }
    (pa[1].clamp(0.0, 1.0), pb)
}

/// Exact probability that both honest players answer 1 on inputs (s, t).
pub fn honest_joint_prob(rho: &DensityMatrix, s: usize, t: usize) -> Result<f64, GameError> {
    if s > 5 || t > 5 {
        return Err(GameError::BadIndex(s, t));
    }
    let h = SqgStrategy::honest_bell();
    Ok(joint_by_trace(&h, &h, rho, &six_state(s)?, &six_state(t)?)[1][1])
}

/// Σ_{s,t} β_{s,t} P(1,1 | s,t) for the exact distribution.
pub fn exact_score(beta: &Beta, source: &Source, a: &SqgStrategy, b: &SqgStrategy) -> Result<f64, GameError> {
    let table = CellTable::build(source, a, b)?;
    let mut sum = 0.0;
    for s in 0..6 {
        for t in 0..6 {
            sum += beta[s][t] * table.p11(s, t);
        }
    }
    Ok(sum)
}

/// Pre-computed per-cell answer probabilities so rounds are cheap to sample.
#[derive(Debug, Clone)]
pub(crate) enum CellTable {
    Entangled { pa: [[f64; 6]; 6], pb: [[[f64; 2]; 6]; 6] },
    Separable { weights: Vec<f64>, pa: Vec<[f64; 6]>, pb: Vec<[f64; 6]> },
}

impl CellTable {
    pub(crate) fn build(source: &Source, a: &SqgStrategy, b: &SqgStrategy) -> Result<Self, GameError> {
        let inputs: Vec<DensityMatrix> = (0..6).map(six_state).collect::<Result<_, _>>()?;
        Ok(match source {
            Source::Entangled(rho) => {
                if rho.dim() != 4 {
                    return Err(QError::DimMismatch { expected: 4, got: rho.dim() }.into());
                }
                let mut pa = [[0.0; 6]; 6];
                let mut pb = [[[0.0; 2]; 6]; 6];
                for s in 0..6 {
                    for t in 0..6 {
                        let (p, cond) = sequential_conditionals(a, b, rho, &inputs[s], &inputs[t]);
                        pa[s][t] = p;
                        pb[s][t] = cond;
                    }
                }
                CellTable::Entangled { pa, pb }
            }
            Source::Separable(src) => {
                let mut weights = Vec::new();
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for (w, sa, sb) in src.components() {
                    weights.push(*w);
                    pa.push(std::array::from_fn(|s| a.answer_prob(&inputs[s], sa)));
                    pb.push(std::array::from_fn(|t| b.answer_prob(&inputs[t], sb)));
                }
                CellTable::Separable { weights, pa, pb }
            }
        })
    }

    pub(crate) fn p11(&self, s: usize, t: usize) -> f64 {
        match self {
            CellTable::Entangled { pa, pb } => pa[s][t] * pb[s][t][1],
            CellTable::Separable { weights, pa, pb } => {
                weights.iter().zip(pa).zip(pb).map(|((w, a), b)| w * a[s] * b[t]).sum()
            }
        }
    }

    fn p1_marginals(&self, s: usize, t: usize) -> (f64, f64) {
        match self {
            CellTable::Entangled { pa, pb } => {
                let a = pa[s][t];
                (a, (1.0 - a) * pb[s][t][0] + a * pb[s][t][1])
            }
            CellTable::Separable { weights, pa, pb } => (
                weights.iter().zip(pa).map(|(w, a)| w * a[s]).sum(),
                weights.iter().zip(pb).map(|(w, b)| w * b[t]).sum(),
            ),
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, s: usize, t: usize, rng: &mut R) -> (u8, u8) {
        match self {
            CellTable::Entangled { pa, pb } => {
                let a = u8::from(rng.gen::<f64>() < pa[s][t]);
                let b = u8::from(rng.gen::<f64>() < pb[s][t][a as usize]);
                (a, b)
            }
            CellTable::Separable { weights, pa, pb } => {
                let k = if weights.len() == 1 { 0 } else { sample_index(weights, rng.gen::<f64>()) };
                let a = u8::from(rng.gen::<f64>() < pa[k][s]);
                let b = u8::from(rng.gen::<f64>() < pb[k][t]);
                (a, b)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub s: usize,
    pub t: usize,
    pub a: u8,
    pub b: u8,
}

/// One round played directly on density matrices, without any caching.
pub fn play_round<R: Rng + ?Sized>(config: &GameConfig, a: &SqgStrategy, b: &SqgStrategy, source: &Source, rng: &mut R) -> Result<RoundOutcome, GameError> {
    if config.mode != source.mode() {
        return Err(GameError::BadEffect("game mode does not match the source".into()));
    }
    let s = rng.gen_range(0..6);
    let t = rng.gen_range(0..6);
    let (tau, omega) = (six_state(s)?, six_state(t)?);
    let (x, y) = match source {
        Source::Entangled(rho) => {
            let (pa, pb) = sequential_conditionals(a, b, rho, &tau, &omega);
            let x = u8::from(rng.gen::<f64>() < pa);
            (x, u8::from(rng.gen::<f64>() < pb[x as usize]))
        }
        Source::Separable(src) => {
            let w: Vec<f64> = src.components().iter().map(|c| c.0).collect();
            let (_, sa, sb) = &src.components()[sample_index(&w, rng.gen::<f64>())];
            (a.answer(&tau, sa, rng), b.answer(&omega, sb, rng))
        }
    };
    Ok(RoundOutcome { s, t, a: x, b: y })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema: String,
    pub mode: Mode,
    pub rounds: u64,
    pub seed: u64,
    pub eta: f64,
    pub beta_l1: f64,
    /// Rounds per (s, t).
    pub counts: [[u64; 6]; 6],
    /// Rounds per (s, t) where both answered 1.
    pub ones: [[u64; 6]; 6],
    pub a_ones: [[u64; 6]; 6],
    pub b_ones: [[u64; 6]; 6],
    /// Empirical P̂[a=1, b=1 | s, t]; a cell that was never played contributes 0.
    pub p_hat: [[f64; 6]; 6],
    pub i_hat: f64,
    pub expected_i: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    counts: [[u64; 6]; 6],
    ones: [[u64; 6]; 6],
    a_ones: [[u64; 6]; 6],
    b_ones: [[u64; 6]; 6],
}

impl Tally {
    fn merge(&mut self, o: &Tally) {
        for s in 0..6 {
            for t in 0..6 {
                self.counts[s][t] += o.counts[s][t];
                self.ones[s][t] += o.ones[s][t];
                self.a_ones[s][t] += o.a_ones[s][t];
                self.b_ones[s][t] += o.b_ones[s][t];
            }
        }
    }
}

/// Σ β P̂ from raw counts.
pub fn score_from_counts(beta: &Beta, counts: &[[u64; 6]; 6], ones: &[[u64; 6]; 6]) -> ([[f64; 6]; 6], f64) {
    let mut p_hat = [[0.0; 6]; 6];
    let mut i_hat = 0.0;
    for s in 0..6 {
        for t in 0..6 {
            if counts[s][t] > 0 {
                p_hat[s][t] = ones[s][t] as f64 / counts[s][t] as f64;
            }
            i_hat += beta[s][t] * p_hat[s][t];
        }
    }
    (p_hat, i_hat)
}

/// Plays a fixed number of rounds and scores them with the witness coefficients.
pub fn run_rounds(source: &Source, witness: &Witness, a: &SqgStrategy, b: &SqgStrategy, rounds: u64, rng: RngState, workers: usize) -> Result<ScoreReport, GameError> {
    if rounds == 0 {
        return Err(GameError::NoRounds);
    }
    let table = CellTable::build(source, a, b)?;
    let parts = run_chunked(rounds, workers, |chunk, len| {
        let mut r = rng.child(chunk).rng();
        let mut tally = Tally::default();
        for _ in 0..len {
            let s = r.gen_range(0..6);
            let t = r.gen_range(0..6);
            let (x, y) = table.sample(s, t, &mut r);
            tally.counts[s][t] += 1;
            tally.ones[s][t] += u64::from(x & y);
            tally.a_ones[s][t] += u64::from(x);
            tally.b_ones[s][t] += u64::from(y);
        }
        tally
    });
    let mut tally = Tally::default();
    parts.iter().for_each(|p| tally.merge(p));
    let (p_hat, i_hat) = score_from_counts(&witness.beta, &tally.counts, &tally.ones);
    let mut expected_i = 0.0;
    for s in 0..6 {
        for t in 0..6 {
            expected_i += witness.beta[s][t] * table.p11(s, t);
        }
    }
    Ok(ScoreReport {
        schema: SCHEMA.into(),
        mode: source.mode(),
        rounds,
        seed: rng.seed,
        eta: witness.eta,
        beta_l1: witness.beta_l1(),
        counts: tally.counts,
        ones: tally.ones,
        a_ones: tally.a_ones,
        b_ones: tally.b_ones,
        p_hat,
        i_hat,
        expected_i,
        verdict: Verdict::from_score(i_hat),
    })
}

/// Exact marginal answer probabilities per cell, used by no-signalling checks.
pub fn marginal_table(source: &Source, a: &SqgStrategy, b: &SqgStrategy) -> Result<[[(f64, f64); 6]; 6], GameError> {
    let table = CellTable::build(source, a, b)?;
    Ok(std::array::from_fn(|s| std::array::from_fn(|t| table.p1_marginals(s, t))))
}

/// Rounds needed so that Î lands within η/8 of its mean in all 36 cells with
/// probability at least 1 − δ: ⌈4608 · ln(72/δ) · (Σ|β|)² / η²⌉, at least 36.
pub fn repetitions(delta: f64, eta: f64, beta: &Beta) -> Result<u64, GameError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(GameError::BadDelta(delta));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(GameError::BadEta(eta));
    }
    let l1 = beta_l1(beta);
    let n = (4608.0 * (72.0 / delta).ln() * l1 * l1 / (eta * eta)).ceil();
    Ok((n as u64).max(36))
}

/// Full experiment: the repetition count comes from δ and the witness.
pub fn run_sqg_experiment(source: &Source, witness: &Witness, a: &SqgStrategy, b: &SqgStrategy, delta: f64, rng: RngState, workers: usize) -> Result<ScoreReport, GameError> {
    let n = repetitions(delta, witness.eta, &witness.beta)?;
    run_rounds(source, witness, a, b, n, rng, workers)
}

/// Separable sources paired with measurement strategies whose exact expected
/// score is strictly positive.
pub fn separable_adversaries() -> Vec<(String, SeparableSource, SqgStrategy, SqgStrategy)> {
    let st = |i| six_state(i).expect("valid index");
    let mixed = || DensityMatrix::maximally_mixed(2).expect("dim 2");
    let z_only = {
        let mut e = kron(&projector(&Ket::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])), &identity(2));
        e = (&e + e.adjoint()) * C64::new(0.5, 0.0);
        SqgStrategy::from_effect("input-is-ket0", e).expect("projector")
    };
    let classical = SeparableSource::new(vec![(0.5, st(0), st(0)), (0.5, st(1), st(1))]).expect("weights");
    vec![
        ("honest-on-mixed".into(), SeparableSource::product(mixed(), mixed()).expect("product"), SqgStrategy::honest_bell(), SqgStrategy::honest_bell()),
        ("honest-on-classical-correlation".into(), classical.clone(), SqgStrategy::honest_bell(), SqgStrategy::honest_bell()),
        ("always-one".into(), classical.clone(), SqgStrategy::constant(1), SqgStrategy::constant(1)),
        ("uniform-guess".into(), SeparableSource::product(st(2), st(4)).expect("product"), SqgStrategy::uniform(), SqgStrategy::uniform()),
        ("input-is-ket0".into(), classical, z_only.clone(), z_only),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub schema: String,
    pub rounds: u64,
    pub seed: u64,
    pub classical_sweep_max: f64,
    pub classical_win: f64,
    pub quantum_win: f64,
    pub quantum_exact: f64,
    pub sigma_quantum: f64,
}

/// Best exact win rate of any of the 16 deterministic classical strategy pairs.
pub fn chsh_classical_sweep() -> f64 {
    let mut best = 0.0f64;
    for fa in 0..4u8 {
        for fb in 0..4u8 {
            let mut wins = 0;
            for x in 0..2u8 {
                for y in 0..2u8 {
                    let a = (fa >> x) & 1;
                    let b = (fb >> y) & 1;
                    wins += u8::from((a ^ b) == (x & y));
                }
            }
            best = best.max(wins as f64 / 4.0);
        }
    }
    best
}

fn rotated(theta: f64) -> [Ket; 2] {
    let (c, s) = (theta.cos(), theta.sin());
    [
        Ket::from_column_slice(&[C64::new(c, 0.0), C64::new(s, 0.0)]),
        Ket::from_column_slice(&[C64::new(-s, 0.0), C64::new(c, 0.0)]),
    ]
}

/// Born distribution of (a, b) on φ⁺ for each question pair, with the optimal angles.
pub fn chsh_quantum_table() -> [[[f64; 4]; 2]; 2] {
    let phi = bell_ket("phi+").expect("known");
    let angles_a = [0.0, PI / 4.0];
    let angles_b = [PI / 8.0, -PI / 8.0];
    std::array::from_fn(|x| {
        std::array::from_fn(|y| {
            let (ka, kb) = (rotated(angles_a[x]), rotated(angles_b[y]));
            std::array::from_fn(|ab| {
                let v = ka[ab >> 1].kronecker(&kb[ab & 1]);
                v.dotc(&phi).norm_sqr()
            })
        })
    })
}

pub fn chsh_demo(rng: RngState, rounds: u64, workers: usize) -> Result<ChshReport, GameError> {
    if rounds == 0 {
        return Err(GameError::NoRounds);
    }
    let table = chsh_quantum_table();
    let parts = run_chunked(rounds, workers, |chunk, len| {
        let mut r = rng.child(chunk).rng();
        let (mut classical, mut quantum) = (0u64, 0u64);
        for _ in 0..len {
            let x: u8 = r.gen_range(0..2);
            let y: u8 = r.gen_range(0..2);
            classical += u64::from((x & y) == 0);
            let ab = sample_index(&table[x as usize][y as usize], r.gen::<f64>()) as u8;
            quantum += u64::from(((ab >> 1) ^ (ab & 1)) == (x & y));
        }
        (classical, quantum)
    });
    let (c, q) = parts.iter().fold((0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = rounds as f64;
    let exact = (PI / 8.0).cos().powi(2);
    Ok(ChshReport {
        schema: SCHEMA.into(),
        rounds,
        seed: rng.seed,
        classical_sweep_max: chsh_classical_sweep(),
        classical_win: c as f64 / n,
        quantum_win: q as f64 / n,
        quantum_exact: exact,
        sigma_quantum: (exact * (1.0 - exact) / n).sqrt(),
    })
}
