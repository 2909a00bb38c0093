use super::CertError;
use crate::games::{phi_plus_projector, repetitions, SeparableSource, Verdict, SCHEMA};
use crate::par::run_chunked;
use crate::qcore::{
    identity, kron, partial_trace_matrix, sample_index, six_state, DensityMatrix, Mat, QError,
    RngState, C64,
};
use crate::witness::{Beta, Witness};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Classical inputs of the delegated circuit: 3-bit strings.
pub const EDQC_INPUTS: usize = 8;

/// Six-state index prepared by the circuit on input `s`; 6 and 7 repeat |0⟩ and |1⟩.
pub fn input_state_index(s: usize) -> Result<usize, CertError> {
    match s {
        0..=5 => Ok(s),
        6 | 7 => Ok(s - 6),
        _ => Err(CertError::BadInput(s)),
    }
}

fn multiplicity(state: usize) -> f64 {
    if state < 2 {
        2.0
    } else {
        1.0
    }
}

/// Witness coefficients over 3-bit inputs: repeated states share their weight
/// so Σ β'_{s,t} τ_s^T ⊗ ω_t^T is still the witness.
pub fn input_beta(beta: &Beta) -> [[f64; EDQC_INPUTS]; EDQC_INPUTS] {
    std::array::from_fn(|s| {
        std::array::from_fn(|t| {
            let (i, j) = (s % 6, t % 6);
            beta[i][j] / (multiplicity(i) * multiplicity(j))
        })
    })
}

/// Four-qubit circuit with a 3-qubit classical register and one auxiliary
/// qubit: it prepares τ_s from s and reports whether τ_s ⊗ ρ_Q projects onto φ⁺.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdqcCircuit;

impl EdqcCircuit {
    pub const QUBITS: usize = 4;

    /// Effective "b = 1" operator on the auxiliary qubit for input s.
    pub fn effect(&self, s: usize) -> Result<Mat, CertError> {
        let tau = kron(six_state(input_state_index(s)?)?.matrix(), &identity(2));
        let m = partial_trace_matrix(&(&tau * phi_plus_projector() * &tau), 0b10)?;
        Ok((&m + m.adjoint()) * C64::new(0.5, 0.0))
    }
}

/// Exact output law of the circuit: Tr[φ⁺ (τ_s ⊗ ρ_Q)].
pub fn edqc_circuit_semantics(s: usize, rho_q: &DensityMatrix) -> Result<f64, CertError> {
    if rho_q.dim() != 2 {
        return Err(QError::DimMismatch { expected: 2, got: rho_q.dim() }.into());
    }
    let joint = kron(six_state(input_state_index(s)?)?.matrix(), rho_q.matrix());
    Ok((phi_plus_projector() * joint).trace().re.clamp(0.0, 1.0))
}

/// Result of one ideal delegation on an auxiliary qubit entangled with an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EdqcOutcome {
    pub p_one: f64,
    /// Environment state conditioned on b = 0 and b = 1; `None` for impossible outcomes.
    pub env: [Option<DensityMatrix>; 2],
}

/// Ideal delegation functionality: always accepts, returns b with the
/// circuit's law and leaves the environment in the conditioned state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdealEdqc {
    pub circuit: EdqcCircuit,
}

impl IdealEdqc {
    pub fn new() -> Self {
        IdealEdqc { circuit: EdqcCircuit }
    }

    /// `rho_qe` holds the auxiliary qubit first and the environment after it.
    pub fn run(&self, s: usize, rho_qe: &DensityMatrix) -> Result<EdqcOutcome, CertError> {
        let dim = rho_qe.dim();
        if dim < 4 || !dim.is_power_of_two() {
            return Err(CertError::BadAuxDim(dim));
        }
        let env_dim = dim / 2;
        let keep = ((1u32 << dim.trailing_zeros()) - 1) & !1;
        let one = self.circuit.effect(s)?;
        let effects = [identity(2) - &one, one];
        let mut p = [0.0; 2];
        let mut env = [None, None];
        for (b, e) in effects.iter().enumerate() {
            let lifted = kron(e, &identity(env_dim));
            let m = partial_trace_matrix(&(&lifted * rho_qe.matrix()), keep)?;
            p[b] = m.trace().re.max(0.0);
            env[b] = DensityMatrix::from_unnormalized(m);
        }
        Ok(EdqcOutcome { p_one: p[1].clamp(0.0, 1.0), env })
    }

    pub fn output_prob(&self, s: usize, rho_q: &DensityMatrix) -> Result<f64, CertError> {
        let e = self.circuit.effect(s)?;
        if rho_q.dim() != 2 {
            return Err(QError::DimMismatch { expected: 2, got: rho_q.dim() }.into());
        }
        Ok((e * rho_q.matrix()).trace().re.clamp(0.0, 1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rho_qe: &DensityMatrix, rng: &mut R) -> Result<(u8, Option<DensityMatrix>), CertError> {
        let mut out = self.run(s, rho_qe)?;
        let b = u8::from(rng.gen::<f64>() < out.p_one);
        Ok((b, out.env[b as usize].take()))
    }
}

/// How a player chooses the auxiliary qubit it feeds to the delegation.
#[derive(Debug, Clone, PartialEq)]
pub enum EdqcStrategy {
    /// Feed the received share.
    OwnShare,
    /// Feed a fixed state regardless of share and input.
    Fixed(DensityMatrix),
    /// Feed a state that depends on the circuit input; breaks the soundness shape.
    PerInput(Vec<DensityMatrix>),
}

impl EdqcStrategy {
    fn aux_state(&self, s: usize, share: &DensityMatrix) -> DensityMatrix {
        match self {
            EdqcStrategy::OwnShare => share.clone(),
            EdqcStrategy::Fixed(r) => r.clone(),
            EdqcStrategy::PerInput(v) => v[s].clone(),
        }
    }

    fn validate(&self) -> Result<(), CertError> {
        let check = |r: &DensityMatrix| {
            if r.dim() == 2 {
                Ok(())
            } else {
                Err(CertError::from(QError::DimMismatch { expected: 2, got: r.dim() }))
            }
        };
        match self {
            EdqcStrategy::OwnShare => Ok(()),
            EdqcStrategy::Fixed(r) => check(r),
            EdqcStrategy::PerInput(v) => {
                if v.len() != EDQC_INPUTS {
                    return Err(CertError::BadInput(v.len()));
                }
                v.iter().try_for_each(check)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdqcSource {
    /// Both players delegate on their shares of an entangled state.
    Honest(DensityMatrix),
    /// A fresh product component every round, answered with declared strategies.
    Separable { source: SeparableSource, a: EdqcStrategy, b: EdqcStrategy },
}

impl EdqcSource {
    fn label(&self) -> &'static str {
        match self {
            EdqcSource::Honest(_) => "honest",
            EdqcSource::Separable { .. } => "separable",
        }
    }
}

/// Per-cell answer probabilities of a source under the ideal functionality.
#[derive(Debug, Clone)]
pub enum EdqcTable {
    Honest { pa: [f64; EDQC_INPUTS], pb: [[[f64; EDQC_INPUTS]; 2]; EDQC_INPUTS] },
    Separable { weights: Vec<f64>, pa: Vec<[f64; EDQC_INPUTS]>, pb: Vec<[f64; EDQC_INPUTS]> },
}

impl EdqcTable {
    /// Honest players: A delegates on its share with B's share as environment,
    /// then B delegates on the conditioned remainder.
    pub fn build(source: &EdqcSource) -> Result<Self, CertError> {
        let ideal = IdealEdqc::new();
        match source {
            EdqcSource::Honest(rho) => {
                if rho.dim() != 4 {
                    return Err(QError::DimMismatch { expected: 4, got: rho.dim() }.into());
                }
                let mut pa = [0.0; EDQC_INPUTS];
                let mut pb = [[[0.0; EDQC_INPUTS]; 2]; EDQC_INPUTS];
                for s in 0..EDQC_INPUTS {
                    let out = ideal.run(s, rho)?;
                    pa[s] = out.p_one;
                    for (a, env) in out.env.iter().enumerate() {
                        if let Some(env) = env {
                            for t in 0..EDQC_INPUTS {
                                pb[s][a][t] = ideal.output_prob(t, env)?;
                            }
                        }
                    }
                }
                Ok(EdqcTable::Honest { pa, pb })
            }
            EdqcSource::Separable { source, a, b } => {
                a.validate()?;
                b.validate()?;
                let mut weights = Vec::new();
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for (w, sa, sb) in source.components() {
                    weights.push(*w);
                    let mut ra = [0.0; EDQC_INPUTS];
                    let mut rb = [0.0; EDQC_INPUTS];
                    for s in 0..EDQC_INPUTS {
                        ra[s] = ideal.output_prob(s, &a.aux_state(s, sa))?;
                        rb[s] = ideal.output_prob(s, &b.aux_state(s, sb))?;
                    }
                    pa.push(ra);
                    pb.push(rb);
                }
                Ok(EdqcTable::Separable { weights, pa, pb })
            }
        }
    }

    pub fn p11(&self, s: usize, t: usize) -> f64 {
        match self {
            EdqcTable::Honest { pa, pb } => pa[s] * pb[s][1][t],
            EdqcTable::Separable { weights, pa, pb } => {
                weights.iter().zip(pa).zip(pb).map(|((w, a), b)| w * a[s] * b[t]).sum()
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, s: usize, t: usize, rng: &mut R) -> (u8, u8) {
        match self {
            EdqcTable::Honest { pa, pb } => {
                let a = u8::from(rng.gen::<f64>() < pa[s]);
                let b = u8::from(rng.gen::<f64>() < pb[s][a as usize][t]);
                (a, b)
            }
            EdqcTable::Separable { weights, pa, pb } => {
                let k = if weights.len() == 1 { 0 } else { sample_index(weights, rng.gen::<f64>()) };
                let a = u8::from(rng.gen::<f64>() < pa[k][s]);
                let b = u8::from(rng.gen::<f64>() < pb[k][t]);
                (a, b)
            }
        }
    }

    /// Σ β'_{s,t} P[1,1 | s,t].
    pub fn exact_score(&self, beta: &Beta) -> f64 {
        let b8 = input_beta(beta);
        let mut sum = 0.0;
        for s in 0..EDQC_INPUTS {
            for t in 0..EDQC_INPUTS {
                sum += b8[s][t] * self.p11(s, t);
            }
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdqcReport {
    pub schema: String,
    pub seed: u64,
    pub source: String,
    pub delta: f64,
    pub eta: f64,
    pub rounds: u64,
    pub counts: [[u64; EDQC_INPUTS]; EDQC_INPUTS],
    pub ones: [[u64; EDQC_INPUTS]; EDQC_INPUTS],
    pub i_hat: f64,
    pub expected_i: f64,
    pub verdict: Verdict,
}

type Counts = [[u64; EDQC_INPUTS]; EDQC_INPUTS];

/// Plays the compiled game for the number of rounds δ and the witness require.
pub fn run_edqc_game(witness: &Witness, source: &EdqcSource, delta: f64, rng: RngState, workers: usize) -> Result<EdqcReport, CertError> {
    let rounds = repetitions(delta, witness.eta, &witness.beta)?;
    let table = EdqcTable::build(source)?;
    let parts = run_chunked(rounds, workers, |chunk, len| {
        let mut r = rng.child(chunk).rng();
        let mut counts: Counts = [[0; EDQC_INPUTS]; EDQC_INPUTS];
        let mut ones: Counts = [[0; EDQC_INPUTS]; EDQC_INPUTS];
        for _ in 0..len {
            let s = r.gen_range(0..EDQC_INPUTS);
            let t = r.gen_range(0..EDQC_INPUTS);
            let (a, b) = table.sample(s, t, &mut r);
            counts[s][t] += 1;
            ones[s][t] += u64::from(a & b);
        }
        (counts, ones)
    });
    let mut counts: Counts = [[0; EDQC_INPUTS]; EDQC_INPUTS];
    let mut ones: Counts = [[0; EDQC_INPUTS]; EDQC_INPUTS];
    for (c, o) in &parts {
        for s in 0..EDQC_INPUTS {
            for t in 0..EDQC_INPUTS {
                counts[s][t] += c[s][t];
                ones[s][t] += o[s][t];
            }
        }
    }
    let b8 = input_beta(&witness.beta);
    let mut i_hat = 0.0;
    for s in 0..EDQC_INPUTS {
        for t in 0..EDQC_INPUTS {
            if counts[s][t] > 0 {
                i_hat += b8[s][t] * ones[s][t] as f64 / counts[s][t] as f64;
            }
        }
    }
    Ok(EdqcReport {
        schema: SCHEMA.into(),
        seed: rng.seed,
        source: source.label().into(),
        delta,
        eta: witness.eta,
        rounds,
        counts,
        ones,
        i_hat,
        expected_i: table.exact_score(&witness.beta),
        verdict: Verdict::from_score(i_hat),
    })
}

/// Default separable stand-in for a target: the product of its marginals,
/// with both players delegating on their own share.
pub fn separable_edqc_source(rho: &DensityMatrix) -> Result<EdqcSource, CertError> {
    Ok(EdqcSource::Separable {
        source: SeparableSource::marginals_of(rho)?,
        a: EdqcStrategy::OwnShare,
        b: EdqcStrategy::OwnShare,
    })
}

/// Input-dependent auxiliary states that drive the score negative without
/// entanglement. Each player feeds, per prepared state, either its conjugate
/// (answer 1 with probability 1/2) or the orthogonal state (never answer 1);
/// the 2^6 × 2^6 choices are searched exhaustively. Returns the strategies and
/// their exact score.
pub fn cheating_strategies(witness: &Witness) -> Result<(EdqcStrategy, EdqcStrategy, f64), CertError> {
    let ideal = IdealEdqc::new();
    let aux = |mask: u32| -> Result<Vec<DensityMatrix>, CertError> {
        (0..EDQC_INPUTS)
            .map(|s| {
                let i = input_state_index(s)?;
                let partner = if mask >> i & 1 == 1 { i } else { i ^ 1 };
                Ok(six_state(partner)?.transpose())
            })
            .collect()
    };
    let probs = |v: &[DensityMatrix]| -> Result<Vec<f64>, CertError> {
        (0..EDQC_INPUTS).map(|s| ideal.output_prob(s, &v[s])).collect()
    };
    let b8 = input_beta(&witness.beta);
    let mut best = (f64::INFINITY, 0, 0);
    let tables: Vec<Vec<f64>> = (0..64).map(|m| aux(m).and_then(|v| probs(&v))).collect::<Result<_, _>>()?;
    for (x, pa) in tables.iter().enumerate() {
        for (y, pb) in tables.iter().enumerate() {
            let mut v = 0.0;
            for s in 0..EDQC_INPUTS {
                for t in 0..EDQC_INPUTS {
                    v += b8[s][t] * pa[s] * pb[t];
                }
            }
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    Ok((EdqcStrategy::PerInput(aux(best.1 as u32)?), EdqcStrategy::PerInput(aux(best.2 as u32)?), best.0))
}
