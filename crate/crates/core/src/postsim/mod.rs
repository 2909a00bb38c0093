//! Postselected statevector simulation over {Toffoli, Hadamard, Postselect}, eigenvector
//! extraction from measurement circuits, the dot-product estimator and the efficient
//! shared-randomness players built on it.

pub mod dot;
pub mod real;
pub mod sim;

pub use dot::{
    dot_product_estimate, sub1_square, sub2_scale, sub3_compare, sub3_state, sub4_binary_search, Comparison, Ratio,
    RealPost, SweepParams,
};
pub use real::{Ext, Real};
pub use sim::*;

use crate::qcore::{FineElement, FineGrainedPovm, Ket, PureState, QError, C64};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const MAX_QUBITS: usize = 20;
/// Amplitudes below this magnitude are treated as exact zeros.
pub const SNAP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PostError {
    #[error("postselected branch has zero amplitude")]
    ZeroBranch,
    #[error("amplitudes outside the supported range")]
    Undetermined,
    #[error("precision parameter {ell} exceeds the {backend} backend budget")]
    Budget { ell: u32, backend: &'static str },
    #[error("qubit index {0} out of range")]
    QubitRange(usize),
    #[error("circuit width must be between 1 and {MAX_QUBITS}, got {0}")]
    Width(usize),
    #[error("toffoli gate needs three distinct qubits")]
    RepeatedQubit,
    #[error("input dimension {got} does not match circuit dimension {expected}")]
    Dim { expected: usize, got: usize },
    #[error("circuit contains postselection")]
    NotUnitary,
    #[error("eigenvector has a non-real amplitude {0}")]
    NotReal(f64),
    #[error("outcome {0} out of range")]
    Outcome(usize),
    #[error("malformed circuit description: {0}")]
    Parse(String),
    #[error("decision oracle answered inconsistently")]
    OracleViolation,
    #[error("sample count must be positive")]
    NoSamples,
    #[error(transparent)]
    Q(#[from] QError),
    #[error(transparent)]
    Lhv(#[from] crate::lhv::LhvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    Ccx(usize, usize, usize),
    Post(usize, u8),
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Post(q, _) => vec![q],
            Gate::Ccx(a, b, c) => vec![a, b, c],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Gate>,
    outputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CircuitJson {
    qubits: usize,
    gates: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<usize>>,
}

impl Circuit {
    /// `outputs` lists the qubits forming the answer, first entry most significant; empty
    /// means all qubits.
    pub fn new(qubits: usize, gates: Vec<Gate>, outputs: Vec<usize>) -> Result<Self, PostError> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(PostError::Width(qubits));
        }
        for g in &gates {
            let qs = g.qubits();
            if let Some(&q) = qs.iter().find(|&&q| q >= qubits) {
                return Err(PostError::QubitRange(q));
            }
            if let Gate::Ccx(a, b, c) = *g {
                if a == b || a == c || b == c {
                    return Err(PostError::RepeatedQubit);
                }
            }
            if let Gate::Post(_, v) = *g {
                if v > 1 {
                    return Err(PostError::Parse(format!("postselection value {v}")));
                }
            }
        }
        if let Some(&q) = outputs.iter().find(|&&q| q >= qubits) {
            return Err(PostError::QubitRange(q));
        }
        let outputs = if outputs.is_empty() { (0..qubits).collect() } else { outputs };
        Ok(Circuit { qubits, gates, outputs })
    }

    pub fn identity(qubits: usize) -> Result<Self, PostError> {
        Self::new(qubits, vec![], vec![])
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[usize] {
        &self.outputs
    }

    pub fn is_unitary(&self) -> bool {
        !self.gates.iter().any(|g| matches!(g, Gate::Post(..)))
    }

    /// Number of distinct answers.
    pub fn answer_count(&self) -> usize {
        1 << self.outputs.len()
    }

    /// Packs the output qubits of a basis outcome.
    pub fn answer(&self, outcome: usize) -> usize {
        self.outputs.iter().fold(0, |acc, &q| (acc << 1) | ((outcome >> (self.qubits - 1 - q)) & 1))
    }

    pub fn without_postselection(&self) -> Circuit {
        let gates = self.gates.iter().copied().filter(|g| !matches!(g, Gate::Post(..))).collect();
        Circuit { qubits: self.qubits, gates, outputs: self.outputs.clone() }
    }

    pub fn from_json(s: &str) -> Result<Self, PostError> {
        let raw: CircuitJson = serde_json::from_str(s).map_err(|e| PostError::Parse(e.to_string()))?;
        let mut gates = Vec::with_capacity(raw.gates.len());
        for g in &raw.gates {
            let arr = g.as_array().ok_or_else(|| PostError::Parse(format!("gate {g} is not a list")))?;
            let name = arr.first().and_then(Value::as_str).ok_or_else(|| PostError::Parse(format!("gate {g} has no name")))?;
            let args: Vec<usize> = arr[1..]
                .iter()
                .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| PostError::Parse(format!("bad argument in {g}"))))
                .collect::<Result<_, _>>()?;
            let gate = match (name, args.as_slice()) {
                ("h", [q]) => Gate::H(*q),
                ("ccx", [a, b, c]) => Gate::Ccx(*a, *b, *c),
                ("post", [q, v]) => Gate::Post(*q, *v as u8),
                _ => return Err(PostError::Parse(format!("unknown gate {g}"))),
            };
            gates.push(gate);
        }
        Circuit::new(raw.qubits, gates, raw.outputs.unwrap_or_default())
    }

    pub fn to_json(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| match *g {
                Gate::H(q) => serde_json::json!(["h", q]),
                Gate::Ccx(a, b, c) => serde_json::json!(["ccx", a, b, c]),
                Gate::Post(q, v) => serde_json::json!(["post", q, v]),
            })
            .collect();
        let all: Vec<usize> = (0..self.qubits).collect();
        let outputs = (self.outputs != all).then(|| self.outputs.clone());
        serde_json::to_string(&CircuitJson { qubits: self.qubits, gates, outputs }).expect("serialisable")
    }

    /// Random circuit of Hadamard and Toffoli gates.
    pub fn random<R: Rng + ?Sized>(qubits: usize, len: usize, outputs: Vec<usize>, rng: &mut R) -> Result<Self, PostError> {
        let mut gates = Vec::with_capacity(len);
        for _ in 0..len {
            if qubits >= 3 && rng.gen_bool(0.4) {
                let mut qs: Vec<usize> = (0..qubits).collect();
                for i in 0..3 {
                    let j = rng.gen_range(i..qubits);
                    qs.swap(i, j);
                }
                gates.push(Gate::Ccx(qs[0], qs[1], qs[2]));
            } else {
                gates.push(Gate::H(rng.gen_range(0..qubits)));
            }
        }
        Circuit::new(qubits, gates, outputs)
    }
}

fn bit(qubits: usize, q: usize) -> usize {
    1 << (qubits - 1 - q)
}

fn apply_h(v: &mut [C64], qubits: usize, q: usize) {
    let m = bit(qubits, q);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..v.len() {
        if i & m == 0 {
            let (a, b) = (v[i], v[i | m]);
            v[i] = (a + b) * s;
            v[i | m] = (a - b) * s;
        }
    }
}

fn apply_ccx(v: &mut [C64], qubits: usize, a: usize, b: usize, t: usize) {
    let (ma, mb, mt) = (bit(qubits, a), bit(qubits, b), bit(qubits, t));
    for i in 0..v.len() {
        if i & ma != 0 && i & mb != 0 && i & mt == 0 {
            v.swap(i, i | mt);
        }
    }
}

/// Projects qubit `q` onto `value`; returns the kept squared norm.
fn project(v: &mut [C64], qubits: usize, q: usize, value: u8) -> f64 {
    let m = bit(qubits, q);
    let mut kept = 0.0;
    for (i, z) in v.iter_mut().enumerate() {
        if ((i & m != 0) as u8) != value {
            *z = C64::new(0.0, 0.0);
        } else {
            kept += z.norm_sqr();
        }
    }
    kept
}

/// Final state of a postselected run and the product of postselection probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PostState {
    pub amps: Ket,
    pub success: f64,
}

impl PostState {
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }
}

fn check_input(circuit: &Circuit, input: &PureState) -> Result<(), PostError> {
    if input.dim() != circuit.dim() {
        return Err(PostError::Dim { expected: circuit.dim(), got: input.dim() });
    }
    Ok(())
}

/// Exact simulation: each Postselect projects and renormalises.
pub fn run_postselected(circuit: &Circuit, input: &PureState) -> Result<PostState, PostError> {
    check_input(circuit, input)?;
    let s = circuit.qubits;
    let mut v: Vec<C64> = input.amps().iter().copied().collect();
    let n0: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let mut success = 1.0;
    for g in &circuit.gates {
        match *g {
            Gate::H(q) => apply_h(&mut v, s, q),
            Gate::Ccx(a, b, t) => apply_ccx(&mut v, s, a, b, t),
            Gate::Post(q, val) => {
                let before: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                let kept = project(&mut v, s, q, val);
                if kept < 1e-300 {
                    return Err(PostError::ZeroBranch);
                }
                success *= kept / before;
                let r = kept.sqrt();
                v.iter_mut().for_each(|z| *z /= r);
            }
        }
    }
    if !circuit.gates.iter().any(|g| matches!(g, Gate::Post(..))) && (n0 - 1.0).abs() > 1e-9 {
        let r = n0.sqrt();
        v.iter_mut().for_each(|z| *z /= r);
    }
    Ok(PostState { amps: Ket::from_vec(v), success })
}

/// Rejection-sampled run: Postselect gates measure and restart from the input on a
/// mismatch. Returns the final state and the number of attempts used.
pub fn run_postselected_sampled<R: Rng + ?Sized>(circuit: &Circuit, input: &PureState, max_attempts: u64, rng: &mut R) -> Result<(PostState, u64), PostError> {
    check_input(circuit, input)?;
    let s = circuit.qubits;
    'attempt: for attempt in 1..=max_attempts {
        let mut v: Vec<C64> = input.amps().iter().copied().collect();
        for g in &circuit.gates {
            match *g {
                Gate::H(q) => apply_h(&mut v, s, q),
                Gate::Ccx(a, b, t) => apply_ccx(&mut v, s, a, b, t),
                Gate::Post(q, val) => {
                    let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                    let m = bit(s, q);
                    let one: f64 = v.iter().enumerate().filter(|(i, _)| i & m != 0).map(|(_, z)| z.norm_sqr()).sum();
                    let got = u8::from(rng.gen::<f64>() * total < one);
                    if got != val {
                        continue 'attempt;
                    }
                    let kept = project(&mut v, s, q, val);
                    let r = kept.sqrt();
                    v.iter_mut().for_each(|z| *z /= r);
                }
            }
        }
        return Ok((PostState { amps: Ket::from_vec(v), success: 1.0 / attempt as f64 }, attempt));
    }
    Err(PostError::ZeroBranch)
}

/// Measures every qubit of the output of a unitary circuit; returns the basis index.
pub fn sample_outcome<R: Rng + ?Sized>(circuit: &Circuit, input: &PureState, rng: &mut R) -> Result<usize, PostError> {
    let out = run_postselected(circuit, input)?;
    Ok(crate::qcore::sample_index(&out.probabilities(), rng.gen()))
}

/// Runs the circuit on |first⟩ ⊗ |0…0⟩.
pub fn embed_first(circuit: &Circuit, first: &Ket) -> Result<PureState, PostError> {
    if first.len() != 2 {
        return Err(PostError::Dim { expected: 2, got: first.len() });
    }
    let mut amps = Ket::zeros(circuit.dim());
    amps[0] = first[0];
    amps[circuit.dim() / 2] = first[1];
    Ok(PureState::subnormalized(amps)?)
}

/// η_a together with the normalised first-qubit vector ψ_a (None when η_a = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eta: f64,
    pub psi: Option<PureState>,
}

fn snap(x: f64) -> f64 {
    if x.abs() < SNAP {
        0.0
    } else {
        x
    }
}

/// Runs the circuit backwards on |a⟩ and keeps the components where every qubit but the
/// first is |0⟩.
pub fn eigenvector_from_circuit(circuit: &Circuit, a: usize) -> Result<EigenPair, PostError> {
    if !circuit.is_unitary() {
        return Err(PostError::NotUnitary);
    }
    if a >= circuit.dim() {
        return Err(PostError::Outcome(a));
    }
    let s = circuit.qubits;
    let mut v = vec![C64::new(0.0, 0.0); circuit.dim()];
    v[a] = C64::new(1.0, 0.0);
    for g in circuit.gates.iter().rev() {
        match *g {
            Gate::H(q) => apply_h(&mut v, s, q),
            Gate::Ccx(x, y, t) => apply_ccx(&mut v, s, x, y, t),
            Gate::Post(..) => unreachable!(),
        }
    }
    let phi = [v[0], v[circuit.dim() / 2]].map(|z| C64::new(snap(z.re), snap(z.im)));
    let eta = phi[0].norm_sqr() + phi[1].norm_sqr();
    if eta < SNAP {
        return Ok(EigenPair { eta: 0.0, psi: None });
    }
    let psi = PureState::new(Ket::from_column_slice(&phi) / C64::new(eta.sqrt(), 0.0))?;
    Ok(EigenPair { eta, psi: Some(psi) })
}

/// Real amplitudes (γ₁, γ₂) of ψ_a; circuits over {Toffoli, Hadamard} only produce these.
pub fn real_eigenvector(pair: &EigenPair) -> Result<[f64; 2], PostError> {
    let psi = pair.psi.as_ref().ok_or(PostError::ZeroBranch)?;
    let a = psi.amps();
    for z in a.iter() {
        if z.im.abs() > SNAP {
            return Err(PostError::NotReal(z.im));
        }
    }
    Ok([snap(a[0].re), snap(a[1].re)])
}

/// Fine-grained POVM on the first qubit: one rank-one element per basis outcome with
/// η_a > 0, labelled by the packed answer bits.
pub fn circuit_povm(circuit: &Circuit) -> Result<FineGrainedPovm, PostError> {
    let mut elements = Vec::new();
    for a in 0..circuit.dim() {
        let pair = eigenvector_from_circuit(circuit, a)?;
        if let Some(psi) = pair.psi {
            elements.push(FineElement { weight: pair.eta, vector: psi.amps().clone(), outcome: circuit.answer(a) });
        }
    }
    Ok(FineGrainedPovm::from_elements(elements)?)
}

/// Binary-search threshold recovery from a monotone decision oracle. The oracle answers
/// "is u above f(a)"; it must say yes whenever u > f(a) + 2^(−c·ℓ) and no whenever u < f(a).
pub fn threshold_search<O: FnMut(f64) -> bool>(mut oracle: O, c_ell: u32) -> Result<f64, PostError> {
    let eps = 2f64.powi(-(c_ell as i32));
    let (mut l, mut r) = (0.0f64, 1.0f64);
    while r - l > 4.0 * eps {
        let p1 = l + (r - l) / 3.0;
        let p2 = l + 2.0 * (r - l) / 3.0;
        for p in [p1, p2] {
            if oracle(p) {
                r = r.min(p);
            } else {
                l = l.max(p - eps);
            }
        }
        if l > r {
            return Err(PostError::OracleViolation);
        }
    }
    Ok(((l + r) / 2.0).clamp(0.0, 1.0))
}

/// Decision oracle from a randomized estimator accurate to ε/2: yes iff estimate ≤ u − ε/2.
pub fn oracle_from_estimator<E: FnMut() -> f64>(mut estimator: E, c_ell: u32) -> impl FnMut(f64) -> bool {
    let eps = 2f64.powi(-(c_ell as i32));
    move |u| estimator() <= u - eps / 2.0
}

#[cfg(test)]
mod tests;
