//! End-to-end certification: two parallel RSP instances per repetition feed
//! the verifier its quantum-input labels, and an EDQC-compiled variant of the
//! semi-quantum game run against an ideal delegation functionality.

mod edqc;

pub use edqc::*;

use crate::games::{
    joint_by_trace, repetitions, score_from_counts, sequential_conditionals, CellTable, GameError,
    Mode, Source, SqgStrategy, Verdict, SCHEMA,
};
use crate::par::{run_chunked, CHUNK};
use crate::qcore::{DensityMatrix, QError, RngState};
use crate::rsp::{run_instance, AbortReason, HonestProver, Prover, RspError, RspTranscript, RspVerdict};
use crate::witness::{Witness, WitnessError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest disagreement tolerated between the sequential and single-trace paths.
pub const PATH_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CertError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Rsp(#[from] RspError),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Q(#[from] QError),
    #[error("sequential ({sequential}) and joint ({joint}) probabilities disagree")]
    PathMismatch { sequential: f64, joint: f64 },
    #[error("circuit input {0} is not a 3-bit string")]
    BadInput(usize),
    #[error("auxiliary register must hold one qubit plus an environment, got dimension {0}")]
    BadAuxDim(usize),
}

/// Outcome counts of one side's RSP runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RspTally {
    pub passes: u64,
    pub r3b: u64,
    pub aborts: u64,
    pub first_abort: Option<AbortReason>,
}

impl RspTally {
    fn record(&mut self, t: &RspTranscript) {
        match t.verdict {
            RspVerdict::Pass => self.passes += 1,
            RspVerdict::Abort(r) => {
                self.aborts += 1;
                self.first_abort.get_or_insert(r);
            }
        }
        self.r3b += u64::from(t.reached_r3b());
    }

    fn merge(&mut self, o: &RspTally) {
        self.passes += o.passes;
        self.r3b += o.r3b;
        self.aborts += o.aborts;
        if self.first_abort.is_none() {
            self.first_abort = o.first_abort;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub schema: String,
    pub seed: u64,
    pub mode: Mode,
    pub delta: f64,
    pub tcf_n: u32,
    pub eta: f64,
    pub beta_l1: f64,
    /// Repetitions the confidence level asks for.
    pub planned: u64,
    /// Repetitions actually run; smaller than `planned` only after an abort.
    pub executed: u64,
    /// Index of the repetition whose RSP run aborted first.
    pub aborted_at: Option<u64>,
    pub rsp_a: RspTally,
    pub rsp_b: RspTally,
    pub collected: u64,
    /// Collected tuples as counts indexed by [τ][ω][2a + b].
    pub tuples: [[[u64; 4]; 6]; 6],
    pub p_hat: [[f64; 6]; 6],
    pub i_hat: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone)]
struct CertChunk {
    rsp_a: RspTally,
    rsp_b: RspTally,
    tuples: [[[u64; 4]; 6]; 6],
    len: u64,
    aborted_at: Option<u64>,
}

/// Certification with honest RSP provers on both sides.
pub fn run_certification(witness: &Witness, source: &Source, delta: f64, tcf_n: u32, rng: RngState, workers: usize) -> Result<CertificationReport, CertError> {
    run_certification_with(witness, source, &HonestProver::new(), delta, tcf_n, rng, workers)
}

/// Certification where both players run `prover` in their RSP instances and
/// answer collected inputs with the φ⁺ projection on their share of `source`.
pub fn run_certification_with<P: Prover + Clone + Sync>(
    witness: &Witness,
    source: &Source,
    prover: &P,
    delta: f64,
    tcf_n: u32,
    rng: RngState,
    workers: usize,
) -> Result<CertificationReport, CertError> {
    let planned = repetitions(delta, witness.eta, &witness.beta)?;
    let honest = SqgStrategy::honest_bell();
    let table = CellTable::build(source, &honest, &honest)?;
    let parts = run_chunked(planned, workers, |chunk, len| -> Result<CertChunk, RspError> {
        let mut r = rng.child(chunk).rng();
        let mut pa = prover.clone();
        let mut pb = prover.clone();
        let mut out = CertChunk {
            rsp_a: RspTally::default(),
            rsp_b: RspTally::default(),
            tuples: [[[0; 4]; 6]; 6],
            len: 0,
            aborted_at: None,
        };
        for i in 0..len {
            let round = chunk * CHUNK + i;
            let ta = run_instance(round, tcf_n, &mut pa, &mut r)?;
            let tb = run_instance(round, tcf_n, &mut pb, &mut r)?;
            out.rsp_a.record(&ta);
            out.rsp_b.record(&tb);
            out.len += 1;
            if ta.aborted() || tb.aborted() {
                out.aborted_at = Some(round);
                break;
            }
            if let (Some(s), Some(t)) = (ta.label, tb.label) {
                let (a, b) = table.sample(s, t, &mut r);
                out.tuples[s][t][usize::from(2 * a + b)] += 1;
            }
        }
        Ok(out)
    });

    let mut rsp_a = RspTally::default();
    let mut rsp_b = RspTally::default();
    let mut tuples = [[[0u64; 4]; 6]; 6];
    let mut executed = 0;
    let mut aborted_at = None;
    for part in parts {
        let part = part?;
        rsp_a.merge(&part.rsp_a);
        rsp_b.merge(&part.rsp_b);
        for s in 0..6 {
            for t in 0..6 {
                for k in 0..4 {
                    tuples[s][t][k] += part.tuples[s][t][k];
                }
            }
        }
        executed += part.len;
        if part.aborted_at.is_some() {
            aborted_at = part.aborted_at;
            break;
        }
    }

    let counts: [[u64; 6]; 6] = std::array::from_fn(|s| std::array::from_fn(|t| tuples[s][t].iter().sum()));
    let ones: [[u64; 6]; 6] = std::array::from_fn(|s| std::array::from_fn(|t| tuples[s][t][3]));
    let (p_hat, i_hat) = score_from_counts(&witness.beta, &counts, &ones);
    let verdict = if aborted_at.is_some() { Verdict::NotEntangled } else { Verdict::from_score(i_hat) };
    Ok(CertificationReport {
        schema: SCHEMA.into(),
        seed: rng.seed,
        mode: source.mode(),
        delta,
        tcf_n,
        eta: witness.eta,
        beta_l1: witness.beta_l1(),
        planned,
        executed,
        aborted_at,
        rsp_a,
        rsp_b,
        collected: counts.iter().flatten().sum(),
        tuples,
        p_hat,
        i_hat,
        verdict,
    })
}

/// P[a = 1, b = 1] for honest φ⁺ players on inputs (τ, ω), computed once by
/// conditioning B's share on A's outcome and once as a single trace; the two
/// must agree within `PATH_TOL`.
pub fn sequential_joint_prob(rho: &DensityMatrix, tau: &DensityMatrix, omega: &DensityMatrix) -> Result<f64, CertError> {
    for (expected, got) in [(4, rho.dim()), (2, tau.dim()), (2, omega.dim())] {
        if expected != got {
            return Err(QError::DimMismatch { expected, got }.into());
        }
    }
    let h = SqgStrategy::honest_bell();
    let (pa, pb) = sequential_conditionals(&h, &h, rho, tau, omega);
    let sequential = pa * pb[1];
    let joint = joint_by_trace(&h, &h, rho, tau, omega)[1][1];
    if (sequential - joint).abs() > PATH_TOL {
        return Err(CertError::PathMismatch { sequential, joint });
    }
    Ok(joint)
}
