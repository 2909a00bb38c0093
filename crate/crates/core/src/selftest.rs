//! Invariant suites runnable from the command line.

use crate::games::{chsh_demo, SCHEMA};
use crate::lhv::{sample_hirsch, HirschModel};
use crate::postsim::{demo_game, eigenvector_from_circuit, Circuit};
use crate::qcore::{
    fine_grain, haar_qubit, partial_transpose, projector, random_qubit_povm, DensityMatrix,
    HermitianOp, Mat, Povm, RngState, Subsystem, C64,
};
use crate::rsp::{run_honest_rounds, write_jsonl};
use rand::Rng;
use serde::{Deserialize, Serialize};

const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Largest deviation seen, where the check is numeric.
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub schema: String,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn numeric(name: &str, errors: Vec<f64>) -> CheckResult {
    let max_error = errors.iter().cloned().fold(0.0, f64::max);
    CheckResult { name: name.into(), passed: !errors.is_empty() && max_error <= TOL, cases: errors.len(), max_error }
}

fn random_mixed<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let mut g = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let p = &g * g.adjoint();
    let tr = p.trace().re;
    let m = p / C64::new(tr, 0.0);
    DensityMatrix::new((&m + m.adjoint()) * C64::new(0.5, 0.0)).expect("Ginibre state")
}

/// Coarse outcome law of a fine-grained POVM equals that of the original.
pub fn fine_grain_pushforward() -> CheckResult {
    let mut rng = RngState::new(1, 100).rng();
    let mut errors = Vec::new();
    for k in 2..=5 {
        for _ in 0..25 {
            let povm = random_qubit_povm(k, &mut rng).expect("valid POVM");
            let fine = fine_grain(&povm).expect("fine-grainable");
            let rho = random_mixed(2, &mut rng);
            let direct = povm.probabilities(&rho).expect("qubit");
            let mut pushed = vec![0.0; povm.len()];
            for (i, p) in fine.probabilities(&rho).iter().enumerate() {
                pushed[fine.coarse(i)] += p;
            }
            errors.push(direct.iter().zip(&pushed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    numeric("fine-grain-pushforward", errors)
}

/// Test circuits: the demonstration game plus seeded random circuits on 1 to 4 qubits.
pub fn test_circuits() -> Vec<Circuit> {
    let game = demo_game();
    let mut out: Vec<Circuit> = game.alice.into_iter().chain(game.bob).collect();
    let mut rng = RngState::new(2, 100).rng();
    for s in 1..=4 {
        out.push(Circuit::identity(s).expect("positive width"));
        for _ in 0..25 {
            out.push(Circuit::random(s, 3 * s + 4, vec![], &mut rng).expect("valid random circuit"));
        }
    }
    out
}

/// Σ η_a P_a = I over every basis outcome of every test circuit.
pub fn circuit_resolution_of_identity() -> CheckResult {
    let errors = test_circuits()
        .iter()
        .map(|c| {
            let mut sum = Mat::zeros(2, 2);
            for a in 0..c.dim() {
                let pair = eigenvector_from_circuit(c, a).expect("unitary circuit");
                if let Some(psi) = pair.psi {
                    sum += projector(psi.amps()) * C64::new(pair.eta, 0.0);
                }
            }
            (sum - Mat::identity(2, 2)).norm()
        })
        .collect();
    numeric("circuit-resolution-of-identity", errors)
}

/// Partial transposition on either factor is an involution, and both together give the full transpose.
pub fn partial_transpose_involution() -> CheckResult {
    let mut rng = RngState::new(3, 100).rng();
    let mut errors = Vec::new();
    for _ in 0..100 {
        let mut g = Mat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                g[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let op = HermitianOp::new((&g + g.adjoint()) * C64::new(0.5, 0.0)).expect("Hermitian");
        let pt = |x: &HermitianOp, s| partial_transpose(x, s).expect("two qubits");
        for s in [Subsystem::A, Subsystem::B] {
            errors.push((pt(&pt(&op, s), s).matrix() - op.matrix()).norm());
        }
        errors.push((pt(&pt(&op, Subsystem::A), Subsystem::B).matrix() - op.matrix().transpose()).norm());
    }
    numeric("partial-transpose-involution", errors)
}

fn replay<F: Fn(u64, usize) -> Vec<u8>>(f: F) -> bool {
    let first = f(9, 1);
    first == f(9, 1) && first == f(9, 3) && first != f(10, 1)
}

/// Same seed gives byte-identical output, whatever the worker count.
pub fn seed_replay() -> CheckResult {
    let cases: Vec<bool> = vec![
        replay(|seed, w| {
            let r = chsh_demo(RngState::new(seed, 0), 100_000, w).expect("valid rounds");
            serde_json::to_vec(&r).expect("serializable")
        }),
        replay(|seed, w| {
            let t = run_honest_rounds(8, 70_000, RngState::new(seed, 0), w).expect("valid rounds");
            let mut buf = Vec::new();
            write_jsonl(&mut buf, &t).expect("in-memory");
            buf
        }),
        replay(|seed, w| {
            let model = HirschModel::standard(1.0 / 3.0).expect("valid q");
            let mut rng = RngState::new(4, 100).rng();
            let pa = fine_grain(&random_qubit_povm(3, &mut rng).expect("valid")).expect("fine");
            let pb = fine_grain(&Povm::computational(2).expect("valid")).expect("fine");
            let t = sample_hirsch(&model, &pa, &pb, 70_000, RngState::new(seed, 0), w).expect("valid");
            serde_json::to_vec(&t).expect("serializable")
        }),
        replay(|seed, w| {
            let model = HirschModel::standard(1.0 / 3.0).expect("valid q");
            let t = demo_game().sample_postsim(&model, 2_000, 8, RngState::new(seed, 0), w).expect("valid");
            serde_json::to_vec(&t).expect("serializable")
        }),
        replay(|seed, _| {
            let mut rng = RngState::new(seed, 0).rng();
            serde_json::to_vec(&haar_qubit(&mut rng).amps().iter().map(|c| (c.re, c.im)).collect::<Vec<_>>()).expect("serializable")
        }),
    ];
    CheckResult {
        name: "seed-replay".into(),
        passed: cases.iter().all(|&c| c),
        cases: cases.len(),
        max_error: 0.0,
    }
}

pub fn run_selftest() -> SelftestReport {
    let checks = vec![fine_grain_pushforward(), circuit_resolution_of_identity(), partial_transpose_involution(), seed_replay()];
    SelftestReport { schema: SCHEMA.into(), passed: checks.iter().all(|c| c.passed), checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let r = run_selftest();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(r.passed);
    }
}
