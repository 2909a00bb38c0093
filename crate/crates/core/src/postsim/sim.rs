//! Efficient shared-randomness players: the ideal response rules with every overlap
//! replaced by a dot-product estimate against a circuit eigenvector.

use super::dot::dot_product_estimate;
use super::real::Real;
use super::{circuit_povm, embed_first, sample_outcome, Circuit, Gate, PostError};
use crate::lhv::{approx_haar, model_distribution, Backend, HirschModel, LhvOutcomeTable};
use crate::par::run_chunked;
use crate::qcore::{hermitian_eigen, kron, sample_index, trace_product, DensityMatrix, Ket, RngState, C64};
use rand::Rng;

fn snap<R: Real>(x: R) -> R {
    if x.abs() < R::snap_threshold() {
        R::zero()
    } else {
        x
    }
}

/// (η_a, ψ_a) computed over the backend's scalars by a real statevector run of the
/// inverse circuit.
pub fn real_eigenpair<R: Real>(circuit: &Circuit, a: usize) -> Result<(R, Option<[R; 2]>), PostError> {
    if !circuit.is_unitary() {
        return Err(PostError::NotUnitary);
    }
    if a >= circuit.dim() {
        return Err(PostError::Outcome(a));
    }
    let s = circuit.qubits();
    let h = R::one() / R::from_f64(2.0).sqrt();
    let mut v = vec![R::zero(); circuit.dim()];
    v[a] = R::one();
    for g in circuit.gates().iter().rev() {
        match *g {
            Gate::H(q) => {
                let m = 1 << (s - 1 - q);
                for i in 0..v.len() {
                    if i & m == 0 {
                        let (x, y) = (v[i].clone(), v[i | m].clone());
                        v[i] = h.clone() * (x.clone() + y.clone());
                        v[i | m] = h.clone() * (x - y);
                    }
                }
            }
            Gate::Ccx(x, y, t) => {
                let (mx, my, mt) = (1 << (s - 1 - x), 1 << (s - 1 - y), 1 << (s - 1 - t));
                for i in 0..v.len() {
                    if i & mx != 0 && i & my != 0 && i & mt == 0 {
                        v.swap(i, i | mt);
                    }
                }
            }
            Gate::Post(..) => unreachable!(),
        }
    }
    let phi = [snap(v[0].clone()), snap(v[circuit.dim() / 2].clone())];
    let eta = phi[0].clone() * phi[0].clone() + phi[1].clone() * phi[1].clone();
    if eta.is_zero() {
        return Ok((eta, None));
    }
    let n = eta.sqrt();
    Ok((eta, Some([phi[0].clone() / n.clone(), phi[1].clone() / n])))
}

/// |⟨ψ_a|λ̂⟩|² estimated from copies of the eigenvector of outcome `a`.
pub fn dot_product_with_eigenvector<R: Real, G: Rng + ?Sized>(a: usize, circuit: &Circuit, lambda: &[R; 4], ell: u32, rng: &mut G) -> Result<R, PostError> {
    let (_, psi) = real_eigenpair::<R>(circuit, a)?;
    let psi = psi.ok_or(PostError::ZeroBranch)?;
    dot_product_estimate(&psi, lambda, ell, rng)
}

pub fn ket_components(k: &Ket) -> [f64; 4] {
    [k[0].re, k[0].im, k[1].re, k[1].im]
}

fn zero_components() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

fn minus_components() -> [f64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [s, 0.0, -s, 0.0]
}

/// Shared per-round values: the branch draw and the coin used for Alice's |0⟩ test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedDraws {
    pub branch: f64,
    pub zero_coin: f64,
}

fn uniform_first<G: Rng + ?Sized>(rng: &mut G) -> Ket {
    let mut k = Ket::zeros(2);
    k[usize::from(rng.gen_bool(0.5))] = C64::new(1.0, 0.0);
    k
}

fn fallback<G: Rng + ?Sized>(circuit: &Circuit, sigma: &DensityMatrix, rng: &mut G) -> Result<usize, PostError> {
    let (vals, vecs) = hermitian_eigen(sigma.matrix());
    let w: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
    let psi = &vecs[sample_index(&w, rng.gen())];
    sample_outcome(circuit, &embed_first(circuit, psi)?, rng)
}

/// Efficient Alice: samples a by running the circuit on a uniformly random basis input,
/// then decides to keep it from the estimate of the branch the shared draw selects. Only
/// the estimate of the selected branch is computed. Returns the basis outcome.
pub fn alice_sim<G: Rng + ?Sized>(model: &HirschModel, circuit: &Circuit, lambda: &[f64; 4], shared: SharedDraws, ell: u32, rng: &mut G) -> Result<usize, PostError> {
    let first = uniform_first(rng);
    let a = sample_outcome(circuit, &embed_first(circuit, &first)?, rng)?;
    let [w1, w2, _] = model.alice_weights();
    let keep = if shared.branch < w1 {
        dot_product_with_eigenvector(a, circuit, lambda, ell, rng)? < 0.5
    } else if shared.branch < w1 + w2 {
        shared.zero_coin < dot_product_with_eigenvector(a, circuit, &zero_components(), ell, rng)?
    } else {
        rng.gen::<f64>() < dot_product_with_eigenvector(a, circuit, &minus_components(), ell, rng)?
    };
    if keep {
        return Ok(a);
    }
    fallback(circuit, &model.sigma_a, rng)
}

/// Efficient Bob; same structure with branches (2q, 1−2q).
pub fn bob_sim<G: Rng + ?Sized>(model: &HirschModel, circuit: &Circuit, lambda: &[f64; 4], shared: SharedDraws, ell: u32, rng: &mut G) -> Result<usize, PostError> {
    let first = uniform_first(rng);
    let b = sample_outcome(circuit, &embed_first(circuit, &first)?, rng)?;
    let keep = if shared.branch < model.bob_weights()[0] {
        rng.gen::<f64>() < dot_product_with_eigenvector(b, circuit, lambda, ell, rng)?
    } else {
        rng.gen_bool(0.5)
    };
    if keep {
        return Ok(b);
    }
    fallback(circuit, &model.sigma_b, rng)
}

/// A one-round game: uniformly random questions select the answer circuit of each player.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGame {
    pub alice: Vec<Circuit>,
    pub bob: Vec<Circuit>,
}

impl CircuitGame {
    pub fn new(alice: Vec<Circuit>, bob: Vec<Circuit>) -> Result<Self, PostError> {
        if alice.is_empty() || bob.is_empty() {
            return Err(PostError::NoSamples);
        }
        let ok = |cs: &[Circuit]| cs.iter().all(|c| c.is_unitary() && c.answer_count() == cs[0].answer_count());
        if !ok(&alice) || !ok(&bob) {
            return Err(PostError::NotUnitary);
        }
        Ok(CircuitGame { alice, bob })
    }

    fn answers(&self) -> (usize, usize) {
        (self.alice[0].answer_count(), self.bob[0].answer_count())
    }

    /// Table shape: rows (x, a), columns (y, b).
    pub fn shape(&self) -> (usize, usize) {
        let (na, nb) = self.answers();
        (self.alice.len() * na, self.bob.len() * nb)
    }

    fn place(&self, x: usize, a: usize, y: usize, b: usize) -> (usize, usize) {
        let (na, nb) = self.answers();
        (x * na + a, y * nb + b)
    }

    fn empty(&self) -> Vec<Vec<f64>> {
        let (r, c) = self.shape();
        vec![vec![0.0; c]; r]
    }

    /// Exact law of the ideal players (questions uniform).
    pub fn ideal_law(&self, model: &HirschModel) -> Result<Vec<Vec<f64>>, PostError> {
        let mut out = self.empty();
        let w = 1.0 / (self.alice.len() * self.bob.len()) as f64;
        for (x, ca) in self.alice.iter().enumerate() {
            let pa = circuit_povm(ca)?;
            for (y, cb) in self.bob.iter().enumerate() {
                let law = model_distribution(model, &pa, &circuit_povm(cb)?)?;
                for (a, row) in law.iter().enumerate() {
                    for (b, p) in row.iter().enumerate() {
                        let (i, j) = self.place(x, a, y, b);
                        out[i][j] = w * p;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Exact law of measuring a two-qubit state with the circuits' POVMs.
    pub fn quantum_law(&self, rho: &DensityMatrix) -> Result<Vec<Vec<f64>>, PostError> {
        let mut out = self.empty();
        let w = 1.0 / (self.alice.len() * self.bob.len()) as f64;
        for (x, ca) in self.alice.iter().enumerate() {
            let pa = circuit_povm(ca)?.to_povm()?;
            for (y, cb) in self.bob.iter().enumerate() {
                let pb = circuit_povm(cb)?.to_povm()?;
                for (a, ea) in pa.elements().iter().enumerate() {
                    for (b, eb) in pb.elements().iter().enumerate() {
                        let (i, j) = self.place(x, a, y, b);
                        out[i][j] = w * trace_product(&kron(ea.matrix(), eb.matrix()), rho.matrix()).re;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Monte Carlo of the efficient players. Per chunk c the streams are 4c (shared: λ̂ and
    /// branch draws), 4c+1 (Alice), 4c+2 (Bob), 4c+3 (questions).
    pub fn sample_postsim(&self, model: &HirschModel, samples: u64, ell: u32, rng: RngState, workers: usize) -> Result<LhvOutcomeTable, PostError> {
        self.sample_with(samples, rng, workers, |x, y, lambda, shared, ra, rb| {
            let a = alice_sim(model, &self.alice[x], lambda, shared, ell, ra)?;
            let b = bob_sim(model, &self.bob[y], lambda, shared, ell, rb)?;
            Ok((self.alice[x].answer(a), self.bob[y].answer(b)))
        })
    }

    fn sample_with<F>(&self, samples: u64, rng: RngState, workers: usize, play: F) -> Result<LhvOutcomeTable, PostError>
    where
        F: Fn(usize, usize, &[f64; 4], SharedDraws, &mut crate::qcore::Stream, &mut crate::qcore::Stream) -> Result<(usize, usize), PostError>
            + Sync,
    {
        if samples == 0 {
            return Err(PostError::NoSamples);
        }
        let (rows, cols) = self.shape();
        let parts = run_chunked(samples, workers, |chunk, len| -> Result<Vec<u64>, PostError> {
            let mut shared = rng.child(4 * chunk).rng();
            let mut ra = rng.child(4 * chunk + 1).rng();
            let mut rb = rng.child(4 * chunk + 2).rng();
            let mut rq = rng.child(4 * chunk + 3).rng();
            let mut counts = vec![0u64; rows * cols];
            for _ in 0..len {
                let draw = approx_haar(Backend::Float, 1, &mut shared)?;
                let c = draw.encoded.components();
                let lambda: [f64; 4] = std::array::from_fn(|k| c[k].to_f64().value());
                let sd = SharedDraws { branch: shared.gen(), zero_coin: shared.gen() };
                let x = rq.gen_range(0..self.alice.len());
                let y = rq.gen_range(0..self.bob.len());
                let (a, b) = play(x, y, &lambda, sd, &mut ra, &mut rb)?;
                let (i, j) = self.place(x, a, y, b);
                counts[i * cols + j] += 1;
            }
            Ok(counts)
        });
        let mut total = vec![0u64; rows * cols];
        for p in parts {
            for (t, c) in total.iter_mut().zip(p?) {
                *t += c;
            }
        }
        Ok(LhvOutcomeTable { samples, counts: total.chunks(cols).map(|r| r.to_vec()).collect() })
    }
}

/// Sum of per-cell binomial standard deviations, halved: the scale of Monte Carlo noise
/// in a total-variation distance.
pub fn tv_sigma(exact: &[Vec<f64>], samples: u64) -> f64 {
    0.5 * exact.iter().flatten().map(|p| (p * (1.0 - p) / samples as f64).sqrt()).sum::<f64>()
}

/// The fixed demonstration game: two questions per player on four-qubit circuits with a
/// single answer qubit.
pub fn demo_game() -> CircuitGame {
    let c = |gates: Vec<Gate>| Circuit::new(4, gates, vec![0]).expect("valid circuit");
    let alice = vec![
        // Computational-basis measurement of the input qubit.
        c(vec![]),
        // Hadamard-basis measurement, with the ancillas entangled first.
        c(vec![Gate::H(1), Gate::H(2), Gate::Ccx(1, 2, 3), Gate::H(0), Gate::Ccx(0, 1, 3)]),
    ];
    let bob = vec![
        c(vec![Gate::H(1), Gate::Ccx(0, 1, 2), Gate::H(0), Gate::Ccx(1, 2, 0), Gate::H(0)]),
        c(vec![Gate::H(3), Gate::Ccx(0, 3, 1), Gate::H(0), Gate::H(3), Gate::Ccx(3, 1, 0)]),
    ];
    CircuitGame::new(alice, bob).expect("valid game")
}
