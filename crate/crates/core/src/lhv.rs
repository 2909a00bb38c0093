//! Local hidden-variable simulations: the projective Werner model and its ρ₀
//! extension, the ideal POVM model for ρ* (Alice and Bob halves), and fixed-point
//! encodings of the shared Haar-random qubit.

use crate::par::run_chunked;
use crate::qcore::named::{hirsch_matrix, rho0_matrix, werner_matrix};
use crate::qcore::{
    haar_qubit, kron, partial_trace_matrix, sample_index, trace_product, DensityMatrix, FineGrainedPovm,
    Ket, Mat, PureState, QError, RngState, C64,
};
use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Big = FBig<HalfEven>;

/// Grid exponent of the float backend: components are multiples of 2^-44.
pub const FLOAT_GRID_BITS: u32 = 44;
/// Claimed per-component bound of the float backend.
pub const FLOAT_BOUND_BITS: u32 = 40;
pub const EXTENDED_MAX_ELL: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LhvError {
    #[error("operator is not a rank-one projector")]
    NotProjector,
    #[error("q = {q} outside the allowed range [0, {max}]")]
    QOutOfRange { q: f64, max: f64 },
    #[error("precision parameter {ell} exceeds the {backend} backend budget")]
    Budget { ell: u32, backend: &'static str },
    #[error("sample count must be positive")]
    NoSamples,
    #[error("measurements must act on one qubit")]
    NotQubit,
    #[error(transparent)]
    Q(#[from] QError),
}

fn check_qubit_projector(p: &Mat) -> Result<(), LhvError> {
    if p.nrows() != 2 || p.ncols() != 2 {
        return Err(LhvError::NotProjector);
    }
    let idem = (p * p - p).norm();
    let herm = (p - p.adjoint()).norm();
    if idem > 1e-9 || herm > 1e-9 || (p.trace().re - 1.0).abs() > 1e-9 {
        return Err(LhvError::NotProjector);
    }
    Ok(())
}

fn overlap(p: &Mat, k: &Ket) -> f64 {
    (k.adjoint() * p * k)[(0, 0)].re
}

fn ket_minus() -> Ket {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ket::from_column_slice(&[C64::new(s, 0.0), C64::new(-s, 0.0)])
}

fn ket_zero() -> Ket {
    Ket::from_column_slice(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])
}

/// Projective Werner model for ρ(1/2): a = 1 iff ⟨λ|P|λ⟩ < ⟨λ|(I−P)|λ⟩, b ~ Ber(⟨λ|Q|λ⟩).
pub fn werner_sim<R: Rng + ?Sized>(p: &Mat, q: &Mat, lambda: &Ket, rng: &mut R) -> Result<(u8, u8), LhvError> {
    check_qubit_projector(p)?;
    check_qubit_projector(q)?;
    let lp = overlap(p, lambda);
    let norm = lambda.norm_squared();
    let a = u8::from(lp < norm - lp);
    let b = u8::from(rng.gen::<f64>() < overlap(q, lambda) / norm);
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixTarget {
    /// ρ(q) = 2q ρ(1/2) + (1−2q) I/4, q ≤ 1/2.
    Werner,
    /// Branches (2q, 1−3q, q) over Werner, P on |0⟩, P on |−⟩; Bob random off the Werner branch. q ≤ 1/3.
    Rho0,
}

impl MixTarget {
    pub fn max_q(self) -> f64 {
        match self {
            MixTarget::Werner => 0.5,
            MixTarget::Rho0 => 1.0 / 3.0,
        }
    }
}

fn check_q(q: f64, max: f64) -> Result<(), LhvError> {
    if !(0.0..=max + 1e-12).contains(&q) {
        return Err(LhvError::QOutOfRange { q, max });
    }
    Ok(())
}

/// Mixed model; `u` is the shared branch draw, so both sides land in the same branch.
pub fn werner_mix_sim<R: Rng + ?Sized>(target: MixTarget, q: f64, p: &Mat, qp: &Mat, lambda: &Ket, u: f64, rng: &mut R) -> Result<(u8, u8), LhvError> {
    check_q(q, target.max_q())?;
    let (wa, wb) = werner_sim(p, qp, lambda, rng)?;
    let (ra, rb) = (rng.gen::<f64>(), rng.gen::<f64>());
    if u < 2.0 * q {
        return Ok((wa, wb));
    }
    let b = u8::from(rb < 0.5);
    let a = match target {
        MixTarget::Werner => u8::from(ra < 0.5),
        MixTarget::Rho0 if u < 1.0 - q => u8::from(ra < overlap(p, &ket_zero())),
        MixTarget::Rho0 => u8::from(ra < overlap(p, &ket_minus())),
    };
    Ok((a, b))
}

/// Exact joint distribution produced by `werner_mix_sim`, indexed [a][b].
pub fn werner_mix_exact(target: MixTarget, q: f64, p: &Mat, qp: &Mat) -> Result<[[f64; 2]; 2], LhvError> {
    check_q(q, target.max_q())?;
    check_qubit_projector(p)?;
    check_qubit_projector(qp)?;
    let id = Mat::identity(2, 2);
    let pa = [&id - p, p.clone()];
    let qb = [&id - qp, qp.clone()];
    let half = werner_matrix(0.5);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let w = trace_product(&kron(&pa[a], &qb[b]), &half).re;
            let rest = match target {
                MixTarget::Werner => (1.0 - 2.0 * q) * 0.25,
                MixTarget::Rho0 => {
                    0.5 * ((1.0 - 3.0 * q) * overlap(&pa[a], &ket_zero()) + q * overlap(&pa[a], &ket_minus()))
                }
            };
            out[a][b] = 2.0 * q * w + rest;
        }
    }
    Ok(out)
}

/// Joint distribution of projective measurements on a two-qubit state, indexed [a][b].
pub fn projective_joint(rho: &Mat, p: &Mat, qp: &Mat) -> [[f64; 2]; 2] {
    let id = Mat::identity(2, 2);
    let pa = [&id - p, p.clone()];
    let qb = [&id - qp, qp.clone()];
    std::array::from_fn(|a| std::array::from_fn(|b| trace_product(&kron(&pa[a], &qb[b]), rho).re))
}

pub fn werner_state(p: f64) -> Mat {
    werner_matrix(p)
}

pub fn rho0_state(q: f64) -> Mat {
    rho0_matrix(q)
}

/// ρ*(q, σ_A, σ_B) = ¼[ρ₀(q) + ρ_A⊗σ_B + σ_A⊗ρ_B + σ_A⊗σ_B].
#[derive(Debug, Clone, PartialEq)]
pub struct HirschModel {
    pub q: f64,
    pub sigma_a: DensityMatrix,
    pub sigma_b: DensityMatrix,
}

impl HirschModel {
    pub fn new(q: f64, sigma_a: DensityMatrix, sigma_b: DensityMatrix) -> Result<Self, LhvError> {
        check_q(q, 1.0 / 3.0)?;
        if sigma_a.dim() != 2 || sigma_b.dim() != 2 {
            return Err(LhvError::NotQubit);
        }
        Ok(HirschModel { q, sigma_a, sigma_b })
    }

    /// The standard instance with σ_A = σ_B = |0⟩⟨0|.
    pub fn standard(q: f64) -> Result<Self, LhvError> {
        let z = DensityMatrix::new(crate::qcore::projector(&ket_zero()))?;
        Self::new(q, z.clone(), z)
    }

    pub fn rho0(&self) -> Mat {
        rho0_matrix(self.q)
    }

    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::new(hirsch_matrix(self.q, self.sigma_a.matrix(), self.sigma_b.matrix())).expect("valid mixture")
    }

    /// Alice's branch weights (Werner, P on |0⟩, P on |−⟩).
    pub fn alice_weights(&self) -> [f64; 3] {
        [2.0 * self.q, 1.0 - 3.0 * self.q, self.q]
    }

    pub fn bob_weights(&self) -> [f64; 2] {
        [2.0 * self.q, 1.0 - 2.0 * self.q]
    }
}

/// Per-round private uniforms of one party; all four are always consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDraws {
    pub pick: f64,
    pub coin_b: f64,
    pub coin_c: f64,
    pub fallback: f64,
}

impl LocalDraws {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        LocalDraws { pick: rng.gen(), coin_b: rng.gen(), coin_c: rng.gen(), fallback: rng.gen() }
    }
}

fn fine_pick(povm: &FineGrainedPovm, u: f64) -> usize {
    let w: Vec<f64> = povm.elements().iter().map(|e| e.weight / 2.0).collect();
    sample_index(&w, u)
}

fn coarse_on(povm: &FineGrainedPovm, sigma: &DensityMatrix) -> Vec<f64> {
    let fine = povm.probabilities(sigma);
    let mut out = vec![0.0; povm.coarse_len()];
    for (i, p) in fine.iter().enumerate() {
        out[povm.coarse(i)] += p;
    }
    out
}

fn check_fine(povm: &FineGrainedPovm) -> Result<(), LhvError> {
    if povm.dim() != 2 {
        return Err(LhvError::NotQubit);
    }
    Ok(())
}

/// Alice's half of the ideal model. `branch_u` is shared with Bob; returns the
/// coarse outcome index.
pub fn alice_sim_ideal(model: &HirschModel, povm: &FineGrainedPovm, lambda: &Ket, branch_u: f64, d: LocalDraws) -> Result<usize, LhvError> {
    check_fine(povm)?;
    let a = fine_pick(povm, d.pick);
    let el = &povm.elements()[a];
    let lp = el.overlap(lambda) / lambda.norm_squared();
    let c1 = lp < 1.0 - lp;
    let c2 = d.coin_b < el.overlap(&ket_zero());
    let c3 = d.coin_c < el.overlap(&ket_minus());
    let [w1, w2, _] = model.alice_weights();
    let c = if branch_u < w1 {
        c1
    } else if branch_u < w1 + w2 {
        c2
    } else {
        c3
    };
    if c {
        return Ok(povm.coarse(a));
    }
    Ok(sample_index(&coarse_on(povm, &model.sigma_a), d.fallback))
}

/// Bob's half; the first draw samples the outcome label b with weight ξ_b/2.
pub fn bob_sim_ideal(model: &HirschModel, povm: &FineGrainedPovm, lambda: &Ket, branch_u: f64, d: LocalDraws) -> Result<usize, LhvError> {
    check_fine(povm)?;
    let b = fine_pick(povm, d.pick);
    let el = &povm.elements()[b];
    let c1 = d.coin_b < el.overlap(lambda) / lambda.norm_squared();
    let c2 = d.coin_c < 0.5;
    let c = if branch_u < model.bob_weights()[0] { c1 } else { c2 };
    if c {
        return Ok(povm.coarse(b));
    }
    Ok(sample_index(&coarse_on(povm, &model.sigma_b), d.fallback))
}

/// Exact output law of the two ideal halves, indexed [a][b] over coarse outcomes.
pub fn model_distribution(model: &HirschModel, pa: &FineGrainedPovm, pb: &FineGrainedPovm) -> Result<Vec<Vec<f64>>, LhvError> {
    check_fine(pa)?;
    check_fine(pb)?;
    let sa = coarse_on(pa, &model.sigma_a);
    let sb = coarse_on(pb, &model.sigma_b);
    let half = werner_matrix(0.5);
    let [wa1, wa2, wa3] = model.alice_weights();
    let mut out = vec![vec![0.0; pb.coarse_len()]; pa.coarse_len()];
    for (i, ea) in pa.elements().iter().enumerate() {
        let xa = pa.coarse(i);
        let p0 = ea.overlap(&ket_zero());
        let pm = ea.overlap(&ket_minus());
        for (j, eb) in pb.elements().iter().enumerate() {
            let yb = pb.coarse(j);
            let pick = ea.weight / 2.0 * eb.weight / 2.0;
            let w = trace_product(&kron(&ea.projector(), &eb.projector()), &half).re;
            // The Werner branch is correlated, so it is expanded directly.
            out[xa][yb] += wa1 * pick * w;
            for (y, s) in sb.iter().enumerate() {
                out[xa][y] += wa1 * pick * (0.5 - w) * s;
            }
            for (x, s) in sa.iter().enumerate() {
                out[x][yb] += wa1 * pick * (0.5 - w) * s;
                for (y, t) in sb.iter().enumerate() {
                    out[x][y] += wa1 * pick * w * s * t;
                }
            }
            // Werner branch: (alice keeps, bob keeps) has probability w, mixed ones ½ − w, neither w.
            let mut add = |ka: f64, kb: f64, weight: f64| {
                out[xa][yb] += weight * pick * ka * kb;
                for (y, s) in sb.iter().enumerate() {
                    out[xa][y] += weight * pick * ka * (1.0 - kb) * s;
                }
                for (x, s) in sa.iter().enumerate() {
                    out[x][yb] += weight * pick * (1.0 - ka) * kb * s;
                    for (y, t) in sb.iter().enumerate() {
                        out[x][y] += weight * pick * (1.0 - ka) * (1.0 - kb) * s * t;
                    }
                }
            };
            add(p0, 0.5, wa2);
            add(pm, 0.5, wa3);
        }
    }
    Ok(out)
}

/// Target statistics Tr[(A_a ⊗ B_b) ρ*], indexed [a][b].
pub fn hirsch_exact(model: &HirschModel, pa: &FineGrainedPovm, pb: &FineGrainedPovm) -> Result<Vec<Vec<f64>>, LhvError> {
    let rho = model.state();
    let ca = pa.to_povm()?;
    let cb = pb.to_povm()?;
    Ok(ca
        .elements()
        .iter()
        .map(|a| cb.elements().iter().map(|b| trace_product(&kron(a.matrix(), b.matrix()), rho.matrix()).re).collect())
        .collect())
}

/// Same target written term by term: (η_a ξ_b / 4)(Tr[(P⊗Q)ρ₀] + three product terms), summed over fine elements.
pub fn fine_trace_sum(model: &HirschModel, pa: &FineGrainedPovm, pb: &FineGrainedPovm) -> Vec<Vec<f64>> {
    let r0 = model.rho0();
    let ra = DensityMatrix::new(partial_trace_matrix(&r0, 0b01).expect("two qubits")).expect("state");
    let rb = DensityMatrix::new(partial_trace_matrix(&r0, 0b10).expect("two qubits")).expect("state");
    let mut out = vec![vec![0.0; pb.coarse_len()]; pa.coarse_len()];
    for (i, ea) in pa.elements().iter().enumerate() {
        for (j, eb) in pb.elements().iter().enumerate() {
            let (p, q) = (ea.projector(), eb.projector());
            let t = trace_product(&kron(&p, &q), &r0).re
                + model.sigma_a.expectation(&p) * model.sigma_b.expectation(&q)
                + ra.expectation(&p) * model.sigma_b.expectation(&q)
                + model.sigma_a.expectation(&p) * rb.expectation(&q);
            out[pa.coarse(i)][pb.coarse(j)] += ea.weight * eb.weight / 4.0 * t;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Float,
    Extended,
}

/// A Haar qubit rounded to a fixed-point grid: component k is num[k] · 2^-grid_bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedLambda {
    pub ell: u32,
    pub grid_bits: u32,
    pub num: [IBig; 4],
}

impl EncodedLambda {
    pub fn backend(&self) -> Backend {
        if self.grid_bits == FLOAT_GRID_BITS {
            Backend::Float
        } else {
            Backend::Extended
        }
    }

    /// Components (Re α₀, Im α₀, Re α₁, Im α₁) as exact binary floats.
    pub fn components(&self) -> [Big; 4] {
        std::array::from_fn(|k| Big::from_parts(self.num[k].clone(), -(self.grid_bits as isize)))
    }

    pub fn to_ket(&self) -> Ket {
        let c: [f64; 4] = std::array::from_fn(|k| self.components()[k].to_f64().value());
        Ket::from_column_slice(&[C64::new(c[0], c[1]), C64::new(c[2], c[3])])
    }

    /// Per-component guarantee against the underlying draw.
    pub fn bound(&self) -> Big {
        match self.backend() {
            Backend::Float => Big::from_parts(IBig::ONE, -(FLOAT_BOUND_BITS as isize)),
            Backend::Extended => Big::from_parts(IBig::ONE, -(self.grid_bits as isize)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SharedLambda {
    Exact(PureState),
    Encoded(EncodedLambda),
}

impl SharedLambda {
    pub fn ket(&self) -> Ket {
        match self {
            SharedLambda::Exact(p) => p.amps().clone(),
            SharedLambda::Encoded(e) => e.to_ket(),
        }
    }
}

/// A draw at working precision together with its encoding.
#[derive(Debug, Clone)]
pub struct HaarDraw {
    pub exact: [Big; 4],
    pub encoded: EncodedLambda,
}

fn round_to_grid(x: &Big, bits: u32) -> IBig {
    let scaled = x.clone() * Big::from_parts(IBig::ONE, bits as isize);
    scaled.round().to_int().value()
}

/// Samples |λ⟩ from four Gaussians, normalises at working precision and rounds
/// each real component to the backend grid.
pub fn approx_haar<R: Rng + ?Sized>(backend: Backend, ell: u32, rng: &mut R) -> Result<HaarDraw, LhvError> {
    let grid_bits = match backend {
        Backend::Float if ell == 1 => FLOAT_GRID_BITS,
        Backend::Float => return Err(LhvError::Budget { ell, backend: "float" }),
        Backend::Extended if (1..=EXTENDED_MAX_ELL).contains(&ell) => 100 * ell,
        Backend::Extended => return Err(LhvError::Budget { ell, backend: "extended" }),
    };
    let g = haar_qubit(rng);
    let a = g.amps();
    let raw = [a[0].re, a[0].im, a[1].re, a[1].im];
    let exact: [Big; 4] = match backend {
        Backend::Float => std::array::from_fn(|k| Big::try_from(raw[k]).expect("finite")),
        Backend::Extended => {
            let prec = grid_bits as usize + 64;
            let xs: [Big; 4] = std::array::from_fn(|k| Big::try_from(raw[k]).expect("finite").with_precision(prec).value());
            let n2 = xs.iter().fold(Big::ZERO.with_precision(prec).value(), |acc, x| acc + x.clone() * x.clone());
            let n = n2.sqrt();
            std::array::from_fn(|k| xs[k].clone() / n.clone())
        }
    };
    let num = std::array::from_fn(|k| round_to_grid(&exact[k], grid_bits));
    Ok(HaarDraw { exact, encoded: EncodedLambda { ell, grid_bits, num } })
}

/// |⟨ψ|λ⟩|² at the precision of the operands, with ψ given in f64.
pub fn overlap_sq_big(psi: &Ket, lambda: &[Big; 4]) -> Big {
    let p = [psi[0].re, psi[0].im, psi[1].re, psi[1].im].map(|v| Big::try_from(v).expect("finite"));
    // ⟨ψ|λ⟩ = conj(ψ0)λ0 + conj(ψ1)λ1
    let re = p[0].clone() * lambda[0].clone() + p[1].clone() * lambda[1].clone() + p[2].clone() * lambda[2].clone()
        + p[3].clone() * lambda[3].clone();
    let im = p[0].clone() * lambda[1].clone() - p[1].clone() * lambda[0].clone() + p[2].clone() * lambda[3].clone()
        - p[3].clone() * lambda[2].clone();
    re.clone() * re + im.clone() * im
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhvOutcomeTable {
    pub samples: u64,
    pub counts: Vec<Vec<u64>>,
}

impl LhvOutcomeTable {
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let n = self.samples as f64;
        self.counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect()
    }

    /// Total-variation distance to an exact table.
    pub fn tv_to(&self, exact: &[Vec<f64>]) -> f64 {
        let f = self.frequencies();
        0.5 * f.iter().flatten().zip(exact.iter().flatten()).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Every cell within k binomial standard deviations of the exact table.
    pub fn within_sigma(&self, exact: &[Vec<f64>], k: f64) -> bool {
        let n = self.samples as f64;
        self.counts.iter().flatten().zip(exact.iter().flatten()).all(|(&c, &p)| {
            let sd = (p * (1.0 - p) / n).sqrt();
            (c as f64 / n - p).abs() <= k * sd + 1e-12
        })
    }

    pub fn to_csv(&self, exact: &[Vec<f64>]) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["a", "b", "count", "exact_prob", "mc_prob", "sigma"])?;
        let n = self.samples as f64;
        for (a, row) in self.counts.iter().enumerate() {
            for (b, &c) in row.iter().enumerate() {
                let p = exact[a][b];
                w.write_record([
                    a.to_string(),
                    b.to_string(),
                    c.to_string(),
                    format!("{p:.10}"),
                    format!("{:.10}", c as f64 / n),
                    format!("{:.10}", (p * (1.0 - p) / n).sqrt()),
                ])?;
            }
        }
        Ok(String::from_utf8(w.into_inner().expect("in-memory")).expect("ascii"))
    }
}

/// Monte Carlo of the ideal model: per round a shared Haar λ and branch draw plus
/// private draws for each party, chunked over independent streams.
pub fn sample_hirsch(model: &HirschModel, pa: &FineGrainedPovm, pb: &FineGrainedPovm, samples: u64, rng: RngState, workers: usize) -> Result<LhvOutcomeTable, LhvError> {
    if samples == 0 {
        return Err(LhvError::NoSamples);
    }
    check_fine(pa)?;
    check_fine(pb)?;
    let (na, nb) = (pa.coarse_len(), pb.coarse_len());
    let parts = run_chunked(samples, workers, |chunk, len| -> Result<Vec<u64>, LhvError> {
        let mut shared = rng.child(3 * chunk).rng();
        let mut ra = rng.child(3 * chunk + 1).rng();
        let mut rb = rng.child(3 * chunk + 2).rng();
        let mut counts = vec![0u64; na * nb];
        for _ in 0..len {
            let lambda = haar_qubit(&mut shared);
            let u: f64 = shared.gen();
            let a = alice_sim_ideal(model, pa, lambda.amps(), u, LocalDraws::sample(&mut ra))?;
            let b = bob_sim_ideal(model, pb, lambda.amps(), u, LocalDraws::sample(&mut rb))?;
            counts[a * nb + b] += 1;
        }
        Ok(counts)
    });
    let mut total = vec![0u64; na * nb];
    for p in parts {
        for (t, c) in total.iter_mut().zip(p?) {
            *t += c;
        }
    }
    Ok(LhvOutcomeTable { samples, counts: total.chunks(nb).map(|r| r.to_vec()).collect() })
}

/// Monte Carlo of the projective mixture model, one shared Haar λ and branch draw per round.
pub fn sample_werner_mix(target: MixTarget, q: f64, p: &Mat, qp: &Mat, samples: u64, rng: RngState, workers: usize) -> Result<LhvOutcomeTable, LhvError> {
    if samples == 0 {
        return Err(LhvError::NoSamples);
    }
    werner_mix_exact(target, q, p, qp)?;
    let parts = run_chunked(samples, workers, |chunk, len| -> Result<[u64; 4], LhvError> {
        let mut shared = rng.child(2 * chunk).rng();
        let mut local = rng.child(2 * chunk + 1).rng();
        let mut counts = [0u64; 4];
        for _ in 0..len {
            let lambda = haar_qubit(&mut shared);
            let u: f64 = shared.gen();
            let (a, b) = werner_mix_sim(target, q, p, qp, lambda.amps(), u, &mut local)?;
            counts[usize::from(2 * a + b)] += 1;
        }
        Ok(counts)
    });
    let mut total = [0u64; 4];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part?) {
            *t += c;
        }
    }
    Ok(LhvOutcomeTable { samples, counts: vec![total[..2].to_vec(), total[2..].to_vec()] })
}
