//! Finite-dimensional quantum mechanics on a handful of qubits.
//!
//! Qubit tensor order is big-endian everywhere: qubit 0 is the most
//! significant factor of a basis index.

pub(crate) mod named;
mod rng;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use named::{named_state, qubit_state_by_name, six_state, six_state_ket, NamedState};
pub use rng::{RngState, Stream};

pub type C64 = Complex64;
pub type Mat = DMatrix<C64>;
pub type Ket = DVector<C64>;

/// Numerical tolerance for every structural invariant check.
pub const TOL: f64 = 1e-10;
/// Eigenvalues below this are treated as zero when fine-graining.
pub const DROP_EIGEN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("entry is not finite")]
    NonFinite,
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("trace is {0} instead of 1")]
    BadTrace(f64),
    #[error("state norm is {0} instead of 1")]
    NotNormalized(f64),
    #[error("POVM elements sum to identity only within {0:.3e}")]
    NotComplete(f64),
    #[error("POVM has no elements")]
    EmptyPovm,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("cannot parse state spec `{0}`")]
    BadSpec(String),
}

pub type QResult<T> = Result<T, QError>;

fn check_square(m: &Mat) -> QResult<usize> {
    if m.nrows() != m.ncols() {
        return Err(QError::NotSquare(m.nrows(), m.ncols()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QError::NonFinite);
    }
    Ok(m.nrows())
}

fn hermitian_deviation(m: &Mat) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues with
/// matching unit eigenvectors (columns).
pub fn hermitian_eigen(m: &Mat) -> (Vec<f64>, Vec<Ket>) {
    let eig = m.clone().symmetric_eigen();
    let mut pairs: Vec<(f64, Ket)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, canonical_phase(v.into_owned())))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Rotates a vector so that its first non-negligible component is real and positive.
pub fn canonical_phase(mut v: Ket) -> Ket {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-9).copied() {
        let phase = z / z.norm();
        v /= phase;
    }
    v
}

pub fn num_qubits(dim: usize) -> QResult<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(QError::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn projector(v: &Ket) -> Mat {
    v * v.adjoint()
}

pub fn identity(dim: usize) -> Mat {
    Mat::identity(dim, dim)
}

pub fn trace_product(a: &Mat, b: &Mat) -> C64 {
    // Tr[AB] without forming the product.
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// A pure state vector; `normalized` is false for deliberately subnormalized vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Ket,
    normalized: bool,
}

impl PureState {
    pub fn new(amps: Ket) -> QResult<Self> {
        num_qubits(amps.len())?;
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QError::NonFinite);
        }
        let n2 = amps.norm_squared();
        if (n2 - 1.0).abs() > TOL {
            return Err(QError::NotNormalized(n2.sqrt()));
        }
        Ok(PureState { amps, normalized: true })
    }

    pub fn subnormalized(amps: Ket) -> QResult<Self> {
        num_qubits(amps.len())?;
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(QError::NonFinite);
        }
        Ok(PureState { amps, normalized: false })
    }

    pub fn from_slice(amps: &[C64]) -> QResult<Self> {
        Self::new(Ket::from_column_slice(amps))
    }

    pub fn basis(dim: usize, index: usize) -> QResult<Self> {
        if index >= dim {
            return Err(QError::OutOfRange(format!("basis index {index} >= {dim}")));
        }
        let mut v = Ket::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &Ket {
        &self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.dotc(&other.amps)
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix { m: projector(&self.amps) }
    }

    /// ⟨ψ|P|ψ⟩ for a Hermitian operator.
    pub fn expectation(&self, op: &Mat) -> f64 {
        (self.amps.adjoint() * op * &self.amps)[(0, 0)].re
    }
}

/// Trace-one positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: Mat,
}

impl DensityMatrix {
    pub fn new(m: Mat) -> QResult<Self> {
        let dim = check_square(&m)?;
        num_qubits(dim)?;
        let dev = hermitian_deviation(&m);
        if dev > TOL {
            return Err(QError::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
            return Err(QError::BadTrace(tr.re));
        }
        let (vals, _) = hermitian_eigen(&m);
        if vals[0] < -TOL {
            return Err(QError::NotPositive(vals[0]));
        }
        Ok(DensityMatrix { m })
    }

    pub fn maximally_mixed(dim: usize) -> QResult<Self> {
        num_qubits(dim)?;
        Ok(DensityMatrix { m: identity(dim) / C64::new(dim as f64, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn into_matrix(self) -> Mat {
        self.m
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { m: kron(&self.m, &other.m) }
    }

    pub fn expectation(&self, op: &Mat) -> f64 {
        trace_product(op, &self.m).re
    }

    pub fn transpose(&self) -> DensityMatrix {
        DensityMatrix { m: self.m.transpose() }
    }

    /// Convex combination of states of equal dimension.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> QResult<Self> {
        let dim = parts.first().map(|p| p.1.dim()).ok_or(QError::EmptyPovm)?;
        let mut m = Mat::zeros(dim, dim);
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(QError::DimMismatch { expected: dim, got: rho.dim() });
            }
            m += rho.matrix() * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    /// Unit-trace state from a positive operator, used after projective conditioning.
    pub(crate) fn from_unnormalized(m: Mat) -> Option<Self> {
        let tr = m.trace().re;
        if tr <= 1e-300 {
            return None;
        }
        let mut m = m / C64::new(tr, 0.0);
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        m = h;
        Some(DensityMatrix { m })
    }

    pub fn as_hermitian(&self) -> HermitianOp {
        HermitianOp { m: self.m.clone() }
    }
}

/// Hermitian operator with no positivity requirement.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOp {
    m: Mat,
}

impl HermitianOp {
    pub fn new(m: Mat) -> QResult<Self> {
        check_square(&m)?;
        let dev = hermitian_deviation(&m);
        if dev > TOL {
            return Err(QError::NotHermitian(dev));
        }
        Ok(HermitianOp { m })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn eigen(&self) -> (Vec<f64>, Vec<Ket>) {
        hermitian_eigen(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }
}

/// Finite list of positive operators summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<HermitianOp>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOp>) -> QResult<Self> {
        let first = elements.first().ok_or(QError::EmptyPovm)?;
        let dim = first.dim();
        let mut sum = Mat::zeros(dim, dim);
        for e in &elements {
            if e.dim() != dim {
                return Err(QError::DimMismatch { expected: dim, got: e.dim() });
            }
            let min = e.min_eigenvalue();
            if min < -TOL {
                return Err(QError::NotPositive(min));
            }
            sum += e.matrix();
        }
        let dev = (sum - identity(dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > TOL {
            return Err(QError::NotComplete(dev));
        }
        Ok(Povm { elements })
    }

    pub fn from_matrices(ms: Vec<Mat>) -> QResult<Self> {
        Self::new(ms.into_iter().map(HermitianOp::new).collect::<QResult<_>>()?)
    }

    /// Projective measurement in an orthonormal basis given by kets.
    pub fn projective(kets: &[Ket]) -> QResult<Self> {
        Self::from_matrices(kets.iter().map(projector).collect())
    }

    pub fn computational(dim: usize) -> QResult<Self> {
        let kets: Vec<Ket> = (0..dim)
            .map(|i| PureState::basis(dim, i).map(|s| s.amps().clone()))
            .collect::<QResult<_>>()?;
        Self::projective(&kets)
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOp] {
        &self.elements
    }

    /// Born probabilities Tr[A_i ρ], clamped at zero and renormalized.
    pub fn probabilities(&self, rho: &DensityMatrix) -> QResult<Vec<f64>> {
        if rho.dim() != self.dim() {
            return Err(QError::DimMismatch { expected: self.dim(), got: rho.dim() });
        }
        let mut p: Vec<f64> =
            self.elements.iter().map(|e| rho.expectation(e.matrix()).max(0.0)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        Ok(p)
    }
}

/// One weighted rank-one element of a fine-grained POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct FineElement {
    pub weight: f64,
    pub vector: Ket,
    /// Index of the original outcome this element refines.
    pub outcome: usize,
}

impl FineElement {
    pub fn projector(&self) -> Mat {
        projector(&self.vector)
    }

    pub fn operator(&self) -> Mat {
        self.projector() * C64::new(self.weight, 0.0)
    }

    /// ⟨ψ|P|ψ⟩ for this element's projector.
    pub fn overlap(&self, psi: &Ket) -> f64 {
        self.vector.dotc(psi).norm_sqr()
    }
}

/// Rank-one refinement of a POVM with the coarse-graining map.
#[derive(Debug, Clone, PartialEq)]
pub struct FineGrainedPovm {
    elements: Vec<FineElement>,
    coarse_len: usize,
}

impl FineGrainedPovm {
    pub fn elements(&self) -> &[FineElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].vector.len()
    }

    pub fn coarse_len(&self) -> usize {
        self.coarse_len
    }

    pub fn coarse(&self, fine: usize) -> usize {
        self.elements[fine].outcome
    }

    /// Coarse POVM: fine operators summed per original outcome.
    pub fn to_povm(&self) -> QResult<Povm> {
        let dim = self.dim();
        let mut ms = vec![Mat::zeros(dim, dim); self.coarse_len];
        for e in &self.elements {
            ms[e.outcome] += e.operator();
        }
        Povm::from_matrices(ms)
    }

    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| (e.weight * rho.expectation(&e.projector())).max(0.0))
            .collect()
    }

    /// Builds a fine-grained POVM directly from weighted unit vectors.
    pub fn from_elements(elements: Vec<FineElement>) -> QResult<Self> {
        let first = elements.first().ok_or(QError::EmptyPovm)?;
        let dim = first.vector.len();
        let coarse_len = elements.iter().map(|e| e.outcome + 1).max().unwrap_or(0);
        let mut sum = Mat::zeros(dim, dim);
        for e in &elements {
            if e.vector.len() != dim {
                return Err(QError::DimMismatch { expected: dim, got: e.vector.len() });
            }
            if !(e.weight > 0.0) {
                return Err(QError::OutOfRange(format!("fine weight {}", e.weight)));
            }
            sum += e.operator();
        }
        let dev = (sum - identity(dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > TOL {
            return Err(QError::NotComplete(dev));
        }
        Ok(FineGrainedPovm { elements, coarse_len })
    }
}

fn ordering_key(v: &Ket) -> Vec<i64> {
    v.iter()
        .flat_map(|z| [(z.re * 1e9).round() as i64, (z.im * 1e9).round() as i64])
        .collect()
}

/// Splits every POVM element into weighted rank-one projectors via its eigendecomposition.
pub fn fine_grain(povm: &Povm) -> QResult<FineGrainedPovm> {
    let mut elements = Vec::new();
    for (outcome, e) in povm.elements().iter().enumerate() {
        let (vals, vecs) = e.eigen();
        if vals[0] < -TOL {
            return Err(QError::NotPositive(vals[0]));
        }
        let mut pairs: Vec<(f64, Ket)> =
            vals.into_iter().zip(vecs).filter(|(l, _)| *l >= DROP_EIGEN).collect();
        pairs.sort_by(|a, b| {
            let (ka, kb) = ((a.0 * 1e9).round() as i64, (b.0 * 1e9).round() as i64);
            kb.cmp(&ka).then_with(|| ordering_key(&b.1).cmp(&ordering_key(&a.1)))
        });
        elements.extend(pairs.into_iter().map(|(weight, vector)| FineElement {
            weight: weight.min(1.0),
            vector,
            outcome,
        }));
    }
    Ok(FineGrainedPovm { elements, coarse_len: povm.len() })
}

/// Samples an index from a discrete distribution given a uniform draw.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let target = u * total;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if target < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn born_sample<R: Rng + ?Sized>(rho: &DensityMatrix, povm: &Povm, rng: &mut R) -> QResult<usize> {
    let p = povm.probabilities(rho)?;
    Ok(sample_index(&p, rng.gen::<f64>()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Partial transpose of a two-qubit operator on one tensor factor.
pub fn partial_transpose(op: &HermitianOp, subsystem: Subsystem) -> QResult<HermitianOp> {
    if op.dim() != 4 {
        return Err(QError::Unsupported(format!("partial transpose on dimension {}", op.dim())));
    }
    Ok(HermitianOp { m: partial_transpose_matrix(op.matrix(), subsystem) })
}

pub(crate) fn partial_transpose_matrix(m: &Mat, subsystem: Subsystem) -> Mat {
    let mut out = Mat::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            let (a, b, a2, b2) = (i >> 1, i & 1, j >> 1, j & 1);
            let (r, c) = match subsystem {
                Subsystem::A => ((a2 << 1) | b, (a << 1) | b2),
                Subsystem::B => ((a << 1) | b2, (a2 << 1) | b),
            };
            out[(r, c)] = m[(i, j)];
        }
    }
    out
}

/// Traces out every qubit whose bit in `keep` is clear. Bit `k` of the
/// mask refers to qubit `k` (qubit 0 is the most significant factor).
pub fn partial_trace(rho: &DensityMatrix, keep: u32) -> QResult<DensityMatrix> {
    Ok(DensityMatrix { m: partial_trace_matrix(rho.matrix(), keep)? })
}

pub(crate) fn partial_trace_matrix(m: &Mat, keep: u32) -> QResult<Mat> {
    let n = num_qubits(m.nrows())?;
    if n == 0 || keep == 0 || keep >> n != 0 {
        return Err(QError::OutOfRange(format!("keep mask {keep:#b} for {n} qubits")));
    }
    let kept: Vec<usize> = (0..n).filter(|q| keep >> q & 1 == 1).collect();
    let traced: Vec<usize> = (0..n).filter(|q| keep >> q & 1 == 0).collect();
    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let compose = |k: usize, t: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            let bit = (k >> (kept.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        for (pos, &q) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - pos)) & 1;
            idx |= bit << (n - 1 - q);
        }
        idx
    };
    let mut out = Mat::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += m[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Haar-random single-qubit pure state from four Gaussian amplitudes.
pub fn haar_qubit<R: Rng + ?Sized>(rng: &mut R) -> PureState {
    loop {
        let g: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            let amps = Ket::from_vec(vec![
                C64::new(g[0] / norm, g[1] / norm),
                C64::new(g[2] / norm, g[3] / norm),
            ]);
            return PureState { amps, normalized: true };
        }
    }
}

/// Matrix in the `{"dim","re","im"}` interchange layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &Mat) -> Self {
        let dim = m.nrows();
        MatrixJson {
            dim,
            re: (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..dim).map(|i| (0..dim).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> QResult<Mat> {
        let d = self.dim;
        if self.re.len() != d || self.im.len() != d {
            return Err(QError::DimMismatch { expected: d, got: self.re.len() });
        }
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            if self.re[i].len() != d || self.im[i].len() != d {
                return Err(QError::DimMismatch { expected: d, got: self.re[i].len() });
            }
            for j in 0..d {
                m[(i, j)] = C64::new(self.re[i][j], self.im[i][j]);
            }
        }
        Ok(m)
    }
}

/// POVM file layout: a list of element matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmJson {
    pub elements: Vec<MatrixJson>,
}

impl PovmJson {
    pub fn from_povm(p: &Povm) -> Self {
        PovmJson { elements: p.elements().iter().map(|e| MatrixJson::from_matrix(e.matrix())).collect() }
    }

    pub fn to_povm(&self) -> QResult<Povm> {
        Povm::from_matrices(self.elements.iter().map(MatrixJson::to_matrix).collect::<QResult<_>>()?)
    }
}

/// Random single-qubit POVM with `k` rank-one elements built from Haar vectors.
pub fn random_qubit_povm<R: Rng + ?Sized>(k: usize, rng: &mut R) -> QResult<Povm> {
    let vs: Vec<Ket> = (0..k.max(2)).map(|_| haar_qubit(rng).amps().clone()).collect();
    let weights: Vec<f64> = (0..vs.len()).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mut s = Mat::zeros(2, 2);
    for (v, w) in vs.iter().zip(&weights) {
        s += projector(v) * C64::new(*w, 0.0);
    }
    // S^{-1/2} A_i S^{-1/2} normalizes any positive family into a POVM.
    let (vals, vecs) = hermitian_eigen(&s);
    let mut inv_sqrt = Mat::zeros(2, 2);
    for (l, v) in vals.iter().zip(&vecs) {
        inv_sqrt += projector(v) * C64::new(1.0 / l.sqrt(), 0.0);
    }
    let elems = vs
        .iter()
        .zip(&weights)
        .map(|(v, w)| {
            let e = &inv_sqrt * projector(v) * &inv_sqrt * C64::new(*w, 0.0);
            (&e + e.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    Povm::from_matrices(elems)
}

#[cfg(test)]
mod tests;
