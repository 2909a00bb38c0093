//! PPT entanglement witnesses for two-qubit states and their expansion over
//! transposed six-state products.

use crate::qcore::{
    kron, partial_transpose_matrix, projector, six_state_ket, DensityMatrix, HermitianOp, Mat,
    MatrixJson, QError, Subsystem, C64, TOL,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Spectral threshold below which a partial transpose counts as negative.
pub const NPT_THRESHOLD: f64 = -1e-9;

pub type Beta = [[f64; 6]; 6];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WitnessError {
    #[error("state has no negative partial transpose (minimum eigenvalue {0:.3e}); it is separable or cannot be witnessed this way")]
    NotEntangledOrPpt(f64),
    #[error("witness requires a two-qubit operator, got dimension {0}")]
    WrongDimension(usize),
    #[error(transparent)]
    Q(#[from] QError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub w: HermitianOp,
    pub eta: f64,
    pub beta: Beta,
    pub target: DensityMatrix,
    /// Optional spec string of the target, carried into JSON output.
    pub target_spec: Option<String>,
}

fn pauli(j: usize) -> Mat {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let v = match j {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -i, i, z],
        3 => [one, z, z, -one],
        _ => unreachable!(),
    };
    Mat::from_row_slice(2, 2, &v)
}

/// Coefficients of each Pauli (I, X, Y, Z) over the transposed six states.
fn pauli_in_transposed_six(j: usize) -> [f64; 6] {
    match j {
        0 => [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        1 => [0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
        // Y = τ₄ − τ₅ and transposition swaps τ₄ with τ₅.
        2 => [0.0, 0.0, 0.0, 0.0, -1.0, 1.0],
        3 => [1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
        _ => unreachable!(),
    }
}

/// Canonical six-by-six expansion of a two-qubit Hermitian operator.
pub fn tomographic_decomposition(w: &HermitianOp) -> Result<Beta, WitnessError> {
    if w.dim() != 4 {
        return Err(WitnessError::WrongDimension(w.dim()));
    }
    let mut beta = [[0.0; 6]; 6];
    for j in 0..4 {
        for k in 0..4 {
            let p = kron(&pauli(j), &pauli(k));
            let coeff = (w.matrix() * p).trace().re / 4.0;
            if coeff == 0.0 {
                continue;
            }
            let (vj, vk) = (pauli_in_transposed_six(j), pauli_in_transposed_six(k));
            for s in 0..6 {
                for t in 0..6 {
                    beta[s][t] += coeff * vj[s] * vk[t];
                }
            }
        }
    }
    Ok(beta)
}

/// Σ β_{s,t} τ_s^T ⊗ τ_t^T.
pub fn reconstruct(beta: &Beta) -> Mat {
    let taus: Vec<Mat> = (0..6).map(|s| projector(&six_state_ket(s)).transpose()).collect();
    let mut out = Mat::zeros(4, 4);
    for s in 0..6 {
        for t in 0..6 {
            if beta[s][t] != 0.0 {
                out += kron(&taus[s], &taus[t]) * C64::new(beta[s][t], 0.0);
            }
        }
    }
    out
}

pub fn beta_l1(beta: &Beta) -> f64 {
    beta.iter().flatten().map(|b| b.abs()).sum()
}

/// Witness from the most negative eigenvector of the partial transpose.
pub fn ppt_witness(rho: &DensityMatrix) -> Result<Witness, WitnessError> {
    if rho.dim() != 4 {
        return Err(WitnessError::WrongDimension(rho.dim()));
    }
    let pt = HermitianOp::new(partial_transpose_matrix(rho.matrix(), Subsystem::B))?;
    let (vals, vecs) = pt.eigen();
    let lambda_min = vals[0];
    if lambda_min >= NPT_THRESHOLD {
        return Err(WitnessError::NotEntangledOrPpt(lambda_min));
    }
    let w = HermitianOp::new(partial_transpose_matrix(&projector(&vecs[0]), Subsystem::B))?;
    let beta = tomographic_decomposition(&w)?;
    Ok(Witness { w, eta: lambda_min.abs(), beta, target: rho.clone(), target_spec: None })
}

impl Witness {
    pub fn with_spec(mut self, spec: &str) -> Self {
        self.target_spec = Some(spec.to_string());
        self
    }

    pub fn value(&self, rho: &DensityMatrix) -> Result<f64, WitnessError> {
        witness_value(self, rho)
    }

    pub fn beta_l1(&self) -> f64 {
        beta_l1(&self.beta)
    }

    /// Largest deviation between W and its six-state reconstruction.
    pub fn reconstruction_error(&self) -> f64 {
        (reconstruct(&self.beta) - self.w.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> WitnessJson {
        WitnessJson {
            eta: self.eta,
            beta: self.beta.iter().map(|r| r.to_vec()).collect(),
            w: MatrixJson::from_matrix(self.w.matrix()),
            target: self.target_spec.clone(),
        }
    }
}

pub fn witness_value(w: &Witness, rho: &DensityMatrix) -> Result<f64, WitnessError> {
    if rho.dim() != 4 {
        return Err(QError::DimMismatch { expected: 4, got: rho.dim() }.into());
    }
    Ok(rho.expectation(w.w.matrix()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub eta: f64,
    pub beta: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: MatrixJson,
    pub target: Option<String>,
}

/// True when the witness is nonnegative on the given product of pure kets.
pub fn nonnegative_on_product(w: &Witness, u: &crate::qcore::Ket, v: &crate::qcore::Ket) -> bool {
    let uv = u.kronecker(v);
    (uv.adjoint() * w.w.matrix() * &uv)[(0, 0)].re >= -TOL
}
