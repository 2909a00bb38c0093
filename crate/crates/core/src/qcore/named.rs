use super::{identity, kron, partial_trace_matrix, projector, DensityMatrix, Ket, Mat, QError, QResult, C64};
use std::f64::consts::FRAC_1_SQRT_2;

/// Parsed named-state description.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedState {
    Werner(f64),
    Rho0(f64),
    Hirsch { q: f64, sigma_a: String, sigma_b: String },
    Bell(String),
    SixState(usize),
    Mixed,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Ket of the s-th element of |0⟩, |1⟩, |+⟩, |−⟩, |i⟩, |−i⟩.
pub fn six_state_ket(s: usize) -> Ket {
    let h = FRAC_1_SQRT_2;
    let v = match s {
        0 => [c(1.0, 0.0), c(0.0, 0.0)],
        1 => [c(0.0, 0.0), c(1.0, 0.0)],
        2 => [c(h, 0.0), c(h, 0.0)],
        3 => [c(h, 0.0), c(-h, 0.0)],
        4 => [c(h, 0.0), c(0.0, h)],
        5 => [c(h, 0.0), c(0.0, -h)],
        _ => panic!("six-state index {s} out of range"),
    };
    Ket::from_column_slice(&v)
}

pub fn six_state(s: usize) -> QResult<DensityMatrix> {
    if s > 5 {
        return Err(QError::OutOfRange(format!("six-state index {s}")));
    }
    Ok(DensityMatrix { m: projector(&six_state_ket(s)) })
}

/// Single-qubit state by short name: ket0, ket1, plus, minus, plusi, minusi, mixed.
pub fn qubit_state_by_name(name: &str) -> QResult<DensityMatrix> {
    let idx = match name {
        "ket0" | "0" => 0,
        "ket1" | "1" => 1,
        "plus" | "+" => 2,
        "minus" | "-" => 3,
        "plusi" | "i" => 4,
        "minusi" | "-i" => 5,
        "mixed" => return DensityMatrix::maximally_mixed(2),
        _ => return Err(QError::BadSpec(name.to_string())),
    };
    six_state(idx)
}

pub(crate) fn bell_ket(name: &str) -> QResult<Ket> {
    let h = FRAC_1_SQRT_2;
    let v = match name {
        "phi+" | "phiplus" => [h, 0.0, 0.0, h],
        "phi-" | "phiminus" => [h, 0.0, 0.0, -h],
        "psi+" | "psiplus" => [0.0, h, h, 0.0],
        "psi-" | "psiminus" | "singlet" => [0.0, h, -h, 0.0],
        _ => return Err(QError::BadSpec(format!("bell:{name}"))),
    };
    Ok(Ket::from_iterator(4, v.iter().map(|&x| c(x, 0.0))))
}

pub(crate) fn singlet() -> Mat {
    projector(&bell_ket("psi-").expect("known name"))
}

fn check_unit(name: &str, x: f64) -> QResult<()> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(QError::OutOfRange(format!("{name} = {x} not in [0,1]")));
    }
    Ok(())
}

pub(crate) fn werner_matrix(p: f64) -> Mat {
    singlet() * c(p, 0.0) + identity(4) * c((1.0 - p) / 4.0, 0.0)
}

pub(crate) fn rho0_matrix(q: f64) -> Mat {
    let ket0 = projector(&six_state_ket(0));
    singlet() * c(q, 0.0) + kron(&ket0, &identity(2)) * c((1.0 - q) / 2.0, 0.0)
}

pub(crate) fn hirsch_matrix(q: f64, sigma_a: &Mat, sigma_b: &Mat) -> Mat {
    let r0 = rho0_matrix(q);
    let rho_a = partial_trace_matrix(&r0, 0b01).expect("two qubits");
    let rho_b = partial_trace_matrix(&r0, 0b10).expect("two qubits");
    (r0 + kron(&rho_a, sigma_b) + kron(sigma_a, &rho_b) + kron(sigma_a, sigma_b)) * c(0.25, 0.0)
}

impl NamedState {
    pub fn parse(spec: &str) -> QResult<Self> {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let bad = || QError::BadSpec(spec.to_string());
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        let parsed = match parts.as_slice() {
            ["werner", p] => NamedState::Werner(num(p)?),
            ["rho0", q] => NamedState::Rho0(num(q)?),
            ["hirsch", q, a, b] => NamedState::Hirsch {
                q: num(q)?,
                sigma_a: a.to_string(),
                sigma_b: b.to_string(),
            },
            ["bell", name] => NamedState::Bell(name.to_string()),
            ["sixstate", s] => NamedState::SixState(s.parse().map_err(|_| bad())?),
            ["mixed"] => NamedState::Mixed,
            _ => return Err(bad()),
        };
        Ok(parsed)
    }

    pub fn build(&self) -> QResult<DensityMatrix> {
        match self {
            NamedState::Werner(p) => {
                check_unit("p", *p)?;
                DensityMatrix::new(werner_matrix(*p))
            }
            NamedState::Rho0(q) => {
                check_unit("q", *q)?;
                DensityMatrix::new(rho0_matrix(*q))
            }
            NamedState::Hirsch { q, sigma_a, sigma_b } => {
                check_unit("q", *q)?;
                let sa = qubit_state_by_name(sigma_a)?;
                let sb = qubit_state_by_name(sigma_b)?;
                DensityMatrix::new(hirsch_matrix(*q, sa.matrix(), sb.matrix()))
            }
            NamedState::Bell(name) => DensityMatrix::new(projector(&bell_ket(name)?)),
            NamedState::SixState(s) => six_state(*s),
            NamedState::Mixed => DensityMatrix::maximally_mixed(4),
        }
    }
}

/// Parses and builds a state from strings such as `werner:0.8` or `hirsch:0.333:ket0:ket0`.
pub fn named_state(spec: &str) -> QResult<DensityMatrix> {
    NamedState::parse(spec)?.build()
}
