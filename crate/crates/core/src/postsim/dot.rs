//! Postselected subroutines on single-qubit real states and the dot-product estimator.
//!
//! Postselection is applied exactly (projection and renormalisation); the finite-shot
//! measurements of the comparison sweep and the sign test are sampled.

use super::real::Real;
use super::PostError;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use statrs::distribution::{Binomial as BinomialLaw, DiscreteCDF};

/// A postselected single-qubit state with real amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPost<R> {
    pub amps: [R; 2],
    /// Probability that the postselection succeeded.
    pub success: R,
}

fn zero_floor<R: Real>() -> R {
    R::from_f64(1e-300)
}

/// Tensor product of two real qubits, index = 2·first + second.
fn tensor<R: Real>(a: &[R; 2], b: &[R; 2]) -> [R; 4] {
    [
        a[0].clone() * b[0].clone(),
        a[0].clone() * b[1].clone(),
        a[1].clone() * b[0].clone(),
        a[1].clone() * b[1].clone(),
    ]
}

/// CNOT with the first qubit as control.
fn cnot<R: Real>(v: [R; 4]) -> [R; 4] {
    let [a, b, c, d] = v;
    [a, b, d, c]
}

/// Keeps the components where the second qubit equals `bit` and renormalises.
fn postselect_second<R: Real>(v: &[R; 4], bit: usize) -> Result<RealPost<R>, PostError> {
    let x = v[bit].clone();
    let y = v[2 + bit].clone();
    let n2 = x.clone() * x.clone() + y.clone() * y.clone();
    let total = v.iter().fold(R::zero(), |acc, c| acc + c.clone() * c.clone());
    if n2 < zero_floor() {
        return Err(PostError::ZeroBranch);
    }
    let n = n2.sqrt();
    Ok(RealPost { amps: [x / n.clone(), y / n], success: n2 / total })
}

fn norm<R: Real>(s: &[R; 2]) -> R {
    (s[0].clone() * s[0].clone() + s[1].clone() * s[1].clone()).sqrt()
}

/// Two copies, CNOT, postselect the target on |0⟩: output ∝ η₁²|0⟩ + η₂²|1⟩.
pub fn sub1_square<R: Real>(state: &[R; 2]) -> Result<RealPost<R>, PostError> {
    postselect_second(&cnot(tensor(state, state)), 0)
}

/// Ancilla (|0⟩ + β|1⟩)/√(1+β²), CNOT onto the state, postselect |0⟩: output ∝ η₁|0⟩ + βη₂|1⟩.
pub fn sub2_scale<R: Real>(beta: &R, state: &[R; 2]) -> Result<RealPost<R>, PostError> {
    let n = (R::one() + beta.clone() * beta.clone()).sqrt();
    let anc = [R::one() / n.clone(), beta.clone() / n];
    postselect_second(&cnot(tensor(&anc, state)), 0)
}

/// α|0⟩ζ + β|1⟩Hζ, postselect the second qubit on |1⟩: output ∝ αζ₂|0⟩ + (β/√2)(ζ₁−ζ₂)|1⟩.
pub fn sub3_state<R: Real>(ratio_exp: i64, zeta: &[R; 2]) -> Result<RealPost<R>, PostError> {
    let beta = R::pow2(ratio_exp);
    let alpha = R::one();
    let n = (alpha.clone() * alpha.clone() + beta.clone() * beta.clone()).sqrt();
    let (a, b) = (alpha / n.clone(), beta / n);
    let h = R::one() / R::from_f64(2.0).sqrt();
    let hz = [
        h.clone() * (zeta[0].clone() + zeta[1].clone()),
        h * (zeta[0].clone() - zeta[1].clone()),
    ];
    let v = [
        a.clone() * zeta[0].clone(),
        a * zeta[1].clone(),
        b.clone() * hz[0].clone(),
        b * hz[1].clone(),
    ];
    postselect_second(&v, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    GreaterByMargin,
    Less,
}

/// Threshold on |⟨+|φ⟩| used by the comparison sweep.
pub const OVERLAP_THRESHOLD: f64 = 0.985;

/// Frozen constants of the comparison: sweep i ∈ [−4m, 4m], 16m shots per i,
/// pass when at least ⌈0.75·shots⌉ shots land on |+⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepParams {
    pub m: u32,
}

impl SweepParams {
    pub fn range(&self) -> i64 {
        4 * self.m as i64
    }

    pub fn shots(&self) -> u64 {
        16 * self.m as u64
    }

    pub fn pass_count(&self) -> u64 {
        (0.75 * self.shots() as f64).ceil() as u64
    }
}

fn plus_prob<R: Real>(s: &[R; 2]) -> f64 {
    let num = s[0].clone() + s[1].clone();
    let den = R::from_f64(2.0) * (s[0].clone() * s[0].clone() + s[1].clone() * s[1].clone());
    (num.clone() * num / den).to_f64().clamp(0.0, 1.0)
}

fn kl_bernoulli(a: f64, p: f64) -> f64 {
    let t = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    t(a, p) + t(1.0 - a, 1.0 - p)
}

/// Bound below which the all-fail case is settled by one uniform draw.
const SHORTCUT_BOUND: f64 = 1e-3;

/// Distinguishes ζ₁ > ζ₂ + margin from ζ₁ < ζ₂ for non-negative amplitudes.
///
/// Each sweep point measures `shots` fresh copies of |φ_{2^i}⟩ in the Hadamard basis; a
/// preliminary Z-basis check on `shots` copies of the input catches ζ₂ = 0. When ζ₁ ≤ ζ₂
/// every sweep point has P(+) ≤ ½, and the overall pass probability is sampled from its
/// exact value with a single uniform draw.
pub fn sub3_compare<R: Real, G: Rng + ?Sized>(zeta: &[R; 2], params: SweepParams, rng: &mut G) -> Result<Comparison, PostError> {
    let lo = R::pow2(-params.range());
    let hi = R::pow2(params.range());
    for z in zeta {
        if *z < R::zero() || (!z.is_zero() && (*z <= lo || *z >= hi)) {
            return Err(PostError::Undetermined);
        }
    }
    if zeta[0].is_zero() && zeta[1].is_zero() {
        return Err(PostError::ZeroBranch);
    }
    let n = params.shots();
    let k = params.pass_count();
    let n2 = zeta[0].clone() * zeta[0].clone() + zeta[1].clone() * zeta[1].clone();
    let z0 = (zeta[0].clone() * zeta[0].clone() / n2).to_f64();
    let q_zero = z0.powi(n as i32);
    let points = 2 * params.range() + 1;
    let sweep_prob = |i: i64| -> Result<f64, PostError> { Ok(plus_prob(&sub3_state(i, zeta)?.amps)) };

    if zeta[0] <= zeta[1] {
        let per_point = (-(n as f64) * kl_bernoulli(k as f64 / n as f64, 0.5)).exp();
        let bound = q_zero + points as f64 * per_point;
        if bound < SHORTCUT_BOUND {
            let u: f64 = rng.gen();
            if u >= bound {
                return Ok(Comparison::Less);
            }
            let mut none = 1.0 - q_zero;
            for i in -params.range()..=params.range() {
                let law = BinomialLaw::new(sweep_prob(i)?, n).expect("valid binomial");
                none *= 1.0 - law.sf(k - 1);
            }
            return Ok(if u < 1.0 - none { Comparison::GreaterByMargin } else { Comparison::Less });
        }
    }

    if rng.gen::<f64>() < q_zero {
        return Ok(Comparison::GreaterByMargin);
    }
    // Start near the sweep point where φ is closest to |+⟩ and move outward.
    let start = if zeta[0] > zeta[1] && !zeta[1].is_zero() {
        let r = (R::from_f64(2.0).sqrt() * zeta[1].clone() / (zeta[0].clone() - zeta[1].clone())).to_f64();
        (r.log2().round() as i64).clamp(-params.range(), params.range())
    } else {
        0
    };
    let mut order = Vec::with_capacity(points as usize);
    order.push(start);
    for d in 1..=2 * params.range() {
        for i in [start + d, start - d] {
            if i.abs() <= params.range() {
                order.push(i);
            }
        }
    }
    for i in order {
        let p = sweep_prob(i)?;
        let hits = Binomial::new(n, p).expect("valid binomial").sample(rng);
        if hits >= k {
            return Ok(Comparison::GreaterByMargin);
        }
    }
    Ok(Comparison::Less)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ratio<R> {
    Finite(R),
    /// η₂ = 0: every comparison reported η₁² above the scaled η₂².
    Infinite,
}

/// Internal precision used by the bisection for a target parameter ℓ.
pub fn bisection_ell(ell: u32) -> u32 {
    ell + 4
}

pub fn sweep_for(ell: u32) -> SweepParams {
    let lt = bisection_ell(ell);
    SweepParams { m: (3 * lt).div_ceil(2) + 8 }
}

/// Finds β₀ with |η₁² − β₀η₂²| ≤ 2^(−2ℓ) by bisection over β ∈ [0, 2^(2ℓt)], each step
/// comparing the amplitudes of the squared-then-scaled state.
pub fn sub4_binary_search<R: Real, G: Rng + ?Sized>(state: &[R; 2], ell: u32, rng: &mut G) -> Result<Ratio<R>, PostError> {
    let lt = bisection_ell(ell) as i64;
    let params = sweep_for(ell);
    let squared = sub1_square(state)?;
    let top = R::pow2(2 * lt);
    let mut lo = R::zero();
    let mut hi = top.clone();
    let width = R::pow2(-2 * lt);
    let mut moved_hi = false;
    while hi.clone() - lo.clone() > width {
        let mid = (lo.clone() + hi.clone()) / R::from_f64(2.0);
        let scaled = sub2_scale(&mid, &squared.amps)?;
        match sub3_compare(&scaled.amps, params, rng)? {
            Comparison::GreaterByMargin => lo = mid,
            Comparison::Less => {
                hi = mid;
                moved_hi = true;
            }
        }
    }
    if !moved_hi {
        return Ok(Ratio::Infinite);
    }
    Ok(Ratio::Finite((lo + hi) / R::from_f64(2.0)))
}

/// Estimates |⟨ψ|ψ′⟩|² for a real normalised ψ = γ₁|0⟩ + γ₂|1⟩ (available as copies) and
/// ψ′ given by its components (Re γ₁′, Im γ₁′, Re γ₂′, Im γ₂′).
pub fn dot_product_estimate<R: Real, G: Rng + ?Sized>(psi: &[R; 2], psi_prime: &[R; 4], ell: u32, rng: &mut G) -> Result<R, PostError> {
    if ell == 0 || ell > R::MAX_ELL {
        return Err(PostError::Budget { ell, backend: R::NAME });
    }
    let lo = R::pow2(-(ell as i64));
    let hi = R::pow2(ell as i64);
    for g in psi {
        let a = g.abs();
        if !a.is_zero() && (a <= lo || a >= hi) {
            return Err(PostError::Undetermined);
        }
    }
    let (g1, g2) = match sub4_binary_search(psi, ell, rng)? {
        Ratio::Infinite => (R::one(), R::zero()),
        Ratio::Finite(b) => {
            let d = R::one() + b.clone();
            let g1 = (b.clone() / d.clone()).sqrt();
            let g2 = (R::one() / d).sqrt();
            let positive = if b.is_zero() {
                true
            } else {
                let s = sub2_scale(&b.sqrt(), psi)?;
                let p = plus_prob(&s.amps);
                let shots = 2 * ell as u64 + 1;
                let hits = Binomial::new(shots, p).expect("valid binomial").sample(rng);
                hits > ell as u64
            };
            (g1, if positive { g2 } else { -g2 })
        }
    };
    let re = g1.clone() * psi_prime[0].clone() + g2.clone() * psi_prime[2].clone();
    let im = g1 * psi_prime[1].clone() + g2 * psi_prime[3].clone();
    let v = re.clone() * re + im.clone() * im;
    Ok(if v > R::one() { R::one() } else { v })
}

/// Normalises a real state; used by callers that hold unnormalised amplitudes.
pub fn normalise<R: Real>(s: &[R; 2]) -> Result<[R; 2], PostError> {
    let n = norm(s);
    if n < zero_floor() {
        return Err(PostError::ZeroBranch);
    }
    Ok([s[0].clone() / n.clone(), s[1].clone() / n])
}
