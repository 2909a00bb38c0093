use super::*;
use proptest::prelude::*;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn diag(vals: &[f64]) -> Mat {
    let n = vals.len();
    let mut m = Mat::zeros(n, n);
    for (i, v) in vals.iter().enumerate() {
        m[(i, i)] = c(*v);
    }
    m
}

#[test]
fn fine_grain_identity_gives_basis_in_order() {
    let povm = Povm::from_matrices(vec![identity(2)]).unwrap();
    let fg = fine_grain(&povm).unwrap();
    assert_eq!(fg.len(), 2);
    assert!(fg.elements().iter().all(|e| e.outcome == 0 && (e.weight - 1.0).abs() < 1e-12));
    assert!((fg.elements()[0].vector[0].norm() - 1.0).abs() < 1e-12);
    assert!((fg.elements()[1].vector[1].norm() - 1.0).abs() < 1e-12);
}

#[test]
fn fine_grain_rank_one_unchanged() {
    let povm = Povm::computational(2).unwrap();
    let fg = fine_grain(&povm).unwrap();
    assert_eq!(fg.len(), 2);
    for (i, e) in fg.elements().iter().enumerate() {
        assert_eq!(e.outcome, i);
        assert!((e.weight - 1.0).abs() < 1e-12);
        assert!(max_abs(&(e.projector() - povm.elements()[i].matrix())) < 1e-12);
    }
}

#[test]
fn fine_grain_half_identity_gives_four_half_weights() {
    let half = identity(2) * c(0.5);
    let povm = Povm::from_matrices(vec![half.clone(), half]).unwrap();
    let fg = fine_grain(&povm).unwrap();
    assert_eq!(fg.len(), 4);
    for e in fg.elements() {
        assert!((e.weight - 0.5).abs() < 1e-12);
    }
    // Oracle: eigen-decomposition of 0.5·I has eigenvalue 0.5 twice.
    let (vals, _) = hermitian_eigen(&(identity(2) * c(0.5)));
    assert!(vals.iter().all(|v| (v - 0.5).abs() < 1e-12));
    let sum: Mat = fg.elements().iter().map(FineElement::operator).fold(Mat::zeros(2, 2), |a, b| a + b);
    assert!(max_abs(&(sum - identity(2))) < 1e-10);
}

#[test]
fn fine_grain_rejects_negative_element() {
    let bad = HermitianOp::new(diag(&[1.5, -0.5]));
    let ok = HermitianOp::new(diag(&[-0.5, 1.5]));
    let err = Povm::new(vec![bad.unwrap(), ok.unwrap()]).unwrap_err();
    assert!(matches!(err, QError::NotPositive(v) if (v + 0.5).abs() < 1e-12));
}

#[test]
fn born_sample_trivial_cases() {
    let mut rng = RngState::new(1, 0).rng();
    let rho = named_state("werner:0.7").unwrap();
    let single = Povm::from_matrices(vec![identity(4)]).unwrap();
    for _ in 0..100 {
        assert_eq!(born_sample(&rho, &single, &mut rng).unwrap(), 0);
    }
    let zero = six_state(0).unwrap();
    let comp = Povm::computational(2).unwrap();
    for _ in 0..100 {
        assert_eq!(born_sample(&zero, &comp, &mut rng).unwrap(), 0);
    }
    assert!(matches!(born_sample(&rho, &comp, &mut rng), Err(QError::DimMismatch { .. })));
}

#[test]
fn born_sample_mixed_frequency() {
    let n = 1_000_000;
    let mut rng = RngState::new(2, 0).rng();
    let rho = DensityMatrix::maximally_mixed(2).unwrap();
    let comp = Povm::computational(2).unwrap();
    let zeros = (0..n).filter(|_| born_sample(&rho, &comp, &mut rng).unwrap() == 0).count();
    let sigma = (0.25f64 / n as f64).sqrt();
    assert!(((zeros as f64 / n as f64) - 0.5).abs() <= 3.0 * sigma, "freq {}", zeros);
    assert!((3.0 * sigma - 0.0015).abs() < 1e-4);
}

#[test]
fn partial_transpose_examples() {
    let ii = HermitianOp::new(identity(4)).unwrap();
    assert_eq!(partial_transpose(&ii, Subsystem::B).unwrap(), ii);
    let singlet = named_state("bell:psi-").unwrap().as_hermitian();
    let pt = partial_transpose(&singlet, Subsystem::B).unwrap();
    assert!((pt.min_eigenvalue() + 0.5).abs() < 1e-12);
    assert!((pt.trace() - 1.0).abs() < 1e-12);
    let back = partial_transpose(&pt, Subsystem::B).unwrap();
    assert_eq!(back, singlet);
    assert!(partial_transpose(&HermitianOp::new(identity(2)).unwrap(), Subsystem::A).is_err());
}

#[test]
fn partial_transpose_on_a_matches_full_transpose_of_b() {
    let rho = named_state("hirsch:0.3:plus:plusi").unwrap();
    let pa = partial_transpose_matrix(rho.matrix(), Subsystem::A);
    let pb = partial_transpose_matrix(rho.matrix(), Subsystem::B);
    assert!(max_abs(&(pa - pb.transpose())) < 1e-15);
}

#[test]
fn partial_trace_examples() {
    let zz = PureState::basis(4, 0).unwrap().density();
    let a = partial_trace(&zz, 0b01).unwrap();
    assert!(max_abs(&(a.matrix() - six_state(0).unwrap().matrix())) < 1e-15);
    let phi = named_state("bell:phi+").unwrap();
    let half = identity(2) * c(0.5);
    assert!(max_abs(&(partial_trace(&phi, 0b01).unwrap().matrix() - &half)) < 1e-15);
    for k in 0..=10 {
        let rho = named_state(&format!("werner:{}", k as f64 / 10.0)).unwrap();
        assert!(max_abs(&(partial_trace(&rho, 0b01).unwrap().matrix() - &half)) < 1e-15);
        assert!(max_abs(&(partial_trace(&rho, 0b10).unwrap().matrix() - &half)) < 1e-15);
    }
    assert!(partial_trace(&phi, 0b100).is_err());
    assert!(partial_trace(&phi, 0).is_err());
}

#[test]
fn partial_trace_of_three_qubits_keeps_middle() {
    let a = six_state(2).unwrap();
    let b = six_state(4).unwrap();
    let cc = six_state(1).unwrap();
    let abc = a.tensor(&b).tensor(&cc);
    let mid = partial_trace(&abc, 0b010).unwrap();
    assert!(max_abs(&(mid.matrix() - b.matrix())) < 1e-14);
    let outer = partial_trace(&abc, 0b101).unwrap();
    assert!(max_abs(&(outer.matrix() - a.tensor(&cc).matrix())) < 1e-14);
}

#[test]
fn named_state_examples() {
    let w1 = named_state("werner:1").unwrap();
    assert!(max_abs(&(w1.matrix() - named_state("bell:psi-").unwrap().matrix())) < 1e-15);

    let h = named_state("hirsch:0.3333333333333333:ket0:ket0").unwrap();
    let q = 1.0 / 3.0;
    let ket0 = six_state(0).unwrap().into_matrix();
    let half = identity(2) * c(0.5);
    let expected = (named_state("bell:psi-").unwrap().into_matrix() * c(q)
        + kron(&ket0, &half) * c(5.0 / 3.0)
        + kron(&half, &ket0) * c(1.0 / 3.0)
        + kron(&ket0, &ket0) * c(5.0 / 3.0))
        * c(0.25);
    assert!(max_abs(&(h.matrix() - expected)) < 1e-14);

    for k in 0..=30 {
        let p = k as f64 / 30.0;
        let rho = named_state(&format!("werner:{p}")).unwrap();
        let min = partial_transpose(&rho.as_hermitian(), Subsystem::B).unwrap().min_eigenvalue();
        assert!((min - (1.0 - 3.0 * p) / 4.0).abs() < 1e-12);
        if (p - 1.0 / 3.0).abs() > 1e-9 {
            assert_eq!(min < 0.0, p > 1.0 / 3.0, "p = {p}");
        }
    }
}

#[test]
fn named_state_errors_and_six_order() {
    assert!(matches!(named_state("werner:1.5"), Err(QError::OutOfRange(_))));
    assert!(matches!(named_state("rho0:-0.1"), Err(QError::OutOfRange(_))));
    assert!(matches!(named_state("nonsense"), Err(QError::BadSpec(_))));
    assert!(named_state("sixstate:6").is_err());
    let z = [1.0, -1.0, 0.0, 0.0, 0.0, 0.0];
    let x = [0.0, 0.0, 1.0, -1.0, 0.0, 0.0];
    let y = [0.0, 0.0, 0.0, 0.0, 1.0, -1.0];
    let pz = diag(&[1.0, -1.0]);
    let mut px = Mat::zeros(2, 2);
    px[(0, 1)] = c(1.0);
    px[(1, 0)] = c(1.0);
    let mut py = Mat::zeros(2, 2);
    py[(0, 1)] = C64::new(0.0, -1.0);
    py[(1, 0)] = C64::new(0.0, 1.0);
    for s in 0..6 {
        let rho = named_state(&format!("sixstate:{s}")).unwrap();
        assert!((rho.expectation(&pz) - z[s]).abs() < 1e-12);
        assert!((rho.expectation(&px) - x[s]).abs() < 1e-12);
        assert!((rho.expectation(&py) - y[s]).abs() < 1e-12);
    }
}

#[test]
fn density_constructor_rejects_invalid() {
    assert!(matches!(DensityMatrix::new(diag(&[0.5, 0.6])), Err(QError::BadTrace(_))));
    assert!(matches!(DensityMatrix::new(diag(&[1.5, -0.5])), Err(QError::NotPositive(_))));
    let mut m = diag(&[0.5, 0.5]);
    m[(0, 1)] = c(0.1);
    assert!(matches!(DensityMatrix::new(m), Err(QError::NotHermitian(_))));
    assert!(matches!(DensityMatrix::new(diag(&[0.5, 0.25, 0.25])), Err(QError::NotPowerOfTwo(3))));
    assert!(matches!(DensityMatrix::new(diag(&[f64::NAN, 1.0])), Err(QError::NonFinite)));
    assert!(PureState::from_slice(&[c(1.0), c(1.0)]).is_err());
}

#[test]
fn haar_qubit_moments() {
    let n = 1_000_000;
    let mut rng = RngState::new(11, 3).rng();
    let p = projector(&six_state_ket(4));
    let (mut s0, mut sp, mut sp2) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let l = haar_qubit(&mut rng);
        assert!((l.norm_squared() - 1.0).abs() < 1e-12);
        s0 += l.amps()[0].norm_sqr();
        let v = l.expectation(&p);
        sp += v;
        sp2 += v * v;
    }
    let nf = n as f64;
    // Overlap is uniform on [0,1]: mean 1/2, variance 1/12; squared overlap has mean 1/3, variance 4/45.
    let sig1 = (1.0f64 / 12.0 / nf).sqrt();
    let sig2 = (4.0f64 / 45.0 / nf).sqrt();
    assert!((s0 / nf - 0.5).abs() <= 3.0 * sig1);
    assert!((sp / nf - 0.5).abs() <= 3.0 * sig1);
    assert!((sp2 / nf - 1.0 / 3.0).abs() <= 3.0 * sig2);
}

#[test]
fn rng_state_replay() {
    use rand::RngCore;
    let a: Vec<u64> = (0..5).map({
        let mut r = RngState::new(9, 4).rng();
        move |_| r.next_u64()
    }).collect();
    let b: Vec<u64> = (0..5).map({
        let mut r = RngState::new(9, 4).rng();
        move |_| r.next_u64()
    }).collect();
    assert_eq!(a, b);
    let mut other = RngState::new(9, 5).rng();
    assert_ne!(a[0], other.next_u64());
    assert_ne!(RngState::new(9, 4).child(0), RngState::new(9, 4).child(1));
}

#[test]
fn matrix_json_round_trip() {
    let rho = named_state("hirsch:0.25:plus:minusi").unwrap();
    let js = serde_json::to_string(&MatrixJson::from_matrix(rho.matrix())).unwrap();
    let back: MatrixJson = serde_json::from_str(&js).unwrap();
    assert_eq!(&back.to_matrix().unwrap(), rho.matrix());
}

/// Chi-square statistic and its upper-tail p-value.
fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let mut stat = 0.0;
    let mut dof = 0usize;
    for (o, e) in observed.iter().zip(expected) {
        if *e > 0.0 {
            stat += (*o as f64 - e).powi(2) / e;
            dof += 1;
        }
    }
    if dof <= 1 {
        return 1.0;
    }
    1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn fine_grain_pushforward_matches_born() {
    let mut rng = RngState::new(42, 0).rng();
    let n = 100_000;
    for trial in 0..20 {
        let k = 2 + trial % 3;
        let povm = random_qubit_povm(k, &mut rng).unwrap();
        let psi = haar_qubit(&mut rng);
        let phi = haar_qubit(&mut rng);
        let rho = DensityMatrix::mixture(&[(0.7, &psi.density()), (0.3, &phi.density())]).unwrap();
        let fg = fine_grain(&povm).unwrap();
        let fine_p = fg.probabilities(&rho);
        let mut counts = vec![0u64; povm.len()];
        for _ in 0..n {
            let f = sample_index(&fine_p, rand::Rng::gen::<f64>(&mut rng));
            counts[fg.coarse(f)] += 1;
        }
        let expected: Vec<f64> =
            povm.probabilities(&rho).unwrap().iter().map(|p| p * n as f64).collect();
        let p = chi_square_p(&counts, &expected);
        assert!(p > 0.001, "trial {trial}: p = {p}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_transpose_is_bitwise_involution(seed in any::<u64>(), sub in prop::bool::ANY) {
        let mut rng = RngState::new(seed, 0).rng();
        let a = haar_qubit(&mut rng).density();
        let b = haar_qubit(&mut rng).density();
        let mixed = DensityMatrix::mixture(&[(0.5, &a.tensor(&b)), (0.5, &named_state("bell:phi+").unwrap())]).unwrap();
        let op = mixed.as_hermitian();
        let s = if sub { Subsystem::A } else { Subsystem::B };
        let twice = partial_transpose(&partial_transpose(&op, s).unwrap(), s).unwrap();
        prop_assert_eq!(twice, op.clone());
        let once = partial_transpose(&op, s).unwrap();
        prop_assert!((once.trace() - op.trace()).abs() < 1e-12);
    }

    #[test]
    fn fine_grain_resolves_identity(seed in any::<u64>(), k in 2usize..6) {
        let mut rng = RngState::new(seed, 1).rng();
        let povm = random_qubit_povm(k, &mut rng).unwrap();
        let fg = fine_grain(&povm).unwrap();
        let sum = fg.elements().iter().map(FineElement::operator).fold(Mat::zeros(2, 2), |a, b| a + b);
        prop_assert!(max_abs(&(sum - identity(2))) < 1e-10);
        for e in fg.elements() {
            prop_assert!(e.weight > 0.0 && e.weight <= 1.0);
            prop_assert!((e.vector.norm() - 1.0).abs() < 1e-10);
        }
        let again = fine_grain(&povm).unwrap();
        prop_assert_eq!(fg, again);
    }

    #[test]
    fn reduced_states_are_valid(seed in any::<u64>(), keep in 1u32..4) {
        let mut rng = RngState::new(seed, 2).rng();
        let a = haar_qubit(&mut rng).density();
        let w = named_state("werner:0.6").unwrap();
        let rho = DensityMatrix::mixture(&[(0.5, &a.tensor(&a)), (0.5, &w)]).unwrap();
        let red = partial_trace(&rho, keep).unwrap();
        prop_assert!(DensityMatrix::new(red.into_matrix()).is_ok());
    }
}
