use super::*;
use crate::lhv::HirschModel;
use crate::qcore::{haar_qubit, projector, Mat, RngState};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis(dim: usize, i: usize) -> PureState {
    PureState::basis(dim, i).unwrap()
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn random_real_state(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    [t.cos(), t.sin()]
}

/// Random real state whose amplitudes respect the estimator's band at `ell`.
fn banded_state(rng: &mut ChaCha8Rng, ell: u32) -> [f64; 2] {
    loop {
        let s = random_real_state(rng);
        if s.iter().all(|a| a.abs() > 2f64.powi(-(ell as i32))) {
            return s;
        }
    }
}

#[test]
fn postselection_examples() {
    let h_post = Circuit::new(1, vec![Gate::H(0), Gate::Post(0, 1)], vec![]).unwrap();
    let out = run_postselected(&h_post, &basis(2, 0)).unwrap();
    assert!(approx(out.success, 0.5, 1e-12));
    assert!(approx(out.amps[1].norm(), 1.0, 1e-12) && out.amps[0].norm() < 1e-12);
    let dead = Circuit::new(1, vec![Gate::Post(0, 1)], vec![]).unwrap();
    assert_eq!(run_postselected(&dead, &basis(2, 0)), Err(PostError::ZeroBranch));
    let tof = Circuit::new(3, vec![Gate::Ccx(0, 1, 2)], vec![]).unwrap();
    let out = run_postselected(&tof, &basis(8, 0b110)).unwrap();
    assert!(approx(out.amps[0b111].re, 1.0, 1e-15));
    assert_eq!(run_postselected(&tof, &basis(4, 0)), Err(PostError::Dim { expected: 8, got: 4 }));
}

#[test]
fn circuit_validation_and_json() {
    assert_eq!(Circuit::new(0, vec![], vec![]), Err(PostError::Width(0)));
    assert_eq!(Circuit::new(2, vec![Gate::H(2)], vec![]), Err(PostError::QubitRange(2)));
    assert_eq!(Circuit::new(3, vec![Gate::Ccx(0, 0, 1)], vec![]), Err(PostError::RepeatedQubit));
    let text = r#"{"qubits": 3, "gates": [["h",0],["ccx",0,1,2],["post",1,1]]}"#;
    let circ = Circuit::from_json(text).unwrap();
    assert_eq!(circ.gates(), &[Gate::H(0), Gate::Ccx(0, 1, 2), Gate::Post(1, 1)]);
    assert_eq!(Circuit::from_json(&circ.to_json()).unwrap(), circ);
    let with_out = Circuit::new(4, vec![Gate::H(3)], vec![2, 0]).unwrap();
    assert_eq!(Circuit::from_json(&with_out.to_json()).unwrap(), with_out);
    assert_eq!(with_out.answer(0b0010), 0b10);
    assert_eq!(with_out.answer(0b1000), 0b01);
    for bad in [r#"{"qubits": 2, "gates": [["x",0]]}"#, r#"{"qubits": 2, "gates": [["h"]]}"#, r#"{"qubits": 2}"#, "[]"] {
        assert!(matches!(Circuit::from_json(bad), Err(PostError::Parse(_))), "{bad}");
    }
}

fn random_post_circuit(rng: &mut ChaCha8Rng) -> Circuit {
    let base = Circuit::random(4, 12, vec![], rng).unwrap();
    let mut gates = base.gates().to_vec();
    for _ in 0..2 {
        let at = rng.gen_range(0..=gates.len());
        gates.insert(at, Gate::Post(rng.gen_range(0..4), rng.gen_range(0..2)));
    }
    Circuit::new(4, gates, vec![]).unwrap()
}

fn gate_matrix(g: Gate, s: usize) -> Mat {
    let dim = 1 << s;
    let mut m = Mat::zeros(dim, dim);
    for col in 0..dim {
        let mut v = vec![c(0.0); dim];
        v[col] = c(1.0);
        match g {
            Gate::H(q) => super::apply_h(&mut v, s, q),
            Gate::Ccx(a, b, t) => super::apply_ccx(&mut v, s, a, b, t),
            Gate::Post(q, val) => {
                super::project(&mut v, s, q, val);
            }
        }
        for row in 0..dim {
            m[(row, col)] = v[row];
        }
    }
    m
}

#[test]
fn postselection_equals_classical_conditioning() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 50 {
        let circ = random_post_circuit(&mut rng);
        let input = crate::qcore::PureState::new(Ket::from_fn(16, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).normalize()).unwrap();
        // Dense product of gate matrices and projectors applied to the input.
        let mut v = input.amps().clone();
        for g in circ.gates() {
            v = gate_matrix(*g, 4) * v;
        }
        let kept = v.norm_squared();
        match run_postselected(&circ, &input) {
            Ok(out) => {
                assert!(approx(out.success, kept, 1e-12));
                assert!((out.amps.clone() - v / C64::new(kept.sqrt(), 0.0)).norm() < 1e-12);
                checked += 1;
            }
            Err(PostError::ZeroBranch) => assert!(kept < 1e-20),
            Err(e) => panic!("{e}"),
        }
    }
    // Postselection at the end equals conditioning the unpostselected output.
    for _ in 0..50 {
        let base = Circuit::random(4, 10, vec![], &mut rng).unwrap();
        let mut gates = base.gates().to_vec();
        gates.push(Gate::Post(1, 0));
        gates.push(Gate::Post(3, 1));
        let circ = Circuit::new(4, gates, vec![]).unwrap();
        let input = basis(16, rng.gen_range(0..16));
        let free = run_postselected(&circ.without_postselection(), &input).unwrap();
        let mut cond: Vec<C64> = free.amps.iter().enumerate().map(|(i, z)| if i & 0b0100 == 0 && i & 0b0001 != 0 { *z } else { c(0.0) }).collect();
        let p: f64 = cond.iter().map(|z| z.norm_sqr()).sum();
        match run_postselected(&circ, &input) {
            Ok(out) => {
                cond.iter_mut().for_each(|z| *z /= p.sqrt());
                assert!(approx(out.success, p, 1e-12));
                assert!((out.amps - Ket::from_vec(cond)).norm() < 1e-12);
            }
            Err(PostError::ZeroBranch) => assert!(p < 1e-20),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn sampled_postselection_agrees() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let circ = Circuit::new(3, vec![Gate::H(0), Gate::H(1), Gate::Ccx(0, 1, 2), Gate::Post(2, 0)], vec![]).unwrap();
    let input = basis(8, 0);
    let exact = run_postselected(&circ, &input).unwrap();
    let mut attempts = 0;
    let trials = 20_000;
    for _ in 0..trials {
        let (st, k) = run_postselected_sampled(&circ, &input, 1000, &mut rng).unwrap();
        assert!((st.amps - exact.amps.clone()).norm() < 1e-12);
        attempts += k;
    }
    // Attempts are geometric with mean 1/success.
    let mean = attempts as f64 / trials as f64;
    assert!(approx(mean, 1.0 / exact.success, 0.05), "{mean} vs {}", 1.0 / exact.success);
    let dead = Circuit::new(1, vec![Gate::Post(0, 1)], vec![]).unwrap();
    assert_eq!(run_postselected_sampled(&dead, &basis(2, 0), 50, &mut rng).map(|x| x.1), Err(PostError::ZeroBranch));
}

#[test]
fn eigenvector_examples() {
    let h = Circuit::new(1, vec![Gate::H(0)], vec![]).unwrap();
    let e = eigenvector_from_circuit(&h, 0).unwrap();
    assert!(approx(e.eta, 1.0, 1e-12));
    let psi = real_eigenvector(&e).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    assert!(approx(psi[0], s, 1e-12) && approx(psi[1], s, 1e-12));
    let id = Circuit::identity(1).unwrap();
    let e = eigenvector_from_circuit(&id, 1).unwrap();
    assert_eq!(real_eigenvector(&e).unwrap(), [0.0, 1.0]);
    let id4 = Circuit::identity(4).unwrap();
    assert_eq!(eigenvector_from_circuit(&id4, 0b0100).unwrap(), EigenPair { eta: 0.0, psi: None });
    let post = Circuit::new(1, vec![Gate::Post(0, 0)], vec![]).unwrap();
    assert_eq!(eigenvector_from_circuit(&post, 0), Err(PostError::NotUnitary));
    assert_eq!(eigenvector_from_circuit(&h, 2), Err(PostError::Outcome(2)));
}

#[test]
fn eigenvectors_resolve_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in 1..=4 {
        for _ in 0..10 {
            let circ = Circuit::random(s, 3 * s + 4, vec![], &mut rng).unwrap();
            let mut sum = Mat::zeros(2, 2);
            for a in 0..circ.dim() {
                let e = eigenvector_from_circuit(&circ, a).unwrap();
                if let Some(psi) = e.psi {
                    sum += projector(psi.amps()) * c(e.eta);
                }
            }
            assert!((sum - Mat::identity(2, 2)).norm() < 1e-10);
            // The POVM reproduces the circuit's outcome law on random inputs.
            let povm = circuit_povm(&circ).unwrap();
            let psi = haar_qubit(&mut rng);
            let out = run_postselected(&circ, &embed_first(&circ, psi.amps()).unwrap()).unwrap().probabilities();
            let mut by_answer = vec![0.0; circ.answer_count()];
            for (a, p) in out.iter().enumerate() {
                by_answer[circ.answer(a)] += p;
            }
            let mut from_povm = vec![0.0; circ.answer_count()];
            for el in povm.elements() {
                from_povm[el.outcome] += el.weight * el.overlap(psi.amps());
            }
            for (x, y) in by_answer.iter().zip(&from_povm) {
                assert!(approx(*x, *y, 1e-10));
            }
        }
    }
}

#[test]
fn eigenvector_amplitudes_are_dyadic_multiples() {
    // Every path through the circuit crosses each Hadamard once, so amplitudes of U†|a⟩
    // are integer multiples of 2^(-h/2).
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let circ = Circuit::random(4, 14, vec![], &mut rng).unwrap();
        let h = circ.gates().iter().filter(|g| matches!(g, Gate::H(_))).count() as i32;
        let unit = 2f64.powf(-h as f64 / 2.0);
        for a in 0..16 {
            let e = eigenvector_from_circuit(&circ, a).unwrap();
            if let Some(psi) = &e.psi {
                for amp in real_eigenvector(&e).unwrap() {
                    let k = amp * e.eta.sqrt() / unit;
                    assert!(approx(k, k.round(), 1e-9), "{k}");
                    assert!(amp == 0.0 || amp.abs() * e.eta.sqrt() >= unit * (1.0 - 1e-12));
                }
                let _ = psi;
            }
            let (eta, psi): (f64, Option<[f64; 2]>) = real_eigenpair(&circ, a).unwrap();
            assert!(approx(eta, e.eta, 1e-12));
            assert_eq!(psi.is_some(), e.psi.is_some());
        }
    }
}

#[test]
fn square_and_scale_subroutines() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = sub1_square(&[s, s]).unwrap();
    assert!(approx(plus.amps[0], s, 1e-15) && approx(plus.amps[1], s, 1e-15));
    assert!(approx(plus.success, 0.5, 1e-15));
    assert_eq!(sub1_square(&[1.0, 0.0]).unwrap().amps, [1.0, 0.0]);
    let t = std::f64::consts::FRAC_PI_6;
    let out = sub1_square(&[t.cos(), t.sin()]).unwrap();
    let n = (0.75f64 * 0.75 + 0.25 * 0.25).sqrt();
    assert!(approx(out.amps[0], 0.75 / n, 1e-12) && approx(out.amps[1], 0.25 / n, 1e-12));

    let r = [0.6, 0.8];
    assert!(approx(sub2_scale(&1.0, &r).unwrap().amps[1], 0.8, 1e-15));
    assert_eq!(sub2_scale(&0.0, &r).unwrap().amps, [1.0, 0.0]);
    let out = sub2_scale(&2.0, &[s, s]).unwrap();
    let n = 5f64.sqrt();
    assert!(approx(out.amps[0], 1.0 / n, 1e-12) && approx(out.amps[1], 2.0 / n, 1e-12));
    assert_eq!(sub2_scale(&0.0, &[0.0, 1.0]), Err(PostError::ZeroBranch));
}

#[test]
fn comparison_state_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let z = [rng.gen::<f64>(), rng.gen::<f64>()];
        let i = rng.gen_range(-6..=6);
        let r = 2f64.powi(i);
        let out = sub3_state(i as i64, &z).unwrap().amps;
        let x = z[1];
        let y = r / 2f64.sqrt() * (z[0] - z[1]);
        let n = (x * x + y * y).sqrt();
        assert!(approx(out[0], x / n, 1e-12) && approx(out[1], y / n, 1e-12));
    }
}

#[test]
fn comparison_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = SweepParams { m: 10 };
    assert_eq!(sub3_compare(&[1.0, 0.0], p, &mut rng), Ok(Comparison::GreaterByMargin));
    assert_eq!(sub3_compare(&[0.0, 1.0], p, &mut rng), Ok(Comparison::Less));
    assert_eq!(sub3_compare(&[-0.6, 0.8], p, &mut rng), Err(PostError::Undetermined));
    assert_eq!(sub3_compare(&[1.0, 1e-30], p, &mut rng), Err(PostError::Undetermined));
    let trials = 10_000;
    let fails = (0..trials).filter(|_| sub3_compare(&[0.8, 0.6], p, &mut rng).unwrap() != Comparison::GreaterByMargin).count();
    assert!(fails as f64 / trials as f64 <= 2f64.powi(-10), "{fails}");
    let fails = (0..trials).filter(|_| sub3_compare(&[0.6, 0.8], p, &mut rng).unwrap() != Comparison::Less).count();
    assert!(fails as f64 / trials as f64 <= 2f64.powi(-10), "{fails}");
}

#[test]
fn comparison_shortcut_matches_direct_sampling() {
    // With small m the all-fail probability is visible; the one-draw shortcut and the
    // point-by-point sweep must agree on the pass rate.
    let p = SweepParams { m: 1 };
    let z = [0.5, 0.52];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 100_000;
    let shortcut = (0..trials).filter(|_| sub3_compare(&z, p, &mut rng).unwrap() == Comparison::GreaterByMargin).count();
    let mut direct = 0;
    let n = p.shots();
    for _ in 0..trials {
        let n2 = z[0] * z[0] + z[1] * z[1];
        let mut pass = (0..n).all(|_| rng.gen::<f64>() < z[0] * z[0] / n2);
        for i in -p.range()..=p.range() {
            let s = sub3_state(i, &z).unwrap().amps;
            let pp = (s[0] + s[1]).powi(2) / 2.0;
            let hits = (0..n).filter(|_| rng.gen::<f64>() < pp).count() as u64;
            pass |= hits >= p.pass_count();
        }
        direct += usize::from(pass);
    }
    let (a, b) = (shortcut as f64 / trials as f64, direct as f64 / trials as f64);
    let sd = (a.max(b) * (1.0 - a.min(b)) * 2.0 / trials as f64).sqrt();
    assert!(a > 0.0 && (a - b).abs() < 5.0 * sd + 1e-4, "{a} vs {b}");
}

#[test]
fn binary_search_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ell = 10;
    match sub4_binary_search(&[s, s], ell, &mut rng).unwrap() {
        Ratio::Finite(b) => assert!(approx(b, 1.0, 2f64.powi(-2 * ell as i32)), "{b}"),
        Ratio::Infinite => panic!("flagged"),
    }
    assert_eq!(sub4_binary_search(&[1.0, 0.0], ell, &mut rng).unwrap(), Ratio::Infinite);
    for _ in 0..50 {
        let st = random_real_state(&mut rng);
        let (e1, e2) = (st[0] * st[0], st[1] * st[1]);
        if e1 < 1e-6 || e2 < 1e-6 {
            continue;
        }
        let Ratio::Finite(b) = sub4_binary_search(&st, ell, &mut rng).unwrap() else { panic!("flagged") };
        let ratio = e1 / e2;
        assert!((b - ratio).abs() <= 2f64.powi(-20) * (1.0 + ratio), "{b} vs {ratio}");
    }
}

#[test]
fn dot_product_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = dot_product_estimate(&[s, s], &[s, 0.0, s, 0.0], 12, &mut rng).unwrap();
    assert!(approx(v, 1.0, 2f64.powi(-12)));
    let v = dot_product_estimate(&[1.0, 0.0], &[0.0, 0.0, 1.0, 0.0], 12, &mut rng).unwrap();
    assert!(approx(v, 0.0, 2f64.powi(-12)));
    let t = std::f64::consts::FRAC_PI_8;
    let v = dot_product_estimate(&[t.cos(), t.sin()], &[1.0, 0.0, 0.0, 0.0], 12, &mut rng).unwrap();
    assert!(approx(v, 0.85355, 1e-4) && approx(v, t.cos().powi(2), 2f64.powi(-12)));
    assert!(matches!(dot_product_estimate(&[s, s], &[1.0, 0.0, 0.0, 0.0], 17, &mut rng), Err(PostError::Budget { .. })));
    assert_eq!(dot_product_estimate(&[1.0, 1e-9], &[1.0, 0.0, 0.0, 0.0], 8, &mut rng), Err(PostError::Undetermined));
}

#[test]
fn dot_product_small_ladder() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for ell in [4u32, 8, 12, 16] {
        let mut worst = 0.0f64;
        for _ in 0..40 {
            let psi = banded_state(&mut rng, ell);
            let lam = ket_components(haar_qubit(&mut rng).amps());
            let exact = (psi[0] * lam[0] + psi[1] * lam[2]).powi(2) + (psi[0] * lam[1] + psi[1] * lam[3]).powi(2);
            let v = dot_product_estimate(&psi, &lam, ell, &mut rng).unwrap();
            worst = worst.max((v - exact).abs());
        }
        assert!(worst <= 2f64.powi(-(ell as i32)), "ell {ell}: {worst}");
    }
}

#[test]
fn extended_backend_reaches_high_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ell in [24u32, 40] {
        for _ in 0..3 {
            let th: f64 = rng.gen_range(0.1..1.4);
            let psi = [Ext::from_f64(th.cos()), Ext::from_f64(th.sin())];
            let draw = crate::lhv::approx_haar(crate::lhv::Backend::Extended, 1, &mut rng).unwrap();
            let lam: [Ext; 4] = std::array::from_fn(|k| Ext::new(draw.exact[k].clone()));
            let re = psi[0].clone() * lam[0].clone() + psi[1].clone() * lam[2].clone();
            let im = psi[0].clone() * lam[1].clone() + psi[1].clone() * lam[3].clone();
            let exact = re.clone() * re + im.clone() * im;
            let v = dot_product_estimate(&psi, &lam, ell, &mut rng).unwrap();
            assert!((v - exact).abs() <= Ext::pow2(-(ell as i64)));
        }
    }
    let s = Ext::from_f64(0.6);
    let lam = [Ext::one(), Ext::zero(), Ext::zero(), Ext::zero()];
    assert!(matches!(dot_product_estimate(&[s.clone(), s], &lam, 65, &mut rng), Err(PostError::Budget { .. })));
}

#[test]
fn eigenvector_dot_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let id = Circuit::identity(1).unwrap();
    let v = dot_product_with_eigenvector(0, &id, &[1.0, 0.0, 0.0, 0.0], 12, &mut rng).unwrap();
    assert!(approx(v, 1.0, 2f64.powi(-12)));
    let h = Circuit::new(1, vec![Gate::H(0)], vec![]).unwrap();
    let v = dot_product_with_eigenvector(0, &h, &[1.0, 0.0, 0.0, 0.0], 12, &mut rng).unwrap();
    assert!(approx(v, 0.5, 2f64.powi(-12)));
    let id4 = Circuit::identity(4).unwrap();
    assert_eq!(dot_product_with_eigenvector(1, &id4, &[1.0, 0.0, 0.0, 0.0], 8, &mut rng), Err(PostError::ZeroBranch));
    // Extended scalars agree with the float path on a four-qubit circuit.
    let circ = demo_game().alice[1].clone();
    for a in 0..16 {
        let (eta, psi) = real_eigenpair::<Ext>(&circ, a).unwrap();
        let f = eigenvector_from_circuit(&circ, a).unwrap();
        assert!(approx(eta.to_f64(), f.eta, 1e-12));
        if let Some(p) = psi {
            let g = real_eigenvector(&f).unwrap();
            assert!(approx(p[0].to_f64(), g[0], 1e-12) && approx(p[1].to_f64(), g[1], 1e-12));
        }
    }
}

#[test]
fn computational_circuit_first_branch_is_deterministic() {
    let m = HirschModel::standard(1.0 / 3.0).unwrap();
    let w = m.alice_weights();
    assert!(approx(w[0], 2.0 / 3.0, 1e-15) && w[1].abs() < 1e-15 && approx(w[2], 1.0 / 3.0, 1e-15));
    let circ = Circuit::identity(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let zero = [1.0, 0.0, 0.0, 0.0];
    for _ in 0..200 {
        let sd = SharedDraws { branch: 0.1, zero_coin: rng.gen() };
        // λ̂ = |0⟩: outcome 0 has v₁ = 1 and falls back to σ_A = |0⟩; outcome 8 has v₁ = 0 and is kept.
        let a = alice_sim(&m, &circ, &zero, sd, 8, &mut rng).unwrap();
        assert!(a == 0 || a == 8);
    }
    let hits = (0..2000)
        .filter(|_| alice_sim(&m, &circ, &zero, SharedDraws { branch: 0.1, zero_coin: 0.5 }, 8, &mut rng).unwrap() == 8)
        .count();
    assert!((hits as f64 / 2000.0 - 0.5).abs() < 0.05);
}

#[test]
fn efficient_players_track_ideal_law() {
    let m = HirschModel::standard(1.0 / 3.0).unwrap();
    let game = demo_game();
    let n = 30_000;
    let table = game.sample_postsim(&m, n, 12, RngState::new(14, 0), 1).unwrap();
    let ideal = game.ideal_law(&m).unwrap();
    let tv = table.tv_to(&ideal);
    assert!(tv <= 3.0 * tv_sigma(&ideal, n), "{tv}");
    assert!((ideal.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn game_sampling_replays() {
    let m = HirschModel::standard(0.25).unwrap();
    let game = demo_game();
    let n = crate::par::CHUNK + 100;
    let a = game.sample_postsim(&m, n, 8, RngState::new(15, 0), 1).unwrap();
    let b = game.sample_postsim(&m, n, 8, RngState::new(15, 0), 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(game.sample_postsim(&m, 0, 8, RngState::new(15, 0), 1), Err(PostError::NoSamples));
    let q = game.quantum_law(&m.state()).unwrap();
    assert!((q.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn threshold_search_examples() {
    let v = threshold_search(|u| u > 0.5, 10).unwrap();
    assert!(approx(v, 0.5, 10.0 * 2f64.powi(-10)));
    let v = threshold_search(|u| u > 0.0, 10).unwrap();
    assert!(v <= 10.0 * 2f64.powi(-10));
    let mut flip = false;
    assert_eq!(
        threshold_search(
            |_| {
                flip = !flip;
                flip
            },
            20
        ),
        Err(PostError::OracleViolation)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let c_ell = 10;
    let eps = 2f64.powi(-c_ell);
    let trials = 1000;
    let mut ok = 0;
    for _ in 0..trials {
        let f: f64 = rng.gen();
        let mut r2 = ChaCha8Rng::seed_from_u64(rng.gen());
        // Noise that violates the promise with probability 2^(-10·cℓ).
        let noisy = |u: f64| {
            let honest = u > f + eps / 2.0;
            if r2.gen::<f64>() < 2f64.powi(-10 * c_ell) {
                !honest
            } else {
                honest
            }
        };
        if let Ok(v) = threshold_search(noisy, c_ell as u32) {
            ok += usize::from((v - f).abs() <= 10.0 * eps);
        }
    }
    assert!(ok as f64 / trials as f64 >= 1.0 - eps);
    let mut r3 = ChaCha8Rng::seed_from_u64(17);
    let target = 0.3;
    let oracle = oracle_from_estimator(|| target + (r3.gen::<f64>() - 0.5) * eps * 0.9, 10);
    let v = threshold_search(oracle, 10).unwrap();
    assert!(approx(v, target, 10.0 * eps));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unitary_runs_preserve_norm(seed in any::<u64>(), len in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let circ = Circuit::random(4, len, vec![], &mut rng).unwrap();
        let input = basis(16, rng.gen_range(0..16));
        let out = run_postselected(&circ, &input).unwrap();
        prop_assert!((out.amps.norm() - 1.0).abs() < 1e-12);
        prop_assert_eq!(out.success, 1.0);
    }

    #[test]
    fn square_then_scale_matches_formula(t in 0.05f64..1.5, beta in 0.01f64..50.0) {
        let st = [t.cos(), t.sin()];
        let sq = sub1_square(&st).unwrap();
        let out = sub2_scale(&beta, &sq.amps).unwrap();
        let (x, y) = (st[0] * st[0], beta * st[1] * st[1]);
        let n = (x * x + y * y).sqrt();
        prop_assert!((out.amps[0] - x / n).abs() < 1e-12 && (out.amps[1] - y / n).abs() < 1e-12);
    }
}
