use super::*;
use crate::qcore::RngState;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashMap;

fn within_3sigma(hits: u64, total: u64, p: f64) -> bool {
    let mean = total as f64 * p;
    let sd = (total as f64 * p * (1.0 - p)).sqrt();
    (hits as f64 - mean).abs() <= 3.0 * sd
}

fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn round_transitions() {
    use RoundTag::*;
    assert!(R2a.can_follow(R1) && R2b.can_follow(R1));
    assert!(R3a.can_follow(R2b) && R3b.can_follow(R2b));
    assert!(!R3a.can_follow(R2a) && !R3b.can_follow(R1) && !R1.can_follow(R3b));
}

#[test]
fn verifier_begin_distribution() {
    let mut r = RngState::new(3, 0).rng();
    let mut zeros = 0;
    for _ in 0..10_000 {
        let s = verifier_begin(8, &mut r).unwrap();
        let expect = if s.g == 0 { TcfMode::TwoToOne } else { TcfMode::Injective };
        assert_eq!(s.keys().mode(), expect);
        assert_eq!(s.public().to_bytes().len(), 26);
        zeros += u64::from(s.g == 0);
    }
    assert!(within_3sigma(zeros, 10_000, 0.5));
}

#[test]
fn commit_collapses_according_to_family() {
    let mut r = RngState::new(4, 0).rng();
    for mode in [TcfMode::TwoToOne, TcfMode::Injective] {
        let keys = gen(mode, 10, &mut r).unwrap();
        let oracle = PreimageOracle::new(keys.clone());
        for _ in 0..200 {
            let (y, st) = honest_prover_commit(&oracle, &mut r).unwrap();
            let pre = st.preimages();
            match mode {
                TcfMode::Injective => assert_eq!(pre.len(), 1),
                TcfMode::TwoToOne => {
                    assert_eq!(pre.len(), 2);
                    assert_eq!(pre[0].1 ^ pre[1].1, keys.claw_shift());
                }
            }
            for &(b, x) in pre {
                assert_eq!(keys.eval(b, x).unwrap(), y);
            }
        }
    }
}

#[test]
fn image_is_uniform_at_width_eight() {
    let mut r = RngState::new(5, 0).rng();
    for mode in [TcfMode::TwoToOne, TcfMode::Injective] {
        let keys = gen(mode, 8, &mut r).unwrap();
        let image: Vec<u64> = match mode {
            TcfMode::TwoToOne => (0..256).map(|x| keys.eval(0, x).unwrap()).collect(),
            TcfMode::Injective => (0..512).map(|z| keys.eval((z >> 8) as u8, z & 255).unwrap()).collect(),
        };
        let index: HashMap<u64, usize> = image.iter().enumerate().map(|(i, &y)| (y, i)).collect();
        let oracle = PreimageOracle::new(keys);
        let mut counts = vec![0u64; image.len()];
        for _ in 0..100 * image.len() {
            let (y, _) = honest_prover_commit(&oracle, &mut r).unwrap();
            counts[index[&y]] += 1;
        }
        let probs = vec![1.0 / image.len() as f64; image.len()];
        assert!(chi_square_p(&counts, &probs) > 0.001);
    }
}

#[test]
fn preimage_answers() {
    let mut r = RngState::new(6, 0).rng();
    let keys = gen(TcfMode::TwoToOne, 12, &mut r).unwrap();
    let oracle = PreimageOracle::new(keys);
    let mut ones = 0;
    for _ in 0..10_000 {
        let (_, st) = honest_prover_commit(&oracle, &mut r).unwrap();
        let ans = prover_preimage(&st, &mut r);
        assert_eq!(verifier_check_preimage(0, st.preimages(), ans), RspVerdict::Pass);
        ones += u64::from(ans.0);
    }
    assert!(within_3sigma(ones, 10_000, 0.5));
    let keys = gen(TcfMode::Injective, 12, &mut r).unwrap();
    let oracle = PreimageOracle::new(keys);
    let (_, st) = honest_prover_commit(&oracle, &mut r).unwrap();
    let a = prover_preimage(&st, &mut r);
    for _ in 0..20 {
        assert_eq!(prover_preimage(&st, &mut r), a);
    }
    assert_eq!(verifier_check_preimage(1, st.preimages(), a), RspVerdict::Pass);
    assert_eq!(verifier_check_preimage(1, st.preimages(), (a.0 ^ 1, a.1)), RspVerdict::Abort(AbortReason::PreimageMismatch));
    assert_eq!(verifier_check_preimage(1, st.preimages(), (2, a.1)), RspVerdict::Abort(AbortReason::Malformed));
}

#[test]
fn theta_classes_equifrequent_over_exhaustive_d() {
    let st = ProverCommitState { n: 6, preimages: vec![(0, 0b000001), (1, 0b110100)] };
    let mut counts = [0u64; 4];
    for packed in 0..64 {
        let d = Z4Vector::from_packed(packed, 3);
        counts[theta_code(&d, st.preimages[0].1, st.preimages[1].1, 6).unwrap() as usize] += 1;
    }
    assert_eq!(counts, [16; 4]);
    let mut r = RngState::new(7, 0).rng();
    for _ in 0..1000 {
        let (d, q) = prover_measurement(&st, &mut r);
        let (axis, v) = w_v(&d, &st);
        assert_eq!(q.label, QubitLabel::PlusTheta(join_code(axis, v)));
    }
    let basis = ProverCommitState { n: 6, preimages: vec![(1, 9)] };
    assert_eq!(prover_measurement(&basis, &mut r).1.label, QubitLabel::Basis(1));
}

fn w_v(d: &Z4Vector, st: &ProverCommitState) -> (Axis, u8) {
    crate::tcf::w_v_from_d(d, st.preimages[0].1, st.preimages[1].1, st.n).unwrap()
}

#[test]
fn measurement_statistics() {
    let mut r = RngState::new(8, 0).rng();
    let zero = ProverQubit::new(QubitLabel::Basis(0));
    let plus = ProverQubit::new(QubitLabel::PlusTheta(0));
    for _ in 0..1000 {
        assert_eq!(prover_basis_measure(&zero, Observable::Z, &mut r), 0);
        assert_eq!(prover_basis_measure(&plus, Observable::X, &mut r), 0);
    }
    let p = (std::f64::consts::PI / 8.0).cos().powi(2);
    assert!((plus.prob_zero(Observable::XPlusY) - p).abs() < 1e-12);
    let zeros = (0..100_000).filter(|_| prover_basis_measure(&plus, Observable::XPlusY, &mut r) == 0).count();
    assert!(within_3sigma(zeros as u64, 100_000, p));
}

#[test]
fn labels_match_six_state_kets() {
    for l in [QubitLabel::Basis(0), QubitLabel::Basis(1), QubitLabel::PlusTheta(0), QubitLabel::PlusTheta(1), QubitLabel::PlusTheta(2), QubitLabel::PlusTheta(3)] {
        let k = crate::qcore::six_state_ket(l.six_state_index());
        let ov = (k.adjoint() * l.ket().amps())[(0, 0)].norm();
        assert!((ov - 1.0).abs() < 1e-12, "{l:?}");
    }
}

#[test]
fn consistency_clauses() {
    use Consistency as C;
    assert_eq!(verifier_check_consistency(1, 0, None, Observable::Z, 1), C::Abort(AbortReason::BasisMismatch));
    assert_eq!(verifier_check_consistency(1, 0, None, Observable::Z, 0), C::Pass);
    assert_eq!(verifier_check_consistency(1, 0, None, Observable::XPlusY, 1), C::Pass);
    assert_eq!(verifier_check_consistency(0, 0, Some((Axis::Y, 1)), Observable::Y, 0), C::Abort(AbortReason::AxisMismatch));
    assert_eq!(verifier_check_consistency(0, 0, Some((Axis::Y, 1)), Observable::Y, 1), C::Pass);
    assert_eq!(verifier_check_consistency(0, 0, Some((Axis::Y, 1)), Observable::X, 0), C::Pass);
    assert_eq!(verifier_check_consistency(0, 0, Some((Axis::Y, 1)), Observable::Z, 0), C::Pass);
    assert!(matches!(verifier_check_consistency(0, 0, Some((Axis::X, 0)), Observable::XMinusY, 0), C::Qrac(_)));
    assert_eq!(verifier_check_consistency(0, 0, Some((Axis::X, 0)), Observable::X, 3), C::Abort(AbortReason::Malformed));
}

#[test]
fn qrac_expected_bits_match_optimal_measurement() {
    for t in 0..4u8 {
        let (axis, v_hat) = split_code(t);
        let q = ProverQubit::new(QubitLabel::PlusTheta(t));
        for c in [Observable::XMinusY, Observable::XPlusY] {
            let rec = QracRecord { axis, v_hat, c, v: 0 };
            let p_expected = if rec.expected() == 0 { q.prob_zero(c) } else { 1.0 - q.prob_zero(c) };
            assert!((p_expected - qrac_optimum()).abs() < 1e-12);
        }
    }
    let mut always_zero = 0;
    for t in 0..4u8 {
        for c in [Observable::XMinusY, Observable::XPlusY] {
            let (axis, v_hat) = split_code(t);
            always_zero += u32::from(QracRecord { axis, v_hat, c, v: 0 }.success());
        }
    }
    assert_eq!(always_zero, 4);
    assert!(matches!(qrac_statistic(&[]), Err(RspError::EmptyQrac)));
}

struct FlipOnAxis(HonestProver);

impl Prover for FlipOnAxis {
    fn commit<R: Rng + ?Sized>(&mut self, o: &PreimageOracle, r: &mut R) -> Result<u64, RspError> {
        self.0.commit(o, r)
    }
    fn preimage<R: Rng + ?Sized>(&mut self, r: &mut R) -> (u8, u64) {
        let (b, x) = self.0.preimage(r);
        (b, x ^ 1)
    }
    fn equation<R: Rng + ?Sized>(&mut self, r: &mut R) -> Result<Z4Vector, RspError> {
        self.0.equation(r)
    }
    fn measure<R: Rng + ?Sized>(&mut self, c: Observable, r: &mut R) -> u8 {
        1 - self.0.measure(c, r)
    }
    fn qubit(&self) -> Option<&ProverQubit> {
        self.0.qubit()
    }
}

struct Guesser;

impl Prover for Guesser {
    fn commit<R: Rng + ?Sized>(&mut self, o: &PreimageOracle, r: &mut R) -> Result<u64, RspError> {
        Ok(o.public().eval(0, r.gen_range(0..1 << o.public().n()))?)
    }
    fn preimage<R: Rng + ?Sized>(&mut self, _: &mut R) -> (u8, u64) {
        (0, 0)
    }
    fn equation<R: Rng + ?Sized>(&mut self, r: &mut R) -> Result<Z4Vector, RspError> {
        Ok(Z4Vector::random(6, r))
    }
    fn measure<R: Rng + ?Sized>(&mut self, _: Observable, r: &mut R) -> u8 {
        r.gen_range(0..2)
    }
    fn qubit(&self) -> Option<&ProverQubit> {
        None
    }
}

#[test]
fn dishonest_provers_are_caught() {
    let mut r = RngState::new(9, 0).rng();
    let mut p = FlipOnAxis(HonestProver::new());
    let mut reasons = HashMap::new();
    for i in 0..4000 {
        let t = run_instance(i, 12, &mut p, &mut r).unwrap();
        if let RspVerdict::Abort(reason) = t.verdict {
            *reasons.entry(reason).or_insert(0) += 1;
        }
        if t.path == [RoundTag::R1, RoundTag::R2a] {
            assert_eq!(t.verdict, RspVerdict::Abort(AbortReason::PreimageMismatch));
        }
        if let (Some((c, _)), Some(eq)) = (t.challenge, t.equation) {
            if t.g == 0 && eq.w_hat.is_some_and(|w| c.matches_axis(w)) {
                assert_eq!(t.verdict, RspVerdict::Abort(AbortReason::AxisMismatch));
            }
        }
    }
    assert!(reasons.contains_key(&AbortReason::BasisMismatch));
    let mut g = Guesser;
    let short = (0..200).map(|i| run_instance(i, 8, &mut g, &mut r).unwrap());
    assert!(short.filter(|t| t.path.contains(&RoundTag::R2b)).all(|t| t.verdict == RspVerdict::Abort(AbortReason::Malformed)));
    let mut g = Guesser;
    let mut qrac = Vec::new();
    let mut i = 0;
    while qrac.len() < 20_000 {
        let t = run_instance(i, 12, &mut g, &mut r).unwrap();
        qrac.extend(t.qrac);
        i += 1;
    }
    let hits = qrac.iter().filter(|q| q.success()).count() as u64;
    assert!(within_3sigma(hits, qrac.len() as u64, 0.5));
}

#[test]
fn honest_rounds_pass_and_labels_split_by_family() {
    let ts = run_honest_rounds(12, 40_000, RngState::new(10, 0), 1).unwrap();
    assert!(ts.iter().all(|t| !t.aborted()));
    for t in &ts {
        for w in t.path.windows(2) {
            assert!(w[1].can_follow(w[0]));
        }
        assert_eq!(t.label.is_some(), t.reached_r3b());
    }
    let s = summarize(12, 10, &ts);
    assert_eq!(s.aborts, 0);
    let basis = [s.labels[0], s.labels[1]];
    let phase = [s.labels[2], s.labels[3], s.labels[4], s.labels[5]];
    assert!(chi_square_p(&basis, &[0.5; 2]) > 0.001);
    assert!(chi_square_p(&phase, &[0.25; 4]) > 0.001);
    assert!(within_3sigma(s.r3b, 40_000, 0.25));
}

#[test]
fn honest_qrac_rate_reaches_optimum() {
    let ts = run_honest_rounds(12, 2_000_000, RngState::new(11, 0), 2).unwrap();
    let recs: Vec<QracRecord> = ts.iter().filter_map(|t| t.qrac).collect();
    assert!(recs.len() >= 95_000);
    let hits = recs.iter().filter(|q| q.success()).count() as u64;
    assert!(within_3sigma(hits, recs.len() as u64, qrac_optimum()));
}

#[test]
fn brute_force_prover_agrees_with_shortcut() {
    let mut r = RngState::new(12, 0).rng();
    let mut p = HonestProver::brute_force();
    let mut labels = [0u64; 6];
    for i in 0..4000 {
        let t = run_instance(i, 6, &mut p, &mut r).unwrap();
        assert!(!t.aborted());
        if let Some(l) = t.label {
            labels[l] += 1;
            let q = p.qubit().unwrap();
            assert_eq!(q.label.six_state_index(), l);
        }
    }
    assert!(chi_square_p(&labels[2..], &[0.25; 4]) > 0.001);
    assert!(matches!(
        prover_measurement_brute(&ProverCommitState { n: 10, preimages: vec![(0, 1)] }, &mut r),
        Err(RspError::BruteForceWidth(10))
    ));
}

#[test]
fn transcripts_replay_identically_and_ignore_worker_count() {
    let render = |w| {
        let ts = run_honest_rounds(8, 70_000, RngState::new(13, 0), w).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &ts).unwrap();
        buf
    };
    let a = render(1);
    assert_eq!(a, render(1));
    assert_eq!(a, render(3));
    let first = std::str::from_utf8(&a).unwrap().lines().next().unwrap();
    let t: RspTranscript = serde_json::from_str(first).unwrap();
    assert_eq!(t.round, 0);
    assert_eq!(t.path[0], RoundTag::R1);
}
