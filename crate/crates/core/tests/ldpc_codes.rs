use cfrelay_core::ldpc::{DecoderState, LdpcCode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn hamming() -> LdpcCode {
    LdpcCode::from_checks(7, vec![vec![0, 1, 3, 4], vec![0, 2, 3, 5], vec![1, 2, 3, 6]]).unwrap()
}

/// All codewords by brute force over the null space of H.
fn brute_codewords(code: &LdpcCode) -> Vec<Vec<u8>> {
    (0..1u32 << code.n())
        .map(|m| (0..code.n()).map(|i| ((m >> i) & 1) as u8).collect::<Vec<u8>>())
        .filter(|c| code.is_codeword(c))
        .collect()
}

fn bpsk_llr(bit: u8, magnitude: f64) -> f64 {
    if bit == 0 { magnitude } else { -magnitude }
}

#[test]
fn hamming_encoder_matches_generator_oracle() {
    let code = hamming();
    let words = brute_codewords(&code);
    assert_eq!(words.len(), 16);
    // a generator row per information position: the unique codeword with a
    // single one among the information bits
    let info_pos = code.info_positions().to_vec();
    let rows: Vec<&Vec<u8>> = (0..4)
        .map(|i| {
            words
                .iter()
                .find(|w| info_pos.iter().enumerate().all(|(j, &p)| w[p] == u8::from(i == j)))
                .unwrap()
        })
        .collect();
    for m in 0..16u8 {
        let info: Vec<u8> = (0..4).map(|i| (m >> i) & 1).collect();
        let mut expect = vec![0u8; 7];
        for (i, row) in rows.iter().enumerate() {
            if info[i] == 1 {
                expect.iter_mut().zip(row.iter()).for_each(|(e, r)| *e ^= r);
            }
        }
        assert_eq!(code.encode(&info).unwrap(), expect);
    }
    assert_eq!(code.encode(&[1, 0, 1, 1]).unwrap(), vec![1, 0, 1, 1, 0, 1, 0]);
}

/// Flooding sum-product corrects a single error at LLR magnitude 4 and
/// agrees with exhaustive ML, except on the bit covered by all three
/// checks: its three neighbours each get two wrong check messages in the
/// first iteration and the decoder lands on a weight-3 codeword. That case
/// is pinned down as well.
#[test]
fn hamming_single_error_matches_ml() {
    let code = hamming();
    let words = brute_codewords(&code);
    let full = (0..7).find(|&b| code.bit_checks()[b].len() == 3).unwrap();
    for cw in &words {
        for flip in 0..7 {
            let llr: Vec<f64> = cw
                .iter()
                .enumerate()
                .map(|(i, &b)| bpsk_llr(b ^ u8::from(i == flip), 4.0))
                .collect();
            let score = |w: &Vec<u8>| w.iter().zip(&llr).map(|(&b, &l)| if b == 0 { l } else { -l }).sum::<f64>();
            let ml = words.iter().max_by(|a, b| score(a).total_cmp(&score(b))).unwrap();
            assert_eq!(ml, cw);
            let out = code.decode(&llr, 50).unwrap();
            assert!(out.converged);
            if flip == full {
                let diff: Vec<usize> = (0..7).filter(|&i| out.bits[i] != cw[i]).collect();
                assert_eq!(diff.len(), 3);
                assert!(diff.iter().all(|i| code.bit_checks()[*i].len() == 2));
            } else {
                assert_eq!(&out.bits, ml);
            }
        }
    }
}

#[test]
fn strong_llrs_give_agreeing_extrinsics_after_one_step() {
    let code = hamming();
    let cw = code.encode(&[1, 0, 1, 1]).unwrap();
    let llr: Vec<f64> = cw.iter().map(|&b| bpsk_llr(b, 40.0)).collect();
    let mut st = DecoderState::new(&code);
    let ext = code.spa_step(&mut st, &llr, &[0.0; 7]).unwrap();
    for (e, &b) in ext.iter().zip(&cw) {
        assert_eq!(*e < 0.0, b == 1);
    }
    assert_eq!(st.iterations, 1);
}

#[test]
fn noiseless_decode_converges_at_once_and_zero_llrs_do_not() {
    let code = LdpcCode::gen_regular(96, 3, 6, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
    let cw = code.encode(&info).unwrap();
    let llr: Vec<f64> = cw.iter().map(|&b| bpsk_llr(b, 40.0)).collect();
    let out = code.decode(&llr, 50).unwrap();
    assert!(out.converged);
    assert_eq!(out.iters, 1);
    assert_eq!(out.bits, cw);
    assert_eq!(code.extract_info(&out.bits), info);
    let zero = code.decode(&vec![0.0; 96], 5).unwrap();
    assert!(!zero.converged);
}

#[test]
fn regular_code_shape() {
    let a = LdpcCode::gen_regular(96, 3, 6, 7).unwrap();
    let b = LdpcCode::gen_regular(96, 3, 6, 7).unwrap();
    assert_eq!(a.check_bits(), b.check_bits());
    assert!(a.bit_checks().iter().all(|c| c.len() == 3));
    assert!(a.check_bits().iter().all(|c| c.len() == 6));
    assert_eq!(a.num_checks(), 48);
    assert!(a.k() >= 48);
    assert!((a.rate() - 0.5).abs() < 0.05);
    // no two checks share two bits
    let checks = a.check_bits();
    for i in 0..checks.len() {
        for j in i + 1..checks.len() {
            let shared = checks[i].iter().filter(|b| checks[j].contains(b)).count();
            assert!(shared <= 1, "4-cycle between checks {i} and {j}");
        }
    }
    assert!(LdpcCode::gen_regular(10, 3, 4, 1).is_err());
}

#[test]
fn two_errors_at_high_magnitude_are_corrected() {
    let code = LdpcCode::gen_regular(96, 3, 6, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        let a = rng.random_range(0..96);
        let b = (a + 1 + rng.random_range(0..95)) % 96;
        let llr: Vec<f64> = cw
            .iter()
            .enumerate()
            .map(|(i, &bit)| bpsk_llr(bit ^ u8::from(i == a || i == b), 10.0))
            .collect();
        let mut st = DecoderState::new(&code);
        let mut post = llr.clone();
        for _ in 0..50 {
            let ext = code.spa_step(&mut st, &llr, &vec![0.0; 96]).unwrap();
            post = llr.iter().zip(&ext).map(|(l, e)| l + e).collect();
            let hard: Vec<u8> = post.iter().map(|&p| u8::from(p < 0.0)).collect();
            if code.is_codeword(&hard) {
                break;
            }
        }
        let hard: Vec<u8> = post.iter().map(|&p| u8::from(p < 0.0)).collect();
        assert_eq!(code.syndrome_weight(&hard), 0);
        assert_eq!(hard, cw);
    }
}

#[test]
fn extrinsic_ignores_own_prior() {
    let code = LdpcCode::gen_regular(96, 3, 6, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let llr: Vec<f64> = (0..96).map(|_| rng.random_range(-3.0..3.0)).collect();
    let prior: Vec<f64> = (0..96).map(|_| rng.random_range(-3.0..3.0)).collect();
    for j in [0, 17, 95] {
        let mut moved = prior.clone();
        moved[j] += 5.0;
        let mut s1 = DecoderState::new(&code);
        let mut s2 = DecoderState::new(&code);
        let e1 = code.spa_step(&mut s1, &llr, &prior).unwrap();
        let e2 = code.spa_step(&mut s2, &llr, &moved).unwrap();
        assert_eq!(e1[j], e2[j]);
        assert!(e1.iter().zip(&e2).any(|(a, b)| a != b));
    }
}

#[test]
fn hamming_alist_shape() {
    let text = hamming().to_alist();
    let code = LdpcCode::from_alist(&text).unwrap();
    assert_eq!((code.n(), code.k(), code.num_checks()), (7, 4, 3));
    assert_eq!(code.check_bits(), hamming().check_bits());
}

/// Rate-1/2 (3,6) code of length 4096 on BPSK/AWGN at 2.5 dB above the
/// rate-1/2 capacity limit.
#[test]
fn regular_code_awgn_sanity_band() {
    let code = LdpcCode::gen_regular(4096, 3, 6, 21).unwrap();
    let ebn0_db = 0.187 + 2.5;
    let rate = code.rate();
    let sigma2 = 1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut errors = 0usize;
    let mut bits = 0usize;
    for _ in 0..30 {
        let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let cw = code.encode(&info).unwrap();
        let llr: Vec<f64> = cw
            .iter()
            .map(|&b| {
                let x = if b == 0 { 1.0 } else { -1.0 };
                let n: f64 = StandardNormal.sample(&mut rng);
                2.0 * (x + sigma2.sqrt() * n) / sigma2
            })
            .collect();
        let out = code.decode(&llr, 100).unwrap();
        errors += code.extract_info(&out.bits).iter().zip(&info).filter(|(a, b)| a != b).count();
        bits += info.len();
    }
    let ber = errors as f64 / bits as f64;
    assert!(ber <= 1e-4, "BER {ber}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encode_is_systematic_linear_and_valid(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        let code = LdpcCode::gen_regular(60, 3, 6, seed % 1000).unwrap();
        let k = code.k();
        let ia: Vec<u8> = (0..k).map(|i| ((a >> (i % 64)) & 1) as u8 ^ (i / 64) as u8 % 2).collect();
        let ib: Vec<u8> = (0..k).map(|i| ((b >> (i % 64)) & 1) as u8).collect();
        let ca = code.encode(&ia).unwrap();
        let cb = code.encode(&ib).unwrap();
        let ix: Vec<u8> = ia.iter().zip(&ib).map(|(x, y)| x ^ y).collect();
        let cx: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
        prop_assert!(code.is_codeword(&ca));
        prop_assert_eq!(code.extract_info(&ca), ia);
        prop_assert_eq!(code.encode(&ix).unwrap(), cx);
        prop_assert_eq!(code.encode(&vec![0; k]).unwrap(), vec![0; 60]);
    }

    #[test]
    fn alist_round_trip(seed in 0u64..500, n in prop::sample::select(vec![24usize, 48, 72])) {
        let code = LdpcCode::gen_regular(n, 3, 6, seed).unwrap();
        let back = LdpcCode::from_alist(&code.to_alist()).unwrap();
        prop_assert_eq!(back.check_bits(), code.check_bits());
        prop_assert_eq!(back.bit_checks(), code.bit_checks());
        prop_assert_eq!(back.k(), code.k());
    }

    #[test]
    fn converged_outputs_have_zero_syndrome(seed in any::<u64>()) {
        let code = LdpcCode::gen_regular(96, 3, 6, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let llr: Vec<f64> = (0..96).map(|_| rng.random_range(-2.0..6.0)).collect();
        let out = code.decode(&llr, 30).unwrap();
        if out.converged {
            prop_assert_eq!(code.syndrome_weight(&out.bits), 0);
        }
        let mut st = DecoderState::new(&code);
        code.spa_step(&mut st, &llr, &vec![0.0; 96]).unwrap();
        st.reset();
        prop_assert_eq!(st.max_abs_message(), 0.0);
        prop_assert_eq!(st.iterations, 0);
    }
}
