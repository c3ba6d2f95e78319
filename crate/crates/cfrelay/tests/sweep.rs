use cfrelay::config::{Scheme, SimConfig};
use cfrelay::report::sweep_csv;
use cfrelay::sim::{compare_baselines, run_sweep, trial_seed, Counts, PointSetup, RelayCodes, SchemeCodes, SweepRow};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(schemes: &[Scheme], snr_db: &[f64]) -> SimConfig {
    SimConfig {
        symbols: 256,
        choice_samples: 200,
        mi_samples: 2000,
        trials: 2,
        max_outer_iters: 20,
        schemes: schemes.to_vec(),
        snr_db: snr_db.to_vec(),
        ..SimConfig::default()
    }
}

const ALL: [Scheme; 4] = [Scheme::TcqCf, Scheme::ScalarCf, Scheme::DirectOnly, Scheme::Bicm];

#[test]
fn extreme_snr_decodes_without_errors() {
    // ps = 1e4
    let r = run_sweep(&small(&ALL, &[40.0]), |_| ()).unwrap();
    assert_eq!(r.rows.len(), 4);
    for row in &r.rows {
        assert_eq!(row.counts.bit_errors, 0, "{}", row.scheme);
        assert_eq!(row.counts.blocks, 4);
        assert!(row.mean_iters <= 3.0, "{} {}", row.scheme, row.mean_iters);
    }
}

#[test]
fn relay_decisions_are_exact_at_high_snr() {
    let cfg = small(&[Scheme::TcqCf], &[20.0]);
    let relay = RelayCodes::build(&cfg).unwrap();
    let codes = SchemeCodes::build(&cfg, Scheme::TcqCf, &[0.9, 0.8, 0.9, 0.8]).unwrap();
    let setup = PointSetup::new(&cfg, &codes, &relay, 20.0).unwrap();
    let blocks = setup.trial_blocks(&mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(blocks.len(), cfg.blocks_per_trial);
    for b in blocks {
        assert_eq!((b.bit_errors, b.relay_symbol_errors), (0, 0));
        assert!(b.converged && b.relay_converged);
    }
}

#[test]
fn direct_link_ber_falls_with_snr() {
    let mut cfg = small(&[Scheme::DirectOnly], &[10.0, 12.0, 14.0, 16.0]);
    cfg.trials = 4;
    let r = run_sweep(&cfg, |_| ()).unwrap();
    let ber: Vec<f64> = r.rows.iter().map(|r| r.ber).collect();
    assert!(ber[0] > 0.0, "{ber:?}");
    assert!(ber.windows(2).all(|w| w[1] <= w[0]), "{ber:?}");
    assert_eq!(ber[3], 0.0, "{ber:?}");
    assert!(r.warnings.iter().any(|w| w.contains("direct_only at 10 dB")));
}

#[test]
fn rerun_is_byte_identical_and_thread_independent() {
    let cfg = small(&[Scheme::TcqCf, Scheme::DirectOnly], &[11.0, 13.0]);
    let a = sweep_csv(&run_sweep(&cfg, |_| ()).unwrap().rows);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(|| sweep_csv(&run_sweep(&cfg, |_| ()).unwrap().rows));
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let c = four.install(|| sweep_csv(&run_sweep(&cfg, |_| ()).unwrap().rows));
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn seed_changes_the_noise() {
    let mut cfg = small(&[Scheme::DirectOnly], &[10.0]);
    let a = run_sweep(&cfg, |_| ()).unwrap().rows[0].counts;
    cfg.seed = 2;
    let b = run_sweep(&cfg, |_| ()).unwrap().rows[0].counts;
    assert_ne!(a, b);
}

#[test]
fn progress_sees_every_row_in_order() {
    let cfg = small(&[Scheme::DirectOnly, Scheme::Bicm], &[30.0, 31.0]);
    let mut seen = Vec::new();
    let r = run_sweep(&cfg, |row| seen.push((row.scheme, row.snr_db))).unwrap();
    assert_eq!(seen, r.rows.iter().map(|r| (r.scheme, r.snr_db)).collect::<Vec<_>>());
    assert_eq!(seen[0], (Scheme::DirectOnly, 30.0));
    assert_eq!(seen[3], (Scheme::Bicm, 31.0));
}

#[test]
fn compare_baselines_checks_its_inputs() {
    assert!(compare_baselines(&[], |_| ()).is_err());
    let a = small(&[Scheme::DirectOnly], &[30.0]);
    let mut b = small(&[Scheme::Bicm], &[31.0]);
    assert!(compare_baselines(&[a.clone(), b.clone()], |_| ()).is_err());
    b.snr_db = a.snr_db.clone();
    b.channel.h12 = 3.0;
    assert!(compare_baselines(&[a.clone(), b.clone()], |_| ()).is_err());
    b.channel.h12 = a.channel.h12;
    let r = compare_baselines(&[a, b], |_| ()).unwrap();
    assert_eq!(r.rows.iter().map(|r| r.scheme).collect::<Vec<_>>(), vec![Scheme::DirectOnly, Scheme::Bicm]);
}

#[test]
fn wrong_alist_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.alist");
    let code = cfrelay_core::ldpc::LdpcCode::gen_column_regular(256, 200, 3, 1).unwrap();
    cfrelay::files::save_alist(&path, &code).unwrap();
    let mut cfg = small(&[Scheme::TcqCf], &[10.0]);
    // one file serves bicm only
    cfg.source_alist = vec![path];
    assert!(SchemeCodes::build(&cfg, Scheme::TcqCf, &[0.9, 0.8, 0.9, 0.8]).is_err());
}

fn counts() -> impl Strategy<Value = Counts> {
    (0u64..1000, 1u64..20, 0u64..100).prop_map(|(errors, blocks, iters)| Counts {
        bit_errors: errors.min(blocks * 100),
        bits: blocks * 100,
        block_errors: blocks.min(errors),
        blocks,
        iterations: iters,
        squared_errors: u128::from(errors) * u128::from(errors),
    })
}

proptest! {
    #[test]
    fn merge_is_order_free(a in counts(), b in counts(), c in counts()) {
        prop_assert_eq!(a.merge(b), b.merge(a));
        prop_assert_eq!(a.merge(b).merge(c), a.merge(b.merge(c)));
    }

    #[test]
    fn rows_stay_in_range(c in counts()) {
        let r = SweepRow::new(Scheme::TcqCf, 1.0, 1, c);
        prop_assert!((0.0..=1.0).contains(&r.ber));
        prop_assert!((0.0..=1.0).contains(&r.fer));
        prop_assert!(r.ber_ci95.is_nan() == (c.blocks < 2));
    }

    #[test]
    fn trial_seeds_are_distinct(seed in any::<u64>(), i in 0usize..1000, t in 0usize..1000) {
        prop_assert_ne!(trial_seed(seed, i, t), trial_seed(seed, i, t + 1));
        prop_assert_ne!(trial_seed(seed, i, t), trial_seed(seed, i + 1, t));
    }
}
