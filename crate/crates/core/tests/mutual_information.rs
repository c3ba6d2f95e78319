use cfrelay_core::channel::ChannelParams;
use cfrelay_core::constellation::{Constellation, ModulationKind};
use cfrelay_core::mlc::{assign_rates, mi_chainrule_check, mi_relay_constraint, mi_source_level, mi_source_levels, SystemModel};
use cfrelay_core::tcq::model::PointTable;
use cfrelay_core::tcq::optimize::build_model;
use cfrelay_core::tcq::{CodebookParams, GeneratorMatrix, OptimizeSettings, QuantizerModel};
use cfrelay_core::Error;
use proptest::prelude::*;

fn relay_model(kind: ModulationKind, ch: &ChannelParams) -> (Constellation, QuantizerModel, PointTable) {
    let c = Constellation::build(kind);
    let params = CodebookParams { kind, scale: ch.h12 * ch.ps.sqrt(), ring_ratio: 1.5 };
    let settings = OptimizeSettings { choice_samples_per_symbol: 2_000, ..Default::default() };
    let (m, t) = build_model(&GeneratorMatrix::relay_default(), params, &c, ch, &settings).unwrap();
    (c, m, t)
}

#[test]
fn chain_rule_holds_within_three_sigma() {
    for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
        let c = Constellation::build(kind);
        for snr_db in [6.0, 10.0, 14.0] {
            let noise = 10f64.powf(-snr_db / 10.0);
            let r = mi_chainrule_check(&c, 1.0, 1.0, noise, 100_000, 7).unwrap();
            assert!(
                r.deviation <= 3.0 * r.combined_stderr.max(r.deviation_stderr),
                "{kind:?} {snr_db} dB: deviation {} combined se {}",
                r.deviation,
                r.combined_stderr
            );
            assert!(r.joint.mi > 0.0 && r.joint.mi < 4.0);
        }
    }
}

#[test]
fn noiseless_direct_link_carries_four_bits() {
    let mut ch = ChannelParams::default();
    ch.n3_var = 1e-9;
    for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
        let c = Constellation::build(kind);
        let sys = SystemModel { constellation: &c, channel: ch, relay: None };
        let mis = mi_source_levels(&sys, 5_000, 1).unwrap();
        assert!((mis.total.mi - 4.0).abs() < 0.02, "{}", mis.total.mi);
    }
}

/// A relay whose output ignores the source adds nothing.
#[test]
fn uninformative_relay_equals_direct_link() {
    let ch = ChannelParams::default().with_snr_db(8.0);
    let (c, model, _) = relay_model(ModulationKind::Qam16, &ch);
    let flat = PointTable::uninformative(16, 32);
    let with = SystemModel { constellation: &c, channel: ch, relay: Some((&model, &flat)) };
    let without = SystemModel { constellation: &c, channel: ch, relay: None };
    let a = mi_source_levels(&with, 50_000, 3).unwrap();
    let b = mi_source_levels(&without, 50_000, 3).unwrap();
    for (x, y) in a.levels.iter().zip(&b.levels) {
        let se = (x.stderr.powi(2) + y.stderr.powi(2)).sqrt();
        assert!((x.mi - y.mi).abs() <= 3.0 * se + 1e-12, "{} vs {}", x.mi, y.mi);
    }
}

#[test]
fn relay_observation_does_not_hurt_and_estimates_are_nonnegative() {
    for kind in [ModulationKind::Qam16, ModulationKind::Psk16] {
        let ch = ChannelParams::default().with_snr_db(8.0);
        let (c, model, table) = relay_model(kind, &ch);
        let with = SystemModel { constellation: &c, channel: ch, relay: Some((&model, &table)) };
        let without = SystemModel { constellation: &c, channel: ch, relay: None };
        let a = mi_source_levels(&with, 50_000, 4).unwrap();
        let b = mi_source_levels(&without, 50_000, 4).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert!(x.mi >= y.mi - 3.0 * (x.stderr.powi(2) + y.stderr.powi(2)).sqrt());
            assert!(x.mi >= -3.0 * x.stderr);
        }
        assert!(a.total.mi > b.total.mi);
        let one = mi_source_level(2, &with, 50_000, 4).unwrap();
        assert_eq!(one, a.levels[1]);
        assert!(mi_source_level(0, &with, 10, 4).is_err());
        assert!(mi_source_level(5, &with, 10, 4).is_err());
    }
}

#[test]
fn relay_constraint_cases() {
    // default gains: the strong relay link supports the description
    let ch = ChannelParams::default().with_snr_db(10.0);
    let (c, model, table) = relay_model(ModulationKind::Qam16, &ch);
    let sys = SystemModel { constellation: &c, channel: ch, relay: Some((&model, &table)) };
    let r = mi_relay_constraint(&sys, 50_000, 5).unwrap();
    assert!(r.feasible, "lhs {} rhs {}", r.lhs.mi, r.rhs.mi);
    assert!(r.rhs.mi <= 4.0 + 3.0 * r.rhs.stderr);
    assert!(r.lhs.mi > 0.0);

    // silent relay: nothing gets through, the description does not fit
    let mut quiet = ch;
    quiet.pr = 0.0;
    let sys = SystemModel { constellation: &c, channel: quiet, relay: Some((&model, &table)) };
    let r = mi_relay_constraint(&sys, 20_000, 5).unwrap();
    assert!(r.rhs.mi.abs() < 1e-9);
    assert!(!r.feasible);

    let none = SystemModel { constellation: &c, channel: ch, relay: None };
    assert!(mi_relay_constraint(&none, 10, 1).is_err());
}

#[test]
fn assign_rates_edge_cases() {
    let avail = [2.0 / 3.0, 0.8, 5.0 / 6.0, 0.9];
    let p = assign_rates(&[0.95, 0.85, 0.92, 0.83], &avail, 0.02).unwrap();
    assert_eq!(p.levels, vec![0.9, 0.8, 0.9, 0.8]);
    assert!((p.total - 3.4).abs() < 1e-12);
    assert!((p.slack[0] - 0.05).abs() < 1e-12);
    let p = assign_rates(&[1.0; 4], &avail, 0.02).unwrap();
    assert_eq!(p.levels, vec![0.9; 4]);
    assert!(matches!(assign_rates(&[0.5; 4], &avail, 0.6), Err(Error::NoRateFits { .. })));
    assert!(assign_rates(&[0.9], &[], 0.0).is_err());
}

proptest! {
    #[test]
    fn assign_rates_is_monotone(
        mis in prop::collection::vec(0.7f64..1.0, 4),
        level in 0usize..4,
        bump in 0.0f64..0.2,
    ) {
        let avail = [2.0 / 3.0, 0.8, 5.0 / 6.0, 0.9];
        let base = assign_rates(&mis, &avail, 0.02).unwrap();
        let mut higher = mis.clone();
        higher[level] += bump;
        let up = assign_rates(&higher, &avail, 0.02).unwrap();
        for (a, b) in base.levels.iter().zip(&up.levels) {
            prop_assert!(b >= a);
        }
        prop_assert!((base.total - base.levels.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(base.levels.iter().all(|&r| (0.0..=1.0).contains(&r)));
    }
}
