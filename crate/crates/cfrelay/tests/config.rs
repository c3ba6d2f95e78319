use std::path::Path;

use cfrelay::config::{template, ConfigError, QuantizerSource, RateSpec, Scheme, SimConfig, KEYS};
use cfrelay_core::constellation::{Labeling, ModulationKind};
use proptest::prelude::*;

fn parse(text: &str) -> Result<SimConfig, ConfigError> {
    SimConfig::parse(text, Path::new("/base"))
}

#[test]
fn template_parses_to_defaults() {
    assert_eq!(parse(&template()).unwrap(), SimConfig::default());
    assert_eq!(parse("").unwrap(), SimConfig::default());
    for (key, _, _) in KEYS {
        assert!(template().lines().any(|l| l.starts_with(&format!("{key} = "))), "{key}");
    }
}

#[test]
fn echo_round_trips() {
    let text = "modulation = psk16\nlabeling = gray\nh12 = 3.5\nsnr_db = 9, 9.5\nrates = auto\n\
                available_rates = 2/3, 5/6\nschemes = bicm,direct_only\nquantizer = q.json\n\
                source_alist = a.alist\nseed = 77\nfinal_stage = parallel\n";
    let cfg = parse(text).unwrap();
    assert_eq!(cfg.modulation, ModulationKind::Psk16);
    assert_eq!(cfg.labeling, Labeling::Gray);
    assert_eq!(cfg.rates, RateSpec::Auto);
    assert_eq!(cfg.schemes, vec![Scheme::Bicm, Scheme::DirectOnly]);
    assert!((cfg.available_rates[0] - 2.0 / 3.0).abs() < 1e-15);
    // relative paths resolve against the config's directory
    assert_eq!(cfg.quantizer, QuantizerSource::File("/base/q.json".into()));
    assert_eq!(cfg.source_alist, vec![Path::new("/base/a.alist").to_path_buf()]);

    let again = parse(&cfg.echo().join("\n")).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let cfg = parse("# header\n\n  trials = 7   # inline\n\t\n").unwrap();
    assert_eq!(cfg.trials, 7);
}

#[test]
fn unknown_keys_are_errors() {
    match parse("trials = 3\nsnr = 5\n") {
        Err(ConfigError::UnknownKey { line: 2, key }) => assert_eq!(key, "snr"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_lines_are_errors() {
    assert!(matches!(parse("trials 3"), Err(ConfigError::Syntax { line: 1 })));
    assert!(matches!(parse("seed = 1\nseed = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
}

#[test]
fn bad_values_name_their_key() {
    for (text, key) in [
        ("trials = -1", "trials"),
        ("trials = 0", "trials"),
        ("h12 = abc", "h12"),
        ("rates = 0.9,0.8", "rates"),
        ("rates = 0.9,0.8,1.0,0.5", "rates"),
        ("modulation = qam64", "modulation"),
        ("schemes = tcq", "schemes"),
        ("snr_db = ", "snr_db"),
        ("rate_margin = -0.1", "rate_margin"),
        ("available_rates = 1/0", "available_rates"),
        ("n3_var = 0", "channel"),
    ] {
        match parse(text) {
            Err(ConfigError::Value { key: k, .. }) => assert_eq!(k, key, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn geometry_errors() {
    assert!(matches!(parse("symbols = 4"), Err(ConfigError::Geometry(_))));
    assert!(matches!(parse("source_alist = a,b"), Err(ConfigError::Geometry(_))));
    assert!(matches!(parse("relay_alist = a"), Err(ConfigError::Geometry(_))));
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(SimConfig::load(Path::new("/nonexistent/cfg.txt")), Err(ConfigError::Io { .. })));
}

#[test]
fn channel_at_follows_the_snr_definition() {
    let cfg = parse("n3_var = 2\npr_offset_db = 3").unwrap();
    let ch = cfg.channel_at(10.0);
    assert!((ch.ps - 20.0).abs() < 1e-12);
    assert!((ch.pr / ch.ps - 10f64.powf(0.3)).abs() < 1e-12);
}

proptest! {
    #[test]
    fn arbitrary_text_never_panics(text in "[a-z_=#,.0-9 \n/-]{0,80}") {
        let _ = parse(&text);
    }

    #[test]
    fn numeric_lists_round_trip(snrs in prop::collection::vec(-5.0f64..30.0, 1..6)) {
        let text = format!("snr_db = {}", snrs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
        prop_assert_eq!(parse(&text).unwrap().snr_db, snrs);
    }
}
