use std::fs;

use cfrelay::config::SimConfig;
use cfrelay::files::{load_alist, load_quantizer, save_alist, save_quantizer, FileError};
use cfrelay::sim::RelayModel;
use cfrelay_core::constellation::{Constellation, ModulationKind};
use cfrelay_core::ldpc::LdpcCode;
use cfrelay_core::scalar::design_product_model;
use serde_json::Value;

fn small_cfg() -> SimConfig {
    SimConfig { choice_samples: 200, mi_samples: 2000, ..SimConfig::default() }
}

#[test]
fn alist_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.alist");
    let code = LdpcCode::gen_column_regular(96, 48, 3, 5).unwrap();
    save_alist(&path, &code).unwrap();
    let back = load_alist(&path).unwrap();
    assert_eq!(back.to_alist(), code.to_alist());
    assert_eq!((back.n(), back.k()), (96, 48));
}

#[test]
fn alist_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.alist");
    fs::write(&path, "3 2\n1 2\n").unwrap();
    let err = load_alist(&path).unwrap_err();
    assert!(matches!(err, FileError::Content { .. }));
    assert!(err.to_string().contains("bad.alist"));
    assert!(matches!(load_alist(&dir.path().join("missing")), Err(FileError::Io { .. })));
}

#[test]
fn trellis_quantizer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let cfg = small_cfg();
    let con = Constellation::build(ModulationKind::Qam16);
    let ch = cfg.channel_at(10.0);
    let m = RelayModel::tcq(&cfg, &con, &ch).unwrap();
    save_quantizer(&path, &m.model).unwrap();
    let back = load_quantizer(&path, 16).unwrap();
    assert_eq!(back, m.model);
    assert_eq!(back.conditional_point_prob(&con, &ch).unwrap(), m.table);

    let json: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(json["format"], "cfrelay-quantizer");
    assert_eq!(json["version"], 1);
    assert_eq!(json["cells"]["type"], "voronoi");
    assert_eq!(json["codebook"].as_array().unwrap().len(), 32);
}

#[test]
fn product_quantizer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let con = Constellation::build(ModulationKind::Psk16);
    let ch = small_cfg().channel_at(8.0);
    let model = design_product_model(&con, &ch, 4, 5000, 3).unwrap();
    save_quantizer(&path, &model).unwrap();
    assert_eq!(load_quantizer(&path, 16).unwrap(), model);
}

fn tampered(edit: impl Fn(&mut Value)) -> Result<(), FileError> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let con = Constellation::build(ModulationKind::Qam16);
    let model = design_product_model(&con, &small_cfg().channel_at(8.0), 4, 5000, 3).unwrap();
    let mut json = serde_json::to_value(&model).unwrap();
    edit(&mut json);
    fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    load_quantizer(&path, 16).map(|_| ())
}

#[test]
fn foreign_or_future_files_are_rejected() {
    assert!(tampered(|_| ()).is_ok());
    assert!(matches!(tampered(|j| j["version"] = 2.into()), Err(FileError::Content { .. })));
    assert!(matches!(tampered(|j| j["format"] = "other".into()), Err(FileError::Content { .. })));
    assert!(matches!(tampered(|j| j["choice_probs"] = Value::Array(vec![])), Err(FileError::Content { .. })));
    assert!(matches!(tampered(|j| j["cells"] = "none".into()), Err(FileError::Json { .. })));
}

#[test]
fn quantizer_for_another_alphabet_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let con = Constellation::build(ModulationKind::Qam16);
    let model = design_product_model(&con, &small_cfg().channel_at(8.0), 4, 5000, 3).unwrap();
    save_quantizer(&path, &model).unwrap();
    assert!(matches!(load_quantizer(&path, 8), Err(FileError::Content { .. })));
}
