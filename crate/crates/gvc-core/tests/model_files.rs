//! Builder-vs-file structural equality for every shipped model definition.

use gvc_core::models::{builtin, load_model};

fn models_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .canonicalize()
        .unwrap()
}

#[track_caller]
fn check(file: &str, builtin_name: &str) {
    let from_file = load_model(models_dir().join(file)).unwrap();
    let from_builder = builtin(builtin_name).unwrap().unwrap();
    assert_eq!(from_file.name, from_builder.name);
    assert!(
        from_file.structurally_eq(&from_builder),
        "{file} differs from builtin {builtin_name}"
    );
}

#[test]
fn yang_mills_su2_file_matches_builder() {
    check("yang_mills_su2.gvc", "yang_mills_su2");
}

#[test]
fn maxwell_file_matches_builder() {
    check("maxwell.gvc", "maxwell");
}

#[test]
fn chern_simons_su2_file_matches_builder() {
    check("chern_simons_su2.gvc", "chern_simons_su2");
}

#[test]
fn bf_4_1_file_matches_builder() {
    check("bf_4_1.gvc", "bf:4:1");
}

#[test]
fn bf_6_1_file_matches_builder() {
    check("bf_6_1.gvc", "bf:6:1");
}
