// Own test binary: it changes a process-wide environment variable.
use distortion_core::data;

#[test]
fn env_var_overrides_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::env::set_var(data::DATA_DIR_ENV, dir.path());
    assert_eq!(data::corpus_path(), dir.path().join("corpus.jsonl"));
    assert_eq!(data::fixtures_dir(), dir.path().join("fixtures"));

    let config = distortion_core::harness::ExperimentConfig::default();
    let err = config.validate().unwrap_err();
    assert_eq!(err.stage, "config");
    assert!(err.to_string().contains("does not exist"), "{err}");

    std::env::remove_var(data::DATA_DIR_ENV);
    assert!(data::corpus_path().exists());
}
