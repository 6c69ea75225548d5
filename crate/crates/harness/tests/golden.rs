//! Golden-output regression check: a pinned single-replication run must
//! keep reproducing the committed CSV byte for byte. Re-bless after an
//! intentional behavior change with `RFE_BLESS=1 cargo test -p rfe-harness
//! --test golden`.

use rfe_harness::experiment::{run_experiment, ExperimentConfig, ExperimentKind};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/tests/fixtures/golden_coverage_k512.csv"
);

#[test]
fn pinned_run_matches_golden_csv() {
    let out_dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("golden_run");
    std::fs::create_dir_all(&out_dir).unwrap();
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Coverage);
    cfg.episodes = 512;
    cfg.replications = 1;
    cfg.base_seed = 424_242;
    cfg.out_dir = out_dir.clone();
    let outcome = run_experiment(&cfg).unwrap();
    let produced_path = outcome
        .csv_files
        .iter()
        .find(|p| p.file_name().unwrap() == "coverage_replications.csv")
        .expect("replication CSV present");
    let produced = std::fs::read_to_string(produced_path).unwrap();

    if std::env::var("RFE_BLESS").as_deref() == Ok("1") {
        std::fs::write(FIXTURE, &produced).unwrap();
        eprintln!("blessed new golden fixture at {FIXTURE}");
        return;
    }
    let golden = std::fs::read_to_string(FIXTURE)
        .expect("golden fixture missing; run once with RFE_BLESS=1");
    assert_eq!(
        produced, golden,
        "pinned run diverged from the golden CSV; re-bless only if the change is intentional"
    );
}
