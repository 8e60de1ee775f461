use pwpaw::instance::HamiltonianInstance;
use pwpaw::pipeline::*;
use pwpaw::toyscf::preset;
use pwpaw::Error;
use rust_decimal::Decimal;
use std::path::{Path, PathBuf};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn config(source: InstanceSource) -> PipelineConfig {
    PipelineConfig {
        source,
        delta: 1e-4,
        cost: Default::default(),
        qec: Default::default(),
        verify: true,
        seed: 0,
    }
}

#[test]
fn fixture_pipeline_passes_and_is_deterministic() {
    let cfg = config(InstanceSource::Path(fixture("paw.json")));
    let a = run_pipeline(&cfg).unwrap();
    assert!(a.pass, "{:#?}", a.invariants);
    assert!(a.factorization.negative_paw_terms > 0);
    let v = a.verification.as_ref().unwrap();
    assert!(v.factored_vs_direct <= IDENTITY_TOLERANCE);
    assert!(v.lambda >= v.spectral_half_width);
    let b = run_pipeline(&cfg).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn toy_source_matches_its_serialized_instance() {
    let sys = preset("small").unwrap();
    let a = run_pipeline(&config(InstanceSource::System(sys.clone()))).unwrap();
    let dir = std::env::temp_dir().join(format!("pwpaw-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("small.json");
    std::fs::write(&path, sys.build().unwrap().to_json()).unwrap();
    let b = run_pipeline(&config(InstanceSource::Path(path))).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(a.cost.toffoli_total, b.cost.toffoli_total);
    assert_eq!(a.cost.lambda.lambda_total, b.cost.lambda.lambda_total);
    assert_eq!(a.qec, b.qec);
}

#[test]
fn ingest_round_trip_preserves_checksum() {
    for name in ["small.json", "paw.json", "six.json", "paw_explicit.json"] {
        let inst = HamiltonianInstance::ingest(&fixture(name)).unwrap();
        let again = HamiltonianInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst.checksum(), again.checksum(), "{name}");
    }
}

#[test]
fn non_hermitian_h_names_invariant() {
    let text = std::fs::read_to_string(fixture("small.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["h"]["re"][1] = serde_json::json!(0.25);
    let e = HamiltonianInstance::from_json(&v.to_string()).unwrap_err();
    assert!(matches!(e, Error::Invariant(_)));
    assert!(e.to_string().contains("Hermitian"));
}

#[test]
fn schema_error_points_at_field() {
    let text = std::fs::read_to_string(fixture("small.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["h"]["re"][2] = serde_json::json!("zero");
    match HamiltonianInstance::from_json(&v.to_string()).unwrap_err() {
        Error::Schema { pointer, .. } => assert_eq!(pointer, "/h/re/2"),
        other => panic!("expected schema error, got {other}"),
    }
    v["extra"] = serde_json::json!(1);
    v["h"]["re"][2] = serde_json::json!(0.0);
    assert!(matches!(HamiltonianInstance::from_json(&v.to_string()), Err(Error::Schema { .. })));
}

#[test]
fn oversized_verification_is_refused() {
    let inst = preset("medium").unwrap().build().unwrap();
    let fh = pwpaw::factorize::factorize(&inst).unwrap();
    assert!(matches!(verify_fock(&inst, &fh), Err(Error::GuardRail(_))));
}

#[test]
fn workflow_replay_budgets_and_signs() {
    let cfg = WorkflowConfig {
        system: preset("small").unwrap(),
        levels: [[1, 1, 1], [2, 1, 1], [3, 1, 1]],
        n_b: [3, 4, 5],
        budget_mha: Decimal::new(160, 2),
        consumed_mha: Decimal::new(140, 2),
        delta: 1e-4,
        cost: Default::default(),
        qec: Default::default(),
    };
    let r = replay_downsampling(&cfg).unwrap();
    assert_eq!(r.rows.len(), 5);
    assert!(r.rows.iter().all(|row| row.eps_qpe_mha == Decimal::new(4, 2)));
    let n: Vec<_> = r.rows.iter().map(|row| row.n_orbitals).collect();
    assert_eq!(n, vec![5, 8, 4, 9, 6]);
    assert_eq!(r.budget.imbalance(), Decimal::ZERO);
    let biggest = r.rows.iter().map(|row| row.toffolis).max().unwrap();
    assert_eq!(r.rows[r.largest_row].toffolis, biggest);
}
