use std::fs;

use scorelabel::csvio::{load_csv, load_pairs, save_pairs, save_trajectories, sidecar_path};
use scorelabel::model_file::{load_model, save_model};
use scorelabel::Error;
use scorelabel_core::data::DataMatrix;
use scorelabel_core::integrate::{self, IntegrationConfig};
use scorelabel_core::labeler::{generate_labels, LabeledPairSet};
use scorelabel_core::mlp::layer_dims;
use scorelabel_core::{rng, Activation, BatchSampler, MlpModel, Schedule, ScoreConfig};
use tempfile::tempdir;

fn pairs() -> LabeledPairSet {
    let data = DataMatrix::unnamed(rng::standard_normal_matrix(30, 3, 1)).unwrap();
    let cfg = IntegrationConfig::new(20, Schedule::default());
    let labeled = generate_labels(&data, "unit", 50, &cfg, &ScoreConfig::default(), 7).unwrap();
    assert!(labeled.provenance.is_some());
    let mut outputs = labeled.outputs;
    outputs.set(0, 0, 1.0e-300);
    outputs.set(1, 1, -123456.789e200);
    LabeledPairSet::new(labeled.inputs, outputs, labeled.provenance).unwrap()
}

#[test]
fn pairs_round_trip_exactly() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    let original = pairs();
    save_pairs(&original, &path).unwrap();
    assert_eq!(load_pairs(&path).unwrap(), original);
}

#[test]
fn missing_sidecar_drops_provenance_only() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    let original = pairs();
    save_pairs(&original, &path).unwrap();
    fs::remove_file(sidecar_path(&path)).unwrap();
    let loaded = load_pairs(&path).unwrap();
    assert!(loaded.provenance.is_none());
    assert_eq!(loaded.inputs, original.inputs);
    assert_eq!(loaded.outputs, original.outputs);
}

#[test]
fn truncated_row_names_its_line() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    save_pairs(&pairs(), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cut = lines[4].rfind(',').unwrap();
    lines[4].truncate(cut);
    fs::write(&path, lines.join("\n")).unwrap();
    let err = load_pairs(&path).unwrap_err();
    assert!(matches!(err, Error::Format { .. }));
    assert!(err.to_string().contains("line 5"), "{err}");
}

#[test]
fn sidecar_disagreeing_with_file_is_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("pairs.csv");
    save_pairs(&pairs(), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let kept: Vec<&str> = text.lines().take(10).collect();
    fs::write(&path, kept.join("\n")).unwrap();
    let err = load_pairs(&path).unwrap_err();
    assert!(err.to_string().contains("sidecar"), "{err}");
}

#[test]
fn non_numeric_cell_is_reported() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.csv");
    fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
    let err = load_csv(&path, None).unwrap_err().to_string();
    assert!(err.contains("line 3") && err.contains("oops"), "{err}");
    fs::write(&path, "a,b\n1,2\n3,NaN\n").unwrap();
    assert!(load_csv(&path, None).is_err());
}

#[test]
fn model_file_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let model = MlpModel::init(&layer_dims(3, &[7, 5]), Activation::Tanh, 9).unwrap();
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back.params(), model.params());
    let x = rng::standard_normal_matrix(4, 3, 1);
    assert_eq!(back.forward(&x).unwrap(), model.forward(&x).unwrap());
}

#[test]
fn trajectory_csv_layout() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let data = rng::standard_normal_matrix(40, 2, 1);
    let inputs = rng::standard_normal_matrix(3, 2, 2);
    let cfg = IntegrationConfig::new(10, Schedule::default()).recording(true);
    let mut sampler = BatchSampler::new(&data, 40, 0).unwrap();
    let sol = integrate::solve_ode(&inputs, &cfg, &mut sampler).unwrap();
    save_trajectories(sol.trajectories.as_deref().unwrap(), &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,dim0,dim1,traj_id"));
    assert_eq!(lines.count(), 3 * 11);
}
