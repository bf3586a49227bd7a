use std::fs::File;

use pivotal_core::harness::{run_experiment, ExperimentConfig, SamplerKind};
use pivotal_core::matrix::{read_vector_csv, write_vector_csv};
use pivotal_core::{build_partition, DenseMatrix, LeverageDensity, ProblemKind, SampleSet};
use tempfile::TempDir;

#[test]
fn matrix_and_vector_files_round_trip() {
    let dir = TempDir::new().unwrap();
    let m = DenseMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) / (j as f64 + 3.0)).unwrap();
    let path = dir.path().join("m.csv");
    m.write_csv(File::create(&path).unwrap()).unwrap();
    assert_eq!(DenseMatrix::read_csv(&path).unwrap(), m);

    let v = vec![0.1, -2.5e-17, 3.0];
    let vpath = dir.path().join("v.csv");
    write_vector_csv(&v, File::create(&vpath).unwrap()).unwrap();
    assert_eq!(read_vector_csv(&vpath).unwrap(), v);
}

#[test]
fn sample_set_file_round_trip() {
    let dir = TempDir::new().unwrap();
    let s = SampleSet::from_indices(vec![4, 1, 7], &[0.3, 0.25, 0.5, 0.5, 0.8, 0.1, 0.2, 0.35], 3);
    let path = dir.path().join("s.csv");
    s.write_csv(File::create(&path).unwrap()).unwrap();
    let back = SampleSet::from_csv_reader(File::open(&path).unwrap()).unwrap();
    assert_eq!(back.indices, s.indices);
    assert_eq!(back.weights, s.weights);
}

#[test]
fn partition_and_experiment_outputs() {
    let dir = TempDir::new().unwrap();
    let part = build_partition(&LeverageDensity::unit(3), 8).unwrap();
    let ppath = dir.path().join("cells.csv");
    part.write_csv(File::create(&ppath).unwrap()).unwrap();
    let rows: Vec<csv::StringRecord> = csv::Reader::from_path(&ppath).unwrap().records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), -1.0);
    assert_eq!(rows[7][2].parse::<f64>().unwrap(), 1.0);

    let mut cfg = ExperimentConfig::new(ProblemKind::Oscillator2d, 300, 3, vec![SamplerKind::Bernoulli], 4, 1);
    cfg.k_values = vec![12, 24];
    let result = run_experiment(&cfg).unwrap();
    let tpath = dir.path().join("trials.csv");
    result.write_trials_csv(File::create(&tpath).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(&tpath).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["sampler", "k", "trial", "relative_error", "labels_used"]);
    assert_eq!(rdr.records().count(), 8);
}
