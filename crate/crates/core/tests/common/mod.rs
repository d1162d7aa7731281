#![allow(dead_code)]

use std::path::PathBuf;

use fifa_core::dataset::{load_train_test, LabeledDataset, TableSchema};
use fifa_core::rng;
use rand::Rng;

pub fn adult_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult")
}

pub fn adult_schema() -> TableSchema {
    let text = std::fs::read_to_string(adult_dir().join("schema.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

pub fn adult() -> (LabeledDataset<f64>, LabeledDataset<f64>) {
    let dir = adult_dir();
    load_train_test(dir.join("adult_train.csv"), dir.join("adult_test.csv"), &adult_schema()).unwrap()
}

/// Random `n x d` dataset with every (class, group) cell populated.
pub fn random_dataset(seed: u64, n: usize, d: usize, k: usize, m: usize) -> LabeledDataset<f64> {
    assert!(n >= k * m);
    let mut r = rng::stream(seed, "test-data", 0);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let mut labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let mut attrs: Vec<usize> = (0..n).map(|_| r.gen_range(0..m)).collect();
    for i in 0..k * m {
        labels[i] = i / m;
        attrs[i] = i % m;
    }
    LabeledDataset::from_rows(&rows, labels, attrs, k, m).unwrap()
}
