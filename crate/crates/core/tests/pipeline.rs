use std::io::BufReader;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mulfree::harness::{
    evaluate, read_chain, run_on_dataset, save_chain, load_chain, train, write_chain, write_csv, Algorithm,
    ExperimentConfig, CSV_HEADER,
};
use mulfree::learners::{code_against, LearnConfig};
use mulfree::{Dataset, Matrix, OpCount, Precision};

fn data<T: mulfree::Real>(seed: u64, n: usize, cols: usize) -> Dataset<T> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Dataset::new(Matrix::from_fn(n, cols, |_, _| T::lit(r.gen_range(-1.0..1.0)))).unwrap()
}

#[test]
fn every_learner_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = data::<f64>(1, 8, 48);
    for algo in [Algorithm::B, Algorithm::M, Algorithm::MGreedy, Algorithm::BKron, Algorithm::O, Algorithm::S] {
        let cfg = LearnConfig::new(3, 4).with_p(Precision::Terms(2)).with_k(2);
        let out = train(algo, &d, &cfg).unwrap();
        let path = dir.path().join(format!("{algo}.chain"));
        save_chain(&out.chain, &path).unwrap();
        let back = load_chain::<f64>(&path).unwrap();
        assert_eq!(back, out.chain, "{algo}");

        let eps = evaluate(&d, &back, &out.code).unwrap();
        assert!((eps - out.report.final_epsilon).abs() <= 1e-10 * eps.max(1.0), "{algo}");
        let recoded = code_against(d.y(), &back, 3).unwrap();
        assert!(recoded.max_column_support() <= 3);
    }
}

#[test]
fn single_precision_learners_run() {
    let d = data::<f32>(2, 8, 40);
    let out = train(Algorithm::B, &d, &LearnConfig::new(2, 6).with_k(2)).unwrap();
    assert!(out.report.final_epsilon.is_finite());
    let mut text = Vec::new();
    write_chain(&out.chain, &mut text).unwrap();
    let back: mulfree::Chain32 = read_chain(BufReader::new(text.as_slice())).unwrap();
    assert_eq!(back, out.chain);
}

#[test]
fn experiment_grid_writes_one_row_per_point() {
    let d = data::<f64>(3, 16, 64);
    let text = r#"
images = ["unused.pgm"]
algorithms = ["B", "S", "BKron"]
m = [4, 8]
s = [2]
p = ["inf", 2]
"#;
    let cfg = ExperimentConfig::from_toml_str(text, std::path::Path::new(".")).unwrap();
    let rows = run_on_dataset(&d, &cfg).unwrap();
    // B and BKron ignore p; S spans both; plus one DCT row
    assert_eq!(rows.len(), 2 + 4 + 2 + 1);
    let b: Vec<f64> = rows.iter().filter(|r| r.algorithm == "B").map(|r| r.epsilon).collect();
    assert!(b[1] <= b[0]);
    let mut csv = Vec::new();
    write_csv(&rows, &mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn learned_chains_invert(seed in 0u64..1000, m in 1usize..6) {
        let d = data::<f64>(seed, 6, 24);
        for algo in [Algorithm::B, Algorithm::M, Algorithm::BKron, Algorithm::O, Algorithm::S] {
            let out = train(algo, &d, &LearnConfig::new(2, m)).unwrap();
            let mut ops = OpCount::ZERO;
            let fwd = out.chain.apply(d.y(), &mut ops).unwrap();
            let back = out.chain.apply_inverse(&fwd, &mut ops).unwrap();
            let err = back.sub(d.y()).unwrap().frobenius_sq().sqrt();
            prop_assert!(err <= 1e-9 * d.y().frobenius_sq().sqrt().max(1.0), "{} err {}", algo, err);
        }
    }
}
