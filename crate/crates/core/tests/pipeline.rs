use std::path::PathBuf;

use dsenlg::dataset::{load_keel, stratified_splits};
use dsenlg::ensemble::{fit, AblationMode, PipelineConfig, VoteScope};
use dsenlg::{Class, Dataset, Dataset64, PipelineModel64};
use nalgebra::DMatrix;

fn keel(name: &str) -> Dataset64 {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/keel").join(format!("{name}.dat"));
    load_keel(path).unwrap()
}

fn iris_fold() -> (Dataset64, Dataset64) {
    let ds = keel("iris0");
    let split = &stratified_splits(&ds, 5, 1, 0).unwrap()[0];
    (ds.subset(&split.train_indices).unwrap(), ds.subset(&split.test_indices).unwrap())
}

#[test]
fn iris_fold_grows_one_tree_per_subset_and_layer() {
    let (train, test) = iris_fold();
    assert_eq!((train.n_minority(), train.n_majority()), (40, 80));
    let model = fit(&train, &PipelineConfig::default(), 3).unwrap();
    assert_eq!(model.subsets.len(), 2);
    assert_eq!(model.n_classifiers(), 6);
    for sub in &model.subsets {
        assert_eq!(sub.projectors.len(), 3);
        assert_eq!(sub.projectors[0].input_dim(), 4 * 4);
        for w in sub.projectors.windows(2) {
            assert_eq!(w[1].input_dim(), w[0].dim());
        }
        for c in &sub.classifiers {
            assert_eq!(c.tree.n_features(), sub.projectors[c.layer].dim());
        }
    }
    let pred = model.predict(test.features()).unwrap();
    assert_eq!(pred.per_classifier.len(), 6);
    assert_eq!(pred.labels.len(), test.n_samples());
    let correct = pred.labels.iter().zip(test.labels()).filter(|(a, b)| a == b).count();
    assert!(correct as f64 / test.n_samples() as f64 > 0.9);
}

#[test]
fn final_layer_scope_and_mifcm_mode() {
    let (train, test) = iris_fold();
    let cfg = PipelineConfig { vote_scope: VoteScope::FinalLayer, ..Default::default() };
    assert_eq!(fit(&train, &cfg, 3).unwrap().n_classifiers(), 2);
    let cfg = PipelineConfig { ablation: AblationMode::MifcmOnly, ..Default::default() };
    let model = fit(&train, &cfg, 3).unwrap();
    assert_eq!(model.n_classifiers(), 6);
    assert!(model.subsets.iter().all(|s| s.projectors.is_empty()));
    assert!(model.subsets.iter().flat_map(|s| &s.classifiers).all(|c| c.tree.n_features() == 16));
    model.predict(test.features()).unwrap();
}

#[test]
fn plain_bagging_uses_raw_subsets() {
    let (train, test) = iris_fold();
    let cfg = PipelineConfig { ablation: AblationMode::None, ..Default::default() };
    let model = fit(&train, &cfg, 3).unwrap();
    assert_eq!(model.n_classifiers(), 2);
    assert!(model.subsets.iter().all(|s| s.reference.is_none() && s.projectors.is_empty()));
    let pred = model.predict(test.features()).unwrap();
    assert_eq!(pred.per_classifier.len(), 2);
}

fn balanced_toy() -> Dataset64 {
    let x = DMatrix::from_fn(24, 2, |i, j| {
        let base = if i < 12 { 0.0 } else { 2.0 };
        base + ((i * 5 + j * 3) % 7) as f64 * 0.3
    });
    let labels = (0..24).map(|i| if i < 12 { Class::Minority } else { Class::Majority }).collect();
    Dataset::new("toy", x, labels, vec!["a".into(), "b".into()], "p", "n").unwrap()
}

#[test]
fn single_tree_models_reduce_to_that_tree() {
    let ds = balanced_toy();
    let cfg = PipelineConfig { ablation: AblationMode::None, ..Default::default() };
    let model = fit(&ds, &cfg, 0).unwrap();
    assert_eq!(model.n_classifiers(), 1);
    let query = DMatrix::from_fn(9, 2, |i, j| (i as f64 - 4.0) * 0.5 + j as f64);
    let pred = model.predict(&query).unwrap();
    let z = model.standardizer.transform(&query).unwrap();
    assert_eq!(pred.labels, model.subsets[0].classifiers[0].tree.predict(&z).unwrap());

    let mut cfg = PipelineConfig::default();
    cfg.dsen.layers = 1;
    let model = fit(&ds, &cfg, 0).unwrap();
    assert_eq!(model.n_classifiers(), 1);
    let pred = model.predict(&query).unwrap();
    assert_eq!(pred.labels, pred.per_classifier[0]);
}

#[test]
fn fitting_is_deterministic_and_serializable() {
    let (train, test) = iris_fold();
    let cfg = PipelineConfig::default();
    let a = fit(&train, &cfg, 17).unwrap().predict(test.features()).unwrap();
    let model = fit(&train, &cfg, 17).unwrap();
    assert_eq!(a, model.predict(test.features()).unwrap());

    let json = serde_json::to_string(&model).unwrap();
    let back: PipelineModel64 = serde_json::from_str(&json).unwrap();
    assert_eq!(back.version, dsenlg::ensemble::MODEL_VERSION);
    assert_eq!(back.predict(test.features()).unwrap().labels, a.labels);
    assert!(model.predict(&DMatrix::zeros(2, 3)).is_err());
}

#[test]
fn single_precision_pipeline_runs() {
    let ds: dsenlg::Dataset32 =
        load_keel(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/keel/iris0.dat")).unwrap();
    let split = &stratified_splits(&ds, 5, 1, 0).unwrap()[0];
    let train = ds.subset(&split.train_indices).unwrap();
    let model = fit(&train, &PipelineConfig::default(), 1).unwrap();
    assert_eq!(model.n_classifiers(), 6);
    model.predict(ds.subset(&split.test_indices).unwrap().features()).unwrap();
}

#[test]
fn table_counts_of_bundled_data() {
    for (name, min, maj) in [("ecoli1", 77, 259), ("ecoli3", 35, 301), ("yeast5", 44, 1440), ("iris0", 50, 100)] {
        let ds = keel(name);
        assert_eq!((ds.n_minority(), ds.n_majority()), (min, maj), "{name}");
    }
}
