//! Multi-threaded one-vs-one fitting.

use std::collections::BTreeMap;
use std::thread;

use mipilot_core::csp::FeatureVector;
use mipilot_core::signal::{ClassId, EegTrial};
use mipilot_core::svm::{check_four_classes, class_pairs, fit_pair, KernelSpec, MultiClassSvmModel};
use mipilot_core::training::{train_with, TrainConfig, TrainedModel};
use mipilot_core::Result;

/// Same result as the sequential fitter, with the six pairwise problems
/// solved on scoped threads.
pub fn fit_multiclass_parallel<F>(
    features_by_class: &BTreeMap<ClassId, Vec<F>>,
    kernel: KernelSpec,
    c_cap: f64,
) -> Result<MultiClassSvmModel>
where
    F: AsRef<[f64]> + Sync,
{
    let ids = check_four_classes(features_by_class)?;
    let machines = thread::scope(|s| {
        let handles: Vec<_> = class_pairs(&ids)
            .into_iter()
            .map(|(a, b)| {
                let (xa, xb) = (&features_by_class[&a], &features_by_class[&b]);
                s.spawn(move || fit_pair((a, xa), (b, xb), kernel, c_cap))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("pairwise SVM fit panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    MultiClassSvmModel::from_machines(ids, machines)
}

pub fn train_parallel(trials: &[EegTrial], cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(trials, cfg, |f: &BTreeMap<ClassId, Vec<FeatureVector>>, k, c| {
        fit_multiclass_parallel(f, k, c)
    })
}
