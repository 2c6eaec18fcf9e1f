//! The full pipeline: balanced subsets, deep envelope layers with alignment,
//! one tree per layer and majority voting.

use log::warn;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset, Standardizer};
use crate::dsen::{mifcm_grouped, snc, snc_transform, DsenConfig, LayerAligner, MembershipMatrix};
use crate::error::{Error, Result};
use crate::lgscm::{optimize, LgscmParams, Projector};
use crate::partition::{divide_and_fuse, BalancedSubset, RemainderRule};
use crate::seed;
use crate::scalar::Real;
use crate::tree::{train_tree, DecisionTree, TreeParams};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteScope {
    /// One tree per layer.
    #[default]
    AllLayers,
    /// One tree per subset on the last layer.
    FinalLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    /// Envelope, stacked clustering and alignment.
    #[default]
    Full,
    /// Envelope and stacked clustering without alignment.
    MifcmOnly,
    /// Trees on the raw balanced subsets.
    None,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dsen: DsenConfig,
    pub lgscm: LgscmParams,
    pub tree: TreeParams,
    pub vote_scope: VoteScope,
    pub ablation: AblationMode,
    pub remainder: RemainderRule,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.dsen.validate()?;
        self.lgscm.validate()?;
        if self.ablation == AblationMode::Full && self.lgscm.neighbors != self.dsen.neighbors {
            return Err(Error::InvalidArgument(format!(
                "envelope uses K={} but the alignment graph uses K={}",
                self.dsen.neighbors, self.lgscm.neighbors
            )));
        }
        if self.tree.max_depth == 0 {
            return Err(Error::InvalidArgument("tree max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LayerClassifier<T: Real> {
    /// Layer the tree reads, from 0. Ignored when the subset has no envelope.
    pub layer: usize,
    pub tree: DecisionTree<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SubsetModel<T: Real> {
    pub subset_index: usize,
    /// Standardized training rows test samples are enveloped against; absent
    /// when trees see raw rows.
    pub reference: Option<DMatrix<T>>,
    /// One projector per layer when alignment is on.
    pub projectors: Vec<Projector<T>>,
    pub classifiers: Vec<LayerClassifier<T>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PipelineModel<T: Real> {
    pub version: u32,
    pub config: PipelineConfig,
    pub n_features: usize,
    pub standardizer: Standardizer<T>,
    pub subsets: Vec<SubsetModel<T>>,
    /// Subsets left out because they were too small.
    pub skipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: Vec<Class>,
    /// Share of classifiers voting minority, per sample.
    pub minority_fraction: Vec<f64>,
    /// `per_classifier[j][i]`: vote of classifier `j` on sample `i`.
    pub per_classifier: Vec<Vec<Class>>,
}

fn vstack<T: Real>(parts: &[DMatrix<T>]) -> DMatrix<T> {
    let cols = parts.first().map_or(0, DMatrix::ncols);
    let rows: usize = parts.iter().map(DMatrix::nrows).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.nrows()).copy_from(p);
        at += p.nrows();
    }
    out
}

fn block_diagonal<T: Real>(blocks: &[MembershipMatrix<T>]) -> DMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.0.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.0.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.0.shape()).copy_from(&b.0);
        r += b.0.nrows();
        c += b.0.ncols();
    }
    out
}

/// Aligns both classes' prototypes in one shared subspace per layer, so test
/// rows need a single projection.
struct UnionAligner<'a, T: Real> {
    params: &'a LgscmParams,
    projectors: Vec<Projector<T>>,
}

impl<T: Real> LayerAligner<T> for UnionAligner<'_, T> {
    fn align(
        &mut self,
        _layer: usize,
        inputs: &[DMatrix<T>],
        prototypes: &[DMatrix<T>],
        memberships: &[MembershipMatrix<T>],
    ) -> Result<Vec<DMatrix<T>>> {
        let x = vstack(inputs);
        let v = vstack(prototypes);
        let warm = block_diagonal(memberships);
        let fit = optimize(&x, &v, self.params, Some(&warm))?;
        let aligned = fit.aligned_prototypes();
        self.projectors.push(fit.projector());
        let mut at = 0;
        Ok(prototypes
            .iter()
            .map(|p| {
                let part = aligned.rows(at, p.nrows()).into_owned();
                at += p.nrows();
                part
            })
            .collect())
    }
}

fn labels_for(counts: &[usize]) -> Vec<Class> {
    let mut y = vec![Class::Minority; counts[0]];
    y.extend(std::iter::repeat_n(Class::Majority, counts[1]));
    y
}

fn fit_subset<T: Real>(
    z: &DMatrix<T>,
    subset: &BalancedSubset,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Option<SubsetModel<T>>> {
    let rows = subset.rows();
    let xq = z.select_rows(&rows);
    let counts = [subset.minority_indices.len(), subset.majority_indices.len()];
    if cfg.ablation == AblationMode::None {
        let tree = train_tree(&xq, &labels_for(&counts), &cfg.tree)?;
        return Ok(Some(SubsetModel {
            subset_index: subset.subset_index,
            reference: None,
            projectors: Vec::new(),
            classifiers: vec![LayerClassifier { layer: 0, tree }],
        }));
    }
    let k = cfg.dsen.neighbors;
    if counts.iter().any(|&c| c < 2) || xq.nrows() <= k {
        warn!("subset {} has {:?} rows per class, too few for K={k}; skipped", subset.subset_index, counts);
        return Ok(None);
    }
    let envelope = snc(&xq, k)?;
    let groups = [envelope.samples.rows(0, counts[0]).into_owned(), envelope.samples.rows(counts[0], counts[1]).into_owned()];
    let mut aligner = UnionAligner { params: &cfg.lgscm, projectors: Vec::new() };
    let hook: Option<&mut dyn LayerAligner<T>> = match cfg.ablation {
        AblationMode::Full => Some(&mut aligner),
        _ => None,
    };
    let layers = match mifcm_grouped(&groups, &cfg.dsen, seed, hook) {
        Ok(l) => l,
        Err(e @ (Error::TooFewRows { .. } | Error::InvalidArgument(_))) => {
            warn!("subset {} cannot be layered ({e}); skipped", subset.subset_index);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let first = match cfg.vote_scope {
        VoteScope::AllLayers => 0,
        VoteScope::FinalLayer => layers.len() - 1,
    };
    let classifiers = layers[first..]
        .iter()
        .enumerate()
        .map(|(i, states)| {
            let parts: Vec<DMatrix<T>> = states.iter().map(|s| s.output().clone()).collect();
            let y = labels_for(&[parts[0].nrows(), parts[1].nrows()]);
            Ok(LayerClassifier { layer: first + i, tree: train_tree(&vstack(&parts), &y, &cfg.tree)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(SubsetModel {
        subset_index: subset.subset_index,
        reference: Some(xq),
        projectors: aligner.projectors,
        classifiers,
    }))
}

/// Trains the ensemble on `train`.
pub fn fit<T: Real>(train: &Dataset<T>, cfg: &PipelineConfig, seed: u64) -> Result<PipelineModel<T>> {
    cfg.validate()?;
    if train.n_minority() == 0 || train.n_majority() == 0 {
        return Err(Error::InvalidDataset("training data needs both classes".into()));
    }
    let standardizer = Standardizer::fit(train.features());
    let z = standardizer.transform(train.features())?;
    let partition = divide_and_fuse(train, cfg.remainder);
    let fitted = partition
        .subsets
        .par_iter()
        .map(|s| fit_subset(&z, s, cfg, seed::derive(seed, &[s.subset_index as u64])))
        .collect::<Result<Vec<_>>>()?;
    let mut subsets = Vec::new();
    let mut skipped = Vec::new();
    for (s, m) in partition.subsets.iter().zip(fitted) {
        match m {
            Some(m) => subsets.push(m),
            None => skipped.push(s.subset_index),
        }
    }
    if subsets.is_empty() {
        return Err(Error::NoUsableSubset);
    }
    Ok(PipelineModel { version: MODEL_VERSION, config: cfg.clone(), n_features: train.n_features(), standardizer, subsets, skipped })
}

impl<T: Real> PipelineModel<T> {
    pub fn n_classifiers(&self) -> usize {
        self.subsets.iter().map(|s| s.classifiers.len()).sum()
    }

    /// Votes of every classifier, in subset then layer order.
    pub fn votes(&self, x: &DMatrix<T>) -> Result<Vec<Vec<Class>>> {
        if x.ncols() != self.n_features {
            return Err(Error::Shape(format!("model trained on {} features, got {}", self.n_features, x.ncols())));
        }
        let z = self.standardizer.transform(x)?;
        let mut out = Vec::with_capacity(self.n_classifiers());
        for sub in &self.subsets {
            let Some(reference) = &sub.reference else {
                for c in &sub.classifiers {
                    out.push(c.tree.predict(&z)?);
                }
                continue;
            };
            let mut current = snc_transform(reference, &z, self.config.dsen.neighbors)?.samples;
            let layers = sub.classifiers.iter().map(|c| c.layer).max().map_or(0, |l| l + 1);
            for l in 0..layers {
                if let Some(p) = sub.projectors.get(l) {
                    current = p.project_rows(&current)?;
                }
                for c in sub.classifiers.iter().filter(|c| c.layer == l) {
                    out.push(c.tree.predict(&current)?);
                }
            }
        }
        Ok(out)
    }

    /// Majority vote; a tie goes to the minority class.
    pub fn predict(&self, x: &DMatrix<T>) -> Result<Prediction> {
        let per_classifier = self.votes(x)?;
        Ok(fuse_votes(per_classifier, x.nrows()))
    }
}

/// Fuses classifier votes by strict majority with ties to the minority class.
pub fn fuse_votes(per_classifier: Vec<Vec<Class>>, n: usize) -> Prediction {
    let voters = per_classifier.len();
    let mut labels = Vec::with_capacity(n);
    let mut minority_fraction = Vec::with_capacity(n);
    for i in 0..n {
        let m = per_classifier.iter().filter(|v| v[i].is_minority()).count();
        labels.push(if 2 * m >= voters { Class::Minority } else { Class::Majority });
        minority_fraction.push(if voters == 0 { 0.0 } else { m as f64 / voters as f64 });
    }
    Prediction { labels, minority_fraction, per_classifier }
}
