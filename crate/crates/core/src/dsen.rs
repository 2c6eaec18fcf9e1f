//! Deep sample envelopes: neighbourhood concatenation followed by stacked
//! fuzzy C-means layers.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::knn;
use crate::scalar::{lit, Real};
use crate::seed;

/// Per-layer cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClusterSchedule {
    /// Explicit `C_1 … C_L`.
    Fixed(Vec<usize>),
    /// `C_l = max(2, ⌈ρ · rows entering layer l⌉)`.
    Ratio(f64),
}

impl ClusterSchedule {
    pub fn clusters_for(&self, layer: usize, rows: usize) -> Result<usize> {
        let c = match self {
            ClusterSchedule::Fixed(cs) => *cs
                .get(layer)
                .ok_or_else(|| Error::InvalidArgument(format!("schedule has no entry for layer {}", layer + 1)))?,
            ClusterSchedule::Ratio(rho) => ((rho * rows as f64).ceil() as usize).max(2),
        };
        if c < 2 {
            return Err(Error::InvalidArgument(format!("layer {} asks for {c} clusters, need >= 2", layer + 1)));
        }
        if c > rows {
            return Err(Error::TooFewRows { needed: c, available: rows });
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DsenConfig {
    /// Neighbours concatenated onto each sample (K).
    pub neighbors: usize,
    /// Clustering layers (L).
    pub layers: usize,
    pub schedule: ClusterSchedule,
    /// Fuzzification coefficient m > 1.
    pub fuzzifier: f64,
    /// Stop once the objective changes by less than this (absolute).
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for DsenConfig {
    fn default() -> Self {
        Self { neighbors: 3, layers: 3, schedule: ClusterSchedule::Ratio(0.8), fuzzifier: 2.0, epsilon: 1e-5, max_iter: 200 }
    }
}

impl DsenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors < 1 {
            return Err(Error::InvalidArgument("neighbors must be >= 1".into()));
        }
        if self.layers < 1 {
            return Err(Error::InvalidArgument("layers must be >= 1".into()));
        }
        if !(self.fuzzifier > 1.0) {
            return Err(Error::InvalidArgument(format!("fuzzifier must exceed 1, got {}", self.fuzzifier)));
        }
        if !(self.epsilon > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("epsilon must be positive and max_iter nonzero".into()));
        }
        match &self.schedule {
            ClusterSchedule::Fixed(cs) if cs.len() != self.layers => Err(Error::InvalidArgument(format!(
                "schedule lists {} layers, config has {}",
                cs.len(),
                self.layers
            ))),
            ClusterSchedule::Fixed(cs) if cs.windows(2).any(|w| w[1] > w[0]) => {
                Err(Error::InvalidArgument("cluster counts must not grow between layers".into()))
            }
            ClusterSchedule::Ratio(r) if !(*r > 0.0 && *r < 1.0) => {
                Err(Error::InvalidArgument(format!("cluster ratio must lie in (0, 1), got {r}")))
            }
            _ => Ok(()),
        }
    }
}

/// Samples widened by their K nearest neighbours: `n × (K+1)·s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EnvelopeSet<T: Real> {
    pub samples: DMatrix<T>,
    /// Row `i`: the source row followed by its neighbours, nearest first.
    /// For out-of-sample envelopes the first entry is the query index and
    /// the rest index the reference set.
    pub source_indices: Vec<Vec<usize>>,
    pub base_dim: usize,
}

impl<T: Real> EnvelopeSet<T> {
    pub fn neighbors(&self) -> usize {
        self.samples.ncols() / self.base_dim.max(1) - 1
    }
}

fn concat_rows<T: Real>(query: &DMatrix<T>, reference: &DMatrix<T>, lists: &[Vec<usize>]) -> DMatrix<T> {
    let s = query.ncols();
    let k = lists.first().map_or(0, Vec::len);
    DMatrix::from_fn(query.nrows(), (k + 1) * s, |i, j| {
        let (block, col) = (j / s, j % s);
        if block == 0 {
            query[(i, col)]
        } else {
            reference[(lists[i][block - 1], col)]
        }
    })
}

/// Envelope of every row against the rest of `x` (a row is never its own neighbour).
pub fn snc<T: Real>(x: &DMatrix<T>, k: usize) -> Result<EnvelopeSet<T>> {
    let n = x.nrows();
    if n <= k {
        return Err(Error::TooFewRows { needed: k + 1, available: n });
    }
    let lists = (0..n).map(|i| knn(x, &x.row(i), k, Some(i))).collect::<Result<Vec<_>>>()?;
    let samples = concat_rows(x, x, &lists);
    let source_indices = lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| std::iter::once(i).chain(l).collect())
        .collect();
    Ok(EnvelopeSet { samples, source_indices, base_dim: x.ncols() })
}

/// Envelope of each query row against its K nearest training rows.
pub fn snc_transform<T: Real>(train: &DMatrix<T>, query: &DMatrix<T>, k: usize) -> Result<EnvelopeSet<T>> {
    if train.nrows() <= k {
        return Err(Error::TooFewRows { needed: k + 1, available: train.nrows() });
    }
    if train.ncols() != query.ncols() {
        return Err(Error::Shape(format!("train has {} columns, query {}", train.ncols(), query.ncols())));
    }
    let lists = (0..query.nrows()).map(|i| knn(train, &query.row(i), k, None)).collect::<Result<Vec<_>>>()?;
    let samples = concat_rows(query, train, &lists);
    let source_indices = lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| std::iter::once(i).chain(l).collect())
        .collect();
    Ok(EnvelopeSet { samples, source_indices, base_dim: query.ncols() })
}

/// Fuzzy partition `c × n`; every column sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MembershipMatrix<T: Real>(pub DMatrix<T>);

impl<T: Real> MembershipMatrix<T> {
    pub fn matrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn max_column_sum_error(&self) -> T {
        self.0.column_iter().map(|c| (c.sum() - T::one()).abs()).fold(T::zero(), |a, b| a.max(b))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FcmResult<T: Real> {
    pub membership: MembershipMatrix<T>,
    /// `c × f`, one prototype per row.
    pub prototypes: DMatrix<T>,
    /// Objective after each completed iteration; non-increasing.
    pub objective_trace: Vec<T>,
    pub converged: bool,
}

fn squared_distances<T: Real>(x: &DMatrix<T>, v: &DMatrix<T>) -> DMatrix<T> {
    DMatrix::from_fn(v.nrows(), x.nrows(), |i, p| {
        let mut acc = T::zero();
        for j in 0..x.ncols() {
            let d = x[(p, j)] - v[(i, j)];
            acc += d * d;
        }
        acc
    })
}

fn weights<T: Real>(u: &DMatrix<T>, m: T) -> DMatrix<T> {
    if m == lit(2.0) {
        u.map(|a| a * a)
    } else {
        u.map(|a| a.powf(m))
    }
}

/// Prototype update: weighted means with weights `u_ip^m`.
pub fn update_prototypes<T: Real>(x: &DMatrix<T>, u: &DMatrix<T>, m: T) -> DMatrix<T> {
    let w = weights(u, m);
    let mut v = &w * x;
    for (i, mut row) in v.row_iter_mut().enumerate() {
        let total = w.row(i).sum();
        if total > T::zero() {
            row /= total;
        }
    }
    v
}

/// Membership update from squared distances. A zero distance gives full
/// membership to the first prototype at that distance.
pub fn update_memberships<T: Real>(d2: &DMatrix<T>, m: T) -> DMatrix<T> {
    let (c, n) = d2.shape();
    let exponent = T::one() / (m - T::one());
    let mut u = DMatrix::zeros(c, n);
    for p in 0..n {
        let col = d2.column(p);
        if let Some(hit) = col.iter().position(|&d| d == T::zero()) {
            u[(hit, p)] = T::one();
            continue;
        }
        let dmin = col.min();
        let mut total = T::zero();
        for i in 0..c {
            let w = (dmin / col[i]).powf(exponent);
            u[(i, p)] = w;
            total += w;
        }
        for i in 0..c {
            u[(i, p)] /= total;
        }
    }
    u
}

fn fcm_objective<T: Real>(u: &DMatrix<T>, d2: &DMatrix<T>, m: T) -> T {
    weights(u, m).component_mul(d2).sum()
}

/// Largest absolute change one more prototype update would make.
pub fn fixed_point_residual<T: Real>(x: &DMatrix<T>, result: &FcmResult<T>, m: f64) -> T {
    let v = update_prototypes(x, result.membership.matrix(), lit(m));
    (v - &result.prototypes).amax()
}

/// Fuzzy C-means on the rows of `x` with `c` clusters.
///
/// Memberships start as seeded uniform draws normalized per column. Each
/// iteration updates prototypes then memberships and records the objective;
/// iteration stops when the change falls below `cfg.epsilon`, when the
/// objective stops decreasing at rounding level, or after `cfg.max_iter`.
pub fn fcm<T: Real>(x: &DMatrix<T>, c: usize, cfg: &DsenConfig, seed: u64) -> Result<FcmResult<T>> {
    let n = x.nrows();
    if c == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if c > n {
        return Err(Error::TooFewRows { needed: c, available: n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fcm input"));
    }
    if !(cfg.fuzzifier > 1.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidArgument("fuzzifier must exceed 1 and max_iter be nonzero".into()));
    }
    let m: T = lit(cfg.fuzzifier);
    let eps: T = lit(cfg.epsilon);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::from_fn(c, n, |_, _| lit::<T>(rng.random::<f64>() + f64::MIN_POSITIVE));
    for mut col in u.column_iter_mut() {
        let total = col.sum();
        col /= total;
    }

    let mut trace: Vec<T> = Vec::new();
    let mut best: Option<(DMatrix<T>, DMatrix<T>)> = None;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let v = update_prototypes(x, &u, m);
        let d2 = squared_distances(x, &v);
        let u_next = update_memberships(&d2, m);
        let j = fcm_objective(&u_next, &d2, m);
        let prev = trace.last().copied();
        if prev.is_some_and(|p| j > p) {
            converged = true;
            break;
        }
        trace.push(j);
        best = Some((u_next.clone(), v));
        u = u_next;
        if prev.is_some_and(|p| p - j < eps) {
            converged = true;
            break;
        }
    }
    let (u, v) = best.expect("at least one iteration runs");
    Ok(FcmResult { membership: MembershipMatrix(u), prototypes: v, objective_trace: trace, converged })
}

/// Output of one clustering layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LayerState<T: Real> {
    pub layer_index: usize,
    /// FCM prototypes in the space of this layer's input.
    pub prototypes: DMatrix<T>,
    /// Prototypes after alignment, when an aligner is attached.
    pub aligned: Option<DMatrix<T>>,
    pub membership: MembershipMatrix<T>,
    pub objective_trace: Vec<T>,
}

impl<T: Real> LayerState<T> {
    /// Rows handed to the next layer.
    pub fn output(&self) -> &DMatrix<T> {
        self.aligned.as_ref().unwrap_or(&self.prototypes)
    }
}

/// Per-layer hook that replaces the layer's prototypes before they feed the
/// next layer. Receives every group's input rows, prototypes and memberships.
pub trait LayerAligner<T: Real> {
    fn align(
        &mut self,
        layer: usize,
        inputs: &[DMatrix<T>],
        prototypes: &[DMatrix<T>],
        memberships: &[MembershipMatrix<T>],
    ) -> Result<Vec<DMatrix<T>>>;
}

/// Seed used for the FCM run of `group` at `layer`.
pub fn layer_seed(seed: u64, layer: usize, group: usize) -> u64 {
    seed::derive(seed, &[layer as u64, group as u64])
}

/// Stacked FCM over several groups clustered independently (one per class).
/// Returns `states[layer][group]`.
pub fn mifcm_grouped<T: Real>(
    groups: &[DMatrix<T>],
    cfg: &DsenConfig,
    seed: u64,
    mut aligner: Option<&mut dyn LayerAligner<T>>,
) -> Result<Vec<Vec<LayerState<T>>>> {
    if cfg.layers == 0 {
        return Err(Error::InvalidArgument("layers must be >= 1".into()));
    }
    let mut inputs: Vec<DMatrix<T>> = groups.to_vec();
    let mut layers = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let mut results = Vec::with_capacity(inputs.len());
        for (g, x) in inputs.iter().enumerate() {
            let c = cfg.schedule.clusters_for(l, x.nrows())?;
            results.push(fcm(x, c, cfg, layer_seed(seed, l, g))?);
        }
        let aligned = match aligner.as_deref_mut() {
            Some(a) => {
                let protos: Vec<DMatrix<T>> = results.iter().map(|r| r.prototypes.clone()).collect();
                let members: Vec<MembershipMatrix<T>> = results.iter().map(|r| r.membership.clone()).collect();
                let out = a.align(l, &inputs, &protos, &members)?;
                if out.len() != results.len() || out.iter().zip(&protos).any(|(o, p)| o.nrows() != p.nrows()) {
                    return Err(Error::Shape("aligner must return one row per prototype for every group".into()));
                }
                out.into_iter().map(Some).collect()
            }
            None => vec![None; results.len()],
        };
        let states: Vec<LayerState<T>> = results
            .into_iter()
            .zip(aligned)
            .map(|(r, a)| LayerState {
                layer_index: l,
                prototypes: r.prototypes,
                aligned: a,
                membership: r.membership,
                objective_trace: r.objective_trace,
            })
            .collect();
        inputs = states.iter().map(|s| s.output().clone()).collect();
        layers.push(states);
    }
    Ok(layers)
}

/// Stacked FCM over a single envelope set.
pub fn mifcm<T: Real>(
    envelope: &EnvelopeSet<T>,
    cfg: &DsenConfig,
    seed: u64,
    aligner: Option<&mut dyn LayerAligner<T>>,
) -> Result<Vec<LayerState<T>>> {
    let layers = mifcm_grouped(std::slice::from_ref(&envelope.samples), cfg, seed, aligner)?;
    Ok(layers.into_iter().map(|mut g| g.remove(0)).collect())
}
