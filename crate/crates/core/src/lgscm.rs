//! Local-global structure consistency between a layer's input set `X_e`
//! and its prototypes `V_e`.
//!
//! Both sets live in a Gaussian-kernel feature space spanned by the
//! reference set `X_r = [V_e; X_e]`. A projection `Θ` (expressed in that
//! span, `P = φ(X_r)Θ`) maps them to a `d`-dimensional subspace, and a
//! transition matrix `𝒢` builds the intermediate set `φ(V_e)𝒢`, which is
//! pulled towards `X_e` by
//!
//! * a graph term over the K-NN affinity of `X_e` (local manifold),
//! * a projected mean discrepancy (global distribution),
//! * a nuclear-norm penalty on `𝒢`,
//!
//! subject to `Θᵀ Ψ Θ = I`. The solver alternates a singular-value
//! threshold step for the auxiliary copy `ℋ`, a closed-form Sylvester solve
//! for `𝒢`, a generalized eigen step for `Θ`, and a multiplier update.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::knn_within;
use crate::linalg::{nuclear_norm, singular_value_threshold, sym_eigen_ascending};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SigmaRule {
    /// Median pairwise Euclidean distance over the reference set.
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionInit {
    /// Start `𝒢` from the supplied matrix (FCM memberships in the
    /// pipeline), or uniform `1/c` columns when none is given.
    Warm,
    /// `ℋ = 𝒢 = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LgscmParams {
    /// Weight of the global mean-discrepancy term.
    pub lambda: f64,
    /// Weight of the nuclear norm of `𝒢`.
    pub lambda_nuclear: f64,
    /// ADMM penalty δ.
    pub penalty: f64,
    /// Subspace dimension; `None` means `min(20, r - 1)`.
    pub dim: Option<usize>,
    /// Number of leading kernel eigen-directions `Θ` may combine; `None`
    /// means `dim`.
    pub kernel_components: Option<usize>,
    /// Neighbours per node in the affinity graph.
    pub neighbors: usize,
    pub sigma: SigmaRule,
    pub max_outer: usize,
    pub tol: f64,
    pub init: TransitionInit,
    /// Kernel eigenvalues below `rank_floor · mean(diag Ψ)` are treated as zero.
    pub rank_floor: f64,
}

impl Default for LgscmParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lambda_nuclear: 0.1,
            penalty: 1.0,
            dim: None,
            kernel_components: None,
            neighbors: 3,
            sigma: SigmaRule::Median,
            max_outer: 50,
            tol: 1e-4,
            init: TransitionInit::Warm,
            rank_floor: 1e-6,
        }
    }
}

impl LgscmParams {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.lambda_nuclear < 0.0 {
            return Err(Error::InvalidArgument("trade-off weights must be non-negative".into()));
        }
        if !(self.penalty > 0.0) || !(self.tol > 0.0) || !(self.rank_floor > 0.0) {
            return Err(Error::InvalidArgument("penalty, tol and rank_floor must be positive".into()));
        }
        if self.dim == Some(0) || self.kernel_components == Some(0) {
            return Err(Error::InvalidArgument("dimensions must be positive".into()));
        }
        if let SigmaRule::Fixed(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("kernel bandwidth must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

/// Gaussian Gram matrix, `exp(-‖a_i - b_j‖² / (2σ²))`.
pub fn gaussian_gram<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, sigma: T) -> Result<DMatrix<T>> {
    if !(sigma > T::zero()) {
        return Err(Error::InvalidArgument("kernel bandwidth must be positive".into()));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("gram of {} vs {} columns", a.ncols(), b.ncols())));
    }
    let denom = lit::<T>(2.0) * sigma * sigma;
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        let mut acc = T::zero();
        for c in 0..a.ncols() {
            let d = a[(i, c)] - b[(j, c)];
            acc += d * d;
        }
        (-acc / denom).exp()
    }))
}

/// Median of the strictly positive pairwise distances between rows.
pub fn median_distance<T: Real>(x: &DMatrix<T>) -> Option<T> {
    let n = x.nrows();
    let mut d: Vec<T> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let dist = (x.row(i) - x.row(j)).norm();
            if dist > T::zero() {
                d.push(dist);
            }
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = d.len() / 2;
    Some(if d.len() % 2 == 1 { d[mid] } else { (d[mid - 1] + d[mid]) * lit(0.5) })
}

/// Kernel matrices over the reference set `X_r = [V_e; X_e]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KernelModel<T: Real> {
    /// `r × f`, prototypes first.
    pub reference: DMatrix<T>,
    pub sigma: T,
    /// `Ψ`, `r × r`.
    pub gram: DMatrix<T>,
    /// `Ψ_v`, `r × c`.
    pub gram_v: DMatrix<T>,
    /// `Ψ_e`, `r × n`.
    pub gram_e: DMatrix<T>,
    pub n_prototypes: usize,
}

impl<T: Real> KernelModel<T> {
    pub fn new(input: &DMatrix<T>, prototypes: &DMatrix<T>, sigma: SigmaRule) -> Result<Self> {
        if input.ncols() != prototypes.ncols() {
            return Err(Error::Shape(format!(
                "input has {} columns, prototypes {}",
                input.ncols(),
                prototypes.ncols()
            )));
        }
        let (c, n) = (prototypes.nrows(), input.nrows());
        let mut reference = DMatrix::zeros(c + n, input.ncols());
        reference.rows_mut(0, c).copy_from(prototypes);
        reference.rows_mut(c, n).copy_from(input);
        let sigma = match sigma {
            SigmaRule::Fixed(s) => lit(s),
            SigmaRule::Median => median_distance(&reference)
                .ok_or_else(|| Error::DegenerateKernel("all reference rows coincide".into()))?,
        };
        let gram = gaussian_gram(&reference, &reference, sigma)?;
        let gram_v = gram.columns(0, c).into_owned();
        let gram_e = gram.columns(c, n).into_owned();
        Ok(Self { reference, sigma, gram, gram_v, gram_e, n_prototypes: c })
    }

    pub fn n_reference(&self) -> usize {
        self.reference.nrows()
    }

    pub fn n_input(&self) -> usize {
        self.gram_e.ncols()
    }
}

/// Symmetric K-NN affinity of the input set and its degree vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GraphPair<T: Real> {
    /// `S`, entries in {0, 1}.
    pub affinity: DMatrix<T>,
    /// Diagonal of `D`, the row sums of `S`.
    pub degree: DVector<T>,
}

/// `S_he = 1` when either row is among the other's K nearest neighbours.
pub fn build_affinity<T: Real>(x: &DMatrix<T>, k: usize) -> Result<GraphPair<T>> {
    let n = x.nrows();
    if n <= k {
        return Err(Error::TooFewRows { needed: k + 1, available: n });
    }
    let lists = knn_within(x, k)?;
    let mut s = DMatrix::zeros(n, n);
    for (h, list) in lists.iter().enumerate() {
        for &e in list {
            s[(h, e)] = T::one();
            s[(e, h)] = T::one();
        }
    }
    let degree = DVector::from_iterator(n, s.row_iter().map(|r| r.sum()));
    Ok(GraphPair { affinity: s, degree })
}

/// Trained alignment state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AlignmentModel<T: Real> {
    /// `Θ`, `r × d`.
    pub theta: DMatrix<T>,
    /// `𝒢`, `c × n`.
    pub transition: DMatrix<T>,
    /// `ℋ`, `c × n`.
    pub auxiliary: DMatrix<T>,
    /// `ζ₁`, `c × n`.
    pub multiplier: DMatrix<T>,
    pub penalty: f64,
    pub lambda: f64,
    pub lambda_nuclear: f64,
    pub dim: usize,
    /// Combined objective at initialization and after every outer iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl<T: Real> AlignmentModel<T> {
    /// `max |Θᵀ Ψ Θ - I|`.
    pub fn orthogonality_residual(&self, kern: &KernelModel<T>) -> T {
        let g = self.theta.transpose() * &kern.gram * &self.theta;
        (g - DMatrix::identity(self.dim, self.dim)).amax()
    }

    /// `‖𝒢 - ℋ‖_F / ‖𝒢‖_F`.
    pub fn consensus_gap(&self) -> T {
        let g = self.transition.norm();
        if g == T::zero() {
            (&self.transition - &self.auxiliary).norm()
        } else {
            (&self.transition - &self.auxiliary).norm() / g
        }
    }
}

fn check_shapes<T: Real>(model: &AlignmentModel<T>, kern: &KernelModel<T>) -> Result<()> {
    let (r, c, n) = (kern.n_reference(), kern.n_prototypes, kern.n_input());
    if model.theta.nrows() != r || model.transition.shape() != (c, n) {
        return Err(Error::Shape(format!(
            "Θ is {:?} and 𝒢 {:?}, kernel expects {r} reference rows and 𝒢 of {c} x {n}",
            model.theta.shape(),
            model.transition.shape()
        )));
    }
    Ok(())
}

fn lmsm_terms<T: Real>(transition_proj: &DMatrix<T>, input_proj: &DMatrix<T>, graph: &GraphPair<T>) -> T {
    let n = input_proj.ncols();
    let weighted_sq = |z: &DMatrix<T>| {
        z.column_iter().zip(graph.degree.iter()).map(|(c, &d)| d * c.norm_squared()).fold(T::zero(), |a, b| a + b)
    };
    let cross = (transition_proj.transpose() * input_proj).component_mul(&graph.affinity).sum();
    let nn: T = lit((n * n) as f64);
    (weighted_sq(transition_proj) + weighted_sq(input_proj) - cross * lit(2.0)) / nn
}

/// Local manifold term:
/// `(1/n²)[Tr(M D Mᵀ) + Tr(Z D Zᵀ) - 2 Tr(M S Zᵀ)]` with `M = ΘᵀΨ_v𝒢`, `Z = ΘᵀΨ_e`.
pub fn lmsm_value<T: Real>(model: &AlignmentModel<T>, kern: &KernelModel<T>, graph: &GraphPair<T>) -> Result<T> {
    check_shapes(model, kern)?;
    if graph.affinity.nrows() != kern.n_input() {
        return Err(Error::Shape("graph size differs from the input set".into()));
    }
    let tt = model.theta.transpose();
    let m = &tt * &kern.gram_v * &model.transition;
    let z = &tt * &kern.gram_e;
    Ok(lmsm_terms(&m, &z, graph))
}

/// Global term `(1/n) ‖Θᵀ(Ψ_v𝒢 - Ψ_e)1‖²`.
pub fn gsdm_value<T: Real>(model: &AlignmentModel<T>, kern: &KernelModel<T>) -> Result<T> {
    check_shapes(model, kern)?;
    let n = kern.n_input();
    let diff = &kern.gram_v * &model.transition - &kern.gram_e;
    let sums = DVector::from_iterator(diff.nrows(), diff.row_iter().map(|r| r.sum()));
    let v = model.theta.transpose() * sums;
    Ok(v.norm_squared() / lit(n as f64))
}

/// Combined objective with the `λ/n²` weighting on the squared mean gap.
pub fn objective<T: Real>(model: &AlignmentModel<T>, kern: &KernelModel<T>, graph: &GraphPair<T>) -> Result<T> {
    let n: T = lit(kern.n_input() as f64);
    let lmsm = lmsm_value(model, kern, graph)?;
    let mut total = lmsm;
    if model.lambda != 0.0 {
        total += gsdm_value(model, kern)? * lit(model.lambda) / n;
    }
    if model.lambda_nuclear != 0.0 {
        total += nuclear_norm(&model.transition) * lit(model.lambda_nuclear);
    }
    Ok(total)
}

/// What is needed to map new rows through a trained alignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Projector<T: Real> {
    pub reference: DMatrix<T>,
    pub sigma: T,
    pub theta: DMatrix<T>,
}

impl<T: Real> Projector<T> {
    pub fn new(model: &AlignmentModel<T>, kern: &KernelModel<T>) -> Self {
        Self { reference: kern.reference.clone(), sigma: kern.sigma, theta: model.theta.clone() }
    }

    pub fn dim(&self) -> usize {
        self.theta.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.reference.ncols()
    }

    /// `Θᵀ k(X_r, samples)`, `d × m` (one column per sample).
    pub fn project(&self, samples: &DMatrix<T>) -> Result<DMatrix<T>> {
        if samples.ncols() != self.reference.ncols() {
            return Err(Error::Shape(format!(
                "samples have {} columns, reference set {}",
                samples.ncols(),
                self.reference.ncols()
            )));
        }
        Ok(self.theta.transpose() * gaussian_gram(&self.reference, samples, self.sigma)?)
    }

    /// Same as [`Projector::project`], one row per sample.
    pub fn project_rows(&self, samples: &DMatrix<T>) -> Result<DMatrix<T>> {
        Ok(self.project(samples)?.transpose())
    }
}

/// `Θᵀ k(X_r, samples)`.
pub fn project<T: Real>(model: &AlignmentModel<T>, kern: &KernelModel<T>, samples: &DMatrix<T>) -> Result<DMatrix<T>> {
    if model.theta.nrows() != kern.n_reference() {
        return Err(Error::Shape("Θ does not match the kernel reference set".into()));
    }
    Projector::new(model, kern).project(samples)
}

/// Kernel, graph and trained model of one alignment.
#[derive(Debug, Clone)]
pub struct LgscmFit<T: Real> {
    pub kernel: KernelModel<T>,
    pub graph: GraphPair<T>,
    pub model: AlignmentModel<T>,
}

impl<T: Real> LgscmFit<T> {
    /// Aligned prototypes `Θᵀ Ψ_v`, one row per prototype.
    pub fn aligned_prototypes(&self) -> DMatrix<T> {
        (self.model.theta.transpose() * &self.kernel.gram_v).transpose()
    }

    pub fn projector(&self) -> Projector<T> {
        Projector::new(&self.model, &self.kernel)
    }
}

struct Solver<'a, T: Real> {
    kern: &'a KernelModel<T>,
    graph: &'a GraphPair<T>,
    /// `r × k`, `Wᵀ Ψ W = I`.
    whiten: DMatrix<T>,
    dim: usize,
    lambda: T,
    penalty: T,
    inv_n2: T,
    e_values: DVector<T>,
    e_vectors: DMatrix<T>,
}

impl<'a, T: Real> Solver<'a, T> {
    fn theta_step(&self, transition: &DMatrix<T>) -> DMatrix<T> {
        let wt = self.whiten.transpose();
        let m = &wt * (&self.kern.gram_v * transition);
        let p = &wt * &self.kern.gram_e;
        let scale_cols = |a: &DMatrix<T>| {
            let mut out = a.clone();
            for (mut col, &d) in out.column_iter_mut().zip(self.graph.degree.iter()) {
                col *= d;
            }
            out
        };
        let s = &self.graph.affinity;
        let cross = &m * s * p.transpose();
        let mut a = scale_cols(&m) * m.transpose() + scale_cols(&p) * p.transpose() - &cross - cross.transpose();
        if self.lambda != T::zero() {
            let diff = &m - &p;
            let g = DVector::from_iterator(diff.nrows(), diff.row_iter().map(|r| r.sum()));
            a += &g * g.transpose() * self.lambda;
        }
        a *= self.inv_n2;
        let (_, vecs) = sym_eigen_ascending(&a);
        &self.whiten * vecs.columns(0, self.dim)
    }

    /// Stationary point of the augmented Lagrangian in `𝒢`:
    /// `(2/n²) B 𝒢 E + δ𝒢 = (2/n²) Zvᵀ Ze (S + λ11ᵀ) - ζ + δℋ`,
    /// with `B = ZvᵀZv` and `E = D + λ11ᵀ`, solved in both eigenbases.
    fn transition_step(&self, theta: &DMatrix<T>, aux: &DMatrix<T>, mult: &DMatrix<T>) -> DMatrix<T> {
        let tt = theta.transpose();
        let zv = &tt * &self.kern.gram_v;
        let ze = &tt * &self.kern.gram_e;
        let two_n2 = self.inv_n2 * lit(2.0);
        let mut ze_s = &ze * &self.graph.affinity;
        if self.lambda != T::zero() {
            let sums = DVector::from_iterator(ze.nrows(), ze.row_iter().map(|r| r.sum())) * self.lambda;
            for mut col in ze_s.column_iter_mut() {
                col += &sums;
            }
        }
        let rhs = zv.transpose() * ze_s * two_n2 - mult + aux * self.penalty;
        let (b_values, b_vectors) = sym_eigen_ascending(&(zv.transpose() * &zv));
        let mut rot = b_vectors.transpose() * rhs * &self.e_vectors;
        for j in 0..rot.ncols() {
            for i in 0..rot.nrows() {
                let bv = b_values[i].max(T::zero());
                let ev = self.e_values[j].max(T::zero());
                rot[(i, j)] /= two_n2 * bv * ev + self.penalty;
            }
        }
        &b_vectors * rot * self.e_vectors.transpose()
    }
}

/// Aligns `prototypes` (`V_e`, `c × f`) with `input` (`X_e`, `n × f`).
///
/// `warm_start` seeds `𝒢` (`c × n`) under [`TransitionInit::Warm`].
pub fn optimize<T: Real>(
    input: &DMatrix<T>,
    prototypes: &DMatrix<T>,
    params: &LgscmParams,
    warm_start: Option<&DMatrix<T>>,
) -> Result<LgscmFit<T>> {
    params.validate()?;
    let (n, c) = (input.nrows(), prototypes.nrows());
    if c == 0 {
        return Err(Error::InvalidArgument("no prototypes to align".into()));
    }
    if input.iter().chain(prototypes.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("alignment input"));
    }
    let kern = KernelModel::new(input, prototypes, params.sigma)?;
    let graph = build_affinity(input, params.neighbors)?;
    let r = c + n;

    let requested = params.dim.unwrap_or_else(|| 20.min(r - 1));
    if requested > r {
        return Err(Error::InvalidArgument(format!("subspace dimension {requested} exceeds {r} reference rows")));
    }
    let (values, vectors) = sym_eigen_ascending(&kern.gram);
    let floor = lit::<T>(params.rank_floor) * kern.gram.diagonal().mean();
    let rank = values.iter().filter(|&&v| v > floor).count();
    if rank == 0 {
        return Err(Error::DegenerateKernel("no kernel eigenvalue above the rank floor".into()));
    }
    let components = params.kernel_components.unwrap_or(requested).max(requested).min(rank);
    let dim = requested.min(components);
    if dim < requested {
        warn!("kernel rank {rank} limits the subspace dimension to {dim} (requested {requested})");
    }
    let mut whiten = DMatrix::zeros(r, components);
    for k in 0..components {
        let idx = r - 1 - k;
        let scale = T::one() / values[idx].sqrt();
        whiten.column_mut(k).copy_from(&(vectors.column(idx) * scale));
    }

    let lambda: T = lit(params.lambda);
    let mut e = DMatrix::from_diagonal(&graph.degree);
    e.add_scalar_mut(lambda);
    let (e_values, e_vectors) = sym_eigen_ascending(&e);
    let solver = Solver {
        kern: &kern,
        graph: &graph,
        whiten,
        dim,
        lambda,
        penalty: lit(params.penalty),
        inv_n2: T::one() / lit((n * n) as f64),
        e_values,
        e_vectors,
    };

    let transition = match (params.init, warm_start) {
        (TransitionInit::Zero, _) => DMatrix::zeros(c, n),
        (TransitionInit::Warm, Some(g)) if g.shape() == (c, n) => g.clone(),
        (TransitionInit::Warm, Some(g)) => {
            return Err(Error::Shape(format!("warm start is {:?}, expected ({c}, {n})", g.shape())))
        }
        (TransitionInit::Warm, None) => DMatrix::from_element(c, n, T::one() / lit(c as f64)),
    };
    let theta = solver.theta_step(&transition);
    let mut model = AlignmentModel {
        theta,
        auxiliary: transition.clone(),
        transition,
        multiplier: DMatrix::zeros(c, n),
        penalty: params.penalty,
        lambda: params.lambda,
        lambda_nuclear: params.lambda_nuclear,
        dim,
        history: Vec::with_capacity(params.max_outer + 1),
        converged: false,
    };
    model.history.push(to_f64(objective(&model, &kern, &graph)?));

    let tau: T = lit(params.lambda_nuclear / params.penalty);
    for _ in 0..params.max_outer {
        model.auxiliary = singular_value_threshold(&(&model.transition + &model.multiplier / solver.penalty), tau);
        model.transition = solver.transition_step(&model.theta, &model.auxiliary, &model.multiplier);
        model.theta = solver.theta_step(&model.transition);
        model.multiplier += (&model.transition - &model.auxiliary) * solver.penalty;

        let value = to_f64(objective(&model, &kern, &graph)?);
        if !value.is_finite() {
            return Err(Error::NonFinite("alignment objective"));
        }
        let prev = *model.history.last().expect("initial objective recorded");
        model.history.push(value);
        let rel = (prev - value).abs() / prev.abs().max(f64::MIN_POSITIVE);
        if rel < params.tol && to_f64(model.consensus_gap()) <= params.tol {
            model.converged = true;
            break;
        }
    }
    if !model.converged {
        warn!(
            "alignment stopped after {} iterations without converging (objective {:.6e})",
            params.max_outer,
            model.history.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(LgscmFit { kernel: kern, graph, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, s: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, s, |_, _| rng.random::<f64>())
    }

    #[test]
    fn gram_closed_forms() {
        let a = DMatrix::from_row_slice(1, 2, &[0.3, -1.0]);
        assert_eq!(gaussian_gram(&a, &a, 0.7).unwrap()[(0, 0)], 1.0);
        let sigma = 0.5f64;
        let b = DMatrix::from_row_slice(1, 2, &[0.3 + sigma * 2f64.sqrt(), -1.0]);
        let k = gaussian_gram(&a, &b, sigma).unwrap()[(0, 0)];
        assert!((k - (-1.0f64).exp()).abs() < 1e-12);
        assert!(gaussian_gram(&a, &b, 0.0).is_err());
    }

    #[test]
    fn gram_transpose_consistency() {
        let a = random(5, 3, 1);
        let b = random(4, 3, 2);
        let ab = gaussian_gram(&a, &b, 0.8).unwrap();
        let ba = gaussian_gram(&b, &a, 0.8).unwrap();
        assert!((ab.clone() - ba.transpose()).amax() < 1e-15);
        for i in 0..5 {
            for j in 0..4 {
                let d2: f64 = (0..3).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum();
                assert!((ab[(i, j)] - (-d2 / (2.0 * 0.64)).exp()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn affinity_collinear_points() {
        let x = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        let g = build_affinity(&x, 1).unwrap();
        assert_eq!(g.degree[1], 2.0);
        assert_eq!(g.affinity, g.affinity.transpose());
        assert!(build_affinity(&x, 3).is_err());
    }

    #[test]
    fn affinity_matches_brute_force() {
        let x = random(15, 2, 3);
        let g = build_affinity(&x, 3).unwrap();
        let nn = |i: usize| {
            let mut d: Vec<(f64, usize)> =
                (0..15).filter(|&j| j != i).map(|j| ((x.row(i) - x.row(j)).norm_squared(), j)).collect();
            d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            d.into_iter().take(3).map(|p| p.1).collect::<Vec<_>>()
        };
        for h in 0..15 {
            for e in 0..15 {
                let want = nn(h).contains(&e) || nn(e).contains(&h);
                assert_eq!(g.affinity[(h, e)] == 1.0, want, "({h}, {e})");
            }
            assert_eq!(g.degree[h], g.affinity.row(h).sum());
        }
    }

    fn zero_model(kern: &KernelModel<f64>, d: usize) -> AlignmentModel<f64> {
        let (r, c, n) = (kern.n_reference(), kern.n_prototypes, kern.n_input());
        AlignmentModel {
            theta: DMatrix::zeros(r, d),
            transition: DMatrix::zeros(c, n),
            auxiliary: DMatrix::zeros(c, n),
            multiplier: DMatrix::zeros(c, n),
            penalty: 1.0,
            lambda: 1.0,
            lambda_nuclear: 0.1,
            dim: d,
            history: vec![],
            converged: false,
        }
    }

    #[test]
    fn zero_projection_gives_zero_terms() {
        let x = random(6, 2, 4);
        let v = random(3, 2, 5);
        let kern = KernelModel::new(&x, &v, SigmaRule::Median).unwrap();
        let graph = build_affinity(&x, 2).unwrap();
        let model = zero_model(&kern, 2);
        assert_eq!(lmsm_value(&model, &kern, &graph).unwrap(), 0.0);
        assert_eq!(gsdm_value(&model, &kern).unwrap(), 0.0);
    }

    #[test]
    fn empty_affinity_gives_zero_lmsm() {
        let x = random(6, 2, 4);
        let v = random(3, 2, 5);
        let kern = KernelModel::new(&x, &v, SigmaRule::Median).unwrap();
        let graph = GraphPair { affinity: DMatrix::zeros(6, 6), degree: DVector::zeros(6) };
        let mut model = zero_model(&kern, 2);
        model.theta = random(9, 2, 6);
        model.transition = random(3, 6, 7);
        assert_eq!(lmsm_value(&model, &kern, &graph).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let x = random(6, 2, 4);
        let v = random(3, 2, 5);
        let kern = KernelModel::new(&x, &v, SigmaRule::Median).unwrap();
        let mut model = zero_model(&kern, 2);
        model.transition = DMatrix::zeros(2, 6);
        assert!(gsdm_value(&model, &kern).is_err());
        assert!(KernelModel::new(&x, &random(3, 3, 1), SigmaRule::Median).is_err());
    }

    #[test]
    fn optimize_reports_orthogonal_theta() {
        let x = random(25, 3, 8);
        let v = random(10, 3, 9);
        let fit = optimize(&x, &v, &LgscmParams::default(), None).unwrap();
        assert!(fit.model.orthogonality_residual(&fit.kernel) < 1e-6);
        assert_eq!(fit.model.theta.shape(), (35, 20));
        assert!(fit.model.history.iter().all(|h| h.is_finite()));
    }

    #[test]
    fn zero_init_and_degenerate_kernel() {
        let x = random(12, 2, 10);
        let v = random(4, 2, 11);
        let params = LgscmParams { init: TransitionInit::Zero, dim: Some(3), ..Default::default() };
        let fit = optimize(&x, &v, &params, None).unwrap();
        assert_eq!(fit.model.dim, 3);
        let same = DMatrix::from_element(8, 2, 1.0);
        assert!(matches!(
            optimize(&same, &same.rows(0, 2).into_owned(), &params, None),
            Err(Error::DegenerateKernel(_))
        ));
    }
}
