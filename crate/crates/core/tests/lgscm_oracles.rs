use dsenlg::lgscm::{
    build_affinity, gaussian_gram, gsdm_value, lmsm_value, objective, optimize, project, AlignmentModel, GraphPair,
    KernelModel, LgscmParams, SigmaRule, TransitionInit,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(n: usize, s: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, s, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn model(theta: DMatrix<f64>, transition: DMatrix<f64>) -> AlignmentModel<f64> {
    let (c, n) = transition.shape();
    AlignmentModel {
        dim: theta.ncols(),
        theta,
        auxiliary: transition.clone(),
        transition,
        multiplier: DMatrix::zeros(c, n),
        penalty: 1.0,
        lambda: 1.0,
        lambda_nuclear: 0.1,
        history: vec![],
        converged: false,
    }
}

/// `(1/n²) Σ_h Σ_e S_he ‖m_h − z_e‖²` with `m_h` the projected transition
/// columns and `z_e` the projected inputs, all by explicit loops.
fn lmsm_double_sum(m: &AlignmentModel<f64>, k: &KernelModel<f64>, g: &GraphPair<f64>) -> f64 {
    let (r, d) = m.theta.shape();
    let (c, n) = m.transition.shape();
    let mut mcol = vec![vec![0.0; d]; n];
    let mut zcol = vec![vec![0.0; d]; n];
    for h in 0..n {
        for a in 0..d {
            let mut acc_m = 0.0;
            let mut acc_z = 0.0;
            for i in 0..r {
                let mut pv = 0.0;
                for j in 0..c {
                    pv += k.gram_v[(i, j)] * m.transition[(j, h)];
                }
                acc_m += m.theta[(i, a)] * pv;
                acc_z += m.theta[(i, a)] * k.gram_e[(i, h)];
            }
            mcol[h][a] = acc_m;
            zcol[h][a] = acc_z;
        }
    }
    let mut total = 0.0;
    for h in 0..n {
        for e in 0..n {
            let d2: f64 = (0..d).map(|a| (mcol[h][a] - zcol[e][a]).powi(2)).sum();
            total += g.affinity[(h, e)] * d2;
        }
    }
    total / (n * n) as f64
}

#[test]
fn lmsm_trace_form_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = 3 + trial % 8;
        let c = 1 + trial % 5;
        let s = 1 + trial % 3;
        let x = random(n, s, &mut rng);
        let v = random(c, s, &mut rng);
        let kern = KernelModel::new(&x, &v, SigmaRule::Median).unwrap();
        let graph = build_affinity(&x, 1 + trial % 2).unwrap();
        let m = model(random(c + n, 1 + trial % 4, &mut rng), random(c, n, &mut rng));
        let fast = lmsm_value(&m, &kern, &graph).unwrap();
        let slow = lmsm_double_sum(&m, &kern, &graph);
        assert!((fast - slow).abs() <= 1e-9, "trial {trial}: {fast} vs {slow}");
        assert!(fast >= -1e-12);
    }
}

#[test]
fn identical_sets_with_identity_transition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random(6, 2, &mut rng);
    let kern = KernelModel::new(&x, &x, SigmaRule::Median).unwrap();
    let graph = build_affinity(&x, 2).unwrap();
    let m = model(random(12, 3, &mut rng), DMatrix::identity(6, 6));
    assert!(gsdm_value(&m, &kern).unwrap() < 1e-20);
    // With Θᵀ Ψ_v 𝒢 = Θᵀ Ψ_e the local term is the plain graph-weighted spread.
    let z = m.theta.transpose() * &kern.gram_e;
    let mut want = 0.0;
    for h in 0..6 {
        for e in 0..6 {
            want += graph.affinity[(h, e)] * (z.column(h) - z.column(e)).norm_squared();
        }
    }
    assert!((lmsm_value(&m, &kern, &graph).unwrap() - want / 36.0).abs() < 1e-12);

    // 𝒢 = I aligns the sets exactly at the start. The local term is not
    // minimal there, so iterations trade a little mean gap for smoothness;
    // a heavy global weight keeps that gap near zero.
    let eye = DMatrix::identity(6, 6);
    let params = LgscmParams { lambda_nuclear: 0.0, max_outer: 0, ..Default::default() };
    let start = optimize(&x, &x, &params, Some(&eye)).unwrap();
    assert!(gsdm_value(&start.model, &start.kernel).unwrap() <= 1e-8);
    let params = LgscmParams { lambda: 100.0, lambda_nuclear: 0.0, ..Default::default() };
    let fit = optimize(&x, &x, &params, Some(&eye)).unwrap();
    assert!(gsdm_value(&fit.model, &fit.kernel).unwrap() <= 1e-6);
}

#[test]
fn gsdm_one_dimensional_toy() {
    // Reference row 0 carries the raw 1-D values, Θ = e₀ picks it out.
    let n = 5;
    let dm = 0.7;
    let xs = [0.1, -0.4, 1.3, 0.0, 2.2];
    let mut gram_v = DMatrix::zeros(2 * n, n);
    let mut gram_e = DMatrix::zeros(2 * n, n);
    for j in 0..n {
        gram_v[(0, j)] = xs[j] + dm;
        gram_e[(0, j)] = xs[j];
    }
    let kern = KernelModel {
        reference: DMatrix::zeros(2 * n, 1),
        sigma: 1.0,
        gram: DMatrix::identity(2 * n, 2 * n),
        gram_v,
        gram_e,
        n_prototypes: n,
    };
    let mut theta = DMatrix::zeros(2 * n, 1);
    theta[(0, 0)] = 1.0;
    let m = model(theta, DMatrix::identity(n, n));
    let got = gsdm_value(&m, &kern).unwrap();
    assert!((got - n as f64 * dm * dm).abs() < 1e-12);

    let mut permuted = m.clone();
    permuted.transition = DMatrix::identity(n, n).select_columns(&[3, 1, 4, 0, 2]);
    assert!((gsdm_value(&permuted, &kern).unwrap() - got).abs() < 1e-12);
}

fn blobs(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || {
        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let x = DMatrix::from_fn(40, 2, |_, _| normal());
    let mut v = DMatrix::from_fn(15, 2, |_, _| normal());
    v.column_mut(0).add_scalar_mut(3.0);
    (x, v)
}

#[test]
fn shifted_blob_discrepancy_halves() {
    let (x, v) = blobs(21);
    let params = LgscmParams::default();
    let start = optimize(&x, &v, &LgscmParams { max_outer: 0, ..params.clone() }, None).unwrap();
    let end = optimize(&x, &v, &params, None).unwrap();
    let before = gsdm_value(&start.model, &start.kernel).unwrap();
    let after = gsdm_value(&end.model, &end.kernel).unwrap();
    assert!(after <= 0.5 * before, "{before} -> {after}");
    assert!(end.model.orthogonality_residual(&end.kernel) <= 1e-6);
    assert!(end.model.history.last().unwrap() <= &end.model.history[0]);
}

#[test]
fn objective_never_ends_above_its_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let x = random(20, 3, &mut rng);
        let v = random(8, 3, &mut rng);
        let fit = optimize(&x, &v, &LgscmParams::default(), None).unwrap();
        assert!(fit.model.history.last().unwrap() <= &(fit.model.history[0] + 1e-12), "{:?}", fit.model.history);
        assert!(fit.model.orthogonality_residual(&fit.kernel) <= 1e-6);
    }
}

#[test]
fn pure_local_term_when_weights_vanish() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random(18, 2, &mut rng);
    let v = random(6, 2, &mut rng);
    let params = LgscmParams { lambda: 0.0, lambda_nuclear: 0.0, ..Default::default() };
    let fit = optimize(&x, &v, &params, None).unwrap();
    let obj = objective(&fit.model, &fit.kernel, &fit.graph).unwrap();
    assert_eq!(obj, lmsm_value(&fit.model, &fit.kernel, &fit.graph).unwrap());
}

#[test]
fn projection_matches_explicit_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let x = random(15, 3, &mut rng);
    let v = random(5, 3, &mut rng);
    let fit = optimize(&x, &v, &LgscmParams { dim: Some(4), init: TransitionInit::Zero, ..Default::default() }, None)
        .unwrap();
    let out = project(&fit.model, &fit.kernel, &v).unwrap();
    let want = fit.model.theta.transpose() * &fit.kernel.gram_v;
    assert!((&out - &want).amax() < 1e-12);

    let q = random(3, 3, &mut rng);
    let got = fit.projector().project(&q).unwrap();
    let sigma = fit.kernel.sigma;
    for col in 0..3 {
        for a in 0..4 {
            let mut acc = 0.0;
            for i in 0..fit.kernel.reference.nrows() {
                let d2: f64 = (0..3).map(|f| (fit.kernel.reference[(i, f)] - q[(col, f)]).powi(2)).sum();
                acc += fit.model.theta[(i, a)] * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            assert!((got[(a, col)] - acc).abs() < 1e-12);
        }
    }
    let same_row = fit.projector().project(&v.rows(2, 1).into_owned()).unwrap();
    assert!((same_row.column(0) - out.column(2)).amax() < 1e-12);
    assert!(project(&fit.model, &fit.kernel, &random(2, 2, &mut rng)).is_err());
}

#[test]
fn gram_is_positive_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random(20, 4, &mut rng);
    let g = gaussian_gram(&a, &a, 0.9).unwrap();
    let eig = g.clone().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| l > -1e-8));
    assert_eq!(g.clone(), g.transpose());
}
