use dsenlg::tree::{best_split, train_tree, Node, TreeParams};
use dsenlg::Class;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn info(counts: &[f64]) -> f64 {
    let n: f64 = counts.iter().sum();
    counts.iter().filter(|&&c| c > 0.0).map(|&c| -(c / n) * (c / n).ln()).sum()
}

/// Every (feature, candidate threshold) pair, gain ratio in natural-log units
/// (the ratio does not depend on the base).
fn exhaustive(x: &DMatrix<f64>, y: &[Class]) -> (usize, f64, f64) {
    let n = x.nrows();
    let pos = y.iter().filter(|c| c.is_minority()).count() as f64;
    let parent = info(&[pos, n as f64 - pos]);
    let mut best = (usize::MAX, f64::NAN, f64::NEG_INFINITY);
    for f in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(f).iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut lp, mut ln, mut rp, mut rn) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                match (x[(i, f)] <= t, y[i].is_minority()) {
                    (true, true) => lp += 1.0,
                    (true, false) => ln += 1.0,
                    (false, true) => rp += 1.0,
                    (false, false) => rn += 1.0,
                }
            }
            let (nl, nr) = (lp + ln, rp + rn);
            let gain = parent - nl / n as f64 * info(&[lp, ln]) - nr / n as f64 * info(&[rp, rn]);
            let ratio = gain.max(0.0) / info(&[nl, nr]);
            if ratio > best.2 + 1e-12 {
                best = (f, t, ratio);
            }
        }
    }
    best
}

#[test]
fn root_split_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = DMatrix::from_fn(40, 2, |_, _| (rng.random::<f64>() * 100.0).round() / 10.0);
        let y: Vec<Class> = (0..40)
            .map(|i| if x[(i, 0)] + 0.5 * x[(i, 1)] + rng.random::<f64>() * 3.0 > 8.0 { Class::Minority } else { Class::Majority })
            .collect();
        if y.iter().all(|c| *c == y[0]) {
            continue;
        }
        let rows: Vec<usize> = (0..40).collect();
        let got = best_split(&x, &y, &rows).unwrap();
        let (f, t, ratio) = exhaustive(&x, &y);
        assert!((got.gain_ratio - ratio).abs() <= 1e-12, "{} vs {ratio}", got.gain_ratio);
        assert_eq!((got.feature, got.threshold), (f, t));

        let tree = train_tree(&x, &y, &TreeParams::default()).unwrap();
        match tree.nodes()[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (f, t)),
            Node::Leaf { .. } => panic!("impure root must split"),
        }
        let batch = tree.predict(&x).unwrap();
        for i in 0..40 {
            assert_eq!(tree.predict_row(&x.row(i)).unwrap().0, batch[i]);
        }
    }
}
