//! Confusion metrics, kappa agreement, average ranks, Friedman and Holm.

use serde::{Deserialize, Serialize};

use crate::dataset::Class;
use crate::error::{Error, Result};

/// Counts with the minority class as positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: f64,
    pub f_measure: f64,
    pub g_mean: f64,
    pub mcc: f64,
    pub sen: f64,
    pub spe: f64,
    pub pre: f64,
    pub rec: f64,
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("label vectors of length {a} and {b}")));
    }
    Ok(())
}

pub fn confusion(y_true: &[Class], y_pred: &[Class]) -> Result<Confusion> {
    check_len(y_true.len(), y_pred.len())?;
    let mut c = Confusion::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t.is_minority(), p.is_minority()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// AUC here is the two-point balanced accuracy `(sen + spe) / 2`.
pub fn metrics(c: &Confusion) -> MetricSet {
    let sen = ratio(c.tp, c.tp + c.fn_);
    let spe = ratio(c.tn, c.tn + c.fp);
    let pre = ratio(c.tp, c.tp + c.fp);
    let rec = sen;
    let f_measure = if pre + rec == 0.0 { 0.0 } else { 2.0 * pre * rec / (pre + rec) };
    let marginals = [c.tp + c.fp, c.tp + c.fn_, c.tn + c.fp, c.tn + c.fn_];
    let mcc = if marginals.contains(&0) {
        0.0
    } else {
        let den: f64 = marginals.iter().map(|&m| m as f64).product::<f64>().sqrt();
        let num = c.tp as f64 * c.tn as f64 - c.fp as f64 * c.fn_ as f64;
        (num / den).clamp(-1.0, 1.0)
    };
    MetricSet { auc: (sen + spe) / 2.0, f_measure, g_mean: (sen * spe).sqrt(), mcc, sen, spe, pre, rec }
}

/// Cohen's kappa between two label vectors; 1 when chance agreement is 1.
pub fn cohen_kappa(a: &[Class], b: &[Class]) -> Result<f64> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::InvalidArgument("kappa of empty predictions".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|c| c.is_minority()).count() as f64 / n;
    let pb = b.iter().filter(|c| c.is_minority()).count() as f64 / n;
    let po = agree / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if pe >= 1.0 {
        return Ok(1.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Midranks of one row of scores; rank 1 is the best.
pub fn rank_row(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        let o = scores[i].partial_cmp(&scores[j]).unwrap_or(std::cmp::Ordering::Equal);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut s = 0;
    while s < order.len() {
        let mut e = s + 1;
        while e < order.len() && scores[order[e]] == scores[order[s]] {
            e += 1;
        }
        let mid = (s + 1 + e) as f64 / 2.0;
        for &i in &order[s..e] {
            ranks[i] = mid;
        }
        s = e;
    }
    ranks
}

/// Per-method mean rank over datasets. `results[method][dataset]`.
pub fn average_ranks(results: &[Vec<f64>], higher_is_better: bool) -> Result<Vec<f64>> {
    let k = results.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no methods to rank".into()));
    }
    let n = results[0].len();
    if results.iter().any(|r| r.len() != n) {
        return Err(Error::Shape("methods have differing dataset counts".into()));
    }
    if results.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("missing or non-finite cell in results".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no datasets to rank".into()));
    }
    let mut sums = vec![0.0; k];
    for d in 0..n {
        let row: Vec<f64> = results.iter().map(|r| r[d]).collect();
        for (s, r) in sums.iter_mut().zip(rank_row(&row, higher_is_better)) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

/// Friedman chi-square on average ranks and its upper-tail p-value with
/// `k - 1` degrees of freedom.
pub fn friedman_test(ranks: &[f64], n_datasets: usize) -> Result<(f64, f64)> {
    let k = ranks.len();
    if k < 2 || n_datasets < 2 {
        return Err(Error::InvalidArgument(format!("friedman needs k >= 2 and N >= 2 (k={k}, N={n_datasets})")));
    }
    let (kf, nf) = (k as f64, n_datasets as f64);
    let sum_sq: f64 = ranks.iter().map(|r| r * r).sum();
    let stat = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    Ok((stat, chi_square_sf(stat, kf - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolmOutcome {
    pub p_value: f64,
    /// Position in ascending p order, from 1.
    pub step: usize,
    pub threshold: f64,
    pub reject: bool,
}

/// Step-down Holm procedure. Results are returned in input order.
pub fn holm_test(p_values: &[f64], alpha: f64) -> Result<Vec<HolmOutcome>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("p-value {p} outside [0,1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].partial_cmp(&p_values[j]).unwrap().then(i.cmp(&j)));
    let mut out = vec![HolmOutcome { p_value: 0.0, step: 0, threshold: 0.0, reject: false }; m];
    let mut rejecting = true;
    for (pos, &i) in order.iter().enumerate() {
        let threshold = alpha / (m - pos) as f64;
        rejecting = rejecting && p_values[i] < threshold;
        out[i] = HolmOutcome { p_value: p_values[i], step: pos + 1, threshold, reject: rejecting };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlComparison {
    pub method: usize,
    pub z: f64,
    pub p_value: f64,
    pub holm: HolmOutcome,
}

/// Rank-difference z tests of every method against `control`, two-sided,
/// corrected with Holm.
pub fn holm_versus_control(ranks: &[f64], control: usize, n_datasets: usize, alpha: f64) -> Result<Vec<ControlComparison>> {
    let k = ranks.len();
    if control >= k || k < 2 || n_datasets < 1 {
        return Err(Error::InvalidArgument("invalid control comparison".into()));
    }
    let se = ((k * (k + 1)) as f64 / (6.0 * n_datasets as f64)).sqrt();
    let others: Vec<usize> = (0..k).filter(|&i| i != control).collect();
    let zs: Vec<f64> = others.iter().map(|&i| (ranks[i] - ranks[control]) / se).collect();
    let ps: Vec<f64> = zs.iter().map(|z| erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)).collect();
    let holm = holm_test(&ps, alpha)?;
    Ok(others
        .into_iter()
        .zip(zs)
        .zip(ps)
        .zip(holm)
        .map(|(((method, z), p_value), holm)| ControlComparison { method, z, p_value, holm })
        .collect())
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let a = C[1..].iter().enumerate().fold(C[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let gln = ln_gamma(a);
    if x < a + 1.0 {
        let (mut sum, mut del, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * (-x + a * x.ln() - gln).exp()).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        ((-x + a * x.ln() - gln).exp() * h).clamp(0.0, 1.0)
    }
}

/// Chi-square survival function.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    gamma_q(df / 2.0, x / 2.0)
}

/// Complementary error function for `x >= 0` via `Q(1/2, x²)`.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else {
        gamma_q(0.5, x * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hand_example() {
        let m = metrics(&Confusion { tp: 40, fn_: 10, tn: 25, fp: 5 });
        assert!(close(m.sen, 0.8, 1e-12));
        assert!(close(m.spe, 5.0 / 6.0, 1e-12));
        assert!(close(m.auc, 0.8167, 5e-5));
        assert!(close(m.g_mean, 0.8165, 5e-5));
        assert!(close(m.pre, 0.8889, 5e-5));
        assert!(close(m.f_measure, 0.8421, 5e-5));
        // 950 / sqrt(45·50·30·35)
        assert!(close(m.mcc, 0.6181, 5e-5));
    }

    #[test]
    fn degenerate_conventions() {
        let m = metrics(&Confusion { tp: 0, fn_: 10, tn: 30, fp: 0 });
        assert_eq!((m.sen, m.auc, m.g_mean, m.f_measure, m.mcc, m.pre), (0.0, 0.5, 0.0, 0.0, 0.0, 0.0));
        let m = metrics(&Confusion { tp: 10, fn_: 0, tn: 30, fp: 0 });
        assert_eq!((m.auc, m.f_measure, m.g_mean, m.mcc), (1.0, 1.0, 1.0, 1.0));
        let m = metrics(&Confusion::default());
        assert_eq!(m.auc, 0.0);
    }

    #[test]
    fn confusion_counts() {
        let t = [Minority, Minority, Majority, Majority];
        let p = [Minority, Majority, Minority, Majority];
        assert_eq!(confusion(&t, &p).unwrap(), Confusion { tp: 1, fn_: 1, fp: 1, tn: 1 });
        assert!(confusion(&t, &p[..3]).is_err());
    }

    #[test]
    fn kappa_extremes() {
        let a = [Minority, Majority, Minority, Majority];
        let b = [Majority, Minority, Majority, Minority];
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        assert!(close(cohen_kappa(&a, &b).unwrap(), -1.0, 1e-15));
        assert_eq!(cohen_kappa(&[Majority; 3], &[Majority; 3]).unwrap(), 1.0);
    }

    #[test]
    fn ranks_and_midranks() {
        assert_eq!(average_ranks(&[vec![0.9; 4], vec![0.1; 4]], true).unwrap(), vec![1.0, 2.0]);
        assert_eq!(rank_row(&[0.5, 0.5, 0.1], true), vec![1.5, 1.5, 3.0]);
        assert_eq!(rank_row(&[0.5, 0.5, 0.1], false), vec![2.5, 2.5, 1.0]);
        assert!(average_ranks(&[vec![f64::NAN], vec![1.0]], true).is_err());
    }

    #[test]
    fn friedman_closed_form() {
        let (s, p) = friedman_test(&[1.0, 2.0, 3.0], 10).unwrap();
        assert!(close(s, 20.0, 1e-12));
        assert!(close(p, (-10.0f64).exp(), 1e-14));
        let (s, p) = friedman_test(&[2.0, 2.0, 2.0], 10).unwrap();
        assert_eq!((s, p), (0.0, 1.0));
        assert!(friedman_test(&[1.0], 3).is_err());
    }

    #[test]
    fn holm_ladder() {
        let out = holm_test(&[1.0; 7], 0.05).unwrap();
        let mut th: Vec<f64> = out.iter().map(|o| o.threshold).collect();
        th.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, t) in th.iter().enumerate() {
            assert!(close(*t, 0.05 / (7 - i) as f64, 1e-15));
        }
        assert!(out.iter().all(|o| !o.reject));
        let out = holm_test(&[0.04, 0.001], 0.05).unwrap();
        assert!(out[0].reject && out[1].reject);
        assert_eq!(out[1].threshold, 0.025);
        let out = holm_test(&[0.03, 0.001, 0.002], 0.05).unwrap();
        assert!(out[1].reject && out[2].reject && out[0].reject);
        let out = holm_test(&[0.001, 0.03, 0.04], 0.05).unwrap();
        assert!(out[0].reject && !out[1].reject && !out[2].reject);
        assert!(holm_test(&[1.5], 0.05).is_err());
    }

    #[test]
    fn special_functions() {
        // Q(1, x) = e^{-x}; erfc(1) from tables.
        for x in [0.1, 1.0, 3.0, 20.0] {
            assert!(close(gamma_q(1.0, x), (-x).exp(), 1e-13));
        }
        assert!(close(erfc(1.0), 0.157_299_207_050_285_13, 1e-12));
        assert!(close(erfc(0.0), 1.0, 1e-15));
        assert!(close(chi_square_sf(3.841_458_820_694_124, 1.0), 0.05, 1e-10));
        assert!(close(ln_gamma(5.0), 24f64.ln(), 1e-12));
    }
}
