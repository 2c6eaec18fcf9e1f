//! Division and fusion: majority rows are ordered by a feature-weighted
//! index and cut into `Q = ⌊n₁/n₂⌋` consecutive blocks of `n₂`, each joined
//! with every minority row.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RemainderRule {
    /// The `n₁ - Q·n₂` highest-index majority rows are left out.
    #[default]
    Drop,
    /// They join the last subset.
    AppendToLast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSubset {
    pub subset_index: usize,
    pub majority_indices: Vec<usize>,
    pub minority_indices: Vec<usize>,
}

impl BalancedSubset {
    /// Minority rows first, then this subset's majority rows.
    pub fn rows(&self) -> Vec<usize> {
        self.minority_indices.iter().chain(&self.majority_indices).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub subsets: Vec<BalancedSubset>,
    /// Majority rows assigned to no subset.
    pub dropped: Vec<usize>,
    /// Majority rows whose shifted feature sum was zero (index defined as 0).
    pub zero_weight_rows: Vec<usize>,
}

/// `Σ x_f² / Σ x_f`, i.e. the sum of features weighted by their own share.
/// Returns 0 when the features sum to 0.
pub fn feature_weight_index<T: Real>(x: &[T]) -> T {
    let total = x.iter().fold(T::zero(), |a, &b| a + b);
    if total == T::zero() {
        return T::zero();
    }
    x.iter().fold(T::zero(), |a, &b| a + b * b) / total
}

/// `max(1, ⌊n₁/n₂⌋)`.
pub fn subset_count(n_majority: usize, n_minority: usize) -> usize {
    (n_majority / n_minority.max(1)).max(1)
}

/// Builds the balanced subsets of `train`. Each feature is shifted by its
/// training minimum before indexing so the weights stay non-negative; ties
/// in the index keep ascending row order.
pub fn divide_and_fuse<T: Real>(train: &Dataset<T>, remainder: RemainderRule) -> Partition {
    let x = train.features();
    let minority = train.minority_indices();
    let majority = train.majority_indices();
    let mins: Vec<T> = x.column_iter().map(|c| c.min()).collect();

    let mut zero_weight_rows = Vec::new();
    let mut keyed: Vec<(T, usize)> = majority
        .iter()
        .map(|&i| {
            let shifted: Vec<T> = x.row(i).iter().zip(&mins).map(|(&v, &m)| v - m).collect();
            if shifted.iter().all(|v| *v == T::zero()) {
                zero_weight_rows.push(i);
            }
            (feature_weight_index(&shifted), i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let sorted: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();

    let n2 = minority.len();
    let q = subset_count(sorted.len(), n2);
    let mut subsets: Vec<BalancedSubset> = (0..q)
        .map(|k| {
            let end = ((k + 1) * n2).min(sorted.len());
            BalancedSubset {
                subset_index: k,
                majority_indices: sorted[k * n2..end].to_vec(),
                minority_indices: minority.clone(),
            }
        })
        .collect();
    let used = (q * n2).min(sorted.len());
    let mut dropped = sorted[used..].to_vec();
    if remainder == RemainderRule::AppendToLast {
        if let Some(last) = subsets.last_mut() {
            last.majority_indices.append(&mut dropped);
        }
    }
    Partition { subsets, dropped, zero_weight_rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Class;
    use nalgebra::DMatrix;

    fn dataset(values: &[f64], labels: &[Class]) -> Dataset<f64> {
        Dataset::new("t", DMatrix::from_column_slice(values.len(), 1, values), labels.to_vec(), vec!["x".into()], "p", "n")
            .unwrap()
    }

    #[test]
    fn weight_index_hand_values() {
        assert_eq!(feature_weight_index(&[2.0, 2.0]), 2.0);
        assert_eq!(feature_weight_index(&[1.0, 3.0]), 2.5);
        assert_eq!(feature_weight_index(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(570, 178), 3);
        assert_eq!(subset_count(100, 50), 2);
        assert_eq!(subset_count(10, 10), 1);
    }

    #[test]
    fn positional_split_with_and_without_remainder() {
        use Class::*;
        // Majority values sorted ascending are rows 2..8 in order; minority rows 0 and 1.
        let vals = [9.0, 9.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let labels = [Minority, Minority, Majority, Majority, Majority, Majority, Majority, Majority, Majority];
        let p = divide_and_fuse(&dataset(&vals, &labels), RemainderRule::Drop);
        let blocks: Vec<Vec<usize>> = p.subsets.iter().map(|s| s.majority_indices.clone()).collect();
        assert_eq!(blocks, vec![vec![2, 3], vec![4, 5], vec![6, 7]]);
        assert_eq!(p.dropped, vec![8]);
        assert!(p.subsets.iter().all(|s| s.minority_indices == vec![0, 1]));
        assert_eq!(p.zero_weight_rows, vec![2]);

        let p = divide_and_fuse(&dataset(&vals, &labels), RemainderRule::AppendToLast);
        assert_eq!(p.subsets[2].majority_indices, vec![6, 7, 8]);
        assert!(p.dropped.is_empty());
    }

    #[test]
    fn equal_keys_keep_row_order() {
        use Class::*;
        let vals = [0.0, 1.0, 1.0, 1.0, 1.0];
        let labels = [Minority, Majority, Majority, Majority, Majority];
        let p = divide_and_fuse(&dataset(&vals, &labels), RemainderRule::Drop);
        let order: Vec<usize> = p.subsets.iter().flat_map(|s| s.majority_indices.clone()).collect();
        assert_eq!(order, vec![1, 2, 3, 4]);
    }
}
