//! Exact brute-force Euclidean nearest neighbours.

use std::cmp::Ordering;

use nalgebra::{DMatrix, Dim, Matrix, RawStorage, U1};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn sq_dist<T, C, S>(reference: &DMatrix<T>, row: usize, query: &Matrix<T, U1, C, S>) -> T
where
    T: Real,
    C: Dim,
    S: RawStorage<T, U1, C>,
{
    let mut acc = T::zero();
    for j in 0..reference.ncols() {
        let d = reference[(row, j)] - query[j];
        acc += d * d;
    }
    acc
}

/// Indices of the `k` reference rows closest to `query`, nearest first.
/// Equal distances keep the smaller index first. `exclude` drops one
/// reference row (the query's own index when searching within a set).
pub fn knn<T, C, S>(reference: &DMatrix<T>, query: &Matrix<T, U1, C, S>, k: usize, exclude: Option<usize>) -> Result<Vec<usize>>
where
    T: Real,
    C: Dim,
    S: RawStorage<T, U1, C>,
{
    if query.ncols() != reference.ncols() {
        return Err(Error::Shape(format!("query has {} columns, reference {}", query.ncols(), reference.ncols())));
    }
    let available = reference.nrows() - usize::from(exclude.is_some_and(|e| e < reference.nrows()));
    if k > available {
        return Err(Error::TooFewRows { needed: k, available });
    }
    let mut cand: Vec<(T, usize)> = (0..reference.nrows())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (sq_dist(reference, i, query), i))
        .collect();
    let by_dist = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
    if k < cand.len() && k > 0 {
        cand.select_nth_unstable_by(k - 1, by_dist);
        cand.truncate(k);
    }
    cand.sort_by(by_dist);
    cand.truncate(k);
    Ok(cand.into_iter().map(|(_, i)| i).collect())
}

/// Neighbour lists for every row of `x` within `x`, self excluded.
pub fn knn_within<T: Real>(x: &DMatrix<T>, k: usize) -> Result<Vec<Vec<usize>>> {
    (0..x.nrows()).map(|i| knn(x, &x.row(i), k, Some(i))).collect()
}
