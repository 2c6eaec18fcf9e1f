use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Real};

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub(crate) fn sym_eigen_ascending<T: Real>(a: &DMatrix<T>) -> (DVector<T>, DMatrix<T>) {
    let sym = (a + a.transpose()) * lit::<T>(0.5);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Singular-value soft-thresholding: the proximal map of `tau · ‖·‖_*`.
pub(crate) fn singular_value_threshold<T: Real>(a: &DMatrix<T>, tau: T) -> DMatrix<T> {
    let svd = a.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => unreachable!("svd requested with both factors"),
    };
    let shrunk = svd.singular_values.map(|s| (s - tau).max(T::zero()));
    let mut us = u;
    for (j, s) in shrunk.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    us * v_t
}

pub(crate) fn nuclear_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.singular_values().sum()
}
