//! Small dense linear-algebra helpers over slices.
//!
//! Eigen-decompositions and solves go through nalgebra in `f64`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

pub fn norm<T: Real>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn scale<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&x| x * s).collect()
}

/// `a + s * b`
pub fn axpy<T: Real>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

/// Coordinatewise clamp into `[lo, hi]`.
pub fn clamp_to<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    x.iter().zip(lo.iter().zip(hi)).map(|(&v, (&l, &h))| v.max(l).min(h)).collect()
}

pub fn mat_vec<T: Real>(m: &[Vec<T>], x: &[T]) -> Vec<T> {
    m.iter().map(|row| dot(row, x)).collect()
}

fn to_dmatrix<T: Real>(m: &[Vec<T>]) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j].as_f64())
}

/// Eigenvalues (ascending) and matching unit eigenvectors of a symmetric matrix.
pub fn sym_eigen<T: Real>(m: &[Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = m.len();
    let mut a = to_dmatrix(m);
    a = (&a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| T::lit(eig.eigenvalues[i])).collect();
    let vecs = idx
        .iter()
        .map(|&i| (0..n).map(|r| T::lit(eig.eigenvectors[(r, i)])).collect())
        .collect();
    (vals, vecs)
}

pub fn min_eigenvalue<T: Real>(m: &[Vec<T>]) -> T {
    sym_eigen(m).0[0]
}

/// Solves `m x = b`; `None` when singular.
pub fn solve<T: Real>(m: &[Vec<T>], b: &[T]) -> Option<Vec<T>> {
    let a = to_dmatrix(m);
    let rhs = DVector::from_iterator(b.len(), b.iter().map(|x| x.as_f64()));
    a.lu().solve(&rhs).map(|x| x.iter().map(|&v| T::lit(v)).collect())
}

/// Uniform random unit vector.
pub fn random_unit<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-12 {
            return g.iter().map(|x| T::lit(x / len)).collect();
        }
    }
}

/// Distance from `v` to the convex hull of `points`.
///
/// Exact up to rounding: minimizes over affine hulls of every subset of at most `n + 1`
/// points and keeps projections with nonnegative barycentric weights.
pub fn hull_distance<T: Real>(points: &[Vec<T>], v: &[T]) -> T {
    if points.is_empty() {
        return T::infinity();
    }
    let n = v.len();
    let k = points.len();
    let mut best = T::infinity();
    let max_size = k.min(n + 1);
    for mask in 1u64..(1u64 << k.min(20)) {
        let subset: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
        if subset.len() > max_size {
            continue;
        }
        if let Some(d) = affine_projection_distance(points, &subset, v) {
            best = best.min(d);
        }
    }
    best
}

fn affine_projection_distance<T: Real>(points: &[Vec<T>], subset: &[usize], v: &[T]) -> Option<T> {
    let p0 = &points[subset[0]];
    if subset.len() == 1 {
        return Some(norm(&sub(v, p0)));
    }
    let dirs: Vec<Vec<T>> = subset[1..].iter().map(|&i| sub(&points[i], p0)).collect();
    let m = dirs.len();
    let gram: Vec<Vec<T>> = (0..m).map(|i| (0..m).map(|j| dot(&dirs[i], &dirs[j])).collect()).collect();
    let r = sub(v, p0);
    let rhs: Vec<T> = dirs.iter().map(|d| dot(d, &r)).collect();
    let a = to_dmatrix(&gram);
    if a.determinant().abs() < 1e-14 {
        return None;
    }
    let mu = solve(&gram, &rhs)?;
    let tol = T::lit(-1e-12);
    let w0 = T::one() - mu.iter().copied().sum::<T>();
    if w0 < tol || mu.iter().any(|&x| x < tol) {
        return None;
    }
    let mut proj = p0.clone();
    for (d, &c) in dirs.iter().zip(&mu) {
        proj = axpy(&proj, c, d);
    }
    Some(norm(&sub(v, &proj)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted() {
        let m: Vec<Vec<f64>> = vec![vec![2.0, 0.0], vec![0.0, -1.0]];
        let (vals, vecs) = sym_eigen(&m);
        assert!((vals[0] + 1.0).abs() < 1e-12 && (vals[1] - 2.0).abs() < 1e-12);
        assert!((vecs[0][1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_distance_segment_and_triangle() {
        let seg: Vec<Vec<f64>> = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        assert!((hull_distance(&seg, &[0.0, 2.0]) - 2.0).abs() < 1e-12);
        assert!((hull_distance(&seg, &[3.0, 0.0]) - 2.0).abs() < 1e-12);
        let tri: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(hull_distance(&tri, &[0.2, 0.2]) < 1e-12);
        assert!((hull_distance(&tri, &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn solve_small() {
        let x: Vec<f64> = solve(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
