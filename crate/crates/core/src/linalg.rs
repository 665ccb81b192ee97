//! Small dense helpers over row-major slices. Dimensions in this crate are
//! tiny (ambient dimension at most 9), so nothing here is blocked or SIMD.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `out = M v` for a row-major `rows x cols` matrix.
pub fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        *o = dot(&m[r * cols..(r + 1) * cols], v);
    }
}

/// `out = M^T v` for a row-major `rows x cols` matrix.
pub fn mat_t_vec(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.len(), rows * cols);
    out[..cols].fill(0.0);
    for r in 0..rows {
        axpy(v[r], &m[r * cols..(r + 1) * cols], &mut out[..cols]);
    }
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n` and is destroyed. Fails with
/// [`Error::Degenerate`] when a pivot falls below `rel_tol` times the
/// largest absolute entry of the original matrix.
pub fn solve_in_place(a: &mut [f64], n: usize, b: &mut [f64], rel_tol: f64) -> Result<()> {
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate);
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
            .unwrap_or(col);
        if a[pivot * n + col].abs() <= rel_tol * scale {
            return Err(Error::Degenerate);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let p = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / p;
            if factor != 0.0 {
                for k in col..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * b[k];
        }
        b[row] = acc / a[row * n + row];
    }
    Ok(())
}

/// Deterministic pairwise sum. The reduction tree depends only on the
/// slice length, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BASE: usize = 64;
    if values.len() <= BASE {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Gram–Schmidt over `seeds` in order, keeping at most `count` vectors after
/// projecting each seed with `project`. Seeds whose residual norm falls below
/// `1e-6` are skipped.
pub fn gram_schmidt<P>(seeds: impl IntoIterator<Item = Vec<f64>>, count: usize, project: P) -> Vec<Vec<f64>>
where
    P: Fn(&[f64], &mut [f64]),
{
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    for seed in seeds {
        if basis.len() == count {
            break;
        }
        let mut v = vec![0.0; seed.len()];
        project(&seed, &mut v);
        for b in &basis {
            let c = dot(&v, b);
            axpy(-c, b, &mut v);
        }
        let len = norm(&v);
        if len > 1e-6 {
            scale(1.0 / len, &mut v);
            basis.push(v);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let mut a = vec![2.0, 1.0, 1.0, 3.0];
        let mut b = vec![3.0, 5.0];
        solve_in_place(&mut a, 2, &mut b, 1e-12).unwrap();
        assert!((b[0] - 0.8).abs() < 1e-14);
        assert!((b[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_degenerate() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        let mut b = vec![1.0, 1.0];
        assert_eq!(solve_in_place(&mut a, 2, &mut b, 1e-12), Err(Error::Degenerate));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn gram_schmidt_skips_dependent_seeds() {
        let seeds = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![1.0, 1.0]];
        let basis = gram_schmidt(seeds, 2, |v, out| out.copy_from_slice(v));
        assert_eq!(basis.len(), 2);
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-15);
    }
}
