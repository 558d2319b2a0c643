//! Dense and sparse numeric kernels.
//!
//! Every kernel is deterministic: per-output-entry summation order is fixed,
//! and threads only ever split work by output row.

mod dense;
mod sparse;

pub use dense::DenseMatrix;
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

pub fn spmm(s: &SparseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
    s.spmm(d)
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.matmul(b)
}

pub fn relu(d: &DenseMatrix) -> DenseMatrix {
    d.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Softmax over each row, shifted by the row maximum.
pub fn row_softmax(d: &DenseMatrix) -> DenseMatrix {
    let mut out = d.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Elementwise mean of a stack of equally shaped matrices.
pub fn mean_over_first_axis(stack: &[DenseMatrix]) -> Result<DenseMatrix> {
    let first = stack
        .first()
        .ok_or_else(|| Error::shape("mean over an empty stack"))?;
    let mut acc = first.clone();
    for m in &stack[1..] {
        acc.add_assign(m)?;
    }
    let r = stack.len() as f64;
    for v in acc.data_mut() {
        *v /= r;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random_dense(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_sparse(rng: &mut ChaCha8Rng, r: usize, c: usize, density: f64) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..r {
            for j in 0..c {
                if rng.random_bool(density) {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseMatrix::from_triplets(r, c, t).unwrap()
    }

    #[test]
    fn spmm_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = random_dense(&mut rng, 5, 3);
        assert_eq!(spmm(&SparseMatrix::identity(5), &d).unwrap(), d);
        assert_eq!(
            spmm(&SparseMatrix::zeros(5, 5), &d).unwrap(),
            DenseMatrix::zeros(5, 3)
        );
    }

    #[test]
    fn spmm_rejects_bad_shapes() {
        let s = SparseMatrix::identity(3);
        assert!(spmm(&s, &DenseMatrix::zeros(4, 2)).is_err());
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=8 {
            let s = random_sparse(&mut rng, n, n, 0.4);
            let d = random_dense(&mut rng, n, 3);
            let got = spmm(&s, &d).unwrap();
            let want = naive_matmul(&s.to_dense(), &d);
            assert!(got.max_abs_diff(&want) <= 1e-12);
        }
    }

    #[test]
    fn matmul_cases() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(matmul(&a, &DenseMatrix::identity(2)).unwrap(), a);
        let six = matmul(
            &DenseMatrix::from_rows(&[vec![2.0]]),
            &DenseMatrix::from_rows(&[vec![3.0]]),
        )
        .unwrap();
        assert_eq!(six.data(), &[6.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_dense(&mut rng, 5, 4);
        let b = random_dense(&mut rng, 4, 3);
        assert!(matmul(&a, &b).unwrap().max_abs_diff(&naive_matmul(&a, &b)) <= 1e-12);
        assert!(matmul(&b, &a).is_err());
    }

    #[test]
    fn transposed_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_dense(&mut rng, 6, 4);
        let b = random_dense(&mut rng, 6, 3);
        let c = random_dense(&mut rng, 2, 4);
        assert!(a.t_matmul(&b).unwrap().max_abs_diff(&naive_matmul(&a.transpose(), &b)) <= 1e-12);
        assert!(a.matmul_t(&c).unwrap().max_abs_diff(&naive_matmul(&a, &c.transpose())) <= 1e-12);
    }

    #[test]
    fn elementwise_helpers() {
        let r = relu(&DenseMatrix::from_rows(&[vec![-1.0, 2.0]]));
        assert_eq!(r.data(), &[0.0, 2.0]);
        let s = row_softmax(&DenseMatrix::from_rows(&[vec![0.0, 0.0]]));
        assert_eq!(s.data(), &[0.5, 0.5]);
        let m = mean_over_first_axis(&[
            DenseMatrix::from_rows(&[vec![2.0]]),
            DenseMatrix::from_rows(&[vec![4.0]]),
        ])
        .unwrap();
        assert_eq!(m.data(), &[3.0]);
        assert!(mean_over_first_axis(&[]).is_err());
    }

    #[test]
    fn large_kernels_are_bitwise_repeatable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random_sparse(&mut rng, 300, 300, 0.05);
        let d = random_dense(&mut rng, 300, 64);
        let w = random_dense(&mut rng, 64, 32);
        let first = spmm(&s, &d).unwrap().matmul(&w).unwrap();
        for _ in 0..3 {
            assert_eq!(spmm(&s, &d).unwrap().matmul(&w).unwrap(), first);
        }
    }

    #[test]
    fn sparse_transpose_and_triplets() {
        let s = SparseMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (0, 0, 0.0)],
        )
        .unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(1, 2), 1.5);
        let t = s.transpose();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.get(2, 1), 1.5);
        assert_eq!(t.get(1, 0), 2.0);
        assert_eq!(t.transpose(), s);
    }

    proptest! {
        #[test]
        fn spmm_agrees_with_dense_product(seed in any::<u64>(), n in 1usize..8, d in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sparse(&mut rng, n, n, 0.5);
            let x = random_dense(&mut rng, n, d);
            let got = spmm(&s, &x).unwrap();
            let want = matmul(&s.to_dense(), &x).unwrap();
            prop_assert!(got.max_abs_diff(&want) <= 1e-12);
        }

        #[test]
        fn softmax_rows_sum_to_one_and_shift_invariant(
            row in proptest::collection::vec(-30.0f64..30.0, 1..10),
            shift in -50.0f64..50.0,
        ) {
            let x = DenseMatrix::from_rows(std::slice::from_ref(&row));
            let shifted = x.map(|v| v + shift);
            let a = row_softmax(&x);
            let b = row_softmax(&shifted);
            prop_assert!((a.sum() - 1.0).abs() <= 1e-12);
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }
}
