/// Strided view of a matrix operand: `(data, row_stride, col_stride)`.
pub(crate) type Operand<'a> = (&'a [f64], usize, usize);

fn max_index(rows: usize, cols: usize, rs: usize, cs: usize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs
    }
}

/// `C = A·B + beta·C` with `A: m×k`, `B: k×n`, `C: m×n` row-major (stride `rsc`).
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: Operand, b: Operand, beta: f64, c: &mut [f64], rsc: usize) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(k == 0 || max_index(m, k, a.1, a.2) < a.0.len(), "gemm: A out of bounds");
    assert!(k == 0 || max_index(k, n, b.1, b.2) < b.0.len(), "gemm: B out of bounds");
    assert!(max_index(m, n, rsc, 1) < c.len(), "gemm: C out of bounds");
    // SAFETY: every index the kernel touches was bounds-checked above and
    // `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn matches_triple_loop_including_transposes() {
        let (m, k, n) = (3, 4, 2);
        let a: Vec<f64> = (0..m * k).map(|v| v as f64 * 0.5 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|v| (v as f64).sin()).collect();
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, (&a, k, 1), (&b, n, 1), 0.0, &mut c, n);
        assert_eq!(c, naive(m, k, n, &a, &b));

        // Aᵀ·A through strides, against an explicit transpose.
        let at: Vec<f64> = (0..k).flat_map(|p| (0..m).map(move |i| (i, p))).map(|(i, p)| a[i * k + p]).collect();
        let mut g = vec![0.0; k * k];
        gemm(k, m, k, (&a, 1, k), (&a, k, 1), 0.0, &mut g, k);
        let want = naive(k, m, k, &at, &a);
        for (x, y) in g.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
