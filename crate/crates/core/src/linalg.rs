//! Small dense linear algebra: LU factorization with partial pivoting,
//! sized for desk-scale networks (tens of unknowns).

/// Dense row-major square matrix solve: returns x with `a * x = b`.
/// `a` is consumed as scratch. Returns `None` when the matrix is singular
/// to working precision.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = a[perm[col]][col].abs();
        for (r, &pr) in perm.iter().enumerate().skip(col + 1) {
            let v = a[pr][col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < 1e-12 {
            return None;
        }
        perm.swap(col, pivot_row);
        let prow = perm[col];
        let pivot = a[prow][col];
        for &r in perm.iter().skip(col + 1) {
            let factor = a[r][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[r][col] = 0.0;
            for k in col + 1..n {
                a[r][k] -= factor * a[prow][k];
            }
            b[r] -= factor * b[prow];
        }
    }

    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let prow = perm[col];
        let mut acc = b[prow];
        for k in col + 1..n {
            acc -= a[prow][k] * x[k];
        }
        x[col] = acc / a[prow][col];
    }
    Some(x)
}
