//! Small dense linear algebra: just enough for p ≲ 50 regression problems.

/// Solves `A x = b` in place for a symmetric positive definite `A`
/// (row-major `p × p`). Returns `None` if a pivot is not positive.
pub(crate) fn cholesky_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in (j + 1)..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / d;
        }
    }
    let mut x = b.to_vec();
    for i in 0..p {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * p + k] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

/// Gaussian elimination with partial pivoting for a general square system.
/// Returns `None` when the matrix is numerically singular.
pub(crate) fn lu_solve(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..p {
        let piv = (col..p)
            .max_by(|&i, &j| m[i * p + col].abs().total_cmp(&m[j * p + col].abs()))
            .unwrap();
        if m[piv * p + col].abs() <= 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..p {
                m.swap(piv * p + k, col * p + k);
            }
            x.swap(piv, col);
        }
        let d = m[col * p + col];
        for i in (col + 1)..p {
            let f = m[i * p + col] / d;
            if f != 0.0 {
                for k in col..p {
                    m[i * p + k] -= f * m[col * p + k];
                }
                x[i] -= f * x[col];
            }
        }
    }
    for i in (0..p).rev() {
        let mut s = x[i];
        for k in (i + 1)..p {
            s -= m[i * p + k] * x[k];
        }
        x[i] = s / m[i * p + i];
    }
    Some(x)
}

/// Result of a Householder least-squares solve.
pub(crate) enum LeastSquares {
    Solved(Vec<f64>),
    /// Column `dependent` lies (numerically) in the span of the listed
    /// earlier columns.
    RankDeficient {
        dependent: usize,
        span: Vec<usize>,
    },
}

/// Least squares `min ‖X b − y‖₂` via Householder QR on a row-major
/// `n × p` matrix. Columns are processed in order, so the first column that
/// is numerically dependent on its predecessors is the one reported.
pub(crate) fn householder_lstsq(x: &[f64], y: &[f64], n: usize, p: usize) -> LeastSquares {
    // Column-major working copy.
    let mut a: Vec<f64> = (0..p)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| x[i * p + j])
        .collect();
    let col_norms: Vec<f64> = (0..p)
        .map(|j| a[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut qty = y.to_vec();
    let mut r_diag = vec![0.0; p];

    for j in 0..p {
        let (done, rest) = a.split_at_mut(j * n);
        let col = &mut rest[..n];
        let norm = col[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_norms[j].max(f64::MIN_POSITIVE) || col_norms[j] == 0.0 {
            // Recover which earlier columns express this one: solve R c = (Qᵀ x_j)[..j].
            let span = dependent_span(done, col, n, j, &r_diag);
            return LeastSquares::RankDeficient { dependent: j, span };
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        r_diag[j] = alpha;
        col[j] = alpha;
        for c in col[j + 1..].iter_mut() {
            *c = 0.0;
        }
        if vnorm2 > 0.0 {
            for k in (j + 1)..p {
                let ck = &mut rest[(k - j) * n..(k - j + 1) * n];
                let dot: f64 = v.iter().zip(&ck[j..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in ck[j..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&qty[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in qty[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }

    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for k in (i + 1)..p {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    LeastSquares::Solved(b)
}

fn dependent_span(done: &[f64], col: &[f64], n: usize, j: usize, r_diag: &[f64]) -> Vec<usize> {
    // `done` holds the already-triangularised columns 0..j (column-major).
    let mut c = vec![0.0; j];
    for i in (0..j).rev() {
        let mut s = col[i];
        for k in (i + 1)..j {
            s -= done[k * n + i] * c[k];
        }
        c[i] = s / r_diag[i];
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..j).filter(|&k| c[k].abs() > 1e-8 * scale.max(1e-300)).collect()
}
