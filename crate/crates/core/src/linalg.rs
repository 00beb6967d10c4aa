//! Small dense/banded linear algebra used by the eigensolver and the fits.
//!
//! Everything here is deliberately dependency-free: a pivoted tridiagonal
//! solve for shift-inverted iteration, a cyclic Jacobi eigensolver kept as
//! the brute-force oracle for small problems, and a least-squares line fit.

/// Solve a tridiagonal system with partial pivoting.
///
/// `sub[i]` couples row i+1 to column i, `sup[i]` couples row i to column
/// i+1.  Pivoting introduces one extra superdiagonal of fill-in, which is
/// what makes the solve safe for the nearly singular shifted systems that
/// inverse iteration produces.
pub fn tridiag_solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(sub.len(), n - 1);
    assert_eq!(sup.len(), n - 1);
    assert_eq!(rhs.len(), n);
    // working bands: d0 main, d1 first super, d2 second super
    let mut d0 = diag.to_vec();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n - 1 {
        d1[i] = sup[i];
    }
    let mut b = rhs.to_vec();
    // eliminate the subdiagonal entry of row i+1 with row i, choosing the
    // larger pivot of the two; row i spans columns (i, i+1, i+2)
    for i in 0..n - 1 {
        let ra = [d0[i], d1[i], d2[i]];
        let rb = [sub[i], d0[i + 1], d1[i + 1]];
        let (p, q, bp, bq) = if rb[0].abs() > ra[0].abs() {
            (rb, ra, b[i + 1], b[i])
        } else {
            (ra, rb, b[i], b[i + 1])
        };
        let m = if p[0] != 0.0 { q[0] / p[0] } else { 0.0 };
        d0[i] = p[0];
        d1[i] = p[1];
        d2[i] = p[2];
        b[i] = bp;
        d0[i + 1] = q[1] - m * p[1];
        d1[i + 1] = q[2] - m * p[2];
        d2[i + 1] = 0.0;
        b[i + 1] = bq - m * bp;
    }
    // back substitution
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= d1[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= d2[i] * x[i + 2];
        }
        x[i] = if d0[i] != 0.0 { s / d0[i] } else { 0.0 };
    }
    x
}

/// Multiply a symmetric tridiagonal matrix (diag, off) by a vector.
pub fn tridiag_mul(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = diag[i] * x[i];
        if i > 0 {
            s += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            s += off[i] * x[i + 1];
        }
        y[i] = s;
    }
    y
}

/// Cyclic Jacobi eigensolver for a dense symmetric matrix, used as the
/// brute-force oracle on small instances.  Returns (eigenvalues ascending,
/// eigenvectors as columns).
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off.sqrt() < 1e-13 * (1.0 + frobenius(&m)) {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p][p], m[q][q]);
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vecs: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| (0..n).map(|i| v[i][j]).collect())
        .collect();
    (vals, vecs)
}

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Least-squares fit y = a + b x.  Returns (intercept, slope, rms residual).
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
    let det = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / det;
    let intercept = (sy * sxx - sx * sxy) / det;
    let mut rss = 0.0;
    for (u, v) in x.iter().zip(y) {
        let e = v - (intercept + slope * u);
        rss += e * e;
    }
    (intercept, slope, (rss / n.max(1.0)).sqrt())
}

/// Standard error of the slope of the line fit above.
pub fn slope_stderr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (a, b, _) = line_fit(x, y);
    let xbar: f64 = x.iter().sum::<f64>() / n;
    let ssx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (a + b * u);
            e * e
        })
        .sum();
    if n > 2.0 {
        (rss / (n - 2.0) / ssx).sqrt()
    } else {
        0.0
    }
}
