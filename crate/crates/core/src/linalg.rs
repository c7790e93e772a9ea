//! Dense kernels for the small symmetric matrices (N <= 6) that appear cellwise.
//!
//! Matrices are row-major slices of length `n * n`.

pub const MAX_DIM: usize = 6;

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascend; eigenvector `k`
/// is column `k` of `vecs`.
pub fn sym_eigen(a: &[f64], n: usize, vals: &mut [f64], vecs: &mut [f64]) {
    debug_assert!(n <= MAX_DIM && a.len() >= n * n);
    match n {
        0 => {}
        1 => {
            vals[0] = a[0];
            vecs[0] = 1.0;
        }
        2 => eigen2(a, vals, vecs),
        _ => jacobi(a, n, vals, vecs),
    }
}

fn eigen2(a: &[f64], vals: &mut [f64], vecs: &mut [f64]) {
    let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
    let mean = 0.5 * (p + r);
    let half = 0.5 * (p - r);
    let rad = half.hypot(q);
    vals[0] = mean - rad;
    vals[1] = mean + rad;
    if rad == 0.0 {
        vecs[..4].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        return;
    }
    // angle of the top eigenvector, stable for all sign patterns
    let theta = 0.5 * q.atan2(half);
    let (s, c) = theta.sin_cos();
    // columns: [v_min, v_max]
    vecs[0] = -s;
    vecs[2] = c;
    vecs[1] = c;
    vecs[3] = s;
}

fn jacobi(a: &[f64], n: usize, vals: &mut [f64], vecs: &mut [f64]) {
    let mut m = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    for i in 0..n {
        for j in 0..n {
            vecs[i * n + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    let scale: f64 = m[..n * n].iter().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vecs[k * n + p];
                    let vkq = vecs[k * n + q];
                    vecs[k * n + p] = c * vkp - s * vkq;
                    vecs[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    // sort ascending
    let mut idx = [0usize; MAX_DIM];
    for (i, v) in idx.iter_mut().enumerate().take(n) {
        *v = i;
    }
    idx[..n].sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]));
    let old = {
        let mut o = [0.0; MAX_DIM * MAX_DIM];
        o[..n * n].copy_from_slice(&vecs[..n * n]);
        o
    };
    for (k, &src) in idx.iter().enumerate().take(n) {
        vals[k] = m[src * n + src];
        for i in 0..n {
            vecs[i * n + k] = old[i * n + src];
        }
    }
}

pub fn min_eigenvalue(a: &[f64], n: usize) -> f64 {
    let mut vals = [0.0; MAX_DIM];
    let mut vecs = [0.0; MAX_DIM * MAX_DIM];
    sym_eigen(a, n, &mut vals, &mut vecs);
    vals[0]
}

pub fn max_eigenvalue(a: &[f64], n: usize) -> f64 {
    let mut vals = [0.0; MAX_DIM];
    let mut vecs = [0.0; MAX_DIM * MAX_DIM];
    sym_eigen(a, n, &mut vals, &mut vecs);
    vals[n - 1]
}

/// Rebuilds `sum_k f(vals[k]) v_k v_k^T` into `out`.
pub fn spectral_map(a: &[f64], n: usize, out: &mut [f64], f: impl Fn(f64) -> f64) {
    let mut vals = [0.0; MAX_DIM];
    let mut vecs = [0.0; MAX_DIM * MAX_DIM];
    sym_eigen(a, n, &mut vals, &mut vecs);
    out[..n * n].fill(0.0);
    for k in 0..n {
        let fk = f(vals[k]);
        if fk == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = vecs[i * n + k] * fk;
            for j in 0..n {
                out[i * n + j] += vik * vecs[j * n + k];
            }
        }
    }
}

/// Positive part `A_+` of a symmetric matrix.
pub fn psd_part(a: &[f64], n: usize, out: &mut [f64]) {
    spectral_map(a, n, out, |x| x.max(0.0));
}

pub fn frobenius(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn trace(a: &[f64], n: usize) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// Solves `A x = b` in place by Gaussian elimination with partial pivoting.
/// Returns `false` when a pivot falls below `1e-300`.
pub fn solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-300 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in (col + 1)..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    true
}

/// Cholesky factorisation check: `Some(L)` (row-major, lower) when `a` is positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<[f64; MAX_DIM * MAX_DIM]> {
    let mut l = [0.0; MAX_DIM * MAX_DIM];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `x^T A^{-1} x` and `A^{-1} x` from a Cholesky factor.
pub fn cholesky_solve(l: &[f64], n: usize, x: &[f64], out: &mut [f64]) -> f64 {
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let quad: f64 = y[..n].iter().map(|v| v * v).sum();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * out[k];
        }
        out[i] = s / l[i * n + i];
    }
    quad
}
