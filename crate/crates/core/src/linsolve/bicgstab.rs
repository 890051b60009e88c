use super::{Preconditioner, SolveError, SolveMethod, SolveReport, SparseMatrix};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Stop conditions for [`bicgstab_with`].
#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Abort once the relative residual has grown this many iterations in a
    /// row. `None` disables the check.
    pub growth_limit: Option<usize>,
}

/// Unpreconditioned BiCGSTAB.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    bicgstab_with(
        a,
        b,
        x0,
        &super::IdentityPreconditioner,
        KrylovOptions { tol, max_iter, growth_limit: None },
        SolveMethod::Bicgstab,
    )
}

/// Right-preconditioned BiCGSTAB.
///
/// The reported residual is always recomputed as `|b - A x| / |b|` from the
/// returned iterate. If the recurrence residual claims convergence but the
/// true residual does not, the iteration restarts from the true residual.
pub fn bicgstab_with(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    m: &dyn Preconditioner,
    opts: KrylovOptions,
    method: SolveMethod,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = a.n_rows();
    if !a.is_square() || b.len() != n || x0.len() != n {
        return Err(SolveError::DimensionMismatch { rows: a.n_rows(), cols: a.n_cols(), rhs: b.len(), x0: x0.len() });
    }
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let report = SolveReport { iterations: 0, relative_residual: 0.0, method, diverged: false, history: vec![0.0] };
        return Ok((vec![0.0; n], report));
    }
    if !b_norm.is_finite() {
        let report = SolveReport { iterations: 0, relative_residual: f64::NAN, method, diverged: true, history: vec![] };
        return Ok((x0.to_vec(), report));
    }

    let mut x = x0.to_vec();
    let mut r = a.residual(b, &x);
    let mut history = vec![norm(&r) / b_norm];
    let mut iterations = 0usize;
    let mut diverged = false;
    let mut growth = 0usize;
    let mut restarts = 0usize;

    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];

    'outer: while history.last().copied().unwrap_or(0.0) > opts.tol {
        let r_shadow = r.clone();
        let mut p = vec![0.0; n];
        v.iter_mut().for_each(|e| *e = 0.0);
        let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
        let shadow_norm = norm(&r_shadow);
        loop {
            if iterations >= opts.max_iter {
                diverged = true;
                break 'outer;
            }
            let rho_new = dot(&r_shadow, &r);
            if rho_new.abs() <= 1e-30 * shadow_norm * norm(&r) || !rho_new.is_finite() {
                break; // breakdown: restart from current residual
            }
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            m.apply(&p, &mut p_hat);
            a.mul_vec_into(&p_hat, &mut v);
            let denom = dot(&r_shadow, &v);
            if denom == 0.0 || !denom.is_finite() {
                break;
            }
            alpha = rho_new / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            iterations += 1;
            let s_rel = norm(&s) / b_norm;
            if s_rel <= opts.tol {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                r = a.residual(b, &x);
                history.push(norm(&r) / b_norm);
                break;
            }
            m.apply(&s, &mut s_hat);
            a.mul_vec_into(&s_hat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            rho = rho_new;
            let rel = norm(&r) / b_norm;
            if !rel.is_finite() {
                history.push(rel);
                diverged = true;
                break 'outer;
            }
            if let Some(limit) = opts.growth_limit {
                if rel > *history.last().expect("history is non-empty") {
                    growth += 1;
                    if growth >= limit {
                        history.push(rel);
                        diverged = true;
                        break 'outer;
                    }
                } else {
                    growth = 0;
                }
            }
            history.push(rel);
            if rel <= opts.tol {
                r = a.residual(b, &x);
                let true_rel = norm(&r) / b_norm;
                *history.last_mut().expect("history is non-empty") = true_rel;
                break;
            }
            if omega == 0.0 {
                break;
            }
        }
        restarts += 1;
        if restarts > 50 {
            diverged = true;
            break;
        }
        r = a.residual(b, &x);
        let true_rel = norm(&r) / b_norm;
        if !true_rel.is_finite() {
            diverged = true;
            break;
        }
        *history.last_mut().expect("history is non-empty") = true_rel;
    }

    let relative_residual = norm(&a.residual(b, &x)) / b_norm;
    if !(relative_residual <= opts.tol) {
        diverged = true;
    }
    Ok((x, SolveReport { iterations, relative_residual, method, diverged, history }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn poisson_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let a = SparseMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        let (x, rep) = bicgstab(&a, &b, &[0.0; 5], 1e-12, 10).unwrap();
        assert!(rep.iterations <= 1);
        assert!(!rep.diverged);
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = poisson_1d(8);
        let (x, rep) = bicgstab(&a, &[0.0; 8], &[1.0; 8], 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_matches_dense_solve() {
        let n = 16;
        let a = poisson_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i * 7 % 5) as f64) - 1.5).collect();
        let (x, rep) = bicgstab(&a, &b, &vec![0.0; n], 1e-14, 500).unwrap();
        assert!(!rep.diverged, "{rep:?}");
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let exact = dense.lu().solve(&DVector::from_vec(b.clone())).unwrap();
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-10 * exact.amax());
        }
    }

    #[test]
    fn reported_residual_is_true_residual() {
        let a = poisson_1d(30);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let (x, rep) = bicgstab(&a, &b, &vec![0.0; 30], 1e-10, 500).unwrap();
        let r = a.residual(&b, &x);
        let true_rel = norm(&r) / norm(&b);
        assert!((rep.relative_residual - true_rel).abs() <= 1e-12 * true_rel.max(1e-300));
        assert!(rep.relative_residual <= 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = poisson_1d(4);
        assert!(matches!(bicgstab(&a, &[1.0; 3], &[0.0; 4], 1e-8, 10), Err(SolveError::DimensionMismatch { .. })));
    }

    #[test]
    fn iteration_cap_sets_divergence_flag() {
        let a = poisson_1d(64);
        let b = vec![1.0; 64];
        let (_, rep) = bicgstab(&a, &b, &vec![0.0; 64], 1e-14, 3).unwrap();
        assert!(rep.diverged);
    }
}
