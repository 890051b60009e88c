use super::{Preconditioner, SolveError, SolveMethod, SolveReport, SparseMatrix};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned GMRES restarted every `restart` iterations.
///
/// Slower per iteration than BiCGSTAB but its residual never grows, which
/// makes it the solver of last resort for strongly nonsymmetric systems.
/// The reported residual is recomputed from the returned iterate.
pub fn gmres(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    m: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let n = a.n_rows();
    if !a.is_square() || b.len() != n || x0.len() != n {
        return Err(SolveError::DimensionMismatch { rows: a.n_rows(), cols: a.n_cols(), rhs: b.len(), x0: x0.len() });
    }
    let restart = restart.max(1);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        let report = SolveReport { iterations: 0, relative_residual: 0.0, method: SolveMethod::Gmres, diverged: false, history: vec![0.0] };
        return Ok((vec![0.0; n], report));
    }
    let mut x = x0.to_vec();
    let mut history = vec![norm(&a.residual(b, &x)) / b_norm];
    let mut iterations = 0;
    let mut z = vec![0.0; n];
    while history.last().is_some_and(|&r| r > tol && r.is_finite()) && iterations < max_iter {
        let r = a.residual(b, &x);
        let beta = norm(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns after the Givens rotations.
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut rotations: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        for j in 0..restart.min(max_iter - iterations) {
            m.apply(&basis[j], &mut z);
            let mut w = a.mul_vec(&z);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
                col.push(hij);
            }
            let w_norm = norm(&w);
            col.push(w_norm);
            for (i, &(c, s)) in rotations.iter().enumerate() {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = c * p + s * q;
                col[i + 1] = -s * p + c * q;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col.truncate(j + 1);
            rotations.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            iterations += 1;
            history.push(g[j + 1].abs() / b_norm);
            if g[j + 1].abs() <= tol * b_norm || w_norm == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }
        // Back substitution for the update coefficients.
        let k = h.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| h[l][i] * y[l]).sum();
            y[i] = if h[i][i] == 0.0 { 0.0 } else { (g[i] - s) / h[i][i] };
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        m.apply(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
        let true_res = norm(&a.residual(b, &x)) / b_norm;
        *history.last_mut().expect("non-empty") = true_res;
        if k == 0 {
            break;
        }
    }
    let relative_residual = *history.last().expect("non-empty");
    let diverged = !(relative_residual <= tol);
    Ok((x, SolveReport { iterations, relative_residual, method: SolveMethod::Gmres, diverged, history }))
}
