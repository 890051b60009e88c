use nalgebra::DMatrix;

/// Probabilists' Hermite polynomial `He_j(x)`.
pub fn hermite_eval(j: usize, x: f64) -> f64 {
    hermite_pair(j, x).0
}

/// `(He_j(x), He_{j-1}(x))`, with `He_{-1} = 0`.
fn hermite_pair(j: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..j {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `j!`, the squared norm of `He_j` under the standard normal weight.
pub fn hermite_norm_sq(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

/// `n`-point Gauss-Hermite rule for the standard normal density.
///
/// Nodes start from the eigenvalues of the Jacobi matrix and are polished
/// by Newton steps on `He_n`; weights use `n! / (n He_{n-1}(x))^2`, so they
/// sum to one. Nodes are returned in ascending order and are exactly
/// antisymmetric, with an exact zero for odd `n`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    for x in &mut nodes {
        for _ in 0..3 {
            let (h, h_prev) = hermite_pair(n, *x);
            // He_n' = n He_{n-1}
            *x -= h / (n as f64 * h_prev);
        }
    }
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let fact = hermite_norm_sq(n);
    let weights = nodes
        .iter()
        .map(|&x| {
            let h_prev = hermite_pair(n, x).1;
            fact / (n as f64 * h_prev).powi(2)
        })
        .collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_values() {
        assert_eq!(hermite_eval(0, 7.3), 1.0);
        assert_eq!(hermite_eval(2, 2.0), 3.0);
        assert_eq!(hermite_eval(3, 2.0), 2.0);
    }

    #[test]
    fn rule_integrates_moments() {
        for n in 1..=12 {
            let (x, w) = gauss_hermite(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "n={n}");
            // E[x^(2k)] = (2k-1)!!
            let mut dfact = 1.0;
            for k in 1..n {
                dfact *= (2 * k - 1) as f64;
                let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * k as i32)).sum();
                assert!((m / dfact - 1.0).abs() < 1e-11, "n={n} k={k}: {m} vs {dfact}");
            }
        }
    }
}
