use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::hermite::gauss_hermite;
use super::UqError;

/// Independent normal inputs `x_k ~ N(mean_k, sd_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputDistribution {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl InputDistribution {
    pub fn new(mean: Vec<f64>, sd: Vec<f64>) -> Result<Self, UqError> {
        if mean.len() != sd.len() || mean.is_empty() {
            return Err(UqError::InvalidDistribution(format!("{} means for {} deviations", mean.len(), sd.len())));
        }
        if let Some(k) = sd.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(UqError::InvalidDistribution(format!("deviation {k} must be positive, got {}", sd[k])));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(UqError::InvalidDistribution("means must be finite".into()));
        }
        Ok(Self { mean, sd })
    }

    /// `N(0, 1)` in every one of `dims` dimensions.
    pub fn standard(dims: usize) -> Self {
        Self { mean: vec![0.0; dims], sd: vec![1.0; dims] }
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// `xi = (x - mean) / sd`.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.sd)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    /// `x = mean + sd xi`.
    pub fn physical(&self, xi: &[f64]) -> Vec<f64> {
        xi.iter().zip(self.mean.iter().zip(&self.sd)).map(|(xi, (m, s))| m + s * xi).collect()
    }
}

/// Sparse quadrature grid for the standard normal in `dims` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    pub dims: usize,
    pub level: usize,
    /// Standardized nodes, sorted lexicographically.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SparseGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum of `f` over the nodes.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// Smolyak combination of Gauss-Hermite rules, the 1-D rule at level `i`
/// having `i` nodes.
///
/// Level `l` integrates every polynomial of total degree up to `2l - 1`
/// exactly. Coincident nodes from different tensor rules are merged and
/// nodes whose combined weight cancels are dropped.
pub fn smolyak_nodes(dims: usize, level: usize) -> Result<SparseGrid, UqError> {
    if dims == 0 || level == 0 {
        return Err(UqError::InvalidGrid { dims, level });
    }
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (1..=level).map(gauss_hermite).collect();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut nodes: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();

    // Levels i_k >= 1 with q = sum(i_k - 1) in [level - dims, level - 1].
    let q_max = level - 1;
    let q_min = level.saturating_sub(dims);
    for q in q_min..=q_max {
        let coeff = binomial(dims - 1, q_max - q) as f64 * if (q_max - q) % 2 == 0 { 1.0 } else { -1.0 };
        for_each_composition(dims, q, &mut |excess| {
            let sizes: Vec<usize> = excess.iter().map(|e| e + 1).collect();
            let mut pos = vec![0usize; dims];
            loop {
                let point: Vec<f64> = (0..dims).map(|k| rules[sizes[k] - 1].0[pos[k]] + 0.0).collect();
                let w: f64 = coeff * (0..dims).map(|k| rules[sizes[k] - 1].1[pos[k]]).product::<f64>();
                let key: Vec<u64> = point.iter().map(|x| x.to_bits()).collect();
                match index.get(&key) {
                    Some(&i) => weights[i] += w,
                    None => {
                        index.insert(key, nodes.len());
                        nodes.push(point);
                        weights.push(w);
                    }
                }
                let mut k = 0;
                while k < dims {
                    pos[k] += 1;
                    if pos[k] < sizes[k] {
                        break;
                    }
                    pos[k] = 0;
                    k += 1;
                }
                if k == dims {
                    break;
                }
            }
        });
    }

    let mut merged: Vec<(Vec<f64>, f64)> = nodes.into_iter().zip(weights).filter(|(_, w)| w.abs() > 1e-14).collect();
    merged.sort_by(|a, b| {
        a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let (nodes, weights) = merged.into_iter().unzip();
    Ok(SparseGrid { dims, level, nodes, weights })
}

/// Calls `f` with every vector of `parts` non-negative integers summing
/// to `total`.
fn for_each_composition(parts: usize, total: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(buf: &mut Vec<usize>, parts: usize, left: usize, f: &mut impl FnMut(&[usize])) {
        if buf.len() + 1 == parts {
            buf.push(left);
            f(buf);
            buf.pop();
            return;
        }
        for v in (0..=left).rev() {
            buf.push(v);
            rec(buf, parts, left - v, f);
            buf.pop();
        }
    }
    rec(&mut Vec::with_capacity(parts), parts, total, f);
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Latin-hypercube sample of `n` standardized points in `dims`
/// dimensions: each coordinate hits every one of the `n` equal-probability
/// strata once, mapped through the inverse normal CDF. The generator is
/// ChaCha8 seeded with `seed`.
pub fn latin_hypercube(n: usize, dims: usize, seed: u64) -> Vec<Vec<f64>> {
    let normal = Normal::standard();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dims]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for k in 0..dims {
        strata.shuffle(&mut rng);
        for (p, &s) in points.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            // Keep away from the open ends of (0, 1).
            let u = ((s as f64 + u) / n as f64).clamp(1e-12, 1.0 - 1e-12);
            p[k] = normal.inverse_cdf(u);
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_one_is_the_mean() {
        for d in 1..5 {
            let g = smolyak_nodes(d, 1).unwrap();
            assert_eq!(g.nodes, vec![vec![0.0; d]]);
            assert!((g.weights[0] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn level_two_moments() {
        let g = smolyak_nodes(2, 2).unwrap();
        assert!((g.integrate(|x| x[0] * x[0]) - 1.0).abs() < 1e-12);
        assert!(g.integrate(|x| x[0] * x[1]).abs() < 1e-12);
        assert_eq!(g.len(), 5);
    }

    #[test]
    fn compositions_are_counted() {
        let mut n = 0;
        for_each_composition(3, 4, &mut |c| {
            assert_eq!(c.iter().sum::<usize>(), 4);
            n += 1;
        });
        assert_eq!(n, binomial(6, 2));
    }

    #[test]
    fn hypercube_strata() {
        let pts = latin_hypercube(60, 3, 7);
        let normal = Normal::standard();
        for k in 0..3 {
            let mut bins: Vec<usize> = pts.iter().map(|p| (normal.cdf(p[k]) * 60.0) as usize).collect();
            bins.sort();
            assert_eq!(bins, (0..60).collect::<Vec<_>>());
        }
        assert_eq!(pts, latin_hypercube(60, 3, 7));
    }

    #[test]
    fn distribution_round_trip() {
        let d = InputDistribution::new(vec![10.0, 1000.0], vec![0.2, 10.0]).unwrap();
        assert_eq!(d.standardize(&[10.0, 1010.0]), vec![0.0, 1.0]);
        let x = [10.37, 981.2];
        let back = d.physical(&d.standardize(&x));
        assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs()));
        assert!(InputDistribution::new(vec![0.0], vec![0.0]).is_err());
    }
}
