use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use super::grid::{binomial, InputDistribution};
use super::hermite::{hermite_eval, hermite_norm_sq};
use super::UqError;

/// All multi-indices in `dims` variables with total degree at most
/// `order`, graded lexicographically: by total degree, then descending in
/// the first component, then the second, and so on. For two variables and
/// order 2 this is `00, 10, 01, 20, 11, 02`.
pub fn multi_indices(dims: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, dims: usize, left: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == dims {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in (0..=left).rev() {
            prefix.push(v);
            rec(prefix, dims, left - v, out);
            prefix.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(order + dims, dims));
    for degree in 0..=order {
        rec(&mut Vec::with_capacity(dims), dims, degree, &mut out);
    }
    out
}

/// Product of Hermite polynomials `prod_k He_{alpha_k}(xi_k)`.
pub fn basis_eval(alpha: &[usize], xi: &[f64]) -> f64 {
    alpha.iter().zip(xi).map(|(&a, &x)| if a == 0 { 1.0 } else { hermite_eval(a, x) }).product()
}

fn basis_norm_sq(alpha: &[usize]) -> f64 {
    alpha.iter().map(|&a| hermite_norm_sq(a)).product()
}

/// Hermite chaos expansion of one scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct PceModel {
    pub order: usize,
    pub indices: Vec<Vec<usize>>,
    pub coefficients: Vec<f64>,
    pub dist: InputDistribution,
}

/// Least-squares fit of a total-order expansion to outputs at
/// standardized samples, through a Householder QR of the Vandermonde
/// matrix.
pub fn fit_pce(samples: &[Vec<f64>], outputs: &[f64], order: usize, dist: &InputDistribution) -> Result<PceModel, UqError> {
    let dims = dist.dims();
    if samples.len() != outputs.len() {
        return Err(UqError::LengthMismatch { expected: samples.len(), got: outputs.len() });
    }
    if let Some(s) = samples.iter().find(|s| s.len() != dims) {
        return Err(UqError::LengthMismatch { expected: dims, got: s.len() });
    }
    let indices = multi_indices(dims, order);
    let (m, p) = (samples.len(), indices.len());
    if m < p {
        return Err(UqError::TooFewSamples { samples: m, basis: p });
    }
    let vandermonde = DMatrix::from_fn(m, p, |r, c| basis_eval(&indices[c], &samples[r]));
    let qr = vandermonde.qr();
    let r = qr.r();
    let diag_max = r.diagonal().amax();
    let rank = r.diagonal().iter().filter(|d| d.abs() > 1e-10 * diag_max).count();
    if rank < p || diag_max == 0.0 {
        return Err(UqError::RankDeficient { rank, basis: p });
    }
    let rhs = qr.q().transpose() * DVector::from_column_slice(outputs);
    let coeffs = r.solve_upper_triangular(&rhs).ok_or(UqError::RankDeficient { rank, basis: p })?;
    Ok(PceModel { order, indices, coefficients: coeffs.iter().copied().collect(), dist: dist.clone() })
}

/// Sobol indices per input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolIndices {
    pub first: Vec<f64>,
    pub total: Vec<f64>,
    pub variance: f64,
}

impl PceModel {
    pub fn dims(&self) -> usize {
        self.dist.dims()
    }

    /// Expansion value at a standardized point.
    pub fn evaluate(&self, xi: &[f64]) -> f64 {
        self.indices.iter().zip(&self.coefficients).map(|(a, c)| c * basis_eval(a, xi)).sum()
    }

    /// Expansion value at a physical point.
    pub fn evaluate_physical(&self, x: &[f64]) -> f64 {
        self.evaluate(&self.dist.standardize(x))
    }

    pub fn mean(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn variance(&self) -> f64 {
        self.indices.iter().zip(&self.coefficients).skip(1).map(|(a, c)| c * c * basis_norm_sq(a)).sum()
    }

    /// Share of the variance carried by every set of interacting inputs,
    /// keyed by the sorted dimensions involved.
    pub fn variance_partition(&self) -> Result<BTreeMap<Vec<usize>, f64>, UqError> {
        let variance = self.checked_variance()?;
        let mut parts = BTreeMap::new();
        for (a, c) in self.indices.iter().zip(&self.coefficients).skip(1) {
            let key: Vec<usize> = (0..a.len()).filter(|&k| a[k] > 0).collect();
            *parts.entry(key).or_insert(0.0) += c * c * basis_norm_sq(a) / variance;
        }
        Ok(parts)
    }

    /// First-order and total Sobol indices. Fails when the expansion has
    /// no variance to share out.
    pub fn sobol_indices(&self) -> Result<SobolIndices, UqError> {
        let variance = self.checked_variance()?;
        let d = self.dims();
        let (mut first, mut total) = (vec![0.0; d], vec![0.0; d]);
        for (key, share) in self.variance_partition()? {
            if key.len() == 1 {
                first[key[0]] += share;
            }
            for k in key {
                total[k] += share;
            }
        }
        Ok(SobolIndices { first, total, variance })
    }

    fn checked_variance(&self) -> Result<f64, UqError> {
        let variance = self.variance();
        let scale: f64 = self.coefficients.iter().map(|c| c * c).sum();
        if !(variance > 1e-24 * scale) {
            return Err(UqError::ZeroVariance);
        }
        Ok(variance)
    }

    /// Writes the model as text: header lines with the order and the input
    /// distribution, then one line per basis function with its
    /// multi-index and coefficient.
    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "order {}", self.order)?;
        writeln!(w, "mean {}", join(&self.dist.mean))?;
        writeln!(w, "sd {}", join(&self.dist.sd))?;
        for (a, c) in self.indices.iter().zip(&self.coefficients) {
            let idx: Vec<String> = a.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{} {}", idx.join(" "), c)?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self, UqError> {
        let mut lines = r.lines().enumerate();
        let mut header = |name: &str| -> Result<(usize, Vec<String>), UqError> {
            let (i, line) = lines.next().ok_or_else(|| UqError::parse(0, format!("missing `{name}` line")))?;
            let line = line?;
            let mut words = line.split_whitespace().map(str::to_owned);
            if words.next().as_deref() != Some(name) {
                return Err(UqError::parse(i + 1, format!("expected `{name}`")));
            }
            Ok((i + 1, words.collect()))
        };
        let (ln, order) = header("order")?;
        let order: usize = order.first().and_then(|s| s.parse().ok()).ok_or_else(|| UqError::parse(ln, "bad order"))?;
        let (ln, mean) = header("mean")?;
        let mean = parse_floats(&mean, ln)?;
        let (ln, sd) = header("sd")?;
        let sd = parse_floats(&sd, ln)?;
        let dist = InputDistribution::new(mean, sd)?;
        let d = dist.dims();
        let (mut indices, mut coefficients) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line?;
            let words: Vec<&str> = line.split_whitespace().collect();
            if words.is_empty() {
                continue;
            }
            if words.len() != d + 1 {
                return Err(UqError::parse(i + 1, format!("expected {} fields, found {}", d + 1, words.len())));
            }
            let alpha: Result<Vec<usize>, _> = words[..d].iter().map(|s| s.parse()).collect();
            indices.push(alpha.map_err(|_| UqError::parse(i + 1, "bad multi-index"))?);
            coefficients.push(words[d].parse().map_err(|_| UqError::parse(i + 1, "bad coefficient"))?);
        }
        if indices != multi_indices(d, order) {
            return Err(UqError::parse(0, "multi-indices do not form the total-order set"));
        }
        Ok(Self { order, indices, coefficients, dist })
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(words: &[String], line: usize) -> Result<Vec<f64>, UqError> {
    words.iter().map(|s| s.parse().map_err(|_| UqError::parse(line, format!("bad number `{s}`")))).collect()
}

/// Expansion values on a regular grid over `mean +- 3 sd` of two inputs,
/// the others held at their means. `values[a][b]` belongs to `(x[a], y[b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSurface {
    pub dims: (usize, usize),
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn response_surface(model: &PceModel, dims: (usize, usize), resolution: usize) -> ResponseSurface {
    let (i, j) = dims;
    assert!(i != j && i.max(j) < model.dims() && resolution >= 2, "invalid response-surface request");
    let axis = |k: usize| -> Vec<f64> {
        (0..resolution).map(|s| model.dist.mean[k] + model.dist.sd[k] * (-3.0 + 6.0 * s as f64 / (resolution - 1) as f64)).collect()
    };
    let (x, y) = (axis(i), axis(j));
    let values = x
        .iter()
        .map(|&xa| {
            y.iter()
                .map(|&yb| {
                    let mut p = model.dist.mean.clone();
                    p[i] = xa;
                    p[j] = yb;
                    model.evaluate_physical(&p)
                })
                .collect()
        })
        .collect();
    ResponseSurface { dims, x, y, values }
}

impl ResponseSurface {
    /// CSV with one `x,y,value` row per grid point.
    pub fn write_csv(&self, w: impl Write, x_name: &str, y_name: &str) -> Result<(), UqError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([x_name, y_name, "value"])?;
        for (a, row) in self.values.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                out.write_record([self.x[a].to_string(), self.y[b].to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Root-mean-square gap between model and reference values, divided by
/// the largest reference magnitude.
pub fn normalized_rms_error(model: &PceModel, points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let sq: f64 = points.iter().zip(reference).map(|(p, r)| (model.evaluate(p) - r).powi(2)).sum();
    let scale = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    (sq / points.len() as f64).sqrt() / scale
}
