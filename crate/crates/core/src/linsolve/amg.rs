//! Classical (Ruge-Stüben) algebraic multigrid.
//!
//! Coarsening uses the classical strength-of-connection test with a
//! two-pass C/F splitting, direct interpolation and Galerkin coarse
//! operators. Cycles are V(1,1) with symmetric Gauss-Seidel smoothing; the
//! coarsest level is factorized densely.

use nalgebra::{DMatrix, DVector, LU};

use super::{Preconditioner, SolveError, SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy)]
pub struct AmgOptions {
    pub strength_threshold: f64,
    pub max_levels: usize,
    /// Levels at or below this size are solved with a dense LU factorization.
    pub coarse_size: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for AmgOptions {
    fn default() -> Self {
        Self { strength_threshold: 0.25, max_levels: 25, coarse_size: 64, pre_sweeps: 1, post_sweeps: 1 }
    }
}

/// Sweeps used on a coarsest level that is too large for dense LU.
const COARSE_SMOOTH_SWEEPS: usize = 20;
/// Coarsening is considered stalled when the coarse grid keeps more than
/// this fraction of the points.
const STALL_RATIO: f64 = 0.95;

#[derive(Debug, Clone)]
struct Level {
    a: SparseMatrix,
    diag: Vec<f64>,
    /// Prolongation to this level from the next coarser one.
    p: Option<SparseMatrix>,
    r: Option<SparseMatrix>,
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Dense(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Smooth,
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse: CoarseSolver,
    opts: AmgOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mark {
    Undecided,
    Coarse,
    Fine,
}

fn check_diagonal(a: &SparseMatrix, level: usize) -> Result<Vec<f64>, SolveError> {
    let diag = a.diagonal();
    for (i, &d) in diag.iter().enumerate() {
        let row_max = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !d.is_finite() || d.abs() <= 1e-13 * row_max || row_max == 0.0 {
            return Err(SolveError::AmgSetup { level, row: i, reason: "zero diagonal entry".into() });
        }
    }
    Ok(diag)
}

/// Strong dependencies of each row: `j` is strong for `i` when
/// `-s a_ij >= theta * max_k(-s a_ik)` with `s = sign(a_ii)`.
fn strength(a: &SparseMatrix, diag: &[f64], theta: f64) -> Vec<Vec<usize>> {
    (0..a.n_rows())
        .map(|i| {
            let s = diag[i].signum();
            let (cols, vals) = a.row(i);
            let max_neg = cols
                .iter()
                .zip(vals)
                .filter(|(&j, _)| j != i)
                .fold(0.0f64, |m, (_, &v)| m.max(-s * v));
            if max_neg <= 0.0 {
                return Vec::new();
            }
            cols.iter()
                .zip(vals)
                .filter(|(&j, &v)| j != i && -s * v >= theta * max_neg)
                .map(|(&j, _)| j)
                .collect()
        })
        .collect()
}

fn transpose_graph(s: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut t = vec![Vec::new(); s.len()];
    for (i, row) in s.iter().enumerate() {
        for &j in row {
            t[j].push(i);
        }
    }
    t
}

fn split(s: &[Vec<usize>]) -> Vec<Mark> {
    let n = s.len();
    let st = transpose_graph(s);
    let mut marks = vec![Mark::Undecided; n];
    let mut measure: Vec<usize> = st.iter().map(|v| v.len()).collect();
    for i in 0..n {
        if s[i].is_empty() && st[i].is_empty() {
            marks[i] = Mark::Fine;
        }
    }

    // Bucket queue keyed by measure; ties go to the lowest index.
    let max_measure = n + 1;
    let mut buckets: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); max_measure + n + 1];
    for i in 0..n {
        if marks[i] == Mark::Undecided {
            buckets[measure[i]].insert(i);
        }
    }
    let mut top = buckets.len() - 1;
    loop {
        while top > 0 && buckets[top].is_empty() {
            top -= 1;
        }
        if top == 0 {
            break;
        }
        let i = *buckets[top].iter().next().expect("bucket is non-empty");
        buckets[top].remove(&i);
        marks[i] = Mark::Coarse;
        for &j in &st[i] {
            if marks[j] == Mark::Undecided {
                buckets[measure[j]].remove(&j);
                marks[j] = Mark::Fine;
                for &k in &s[j] {
                    if marks[k] == Mark::Undecided {
                        buckets[measure[k]].remove(&k);
                        measure[k] += 1;
                        buckets[measure[k]].insert(k);
                        top = top.max(measure[k]);
                    }
                }
            }
        }
        for &j in &s[i] {
            if marks[j] == Mark::Undecided {
                buckets[measure[j]].remove(&j);
                measure[j] = measure[j].saturating_sub(1);
                buckets[measure[j]].insert(j);
            }
        }
    }
    for m in marks.iter_mut() {
        if *m == Mark::Undecided {
            *m = Mark::Fine;
        }
    }

    // Second pass: every strong F-F pair must share a strong C point.
    for i in 0..n {
        if marks[i] != Mark::Fine || s[i].is_empty() {
            continue;
        }
        let has_c = s[i].iter().any(|&j| marks[j] == Mark::Coarse);
        if !has_c {
            marks[i] = Mark::Coarse;
            continue;
        }
        for &j in &s[i] {
            if marks[j] != Mark::Fine {
                continue;
            }
            let shared = s[j].iter().any(|&k| marks[k] == Mark::Coarse && s[i].contains(&k));
            if !shared {
                marks[j] = Mark::Coarse;
            }
        }
    }
    marks
}

fn direct_interpolation(a: &SparseMatrix, diag: &[f64], s: &[Vec<usize>], marks: &[Mark]) -> SparseMatrix {
    let n = a.n_rows();
    let mut coarse_index = vec![usize::MAX; n];
    let mut nc = 0;
    for i in 0..n {
        if marks[i] == Mark::Coarse {
            coarse_index[i] = nc;
            nc += 1;
        }
    }
    let mut b = TripletBuilder::new(n, nc);
    for i in 0..n {
        if marks[i] == Mark::Coarse {
            b.add(i, coarse_index[i], 1.0);
            continue;
        }
        let sgn = diag[i].signum();
        let interp: Vec<usize> = s[i].iter().copied().filter(|&j| marks[j] == Mark::Coarse).collect();
        if interp.is_empty() {
            continue;
        }
        let (cols, vals) = a.row(i);
        let (mut neg_all, mut pos_all, mut neg_c, mut pos_c) = (0.0, 0.0, 0.0, 0.0);
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                continue;
            }
            let v = sgn * v;
            let in_c = interp.binary_search(&j).is_ok();
            if v < 0.0 {
                neg_all += v;
                if in_c {
                    neg_c += v;
                }
            } else {
                pos_all += v;
                if in_c {
                    pos_c += v;
                }
            }
        }
        let mut d = sgn * diag[i];
        let alpha = if neg_c != 0.0 { neg_all / neg_c } else { 0.0 };
        let beta = if pos_c != 0.0 {
            pos_all / pos_c
        } else {
            d += pos_all;
            0.0
        };
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i || interp.binary_search(&j).is_err() {
                continue;
            }
            let v = sgn * v;
            let w = if v < 0.0 { -alpha * v / d } else { -beta * v / d };
            if w != 0.0 {
                b.add(i, coarse_index[j], w);
            }
        }
    }
    b.build()
}

/// Builds the multigrid hierarchy for `a`.
///
/// Fails when any level has a zero diagonal entry or the coarsest operator
/// is singular.
pub fn amg_setup(a: &SparseMatrix, opts: AmgOptions) -> Result<AmgHierarchy, SolveError> {
    if !a.is_square() {
        return Err(SolveError::DimensionMismatch { rows: a.n_rows(), cols: a.n_cols(), rhs: a.n_rows(), x0: a.n_rows() });
    }
    let mut levels: Vec<Level> = Vec::new();
    let mut current = a.clone();
    loop {
        let level_no = levels.len();
        let diag = check_diagonal(&current, level_no)?;
        let n = current.n_rows();
        if n <= opts.coarse_size || level_no + 1 >= opts.max_levels {
            levels.push(Level { a: current, diag, p: None, r: None });
            break;
        }
        let strong = strength(&current, &diag, opts.strength_threshold);
        let marks = split(&strong);
        let nc = marks.iter().filter(|&&m| m == Mark::Coarse).count();
        if nc == 0 || nc as f64 > STALL_RATIO * n as f64 {
            levels.push(Level { a: current, diag, p: None, r: None });
            break;
        }
        let p = direct_interpolation(&current, &diag, &strong, &marks);
        let r = p.transpose();
        let coarse = r.matmul(&current).matmul(&p);
        levels.push(Level { a: current, diag, p: Some(p), r: Some(r) });
        current = coarse;
    }
    let last = levels.last().expect("at least one level");
    let coarse = if last.a.n_rows() <= opts.coarse_size {
        let lu = last.a.to_dense().lu();
        let singular = {
            let u = lu.u();
            let scale = u.amax();
            (0..u.nrows()).any(|i| u[(i, i)].abs() <= 1e-13 * scale)
        };
        if singular {
            return Err(SolveError::AmgSetup {
                level: levels.len() - 1,
                row: 0,
                reason: "singular coarsest-level operator".into(),
            });
        }
        CoarseSolver::Dense(lu)
    } else {
        CoarseSolver::Smooth
    };
    Ok(AmgHierarchy { levels, coarse, opts })
}

fn gauss_seidel(level: &Level, b: &[f64], x: &mut [f64], forward: bool) {
    let n = x.len();
    let mut sweep = |i: usize| {
        let (cols, vals) = level.a.row(i);
        let mut sum = b[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                sum -= v * x[j];
            }
        }
        x[i] = sum / level.diag[i];
    };
    if forward {
        (0..n).for_each(&mut sweep);
    } else {
        (0..n).rev().for_each(&mut sweep);
    }
}

fn symmetric_gauss_seidel(level: &Level, b: &[f64], x: &mut [f64]) {
    gauss_seidel(level, b, x, true);
    gauss_seidel(level, b, x, false);
}

impl AmgHierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.n_rows()).collect()
    }

    pub fn operator(&self, level: usize) -> &SparseMatrix {
        &self.levels[level].a
    }

    pub fn prolongation(&self, level: usize) -> Option<&SparseMatrix> {
        self.levels[level].p.as_ref()
    }

    fn cycle(&self, k: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[k];
        if k + 1 == self.levels.len() {
            match &self.coarse {
                CoarseSolver::Dense(lu) => {
                    let sol = lu.solve(&DVector::from_column_slice(b)).expect("factorization checked at setup");
                    x.copy_from_slice(sol.as_slice());
                }
                CoarseSolver::Smooth => {
                    for _ in 0..COARSE_SMOOTH_SWEEPS {
                        symmetric_gauss_seidel(level, b, x);
                    }
                }
            }
            return;
        }
        for _ in 0..self.opts.pre_sweeps {
            symmetric_gauss_seidel(level, b, x);
        }
        let r = level.a.residual(b, x);
        let restrict = level.r.as_ref().expect("non-coarsest level has a restriction");
        let prolong = level.p.as_ref().expect("non-coarsest level has a prolongation");
        let bc = restrict.mul_vec(&r);
        let mut xc = vec![0.0; bc.len()];
        self.cycle(k + 1, &bc, &mut xc);
        let corr = prolong.mul_vec(&xc);
        for (xi, ci) in x.iter_mut().zip(&corr) {
            *xi += ci;
        }
        for _ in 0..self.opts.post_sweeps {
            symmetric_gauss_seidel(level, b, x);
        }
    }

    /// One V-cycle on `A x = b`, updating `x` in place.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x);
    }

    /// Geometric-mean residual reduction per V-cycle on `A x = 0` starting
    /// from `x0`, measured over `cycles` cycles.
    pub fn convergence_factor(&self, x0: &[f64], cycles: usize) -> f64 {
        let a = &self.levels[0].a;
        let zero = vec![0.0; a.n_rows()];
        let mut x = x0.to_vec();
        let norm = |v: &[f64]| v.iter().map(|e| e * e).sum::<f64>().sqrt();
        let r0 = norm(&a.residual(&zero, &x));
        for _ in 0..cycles {
            self.vcycle(&zero, &mut x);
        }
        let rn = norm(&a.residual(&zero, &x));
        (rn / r0).powf(1.0 / cycles as f64)
    }
}

impl Preconditioner for AmgHierarchy {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        self.vcycle(r, z);
    }
}

/// Dense LU solve used as a reference in tests and tools.
pub fn dense_solve(a: &SparseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let m: DMatrix<f64> = a.to_dense();
    m.lu().solve(&DVector::from_column_slice(b)).map(|v| v.as_slice().to_vec())
}
