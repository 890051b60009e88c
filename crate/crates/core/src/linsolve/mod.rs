//! Sparse linear solvers: BiCGSTAB, classical AMG, and an automatic driver
//! that falls back to plain BiCGSTAB when the multigrid path fails.

mod amg;
mod bicgstab;
mod sparse;
mod gmres;

pub use amg::{amg_setup, dense_solve, AmgHierarchy, AmgOptions};
pub use bicgstab::{bicgstab, bicgstab_with, KrylovOptions};
pub use gmres::gmres;
pub use sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("dimension mismatch: matrix {rows}x{cols}, rhs {rhs}, initial guess {x0}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize, x0: usize },
    #[error("AMG setup failed on level {level}, row {row}: {reason}")]
    AmgSetup { level: usize, row: usize, reason: String },
    #[error(
        "both solvers diverged (AMG residuals {:?}, BiCGSTAB residuals {:?})",
        tail(amg_history),
        tail(krylov_history)
    )]
    BothDiverged { amg_history: Vec<f64>, krylov_history: Vec<f64> },
}

fn tail(h: &[f64]) -> &[f64] {
    &h[h.len().saturating_sub(5)..]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    AmgBicgstab,
    Bicgstab,
    Gmres,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `|b - A x| / |b|` recomputed from the returned iterate.
    pub relative_residual: f64,
    pub method: SolveMethod,
    pub diverged: bool,
    pub history: Vec<f64>,
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// A matrix with its right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl LinearSystem {
    /// Keeps only the listed rows and columns (`keep` sorted). Values of the
    /// removed unknowns are taken as `removed_value(i)` and moved to the
    /// right-hand side of the remaining rows.
    pub fn reduce(&self, keep: &[usize], removed_value: impl Fn(usize) -> f64) -> LinearSystem {
        let n = self.matrix.n_rows();
        let mut kept = vec![false; n];
        for &i in keep {
            kept[i] = true;
        }
        let rhs = keep
            .iter()
            .map(|&i| {
                let (cols, vals) = self.matrix.row(i);
                let moved: f64 = cols
                    .iter()
                    .zip(vals)
                    .filter(|(&j, _)| !kept[j])
                    .map(|(&j, &v)| v * removed_value(j))
                    .sum();
                self.rhs[i] - moved
            })
            .collect();
        LinearSystem { matrix: self.matrix.submatrix(keep), rhs }
    }
}

/// Solver settings shared by the simulation.
#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub amg: AmgOptions,
    /// Consecutive residual increases that count as AMG divergence.
    pub growth_limit: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 2000, amg: AmgOptions::default(), growth_limit: 3 }
    }
}

/// AMG-preconditioned BiCGSTAB with automatic fallback to plain BiCGSTAB.
///
/// The multigrid path is abandoned when setup fails (zero diagonal or a
/// singular coarsest operator), when the residual grows for
/// `growth_limit` consecutive iterations, on any non-finite residual, or
/// when the iteration cap is hit.
pub fn solve_auto(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveReport), SolveError> {
    let opts = KrylovOptions { tol: settings.tol, max_iter: settings.max_iter, growth_limit: Some(settings.growth_limit) };
    let amg_history = match amg_setup(a, settings.amg) {
        Ok(h) => {
            let (x, rep) = bicgstab_with(a, b, x0, &h, opts, SolveMethod::AmgBicgstab)?;
            if !rep.diverged {
                return Ok((x, rep));
            }
            rep.history
        }
        Err(SolveError::AmgSetup { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let fallback_iter = settings.max_iter.max(10 * a.n_rows());
    let plain = KrylovOptions { tol: settings.tol, max_iter: fallback_iter, growth_limit: None };
    let (x, rep) = bicgstab_with(a, b, x0, &IdentityPreconditioner, plain, SolveMethod::Bicgstab)?;
    if rep.diverged {
        return Err(SolveError::BothDiverged { amg_history, krylov_history: rep.history });
    }
    Ok((x, rep))
}
