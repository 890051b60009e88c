//! Empirical microstructure models: secondary dendrite arm spacing from the
//! local cooling rate, yield strength from SDAS, and solute-limited grain
//! growth driven by the solid-fraction history.

use std::f64::consts::PI;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MicroError {
    #[error("cooling rate must be positive, got {0}")]
    NonPositiveRate(f64),
    #[error("SDAS must be positive, got {0}")]
    NonPositiveSdas(f64),
    #[error("time and solid-fraction histories differ in length ({times} vs {fractions})")]
    HistoryMismatch { times: usize, fractions: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroParams {
    /// SDAS prefactor (um at 1 K/s).
    pub a_lambda: f64,
    pub b_lambda: f64,
    /// Yield-strength slope (MPa um^0.5).
    pub a_sigma: f64,
    /// Yield-strength intercept (MPa).
    pub b_sigma: f64,
    /// Initial grain radius (m).
    pub r0: f64,
    pub partition: f64,
    /// Solute diffusivity in the liquid (m^2/s).
    pub diffusivity: f64,
}

impl Default for MicroParams {
    fn default() -> Self {
        Self {
            a_lambda: 39.4,
            b_lambda: -0.317,
            a_sigma: 59.0,
            b_sigma: 120.3,
            r0: 1e-6,
            partition: 0.13,
            diffusivity: 1e-9,
        }
    }
}

/// SDAS in um for a cooling rate in K/s.
pub fn sdas(cooling_rate: f64) -> Result<f64, MicroError> {
    sdas_with(&MicroParams::default(), cooling_rate)
}

pub fn sdas_with(p: &MicroParams, cooling_rate: f64) -> Result<f64, MicroError> {
    if !(cooling_rate > 0.0) {
        return Err(MicroError::NonPositiveRate(cooling_rate));
    }
    Ok(p.a_lambda * cooling_rate.powf(p.b_lambda))
}

/// 0.2% yield strength in MPa for an SDAS in um.
pub fn yield_strength(sdas: f64) -> Result<f64, MicroError> {
    yield_strength_with(&MicroParams::default(), sdas)
}

pub fn yield_strength_with(p: &MicroParams, sdas: f64) -> Result<f64, MicroError> {
    if !(sdas > 0.0) {
        return Err(MicroError::NonPositiveSdas(sdas));
    }
    Ok(p.a_sigma / sdas.sqrt() + p.b_sigma)
}

/// Supersaturation parameter `S = 2 (C_s - C_0) / (C_s - C_l)` with Scheil
/// interface compositions. The nominal composition cancels.
pub fn supersaturation(fs: f64, partition: f64) -> f64 {
    let cl = (1.0 - fs).powf(partition - 1.0);
    let cs = partition * cl;
    2.0 * (cs - 1.0) / (cs - cl)
}

/// Invariant-size growth parameter for `S < 0`, `None` otherwise.
pub fn growth_parameter(s: f64) -> Option<f64> {
    if s < 0.0 && s.is_finite() {
        Some(-s / (2.0 * PI.sqrt()) + (s * s / (4.0 * PI) - s).sqrt())
    } else {
        None
    }
}

/// Classical RK4 for `dr/dt = lambda(t)^2 D / (2 r)` over `[t0, t1]`.
pub fn rk4_growth(r0: f64, diffusivity: f64, t0: f64, t1: f64, steps: usize, lambda: impl Fn(f64) -> f64) -> f64 {
    let rate = |t: f64, r: f64| {
        let l = lambda(t);
        l * l * diffusivity / (2.0 * r)
    };
    let h = (t1 - t0) / steps as f64;
    let mut r = r0;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let k1 = rate(t, r);
        let k2 = rate(t + 0.5 * h, r + 0.5 * h * k1);
        let k3 = rate(t + 0.5 * h, r + 0.5 * h * k2);
        let k4 = rate(t + h, r + h * k3);
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

/// Growth state of one cell, advanced step by step as the solid fraction
/// evolves.
///
/// Before `S` first turns negative the grain does not grow. Once a valid
/// value has been seen, intervals with `S >= 0` reuse the last valid growth
/// parameter and set `flagged`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrainGrowth {
    pub radius: f64,
    pub last_lambda: Option<f64>,
    pub flagged: bool,
    pub started: bool,
    pub finished: bool,
}

impl GrainGrowth {
    pub fn new(r0: f64) -> Self {
        Self { radius: r0, last_lambda: None, flagged: false, started: false, finished: false }
    }

    fn lambda_at(&self, fs: f64, partition: f64) -> f64 {
        match growth_parameter(supersaturation(fs, partition)) {
            Some(l) => l,
            None => self.last_lambda.unwrap_or(0.0),
        }
    }

    /// Advances over one time step with the solid fraction varying linearly
    /// from `fs0` to `fs1`.
    pub fn advance(&mut self, p: &MicroParams, t0: f64, t1: f64, fs0: f64, fs1: f64) {
        if self.finished || t1 <= t0 || fs1 <= 0.0 {
            return;
        }
        self.started = true;
        let fs0 = fs0.clamp(0.0, 1.0);
        let fs1 = fs1.clamp(0.0, 1.0);
        let subs = if (fs1 - fs0).abs() > 0.1 { 10 } else { 1 };
        let h = (t1 - t0) / subs as f64;
        let fs_at = |t: f64| fs0 + (fs1 - fs0) * (t - t0) / (t1 - t0);
        for i in 0..subs {
            let (a, b) = (t0 + i as f64 * h, t0 + (i + 1) as f64 * h);
            let this = *self;
            self.radius = rk4_growth(self.radius, p.diffusivity, a, b, 1, |t| this.lambda_at(fs_at(t).min(1.0 - 1e-15), p.partition));
            let fs_end = fs_at(b).min(1.0 - 1e-15);
            match growth_parameter(supersaturation(fs_end, p.partition)) {
                Some(l) => self.last_lambda = Some(l),
                None if self.last_lambda.is_some() => self.flagged = true,
                None => {}
            }
        }
        if fs1 >= 1.0 {
            self.finished = true;
        }
    }

    /// Final radius, or NaN when the growth parameter never became valid.
    pub fn result(&self, r0: f64) -> f64 {
        if !self.started {
            r0
        } else if self.last_lambda.is_none() {
            f64::NAN
        } else {
            self.radius
        }
    }
}

/// Final grain radius (m) from a solid-fraction time series. NaN marks a
/// cell whose growth parameter was never valid.
pub fn grain_growth(times: &[f64], fs: &[f64], p: &MicroParams) -> Result<f64, MicroError> {
    if times.len() != fs.len() {
        return Err(MicroError::HistoryMismatch { times: times.len(), fractions: fs.len() });
    }
    let mut g = GrainGrowth::new(p.r0);
    for k in 1..times.len() {
        g.advance(p, times[k - 1], times[k], fs[k - 1], fs[k]);
    }
    Ok(g.result(p.r0))
}

/// Per-cell thermal milestones recorded while a simulation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalHistory {
    pub t_liquidus: f64,
    pub t_solidus: f64,
    /// Threshold below which a cell counts as fully solid.
    pub t_full_solid: f64,
    /// Time each cell first fell below the liquidus.
    pub liquidus_time: Vec<Option<f64>>,
    /// Time each cell first fell below the solidus.
    pub solidus_time: Vec<Option<f64>>,
    /// Time each cell first fell below the full-solid threshold.
    pub solid_time: Vec<Option<f64>>,
    pub grains: Vec<GrainGrowth>,
    pub params: MicroParams,
}

fn crossing(t0: f64, t1: f64, v0: f64, v1: f64, level: f64) -> Option<f64> {
    if v0 >= level && v1 < level {
        Some(t0 + (t1 - t0) * (v0 - level) / (v0 - v1))
    } else {
        None
    }
}

impl ThermalHistory {
    pub fn new(
        initial: &[f64],
        t0: f64,
        t_liquidus: f64,
        t_solidus: f64,
        t_full_solid: f64,
        params: MicroParams,
    ) -> Self {
        let below = |level: f64| initial.iter().map(|&t| (t < level).then_some(t0)).collect::<Vec<_>>();
        Self {
            t_liquidus,
            t_solidus,
            t_full_solid,
            liquidus_time: below(t_liquidus),
            solidus_time: below(t_solidus),
            solid_time: below(t_full_solid),
            grains: vec![GrainGrowth::new(params.r0); initial.len()],
            params,
        }
    }

    /// Records one time step.
    pub fn record(&mut self, t0: f64, t1: f64, temp0: &[f64], temp1: &[f64], fs0: &[f64], fs1: &[f64]) {
        for c in 0..temp0.len() {
            let (a, b) = (temp0[c], temp1[c]);
            for (slot, level) in [
                (&mut self.liquidus_time[c], self.t_liquidus),
                (&mut self.solidus_time[c], self.t_solidus),
                (&mut self.solid_time[c], self.t_full_solid),
            ] {
                if slot.is_none() {
                    *slot = crossing(t0, t1, a, b, level);
                }
            }
            self.grains[c].advance(&self.params, t0, t1, fs0[c], fs1[c]);
        }
    }

    /// Average cooling rate through the freezing range per cell (K/s); NaN
    /// for cells that have not solidified or did so within zero time.
    pub fn cooling_rates(&self) -> Vec<f64> {
        self.liquidus_time
            .iter()
            .zip(&self.solidus_time)
            .map(|(l, s)| match (l, s) {
                (Some(l), Some(s)) => cooling_rate(self.t_liquidus, self.t_solidus, *l, *s),
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn sdas_field(&self) -> Vec<f64> {
        self.cooling_rates().iter().map(|&r| sdas_with(&self.params, r).unwrap_or(f64::NAN)).collect()
    }

    pub fn yield_field(&self) -> Vec<f64> {
        self.sdas_field().iter().map(|&l| yield_strength_with(&self.params, l).unwrap_or(f64::NAN)).collect()
    }

    /// Grain radius per cell (m); NaN for cells without valid growth.
    pub fn grain_field(&self) -> Vec<f64> {
        self.grains
            .iter()
            .map(|g| if g.finished { g.result(self.params.r0) } else { f64::NAN })
            .collect()
    }

    /// Time the last cell became fully solid, if all have.
    pub fn solidification_time(&self) -> Option<f64> {
        self.solid_time.iter().try_fold(0.0f64, |m, t| t.map(|t| m.max(t)))
    }
}

/// `(T_liq - T_sol) / (t_sol - t_liq)`, NaN when the interval is empty.
pub fn cooling_rate(t_liquidus: f64, t_solidus: f64, time_liquidus: f64, time_solidus: f64) -> f64 {
    let dt = time_solidus - time_liquidus;
    if dt > 0.0 {
        (t_liquidus - t_solidus) / dt
    } else {
        f64::NAN
    }
}

/// Maximum over finite entries, NaN when there are none.
pub fn finite_max(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| x.is_finite()).fold(f64::NAN, f64::max)
}

/// Minimum over finite entries, NaN when there are none.
pub fn finite_min(v: &[f64]) -> f64 {
    v.iter().copied().filter(|x| x.is_finite()).fold(f64::NAN, f64::min)
}
