use super::SolidifyError;
use crate::mesh::Point3;

/// Piecewise-linear property table, clamped beyond its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTable {
    points: Vec<(f64, f64)>,
}

impl PropertyTable {
    /// Builds a table from `(temperature, value)` pairs; they are sorted by
    /// temperature.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, SolidifyError> {
        if points.is_empty() || points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(SolidifyError::InvalidMaterial("property table needs finite entries".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(SolidifyError::InvalidMaterial("property table has repeated temperatures".into()));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self { points: vec![(0.0, value)] }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.points;
        if t <= p[0].0 {
            return p[0].1;
        }
        if t >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let i = p.partition_point(|q| q.0 <= t);
        let (a, b) = (p[i - 1], p[i]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    /// Applies `f` to every value.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { points: self.points.iter().map(|&(t, v)| (t, f(v))).collect() }
    }
}

/// Thermophysical and solidification properties of a binary alloy.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    /// kg/m^3
    pub density: f64,
    /// Pa s
    pub viscosity: f64,
    /// J/(kg K)
    pub specific_heat: f64,
    /// W/(m K) against temperature.
    pub conductivity: PropertyTable,
    /// J/kg
    pub latent_heat: f64,
    /// Thermal expansion coefficient, 1/K.
    pub expansion: f64,
    /// Boussinesq reference temperature, K.
    pub t_ref: f64,
    pub partition: f64,
    pub t_freeze: f64,
    pub t_liquidus: f64,
    pub t_solidus: f64,
    /// Half-width of the linear smear around the solidus, K.
    pub smear_width: f64,
    /// Dendrite arm spacing in the permeability law, m.
    pub dendrite_spacing: f64,
    /// Solute diffusivity, m^2/s.
    pub diffusivity: f64,
    /// Nominal composition, wt%.
    pub c0: f64,
    pub gravity: Point3,
}

impl MaterialModel {
    /// Hypoeutectic Al-Si with the given silicon content. The liquidus
    /// follows a straight line from the pure-aluminium melting point to the
    /// eutectic; the partition coefficient is the ratio of liquidus to
    /// solidus slopes.
    pub fn al_si(c0: f64) -> Self {
        let (t_freeze, t_eutectic) = (933.15, 850.15);
        let (c_eutectic, c_solid_max) = (12.6, 1.65);
        let liquidus_slope = (t_eutectic - t_freeze) / c_eutectic;
        let solidus_slope = (t_eutectic - t_freeze) / c_solid_max;
        Self {
            density: 2550.0,
            viscosity: 1.3e-3,
            specific_heat: 1080.0,
            conductivity: PropertyTable::new(vec![(700.0, 160.0), (850.0, 150.0), (870.0, 80.0), (1000.0, 90.0)]).unwrap(),
            latent_heat: 4.3e5,
            expansion: 1.2e-4,
            t_ref: t_freeze,
            partition: liquidus_slope / solidus_slope,
            t_freeze,
            t_liquidus: t_freeze + liquidus_slope * c0,
            t_solidus: t_eutectic,
            smear_width: 2.0,
            dendrite_spacing: 1e-5,
            diffusivity: 1e-9,
            c0,
            gravity: Point3::new(0.0, 0.0, -9.81),
        }
    }

    /// Liquidus slope `(T_liq - T_f) / C_0` in K/wt%.
    pub fn liquidus_slope(&self) -> f64 {
        (self.t_liquidus - self.t_freeze) / self.c0
    }

    pub fn validate(&self) -> Result<(), SolidifyError> {
        let bad = |m: &str| Err(SolidifyError::InvalidMaterial(m.into()));
        for (name, v) in [
            ("density", self.density),
            ("specific heat", self.specific_heat),
            ("latent heat", self.latent_heat),
            ("smear width", self.smear_width),
            ("dendrite spacing", self.dendrite_spacing),
            ("solute diffusivity", self.diffusivity),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.viscosity >= 0.0) {
            return bad("viscosity must be non-negative");
        }
        if !(self.partition > 0.0 && self.partition < 1.0) {
            return bad(&format!("partition coefficient must lie in (0, 1), got {}", self.partition));
        }
        if !(self.t_solidus < self.t_liquidus && self.t_liquidus < self.t_freeze) {
            return bad(&format!(
                "need T_sol < T_liq < T_f, got {} / {} / {}",
                self.t_solidus, self.t_liquidus, self.t_freeze
            ));
        }
        if self.t_solidus + self.smear_width >= self.t_liquidus {
            return bad("smear band reaches the liquidus");
        }
        if self.conductivity.points().iter().any(|&(_, k)| !(k > 0.0)) {
            return bad("conductivity must be positive");
        }
        Ok(())
    }

    /// Temperature below which a cell is tagged solid.
    pub fn solid_threshold(&self) -> f64 {
        self.t_solidus - self.smear_width
    }

    pub(crate) fn scheil(&self, t: f64) -> (f64, f64) {
        let span = self.t_liquidus - self.t_freeze;
        let r = (t - self.t_freeze) / span;
        let e = 1.0 / (self.partition - 1.0);
        let p = r.powf(e);
        (1.0 - p, -e * p / r / span)
    }
}

/// Smeared Scheil solid fraction and its derivative with respect to
/// temperature.
///
/// Above the liquidus the alloy is liquid, below `T_sol - T_eps` it is
/// solid. Between `T_sol + T_eps` and the liquidus the Scheil power law
/// applies, and across the smear band the fraction rises linearly from the
/// Scheil value at `T_sol + T_eps` to one.
pub fn solid_fraction(t: f64, mat: &MaterialModel) -> (f64, f64) {
    let lo = mat.t_solidus - mat.smear_width;
    let hi = mat.t_solidus + mat.smear_width;
    if t >= mat.t_liquidus {
        (0.0, 0.0)
    } else if t < lo {
        (1.0, 0.0)
    } else if t <= hi {
        let f_hat = mat.scheil(hi).0;
        let slope = -(1.0 - f_hat) / (2.0 * mat.smear_width);
        (f_hat + (t - hi) * slope, slope)
    } else {
        mat.scheil(t)
    }
}

/// Temperature at which the smeared curve takes the value `fs`, for
/// `0 < fs < 1`.
pub fn solid_fraction_inverse(fs: f64, mat: &MaterialModel) -> f64 {
    let hi = mat.t_solidus + mat.smear_width;
    let f_hat = mat.scheil(hi).0;
    if fs > f_hat {
        let slope = -(1.0 - f_hat) / (2.0 * mat.smear_width);
        hi + (fs - f_hat) / slope
    } else {
        let r = (1.0 - fs).powf(mat.partition - 1.0);
        mat.t_freeze + (mat.t_liquidus - mat.t_freeze) * r
    }
}

/// Blake-Kozeny permeability `lambda^2 (1 - fs)^3 / (180 fs^2)`.
pub fn permeability(fs: f64, spacing: f64) -> f64 {
    spacing * spacing * (1.0 - fs).powi(3) / (180.0 * fs * fs)
}

/// Darcy coefficient `mu / K`, zero for liquid and capped at
/// `cap_factor * rho / dt`.
pub fn drag_coefficient(fs: f64, mat: &MaterialModel, dt: f64, cap_factor: f64) -> f64 {
    let cap = cap_factor * mat.density / dt;
    if fs <= 0.0 {
        return 0.0;
    }
    if fs >= 1.0 {
        return cap;
    }
    (mat.viscosity / permeability(fs, mat.dendrite_spacing)).min(cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat() -> MaterialModel {
        MaterialModel { t_freeze: 933.0, t_liquidus: 866.0, t_solidus: 780.0, partition: 0.13, ..MaterialModel::al_si(10.0) }
    }

    #[test]
    fn scheil_branch_value() {
        let (fs, d) = solid_fraction(800.0, &mat());
        assert!((fs - 0.545).abs() < 1e-3, "{fs}");
        assert!(d < 0.0);
    }

    #[test]
    fn inverse_round_trips() {
        let m = mat();
        for t in [865.0, 830.0, 790.0, 781.0, 779.0, 778.5] {
            let f = solid_fraction(t, &m).0;
            assert!((solid_fraction_inverse(f, &m) - t).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn pure_phases() {
        let m = mat();
        assert_eq!(solid_fraction(m.t_liquidus + 1.0, &m), (0.0, 0.0));
        assert_eq!(solid_fraction(m.solid_threshold() - 1.0, &m), (1.0, 0.0));
    }

    #[test]
    fn continuous_at_band_edges() {
        let m = mat();
        for t in [m.t_liquidus, m.t_solidus + m.smear_width, m.solid_threshold()] {
            let a = solid_fraction(t - 1e-9, &m).0;
            let b = solid_fraction(t + 1e-9, &m).0;
            assert!((a - b).abs() < 1e-6, "jump at {t}: {a} vs {b}");
        }
    }

    #[test]
    fn al_si_phase_diagram() {
        let m = MaterialModel::al_si(10.0);
        assert!((m.liquidus_slope() + 6.587).abs() < 1e-3);
        assert!((m.partition - 0.131).abs() < 1e-3);
        assert!((m.t_liquidus - 867.28).abs() < 0.01);
        m.validate().unwrap();
    }

    #[test]
    fn permeability_and_drag() {
        let k = permeability(0.5, 1e-5);
        assert!((k - 2.7778e-13).abs() < 1e-16);
        let m = mat();
        assert_eq!(drag_coefficient(0.0, &m, 0.1, 1e12), 0.0);
        assert_eq!(drag_coefficient(1.0, &m, 0.1, 1e12), 1e12 * m.density / 0.1);
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let t = PropertyTable::new(vec![(373.2, 57.42), (273.2, 61.282), (973.2, 37.7), (573.2, 30.1)]).unwrap();
        assert_eq!(t.eval(0.0), 61.282);
        assert_eq!(t.eval(2000.0), 37.7);
        assert!((t.eval(323.2) - 0.5 * (61.282 + 57.42)).abs() < 1e-12);
        assert!(PropertyTable::new(vec![]).is_err());
    }

    #[test]
    fn invalid_ordering_rejected() {
        let m = MaterialModel { t_solidus: 900.0, ..mat() };
        assert!(m.validate().is_err());
    }
}
