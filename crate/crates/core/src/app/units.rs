use super::ConfigError;

/// Physical dimension a configuration value must carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Temperature,
    TemperatureDifference,
    Time,
    Length,
    Density,
    Viscosity,
    SpecificHeat,
    Conductivity,
    SpecificEnergy,
    Expansion,
    CoolingRate,
    Acceleration,
    Diffusivity,
    Composition,
    Dimensionless,
}

/// `(unit, dimension, factor, offset)`: SI value = factor * value + offset.
const UNITS: &[(&str, Dimension, f64, f64)] = {
    use Dimension::*;
    &[
        ("K", Temperature, 1.0, 0.0),
        ("degC", Temperature, 1.0, 273.15),
        ("s", Time, 1.0, 0.0),
        ("ms", Time, 1e-3, 0.0),
        ("min", Time, 60.0, 0.0),
        ("h", Time, 3600.0, 0.0),
        ("m", Length, 1.0, 0.0),
        ("cm", Length, 1e-2, 0.0),
        ("mm", Length, 1e-3, 0.0),
        ("um", Length, 1e-6, 0.0),
        ("kg/m3", Density, 1.0, 0.0),
        ("g/cm3", Density, 1e3, 0.0),
        ("Pa.s", Viscosity, 1.0, 0.0),
        ("mPa.s", Viscosity, 1e-3, 0.0),
        ("J/kg/K", SpecificHeat, 1.0, 0.0),
        ("kJ/kg/K", SpecificHeat, 1e3, 0.0),
        ("W/m/K", Conductivity, 1.0, 0.0),
        ("J/kg", SpecificEnergy, 1.0, 0.0),
        ("kJ/kg", SpecificEnergy, 1e3, 0.0),
        ("1/K", Expansion, 1.0, 0.0),
        ("K/s", CoolingRate, 1.0, 0.0),
        ("K/min", CoolingRate, 1.0 / 60.0, 0.0),
        ("m/s2", Acceleration, 1.0, 0.0),
        ("m2/s", Diffusivity, 1.0, 0.0),
        ("wt%", Composition, 1.0, 0.0),
    ]
};

impl Dimension {
    /// Unit in which values of this dimension are written back.
    pub fn si_unit(self) -> &'static str {
        match self {
            Dimension::TemperatureDifference => "K",
            Dimension::Dimensionless => "",
            d => UNITS.iter().find(|u| u.1 == d && u.2 == 1.0 && u.3 == 0.0).map(|u| u.0).unwrap_or(""),
        }
    }
}

fn split(text: &str) -> Result<(f64, &str), String> {
    let text = text.trim();
    let (num, unit) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let v: f64 = num.parse().map_err(|_| format!("`{num}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{num}` is not finite"));
    }
    Ok((v, unit))
}

fn lookup(unit: &str, dim: Dimension) -> Result<(f64, f64), String> {
    let (want, absolute) = match dim {
        Dimension::TemperatureDifference => (Dimension::Temperature, false),
        d => (d, true),
    };
    if want == Dimension::Dimensionless {
        return if unit.is_empty() || unit == "-" { Ok((1.0, 0.0)) } else { Err(format!("expected a plain number, found unit `{unit}`")) };
    }
    match UNITS.iter().find(|u| u.0 == unit) {
        Some(&(_, d, factor, offset)) if d == want => Ok((factor, if absolute { offset } else { 0.0 })),
        Some(&(_, d, _, _)) => Err(format!("unit `{unit}` is a {d:?}, expected {dim:?}")),
        None if unit.is_empty() => Err(format!("missing unit (expected {dim:?}, e.g. `{}`)", dim.si_unit())),
        None => Err(format!("unknown unit `{unit}`")),
    }
}

/// Parses `"<number> <unit>"` into SI units of the given dimension.
pub fn parse_quantity(key: &str, text: &str, dim: Dimension) -> Result<f64, ConfigError> {
    let err = |msg: String| ConfigError::Value { key: key.to_string(), msg };
    let (v, unit) = split(text).map_err(err)?;
    let (factor, offset) = lookup(unit, dim).map_err(err)?;
    Ok(factor * v + offset)
}

/// Parses `"<n1> <n2> ... <unit>"` with one unit for all components.
pub fn parse_vector(key: &str, text: &str, dim: Dimension) -> Result<Vec<f64>, ConfigError> {
    let err = |msg: String| ConfigError::Value { key: key.to_string(), msg };
    let words: Vec<&str> = text.split_whitespace().collect();
    let (nums, unit) = match words.last() {
        Some(w) if w.parse::<f64>().is_err() => (&words[..words.len() - 1], *w),
        _ => (&words[..], ""),
    };
    let (factor, offset) = lookup(unit, dim).map_err(err)?;
    nums.iter()
        .map(|w| w.parse::<f64>().map(|v| factor * v + offset).map_err(|_| err(format!("`{w}` is not a number"))))
        .collect()
}

/// Formats an SI value so that [`parse_quantity`] reads it back exactly.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value} {}", dim.si_unit()).trim_end().to_string()
}
