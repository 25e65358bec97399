//! Conversion of dimensional inputs to the dimensionless setup.
//!
//! Given the coefficient period l, the large scale λ (both lengths), a
//! reference line density ρ₀ and modulus E₀, the scale ratio is ε = l/λ and
//! the time unit is T = λ·√(ρ₀/E₀); outputs are interpreted through
//! x = l·x† and t = T·t†.

use anyhow::{bail, Result};

/// Physical inputs: period and large scale in meters, reference density and
/// modulus in consistent line units.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalSpec {
    pub l: f64,
    pub lambda: f64,
    pub rho0: f64,
    pub e0: f64,
}

/// What the conversion produces: ε and the time unit, plus the reminder of
/// how to map dimensionless output back to physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleReport {
    pub epsilon: f64,
    /// T = λ·√(ρ₀/E₀); one dimensionless time unit is T seconds.
    pub time_unit: f64,
}

impl ScaleReport {
    /// 1/ε as the integer the periodic grid needs; errors when the two
    /// lengths are not commensurate.
    pub fn integral_inverse(&self) -> Result<usize> {
        let inv = 1.0 / self.epsilon;
        if (inv - inv.round()).abs() > 1e-9 * inv.round().max(1.0) {
            bail!(
                "lambda/l = {inv} is not an integer; the domain must hold a \
                 whole number of coefficient cells"
            );
        }
        Ok(inv.round() as usize)
    }

    pub fn describe(&self) -> String {
        format!(
            "epsilon = {}  (x = l*x_dimless, t = {}*t_dimless seconds)",
            self.epsilon, self.time_unit
        )
    }
}

/// ε = l/λ and T = λ·√(ρ₀/E₀).  ε ≥ 1 is not a small parameter: that is an
/// error unless explicitly overridden, in which case it only warns.
pub fn nondimensionalize(spec: &DimensionalSpec, allow_large_epsilon: bool) -> Result<ScaleReport> {
    for (name, v) in [
        ("l", spec.l),
        ("lambda", spec.lambda),
        ("rho0", spec.rho0),
        ("e0", spec.e0),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            bail!("dimensional quantity '{name}' must be positive and finite, got {v}");
        }
    }
    let epsilon = spec.l / spec.lambda;
    if spec.l >= spec.lambda {
        if allow_large_epsilon {
            eprintln!(
                "warning: l = {} >= lambda = {}; epsilon = {epsilon} is not a small parameter",
                spec.l, spec.lambda
            );
        } else {
            bail!(
                "l = {} >= lambda = {} gives epsilon = {epsilon}, not a small \
                 parameter (pass --allow-large-epsilon to proceed anyway)",
                spec.l,
                spec.lambda
            );
        }
    }
    Ok(ScaleReport {
        epsilon,
        time_unit: spec.lambda * (spec.rho0 / spec.e0).sqrt(),
    })
}
