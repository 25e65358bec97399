//! Static analysis of one periodic cell: the effective constants that govern
//! the coarse limit, the first-order corrector χ(ξ), and the two-scale
//! reconstruction that dresses a coarse profile with its fast oscillation.
//!
//! For a 1D medium both effective constants are harmonic means,
//! E_eff = ⟨E⁻¹⟩⁻¹ and K_eff = ⟨K⁻¹⟩⁻¹, and the corrector slope is
//! χ_ξ = M̃/M̄ with M = 1/E — no cell PDE has to be solved, only period
//! means taken, which is what this module does.

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{EquationKind, Error, Result};
use crate::field::{average, average_with, PeriodicField, Quadrature};

/// Constant-coefficient surrogate of a periodic medium.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    /// Period mean of the density (wave) — kept for diffusion too, where it is 1-like plumbing.
    pub rho_bar: f64,
    /// Harmonic mean of the stiffness/conductivity.
    pub coeff_eff: f64,
    /// Which equation family the surrogate belongs to.
    pub kind: EquationKind,
    /// Node count the means were taken with, for provenance.
    pub quad_used: Quadrature,
}

impl EffectiveModel {
    /// Coarse wave speed √(E_eff/ρ̄); only meaningful for the wave family.
    pub fn wave_speed(&self) -> Result<f64> {
        match self.kind {
            EquationKind::Wave => Ok((self.coeff_eff / self.rho_bar).sqrt()),
            EquationKind::Diffusion => Err(Error::KindMismatch {
                expected: EquationKind::Wave,
                got: EquationKind::Diffusion,
            }),
        }
    }
}

/// Harmonic mean ⟨field⁻¹⟩⁻¹ of a strictly positive profile.
///
/// The reciprocal is taken pointwise at the quadrature nodes, which is the
/// same value `1/average(reciprocal_field(...))` gives for the closed-form
/// kinds, without routing smooth profiles through an interpolated table.
pub fn effective_coefficient(field: &PeriodicField, quad: Quadrature) -> Result<f64> {
    field.validate()?;
    let mean_reciprocal = average_with(quad, |xi| 1.0 / field.evaluate(xi));
    Ok(1.0 / mean_reciprocal)
}

/// Bundle the two period means a coarse solver needs.
pub fn build_effective_model(
    rho: &PeriodicField,
    coeff: &PeriodicField,
    kind: EquationKind,
    quad: Quadrature,
) -> Result<EffectiveModel> {
    let rho_bar = match kind {
        EquationKind::Wave => average(rho, quad)?,
        // no density appears in the diffusion balance; pin the mean to one
        // so a single surrogate type serves both families
        EquationKind::Diffusion => {
            rho.validate()?;
            1.0
        }
    };
    let coeff_eff = effective_coefficient(coeff, quad)?;
    Ok(EffectiveModel {
        rho_bar,
        coeff_eff,
        kind,
        quad_used: quad,
    })
}

/// Residual of the closed-form identity Ē + ⟨ẼM̃⟩/M̄ = 1/M̄ that links the
/// plain mean, the fluctuation product, and the harmonic mean.  With E and
/// M = 1/E sampled at the same nodes this vanishes to round-off for *any*
/// positive profile, so a visible residual means the averaging is broken.
pub fn identity_residual(coeff: &PeriodicField, quad: Quadrature) -> Result<f64> {
    coeff.validate()?;
    let n = quad.sample_count() as f64;
    let pairs: Vec<(f64, f64)> = quad
        .nodes()
        .map(|xi| {
            let e = coeff.evaluate(xi);
            (e, 1.0 / e)
        })
        .collect();
    let e_bar = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let m_bar = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let cross = pairs
        .iter()
        .map(|(e, m)| (e - e_bar) * (m - m_bar))
        .sum::<f64>()
        / n;
    Ok((e_bar + cross / m_bar - 1.0 / m_bar).abs())
}

/// First-order corrector χ(ξ) sampled on a uniform cell grid.
///
/// χ solves χ_ξ = (M(ξ) − M̄)/M̄ with M = 1/coeff, normalised to zero mean.
/// The slope integrates to zero over one period by construction, so the
/// table closes up periodically; `closure()` reports the leftover.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorTable {
    chi: Vec<f64>,
    closure: f64,
}

impl CorrectorTable {
    /// Samples χ(ξ_j) at ξ_j = 2πj/G.
    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    pub fn grid_size(&self) -> usize {
        self.chi.len()
    }

    /// Defect of the discrete loop: the cumulative slope integral after one
    /// full period.  Zero up to round-off.
    pub fn closure(&self) -> f64 {
        self.closure
    }

    /// χ at arbitrary ξ by periodic linear interpolation.
    pub fn evaluate(&self, xi: f64) -> f64 {
        let g = self.chi.len();
        let pos = xi.rem_euclid(TAU) / TAU * g as f64;
        let j = (pos.floor() as usize).min(g - 1);
        let u = pos - j as f64;
        self.chi[j] * (1.0 - u) + self.chi[(j + 1) % g] * u
    }

    /// Write `xi,chi` rows, one per grid node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let h = TAU / self.chi.len() as f64;
        let xi: Vec<f64> = (0..self.chi.len()).map(|j| j as f64 * h).collect();
        crate::io::write_two_column_csv(path, ("xi", "chi"), &xi, &self.chi)
    }
}

/// Integrate the corrector slope over one cell with cumulative midpoint sums.
///
/// The defining mean M̄ is taken on the table's own midpoints, so the
/// discrete slopes sum to exactly zero and the table closes periodically no
/// matter how rough the profile is; `quad` only validates the profile here.
/// Values land on the nodes ξ_j = 2πj/G, then the whole table is shifted to
/// zero sample mean.
pub fn build_corrector(
    coeff: &PeriodicField,
    quad: Quadrature,
    grid_size: usize,
) -> Result<CorrectorTable> {
    coeff.validate()?;
    let _ = quad; // profile validated above; the defining mean must match the table grid
    if grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "corrector grid needs at least 2 nodes, got {grid_size}"
        )));
    }
    let g = grid_size;
    let h = TAU / g as f64;
    let m_mid: Vec<f64> = (0..g)
        .map(|j| 1.0 / coeff.evaluate((j as f64 + 0.5) * h))
        .collect();
    let m_bar = m_mid.iter().sum::<f64>() / g as f64;

    let mut chi = vec![0.0f64; g];
    let mut running = 0.0;
    for j in 1..g {
        running += (m_mid[j - 1] / m_bar - 1.0) * h;
        chi[j] = running;
    }
    let closure = running + (m_mid[g - 1] / m_bar - 1.0) * h;

    let mean = chi.iter().sum::<f64>() / g as f64;
    for v in &mut chi {
        *v -= mean;
    }
    Ok(CorrectorTable { chi, closure })
}

/// Dress a coarse profile with its first-order fast correction:
///
///   a(x) ≈ b̄(εx) + ε·χ(x mod 2π)·b̄_r(εx)
///
/// evaluated at every point of `x_grid`.  Degenerates to the coarse profile
/// itself as ε → 0.
pub fn reconstruct_two_scale(
    chi: &CorrectorTable,
    coarse: impl Fn(f64) -> f64,
    coarse_gradient: impl Fn(f64) -> f64,
    epsilon: f64,
    x_grid: &[f64],
) -> Vec<f64> {
    x_grid
        .iter()
        .map(|&x| {
            let r = epsilon * x;
            coarse(r) + epsilon * chi.evaluate(x) * coarse_gradient(r)
        })
        .collect()
}
