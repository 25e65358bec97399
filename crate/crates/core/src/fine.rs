//! Explicit finite-difference solvers on the fully resolved ("fine") grid,
//! where every oscillation of the coefficients is represented.
//!
//! The domain is x ∈ [0, 2π/ε) with periodic ends, so it holds exactly 1/ε
//! coefficient cells; the oscillation scale fixes ε and the resolution is
//! stated per cell.  The wave equation is integrated in the scaled form
//! (E a_x)_x = ε²ρ a_tt by leapfrog over flux differences with
//! face-centred E; diffusion a_t = (K a_x)_x uses forward Euler on the same
//! flux stencil.  Sampling E on faces keeps the discrete operator
//! self-adjoint, which is what makes the leapfrog energy
//!
//!   H = Σ_i [ ε²ρ_i v_{i+1/2}² + E_{i+1/2}·(∂a)_i·(∂a′)_i ] · h/2
//!
//! (old/new gradient product) an exact invariant of the scheme, and makes
//! the discrete medium homogenize to the harmonic mean of the face samples.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use crate::cell::CorrectorTable;
use crate::error::{Error, Result};
use crate::field::PeriodicField;

/// Periodic fine grid: 1/ε coefficient cells, `points_per_period` nodes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid1D {
    inv_epsilon: usize,
    points_per_period: usize,
}

impl Grid1D {
    /// `inv_epsilon` = 1/ε must be an integer ≥ 4 so the domain holds a few
    /// cells and ε ≤ 1/4 stays a genuinely small parameter.
    pub fn new(inv_epsilon: usize, points_per_period: usize) -> Result<Self> {
        if inv_epsilon < 4 {
            return Err(Error::InvalidParameter(format!(
                "1/epsilon must be an integer >= 4, got {inv_epsilon}"
            )));
        }
        if points_per_period < 2 {
            return Err(Error::InvalidParameter(format!(
                "points per period must be >= 2, got {points_per_period}"
            )));
        }
        Ok(Grid1D {
            inv_epsilon,
            points_per_period,
        })
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.inv_epsilon as f64
    }

    pub fn inv_epsilon(&self) -> usize {
        self.inv_epsilon
    }

    pub fn points_per_period(&self) -> usize {
        self.points_per_period
    }

    /// Node spacing h = 2π / points_per_period.
    pub fn h(&self) -> f64 {
        TAU / self.points_per_period as f64
    }

    pub fn n_total(&self) -> usize {
        self.inv_epsilon * self.points_per_period
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// x_i reduced into the cell, computed from the index so nodes that are
    /// one period apart get bit-identical ξ.
    pub fn xi_node(&self, i: usize) -> f64 {
        (i % self.points_per_period) as f64 * self.h()
    }

    /// ξ of the face between nodes i and i+1.
    pub fn xi_face(&self, i: usize) -> f64 {
        ((i % self.points_per_period) as f64 + 0.5) * self.h()
    }

    pub fn x_values(&self) -> Vec<f64> {
        (0..self.n_total()).map(|i| self.x(i)).collect()
    }
}

/// Named initial states for both solvers.  All of them start at rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcPreset {
    /// a(x,0) = sin(εx): the lowest standing mode of the domain.
    SineMode,
    /// A bump exp(−(r−π)²/(2·0.5²)) in the slow variable r = εx.
    Gaussian,
    /// sin(εx) dressed with its first-order corrector, ε·χ(x)·cos(εx),
    /// so the fine run starts already on the two-scale ansatz.
    WellPrepared,
}

/// A concrete initial state.  The preset variants know their slow profile in
/// closed form; `FromSamples` carries explicit per-node arrays (used e.g. to
/// restart a run with reversed velocity).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    SineMode {
        epsilon: f64,
    },
    Gaussian {
        epsilon: f64,
        center: f64,
        width: f64,
    },
    WellPrepared {
        epsilon: f64,
        corrector: CorrectorTable,
    },
    FromSamples {
        displacement: Vec<f64>,
        velocity: Vec<f64>,
    },
}

/// Build a preset initial state for scale ratio ε.  `WellPrepared` needs the
/// corrector table of the stiffness profile it is meant to match.
pub fn make_initial_condition(
    preset: IcPreset,
    epsilon: f64,
    corrector: Option<&CorrectorTable>,
) -> Result<InitialCondition> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(match preset {
        IcPreset::SineMode => InitialCondition::SineMode { epsilon },
        // TODO: expose the gaussian center/width once something needs to vary them
        IcPreset::Gaussian => InitialCondition::Gaussian {
            epsilon,
            center: PI,
            width: 0.5,
        },
        IcPreset::WellPrepared => InitialCondition::WellPrepared {
            epsilon,
            corrector: corrector.ok_or(Error::MissingCorrector)?.clone(),
        },
    })
}

impl InitialCondition {
    /// The ε the preset was built for, if it has one.
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            InitialCondition::SineMode { epsilon }
            | InitialCondition::Gaussian { epsilon, .. }
            | InitialCondition::WellPrepared { epsilon, .. } => Some(*epsilon),
            InitialCondition::Zero | InitialCondition::FromSamples { .. } => None,
        }
    }

    /// Slow profile b(r) underlying the preset, where one exists in closed form.
    pub fn coarse_profile(&self, r: f64) -> Option<f64> {
        match self {
            InitialCondition::Zero => Some(0.0),
            InitialCondition::SineMode { .. } | InitialCondition::WellPrepared { .. } => {
                Some(r.sin())
            }
            InitialCondition::Gaussian { center, width, .. } => {
                Some((-(r - center).powi(2) / (2.0 * width * width)).exp())
            }
            InitialCondition::FromSamples { .. } => None,
        }
    }

    /// d/dr of [`coarse_profile`].
    pub fn coarse_gradient(&self, r: f64) -> Option<f64> {
        match self {
            InitialCondition::Zero => Some(0.0),
            InitialCondition::SineMode { .. } | InitialCondition::WellPrepared { .. } => {
                Some(r.cos())
            }
            InitialCondition::Gaussian { center, width, .. } => Some(
                -(r - center) / (width * width)
                    * (-(r - center).powi(2) / (2.0 * width * width)).exp(),
            ),
            InitialCondition::FromSamples { .. } => None,
        }
    }

    fn sample_displacement(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        let n = grid.n_total();
        match self {
            InitialCondition::Zero => Ok(vec![0.0; n]),
            InitialCondition::SineMode { .. } | InitialCondition::Gaussian { .. } => Ok((0..n)
                .map(|i| self.coarse_profile(grid.epsilon() * grid.x(i)).unwrap())
                .collect()),
            InitialCondition::WellPrepared { epsilon, corrector } => Ok((0..n)
                .map(|i| {
                    let r = grid.epsilon() * grid.x(i);
                    r.sin() + epsilon * corrector.evaluate(grid.xi_node(i)) * r.cos()
                })
                .collect()),
            InitialCondition::FromSamples { displacement, .. } => {
                if displacement.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "initial samples have {} nodes, grid has {n}",
                        displacement.len()
                    )));
                }
                Ok(displacement.clone())
            }
        }
    }

    fn sample_velocity(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        let n = grid.n_total();
        match self {
            InitialCondition::FromSamples { velocity, .. } => {
                if velocity.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "initial velocity has {} nodes, grid has {n}",
                        velocity.len()
                    )));
                }
                Ok(velocity.clone())
            }
            // every preset starts at rest
            _ => Ok(vec![0.0; n]),
        }
    }

    fn check_epsilon(&self, grid: &Grid1D) -> Result<()> {
        if let Some(e) = self.epsilon() {
            if (e - grid.epsilon()).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "initial condition built for epsilon {e}, grid has {}",
                    grid.epsilon()
                )));
            }
        }
        Ok(())
    }
}

/// Which conserved quantity a run's diagnostic trace records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// Leapfrog energy, one value per step pair.
    Energy,
    /// Total mass h·Σa, one value per state including t = 0.
    Mass,
}

/// Space-time samples of one solver run plus its grid and step metadata.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub grid: Grid1D,
    /// Actual snapshot instants: the first completed step at or past each
    /// requested time, so no temporal interpolation is ever involved.
    pub times: Vec<f64>,
    /// One state per entry of `times`.
    pub snapshots: Vec<Vec<f64>>,
    /// Conserved-quantity trace over the whole run (see `diagnostic_kind`).
    pub diagnostics: Vec<f64>,
    pub diagnostic_kind: DiagnosticKind,
    /// Step actually used after applying the stability bound.
    pub dt: f64,
    pub steps_taken: usize,
    /// State at the end of the run; for waves the velocity is synchronised
    /// to the final step, so a run can be restarted (or reversed) from it.
    pub final_displacement: Vec<f64>,
    pub final_velocity: Vec<f64>,
}

impl SimulationResult {
    /// Worst relative wander of the conserved quantity over the run.
    /// The scale guards against identically-zero and zero-mean states.
    pub fn relative_drift(&self) -> f64 {
        if self.diagnostics.len() < 2 {
            return 0.0;
        }
        let d0 = self.diagnostics[0];
        let scale = match self.diagnostic_kind {
            DiagnosticKind::Energy => d0.abs(),
            DiagnosticKind::Mass => {
                let l1 = self.grid.h()
                    * self
                        .snapshots
                        .first()
                        .map(|s| s.iter().map(|v| v.abs()).sum::<f64>())
                        .unwrap_or(0.0);
                d0.abs() + l1
            }
        };
        if scale == 0.0 {
            return 0.0;
        }
        self.diagnostics
            .iter()
            .map(|d| (d - d0).abs())
            .fold(0.0, f64::max)
            / scale
    }

    /// Write one `<tag>_t<k>.csv` (header `x,value`) per snapshot into `dir`.
    pub fn write_snapshots(&self, dir: &Path, tag: &str) -> Result<Vec<std::path::PathBuf>> {
        let xs = self.grid.x_values();
        let mut paths = Vec::new();
        for (k, snap) in self.snapshots.iter().enumerate() {
            let path = dir.join(format!("{tag}_t{k}.csv"));
            crate::io::write_two_column_csv(&path, ("x", "value"), &xs, snap)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Snapshot plan: map each requested time to the first step at or past it.
/// Times must be finite, non-negative and within the run; steps that would
/// repeat are collapsed so recorded times stay strictly increasing.
pub(crate) fn plan_snapshots(
    output_times: &[f64],
    t_end: f64,
    dt: f64,
    n_steps: usize,
) -> Result<Vec<usize>> {
    let mut req: Vec<f64> = output_times.to_vec();
    if req.is_empty() {
        req.push(t_end);
    }
    for &t in &req {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("bad output time {t}")));
        }
        if t > t_end * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidParameter(format!(
                "output time {t} lies beyond t_end = {t_end}"
            )));
        }
    }
    req.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut steps = Vec::with_capacity(req.len());
    for t in req {
        let k = if t <= 0.0 {
            0
        } else {
            ((t - 1e-12 * t.max(1.0)) / dt).ceil() as usize
        };
        let k = k.min(n_steps);
        if steps.last() != Some(&k) {
            steps.push(k);
        }
    }
    Ok(steps)
}

pub(crate) fn number_of_steps(t_end: f64, dt: f64) -> usize {
    if t_end <= 0.0 {
        0
    } else {
        ((t_end - 1e-12 * t_end.max(1.0)) / dt).ceil() as usize
    }
}

/// Integrate (E a_x)_x = ε²ρ a_tt by leapfrog to `t_end`.
///
/// The step obeys Δt = cfl·h·ε·√(ρ_min/E_max) with the extrema taken over
/// the actual grid samples, so any cfl ≤ 0.9 is stable; the first step is a
/// Taylor half-start consistent to second order.
pub fn solve_fine_wave(
    rho: &PeriodicField,
    stiffness: &PeriodicField,
    grid: &Grid1D,
    ic: &InitialCondition,
    t_end: f64,
    cfl: f64,
    output_times: &[f64],
) -> Result<SimulationResult> {
    rho.validate()?;
    stiffness.validate()?;
    ic.check_epsilon(grid)?;
    if !(cfl > 0.0 && cfl <= 0.9) {
        return Err(Error::InvalidParameter(format!(
            "cfl must lie in (0, 0.9], got {cfl}"
        )));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParameter(format!("bad t_end {t_end}")));
    }

    let n = grid.n_total();
    let h = grid.h();
    let eps = grid.epsilon();
    let rho_node: Vec<f64> = (0..n).map(|i| rho.evaluate(grid.xi_node(i))).collect();
    let e_face: Vec<f64> = (0..n).map(|i| stiffness.evaluate(grid.xi_face(i))).collect();
    let rho_min = rho_node.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_max = e_face.iter().cloned().fold(0.0f64, f64::max);
    let dt = cfl * h * eps * (rho_min / e_max).sqrt();

    let n_steps = number_of_steps(t_end, dt);
    let snap_steps = plan_snapshots(output_times, t_end, dt, n_steps)?;

    let mut cur = ic.sample_displacement(grid)?;
    let v0 = ic.sample_velocity(grid)?;

    // dt²·(flux difference)/(h²ε²ρ) per node, precomputed
    let coef: Vec<f64> = rho_node
        .iter()
        .map(|r| dt * dt / (h * h * eps * eps * r))
        .collect();

    let mut result = SimulationResult {
        grid: *grid,
        times: Vec::with_capacity(snap_steps.len()),
        snapshots: Vec::with_capacity(snap_steps.len()),
        diagnostics: Vec::with_capacity(n_steps),
        diagnostic_kind: DiagnosticKind::Energy,
        dt,
        steps_taken: n_steps,
        final_displacement: Vec::new(),
        final_velocity: Vec::new(),
    };

    let mut snap_iter = snap_steps.iter().peekable();
    if snap_iter.peek() == Some(&&0) {
        result.times.push(0.0);
        result.snapshots.push(cur.clone());
        snap_iter.next();
    }

    let mut flux = vec![0.0f64; n];
    let fill_flux = |a: &[f64], flux: &mut [f64]| {
        for i in 0..n - 1 {
            flux[i] = e_face[i] * (a[i + 1] - a[i]);
        }
        flux[n - 1] = e_face[n - 1] * (a[0] - a[n - 1]);
    };

    // Taylor start: a¹ = a⁰ + Δt·v⁰ + Δt²/2·acc(a⁰)
    let mut prev = cur.clone();
    if n_steps >= 1 {
        fill_flux(&cur, &mut flux);
        let mut next = vec![0.0f64; n];
        for i in 0..n {
            let div = flux[i] - flux[(i + n - 1) % n];
            next[i] = cur[i] + dt * v0[i] + 0.5 * coef[i] * div;
        }
        record_energy_step(&mut result, &cur, &next, &flux, &rho_node, h, dt, eps, 1)?;
        prev = std::mem::replace(&mut cur, next);
        take_snapshot(&mut result, &mut snap_iter, 1, dt, &cur);
    }

    for step in 2..=n_steps {
        fill_flux(&cur, &mut flux);
        let mut kinetic = 0.0f64;
        let mut potential = 0.0f64;
        for i in 0..n {
            let div = flux[i] - flux[(i + n - 1) % n];
            let next_i = 2.0 * cur[i] - prev[i] + coef[i] * div;
            prev[i] = next_i; // prev becomes next; swapped below
            let dv = (next_i - cur[i]) / dt;
            kinetic += rho_node[i] * dv * dv;
        }
        std::mem::swap(&mut prev, &mut cur); // now cur = a^{n+1}, prev = a^n
        for i in 0..n - 1 {
            potential += flux[i] * (cur[i + 1] - cur[i]);
        }
        potential += flux[n - 1] * (cur[0] - cur[n - 1]);
        let energy = 0.5 * h * (eps * eps * kinetic + potential / (h * h));
        push_energy(&mut result, energy, step, dt)?;
        take_snapshot(&mut result, &mut snap_iter, step, dt, &cur);
    }

    // velocity synchronised to the last step: v = (aᴺ−aᴺ⁻¹)/Δt + Δt/2·acc(aᴺ)
    let final_velocity = if n_steps == 0 {
        v0
    } else {
        fill_flux(&cur, &mut flux);
        (0..n)
            .map(|i| {
                let div = flux[i] - flux[(i + n - 1) % n];
                (cur[i] - prev[i]) / dt + 0.5 * coef[i] / dt * div
            })
            .collect()
    };
    result.final_displacement = cur;
    result.final_velocity = final_velocity;
    Ok(result)
}

/// Energy of the Taylor start step, recorded the same way as the main loop.
#[allow(clippy::too_many_arguments)]
fn record_energy_step(
    result: &mut SimulationResult,
    old: &[f64],
    new: &[f64],
    flux_old: &[f64],
    rho_node: &[f64],
    h: f64,
    dt: f64,
    eps: f64,
    step: usize,
) -> Result<()> {
    let n = old.len();
    let mut kinetic = 0.0f64;
    for i in 0..n {
        let dv = (new[i] - old[i]) / dt;
        kinetic += rho_node[i] * dv * dv;
    }
    let mut potential = 0.0f64;
    for i in 0..n - 1 {
        potential += flux_old[i] * (new[i + 1] - new[i]);
    }
    potential += flux_old[n - 1] * (new[0] - new[n - 1]);
    let energy = 0.5 * h * (eps * eps * kinetic + potential / (h * h));
    push_energy(result, energy, step, dt)
}

fn push_energy(result: &mut SimulationResult, energy: f64, step: usize, dt: f64) -> Result<()> {
    if !energy.is_finite() {
        return Err(Error::UnstableRun {
            step,
            time: step as f64 * dt,
        });
    }
    result.diagnostics.push(energy);
    Ok(())
}

fn take_snapshot(
    result: &mut SimulationResult,
    snap_iter: &mut std::iter::Peekable<std::slice::Iter<usize>>,
    step: usize,
    dt: f64,
    state: &[f64],
) {
    if snap_iter.peek() == Some(&&step) {
        result.times.push(step as f64 * dt);
        result.snapshots.push(state.to_vec());
        snap_iter.next();
    }
}

/// Integrate a_t = (K a_x)_x by forward Euler on the flux stencil to `t_end`.
///
/// Δt = safety·h²/(2·K_max) with K sampled on faces.  The divisor 2·K_max
/// is already the forward-Euler stability limit (Gershgorin bound on the
/// flux operator), so any safety ≤ 0.9 leaves margin.  Fluxes are computed
/// once per face and reused by both neighbours, so the total mass h·Σa
/// telescopes exactly.
pub fn solve_fine_diffusion(
    conductivity: &PeriodicField,
    grid: &Grid1D,
    ic: &InitialCondition,
    t_end: f64,
    safety: f64,
    output_times: &[f64],
) -> Result<SimulationResult> {
    conductivity.validate()?;
    ic.check_epsilon(grid)?;
    if !(safety > 0.0 && safety <= 0.9) {
        return Err(Error::InvalidParameter(format!(
            "safety factor must lie in (0, 0.9], got {safety}"
        )));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParameter(format!("bad t_end {t_end}")));
    }

    let n = grid.n_total();
    let h = grid.h();
    let k_face: Vec<f64> = (0..n)
        .map(|i| conductivity.evaluate(grid.xi_face(i)))
        .collect();
    let k_max = k_face.iter().cloned().fold(0.0f64, f64::max);
    let dt = safety * h * h / (2.0 * k_max);

    let n_steps = number_of_steps(t_end, dt);
    let snap_steps = plan_snapshots(output_times, t_end, dt, n_steps)?;

    let mut cur = ic.sample_displacement(grid)?;

    let mut result = SimulationResult {
        grid: *grid,
        times: Vec::with_capacity(snap_steps.len()),
        snapshots: Vec::with_capacity(snap_steps.len()),
        diagnostics: Vec::with_capacity(n_steps + 1),
        diagnostic_kind: DiagnosticKind::Mass,
        dt,
        steps_taken: n_steps,
        final_displacement: Vec::new(),
        final_velocity: Vec::new(),
    };

    let mass = |a: &[f64]| h * a.iter().sum::<f64>();
    result.diagnostics.push(mass(&cur));

    let mut snap_iter = snap_steps.iter().peekable();
    if snap_iter.peek() == Some(&&0) {
        result.times.push(0.0);
        result.snapshots.push(cur.clone());
        snap_iter.next();
    }

    let lambda = dt / (h * h);
    let mut flux = vec![0.0f64; n];
    for step in 1..=n_steps {
        for i in 0..n - 1 {
            flux[i] = k_face[i] * (cur[i + 1] - cur[i]);
        }
        flux[n - 1] = k_face[n - 1] * (cur[0] - cur[n - 1]);
        let mut total = 0.0f64;
        for i in 0..n {
            cur[i] += lambda * (flux[i] - flux[(i + n - 1) % n]);
            total += cur[i];
        }
        let m = h * total;
        if !m.is_finite() {
            return Err(Error::UnstableRun {
                step,
                time: step as f64 * dt,
            });
        }
        result.diagnostics.push(m);
        take_snapshot(&mut result, &mut snap_iter, step, dt, &cur);
    }

    result.final_displacement = cur;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::build_corrector;
    use crate::field::Quadrature;
    use approx::assert_relative_eq;

    fn unit() -> PeriodicField {
        PeriodicField::constant(1.0).unwrap()
    }

    #[test]
    fn grid_accounting() {
        let g = Grid1D::new(8, 64).unwrap();
        assert_eq!(g.epsilon(), 0.125);
        assert_eq!(g.n_total(), 512);
        assert_relative_eq!(g.h(), TAU / 64.0, max_relative = 1e-15);
        // ξ repeats exactly from one cell to the next
        assert_eq!(g.xi_node(5), g.xi_node(5 + 64));
        assert_eq!(g.xi_face(63), g.xi_face(127));
        assert!(Grid1D::new(3, 64).is_err());
        assert!(Grid1D::new(8, 1).is_err());
    }

    #[test]
    fn wave_reproduces_the_constant_coefficient_standing_mode() {
        // With ρ = E = 1 the scaled equation gives a(x,t) = sin(εx)·cos(t).
        let grid = Grid1D::new(8, 64).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        let run = solve_fine_wave(&unit(), &unit(), &grid, &ic, 1.0, 0.5, &[1.0]).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        let t = run.times[0];
        assert!(t >= 1.0 - 1e-9 && t < 1.0 + run.dt);
        let mut worst = 0.0f64;
        for (i, v) in run.snapshots[0].iter().enumerate() {
            let exact = (grid.epsilon() * grid.x(i)).sin() * t.cos();
            worst = worst.max((v - exact).abs());
        }
        assert!(worst < 1e-4, "max error {worst:.3e}");
    }

    #[test]
    fn wave_energy_is_conserved_to_round_off() {
        let grid = Grid1D::new(8, 64).unwrap();
        let e = PeriodicField::cosine(2.0, 1.0).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        let run = solve_fine_wave(&unit(), &e, &grid, &ic, 2.0, 0.5, &[2.0]).unwrap();
        assert!(run.diagnostics.len() >= 2);
        let drift = run.relative_drift();
        assert!(drift <= 1e-9, "energy drift {drift:.3e}");
    }

    #[test]
    fn zero_t_end_returns_the_initial_condition() {
        let grid = Grid1D::new(8, 16).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        let run = solve_fine_wave(&unit(), &unit(), &grid, &ic, 0.0, 0.5, &[0.0]).unwrap();
        assert_eq!(run.times, vec![0.0]);
        assert_eq!(run.steps_taken, 0);
        for (i, v) in run.snapshots[0].iter().enumerate() {
            assert_eq!(*v, (grid.epsilon() * grid.x(i)).sin());
        }
        assert_eq!(run.final_velocity, vec![0.0; grid.n_total()]);
    }

    #[test]
    fn zero_initial_condition_stays_zero() {
        let grid = Grid1D::new(8, 16).unwrap();
        let run =
            solve_fine_wave(&unit(), &unit(), &grid, &InitialCondition::Zero, 1.0, 0.5, &[1.0])
                .unwrap();
        assert!(run.snapshots[0].iter().all(|v| *v == 0.0));
        assert_eq!(run.relative_drift(), 0.0);

        let run = solve_fine_diffusion(&unit(), &grid, &InitialCondition::Zero, 1.0, 0.4, &[1.0])
            .unwrap();
        assert!(run.snapshots[0].iter().all(|v| *v == 0.0));
        assert_eq!(run.relative_drift(), 0.0);
    }

    #[test]
    fn wave_rejects_out_of_range_cfl() {
        let grid = Grid1D::new(8, 16).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        for cfl in [0.0, -0.5, 0.91, 2.0] {
            assert!(solve_fine_wave(&unit(), &unit(), &grid, &ic, 1.0, cfl, &[1.0]).is_err());
        }
    }

    #[test]
    fn overflowing_state_reports_the_failing_step() {
        let grid = Grid1D::new(8, 16).unwrap();
        let n = grid.n_total();
        let ic = InitialCondition::FromSamples {
            displacement: vec![1e200; n],
            velocity: (0..n).map(|i| if i % 2 == 0 { 1e200 } else { -1e200 }).collect(),
        };
        match solve_fine_wave(&unit(), &unit(), &grid, &ic, 1.0, 0.5, &[1.0]) {
            Err(Error::UnstableRun { step, .. }) => assert!(step >= 1),
            other => panic!("expected unstable-run error, got {other:?}"),
        }
    }

    #[test]
    fn diffusion_decays_the_standing_mode_at_the_constant_coefficient_rate() {
        // K = 1: the sin(εx) mode decays as exp(−ε²t).
        let grid = Grid1D::new(8, 64).unwrap();
        let eps = grid.epsilon();
        let ic = make_initial_condition(IcPreset::SineMode, eps, None).unwrap();
        let t_end = 16.0;
        let run = solve_fine_diffusion(&unit(), &grid, &ic, t_end, 0.4, &[t_end]).unwrap();
        let t = run.times[0];
        let decay = (-eps * eps * t).exp();
        for (i, v) in run.snapshots[0].iter().enumerate() {
            let exact = (eps * grid.x(i)).sin() * decay;
            assert_relative_eq!(*v, exact, epsilon = 1e-4);
        }
    }

    #[test]
    fn diffusion_conserves_mass_through_a_rough_medium() {
        let grid = Grid1D::new(8, 64).unwrap();
        let k = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap();
        let ic = make_initial_condition(IcPreset::Gaussian, grid.epsilon(), None).unwrap();
        let run = solve_fine_diffusion(&k, &grid, &ic, 20.0, 0.4, &[20.0]).unwrap();
        let drift = run.relative_drift();
        assert!(drift <= 1e-12, "mass drift {drift:.3e}");
    }

    #[test]
    fn diffusion_rejects_out_of_range_safety_factor() {
        let grid = Grid1D::new(8, 16).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        for s in [0.0, -0.1, 0.91, 2.0] {
            assert!(solve_fine_diffusion(&unit(), &grid, &ic, 1.0, s, &[1.0]).is_err());
        }
    }

    #[test]
    fn snapshot_times_are_strictly_increasing_and_within_the_run() {
        let grid = Grid1D::new(8, 16).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, grid.epsilon(), None).unwrap();
        // unsorted input with duplicates and near-coincident requests
        let run = solve_fine_wave(
            &unit(),
            &unit(),
            &grid,
            &ic,
            1.0,
            0.5,
            &[0.5, 0.0, 1.0, 0.5, 0.500001],
        )
        .unwrap();
        assert!(run.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(run.times[0], 0.0);
        assert_eq!(run.snapshots.len(), run.times.len());

        // an output time beyond the run is a caller bug, not a silent clamp
        assert!(solve_fine_wave(&unit(), &unit(), &grid, &ic, 1.0, 0.5, &[2.0]).is_err());
    }

    #[test]
    fn well_prepared_ic_carries_the_corrector_dressing() {
        let e = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap();
        let grid = Grid1D::new(8, 64).unwrap();
        let eps = grid.epsilon();
        let chi = build_corrector(&e, Quadrature::default(), 64).unwrap();
        assert!(matches!(
            make_initial_condition(IcPreset::WellPrepared, eps, None),
            Err(Error::MissingCorrector)
        ));
        let ic = make_initial_condition(IcPreset::WellPrepared, eps, Some(&chi)).unwrap();
        let a0 = ic.sample_displacement(&grid).unwrap();
        for i in [0usize, 13, 200, 511] {
            let r = eps * grid.x(i);
            let expected = r.sin() + eps * chi.evaluate(grid.xi_node(i)) * r.cos();
            assert_relative_eq!(a0[i], expected, max_relative = 1e-14);
        }
        // and it starts at rest like every preset
        assert!(ic.sample_velocity(&grid).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ic_epsilon_must_match_the_grid() {
        let grid = Grid1D::new(8, 16).unwrap();
        let ic = make_initial_condition(IcPreset::SineMode, 1.0 / 16.0, None).unwrap();
        assert!(solve_fine_wave(&unit(), &unit(), &grid, &ic, 1.0, 0.5, &[1.0]).is_err());
    }

    #[test]
    fn gaussian_preset_peaks_at_the_domain_midpoint() {
        let ic = make_initial_condition(IcPreset::Gaussian, 0.125, None).unwrap();
        assert_relative_eq!(ic.coarse_profile(PI).unwrap(), 1.0, max_relative = 1e-15);
        assert!(ic.coarse_profile(0.0).unwrap() < 3e-9);
        // gradient is odd around the peak
        assert_relative_eq!(
            ic.coarse_gradient(PI + 0.3).unwrap(),
            -ic.coarse_gradient(PI - 0.3).unwrap(),
            max_relative = 1e-12
        );
    }
}
