//! Constant-coefficient solvers for the averaged equations on the slow
//! variable r ∈ [0, 2π), periodic.
//!
//! The wave surrogate is ρ̄ b_tt = E_eff b_rr in the same clock as the fine
//! run (the ε² in the fine equation is exactly what turns the x-wavenumber ε
//! into r-wavenumber 1 with no time rescaling).  The diffusion surrogate is
//! b_τ = K_eff b_rr in the slow time τ = ε²·t; only this scaling removes ε
//! from the averaged equation, and it makes the fine single-mode decay
//! e^{−K_eff·ε²·t} equal e^{−K_eff·τ}.
//!
//! Single-Fourier-mode initial data admits closed forms — sin(r)·cos(c·t)
//! and e^{−K_eff·τ}·sin(r) — which the entry points use whenever they can so
//! that convergence studies measure homogenization error, not coarse-grid
//! discretization error.  Anything else falls back to the same explicit
//! schemes the fine solvers use, with the step shortened so the run lands
//! exactly on t_end.

use std::f64::consts::TAU;
use std::path::Path;

use crate::cell::EffectiveModel;
use crate::error::{EquationKind, Error, Result};
use crate::fine::{number_of_steps, plan_snapshots, InitialCondition};

/// How a [`CoarseSolution`] answers point queries between grid samples.
#[derive(Debug, Clone, PartialEq)]
enum ClosedForm {
    /// b(r,t) = sin(r)·cos(speed·t)
    Standing { speed: f64 },
    /// b(r,τ) = e^{−rate·τ}·sin(r)
    Decaying { rate: f64 },
    /// identically zero
    Still,
    /// no closed form: periodic linear interpolation of the samples
    Sampled,
}

/// Solution of an averaged equation: samples on a uniform r grid per output
/// time, plus the matching ∂b/∂r samples that two-scale reconstruction needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSolution {
    pub model: EffectiveModel,
    /// Output instants — dimensionless t for waves, slow time τ for diffusion.
    pub times: Vec<f64>,
    /// One array of b(r_j, times[k]) per output instant.
    pub values: Vec<Vec<f64>>,
    /// ∂b/∂r on the same grid, congruent with `values`.
    pub gradient_values: Vec<Vec<f64>>,
    /// True when the entries come from a closed form rather than a scheme.
    pub exact: bool,
    /// Worst relative wander of the leapfrog energy, for the grid-based wave
    /// path only; closed forms and diffusion runs have nothing to track.
    pub energy_drift: Option<f64>,
    r_points: usize,
    form: ClosedForm,
}

impl CoarseSolution {
    pub fn r_points(&self) -> usize {
        self.r_points
    }

    pub fn delta_r(&self) -> f64 {
        TAU / self.r_points as f64
    }

    pub fn r_grid(&self) -> Vec<f64> {
        let dr = self.delta_r();
        (0..self.r_points).map(|j| j as f64 * dr).collect()
    }

    /// b at arbitrary r for snapshot `snap` — exact for closed forms,
    /// periodic linear interpolation otherwise.
    pub fn value_at(&self, snap: usize, r: f64) -> f64 {
        match &self.form {
            ClosedForm::Standing { speed } => r.sin() * (speed * self.times[snap]).cos(),
            ClosedForm::Decaying { rate } => (-rate * self.times[snap]).exp() * r.sin(),
            ClosedForm::Still => 0.0,
            ClosedForm::Sampled => lerp_periodic(&self.values[snap], r),
        }
    }

    /// ∂b/∂r at arbitrary r for snapshot `snap`.
    pub fn gradient_at(&self, snap: usize, r: f64) -> f64 {
        match &self.form {
            ClosedForm::Standing { speed } => r.cos() * (speed * self.times[snap]).cos(),
            ClosedForm::Decaying { rate } => (-rate * self.times[snap]).exp() * r.cos(),
            ClosedForm::Still => 0.0,
            ClosedForm::Sampled => lerp_periodic(&self.gradient_values[snap], r),
        }
    }

    /// Write one `<tag>_t<k>.csv` (header `r,value`) per snapshot into `dir`.
    pub fn write_snapshots(&self, dir: &Path, tag: &str) -> Result<Vec<std::path::PathBuf>> {
        let rs = self.r_grid();
        let mut paths = Vec::new();
        for (k, snap) in self.values.iter().enumerate() {
            let path = dir.join(format!("{tag}_t{k}.csv"));
            crate::io::write_two_column_csv(&path, ("r", "value"), &rs, snap)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Periodic linear interpolation of uniform samples over [0, 2π).
fn lerp_periodic(samples: &[f64], r: f64) -> f64 {
    let n = samples.len();
    let mut s = (r.rem_euclid(TAU)) / TAU * n as f64;
    if !(0.0..(n as f64)).contains(&s) {
        s = 0.0; // rem_euclid can land exactly on 2π for tiny negative r
    }
    let j = s.floor() as usize;
    let frac = s - j as f64;
    let a = samples[j % n];
    let b = samples[(j + 1) % n];
    a + frac * (b - a)
}

/// Sanitise requested output instants for a closed-form solution: sorted,
/// deduplicated, all finite and inside [0, t_end].
fn closed_form_times(output_times: &[f64], t_end: f64) -> Result<Vec<f64>> {
    let mut ts = output_times.to_vec();
    if ts.is_empty() {
        ts.push(t_end);
    }
    for &t in &ts {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidParameter(format!("bad output time {t}")));
        }
        if t > t_end * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidParameter(format!(
                "output time {t} lies beyond t_end = {t_end}"
            )));
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    Ok(ts)
}

fn check_setup(t_end: f64, r_points: usize) -> Result<()> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidParameter(format!("bad t_end {t_end}")));
    }
    if r_points < 4 {
        return Err(Error::InvalidParameter(format!(
            "coarse grid needs at least 4 points, got {r_points}"
        )));
    }
    Ok(())
}

/// Initial state on the coarse grid: presets from their slow profile, sample
/// arrays taken verbatim (their length must equal `r_points`).
fn sample_state(ic: &InitialCondition, r_points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match ic {
        InitialCondition::FromSamples {
            displacement,
            velocity,
        } => {
            if displacement.len() != r_points || velocity.len() != r_points {
                return Err(Error::InvalidParameter(format!(
                    "initial samples have {} nodes, coarse grid has {r_points}",
                    displacement.len()
                )));
            }
            Ok((displacement.clone(), velocity.clone()))
        }
        _ => {
            let dr = TAU / r_points as f64;
            let a = (0..r_points)
                .map(|j| ic.coarse_profile(j as f64 * dr).unwrap())
                .collect();
            Ok((a, vec![0.0; r_points]))
        }
    }
}

fn centered_gradient(a: &[f64], dr: f64) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|j| (a[(j + 1) % n] - a[(j + n - 1) % n]) / (2.0 * dr))
        .collect()
}

/// Build the closed-form solution shared by both equations.
fn closed_solution(
    model: &EffectiveModel,
    form: ClosedForm,
    times: Vec<f64>,
    r_points: usize,
) -> CoarseSolution {
    let mut sol = CoarseSolution {
        model: model.clone(),
        times,
        values: Vec::new(),
        gradient_values: Vec::new(),
        exact: true,
        energy_drift: None,
        r_points,
        form,
    };
    let rs = sol.r_grid();
    for k in 0..sol.times.len() {
        let row: Vec<f64> = rs.iter().map(|&r| sol.value_at(k, r)).collect();
        let grad: Vec<f64> = rs.iter().map(|&r| sol.gradient_at(k, r)).collect();
        sol.values.push(row);
        sol.gradient_values.push(grad);
    }
    sol
}

/// Solve ρ̄ b_tt = E_eff b_rr to `t_end`.
///
/// Zero, the standing mode, and its corrector-dressed variant share the
/// closed form sin(r)·cos(c·t) (the dressing lives on the fine grid only);
/// everything else goes through [`solve_homog_wave_numeric`].
pub fn solve_homog_wave(
    model: &EffectiveModel,
    ic: &InitialCondition,
    t_end: f64,
    r_points: usize,
    output_times: &[f64],
) -> Result<CoarseSolution> {
    require_kind(model, EquationKind::Wave)?;
    check_setup(t_end, r_points)?;
    let c = model.wave_speed()?;
    match ic {
        InitialCondition::Zero => Ok(closed_solution(
            model,
            ClosedForm::Still,
            closed_form_times(output_times, t_end)?,
            r_points,
        )),
        InitialCondition::SineMode { .. } | InitialCondition::WellPrepared { .. } => {
            Ok(closed_solution(
                model,
                ClosedForm::Standing { speed: c },
                closed_form_times(output_times, t_end)?,
                r_points,
            ))
        }
        _ => solve_homog_wave_numeric(model, ic, t_end, r_points, output_times),
    }
}

/// The grid path for the averaged wave equation: leapfrog with a Taylor
/// start, the constant-coefficient twin of the fine scheme.  Public so the
/// closed form can be cross-validated against it.
pub fn solve_homog_wave_numeric(
    model: &EffectiveModel,
    ic: &InitialCondition,
    t_end: f64,
    r_points: usize,
    output_times: &[f64],
) -> Result<CoarseSolution> {
    require_kind(model, EquationKind::Wave)?;
    check_setup(t_end, r_points)?;
    let c = model.wave_speed()?;
    let n = r_points;
    let dr = TAU / n as f64;
    // shorten the stable step so an integer number of steps lands on t_end
    let dt_stable = 0.5 * dr / c;
    let n_steps = number_of_steps(t_end, dt_stable);
    let dt = if n_steps == 0 { dt_stable } else { t_end / n_steps as f64 };
    let snap_steps = plan_snapshots(output_times, t_end, dt, n_steps)?;

    let (mut cur, v0) = sample_state(ic, r_points)?;
    let lam = (c * dt / dr) * (c * dt / dr);

    let mut sol = CoarseSolution {
        model: model.clone(),
        times: Vec::new(),
        values: Vec::new(),
        gradient_values: Vec::new(),
        exact: false,
        energy_drift: Some(0.0),
        r_points,
        form: ClosedForm::Sampled,
    };

    let record = |sol: &mut CoarseSolution, step: usize, state: &[f64]| {
        sol.times.push(step as f64 * dt);
        sol.values.push(state.to_vec());
        sol.gradient_values.push(centered_gradient(state, dr));
    };

    let mut snap_iter = snap_steps.iter().peekable();
    if snap_iter.peek() == Some(&&0) {
        record(&mut sol, 0, &cur);
        snap_iter.next();
    }

    // leapfrog invariant Σ[ρ̄((b'−b)/Δt)² + E_eff·Δb·Δb'/Δr²]·Δr/2
    let rho = model.rho_bar;
    let e_eff = model.coeff_eff;
    let energy = |old: &[f64], new: &[f64]| -> f64 {
        let mut kin = 0.0;
        let mut pot = 0.0;
        for j in 0..n {
            let dv = (new[j] - old[j]) / dt;
            kin += rho * dv * dv;
            let jp = (j + 1) % n;
            pot += e_eff * (old[jp] - old[j]) * (new[jp] - new[j]) / (dr * dr);
        }
        0.5 * dr * (kin + pot)
    };

    let mut prev = cur.clone();
    let mut h0 = None;
    let mut worst = 0.0f64;
    for step in 1..=n_steps {
        let mut next = vec![0.0; n];
        for j in 0..n {
            let lap = cur[(j + 1) % n] - 2.0 * cur[j] + cur[(j + n - 1) % n];
            next[j] = if step == 1 {
                cur[j] + dt * v0[j] + 0.5 * lam * lap
            } else {
                2.0 * cur[j] - prev[j] + lam * lap
            };
        }
        let h = energy(&cur, &next);
        if !h.is_finite() {
            return Err(Error::UnstableRun {
                step,
                time: step as f64 * dt,
            });
        }
        let h0 = *h0.get_or_insert(h);
        if h0 != 0.0 {
            worst = worst.max((h - h0).abs() / h0.abs());
        }
        prev = std::mem::replace(&mut cur, next);
        if snap_iter.peek() == Some(&&step) {
            record(&mut sol, step, &cur);
            snap_iter.next();
        }
    }
    sol.energy_drift = Some(worst);
    Ok(sol)
}

/// Solve b_τ = K_eff b_rr in slow time to `tau_end`.
///
/// Zero and the standing mode (plain or corrector-dressed) use the closed
/// form e^{−K_eff·τ}·sin(r); everything else goes through
/// [`solve_homog_diffusion_numeric`].
pub fn solve_homog_diffusion(
    model: &EffectiveModel,
    ic: &InitialCondition,
    tau_end: f64,
    r_points: usize,
    output_times: &[f64],
) -> Result<CoarseSolution> {
    require_kind(model, EquationKind::Diffusion)?;
    check_setup(tau_end, r_points)?;
    match ic {
        InitialCondition::Zero => Ok(closed_solution(
            model,
            ClosedForm::Still,
            closed_form_times(output_times, tau_end)?,
            r_points,
        )),
        InitialCondition::SineMode { .. } | InitialCondition::WellPrepared { .. } => {
            Ok(closed_solution(
                model,
                ClosedForm::Decaying {
                    rate: model.coeff_eff,
                },
                closed_form_times(output_times, tau_end)?,
                r_points,
            ))
        }
        _ => solve_homog_diffusion_numeric(model, ic, tau_end, r_points, output_times),
    }
}

/// The grid path for the averaged diffusion equation: forward Euler at 0.4 of
/// the stability limit, step shortened to land exactly on `tau_end`.
pub fn solve_homog_diffusion_numeric(
    model: &EffectiveModel,
    ic: &InitialCondition,
    tau_end: f64,
    r_points: usize,
    output_times: &[f64],
) -> Result<CoarseSolution> {
    require_kind(model, EquationKind::Diffusion)?;
    check_setup(tau_end, r_points)?;
    let n = r_points;
    let dr = TAU / n as f64;
    let k_eff = model.coeff_eff;
    let dt_stable = 0.4 * dr * dr / (2.0 * k_eff);
    let n_steps = number_of_steps(tau_end, dt_stable);
    let dt = if n_steps == 0 { dt_stable } else { tau_end / n_steps as f64 };
    let snap_steps = plan_snapshots(output_times, tau_end, dt, n_steps)?;

    let (mut cur, _) = sample_state(ic, r_points)?;
    let lam = k_eff * dt / (dr * dr);

    let mut sol = CoarseSolution {
        model: model.clone(),
        times: Vec::new(),
        values: Vec::new(),
        gradient_values: Vec::new(),
        exact: false,
        energy_drift: None,
        r_points,
        form: ClosedForm::Sampled,
    };

    let mut snap_iter = snap_steps.iter().peekable();
    if snap_iter.peek() == Some(&&0) {
        sol.times.push(0.0);
        sol.values.push(cur.clone());
        sol.gradient_values.push(centered_gradient(&cur, dr));
        snap_iter.next();
    }

    for step in 1..=n_steps {
        let mut next = vec![0.0; n];
        let mut sum = 0.0;
        for j in 0..n {
            let lap = cur[(j + 1) % n] - 2.0 * cur[j] + cur[(j + n - 1) % n];
            next[j] = cur[j] + lam * lap;
            sum += next[j];
        }
        if !sum.is_finite() {
            return Err(Error::UnstableRun {
                step,
                time: step as f64 * dt,
            });
        }
        cur = next;
        if snap_iter.peek() == Some(&&step) {
            sol.times.push(step as f64 * dt);
            sol.values.push(cur.clone());
            sol.gradient_values.push(centered_gradient(&cur, dr));
            snap_iter.next();
        }
    }
    Ok(sol)
}

fn require_kind(model: &EffectiveModel, expected: EquationKind) -> Result<()> {
    if model.kind != expected {
        return Err(Error::KindMismatch {
            expected,
            got: model.kind,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Quadrature;
    use crate::fine::{make_initial_condition, IcPreset};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn wave_model(e_eff: f64, rho_bar: f64) -> EffectiveModel {
        EffectiveModel {
            rho_bar,
            coeff_eff: e_eff,
            kind: EquationKind::Wave,
            quad_used: Quadrature::default(),
        }
    }

    fn diffusion_model(k_eff: f64) -> EffectiveModel {
        EffectiveModel {
            rho_bar: 1.0,
            coeff_eff: k_eff,
            kind: EquationKind::Diffusion,
            quad_used: Quadrature::default(),
        }
    }

    fn sine(eps: f64) -> InitialCondition {
        make_initial_condition(IcPreset::SineMode, eps, None).unwrap()
    }

    #[test]
    fn standing_mode_oscillates_at_the_effective_speed() {
        // E_eff = √3, ρ̄ = 1 → b(π/2, t) = cos(3^{1/4}·t)
        let model = wave_model(3.0f64.sqrt(), 1.0);
        let c = 3.0f64.powf(0.25);
        let sol = solve_homog_wave(&model, &sine(0.125), 2.0, 64, &[0.5, 1.5, 2.0]).unwrap();
        assert!(sol.exact);
        assert_eq!(sol.times, vec![0.5, 1.5, 2.0]);
        for (k, &t) in sol.times.iter().enumerate() {
            assert_relative_eq!(sol.value_at(k, PI / 2.0), (c * t).cos(), max_relative = 1e-14);
        }
    }

    #[test]
    fn unit_speed_mode_recurs_after_a_full_period() {
        let model = wave_model(1.0, 1.0);
        let sol = solve_homog_wave(&model, &sine(0.125), TAU, 64, &[TAU]).unwrap();
        for (j, &r) in sol.r_grid().iter().enumerate() {
            assert_relative_eq!(sol.values[0][j], r.sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_time_returns_the_initial_profile() {
        let model = wave_model(2.5, 1.3);
        let sol = solve_homog_wave(&model, &sine(0.125), 0.0, 64, &[]).unwrap();
        assert_eq!(sol.times, vec![0.0]);
        for (j, &r) in sol.r_grid().iter().enumerate() {
            assert_relative_eq!(sol.values[0][j], r.sin(), max_relative = 1e-15);
            assert_relative_eq!(sol.gradient_values[0][j], r.cos(), max_relative = 1e-15);
        }
    }

    #[test]
    fn numeric_wave_path_matches_the_closed_form() {
        let model = wave_model(3.0f64.sqrt(), 1.0);
        let ic = sine(0.125);
        let exact = solve_homog_wave(&model, &ic, 1.0, 256, &[1.0]).unwrap();
        let grid = solve_homog_wave_numeric(&model, &ic, 1.0, 256, &[1.0]).unwrap();
        assert!(!grid.exact);
        // the shortened step lands the grid run exactly on t = 1
        assert_relative_eq!(grid.times[0], 1.0, max_relative = 1e-15);
        let worst = grid.values[0]
            .iter()
            .zip(&exact.values[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-4, "closed-vs-grid max error {worst:.3e}");
        let drift = grid.energy_drift.unwrap();
        assert!(drift <= 1e-9, "energy drift {drift:.3e}");
    }

    #[test]
    fn closed_form_gradients_match_centered_differences_at_second_order() {
        let model = wave_model(2.0, 1.0);
        let errs: Vec<f64> = [128usize, 256]
            .iter()
            .map(|&n| {
                let sol = solve_homog_wave(&model, &sine(0.125), 0.7, n, &[0.7]).unwrap();
                let dr = sol.delta_r();
                let fd = centered_gradient(&sol.values[0], dr);
                fd.iter()
                    .zip(&sol.gradient_values[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .collect();
        assert!(errs[1] < 1e-3);
        // halving Δr should shrink the mismatch about fourfold
        assert!(errs[0] / errs[1] > 3.0, "ratio {:.2}", errs[0] / errs[1]);
    }

    #[test]
    fn diffusion_mode_decays_at_the_effective_rate() {
        let k_eff = 3.0f64.sqrt();
        let sol =
            solve_homog_diffusion(&diffusion_model(k_eff), &sine(0.125), 1.0, 64, &[1.0]).unwrap();
        assert!(sol.exact);
        assert_relative_eq!(sol.value_at(0, PI / 2.0), (-k_eff).exp(), max_relative = 1e-14);
    }

    #[test]
    fn numeric_diffusion_path_matches_the_closed_form() {
        let model = diffusion_model(1.6);
        let ic = sine(0.125);
        let exact = solve_homog_diffusion(&model, &ic, 0.5, 256, &[0.5]).unwrap();
        let grid = solve_homog_diffusion_numeric(&model, &ic, 0.5, 256, &[0.5]).unwrap();
        let worst = grid.values[0]
            .iter()
            .zip(&exact.values[0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-4, "closed-vs-grid max error {worst:.3e}");
    }

    #[test]
    fn zero_ic_stays_zero_for_both_equations() {
        let sol = solve_homog_wave(&wave_model(1.0, 1.0), &InitialCondition::Zero, 1.0, 64, &[1.0])
            .unwrap();
        assert!(sol.values[0].iter().all(|v| *v == 0.0));
        let sol = solve_homog_diffusion(
            &diffusion_model(2.0),
            &InitialCondition::Zero,
            1.0,
            64,
            &[1.0],
        )
        .unwrap();
        assert!(sol.values[0].iter().all(|v| *v == 0.0));
        assert_eq!(sol.value_at(0, 1.234), 0.0);
    }

    #[test]
    fn equation_kind_is_enforced_both_ways() {
        let ic = sine(0.125);
        assert!(matches!(
            solve_homog_wave(&diffusion_model(1.0), &ic, 1.0, 64, &[1.0]),
            Err(Error::KindMismatch { .. })
        ));
        assert!(matches!(
            solve_homog_diffusion(&wave_model(1.0, 1.0), &ic, 1.0, 64, &[1.0]),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn sample_arrays_must_match_the_coarse_grid() {
        let ic = InitialCondition::FromSamples {
            displacement: vec![0.0; 100],
            velocity: vec![0.0; 100],
        };
        assert!(solve_homog_wave(&wave_model(1.0, 1.0), &ic, 1.0, 64, &[1.0]).is_err());
    }

    #[test]
    fn gaussian_ic_takes_the_grid_path_and_keeps_its_mass_bump() {
        let ic = make_initial_condition(IcPreset::Gaussian, 0.125, None).unwrap();
        let sol = solve_homog_diffusion(&diffusion_model(1.0), &ic, 0.05, 256, &[0.05]).unwrap();
        assert!(!sol.exact);
        // short diffusion keeps the peak near the centre, smaller than 1
        let peak = sol.value_at(0, PI);
        assert!(peak > 0.5 && peak < 1.0, "peak {peak}");
    }
}
