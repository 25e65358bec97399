//! The six subcommands, each a thin orchestration of the library crate:
//! resolve the configuration, run the requested computation, write artifacts
//! under the output directory, and print a short summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use homog1d_core::cell::{
    build_corrector, build_effective_model, identity_residual, EffectiveModel,
};
use homog1d_core::converge::{run_case, run_sweep, SweepConfig};
use homog1d_core::error::EquationKind;
use homog1d_core::field::PeriodicField;
use homog1d_core::fine::{
    make_initial_condition, solve_fine_diffusion, solve_fine_wave, Grid1D, IcPreset,
    InitialCondition,
};
use homog1d_core::homog::{solve_homog_diffusion, solve_homog_wave};
use homog1d_core::io::write_two_column_csv;

use crate::config::RunConfig;
use crate::plot::{emit_overlay_script, emit_report_script};

/// "E_eff" for the wave family, "K_eff" for diffusion.
fn coeff_label(kind: EquationKind) -> &'static str {
    match kind {
        EquationKind::Wave => "E_eff",
        EquationKind::Diffusion => "K_eff",
    }
}

/// The constant-coefficient surrogate for the configured fields.  The
/// diffusion balance carries no density, so only the wave path reads `rho`.
fn effective_model(config: &RunConfig) -> Result<EffectiveModel> {
    let coeff = config.coeff_field()?;
    let quad = config.quadrature()?;
    let model = match config.equation {
        EquationKind::Wave => {
            build_effective_model(&config.rho_field()?, &coeff, EquationKind::Wave, quad)?
        }
        EquationKind::Diffusion => build_effective_model(
            &PeriodicField::constant(1.0)?,
            &coeff,
            EquationKind::Diffusion,
            quad,
        )?,
    };
    Ok(model)
}

/// Preset initial state for scale ratio ε; the well-prepared preset carries
/// the corrector table built on `cell_nodes` points so the dressing lands on
/// the solver's own grid.
fn initial_condition(config: &RunConfig, epsilon: f64, cell_nodes: usize) -> Result<InitialCondition> {
    let chi = match config.ic {
        IcPreset::WellPrepared => Some(build_corrector(
            &config.coeff_field()?,
            config.quadrature()?,
            cell_nodes,
        )?),
        _ => None,
    };
    Ok(make_initial_condition(config.ic, epsilon, chi.as_ref())?)
}

/// Worker cap for sweeps: `HOMOG1D_THREADS` when set, else the core count.
fn max_threads() -> Result<usize> {
    match std::env::var("HOMOG1D_THREADS") {
        Ok(raw) => {
            let n: usize = raw
                .trim()
                .parse()
                .with_context(|| format!("HOMOG1D_THREADS must be a positive integer, got '{raw}'"))?;
            if n == 0 {
                bail!("HOMOG1D_THREADS must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

fn ensure_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))
}

/// When the run came from physical lengths, remind the user how to map the
/// dimensionless output back to meters and seconds.
fn print_scale_interpretation(config: &RunConfig, allow_large_epsilon: bool) -> Result<()> {
    if let Some(d) = &config.dimensional {
        let report = crate::scale::nondimensionalize(d, allow_large_epsilon)?;
        println!("{}", report.describe());
    }
    Ok(())
}

/// Print the period averages and the self-consistency residual of the
/// configured coefficient profile.
pub fn effective(config: &RunConfig) -> Result<()> {
    let model = effective_model(config)?;
    let residual = identity_residual(&config.coeff_field()?, config.quadrature()?)?;
    println!("rho_bar = {:.6}", model.rho_bar);
    println!("{} = {:.6}", coeff_label(model.kind), model.coeff_eff);
    println!("identity_residual = {:.6e}", residual);
    Ok(())
}

/// Build the corrector table of the configured coefficient and write it as
/// `corrector.csv` (`xi,chi` rows).
pub fn corrector(config: &RunConfig, out: &Path) -> Result<()> {
    let table = build_corrector(
        &config.coeff_field()?,
        config.quadrature()?,
        config.corrector_grid,
    )?;
    ensure_out(out)?;
    let path = out.join("corrector.csv");
    table.write_csv(&path)?;
    println!("corrector nodes = {}", table.grid_size());
    println!("periodic closure = {:.6e}", table.closure());
    println!("wrote {}", path.display());
    Ok(())
}

/// Run the heterogeneous solver at a single ε and write the snapshot CSVs.
/// `t_end` counts in the solver's own (fine) clock for both equations.
pub fn solve_fine(
    config: &RunConfig,
    epsilon_flag: Option<&str>,
    out: &Path,
    allow_large_epsilon: bool,
) -> Result<()> {
    let inv = config.resolve_inv_epsilon(epsilon_flag, allow_large_epsilon)?;
    print_scale_interpretation(config, allow_large_epsilon)?;
    let grid = Grid1D::new(inv, config.points_per_period)?;
    let coeff = config.coeff_field()?;
    let ic = initial_condition(config, grid.epsilon(), grid.points_per_period())?;
    let times = config.resolved_output_times();

    let result = match config.equation {
        EquationKind::Wave => solve_fine_wave(
            &config.rho_field()?,
            &coeff,
            &grid,
            &ic,
            config.t_end,
            config.cfl,
            &times,
        )?,
        EquationKind::Diffusion => solve_fine_diffusion(
            &coeff,
            &grid,
            &ic,
            config.t_end,
            config.safety,
            &times,
        )?,
    };

    ensure_out(out)?;
    let files = result.write_snapshots(out, "fine")?;
    println!(
        "epsilon = 1/{inv}, {} grid points, dt = {:.6e}, {} steps",
        grid.n_total(),
        result.dt,
        result.steps_taken
    );
    let drift_name = match config.equation {
        EquationKind::Wave => "energy drift",
        EquationKind::Diffusion => "mass drift",
    };
    println!("{} = {:.6e}", drift_name, result.relative_drift());
    for (t, f) in result.times.iter().zip(&files) {
        println!("wrote {} (t = {t})", f.display());
    }
    Ok(())
}

/// Run the averaged (constant-coefficient) solver and write the snapshot
/// CSVs.  `t_end` counts in the coarse clock: plain t for waves, slow τ for
/// diffusion.
pub fn solve_homog(
    config: &RunConfig,
    epsilon_flag: Option<&str>,
    out: &Path,
    allow_large_epsilon: bool,
) -> Result<()> {
    let inv = config.resolve_inv_epsilon(epsilon_flag, allow_large_epsilon)?;
    print_scale_interpretation(config, allow_large_epsilon)?;
    let model = effective_model(config)?;
    let ic = initial_condition(config, 1.0 / inv as f64, config.points_per_period)?;
    let times = config.resolved_output_times();

    let solution = match config.equation {
        EquationKind::Wave => {
            solve_homog_wave(&model, &ic, config.t_end, config.r_points, &times)?
        }
        EquationKind::Diffusion => {
            solve_homog_diffusion(&model, &ic, config.t_end, config.r_points, &times)?
        }
    };

    ensure_out(out)?;
    let files = solution.write_snapshots(out, "homog")?;
    println!(
        "rho_bar = {:.6}, {} = {:.6}",
        model.rho_bar,
        coeff_label(model.kind),
        model.coeff_eff
    );
    println!(
        "solution form = {}",
        if solution.exact { "closed (exact)" } else { "grid" }
    );
    if let Some(drift) = solution.energy_drift {
        println!("energy drift = {:.6e}", drift);
    }
    for (t, f) in solution.times.iter().zip(&files) {
        println!("wrote {} (t = {t})", f.display());
    }
    Ok(())
}

/// Assemble the sweep settings shared by `converge` and `compare`.
fn sweep_config(config: &RunConfig, inv_epsilons: Vec<usize>) -> Result<SweepConfig> {
    Ok(SweepConfig {
        equation: config.equation,
        rho: config.rho_field()?,
        coeff: config.coeff_field()?,
        inv_epsilons,
        points_per_period: config.points_per_period,
        stability_factor: config.stability_factor(),
        compare_time: config.t_end,
        ic: config.ic,
        quad: config.quadrature()?,
        r_points: config.r_points,
        max_threads: max_threads()?,
    })
}

/// Sweep ε, write the convergence report CSV plus its plot script, and print
/// the per-ε errors and fitted rates.
pub fn converge(
    config: &RunConfig,
    epsilon_flag: Option<&str>,
    out: &Path,
    allow_large_epsilon: bool,
) -> Result<()> {
    let invs = config.resolve_inv_epsilon_list(epsilon_flag, allow_large_epsilon)?;
    let sweep = sweep_config(config, invs)?;
    let report = run_sweep(&sweep)?;

    ensure_out(out)?;
    let csv_path = out.join("report.csv");
    report.write_csv(&csv_path)?;
    let script_path = out.join("plot_report.py");
    emit_report_script(&csv_path, &script_path)?;

    for ((eps, plain), corrected) in report
        .epsilons
        .iter()
        .zip(&report.err_plain)
        .zip(&report.err_corrected)
    {
        println!(
            "epsilon = {:.6}  err_plain = {:.6e}  err_corrected = {:.6e}",
            eps, plain, corrected
        );
    }
    for (eps, why) in &report.skipped {
        eprintln!("warning: skipped epsilon = {eps}: {why}");
    }
    println!("rate_plain = {:.3}", report.rate_plain);
    println!("rate_corrected = {:.3}", report.rate_corrected);
    println!(
        "fitted_constant = {:.6}  ({} from the fine run)",
        report.fitted_constant,
        coeff_label(config.equation)
    );
    println!("max drift = {:.6e}", report.max_drift);
    println!("wrote {}", csv_path.display());
    println!("wrote {}", script_path.display());
    Ok(())
}

/// Single-ε comparison: run the fine solver, sample the averaged solution on
/// the fine grid both plain and corrector-dressed, print both error norms,
/// and write the three profiles plus an overlay plot script.
pub fn compare(
    config: &RunConfig,
    epsilon_flag: Option<&str>,
    out: &Path,
    allow_large_epsilon: bool,
) -> Result<()> {
    let inv = config.resolve_inv_epsilon(epsilon_flag, allow_large_epsilon)?;
    let sweep = sweep_config(config, vec![inv])?;
    let case = run_case(&sweep, inv)?;

    println!(
        "epsilon = 1/{inv}, compared at t = {} (solver clock)",
        case.compare_time
    );
    println!("err_plain = {:.6e}", case.err_plain);
    println!("err_corrected = {:.6e}", case.err_corrected);
    let drift_name = match config.equation {
        EquationKind::Wave => "energy drift",
        EquationKind::Diffusion => "mass drift",
    };
    println!("{} = {:.6e}", drift_name, case.drift);

    ensure_out(out)?;
    let xs = case.fine.grid.x_values();
    let fine_snap = case
        .fine
        .snapshots
        .last()
        .expect("a completed case always has the compared snapshot");
    let mut written: Vec<PathBuf> = Vec::new();
    for (name, values) in [
        ("fine_profile.csv", fine_snap),
        ("plain_reference.csv", &case.plain_reference),
        ("reconstruction.csv", &case.reconstruction),
    ] {
        let path = out.join(name);
        write_two_column_csv(&path, ("x", "value"), &xs, values)?;
        written.push(path);
    }
    let script_path = out.join("plot_overlay.py");
    emit_overlay_script(&written, &script_path)?;
    for p in &written {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", script_path.display());
    Ok(())
}
