//! Flat key=value configuration with bracketed section headers.
//!
//! ```text
//! [run]
//! equation = wave
//! epsilon_list = 1/8, 1/16, 1/32, 1/64
//! points_per_period = 64
//!
//! [fields]
//! rho = constant:1
//! coeff = cosine:2,1
//! ```
//!
//! `[run]` holds solver and sweep settings, `[fields]` the coefficient
//! profiles in the field grammar (`constant:`/`cosine:`/`twophase:`/`file:`),
//! and the optional `[dimensional]` block physical lengths and moduli that
//! are converted to ε and a time unit instead of giving ε directly.
//! Unknown sections, unknown keys, and duplicate keys are errors that name
//! the offender.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use homog1d_core::error::EquationKind;
use homog1d_core::field::{PeriodicField, Quadrature};
use homog1d_core::fine::IcPreset;

use crate::scale::DimensionalSpec;

/// Resolved configuration: every field has its final value except the
/// epsilon source, which stays optional so commands can apply their own
/// default (single runs want one ε, sweeps want a list).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub equation: EquationKind,
    pub rho_spec: String,
    pub coeff_spec: String,
    /// 1/ε for single-ε commands, from `epsilon = 1/16` or `= 0.0625`.
    pub inv_epsilon: Option<usize>,
    /// 1/ε values for sweeps, from `epsilon_list`.
    pub inv_epsilon_list: Option<Vec<usize>>,
    pub points_per_period: usize,
    pub cfl: f64,
    pub safety: f64,
    /// Horizon in the clock of the command: fine t for `solve-fine`, coarse
    /// t (wave) or slow τ (diffusion) for `solve-homog`, `converge`, and
    /// `compare`.
    pub t_end: f64,
    pub ic: IcPreset,
    pub output_dir: PathBuf,
    /// Empty means "just t_end".
    pub output_times: Vec<f64>,
    pub sample_count: usize,
    /// Grid size of the exported corrector table (the solver-facing table
    /// always uses `points_per_period` so χ lands on fine nodes).
    pub corrector_grid: usize,
    pub r_points: usize,
    pub dimensional: Option<DimensionalSpec>,
    /// Directory `file:` field specs resolve against (the config's parent).
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let entries = tokenize(text)?;
        build(entries, base_dir)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        RunConfig::parse(&text, &base)
            .with_context(|| format!("in config {}", path.display()))
    }

    /// Apply `--override key=value` pairs; keys are routed to their section
    /// by name, and replace whatever the file said.
    pub fn apply_overrides(self, overrides: &[String]) -> Result<RunConfig> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut entries = to_entries(&self);
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override '{item}' is not of the form key=value"))?;
            let key = key.trim().to_string();
            let section = section_of(&key)?;
            entries.insert((section, key), value.trim().to_string());
        }
        build(entries, &self.base_dir)
    }

    /// Serialise back to config text; `parse` of the result reproduces this
    /// config exactly (floats printed with shortest round-trip form).
    pub fn to_config_string(&self) -> String {
        let mut out = String::from("[run]\n");
        out.push_str(&format!("equation = {}\n", self.equation));
        if let Some(inv) = self.inv_epsilon {
            out.push_str(&format!("epsilon = 1/{inv}\n"));
        }
        if let Some(list) = &self.inv_epsilon_list {
            let parts: Vec<String> = list.iter().map(|inv| format!("1/{inv}")).collect();
            out.push_str(&format!("epsilon_list = {}\n", parts.join(", ")));
        }
        out.push_str(&format!("points_per_period = {}\n", self.points_per_period));
        out.push_str(&format!("cfl = {}\n", self.cfl));
        out.push_str(&format!("safety = {}\n", self.safety));
        out.push_str(&format!("t_end = {}\n", self.t_end));
        out.push_str(&format!("ic = {}\n", ic_name(self.ic)));
        out.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        if !self.output_times.is_empty() {
            let parts: Vec<String> = self.output_times.iter().map(|t| format!("{t}")).collect();
            out.push_str(&format!("output_times = {}\n", parts.join(", ")));
        }
        out.push_str(&format!("sample_count = {}\n", self.sample_count));
        out.push_str(&format!("corrector_grid = {}\n", self.corrector_grid));
        out.push_str(&format!("r_points = {}\n", self.r_points));
        out.push_str("\n[fields]\n");
        out.push_str(&format!("rho = {}\n", self.rho_spec));
        out.push_str(&format!("coeff = {}\n", self.coeff_spec));
        if let Some(d) = &self.dimensional {
            out.push_str("\n[dimensional]\n");
            out.push_str(&format!("l = {}\n", d.l));
            out.push_str(&format!("lambda = {}\n", d.lambda));
            out.push_str(&format!("rho0 = {}\n", d.rho0));
            out.push_str(&format!("e0 = {}\n", d.e0));
        }
        out
    }

    pub fn rho_field(&self) -> Result<PeriodicField> {
        PeriodicField::from_spec(&self.rho_spec, &self.base_dir)
            .with_context(|| "field key 'rho'".to_string())
    }

    pub fn coeff_field(&self) -> Result<PeriodicField> {
        PeriodicField::from_spec(&self.coeff_spec, &self.base_dir)
            .with_context(|| "field key 'coeff'".to_string())
    }

    pub fn quadrature(&self) -> Result<Quadrature> {
        Quadrature::new(self.sample_count).with_context(|| "key 'sample_count'".to_string())
    }

    /// CFL number (wave) or safety factor (diffusion), as the solvers want.
    pub fn stability_factor(&self) -> f64 {
        match self.equation {
            EquationKind::Wave => self.cfl,
            EquationKind::Diffusion => self.safety,
        }
    }

    /// Single 1/ε with precedence: `--epsilon` flag, `epsilon` key,
    /// `[dimensional]` block, then the stock 1/16.
    pub fn resolve_inv_epsilon(
        &self,
        flag: Option<&str>,
        allow_large_epsilon: bool,
    ) -> Result<usize> {
        if let Some(raw) = flag {
            return parse_inv_epsilon(raw).with_context(|| "flag --epsilon".to_string());
        }
        if let Some(inv) = self.inv_epsilon {
            return Ok(inv);
        }
        if let Some(d) = &self.dimensional {
            let report = crate::scale::nondimensionalize(d, allow_large_epsilon)?;
            return report.integral_inverse();
        }
        Ok(16)
    }

    /// 1/ε list for sweeps: `epsilon_list` key, else the single-ε sources,
    /// else the stock {8, 16, 32, 64}.
    pub fn resolve_inv_epsilon_list(
        &self,
        flag: Option<&str>,
        allow_large_epsilon: bool,
    ) -> Result<Vec<usize>> {
        if flag.is_none() {
            if let Some(list) = &self.inv_epsilon_list {
                return Ok(list.clone());
            }
        }
        if flag.is_some() || self.inv_epsilon.is_some() || self.dimensional.is_some() {
            return Ok(vec![self.resolve_inv_epsilon(flag, allow_large_epsilon)?]);
        }
        Ok(vec![8, 16, 32, 64])
    }

    /// The output times a solver run should record — `output_times` if
    /// given, otherwise just the horizon.
    pub fn resolved_output_times(&self) -> Vec<f64> {
        if self.output_times.is_empty() {
            vec![self.t_end]
        } else {
            self.output_times.clone()
        }
    }
}

type Entries = BTreeMap<(Section, String), String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Run,
    Fields,
    Dimensional,
}

fn section_of(key: &str) -> Result<Section> {
    Ok(match key {
        "rho" | "coeff" => Section::Fields,
        "l" | "lambda" | "rho0" | "e0" => Section::Dimensional,
        "equation" | "epsilon" | "epsilon_list" | "points_per_period" | "cfl" | "safety"
        | "t_end" | "ic" | "output_dir" | "output_times" | "sample_count" | "corrector_grid"
        | "r_points" => Section::Run,
        other => bail!("unknown config key '{other}'"),
    })
}

fn tokenize(text: &str) -> Result<Entries> {
    let mut entries = Entries::new();
    let mut section = Section::Run;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "run" => Section::Run,
                "fields" => Section::Fields,
                "dimensional" => Section::Dimensional,
                other => bail!("line {}: unknown section '[{other}]'", lineno + 1),
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{line}'", lineno + 1))?;
        let key = key.trim().to_string();
        let expected =
            section_of(&key).map_err(|e| anyhow!("line {}: {e}", lineno + 1))?;
        if expected != section {
            bail!(
                "line {}: key '{key}' belongs in the {} section",
                lineno + 1,
                match expected {
                    Section::Run => "[run]",
                    Section::Fields => "[fields]",
                    Section::Dimensional => "[dimensional]",
                }
            );
        }
        if entries
            .insert((section, key.clone()), value.trim().to_string())
            .is_some()
        {
            bail!("line {}: duplicate key '{key}'", lineno + 1);
        }
    }
    Ok(entries)
}

fn to_entries(config: &RunConfig) -> Entries {
    // round-trip through the serialised form keeps one source of truth
    tokenize(&config.to_config_string()).expect("self-serialisation always tokenizes")
}

fn build(entries: Entries, base_dir: &Path) -> Result<RunConfig> {
    let get = |section: Section, key: &str| entries.get(&(section, key.to_string()));

    let equation = match get(Section::Run, "equation").map(String::as_str) {
        None | Some("wave") => EquationKind::Wave,
        Some("diffusion") => EquationKind::Diffusion,
        Some(other) => bail!("key 'equation': expected wave or diffusion, got '{other}'"),
    };

    let inv_epsilon = get(Section::Run, "epsilon")
        .map(|v| parse_inv_epsilon(v).with_context(|| "key 'epsilon'".to_string()))
        .transpose()?;
    let inv_epsilon_list = get(Section::Run, "epsilon_list")
        .map(|v| -> Result<Vec<usize>> {
            v.split(',')
                .map(|part| parse_inv_epsilon(part.trim()))
                .collect::<Result<Vec<usize>>>()
                .with_context(|| "key 'epsilon_list'".to_string())
        })
        .transpose()?;
    if inv_epsilon.is_some() && inv_epsilon_list.is_some() {
        bail!("keys 'epsilon' and 'epsilon_list' are mutually exclusive");
    }

    let dimensional = match (
        get(Section::Dimensional, "l"),
        get(Section::Dimensional, "lambda"),
        get(Section::Dimensional, "rho0"),
        get(Section::Dimensional, "e0"),
    ) {
        (None, None, None, None) => None,
        (l, lambda, rho0, e0) => {
            let need = |v: Option<&String>, key: &str| -> Result<f64> {
                let raw =
                    v.ok_or_else(|| anyhow!("[dimensional] block is missing key '{key}'"))?;
                parse_float(raw).with_context(|| format!("key '{key}'"))
            };
            Some(DimensionalSpec {
                l: need(l, "l")?,
                lambda: need(lambda, "lambda")?,
                rho0: need(rho0, "rho0")?,
                e0: need(e0, "e0")?,
            })
        }
    };
    if dimensional.is_some() && (inv_epsilon.is_some() || inv_epsilon_list.is_some()) {
        bail!("the [dimensional] block and the 'epsilon'/'epsilon_list' keys are mutually exclusive");
    }

    let points_per_period = get(Section::Run, "points_per_period")
        .map(|v| parse_usize(v).with_context(|| "key 'points_per_period'".to_string()))
        .transpose()?
        .unwrap_or(64);
    let cfl = get(Section::Run, "cfl")
        .map(|v| parse_float(v).with_context(|| "key 'cfl'".to_string()))
        .transpose()?
        .unwrap_or(0.5);
    let safety = get(Section::Run, "safety")
        .map(|v| parse_float(v).with_context(|| "key 'safety'".to_string()))
        .transpose()?
        .unwrap_or(0.4);
    let t_end = get(Section::Run, "t_end")
        .map(|v| parse_float(v).with_context(|| "key 't_end'".to_string()))
        .transpose()?
        .unwrap_or(match equation {
            EquationKind::Wave => 1.0,
            EquationKind::Diffusion => 0.5,
        });
    let ic = match get(Section::Run, "ic").map(String::as_str) {
        None | Some("well-prepared") => IcPreset::WellPrepared,
        Some("sine") => IcPreset::SineMode,
        Some("gaussian") => IcPreset::Gaussian,
        Some(other) => bail!("key 'ic': expected sine, gaussian, or well-prepared, got '{other}'"),
    };
    let output_dir = PathBuf::from(
        get(Section::Run, "output_dir")
            .map(String::as_str)
            .unwrap_or("out"),
    );
    // TODO: accept a linspace shorthand (start:stop:count) for dense output grids
    let output_times = get(Section::Run, "output_times")
        .map(|v| -> Result<Vec<f64>> {
            v.split(',')
                .map(|part| parse_float(part.trim()))
                .collect::<Result<Vec<f64>>>()
                .with_context(|| "key 'output_times'".to_string())
        })
        .transpose()?
        .unwrap_or_default();
    let sample_count = get(Section::Run, "sample_count")
        .map(|v| parse_usize(v).with_context(|| "key 'sample_count'".to_string()))
        .transpose()?
        .unwrap_or(4096);
    let corrector_grid = get(Section::Run, "corrector_grid")
        .map(|v| parse_usize(v).with_context(|| "key 'corrector_grid'".to_string()))
        .transpose()?
        .unwrap_or(1024);
    let r_points = get(Section::Run, "r_points")
        .map(|v| parse_usize(v).with_context(|| "key 'r_points'".to_string()))
        .transpose()?
        .unwrap_or(256);

    let rho_spec = get(Section::Fields, "rho")
        .cloned()
        .unwrap_or_else(|| "constant:1".to_string());
    let coeff_spec = get(Section::Fields, "coeff")
        .cloned()
        .unwrap_or_else(|| "constant:1".to_string());

    Ok(RunConfig {
        equation,
        rho_spec,
        coeff_spec,
        inv_epsilon,
        inv_epsilon_list,
        points_per_period,
        cfl,
        safety,
        t_end,
        ic,
        output_dir,
        output_times,
        sample_count,
        corrector_grid,
        r_points,
        dimensional,
        base_dir: base_dir.to_path_buf(),
    })
}

fn ic_name(ic: IcPreset) -> &'static str {
    match ic {
        IcPreset::SineMode => "sine",
        IcPreset::Gaussian => "gaussian",
        IcPreset::WellPrepared => "well-prepared",
    }
}

/// Accepts `1/16` or a decimal like `0.0625`; the reciprocal must be an
/// integer (the domain holds a whole number of coefficient cells).
pub fn parse_inv_epsilon(raw: &str) -> Result<usize> {
    let raw = raw.trim();
    if let Some((num, den)) = raw.split_once('/') {
        let num: f64 = parse_float(num.trim())?;
        let den: f64 = parse_float(den.trim())?;
        if num != 1.0 {
            bail!("epsilon fraction must have numerator 1, got '{raw}'");
        }
        if den < 1.0 || den.fract() != 0.0 {
            bail!("epsilon denominator must be a positive integer, got '{raw}'");
        }
        return Ok(den as usize);
    }
    let eps = parse_float(raw)?;
    if !(eps > 0.0 && eps < 1.0) {
        bail!("epsilon must lie in (0, 1), got {eps}");
    }
    let inv = 1.0 / eps;
    if (inv - inv.round()).abs() > 1e-9 * inv.round() {
        bail!("1/epsilon must be an integer, got 1/{eps} = {inv}");
    }
    Ok(inv.round() as usize)
}

fn parse_float(raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| anyhow!("expected a number, got '{raw}'"))?;
    if !v.is_finite() {
        bail!("expected a finite number, got '{raw}'");
    }
    Ok(v)
}

fn parse_usize(raw: &str) -> Result<usize> {
    raw.trim()
        .parse()
        .map_err(|_| anyhow!("expected a positive integer, got '{raw}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# demo sweep
[run]
equation = wave
epsilon_list = 1/8, 1/16, 0.03125
points_per_period = 32
cfl = 0.45
t_end = 2.5
ic = sine
output_dir = results
output_times = 1.0, 2.5
sample_count = 2048
corrector_grid = 512
r_points = 128

[fields]
rho = constant:1
coeff = cosine:2,1
";

    #[test]
    fn parses_the_sample_and_round_trips() {
        let base = Path::new("/tmp");
        let c1 = RunConfig::parse(SAMPLE, base).unwrap();
        assert_eq!(c1.equation, EquationKind::Wave);
        assert_eq!(c1.inv_epsilon_list, Some(vec![8, 16, 32]));
        assert_eq!(c1.points_per_period, 32);
        assert_eq!(c1.cfl, 0.45);
        assert_eq!(c1.safety, 0.4); // untouched default
        assert_eq!(c1.ic, IcPreset::SineMode);
        assert_eq!(c1.output_times, vec![1.0, 2.5]);
        assert_eq!(c1.corrector_grid, 512);

        let c2 = RunConfig::parse(&c1.to_config_string(), base).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn defaults_fill_a_minimal_config() {
        let c = RunConfig::parse("[fields]\ncoeff = twophase:1,4,0.5\n", Path::new(".")).unwrap();
        assert_eq!(c.equation, EquationKind::Wave);
        assert_eq!(c.points_per_period, 64);
        assert_eq!(c.cfl, 0.5);
        assert_eq!(c.safety, 0.4);
        assert_eq!(c.t_end, 1.0);
        assert_eq!(c.ic, IcPreset::WellPrepared);
        assert_eq!(c.sample_count, 4096);
        assert_eq!(c.r_points, 256);
        assert_eq!(c.rho_spec, "constant:1");
        assert_eq!(c.output_dir, PathBuf::from("out"));
        // no epsilon source: single runs get 1/16, sweeps the stock list
        assert_eq!(c.resolve_inv_epsilon(None, false).unwrap(), 16);
        assert_eq!(
            c.resolve_inv_epsilon_list(None, false).unwrap(),
            vec![8, 16, 32, 64]
        );
    }

    #[test]
    fn diffusion_default_horizon_is_half() {
        let c = RunConfig::parse("[run]\nequation = diffusion\n", Path::new(".")).unwrap();
        assert_eq!(c.t_end, 0.5);
        assert_eq!(c.resolved_output_times(), vec![0.5]);
    }

    #[test]
    fn errors_name_the_offending_key() {
        let err = RunConfig::parse("[run]\nepsilonn = 1/8\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("epsilonn"), "{err}");

        let err = RunConfig::parse("[run]\ncfl = 0.5\ncfl = 0.6\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("duplicate") && err.contains("cfl"), "{err}");

        let err = RunConfig::parse("[orbit]\n", Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("orbit"), "{err}");

        let err = RunConfig::parse("[run]\nrho = constant:1\n", Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("rho") && err.contains("[fields]"), "{err}");

        let err = format!(
            "{:#}",
            RunConfig::parse("[run]\ncfl = fast\n", Path::new(".")).unwrap_err()
        );
        assert!(err.contains("cfl"), "{err}");
    }

    #[test]
    fn epsilon_sources_are_mutually_exclusive() {
        let err = RunConfig::parse(
            "[run]\nepsilon = 1/8\nepsilon_list = 1/8, 1/16\n",
            Path::new("."),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("mutually exclusive"), "{err}");

        let err = RunConfig::parse(
            "[run]\nepsilon = 1/8\n\n[dimensional]\nl = 1\nlambda = 8\nrho0 = 1\ne0 = 1\n",
            Path::new("."),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn dimensional_block_requires_all_four_quantities() {
        let err = RunConfig::parse(
            "[dimensional]\nl = 1\nlambda = 8\nrho0 = 1\n",
            Path::new("."),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("e0"), "{err}");
    }

    #[test]
    fn epsilon_grammar_accepts_fractions_and_decimals() {
        assert_eq!(parse_inv_epsilon("1/16").unwrap(), 16);
        assert_eq!(parse_inv_epsilon(" 1/8 ").unwrap(), 8);
        assert_eq!(parse_inv_epsilon("0.0625").unwrap(), 16);
        assert!(parse_inv_epsilon("2/16").is_err());
        assert!(parse_inv_epsilon("0.3").is_err());
        assert!(parse_inv_epsilon("1.5").is_err());
        assert!(parse_inv_epsilon("nope").is_err());
    }

    #[test]
    fn overrides_replace_file_values_and_are_validated() {
        let base = Path::new("/tmp");
        let c = RunConfig::parse(SAMPLE, base).unwrap();
        let c = c
            .apply_overrides(&["cfl=0.25".into(), "coeff=constant:3".into()])
            .unwrap();
        assert_eq!(c.cfl, 0.25);
        assert_eq!(c.coeff_spec, "constant:3");
        // untouched keys survive
        assert_eq!(c.points_per_period, 32);

        let c2 = RunConfig::parse(SAMPLE, base).unwrap();
        assert!(c2.clone().apply_overrides(&["nonsense=1".into()]).is_err());
        assert!(c2.apply_overrides(&["cfl0.25".into()]).is_err());
    }

    #[test]
    fn round_trip_covers_the_dimensional_block() {
        let text = "[run]\nequation = diffusion\n\n[fields]\ncoeff = twophase:1,4,0.5\n\n\
                    [dimensional]\nl = 0.01\nlambda = 0.64\nrho0 = 4\ne0 = 1\n";
        let base = Path::new(".");
        let c1 = RunConfig::parse(text, base).unwrap();
        assert!(c1.dimensional.is_some());
        let c2 = RunConfig::parse(&c1.to_config_string(), base).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(c1.resolve_inv_epsilon(None, false).unwrap(), 64);
    }

    #[test]
    fn flag_epsilon_takes_precedence() {
        let base = Path::new("/tmp");
        let c = RunConfig::parse(SAMPLE, base).unwrap();
        assert_eq!(c.resolve_inv_epsilon(Some("1/32"), false).unwrap(), 32);
        assert_eq!(
            c.resolve_inv_epsilon_list(Some("1/32"), false).unwrap(),
            vec![32]
        );
        // without the flag the list key wins
        assert_eq!(
            c.resolve_inv_epsilon_list(None, false).unwrap(),
            vec![8, 16, 32]
        );
    }
}
