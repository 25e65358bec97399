//! Periodic coefficient profiles E(ξ), K(ξ), ρ(ξ) and their cell averages.
//!
//! Everything here lives on one fast cell ξ ∈ [0, 2π).  The averaging
//! operator is the plain period mean ⟨f⟩ = (1/2π)∫ f dξ, realised as a
//! composite midpoint rule; the bar/tilde split writes f = f̄ + f̃ with
//! ⟨f̃⟩ = 0.  Midpoint nodes sit at ξ = (j+1/2)·2π/N, which keeps them off
//! the phase boundaries of a two-phase profile whenever N is even and the
//! jumps sit at ξ = 0 and ξ = 2π·fraction_a.

use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};

/// Cell period; all profiles repeat with this ξ-period.
pub const PERIOD: f64 = TAU;

/// A strictly positive coefficient profile, 2π-periodic in the fast variable ξ.
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodicField {
    /// f(ξ) = c
    Constant(f64),
    /// f(ξ) = mean + amplitude·cos ξ, with |amplitude| < mean so f stays positive
    Cosine { mean: f64, amplitude: f64 },
    /// f(ξ) = value_a on [0, 2π·fraction_a), value_b on the rest of the cell
    TwoPhase {
        value_a: f64,
        value_b: f64,
        fraction_a: f64,
    },
    /// Samples on the uniform grid ξ_j = 2πj/N, linearly interpolated in between
    /// (wrapping from the last sample back to the first).
    Tabulated(Vec<f64>),
}

impl PeriodicField {
    pub fn constant(c: f64) -> Result<Self> {
        let f = PeriodicField::Constant(c);
        f.validate()?;
        Ok(f)
    }

    pub fn cosine(mean: f64, amplitude: f64) -> Result<Self> {
        let f = PeriodicField::Cosine { mean, amplitude };
        f.validate()?;
        Ok(f)
    }

    pub fn two_phase(value_a: f64, value_b: f64, fraction_a: f64) -> Result<Self> {
        let f = PeriodicField::TwoPhase {
            value_a,
            value_b,
            fraction_a,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn tabulated(samples: Vec<f64>) -> Result<Self> {
        let f = PeriodicField::Tabulated(samples);
        f.validate()?;
        Ok(f)
    }

    /// Check the structural constraints: strict positivity everywhere, at
    /// least two tabulated samples, phase fraction strictly inside (0, 1).
    pub fn validate(&self) -> Result<()> {
        match self {
            PeriodicField::Constant(c) => {
                if !c.is_finite() || *c <= 0.0 {
                    return Err(Error::NonPositive(format!("constant value {c}")));
                }
            }
            PeriodicField::Cosine { mean, amplitude } => {
                if !mean.is_finite() || !amplitude.is_finite() {
                    return Err(Error::InvalidField("non-finite cosine parameters".into()));
                }
                // min over the cell is mean - |amplitude|; require it positive
                if *mean <= 0.0 || amplitude.abs() >= *mean {
                    return Err(Error::NonPositive(format!(
                        "cosine profile {mean} + {amplitude}·cos ξ reaches a non-positive value"
                    )));
                }
            }
            PeriodicField::TwoPhase {
                value_a,
                value_b,
                fraction_a,
            } => {
                if !value_a.is_finite() || !value_b.is_finite() || !fraction_a.is_finite() {
                    return Err(Error::InvalidField("non-finite two-phase parameters".into()));
                }
                if *value_a <= 0.0 || *value_b <= 0.0 {
                    return Err(Error::NonPositive(format!(
                        "two-phase values ({value_a}, {value_b})"
                    )));
                }
                if *fraction_a <= 0.0 || *fraction_a >= 1.0 {
                    return Err(Error::InvalidField(format!(
                        "phase fraction {fraction_a} must lie strictly inside (0, 1)"
                    )));
                }
            }
            PeriodicField::Tabulated(samples) => {
                if samples.len() < 2 {
                    return Err(Error::InvalidField(format!(
                        "tabulated field needs at least 2 samples, got {}",
                        samples.len()
                    )));
                }
                for (j, s) in samples.iter().enumerate() {
                    if !s.is_finite() || *s <= 0.0 {
                        return Err(Error::NonPositive(format!("tabulated sample {j} = {s}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluate the profile at ξ, reducing ξ into [0, 2π) first.
    pub fn evaluate(&self, xi: f64) -> f64 {
        let xi = wrap(xi);
        match self {
            PeriodicField::Constant(c) => *c,
            PeriodicField::Cosine { mean, amplitude } => mean + amplitude * xi.cos(),
            PeriodicField::TwoPhase {
                value_a,
                value_b,
                fraction_a,
            } => {
                if xi < fraction_a * TAU {
                    *value_a
                } else {
                    *value_b
                }
            }
            PeriodicField::Tabulated(samples) => {
                let n = samples.len();
                if n == 1 {
                    return samples[0]; // degenerate; normal paths validate n >= 2
                }
                let pos = xi / TAU * n as f64;
                let j = (pos.floor() as usize).min(n - 1);
                let u = pos - j as f64;
                let next = samples[(j + 1) % n];
                samples[j] * (1.0 - u) + next * u
            }
        }
    }

    /// Pointwise reciprocal M(ξ) = 1/f(ξ).  Constant and two-phase profiles
    /// invert exactly in kind; a cosine reciprocal is no longer a cosine, so
    /// it is returned tabulated at the default quadrature resolution.
    pub fn reciprocal_field(&self) -> Result<Self> {
        self.validate()?;
        match self {
            PeriodicField::Constant(c) => PeriodicField::constant(1.0 / c),
            PeriodicField::TwoPhase {
                value_a,
                value_b,
                fraction_a,
            } => PeriodicField::two_phase(1.0 / value_a, 1.0 / value_b, *fraction_a),
            PeriodicField::Cosine { .. } => {
                let n = Quadrature::DEFAULT_SAMPLE_COUNT;
                let h = TAU / n as f64;
                let samples = (0..n).map(|j| 1.0 / self.evaluate(j as f64 * h)).collect();
                PeriodicField::tabulated(samples)
            }
            PeriodicField::Tabulated(samples) => {
                PeriodicField::tabulated(samples.iter().map(|s| 1.0 / s).collect())
            }
        }
    }

    /// Exact period mean where the profile has one in closed form.
    /// (Used by tests as an oracle; quadrature paths do not call this.)
    pub fn exact_average(&self) -> Option<f64> {
        match self {
            PeriodicField::Constant(c) => Some(*c),
            PeriodicField::Cosine { mean, .. } => Some(*mean),
            PeriodicField::TwoPhase {
                value_a,
                value_b,
                fraction_a,
            } => Some(value_a * fraction_a + value_b * (1.0 - fraction_a)),
            PeriodicField::Tabulated(_) => None,
        }
    }

    /// Parse a textual field spec: `constant:c`, `cosine:c0,c1`,
    /// `twophase:vA,vB,fracA`, or `file:<path>` (one sample per line on a
    /// uniform ξ grid over [0, 2π); relative paths resolve against `base_dir`).
    pub fn from_spec(spec: &str, base_dir: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::BadFieldSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (kind, args) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected `kind:args`"))?;
        let numbers = |want: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = args
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(&format!("bad number: {e}")))?;
            if vals.len() != want {
                return Err(bad(&format!("expected {want} arguments, got {}", vals.len())));
            }
            Ok(vals)
        };
        match kind.trim() {
            "constant" => {
                let v = numbers(1)?;
                PeriodicField::constant(v[0])
            }
            "cosine" => {
                let v = numbers(2)?;
                PeriodicField::cosine(v[0], v[1])
            }
            "twophase" => {
                let v = numbers(3)?;
                PeriodicField::two_phase(v[0], v[1], v[2])
            }
            "file" => {
                let path = base_dir.join(args.trim());
                let text = std::fs::read_to_string(&path).map_err(|e| Error::BadFieldSpec {
                    spec: spec.to_string(),
                    reason: format!("cannot read {}: {e}", path.display()),
                })?;
                let mut samples = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let v: f64 = line.parse().map_err(|e| Error::BadFieldSpec {
                        spec: spec.to_string(),
                        reason: format!("line {}: {e}", lineno + 1),
                    })?;
                    samples.push(v);
                }
                PeriodicField::tabulated(samples)
            }
            other => Err(bad(&format!("unknown field kind `{other}`"))),
        }
    }
}

/// Reduce ξ into [0, 2π).  `rem_euclid` can return exactly 2π for tiny
/// negative inputs, hence the final clamp.
fn wrap(xi: f64) -> f64 {
    let r = xi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Composite midpoint rule over the cell with a fixed node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    sample_count: usize,
}

impl Quadrature {
    /// Resolves two-phase presets exactly and smooth profiles to round-off.
    pub const DEFAULT_SAMPLE_COUNT: usize = 4096;

    pub fn new(sample_count: usize) -> Result<Self> {
        if sample_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs at least 2 samples, got {sample_count}"
            )));
        }
        Ok(Quadrature { sample_count })
    }

    /// Node count matching a field: the tabulated resolution when there is
    /// one, the default otherwise.
    pub fn matching(field: &PeriodicField) -> Self {
        match field {
            PeriodicField::Tabulated(s) if s.len() >= 2 => Quadrature {
                sample_count: s.len(),
            },
            _ => Quadrature::default(),
        }
    }

    pub fn sample_count(self) -> usize {
        self.sample_count
    }

    /// Midpoint nodes ξ_j = (j+1/2)·2π/N, j = 0..N.
    pub fn nodes(self) -> impl Iterator<Item = f64> {
        let h = TAU / self.sample_count as f64;
        (0..self.sample_count).map(move |j| (j as f64 + 0.5) * h)
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            sample_count: Self::DEFAULT_SAMPLE_COUNT,
        }
    }
}

/// Midpoint-rule period mean of an arbitrary ξ-function.
pub fn average_with(quad: Quadrature, f: impl Fn(f64) -> f64) -> f64 {
    let sum: f64 = quad.nodes().map(f).sum();
    sum / quad.sample_count() as f64
}

/// Midpoint-rule period mean ⟨f⟩ of a validated field.
pub fn average(field: &PeriodicField, quad: Quadrature) -> Result<f64> {
    field.validate()?;
    Ok(average_with(quad, |xi| field.evaluate(xi)))
}

/// Split f into its period mean and the zero-mean remainder f̃ = f − f̄,
/// returned as a tabulated field sampled at ξ_j = 2πj/N with N the
/// quadrature node count.
pub fn decompose(field: &PeriodicField, quad: Quadrature) -> Result<(f64, PeriodicField)> {
    let bar = average(field, quad)?;
    let n = quad.sample_count();
    let h = TAU / n as f64;
    let tilde = (0..n)
        .map(|j| field.evaluate(j as f64 * h) - bar)
        .collect::<Vec<_>>();
    // Not `tabulated(...)`: the remainder crosses zero by construction, so the
    // positivity check does not apply to it.
    Ok((bar, PeriodicField::Tabulated(tilde)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_and_cosine_evaluate() {
        let c = PeriodicField::constant(2.5).unwrap();
        assert_eq!(c.evaluate(0.0), 2.5);
        assert_eq!(c.evaluate(100.0), 2.5);

        let e = PeriodicField::cosine(2.0, 1.0).unwrap();
        assert_relative_eq!(e.evaluate(0.0), 3.0, max_relative = 1e-15);
        assert_relative_eq!(e.evaluate(std::f64::consts::PI), 1.0, max_relative = 1e-15);
        // periodicity
        assert_relative_eq!(e.evaluate(1.0 + TAU), e.evaluate(1.0), max_relative = 1e-12);
    }

    #[test]
    fn two_phase_evaluate_sides_of_the_jump() {
        let k = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap();
        assert_eq!(k.evaluate(1.0), 1.0); // inside phase A
        assert_eq!(k.evaluate(4.0), 4.0); // inside phase B
        assert_eq!(k.evaluate(0.0), 1.0); // phase A owns its left endpoint
        assert_eq!(k.evaluate(std::f64::consts::PI), 4.0); // phase B owns the jump
    }

    #[test]
    fn tabulated_interpolates_linearly_and_wraps() {
        let t = PeriodicField::tabulated(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        // nodes at 0, π/2, π, 3π/2; ξ = π/4 is halfway between samples 0 and 1
        assert_relative_eq!(t.evaluate(std::f64::consts::FRAC_PI_4), 1.5, max_relative = 1e-14);
        // halfway between the last sample and the wrapped-around first one
        assert_relative_eq!(
            t.evaluate(3.0 * std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_PI_4),
            2.5,
            max_relative = 1e-14
        );
        assert_relative_eq!(t.evaluate(0.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn construction_rejects_bad_profiles() {
        assert!(PeriodicField::constant(0.0).is_err());
        assert!(PeriodicField::constant(-1.0).is_err());
        // amplitude equal to the mean touches zero at ξ = π
        assert!(PeriodicField::cosine(1.0, 1.0).is_err());
        assert!(PeriodicField::cosine(2.0, -2.5).is_err());
        assert!(PeriodicField::two_phase(1.0, 4.0, 0.0).is_err());
        assert!(PeriodicField::two_phase(1.0, 4.0, 1.0).is_err());
        assert!(PeriodicField::two_phase(-1.0, 4.0, 0.5).is_err());
        assert!(PeriodicField::tabulated(vec![1.0]).is_err());
        assert!(PeriodicField::tabulated(vec![1.0, 0.0]).is_err());
        assert!(PeriodicField::tabulated(vec![]).is_err());
    }

    #[test]
    fn averages_match_closed_forms() {
        let quad = Quadrature::default();
        // uniform sampling integrates a pure cosine exactly: 2 + cos averages to 2
        let e = PeriodicField::cosine(2.0, 1.0).unwrap();
        assert_relative_eq!(average(&e, quad).unwrap(), 2.0, max_relative = 1e-14);
        // 0.5·1 + 0.5·4 = 2.5; even node count keeps midpoints off the jumps
        let k = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap();
        assert_relative_eq!(average(&k, quad).unwrap(), 2.5, max_relative = 1e-14);
        let c = PeriodicField::constant(7.25).unwrap();
        assert_relative_eq!(average(&c, quad).unwrap(), 7.25, max_relative = 1e-15);
    }

    #[test]
    fn midpoint_rule_converges_against_a_closed_form_integral() {
        // ⟨1/(2+cos ξ)⟩ = 1/√3, from ∫₀^2π dξ/(a + b·cos ξ) = 2π/√(a²−b²).
        // The integrand is smooth but not a trig polynomial, so the midpoint
        // error is visible at tiny node counts and collapses as N doubles.
        let exact = 1.0 / 3.0f64.sqrt();
        let err = |n: usize| {
            let quad = Quadrature::new(n).unwrap();
            (average_with(quad, |xi| 1.0 / (2.0 + xi.cos())) - exact).abs()
        };
        let (e4, e8, e16) = (err(4), err(8), err(16));
        assert!(e4 > 1e-6, "error at N=4 should be visible, got {e4:.3e}");
        assert!(e8 <= e4 / 4.0, "N=4→8 did not gain 2nd order: {e4:.3e} → {e8:.3e}");
        assert!(e16 <= e8 / 4.0, "N=8→16 did not gain 2nd order: {e8:.3e} → {e16:.3e}");
        // and the default node count leaves only round-off
        assert!(err(Quadrature::DEFAULT_SAMPLE_COUNT) < 1e-14);
    }

    #[test]
    fn tabulated_average_is_the_sample_mean_at_matching_resolution() {
        // With N quadrature nodes over N samples, each midpoint value is the
        // mean of two adjacent samples, so the total is the plain sample mean.
        let samples = vec![1.0, 3.0, 2.0, 5.0, 4.0, 2.0, 2.0, 1.0];
        let mean: f64 = samples.iter().sum::<f64>() / samples.len() as f64;
        let t = PeriodicField::tabulated(samples).unwrap();
        let quad = Quadrature::matching(&t);
        assert_eq!(quad.sample_count(), 8);
        assert_relative_eq!(average(&t, quad).unwrap(), mean, max_relative = 1e-14);
    }

    #[test]
    fn decompose_splits_into_mean_plus_zero_mean_remainder() {
        let quad = Quadrature::new(1024).unwrap();
        for field in [
            PeriodicField::constant(3.0).unwrap(),
            PeriodicField::cosine(2.0, 1.0).unwrap(),
            PeriodicField::cosine(5.0, 4.99).unwrap(),
            PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap(),
            PeriodicField::two_phase(0.5, 2.5, 0.25).unwrap(),
        ] {
            let (bar, tilde) = decompose(&field, quad).unwrap();
            let scale = average_with(quad, |xi| field.evaluate(xi).abs());
            let tilde_mean = average_with(quad, |xi| tilde.evaluate(xi));
            assert!(
                tilde_mean.abs() <= 1e-12 * scale,
                "tilde mean {tilde_mean:.3e} for {field:?}"
            );
            // remainder reproduces f − f̄ at its own sample nodes
            let h = TAU / quad.sample_count() as f64;
            for j in [0usize, 7, 511, 1023] {
                let xi = j as f64 * h;
                assert_relative_eq!(
                    tilde.evaluate(xi),
                    field.evaluate(xi) - bar,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn reciprocal_field_inverts_pointwise() {
        let c = PeriodicField::constant(4.0).unwrap().reciprocal_field().unwrap();
        assert_eq!(c.evaluate(1.0), 0.25);

        let k = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap().reciprocal_field().unwrap();
        assert_eq!(k.evaluate(1.0), 1.0);
        assert_eq!(k.evaluate(4.0), 0.25);

        let e = PeriodicField::cosine(2.0, 1.0).unwrap();
        let m = e.reciprocal_field().unwrap();
        // tabulated nodes start at ξ = 0, where 1/(2+cos 0) = 1/3 exactly
        assert_relative_eq!(m.evaluate(0.0), 1.0 / 3.0, max_relative = 1e-15);
        // between nodes the interpolant tracks 1/E to second order in the node spacing
        assert_relative_eq!(m.evaluate(1.234), 1.0 / e.evaluate(1.234), epsilon = 1e-7);

        let t = PeriodicField::tabulated(vec![1.0, 2.0, 4.0]).unwrap().reciprocal_field().unwrap();
        assert_eq!(t.evaluate(0.0), 1.0);
    }

    #[test]
    fn spec_grammar_round_trips_the_four_kinds() {
        let dir = std::env::temp_dir();
        assert_eq!(
            PeriodicField::from_spec("constant:2.5", &dir).unwrap(),
            PeriodicField::Constant(2.5)
        );
        assert_eq!(
            PeriodicField::from_spec("cosine:2,1", &dir).unwrap(),
            PeriodicField::Cosine { mean: 2.0, amplitude: 1.0 }
        );
        assert_eq!(
            PeriodicField::from_spec("twophase:1,4,0.5", &dir).unwrap(),
            PeriodicField::TwoPhase { value_a: 1.0, value_b: 4.0, fraction_a: 0.5 }
        );
        assert_eq!(
            PeriodicField::from_spec("cosine: 2 , 1", &dir).unwrap(),
            PeriodicField::Cosine { mean: 2.0, amplitude: 1.0 }
        );
    }

    #[test]
    fn spec_grammar_reads_tabulated_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("fields")).unwrap();
        std::fs::write(dir.path().join("fields/k.txt"), "1.0\n2.0\n\n3.0\n4.0\n").unwrap();
        let f = PeriodicField::from_spec("file:fields/k.txt", dir.path()).unwrap();
        assert_eq!(f, PeriodicField::Tabulated(vec![1.0, 2.0, 3.0, 4.0]));
    }

    #[test]
    fn spec_grammar_rejects_malformed_input() {
        let dir = std::env::temp_dir();
        for bad in [
            "nonsense",
            "unknown:1,2",
            "cosine:1",
            "cosine:a,b",
            "twophase:1,4",
            "constant:-2",
            "file:/definitely/not/here.txt",
        ] {
            let got = PeriodicField::from_spec(bad, &dir);
            assert!(got.is_err(), "spec `{bad}` should not parse, got {got:?}");
        }
    }

    #[test]
    fn quadrature_needs_two_nodes() {
        assert!(Quadrature::new(1).is_err());
        assert!(Quadrature::new(2).is_ok());
    }

    proptest! {
        /// Shifting the integrand leaves the period mean unchanged.  Smooth
        /// profiles keep this to round-off; a shifted two-phase profile can
        /// park its jumps mid-cell, so there the tolerance is one cell's
        /// worth of misassigned mass per jump.
        #[test]
        fn average_is_translation_invariant(shift in 0.0..TAU) {
            let quad = Quadrature::new(4096).unwrap();

            let e = PeriodicField::cosine(2.0, 1.0).unwrap();
            let shifted = average_with(quad, |xi| e.evaluate(xi + shift));
            prop_assert!((shifted - 2.0).abs() < 1e-12);

            let k = PeriodicField::two_phase(1.0, 4.0, 0.5).unwrap();
            let shifted = average_with(quad, |xi| k.evaluate(xi + shift));
            let cell = TAU / quad.sample_count() as f64;
            let jump_mass = 2.0 * 3.0 * cell / TAU; // 2 jumps × |Δv| × cell fraction
            prop_assert!((shifted - 2.5).abs() <= jump_mass);
        }

        /// f(ξ) = f(ξ + 2πm) for all kinds.
        #[test]
        fn evaluate_is_periodic(xi in -50.0..50.0f64, m in -3i32..4) {
            let fields = [
                PeriodicField::cosine(3.0, 2.0).unwrap(),
                PeriodicField::two_phase(1.0, 4.0, 0.3).unwrap(),
                PeriodicField::tabulated(vec![1.0, 2.0, 5.0, 3.0, 2.0]).unwrap(),
            ];
            for f in &fields {
                let a = f.evaluate(xi);
                let b = f.evaluate(xi + TAU * m as f64);
                // wrap + interpolation round-off only
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
