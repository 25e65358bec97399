//! Emission of small self-contained Python scripts that render the CSV
//! outputs.  The binary never draws anything itself; it writes a script next
//! to the data so the plots can be regenerated (or restyled) after the fact.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// How a script should refer to a data file: by bare name when it sits next
/// to the script, by absolute path otherwise, so the script keeps working
/// when invoked from any directory.
fn script_relative(csv: &Path, script: &Path) -> String {
    let same_dir = match (csv.parent(), script.parent()) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    if same_dir {
        csv.file_name().unwrap_or_default().to_string_lossy().into_owned()
    } else {
        csv.to_string_lossy().into_owned()
    }
}

/// Writes a script that draws the convergence report on log-log axes: one
/// series for the plain error, one for the corrector-dressed error.
pub fn emit_report_script(report_csv: &Path, script_path: &Path) -> Result<()> {
    if !report_csv.exists() {
        bail!("report file {} does not exist", report_csv.display());
    }
    let data = script_relative(report_csv, script_path);
    let script = format!(
        r#"#!/usr/bin/env python3
"""Log-log error-vs-epsilon plot for a convergence report CSV."""
import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

eps, plain, corrected = [], [], []
with open({data:?}) as f:
    for row in csv.reader(f):
        if len(row) != 3 or row[0] in ("epsilon", "rate_plain", "rate_corrected",
                                       "fitted_constant", "skipped_epsilon"):
            continue
        eps.append(float(row[0]))
        plain.append(float(row[1]))
        corrected.append(float(row[2]))

fig, ax = plt.subplots(figsize=(5, 4))
ax.loglog(eps, plain, "o-", label="plain error")
ax.loglog(eps, corrected, "s-", label="corrected error")
ax.set_xlabel("epsilon")
ax.set_ylabel("relative L2 error")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig("report.png", dpi=150)
print("wrote report.png")
"#
    );
    fs::write(script_path, script)
        .with_context(|| format!("writing {}", script_path.display()))?;
    Ok(())
}

/// Writes a script that overlays several two-column CSVs (profile snapshots,
/// reconstructions) on shared axes, labelled by file stem.
pub fn emit_overlay_script(csvs: &[std::path::PathBuf], script_path: &Path) -> Result<()> {
    if csvs.is_empty() {
        bail!("overlay plot needs at least one CSV file");
    }
    for c in csvs {
        if !c.exists() {
            bail!("overlay input {} does not exist", c.display());
        }
    }
    let entries: Vec<String> = csvs
        .iter()
        .map(|c| {
            let label = c
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            format!("    ({:?}, {:?}),", script_relative(c, script_path), label)
        })
        .collect();
    let script = format!(
        r#"#!/usr/bin/env python3
"""Overlay of two-column CSV profiles on shared axes."""
import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

FILES = [
{entries}
]

fig, ax = plt.subplots(figsize=(6, 4))
for path, label in FILES:
    xs, ys = [], []
    with open(path) as f:
        reader = csv.reader(f)
        next(reader)  # header
        for row in reader:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    ax.plot(xs, ys, label=label)
ax.set_xlabel("position")
ax.set_ylabel("value")
ax.grid(True, alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig("overlay.png", dpi=150)
print("wrote overlay.png")
"#,
        entries = entries.join("\n")
    );
    fs::write(script_path, script)
        .with_context(|| format!("writing {}", script_path.display()))?;
    Ok(())
}
