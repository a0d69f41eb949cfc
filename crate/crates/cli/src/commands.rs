use std::io::Write;
use std::path::{Path, PathBuf};

use rhr_core::checks::{run_checks, CheckOutcome};
use rhr_core::schedule::NoiseSchedule;

use crate::config::{CurveKind, ExperimentConfig};
use crate::csvfmt::sig9;
use crate::error::{CliError, Result};
use crate::experiment::{curves_csv, par_map, seeds, trace_csv, Setup};
use crate::{pgm, rhrt};

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

/// Prints the ladder and writes `ladder.csv`.
pub fn ladder(cfg: &ExperimentConfig, dir: &Path, out: &mut dyn Write) -> Result<PathBuf> {
    let plan = cfg.plan()?;
    let steps: Vec<String> = plan.refresh_steps().iter().map(|s| s.to_string()).collect();
    let omegas: Vec<String> = plan.omegas().iter().map(|&w| sig9(w)).collect();
    say(out, format_args!("refresh steps: [{}]", steps.join(", ")))?;
    say(out, format_args!("omegas: [{}]", omegas.join(", ")))?;
    say(
        out,
        format_args!(
            "{:>5} {:>6} {:>5} {:>7} {:>6} {:>12}",
            "stage", "first", "last", "height", "width", "omega"
        ),
    )?;
    let mut csv = String::from("stage,first_step,last_step,height,width,omega\n");
    for (i, s) in plan.stages().iter().enumerate() {
        let (h, w) = s.resolution;
        say(
            out,
            format_args!(
                "{i:>5} {:>6} {:>5} {h:>7} {w:>6} {:>12}",
                s.first_step,
                s.last_step,
                sig9(s.omega)
            ),
        )?;
        csv.push_str(&format!(
            "{i},{},{},{h},{w},{}\n",
            s.first_step,
            s.last_step,
            sig9(s.omega)
        ));
    }
    create_dir(dir)?;
    let path = dir.join("ladder.csv");
    write_file(&path, csv)?;
    Ok(path)
}

/// Runs every seed and writes its trace, final grid and snapshots.
pub fn sample(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<Vec<PathBuf>> {
    let setup = Setup::from_config(cfg)?;
    create_dir(dir)?;
    let written = par_map(jobs, &seeds(cfg), |&seed| {
        let result = setup.run_one(&setup.base, seed)?;
        let mut paths = vec![
            dir.join(format!("trace_{seed}.csv")),
            dir.join(format!("final_{seed}.rhrt")),
        ];
        write_file(&paths[0], trace_csv(&result))?;
        rhrt::write_grid(&paths[1], &result.final_p_x0)?;
        for (step, grid) in &result.p_x0_snapshots {
            let p = dir.join(format!("snapshot_{seed}_{step}.rhrt"));
            rhrt::write_grid(&p, grid)?;
            paths.push(p);
        }
        Ok(paths)
    })?;
    Ok(written.into_iter().flatten().collect())
}

/// Writes `energy_curves.csv` with one mean curve per configured variant and
/// sweep value.
pub fn energy_curve(cfg: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<PathBuf> {
    let setup = Setup::from_config(cfg)?;
    let seeds = seeds(cfg);
    let ec = &cfg.energy_curve;
    let mut curves = Vec::new();
    for &kind in &ec.variants {
        let spec = setup.curve_spec(kind)?;
        curves.push(setup.mean_curve(
            kind.label(),
            &spec,
            kind == CurveKind::NativeBaseline,
            &seeds,
            jobs,
        )?);
    }
    let sweep_res = ec
        .sweep_resolution
        .unwrap_or_else(|| setup.plan.target_resolution());
    for &w in &ec.omegas {
        let label = format!("omega={}", sig9(w));
        curves.push(setup.mean_curve(
            &label,
            &setup.sweep_spec(sweep_res, w),
            false,
            &seeds,
            jobs,
        )?);
    }
    for &w in &ec.final_omegas {
        let label = format!("rectified-final-omega={}", sig9(w));
        curves.push(setup.mean_curve(&label, &setup.final_omega_spec(w)?, false, &seeds, jobs)?);
    }
    create_dir(dir)?;
    let path = dir.join("energy_curves.csv");
    write_file(&path, curves_csv(&curves))?;
    Ok(path)
}

/// Runs the check suite and prints one row per check. Returns whether every
/// check passed.
pub fn verify(schedule: &NoiseSchedule, seed: u64, out: &mut dyn Write) -> Result<bool> {
    let checks = run_checks(schedule, seed);
    print_checks(&checks, out)?;
    Ok(checks.iter().all(|c| c.passed))
}

pub fn print_checks(checks: &[CheckOutcome], out: &mut dyn Write) -> Result<()> {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        say(
            out,
            format_args!("{status}  {:<width$}  {}", c.name, c.detail),
        )?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    say(
        out,
        format_args!("{} checks, {failed} failed", checks.len()),
    )
}

/// Writes one PGM per channel of an RHRT grid.
pub fn dump_grid(input: &Path, output: &Path) -> Result<Vec<PathBuf>> {
    let grid = rhrt::read_grid(input)?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    pgm::write_grid(output, &grid)
}
