//! The four subcommands. Each returns data; printing is left to the binary.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use chemolab::diagnostics::{verify_theorems, VerifyContext};
use chemolab::model::{threshold_bound, threshold_check, ThresholdReport};
use chemolab::solver::{self, Envelope};
use chemolab::weight::{epsilon_for_threshold, make_weight, p_for_equality};
use chemolab::{RunOutcome, TheoremReport};

use crate::config::ResolvedConfig;
use crate::convergence::{spatial_study, temporal_study, ConvergenceTable, TemporalTable};
use crate::error::CliError;
use crate::output::{
    diagnostics_csv, format_f64, now_rfc3339, ArtifactDir, ManifestOutcome, RunManifest,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const REPORT_FILE: &str = "report.json";
pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const FINAL_SNAPSHOT_DIR: &str = "final";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSummary {
    pub p: f64,
    pub eps: f64,
    pub m: f64,
}

/// Behaviour of the weighted functional over the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovSummary {
    pub initial: f64,
    pub max: f64,
    pub last: f64,
    /// `(1/p) |Omega| u_bar^p`, the value at the homogeneous state.
    pub limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub steps: usize,
    pub threshold: ThresholdReport,
    pub weight: Option<WeightSummary>,
    pub lyapunov: Option<LyapunovSummary>,
    pub envelope: Envelope,
    /// Absent when the run did not complete.
    pub theorems: Option<TheoremReport>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub exit_code: i32,
    pub report: RunReport,
    pub manifest: RunManifest,
}

/// Runs a scenario and writes the diagnostics CSV, final snapshot, report,
/// resolved config and manifest into `out`.
///
/// Exit code 0 when the run completes and every check passes, 2 when a
/// check fails, 3 when the divergence sentinel trips.
pub fn cmd_run(config: &ResolvedConfig, out: &Path) -> Result<RunSummary, CliError> {
    let started = now_rfc3339();
    let mut dir = ArtifactDir::create(out)?;
    let digest = config.digest();
    dir.write_bytes(
        RESOLVED_CONFIG_FILE,
        format!("{}\n", config.to_json_pretty()).as_bytes(),
    )?;

    let scenario = config.scenario()?;
    let result = match solver::run(&scenario) {
        Ok(r) => r,
        Err(e) => {
            dir.finish(digest, started, ManifestOutcome::Error)?;
            return Err(e.into());
        }
    };

    dir.write_bytes(
        DIAGNOSTICS_FILE,
        diagnostics_csv(&result.records).as_bytes(),
    )?;
    dir.write_snapshot(FINAL_SNAPSHOT_DIR, &result.final_state, &scenario.grid)?;

    let threshold = threshold_check(&scenario.params, result.initial.w0_max, scenario.grid.dim());
    let weight = result.weight.map(|wf| WeightSummary {
        p: wf.p,
        eps: wf.eps,
        m: wf.m,
    });
    let lyapunov = weight.and_then(|w| {
        let values: Vec<f64> = result.records.iter().filter_map(|r| r.lyapunov).collect();
        Some(LyapunovSummary {
            initial: *values.first()?,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            last: *values.last()?,
            limit: scenario.grid.volume() * result.initial.u_bar.powf(w.p) / w.p,
        })
    });
    let (theorems, manifest_outcome, exit_code) = match &result.outcome {
        RunOutcome::Completed => {
            let ctx = VerifyContext::new(
                &result.initial,
                &scenario.params,
                &scenario.grid,
                Some(result.envelope),
            );
            let report = verify_theorems(&result.records, &ctx);
            let code = if report.all_passed() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            };
            (Some(report), ManifestOutcome::Completed, code)
        }
        RunOutcome::Blowup { .. } => (None, ManifestOutcome::Blowup, EXIT_BLOWUP),
    };
    let report = RunReport {
        outcome: result.outcome.clone(),
        steps: result.steps,
        threshold,
        weight,
        lyapunov,
        envelope: result.envelope,
        theorems,
    };
    dir.write_json(REPORT_FILE, &report)?;
    let manifest = dir.finish(digest, started, manifest_outcome)?;
    Ok(RunSummary {
        exit_code,
        report,
        manifest,
    })
}

/// Constructed weight parameters for one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeciesThreshold {
    /// `chi_i * max w0`.
    pub m: f64,
    /// Present only below the bound.
    pub eps: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub n: usize,
    pub bound: f64,
    pub within: bool,
    pub species: [SpeciesThreshold; 2],
}

pub fn cmd_threshold(
    n: usize,
    chi1: f64,
    chi2: f64,
    w0_max: f64,
) -> Result<ThresholdTable, CliError> {
    if n == 0 {
        return Err(CliError::Usage("dimension n must be at least 1".into()));
    }
    for (name, x) in [("chi1", chi1), ("chi2", chi2)] {
        if !(x > 0.0 && x.is_finite()) {
            return Err(CliError::Usage(format!("{name} must be positive, got {x}")));
        }
    }
    if !(w0_max >= 0.0 && w0_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "w0max must be nonnegative, got {w0_max}"
        )));
    }
    let bound = threshold_bound(n);
    let species = [chi1, chi2].map(|chi| {
        let m = chi * w0_max;
        let eps = epsilon_for_threshold(m, n).ok();
        let p = eps.and_then(|e| p_for_equality(m, e).ok());
        SpeciesThreshold { m, eps, p }
    });
    Ok(ThresholdTable {
        n,
        bound,
        within: species.iter().all(|s| s.m < bound),
        species,
    })
}

impl fmt::Display for ThresholdTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map(format_f64).unwrap_or_else(|| "-".into());
        writeln!(f, "n,{}", self.n)?;
        writeln!(f, "bound,{}", format_f64(self.bound))?;
        writeln!(f, "within,{}", self.within)?;
        writeln!(f, "species,m,eps,p")?;
        for (i, s) in self.species.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{}",
                i + 1,
                format_f64(s.m),
                opt(s.eps),
                opt(s.p)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRow {
    pub s: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub phi_second: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTable {
    pub p: f64,
    pub eps: f64,
    pub m: f64,
    pub rows: Vec<WeightRow>,
    pub max_abs_residual: f64,
}

/// Samples the weight and its ODE residual on `samples` evenly spaced points of `[0, m]`.
pub fn cmd_analyze_weight(
    p: f64,
    eps: f64,
    m: f64,
    samples: usize,
) -> Result<WeightTable, CliError> {
    if samples < 2 {
        return Err(CliError::Usage("need at least 2 samples".into()));
    }
    let wf = make_weight(p, eps, m)?;
    let rows = wf
        .samples(samples)
        .map(|s| {
            let (phi, phi_prime, phi_second) = wf.derivatives(s)?;
            Ok(WeightRow {
                s,
                phi,
                phi_prime,
                phi_second,
                residual: wf.identity_residual(s)?,
            })
        })
        .collect::<Result<Vec<_>, chemolab::WeightError>>()?;
    let max_abs_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    Ok(WeightTable {
        p,
        eps,
        m,
        rows,
        max_abs_residual,
    })
}

impl fmt::Display for WeightTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "s,phi,phi_prime,phi_second,residual")?;
        for r in &self.rows {
            writeln!(
                f,
                "{},{},{},{},{}",
                format_f64(r.s),
                format_f64(r.phi),
                format_f64(r.phi_prime),
                format_f64(r.phi_second),
                format_f64(r.residual)
            )?;
        }
        writeln!(
            f,
            "# max_abs_residual,{}",
            format_f64(self.max_abs_residual)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceSummary {
    pub spatial: ConvergenceTable,
    pub temporal: TemporalTable,
}

impl fmt::Display for ConvergenceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.spatial)?;
        write!(f, "{}", self.temporal)
    }
}

/// Grid refinement study over `levels` grids (each twice as fine as the
/// last) plus a three-level time-step study on the base grid.
///
/// With `out`, each level's final state goes to `level_<k>/`.
pub fn cmd_convergence(
    config: &ResolvedConfig,
    levels: usize,
    out: Option<&Path>,
) -> Result<ConvergenceSummary, CliError> {
    if levels < 3 {
        return Err(CliError::Usage(format!(
            "need at least 3 levels, got {levels}"
        )));
    }
    let started = now_rfc3339();
    let mut dir = out.map(ArtifactDir::create).transpose()?;
    let scenario = config.scenario()?;
    let (spatial, states) = spatial_study(&scenario, levels)?;
    let temporal = temporal_study(&scenario)?;
    let summary = ConvergenceSummary { spatial, temporal };
    if let Some(dir) = dir.as_mut() {
        dir.write_bytes(
            RESOLVED_CONFIG_FILE,
            format!("{}\n", config.to_json_pretty()).as_bytes(),
        )?;
        for (k, (grid, state)) in states.iter().enumerate() {
            dir.write_snapshot(&format!("level_{k}"), state, grid)?;
        }
        dir.write_bytes("convergence.csv", summary.spatial.to_string().as_bytes())?;
        dir.write_bytes("temporal.csv", summary.temporal.to_string().as_bytes())?;
        dir.finish(config.digest(), started, ManifestOutcome::Completed)?;
    }
    Ok(summary)
}
