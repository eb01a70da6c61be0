//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chemolab::model::{threshold_bound, InitialProfiles};
use chemolab::solver;
use chemolab::weight::{
    admissible_bound, construct_parameters, epsilon_for_threshold, make_weight, p_for_equality,
    threshold_identity,
};
use chemolab::{Grid, ModelParams, Profile, ScenarioConfig};
use chemolab_cli::commands::{cmd_run, RunSummary};
use chemolab_cli::convergence::{spatial_study, temporal_study};
use chemolab_cli::output::format_f64;
use chemolab_cli::parse_config_str;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Collects failure messages; the criterion passes when none were recorded.
#[derive(Default)]
struct Failures(Vec<String>);

impl Failures {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.0.push(msg());
        }
    }

    fn into_verdict(self, summary: String) -> Verdict {
        if self.0.is_empty() {
            verdict(true, summary)
        } else {
            let shown: Vec<&str> = self.0.iter().take(3).map(String::as_str).collect();
            verdict(
                false,
                format!("{} failure(s): {}", self.0.len(), shown.join("; ")),
            )
        }
    }
}

fn weight_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut f = Failures::default();
    let mut worst_residual = 0.0f64;
    for _ in 0..20 {
        // p in (1, 10], eps in (0, 1)
        let p = 10.0 - 9.0 * rng.gen::<f64>();
        let eps = loop {
            let e: f64 = rng.gen();
            if e > 0.0 {
                break e;
            }
        };
        let m = 0.9 * admissible_bound(p, eps).unwrap();
        let wf = match make_weight(p, eps, m) {
            Ok(wf) => wf,
            Err(e) => {
                f.check(false, || format!("make_weight({p}, {eps}, {m}): {e}"));
                continue;
            }
        };
        let phi_m = wf.phi(m).unwrap();
        let scale = phi_m.max(1.0);
        for s in wf.samples(1000) {
            let (phi, dphi, ddphi) = wf.derivatives(s).unwrap();
            let residual = wf.identity_residual(s).unwrap();
            worst_residual = worst_residual.max(residual.abs() / scale);
            f.check(dphi >= -1e-12, || {
                format!("phi' = {dphi} at s = {s}, p = {p}")
            });
            f.check(phi >= 1.0 - 1e-12 && phi <= phi_m + 1e-12, || {
                format!("phi = {phi} outside [1, {phi_m}] at s = {s}, p = {p}")
            });
            f.check(ddphi / p - dphi >= -1e-12, || {
                format!("phi''/p - phi' = {} at s = {s}, p = {p}", ddphi / p - dphi)
            });
            f.check(residual.abs() <= 1e-8 * scale, || {
                format!(
                    "|Phi| = {} at s = {s}, p = {p}, eps = {eps}",
                    residual.abs()
                )
            });
        }
    }
    f.into_verdict(format!(
        "20 triples x 1000 samples, max |Phi|/max(1, phi(M)) = {worst_residual:.2e}"
    ))
}

fn threshold_round_trip() -> Verdict {
    let mut f = Failures::default();
    let mut worst = 0.0f64;
    for n in [2usize, 3, 4] {
        let bound = threshold_bound(n);
        for j in 1..=10 {
            let m = bound * j as f64 / 11.0;
            let eps = epsilon_for_threshold(m, n).unwrap();
            let back = threshold_identity(eps, n);
            worst = worst.max((back - m).abs());
            f.check((back - m).abs() <= 1e-12, || {
                format!("n = {n}, m = {m}: identity gives {back}")
            });
            match p_for_equality(m, eps) {
                Ok(p) => {
                    f.check(p > n as f64 / 2.0, || format!("n = {n}, m = {m}: p = {p}"));
                    f.check(make_weight(p, eps, m).is_ok(), || {
                        format!("n = {n}, m = {m}: make_weight({p}, {eps}) failed")
                    });
                }
                Err(e) => f.check(false, || format!("n = {n}, m = {m}: {e}")),
            }
        }
    }
    let (eps, p) = construct_parameters(PI / 2.0, 2).unwrap();
    f.check((eps - 0.3).abs() <= 1e-15, || format!("anchor eps = {eps}"));
    f.check((p - 1.8135).abs() <= 1e-4, || format!("anchor p = {p}"));
    f.into_verdict(format!(
        "30 values, max round-trip error {worst:.1e}; anchor eps = {eps}, p = {p:.5}"
    ))
}

fn homogeneous_exactness() -> Verdict {
    let params = ModelParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let initial = InitialProfiles {
        u: Profile::Constant { value: 1.0 },
        v: Profile::Constant { value: 1.0 },
        w: Profile::Constant { value: 0.5 },
    };
    let cfg = ScenarioConfig::new(params, Grid::unit(2, 32).unwrap(), initial, 1.0);
    let out = solver::run(&cfg).unwrap();
    let s = &out.final_state;
    let spread = |x: &[f64]| {
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let worst_spread = spread(&s.u).max(spread(&s.v)).max(spread(&s.w));
    let w_end = s.w.iter().copied().fold(0.0, f64::max);
    let exact = 0.5 * (-2.0f64).exp();
    let mut f = Failures::default();
    f.check(s.t == 1.0, || format!("ended at t = {}", s.t));
    f.check(worst_spread <= 1e-13, || {
        format!("spatial spread {worst_spread:e}")
    });
    f.check((w_end - exact).abs() <= 1e-4, || {
        format!("|w(1)| = {w_end}, exact {exact}")
    });
    f.into_verdict(format!(
        "spread {worst_spread:.1e}, |w(1)|_inf = {w_end:.6} vs {exact:.6}"
    ))
}

/// The stabilization scenario on the unit square.
fn stabilization_config(
    cells: usize,
    t_end: f64,
    advection: &str,
    weight: Option<(f64, f64)>,
) -> String {
    let weight = weight
        .map(|(eps, p)| {
            format!(
                r#", "weight": {{"p": {}, "eps": {}}}"#,
                format_f64(p),
                format_f64(eps)
            )
        })
        .unwrap_or_default();
    format!(
        r#"{{
        "params": {{"chi1": 1, "chi2": 1, "alpha": 1, "beta": 1}},
        "grid": {{"lengths": [1, 1], "cells": [{cells}, {cells}]}},
        "initial": {{
            "u": {{"kind": "cosine_bump", "base": 1, "amplitude": 0.5, "k": [1, 1]}},
            "v": {{"kind": "cosine_bump", "base": 1, "amplitude": 0.25, "k": [1, 0]}},
            "w": {{"kind": "cosine_bump", "base": 0.25, "amplitude": 0.25, "k": [1, 0]}}
        }},
        "time": {{"t_end": {t_end}}},
        "scheme": {{"advection": "{advection}"}}{weight}
    }}"#
    )
}

struct Series {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Series {
    fn parse(csv: &str) -> Self {
        let mut lines = csv.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| {
                l.split(',')
                    .map(|c| c.parse().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        Self { header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i]).collect()
    }
}

struct ScenarioRun {
    summary: RunSummary,
    csv: Vec<u8>,
    series: Series,
    w0_max: f64,
    half_w0_sq: f64,
    p: f64,
}

fn stabilization_runs(out: &Path) -> (ScenarioRun, Vec<u8>) {
    let grid = Grid::unit(2, 64).unwrap();
    let w0 = grid.sample(|x| 0.25 * (1.0 + (PI * x[0]).cos()));
    let w0_max = w0.iter().copied().fold(0.0, f64::max);
    let half_w0_sq = 0.5 * w0.iter().map(|w| w * w).sum::<f64>() / grid.len() as f64;
    let (eps, p) = construct_parameters(w0_max, 2).unwrap();
    let text = stabilization_config(64, 5.0, "central", Some((eps, p)));
    let cfg = parse_config_str(&text, Path::new(".")).unwrap();

    let (a, b) = (out.join("first"), out.join("second"));
    let (first, second) = std::thread::scope(|s| {
        let h = s.spawn(|| cmd_run(&cfg, &b).unwrap());
        let first = cmd_run(&cfg, &a).unwrap();
        (first, h.join().unwrap())
    });
    let csv = std::fs::read(a.join("diagnostics.csv")).unwrap();
    let csv_second = std::fs::read(b.join("diagnostics.csv")).unwrap();
    assert_eq!(second.manifest.config_digest, first.manifest.config_digest);
    let series = Series::parse(std::str::from_utf8(&csv).unwrap());
    (
        ScenarioRun {
            summary: first,
            csv,
            series,
            w0_max,
            half_w0_sq,
            p,
        },
        csv_second,
    )
}

fn conservation_and_envelope(run: &ScenarioRun) -> Verdict {
    let s = &run.series;
    let drift = |name: &str| {
        let m = s.col(name);
        m.iter()
            .map(|x| (x - m[0]).abs() / m[0])
            .fold(0.0, f64::max)
    };
    let (du, dv) = (drift("mass_u"), drift("mass_v"));
    let env = &run.summary.report.envelope;
    let linf_w = s.col("linf_w");
    let sample_rise = linf_w
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut f = Failures::default();
    f.check(
        run.summary.report.outcome == chemolab::RunOutcome::Completed,
        || "run did not complete".into(),
    );
    f.check(du <= 1e-10 && dv <= 1e-10, || {
        format!("mass drift u {du:e}, v {dv:e}")
    });
    f.check(env.min_w >= -1e-12, || format!("min w = {:e}", env.min_w));
    f.check(env.max_w <= 0.5 + 1e-12, || {
        format!("max w = {}", env.max_w)
    });
    f.check(run.w0_max <= 0.5, || format!("max w0 = {}", run.w0_max));
    f.check(env.max_w_rise <= 1e-12 && sample_rise <= 1e-12, || {
        format!(
            "max w rose by {:e} in one step, {sample_rise:e} between samples",
            env.max_w_rise
        )
    });
    f.into_verdict(format!(
        "drift u {du:.1e}, v {dv:.1e}; w in [{:.1e}, {:.6}], largest step rise of max w {:.1e}",
        env.min_w, env.max_w, env.max_w_rise
    ))
}

/// Least-squares slope of `-ln y` against `t`.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let tm = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = points.iter().map(|p| -p.1.ln()).sum::<f64>() / n;
    let num: f64 = points.iter().map(|p| (p.0 - tm) * (-p.1.ln() - ym)).sum();
    let den: f64 = points.iter().map(|p| (p.0 - tm).powi(2)).sum();
    num / den
}

fn stabilization(run: &ScenarioRun) -> Verdict {
    let s = &run.series;
    let last = |name: &str| *s.col(name).last().unwrap();
    let (dev_u, dev_v, w_end) = (last("dev_u"), last("dev_v"), last("linf_w"));
    let t = s.col("t");
    let w = s.col("linf_w");
    let half = t.len() / 2;
    let tail: Vec<(f64, f64)> = t[half..]
        .iter()
        .copied()
        .zip(w[half..].iter().copied())
        .collect();
    let rate = log_slope(&tail);
    // alpha u_bar + beta v_bar with unit box and coefficients
    let reference = s.col("mass_u")[0] + s.col("mass_v")[0];
    let mut f = Failures::default();
    f.check(dev_u <= 1e-3, || format!("dev_u = {dev_u:e}"));
    f.check(dev_v <= 1e-3, || format!("dev_v = {dev_v:e}"));
    f.check(w_end <= 1e-3, || format!("|w|_inf = {w_end:e}"));
    f.check(rate >= 0.5 * reference, || {
        format!("rate {rate} below {}", 0.5 * reference)
    });
    f.check((rate - reference).abs() <= 0.15 * reference, || {
        format!("rate {rate} not within 15% of {reference}")
    });
    f.into_verdict(format!(
        "dev_u {dev_u:.1e}, dev_v {dev_v:.1e}, |w|_inf {w_end:.1e}; decay rate {rate:.4} (reference {reference:.4})"
    ))
}

fn energy_budget(run: &ScenarioRun) -> Verdict {
    let s = &run.series;
    let t = s.col("t");
    let cum_w = s.col("cum_dirichlet_w");
    let budget = run.half_w0_sq + 1e-8;
    let worst = cum_w.iter().copied().fold(0.0, f64::max);
    let t_q = t[0] + 0.75 * (t[t.len() - 1] - t[0]);
    let iq = t.iter().rposition(|&x| x <= t_q).unwrap();
    let share = |name: &str| {
        let c = s.col(name);
        let total = *c.last().unwrap();
        (total - c[iq]) / total
    };
    let (su, sv) = (share("cum_dirichlet_u"), share("cum_dirichlet_v"));
    let mut f = Failures::default();
    f.check(cum_w.iter().all(|&c| c <= budget), || {
        format!("cumulative |grad w|^2 reached {worst} > {budget}")
    });
    f.check(su <= 0.01 && sv <= 0.01, || {
        format!("last-quarter shares u {su:e}, v {sv:e}")
    });
    f.into_verdict(format!(
        "max cumulative |grad w|^2 {worst:.6} <= {:.6}; last-quarter shares u {su:.1e}, v {sv:.1e}",
        run.half_w0_sq
    ))
}

fn lyapunov_bound(run: &ScenarioRun) -> Verdict {
    let l = run.series.col("lyapunov");
    let u_bar = run.series.col("mass_u")[0];
    let limit = u_bar.powf(run.p) / run.p;
    let last = *l.last().unwrap();
    let worst = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let used = run.summary.report.weight.map(|w| w.p);
    let mut f = Failures::default();
    f.check(used == Some(run.p), || {
        format!("run used p = {used:?}, expected {}", run.p)
    });
    f.check(l.iter().all(|x| x.is_finite()), || {
        "missing functional values".into()
    });
    f.check(worst <= 3.0 * l[0], || {
        format!("max {worst} exceeds 3 x {}", l[0])
    });
    f.check((last - limit).abs() <= 0.01 * limit, || {
        format!("final {last} vs limit {limit}")
    });
    f.into_verdict(format!(
        "p = {:.5}; initial {:.5}, max {worst:.5}, final {last:.6} vs limit {limit:.6}",
        run.p, l[0]
    ))
}

fn self_convergence() -> Verdict {
    let mut f = Failures::default();
    let mut notes = Vec::new();
    for (scheme, floor) in [("central", 1.8), ("upwind", 0.9)] {
        let text = stabilization_config(32, 0.1, scheme, None);
        let cfg = parse_config_str(&text, Path::new("."))
            .unwrap()
            .scenario()
            .unwrap();
        let (table, _) = spatial_study(&cfg, 3).unwrap();
        let order = table.min_order().unwrap();
        let fields = table.rows[0].orders.unwrap();
        f.check(order >= floor, || {
            format!("{scheme} order {order} below {floor}")
        });
        notes.push(format!(
            "{scheme} {order:.3} (u {:.3}, v {:.3}, w {:.3})",
            fields[0], fields[1], fields[2]
        ));
    }
    let text = stabilization_config(32, 0.1, "central", None);
    let cfg = parse_config_str(&text, Path::new("."))
        .unwrap()
        .scenario()
        .unwrap();
    let temporal = temporal_study(&cfg).unwrap();
    for o in temporal.orders {
        f.check((o - 1.0).abs() <= 0.2, || {
            format!("time order {o} not near 1")
        });
    }
    notes.push(format!(
        "time {:.3}/{:.3}/{:.3}",
        temporal.orders[0], temporal.orders[1], temporal.orders[2]
    ));
    f.into_verdict(notes.join("; "))
}

fn determinism(run: &ScenarioRun, second: &[u8]) -> Verdict {
    let same = run.csv == second;
    verdict(same, format!("{} bytes, identical: {same}", run.csv.len()))
}

fn main() {
    let mut results: Vec<(&str, Verdict, f64)> = Vec::new();
    let mut timed = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = f();
        results.push((name, v, start.elapsed().as_secs_f64()));
    };
    timed("1 weight-function identities", &mut weight_identities);
    timed(
        "2 threshold construction round-trip",
        &mut threshold_round_trip,
    );
    timed("3 homogeneous exactness", &mut homogeneous_exactness);

    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (run, second) = stabilization_runs(dir.path());
    let shared = start.elapsed().as_secs_f64();
    println!("stabilization scenario: two runs of 64x64 to t = 5 in {shared:.1} s");
    timed("4 conservation and maximum principle", &mut || {
        conservation_and_envelope(&run)
    });
    timed("5 stabilization and decay rate", &mut || {
        stabilization(&run)
    });
    timed("6 energy budget", &mut || energy_budget(&run));
    timed("7 weighted functional bound", &mut || lyapunov_bound(&run));
    timed("8 self-convergence", &mut self_convergence);
    timed("9 determinism", &mut || determinism(&run, &second));

    let mut failed = 0;
    for (name, v, secs) in &results {
        let mark = if v.passed { "PASS" } else { "FAIL" };
        if !v.passed {
            failed += 1;
        }
        println!("{mark} [{secs:6.2} s] {name}: {}", v.detail);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
