//! Experiment orchestration: policy export, parameter sweeps, the
//! three-policy comparison, aligned traces and the self-verification suite.
//! Everything returns plain rows plus ready-to-write CSV/JSON text so the
//! binary stays thin and outputs stay byte-deterministic.

use std::fmt;
use std::fmt::Write as _;

use serde::Serialize;

use crate::config::SystemConfig;
use crate::energy::SourceState;
use crate::error::Result;
use crate::mdp::{self, verify_structure, verify_threshold, ThresholdReport};
use crate::policy::PolicyKind;
use crate::rd;
use crate::sim::{battery_trace_stats, BatteryStats, TraceRecord};
use crate::System;

/// Headline numbers of one solve, serialized as the run's JSON summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub gain: f64,
    pub iterations: u64,
    pub final_span: f64,
    pub e_max: u32,
    pub e_min: u32,
    pub k_r_star: u32,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub summary: RunSummary,
    pub summary_json: String,
    /// Device-side lookup table, one row per state.
    pub policy_csv: String,
    pub threshold: ThresholdReport,
}

/// Solves the configuration and renders the policy lookup table.
pub fn cmd_solve(config: &SystemConfig) -> Result<SolveOutput> {
    let system = System::new(config.clone())?;
    let solution = system.solve_optimal()?;
    let summary = RunSummary {
        gain: solution.gain,
        iterations: solution.iterations,
        final_span: solution.final_span,
        e_max: system.model.e_max,
        e_min: system.model.e_min,
        k_r_star: system.model.k_r_star,
    };
    let summary_json =
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    let mut policy_csv = String::from("source_state,battery_level,action,k_star,expected_cost\n");
    for x in SourceState::ALL {
        for b in 0..=system.model.capacity {
            let u = solution.policy[system.model.state_index(x, b)];
            let _ = writeln!(
                policy_csv,
                "{},{},{},{},{}",
                x.index(),
                b,
                u,
                system.model.level_for_budget[u as usize],
                system.model.cost[u as usize]
            );
        }
    }
    let threshold = verify_threshold(&system.model, &solution.policy);
    Ok(SolveOutput {
        summary,
        summary_json,
        policy_csv,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuSweepRow {
    pub mu_bar: f64,
    pub b_bar: f64,
    pub gain: f64,
}

/// Average cost versus normalized harvest rate, one curve per battery size.
pub fn cmd_sweep_mu(
    config: &SystemConfig,
    mu_bars: &[f64],
    b_bars: &[f64],
) -> Result<Vec<MuSweepRow>> {
    let mut rows = Vec::new();
    for &b_bar in b_bars {
        let sized = config.with_battery_bar(b_bar)?;
        for &mu_bar in mu_bars {
            let point = sized.with_mu_bar(mu_bar)?;
            rows.push(MuSweepRow {
                mu_bar,
                b_bar,
                gain: optimal_gain(&point)?,
            });
        }
    }
    sort_rows(&mut rows, |r| (r.mu_bar, r.b_bar));
    Ok(rows)
}

pub fn mu_sweep_csv(rows: &[MuSweepRow]) -> String {
    let mut out = String::from("mu_bar,b_bar,gain\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.mu_bar, r.b_bar, r.gain);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceSweepRow {
    pub d: f64,
    pub b_bar: f64,
    pub gain: f64,
}

/// Average cost versus link distance, one curve per battery size.
pub fn cmd_sweep_distance(
    config: &SystemConfig,
    distances: &[f64],
    b_bars: &[f64],
) -> Result<Vec<DistanceSweepRow>> {
    let mut rows = Vec::new();
    for &b_bar in b_bars {
        let sized = config.with_battery_bar(b_bar)?;
        for &d in distances {
            let point = sized.with_distance(d)?;
            rows.push(DistanceSweepRow {
                d,
                b_bar,
                gain: optimal_gain(&point)?,
            });
        }
    }
    sort_rows(&mut rows, |r| (r.d, r.b_bar));
    Ok(rows)
}

pub fn distance_sweep_csv(rows: &[DistanceSweepRow]) -> String {
    let mut out = String::from("d,b_bar,gain\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.d, r.b_bar, r.gain);
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompareRow {
    pub mu_bar: f64,
    pub gain_op: f64,
    pub gain_gp: f64,
    pub gain_dp: f64,
}

/// True-model gains of the optimal, greedy and outage-blind policies over a
/// harvest-rate sweep (battery size and distance come from the config).
pub fn cmd_compare(config: &SystemConfig, mu_bars: &[f64]) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for &mu_bar in mu_bars {
        let point = config.with_mu_bar(mu_bar)?;
        let system = System::new(point)?;
        let op = system.solve_optimal()?;
        let gain_op = mdp::steady_state_cost(&system.model, &op.policy)?.gain;
        let gp = system.greedy_controller()?;
        let gain_gp = system.true_gain(&gp)?.gain;
        let (dp, _) = system.dumb_controller()?;
        let gain_dp = system.true_gain(&dp)?.gain;
        rows.push(CompareRow {
            mu_bar,
            gain_op,
            gain_gp,
            gain_dp,
        });
    }
    sort_rows(&mut rows, |r| (r.mu_bar, 0.0));
    Ok(rows)
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = String::from("mu_bar,gain_op,gain_gp,gain_dp\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.mu_bar, r.gain_op, r.gain_gp, r.gain_dp);
    }
    out
}

/// Number of slots in the trace study.
pub const TRACE_SLOTS: u64 = 500;

#[derive(Debug, Clone)]
pub struct TraceRun {
    pub kind: PolicyKind,
    pub trace: Vec<TraceRecord>,
    pub stats: BatteryStats,
}

#[derive(Debug, Clone)]
pub struct TraceBundle {
    pub seed: u64,
    pub runs: Vec<TraceRun>,
    /// Soft observation (seed-dependent, reported rather than asserted):
    /// the optimal policy kept charge through every bad-state slot.
    pub op_never_empty_in_bad: bool,
}

/// Simulates the three controllers over the same 500 slots from a full
/// battery. One seed feeds all runs, so the source and harvest sample paths
/// are common random numbers across policies.
pub fn cmd_trace(config: &SystemConfig, seed: u64) -> Result<TraceBundle> {
    let system = System::new(config.clone())?;
    let full = system.model.capacity;
    let op_solution = system.solve_optimal()?;
    let op = system.optimal_controller(&op_solution);
    let gp = system.greedy_controller()?;
    let (dp, _) = system.dumb_controller()?;

    let mut runs = Vec::new();
    for controller in [op, gp, dp] {
        let out = system.simulate(&controller, TRACE_SLOTS, seed, full)?;
        runs.push(TraceRun {
            kind: controller.kind,
            stats: battery_trace_stats(&out.trace),
            trace: out.trace,
        });
    }
    let op_never_empty_in_bad = runs[0].stats.empty_in_bad_fraction == 0.0;
    Ok(TraceBundle {
        seed,
        runs,
        op_never_empty_in_bad,
    })
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from("slot,x,e,b_before,u,k,outage,distortion,b_after\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.source_state.index(),
            r.harvested,
            r.battery_before,
            r.action,
            r.level,
            u8::from(r.outage),
            r.distortion,
            r.battery_after
        );
    }
    out
}

/// Side-by-side battery trajectories plus the shared source-state row.
pub fn battery_comparison_csv(bundle: &TraceBundle) -> String {
    let mut out = String::from("slot,x,b_op,b_gp,b_dp\n");
    let [op, gp, dp] = [&bundle.runs[0], &bundle.runs[1], &bundle.runs[2]];
    for i in 0..op.trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            op.trace[i].slot,
            op.trace[i].source_state.index(),
            op.trace[i].battery_before,
            gp.trace[i].battery_before,
            dp.trace[i].battery_before
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Verification suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Informational checks report model properties that are not guaranteed
    /// for every configuration; they never gate the verification result.
    pub gating: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.gating)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = match (c.gating, c.passed) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, true) => "note",
                (false, false) => "note",
            };
            writeln!(f, "{} {} - {}", tag, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Runs the structural and oracle cross-checks on one configuration.
pub fn run_verification(config: &SystemConfig) -> Result<VerificationReport> {
    let mut checks = Vec::new();
    let system = System::new(config.clone())?;
    let model = &system.model;
    let rdp = &system.rd;
    let fit = &rdp.fit;
    let link = &rdp.link;
    let eps = config.solver.epsilon;
    let tol = 10.0 * eps;

    // inner solver against exhaustive search
    let brute_kr = (1..=fit.levels)
        .min_by(|&i, &j| {
            rdp.expected_distortion_at(i)
                .partial_cmp(&rdp.expected_distortion_at(j))
                .unwrap()
        })
        .unwrap();
    checks.push(Check {
        name: "rd.k_r_star".into(),
        passed: rdp.k_r_star == brute_kr,
        gating: true,
        detail: format!("restricted search {} vs exhaustive {}", rdp.k_r_star, brute_kr),
    });

    let mut k_star_ok = true;
    let mut mismatch = String::from("all budgets agree with the constrained argmin");
    for u in 0..=rdp.energy.e_max() {
        let got = rdp.solution_for_budget(u).level;
        let mut best_k = 0;
        let mut best = fit.max_distortion;
        for k in 1..=fit.levels {
            if rdp.energy.total_energy_quanta(k)? > u {
                continue;
            }
            let ed = rdp.expected_distortion_at(k);
            if ed < best {
                best = ed;
                best_k = k;
            }
        }
        if got != best_k {
            k_star_ok = false;
            mismatch = format!("budget {u}: got {got}, argmin {best_k}");
            break;
        }
    }
    checks.push(Check {
        name: "rd.k_star_sweep".into(),
        passed: k_star_ok,
        gating: true,
        detail: mismatch,
    });

    // at most one sign change of the derivative term on a dense grid
    let coeffs = rd::RdCoefficients::new(fit, link);
    let mut changes = 0;
    let mut prev = 0.0f64;
    for i in 0..10_000 {
        let w = 1.0 + (f64::from(fit.levels) - 1.0) * i as f64 / 9_999.0;
        let v = coeffs.f_scaled(w);
        if i > 0 && v.signum() != prev.signum() && v != 0.0 && prev != 0.0 {
            changes += 1;
        }
        prev = v;
    }
    checks.push(Check {
        name: "rd.single_sign_change".into(),
        passed: changes <= 1,
        gating: true,
        detail: format!("{changes} sign change(s) on a 10^4-point grid"),
    });

    // kernel rows are distributions
    let mut worst = 0.0f64;
    for s in 0..model.num_states() {
        let (x, b) = model.state_at(s);
        for u in model.actions(b) {
            let total: f64 = model.transition(x, b, u)?.iter().map(|t| t.1).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    checks.push(Check {
        name: "mdp.stochastic_kernel".into(),
        passed: worst < 1e-10,
        gating: true,
        detail: format!("max |row sum - 1| = {worst:.3e}"),
    });

    let solution = system.solve_optimal()?;
    let threshold = verify_threshold(model, &solution.policy);
    checks.push(Check {
        name: "mdp.threshold_policy".into(),
        passed: threshold.passed,
        gating: true,
        detail: format!("{} violation(s)", threshold.violations.len()),
    });

    // The convexity/submodularity guarantees assume a convex non-increasing
    // per-budget cost. Quantization puts a step in the cost at e_min (below
    // it every budget buys nothing), so the premise can fail; when it does,
    // the dependent checks are reported but cannot gate.
    let diffs: Vec<f64> = model.cost.windows(2).map(|w| w[1] - w[0]).collect();
    let cost_convex = diffs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    checks.push(Check {
        name: "mdp.cost_convexity_premise".into(),
        passed: cost_convex,
        gating: false,
        detail: if cost_convex {
            "quantized budget cost is convex; structural guarantees apply".into()
        } else {
            format!(
                "quantized budget cost steps at e_min = {}; convexity-based guarantees do not apply",
                model.e_min
            )
        },
    });

    let structure = verify_structure(model, &solution, tol);
    checks.push(Check {
        name: "mdp.value_convexity".into(),
        passed: structure.vacuous || structure.value_convexity_passed,
        gating: cost_convex,
        detail: format!(
            "min second difference {:.3e} (tolerance {:.1e})",
            structure.min_value_second_difference, tol
        ),
    });
    checks.push(Check {
        name: "mdp.q_submodularity".into(),
        passed: structure.vacuous || structure.submodularity_passed,
        gating: cost_convex,
        detail: format!(
            "max violation {:.3e} (tolerance {:.1e})",
            structure.max_submodularity_violation, tol
        ),
    });

    let steady = mdp::steady_state_cost(model, &solution.policy)?;
    checks.push(Check {
        name: "mdp.gain_consistency".into(),
        passed: (steady.gain - solution.gain).abs() <= tol,
        gating: true,
        detail: format!(
            "value-iteration gain {:.6e} vs steady-state gain {:.6e}",
            solution.gain, steady.gain
        ),
    });

    Ok(VerificationReport { checks })
}

fn optimal_gain(config: &SystemConfig) -> Result<f64> {
    let system = System::new(config.clone())?;
    let solution = system.solve_optimal()?;
    Ok(mdp::steady_state_cost(&system.model, &solution.policy)?.gain)
}

fn sort_rows<T, K: PartialOrd>(rows: &mut [T], key: impl Fn(&T) -> (K, K)) {
    rows.sort_by(|a, b| {
        let (a1, a2) = key(a);
        let (b1, b2) = key(b);
        a1.partial_cmp(&b1)
            .unwrap()
            .then(a2.partial_cmp(&b2).unwrap())
    });
}
