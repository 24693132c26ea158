//! The three controllers compared in the experiments: the optimal policy from
//! the solver, a greedy heuristic that spends toward the unconstrained
//! optimum immediately, and an outage-blind heuristic that plans with the
//! source-coding distortion only.

use std::fmt;

use serde::Serialize;

use crate::config::DpCostModel;
use crate::energy::EnergyModel;
use crate::error::Result;
use crate::mdp::{rvia_solve_with, MdpModel, MdpSolution, RviaOptions};
use crate::rd::{source_distortion, RdProblem};

/// Provenance of a controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolicyKind {
    Optimal,
    Greedy,
    DumbProcessing,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Optimal => "OP",
            PolicyKind::Greedy => "GP",
            PolicyKind::DumbProcessing => "DP",
        })
    }
}

/// An immutable state-to-budget table plus the budget-to-level mapping the
/// controller uses once the energy is committed.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: PolicyKind,
    /// Budget per state index.
    pub actions: Vec<u32>,
    /// Compression level per budget.
    pub level_for_budget: Vec<u32>,
}

impl Controller {
    pub fn action(&self, state_index: usize) -> u32 {
        self.actions[state_index]
    }

    pub fn level_for(&self, budget: u32) -> u32 {
        self.level_for_budget[budget as usize]
    }

    /// Expected distortion per budget when this controller's level choices
    /// are scored under the true channel model.
    pub fn true_cost_table(&self, rd: &RdProblem) -> Vec<f64> {
        self.level_for_budget
            .iter()
            .map(|&k| rd.expected_distortion_at(k))
            .collect()
    }
}

/// Wraps a converged solution as a controller.
pub fn optimal_controller(model: &MdpModel, solution: &MdpSolution) -> Controller {
    Controller {
        kind: PolicyKind::Optimal,
        actions: solution.policy.clone(),
        level_for_budget: model.level_for_budget.clone(),
    }
}

/// Greedy spend: all of the battery up to the budget of the unconstrained
/// optimum, regardless of the harvest outlook.
pub fn greedy_action(battery: u32, target_budget: u32) -> u32 {
    battery.min(target_budget)
}

/// Builds the greedy controller; its target is the quantized cost of the
/// unconstrained optimal level.
pub fn greedy_controller(model: &MdpModel, energy: &EnergyModel) -> Result<Controller> {
    let target = energy.total_energy_quanta(model.k_r_star)?;
    let actions = (0..model.num_states())
        .map(|s| {
            let (_, b) = model.state_at(s);
            greedy_action(b, target)
        })
        .collect();
    Ok(Controller {
        kind: PolicyKind::Greedy,
        actions,
        level_for_budget: model.level_for_budget.clone(),
    })
}

/// Level an outage-blind planner picks for a budget: the minimizer of the
/// source-coding distortion alone over the affordable set. The raw packet is
/// both distortion-free at the source and the cheapest transmission, so it
/// wins whenever anything is affordable.
pub fn dp_inner_k(budget: u32, energy: &EnergyModel) -> u32 {
    let m = energy.levels();
    if energy.total_energy_quanta(m).expect("m in range") <= budget {
        return m;
    }
    for k in (1..m).rev() {
        if energy.total_energy_quanta(k).expect("k in range") <= budget {
            return k;
        }
    }
    0
}

/// Solves the energy management problem a dumb-processing controller
/// believes in: same dynamics, but the per-budget cost ignores the channel
/// (or, with the alternative cost model, scores the outage-blind level under
/// the true distortion). The returned controller must then be evaluated
/// under the true cost.
pub fn dp_solve(
    model: &MdpModel,
    rd: &RdProblem,
    cost_model: DpCostModel,
    opts: &RviaOptions,
) -> Result<(Controller, MdpSolution)> {
    let levels: Vec<u32> = (0..model.cost.len())
        .map(|u| dp_inner_k(u as u32, &rd.energy))
        .collect();
    let planning_cost: Vec<f64> = levels
        .iter()
        .map(|&k| match cost_model {
            DpCostModel::SourceOnly => source_distortion(k, &rd.fit),
            DpCostModel::TrueCost => Ok(rd.expected_distortion_at(k)),
        })
        .collect::<Result<Vec<_>>>()?;
    let planning_model = model.clone().with_cost_tables(planning_cost, levels.clone());
    let solution = rvia_solve_with(&planning_model, opts)?;
    Ok((
        Controller {
            kind: PolicyKind::DumbProcessing,
            actions: solution.policy.clone(),
            level_for_budget: levels,
        },
        solution,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;
    use crate::mdp::{evaluate_policy, rvia_solve, steady_state_cost};

    fn setup(cfg: &SystemConfig) -> (MdpModel, RdProblem) {
        let energy = cfg.energy_model().unwrap();
        let rd = RdProblem::new(cfg.source.clone(), cfg.link.clone(), energy).unwrap();
        let model = MdpModel::from_rd(&rd, &cfg.harvest, cfg.battery_capacity).unwrap();
        (model, rd)
    }

    #[test]
    fn greedy_spends_up_to_target() {
        let cfg = SystemConfig::default();
        let (model, rd) = setup(&cfg);
        let gp = greedy_controller(&model, &rd.energy).unwrap();
        let target = rd.energy.total_energy_quanta(model.k_r_star).unwrap();
        for s in 0..model.num_states() {
            let (_, b) = model.state_at(s);
            assert_eq!(gp.action(s), b.min(target));
        }
        assert_eq!(greedy_action(0, target), 0);
    }

    #[test]
    fn dp_inner_level_prefers_raw_packet() {
        let cfg = SystemConfig::default();
        let (_, rd) = setup(&cfg);
        let m = rd.fit.levels;
        assert_eq!(dp_inner_k(0, &rd.energy), 0);
        let raw_cost = rd.energy.total_energy_quanta(m).unwrap();
        assert_eq!(dp_inner_k(raw_cost, &rd.energy), m);
        assert_eq!(dp_inner_k(raw_cost + 100, &rd.energy), m);
        // below the cheapest transmission nothing is affordable
        assert_eq!(dp_inner_k(raw_cost - 1, &rd.energy), 0);
        // scan oracle over every budget
        for u in 0..=rd.energy.e_max() + 2 {
            let affordable: Vec<u32> = (1..=m)
                .filter(|&k| rd.energy.total_energy_quanta(k).unwrap() <= u)
                .collect();
            let expect = affordable
                .iter()
                .copied()
                .min_by(|&i, &j| {
                    source_distortion(i, &rd.fit)
                        .unwrap()
                        .partial_cmp(&source_distortion(j, &rd.fit).unwrap())
                        .unwrap()
                })
                .unwrap_or(0);
            assert_eq!(dp_inner_k(u, &rd.energy), expect, "u={u}");
        }
    }

    #[test]
    fn optimal_never_loses_to_heuristics() {
        // a long link makes the rate-distortion tradeoff bite
        let cfg = SystemConfig::default()
            .with_distance(1200.0)
            .unwrap()
            .with_battery_bar(1.5)
            .unwrap();
        let (model, rd) = setup(&cfg);
        let eps = cfg.solver.epsilon;
        let opts = RviaOptions {
            epsilon: eps,
            max_iterations: cfg.solver.max_iterations,
            ..Default::default()
        };
        let op = rvia_solve(&model, eps).unwrap();
        let op_gain = steady_state_cost(&model, &op.policy).unwrap().gain;

        let gp = greedy_controller(&model, &rd.energy).unwrap();
        let gp_gain = evaluate_policy(&model, &gp.actions, &gp.true_cost_table(&rd))
            .unwrap()
            .gain;

        let (dp, _) = dp_solve(&model, &rd, DpCostModel::SourceOnly, &opts).unwrap();
        let dp_gain = evaluate_policy(&model, &dp.actions, &dp.true_cost_table(&rd))
            .unwrap()
            .gain;

        assert!(op_gain <= gp_gain + 10.0 * eps, "OP {op_gain} GP {gp_gain}");
        assert!(op_gain <= dp_gain + 10.0 * eps, "OP {op_gain} DP {dp_gain}");
    }

    #[test]
    fn zero_outage_makes_dp_match_op() {
        // a very short link has essentially no outage, so the planning costs
        // of DP and OP order budgets identically
        let cfg = SystemConfig::default().with_distance(2.0).unwrap();
        let (model, rd) = setup(&cfg);
        let eps = 1e-8;
        let opts = RviaOptions {
            epsilon: eps,
            ..Default::default()
        };
        let op = rvia_solve(&model, eps).unwrap();
        let op_gain = steady_state_cost(&model, &op.policy).unwrap().gain;
        let (dp, _) = dp_solve(&model, &rd, DpCostModel::SourceOnly, &opts).unwrap();
        let dp_gain = evaluate_policy(&model, &dp.actions, &dp.true_cost_table(&rd))
            .unwrap()
            .gain;
        assert!((op_gain - dp_gain).abs() <= 10.0 * eps, "{op_gain} vs {dp_gain}");
    }

    #[test]
    fn reference_comparison_point_orders_policies() {
        // B_bar = 1.5, d = 80 m
        let cfg = SystemConfig::default()
            .with_distance(80.0)
            .unwrap()
            .with_battery_bar(1.5)
            .unwrap();
        let (model, rd) = setup(&cfg);
        let eps = cfg.solver.epsilon;
        let opts = RviaOptions {
            epsilon: eps,
            ..Default::default()
        };
        let op = rvia_solve(&model, eps).unwrap();
        let op_gain = steady_state_cost(&model, &op.policy).unwrap().gain;
        let gp = greedy_controller(&model, &rd.energy).unwrap();
        let gp_gain = evaluate_policy(&model, &gp.actions, &gp.true_cost_table(&rd))
            .unwrap()
            .gain;
        let (dp, _) = dp_solve(&model, &rd, DpCostModel::SourceOnly, &opts).unwrap();
        let dp_gain = evaluate_policy(&model, &dp.actions, &dp.true_cost_table(&rd))
            .unwrap()
            .gain;
        assert!(dp_gain >= op_gain - 10.0 * eps);
        assert!(gp_gain >= dp_gain - 10.0 * eps);
    }
}
