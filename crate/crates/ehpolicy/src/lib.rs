//! Distortion-minimizing transmission policies for energy-harvesting sensors.
//!
//! A periodically reporting device compresses each reading, transmits it over
//! a Rayleigh-fading link and pays for sensing, processing and transmission
//! out of a finite battery refilled by a bursty harvest source. This crate
//! solves the two nested problems that setup creates:
//!
//! - the **inner rate-distortion problem** ([`rd`]): given an energy budget,
//!   pick the compression level that minimizes the expected distortion at the
//!   receiver, trading source-coding loss against channel outage;
//! - the **outer energy-management problem** ([`mdp`]): pick the per-slot
//!   energy budget that minimizes the long-run average distortion, via an
//!   average-cost MDP solved by relative value iteration.
//!
//! [`policy`] adds the greedy and outage-blind baselines, [`sim`] replays any
//! controller slot by slot with reproducible randomness, and [`experiments`]
//! bundles the sweep/comparison/trace studies behind the `ehpolicy` binary.
//!
//! ## Examples
//!
//! Each major capability has a runnable example:
//!
//! ```text
//! cargo run --example rate_distortion    # inner problem: levels, outage, k*
//! cargo run --example optimal_policy    # solve the MDP, print the action table
//! cargo run --example harvest_sweep     # average cost vs harvest rate
//! cargo run --example distance_sweep    # average cost vs link distance
//! cargo run --example policy_comparison # optimal vs greedy vs outage-blind
//! cargo run --example battery_trace     # 500-slot battery evolution per policy
//! cargo run --example structure_checks  # threshold/convexity verification
//! ```
//!
//! The thin `ehpolicy` binary exposes the same studies as subcommands
//! (`solve`, `sweep-mu`, `sweep-distance`, `compare`, `trace`, `verify`) and
//! writes CSV/JSON artifacts; see the README.

pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod mdp;
pub mod policy;
pub mod rd;
pub mod sim;

pub use config::{DpCostModel, SimParams, SolverParams, SystemConfig};
pub use energy::{Battery, ConsumptionParams, EnergyModel, HarvestModel, SourceState};
pub use error::{Error, Result};
pub use mdp::{MdpModel, MdpSolution, SteadyStateReport};
pub use policy::{Controller, PolicyKind};
pub use rd::{LinkModel, RdProblem, RdSolution, SourceFit};
pub use sim::{SimOutcome, SimReport, TraceRecord};

use mdp::RviaOptions;

/// A configuration together with its derived inner problem and decision
/// model; the convenient entry point for solving and simulating.
#[derive(Debug, Clone)]
pub struct System {
    pub config: SystemConfig,
    pub rd: RdProblem,
    pub model: MdpModel,
}

impl System {
    pub fn new(config: SystemConfig) -> Result<Self> {
        config.validate()?;
        let energy = config.energy_model()?;
        let rd = RdProblem::new(config.source.clone(), config.link.clone(), energy)?;
        let model = MdpModel::from_rd(&rd, &config.harvest, config.battery_capacity)?;
        Ok(Self { config, rd, model })
    }

    pub fn rvia_options(&self) -> RviaOptions {
        RviaOptions {
            epsilon: self.config.solver.epsilon,
            max_iterations: self.config.solver.max_iterations,
            reference_state: None,
            tie_tolerance: None,
        }
    }

    /// Solves the energy-management MDP for the optimal policy.
    pub fn solve_optimal(&self) -> Result<MdpSolution> {
        mdp::rvia_solve_with(&self.model, &self.rvia_options())
    }

    pub fn optimal_controller(&self, solution: &MdpSolution) -> Controller {
        policy::optimal_controller(&self.model, solution)
    }

    pub fn greedy_controller(&self) -> Result<Controller> {
        policy::greedy_controller(&self.model, &self.rd.energy)
    }

    /// Solves the outage-blind planning problem and returns its controller.
    pub fn dumb_controller(&self) -> Result<(Controller, MdpSolution)> {
        policy::dp_solve(
            &self.model,
            &self.rd,
            self.config.dp_cost_model,
            &self.rvia_options(),
        )
    }

    /// Long-run average distortion of a controller under the true channel
    /// model (its own level choices, scored honestly).
    pub fn true_gain(&self, controller: &Controller) -> Result<SteadyStateReport> {
        mdp::evaluate_policy(
            &self.model,
            &controller.actions,
            &controller.true_cost_table(&self.rd),
        )
    }

    pub fn simulate(
        &self,
        controller: &Controller,
        horizon: u64,
        seed: u64,
        initial_battery: u32,
    ) -> Result<SimOutcome> {
        sim::simulate(
            &self.rd,
            &self.config.harvest,
            self.config.battery_capacity,
            controller,
            horizon,
            seed,
            initial_battery,
        )
    }
}
