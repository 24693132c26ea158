//! Solves the energy-management MDP and prints the optimal action table.
//!
//!     cargo run --example optimal_policy [config.toml]

use std::path::Path;

use ehpolicy::energy::SourceState;
use ehpolicy::mdp::{steady_state_cost, verify_threshold};
use ehpolicy::{Result, System, SystemConfig};

fn main() -> Result<()> {
    let config = match std::env::args().nth(1) {
        Some(path) => {
            let (config, warnings) = SystemConfig::load(Path::new(&path))?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            config
        }
        None => SystemConfig::default(),
    };
    let system = System::new(config)?;
    let solution = system.solve_optimal()?;
    let steady = steady_state_cost(&system.model, &solution.policy)?;

    println!(
        "converged in {} sweeps (span {:.2e}); J* = {:.6}",
        solution.iterations, solution.final_span, solution.gain
    );
    println!("steady-state average distortion: {:.6}", steady.gain);
    println!(
        "k_R* = {}, packet costs {}..{} quanta, battery {} quanta\n",
        system.model.k_r_star,
        system.model.e_min,
        system.model.e_max,
        system.model.capacity
    );

    println!("  b    u(bad)  u(good)   k(bad)  k(good)");
    for b in 0..=system.model.capacity {
        let ub = solution.policy[system.model.state_index(SourceState::Bad, b)];
        let ug = solution.policy[system.model.state_index(SourceState::Good, b)];
        println!(
            " {b:>3}   {ub:>4}    {ug:>4}      {:>3}     {:>3}",
            system.model.level_for_budget[ub as usize],
            system.model.level_for_budget[ug as usize]
        );
    }

    let threshold = verify_threshold(&system.model, &solution.policy);
    println!(
        "\nthreshold structure (actions non-decreasing in battery): {}",
        if threshold.passed { "yes" } else { "violated" }
    );
    Ok(())
}
