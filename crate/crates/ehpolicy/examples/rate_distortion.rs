//! Inner rate-distortion problem: per-level distortion and outage, the
//! unconstrained optimum, and the chosen level as the energy budget grows.
//!
//!     cargo run --example rate_distortion

use ehpolicy::rd::{expected_distortion, outage_probability, solve_k_r, source_distortion};
use ehpolicy::{Result, System, SystemConfig};

fn main() -> Result<()> {
    // a longer link than the default makes the compression tradeoff visible
    let config = SystemConfig::default().with_distance(1200.0)?;
    let system = System::new(config)?;
    let fit = &system.rd.fit;
    let link = &system.rd.link;

    println!(
        "distance {} m, average SNR {:.3} ({:.1} dB)",
        link.distance,
        system.rd.gamma_bar,
        10.0 * system.rd.gamma_bar.log10()
    );
    println!("\n  k   D(k)      P_out(k)  E[distortion]");
    for k in 0..=fit.levels {
        println!(
            " {k:>2}   {:<8.4}  {:<8.4}  {:.4}",
            source_distortion(k, fit)?,
            outage_probability(k, fit, link)?,
            expected_distortion(k, fit, link)?
        );
    }
    let k_r = solve_k_r(fit, link)?;
    println!(
        "\nunconstrained optimum k_R* = {k_r} (expected distortion {:.4})",
        system.rd.expected_distortion_at(k_r)
    );

    println!("\nbudget sweep (energy quanta -> chosen level):");
    println!("  u   k*(u)  rate     E[distortion]  feasible");
    for budget in 0..=system.rd.energy.e_max() {
        let sol = system.rd.solution_for_budget(budget);
        println!(
            " {budget:>2}   {:>2}     {:<6.3}   {:<12.4}   {}",
            sol.level, sol.rate, sol.expected_distortion, sol.energy_feasible
        );
    }
    println!(
        "\ncheapest / dearest packet: {} / {} quanta",
        system.rd.energy.e_min(),
        system.rd.energy.e_max()
    );
    Ok(())
}
