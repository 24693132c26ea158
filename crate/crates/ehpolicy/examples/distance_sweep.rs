//! Average long-term distortion versus link distance (CSV on stdout).
//!
//!     cargo run --example distance_sweep > sweep_distance.csv

use ehpolicy::experiments::{cmd_sweep_distance, distance_sweep_csv};
use ehpolicy::{Result, SystemConfig};

fn main() -> Result<()> {
    let config = SystemConfig::default(); // mu_bar = 1
    let distances = [40.0, 60.0, 80.0, 100.0, 150.0, 200.0, 400.0, 800.0, 1200.0];
    let b_bars = [1.0, 2.0, 3.0];
    let rows = cmd_sweep_distance(&config, &distances, &b_bars)?;
    print!("{}", distance_sweep_csv(&rows));
    eprintln!("{} points; the channel worsens with distance", rows.len());
    Ok(())
}
