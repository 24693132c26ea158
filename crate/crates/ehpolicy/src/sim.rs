//! Slot-by-slot Monte Carlo simulation of the closed loop: harvest source,
//! battery, controller, channel draw, realized distortion.
//!
//! Randomness comes from a ChaCha12 generator seeded once and split into
//! three independent substreams (source transitions, harvest draws, channel
//! draws), so runs are reproducible and different controllers simulated with
//! the same seed see the identical source and harvest sample paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::energy::{HarvestModel, SourceState};
use crate::error::{Error, Result};
use crate::policy::{Controller, PolicyKind};
use crate::rd::RdProblem;

const STREAM_SOURCE: u64 = 0;
const STREAM_HARVEST: u64 = 1;
const STREAM_CHANNEL: u64 = 2;

/// One simulated slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub slot: u64,
    pub source_state: SourceState,
    /// Quanta harvested during the slot (usable from the next slot on).
    pub harvested: u32,
    pub battery_before: u32,
    pub action: u32,
    pub level: u32,
    pub outage: bool,
    /// Distortion realized at the receiver this slot.
    pub distortion: f64,
    pub battery_after: u32,
}

/// Aggregate statistics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub horizon: u64,
    pub mean_distortion: f64,
    /// 95% half-width from batch means over 100 batches.
    pub ci_half_width: f64,
    /// Fraction of slots that start with an empty battery.
    pub empty_battery_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub trace: Vec<TraceRecord>,
    pub report: SimReport,
}

/// Runs the closed loop for `horizon` slots from `(good, initial_battery)`.
pub fn simulate(
    rd: &RdProblem,
    harvest: &HarvestModel,
    capacity: u32,
    controller: &Controller,
    horizon: u64,
    seed: u64,
    initial_battery: u32,
) -> Result<SimOutcome> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("sim horizon must be positive".into()));
    }
    if initial_battery > capacity {
        return Err(Error::InvalidConfig(format!(
            "initial battery {initial_battery} exceeds capacity {capacity}"
        )));
    }
    let mut source_rng = stream(seed, STREAM_SOURCE);
    let mut harvest_rng = stream(seed, STREAM_HARVEST);
    let mut channel_rng = stream(seed, STREAM_CHANNEL);

    let pmfs = [
        harvest.pmf(SourceState::Bad),
        harvest.pmf(SourceState::Good),
    ];
    let nb = capacity as usize + 1;
    let d_fl = rd.fit.max_distortion;
    let outage_table: Vec<f64> = (0..=rd.fit.levels)
        .map(|k| crate::rd::outage_probability(k, &rd.fit, &rd.link))
        .collect::<Result<Vec<_>>>()?;
    let source_table: Vec<f64> = (0..=rd.fit.levels)
        .map(|k| crate::rd::source_distortion(k, &rd.fit))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = Vec::with_capacity(horizon as usize);
    let mut x = SourceState::Good;
    let mut battery = initial_battery;
    for slot in 0..horizon {
        let state_index = x.index() * nb + battery as usize;
        let action = controller.action(state_index);
        if action > battery {
            return Err(Error::CausalityViolation {
                action,
                level: battery,
            });
        }
        let level = controller.level_for(action);

        // one draw per stream per slot, so controller choices never shift
        // the shared sample paths
        let channel_draw: f64 = channel_rng.gen();
        let outage = level > 0 && channel_draw < outage_table[level as usize];
        let distortion = if level == 0 || outage {
            d_fl
        } else {
            source_table[level as usize]
        };

        let harvest_draw: f64 = harvest_rng.gen();
        let harvested = sample_pmf(&pmfs[x.index()], harvest_draw);

        let battery_after = crate::energy::battery_step(battery, harvested, action, capacity)?;

        let source_draw: f64 = source_rng.gen();
        let next_x = if source_draw < harvest.transition(x, SourceState::Good) {
            SourceState::Good
        } else {
            SourceState::Bad
        };

        trace.push(TraceRecord {
            slot,
            source_state: x,
            harvested,
            battery_before: battery,
            action,
            level,
            outage,
            distortion,
            battery_after,
        });
        battery = battery_after;
        x = next_x;
    }

    let report = summarize(controller.kind, &trace);
    Ok(SimOutcome { trace, report })
}

fn stream(seed: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn sample_pmf(pmf: &[f64], u01: f64) -> u32 {
    let mut acc = 0.0;
    for (value, &p) in pmf.iter().enumerate() {
        acc += p;
        if u01 < acc {
            return value as u32;
        }
    }
    (pmf.len() - 1) as u32
}

fn summarize(policy: PolicyKind, trace: &[TraceRecord]) -> SimReport {
    let horizon = trace.len() as u64;
    let mean = trace.iter().map(|r| r.distortion).sum::<f64>() / horizon as f64;
    let empty = trace.iter().filter(|r| r.battery_before == 0).count() as f64 / horizon as f64;

    // batch means confidence half-width
    let batches = 100.min(trace.len());
    let half_width = if batches >= 2 {
        let batch_len = trace.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|i| {
                trace[i * batch_len..(i + 1) * batch_len]
                    .iter()
                    .map(|r| r.distortion)
                    .sum::<f64>()
                    / batch_len as f64
            })
            .collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
            / (batches as f64 - 1.0);
        1.96 * (var / batches as f64).sqrt()
    } else {
        f64::NAN
    };

    SimReport {
        policy,
        horizon,
        mean_distortion: mean,
        ci_half_width: half_width,
        empty_battery_fraction: empty,
    }
}

/// Battery summary of a trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BatteryStats {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
    /// Largest swing of the buffer over the trace.
    pub excursion: u32,
    /// Share of bad-source slots that start with an empty battery.
    pub empty_in_bad_fraction: f64,
}

pub fn battery_trace_stats(trace: &[TraceRecord]) -> BatteryStats {
    assert!(!trace.is_empty(), "trace must be non-empty");
    let mut min = u32::MAX;
    let mut max = 0;
    let mut sum = 0u64;
    let mut bad = 0u64;
    let mut bad_empty = 0u64;
    for r in trace {
        min = min.min(r.battery_before);
        max = max.max(r.battery_before);
        sum += u64::from(r.battery_before);
        if r.source_state == SourceState::Bad {
            bad += 1;
            if r.battery_before == 0 {
                bad_empty += 1;
            }
        }
    }
    BatteryStats {
        min,
        max,
        mean: sum as f64 / trace.len() as f64,
        excursion: max - min,
        empty_in_bad_fraction: if bad == 0 {
            0.0
        } else {
            bad_empty as f64 / bad as f64
        },
    }
}
