//! Configuration: a single structured TOML document with sections for the
//! source fit, the link, the energy model, the harvest source, the battery,
//! the solver and the simulator. Unknown keys are rejected so that typos in
//! physics parameters cannot pass silently.
//!
//! Battery size and harvest mean may be given either raw (quanta) or
//! normalized by `e_max` (the dearest packet cost); raw wins on conflict,
//! with a warning.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{ConsumptionParams, EnergyModel, HarvestModel};
use crate::error::{Error, Result};
use crate::rd::{LinkModel, SourceFit};

/// Stopping rule of the value iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Span-seminorm stopping threshold, in cost units.
    pub epsilon: f64,
    pub max_iterations: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 100_000,
        }
    }
}

/// Monte Carlo defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub horizon: u64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            horizon: 1_000_000,
            seed: 20_260_810,
        }
    }
}

/// Which planning cost the outage-blind baseline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DpCostModel {
    /// Plan with the source-coding distortion of the outage-blind level.
    #[default]
    SourceOnly,
    /// Plan with the true expected distortion of the outage-blind level.
    TrueCost,
}

/// Complete, resolved system description: the single source of truth fed to
/// every other module.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub source: SourceFit,
    pub link: LinkModel,
    pub consumption: ConsumptionParams,
    pub harvest: HarvestModel,
    /// Battery capacity B, quanta.
    pub battery_capacity: u32,
    pub solver: SolverParams,
    pub sim: SimParams,
    pub dp_cost_model: DpCostModel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let source = SourceFit {
            a: 0.69,
            b: 3.27,
            max_distortion: 1.0,
            levels: 20,
            payload_bits: 500,
            slot_bits: 500,
        };
        let link = LinkModel {
            tx_power: 10f64.powf((14.0 - 30.0) / 10.0), // 14 dBm
            distance: 100.0,
            ref_distance: 1.0,
            path_loss_exp: 3.5,
            carrier_freq: 868.3e6,
            noise_psd_dbm: -167.0,
            bandwidth: 125e3,
        };
        let consumption = ConsumptionParams {
            cycle_energy: 1e-9,
            alpha_p: 24.0,
            beta_p: 2.0,
            amp_efficiency: 0.9,
            sensing_cost: 5e-6,
            switching_cost: 5e-6,
            encoding_cost: 0.0,
            circuit_rate: 5e-3,
            slot_duration: 4e-3,
            quantum: 5e-6,
        };
        let energy =
            EnergyModel::new(consumption.clone(), &source, &link).expect("default config is valid");
        let e_max = f64::from(energy.e_max());
        let battery_capacity = (1.5 * e_max).round() as u32;
        let mean_quanta = e_max; // mu_bar = 1
        let max_inflow = default_max_inflow(mean_quanta, 3.0, battery_capacity);
        Self {
            source,
            link,
            consumption,
            harvest: HarvestModel {
                p_bad_to_good: 0.3,
                p_good_to_bad: 0.1,
                mean_quanta,
                variance: 3.0,
                max_inflow,
            },
            battery_capacity,
            solver: SolverParams::default(),
            sim: SimParams::default(),
            dp_cost_model: DpCostModel::default(),
        }
    }
}

/// Default truncation bound: `ceil(mu + 3 sigma)`, capped at the battery size
/// (anything above would always be clipped away).
fn default_max_inflow(mean: f64, variance: f64, capacity: u32) -> u32 {
    if mean == 0.0 {
        return 0;
    }
    let raw = (mean + 3.0 * variance.sqrt()).ceil() as u32;
    raw.min(capacity).max(1)
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.link.validate()?;
        self.consumption.validate()?;
        self.harvest.validate()?;
        if self.harvest.mean_quanta > 0.0 && self.harvest.max_inflow == 0 {
            return Err(Error::InvalidConfig(
                "harvest.e_max_inflow must be at least 1 when mu > 0".into(),
            ));
        }
        if !(self.solver.epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "solver.epsilon must be positive, got {}",
                self.solver.epsilon
            )));
        }
        if self.solver.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "solver.max_iterations must be positive".into(),
            ));
        }
        if self.sim.horizon == 0 {
            return Err(Error::InvalidConfig("sim.horizon must be positive".into()));
        }
        Ok(())
    }

    /// The energy model implied by this configuration.
    pub fn energy_model(&self) -> Result<EnergyModel> {
        EnergyModel::new(self.consumption.clone(), &self.source, &self.link)
    }

    /// Normalized battery size `B / e_max` of this configuration.
    pub fn battery_bar(&self) -> Result<f64> {
        Ok(f64::from(self.battery_capacity) / f64::from(self.energy_model()?.e_max()))
    }

    /// Normalized mean inflow `mu / e_max` of this configuration.
    pub fn mu_bar(&self) -> Result<f64> {
        Ok(self.harvest.mean_quanta / f64::from(self.energy_model()?.e_max()))
    }

    /// Copy with the harvest mean set to `mu_bar * e_max` and the truncation
    /// bound re-derived.
    pub fn with_mu_bar(&self, mu_bar: f64) -> Result<Self> {
        if mu_bar < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mu_bar must be non-negative, got {mu_bar}"
            )));
        }
        let e_max = self.energy_model()?.e_max();
        let mut out = self.clone();
        out.harvest.mean_quanta = mu_bar * f64::from(e_max);
        out.harvest.max_inflow = default_max_inflow(
            out.harvest.mean_quanta,
            out.harvest.variance,
            out.battery_capacity,
        );
        Ok(out)
    }

    /// Copy with the battery capacity set to `round(b_bar * e_max)`.
    pub fn with_battery_bar(&self, b_bar: f64) -> Result<Self> {
        if b_bar < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "b_bar must be non-negative, got {b_bar}"
            )));
        }
        let e_max = self.energy_model()?.e_max();
        let mut out = self.clone();
        out.battery_capacity = (b_bar * f64::from(e_max)).round() as u32;
        out.harvest.max_inflow = default_max_inflow(
            out.harvest.mean_quanta,
            out.harvest.variance,
            out.battery_capacity,
        );
        Ok(out)
    }

    /// Copy with a different link distance.
    pub fn with_distance(&self, distance: f64) -> Result<Self> {
        let mut out = self.clone();
        out.link.distance = distance;
        out.link.validate()?;
        Ok(out)
    }

    pub fn from_toml_str(text: &str) -> Result<(Self, Vec<String>)> {
        let file: ConfigFile = toml::from_str(text)?;
        file.resolve()
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Serializes the resolved configuration; normalized quantities are
    /// emitted in raw form, so a round trip is the identity.
    pub fn to_toml_string(&self) -> Result<String> {
        let file = ConfigFile::from_config(self);
        Ok(toml::to_string_pretty(&file)?)
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    source: SourceSection,
    link: LinkSection,
    energy: EnergySection,
    harvest: HarvestSection,
    battery: BatterySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<SolverParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sim: Option<SimParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dp_cost_model: Option<DpCostModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    a: f64,
    b: f64,
    d_fl: f64,
    m: u32,
    l0: u32,
    s: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    p_tx: f64,
    d: f64,
    d0: f64,
    eta: f64,
    f0: f64,
    noise_psd: f64,
    bandwidth: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnergySection {
    e0: f64,
    alpha_p: f64,
    beta_p: f64,
    eta_a: f64,
    beta_s: f64,
    beta_c: f64,
    beta_e: f64,
    circuit_rate: f64,
    t_slot: f64,
    quantum: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HarvestSection {
    p_bad_to_good: f64,
    p_good_to_bad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_normalized: Option<f64>,
    sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    e_max_inflow: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BatterySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    capacity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity_normalized: Option<f64>,
}

impl ConfigFile {
    fn resolve(self) -> Result<(SystemConfig, Vec<String>)> {
        let mut warnings = Vec::new();
        let source = SourceFit {
            a: self.source.a,
            b: self.source.b,
            max_distortion: self.source.d_fl,
            levels: self.source.m,
            payload_bits: self.source.l0,
            slot_bits: self.source.s,
        };
        let link = LinkModel {
            tx_power: self.link.p_tx,
            distance: self.link.d,
            ref_distance: self.link.d0,
            path_loss_exp: self.link.eta,
            carrier_freq: self.link.f0,
            noise_psd_dbm: self.link.noise_psd,
            bandwidth: self.link.bandwidth,
        };
        let consumption = ConsumptionParams {
            cycle_energy: self.energy.e0,
            alpha_p: self.energy.alpha_p,
            beta_p: self.energy.beta_p,
            amp_efficiency: self.energy.eta_a,
            sensing_cost: self.energy.beta_s,
            switching_cost: self.energy.beta_c,
            encoding_cost: self.energy.beta_e,
            circuit_rate: self.energy.circuit_rate,
            slot_duration: self.energy.t_slot,
            quantum: self.energy.quantum,
        };
        // e_max resolves the normalized battery/harvest quantities
        let energy = EnergyModel::new(consumption.clone(), &source, &link)?;
        let e_max = f64::from(energy.e_max());

        let battery_capacity = match (self.battery.capacity, self.battery.capacity_normalized) {
            (Some(raw), Some(_)) => {
                warnings.push(
                    "battery.capacity and battery.capacity_normalized both given; raw wins"
                        .to_string(),
                );
                raw
            }
            (Some(raw), None) => raw,
            (None, Some(norm)) => (norm * e_max).round() as u32,
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "battery section needs capacity or capacity_normalized".into(),
                ))
            }
        };

        let mean_quanta = match (self.harvest.mu, self.harvest.mu_normalized) {
            (Some(raw), Some(_)) => {
                warnings.push("harvest.mu and harvest.mu_normalized both given; raw wins".into());
                raw
            }
            (Some(raw), None) => raw,
            (None, Some(norm)) => norm * e_max,
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "harvest section needs mu or mu_normalized".into(),
                ))
            }
        };

        let max_inflow = self
            .harvest
            .e_max_inflow
            .unwrap_or_else(|| default_max_inflow(mean_quanta, self.harvest.sigma2, battery_capacity));

        let config = SystemConfig {
            source,
            link,
            consumption,
            harvest: HarvestModel {
                p_bad_to_good: self.harvest.p_bad_to_good,
                p_good_to_bad: self.harvest.p_good_to_bad,
                mean_quanta,
                variance: self.harvest.sigma2,
                max_inflow,
            },
            battery_capacity,
            solver: self.solver.unwrap_or_default(),
            sim: self.sim.unwrap_or_default(),
            dp_cost_model: self.dp_cost_model.unwrap_or_default(),
        };
        config.validate()?;
        Ok((config, warnings))
    }

    fn from_config(config: &SystemConfig) -> Self {
        Self {
            source: SourceSection {
                a: config.source.a,
                b: config.source.b,
                d_fl: config.source.max_distortion,
                m: config.source.levels,
                l0: config.source.payload_bits,
                s: config.source.slot_bits,
            },
            link: LinkSection {
                p_tx: config.link.tx_power,
                d: config.link.distance,
                d0: config.link.ref_distance,
                eta: config.link.path_loss_exp,
                f0: config.link.carrier_freq,
                noise_psd: config.link.noise_psd_dbm,
                bandwidth: config.link.bandwidth,
            },
            energy: EnergySection {
                e0: config.consumption.cycle_energy,
                alpha_p: config.consumption.alpha_p,
                beta_p: config.consumption.beta_p,
                eta_a: config.consumption.amp_efficiency,
                beta_s: config.consumption.sensing_cost,
                beta_c: config.consumption.switching_cost,
                beta_e: config.consumption.encoding_cost,
                circuit_rate: config.consumption.circuit_rate,
                t_slot: config.consumption.slot_duration,
                quantum: config.consumption.quantum,
            },
            harvest: HarvestSection {
                p_bad_to_good: config.harvest.p_bad_to_good,
                p_good_to_bad: config.harvest.p_good_to_bad,
                mu: Some(config.harvest.mean_quanta),
                mu_normalized: None,
                sigma2: config.harvest.variance,
                e_max_inflow: Some(config.harvest.max_inflow),
            },
            battery: BatterySection {
                capacity: Some(config.battery_capacity),
                capacity_normalized: None,
            },
            solver: Some(config.solver),
            sim: Some(config.sim),
            dp_cost_model: Some(config.dp_cost_model),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SystemConfig::default();
        cfg.validate().unwrap();
        let energy = cfg.energy_model().unwrap();
        assert_eq!(energy.e_max(), 31);
        assert_eq!(energy.e_min(), 29);
        assert_eq!(cfg.battery_capacity, 47); // 1.5 * 31 rounded
        assert_eq!(cfg.harvest.mean_quanta, 31.0);
        assert_eq!(cfg.harvest.max_inflow, 37);
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = SystemConfig::default();
        let text = cfg.to_toml_string().unwrap();
        let (reloaded, warnings) = SystemConfig::from_toml_str(&text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg, reloaded);
        // and once more through the serializer
        assert_eq!(reloaded.to_toml_string().unwrap(), text);
    }

    #[test]
    fn normalized_quantities_resolve_against_e_max() {
        let text = r#"
[source]
a = 0.69
b = 3.27
d_fl = 1.0
m = 20
l0 = 500
s = 500

[link]
p_tx = 0.025118864315095794
d = 100.0
d0 = 1.0
eta = 3.5
f0 = 868.3e6
noise_psd = -167.0
bandwidth = 125e3

[energy]
e0 = 1e-9
alpha_p = 24.0
beta_p = 2.0
eta_a = 0.9
beta_s = 5e-6
beta_c = 5e-6
beta_e = 0.0
circuit_rate = 5e-3
t_slot = 4e-3
quantum = 5e-6

[harvest]
p_bad_to_good = 0.3
p_good_to_bad = 0.1
mu_normalized = 1.0
sigma2 = 3.0

[battery]
capacity_normalized = 2.0
"#;
        let (cfg, warnings) = SystemConfig::from_toml_str(text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(cfg.battery_capacity, 62);
        assert_eq!(cfg.harvest.mean_quanta, 31.0);
    }

    #[test]
    fn raw_wins_on_conflict_with_warning() {
        let mut cfg = SystemConfig::default();
        cfg.battery_capacity = 10;
        let mut text = cfg.to_toml_string().unwrap();
        text = text.replace(
            "[battery]\ncapacity = 10",
            "[battery]\ncapacity = 10\ncapacity_normalized = 3.0",
        );
        let (loaded, warnings) = SystemConfig::from_toml_str(&text).unwrap();
        assert_eq!(loaded.battery_capacity, 10);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("raw wins"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut text = SystemConfig::default().to_toml_string().unwrap();
        text.push_str("\n[source2]\nx = 1\n");
        assert!(SystemConfig::from_toml_str(&text).is_err());
        let typo = SystemConfig::default()
            .to_toml_string()
            .unwrap()
            .replace("alpha_p", "alpha_q");
        assert!(SystemConfig::from_toml_str(&typo).is_err());
    }

    #[test]
    fn invariant_violations_are_named() {
        let bad = SystemConfig::default().to_toml_string().unwrap().replace(
            "a = 0.69",
            "a = 1.69",
        );
        let err = SystemConfig::from_toml_str(&bad).unwrap_err();
        assert!(err.to_string().contains("source.a"), "{err}");
    }

    #[test]
    fn normalized_rewrites() {
        let cfg = SystemConfig::default();
        let wide = cfg.with_battery_bar(3.0).unwrap();
        assert_eq!(wide.battery_capacity, 93);
        let lean = cfg.with_mu_bar(0.5).unwrap();
        assert!((lean.harvest.mean_quanta - 15.5).abs() < 1e-12);
        let far = cfg.with_distance(1200.0).unwrap();
        assert_eq!(far.link.distance, 1200.0);
        let dead = cfg.with_mu_bar(0.0).unwrap();
        assert_eq!(dead.harvest.max_inflow, 0);
        dead.validate().unwrap();
    }
}
