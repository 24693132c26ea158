//! Per-slot energy consumption, the two-state harvest source and the battery.
//!
//! All battery bookkeeping is in integer energy quanta; joule-level costs are
//! quantized by rounding up, so a level is affordable in quanta exactly when
//! it is affordable in joules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rd::{LinkModel, SourceFit};

/// State of the harvesting energy source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SourceState {
    /// No energy arrives.
    Bad,
    /// Energy arrives with the configured truncated-Gaussian profile.
    Good,
}

impl SourceState {
    pub const ALL: [SourceState; 2] = [SourceState::Bad, SourceState::Good];

    pub fn index(self) -> usize {
        match self {
            SourceState::Bad => 0,
            SourceState::Good => 1,
        }
    }

    pub fn from_index(i: usize) -> SourceState {
        if i == 0 {
            SourceState::Bad
        } else {
            SourceState::Good
        }
    }
}

/// Energy cost coefficients of sensing, compression, transmission and
/// circuitry, plus the quantization unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionParams {
    /// Energy per micro-controller clock cycle, joules.
    pub cycle_energy: f64,
    /// Compression cycle-count slope, cycles/bit.
    pub alpha_p: f64,
    /// Compression cycle-count offset, cycles/bit.
    pub beta_p: f64,
    /// Power-amplifier efficiency, in (0, 1].
    pub amp_efficiency: f64,
    /// Sensing cost per slot, joules.
    pub sensing_cost: f64,
    /// Mode-switching and synchronization cost per slot, joules.
    pub switching_cost: f64,
    /// Channel-encoding cost, joules (often negligible; zero allowed).
    pub encoding_cost: f64,
    /// Circuitry power while transmitting, joules/second.
    pub circuit_rate: f64,
    /// Slot duration, seconds.
    pub slot_duration: f64,
    /// Joules per energy quantum.
    pub quantum: f64,
}

impl ConsumptionParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("energy.e0", self.cycle_energy),
            ("energy.alpha_p", self.alpha_p),
            ("energy.beta_p", self.beta_p),
            ("energy.beta_s", self.sensing_cost),
            ("energy.beta_c", self.switching_cost),
            ("energy.circuit_rate", self.circuit_rate),
            ("energy.t_slot", self.slot_duration),
            ("energy.quantum", self.quantum),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.encoding_cost >= 0.0) || !self.encoding_cost.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "energy.beta_e must be non-negative, got {}",
                self.encoding_cost
            )));
        }
        if !(self.amp_efficiency > 0.0 && self.amp_efficiency <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "energy.eta_a must lie in (0, 1], got {}",
                self.amp_efficiency
            )));
        }
        Ok(())
    }
}

/// Energy consumption of one slot as a function of the compression level,
/// with the per-level quantized costs cached.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub params: ConsumptionParams,
    /// Transmit power, watts (taken from the link model).
    pub tx_power: f64,
    /// Uncompressed payload, bits.
    pub payload_bits: u32,
    /// Number of compression levels m.
    levels: u32,
    quanta: Vec<u32>,
}

impl EnergyModel {
    pub fn new(params: ConsumptionParams, fit: &SourceFit, link: &LinkModel) -> Result<Self> {
        params.validate()?;
        fit.validate()?;
        link.validate()?;
        let mut model = Self {
            params,
            tx_power: link.tx_power,
            payload_bits: fit.payload_bits,
            levels: fit.levels,
            quanta: Vec::new(),
        };
        model.quanta = (0..=fit.levels)
            .map(|k| {
                let joules = model.total_energy_joules(k)?;
                Ok((joules / model.params.quantum).ceil() as u32)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(model)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Compression energy: zero when the packet is dropped or sent raw,
    /// otherwise linear in the compression ratio (LTC cycle model).
    pub fn processing_energy(&self, level: u32) -> Result<f64> {
        if level > self.levels {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.levels,
            });
        }
        if level == 0 || level == self.levels {
            return Ok(0.0);
        }
        let cycles_per_bit =
            self.params.alpha_p * f64::from(level) / f64::from(self.levels) + self.params.beta_p;
        Ok(self.params.cycle_energy * f64::from(self.payload_bits) * cycles_per_bit)
    }

    /// Radio energy: constant whenever something is transmitted.
    pub fn transmission_energy(&self, level: u32) -> f64 {
        if level == 0 {
            0.0
        } else {
            self.tx_power * self.params.slot_duration / self.params.amp_efficiency
        }
    }

    /// Sensing and synchronization always run; encoding and the transmit-time
    /// circuitry cost only apply when something is transmitted.
    pub fn circuitry_energy(&self, level: u32) -> f64 {
        let base = self.params.sensing_cost + self.params.switching_cost;
        if level == 0 {
            base
        } else {
            base + self.params.encoding_cost + self.params.circuit_rate * self.params.slot_duration
        }
    }

    pub fn total_energy_joules(&self, level: u32) -> Result<f64> {
        Ok(self.processing_energy(level)?
            + self.transmission_energy(level)
            + self.circuitry_energy(level))
    }

    /// Total slot energy rounded up to whole quanta.
    pub fn total_energy_quanta(&self, level: u32) -> Result<u32> {
        if level > self.levels {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.levels,
            });
        }
        Ok(self.quanta[level as usize])
    }

    /// Largest cost of transmitting a packet, quanta (at level m-1).
    pub fn e_max(&self) -> u32 {
        (1..=self.levels)
            .map(|k| self.quanta[k as usize])
            .max()
            .expect("levels >= 2")
    }

    /// Smallest cost of transmitting a packet, quanta (at level m: the raw
    /// packet skips processing entirely).
    pub fn e_min(&self) -> u32 {
        (1..=self.levels)
            .map(|k| self.quanta[k as usize])
            .min()
            .expect("levels >= 2")
    }
}

/// Two-state Markov energy source with truncated discrete-Gaussian inflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarvestModel {
    pub p_bad_to_good: f64,
    pub p_good_to_bad: f64,
    /// Mean inflow in the good state, quanta/slot. Zero models a dead source
    /// (the good state then also emits nothing).
    pub mean_quanta: f64,
    /// Inflow variance, quanta^2.
    pub variance: f64,
    /// Truncation bound E of the good-state inflow.
    pub max_inflow: u32,
}

impl HarvestModel {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("harvest.p_bad_to_good", self.p_bad_to_good),
            ("harvest.p_good_to_bad", self.p_good_to_bad),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {p}"
                )));
            }
        }
        if !(self.mean_quanta >= 0.0) || !self.mean_quanta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "harvest.mu must be non-negative, got {}",
                self.mean_quanta
            )));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "harvest.sigma2 must be positive, got {}",
                self.variance
            )));
        }
        if self.mean_quanta > 0.0 && self.max_inflow == 0 {
            return Err(Error::InvalidConfig(
                "harvest.e_max_inflow must be at least 1 when mu > 0".into(),
            ));
        }
        Ok(())
    }

    /// Per-state transition probability of the source chain.
    pub fn transition(&self, from: SourceState, to: SourceState) -> f64 {
        match (from, to) {
            (SourceState::Bad, SourceState::Good) => self.p_bad_to_good,
            (SourceState::Bad, SourceState::Bad) => 1.0 - self.p_bad_to_good,
            (SourceState::Good, SourceState::Bad) => self.p_good_to_bad,
            (SourceState::Good, SourceState::Good) => 1.0 - self.p_good_to_bad,
        }
    }

    /// Inflow distribution over `{0..E}` for the given source state.
    ///
    /// Bad state: all mass at zero. Good state: Gaussian weights on `{1..E}`,
    /// renormalized; degenerates to mass at zero when the mean is zero.
    pub fn pmf(&self, state: SourceState) -> Vec<f64> {
        let e = self.max_inflow as usize;
        let mut pmf = vec![0.0; e + 1];
        match state {
            SourceState::Bad => pmf[0] = 1.0,
            SourceState::Good => {
                if self.mean_quanta == 0.0 {
                    pmf[0] = 1.0;
                    return pmf;
                }
                let mut total = 0.0;
                for q in 1..=e {
                    let z = q as f64 - self.mean_quanta;
                    let w = (-z * z / (2.0 * self.variance)).exp();
                    pmf[q] = w;
                    total += w;
                }
                if total == 0.0 {
                    // weights underflowed; fall back to the nearest support point
                    let nearest = (self.mean_quanta.round() as usize).clamp(1, e);
                    pmf[nearest] = 1.0;
                } else {
                    for p in pmf.iter_mut() {
                        *p /= total;
                    }
                }
            }
        }
        pmf
    }
}

/// One battery update: `b' = min(b + e - u, capacity)`, after checking the
/// causality constraint `u <= b`.
pub fn battery_step(level: u32, inflow: u32, action: u32, capacity: u32) -> Result<u32> {
    if action > level {
        return Err(Error::CausalityViolation { action, level });
    }
    Ok((level - action + inflow).min(capacity))
}

/// Finite energy buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Battery {
    pub capacity: u32,
    pub level: u32,
}

impl Battery {
    pub fn full(capacity: u32) -> Self {
        Self {
            capacity,
            level: capacity,
        }
    }

    pub fn new(capacity: u32, level: u32) -> Result<Self> {
        if level > capacity {
            return Err(Error::InvalidConfig(format!(
                "battery level {level} exceeds capacity {capacity}"
            )));
        }
        Ok(Self { capacity, level })
    }

    /// Applies one slot of harvest and consumption.
    pub fn step(&mut self, inflow: u32, action: u32) -> Result<u32> {
        self.level = battery_step(self.level, inflow, action, self.capacity)?;
        Ok(self.level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rd::LinkModel;

    fn fit() -> SourceFit {
        SourceFit {
            a: 0.69,
            b: 3.27,
            max_distortion: 1.0,
            levels: 20,
            payload_bits: 500,
            slot_bits: 500,
        }
    }

    fn link() -> LinkModel {
        LinkModel {
            tx_power: 10f64.powf((14.0 - 30.0) / 10.0),
            distance: 100.0,
            ref_distance: 1.0,
            path_loss_exp: 3.5,
            carrier_freq: 868.3e6,
            noise_psd_dbm: -167.0,
            bandwidth: 125e3,
        }
    }

    fn params() -> ConsumptionParams {
        ConsumptionParams {
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
        }
    }

    fn model() -> EnergyModel {
        EnergyModel::new(params(), &fit(), &link()).unwrap()
    }

    #[test]
    fn processing_energy_shape() {
        let m = model();
        assert_eq!(m.processing_energy(0).unwrap(), 0.0);
        assert_eq!(m.processing_energy(20).unwrap(), 0.0);
        assert!(m.processing_energy(19).unwrap() > m.processing_energy(1).unwrap());
        // linear increase on the interior
        for k in 1..18 {
            let step1 = m.processing_energy(k + 1).unwrap() - m.processing_energy(k).unwrap();
            let step2 = m.processing_energy(k + 2).unwrap() - m.processing_energy(k + 1).unwrap();
            assert!((step1 - step2).abs() < 1e-18);
        }
        assert!(m.processing_energy(21).is_err());
    }

    #[test]
    fn transmission_energy_indicator() {
        let m = model();
        assert_eq!(m.transmission_energy(0), 0.0);
        let e1 = m.transmission_energy(1);
        for k in 2..=20 {
            assert_eq!(m.transmission_energy(k), e1);
        }
        // eta_a = 1, 1 mW for 4 ms is 4 uJ
        let mut p = params();
        p.amp_efficiency = 1.0;
        let mut small_link = link();
        small_link.tx_power = 1e-3;
        let m = EnergyModel::new(p, &fit(), &small_link).unwrap();
        assert!((m.transmission_energy(5) - 4e-6).abs() < 1e-18);
    }

    #[test]
    fn circuitry_energy_split() {
        let m = model();
        let idle = m.circuitry_energy(0);
        assert!((idle - 1e-5).abs() < 1e-18);
        let tx = m.circuitry_energy(3);
        assert!((tx - idle - (0.0 + 5e-3 * 4e-3)).abs() < 1e-18);
    }

    #[test]
    fn quanta_ordering() {
        let m = model();
        // raw packet is the cheapest transmission; costs rise with processing
        let q: Vec<u32> = (0..=20).map(|k| m.total_energy_quanta(k).unwrap()).collect();
        for k in 0..19 {
            assert!(q[k] <= q[k + 1], "k={k}");
        }
        assert!(m.total_energy_joules(20).unwrap() < m.total_energy_joules(1).unwrap());
        assert!(q[20] <= q[1]);
        assert_eq!(m.e_max(), 31);
        assert_eq!(m.e_min(), 29);
        // e_max is attained at m-1
        assert_eq!(m.e_max(), q[19]);
    }

    #[test]
    fn quanta_recover_joules_in_fine_limit() {
        let mut p = params();
        p.quantum = 1e-12;
        let m = EnergyModel::new(p, &fit(), &link()).unwrap();
        for k in [0, 1, 10, 19, 20] {
            let j = m.total_energy_joules(k).unwrap();
            let q = m.total_energy_quanta(k).unwrap();
            // rounding up costs at most one quantum
            assert!((f64::from(q) * 1e-12 - j).abs() <= 1e-12, "k={k}");
        }
    }

    #[test]
    fn harvest_pmf_states() {
        let h = HarvestModel {
            p_bad_to_good: 0.3,
            p_good_to_bad: 0.1,
            mean_quanta: 8.0,
            variance: 3.0,
            max_inflow: 14,
        };
        let bad = h.pmf(SourceState::Bad);
        assert_eq!(bad[0], 1.0);
        assert_eq!(bad.iter().sum::<f64>(), 1.0);
        let good = h.pmf(SourceState::Good);
        assert_eq!(good[0], 0.0);
        let total: f64 = good.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // mean close to mu (small truncation bias at 3.5 sigma)
        let mean: f64 = good.iter().enumerate().map(|(e, p)| e as f64 * p).sum();
        assert!((mean - 8.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn harvest_pmf_degenerate_mean() {
        let h = HarvestModel {
            p_bad_to_good: 0.3,
            p_good_to_bad: 0.1,
            mean_quanta: 0.0,
            variance: 3.0,
            max_inflow: 0,
        };
        let good = h.pmf(SourceState::Good);
        assert_eq!(good, vec![1.0]);
    }

    #[test]
    fn battery_step_cases() {
        assert_eq!(battery_step(5, 3, 2, 10).unwrap(), 6);
        assert_eq!(battery_step(8, 5, 0, 10).unwrap(), 10);
        assert!(matches!(
            battery_step(3, 0, 4, 10),
            Err(Error::CausalityViolation { action: 4, level: 3 })
        ));
        let mut b = Battery::full(10);
        b.step(0, 4).unwrap();
        assert_eq!(b.level, 6);
        assert!(Battery::new(5, 6).is_err());
    }
}
