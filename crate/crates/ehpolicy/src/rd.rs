//! Inner rate-distortion problem.
//!
//! Models the lossy-compression distortion fit, the Rayleigh-fading outage
//! probability of the link, and the expected distortion seen at the receiver,
//! then picks the compression level that minimizes it under an energy budget.
//! A packet carries `k/m` of the raw payload; `k = 0` means the packet is
//! dropped and the receiver incurs the full distortion floor.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyModel;
use crate::error::{Error, Result};

/// Speed of light used by the path-loss coefficient, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

const LN_2: f64 = std::f64::consts::LN_2;

/// Power-law fit of the source rate-distortion curve plus framing sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceFit {
    /// Fit exponent, in (0, 1).
    pub a: f64,
    /// Fit scale, > 0.
    pub b: f64,
    /// Distortion of a dropped or lost packet (the floor), > 0.
    pub max_distortion: f64,
    /// Number of compression levels `m`; the ratio is `k/m`.
    pub levels: u32,
    /// Uncompressed payload per slot, bits.
    pub payload_bits: u32,
    /// Slot capacity, bits. Must be at least `payload_bits`.
    pub slot_bits: u32,
}

impl SourceFit {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "source.a must lie in (0, 1), got {}",
                self.a
            )));
        }
        if !(self.b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "source.b must be positive, got {}",
                self.b
            )));
        }
        if !(self.max_distortion > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "source.d_fl must be positive, got {}",
                self.max_distortion
            )));
        }
        if self.levels < 2 {
            return Err(Error::InvalidConfig(format!(
                "source.m must be at least 2, got {}",
                self.levels
            )));
        }
        if self.payload_bits == 0 {
            return Err(Error::InvalidConfig("source.l0 must be positive".into()));
        }
        if self.payload_bits > self.slot_bits {
            return Err(Error::InvalidConfig(format!(
                "source.l0 ({}) must not exceed source.s ({})",
                self.payload_bits, self.slot_bits
            )));
        }
        Ok(())
    }

    /// Compression ratio `k/m`.
    pub fn compression_ratio(&self, level: u32) -> f64 {
        f64::from(level) / f64::from(self.levels)
    }

    /// Coding rate `R(k) = (k/m) (l0/s)` in bits per channel symbol.
    pub fn rate(&self, level: u32) -> f64 {
        self.compression_ratio(level) * f64::from(self.payload_bits) / f64::from(self.slot_bits)
    }
}

/// Link-budget parameters of the sensor-to-collector channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    /// Transmit power, watts.
    pub tx_power: f64,
    /// Transmitter-receiver distance, meters.
    pub distance: f64,
    /// Far-field reference distance, meters.
    pub ref_distance: f64,
    /// Path-loss exponent.
    pub path_loss_exp: f64,
    /// Carrier frequency, hertz.
    pub carrier_freq: f64,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm: f64,
    /// Receiver bandwidth, hertz.
    pub bandwidth: f64,
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("link.p_tx", self.tx_power),
            ("link.d", self.distance),
            ("link.d0", self.ref_distance),
            ("link.eta", self.path_loss_exp),
            ("link.f0", self.carrier_freq),
            ("link.bandwidth", self.bandwidth),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !self.noise_psd_dbm.is_finite() {
            return Err(Error::InvalidConfig(
                "link.noise_psd must be finite".into(),
            ));
        }
        if self.distance < self.ref_distance {
            return Err(Error::InvalidConfig(format!(
                "link.d ({}) must be at least link.d0 ({})",
                self.distance, self.ref_distance
            )));
        }
        Ok(())
    }

    /// Total noise power over the bandwidth, watts.
    pub fn noise_power(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm - 30.0) / 10.0) * self.bandwidth
    }

    /// Path-loss coefficient `A = 4 pi d0 f0 / c`.
    pub fn path_loss_coeff(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.ref_distance * self.carrier_freq / SPEED_OF_LIGHT
    }
}

/// Average SNR at the receiver for a unit-gain fading realization.
pub fn avg_snr(link: &LinkModel) -> f64 {
    let a = link.path_loss_coeff();
    let path = (link.distance / link.ref_distance).powf(link.path_loss_exp);
    link.tx_power / (a * a * path * link.noise_power())
}

/// Distortion introduced by compressing to level `k`.
///
/// `b ((k/m)^-a - 1)` for `k > 0`, the floor for `k = 0`.
pub fn source_distortion(level: u32, fit: &SourceFit) -> Result<f64> {
    if level > fit.levels {
        return Err(Error::LevelOutOfRange {
            level,
            max: fit.levels,
        });
    }
    if level == 0 {
        return Ok(fit.max_distortion);
    }
    Ok(fit.b * (fit.compression_ratio(level).powf(-fit.a) - 1.0))
}

/// Probability that the instantaneous capacity falls below `R(k)` under
/// Rayleigh fading: `1 - exp(-(2^R(k) - 1) / avg_snr)`.
pub fn outage_probability(level: u32, fit: &SourceFit, link: &LinkModel) -> Result<f64> {
    if level > fit.levels {
        return Err(Error::LevelOutOfRange {
            level,
            max: fit.levels,
        });
    }
    Ok(outage_for_rate(fit.rate(level), avg_snr(link)))
}

fn outage_for_rate(rate: f64, gamma_bar: f64) -> f64 {
    1.0 - (-(2f64.powf(rate) - 1.0) / gamma_bar).exp()
}

/// Expected distortion at the receiver:
/// `D(k) (1 - P_out(k)) + D_fl P_out(k)`.
pub fn expected_distortion(level: u32, fit: &SourceFit, link: &LinkModel) -> Result<f64> {
    let d = source_distortion(level, fit)?;
    let p = outage_probability(level, fit, link)?;
    Ok(d * (1.0 - p) + fit.max_distortion * p)
}

/// Continuous extension of the expected distortion to real levels `w in [0, m]`.
pub fn expected_distortion_continuous(w: f64, fit: &SourceFit, link: &LinkModel) -> Result<f64> {
    if !(0.0..=f64::from(fit.levels)).contains(&w) {
        return Err(Error::ContinuousLevelOutOfRange {
            w,
            max: fit.levels,
        });
    }
    if w == 0.0 {
        return Ok(fit.max_distortion);
    }
    let m = f64::from(fit.levels);
    let d = fit.b * ((w / m).powf(-fit.a) - 1.0);
    let rate = (w / m) * f64::from(fit.payload_bits) / f64::from(fit.slot_bits);
    let p = outage_for_rate(rate, avg_snr(link));
    Ok(d * (1.0 - p) + fit.max_distortion * p)
}

/// Coefficients of the derivative analysis of the expected distortion.
///
/// With `E(w) = exp(-c2 2^(w c3))`, the continuous expected distortion is
/// `c1 w^-a E(w) - c4 E(w) + D_fl` and its derivative is `-E(w) f(w)` with
/// `f(w) = d1 w^(-a-1) + d2 w^-a 2^(w c3) - d3 2^(w c3)`.
#[derive(Debug, Clone)]
pub struct RdCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    a: f64,
    levels: u32,
    // d1..d3 divided by exp(1/avg_snr); same signs, immune to the exp overflow
    // at very deep path loss.
    r1: f64,
    r2: f64,
    r3: f64,
}

impl RdCoefficients {
    pub fn new(fit: &SourceFit, link: &LinkModel) -> Self {
        Self::from_snr(fit, avg_snr(link))
    }

    pub fn from_snr(fit: &SourceFit, gamma_bar: f64) -> Self {
        let m = f64::from(fit.levels);
        let scale = (1.0 / gamma_bar).exp();
        let c2 = 1.0 / gamma_bar;
        let c3 = f64::from(fit.payload_bits) / (m * f64::from(fit.slot_bits));
        let c1 = fit.b * m.powf(fit.a) * scale;
        let c4 = scale * (fit.b + fit.max_distortion);
        let r1 = fit.a * fit.b * m.powf(fit.a);
        let r2 = fit.b * m.powf(fit.a) * c2 * c3 * LN_2;
        let r3 = (fit.b + fit.max_distortion) * c2 * c3 * LN_2;
        Self {
            c1,
            c2,
            c3,
            c4,
            d1: fit.a * c1,
            d2: c1 * c2 * c3 * LN_2,
            d3: c2 * c3 * c4 * LN_2,
            d4: scale * c2 * c3 * LN_2,
            a: fit.a,
            levels: fit.levels,
            r1,
            r2,
            r3,
        }
    }

    /// `f(w)` evaluated with the literal table coefficients.
    pub fn f(&self, w: f64) -> f64 {
        let t = 2f64.powf(w * self.c3);
        self.d1 * w.powf(-self.a - 1.0) + self.d2 * w.powf(-self.a) * t - self.d3 * t
    }

    /// `f(w) / exp(1/avg_snr)`: same sign as `f`, finite for any SNR.
    pub fn f_scaled(&self, w: f64) -> f64 {
        let t = 2f64.powf(w * self.c3);
        self.r1 * w.powf(-self.a - 1.0) + self.r2 * w.powf(-self.a) * t - self.r3 * t
    }

    /// Derivative of `f`, used by the closed-form curvature.
    pub fn f_prime(&self, w: f64) -> f64 {
        let t = 2f64.powf(w * self.c3);
        -(self.a + 1.0) * self.d1 * w.powf(-self.a - 2.0)
            + self.d2 * t * (-self.a * w.powf(-self.a - 1.0) + w.powf(-self.a) * LN_2 * self.c3)
            - self.d3 * LN_2 * self.c3 * t
    }

    /// Closed-form second derivative of the continuous expected distortion.
    pub fn second_derivative(&self, w: f64) -> f64 {
        let t = 2f64.powf(w * self.c3);
        let env = (-self.c2 * t).exp();
        self.c2 * self.c3 * LN_2 * t * env * self.f(w) - env * self.f_prime(w)
    }
}

/// Sign-carrying derivative term `f(w)` of the expected distortion.
///
/// The derivative of the continuous expected distortion is
/// `-exp(-c2 2^(w c3)) f(w)`, so `f(w) > 0` means the expected distortion is
/// decreasing at `w`.
pub fn derivative_sign(w: f64, coeffs: &RdCoefficients) -> Result<f64> {
    if !(1.0..=f64::from(coeffs.levels)).contains(&w) {
        return Err(Error::ContinuousLevelOutOfRange {
            w,
            max: coeffs.levels,
        });
    }
    Ok(coeffs.f(w))
}

/// Point where the source distortion crosses the floor:
/// `w_g = m (b / (b + D_fl))^(1/a)`. The unconstrained minimizer always lies
/// at or above it, which seeds the restricted search.
pub fn crossing_level(fit: &SourceFit) -> f64 {
    f64::from(fit.levels) * (fit.b / (fit.b + fit.max_distortion)).powf(1.0 / fit.a)
}

/// Unconstrained minimizer of the expected distortion over `{1..m}`.
///
/// Case split on the sign of `f` at the interval ends: `f` is decreasing on
/// `[1, m]` when `l0 <= s`, so it changes sign at most once. Positive
/// throughout means the expected distortion keeps falling and compression is
/// pointless; negative throughout means the channel is too weak for anything
/// but the strongest compression; otherwise a binary search seeded at the
/// crossing level brackets the unique interior sign change and the two
/// neighboring integers are compared directly.
pub fn solve_k_r(fit: &SourceFit, link: &LinkModel) -> Result<u32> {
    fit.validate()?;
    link.validate()?;
    if fit.payload_bits > fit.slot_bits {
        return Err(Error::UnsupportedConfig(format!(
            "solve_k_r requires l0 <= s, got l0 = {} > s = {}",
            fit.payload_bits, fit.slot_bits
        )));
    }
    let coeffs = RdCoefficients::new(fit, link);
    let m = fit.levels;
    if coeffs.f_scaled(1.0) <= 0.0 {
        // expected distortion non-decreasing on the whole interval
        return Ok(1);
    }
    if coeffs.f_scaled(f64::from(m)) >= 0.0 {
        // still decreasing at m: no compression is best
        return Ok(m);
    }
    // Interior sign change; seed the bracket at the crossing level.
    let mut lo = (crossing_level(fit).floor() as i64).clamp(1, i64::from(m) - 1) as u32;
    if coeffs.f_scaled(f64::from(lo)) <= 0.0 {
        lo = 1;
    }
    let mut hi = m;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if coeffs.f_scaled(f64::from(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ed_lo = expected_distortion(lo, fit, link)?;
    let ed_hi = expected_distortion(hi, fit, link)?;
    // ties break toward the smaller (cheaper) level
    Ok(if ed_lo <= ed_hi { lo } else { hi })
}

/// Continuous unconstrained minimizer `w* in [1, m]`, by bisection on `f`.
pub fn continuous_k_r(fit: &SourceFit, link: &LinkModel) -> Result<f64> {
    fit.validate()?;
    link.validate()?;
    if fit.payload_bits > fit.slot_bits {
        return Err(Error::UnsupportedConfig(
            "continuous_k_r requires l0 <= s".into(),
        ));
    }
    let coeffs = RdCoefficients::new(fit, link);
    let m = f64::from(fit.levels);
    if coeffs.f_scaled(1.0) <= 0.0 {
        return Ok(1.0);
    }
    if coeffs.f_scaled(m) >= 0.0 {
        return Ok(m);
    }
    let (mut lo, mut hi) = (1.0, m);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if coeffs.f_scaled(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest affordable compression level in `{1..m-1}` under budget `u`
/// (in energy quanta); 0 when no allocation or nothing affordable.
pub fn solve_k_e(budget: u32, energy: &EnergyModel) -> u32 {
    if budget == 0 {
        return 0;
    }
    let m = energy.levels();
    // consumption is non-decreasing on {1..m-1}; scan from the top
    for k in (1..m).rev() {
        if energy.total_energy_quanta(k).expect("k in range") <= budget {
            return k;
        }
    }
    0
}

/// Result of the budget-constrained rate-distortion optimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdSolution {
    /// Chosen compression level; 0 means the packet is dropped.
    pub level: u32,
    /// Coding rate of the chosen level, bits per channel symbol.
    pub rate: f64,
    /// Expected distortion at the receiver for the chosen level.
    pub expected_distortion: f64,
    /// Whether the budget covers at least one transmission.
    pub energy_feasible: bool,
}

/// Optimal compression level under an energy budget of `u` quanta.
pub fn solve_k_star(
    budget: u32,
    fit: &SourceFit,
    link: &LinkModel,
    energy: &EnergyModel,
) -> Result<RdSolution> {
    let problem = RdProblem::new(fit.clone(), link.clone(), energy.clone())?;
    Ok(problem.solution_for_budget(budget))
}

/// Precomputed inner-problem state: coefficients, the unconstrained optimum
/// and the per-level expected distortion table.
#[derive(Debug, Clone)]
pub struct RdProblem {
    pub fit: SourceFit,
    pub link: LinkModel,
    pub energy: EnergyModel,
    pub gamma_bar: f64,
    pub coefficients: RdCoefficients,
    pub k_r_star: u32,
    distortion_table: Vec<f64>,
}

impl RdProblem {
    pub fn new(fit: SourceFit, link: LinkModel, energy: EnergyModel) -> Result<Self> {
        fit.validate()?;
        link.validate()?;
        let k_r_star = solve_k_r(&fit, &link)?;
        let gamma_bar = avg_snr(&link);
        let coefficients = RdCoefficients::new(&fit, &link);
        let distortion_table = (0..=fit.levels)
            .map(|k| expected_distortion(k, &fit, &link))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fit,
            link,
            energy,
            gamma_bar,
            coefficients,
            k_r_star,
            distortion_table,
        })
    }

    /// Expected distortion of transmitting at `level` (table lookup).
    pub fn expected_distortion_at(&self, level: u32) -> f64 {
        self.distortion_table[level as usize]
    }

    /// Solves the budget-constrained problem for `budget` quanta.
    ///
    /// Follows the unconstrained/affordable split, with two guards that keep
    /// the result the true constrained argmin over `{0..m}`: the uncompressed
    /// packet (the cheapest transmission) competes with the budget-limited
    /// level, and any choice whose expected distortion reaches the floor is
    /// replaced by dropping.
    pub fn solution_for_budget(&self, budget: u32) -> RdSolution {
        let m = self.fit.levels;
        let e_min = self.energy.e_min();
        if budget < e_min {
            return self.solution_at(0, false);
        }
        let level = if self.k_r_star == m {
            m
        } else {
            let k_e = solve_k_e(budget, &self.energy);
            let interior = k_e.min(self.k_r_star);
            if interior == 0 {
                m
            } else if self.expected_distortion_at(interior) <= self.expected_distortion_at(m) {
                interior
            } else {
                m
            }
        };
        if self.expected_distortion_at(level) >= self.fit.max_distortion {
            // dropping achieves the floor exactly; ties prefer k = 0
            return self.solution_at(0, true);
        }
        self.solution_at(level, true)
    }

    fn solution_at(&self, level: u32, energy_feasible: bool) -> RdSolution {
        RdSolution {
            level,
            rate: self.fit.rate(level),
            expected_distortion: self.expected_distortion_at(level),
            energy_feasible,
        }
    }

    /// Expected-distortion cost and chosen level for every budget `0..=max_budget`.
    pub fn budget_tables(&self, max_budget: u32) -> (Vec<f64>, Vec<u32>) {
        let mut cost = Vec::with_capacity(max_budget as usize + 1);
        let mut level = Vec::with_capacity(max_budget as usize + 1);
        for u in 0..=max_budget {
            let sol = self.solution_for_budget(u);
            cost.push(sol.expected_distortion);
            level.push(sol.level);
        }
        (cost, level)
    }
}
