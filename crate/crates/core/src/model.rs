//! Physical offloading-delay model.
//!
//! All quantities are SI: bits, Hz, watts, seconds and meters. Gains are
//! linear; convert decibel values with [`db_to_linear`] before building
//! [`RadioParams`].

use crate::error::{Error, Result};

/// Path-loss constant of the synthetic scenario, -17.8 dB.
pub const SYNTHETIC_PATHLOSS_DB: f64 = -17.8;

pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Transmitter and channel parameters shared by every link of the task vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub tx_power_watts: f64,
    pub bandwidth_hz: f64,
    pub noise_watts: f64,
    /// Linear path-loss constant of the inverse square law.
    pub pathloss_const: f64,
    pub interference_up_watts: f64,
    pub interference_down_watts: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.tx_power_watts,
            self.bandwidth_hz,
            self.noise_watts,
            self.pathloss_const,
            self.interference_up_watts,
            self.interference_down_watts,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("radio parameters must be finite and non-negative"));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::Domain("bandwidth must be positive"));
        }
        if self.noise_watts <= 0.0 {
            return Err(Error::Domain("noise power must be positive"));
        }
        Ok(())
    }
}

impl Default for RadioParams {
    /// 0.1 W transmit power, 10 MHz, 1e-13 W noise, -17.8 dB path-loss
    /// constant and no interference.
    fn default() -> Self {
        Self {
            tx_power_watts: 0.1,
            bandwidth_hz: 10e6,
            noise_watts: 1e-13,
            pathloss_const: db_to_linear(SYNTHETIC_PATHLOSS_DB),
            interference_up_watts: 0.0,
            interference_down_watts: 0.0,
        }
    }
}

/// Workload of the task generated in one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub input_bits: f64,
    /// Output volume divided by input volume.
    pub output_ratio: f64,
    pub intensity_cycles_per_bit: f64,
}

impl Task {
    pub fn new(input_bits: f64, output_ratio: f64, intensity_cycles_per_bit: f64) -> Result<Self> {
        let task = Self {
            input_bits,
            output_ratio,
            intensity_cycles_per_bit,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.input_bits > 0.0 && self.input_bits.is_finite()) {
            return Err(Error::Domain("input size must be positive"));
        }
        if !(self.output_ratio >= 0.0 && self.output_ratio.is_finite()) {
            return Err(Error::Domain("output ratio must be non-negative"));
        }
        if !(self.intensity_cycles_per_bit > 0.0 && self.intensity_cycles_per_bit.is_finite()) {
            return Err(Error::Domain("computation intensity must be positive"));
        }
        Ok(())
    }

    pub fn output_bits(&self) -> f64 {
        self.output_ratio * self.input_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub distance_m: f64,
    pub channel_gain_up: f64,
    pub channel_gain_down: f64,
}

impl LinkState {
    /// Reciprocal channel: both directions get the inverse-square gain.
    pub fn reciprocal(distance_m: f64, pathloss_const: f64) -> Result<Self> {
        let gain = pathloss_gain(distance_m, pathloss_const)?;
        Ok(Self {
            distance_m,
            channel_gain_up: gain,
            channel_gain_down: gain,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComputeState {
    pub max_cpu_hz: f64,
    pub alloc_cpu_hz: f64,
}

impl ComputeState {
    pub fn validate(&self) -> Result<()> {
        if !(self.alloc_cpu_hz > 0.0) {
            return Err(Error::NoResource);
        }
        if self.alloc_cpu_hz > self.max_cpu_hz {
            return Err(Error::Domain("allocated CPU frequency exceeds the maximum"));
        }
        Ok(())
    }
}

/// Inverse-square path loss `A0 * l^-2`.
pub fn pathloss_gain(distance_m: f64, pathloss_const: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain("distance must be positive"));
    }
    Ok(pathloss_const / (distance_m * distance_m))
}

fn shannon_rate(radio: &RadioParams, gain: f64, interference: f64) -> f64 {
    let sinr = radio.tx_power_watts * gain / (radio.noise_watts + interference);
    radio.bandwidth_hz * libm::log2(1.0 + sinr)
}

pub fn uplink_rate(radio: &RadioParams, gain_up: f64) -> f64 {
    shannon_rate(radio, gain_up, radio.interference_up_watts)
}

pub fn downlink_rate(radio: &RadioParams, gain_down: f64) -> f64 {
    shannon_rate(radio, gain_down, radio.interference_down_watts)
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 {
        Ok(())
    } else {
        Err(Error::UnreachableLink)
    }
}

pub fn upload_delay(task: &Task, rate_up: f64) -> Result<f64> {
    check_rate(rate_up)?;
    Ok(task.input_bits / rate_up)
}

pub fn compute_delay(task: &Task, compute: &ComputeState) -> Result<f64> {
    if !(compute.alloc_cpu_hz > 0.0) {
        return Err(Error::NoResource);
    }
    Ok(task.input_bits * task.intensity_cycles_per_bit / compute.alloc_cpu_hz)
}

pub fn download_delay(task: &Task, rate_down: f64) -> Result<f64> {
    check_rate(rate_down)?;
    Ok(task.output_bits() / rate_down)
}

/// End-to-end delay: upload, then execution, then result feedback.
pub fn sum_delay(task: &Task, rate_up: f64, rate_down: f64, compute: &ComputeState) -> Result<f64> {
    Ok(upload_delay(task, rate_up)? + compute_delay(task, compute)? + download_delay(task, rate_down)?)
}

/// Delay of offloading a single input bit. `sum_delay` equals
/// `input_bits * bit_offload_delay` for every valid input.
pub fn bit_offload_delay(task: &Task, rate_up: f64, rate_down: f64, compute: &ComputeState) -> Result<f64> {
    check_rate(rate_up)?;
    check_rate(rate_down)?;
    if !(compute.alloc_cpu_hz > 0.0) {
        return Err(Error::NoResource);
    }
    Ok(1.0 / rate_up + task.output_ratio / rate_down + task.intensity_cycles_per_bit / compute.alloc_cpu_hz)
}

/// Bit offloading delay of a service vehicle at `distance_m` running the
/// task at `alloc_cpu_hz`, with a reciprocal channel.
pub fn bit_delay_at(
    radio: &RadioParams,
    task: &Task,
    distance_m: f64,
    compute: &ComputeState,
) -> Result<f64> {
    let link = LinkState::reciprocal(distance_m, radio.pathloss_const)?;
    let up = uplink_rate(radio, link.channel_gain_up);
    let down = downlink_rate(radio, link.channel_gain_down);
    bit_offload_delay(task, up, down, compute)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radio(interference: f64) -> RadioParams {
        RadioParams {
            tx_power_watts: 0.1,
            bandwidth_hz: 1e7,
            noise_watts: 1e-13,
            pathloss_const: 0.016596,
            interference_up_watts: interference,
            interference_down_watts: interference,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn pathloss_examples() {
        let a0 = libm::pow(10.0, -1.78);
        assert!(rel(a0, 0.016596) < 1e-4);
        assert!(rel(pathloss_gain(100.0, a0).unwrap(), 1.6596e-6) < 1e-4);
        assert_eq!(pathloss_gain(1.0, 0.016596).unwrap(), 0.016596);
        assert!(rel(pathloss_gain(200.0, 0.016596).unwrap(), 4.149e-7) < 1e-4);
        assert_eq!(pathloss_gain(0.0, a0), Err(Error::Domain("distance must be positive")));
        assert!(pathloss_gain(-3.0, a0).is_err());
        assert!(rel(RadioParams::default().pathloss_const, a0) < 1e-15);
    }

    #[test]
    fn rate_examples() {
        let r = radio(0.0);
        // 1e7 * log2(1 + 0.1 * 1.6596e-6 / 1e-13) = 1e7 * log2(1 + 1.6596e6)
        assert!(rel(uplink_rate(&r, 1.6596e-6), 2.066e8) < 1e-3);
        assert_eq!(uplink_rate(&r, 0.0), 0.0);
        assert_eq!(downlink_rate(&r, 0.0), 0.0);
        assert_eq!(downlink_rate(&r, 1.6596e-6), uplink_rate(&r, 1.6596e-6));
        let noisy = radio(9e-13);
        assert!(rel(uplink_rate(&noisy, 1e-12), 1.375e6) < 1e-3);
        let far = downlink_rate(&r, 4.149e-7);
        assert!(rel(far, 1.87e8) < 5e-3, "{far}");
    }

    #[test]
    fn delay_examples() {
        let t = Task::new(1e6, 0.0, 1000.0).unwrap();
        assert!(rel(upload_delay(&t, 2.066e8).unwrap(), 4.84e-3) < 1e-3);
        assert_eq!(upload_delay(&t, 1e6).unwrap(), 1.0);
        let small = Task::new(2e5, 0.0, 1000.0).unwrap();
        assert!(rel(upload_delay(&small, 1e6).unwrap(), 0.2) < 1e-12);
        assert_eq!(upload_delay(&t, 0.0), Err(Error::UnreachableLink));

        let c = ComputeState { max_cpu_hz: 5e9, alloc_cpu_hz: 1.5e9 };
        assert!(rel(compute_delay(&t, &c).unwrap(), 0.6667) < 1e-4);
        let exact = ComputeState { max_cpu_hz: 1e9, alloc_cpu_hz: 1e9 };
        assert_eq!(compute_delay(&t, &exact).unwrap(), 1.0);
        let c2 = ComputeState { max_cpu_hz: 5e9, alloc_cpu_hz: 2e9 };
        assert!(rel(compute_delay(&small, &c2).unwrap(), 0.1) < 1e-12);
        let none = ComputeState { max_cpu_hz: 5e9, alloc_cpu_hz: 0.0 };
        assert_eq!(compute_delay(&t, &none), Err(Error::NoResource));

        assert_eq!(download_delay(&t, 1e8).unwrap(), 0.0);
        let ones = Task::new(1e6, 1.0, 1000.0).unwrap();
        assert_eq!(download_delay(&ones, 1e6).unwrap(), 1.0);
        let tenth = Task::new(1e6, 0.1, 1000.0).unwrap();
        assert!(rel(download_delay(&tenth, 1e8).unwrap(), 1e-3) < 1e-12);
        assert_eq!(download_delay(&tenth, 0.0), Err(Error::UnreachableLink));
    }

    #[test]
    fn sum_and_bit_delay_examples() {
        let t = Task::new(1e6, 0.0, 1000.0).unwrap();
        let c = ComputeState { max_cpu_hz: 5e9, alloc_cpu_hz: 1.5e9 };
        let s = sum_delay(&t, 2.066e8, 1e8, &c).unwrap();
        assert_eq!(s, 1e6 / 2.066e8 + 1e9 / 1.5e9);
        // 0.00484 + 0.667 + 0 with the components rounded as above.
        assert!((s - 0.6718).abs() < 5e-4, "{s}");

        let unit = ComputeState { max_cpu_hz: 1e9, alloc_cpu_hz: 1e9 };
        let s = sum_delay(&t, 1e300, 1e300, &unit).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        let b = bit_offload_delay(&t, 2.066e8, 1e8, &c).unwrap();
        assert!(rel(b, 6.715e-7) < 1e-3, "{b}");
        let b = bit_offload_delay(&t, 1e300, 1e300, &c).unwrap();
        assert!(rel(b, 1000.0 / 1.5e9) < 1e-12);
        let ones = Task::new(1e6, 1.0, 1000.0).unwrap();
        let b = bit_offload_delay(&ones, 1e8, 1e8, &unit).unwrap();
        assert!(rel(b, 1.02e-6) < 1e-12);
        assert_eq!(bit_offload_delay(&t, 0.0, 1e8, &c), Err(Error::UnreachableLink));
    }

    #[test]
    fn task_and_radio_validation() {
        assert!(Task::new(0.0, 0.0, 1000.0).is_err());
        assert!(Task::new(1.0, -0.1, 1000.0).is_err());
        assert!(Task::new(1.0, 0.0, 0.0).is_err());
        assert!(RadioParams::default().validate().is_ok());
        let quiet = RadioParams {
            noise_watts: 0.0,
            ..RadioParams::default()
        };
        assert!(quiet.validate().is_err());
        let negative = RadioParams {
            tx_power_watts: -1.0,
            ..RadioParams::default()
        };
        assert!(negative.validate().is_err());
        let c = ComputeState { max_cpu_hz: 1e9, alloc_cpu_hz: 2e9 };
        assert!(c.validate().is_err());
    }
}
