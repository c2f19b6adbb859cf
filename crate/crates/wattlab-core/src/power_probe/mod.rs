//! Relative-power measurement over pluggable sample sources.
//!
//! The procedure has four steps: measure the base system power with no
//! workload running (median of the baseline trace), measure the absolute
//! program power (time-weighted mean while the workload runs), subtract to
//! get the relative power, and multiply by the running time to get the
//! relative energy. The median is used for the baseline because idle power
//! is stable with occasional spikes; the mean is used for the workload
//! because energy is the integral of power.

mod source;

pub use source::{run_measured, trace_to_csv, CounterSource, PowerSource, ReplaySource};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("trace `{trace}` has {got} samples; at least 2 are required")]
    InsufficientData { trace: String, got: usize },
    #[error("trace `{trace}`: timestamps must be strictly increasing (sample {index})")]
    NonMonotonicTime { trace: String, index: usize },
    #[error("trace `{trace}`: cumulative energy decreases at sample {index}; counter traces must be wraparound-corrected")]
    DecreasingCounter { trace: String, index: usize },
    #[error("trace `{trace}`: mixes energy-counter and instantaneous-power samples")]
    MixedKinds { trace: String },
    #[error("power source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("source read failed mid-run after {collected} samples: {message}")]
    PartialTrace {
        collected: usize,
        message: String,
        /// Samples gathered before the failure.
        samples: Vec<PowerSample>,
    },
    #[error("replay file {path}: line {line}: {message}")]
    BadReplayFile {
        path: String,
        line: usize,
        message: String,
    },
    #[error("running time must be positive, got {0}")]
    NonPositiveRunningTime(f64),
}

/// One reading from a power source, tagged by what the source reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSample {
    /// Monotonic time in seconds.
    pub timestamp_s: f64,
    pub value: SampleValue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleValue {
    /// Cumulative energy counter in microjoules, already unwrapped.
    CumulativeEnergyUj(f64),
    /// Instantaneous power in watts.
    InstantPowerW(f64),
}

impl SampleValue {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SampleValue::CumulativeEnergyUj(_) => "energy_uj",
            SampleValue::InstantPowerW(_) => "power_w",
        }
    }
}

/// An ordered series of samples from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    pub source_name: String,
    pub samples: Vec<PowerSample>,
    pub sampling_interval_s: f64,
}

/// Default sampler period: well above counter update granularity, low
/// overhead.
pub const DEFAULT_SAMPLING_INTERVAL_S: f64 = 0.1;

impl PowerTrace {
    /// Validates monotonic timestamps, homogeneous sample kinds and
    /// non-decreasing counters.
    pub fn new(
        source_name: impl Into<String>,
        samples: Vec<PowerSample>,
        sampling_interval_s: f64,
    ) -> Result<Self, ProbeError> {
        let name = source_name.into();
        let mut kind: Option<&'static str> = None;
        for (i, pair) in samples.windows(2).enumerate() {
            if pair[1].timestamp_s <= pair[0].timestamp_s {
                return Err(ProbeError::NonMonotonicTime {
                    trace: name,
                    index: i + 1,
                });
            }
            if let (SampleValue::CumulativeEnergyUj(a), SampleValue::CumulativeEnergyUj(b)) =
                (pair[0].value, pair[1].value)
            {
                if b < a {
                    return Err(ProbeError::DecreasingCounter {
                        trace: name,
                        index: i + 1,
                    });
                }
            }
        }
        for s in &samples {
            let k = s.value.kind_name();
            match kind {
                None => kind = Some(k),
                Some(prev) if prev != k => {
                    return Err(ProbeError::MixedKinds { trace: name });
                }
                _ => {}
            }
        }
        Ok(PowerTrace {
            source_name: name,
            samples,
            sampling_interval_s,
        })
    }

    pub fn span_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.timestamp_s - a.timestamp_s,
            _ => 0.0,
        }
    }

    fn require_samples(&self) -> Result<(), ProbeError> {
        if self.samples.len() < 2 {
            return Err(ProbeError::InsufficientData {
                trace: self.source_name.clone(),
                got: self.samples.len(),
            });
        }
        Ok(())
    }

    fn is_counter(&self) -> bool {
        matches!(
            self.samples.first().map(|s| s.value),
            Some(SampleValue::CumulativeEnergyUj(_))
        )
    }

    /// Per-interval powers: `delta_E / delta_t` between consecutive counter
    /// samples, or the raw sample values for an instantaneous-power trace.
    pub fn interval_powers_w(&self) -> Result<Vec<f64>, ProbeError> {
        self.require_samples()?;
        if self.is_counter() {
            Ok(self
                .samples
                .windows(2)
                .map(|pair| {
                    let (a, b) = (pair[0], pair[1]);
                    let (ea, eb) = match (a.value, b.value) {
                        (
                            SampleValue::CumulativeEnergyUj(ea),
                            SampleValue::CumulativeEnergyUj(eb),
                        ) => (ea, eb),
                        _ => unreachable!("trace kinds are homogeneous"),
                    };
                    (eb - ea) * 1e-6 / (b.timestamp_s - a.timestamp_s)
                })
                .collect())
        } else {
            Ok(self
                .samples
                .iter()
                .map(|s| match s.value {
                    SampleValue::InstantPowerW(w) => w,
                    _ => unreachable!(),
                })
                .collect())
        }
    }

    /// Energy under the trace in joules: exact counter delta for counter
    /// traces, trapezoidal integration for power traces.
    pub fn energy_j(&self) -> Result<f64, ProbeError> {
        self.require_samples()?;
        if self.is_counter() {
            let first = self.samples.first().unwrap();
            let last = self.samples.last().unwrap();
            match (first.value, last.value) {
                (SampleValue::CumulativeEnergyUj(a), SampleValue::CumulativeEnergyUj(b)) => {
                    Ok((b - a) * 1e-6)
                }
                _ => unreachable!(),
            }
        } else {
            let mut joules = 0.0;
            for pair in self.samples.windows(2) {
                let (pa, pb) = match (pair[0].value, pair[1].value) {
                    (SampleValue::InstantPowerW(a), SampleValue::InstantPowerW(b)) => (a, b),
                    _ => unreachable!(),
                };
                joules += 0.5 * (pa + pb) * (pair[1].timestamp_s - pair[0].timestamp_s);
            }
            Ok(joules)
        }
    }

    /// Time-weighted mean power over the trace span.
    pub fn mean_power_w(&self) -> Result<f64, ProbeError> {
        self.require_samples()?;
        let span = self.span_s();
        if span <= 0.0 {
            return Err(ProbeError::NonPositiveRunningTime(span));
        }
        Ok(self.energy_j()? / span)
    }
}

/// Step 1 of the measurement procedure: the median of the per-interval
/// powers of a baseline trace.
pub fn base_power(trace: &PowerTrace) -> Result<f64, ProbeError> {
    let mut powers = trace.interval_powers_w()?;
    powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = powers.len();
    Ok(if n % 2 == 1 {
        powers[n / 2]
    } else {
        0.5 * (powers[n / 2 - 1] + powers[n / 2])
    })
}

/// Steps 1–4 combined: base power, absolute program power, their
/// difference, and the relative energy over the running time.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelativeEnergyReport {
    pub base_power_w: f64,
    pub absolute_power_w: f64,
    pub relative_power_w: f64,
    pub running_time_s: f64,
    pub relative_energy_j: f64,
    /// Set when the workload power fell below the baseline, which signals
    /// baseline drift; the negative result is reported, not clamped.
    pub drift_warning: bool,
}

/// Compute the relative-energy report from a baseline trace and a workload
/// trace.
pub fn relative_energy(
    baseline: &PowerTrace,
    workload: &PowerTrace,
    running_time_s: f64,
) -> Result<RelativeEnergyReport, ProbeError> {
    if running_time_s <= 0.0 {
        return Err(ProbeError::NonPositiveRunningTime(running_time_s));
    }
    let base = base_power(baseline)?;
    let absolute = workload.mean_power_w()?;
    let relative = absolute - base;
    Ok(RelativeEnergyReport {
        base_power_w: base,
        absolute_power_w: absolute,
        relative_power_w: relative,
        running_time_s,
        relative_energy_j: relative * running_time_s,
        drift_warning: relative < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power_trace(powers: &[f64]) -> PowerTrace {
        let samples = powers
            .iter()
            .enumerate()
            .map(|(i, &w)| PowerSample {
                timestamp_s: i as f64,
                value: SampleValue::InstantPowerW(w),
            })
            .collect();
        PowerTrace::new("test", samples, 1.0).unwrap()
    }

    fn counter_trace(uj: &[f64]) -> PowerTrace {
        let samples = uj
            .iter()
            .enumerate()
            .map(|(i, &e)| PowerSample {
                timestamp_s: i as f64,
                value: SampleValue::CumulativeEnergyUj(e),
            })
            .collect();
        PowerTrace::new("counter", samples, 1.0).unwrap()
    }

    #[test]
    fn base_power_constant_trace() {
        assert_eq!(base_power(&power_trace(&[10.0, 10.0, 10.0])).unwrap(), 10.0);
    }

    #[test]
    fn base_power_is_median_robust_to_spike() {
        assert_eq!(base_power(&power_trace(&[8.0, 10.0, 100.0])).unwrap(), 10.0);
    }

    #[test]
    fn base_power_counter_trace() {
        // 0, 1e6, 2e6 uJ at 1 s spacing -> 1 W per interval.
        assert_eq!(base_power(&counter_trace(&[0.0, 1e6, 2e6])).unwrap(), 1.0);
    }

    #[test]
    fn base_power_permutation_invariant() {
        let a = base_power(&power_trace(&[8.0, 12.0, 10.0, 9.0])).unwrap();
        let b = base_power(&power_trace(&[12.0, 9.0, 8.0, 10.0])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_samples_rejected() {
        let t = power_trace(&[5.0]);
        assert!(matches!(
            base_power(&t),
            Err(ProbeError::InsufficientData { .. })
        ));
    }

    #[test]
    fn relative_energy_report_identities() {
        let baseline = power_trace(&[10.0, 10.0, 10.0]);
        let workload = power_trace(&[25.0, 25.0, 25.0]);
        let r = relative_energy(&baseline, &workload, 60.0).unwrap();
        assert_eq!(r.base_power_w, 10.0);
        assert_eq!(r.absolute_power_w, 25.0);
        assert_eq!(r.relative_power_w, 15.0);
        assert_eq!(r.relative_energy_j, 900.0);
        assert!(!r.drift_warning);
        // Identities hold exactly.
        assert_eq!(r.relative_power_w, r.absolute_power_w - r.base_power_w);
        assert_eq!(r.relative_energy_j, r.relative_power_w * r.running_time_s);
    }

    #[test]
    fn idle_workload_measures_zero() {
        let t = power_trace(&[10.0, 10.0]);
        let r = relative_energy(&t, &t, 30.0).unwrap();
        assert_eq!(r.relative_energy_j, 0.0);
    }

    #[test]
    fn drift_reported_not_clamped() {
        let baseline = power_trace(&[10.0, 10.0, 10.0]);
        let workload = power_trace(&[9.0, 9.0, 9.0]);
        let r = relative_energy(&baseline, &workload, 60.0).unwrap();
        assert_eq!(r.relative_energy_j, -60.0);
        assert!(r.drift_warning);
    }

    #[test]
    fn counter_integration_reproduces_delta() {
        // Integrating interval powers over interval lengths must give back
        // the counter delta.
        let uj = [0.0, 3.0e5, 1.1e6, 1.15e6, 4.0e6];
        let t = counter_trace(&uj);
        let powers = t.interval_powers_w().unwrap();
        let integrated: f64 = powers.iter().sum::<f64>() * 1.0; // dt = 1 s
        let delta = (uj[4] - uj[0]) * 1e-6;
        assert!((integrated - delta).abs() / delta < 1e-9);
        assert!((t.energy_j().unwrap() - delta).abs() / delta < 1e-9);
    }

    #[test]
    fn mixed_kind_trace_rejected() {
        let samples = vec![
            PowerSample {
                timestamp_s: 0.0,
                value: SampleValue::InstantPowerW(1.0),
            },
            PowerSample {
                timestamp_s: 1.0,
                value: SampleValue::CumulativeEnergyUj(5.0),
            },
        ];
        assert!(matches!(
            PowerTrace::new("bad", samples, 1.0),
            Err(ProbeError::MixedKinds { .. })
        ));
    }

    #[test]
    fn decreasing_counter_rejected() {
        let samples = vec![
            PowerSample {
                timestamp_s: 0.0,
                value: SampleValue::CumulativeEnergyUj(10.0),
            },
            PowerSample {
                timestamp_s: 1.0,
                value: SampleValue::CumulativeEnergyUj(5.0),
            },
        ];
        assert!(matches!(
            PowerTrace::new("bad", samples, 1.0),
            Err(ProbeError::DecreasingCounter { .. })
        ));
    }

    #[test]
    fn non_monotonic_time_rejected() {
        let samples = vec![
            PowerSample {
                timestamp_s: 1.0,
                value: SampleValue::InstantPowerW(1.0),
            },
            PowerSample {
                timestamp_s: 1.0,
                value: SampleValue::InstantPowerW(1.0),
            },
        ];
        assert!(matches!(
            PowerTrace::new("bad", samples, 1.0),
            Err(ProbeError::NonMonotonicTime { .. })
        ));
    }
}
