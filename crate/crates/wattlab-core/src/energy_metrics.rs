//! Computation-energy metrics, per-layer breakdowns and the
//! training/inference break-even analysis.
//!
//! Three metrics are implemented over a [`HardwareProfile`]:
//!
//! * metric 0 — FLOPs divided by throughput-per-watt (the default),
//! * metric 1 — `kappa * N * f^3 * D` with `D = W / (S * N * f)`,
//! * metric 2 — per-MAC coefficients, `E_c = M_c * (a_c / d_0 + b_c)` for
//!   convolutions and `E_f = M_f * a_f` for dense layers.
//!
//! Total energy is computation plus memory; the memory term defaults to
//! zero and is opted into with a joules-per-byte coefficient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_ir::{count_flops, count_macs, LayerKind, ModelSpec};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("profile `{profile}` is missing field `{field}` required by {metric}")]
    IncompleteProfile {
        profile: String,
        field: &'static str,
        metric: Metric,
    },
    #[error("profile `{profile}`: field `{field}` must be positive")]
    NonPositiveField { profile: String, field: &'static str },
    #[error("profile `{profile}`: peak_ops_per_sec {peak} exceeds cores*clock_hz*flops_per_clock = {bound}")]
    InconsistentThroughput {
        profile: String,
        peak: f64,
        bound: f64,
    },
    #[error("no profile named `{0}` in profile file")]
    NoSuchProfile(String),
    #[error("invalid profile JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read profile file {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] crate::model_ir::ModelError),
}

/// Which computation-energy metric produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    M0,
    M1,
    M2,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::M0, Metric::M1, Metric::M2];
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::M0 => f.write_str("m0"),
            Metric::M1 => f.write_str("m1"),
            Metric::M2 => f.write_str("m2"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "m0" | "0" => Ok(Metric::M0),
            "m1" | "1" => Ok(Metric::M1),
            "m2" | "2" => Ok(Metric::M2),
            other => Err(format!("unknown metric `{other}` (expected m0, m1 or m2)")),
        }
    }
}

/// Processor parameters feeding the energy metrics.
///
/// Every field except `name` is optional; a metric fails with an
/// incomplete-profile error if a field it needs is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    pub name: String,
    /// Peak throughput in FLOPs per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_ops_per_sec: Option<f64>,
    /// Sustained power at peak throughput, watts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_watts: Option<f64>,
    /// Core count N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cores: Option<f64>,
    /// Clock frequency f, Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clock_hz: Option<f64>,
    /// FLOPs retired per core per clock, S.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flops_per_clock: Option<f64>,
    /// Effective switched capacitance kappa, W/(core * Hz^3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Conv MAC coefficient a_c, joules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_c: Option<f64>,
    /// Conv MAC coefficient b_c, joules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_c: Option<f64>,
    /// Dense MAC coefficient a_f, joules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_f: Option<f64>,
    /// Energy per byte moved, joules; 0 disables the memory term.
    #[serde(default)]
    pub mem_energy_per_byte: f64,
}

impl HardwareProfile {
    pub fn named(name: impl Into<String>) -> Self {
        HardwareProfile {
            name: name.into(),
            peak_ops_per_sec: None,
            power_watts: None,
            cores: None,
            clock_hz: None,
            flops_per_clock: None,
            kappa: None,
            a_c: None,
            b_c: None,
            a_f: None,
            mem_energy_per_byte: 0.0,
        }
    }

    /// Field presence and positivity checks, plus the throughput bound
    /// `peak <= cores * clock * flops_per_clock` when all four are present.
    pub fn validate(&self) -> Result<(), EnergyError> {
        let fields: [(&'static str, Option<f64>); 9] = [
            ("peak_ops_per_sec", self.peak_ops_per_sec),
            ("power_watts", self.power_watts),
            ("cores", self.cores),
            ("clock_hz", self.clock_hz),
            ("flops_per_clock", self.flops_per_clock),
            ("kappa", self.kappa),
            ("a_c", self.a_c),
            ("b_c", self.b_c),
            ("a_f", self.a_f),
        ];
        for (field, value) in fields {
            if let Some(v) = value {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(EnergyError::NonPositiveField {
                        profile: self.name.clone(),
                        field,
                    });
                }
            }
        }
        if self.mem_energy_per_byte < 0.0 {
            return Err(EnergyError::NonPositiveField {
                profile: self.name.clone(),
                field: "mem_energy_per_byte",
            });
        }
        if let (Some(peak), Some(n), Some(f), Some(s)) = (
            self.peak_ops_per_sec,
            self.cores,
            self.clock_hz,
            self.flops_per_clock,
        ) {
            let bound = n * f * s;
            if peak > bound {
                return Err(EnergyError::InconsistentThroughput {
                    profile: self.name.clone(),
                    peak,
                    bound,
                });
            }
        }
        Ok(())
    }

    fn require(&self, field: &'static str, value: Option<f64>, metric: Metric) -> Result<f64, EnergyError> {
        value.ok_or_else(|| EnergyError::IncompleteProfile {
            profile: self.name.clone(),
            field,
            metric,
        })
    }
}

/// Load and validate a JSON array of hardware profiles.
pub fn parse_profiles(json: &str) -> Result<Vec<HardwareProfile>, EnergyError> {
    let profiles: Vec<HardwareProfile> = serde_json::from_str(json)?;
    for p in &profiles {
        p.validate()?;
    }
    Ok(profiles)
}

pub fn load_profiles(path: &std::path::Path) -> Result<Vec<HardwareProfile>, EnergyError> {
    let text = std::fs::read_to_string(path).map_err(|e| EnergyError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_profiles(&text)
}

/// Find a profile by name.
pub fn find_profile<'a>(
    profiles: &'a [HardwareProfile],
    name: &str,
) -> Result<&'a HardwareProfile, EnergyError> {
    profiles
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| EnergyError::NoSuchProfile(name.to_string()))
}

/// Energy attributed to one layer of a breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEnergy {
    pub layer_id: String,
    pub block_id: String,
    pub energy_j: f64,
}

/// Computation + memory energy in joules with an optional per-layer split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub metric_used: Metric,
    pub computation_j: f64,
    pub memory_j: f64,
    pub total_j: f64,
    /// Per-layer computation energies; sums to `computation_j` when filled.
    pub per_layer: Vec<LayerEnergy>,
}

impl EnergyEstimate {
    fn from_computation(metric: Metric, computation_j: f64, per_layer: Vec<LayerEnergy>) -> Self {
        EnergyEstimate {
            metric_used: metric,
            computation_j,
            memory_j: 0.0,
            total_j: computation_j,
            per_layer,
        }
    }

    /// Add the memory term of the total-energy decomposition.
    pub fn with_memory(mut self, bytes_accessed: u64, profile: &HardwareProfile) -> Self {
        self.memory_j = bytes_accessed as f64 * profile.mem_energy_per_byte;
        self.total_j = self.computation_j + self.memory_j;
        self
    }

    /// Group per-layer energies by block, preserving block order.
    pub fn block_totals(&self) -> Vec<(String, f64)> {
        let mut totals: Vec<(String, f64)> = Vec::new();
        for le in &self.per_layer {
            match totals.last_mut() {
                Some((id, j)) if *id == le.block_id => *j += le.energy_j,
                _ => totals.push((le.block_id.clone(), le.energy_j)),
            }
        }
        totals
    }
}

/// Metric (0): `flops / (throughput / power)`.
pub fn metric0_energy(flops: u64, profile: &HardwareProfile) -> Result<f64, EnergyError> {
    let peak = profile.require("peak_ops_per_sec", profile.peak_ops_per_sec, Metric::M0)?;
    let power = profile.require("power_watts", profile.power_watts, Metric::M0)?;
    Ok(flops as f64 / (peak / power))
}

/// Metric (1): `kappa * N * f^3 * D` with `D = flops / (S * N * f)`.
///
/// N cancels algebraically; it is still computed literally through `D` so
/// the formula matches its definition.
pub fn metric1_energy(flops: u64, profile: &HardwareProfile) -> Result<f64, EnergyError> {
    let kappa = profile.require("kappa", profile.kappa, Metric::M1)?;
    let cores = profile.require("cores", profile.cores, Metric::M1)?;
    let clock = profile.require("clock_hz", profile.clock_hz, Metric::M1)?;
    let s = profile.require("flops_per_clock", profile.flops_per_clock, Metric::M1)?;
    let runtime = flops as f64 / (s * cores * clock);
    Ok(kappa * cores * clock.powi(3) * runtime)
}

/// Metric (2): per-MAC coefficients with a per-layer breakdown.
///
/// Conv layers cost `M_c * (a_c / d_0 + b_c)` with `d_0` the input-feature
/// count `kernel_h * kernel_w * channels_in`; dense layers cost
/// `M_f * a_f`. Elementwise and normalization layers contribute zero.
pub fn metric2_energy(
    spec: &ModelSpec,
    profile: &HardwareProfile,
) -> Result<EnergyEstimate, EnergyError> {
    let a_c = profile.require("a_c", profile.a_c, Metric::M2)?;
    let b_c = profile.require("b_c", profile.b_c, Metric::M2)?;
    let a_f = profile.require("a_f", profile.a_f, Metric::M2)?;

    let mut per_layer = Vec::with_capacity(spec.layer_count());
    let mut computation = 0.0;
    for (block, layer) in spec.layers() {
        let energy = match layer.kind {
            LayerKind::Conv2d { .. } => {
                let macs = count_macs(layer)? as f64;
                let d0 = layer.input_features().expect("conv has input features") as f64;
                macs * (a_c / d0 + b_c)
            }
            LayerKind::Dense { .. } => count_macs(layer)? as f64 * a_f,
            LayerKind::Elementwise { .. } | LayerKind::Normalization { .. } => 0.0,
        };
        computation += energy;
        per_layer.push(LayerEnergy {
            layer_id: layer.id.clone(),
            block_id: block.block_id.clone(),
            energy_j: energy,
        });
    }
    Ok(EnergyEstimate::from_computation(Metric::M2, computation, per_layer))
}

/// Total energy as computation plus memory traffic.
pub fn total_energy(
    computation_j: f64,
    bytes_accessed: u64,
    profile: &HardwareProfile,
) -> EnergyEstimate {
    EnergyEstimate::from_computation(Metric::M0, computation_j, Vec::new())
        .with_memory(bytes_accessed, profile)
}

/// Whole-model estimate under any metric, with per-layer attribution.
///
/// Metrics 0 and 1 are defined at whole-model granularity, so their totals
/// are distributed across layers proportionally to FLOPs; metric 2 carries
/// its own per-layer model.
pub fn layerwise_breakdown(
    spec: &ModelSpec,
    profile: &HardwareProfile,
    metric: Metric,
) -> Result<EnergyEstimate, EnergyError> {
    match metric {
        Metric::M2 => metric2_energy(spec, profile),
        Metric::M0 | Metric::M1 => {
            let total_flops = spec.total_flops();
            let total = match metric {
                Metric::M0 => metric0_energy(total_flops, profile)?,
                _ => metric1_energy(total_flops, profile)?,
            };
            let mut per_layer = Vec::with_capacity(spec.layer_count());
            for (block, layer) in spec.layers() {
                let share = if total_flops == 0 {
                    0.0
                } else {
                    count_flops(layer)? as f64 / total_flops as f64
                };
                per_layer.push(LayerEnergy {
                    layer_id: layer.id.clone(),
                    block_id: block.block_id.clone(),
                    energy_j: total * share,
                });
            }
            Ok(EnergyEstimate::from_computation(metric, total, per_layer))
        }
    }
}

/// One row of the amortization table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmortizedPoint {
    pub n_inferences: u64,
    /// Training energy spread over n inferences.
    pub amortized_training_j: f64,
    /// Energy of n inferences.
    pub cumulative_inference_j: f64,
}

/// Break-even analysis between training and inference energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakEvenReport {
    pub training_energy_total_j: f64,
    pub single_inference_j: f64,
    /// Inference count at which cumulative inference energy reaches the
    /// training total.
    pub n_star: u64,
    pub inference_rate_per_sec: f64,
    pub time_to_break_even_s: f64,
    /// Sampled at decade points 10^2 .. 10^10.
    pub amortized_at: Vec<AmortizedPoint>,
}

/// Distribute training energy over inference counts and find the break-even
/// point `ceil(total / single_inference)`.
pub fn break_even(
    training_step_j: f64,
    n_training_steps: u64,
    single_inference_j: f64,
    inference_rate_per_sec: f64,
) -> BreakEvenReport {
    let total = training_step_j * n_training_steps as f64;
    let n_star = (total / single_inference_j).ceil() as u64;
    let amortized_at = (2..=10)
        .map(|exp| {
            let n = 10u64.pow(exp);
            AmortizedPoint {
                n_inferences: n,
                amortized_training_j: total / n as f64,
                cumulative_inference_j: single_inference_j * n as f64,
            }
        })
        .collect();
    BreakEvenReport {
        training_energy_total_j: total,
        single_inference_j,
        n_star,
        inference_rate_per_sec,
        time_to_break_even_s: n_star as f64 / inference_rate_per_sec,
        amortized_at,
    }
}
