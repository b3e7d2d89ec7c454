//! Flat `key = value` simulator configuration.
//!
//! Blank lines and text after `#` are ignored. Keys are namespaced by dots;
//! unknown or repeated keys are rejected, and every value is re-validated by
//! building the model objects it feeds.

use std::fmt;
use std::str::FromStr;

use twinbeam_core::atomic::VaporPressureFit;
use twinbeam_core::atomic::{AtomicLine, CellConditions, LightShiftModel, VaporModel};
use twinbeam_core::detection::McConfig;
use twinbeam_core::fock::OracleConfig;
use twinbeam_core::gain::{
    calibrate, GainAnchor, GainCalibration, GainMode, PumpConfig, TransitionProfile,
};
use twinbeam_core::stats::linspace;
use twinbeam_core::sweep::{PeakConfig, SweepConfig, SweepModel};
use twinbeam_core::{DetectionModel, SeedState};

use crate::error::CliError;

/// Inclusive `start:stop:n` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.n)
    }
}

impl FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [start, stop, n] = parts[..] else {
            return Err(CliError::Domain(format!(
                "grid '{s}' must have the form start:stop:n"
            )));
        };
        let start = parse_f64(start)?;
        let stop = parse_f64(stop)?;
        let n: usize = n
            .parse()
            .map_err(|_| CliError::Domain(format!("grid count '{n}' is not an integer")))?;
        if n == 0 {
            return Err(CliError::Domain("grid needs at least one point".into()));
        }
        if stop < start {
            return Err(CliError::Domain(format!(
                "grid stop {stop} is below start {start}"
            )));
        }
        Ok(Self { start, stop, n })
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.n)
    }
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Domain(format!("'{s}' is not a finite number"))),
    }
}

fn parse_bool(s: &str) -> Result<bool, CliError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Domain(format!("'{s}' is not true or false"))),
    }
}

fn parse_int<T: FromStr>(s: &str) -> Result<T, CliError> {
    s.parse()
        .map_err(|_| CliError::Domain(format!("'{s}' is not a non-negative integer")))
}

/// Calibration target: a pump setting and cell temperature with a measured gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSettings {
    pub detuning: f64,
    pub power: f64,
    pub temperature: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatorConfig {
    pub temperature: f64,
    pub cell_length: f64,
    pub vapor_a: f64,
    pub vapor_b: f64,
    pub cross_section: f64,
    pub light_shift_enabled: bool,
    pub light_shift_coefficient: Option<f64>,
    pub light_shift_max_variation: f64,
    pub light_shift_grid: Grid,

    pub gain_mode: GainMode,
    pub pump_power: f64,
    pub pump_waist: f64,
    pub pump_detuning: f64,
    pub width31_red: f64,
    pub width31_blue: f64,
    pub width32_red: f64,
    pub width32_blue: f64,
    pub od_exponent: f64,
    pub reference_temperature: f64,
    pub calibrate: bool,
    pub coupling: f64,
    pub weight31: f64,
    pub weight32: f64,
    pub anchors: [AnchorSettings; 2],

    pub sweep: SweepConfig,
    pub peak: PeakConfig,

    pub mc: McConfig,
    pub mu: f64,
    pub eta: f64,

    pub oracle: OracleConfig,
    pub oracle_dims: Option<(usize, usize)>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        let template = GainCalibration::default();
        let fit = VaporPressureFit::default();
        let vapor = VaporModel::default();
        Self {
            temperature: 383.15,
            cell_length: 0.01,
            vapor_a: fit.a,
            vapor_b: fit.b,
            cross_section: vapor.cross_section,
            light_shift_enabled: false,
            light_shift_coefficient: None,
            light_shift_max_variation: 0.1,
            light_shift_grid: Grid {
                start: -3e9,
                stop: 3e9,
                n: 50,
            },
            gain_mode: GainMode::SqrtCoupling,
            pump_power: 0.110,
            pump_waist: 200e-6,
            pump_detuning: -2.4e9,
            width31_red: template.profile31.width_neg,
            width31_blue: template.profile31.width_pos,
            width32_red: template.profile32.width_neg,
            width32_blue: template.profile32.width_pos,
            od_exponent: template.od_exponent,
            reference_temperature: template.reference_temperature,
            calibrate: true,
            coupling: template.coupling,
            weight31: template.profile31.weight,
            weight32: template.profile32.weight,
            anchors: [
                AnchorSettings {
                    detuning: -2.4e9,
                    power: 0.110,
                    temperature: 383.15,
                    gain: 5.6,
                },
                AnchorSettings {
                    detuning: 1.8e9,
                    power: 0.110,
                    temperature: 383.15,
                    gain: 3.1,
                },
            ],
            sweep: SweepConfig::default(),
            peak: PeakConfig::default(),
            mc: McConfig::default(),
            mu: 1e4,
            eta: 1.0,
            oracle: OracleConfig::default(),
            oracle_dims: None,
        }
    }
}

impl SimulatorConfig {
    /// Parses config text on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Domain(format!(
                    "config line {}: expected 'key = value'",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(CliError::Domain(format!(
                    "config line {}: key '{key}' given twice",
                    lineno + 1
                )));
            }
            cfg.set(key, value).map_err(|e| match e {
                CliError::Domain(msg) => {
                    CliError::Domain(format!("config line {} ({key}): {msg}", lineno + 1))
                }
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "atomic.temperature_k" => self.temperature = parse_f64(v)?,
            "atomic.cell_length_m" => self.cell_length = parse_f64(v)?,
            "atomic.vapor_a" => self.vapor_a = parse_f64(v)?,
            "atomic.vapor_b_k" => self.vapor_b = parse_f64(v)?,
            "atomic.cross_section" => self.cross_section = parse_f64(v)?,
            "atomic.light_shift.enabled" => self.light_shift_enabled = parse_bool(v)?,
            "atomic.light_shift.coefficient" => self.light_shift_coefficient = Some(parse_f64(v)?),
            "atomic.light_shift.max_variation" => self.light_shift_max_variation = parse_f64(v)?,
            "atomic.light_shift.calibration_grid" => self.light_shift_grid = v.parse()?,

            "gain.mode" => self.gain_mode = v.parse()?,
            "gain.pump_power_w" => self.pump_power = parse_f64(v)?,
            "gain.pump_waist_m" => self.pump_waist = parse_f64(v)?,
            "gain.pump_detuning_hz" => self.pump_detuning = parse_f64(v)?,
            "gain.width31_red_hz" => self.width31_red = parse_f64(v)?,
            "gain.width31_blue_hz" => self.width31_blue = parse_f64(v)?,
            "gain.width32_red_hz" => self.width32_red = parse_f64(v)?,
            "gain.width32_blue_hz" => self.width32_blue = parse_f64(v)?,
            "gain.od_exponent" => self.od_exponent = parse_f64(v)?,
            "gain.reference_temperature_k" => self.reference_temperature = parse_f64(v)?,
            "gain.calibrate" => self.calibrate = parse_bool(v)?,
            "gain.coupling" => self.coupling = parse_f64(v)?,
            "gain.weight31" => self.weight31 = parse_f64(v)?,
            "gain.weight32" => self.weight32 = parse_f64(v)?,

            "sweep.f_start_hz" => self.sweep.f_start = parse_f64(v)?,
            "sweep.f_end_hz" => self.sweep.f_end = parse_f64(v)?,
            "sweep.n_points" => self.sweep.n_points = parse_int(v)?,
            "sweep.triangular" => self.sweep.triangular = parse_bool(v)?,
            "sweep.two_photon_width_hz" => self.sweep.two_photon_width = parse_f64(v)?,
            "sweep.include_conjugate" => self.sweep.include_conjugate = parse_bool(v)?,
            "sweep.gain_override" => self.sweep.gain_override = Some(parse_f64(v)?),
            "sweep.peak_mask_hz" => self.peak.mask_halfwidth = parse_f64(v)?,
            "sweep.peak_threshold" => self.peak.threshold = parse_f64(v)?,

            "mc.n_shots" => self.mc.n_shots = parse_int(v)?,
            "mc.rng_seed" => self.mc.rng_seed = parse_int(v)?,
            "mc.regime" => self.mc.regime = v.parse()?,
            "mc.mu" => self.mu = parse_f64(v)?,
            "detection.eta" => self.eta = parse_f64(v)?,

            "oracle.tail_bound" => self.oracle.tail_bound = parse_f64(v)?,
            "oracle.tolerance" => self.oracle.tolerance = parse_f64(v)?,
            "oracle.dims" => self.oracle_dims = Some(parse_dims(v)?),

            other => {
                if let Some(rest) = other.strip_prefix("gain.anchor") {
                    return self.set_anchor(rest, v);
                }
                return Err(CliError::Domain(format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    fn set_anchor(&mut self, rest: &str, v: &str) -> Result<(), CliError> {
        let (index, field) = rest.split_once('.').unwrap_or((rest, ""));
        let slot = match index {
            "1" => &mut self.anchors[0],
            "2" => &mut self.anchors[1],
            _ => return Err(CliError::Domain(format!("unknown key 'gain.anchor{rest}'"))),
        };
        match field {
            "pump_detuning_hz" => slot.detuning = parse_f64(v)?,
            "pump_power_w" => slot.power = parse_f64(v)?,
            "temperature_k" => slot.temperature = parse_f64(v)?,
            "gain" => slot.gain = parse_f64(v)?,
            _ => return Err(CliError::Domain(format!("unknown key 'gain.anchor{rest}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), CliError> {
        self.sweep_model()?;
        self.sweep.validate()?;
        if !(self.peak.mask_halfwidth > 0.0) || !(self.peak.threshold > 0.0) {
            return Err(CliError::Domain(
                "sweep.peak_mask_hz and sweep.peak_threshold must be > 0".into(),
            ));
        }
        if self.mc.n_shots == 0 {
            return Err(CliError::Domain("mc.n_shots must be >= 1".into()));
        }
        SeedState::new(self.mu)?;
        DetectionModel::new(self.eta)?;
        OracleConfig::new(self.oracle.tail_bound, self.oracle.tolerance)?;
        Ok(())
    }

    pub fn line(&self) -> AtomicLine {
        AtomicLine::cs_d2()
    }

    pub fn cell(&self) -> Result<CellConditions, CliError> {
        Ok(CellConditions::new(self.temperature, self.cell_length)?)
    }

    pub fn vapor(&self) -> Result<VaporModel, CliError> {
        let fit = VaporPressureFit {
            a: self.vapor_a,
            b: self.vapor_b,
        };
        Ok(VaporModel::new(fit, self.cross_section)?)
    }

    pub fn pump(&self) -> Result<PumpConfig, CliError> {
        Ok(PumpConfig::new(
            self.pump_power,
            self.pump_waist,
            self.pump_detuning,
        )?)
    }

    fn gain_template(&self) -> Result<GainCalibration, CliError> {
        let template = GainCalibration {
            coupling: self.coupling,
            profile31: TransitionProfile {
                weight: self.weight31,
                width_neg: self.width31_red,
                width_pos: self.width31_blue,
            },
            profile32: TransitionProfile {
                weight: self.weight32,
                width_neg: self.width32_red,
                width_pos: self.width32_blue,
            },
            od_exponent: self.od_exponent,
            reference_temperature: self.reference_temperature,
            mode: self.gain_mode,
            line: self.line(),
            vapor: self.vapor()?,
        };
        template.validate()?;
        Ok(template)
    }

    /// The gain model, fitted to the anchors when `gain.calibrate` is set.
    pub fn gain(&self) -> Result<GainCalibration, CliError> {
        let template = self.gain_template()?;
        if !self.calibrate {
            return Ok(template);
        }
        let cell = self.cell()?;
        let anchors = self
            .anchors
            .iter()
            .map(|a| {
                Ok(GainAnchor {
                    pump: PumpConfig::new(a.power, self.pump_waist, a.detuning)?,
                    cond: cell.with_temperature(a.temperature)?,
                    gain: a.gain,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(calibrate(&template, &anchors)?.calibration)
    }

    pub fn light_shift(&self) -> Result<LightShiftModel, CliError> {
        if !self.light_shift_enabled {
            return Ok(LightShiftModel::disabled());
        }
        if let Some(coefficient) = self.light_shift_coefficient {
            return Ok(LightShiftModel {
                coefficient,
                enabled: true,
            });
        }
        Ok(LightShiftModel::calibrated(
            &self.line(),
            self.pump_power,
            &self.light_shift_grid.points(),
            self.light_shift_max_variation,
        )?)
    }

    pub fn sweep_model(&self) -> Result<SweepModel, CliError> {
        self.pump()?;
        Ok(SweepModel {
            line: self.line(),
            cond: self.cell()?,
            vapor: self.vapor()?,
            gain: self.gain()?,
            light_shift: self.light_shift()?,
        })
    }
}

fn parse_dims(v: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts[..] {
        [d] => {
            let d = parse_int(d)?;
            Ok((d, d))
        }
        [d1, d2] => Ok((parse_int(d1)?, parse_int(d2)?)),
        _ => Err(CliError::Domain(format!(
            "dims '{v}' must be 'd' or 'd1,d2'"
        ))),
    }
}
