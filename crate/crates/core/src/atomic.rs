//! Cs D2 three-level structure, vapor density, Doppler-broadened absorption
//! and the pump-induced light shift.
//!
//! Level `|1⟩` is the lower ground hyperfine level and `|2⟩` the upper one, so
//! the `|1⟩→|3⟩` transition sits one hyperfine splitting above `|2⟩→|3⟩`.
//! Frequencies are absolute optical frequencies in Hz; detunings used by the
//! rest of the crate are measured from `f32`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gain::PumpConfig;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Mass of a 133Cs atom in kg.
pub const CS133_MASS: f64 = 2.206_946_50e-25;
/// Cs ground-state hyperfine splitting (the SI second definition), Hz.
pub const CS_HYPERFINE_SPLITTING: f64 = 9_192_631_770.0;
/// Cs D2 `F=4 → 6P3/2` transition frequency, rounded to an integer number of Hz
/// so that `f32 + delta` is exact in binary floating point.
pub const CS_D2_F32: f64 = 351_721_696_723_601.0;
/// D2 natural linewidth (FWHM), Hz.
pub const CS_D2_NATURAL_LINEWIDTH: f64 = 5.234e6;
pub const CS_D2_WAVELENGTH: f64 = 852.347_27e-9;

const TORR_TO_PA: f64 = 133.322_368;

pub const MIN_TEMPERATURE: f64 = 273.0;
pub const MAX_TEMPERATURE: f64 = 473.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicLine {
    f31: f64,
    f32: f64,
    delta: f64,
    gamma_nat: f64,
    wavelength: f64,
}

impl AtomicLine {
    /// Builds a line from the `|2⟩→|3⟩` frequency and the ground splitting.
    ///
    /// `f32 + delta` must be exactly representable so that `f31 - f32 == delta`
    /// holds bit-for-bit; integer-Hz inputs always satisfy this.
    pub fn new(f32: f64, delta: f64, gamma_nat: f64, wavelength: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!(
                "hyperfine splitting must be > 0, got {delta}"
            )));
        }
        if !(gamma_nat > 0.0 && gamma_nat.is_finite()) {
            return Err(Error::domain(format!(
                "natural linewidth must be > 0, got {gamma_nat}"
            )));
        }
        if !(f32 > 0.0 && wavelength > 0.0) {
            return Err(Error::domain(
                "transition frequency and wavelength must be > 0",
            ));
        }
        if ((wavelength * f32) / SPEED_OF_LIGHT - 1.0).abs() > 1e-3 {
            return Err(Error::domain(format!(
                "wavelength {wavelength} m inconsistent with f32 = {f32} Hz"
            )));
        }
        let f31 = f32 + delta;
        if f31 - f32 != delta {
            return Err(Error::domain(
                "f32 + delta is not exactly representable; use integer-Hz values",
            ));
        }
        Ok(Self {
            f31,
            f32,
            delta,
            gamma_nat,
            wavelength,
        })
    }

    pub fn cs_d2() -> Self {
        Self::new(
            CS_D2_F32,
            CS_HYPERFINE_SPLITTING,
            CS_D2_NATURAL_LINEWIDTH,
            CS_D2_WAVELENGTH,
        )
        .expect("Cs D2 constants are consistent")
    }

    pub fn f31(&self) -> f64 {
        self.f31
    }

    pub fn f32(&self) -> f64 {
        self.f32
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma_nat(&self) -> f64 {
        self.gamma_nat
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn resonances(&self) -> Resonances {
        Resonances {
            f31: self.f31,
            f32: self.f32,
        }
    }
}

impl Default for AtomicLine {
    fn default() -> Self {
        Self::cs_d2()
    }
}

/// Transition frequencies as seen by the seed, possibly light-shifted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonances {
    pub f31: f64,
    pub f32: f64,
}

impl Resonances {
    pub fn splitting(&self) -> f64 {
        self.f31 - self.f32
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConditions {
    temperature: f64,
    length: f64,
}

impl CellConditions {
    pub fn new(temperature: f64, length: f64) -> Result<Self> {
        if !(MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&temperature) {
            return Err(Error::domain(format!(
                "cell temperature {temperature} K outside [{MIN_TEMPERATURE}, {MAX_TEMPERATURE}] K"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain(format!(
                "cell length must be > 0, got {length}"
            )));
        }
        Ok(Self {
            temperature,
            length,
        })
    }

    /// 1 cm cell at 110 °C.
    pub fn reference_cell() -> Self {
        Self {
            temperature: 383.15,
            length: 0.01,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(temperature, self.length)
    }

    pub fn with_length(&self, length: f64) -> Result<Self> {
        Self::new(self.temperature, length)
    }
}

/// Two-parameter vapor-pressure fit `log10(P / torr) = a - b / T`.
///
/// Defaults are the liquid-phase Cs fit (melting point 301.6 K); it is applied
/// over the whole accepted temperature range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaporPressureFit {
    pub a: f64,
    pub b: f64,
}

impl Default for VaporPressureFit {
    fn default() -> Self {
        Self {
            a: 2.881 + 4.165,
            b: 3830.0,
        }
    }
}

impl VaporPressureFit {
    pub fn pressure_pa(&self, temperature: f64) -> f64 {
        TORR_TO_PA * 10f64.powf(self.a - self.b / temperature)
    }
}

/// Vapor column description: density fit plus an integrated absorption
/// cross-section scale (m²·Hz) shared by both hyperfine transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaporModel {
    pub pressure_fit: VaporPressureFit,
    pub cross_section: f64,
}

impl Default for VaporModel {
    fn default() -> Self {
        Self {
            pressure_fit: VaporPressureFit::default(),
            cross_section: 1.0e-8,
        }
    }
}

impl VaporModel {
    pub fn new(pressure_fit: VaporPressureFit, cross_section: f64) -> Result<Self> {
        if !(cross_section >= 0.0 && cross_section.is_finite()) {
            return Err(Error::domain(format!(
                "cross-section scale must be >= 0, got {cross_section}"
            )));
        }
        if !(pressure_fit.b > 0.0) {
            return Err(Error::domain(
                "vapor-pressure fit needs b > 0 for a rising density",
            ));
        }
        Ok(Self {
            pressure_fit,
            cross_section,
        })
    }

    pub fn density(&self, cond: &CellConditions) -> f64 {
        vapor_density(cond, &self.pressure_fit)
    }

    pub fn absorption_od(&self, f_seed: f64, line: &AtomicLine, cond: &CellConditions) -> f64 {
        self.absorption_od_at(f_seed, &line.resonances(), doppler_sigma(line, cond), cond)
    }

    /// Optical depth against explicit (possibly shifted) resonances.
    pub fn absorption_od_at(
        &self,
        f_seed: f64,
        res: &Resonances,
        sigma: f64,
        cond: &CellConditions,
    ) -> f64 {
        let column = self.density(cond) * self.cross_section * cond.length();
        column * (gaussian(f_seed - res.f31, sigma) + gaussian(f_seed - res.f32, sigma))
    }

    /// Optical depth at the `|2⟩→|3⟩` line centre.
    pub fn peak_od(&self, line: &AtomicLine, cond: &CellConditions) -> f64 {
        self.absorption_od(line.f32(), line, cond)
    }

    pub fn transmission(&self, f_seed: f64, line: &AtomicLine, cond: &CellConditions) -> f64 {
        transmission_from_od(self.absorption_od(f_seed, line, cond))
    }
}

/// `exp(−OD)`, floored at the smallest normal `f64` so that optically thick
/// columns stay strictly positive instead of underflowing to zero.
pub fn transmission_from_od(od: f64) -> f64 {
    (-od).exp().max(f64::MIN_POSITIVE)
}

/// Number density (m⁻³) from the ideal-gas law and the vapor-pressure fit.
pub fn vapor_density(cond: &CellConditions, fit: &VaporPressureFit) -> f64 {
    fit.pressure_pa(cond.temperature()) / (BOLTZMANN * cond.temperature())
}

/// Doppler standard deviation (Hz) of the `|2⟩→|3⟩` line.
pub fn doppler_sigma(line: &AtomicLine, cond: &CellConditions) -> f64 {
    doppler_sigma_at(line, cond.temperature())
}

/// As [`doppler_sigma`] for any non-negative temperature.
pub fn doppler_sigma_at(line: &AtomicLine, temperature: f64) -> f64 {
    line.f32() * (BOLTZMANN * temperature.max(0.0) / CS133_MASS).sqrt() / SPEED_OF_LIGHT
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    let z = x / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// A.c. Stark shift of each transition: `coefficient * P / Δᵢ`, with `Δᵢ` the
/// pump detuning from transition `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightShiftModel {
    /// Hz² / W.
    pub coefficient: f64,
    pub enabled: bool,
}

impl LightShiftModel {
    pub fn disabled() -> Self {
        Self {
            coefficient: 0.0,
            enabled: false,
        }
    }

    /// Chooses the coefficient so that, at pump power `power`, the largest
    /// deviation of the seed–conjugate separation from `2·delta` over
    /// `detunings` is exactly `max_variation · 2·delta`.
    pub fn calibrated(
        line: &AtomicLine,
        power: f64,
        detunings: &[f64],
        max_variation: f64,
    ) -> Result<Self> {
        if !(power > 0.0) {
            return Err(Error::domain(
                "light-shift calibration needs pump power > 0",
            ));
        }
        if !(max_variation > 0.0 && max_variation < 1.0) {
            return Err(Error::domain(format!(
                "light-shift variation must lie in (0, 1), got {max_variation}"
            )));
        }
        if detunings.is_empty() {
            return Err(Error::domain(
                "light-shift calibration needs at least one detuning",
            ));
        }
        let mut worst = 0.0_f64;
        for &d in detunings {
            let (d32, d31) = (d, d - line.delta());
            if d32 == 0.0 {
                return Err(Error::Singularity {
                    transition: "|2>->|3>",
                });
            }
            if d31 == 0.0 {
                return Err(Error::Singularity {
                    transition: "|1>->|3>",
                });
            }
            worst = worst.max((1.0 / d31 - 1.0 / d32).abs());
        }
        // splitting change = c·P·(1/Δ31 − 1/Δ32); separation change is twice that
        Ok(Self {
            coefficient: max_variation * line.delta() / (power * worst),
            enabled: true,
        })
    }
}

impl Default for LightShiftModel {
    fn default() -> Self {
        Self::disabled()
    }
}

/// Transition frequencies displaced by the pump light shift.
pub fn shifted_resonances(
    line: &AtomicLine,
    pump: &PumpConfig,
    ls: &LightShiftModel,
) -> Result<Resonances> {
    let res = line.resonances();
    if !ls.enabled || pump.power() == 0.0 {
        return Ok(res);
    }
    let d32 = pump.detuning();
    let d31 = pump.detuning() - line.delta();
    if d32 == 0.0 {
        return Err(Error::Singularity {
            transition: "|2>->|3>",
        });
    }
    if d31 == 0.0 {
        return Err(Error::Singularity {
            transition: "|1>->|3>",
        });
    }
    let k = ls.coefficient * pump.power();
    Ok(Resonances {
        f31: res.f31 + k / d31,
        f32: res.f32 + k / d32,
    })
}
