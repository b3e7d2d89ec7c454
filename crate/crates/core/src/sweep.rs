//! Seed-frequency sweeps across the D2 lines with the 4WM gain peak at
//! two-photon resonance, and frequency maps over pump detuning.
//!
//! All frequencies on the axes are detunings from the unshifted `f32`. The
//! pump sits at `f32 + Δ`; the seed is amplified when it lies one (shifted)
//! hyperfine splitting below the pump, and the conjugate then appears at
//! `f_seed + 2δ'`.

use rayon::prelude::*;

use crate::atomic::{
    doppler_sigma, shifted_resonances, transmission_from_od, AtomicLine, CellConditions,
    LightShiftModel, Resonances, VaporModel,
};
use crate::error::{Error, Result};
use crate::gain::{gain_at, GainCalibration, PumpConfig};
use crate::stats::linspace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub f_start: f64,
    pub f_end: f64,
    pub n_points: usize,
    /// Append the mirrored down-ramp.
    pub triangular: bool,
    /// FWHM of the two-photon gain Lorentzian, Hz.
    pub two_photon_width: f64,
    /// Add the conjugate beam, generated at `f_seed + 2δ'`, to the detected power.
    pub include_conjugate: bool,
    /// Replace the modelled gain (values below 1 render a dip).
    pub gain_override: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_start: -14e9,
            f_end: 12e9,
            n_points: 2000,
            triangular: true,
            two_photon_width: 30e6,
            include_conjugate: false,
            gain_override: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_start < self.f_end) {
            return Err(Error::domain(format!(
                "sweep start {} must be below end {}",
                self.f_start, self.f_end
            )));
        }
        if self.n_points < 2 {
            return Err(Error::domain("sweep needs at least 2 points"));
        }
        if !(self.two_photon_width > 0.0) {
            return Err(Error::domain("two-photon width must be > 0"));
        }
        if let Some(g) = self.gain_override {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::domain(format!("gain override must be > 0, got {g}")));
            }
        }
        Ok(())
    }

    /// Seed detunings of one up-ramp.
    pub fn ramp(&self) -> Vec<f64> {
        linspace(self.f_start, self.f_end, self.n_points)
    }

    pub fn step(&self) -> f64 {
        (self.f_end - self.f_start) / (self.n_points - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub f_seed: f64,
    pub intensity: f64,
}

/// Everything needed to render a trace besides the pump and the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepModel {
    pub line: AtomicLine,
    pub cond: CellConditions,
    pub vapor: VaporModel,
    pub gain: GainCalibration,
    pub light_shift: LightShiftModel,
}

impl SweepModel {
    /// Resonances seen with this pump and the two-photon resonance detuning.
    pub fn resonance(&self, pump: &PumpConfig) -> Result<(Resonances, f64)> {
        let res = shifted_resonances(&self.line, pump, &self.light_shift)?;
        let f_pump = self.line.f32() + pump.detuning();
        Ok((res, f_pump - res.splitting() - self.line.f32()))
    }
}

/// Conjugate frequency from the double-Λ resonance condition.
pub fn conjugate_frequency(f_seed: f64, line: &AtomicLine) -> f64 {
    f_seed + 2.0 * line.delta()
}

/// Conjugate frequency against light-shifted resonances.
pub fn conjugate_frequency_shifted(f_seed: f64, res: &Resonances) -> f64 {
    f_seed + 2.0 * res.splitting()
}

/// Unit-peak Lorentzian with full width `fwhm`.
fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let z = 2.0 * x / fwhm;
    1.0 / (1.0 + z * z)
}

fn render(
    seeds: &[f64],
    pump: &PumpConfig,
    sweep: &SweepConfig,
    model: &SweepModel,
) -> Result<Vec<f64>> {
    let g = match sweep.gain_override {
        Some(g) => g,
        None => gain_at(pump, &model.cond, &model.gain)?,
    };
    let (res, f_res) = model.resonance(pump)?;
    let sigma = doppler_sigma(&model.line, &model.cond);
    let f32 = model.line.f32();
    Ok(seeds
        .iter()
        .map(|&df| {
            let f = f32 + df;
            let transmission =
                transmission_from_od(model.vapor.absorption_od_at(f, &res, sigma, &model.cond));
            let amp = (g - 1.0) * lorentzian(df - f_res, sweep.two_photon_width);
            let mut intensity = transmission * (1.0 + amp);
            if sweep.include_conjugate {
                let fc = conjugate_frequency_shifted(f, &res);
                let tc = transmission_from_od(model.vapor.absorption_od_at(
                    fc,
                    &res,
                    sigma,
                    &model.cond,
                ));
                intensity += tc * amp.max(0.0);
            }
            intensity.max(0.0)
        })
        .collect())
}

/// Detected seed-arm intensity over the sweep, normalised to unit off-resonance
/// transmission.
pub fn seed_trace(
    pump: &PumpConfig,
    sweep: &SweepConfig,
    model: &SweepModel,
) -> Result<Vec<TraceSample>> {
    sweep.validate()?;
    let up = sweep.ramp();
    let intensities = render(&up, pump, sweep, model)?;
    let mut trace: Vec<TraceSample> = up
        .iter()
        .zip(&intensities)
        .map(|(&f_seed, &intensity)| TraceSample { f_seed, intensity })
        .collect();
    if sweep.triangular {
        let down: Vec<TraceSample> = trace.iter().rev().copied().collect();
        trace.extend(down);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMap {
    pub pump_detunings: Vec<f64>,
    pub seed_detunings: Vec<f64>,
    /// Row-major, one row per pump detuning.
    pub intensities: Vec<Vec<f64>>,
}

impl FrequencyMap {
    pub fn row_trace(&self, i: usize) -> Vec<TraceSample> {
        self.seed_detunings
            .iter()
            .zip(&self.intensities[i])
            .map(|(&f_seed, &intensity)| TraceSample { f_seed, intensity })
            .collect()
    }
}

/// One up-ramp per pump detuning; rows are evaluated in parallel and kept in
/// grid order.
pub fn frequency_map(
    pump_grid: &[f64],
    pump: &PumpConfig,
    sweep: &SweepConfig,
    model: &SweepModel,
) -> Result<FrequencyMap> {
    if pump_grid.is_empty() {
        return Err(Error::domain("pump grid is empty"));
    }
    sweep.validate()?;
    let seeds = sweep.ramp();
    let rows: Vec<Vec<f64>> = pump_grid
        .par_iter()
        .map(|&d| render(&seeds, &pump.with_detuning(d)?, sweep, model))
        .collect::<Result<_>>()?;
    Ok(FrequencyMap {
        pump_detunings: pump_grid.to_vec(),
        seed_detunings: seeds,
        intensities: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakConfig {
    /// Half-width of the window masked around the candidate peak when
    /// estimating the background, Hz.
    pub mask_halfwidth: f64,
    /// Minimum `peak/background − 1` for a peak to count.
    pub threshold: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            mask_halfwidth: 1.5e9,
            threshold: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Grid frequency with the largest intensity/background ratio.
    pub f_peak: f64,
    /// Intensity at `f_peak`.
    pub height: f64,
    /// Background interpolated under `f_peak`.
    pub background: f64,
    /// Lorentzian vertex through the three samples around `f_peak`.
    pub f_center: f64,
    /// Peak/background ratio at `f_center`.
    pub ratio: f64,
}

/// Sorted, de-duplicated copy of a trace (a triangular sweep visits each
/// frequency twice).
fn up_ramp(trace: &[TraceSample]) -> Vec<TraceSample> {
    let mut s = trace.to_vec();
    s.sort_by(|a, b| a.f_seed.total_cmp(&b.f_seed));
    s.dedup_by(|b, a| a.f_seed == b.f_seed);
    s
}

/// Locates the 4WM peak on the absorption background; `None` when no sample
/// rises above the background by more than `cfg.threshold`.
pub fn extract_peak(trace: &[TraceSample], cfg: &PeakConfig) -> Result<Option<Peak>> {
    if trace.is_empty() {
        return Err(Error::domain("cannot extract a peak from an empty trace"));
    }
    let s = up_ramp(trace);
    let n = s.len();
    // lowest frequency wins ties
    let candidate = s.iter().enumerate().fold(0, |best, (i, x)| {
        if x.intensity > s[best].intensity {
            i
        } else {
            best
        }
    });
    let f0 = s[candidate].f_seed;
    let lo = s.partition_point(|x| x.f_seed < f0 - cfg.mask_halfwidth);
    let hi = s.partition_point(|x| x.f_seed <= f0 + cfg.mask_halfwidth);
    // masked range is lo..hi; interpolate between the samples just outside it
    let left = lo.checked_sub(1).map(|i| s[i]);
    let right = (hi < n).then(|| s[hi]);
    let background = |f: f64| -> f64 {
        match (left, right) {
            (Some(a), Some(b)) => {
                a.intensity + (b.intensity - a.intensity) * (f - a.f_seed) / (b.f_seed - a.f_seed)
            }
            (Some(a), None) => a.intensity,
            (None, Some(b)) => b.intensity,
            (None, None) => f64::NAN,
        }
    };
    let ratio_at = |i: usize| -> f64 {
        let b = background(s[i].f_seed);
        if b > 0.0 {
            s[i].intensity / b
        } else {
            f64::NAN
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for i in lo..hi {
        let r = ratio_at(i);
        if r.is_finite() && best.is_none_or(|(_, br)| r > br) {
            best = Some((i, r));
        }
    }
    let Some((i, ratio)) = best else {
        return Ok(None);
    };
    if ratio < 1.0 + cfg.threshold {
        return Ok(None);
    }

    let (mut f_center, mut refined) = (s[i].f_seed, ratio);
    if i > lo && i + 1 < hi {
        // 1/(ratio − 1) is quadratic in frequency for a Lorentzian peak
        let ys: Vec<f64> = (i - 1..=i + 1).map(|j| 1.0 / (ratio_at(j) - 1.0)).collect();
        if ys.iter().all(|y| y.is_finite() && *y > 0.0) {
            let h = s[i + 1].f_seed - s[i].f_seed;
            let h0 = s[i].f_seed - s[i - 1].f_seed;
            if (h - h0).abs() <= 1e-9 * h {
                let curvature = ys[0] - 2.0 * ys[1] + ys[2];
                if curvature > 0.0 {
                    let offset = 0.5 * (ys[0] - ys[2]) / curvature;
                    if offset.abs() <= 1.0 {
                        let vertex = ys[1] - 0.25 * (ys[0] - ys[2]) * offset;
                        if vertex > 0.0 {
                            f_center = s[i].f_seed + offset * h;
                            refined = 1.0 + 1.0 / vertex;
                        }
                    }
                }
            }
        }
    }
    Ok(Some(Peak {
        f_peak: s[i].f_seed,
        height: s[i].intensity,
        background: background(s[i].f_seed),
        f_center,
        ratio: refined,
    }))
}

/// Local transmission minima (strictly below both neighbours and below
/// `depth` of full transmission), located by a Gaussian vertex fit on
/// `ln(−ln I)`.
pub fn absorption_minima(trace: &[TraceSample], depth: f64) -> Vec<f64> {
    let s = up_ramp(trace);
    let mut out = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        let (a, b, c) = (s[i - 1].intensity, s[i].intensity, s[i + 1].intensity);
        if !(b < a && b < c && b < depth) {
            continue;
        }
        let y = |v: f64| (-(v.ln())).ln();
        let (ya, yb, yc) = (y(a), y(b), y(c));
        let h = s[i + 1].f_seed - s[i].f_seed;
        let curvature = ya - 2.0 * yb + yc;
        let f = if ya.is_finite() && yb.is_finite() && yc.is_finite() && curvature < 0.0 {
            s[i].f_seed + 0.5 * (ya - yc) / curvature * h
        } else {
            s[i].f_seed
        };
        out.push(f);
    }
    out
}

/// 4WM ridge of a frequency map: refined peak centre per row, `None` where
/// no peak is found.
pub fn map_ridge(map: &FrequencyMap, cfg: &PeakConfig) -> Result<Vec<Option<Peak>>> {
    (0..map.pump_detunings.len())
        .map(|i| extract_peak(&map.row_trace(i), cfg))
        .collect()
}
