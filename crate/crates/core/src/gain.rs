//! Phenomenological gain model: pump power, waist, one-photon detuning and
//! cell temperature mapped to a squeeze strength.
//!
//! The coupling expression is
//!
//! ```text
//! X = C · sqrt(P / (π w²)) · f(Δ) · (OD(T) / OD(T_ref))^κ
//! f(Δ) = Σᵢ wᵢ / sqrt(1 + (Δᵢ / Γᵢ)²)
//! ```
//!
//! where `Δ₂ = Δ` and `Δ₁ = Δ − δ` are the pump detunings from the two
//! transitions. Each transition carries separate widths for negative and
//! positive detuning. In [`GainMode::SqrtCoupling`] the squeeze strength is
//! `r = X`; in [`GainMode::LinearLambda`] it is chosen so that `sinh²(r) = X²`,
//! which makes `g − 1` exactly proportional to pump power.

use crate::atomic::{AtomicLine, CellConditions, VaporModel};
use crate::error::{Error, Result};
use crate::squeezer::{gain, SqueezeParams};
use crate::stats::{linear_fit, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpConfig {
    power: f64,
    waist: f64,
    detuning: f64,
}

impl PumpConfig {
    /// `detuning` is signed and measured from the `|2⟩→|3⟩` transition.
    pub fn new(power: f64, waist: f64, detuning: f64) -> Result<Self> {
        if !(power >= 0.0 && power.is_finite()) {
            return Err(Error::domain(format!(
                "pump power must be >= 0, got {power}"
            )));
        }
        if !(waist > 0.0 && waist.is_finite()) {
            return Err(Error::domain(format!(
                "pump waist must be > 0, got {waist}"
            )));
        }
        if !detuning.is_finite() {
            return Err(Error::domain("pump detuning must be finite"));
        }
        Ok(Self {
            power,
            waist,
            detuning,
        })
    }

    /// 110 mW, 200 µm waist, Δ = −2.4 GHz.
    pub fn operating_point() -> Self {
        Self {
            power: 0.110,
            waist: 200e-6,
            detuning: -2.4e9,
        }
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist
    }

    pub fn intensity(&self) -> f64 {
        self.power / self.area()
    }

    pub fn with_power(&self, power: f64) -> Result<Self> {
        Self::new(power, self.waist, self.detuning)
    }

    pub fn with_detuning(&self, detuning: f64) -> Result<Self> {
        Self::new(self.power, self.waist, detuning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    #[default]
    SqrtCoupling,
    LinearLambda,
}

impl GainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GainMode::SqrtCoupling => "sqrt-coupling",
            GainMode::LinearLambda => "linear-lambda",
        }
    }
}

impl std::str::FromStr for GainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt-coupling" => Ok(GainMode::SqrtCoupling),
            "linear-lambda" => Ok(GainMode::LinearLambda),
            other => Err(Error::domain(format!(
                "unknown gain mode '{other}' (expected sqrt-coupling or linear-lambda)"
            ))),
        }
    }
}

/// Falloff of one transition's contribution, with separate widths on the
/// red (`Δᵢ < 0`) and blue (`Δᵢ > 0`) side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProfile {
    pub weight: f64,
    pub width_neg: f64,
    pub width_pos: f64,
}

impl TransitionProfile {
    pub fn symmetric(weight: f64, width: f64) -> Self {
        Self {
            weight,
            width_neg: width,
            width_pos: width,
        }
    }

    fn shape(&self, detuning: f64) -> f64 {
        let width = if detuning < 0.0 {
            self.width_neg
        } else {
            self.width_pos
        };
        let x = detuning / width;
        1.0 / (1.0 + x * x).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCalibration {
    pub coupling: f64,
    /// Contribution anchored on `|1⟩→|3⟩`.
    pub profile31: TransitionProfile,
    /// Contribution anchored on `|2⟩→|3⟩`.
    pub profile32: TransitionProfile,
    pub od_exponent: f64,
    pub reference_temperature: f64,
    pub mode: GainMode,
    pub line: AtomicLine,
    pub vapor: VaporModel,
}

impl Default for GainCalibration {
    /// Uncalibrated profile shape; run [`calibrate`] to fix weights and coupling.
    fn default() -> Self {
        Self {
            coupling: 1e-3,
            profile31: TransitionProfile {
                weight: 0.5,
                width_neg: 1.0e9,
                width_pos: 1.0e9,
            },
            profile32: TransitionProfile {
                weight: 0.5,
                width_neg: 3.0e9,
                width_pos: 1.0e9,
            },
            od_exponent: 1.0,
            reference_temperature: 383.15,
            mode: GainMode::SqrtCoupling,
            line: AtomicLine::cs_d2(),
            vapor: VaporModel::default(),
        }
    }
}

impl GainCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::domain(format!(
                "coupling must be >= 0, got {}",
                self.coupling
            )));
        }
        for p in [&self.profile31, &self.profile32] {
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(Error::domain(format!(
                    "profile weight must be >= 0, got {}",
                    p.weight
                )));
            }
            if !(p.width_neg > 0.0 && p.width_pos > 0.0) {
                return Err(Error::domain("profile widths must be > 0"));
            }
        }
        if !self.od_exponent.is_finite() || self.od_exponent < 0.0 {
            return Err(Error::domain("od_exponent must be >= 0"));
        }
        CellConditions::new(self.reference_temperature, 1.0)?;
        Ok(())
    }

    /// `f(Δ)`, the detuning profile.
    pub fn detuning_profile(&self, detuning: f64) -> f64 {
        self.profile31.weight * self.profile31.shape(detuning - self.line.delta())
            + self.profile32.weight * self.profile32.shape(detuning)
    }

    /// `(OD(T) / OD(T_ref))^κ`.
    pub fn density_factor(&self, cond: &CellConditions) -> Result<f64> {
        let reference = cond.with_temperature(self.reference_temperature)?;
        let od = self.vapor.peak_od(&self.line, cond);
        let od_ref = self.vapor.peak_od(&self.line, &reference);
        Ok((od / od_ref).powf(self.od_exponent))
    }

    /// The coupling expression `X` before the mode-specific mapping to `r`.
    fn coupling_argument(&self, pump: &PumpConfig, cond: &CellConditions) -> Result<f64> {
        let basis = self.basis(pump, cond)?;
        Ok(self.coupling * (self.profile31.weight * basis[0] + self.profile32.weight * basis[1]))
    }

    /// `sqrt(P/A)·D(T)·shapeᵢ(Δᵢ)` for each transition; `X` is linear in
    /// `C·wᵢ` over this basis.
    fn basis(&self, pump: &PumpConfig, cond: &CellConditions) -> Result<[f64; 2]> {
        let common = pump.intensity().sqrt() * self.density_factor(cond)?;
        Ok([
            common * self.profile31.shape(pump.detuning() - self.line.delta()),
            common * self.profile32.shape(pump.detuning()),
        ])
    }

    fn squeeze_from_argument(&self, x: f64) -> Result<SqueezeParams> {
        match self.mode {
            GainMode::SqrtCoupling => SqueezeParams::new(x),
            GainMode::LinearLambda => SqueezeParams::new(x.asinh()),
        }
    }

    /// Inverse of [`Self::squeeze_from_argument`] for a target gain.
    fn argument_for_gain(&self, g: f64) -> f64 {
        match self.mode {
            GainMode::SqrtCoupling => (g - 1.0).sqrt().asinh(),
            GainMode::LinearLambda => (g - 1.0).sqrt(),
        }
    }
}

pub fn interaction_strength(
    pump: &PumpConfig,
    cond: &CellConditions,
    cal: &GainCalibration,
) -> Result<SqueezeParams> {
    let x = cal.coupling_argument(pump, cond)?;
    cal.squeeze_from_argument(x)
}

pub fn gain_at(pump: &PumpConfig, cond: &CellConditions, cal: &GainCalibration) -> Result<f64> {
    Ok(gain(&interaction_strength(pump, cond, cal)?))
}

/// A measured operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainAnchor {
    pub pump: PumpConfig,
    pub cond: CellConditions,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub calibration: GainCalibration,
    /// Largest relative gain mismatch over the anchors.
    pub max_relative_residual: f64,
    /// True when the number of anchors did not exceed the free parameters.
    pub exact: bool,
}

/// Fits the calibration to measured anchors, keeping the profile widths, mode
/// and temperature scaling of `template`.
///
/// One anchor fixes the overall coupling with the template's weight ratio.
/// Two or more fit both transition weights (least squares beyond two),
/// constrained to be non-negative.
pub fn calibrate(template: &GainCalibration, points: &[GainAnchor]) -> Result<CalibrationReport> {
    template.validate()?;
    if points.is_empty() {
        return Err(Error::domain("calibration needs at least one anchor"));
    }
    if let Some(bad) = points.iter().find(|p| !(p.gain >= 1.0)) {
        return Err(Error::domain(format!(
            "anchor gain {} is below 1 and cannot be reached",
            bad.gain
        )));
    }

    let rows: Vec<[f64; 2]> = points
        .iter()
        .map(|p| template.basis(&p.pump, &p.cond))
        .collect::<Result<_>>()?;
    let targets: Vec<f64> = points
        .iter()
        .map(|p| template.argument_for_gain(p.gain))
        .collect();

    // a = (C·w31, C·w32)
    let a = if points.len() == 1 || rows.iter().all(|r| r[0] == 0.0 && r[1] == 0.0) {
        fit_fixed_ratio(template, &rows, &targets)
    } else {
        fit_weights(&rows, &targets)
    };

    let mut cal = *template;
    let total = a[0] + a[1];
    if total > 0.0 {
        cal.coupling = total;
        cal.profile31.weight = a[0] / total;
        cal.profile32.weight = a[1] / total;
    } else {
        cal.coupling = 0.0;
    }

    let mut worst = 0.0_f64;
    for p in points {
        let g = gain_at(&p.pump, &p.cond, &cal)?;
        worst = worst.max((g - p.gain).abs() / p.gain);
    }
    Ok(CalibrationReport {
        calibration: cal,
        max_relative_residual: worst,
        exact: points.len() <= 2,
    })
}

fn fit_fixed_ratio(template: &GainCalibration, rows: &[[f64; 2]], targets: &[f64]) -> [f64; 2] {
    let (w31, w32) = (template.profile31.weight, template.profile32.weight);
    let (mut num, mut den) = (0.0, 0.0);
    for (r, t) in rows.iter().zip(targets) {
        let x = w31 * r[0] + w32 * r[1];
        num += x * t;
        den += x * x;
    }
    let scale = if den > 0.0 { num / den } else { 0.0 };
    [scale * w31, scale * w32]
}

/// Non-negative least squares over two unknowns by enumerating active sets.
fn fit_weights(rows: &[[f64; 2]], targets: &[f64]) -> [f64; 2] {
    let sse = |a: [f64; 2]| -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(r, t)| {
                let e = r[0] * a[0] + r[1] * a[1] - t;
                e * e
            })
            .sum()
    };
    let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, t) in rows.iter().zip(targets) {
        s00 += r[0] * r[0];
        s01 += r[0] * r[1];
        s11 += r[1] * r[1];
        b0 += r[0] * t;
        b1 += r[1] * t;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() > 1e-12 * s00 * s11 {
        let a = [(b0 * s11 - b1 * s01) / det, (s00 * b1 - s01 * b0) / det];
        if a[0] >= 0.0 && a[1] >= 0.0 {
            return a;
        }
    }
    let only0 = [if s00 > 0.0 { (b0 / s00).max(0.0) } else { 0.0 }, 0.0];
    let only1 = [0.0, if s11 > 0.0 { (b1 / s11).max(0.0) } else { 0.0 }];
    if sse(only0) <= sse(only1) {
        only0
    } else {
        only1
    }
}

pub fn gain_vs_power_curve(
    cal: &GainCalibration,
    cond: &CellConditions,
    pump: &PumpConfig,
    powers: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if powers.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("power grid must be sorted"));
    }
    powers
        .iter()
        .map(|&p| Ok((p, gain_at(&pump.with_power(p)?, cond, cal)?)))
        .collect()
}

pub fn gain_vs_temperature_curve(
    cal: &GainCalibration,
    pump: &PumpConfig,
    cond: &CellConditions,
    temps: &[f64],
) -> Result<Vec<(f64, f64)>> {
    temps
        .iter()
        .map(|&t| Ok((t, gain_at(pump, &cond.with_temperature(t)?, cal)?)))
        .collect()
}

/// Affine fit of `g − 1` against the abscissa of a gain curve.
pub fn curve_linearity(curve: &[(f64, f64)]) -> Option<LinearFit> {
    let xs: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = curve.iter().map(|c| c.1 - 1.0).collect();
    linear_fit(&xs, &ys)
}

/// The two measured operating points: g ≈ 5.6 at Δ = −2.4 GHz and g ≈ 3.1 at
/// Δ = +1.8 GHz, both taken here at 110 mW and 110 °C.
pub fn reference_anchors() -> [GainAnchor; 2] {
    let pump = PumpConfig::operating_point();
    let cond = CellConditions::reference_cell();
    [
        GainAnchor {
            pump,
            cond,
            gain: 5.6,
        },
        GainAnchor {
            pump: PumpConfig {
                detuning: 1.8e9,
                ..pump
            },
            cond,
            gain: 3.1,
        },
    ]
}

/// Default profile calibrated on [`reference_anchors`].
pub fn reference_calibration(mode: GainMode) -> GainCalibration {
    let template = GainCalibration {
        mode,
        ..GainCalibration::default()
    };
    calibrate(&template, &reference_anchors())
        .expect("reference anchors are feasible")
        .calibration
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::linspace;
    use proptest::prelude::*;

    fn cell(t: f64) -> CellConditions {
        CellConditions::new(t, 0.01).unwrap()
    }

    #[test]
    fn zero_power_gives_unit_gain() {
        let cal = reference_calibration(GainMode::SqrtCoupling);
        let pump = PumpConfig::new(0.0, 200e-6, -2.4e9).unwrap();
        let sq = interaction_strength(&pump, &cell(383.15), &cal).unwrap();
        assert_eq!(sq.r(), 0.0);
        assert_eq!(gain(&sq), 1.0);
    }

    #[test]
    fn two_anchor_calibration_is_exact() {
        for mode in [GainMode::SqrtCoupling, GainMode::LinearLambda] {
            let template = GainCalibration {
                mode,
                ..GainCalibration::default()
            };
            let report = calibrate(&template, &reference_anchors()).unwrap();
            assert!(report.exact);
            assert!(report.max_relative_residual < 1e-6);
            let cal = report.calibration;
            assert!(cal.profile31.weight > 0.0 && cal.profile32.weight > 0.0);
            for a in reference_anchors() {
                let g = gain_at(&a.pump, &a.cond, &cal).unwrap();
                assert!(
                    (g / a.gain - 1.0).abs() < 1e-6,
                    "{mode:?}: {g} vs {}",
                    a.gain
                );
            }
        }
    }

    #[test]
    fn single_anchor_calibration() {
        let report = calibrate(&GainCalibration::default(), &reference_anchors()[..1]).unwrap();
        let a = reference_anchors()[0];
        let g = gain_at(&a.pump, &a.cond, &report.calibration).unwrap();
        assert!((g - 5.6).abs() < 5.6e-6);
        // the template's weight ratio is kept
        let t = GainCalibration::default();
        let c = report.calibration;
        assert!(
            (c.profile31.weight / c.profile32.weight - t.profile31.weight / t.profile32.weight)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn unit_gain_anchor_at_zero_power_is_free() {
        let cal = reference_calibration(GainMode::SqrtCoupling);
        let mut anchors = reference_anchors().to_vec();
        anchors.push(GainAnchor {
            pump: PumpConfig::new(0.0, 200e-6, -2.4e9).unwrap(),
            cond: cell(383.15),
            gain: 1.0,
        });
        let report = calibrate(&GainCalibration::default(), &anchors).unwrap();
        assert!(report.max_relative_residual < 1e-6);
        assert!((report.calibration.coupling / cal.coupling - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_anchor_rejected() {
        let mut a = reference_anchors();
        a[0].gain = 0.8;
        assert!(calibrate(&GainCalibration::default(), &a).is_err());
        assert!(calibrate(&GainCalibration::default(), &[]).is_err());
    }

    #[test]
    fn overdetermined_fit_reports_residual() {
        let mut anchors = reference_anchors().to_vec();
        anchors.push(GainAnchor {
            pump: PumpConfig::new(0.11, 200e-6, -5e9).unwrap(),
            cond: cell(383.15),
            gain: 4.0,
        });
        let report = calibrate(&GainCalibration::default(), &anchors).unwrap();
        assert!(!report.exact);
        assert!(report.max_relative_residual > 0.0);
    }

    #[test]
    fn linear_lambda_power_curve_is_exactly_linear() {
        let cal = reference_calibration(GainMode::LinearLambda);
        let powers = linspace(0.01, 0.1, 10);
        let curve =
            gain_vs_power_curve(&cal, &cell(383.15), &PumpConfig::operating_point(), &powers)
                .unwrap();
        let fit = curve_linearity(&curve).unwrap();
        assert!(fit.max_relative_residual < 1e-12);
        assert!((fit.correlation - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
    }

    #[test]
    fn sqrt_coupling_small_argument_is_nearly_linear() {
        let cal = reference_calibration(GainMode::SqrtCoupling);
        let pump = PumpConfig::operating_point();
        let cond = cell(383.15);
        // largest power with r = c·sqrt(P) ≤ 0.3
        let r_ref = interaction_strength(&pump, &cond, &cal).unwrap().r();
        let p_max = pump.power() * (0.3 / r_ref).powi(2);
        let powers = linspace(0.0, p_max, 20);
        let curve = gain_vs_power_curve(&cal, &cond, &pump, &powers).unwrap();
        let r_top = interaction_strength(&pump.with_power(p_max).unwrap(), &cond, &cal)
            .unwrap()
            .r();
        assert!(r_top <= 0.3 + 1e-12);
        let fit = curve_linearity(&curve).unwrap();
        assert!(fit.max_relative_residual < 0.03, "{fit:?}");
    }

    #[test]
    fn temperature_curve() {
        let cal = reference_calibration(GainMode::SqrtCoupling);
        let pump = PumpConfig::operating_point();
        let temps = linspace(293.15, 383.15, 10);
        let curve = gain_vs_temperature_curve(&cal, &pump, &cell(383.15), &temps).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
        let g_room = curve[0].1;
        let g_hot = curve.last().unwrap().1;
        assert!((g_hot - 5.6).abs() < 5.6e-6);
        assert!(g_room - 1.0 < 0.05 * (g_hot - 1.0));
        assert!(gain_vs_temperature_curve(&cal, &pump, &cell(383.15), &[500.0]).is_err());
    }

    #[test]
    fn mirror_symmetry_about_midpoint() {
        let cal = GainCalibration {
            profile31: TransitionProfile::symmetric(0.5, 1.5e9),
            profile32: TransitionProfile::symmetric(0.5, 1.5e9),
            coupling: 1e-3,
            ..GainCalibration::default()
        };
        let mid = 0.5 * cal.line.delta();
        let cond = cell(383.15);
        for x in [0.3e9, 1.7e9, 6.0e9] {
            let a = gain_at(&PumpConfig::new(0.1, 200e-6, mid + x).unwrap(), &cond, &cal).unwrap();
            let b = gain_at(&PumpConfig::new(0.1, 200e-6, mid - x).unwrap(), &cond, &cal).unwrap();
            assert!((a - b).abs() < 1e-12 * a, "{a} vs {b}");
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "linear-lambda".parse::<GainMode>().unwrap(),
            GainMode::LinearLambda
        );
        assert_eq!(
            "sqrt-coupling".parse::<GainMode>().unwrap(),
            GainMode::SqrtCoupling
        );
        assert!("quadratic".parse::<GainMode>().is_err());
    }

    proptest! {
        #[test]
        fn gain_at_least_one_and_monotone(
            p1 in 0.0f64..0.2, p2 in 0.0f64..0.2,
            t1 in 273.0f64..473.0, t2 in 273.0f64..473.0,
            det in -2e10f64..2e10,
        ) {
            let cal = reference_calibration(GainMode::SqrtCoupling);
            let pump = PumpConfig::new(p1, 200e-6, det).unwrap();
            let g = gain_at(&pump, &cell(t1), &cal).unwrap();
            prop_assert!(g >= 1.0);
            let (plo, phi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            let glo = gain_at(&pump.with_power(plo).unwrap(), &cell(t1), &cal).unwrap();
            let ghi = gain_at(&pump.with_power(phi).unwrap(), &cell(t1), &cal).unwrap();
            prop_assert!(ghi >= glo);
            let (tlo, thi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let glo = gain_at(&pump, &cell(tlo), &cal).unwrap();
            let ghi = gain_at(&pump, &cell(thi), &cal).unwrap();
            prop_assert!(ghi >= glo);
        }
    }
}
