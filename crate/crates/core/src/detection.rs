//! Monte-Carlo photodetection of the twin beams and noise-reduction estimates.
//!
//! Every shot draws from its own ChaCha8 stream (`stream = shot index`) seeded
//! with the configured 64-bit seed, so the sample stream does not depend on how
//! shots are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{run_oracle, OracleConfig};
use crate::squeezer::{DetectionModel, SeedState, SqueezeParams};
use crate::stats::CompensatedSum;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), stream = shot index";

pub const FOCK_MAX_MU: f64 = 50.0;
pub const FOCK_MAX_R: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regime {
    /// Inverse-CDF draws from the brute-force post-loss distribution.
    FockExact,
    /// Moment-matched bivariate normal, rounded, then binomially thinned.
    #[default]
    GaussianApprox,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FockExact => "fock-exact",
            Regime::GaussianApprox => "gaussian-approx",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fock-exact" => Ok(Regime::FockExact),
            "gaussian-approx" => Ok(Regime::GaussianApprox),
            other => Err(Error::domain(format!(
                "unknown regime '{other}' (expected fock-exact or gaussian-approx)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub n_shots: usize,
    pub rng_seed: u64,
    pub regime: Regime,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_shots: 100_000,
            rng_seed: 0x5eed_43a7e,
            regime: Regime::GaussianApprox,
        }
    }
}

impl McConfig {
    pub fn check(&self, sq: &SqueezeParams, seed: &SeedState) -> Result<()> {
        if self.n_shots == 0 {
            return Err(Error::domain("n_shots must be >= 1"));
        }
        if self.regime == Regime::FockExact && (seed.mu() > FOCK_MAX_MU || sq.r() > FOCK_MAX_R) {
            return Err(Error::domain(format!(
                "fock-exact regime needs mu <= {FOCK_MAX_MU} and r <= {FOCK_MAX_R} (got mu = {}, r = {})",
                seed.mu(),
                sq.r()
            )));
        }
        Ok(())
    }
}

fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

/// Detected `(N1, N2)` pairs, one per shot, in shot order.
pub fn sample_counts(
    sq: &SqueezeParams,
    seed: &SeedState,
    det: &DetectionModel,
    mc: &McConfig,
    oracle: &OracleConfig,
) -> Result<Vec<(u64, u64)>> {
    mc.check(sq, seed)?;
    match mc.regime {
        Regime::FockExact => sample_fock(sq, seed, det, mc, oracle),
        Regime::GaussianApprox => sample_gaussian(sq, seed, det, mc),
    }
}

fn sample_fock(
    sq: &SqueezeParams,
    seed: &SeedState,
    det: &DetectionModel,
    mc: &McConfig,
    oracle: &OracleConfig,
) -> Result<Vec<(u64, u64)>> {
    let run = run_oracle(sq.r(), seed.mu(), det.eta(), None, oracle)?;
    let dist = run.detected;
    let cdf = dist.cdf();
    Ok((0..mc.n_shots)
        .into_par_iter()
        .map(|shot| {
            let u: f64 = shot_rng(mc.rng_seed, shot).random();
            let (n1, n2) = dist.sample_index(&cdf, u);
            (n1 as u64, n2 as u64)
        })
        .collect())
}

/// Pre-detection covariance of `(n1, n2)` for vacuum ⊗ coherent input.
fn pre_detection_moments(sq: &SqueezeParams, seed: &SeedState) -> ([f64; 2], [[f64; 2]; 2]) {
    let s2 = sq.lambda();
    let c2 = 1.0 + s2;
    let mu = seed.mu();
    let mean = [s2 * (1.0 + mu), c2 * mu + s2];
    // each output mode is a displaced thermal state with thermal occupation s²
    let var1 = s2 * c2 + s2 * mu * (2.0 * s2 + 1.0);
    let var2 = s2 * c2 + c2 * mu * (2.0 * s2 + 1.0);
    let cov = s2 * c2 * (1.0 + 2.0 * mu);
    (mean, [[var1, cov], [cov, var2]])
}

fn sample_gaussian(
    sq: &SqueezeParams,
    seed: &SeedState,
    det: &DetectionModel,
    mc: &McConfig,
) -> Result<Vec<(u64, u64)>> {
    let (mean, cov) = pre_detection_moments(sq, seed);
    // Cholesky of the 2×2 covariance; the pair is perfectly correlated when mu = 0
    let l11 = cov[0][0].sqrt();
    let l21 = if l11 > 0.0 { cov[1][0] / l11 } else { 0.0 };
    let l22 = (cov[1][1] - l21 * l21).max(0.0).sqrt();
    let eta = det.eta();
    (0..mc.n_shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(mc.rng_seed, shot);
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let n1 = round_clamp(mean[0] + l11 * z1);
            let n2 = round_clamp(mean[1] + l21 * z1 + l22 * z2);
            Ok((thin(n1, eta, &mut rng)?, thin(n2, eta, &mut rng)?))
        })
        .collect()
}

/// Round half away from zero, then clamp at zero.
fn round_clamp(x: f64) -> u64 {
    let r = x.round();
    if r <= 0.0 {
        0
    } else {
        r as u64
    }
}

fn thin(n: u64, eta: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if eta == 1.0 || n == 0 {
        return Ok(n);
    }
    let b = Binomial::new(n, eta).map_err(|e| Error::domain(format!("binomial thinning: {e}")))?;
    Ok(b.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrfEstimate {
    pub nrf: f64,
    pub std_err: f64,
    pub n_shots: usize,
    pub method: &'static str,
}

pub const JACKKNIFE_GROUPS: usize = 50;

/// Partial sums for one group of shots, taken relative to a fixed shift so
/// that large photon numbers do not swamp the variance.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    d: CompensatedSum,
    d2: CompensatedSum,
    s: CompensatedSum,
}

impl Moments {
    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.d.merge(&o.d);
        self.d2.merge(&o.d2);
        self.s.merge(&o.s);
    }

    fn minus(&self, o: &Moments) -> (f64, f64, f64, f64) {
        (
            self.n - o.n,
            self.d.value() - o.d.value(),
            self.d2.value() - o.d2.value(),
            self.s.value() - o.s.value(),
        )
    }
}

fn ratio(n: f64, d: f64, d2: f64, s: f64) -> Option<f64> {
    if n < 2.0 || s <= 0.0 {
        return None;
    }
    let mean_d = d / n;
    let var = ((d2 - n * mean_d * mean_d) / (n - 1.0)).max(0.0);
    Some(var / (s / n))
}

/// `V(N1 − N2) / ⟨N1 + N2⟩` with a grouped delete-one jackknife error.
pub fn estimate_nrf(samples: &[(u64, u64)]) -> Result<NrfEstimate> {
    if samples.len() < 2 {
        return Err(Error::domain("noise estimate needs at least 2 samples"));
    }
    let shift = samples[0].0 as f64 - samples[0].1 as f64;
    let groups = JACKKNIFE_GROUPS.min(samples.len());
    let mut parts = vec![Moments::default(); groups];
    let per = samples.len().div_ceil(groups);
    for (i, &(a, b)) in samples.iter().enumerate() {
        let g = &mut parts[(i / per).min(groups - 1)];
        let d = a as f64 - b as f64 - shift;
        g.n += 1.0;
        g.d.add(d);
        g.d2.add(d * d);
        g.s.add(a as f64 + b as f64);
    }
    let mut total = Moments::default();
    for p in &parts {
        total.merge(p);
    }
    let (n, d, d2, s) = (total.n, total.d.value(), total.d2.value(), total.s.value());
    if s <= 0.0 {
        return Err(Error::domain(
            "mean photon sum is zero; noise reduction undefined",
        ));
    }
    let nrf = ratio(n, d, d2, s).expect("n >= 2 and s > 0");

    let leave_out: Vec<f64> = parts
        .iter()
        .filter(|p| p.n > 0.0)
        .filter_map(|p| {
            let (n, d, d2, s) = total.minus(p);
            ratio(n, d, d2, s)
        })
        .collect();
    let k = leave_out.len() as f64;
    let std_err = if k >= 2.0 {
        let mean = leave_out.iter().sum::<f64>() / k;
        let ss: f64 = leave_out.iter().map(|x| (x - mean) * (x - mean)).sum();
        ((k - 1.0) / k * ss).sqrt()
    } else {
        f64::NAN
    };
    Ok(NrfEstimate {
        nrf,
        std_err,
        n_shots: samples.len(),
        method: "grouped delete-one jackknife (50 groups)",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeezer::{evolve_moments, nrf_exact};

    fn sq(r: f64) -> SqueezeParams {
        SqueezeParams::new(r).unwrap()
    }
    fn seed(mu: f64) -> SeedState {
        SeedState::new(mu).unwrap()
    }
    fn det(eta: f64) -> DetectionModel {
        DetectionModel::new(eta).unwrap()
    }
    fn mc(n: usize, regime: Regime) -> McConfig {
        McConfig {
            n_shots: n,
            rng_seed: 7,
            regime,
        }
    }

    #[test]
    fn regime_limits() {
        let o = OracleConfig::default();
        let m = mc(10, Regime::FockExact);
        assert!(sample_counts(&sq(0.1), &seed(51.0), &det(1.0), &m, &o).is_err());
        assert!(sample_counts(&sq(1.6), &seed(1.0), &det(1.0), &m, &o).is_err());
        assert!(sample_counts(
            &sq(0.1),
            &seed(1.0),
            &det(1.0),
            &mc(0, Regime::GaussianApprox),
            &o
        )
        .is_err());
    }

    #[test]
    fn covariance_reproduces_conserved_difference() {
        for (r, mu) in [(0.0, 9.0), (0.4, 3.0), (1.2, 1e4)] {
            let (mean, cov) = pre_detection_moments(&sq(r), &seed(mu));
            let m = evolve_moments(&sq(r), &seed(mu), &det(1.0));
            assert!((mean[0] - m.n1).abs() < 1e-9 * m.n1.max(1.0));
            assert!((mean[1] - m.n2).abs() < 1e-9 * m.n2.max(1.0));
            let var_diff = cov[0][0] + cov[1][1] - 2.0 * cov[0][1];
            assert!(
                (var_diff - mu).abs() < 1e-9 * mu.max(1.0),
                "{var_diff} vs {mu}"
            );
        }
    }

    #[test]
    fn coherent_seed_mean() {
        let n = 20_000;
        let s = sample_counts(
            &sq(0.0),
            &seed(9.0),
            &det(1.0),
            &mc(n, Regime::GaussianApprox),
            &OracleConfig::default(),
        )
        .unwrap();
        let mean = s.iter().map(|x| x.1 as f64).sum::<f64>() / n as f64;
        assert!((mean - 9.0).abs() < 3.0 * (9.0 / n as f64).sqrt());
        assert!(s.iter().all(|x| x.0 == 0));
    }

    #[test]
    fn squeezed_vacuum_pairs_are_equal() {
        let s = sample_counts(
            &sq(0.5),
            &seed(0.0),
            &det(1.0),
            &mc(5_000, Regime::FockExact),
            &OracleConfig::default(),
        )
        .unwrap();
        assert!(s.iter().all(|(a, b)| a == b));
        assert!(s.iter().any(|(a, _)| *a > 0));
    }

    #[test]
    fn fock_sampler_moments() {
        let n = 100_000;
        let (r, m, e) = (sq(0.3), seed(4.0), det(0.8));
        let s = sample_counts(
            &r,
            &m,
            &e,
            &mc(n, Regime::FockExact),
            &OracleConfig::default(),
        )
        .unwrap();
        let exact = evolve_moments(&r, &m, &e);
        let nn = n as f64;
        let m1 = s.iter().map(|x| x.0 as f64).sum::<f64>() / nn;
        let m2 = s.iter().map(|x| x.1 as f64).sum::<f64>() / nn;
        let v1 = s.iter().map(|x| (x.0 as f64 - m1).powi(2)).sum::<f64>() / (nn - 1.0);
        let v2 = s.iter().map(|x| (x.1 as f64 - m2).powi(2)).sum::<f64>() / (nn - 1.0);
        assert!((m1 - exact.n1).abs() < 3.0 * (v1 / nn).sqrt());
        assert!((m2 - exact.n2).abs() < 3.0 * (v2 / nn).sqrt());
        let est = estimate_nrf(&s).unwrap();
        let truth = nrf_exact(&r, &m, &e).unwrap();
        assert!((est.nrf - truth).abs() < 3.0 * est.std_err);
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let o = OracleConfig::default();
        for regime in [Regime::FockExact, Regime::GaussianApprox] {
            let a = sample_counts(&sq(0.4), &seed(3.0), &det(0.7), &mc(2_000, regime), &o).unwrap();
            let b = sample_counts(&sq(0.4), &seed(3.0), &det(0.7), &mc(2_000, regime), &o).unwrap();
            assert_eq!(a, b);
            let other = McConfig {
                rng_seed: 8,
                ..mc(2_000, regime)
            };
            let c = sample_counts(&sq(0.4), &seed(3.0), &det(0.7), &other, &o).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn shot_prefix_is_stable() {
        // per-shot streams: a longer run starts with the shorter one
        let o = OracleConfig::default();
        let a = sample_counts(
            &sq(0.4),
            &seed(30.0),
            &det(0.7),
            &mc(100, Regime::GaussianApprox),
            &o,
        )
        .unwrap();
        let b = sample_counts(
            &sq(0.4),
            &seed(30.0),
            &det(0.7),
            &mc(1000, Regime::GaussianApprox),
            &o,
        )
        .unwrap();
        assert_eq!(a[..], b[..100]);
    }

    #[test]
    fn shot_noise_control() {
        let s = sample_counts(
            &sq(0.0),
            &seed(1e4),
            &det(0.9),
            &mc(50_000, Regime::GaussianApprox),
            &OracleConfig::default(),
        )
        .unwrap();
        let est = estimate_nrf(&s).unwrap();
        assert!((est.nrf - 1.0).abs() < 3.0 * est.std_err, "{est:?}");
        assert!(est.std_err > 0.0);
    }

    #[test]
    fn estimator_errors() {
        assert!(estimate_nrf(&[(1, 1)]).is_err());
        assert!(estimate_nrf(&[(0, 0), (0, 0), (0, 0)]).is_err());
        let est = estimate_nrf(&[(1, 0), (0, 1)]).unwrap();
        // d = ±1, var = 2, mean sum = 1
        assert!((est.nrf - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_clamp(2.5), 3);
        assert_eq!(round_clamp(2.49), 2);
        assert_eq!(round_clamp(-0.4), 0);
        assert_eq!(round_clamp(-3.0), 0);
    }
}
