//! Brute-force two-mode Fock-space oracle.
//!
//! A state vector over `|n1, n2⟩`, `0 ≤ n1 < dim1`, `0 ≤ n2 < dim2`, is
//! propagated under `H = a1 a2 + a1† a2†` by integrating `dψ/dr = −iHψ` with a
//! Taylor-series stepper. Photon statistics are then read off the probability
//! table, optionally after binomial detection loss. Nothing here depends on the
//! closed forms in [`crate::squeezer`]; the two are compared in tests.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Maximum allowed probability in the top Fock layer.
    pub tail_bound: f64,
    /// Integrator error per unit of squeeze strength.
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tail_bound: 1e-8,
            tolerance: 1e-10,
        }
    }
}

impl OracleConfig {
    pub fn new(tail_bound: f64, tolerance: f64) -> Result<Self> {
        for (name, v) in [("tail_bound", tail_bound), ("tolerance", tolerance)] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(Error::domain(format!(
                    "oracle {name} must lie in (0, 1e-4], got {v}"
                )));
            }
        }
        Ok(Self {
            tail_bound,
            tolerance,
        })
    }
}

/// Truncation dimension suggested for squeeze strength `r` and seed `mu`.
pub fn suggested_dim(r: f64, mu: f64) -> usize {
    let c = r.cosh();
    (mu + 8.0 * mu.sqrt() + 20.0 * c * c).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    dim1: usize,
    dim2: usize,
    amplitudes: Vec<Complex64>,
}

impl FockState {
    pub fn new(dim1: usize, dim2: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if dim1 == 0 || dim2 == 0 || amplitudes.len() != dim1 * dim2 {
            return Err(Error::domain(format!(
                "state of length {} does not fit dims {dim1}x{dim2}",
                amplitudes.len()
            )));
        }
        let state = Self {
            dim1,
            dim2,
            amplitudes,
        };
        if (state.norm_sqr() - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "state is not normalised (norm² = {})",
                state.norm_sqr()
            )));
        }
        Ok(state)
    }

    /// The basis state `|n1, n2⟩`.
    pub fn basis(dim1: usize, dim2: usize, n1: usize, n2: usize) -> Result<Self> {
        if n1 >= dim1 || n2 >= dim2 {
            return Err(Error::domain(format!(
                "|{n1},{n2}> outside dims {dim1}x{dim2}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim1 * dim2];
        amplitudes[n1 * dim2 + n2] = Complex64::new(1.0, 0.0);
        Self::new(dim1, dim2, amplitudes)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim1, self.dim2)
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        self.amplitudes[n1 * self.dim2 + n2]
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability in the top layer `n1 = dim1 − 1` or `n2 = dim2 − 1`.
    pub fn top_layer_probability(&self) -> f64 {
        let mut p = 0.0;
        for n1 in 0..self.dim1 {
            for n2 in 0..self.dim2 {
                if n1 == self.dim1 - 1 || n2 == self.dim2 - 1 {
                    p += self.amplitude(n1, n2).norm_sqr();
                }
            }
        }
        p
    }

    pub fn distribution(&self) -> JointDistribution {
        JointDistribution {
            dim1: self.dim1,
            dim2: self.dim2,
            probs: self.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        }
    }

    fn truncation_error(&self, message: String) -> Error {
        Error::Truncation {
            message,
            suggested_dim1: 2 * self.dim1,
            suggested_dim2: 2 * self.dim2,
        }
    }
}

/// Vacuum in mode 1, coherent state with mean photon number `mu` in mode 2.
pub fn prepare_input(mu: f64, dim1: usize, dim2: usize, cfg: &OracleConfig) -> Result<FockState> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::domain(format!(
            "seed photon number must be >= 0, got {mu}"
        )));
    }
    if dim1 < 2 || dim2 < 2 {
        return Err(Error::Truncation {
            message: format!("dims {dim1}x{dim2} leave no room above the top layer"),
            suggested_dim1: dim1.max(2),
            suggested_dim2: dim2.max(2),
        });
    }
    // Poisson weights by recurrence; amplitudes are their square roots (α real)
    let mut weights = Vec::with_capacity(dim2);
    let mut w = (-mu).exp();
    for n in 0..dim2 {
        if n > 0 {
            w *= mu / n as f64;
        }
        weights.push(w);
    }
    // mass at n2 ≥ dim2 − 1, summed upward to avoid cancellation
    let mut tail = 0.0;
    let mut term = weights[dim2 - 1];
    let mut n = dim2 - 1;
    while term > 0.0 {
        tail += term;
        n += 1;
        term *= mu / n as f64;
        if term < tail * 1e-18 {
            break;
        }
    }
    if tail > cfg.tail_bound {
        let need = suggested_dim(0.0, mu).max(dim2 + 1);
        return Err(Error::Truncation {
            message: format!(
                "coherent seed with mu = {mu} puts {tail:e} in the top layer of dim2 = {dim2}"
            ),
            suggested_dim1: dim1,
            suggested_dim2: need.max(2 * dim2),
        });
    }
    let norm: f64 = weights.iter().sum();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim1 * dim2];
    for (n2, w) in weights.iter().enumerate() {
        amplitudes[n2] = Complex64::new((w / norm).sqrt(), 0.0);
    }
    Ok(FockState {
        dim1,
        dim2,
        amplitudes,
    })
}

/// `Hψ` for `H = a1 a2 + a1† a2†` on the truncated basis.
fn apply_hamiltonian(dim1: usize, dim2: usize, psi: &[Complex64], out: &mut [Complex64]) {
    for n1 in 0..dim1 {
        for n2 in 0..dim2 {
            let mut acc = Complex64::new(0.0, 0.0);
            if n1 + 1 < dim1 && n2 + 1 < dim2 {
                let c = (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                acc += psi[(n1 + 1) * dim2 + n2 + 1] * c;
            }
            if n1 > 0 && n2 > 0 {
                let c = ((n1 * n2) as f64).sqrt();
                acc += psi[(n1 - 1) * dim2 + n2 - 1] * c;
            }
            out[n1 * dim2 + n2] = acc;
        }
    }
}

const MAX_TAYLOR_ORDER: usize = 64;

/// Propagates `state` to accumulated squeeze strength `r`.
///
/// Each step has length at most `1/‖H‖` (row-sum bound), and the Taylor
/// series of `exp(−ihH)` is extended until the next term drops below
/// `tolerance · h`.
pub fn evolve(state: &FockState, r: f64, cfg: &OracleConfig) -> Result<FockState> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::domain(format!(
            "squeeze strength must be >= 0, got {r}"
        )));
    }
    let (dim1, dim2) = state.dims();
    let len = dim1 * dim2;
    let mut psi = state.amplitudes.clone();
    let mut term = vec![Complex64::new(0.0, 0.0); len];
    let mut next = vec![Complex64::new(0.0, 0.0); len];

    let h_bound = 2.0 * ((dim1 * dim2) as f64).sqrt();
    let max_step = 1.0 / h_bound;
    let minus_i = Complex64::new(0.0, -1.0);
    let mut done = 0.0;
    while done < r {
        let h = (r - done).min(max_step);
        let threshold = cfg.tolerance * h;
        term.copy_from_slice(&psi);
        let mut converged = false;
        for k in 1..=MAX_TAYLOR_ORDER {
            apply_hamiltonian(dim1, dim2, &term, &mut next);
            let scale = minus_i * (h / k as f64);
            let mut term_norm = 0.0;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * scale;
                term_norm += t.norm_sqr();
            }
            for (p, t) in psi.iter_mut().zip(&term) {
                *p += t;
            }
            if term_norm.sqrt() < threshold {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::domain("Taylor propagator failed to converge"));
        }
        done += h;
    }
    let out = FockState {
        dim1,
        dim2,
        amplitudes: psi,
    };
    let top = out.top_layer_probability();
    if top > cfg.tail_bound {
        return Err(out.truncation_error(format!(
            "top-layer probability {top:e} exceeds tail bound {:e} after r = {r}",
            cfg.tail_bound
        )));
    }
    Ok(out)
}

/// Probability table over `(n1, n2)`, row-major in `n1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    dim1: usize,
    dim2: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dim1: usize, dim2: usize, probs: Vec<f64>) -> Result<Self> {
        if dim1 == 0 || dim2 == 0 || probs.len() != dim1 * dim2 {
            return Err(Error::domain("probability table does not match its dims"));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::domain("probabilities must be non-negative"));
        }
        Ok(Self { dim1, dim2, probs })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dim1, self.dim2)
    }

    pub fn prob(&self, n1: usize, n2: usize) -> f64 {
        if n1 < self.dim1 && n2 < self.dim2 {
            self.probs[n1 * self.dim2 + n2]
        } else {
            0.0
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `(n1, n2, p)` for every cell, in table order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let d2 = self.dim2;
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i / d2, i % d2, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean_n1(&self) -> f64 {
        self.iter().map(|(n1, _, p)| n1 as f64 * p).sum()
    }

    pub fn mean_n2(&self) -> f64 {
        self.iter().map(|(_, n2, p)| n2 as f64 * p).sum()
    }

    pub fn var_diff(&self) -> f64 {
        let mean: f64 = self.iter().map(|(a, b, p)| (a as f64 - b as f64) * p).sum();
        self.iter()
            .map(|(a, b, p)| {
                let d = a as f64 - b as f64 - mean;
                d * d * p
            })
            .sum()
    }

    pub fn nrf(&self) -> Result<f64> {
        let sum = self.mean_n1() + self.mean_n2();
        if sum <= 0.0 {
            return Err(Error::domain(
                "noise reduction undefined for an empty distribution",
            ));
        }
        Ok(self.var_diff() / sum)
    }

    /// Distribution of `n1 − n2`.
    pub fn difference_distribution(&self) -> BTreeMap<i64, f64> {
        let mut out = BTreeMap::new();
        for (a, b, p) in self.iter() {
            *out.entry(a as i64 - b as i64).or_insert(0.0) += p;
        }
        out
    }

    /// Inverse-CDF lookup: the cell holding cumulative probability `u·total`.
    pub fn sample_index(&self, cdf: &[f64], u: f64) -> (usize, usize) {
        let target = u * cdf.last().copied().unwrap_or(0.0);
        let i = cdf.partition_point(|&c| c <= target).min(cdf.len() - 1);
        (i / self.dim2, i % self.dim2)
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

/// Total-variation distance between two `n1 − n2` distributions.
pub fn difference_tv_distance(a: &JointDistribution, b: &JointDistribution) -> f64 {
    let da = a.difference_distribution();
    let db = b.difference_distribution();
    let keys: std::collections::BTreeSet<_> = da.keys().chain(db.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (da.get(k).unwrap_or(&0.0) - db.get(k).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonStatistics {
    pub mean_n1: f64,
    pub mean_n2: f64,
    pub var_diff: f64,
    pub distribution: JointDistribution,
}

pub fn photon_statistics(state: &FockState) -> PhotonStatistics {
    let distribution = state.distribution();
    PhotonStatistics {
        mean_n1: distribution.mean_n1(),
        mean_n2: distribution.mean_n2(),
        var_diff: distribution.var_diff(),
        distribution,
    }
}

/// `B[n][k] = C(n, k) ηᵏ (1−η)ⁿ⁻ᵏ` for `n < dim`.
fn binomial_table(dim: usize, eta: f64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    rows.push(vec![1.0]);
    for n in 1..dim {
        let prev = &rows[n - 1];
        let row: Vec<f64> = (0..=n)
            .map(|k| {
                let keep = if k > 0 { eta * prev[k - 1] } else { 0.0 };
                let lose = if k < n { (1.0 - eta) * prev[k] } else { 0.0 };
                keep + lose
            })
            .collect();
        rows.push(row);
    }
    rows
}

/// Independent binomial thinning of both photon numbers with efficiency `eta`.
pub fn apply_loss(dist: &JointDistribution, eta: f64) -> Result<JointDistribution> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!(
            "efficiency must lie in (0, 1], got {eta}"
        )));
    }
    if eta == 1.0 {
        return Ok(dist.clone());
    }
    let (d1, d2) = dist.dims();
    let b1 = binomial_table(d1, eta);
    let b2 = binomial_table(d2, eta);
    // thin mode 2 first, then mode 1
    let mut partial = vec![0.0; d1 * d2];
    for n1 in 0..d1 {
        for n2 in 0..d2 {
            let p = dist.prob(n1, n2);
            if p == 0.0 {
                continue;
            }
            for (k2, w) in b2[n2].iter().enumerate() {
                partial[n1 * d2 + k2] += p * w;
            }
        }
    }
    let mut out = vec![0.0; d1 * d2];
    for n1 in 0..d1 {
        for k2 in 0..d2 {
            let p = partial[n1 * d2 + k2];
            if p == 0.0 {
                continue;
            }
            for (k1, w) in b1[n1].iter().enumerate() {
                out[k1 * d2 + k2] += p * w;
            }
        }
    }
    JointDistribution::new(d1, d2, out)
}

/// Moments from a full oracle run: prepare, evolve, detect.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub dims: (usize, usize),
    pub input: JointDistribution,
    pub evolved: JointDistribution,
    pub detected: JointDistribution,
    pub norm_drift: f64,
}

impl OracleRun {
    pub fn mean_n1(&self) -> f64 {
        self.detected.mean_n1()
    }

    pub fn mean_n2(&self) -> f64 {
        self.detected.mean_n2()
    }

    pub fn var_diff(&self) -> f64 {
        self.detected.var_diff()
    }
}

/// Largest per-mode dimension tried when growing automatically chosen dims.
pub const AUTO_DIM_LIMIT: usize = 1024;

/// Runs the oracle with the given dims, or starting from [`suggested_dim`]
/// and enlarging by half until the tail bound holds.
pub fn run_oracle(
    r: f64,
    mu: f64,
    eta: f64,
    dims: Option<(usize, usize)>,
    cfg: &OracleConfig,
) -> Result<OracleRun> {
    if let Some((d1, d2)) = dims {
        return run_with_dims(r, mu, eta, d1, d2, cfg);
    }
    let mut d = suggested_dim(r, mu).max(2);
    loop {
        match run_with_dims(r, mu, eta, d, d, cfg) {
            Err(Error::Truncation { .. }) if d < AUTO_DIM_LIMIT => {
                d = (d + d.div_ceil(2)).min(AUTO_DIM_LIMIT);
            }
            other => return other,
        }
    }
}

fn run_with_dims(
    r: f64,
    mu: f64,
    eta: f64,
    d1: usize,
    d2: usize,
    cfg: &OracleConfig,
) -> Result<OracleRun> {
    let input = prepare_input(mu, d1, d2, cfg)?;
    let evolved = evolve(&input, r, cfg)?;
    let norm_drift = (evolved.norm_sqr() - input.norm_sqr()).abs();
    let evolved_dist = evolved.distribution();
    let detected = apply_loss(&evolved_dist, eta)?;
    Ok(OracleRun {
        dims: (d1, d2),
        input: input.distribution(),
        evolved: evolved_dist,
        detected,
        norm_drift,
    })
}
