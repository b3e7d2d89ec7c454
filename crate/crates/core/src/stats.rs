//! Small numerical helpers shared by the simulation modules.

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
///
/// A single point yields `[start]`.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        stop
                    } else {
                        start + step * i as f64
                    }
                })
                .collect()
        }
    }
}

/// Ordinary least-squares affine fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual divided by the largest `|y|`.
    pub max_relative_residual: f64,
    /// Pearson correlation of `x` and `y`.
    pub correlation: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().copied().collect::<CompensatedSum>().value() / n;
    let my = ys.iter().copied().collect::<CompensatedSum>().value() / n;
    let mut sxx = CompensatedSum::new();
    let mut syy = CompensatedSum::new();
    let mut sxy = CompensatedSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        syy.add((y - my) * (y - my));
        sxy.add((x - mx) * (y - my));
    }
    let (sxx, syy, sxy) = (sxx.value(), syy.value(), sxy.value());
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let scale = ys.iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let max_res = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - (slope * x + intercept)).abs())
        .fold(0.0_f64, f64::max);
    let correlation = if syy > 0.0 {
        sxy / (sxx * syy).sqrt()
    } else {
        1.0
    };
    Some(LinearFit {
        slope,
        intercept,
        max_relative_residual: if scale > 0.0 { max_res / scale } else { 0.0 },
        correlation,
    })
}
