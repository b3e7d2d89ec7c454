use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use twinbeam_core::detection::{estimate_nrf, sample_counts};
use twinbeam_core::fock::{difference_tv_distance, run_oracle};
use twinbeam_core::gain::{
    curve_linearity, gain_at, gain_vs_power_curve, gain_vs_temperature_curve,
};
use twinbeam_core::squeezer::{asymptotic_nrf, evolve_moments, gain, nrf_exact};
use twinbeam_core::stats::linear_fit;
use twinbeam_core::sweep::{extract_peak, frequency_map, map_ridge, seed_trace};
use twinbeam_core::{DetectionModel, McConfig, Regime, SeedState, SqueezeParams};

use crate::config::{Grid, SimulatorConfig};
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Loaded config plus the text it came from (hashed into manifests).
pub struct Context {
    pub config: SimulatorConfig,
    pub text: String,
    pub command_line: String,
}

impl Context {
    fn finish(&self, out: &Path, body: &str, rng_seed: Option<u64>) -> Result<(), CliError> {
        std::fs::write(out, body).map_err(|e| CliError::io(out, e))?;
        RunManifest::new(self.command_line.clone(), &self.text, rng_seed).write_beside(out)?;
        Ok(())
    }
}

pub fn trace(
    ctx: &Context,
    pump_detuning: Option<f64>,
    pump_power: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = cfg.sweep_model()?;
    let mut pump = cfg.pump()?;
    if let Some(d) = pump_detuning {
        pump = pump.with_detuning(d)?;
    }
    if let Some(p) = pump_power {
        pump = pump.with_power(p)?;
    }
    let trace = seed_trace(&pump, &cfg.sweep, &model)?;

    let mut body = String::from("seed_detuning_hz,intensity\n");
    for s in &trace {
        writeln!(body, "{},{}", s.f_seed, s.intensity).unwrap();
    }
    ctx.finish(out, &body, None)?;

    let g = match cfg.sweep.gain_override {
        Some(g) => g,
        None => gain_at(&pump, &model.cond, &model.gain)?,
    };
    let (_, f_res) = model.resonance(&pump)?;
    println!("gain = {g}");
    println!("two_photon_resonance_hz = {f_res}");
    match extract_peak(&trace, &cfg.peak)? {
        Some(p) => {
            println!("peak_hz = {}", p.f_center);
            println!("peak_over_background = {}", p.ratio);
        }
        None => println!("peak = not found"),
    }
    Ok(())
}

pub fn map(ctx: &Context, grid: Grid, out: &Path) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let model = cfg.sweep_model()?;
    let pump = cfg.pump()?;
    let start = Instant::now();
    let map = frequency_map(&grid.points(), &pump, &cfg.sweep, &model)?;
    let elapsed = start.elapsed();

    let mut body = String::from("detuning_from_f32_hz");
    for f in &map.seed_detunings {
        write!(body, ",{f}").unwrap();
    }
    body.push('\n');
    for (d, row) in map.pump_detunings.iter().zip(&map.intensities) {
        write!(body, "{d}").unwrap();
        for v in row {
            write!(body, ",{v}").unwrap();
        }
        body.push('\n');
    }
    ctx.finish(out, &body, None)?;

    let ridge = map_ridge(&map, &cfg.peak)?;
    let points: Vec<(f64, f64)> = map
        .pump_detunings
        .iter()
        .zip(&ridge)
        .filter_map(|(&d, p)| p.map(|p| (d, p.f_center)))
        .collect();
    println!(
        "rows = {}, columns = {}",
        map.pump_detunings.len(),
        map.seed_detunings.len()
    );
    println!("ridge_rows = {}", points.len());
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    if let Some(fit) = linear_fit(&xs, &ys) {
        println!("ridge_slope = {}", fit.slope);
        println!("ridge_intercept_hz = {}", fit.intercept);
    }
    let two_delta = 2.0 * model.line.delta();
    if let Some(worst) = points
        .iter()
        .map(|(d, f)| (2.0 * (d - f) - two_delta).abs() / two_delta)
        .reduce(f64::max)
    {
        println!("max_separation_variation = {worst}");
    }
    println!("elapsed_s = {}", elapsed.as_secs_f64());
    Ok(())
}

pub enum Strength {
    Gain(f64),
    R(f64),
}

pub struct NoiseArgs<'a> {
    pub strength: Strength,
    pub eta: Option<f64>,
    pub mu: Option<f64>,
    pub shots: Option<usize>,
    pub regime: Option<Regime>,
    pub seed: Option<u64>,
    pub dump: Option<&'a Path>,
}

pub fn noise(ctx: &Context, args: NoiseArgs<'_>) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let sq = match args.strength {
        Strength::Gain(g) => SqueezeParams::from_gain(g)?,
        Strength::R(r) => SqueezeParams::new(r)?,
    };
    let seed = SeedState::new(args.mu.unwrap_or(cfg.mu))?;
    let det = DetectionModel::new(args.eta.unwrap_or(cfg.eta))?;
    let mc = McConfig {
        n_shots: args.shots.unwrap_or(cfg.mc.n_shots),
        rng_seed: args.seed.unwrap_or(cfg.mc.rng_seed),
        regime: args.regime.unwrap_or(cfg.mc.regime),
    };

    let exact = nrf_exact(&sq, &seed, &det)?;
    let asymptotic = asymptotic_nrf(gain(&sq), &det)?;
    let samples = sample_counts(&sq, &seed, &det, &mc, &cfg.oracle)?;
    let est = estimate_nrf(&samples)?;

    if let Some(path) = args.dump {
        let mut body = String::from("n1,n2\n");
        for (a, b) in &samples {
            writeln!(body, "{a},{b}").unwrap();
        }
        ctx.finish(path, &body, Some(mc.rng_seed))?;
    }

    println!(
        "r = {}, gain = {}, mu = {}, eta = {}",
        sq.r(),
        gain(&sq),
        seed.mu(),
        det.eta()
    );
    println!("nrf_exact = {exact}");
    println!("nrf_asymptotic = {asymptotic}");
    println!(
        "nrf_mc = {} +- {} ({} shots, {}, seed {})",
        est.nrf,
        est.std_err,
        est.n_shots,
        mc.regime.as_str(),
        mc.rng_seed
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Vary {
    Temperature,
    Power,
}

pub fn gain_study(ctx: &Context, vary: Vary, range: Grid, out: &Path) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let cal = cfg.gain()?;
    let pump = cfg.pump()?;
    let cond = cfg.cell()?;
    let xs = range.points();
    let curve = match vary {
        Vary::Power => gain_vs_power_curve(&cal, &cond, &pump, &xs)?,
        Vary::Temperature => gain_vs_temperature_curve(&cal, &pump, &cond, &xs)?,
    };

    let mut body = String::from("x,gain\n");
    for (x, g) in &curve {
        writeln!(body, "{x},{g}").unwrap();
    }
    let increasing = curve.windows(2).all(|w| w[1].1 > w[0].1);
    match curve_linearity(&curve) {
        Some(fit) => {
            writeln!(body, "# fit: gain - 1 = slope * x + intercept").unwrap();
            writeln!(body, "# slope = {}", fit.slope).unwrap();
            writeln!(body, "# intercept = {}", fit.intercept).unwrap();
            writeln!(
                body,
                "# max_relative_residual = {}",
                fit.max_relative_residual
            )
            .unwrap();
        }
        None => writeln!(body, "# fit = n/a").unwrap(),
    }
    writeln!(body, "# strictly_increasing = {increasing}").unwrap();
    ctx.finish(out, &body, None)?;

    print!(
        "{}",
        body.lines()
            .filter(|l| l.starts_with('#'))
            .map(|l| format!("{}\n", l.trim_start_matches("# ")))
            .collect::<String>()
    );
    Ok(())
}

const CHECK_R: [f64; 4] = [0.0, 0.1, 0.3, 0.6];
const CHECK_MU: [f64; 3] = [0.0, 1.0, 4.0];
const CHECK_ETA: [f64; 2] = [1.0, 0.8];
const CHECK_TOLERANCE: f64 = 1e-6;

fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

pub fn oracle_check(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let start = Instant::now();
    let names = ["mean_n1", "mean_n2", "var_diff", "nrf", "tv_distance"];
    let mut worst = [0.0_f64; 5];
    let mut worst_r0 = 0.0_f64;
    for r in CHECK_R {
        for mu in CHECK_MU {
            for eta in CHECK_ETA {
                let run = run_oracle(r, mu, eta, cfg.oracle_dims, &cfg.oracle)?;
                let (s, m, d) = (
                    SqueezeParams::new(r)?,
                    SeedState::new(mu)?,
                    DetectionModel::new(eta)?,
                );
                let closed = evolve_moments(&s, &m, &d);
                let mut errs = [
                    rel_err(run.mean_n1(), closed.n1),
                    rel_err(run.mean_n2(), closed.n2),
                    rel_err(run.var_diff(), closed.var_diff),
                    0.0,
                    difference_tv_distance(&run.input, &run.evolved),
                ];
                // the ratio is undefined with no photons at all
                if let Ok(exact) = nrf_exact(&s, &m, &d) {
                    errs[3] = rel_err(run.detected.nrf()?, exact);
                }
                for (w, e) in worst.iter_mut().zip(errs) {
                    *w = w.max(e);
                }
                if r == 0.0 {
                    worst_r0 = errs.iter().copied().fold(worst_r0, f64::max);
                }
            }
        }
    }
    let points = CHECK_R.len() * CHECK_MU.len() * CHECK_ETA.len();
    println!("grid points = {points}");
    for (name, w) in names.iter().zip(worst) {
        println!("max_error {name} = {w:e}");
    }
    println!("max_error r=0 rows = {worst_r0:e}");
    println!("elapsed_s = {}", start.elapsed().as_secs_f64());
    let pass = worst.iter().all(|&w| w <= CHECK_TOLERANCE);
    if pass {
        println!("oracle-check: PASS (tolerance {CHECK_TOLERANCE:e})");
        Ok(())
    } else {
        println!("oracle-check: FAIL (tolerance {CHECK_TOLERANCE:e})");
        Err(CliError::CheckFailed(format!(
            "oracle disagreement above {CHECK_TOLERANCE:e}"
        )))
    }
}
