//! Wall-clock comparison of the streaming engine against batch
//! recomputation, plus the curve-fit helpers used to judge the shapes.
//!
//! Three arms, each timed per trial on a monotonic clock:
//!
//! * `incremental`: one engine pass over the stream, reading the elapsed
//!   total as it crosses each grid prefix.
//! * `batch-single`: one batch decomposition per grid prefix.
//! * `batch-cumulative`: a batch decomposition at every prefix up to the
//!   grid point, totalled; the cost of refitting from scratch on each
//!   arriving sample.
//!
//! Trials run sequentially, no warm-up discard; reported values are raw
//! means and standard deviations.

use ndarray::{s, ArrayView2};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::config::PcaConfig;
use crate::engine::PcaEngine;
use crate::error::{Error, Result};
use crate::oracle::batch_timing_arm;

/// Which timing arm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    Incremental,
    BatchSingle,
    BatchCumulative,
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incremental" => Ok(BenchMode::Incremental),
            "batch-single" => Ok(BenchMode::BatchSingle),
            "batch-cumulative" => Ok(BenchMode::BatchCumulative),
            other => Err(Error::InvalidConfig(format!(
                "unknown bench mode '{other}' (expected incremental, batch-single \
                 or batch-cumulative)"
            ))),
        }
    }
}

impl std::fmt::Display for BenchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BenchMode::Incremental => "incremental",
            BenchMode::BatchSingle => "batch-single",
            BenchMode::BatchCumulative => "batch-cumulative",
        };
        f.write_str(name)
    }
}

/// Aggregated timing for one mode at one prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub mode: BenchMode,
    pub n: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub trials: usize,
}

/// Up to `points` evenly spaced prefix lengths from `n_start` to `n`,
/// strictly increasing with both endpoints included.
pub fn prefix_grid(n_start: usize, n: usize, points: usize) -> Vec<usize> {
    let points = points.max(2);
    let mut grid = Vec::with_capacity(points);
    for i in 0..points {
        let v = n_start as f64 + (n - n_start) as f64 * i as f64 / (points - 1) as f64;
        let v = v.round() as usize;
        if grid.last() != Some(&v) {
            grid.push(v);
        }
    }
    grid
}

/// Run the requested arms over `trials` repetitions and aggregate.
///
/// Records are ordered by mode (as given) and then by prefix length.
pub fn run_bench(
    x: ArrayView2<f64>,
    config: &PcaConfig,
    grid: &[usize],
    trials: usize,
    modes: &[BenchMode],
) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidConfig("prefix grid is empty".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig(
            "prefix grid must be strictly increasing".into(),
        ));
    }
    if grid[0] < config.n_start {
        return Err(Error::InvalidConfig(format!(
            "first grid prefix {} is below n_start {}",
            grid[0], config.n_start
        )));
    }
    if *grid.last().unwrap() > x.nrows() {
        return Err(Error::InsufficientData {
            needed: *grid.last().unwrap(),
            actual: x.nrows(),
        });
    }

    let mut records = Vec::with_capacity(modes.len() * grid.len());
    for &mode in modes {
        // samples[g][t]: seconds for grid point g in trial t.
        let mut samples = vec![Vec::with_capacity(trials); grid.len()];
        for _ in 0..trials {
            let seconds = match mode {
                BenchMode::Incremental => incremental_trial(x, config, grid)?,
                BenchMode::BatchSingle => {
                    let timings = batch_timing_arm(x, grid, config)?;
                    timings.iter().map(|t| t.single.as_secs_f64()).collect()
                }
                BenchMode::BatchCumulative => {
                    let every: Vec<usize> = (grid[0]..=*grid.last().unwrap()).collect();
                    let timings = batch_timing_arm(x, &every, config)?;
                    grid.iter()
                        .map(|&g| timings[g - grid[0]].cumulative.as_secs_f64())
                        .collect()
                }
            };
            for (g, s) in seconds.into_iter().enumerate() {
                samples[g].push(s);
            }
        }
        for (g, values) in samples.into_iter().enumerate() {
            let (mean, std) = mean_std(&values);
            records.push(BenchRecord {
                mode,
                n: grid[g],
                mean_seconds: mean,
                std_seconds: std,
                trials,
            });
        }
    }
    Ok(records)
}

/// One streaming pass; elapsed totals are read as the engine count crosses
/// each grid prefix, so later grid points include all earlier work.
fn incremental_trial(x: ArrayView2<f64>, config: &PcaConfig, grid: &[usize]) -> Result<Vec<f64>> {
    let start = Instant::now();
    let mut engine = PcaEngine::warmup(x.slice(s![..config.n_start, ..]), config)?;
    let mut out = Vec::with_capacity(grid.len());
    for &g in grid {
        while engine.count() < g {
            let i = engine.count();
            let row = x.row(i);
            let result = engine.push(row.as_slice().expect("row-major input"))?;
            std::hint::black_box(&result);
        }
        out.push(start.elapsed().as_secs_f64());
    }
    std::hint::black_box(&engine);
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Write records as CSV with columns `mode,n,mean_seconds,std_seconds,trials`.
pub fn write_bench_csv<W: Write>(records: &[BenchRecord], mut writer: W) -> Result<()> {
    writeln!(writer, "mode,n,mean_seconds,std_seconds,trials")?;
    for r in records {
        writeln!(
            writer,
            "{},{},{:.9e},{:.9e},{}",
            r.mode, r.n, r.mean_seconds, r.std_seconds, r.trials
        )?;
    }
    writer.flush()?;
    Ok(())
}

/// Ordinary least squares fit y = a + b·x; returns (a, b, r²).
///
/// r² is 1 − SS_res/SS_tot, defined as 1 when y is constant.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (a + b * u);
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (a, b, r2)
}

/// Least squares coefficient of x² in y = a0 + a1·x + a2·x².
///
/// x is standardized internally; the coefficient is mapped back, which
/// keeps the normal equations well conditioned for x in the thousands.
pub fn quadratic_coefficient(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 3, "need at least three points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let xs: Vec<f64> = x.iter().map(|v| (v - mx) / sd).collect();

    let mut s = [0.0; 5];
    let mut t = [0.0; 3];
    for (u, v) in xs.iter().zip(y) {
        let mut p = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += p;
            if k < 3 {
                t[k] += p * v;
            }
            p *= u;
        }
    }
    let mut a = [
        [s[0], s[1], s[2], t[0]],
        [s[1], s[2], s[3], t[1]],
        [s[2], s[3], s[4], t[2]],
    ];
    // Gaussian elimination with partial pivoting on the 3x4 tableau.
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let pivot_row = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (entry, p) in row.iter_mut().zip(pivot_row.iter()).skip(col) {
                *entry -= f * p;
            }
        }
    }
    let a2 = a[2][3] / a[2][2];
    a2 / (sd * sd)
}
