//! Monte Carlo estimate of the extension-DHP distribution for a history
//! drawn from an exactly consistent set, and its quantile table.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::histories::{ConsistencyKind, DEAD_FLOOR};
use crate::linalg::{to_coefficients, C64};
use crate::rng::{mix_seed, RandomStream};
use crate::schmidt::SchmidtPartition;

use super::empirical::quantile_sorted;

/// One Monte Carlo draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionStatistics {
    /// Min over partitions of the pair statistic maximized over the extended
    /// set (both children against every other history).
    pub exact: f64,
    /// Min over partitions of `max_i |<b_i|P a>| / (|P a| |P^c a|)`.
    pub approximate: f64,
    /// The approximate statistic for the first partition alone.
    pub single_partition: f64,
}

/// Draws `k + 1` orthonormal histories in `C^{d1 d2}` and an independent
/// Haar basis of the `d1` factor, and evaluates every binary Schmidt
/// extension of the first history.
pub fn sample_extension_statistics(
    d1: usize,
    d2: usize,
    k: usize,
    kind: ConsistencyKind,
    stream: &mut RandomStream,
) -> ExtensionStatistics {
    let histories = stream.orthonormal_columns(d1 * d2, k + 1);
    let basis = stream.haar_unitary(d1);
    let w_adj = basis.adjoint();
    let rows: Vec<_> = (0..=k)
        .map(|c| &w_adj * to_coefficients(&histories.column(c).into_owned(), d1, d2))
        .collect();
    let alpha = &rows[0];
    let weights: Vec<f64> = (0..d1).map(|i| alpha.row(i).iter().map(|z| z.norm_sqr()).sum()).collect();
    // overlap[b][i] = <row_i(beta_b) | row_i(alpha)>
    let overlap: Vec<Vec<C64>> = rows[1..]
        .iter()
        .map(|beta| {
            (0..d1)
                .map(|i| beta.row(i).iter().zip(alpha.row(i).iter()).map(|(b, a)| b.conj() * a).sum())
                .collect()
        })
        .collect();

    let mut exact = f64::INFINITY;
    let mut approximate = f64::INFINITY;
    let mut single = f64::NAN;
    for (j, part) in SchmidtPartition::all_binary(d1).iter().enumerate() {
        let q_in: f64 = part.indices().iter().map(|&i| weights[i]).sum();
        let outside = part.complement();
        let q_out: f64 = outside.iter().map(|&i| weights[i]).sum();
        let mut worst_exact: f64 = 0.0;
        let mut worst_approx: f64 = 0.0;
        for ov in &overlap {
            let z_in: C64 = part.indices().iter().map(|&i| ov[i]).sum();
            let z_out: C64 = outside.iter().map(|&i| ov[i]).sum();
            for (z, q) in [(z_in, q_in), (z_out, q_out)] {
                if q >= DEAD_FLOOR {
                    worst_exact = worst_exact.max(kind.pair_measure(z, q, 1.0));
                }
            }
            worst_approx = worst_approx.max(kind.pair_measure(z_in, q_in * q_out, 1.0));
        }
        exact = exact.min(worst_exact);
        approximate = approximate.min(worst_approx);
        if j == 0 {
            single = worst_approx;
        }
    }
    ExtensionStatistics {
        exact,
        approximate,
        single_partition: single,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentileConfig {
    pub d1: usize,
    pub d2: usize,
    pub ks: Vec<usize>,
    pub ps: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub kind: ConsistencyKind,
    /// Bootstrap resamples for the standard errors; 0 skips them.
    pub bootstrap_resamples: usize,
}

impl PercentileConfig {
    pub fn new(d1: usize, d2: usize, ks: Vec<usize>, ps: Vec<f64>, samples: usize, seed: u64) -> Self {
        Self {
            d1,
            d2,
            ks,
            ps,
            samples,
            seed,
            kind: ConsistencyKind::MediumDhc,
            bootstrap_resamples: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 < 2 || self.d1 > self.d2 {
            return Err(Error::InvalidArgument(format!(
                "need 2 <= d1 <= d2, got d1 = {}, d2 = {}",
                self.d1, self.d2
            )));
        }
        if self.ks.is_empty() || self.ps.is_empty() {
            return Err(Error::InvalidArgument("k and p lists must be non-empty".into()));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k == 0 || k + 1 > self.d1 * self.d2) {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside 1..={}",
                self.d1 * self.d2 - 1
            )));
        }
        if self.samples < 100 {
            return Err(Error::InvalidArgument(format!("need at least 100 samples, got {}", self.samples)));
        }
        for &p in &self.ps {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
            }
            let needed = (10.0 / (1.0 - p)).max(10.0 / p).ceil() as usize;
            if self.samples < needed {
                return Err(Error::InsufficientSamples {
                    samples: self.samples,
                    p,
                    needed,
                });
            }
        }
        Ok(())
    }
}

/// Sample statistics for one `k`, in sample-index order. Sample `i` uses
/// its own substream, so the result does not depend on the thread count.
pub fn sample_statistics(config: &PercentileConfig, k: usize) -> Vec<ExtensionStatistics> {
    let key = mix_seed(config.seed, k as u64);
    (0..config.samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = RandomStream::substream(key, i as u64);
            sample_extension_statistics(config.d1, config.d2, k, config.kind, &mut stream)
        })
        .collect()
}

/// Epsilon quantiles `eps(p, k)` of the minimal extension DHP.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileTable {
    pub d1: usize,
    pub d2: usize,
    pub kind: ConsistencyKind,
    /// Ascending.
    pub ks: Vec<usize>,
    /// Ascending.
    pub ps: Vec<f64>,
    /// `epsilon[p_index][k_index]`.
    pub epsilon: Vec<Vec<f64>>,
    /// Bootstrap standard errors, same layout as `epsilon`.
    pub standard_errors: Option<Vec<Vec<f64>>>,
    pub samples: usize,
    pub seed: u64,
}

pub fn estimate_percentiles(config: &PercentileConfig) -> Result<PercentileTable> {
    config.validate()?;
    let mut ks = config.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut ps = config.ps.clone();
    ps.sort_by(f64::total_cmp);
    ps.dedup();

    let columns: Vec<(Vec<f64>, Vec<f64>)> = ks
        .iter()
        .map(|&k| {
            let mut exact: Vec<f64> = sample_statistics(config, k).iter().map(|s| s.exact).collect();
            exact.sort_by(f64::total_cmp);
            let eps = ps.iter().map(|&p| quantile_sorted(&exact, p)).collect();
            let se = bootstrap_errors(&exact, &ps, config.bootstrap_resamples, mix_seed(config.seed ^ 0xB007, k as u64));
            (eps, se)
        })
        .collect();

    let transpose = |pick: &dyn Fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<Vec<f64>> {
        (0..ps.len()).map(|pi| columns.iter().map(|c| pick(c)[pi]).collect()).collect()
    };
    let epsilon = transpose(&|c| &c.0);
    let standard_errors = (config.bootstrap_resamples > 1).then(|| transpose(&|c| &c.1));
    Ok(PercentileTable {
        d1: config.d1,
        d2: config.d2,
        kind: config.kind,
        ks,
        ps,
        epsilon,
        standard_errors,
        samples: config.samples,
        seed: config.seed,
    })
}

fn bootstrap_errors(sorted: &[f64], ps: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    if resamples < 2 {
        return vec![0.0; ps.len()];
    }
    let n = sorted.len();
    let estimates: Vec<Vec<f64>> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut stream = RandomStream::substream(seed, b as u64);
            let mut draw: Vec<f64> = (0..n).map(|_| sorted[(stream.next_u64() % n as u64) as usize]).collect();
            draw.sort_by(f64::total_cmp);
            ps.iter().map(|&p| quantile_sorted(&draw, p)).collect()
        })
        .collect();
    (0..ps.len())
        .map(|pi| {
            let mean = estimates.iter().map(|e| e[pi]).sum::<f64>() / resamples as f64;
            let var = estimates.iter().map(|e| (e[pi] - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
            var.sqrt()
        })
        .collect()
}

const CSV_HEADER: &str = "k,p,epsilon,samples,seed";

impl PercentileTable {
    pub fn is_empty(&self) -> bool {
        self.ks.is_empty() || self.ps.is_empty()
    }

    fn p_index(&self, p: f64) -> Result<usize> {
        self.ps.iter().position(|&q| (q - p).abs() < 1e-12).ok_or(Error::MissingPercentile(p))
    }

    /// The tabulated value at an exact grid point.
    pub fn get(&self, p: f64, k: usize) -> Option<f64> {
        let pi = self.p_index(p).ok()?;
        let ki = self.ks.iter().position(|&x| x == k)?;
        Some(self.epsilon[pi][ki])
    }

    /// `eps(p, k)`, linear in `k` between grid points and clamped to the
    /// table's end values outside them.
    pub fn lookup(&self, p: f64, k: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyTable);
        }
        let row = &self.epsilon[self.p_index(p)?];
        let ks = &self.ks;
        if k <= ks[0] as f64 {
            return Ok(row[0]);
        }
        if k >= ks[ks.len() - 1] as f64 {
            return Ok(row[ks.len() - 1]);
        }
        let hi = ks.partition_point(|&x| (x as f64) < k);
        let (k0, k1) = (ks[hi - 1] as f64, ks[hi] as f64);
        let w = (k - k0) / (k1 - k0);
        Ok(row[hi - 1] + w * (row[hi] - row[hi - 1]))
    }

    /// CSV rows `k,p,epsilon,samples,seed`, preceded by a comment line
    /// carrying the dimensions and criterion.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# d1={} d2={} criterion={}", self.d1, self.d2, self.kind).unwrap();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for (ki, k) in self.ks.iter().enumerate() {
            for (pi, p) in self.ps.iter().enumerate() {
                writeln!(s, "{k},{p},{},{},{}", self.epsilon[pi][ki], self.samples, self.seed).unwrap();
            }
        }
        s
    }

    /// Parses [`PercentileTable::to_csv`] output. Other `#` lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse { line, message };
        let (mut d1, mut d2, mut kind) = (0, 0, ConsistencyKind::MediumDhc);
        let mut cells: Vec<(usize, f64, f64)> = Vec::new();
        let (mut samples, mut seed) = (0, 0);
        let mut header_seen = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    match field.split_once('=') {
                        Some(("d1", v)) => d1 = v.parse().map_err(|e| perr(lineno, format!("d1: {e}")))?,
                        Some(("d2", v)) => d2 = v.parse().map_err(|e| perr(lineno, format!("d2: {e}")))?,
                        Some(("criterion", v)) => kind = v.parse().map_err(|e| perr(lineno, format!("{e}")))?,
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line != CSV_HEADER {
                    return Err(perr(lineno, format!("expected header `{CSV_HEADER}`")));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(perr(lineno, format!("expected 5 fields, got {}", f.len())));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|e| perr(lineno, format!("field {}: {e}", i + 1)));
            let k = f[0].parse::<usize>().map_err(|e| perr(lineno, format!("k: {e}")))?;
            cells.push((k, num(1)?, num(2)?));
            samples = f[3].parse().map_err(|e| perr(lineno, format!("samples: {e}")))?;
            seed = f[4].parse().map_err(|e| perr(lineno, format!("seed: {e}")))?;
        }
        if cells.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut ks: Vec<usize> = cells.iter().map(|c| c.0).collect();
        ks.sort_unstable();
        ks.dedup();
        let mut ps: Vec<f64> = cells.iter().map(|c| c.1).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        let mut epsilon = vec![vec![f64::NAN; ks.len()]; ps.len()];
        for (k, p, e) in cells {
            let ki = ks.binary_search(&k).unwrap();
            let pi = ps.iter().position(|&q| q == p).unwrap();
            epsilon[pi][ki] = e;
        }
        if epsilon.iter().flatten().any(|e| e.is_nan()) {
            return Err(perr(0, "table is not a full k x p grid".into()));
        }
        Ok(Self {
            d1,
            d2,
            kind,
            ks,
            ps,
            epsilon,
            standard_errors: None,
            samples,
            seed,
        })
    }
}
