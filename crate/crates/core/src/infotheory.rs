//! Plug-in (histogram) estimators of entropy and mutual information over
//! discretized columns. All quantities are in bits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Above this many cells, joint histograms switch from a dense table to a map.
const DENSE_CELL_LIMIT: u64 = 1 << 22;

#[derive(Debug, Error, PartialEq)]
pub enum InfoError {
    #[error("cannot discretize an empty column")]
    EmptyColumn,
    #[error("column contains non-finite values")]
    NonFinite,
    #[error("columns have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("binning needs at least 2 bins, got {0}")]
    InvalidBins(usize),
    #[error("code {code} out of range for {k} bins")]
    CodeOutOfRange { code: u32, k: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningStrategy {
    EqualWidth,
    EqualFrequency,
}

impl std::str::FromStr for BinningStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal_width" => Ok(Self::EqualWidth),
            "equal_frequency" => Ok(Self::EqualFrequency),
            other => Err(format!("unknown binning strategy `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub n_bins: usize,
    pub strategy: BinningStrategy,
}

impl BinningConfig {
    pub fn new(n_bins: usize, strategy: BinningStrategy) -> Result<Self, InfoError> {
        if n_bins < 2 {
            return Err(InfoError::InvalidBins(n_bins));
        }
        Ok(Self { n_bins, strategy })
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            n_bins: 10,
            strategy: BinningStrategy::EqualFrequency,
        }
    }
}

/// Integer codes in `0..k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteColumn {
    codes: Vec<u32>,
    k: u32,
    origin: String,
}

impl DiscreteColumn {
    pub fn from_codes(codes: Vec<u32>, k: u32) -> Result<Self, InfoError> {
        if let Some(&code) = codes.iter().find(|&&c| c >= k) {
            return Err(InfoError::CodeOutOfRange { code, k });
        }
        Ok(Self {
            codes,
            k: k.max(1),
            origin: String::new(),
        })
    }

    /// Binary labels as a two-symbol column.
    pub fn from_labels(labels: &[u8]) -> Self {
        compact(labels.iter().map(|&l| u32::from(l)).collect(), 2, "label")
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn origin(&self) -> &str {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Column restricted to `rows`.
    pub fn select(&self, rows: &[usize]) -> Self {
        compact(rows.iter().map(|&r| self.codes[r]).collect(), self.k, &self.origin)
    }
}

/// Renumbers codes so only occupied symbols remain, preserving their order.
fn compact(codes: Vec<u32>, k: u32, origin: &str) -> DiscreteColumn {
    let mut remap = vec![u32::MAX; k as usize];
    for &c in &codes {
        remap[c as usize] = 0;
    }
    let mut next = 0;
    for slot in remap.iter_mut().filter(|s| **s == 0) {
        *slot = next;
        next += 1;
    }
    DiscreteColumn {
        codes: codes.into_iter().map(|c| remap[c as usize]).collect(),
        k: next.max(1),
        origin: origin.to_string(),
    }
}

/// Maps a numeric column onto bin codes.
///
/// Columns with at most `n_bins` distinct values pass through as the rank of
/// each distinct value. Otherwise equal-width bins are right-closed intervals
/// over `[min, max]`, and equal-frequency bins start at empirical quantiles
/// with tied values kept together. Empty bins are dropped, so `k` may be
/// smaller than `n_bins`.
pub fn discretize(column: &[f64], config: &BinningConfig) -> Result<DiscreteColumn, InfoError> {
    if column.is_empty() {
        return Err(InfoError::EmptyColumn);
    }
    if column.iter().any(|v| !v.is_finite()) {
        return Err(InfoError::NonFinite);
    }
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));

    let mut distinct_rank = vec![0u32; n];
    let mut distinct_start = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if pos == 0 || column[i] != column[order[pos - 1]] {
            distinct_start.push(pos);
        }
        distinct_rank[i] = (distinct_start.len() - 1) as u32;
    }
    let n_distinct = distinct_start.len();
    if n_distinct <= config.n_bins {
        return Ok(DiscreteColumn {
            codes: distinct_rank,
            k: n_distinct as u32,
            origin: String::new(),
        });
    }

    let bins = config.n_bins;
    let codes: Vec<u32> = match config.strategy {
        BinningStrategy::EqualWidth => {
            let lo = column[order[0]];
            let hi = column[order[n - 1]];
            let range = hi - lo;
            column
                .iter()
                .map(|&v| {
                    let t = (v - lo) / range * bins as f64;
                    (t.ceil() as usize).saturating_sub(1).min(bins - 1) as u32
                })
                .collect()
        }
        BinningStrategy::EqualFrequency => {
            let group_bin: Vec<u32> = distinct_start
                .iter()
                .map(|&pos| (pos * bins / n) as u32)
                .collect();
            distinct_rank.iter().map(|&r| group_bin[r as usize]).collect()
        }
    };
    Ok(compact(codes, bins as u32, ""))
}

/// Entropy in bits of a histogram with total mass `n`.
///
/// Counts are summed in ascending order so that permuting the cells cannot
/// change the result.
fn entropy_of_counts(mut counts: Vec<u64>, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    counts.retain(|&c| c > 0);
    counts.sort_unstable();
    let n = n as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

fn check_lengths(cols: &[&DiscreteColumn]) -> Result<usize, InfoError> {
    let n = cols[0].len();
    for c in &cols[1..] {
        if c.len() != n {
            return Err(InfoError::LengthMismatch(n, c.len()));
        }
    }
    Ok(n)
}

/// Nonzero cells of the joint histogram of `cols`, keyed by mixed-radix cell
/// index (first column most significant) and sorted by key.
fn cell_counts(cols: &[&DiscreteColumn]) -> Vec<(u64, u64)> {
    let n = cols[0].len();
    let size: u64 = cols.iter().map(|c| u64::from(c.k)).product();
    let key = |i: usize| {
        cols.iter()
            .fold(0u64, |acc, c| acc * u64::from(c.k) + u64::from(c.codes[i]))
    };
    if size <= DENSE_CELL_LIMIT {
        let mut table = vec![0u64; size as usize];
        for i in 0..n {
            table[key(i) as usize] += 1;
        }
        table
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(k, c)| (k as u64, c))
            .collect()
    } else {
        let mut map: HashMap<u64, u64> = HashMap::new();
        for i in 0..n {
            *map.entry(key(i)).or_default() += 1;
        }
        let mut cells: Vec<(u64, u64)> = map.into_iter().collect();
        cells.sort_unstable();
        cells
    }
}

fn joint_entropy_of(cols: &[&DiscreteColumn]) -> Result<f64, InfoError> {
    let n = check_lengths(cols)?;
    let counts = cell_counts(cols).into_iter().map(|(_, c)| c).collect();
    Ok(entropy_of_counts(counts, n as u64))
}

pub fn entropy(x: &DiscreteColumn) -> f64 {
    joint_entropy_of(&[x]).expect("single column")
}

pub fn joint_entropy(x: &DiscreteColumn, y: &DiscreteColumn) -> Result<f64, InfoError> {
    joint_entropy_of(&[x, y])
}

/// H(X, Y, Z) from the three-way joint histogram.
pub fn joint_entropy3(
    x: &DiscreteColumn,
    y: &DiscreteColumn,
    z: &DiscreteColumn,
) -> Result<f64, InfoError> {
    joint_entropy_of(&[x, y, z])
}

/// I(X; Y) = H(X) + H(Y) - H(X, Y), clamped at zero.
pub fn mutual_information(x: &DiscreteColumn, y: &DiscreteColumn) -> Result<f64, InfoError> {
    let hxy = joint_entropy(x, y)?;
    Ok((entropy(x) + entropy(y) - hxy).max(0.0))
}

/// I(X; Y | Z) as the p(z)-weighted sum of per-stratum mutual information.
pub fn conditional_mutual_information(
    x: &DiscreteColumn,
    y: &DiscreteColumn,
    z: &DiscreteColumn,
) -> Result<f64, InfoError> {
    let n = check_lengths(&[x, y, z])? as f64;
    let zx = cell_counts(&[z, x]);
    let zy = cell_counts(&[z, y]);
    let zxy = cell_counts(&[z, x, y]);
    let (kx, ky) = (u64::from(x.k), u64::from(y.k));

    let grouped = |cells: Vec<(u64, u64)>, inner: u64| {
        let mut groups: Vec<(u64, Vec<u64>)> = Vec::new();
        for (key, c) in cells {
            let stratum = key / inner;
            match groups.last_mut() {
                Some((s, v)) if *s == stratum => v.push(c),
                _ => groups.push((stratum, vec![c])),
            }
        }
        groups
    };
    let zx = grouped(zx, kx);
    let zy = grouped(zy, ky);
    let zxy = grouped(zxy, kx * ky);

    let mut total = 0.0;
    for ((gx, gy), gxy) in zx.into_iter().zip(zy).zip(zxy) {
        debug_assert!(gx.0 == gy.0 && gy.0 == gxy.0);
        let nz: u64 = gx.1.iter().sum();
        let within = entropy_of_counts(gx.1, nz) + entropy_of_counts(gy.1, nz)
            - entropy_of_counts(gxy.1, nz);
        total += nz as f64 / n * within;
    }
    Ok(total.max(0.0))
}

/// The paired variable (X, Y) coded as `x * k_y + y`, with unused codes dropped.
pub fn pair(x: &DiscreteColumn, y: &DiscreteColumn) -> Result<DiscreteColumn, InfoError> {
    check_lengths(&[x, y])?;
    let ky = u64::from(y.k);
    let size = u64::from(x.k) * ky;
    let codes: Vec<u64> = x
        .codes
        .iter()
        .zip(&y.codes)
        .map(|(&a, &b)| u64::from(a) * ky + u64::from(b))
        .collect();
    let origin = format!("({},{})", x.origin, y.origin);
    if size <= DENSE_CELL_LIMIT {
        let narrow = codes.into_iter().map(|c| c as u32).collect();
        Ok(compact(narrow, size as u32, &origin))
    } else {
        let mut distinct: Vec<u64> = codes.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let codes = codes
            .iter()
            .map(|c| distinct.binary_search(c).expect("present") as u32)
            .collect();
        Ok(DiscreteColumn {
            codes,
            k: distinct.len() as u32,
            origin,
        })
    }
}
