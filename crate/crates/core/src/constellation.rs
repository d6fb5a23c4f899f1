//! Basic 1-D constellations, the built-in mother-constellation (MC) pool and
//! the dimension-permutation search that turns a 1-D constellation into an
//! N-dimensional MC.
//!
//! The quality metric throughout is the average inverse product distance
//! (AIPD) of the MC:
//!
//! ```text
//! AIPD = (1/M) * sum_i sum_{m != i} prod_n |c[n][i] - c[n][m]|^-2
//! ```
//!
//! A pair of codewords that coincides in one dimension contributes `+inf`
//! (a valid, if useless, permutation). A pair that coincides in every
//! dimension is a degenerate constellation and is reported as an error.

use std::collections::BTreeMap;

use num_complex::Complex;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::scalar::Real;

/// Modulation orders supported by the MC pool.
pub const SUPPORTED_ORDERS: [u32; 4] = [2, 4, 8, 16];

/// A unit-energy one-dimensional constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation<T> {
    points: Vec<Complex<T>>,
}

impl<T: Real> Constellation<T> {
    /// Validates `points` as given: order in {2, 4, 8, 16}, distinct points
    /// and unit average energy (within 1e-9).
    pub fn new(points: Vec<Complex<T>>) -> Result<Self> {
        let c = Self { points };
        c.validate_shape()?;
        let energy = c.average_energy();
        if (energy - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::InvalidConstellation(format!(
                "average energy {energy} is not 1"
            )));
        }
        Ok(c)
    }

    /// Scales `points` to unit average energy, then validates.
    pub fn normalized(points: Vec<Complex<T>>) -> Result<Self> {
        let raw = Self { points };
        raw.validate_shape()?;
        let energy = raw.average_energy();
        if energy <= T::zero() {
            return Err(Error::InvalidConstellation("zero energy".into()));
        }
        let scale = energy.sqrt().recip();
        Self::new(raw.points.into_iter().map(|p| p * scale).collect())
    }

    fn validate_shape(&self) -> Result<()> {
        let m = self.points.len();
        if !SUPPORTED_ORDERS.contains(&(m as u32)) {
            return Err(Error::InvalidConstellation(format!(
                "order {m} not in {SUPPORTED_ORDERS:?}"
            )));
        }
        for i in 0..m {
            for k in (i + 1)..m {
                if self.points[i] == self.points[k] {
                    return Err(Error::InvalidConstellation(format!(
                        "points {i} and {k} coincide"
                    )));
                }
            }
        }
        Ok(())
    }

    /// BPSK, `{-1, +1}`.
    pub fn bpsk() -> Self {
        Self::normalized(vec![c(-1.0, 0.0), c(1.0, 0.0)]).expect("bpsk")
    }

    /// QPSK in the order used by the first row of the built-in M = 4 MC.
    pub fn qpsk() -> Self {
        Self::normalized(vec![c(1.0, 1.0), c(1.0, -1.0), c(-1.0, 1.0), c(-1.0, -1.0)])
            .expect("qpsk")
    }

    /// Non-square 8-QAM, recovered from the first row of the built-in M = 8 MC.
    pub fn ns_qam8() -> Self {
        Self::normalized(MC8[0].iter().map(|&(re, im)| c(re, im)).collect()).expect("ns-qam")
    }

    /// Square 16-QAM on the `{+-1, +-3}` grid, in the order of the first row
    /// of the built-in M = 16 MC.
    pub fn qam16() -> Self {
        let level = |x: f64| if x.abs() > 0.4 { 3.0 * x.signum() } else { x.signum() };
        Self::normalized(
            MC16[0]
                .iter()
                .map(|&(re, im)| c(level(re), level(im)))
                .collect(),
        )
        .expect("16-qam")
    }

    /// The basic constellation used for order `m`.
    pub fn basic(m: u32) -> Result<Self> {
        match m {
            2 => Ok(Self::bpsk()),
            4 => Ok(Self::qpsk()),
            8 => Ok(Self::ns_qam8()),
            16 => Ok(Self::qam16()),
            _ => Err(Error::InvalidConstellation(format!("no basic constellation of order {m}"))),
        }
    }

    pub fn order(&self) -> u32 {
        self.points.len() as u32
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn average_energy(&self) -> T {
        self.points.iter().map(|p| p.norm_sqr()).sum::<T>() / T::count(self.points.len())
    }
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

/// An N x M mother constellation: row n holds the n-th complex entry of
/// each of the M codewords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotherConstellation<T> {
    pub order: u32,
    pub dimension: usize,
    pub matrix: Vec<Vec<Complex<T>>>,
    pub aipd: T,
}

impl<T: Real> MotherConstellation<T> {
    /// Builds an MC from its rows and computes the AIPD.
    pub fn from_rows(matrix: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let dimension = matrix.len();
        if dimension == 0 {
            return Err(Error::InvalidConstellation("no rows".into()));
        }
        let m = matrix[0].len();
        if matrix.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("MC rows differ in length".into()));
        }
        let aipd = aipd_of_mc(&matrix)?;
        Ok(Self {
            order: m as u32,
            dimension,
            matrix,
            aipd,
        })
    }

    /// Codeword `m` as an N-vector.
    pub fn codeword(&self, m: usize) -> Vec<Complex<T>> {
        self.matrix.iter().map(|row| row[m]).collect()
    }

    /// Average codeword energy `(1/M) sum_m ||c_m||^2`.
    pub fn average_codeword_energy(&self) -> T {
        let total: T = self.matrix.iter().flatten().map(|p| p.norm_sqr()).sum();
        total / T::lit(self.order as f64)
    }

    /// True when every row is a permutation of the same multiset of points.
    pub fn rows_share_points(&self, tol: T) -> bool {
        let reference = &self.matrix[0];
        self.matrix.iter().skip(1).all(|row| {
            let mut used = vec![false; row.len()];
            row.iter().all(|p| {
                match reference
                    .iter()
                    .enumerate()
                    .find(|(i, q)| !used[*i] && (*p - **q).norm() <= tol)
                {
                    Some((i, _)) => {
                        used[i] = true;
                        true
                    }
                    None => false,
                }
            })
        })
    }
}

/// AIPD of an N x M matrix whose columns are codewords.
pub fn aipd_of_mc<T: Real>(rows: &[Vec<Complex<T>>]) -> Result<T> {
    let views: Vec<&[Complex<T>]> = rows.iter().map(|r| r.as_slice()).collect();
    inverse_product_distance(&views)
}

/// Shared AIPD kernel over a set of dimensions (rows).
pub(crate) fn inverse_product_distance<T: Real>(rows: &[&[Complex<T>]]) -> Result<T> {
    let m = rows.first().map_or(0, |r| r.len());
    if m == 0 {
        return Err(Error::InvalidConstellation("empty constellation".into()));
    }
    let mut total = T::zero();
    for i in 0..m {
        for k in (i + 1)..m {
            let mut product = T::one();
            let mut zero_dims = 0usize;
            for row in rows {
                let d = (row[i] - row[k]).norm_sqr();
                if d == T::zero() {
                    zero_dims += 1;
                } else {
                    product = product * d;
                }
            }
            if zero_dims == rows.len() {
                return Err(Error::DegenerateConstellation(i, k));
            }
            if zero_dims > 0 {
                total = T::infinity();
            } else {
                // the (i, k) and (k, i) terms are equal
                total = total + T::lit(2.0) / product;
            }
        }
    }
    Ok(total / T::count(m))
}

/// The LDS baseline: every dimension carries `base` in its canonical order.
pub fn lds_mc<T: Real>(base: &Constellation<T>, dimension: usize) -> Result<MotherConstellation<T>> {
    if dimension == 0 {
        return Err(Error::InvalidArgument("MC dimension must be at least 1".into()));
    }
    let row = scaled_row(base, dimension);
    MotherConstellation::from_rows(vec![row; dimension])
}

fn scaled_row<T: Real>(base: &Constellation<T>, dimension: usize) -> Vec<Complex<T>> {
    let s = T::count(dimension).sqrt().recip();
    base.points().iter().map(|p| p * s).collect()
}

/// How [`permute_mc_with`] searches the per-dimension permutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PermutationStrategy {
    /// Exhaustive `M!` search when N = 2 and M <= 8, swap descent otherwise.
    Auto,
    /// Pairwise-swap descent with seeded random restarts.
    SwapDescent,
    /// Exhaustive search over the second row (N = 2 only).
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationSearch {
    pub strategy: PermutationStrategy,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PermutationSearch {
    fn default() -> Self {
        Self {
            strategy: PermutationStrategy::Auto,
            restarts: 32,
            seed: 0,
        }
    }
}

/// Permutes `base` across `dimension` rows to minimise the MC AIPD, with
/// default search settings.
pub fn permute_mc<T: Real>(base: &Constellation<T>, dimension: usize) -> Result<MotherConstellation<T>> {
    permute_mc_with(base, dimension, &PermutationSearch::default())
}

/// Row 0 keeps `base` in canonical order; rows 1..N are the searched
/// permutations. Rows are scaled by `1/sqrt(N)` so codewords have unit energy.
pub fn permute_mc_with<T: Real>(
    base: &Constellation<T>,
    dimension: usize,
    search: &PermutationSearch,
) -> Result<MotherConstellation<T>> {
    if dimension == 0 {
        return Err(Error::InvalidArgument("MC dimension must be at least 1".into()));
    }
    let row = scaled_row(base, dimension);
    if dimension == 1 {
        return MotherConstellation::from_rows(vec![row]);
    }
    let m = row.len();
    let exhaustive = match search.strategy {
        PermutationStrategy::Auto => dimension == 2 && m <= 8,
        PermutationStrategy::Exhaustive => {
            if dimension != 2 {
                return Err(Error::InvalidArgument(
                    "exhaustive permutation search supports N = 2 only".into(),
                ));
            }
            true
        }
        PermutationStrategy::SwapDescent => false,
    };
    let perms = if exhaustive {
        vec![exhaustive_second_row(&row)]
    } else {
        swap_descent(&row, dimension, search.restarts.max(1), search.seed)
    };
    let matrix = std::iter::once(row.clone())
        .chain(perms.iter().map(|p| p.iter().map(|&i| row[i]).collect()))
        .collect();
    MotherConstellation::from_rows(matrix)
}

/// Pairwise squared distances of one row.
fn distance_table<T: Real>(row: &[Complex<T>]) -> Vec<Vec<T>> {
    row.iter()
        .map(|a| row.iter().map(|b| (*a - *b).norm_sqr()).collect())
        .collect()
}

/// AIPD of the MC whose row n is `row` permuted by `perms[n]` (row 0 is the
/// identity), from a precomputed distance table.
fn permuted_aipd<T: Real>(dist: &[Vec<T>], perms: &[Vec<usize>]) -> T {
    let m = dist.len();
    let mut total = T::zero();
    for i in 0..m {
        for k in (i + 1)..m {
            let mut product = dist[i][k];
            for p in perms {
                product = product * dist[p[i]][p[k]];
            }
            if product == T::zero() {
                return T::infinity();
            }
            total = total + T::lit(2.0) / product;
        }
    }
    total / T::count(m)
}

fn exhaustive_second_row<T: Real>(row: &[Complex<T>]) -> Vec<usize> {
    let dist = distance_table(row);
    let m = row.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = perm.clone();
    let mut best_value = permuted_aipd(&dist, std::slice::from_ref(&perm));
    // lexicographic enumeration; strict improvement keeps the smallest permutation on ties
    while next_permutation(&mut perm) {
        let v = permuted_aipd(&dist, std::slice::from_ref(&perm));
        if v < best_value {
            best_value = v;
            best.clone_from(&perm);
        }
    }
    best
}

pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn swap_descent<T: Real>(row: &[Complex<T>], dimension: usize, restarts: usize, seed: u64) -> Vec<Vec<usize>> {
    let dist = distance_table(row);
    let m = row.len();
    let results: Vec<(T, usize, Vec<Vec<usize>>)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut perms: Vec<Vec<usize>> = vec![(0..m).collect(); dimension - 1];
            // restart 0 starts from the identity, so the result never loses to LDS
            if r > 0 {
                let mut rng = stream_rng(seed, &[0x5045_524d, r as u64], 0);
                for p in perms.iter_mut() {
                    p.shuffle(&mut rng);
                }
            }
            let mut value = permuted_aipd(&dist, &perms);
            loop {
                let mut improved = false;
                for n in 0..perms.len() {
                    for a in 0..m {
                        for b in (a + 1)..m {
                            perms[n].swap(a, b);
                            let v = permuted_aipd(&dist, &perms);
                            if v < value {
                                value = v;
                                improved = true;
                            } else {
                                perms[n].swap(a, b);
                            }
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
            (value, r, perms)
        })
        .collect();
    results
        .into_iter()
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)))
        .map(|(_, _, p)| p)
        .expect("at least one restart")
}

// Built-in mother constellations with rounded entries, stored row-major as (re, im).
const MC2: [[(f64, f64); 2]; 2] = [
    [(-0.707, 0.0), (0.707, 0.0)],
    [(-0.707, 0.0), (0.707, 0.0)],
];

const MC4: [[(f64, f64); 4]; 2] = [
    [(0.50, 0.50), (0.50, -0.50), (-0.50, 0.50), (-0.50, -0.50)],
    [(0.50, -0.50), (-0.50, 0.50), (-0.50, -0.50), (0.50, 0.50)],
];

// Row 0, column 1 is printed as +0.58i, duplicating column 3; -0.58i is the
// only completion that makes the row a permutation of the row-1 point set.
const MC8: [[(f64, f64); 8]; 2] = [
    [
        (-0.67, -0.58),
        (0.0, -0.58),
        (-0.33, 0.0),
        (0.0, 0.58),
        (-0.67, 0.58),
        (0.33, 0.0),
        (0.67, -0.58),
        (0.67, 0.58),
    ],
    [
        (0.33, 0.0),
        (-0.67, -0.58),
        (-0.67, 0.58),
        (0.67, 0.58),
        (0.0, -0.58),
        (0.67, -0.58),
        (0.0, 0.58),
        (-0.33, 0.0),
    ],
];

const MC16: [[(f64, f64); 16]; 2] = [
    [
        (0.67, 0.67),
        (0.67, -0.22),
        (0.67, 0.22),
        (0.67, -0.67),
        (-0.22, 0.67),
        (-0.22, -0.22),
        (-0.22, 0.22),
        (-0.22, -0.67),
        (0.22, 0.67),
        (0.22, -0.22),
        (0.22, 0.22),
        (0.22, -0.67),
        (-0.67, 0.67),
        (-0.67, -0.22),
        (-0.67, 0.22),
        (-0.67, -0.67),
    ],
    [
        (0.22, -0.22),
        (0.67, -0.22),
        (-0.67, -0.22),
        (-0.22, -0.22),
        (0.22, -0.67),
        (0.67, -0.67),
        (-0.67, -0.67),
        (-0.22, -0.67),
        (0.22, 0.67),
        (0.67, 0.67),
        (-0.67, 0.67),
        (-0.22, 0.67),
        (0.22, 0.22),
        (0.67, 0.22),
        (-0.67, 0.22),
        (-0.22, 0.22),
    ],
];

fn rows_from<T: Real, const M: usize>(table: &[[(f64, f64); M]; 2]) -> Vec<Vec<Complex<T>>> {
    table
        .iter()
        .map(|row| row.iter().map(|&(re, im)| c(re, im)).collect())
        .collect()
}

/// A set of mother constellations keyed by modulation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McPool<T> {
    pool: BTreeMap<u32, MotherConstellation<T>>,
}

impl<T: Real> McPool<T> {
    pub fn new(mcs: impl IntoIterator<Item = MotherConstellation<T>>) -> Result<Self> {
        let mut pool = BTreeMap::new();
        let mut dimension = None;
        for mc in mcs {
            if *dimension.get_or_insert(mc.dimension) != mc.dimension {
                return Err(Error::DimensionMismatch("MCs in a pool must share N".into()));
            }
            pool.insert(mc.order, mc);
        }
        if pool.is_empty() {
            return Err(Error::InvalidArgument("empty MC pool".into()));
        }
        Ok(Self { pool })
    }

    pub fn get(&self, order: u32) -> Result<&MotherConstellation<T>> {
        self.pool.get(&order).ok_or(Error::MissingOrder(order))
    }

    pub fn orders(&self) -> Vec<u32> {
        self.pool.keys().copied().collect()
    }

    pub fn dimension(&self) -> usize {
        self.pool.values().next().map_or(0, |mc| mc.dimension)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MotherConstellation<T>> {
        self.pool.values()
    }

    /// AIPD of every MC in the pool, keyed by order.
    pub fn aipd_by_order(&self) -> BTreeMap<u32, T> {
        self.pool.iter().map(|(&m, mc)| (m, mc.aipd)).collect()
    }

    /// Parses a pool exported by [`McPool::to_json`]. AIPDs are recomputed
    /// from the matrices; a stored value that disagrees beyond 1e-9 is rejected.
    pub fn from_json(text: &str) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let entries: Vec<MotherConstellation<T>> =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        let mut mcs = Vec::with_capacity(entries.len());
        for e in entries {
            let mc = MotherConstellation::from_rows(e.matrix)?;
            if mc.order != e.order || mc.dimension != e.dimension {
                return Err(Error::DimensionMismatch(format!(
                    "MC declared as {}x{} but matrix is {}x{}",
                    e.dimension, e.order, mc.dimension, mc.order
                )));
            }
            let tol = T::lit(1e-9) * mc.aipd.abs().max(T::one());
            if !(mc.aipd.is_infinite() && e.aipd.is_infinite()) && (mc.aipd - e.aipd).abs() > tol {
                return Err(Error::InvalidConstellation(format!(
                    "stored AIPD {} disagrees with recomputed {}",
                    e.aipd, mc.aipd
                )));
            }
            mcs.push(mc);
        }
        Self::new(mcs)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        let entries: Vec<&MotherConstellation<T>> = self.pool.values().collect();
        serde_json::to_string_pretty(&entries).map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// The built-in two-dimensional MC pool for M = 2, 4, 8 and 16, with AIPDs
/// recomputed from the stored matrices.
pub fn builtin_mc_pool<T: Real>() -> McPool<T> {
    let mcs = [rows_from(&MC2), rows_from(&MC4), rows_from(&MC8), rows_from(&MC16)]
        .into_iter()
        .map(|rows| MotherConstellation::from_rows(rows).expect("built-in MC is valid"));
    McPool::new(mcs).expect("built-in pool is valid")
}
