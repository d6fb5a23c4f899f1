//! Sum-product message passing over the SCMA factor graph, plus an
//! exhaustive maximum-likelihood detector for small instances.
//!
//! Messages are kept in the linear domain and renormalized after every
//! update. Each RN keeps a table of the Gaussian likelihood of every joint
//! codeword hypothesis of its users; that table depends only on the
//! observation and is built once per decode.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::codebook::CodebookSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest joint hypothesis space [`ml_decode`] will enumerate.
pub const ML_SEARCH_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpaConfig {
    pub max_iterations: usize,
    /// Weight of the previous VN message in `[0, 1)`.
    pub damping: f64,
    /// Stop once no VN message entry moves by more than this.
    pub convergence_epsilon: f64,
}

impl Default for MpaConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            damping: 0.0,
            convergence_epsilon: 1e-6,
        }
    }
}

impl MpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig(format!("damping {} not in [0, 1)", self.damping)));
        }
        if !(self.convergence_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("convergence_epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Hard decisions and per-user posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct MpaOutput<T> {
    pub decisions: Vec<usize>,
    pub posteriors: Vec<Vec<T>>,
    pub iterations: usize,
}

/// Edge layout of a codebook set, reusable across decodes.
#[derive(Debug, Clone)]
pub struct MpaDecoder<'a, T> {
    cbs: &'a CodebookSet<T>,
    cfg: MpaConfig,
    /// users attached to each RN
    rn_users: Vec<Vec<usize>>,
    /// (rn, slot in rn_users[rn]) for every user
    vn_edges: Vec<Vec<(usize, usize)>>,
}

impl<'a, T: Real> MpaDecoder<'a, T> {
    pub fn new(cbs: &'a CodebookSet<T>, cfg: MpaConfig) -> Result<Self> {
        cfg.validate()?;
        let k_count = cbs.resources();
        let mut rn_users = vec![Vec::new(); k_count];
        let mut vn_edges = vec![Vec::new(); cbs.users()];
        for (j, edges) in vn_edges.iter_mut().enumerate() {
            for &k in cbs.user_codebook(j).support() {
                edges.push((k, rn_users[k].len()));
                rn_users[k].push(j);
            }
        }
        Ok(Self {
            cbs,
            cfg,
            rn_users,
            vn_edges,
        })
    }

    pub fn decode(&self, y: &[Complex<T>], h: &ChannelRealization<T>, n0: T) -> Result<MpaOutput<T>> {
        let cbs = self.cbs;
        let k_count = cbs.resources();
        let j_count = cbs.users();
        if !(n0 > T::zero()) {
            return Err(Error::InvalidArgument(format!("noise power {n0} must be positive")));
        }
        if y.len() != k_count {
            return Err(Error::DimensionMismatch(format!("{} observations for {k_count} RNs", y.len())));
        }
        if h.users() != j_count || h.resources() != k_count {
            return Err(Error::DimensionMismatch("channel shape does not match the codebook set".into()));
        }
        let orders: Vec<usize> = (0..j_count).map(|j| cbs.user_order(j)).collect();
        let amp: Vec<T> = cbs.powers().iter().map(|p| p.sqrt()).collect();

        let tables: Vec<Vec<T>> = (0..k_count)
            .map(|k| likelihood_table(y[k], &self.rn_users[k], &orders, |j, m| {
                h.h[j][k] * cbs.user_codebook(j).entry(k, m) * amp[j]
            }, n0))
            .collect();

        let mut v2r: Vec<Vec<Vec<T>>> = self
            .rn_users
            .iter()
            .map(|users| users.iter().map(|&j| uniform(orders[j])).collect())
            .collect();
        let mut r2v = v2r.clone();
        let damping = T::lit(self.cfg.damping);
        let eps = T::lit(self.cfg.convergence_epsilon);
        let mut iterations = 0;
        for _ in 0..self.cfg.max_iterations {
            iterations += 1;
            for k in 0..k_count {
                rn_update(&tables[k], &self.rn_users[k], &orders, &v2r[k], &mut r2v[k]);
            }
            let mut delta = T::zero();
            for (j, edges) in self.vn_edges.iter().enumerate() {
                for (e, &(k, slot)) in edges.iter().enumerate() {
                    let mut msg = vec![T::one(); orders[j]];
                    for (e2, &(k2, slot2)) in edges.iter().enumerate() {
                        if e2 != e {
                            for (x, r) in msg.iter_mut().zip(&r2v[k2][slot2]) {
                                *x = *x * *r;
                            }
                        }
                    }
                    normalize(&mut msg);
                    let old = &mut v2r[k][slot];
                    for (o, n) in old.iter_mut().zip(msg) {
                        let updated = (T::one() - damping) * n + damping * *o;
                        delta = delta.max((updated - *o).abs());
                        *o = updated;
                    }
                }
            }
            if delta <= eps {
                break;
            }
        }

        let mut posteriors = Vec::with_capacity(j_count);
        let mut decisions = Vec::with_capacity(j_count);
        for (j, edges) in self.vn_edges.iter().enumerate() {
            let mut belief = vec![T::one(); orders[j]];
            for &(k, slot) in edges {
                for (x, r) in belief.iter_mut().zip(&r2v[k][slot]) {
                    *x = *x * *r;
                }
            }
            normalize(&mut belief);
            decisions.push(argmax(&belief));
            posteriors.push(belief);
        }
        Ok(MpaOutput {
            decisions,
            posteriors,
            iterations,
        })
    }
}

/// Decodes one observation with a fresh [`MpaDecoder`].
pub fn mpa_decode<T: Real>(
    y: &[Complex<T>],
    cbs: &CodebookSet<T>,
    h: &ChannelRealization<T>,
    n0: T,
    cfg: &MpaConfig,
) -> Result<MpaOutput<T>> {
    MpaDecoder::new(cbs, *cfg)?.decode(y, h, n0)
}

fn uniform<T: Real>(m: usize) -> Vec<T> {
    vec![T::count(m).recip(); m]
}

fn normalize<T: Real>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    if s > T::zero() && s.is_finite() {
        for x in v.iter_mut() {
            *x = *x / s;
        }
    } else {
        let u = T::count(v.len()).recip();
        v.iter_mut().for_each(|x| *x = u);
    }
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `exp(-(|y - sum_i c_i(m_i)|^2 - min) / n0)` for every joint hypothesis
/// at one RN, first user varying fastest.
fn likelihood_table<T: Real>(
    y: Complex<T>,
    users: &[usize],
    orders: &[usize],
    contribution: impl Fn(usize, usize) -> Complex<T>,
    n0: T,
) -> Vec<T> {
    let contrib: Vec<Vec<Complex<T>>> = users
        .iter()
        .map(|&j| (0..orders[j]).map(|m| contribution(j, m)).collect())
        .collect();
    let size: usize = users.iter().map(|&j| orders[j]).product();
    let mut dist = Vec::with_capacity(size);
    let mut m = vec![0usize; users.len()];
    for _ in 0..size {
        let mut s = y;
        for (i, c) in contrib.iter().enumerate() {
            s = s - c[m[i]];
        }
        dist.push(s.norm_sqr());
        advance(&mut m, users, orders);
    }
    let min = dist.iter().copied().fold(T::infinity(), T::min);
    dist.into_iter().map(|d| (-(d - min) / n0).exp()).collect()
}

#[inline]
fn advance(m: &mut [usize], users: &[usize], orders: &[usize]) {
    for (i, digit) in m.iter_mut().enumerate() {
        *digit += 1;
        if *digit < orders[users[i]] {
            return;
        }
        *digit = 0;
    }
}

fn rn_update<T: Real>(table: &[T], users: &[usize], orders: &[usize], v2r: &[Vec<T>], r2v: &mut [Vec<T>]) {
    let d = users.len();
    for (msg, &j) in r2v.iter_mut().zip(users) {
        msg.clear();
        msg.resize(orders[j], T::zero());
    }
    let mut m = vec![0usize; d];
    let mut prefix = vec![T::one(); d + 1];
    let mut suffix = vec![T::one(); d + 1];
    for &lik in table {
        if lik > T::zero() {
            for i in 0..d {
                prefix[i + 1] = prefix[i] * v2r[i][m[i]];
            }
            for i in (0..d).rev() {
                suffix[i] = suffix[i + 1] * v2r[i][m[i]];
            }
            for i in 0..d {
                r2v[i][m[i]] = r2v[i][m[i]] + lik * prefix[i] * suffix[i + 1];
            }
        }
        advance(&mut m, users, orders);
    }
    for msg in r2v.iter_mut() {
        normalize(msg);
    }
}

/// Exhaustive ML: the joint tuple minimizing `||y - sum_j diag(h_j) sqrt(p_j) s_j||^2`.
pub fn ml_decode<T: Real>(y: &[Complex<T>], cbs: &CodebookSet<T>, h: &ChannelRealization<T>, n0: T) -> Result<Vec<usize>> {
    let k_count = cbs.resources();
    let j_count = cbs.users();
    if n0 < T::zero() {
        return Err(Error::InvalidArgument(format!("noise power {n0} is negative")));
    }
    if y.len() != k_count || h.users() != j_count || h.resources() != k_count {
        return Err(Error::DimensionMismatch("observation or channel shape mismatch".into()));
    }
    let orders: Vec<usize> = (0..j_count).map(|j| cbs.user_order(j)).collect();
    let size: u128 = orders.iter().map(|&m| m as u128).product();
    if size > ML_SEARCH_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ML_SEARCH_LIMIT,
        });
    }
    // received contribution of every (user, codeword) on every RN
    let rx: Vec<Vec<Vec<Complex<T>>>> = (0..j_count)
        .map(|j| {
            let cb = cbs.user_codebook(j);
            let a = cbs.powers()[j].sqrt();
            (0..orders[j])
                .map(|m| (0..k_count).map(|k| h.h[j][k] * cb.entry(k, m) * a).collect())
                .collect()
        })
        .collect();
    let all: Vec<usize> = (0..j_count).collect();
    let mut m = vec![0usize; j_count];
    let mut best = (T::infinity(), m.clone());
    for _ in 0..size {
        let mut cost = T::zero();
        for k in 0..k_count {
            let mut s = y[k];
            for j in 0..j_count {
                s = s - rx[j][m[j]][k];
            }
            cost = cost + s.norm_sqr();
        }
        if cost < best.0 {
            best = (cost, m.clone());
        }
        advance(&mut m, &all, &orders);
    }
    Ok(best.1)
}
