//! Analytic performance: pairwise error probability, the ASER union bound and
//! its single-layer AIPD form, ergodic capacity, statistical SNR and the
//! exponential SER model used by the adaptive controller.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::codebook::CodebookSet;
use crate::error::{Error, Result};
use crate::mpa_decoder::ML_SEARCH_LIMIT;
use crate::scalar::{db_to_linear, linear_to_db, Real};

/// Limit on joint difference patterns visited by [`aser_union_bound`].
pub const PATTERN_LIMIT: u128 = 20_000_000;

/// Per-RN `Delta_k = sum_j p_j d_j^-alpha |s_{j,k} - s^_{j,k}|^2`.
pub fn deltas<T: Real>(cbs: &CodebookSet<T>, s: &[usize], s_hat: &[usize]) -> Result<Vec<T>> {
    let j_count = cbs.users();
    if s.len() != j_count || s_hat.len() != j_count {
        return Err(Error::DimensionMismatch(format!("tuples must have {j_count} entries")));
    }
    let mut d = vec![T::zero(); cbs.resources()];
    for j in 0..j_count {
        let cb = cbs.user_codebook(j);
        for m in [s[j], s_hat[j]] {
            if m >= cb.order() {
                return Err(Error::IndexOutOfRange {
                    what: "codeword",
                    index: m,
                    limit: cb.order(),
                });
            }
        }
        if s[j] == s_hat[j] {
            continue;
        }
        let w = rx_weight(cbs, j);
        for &k in cb.support() {
            d[k] = d[k] + w * (cb.entry(k, s[j]) - cb.entry(k, s_hat[j])).norm_sqr();
        }
    }
    Ok(d)
}

fn rx_weight<T: Real>(cbs: &CodebookSet<T>, j: usize) -> T {
    cbs.powers()[j] * cbs.distances()[j].powf(-cbs.alpha())
}

/// PEP approximation from the per-RN distances:
/// `(1/12) prod 1/(1 + D_k/(4 N0)) + (1/4) prod 1/(1 + D_k/(3 N0))`.
pub fn pep_from_deltas<T: Real>(deltas: &[T], n0: T) -> T {
    let (mut a, mut b) = (T::one(), T::one());
    for &d in deltas {
        a = a / (T::one() + d / (T::lit(4.0) * n0));
        b = b / (T::one() + d / (T::lit(3.0) * n0));
    }
    a / T::lit(12.0) + b / T::lit(4.0)
}

/// PEP of confusing joint tuple `s` with `s_hat`.
pub fn pep<T: Real>(s: &[usize], s_hat: &[usize], cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    if s == s_hat {
        return Err(Error::InvalidArgument("PEP needs two different tuples".into()));
    }
    Ok(pep_from_deltas(&deltas(cbs, s, s_hat)?, n0))
}

fn check_n0<T: Real>(n0: T) -> Result<()> {
    if n0 > T::zero() && n0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise power {n0} must be positive")))
    }
}

fn nonzero<T: Real>(deltas: &[T]) -> Vec<T> {
    deltas.iter().copied().filter(|d| *d != T::zero()).collect()
}

fn high_snr_constant<T: Real>(g: usize) -> T {
    let g = g as i32;
    T::lit(4.0).powi(g) / T::lit(12.0) + T::lit(3.0).powi(g) / T::lit(4.0)
}

/// High-SNR PEP in its literal closed form, `N0^-G (4^G/12 + 3^G/4) prod_{k in D} Delta_k`.
pub fn pep_high_snr_printed<T: Real>(s: &[usize], s_hat: &[usize], cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let d = nonzero(&deltas(cbs, s, s_hat)?);
    let g = d.len();
    Ok(n0.powi(-(g as i32)) * high_snr_constant::<T>(g) * d.into_iter().fold(T::one(), |a, x| a * x))
}

/// High-SNR PEP consistent with the full PEP expression:
/// `N0^G (4^G/12 + 3^G/4) prod_{k in D} Delta_k^-1`.
pub fn pep_high_snr<T: Real>(s: &[usize], s_hat: &[usize], cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let d = nonzero(&deltas(cbs, s, s_hat)?);
    let g = d.len();
    Ok(n0.powi(g as i32) * high_snr_constant::<T>(g) / d.into_iter().fold(T::one(), |a, x| a * x))
}

/// Number of nonzero-Delta RNs of a pairwise event.
pub fn diversity_order<T: Real>(s: &[usize], s_hat: &[usize], cbs: &CodebookSet<T>) -> Result<usize> {
    Ok(nonzero(&deltas(cbs, s, s_hat)?).len())
}

/// Full union bound together with the per-user union bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionBound<T> {
    /// `(1/prod M_j) sum_S sum_{S^ != S} PEP(S -> S^)`.
    pub total: T,
    /// Same double sum restricted to pairs where user j's codeword differs.
    pub per_user: Vec<T>,
}

impl<T: Real> UnionBound<T> {
    /// Mean of the per-user bounds, comparable to an aggregate per-user SER.
    pub fn average_user(&self) -> T {
        self.per_user.iter().copied().sum::<T>() / T::count(self.per_user.len())
    }
}

/// Exact union bound over all tuple pairs.
///
/// Pairs are grouped by the per-user squared-difference pattern on the
/// user's RNs, so the enumeration runs over distinct patterns rather than
/// over `prod M_j^2` tuple pairs.
pub fn aser_union_bound<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<UnionBound<T>> {
    check_n0(n0)?;
    let j_count = cbs.users();
    let size: u128 = (0..j_count).map(|j| cbs.user_order(j) as u128).product();
    if size > ML_SEARCH_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: ML_SEARCH_LIMIT,
        });
    }
    // patterns[j][0] is the all-zero (no error) pattern
    let patterns: Vec<Vec<(Vec<T>, T)>> = (0..j_count).map(|j| user_patterns(cbs, j)).collect();
    let visited: u128 = patterns.iter().map(|p| p.len() as u128).product();
    if visited > PATTERN_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size: visited,
            limit: PATTERN_LIMIT,
        });
    }
    let supports: Vec<&[usize]> = (0..j_count).map(|j| cbs.user_codebook(j).support()).collect();
    let mut total = T::zero();
    let mut per_user = vec![T::zero(); j_count];
    let mut idx = vec![0usize; j_count];
    let mut delta = vec![T::zero(); cbs.resources()];
    loop {
        // advance odometer first: the all-zero combination is skipped
        let mut i = 0;
        loop {
            if i == j_count {
                let norm = T::lit(size as f64);
                return Ok(UnionBound {
                    total: total / norm,
                    per_user: per_user.into_iter().map(|x| x / norm).collect(),
                });
            }
            idx[i] += 1;
            if idx[i] < patterns[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        delta.iter_mut().for_each(|d| *d = T::zero());
        let mut count = T::one();
        for j in 0..j_count {
            let (pat, c) = &patterns[j][idx[j]];
            count = count * *c;
            for (n, &k) in supports[j].iter().enumerate() {
                delta[k] = delta[k] + pat[n];
            }
        }
        let term = count * pep_from_deltas(&delta, n0);
        total = total + term;
        for j in 0..j_count {
            if idx[j] != 0 {
                per_user[j] = per_user[j] + term;
            }
        }
    }
}

/// Distinct weighted squared-difference patterns of user j with their
/// multiplicities; index 0 is the zero pattern (count M_j).
fn user_patterns<T: Real>(cbs: &CodebookSet<T>, j: usize) -> Vec<(Vec<T>, T)> {
    let cb = cbs.user_codebook(j);
    let w = rx_weight(cbs, j);
    let m = cb.order();
    let n = cb.support().len();
    let mut out: Vec<(Vec<T>, T)> = vec![(vec![T::zero(); n], T::count(m))];
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let pat: Vec<T> = cb
                .support()
                .iter()
                .map(|&k| w * (cb.entry(k, a) - cb.entry(k, b)).norm_sqr())
                .collect();
            let key: Vec<u64> = pat.iter().map(|x| x.as_f64().to_bits()).collect();
            match index.get(&key) {
                Some(&i) => out[i].1 = out[i].1 + T::one(),
                None => {
                    index.insert(key, out.len());
                    out.push((pat, T::one()));
                }
            }
        }
    }
    out
}

/// Single-layer ASER approximation consistent with the high-SNR PEP:
/// `N0^N (4^N + 3^(N+1)) / (12 J) * sum_j d_j^(alpha N) p_j^-N AIPD_j`.
pub fn aser_single_layer<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let n = cbs.dimension as i32;
    let c = n0.powi(n) * high_snr_constant::<T>(cbs.dimension) / T::count(cbs.users());
    Ok(c * user_asymptotic_terms(cbs).into_iter().sum::<T>())
}

/// The literal closed form, `(N0^-N / J) (4^N + 2 * 3^N)/12 * sum_j ...`.
pub fn aser_single_layer_printed<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let n = cbs.dimension as i32;
    let k = (T::lit(4.0).powi(n) + T::lit(2.0) * T::lit(3.0).powi(n)) / T::lit(12.0);
    Ok(n0.powi(-n) / T::count(cbs.users()) * k * user_asymptotic_terms(cbs).into_iter().sum::<T>())
}

/// `d_j^(alpha N) p_j^-N AIPD_j` per user; all equal after power allocation.
pub fn user_asymptotic_terms<T: Real>(cbs: &CodebookSet<T>) -> Vec<T> {
    let n = cbs.dimension as i32;
    (0..cbs.users())
        .map(|j| (cbs.distances()[j].powf(cbs.alpha()) / cbs.powers()[j]).powi(n) * cbs.user_codebook(j).aipd())
        .collect()
}

/// Restricts the union bound to single-layer (G = N) events: exact PEP sum
/// over pairs that differ in one user only, averaged over users.
pub fn single_layer_union<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let mut total = T::zero();
    for j in 0..cbs.users() {
        let pats = user_patterns(cbs, j);
        let m = T::count(cbs.user_order(j));
        for (pat, c) in pats.iter().skip(1) {
            total = total + *c * pep_from_deltas(pat, n0) / m;
        }
    }
    Ok(total / T::count(cbs.users()))
}

/// Unit of [`ergodic_capacity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityUnit {
    #[default]
    Bits,
    Nats,
}

/// `e^x E1(x)` for `x > 0`: power series up to 1, continued fraction above.
pub fn scaled_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidArgument(format!("E1 argument {x} must be positive")));
    }
    if x <= 1.0 {
        return Ok(x.exp() * e1_series(x));
    }
    // modified Lentz on e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    Ok(h)
}

fn e1_series(x: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut term = 1.0;
    for n in 1..200 {
        term *= -x / n as f64;
        let add = term / n as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER - x.ln() - sum
}

/// Exponential integral `E1(x)`.
pub fn exponential_e1(x: f64) -> Result<f64> {
    if x > 0.0 && x <= 1.0 {
        return Ok(e1_series(x));
    }
    scaled_e1(x).map(|v| v * (-x).exp())
}

/// Ergodic capacity `K e^x E1(x)` with `x = N0 / P_bar`.
pub fn ergodic_capacity(p_bar: f64, n0: f64, resources: usize, unit: CapacityUnit) -> Result<f64> {
    if !(p_bar > 0.0) || !(n0 > 0.0) || resources == 0 {
        return Err(Error::InvalidArgument("capacity needs positive P_bar, N0 and K".into()));
    }
    let nats = resources as f64 * scaled_e1(n0 / p_bar)?;
    Ok(match unit {
        CapacityUnit::Nats => nats,
        CapacityUnit::Bits => nats / std::f64::consts::LN_2,
    })
}

/// Average received power per RN, `(1/K) sum_j d_j^-alpha p_j`.
pub fn average_rx_power<T: Real>(cbs: &CodebookSet<T>) -> T {
    (0..cbs.users()).map(|j| rx_weight(cbs, j)).sum::<T>() / T::count(cbs.resources())
}

/// Received statistical SNR `sum_j p_j d_j^-alpha / N0`.
pub fn statistical_snr<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    Ok((0..cbs.users()).map(|j| rx_weight(cbs, j)).sum::<T>() / n0)
}

/// The allocation-specific closed form
/// `J sum AIPD_j^(1/N) / (N0 sum d_j^alpha AIPD_j^(1/N))`.
pub fn statistical_snr_closed_form<T: Real>(cbs: &CodebookSet<T>, n0: T) -> Result<T> {
    check_n0(n0)?;
    let inv_n = T::count(cbs.dimension).recip();
    let root: Vec<T> = cbs.user_aipd().iter().map(|a| a.powf(inv_n)).collect();
    let num = T::count(cbs.users()) * root.iter().copied().sum::<T>();
    let den: T = root
        .iter()
        .zip(cbs.distances())
        .map(|(r, d)| *r * d.powf(cbs.alpha()))
        .sum();
    Ok(num / (n0 * den))
}

/// Same-order reference SNR `J^2 / (N0 sum d_j^alpha)`.
pub fn reference_snr<T: Real>(distances: &[T], alpha: T, n0: T) -> Result<T> {
    check_n0(n0)?;
    let j = T::count(distances.len());
    Ok(j * j / (n0 * distances.iter().map(|d| d.powf(alpha)).sum::<T>()))
}

/// Exponential SER model `SER(gamma) = a e^(-b gamma)`, valid above the
/// threshold. `gamma` is linear; the threshold is stored in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerModel {
    pub a: f64,
    pub b: f64,
    pub gamma_threshold_db: f64,
}

/// Model output at one SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerPrediction {
    pub ser: f64,
    /// The SNR lies below the model's validity threshold.
    pub below_threshold: bool,
}

impl SerModel {
    pub fn new(a: f64, b: f64, gamma_threshold_db: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() || !gamma_threshold_db.is_finite() {
            return Err(Error::InvalidArgument(format!("SER model needs a, b > 0 (got {a}, {b})")));
        }
        Ok(Self {
            a,
            b,
            gamma_threshold_db,
        })
    }

    pub fn gamma_threshold_linear(&self) -> f64 {
        db_to_linear(self.gamma_threshold_db)
    }

    pub fn predict(&self, gamma: f64) -> SerPrediction {
        SerPrediction {
            ser: ser_from_model(self, gamma),
            below_threshold: linear_to_db(gamma) < self.gamma_threshold_db,
        }
    }
}

/// `a e^(-b gamma)` clamped to `[0, 1]`, linear `gamma`.
pub fn ser_from_model(model: &SerModel, gamma: f64) -> f64 {
    (model.a * (-model.b * gamma).exp()).clamp(0.0, 1.0)
}

/// Linear SNR at which the model reaches `ser_th`: `ln(a / ser_th) / b`.
pub fn snr_threshold_for(model: &SerModel, ser_th: f64) -> Result<f64> {
    if !(ser_th > 0.0 && ser_th < 1.0) {
        return Err(Error::InvalidArgument(format!("SER target {ser_th} not in (0, 1)")));
    }
    Ok((model.a / ser_th).ln() / model.b)
}

/// `10 log10((gamma_1 - th_1) / (gamma_2 - th_2))` with linear SNRs and the
/// models' thresholds converted to linear.
pub fn analytic_gain(model_1: &SerModel, gamma_1: f64, model_2: &SerModel, gamma_2: f64) -> f64 {
    10.0 * ((gamma_1 - model_1.gamma_threshold_linear()) / (gamma_2 - model_2.gamma_threshold_linear())).log10()
}

/// Least-squares fit of `ln SER = ln a - b gamma` over `(gamma, ser)` pairs
/// with linear `gamma`. The threshold is set to the smallest sample SNR.
pub fn fit_ser_model(samples: &[(f64, f64)]) -> Result<SerModel> {
    if samples.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} samples, need at least 3", samples.len())));
    }
    if let Some(&(g, s)) = samples.iter().find(|(g, s)| !(*s > 0.0) || !g.is_finite() || !s.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample ({g}, {s}) has nonpositive SER")));
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FlatSerCurve);
    }
    let slope = sxy / sxx;
    let b = -slope;
    if !(b > 1e-12 * (1.0 + my.abs())) {
        return Err(Error::FlatSerCurve);
    }
    let a = (my - slope * mx).exp();
    let gmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    SerModel::new(a, b, linear_to_db(gmin.max(f64::MIN_POSITIVE)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Deployment;
    use crate::constellation::builtin_mc_pool;
    use crate::factor_graph::FactorGraph;
    use crate::vmm_design::grouped_vmm;
    use approx::assert_relative_eq;

    fn set(orders: [u32; 3], d: Vec<f64>) -> CodebookSet<f64> {
        let g = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let vmm = grouped_vmm(&g, &orders, &pool.aipd_by_order()).unwrap();
        CodebookSet::assemble(&g, &vmm, &pool, &Deployment::new(d, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn pep_limits() {
        assert_relative_eq!(pep_from_deltas(&[0.0; 4], 1.0), 1.0 / 3.0);
        assert_relative_eq!(pep_from_deltas(&[1.0, 2.0], 1e12), 1.0 / 3.0, max_relative = 1e-9);
        assert!(pep_from_deltas(&[1e9, 1e9], 1.0) < 1e-15);
        // one user, Delta = 2 on two RNs, N0 = 1
        let hand = (1.0 / 12.0) / (1.5f64 * 1.5) + 0.25 / (1.0 + 2.0 / 3.0f64).powi(2);
        assert_relative_eq!(pep_from_deltas(&[0.0, 2.0, 0.0, 2.0], 1.0), hand, max_relative = 1e-15);
    }

    #[test]
    fn pep_rejects_equal_tuples() {
        let cbs = set([2, 2, 2], vec![1.0; 6]);
        assert!(pep(&[0; 6], &[0; 6], &cbs, 1.0).is_err());
        assert!(pep(&[0; 6], &[1, 0, 0, 0, 0, 0], &cbs, 0.0).is_err());
        assert_eq!(diversity_order(&[0; 6], &[1, 0, 0, 0, 0, 0], &cbs).unwrap(), 2);
    }

    #[test]
    fn high_snr_forms() {
        let cbs = set([2, 2, 2], vec![1.0; 6]);
        let s = [0; 6];
        let t = [1, 0, 0, 0, 0, 0];
        let n0 = 1e-6;
        let exact = pep(&s, &t, &cbs, n0).unwrap();
        assert_relative_eq!(pep_high_snr(&s, &t, &cbs, n0).unwrap() / exact, 1.0, max_relative = 1e-4);
        assert!(pep_high_snr_printed(&s, &t, &cbs, n0).unwrap() > 1.0);
    }

    #[test]
    fn e1_values() {
        assert_relative_eq!(exponential_e1(1.0).unwrap(), 0.219_383_934_395_520_3, max_relative = 1e-12);
        assert_relative_eq!(exponential_e1(2.0).unwrap(), 0.048_900_510_708_061_12, max_relative = 1e-12);
        assert_relative_eq!(exponential_e1(0.1).unwrap(), 1.822_923_958_419_390_7, max_relative = 1e-12);
        assert_relative_eq!(exponential_e1(10.0).unwrap(), 4.156_968_929_685_324e-6, max_relative = 1e-11);
        assert!(scaled_e1(0.0).is_err());
        // e^x E1(x) ~ 1/x for large x
        assert_relative_eq!(scaled_e1(1e6).unwrap() * 1e6, 1.0, max_relative = 1e-5);
    }

    #[test]
    fn capacity_units() {
        let nats = ergodic_capacity(1.0, 1.0, 4, CapacityUnit::Nats).unwrap();
        assert_relative_eq!(nats, 4.0 * 0.596_347_362_323_194, max_relative = 1e-10);
        let bits = ergodic_capacity(1.0, 1.0, 4, CapacityUnit::Bits).unwrap();
        assert_relative_eq!(bits * std::f64::consts::LN_2, nats, max_relative = 1e-14);
    }

    #[test]
    fn statistical_snr_forms_agree() {
        let cbs = set([2, 8, 16], vec![4.7, 4.6, 1.62, 1.25, 1.2, 1.13]);
        let a = statistical_snr(&cbs, 0.1).unwrap();
        let b = statistical_snr_closed_form(&cbs, 0.1).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        let eq = set([4, 4, 4], vec![1.0; 6]);
        assert_relative_eq!(statistical_snr(&eq, 0.5).unwrap(), 12.0, max_relative = 1e-12);
        assert_relative_eq!(reference_snr(&[1.0; 6], 2.0, 0.5).unwrap(), 12.0, max_relative = 1e-12);
    }

    #[test]
    fn ser_model_basics() {
        let tm1 = SerModel::new(0.42, 0.83, 4.0).unwrap();
        let g = db_to_linear(4.0);
        assert_relative_eq!(ser_from_model(&tm1, g), 0.42 * (-0.83 * g).exp());
        assert_relative_eq!(ser_from_model(&tm1, g), 0.0522, max_relative = 2e-3);
        let th = snr_threshold_for(&tm1, 0.01).unwrap();
        assert_relative_eq!(th, 42f64.ln() / 0.83, max_relative = 1e-12);
        assert_relative_eq!(ser_from_model(&tm1, th), 0.01, max_relative = 1e-12);
        assert_eq!(snr_threshold_for(&tm1, 0.42).unwrap(), 0.0);
        assert!(SerModel::new(0.4, 0.0, 1.0).is_err());
        assert!(tm1.predict(1.0).below_threshold);
    }

    #[test]
    fn gain_basics() {
        let m = SerModel::new(0.46, 18.6, 10.0).unwrap();
        assert_eq!(analytic_gain(&m, 30.0, &m, 30.0), 0.0);
        assert_relative_eq!(analytic_gain(&m, 10.0 + 20.0, &m, 10.0 + 10.0), 10.0 * 2f64.log10());
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let s: Vec<(f64, f64)> = (1..8).map(|i| (i as f64, 0.3 * (-1.7 * i as f64).exp())).collect();
        let m = fit_ser_model(&s).unwrap();
        assert_relative_eq!(m.a, 0.3, max_relative = 1e-9);
        assert_relative_eq!(m.b, 1.7, max_relative = 1e-9);
        assert!(matches!(fit_ser_model(&[(1.0, 0.1), (2.0, 0.1), (3.0, 0.1)]), Err(Error::FlatSerCurve)));
        assert!(fit_ser_model(&[(1.0, 0.1), (2.0, 0.1)]).is_err());
        assert!(fit_ser_model(&[(1.0, 0.1), (2.0, 0.0), (3.0, 0.1)]).is_err());
    }

    #[test]
    fn single_layer_forms() {
        let cbs = set([2, 2, 2], vec![1.0; 6]);
        let n0 = 0.01;
        let consistent = aser_single_layer(&cbs, n0).unwrap();
        let aipd = cbs.user_aipd()[0];
        assert_relative_eq!(consistent, n0 * n0 * 43.0 / 12.0 / 6.0 * 6.0 * aipd, max_relative = 1e-12);
        let printed = aser_single_layer_printed(&cbs, n0).unwrap();
        assert_relative_eq!(printed, 1.0 / (n0 * n0) / 6.0 * 34.0 / 12.0 * 6.0 * aipd, max_relative = 1e-12);
        let tiny = 1e-7;
        let ratio = single_layer_union(&cbs, tiny).unwrap() / aser_single_layer(&cbs, tiny).unwrap();
        assert_relative_eq!(ratio, 1.0, max_relative = 1e-4);
    }
}
