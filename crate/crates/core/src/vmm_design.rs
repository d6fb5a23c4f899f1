//! Variable modulation matrices (VMMs): which modulation order each layer of
//! the factor graph carries.
//!
//! A VMM is scored by the per-RN imbalance
//!
//! ```text
//! tau = max_{k, k'} | sum_{l in phi(k')} AIPD_l^(1/N) - sum_{l in phi(k)} AIPD_l^(1/N) |
//! ```
//!
//! and `tau = 0` (every RN sees the same multiset of orders) is the optimal
//! case. [`optimize_vmm`] runs the layer-switch search; [`grouped_vmm`] builds
//! `tau = 0` VMMs directly from covering column groups.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::SUPPORTED_ORDERS;
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;
use crate::rng::stream_rng;
use crate::scalar::Real;

/// AIPD per modulation order.
pub type AipdTable<T> = BTreeMap<u32, T>;

/// A multiset of J modulation orders, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModCombination(Vec<u32>);

impl ModCombination {
    /// Canonicalises `orders` (sorted ascending). Every order must be a power
    /// of two of at least 2.
    pub fn new(mut orders: Vec<u32>) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::InvalidArgument("empty modulation combination".into()));
        }
        if let Some(&bad) = orders.iter().find(|&&m| m < 2 || !m.is_power_of_two()) {
            return Err(Error::InvalidArgument(format!("modulation order {bad} is not a power of two >= 2")));
        }
        orders.sort_unstable();
        Ok(Self(orders))
    }

    pub fn orders(&self) -> &[u32] {
        &self.0
    }

    pub fn layers(&self) -> usize {
        self.0.len()
    }

    /// Total bits per channel use, `sum log2 M_l`.
    pub fn rate(&self) -> u32 {
        self.0.iter().map(|m| m.trailing_zeros()).sum()
    }
}

impl std::fmt::Display for ModCombination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "]")
    }
}

/// All size-`layers` multisets over `allowed` whose bits sum to `rate`, in
/// lexicographic order. Empty when the rate is infeasible.
pub fn enumerate_combinations(layers: usize, rate: u32, allowed: &[u32]) -> Vec<ModCombination> {
    let mut allowed: Vec<u32> = allowed
        .iter()
        .copied()
        .filter(|m| *m >= 2 && m.is_power_of_two())
        .collect();
    allowed.sort_unstable();
    allowed.dedup();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(layers);
    fill(&allowed, 0, layers, rate, &mut current, &mut out);
    out
}

fn fill(allowed: &[u32], from: usize, left: usize, bits: u32, current: &mut Vec<u32>, out: &mut Vec<ModCombination>) {
    if left == 0 {
        if bits == 0 {
            out.push(ModCombination(current.clone()));
        }
        return;
    }
    for (i, &m) in allowed.iter().enumerate().skip(from) {
        let b = m.trailing_zeros();
        if b > bits {
            break;
        }
        current.push(m);
        fill(allowed, i, left - 1, bits - b, current, out);
        current.pop();
    }
}

/// Enumerates with the default order set {2, 4, 8, 16}.
pub fn enumerate_default(layers: usize, rate: u32) -> Vec<ModCombination> {
    enumerate_combinations(layers, rate, &SUPPORTED_ORDERS)
}

/// An assignment of modulation orders to the J layers of a factor graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vmm<T> {
    pub orders: Vec<u32>,
    pub tau: T,
    #[serde(rename = "graph-id")]
    pub graph_id: String,
}

impl<T: Real> Vmm<T> {
    /// Scores `orders` on `graph`.
    pub fn new(graph: &FactorGraph, orders: Vec<u32>, aipd: &AipdTable<T>) -> Result<Self> {
        let tau = tau_metric(graph, &orders, aipd)?;
        Ok(Self {
            orders,
            tau,
            graph_id: graph.id().to_string(),
        })
    }

    /// K x J matrix form: order of layer l at the nonzero positions of
    /// column l, zero elsewhere.
    pub fn matrix(&self, graph: &FactorGraph) -> Vec<Vec<u32>> {
        graph
            .rows()
            .iter()
            .map(|row| row.iter().zip(&self.orders).map(|(&f, &m)| f as u32 * m).collect())
            .collect()
    }

    /// Orders seen at RN `k`, sorted ascending.
    pub fn rn_orders(&self, graph: &FactorGraph, k: usize) -> Result<Vec<u32>> {
        let mut v: Vec<u32> = graph.rn_neighbors(k)?.iter().map(|&l| self.orders[l]).collect();
        v.sort_unstable();
        Ok(v)
    }

    pub fn combination(&self) -> ModCombination {
        ModCombination(sorted(&self.orders))
    }

    pub fn rate(&self) -> u32 {
        self.combination().rate()
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string(self).expect("vmm serializes")
    }
}

fn sorted(v: &[u32]) -> Vec<u32> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

/// Per-RN load `sum_{l in phi(k)} AIPD_l^(1/N_l)`. Contributions are summed
/// in ascending order so equal multisets give bit-identical loads.
pub fn rn_loads<T: Real>(graph: &FactorGraph, orders: &[u32], aipd: &AipdTable<T>) -> Result<Vec<T>> {
    if orders.len() != graph.layers() {
        return Err(Error::DimensionMismatch(format!(
            "{} orders for {} layers",
            orders.len(),
            graph.layers()
        )));
    }
    let root: Vec<T> = orders
        .iter()
        .enumerate()
        .map(|(l, m)| {
            let a = *aipd.get(m).ok_or(Error::MissingOrder(*m))?;
            Ok(a.powf(T::count(graph.layer_weight(l)).recip()))
        })
        .collect::<Result<_>>()?;
    (0..graph.resources())
        .map(|k| {
            let mut terms: Vec<T> = graph.rn_neighbors(k)?.iter().map(|&l| root[l]).collect();
            terms.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            Ok(terms.into_iter().fold(T::zero(), |acc, x| acc + x))
        })
        .collect()
}

/// The imbalance metric tau of an order assignment.
pub fn tau_metric<T: Real>(graph: &FactorGraph, orders: &[u32], aipd: &AipdTable<T>) -> Result<T> {
    let loads = rn_loads(graph, orders, aipd)?;
    let max = loads.iter().copied().fold(T::neg_infinity(), T::max);
    let min = loads.iter().copied().fold(T::infinity(), T::min);
    Ok(max - min)
}

/// Result of one layer-switch run, with the tau after every accepted swap.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTrace<T> {
    pub initial_tau: T,
    pub accepted: Vec<T>,
}

/// One seeded run of the layer-switch search: a random initial assignment,
/// then repeated passes over layer pairs `(l, l')`, keeping a swap whenever
/// it does not increase tau. Passes repeat while a pass strictly improves,
/// up to `2 J^2` accepted swaps.
pub fn optimize_vmm<T: Real>(
    graph: &FactorGraph,
    combination: &ModCombination,
    aipd: &AipdTable<T>,
    seed: u64,
) -> Result<Vmm<T>> {
    optimize_vmm_traced(graph, combination, aipd, seed).map(|(v, _)| v)
}

pub fn optimize_vmm_traced<T: Real>(
    graph: &FactorGraph,
    combination: &ModCombination,
    aipd: &AipdTable<T>,
    seed: u64,
) -> Result<(Vmm<T>, SwitchTrace<T>)> {
    let j = graph.layers();
    if combination.layers() != j {
        return Err(Error::DimensionMismatch(format!(
            "combination has {} orders, graph has {j} layers",
            combination.layers()
        )));
    }
    let mut orders = combination.orders().to_vec();
    let mut rng = stream_rng(seed, &[0x564d_4d00], 0);
    orders.shuffle(&mut rng);
    let mut tau = tau_metric(graph, &orders, aipd)?;
    let mut trace = SwitchTrace {
        initial_tau: tau,
        accepted: Vec::new(),
    };
    let cap = 2 * j * j;
    'passes: loop {
        let start = tau;
        for l in 0..j {
            for lp in (l + 1)..j {
                if orders[l] == orders[lp] {
                    continue;
                }
                orders.swap(l, lp);
                let sw = tau_metric(graph, &orders, aipd)?;
                if sw <= tau {
                    tau = sw;
                    trace.accepted.push(tau);
                    if trace.accepted.len() >= cap {
                        break 'passes;
                    }
                } else {
                    orders.swap(l, lp);
                }
            }
        }
        if tau >= start {
            break;
        }
    }
    Ok((
        Vmm {
            orders,
            tau,
            graph_id: graph.id().to_string(),
        },
        trace,
    ))
}

/// Best of `restarts` seeded runs: smallest tau, then lexicographically
/// smallest order sequence.
pub fn optimize_vmm_restarts<T: Real>(
    graph: &FactorGraph,
    combination: &ModCombination,
    aipd: &AipdTable<T>,
    seed: u64,
    restarts: usize,
) -> Result<Vmm<T>> {
    let runs: Vec<Vmm<T>> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| optimize_vmm(graph, combination, aipd, seed.wrapping_add(r.wrapping_mul(0x9e37_79b9))))
        .collect::<Result<_>>()?;
    Ok(runs
        .into_iter()
        .min_by(|a, b| {
            a.tau
                .partial_cmp(&b.tau)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.orders.cmp(&b.orders))
        })
        .expect("at least one run"))
}

/// Assigns `orders_per_group[i]` to every layer of the i-th covering column
/// group of `graph`, giving tau = 0.
pub fn grouped_vmm<T: Real>(graph: &FactorGraph, orders_per_group: &[u32], aipd: &AipdTable<T>) -> Result<Vmm<T>> {
    let groups = graph
        .column_groups()
        .ok_or_else(|| Error::NotGroupable(graph.id().to_string()))?;
    if groups.len() != orders_per_group.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} group orders for {} groups",
            orders_per_group.len(),
            groups.len()
        )));
    }
    let mut orders = vec![0u32; graph.layers()];
    for (group, &m) in groups.iter().zip(orders_per_group) {
        for &l in group {
            orders[l] = m;
        }
    }
    Vmm::new(graph, orders, aipd)
}

/// Whether `combination` can be laid out as a grouped (tau = 0) VMM: it must
/// split into one order per covering group.
pub fn group_orders_for(graph: &FactorGraph, combination: &ModCombination) -> Option<Vec<u32>> {
    let groups = graph.column_groups()?;
    let mut remaining = combination.orders().to_vec();
    let mut sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut picked = Vec::new();
    if assign_groups(&mut remaining, &mut sizes, 0, &mut picked) {
        Some(picked)
    } else {
        None
    }
}

fn assign_groups(remaining: &mut Vec<u32>, sizes: &mut [usize], g: usize, picked: &mut Vec<u32>) -> bool {
    if g == sizes.len() {
        return remaining.is_empty();
    }
    let mut tried = Vec::new();
    for idx in 0..remaining.len() {
        let m = remaining[idx];
        if tried.contains(&m) {
            continue;
        }
        tried.push(m);
        let count = remaining.iter().filter(|&&x| x == m).count();
        if count < sizes[g] {
            continue;
        }
        let mut removed = 0;
        remaining.retain(|&x| {
            if x == m && removed < sizes[g] {
                removed += 1;
                false
            } else {
                true
            }
        });
        picked.push(m);
        if assign_groups(remaining, sizes, g + 1, picked) {
            return true;
        }
        picked.pop();
        remaining.extend(std::iter::repeat_n(m, sizes[g]));
        remaining.sort_unstable();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::builtin_mc_pool;

    fn table() -> AipdTable<f64> {
        builtin_mc_pool::<f64>().aipd_by_order()
    }

    #[test]
    fn combinations_for_rate_12() {
        let c = enumerate_default(6, 12);
        for want in [[4, 4, 4, 4, 4, 4], [2, 2, 4, 4, 8, 8], [2, 2, 2, 2, 16, 16]] {
            assert!(c.contains(&ModCombination(want.to_vec())), "{want:?}");
        }
        assert!(c.iter().all(|m| m.rate() == 12 && m.layers() == 6));
        let mut sorted = c.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, c);
    }

    #[test]
    fn minimum_and_infeasible_rates() {
        assert_eq!(enumerate_default(6, 6), vec![ModCombination(vec![2; 6])]);
        assert_eq!(enumerate_default(6, 24), vec![ModCombination(vec![16; 6])]);
        assert!(enumerate_default(6, 5).is_empty());
        assert!(enumerate_default(6, 25).is_empty());
    }

    #[test]
    fn combinations_for_rate_17() {
        let c = enumerate_default(6, 17);
        assert!(c.contains(&ModCombination(vec![2, 2, 8, 16, 16, 16])));
        assert!(c.contains(&ModCombination(vec![4, 8, 8, 8, 8, 8])));
    }

    #[test]
    fn example_vmms_tau() {
        let g = FactorGraph::default_4x6();
        let t = table();
        // reference layouts
        let m3 = vec![2, 2, 8, 16, 16, 16];
        let m4 = vec![2, 16, 16, 2, 16, 8];
        let m7 = vec![8; 6];
        let m8 = vec![4, 4, 8, 8, 16, 16];
        assert_eq!(tau_metric(&g, &m7, &t).unwrap(), 0.0);
        assert_eq!(tau_metric(&g, &m8, &t).unwrap(), 0.0);
        let t3 = tau_metric(&g, &m3, &t).unwrap();
        let t4 = tau_metric(&g, &m4, &t).unwrap();
        assert!(t4 > t3, "tau(M4) = {t4}, tau(M3) = {t3}");
    }

    #[test]
    fn matrix_form_matches_graph() {
        let g = FactorGraph::default_4x6();
        let v = Vmm::new(&g, vec![2, 4, 8, 8, 16, 16], &table()).unwrap();
        let m = v.matrix(&g);
        assert_eq!(m[0], vec![0, 4, 8, 0, 16, 0]);
        assert_eq!(m[3], vec![2, 0, 0, 8, 16, 0]);
        assert_eq!(v.rn_orders(&g, 0).unwrap(), vec![4, 8, 16]);
    }

    #[test]
    fn missing_order_is_reported() {
        let g = FactorGraph::default_4x6();
        let mut t = table();
        t.remove(&16);
        assert_eq!(tau_metric(&g, &[16; 6], &t), Err(Error::MissingOrder(16)));
    }

    #[test]
    fn uniform_combination_optimizes_to_zero() {
        let g = FactorGraph::default_4x6();
        for seed in 0..5 {
            let v = optimize_vmm(&g, &ModCombination(vec![8; 6]), &table(), seed).unwrap();
            assert_eq!(v.tau, 0.0);
        }
    }

    #[test]
    fn groupable_combination_reaches_zero() {
        let g = FactorGraph::default_4x6();
        let v = optimize_vmm_restarts(&g, &ModCombination(vec![4, 4, 8, 8, 16, 16]), &table(), 3, 8).unwrap();
        assert_eq!(v.tau, 0.0);
    }

    #[test]
    fn switch_trace_is_monotone() {
        let g = FactorGraph::default_4x6();
        let (v, trace) =
            optimize_vmm_traced(&g, &ModCombination(vec![2, 2, 8, 16, 16, 16]), &table(), 11).unwrap();
        let mut prev = trace.initial_tau;
        for &t in &trace.accepted {
            assert!(t <= prev);
            prev = t;
        }
        assert!(v.tau <= trace.initial_tau);
        assert!(trace.accepted.len() <= 72);
    }

    #[test]
    fn grouped_examples() {
        let g = FactorGraph::default_4x6();
        let t = table();
        let m7 = grouped_vmm(&g, &[8, 8, 8], &t).unwrap();
        assert_eq!(m7.orders, vec![8; 6]);
        let m9 = grouped_vmm(&g, &[2, 16, 16], &t).unwrap();
        assert_eq!(m9.orders, vec![2, 2, 16, 16, 16, 16]);
        let m10 = grouped_vmm(&g, &[8, 8, 16], &t).unwrap();
        assert_eq!(m10.rate(), 20);
        for v in [m7, m9, m10] {
            assert_eq!(v.tau, 0.0);
        }
        let odd = FactorGraph::new("odd", vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]], false).unwrap();
        assert!(matches!(grouped_vmm(&odd, &[2, 2], &t), Err(Error::NotGroupable(_))));
    }

    #[test]
    fn group_orders_split() {
        let g = FactorGraph::default_4x6();
        assert_eq!(
            group_orders_for(&g, &ModCombination(vec![2, 2, 4, 4, 8, 8])),
            Some(vec![2, 4, 8])
        );
        assert_eq!(group_orders_for(&g, &ModCombination(vec![4, 8, 8, 8, 8, 8])), None);
    }

    #[test]
    fn vmm_json_shape() {
        let g = FactorGraph::default_4x6();
        let v = grouped_vmm(&g, &[2, 4, 8], &table()).unwrap();
        let j: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(j["graph-id"], "default-4x6");
        assert_eq!(j["tau"], 0.0);
        assert_eq!(j["orders"], serde_json::json!([2, 2, 4, 4, 8, 8]));
    }
}
