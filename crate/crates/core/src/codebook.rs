//! Sparse per-layer codebooks, distance-aware codebook allocation, the
//! closed-form power allocation and the full VM-SCMA design loop.
//!
//! Power is kept as a separate per-user vector applied at transmit time; the
//! codebooks themselves stay unit-normalized (`sum_m ||x_m||^2 = M`).

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Deployment;
use crate::constellation::{inverse_product_distance, McPool, MotherConstellation};
use crate::error::{Error, Result};
use crate::factor_graph::{FactorGraph, MappingMatrix};
use crate::scalar::Real;
use crate::vmm_design::{enumerate_combinations, optimize_vmm_restarts, ModCombination, Vmm};

/// A K x M sparse codebook `X_l = V_l C_MC`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook<T> {
    matrix: Vec<Vec<Complex<T>>>,
    support: Vec<usize>,
    aipd: T,
}

impl<T: Real> Codebook<T> {
    /// Wraps a K x M matrix. The support is the set of rows carrying any
    /// nonzero entry.
    pub fn from_matrix(matrix: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let m = matrix.first().map_or(0, Vec::len);
        if m == 0 || matrix.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("codebook rows must be nonempty and equal length".into()));
        }
        let support: Vec<usize> = matrix
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().any(|x| *x != Complex::new(T::zero(), T::zero())))
            .map(|(k, _)| k)
            .collect();
        let aipd = aipd_over(&matrix, &support)?;
        Ok(Self { matrix, support, aipd })
    }

    pub fn order(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn resources(&self) -> usize {
        self.matrix.len()
    }

    /// RNs the codebook occupies, ascending.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &[Vec<Complex<T>>] {
        &self.matrix
    }

    #[inline]
    pub fn entry(&self, k: usize, m: usize) -> Complex<T> {
        self.matrix[k][m]
    }

    pub fn aipd(&self) -> T {
        self.aipd
    }

    /// `sum_m ||x_m||^2`.
    pub fn trace_energy(&self) -> T {
        self.matrix.iter().flatten().map(|x| x.norm_sqr()).sum()
    }
}

fn aipd_over<T: Real>(matrix: &[Vec<Complex<T>>], support: &[usize]) -> Result<T> {
    if support.is_empty() {
        return Err(Error::InvalidConstellation("codebook has no nonzero rows".into()));
    }
    let rows: Vec<&[Complex<T>]> = support.iter().map(|&k| matrix[k].as_slice()).collect();
    inverse_product_distance(&rows)
}

/// Places MC column m on the support of `v`.
pub fn build_codebook<T: Real>(mc: &MotherConstellation<T>, v: &MappingMatrix) -> Result<Codebook<T>> {
    if mc.dimension != v.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "MC has {} dimensions, mapping matrix {}",
            mc.dimension,
            v.dimension()
        )));
    }
    let m = mc.order as usize;
    let mut matrix = vec![vec![Complex::new(T::zero(), T::zero()); m]; v.resources()];
    for (n, &k) in v.support().iter().enumerate() {
        matrix[k].clone_from(&mc.matrix[n]);
    }
    let support = v.support().to_vec();
    let aipd = aipd_over(&matrix, &support)?;
    Ok(Codebook { matrix, support, aipd })
}

/// AIPD of a codebook over its nonzero rows.
pub fn aipd_of_codebook<T: Real>(matrix: &[Vec<Complex<T>>]) -> Result<T> {
    Codebook::from_matrix(matrix.to_vec()).map(|c| c.aipd)
}

/// Codebook index assigned to each user: users ranked farthest first,
/// codebooks ranked by ascending AIPD, matched rank to rank. Ties keep index
/// order.
pub fn allocate_codebooks<T: Real>(codebook_aipd: &[T], distances: &[T]) -> Result<Vec<usize>> {
    if codebook_aipd.len() != distances.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} codebooks for {} users",
            codebook_aipd.len(),
            distances.len()
        )));
    }
    let mut users: Vec<usize> = (0..distances.len()).collect();
    users.sort_by(|&a, &b| distances[b].partial_cmp(&distances[a]).unwrap().then(a.cmp(&b)));
    let mut books: Vec<usize> = (0..codebook_aipd.len()).collect();
    books.sort_by(|&a, &b| codebook_aipd[a].partial_cmp(&codebook_aipd[b]).unwrap().then(a.cmp(&b)));
    let mut assignment = vec![0; distances.len()];
    for (u, b) in users.into_iter().zip(books) {
        assignment[u] = b;
    }
    Ok(assignment)
}

fn weights<T: Real>(aipd: &[T], distances: &[T], alpha: T, dimension: usize) -> Result<Vec<T>> {
    if aipd.len() != distances.len() || aipd.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} AIPDs for {} distances",
            aipd.len(),
            distances.len()
        )));
    }
    if dimension == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let inv_n = T::count(dimension).recip();
    aipd.iter()
        .zip(distances)
        .map(|(&a, &d)| {
            if !(a > T::zero()) || !a.is_finite() {
                return Err(Error::InvalidArgument(format!("AIPD {a} must be positive and finite")));
            }
            if !(d > T::zero()) {
                return Err(Error::InvalidArgument(format!("distance {d} must be positive")));
            }
            Ok(d.powf(alpha) * a.powf(inv_n))
        })
        .collect()
}

/// `p_j = J d_j^alpha AIPD_j^(1/N) / sum_i d_i^alpha AIPD_i^(1/N)`.
pub fn allocate_power<T: Real>(aipd: &[T], distances: &[T], alpha: T, dimension: usize) -> Result<Vec<T>> {
    let w = weights(aipd, distances, alpha, dimension)?;
    let total: T = w.iter().copied().sum();
    let j = T::count(w.len());
    Ok(w.into_iter().map(|x| j * x / total).collect())
}

/// The equalized per-user coefficient `(1/J) sum_j d_j^alpha AIPD_j^(1/N)`.
pub fn xi<T: Real>(aipd: &[T], distances: &[T], alpha: T, dimension: usize) -> Result<T> {
    let w = weights(aipd, distances, alpha, dimension)?;
    let total: T = w.iter().copied().sum();
    Ok(total / T::count(w.len()))
}

/// J per-layer codebooks with the user-to-codebook assignment and powers
/// for one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSet<T> {
    pub graph_id: String,
    pub dimension: usize,
    pub vmm: Vmm<T>,
    codebooks: Vec<Codebook<T>>,
    assignment: Vec<usize>,
    powers: Vec<T>,
    distances: Vec<T>,
    alpha: T,
    xi: T,
}

impl<T: Real> CodebookSet<T> {
    /// Builds the layer codebooks of `vmm`, then allocates codebooks and
    /// power for `dep`.
    pub fn assemble(graph: &FactorGraph, vmm: &Vmm<T>, pool: &McPool<T>, dep: &Deployment<T>) -> Result<Self> {
        let j = graph.layers();
        if vmm.orders.len() != j {
            return Err(Error::DimensionMismatch(format!("VMM has {} layers, graph {j}", vmm.orders.len())));
        }
        if dep.users() != j {
            return Err(Error::DimensionMismatch(format!("{} users for {j} layers", dep.users())));
        }
        if !graph.is_regular() {
            return Err(Error::InvalidGraph("codebook design needs a regular graph (shared N)".into()));
        }
        let codebooks: Vec<Codebook<T>> = (0..j)
            .map(|l| build_codebook(pool.get(vmm.orders[l])?, &graph.mapping_matrix(l)?))
            .collect::<Result<_>>()?;
        let aipd: Vec<T> = codebooks.iter().map(Codebook::aipd).collect();
        let assignment = allocate_codebooks(&aipd, dep.distances())?;
        let user_aipd: Vec<T> = assignment.iter().map(|&l| aipd[l]).collect();
        let n = graph.dimension();
        let powers = allocate_power(&user_aipd, dep.distances(), dep.alpha(), n)?;
        let xi = xi(&user_aipd, dep.distances(), dep.alpha(), n)?;
        Ok(Self {
            graph_id: graph.id().to_string(),
            dimension: n,
            vmm: vmm.clone(),
            codebooks,
            assignment,
            powers,
            distances: dep.distances().to_vec(),
            alpha: dep.alpha(),
            xi,
        })
    }

    /// Replaces powers, e.g. for uniform-power baselines or test fixtures.
    pub fn with_powers(mut self, powers: Vec<T>) -> Result<Self> {
        if powers.len() != self.users() || powers.iter().any(|p| !(*p >= T::zero())) {
            return Err(Error::InvalidArgument("powers must be J nonnegative values".into()));
        }
        self.powers = powers;
        Ok(self)
    }

    pub fn users(&self) -> usize {
        self.assignment.len()
    }

    pub fn resources(&self) -> usize {
        self.codebooks.first().map_or(0, Codebook::resources)
    }

    pub fn codebooks(&self) -> &[Codebook<T>] {
        &self.codebooks
    }

    /// Codebook index of each user.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn user_codebook(&self, j: usize) -> &Codebook<T> {
        &self.codebooks[self.assignment[j]]
    }

    pub fn user_order(&self, j: usize) -> usize {
        self.user_codebook(j).order()
    }

    pub fn user_orders(&self) -> Vec<u32> {
        (0..self.users()).map(|j| self.user_order(j) as u32).collect()
    }

    pub fn user_aipd(&self) -> Vec<T> {
        (0..self.users()).map(|j| self.user_codebook(j).aipd()).collect()
    }

    pub fn powers(&self) -> &[T] {
        &self.powers
    }

    pub fn distances(&self) -> &[T] {
        &self.distances
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    pub fn tau(&self) -> T {
        self.vmm.tau
    }

    pub fn rate(&self) -> u32 {
        self.user_orders().iter().map(|m| m.trailing_zeros()).sum()
    }

    /// Per-user `d_j^alpha / p_j * AIPD_j^(1/N)`; constant under the
    /// closed-form power allocation.
    pub fn equalized_terms(&self) -> Vec<T> {
        let inv_n = T::count(self.dimension).recip();
        (0..self.users())
            .map(|j| {
                self.distances[j].powf(self.alpha) / self.powers[j] * self.user_codebook(j).aipd().powf(inv_n)
            })
            .collect()
    }

    /// Per-user JSON view: order, K x M matrix as `[re, im]` pairs, power and
    /// codebook id.
    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        #[derive(Serialize)]
        struct User<'a, T> {
            order: usize,
            codebook: usize,
            power: T,
            distance: T,
            matrix: &'a [Vec<Complex<T>>],
        }
        #[derive(Serialize)]
        struct Out<'a, T> {
            #[serde(rename = "graph-id")]
            graph_id: &'a str,
            rate: u32,
            orders: &'a [u32],
            tau: T,
            xi: T,
            alpha: T,
            users: Vec<User<'a, T>>,
        }
        let users = (0..self.users())
            .map(|j| User {
                order: self.user_order(j),
                codebook: self.assignment[j],
                power: self.powers[j],
                distance: self.distances[j],
                matrix: self.user_codebook(j).matrix(),
            })
            .collect();
        serde_json::to_string_pretty(&Out {
            graph_id: &self.graph_id,
            rate: self.rate(),
            orders: &self.vmm.orders,
            tau: self.vmm.tau,
            xi: self.xi,
            alpha: self.alpha,
            users,
        })
        .expect("codebook set serializes")
    }
}

/// Tuning knobs of [`design_vm_scma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self { seed: 0, restarts: 8 }
    }
}

/// One evaluated combination of the design loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate<T> {
    pub combination: ModCombination,
    pub orders: Vec<u32>,
    pub tau: T,
    pub xi: T,
}

/// Winning codebook set plus every candidate, ranked best first.
#[derive(Debug, Clone)]
pub struct Design<T> {
    pub set: CodebookSet<T>,
    pub candidates: Vec<Candidate<T>>,
}

fn rank<T: Real>(a: (&T, &T, &ModCombination), b: (&T, &T, &ModCombination)) -> std::cmp::Ordering {
    a.0.partial_cmp(b.0)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then_with(|| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .then_with(|| a.2.cmp(b.2))
}

/// Runs the design loop for sum rate `rate`: every combination's VMM is
/// optimized, codebooks and powers are allocated, and the set with the
/// smallest Xi wins (ties: smaller tau, then lexicographic combination).
pub fn design_vm_scma<T: Real>(
    graph: &FactorGraph,
    rate: u32,
    dep: &Deployment<T>,
    pool: &McPool<T>,
    opts: DesignOptions,
) -> Result<Design<T>> {
    let orders = pool.orders();
    let combos = enumerate_combinations(graph.layers(), rate, &orders);
    if combos.is_empty() {
        return Err(Error::InfeasibleRate {
            rate,
            layers: graph.layers(),
            orders,
        });
    }
    let aipd = pool.aipd_by_order();
    let mut evaluated: Vec<(CodebookSet<T>, Candidate<T>)> = combos
        .into_par_iter()
        .map(|c| {
            let vmm = optimize_vmm_restarts(graph, &c, &aipd, opts.seed, opts.restarts)?;
            let set = CodebookSet::assemble(graph, &vmm, pool, dep)?;
            let cand = Candidate {
                combination: c,
                orders: vmm.orders.clone(),
                tau: vmm.tau,
                xi: set.xi(),
            };
            Ok((set, cand))
        })
        .collect::<Result<_>>()?;
    evaluated.sort_by(|a, b| rank((&a.1.xi, &a.1.tau, &a.1.combination), (&b.1.xi, &b.1.tau, &b.1.combination)));
    let candidates = evaluated.iter().map(|(_, c)| c.clone()).collect();
    let set = evaluated.swap_remove(0).0;
    Ok(Design { set, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::builtin_mc_pool;
    use crate::vmm_design::grouped_vmm;
    use approx::assert_relative_eq;

    const DIVERSE: [f64; 6] = [4.70, 4.60, 1.62, 1.25, 1.20, 1.13];

    #[test]
    fn codebook_from_mc_sits_on_layer_support() {
        let g = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let cb = build_codebook(pool.get(2).unwrap(), &g.mapping_matrix(0).unwrap()).unwrap();
        assert_eq!(cb.support(), &[1, 3]);
        assert_eq!(cb.entry(0, 0), Complex::new(0.0, 0.0));
        assert_relative_eq!(cb.aipd(), pool.get(2).unwrap().aipd, max_relative = 1e-12);
        let cb4 = build_codebook(pool.get(4).unwrap(), &g.mapping_matrix(2).unwrap()).unwrap();
        assert_relative_eq!(cb4.trace_energy(), 4.0, max_relative = 0.02);
        assert_relative_eq!(cb4.aipd(), 2.0, max_relative = 0.02);
    }

    #[test]
    fn identical_columns_are_degenerate() {
        let z = Complex::new(0.0, 0.0);
        let a = Complex::new(1.0, 0.0);
        let m = vec![vec![a, a], vec![z, z], vec![a, a]];
        assert!(matches!(aipd_of_codebook(&m), Err(Error::DegenerateConstellation(0, 1))));
    }

    #[test]
    fn farthest_users_get_smallest_aipd() {
        let aipd = [0.25, 0.25, 9.2, 39.0, 39.0, 39.0];
        let a = allocate_codebooks(&aipd, &DIVERSE).unwrap();
        assert_eq!(&a[..2], &[0, 1]);
        let equal = allocate_codebooks(&[2.0; 6], &[1.0; 6]).unwrap();
        assert_eq!(equal, vec![0, 1, 2, 3, 4, 5]);
        let reversed = allocate_codebooks(&[39.0, 0.25], &[1.0, 3.0]).unwrap();
        assert_eq!(reversed, vec![0, 1]);
        assert!(allocate_codebooks(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn power_closed_form() {
        let p = allocate_power(&[0.25, 39.0], &[1.0, 1.0], 2.0, 2).unwrap();
        let (a, b) = (0.5, 39f64.sqrt());
        assert_relative_eq!(p[0], 2.0 * a / (a + b), max_relative = 1e-14);
        assert_relative_eq!(p[1], 2.0 * b / (a + b), max_relative = 1e-14);
        assert_eq!(allocate_power(&[2.0; 3], &[1.5; 3], 3.0, 2).unwrap(), vec![1.0; 3]);
        assert!(allocate_power(&[0.0], &[1.0], 2.0, 2).is_err());
        assert!(allocate_power(&[1.0], &[-1.0], 2.0, 2).is_err());
    }

    #[test]
    fn xi_equal_case() {
        assert_relative_eq!(xi(&[4.0; 6], &[2.0; 6], 2.0, 2).unwrap(), 8.0);
    }

    #[test]
    fn assembled_set_invariants() {
        let g = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::new(DIVERSE.to_vec(), 3.0).unwrap();
        let vmm = grouped_vmm(&g, &[2, 8, 16], &pool.aipd_by_order()).unwrap();
        let set = CodebookSet::assemble(&g, &vmm, &pool, &dep).unwrap();
        assert_relative_eq!(set.powers().iter().sum::<f64>(), 6.0, max_relative = 1e-12);
        for t in set.equalized_terms() {
            assert_relative_eq!(t, set.xi(), max_relative = 1e-10);
        }
        assert_eq!(set.user_order(0), 2);
        assert_eq!(set.user_order(5), 16);
    }

    #[test]
    fn design_minimum_rate_is_all_bpsk() {
        let g = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::equal(6, 2.0).unwrap();
        let d = design_vm_scma(&g, 6, &dep, &pool, DesignOptions::default()).unwrap();
        assert_eq!(d.set.user_orders(), vec![2; 6]);
        for p in d.set.powers() {
            assert_relative_eq!(*p, 1.0, max_relative = 1e-12);
        }
        assert!(matches!(
            design_vm_scma(&g, 25, &dep, &pool, DesignOptions::default()),
            Err(Error::InfeasibleRate { rate: 25, .. })
        ));
    }

    #[test]
    fn json_round_trips_numbers() {
        let g = FactorGraph::default_4x6();
        let pool = builtin_mc_pool::<f64>();
        let dep = Deployment::new(DIVERSE.to_vec(), 2.0).unwrap();
        let vmm = grouped_vmm(&g, &[2, 4, 8], &pool.aipd_by_order()).unwrap();
        let set = CodebookSet::assemble(&g, &vmm, &pool, &dep).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json()).unwrap();
        for j in 0..6 {
            assert_eq!(v["users"][j]["power"].as_f64().unwrap(), set.powers()[j]);
        }
        assert_eq!(v["users"][0]["matrix"][1][0][0].as_f64().unwrap(), set.user_codebook(0).entry(1, 0).re);
    }
}
