//! Transmission-mode table and the adaptive VM-SCMA (AVM-SCMA) mode
//! selection.
//!
//! Each mode pairs a modulation combination with an exponential SER model
//! fitted at the reference distance. For a deployment and noise level the
//! controller computes every candidate's received statistical SNR under the
//! design's codebook and power allocation, predicts the per-user SER from the
//! model and picks the mode with the highest effective throughput whose
//! prediction meets the SER ceiling.

use serde::{Deserialize, Serialize};

use crate::analysis::{analytic_gain, reference_snr, statistical_snr, SerModel};
use crate::channel::Deployment;
use crate::codebook::CodebookSet;
use crate::constellation::McPool;
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;
use crate::scalar::{linear_to_db, Real};
use crate::vmm_design::{group_orders_for, grouped_vmm, ModCombination, Vmm};

/// Number of modes in the table.
pub const V_MAX: usize = 20;

/// Same-modulation modes, used to seed the search.
pub const REFERENCE_MODES: [usize; 4] = [1, 5, 14, 20];

/// One row of the mode table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionMode {
    pub v: usize,
    pub rate: u32,
    pub m: ModCombination,
    pub model: SerModel,
}

impl TransmissionMode {
    /// Order of each covering column group in the mode's tau = 0 template.
    pub fn group_orders(&self, graph: &FactorGraph) -> Result<Vec<u32>> {
        group_orders_for(graph, &self.m).ok_or_else(|| {
            Error::NotGroupable(format!("{} has no grouped layout for {}", graph.id(), self.m))
        })
    }

    /// The mode's tau = 0 VMM on `graph`.
    pub fn template<T: Real>(&self, graph: &FactorGraph, pool: &McPool<T>) -> Result<Vmm<T>> {
        grouped_vmm(graph, &self.group_orders(graph)?, &pool.aipd_by_order())
    }

    /// Codebook set of the mode for `dep`.
    pub fn codebook_set<T: Real>(&self, graph: &FactorGraph, pool: &McPool<T>, dep: &Deployment<T>) -> Result<CodebookSet<T>> {
        CodebookSet::assemble(graph, &self.template(graph, pool)?, pool, dep)
    }
}

// (rate, orders, gamma_th dB, a, b)
const TABLE: [(u32, [u32; 6], f64, f64, f64); V_MAX] = [
    (6, [2, 2, 2, 2, 2, 2], 4.0, 0.42, 0.83),
    (8, [2, 2, 2, 2, 4, 4], 6.0, 0.44, 2.57),
    (10, [2, 2, 4, 4, 4, 4], 8.0, 0.45, 6.79),
    (10, [2, 2, 2, 2, 8, 8], 8.0, 0.43, 6.79),
    (12, [4, 4, 4, 4, 4, 4], 10.0, 0.46, 18.6),
    (12, [2, 2, 4, 4, 8, 8], 10.0, 0.46, 19.1),
    (12, [2, 2, 2, 2, 16, 16], 10.0, 0.46, 21.2),
    (14, [4, 4, 4, 4, 8, 8], 12.0, 0.50, 72.5),
    (14, [2, 2, 4, 4, 16, 16], 12.0, 0.49, 68.0),
    (14, [2, 2, 8, 8, 8, 8], 12.0, 0.47, 61.0),
    (16, [4, 4, 8, 8, 8, 8], 14.0, 0.52, 239.0),
    (16, [4, 4, 4, 4, 16, 16], 14.0, 0.50, 195.0),
    (16, [2, 2, 8, 8, 16, 16], 14.0, 0.50, 234.0),
    (18, [8, 8, 8, 8, 8, 8], 16.0, 0.57, 1515.0),
    (18, [4, 4, 8, 8, 16, 16], 16.0, 0.55, 1010.0),
    (18, [2, 2, 16, 16, 16, 16], 16.0, 0.52, 653.0),
    (20, [8, 8, 8, 8, 16, 16], 18.0, 0.60, 8590.0),
    (20, [4, 4, 16, 16, 16, 16], 18.0, 0.58, 5253.0),
    (22, [8, 8, 16, 16, 16, 16], 20.0, 0.65, 7369.0),
    (24, [16, 16, 16, 16, 16, 16], 22.0, 0.68, 6367.0),
];

/// The 20-mode table, TM1 first.
pub fn tm_table() -> Vec<TransmissionMode> {
    TABLE
        .iter()
        .enumerate()
        .map(|(i, &(rate, orders, th, a, b))| TransmissionMode {
            v: i + 1,
            rate,
            m: ModCombination::new(orders.to_vec()).expect("table orders are valid"),
            model: SerModel::new(a, b, th).expect("table model is valid"),
        })
        .collect()
}

/// Writes the table as CSV with columns `R_b, v, m, gamma_th, a, b`.
pub fn write_tm_csv<W: std::io::Write>(table: &[TransmissionMode], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["R_b", "v", "m", "gamma_th", "a", "b"]).map_err(ser)?;
    for tm in table {
        w.write_record([
            tm.rate.to_string(),
            tm.v.to_string(),
            tm.m.to_string(),
            tm.model.gamma_threshold_db.to_string(),
            tm.model.a.to_string(),
            tm.model.b.to_string(),
        ])
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

/// `sum_j (1 - SER_j) log2 M_j`.
pub fn effective_throughput(ser: &[f64], orders: &[u32]) -> Result<f64> {
    if ser.len() != orders.len() {
        return Err(Error::DimensionMismatch(format!("{} SERs for {} users", ser.len(), orders.len())));
    }
    Ok(ser
        .iter()
        .zip(orders)
        .map(|(s, m)| (1.0 - s) * m.trailing_zeros() as f64)
        .sum())
}

/// Model-based evaluation of one mode for one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEvaluation {
    pub v: usize,
    pub rate: u32,
    /// Received statistical SNR, linear.
    pub gamma: f64,
    pub gamma_db: f64,
    pub predicted_ser: f64,
    pub throughput: f64,
    pub feasible: bool,
}

/// Which modes the controller may choose from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every mode of the table.
    #[default]
    Avm,
    /// Same-modulation modes only (TM1, TM5, TM14, TM20).
    SameModulation,
}

impl Scheme {
    pub fn allows(self, v: usize) -> bool {
        match self {
            Scheme::Avm => true,
            Scheme::SameModulation => REFERENCE_MODES.contains(&v),
        }
    }
}

/// Outcome of [`select_tm`].
#[derive(Debug, Clone)]
pub struct Selection<T> {
    pub mode: TransmissionMode,
    pub set: CodebookSet<T>,
    pub evaluation: ModeEvaluation,
    /// Same-order reference SNR, linear.
    pub gamma_ref: f64,
    pub v_ini: usize,
    /// No mode met the SER ceiling; TM1 is returned.
    pub infeasible: bool,
    /// Modes evaluated, in search order.
    pub visited: Vec<ModeEvaluation>,
}

/// Shared inputs of the controller.
#[derive(Debug, Clone)]
pub struct Controller<'a, T> {
    pub graph: &'a FactorGraph,
    pub pool: &'a McPool<T>,
    pub table: Vec<TransmissionMode>,
    pub scheme: Scheme,
}

impl<'a, T: Real> Controller<'a, T> {
    pub fn new(graph: &'a FactorGraph, pool: &'a McPool<T>) -> Self {
        Self {
            graph,
            pool,
            table: tm_table(),
            scheme: Scheme::Avm,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    /// Predicted performance of mode `v` (1-based).
    pub fn evaluate(&self, v: usize, dep: &Deployment<T>, n0: f64, ser_th: f64) -> Result<(ModeEvaluation, CodebookSet<T>)> {
        let tm = self.mode(v)?;
        let set = tm.codebook_set(self.graph, self.pool, dep)?;
        let gamma = statistical_snr(&set, T::lit(n0))?.as_f64();
        let p = tm.model.predict(gamma);
        let orders = set.user_orders();
        let throughput = effective_throughput(&vec![p.ser; orders.len()], &orders)?;
        Ok((
            ModeEvaluation {
                v,
                rate: tm.rate,
                gamma,
                gamma_db: linear_to_db(gamma),
                predicted_ser: p.ser,
                throughput,
                feasible: !p.below_threshold && p.ser <= ser_th,
            },
            set,
        ))
    }

    fn mode(&self, v: usize) -> Result<&TransmissionMode> {
        self.table.get(v.wrapping_sub(1)).ok_or(Error::IndexOutOfRange {
            what: "transmission mode",
            index: v,
            limit: self.table.len(),
        })
    }

    /// Largest reference mode whose threshold the same-order SNR `gamma_ref`
    /// reaches; TM1 when none does.
    pub fn initial_mode(&self, gamma_ref: f64) -> usize {
        let db = linear_to_db(gamma_ref);
        REFERENCE_MODES
            .iter()
            .copied()
            .filter(|&v| v <= self.table.len())
            .filter(|&v| self.table[v - 1].model.gamma_threshold_db <= db)
            .last()
            .unwrap_or(1)
    }

    /// Mode selection for one deployment and noise level.
    ///
    /// The scan starts at the seeded mode and walks up to the last mode, then
    /// down from the seed. The downward walk stops once a mode's full rate
    /// cannot beat the best throughput found. The result equals an
    /// exhaustive scan that breaks throughput ties towards the lower mode.
    pub fn select(&self, dep: &Deployment<T>, n0: f64, ser_th: f64) -> Result<Selection<T>> {
        if !(ser_th > 0.0 && ser_th < 1.0) {
            return Err(Error::InvalidArgument(format!("SER ceiling {ser_th} not in (0, 1)")));
        }
        if !(n0 > 0.0) {
            return Err(Error::InvalidArgument(format!("noise power {n0} must be positive")));
        }
        let gamma_ref = reference_snr(dep.distances(), dep.alpha(), T::lit(n0))?.as_f64();
        let v_ini = self.initial_mode(gamma_ref);
        let v_max = self.table.len();
        let mut visited = Vec::new();
        let mut best: Option<(ModeEvaluation, CodebookSet<T>)> = None;
        let consider = |ev: ModeEvaluation, set: CodebookSet<T>, best: &mut Option<(ModeEvaluation, CodebookSet<T>)>| {
            let better = ev.feasible
                && match best {
                    None => true,
                    Some((b, _)) => ev.throughput > b.throughput || (ev.throughput == b.throughput && ev.v < b.v),
                };
            if better {
                *best = Some((ev, set));
            }
        };
        for v in (v_ini..=v_max).filter(|&v| self.scheme.allows(v)) {
            let (ev, set) = self.evaluate(v, dep, n0, ser_th)?;
            visited.push(ev.clone());
            consider(ev, set, &mut best);
        }
        for v in (1..v_ini).rev().filter(|&v| self.scheme.allows(v)) {
            if let Some((b, _)) = &best {
                if (self.table[v - 1].rate as f64) < b.throughput {
                    break;
                }
            }
            let (ev, set) = self.evaluate(v, dep, n0, ser_th)?;
            visited.push(ev.clone());
            consider(ev, set, &mut best);
        }
        let (evaluation, set, infeasible) = match best {
            Some((ev, set)) => (ev, set, false),
            None => {
                let (ev, set) = self.evaluate(1, dep, n0, ser_th)?;
                (ev, set, true)
            }
        };
        Ok(Selection {
            mode: self.table[evaluation.v - 1].clone(),
            set,
            evaluation,
            gamma_ref,
            v_ini,
            infeasible,
            visited,
        })
    }

    /// Predicted SNR gain in dB of mode `v1` over mode `v2` at one operating
    /// point.
    pub fn predict_gain(&self, v1: usize, v2: usize, dep: &Deployment<T>, n0: f64) -> Result<f64> {
        let (e1, _) = self.evaluate(v1, dep, n0, 0.5)?;
        let (e2, _) = self.evaluate(v2, dep, n0, 0.5)?;
        Ok(analytic_gain(&self.mode(v1)?.model, e1.gamma, &self.mode(v2)?.model, e2.gamma))
    }
}

/// Convenience wrapper over [`Controller::select`] with the full table.
pub fn select_tm<T: Real>(
    graph: &FactorGraph,
    pool: &McPool<T>,
    dep: &Deployment<T>,
    n0: f64,
    ser_th: f64,
) -> Result<Selection<T>> {
    Controller::new(graph, pool).select(dep, n0, ser_th)
}
