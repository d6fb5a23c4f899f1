//! Monte Carlo campaigns: SER against SNR, effective throughput of the
//! adaptive controller, and averages over random deployments.
//!
//! Trials are drawn from counter-based streams keyed on (seed, campaign
//! domain, point) with the trial index as stream id, and are run in fixed-size
//! batches. A point stops at the first batch boundary where the aggregate
//! error count reaches the target or the trial cap is hit, so results are
//! identical for any worker count.

use std::io::Write;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::avm::{Controller, Scheme};
use crate::channel::{draw_channel, n0_from_snr_db, transmit, Deployment};
use crate::codebook::{design_vm_scma, CodebookSet, DesignOptions};
use crate::constellation::McPool;
use crate::error::{Error, Result};
use crate::factor_graph::FactorGraph;
use crate::mpa_decoder::{MpaConfig, MpaDecoder};
use crate::rng::stream_rng;
use crate::scalar::linear_to_db;
use crate::vmm_design::{optimize_vmm_restarts, ModCombination};

const DOMAIN_SER: u64 = 0x5345_5200;
const DOMAIN_TPUT: u64 = 0x5450_5554;
const DOMAIN_CELL: u64 = 0x4345_4c4c;

/// Stopping rule and execution settings shared by every campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Campaign {
    pub snr_db: Vec<f64>,
    pub trials_cap: u64,
    pub target_errors: u64,
    pub batch_size: u64,
    pub seed: u64,
    pub decoder: MpaConfig,
    /// Worker threads; 0 uses the global pool.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for Campaign {
    fn default() -> Self {
        Self {
            snr_db: (0..=12).map(|i| 2.0 * i as f64).collect(),
            trials_cap: 200_000,
            target_errors: 200,
            batch_size: 2_000,
            seed: 0,
            decoder: MpaConfig::default(),
            workers: 0,
        }
    }
}

impl Campaign {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig(format!("SNR point {x} is not finite")));
        }
        if self.trials_cap == 0 {
            return Err(Error::InvalidConfig("trials_cap must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        self.decoder.validate()
    }

    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        if self.workers == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<S: Serialize>(value: &S) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// Half-width of the 95% normal-approximation interval of a Bernoulli rate.
pub fn ci95(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Error counts at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub errors: Vec<u64>,
    pub ser: Vec<f64>,
    pub ci: Vec<f64>,
    pub aggregate_ser: f64,
    pub aggregate_ci: f64,
}

impl SerPoint {
    fn from_counts(snr_db: f64, trials: u64, errors: Vec<u64>) -> Self {
        let ser: Vec<f64> = errors.iter().map(|&e| e as f64 / trials as f64).collect();
        let ci = ser.iter().map(|&p| ci95(p, trials)).collect();
        let total: u64 = errors.iter().sum();
        let n = trials * errors.len() as u64;
        let aggregate_ser = total as f64 / n as f64;
        Self {
            snr_db,
            trials,
            aggregate_ci: ci95(aggregate_ser, n),
            errors,
            ser,
            ci,
            aggregate_ser,
        }
    }
}

/// SER against SNR for one codebook set and deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerCurve {
    pub points: Vec<SerPoint>,
    pub seed: u64,
    pub config_hash: String,
}

impl SerCurve {
    /// CSV with columns `snr_db, user, ser, ci, trials`; `user = all` rows
    /// carry the aggregate.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["snr_db", "user", "ser", "ci", "trials"]).map_err(csv_err)?;
        for p in &self.points {
            for (j, (s, c)) in p.ser.iter().zip(&p.ci).enumerate() {
                w.write_record([p.snr_db.to_string(), (j + 1).to_string(), s.to_string(), c.to_string(), p.trials.to_string()])
                    .map_err(csv_err)?;
            }
            w.write_record([
                p.snr_db.to_string(),
                "all".into(),
                p.aggregate_ser.to_string(),
                p.aggregate_ci.to_string(),
                p.trials.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

/// Simulates one SNR point; `domain` keys the random streams.
fn simulate_point(
    cbs: &CodebookSet<f64>,
    dep: &Deployment<f64>,
    snr_db: f64,
    campaign: &Campaign,
    domain: &[u64],
) -> Result<SerPoint> {
    let n0 = n0_from_snr_db(snr_db);
    let decoder = MpaDecoder::new(cbs, campaign.decoder)?;
    let users = cbs.users();
    let k = cbs.resources();
    let orders: Vec<usize> = (0..users).map(|j| cbs.user_order(j)).collect();
    let trial = |t: u64| -> Result<Vec<u64>> {
        let mut rng = stream_rng(campaign.seed, domain, t);
        let symbols: Vec<usize> = orders.iter().map(|&m| rng.random_range(0..m)).collect();
        let h = draw_channel(dep, k, &mut rng);
        let y = transmit(cbs, &symbols, &h, n0, &mut rng)?;
        let out = decoder.decode(&y, &h, n0)?;
        Ok(symbols.iter().zip(&out.decisions).map(|(s, d)| (s != d) as u64).collect())
    };
    let mut errors = vec![0u64; users];
    let mut done = 0u64;
    while done < campaign.trials_cap {
        let end = (done + campaign.batch_size).min(campaign.trials_cap);
        let batch = (done..end)
            .into_par_iter()
            .map(trial)
            .try_reduce(|| vec![0u64; users], |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            })?;
        errors.iter_mut().zip(batch).for_each(|(x, y)| *x += y);
        done = end;
        if errors.iter().sum::<u64>() >= campaign.target_errors {
            break;
        }
    }
    Ok(SerPoint::from_counts(snr_db, done, errors))
}

fn check_pair(cbs: &CodebookSet<f64>, dep: &Deployment<f64>) -> Result<()> {
    if cbs.users() != dep.users() || cbs.distances() != dep.distances() {
        return Err(Error::InvalidConfig("codebook set was designed for a different deployment".into()));
    }
    Ok(())
}

/// SER curve over the campaign's SNR grid.
pub fn run_ser(cbs: &CodebookSet<f64>, dep: &Deployment<f64>, campaign: &Campaign) -> Result<SerCurve> {
    campaign.validate()?;
    check_pair(cbs, dep)?;
    let points = campaign.run(|| {
        campaign
            .snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| simulate_point(cbs, dep, snr, campaign, &[DOMAIN_SER, i as u64]))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SerCurve {
        points,
        seed: campaign.seed,
        config_hash: config_hash(&(campaign, cbs.user_orders(), cbs.distances(), cbs.alpha())),
    })
}

/// Throughput of the controller at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub snr_db: f64,
    pub v: usize,
    pub rate: u32,
    pub gamma_db: f64,
    pub infeasible: bool,
    pub predicted_ser: f64,
    pub predicted_throughput: f64,
    pub measured_ser: Vec<f64>,
    pub measured_aggregate_ser: f64,
    pub measured_throughput: f64,
    /// 95% half-width on the measured throughput.
    pub throughput_ci: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputCurve {
    pub scheme: Scheme,
    pub ser_threshold: f64,
    pub points: Vec<ThroughputPoint>,
    pub seed: u64,
    pub config_hash: String,
}

impl ThroughputCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "snr_db",
            "v",
            "rate",
            "gamma_db",
            "infeasible",
            "predicted_ser",
            "predicted_throughput",
            "measured_ser",
            "measured_throughput",
            "ci",
            "trials",
        ])
        .map_err(csv_err)?;
        for p in &self.points {
            w.write_record([
                p.snr_db.to_string(),
                p.v.to_string(),
                p.rate.to_string(),
                p.gamma_db.to_string(),
                p.infeasible.to_string(),
                p.predicted_ser.to_string(),
                p.predicted_throughput.to_string(),
                p.measured_aggregate_ser.to_string(),
                p.measured_throughput.to_string(),
                p.throughput_ci.to_string(),
                p.trials.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Runs mode selection at every SNR point and simulates the chosen mode.
pub fn run_throughput(
    graph: &FactorGraph,
    pool: &McPool<f64>,
    dep: &Deployment<f64>,
    scheme: Scheme,
    ser_th: f64,
    campaign: &Campaign,
) -> Result<ThroughputCurve> {
    campaign.validate()?;
    let controller = Controller::new(graph, pool).with_scheme(scheme);
    let points = campaign.run(|| {
        campaign
            .snr_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                let sel = controller.select(dep, n0_from_snr_db(snr), ser_th)?;
                let p = simulate_point(&sel.set, dep, snr, campaign, &[DOMAIN_TPUT, i as u64, sel.mode.v as u64])?;
                let orders = sel.set.user_orders();
                let measured: f64 = p
                    .ser
                    .iter()
                    .zip(&orders)
                    .map(|(s, m)| (1.0 - s) * m.trailing_zeros() as f64)
                    .sum();
                let var: f64 = p
                    .ser
                    .iter()
                    .zip(&orders)
                    .map(|(s, m)| (m.trailing_zeros() as f64).powi(2) * s * (1.0 - s) / p.trials as f64)
                    .sum();
                Ok(ThroughputPoint {
                    snr_db: snr,
                    v: sel.mode.v,
                    rate: sel.mode.rate,
                    gamma_db: sel.evaluation.gamma_db,
                    infeasible: sel.infeasible,
                    predicted_ser: sel.evaluation.predicted_ser,
                    predicted_throughput: sel.evaluation.throughput,
                    measured_ser: p.ser,
                    measured_aggregate_ser: p.aggregate_ser,
                    measured_throughput: measured,
                    throughput_ci: 1.96 * var.sqrt(),
                    trials: p.trials,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(ThroughputCurve {
        scheme,
        ser_threshold: ser_th,
        points,
        seed: campaign.seed,
        config_hash: config_hash(&(campaign, scheme, ser_th, dep.distances(), dep.alpha())),
    })
}

/// How the codebook set of a deployment is obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodebookSpec {
    /// Full design loop at this sum rate.
    Rate(u32),
    /// Optimized VMM for a fixed combination.
    Combination(ModCombination),
    /// The template of a transmission mode.
    Tm(usize),
}

impl CodebookSpec {
    pub fn build(
        &self,
        graph: &FactorGraph,
        pool: &McPool<f64>,
        dep: &Deployment<f64>,
        opts: DesignOptions,
    ) -> Result<CodebookSet<f64>> {
        match self {
            CodebookSpec::Rate(r) => design_vm_scma(graph, *r, dep, pool, opts).map(|d| d.set),
            CodebookSpec::Combination(c) => {
                let vmm = optimize_vmm_restarts(graph, c, &pool.aipd_by_order(), opts.seed, opts.restarts)?;
                CodebookSet::assemble(graph, &vmm, pool, dep)
            }
            CodebookSpec::Tm(v) => {
                let table = crate::avm::tm_table();
                let tm = table.get(v.wrapping_sub(1)).ok_or(Error::IndexOutOfRange {
                    what: "transmission mode",
                    index: *v,
                    limit: table.len(),
                })?;
                tm.codebook_set(graph, pool, dep)
            }
        }
    }
}

/// How cell-average deployments are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Density {
    /// Distance uniform on `[d_min, d_max]`.
    #[default]
    UniformRadius,
    /// Position uniform over the annulus.
    UniformArea,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub users: usize,
    pub samples: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub alpha: f64,
    pub density: Density,
}

/// The `samples` random deployments of a cell average.
pub fn cell_deployments(cell: &CellConfig, seed: u64) -> Result<Vec<Deployment<f64>>> {
    if cell.samples == 0 || cell.users == 0 {
        return Err(Error::InvalidConfig("cell averaging needs users and samples".into()));
    }
    (0..cell.samples as u64)
        .map(|s| {
            let mut rng = stream_rng(seed, &[DOMAIN_CELL], s);
            let d = (0..cell.users)
                .map(|_| {
                    let u: f64 = rng.random();
                    match cell.density {
                        Density::UniformRadius => cell.d_min + u * (cell.d_max - cell.d_min),
                        Density::UniformArea => {
                            (cell.d_min * cell.d_min + u * (cell.d_max * cell.d_max - cell.d_min * cell.d_min)).sqrt()
                        }
                    }
                })
                .collect();
            Deployment::with_bounds(d, cell.alpha, cell.d_min, cell.d_max)
        })
        .collect()
}

/// Seed used for the simulations of cell sample `s`.
pub fn sample_seed(seed: u64, s: u64) -> u64 {
    stream_rng(seed, &[DOMAIN_CELL, 1], s).next_u64()
}

/// Quantity averaged by [`run_cell_average`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellMetric {
    /// Aggregate SER of the codebook spec.
    Ser(CodebookSpec),
    /// Measured effective throughput of a scheme.
    Throughput { scheme: Scheme, ser_threshold: f64 },
    /// Model-predicted SNR gain of mode `v1` over `v2`.
    Gain { v1: usize, v2: usize },
}

/// Per-SNR average over the sampled deployments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    pub snr_db: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellCurve {
    pub metric: CellMetric,
    pub points: Vec<CellPoint>,
    pub seed: u64,
    pub config_hash: String,
}

impl CellCurve {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["snr_db", "mean", "std_error", "samples"]).map_err(csv_err)?;
        for p in &self.points {
            w.write_record([p.snr_db.to_string(), p.mean.to_string(), p.std_error.to_string(), p.samples.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Averages `metric` over random deployments of the cell.
pub fn run_cell_average(
    graph: &FactorGraph,
    pool: &McPool<f64>,
    cell: &CellConfig,
    metric: &CellMetric,
    opts: DesignOptions,
    campaign: &Campaign,
) -> Result<CellCurve> {
    campaign.validate()?;
    let deps = cell_deployments(cell, campaign.seed)?;
    let mut per_sample: Vec<Vec<f64>> = Vec::with_capacity(deps.len());
    for (s, dep) in deps.iter().enumerate() {
        let sub = Campaign {
            seed: sample_seed(campaign.seed, s as u64),
            ..campaign.clone()
        };
        let values = match metric {
            CellMetric::Ser(spec) => {
                let set = spec.build(graph, pool, dep, opts)?;
                run_ser(&set, dep, &sub)?.points.iter().map(|p| p.aggregate_ser).collect()
            }
            CellMetric::Throughput { scheme, ser_threshold } => {
                run_throughput(graph, pool, dep, *scheme, *ser_threshold, &sub)?
                    .points
                    .iter()
                    .map(|p| p.measured_throughput)
                    .collect()
            }
            CellMetric::Gain { v1, v2 } => {
                let c = Controller::new(graph, pool);
                campaign
                    .snr_db
                    .iter()
                    .map(|&snr| c.predict_gain(*v1, *v2, dep, n0_from_snr_db(snr)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        per_sample.push(values);
    }
    let n = per_sample.len() as f64;
    let points = campaign
        .snr_db
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mean = per_sample.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = if per_sample.len() > 1 {
                per_sample.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            CellPoint {
                snr_db: snr,
                mean,
                std_error: (var / n).sqrt(),
                samples: per_sample.len(),
            }
        })
        .collect();
    Ok(CellCurve {
        metric: metric.clone(),
        points,
        seed: campaign.seed,
        config_hash: config_hash(&(campaign, cell, metric)),
    })
}

/// Linear interpolation (in dB against log10 SER) of the SNR at which a
/// decreasing SER curve crosses `target`.
pub fn snr_at_ser(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    points.windows(2).find_map(|w| {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if y0 >= target && y1 <= target && y0 > 0.0 && y1 > 0.0 {
            let (l0, l1) = (y0.log10(), y1.log10());
            if l0 == l1 {
                return Some(x0);
            }
            Some(x0 + (lt - l0) * (x1 - x0) / (l1 - l0))
        } else {
            None
        }
    })
}

/// SNR in dB of an `N0`.
pub fn snr_db_of(n0: f64) -> f64 {
    -linear_to_db(n0)
}
