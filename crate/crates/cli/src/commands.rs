//! The four commands. Each one is planned first (every config check, no
//! side effects) and then run entirely in memory; files are written only
//! after the run succeeded.

use anyhow::{bail, ensure, Result};
use serde::Serialize;

use vmscma::analysis::{
    aser_single_layer, aser_single_layer_printed, aser_union_bound, average_rx_power, ergodic_capacity,
    single_layer_union,
};
use vmscma::avm::write_tm_csv;
use vmscma::channel::n0_from_snr_db;
use vmscma::montecarlo::{run_cell_average, run_ser, run_throughput, CellMetric};
use vmscma::{
    builtin_mc_pool, design_vm_scma, tm_table, CapacityUnit, CodebookSpec, Controller, Deployment64, Error, McPool64,
};

use crate::config::{CellMetricKind, Config, Resolved, SimMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Simulate,
    Adapt,
    Analyze,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Simulate => "simulate",
            Command::Adapt => "adapt",
            Command::Analyze => "analyze",
        }
    }
}

/// One output file.
pub struct Output {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn output(name: &str, bytes: Vec<u8>) -> Output {
    Output {
        name: name.into(),
        bytes,
    }
}

fn json<S: Serialize>(name: &str, value: &S) -> Result<Output> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(output(name, bytes))
}

fn csv_output(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Output> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(output(name, w.into_inner()?))
}

/// A validated run, ready to execute.
pub struct Job {
    command: Command,
    config: Config,
    inputs: Resolved,
    pool: McPool64,
    extra: Vec<Deployment64>,
    spec: Option<CodebookSpec>,
    rate: Option<u32>,
}

/// Every config check a command needs; no side effects.
pub fn plan(command: Command, config: Config, workers: usize) -> Result<Job> {
    let inputs = config.resolve(workers)?;
    let mut spec = None;
    let mut rate = None;
    let mut extra = Vec::new();
    match command {
        Command::Design => {
            let Some(r) = config.design.rate else {
                bail!("`design.rate` is required for `design`");
            };
            rate = Some(r);
        }
        Command::Simulate => match config.simulate.mode {
            SimMode::Ser => spec = Some(config.codebook()?),
            SimMode::Throughput => {}
            SimMode::Cell => {
                let cell = config.cell()?;
                ensure!(cell.samples > 0, "simulate.cell.samples must be positive");
                match config.simulate.cell.metric {
                    CellMetricKind::Ser => spec = Some(config.codebook()?),
                    CellMetricKind::Throughput => {}
                    CellMetricKind::Gain => check_modes(config.simulate.cell.gain_modes)?,
                }
            }
        },
        Command::Adapt => {
            ensure!(!config.adapt.snr_db.is_empty(), "adapt.snr_db is empty");
            for d in &config.adapt.extra_distances {
                extra.push(config.deployment_for(Some(d))?);
            }
        }
        Command::Analyze => {
            ensure!(!config.analyze.snr_db.is_empty(), "analyze.snr_db is empty");
            ensure!(config.analyze.snr_db.iter().all(|x| x.is_finite()), "analyze.snr_db must be finite");
            spec = Some(config.codebook()?);
            if let Some(m) = config.analyze.gain_modes {
                check_modes(m)?;
            }
        }
    }
    if command != Command::Adapt {
        ensure!(config.adapt.snr_db.iter().all(|x| x.is_finite()), "adapt.snr_db must be finite");
    }
    Ok(Job {
        command,
        config,
        inputs,
        pool: builtin_mc_pool(),
        extra,
        spec,
        rate,
    })
}

fn check_modes(m: [usize; 2]) -> Result<()> {
    let n = tm_table().len();
    ensure!(
        m.iter().all(|v| (1..=n).contains(v)),
        "transmission modes {m:?} must lie in 1..={n}"
    );
    Ok(())
}

impl Job {
    pub fn run(&self) -> Result<Vec<Output>> {
        match self.command {
            Command::Design => self.design(),
            Command::Simulate => self.simulate(),
            Command::Adapt => self.adapt(),
            Command::Analyze => self.analyze(),
        }
    }

    fn design(&self) -> Result<Vec<Output>> {
        let r = &self.inputs;
        let rate = self.rate.expect("planned");
        let d = design_vm_scma(&r.graph, rate, &r.deployment, &self.pool, r.design)?;
        let winner = d.set.vmm.combination();
        let rows = d
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                vec![
                    (i + 1).to_string(),
                    c.combination.to_string(),
                    format!("{:?}", c.orders),
                    c.tau.to_string(),
                    c.xi.to_string(),
                    (c.combination == winner).to_string(),
                ]
            })
            .collect();
        #[derive(Serialize)]
        struct Report<'a> {
            rate: u32,
            winner: String,
            candidates: &'a [vmscma::codebook::Candidate<f64>],
        }
        Ok(vec![
            output("codebooks.json", (d.set.to_json() + "\n").into_bytes()),
            csv_output("design_report.csv", &["rank", "combination", "layer_orders", "tau", "xi", "winner"], rows)?,
            json(
                "design_report.json",
                &Report {
                    rate,
                    winner: winner.to_string(),
                    candidates: &d.candidates,
                },
            )?,
        ])
    }

    fn simulate(&self) -> Result<Vec<Output>> {
        let r = &self.inputs;
        let sim = &self.config.simulate;
        match sim.mode {
            SimMode::Ser => {
                let set = self.spec.as_ref().expect("planned").build(&r.graph, &self.pool, &r.deployment, r.design)?;
                let curve = run_ser(&set, &r.deployment, &r.campaign)?;
                let mut csv = Vec::new();
                curve.write_csv(&mut csv)?;
                Ok(vec![
                    output("ser.csv", csv),
                    json("ser.json", &curve)?,
                    output("codebooks.json", (set.to_json() + "\n").into_bytes()),
                ])
            }
            SimMode::Throughput => {
                let curve = run_throughput(&r.graph, &self.pool, &r.deployment, sim.scheme, sim.ser_threshold, &r.campaign)?;
                let mut csv = Vec::new();
                curve.write_csv(&mut csv)?;
                Ok(vec![output("throughput.csv", csv), json("throughput.json", &curve)?])
            }
            SimMode::Cell => {
                let metric = match sim.cell.metric {
                    CellMetricKind::Ser => CellMetric::Ser(self.spec.clone().expect("planned")),
                    CellMetricKind::Throughput => CellMetric::Throughput {
                        scheme: sim.scheme,
                        ser_threshold: sim.ser_threshold,
                    },
                    CellMetricKind::Gain => CellMetric::Gain {
                        v1: sim.cell.gain_modes[0],
                        v2: sim.cell.gain_modes[1],
                    },
                };
                let curve = run_cell_average(&r.graph, &self.pool, &self.config.cell()?, &metric, r.design, &r.campaign)?;
                let mut csv = Vec::new();
                curve.write_csv(&mut csv)?;
                Ok(vec![output("cell.csv", csv), json("cell.json", &curve)?])
            }
        }
    }

    fn adapt(&self) -> Result<Vec<Output>> {
        let r = &self.inputs;
        let a = &self.config.adapt;
        let ctl = Controller::new(&r.graph, &self.pool).with_scheme(a.scheme);
        let mut rows = Vec::new();
        for (i, dep) in std::iter::once(&r.deployment).chain(&self.extra).enumerate() {
            for &snr in &a.snr_db {
                let s = ctl.select(dep, n0_from_snr_db(snr), a.ser_threshold)?;
                rows.push(vec![
                    i.to_string(),
                    snr.to_string(),
                    (10.0 * s.gamma_ref.log10()).to_string(),
                    s.v_ini.to_string(),
                    s.mode.v.to_string(),
                    s.mode.rate.to_string(),
                    s.mode.m.to_string(),
                    s.evaluation.gamma_db.to_string(),
                    s.evaluation.predicted_ser.to_string(),
                    s.evaluation.throughput.to_string(),
                    s.infeasible.to_string(),
                ]);
            }
        }
        Ok(vec![csv_output(
            "tm_selection.csv",
            &[
                "deployment",
                "snr_db",
                "gamma_ref_db",
                "v_ini",
                "v",
                "rate",
                "m",
                "gamma_db",
                "predicted_ser",
                "throughput",
                "infeasible",
            ],
            rows,
        )?])
    }

    fn analyze(&self) -> Result<Vec<Output>> {
        let r = &self.inputs;
        let an = &self.config.analyze;
        let set = self.spec.as_ref().expect("planned").build(&r.graph, &self.pool, &r.deployment, r.design)?;
        let p_bar = average_rx_power(&set);
        let mut cap = Vec::new();
        let mut bound = Vec::new();
        for &snr in &an.snr_db {
            let n0 = n0_from_snr_db(snr);
            cap.push(vec![
                snr.to_string(),
                (10.0 * (p_bar / n0).log10()).to_string(),
                ergodic_capacity(p_bar, n0, r.graph.resources(), CapacityUnit::Bits)?.to_string(),
            ]);
            let union = if an.union_bound {
                match aser_union_bound(&set, n0) {
                    Ok(u) => Some(u),
                    Err(Error::SearchSpaceTooLarge { .. }) => None,
                    Err(e) => return Err(e.into()),
                }
            } else {
                None
            };
            bound.push(vec![
                snr.to_string(),
                aser_single_layer(&set, n0)?.to_string(),
                aser_single_layer_printed(&set, n0)?.to_string(),
                single_layer_union(&set, n0)?.to_string(),
                union.as_ref().map_or(String::new(), |u| u.total.to_string()),
                union.as_ref().map_or(String::new(), |u| u.average_user().to_string()),
            ]);
        }
        let ctl = Controller::new(&r.graph, &self.pool);
        let mut model = Vec::new();
        for tm in &ctl.table {
            for &snr in &an.snr_db {
                let (ev, _) = ctl.evaluate(tm.v, &r.deployment, n0_from_snr_db(snr), 0.5)?;
                let p = tm.model.predict(ev.gamma);
                model.push(vec![
                    tm.v.to_string(),
                    tm.rate.to_string(),
                    snr.to_string(),
                    ev.gamma_db.to_string(),
                    p.ser.to_string(),
                    p.below_threshold.to_string(),
                ]);
            }
        }
        let mut table = Vec::new();
        write_tm_csv(&ctl.table, &mut table)?;
        let mut out = vec![
            csv_output("capacity.csv", &["snr_db", "p_bar_over_n0_db", "capacity_bits"], cap)?,
            csv_output(
                "aser_bound.csv",
                &["snr_db", "single_layer", "single_layer_printed", "single_layer_union", "union_total", "union_user_mean"],
                bound,
            )?,
            csv_output("ser_model.csv", &["v", "rate", "snr_db", "gamma_db", "ser", "below_threshold"], model)?,
            output("tm_table.csv", table),
        ];
        if let Some([v1, v2]) = an.gain_modes {
            let rows = an
                .snr_db
                .iter()
                .map(|&snr| {
                    let g = ctl.predict_gain(v1, v2, &r.deployment, n0_from_snr_db(snr))?;
                    Ok(vec![snr.to_string(), v1.to_string(), v2.to_string(), g.to_string()])
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(csv_output("gain.csv", &["snr_db", "v1", "v2", "gain_db"], rows)?);
        }
        Ok(out)
    }
}
