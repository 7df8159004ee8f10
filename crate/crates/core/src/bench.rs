//! Benchmark suites: seeded targets, every algorithm, one row per
//! (topology, algorithm, runs).

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, OracleTable, Target};
use crate::checkpoint::Checkpoint;
use crate::circuit::Circuit;
use crate::config::{Algorithm, BenchCase, BenchSection, Task};
use crate::decode::{DecodeConfig, Strategy};
use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::oracles::CostKey;
use crate::routing::{bidirectional_route, finalize_route, qv_circuit, route_budgeted, sabre_lite, RoutedResult, SabreConfig};
use crate::synth::build_gate_set;
use crate::topology::{topology, CouplingMap, Layout};
use crate::train::derive_rng;

pub const CSV_HEADER: &str = "topology,algorithm,runs,n,time_ms_mean,count2q_mean,layers2q_mean";

/// Outcome on one target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub success: bool,
    pub time_ms: f64,
    pub count2q: usize,
    pub layers2q: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub topology: String,
    pub task: Task,
    pub algorithm: String,
    pub runs: usize,
    /// Number of targets.
    pub n: usize,
    /// `None` when the algorithm does not apply at this size.
    pub time_ms_mean: Option<f64>,
    /// Means over the successful instances.
    pub count2q_mean: Option<f64>,
    pub layers2q_mean: Option<f64>,
    pub successes: usize,
    pub instances: Vec<Instance>,
}

impl BenchRow {
    fn new(case: &BenchCase, algorithm: Algorithm, runs: usize, instances: Option<Vec<Instance>>, n: usize) -> Self {
        let mut row = BenchRow {
            topology: case.topology.clone(),
            task: case.task,
            algorithm: algorithm.name().to_string(),
            runs,
            n,
            time_ms_mean: None,
            count2q_mean: None,
            layers2q_mean: None,
            successes: 0,
            instances: Vec::new(),
        };
        if let Some(inst) = instances {
            let ok: Vec<&Instance> = inst.iter().filter(|i| i.success).collect();
            let mean = |f: &dyn Fn(&Instance) -> f64, xs: &[&Instance]| {
                (!xs.is_empty()).then(|| xs.iter().map(|i| f(i)).sum::<f64>() / xs.len() as f64)
            };
            let all: Vec<&Instance> = inst.iter().collect();
            row.time_ms_mean = mean(&|i| i.time_ms, &all);
            row.count2q_mean = mean(&|i| i.count2q as f64, &ok);
            row.layers2q_mean = mean(&|i| i.layers2q as f64, &ok);
            row.successes = ok.len();
            row.instances = inst;
        }
        row
    }

    pub fn csv(&self) -> String {
        let f = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        format!(
            "{},{},{},{},{},{},{}",
            self.topology,
            self.algorithm,
            self.runs,
            self.n,
            f(self.time_ms_mean),
            f(self.count2q_mean),
            f(self.layers2q_mean)
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        out
    }

    /// CSV with the time column blanked, for reproducibility comparisons.
    pub fn csv_without_time(&self) -> String {
        self.csv()
            .lines()
            .map(|l| {
                let mut cols: Vec<&str> = l.split(',').collect();
                cols[4] = "-";
                cols.join(",")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Seeded targets of a synthesis case.
pub fn synthesis_targets(kind: OperatorKind, n_qubits: usize, count: usize, seed: u64, case: usize) -> Vec<Target> {
    let mut rng = derive_rng(seed, case as u64);
    (0..count).map(|_| Target::random(kind, n_qubits, &mut rng)).collect()
}

/// Seeded circuits of a routing case.
pub fn routing_targets(n_qubits: usize, layers: usize, count: usize, seed: u64, case: usize) -> Vec<Circuit> {
    let mut rng = derive_rng(seed, case as u64);
    (0..count).map(|_| qv_circuit(n_qubits, layers, &mut rng)).collect()
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64() * 1e3))
}

fn load_checkpoint(case: &BenchCase, base: &Path, index: usize) -> Result<Checkpoint> {
    let rel = case.checkpoint.as_deref().ok_or_else(|| {
        Error::config(format!("bench.cases[{index}].checkpoint"), "required for the rl algorithm")
    })?;
    let path = base.join(rel);
    if !path.exists() {
        return Err(Error::Checkpoint(format!("missing checkpoint {}", path.display())));
    }
    let ckpt = Checkpoint::load(&path)?;
    let meta = &ckpt.meta.config.env;
    if meta.topology != case.topology || meta.task != case.task {
        return Err(Error::Checkpoint(format!(
            "{} was trained for {} on {}, case needs {} on {}",
            path.display(),
            meta.task.name(),
            meta.topology,
            case.task.name(),
            case.topology
        )));
    }
    Ok(ckpt)
}

fn oracle_cost(kind: OperatorKind) -> CostKey {
    match kind {
        OperatorKind::Clifford => CostKey::TwoQubit,
        OperatorKind::Permutation | OperatorKind::Linear => CostKey::Gates,
    }
}

fn synthesis_case(
    case: &BenchCase,
    index: usize,
    kind: OperatorKind,
    coupling: &CouplingMap,
    section: &BenchSection,
    base: &Path,
) -> Result<Vec<BenchRow>> {
    let count = case.targets.unwrap_or(section.targets);
    let targets = synthesis_targets(kind, coupling.n_qubits(), count, section.seed, index);
    let gate_set = build_gate_set(kind, coupling);
    let mut rows = Vec::new();
    for &alg in &case.algorithms {
        match alg {
            Algorithm::Oracle => {
                let Some(table) = OracleTable::build(&gate_set, oracle_cost(kind))? else {
                    rows.push(BenchRow::new(case, alg, 1, None, count));
                    continue;
                };
                let inst = targets
                    .par_iter()
                    .map(|t| {
                        let (c, ms) = timed(|| table.solve(t))?;
                        if !t.verify(&c)? {
                            return Err(Error::Verification("oracle circuit does not replay to the target".into()));
                        }
                        Ok(Instance { success: true, time_ms: ms, count2q: c.count2q(), layers2q: c.depth2q() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push(BenchRow::new(case, alg, 1, Some(inst), count));
            }
            Algorithm::Rl => {
                let agent = Agent::from_checkpoint(&load_checkpoint(case, base, index)?)?;
                for &runs in &case.runs {
                    let cfg = DecodeConfig {
                        strategy: if runs == 1 { Strategy::Greedy } else { Strategy::Sample },
                        runs,
                        seed: section.seed,
                        ..DecodeConfig::default()
                    };
                    let inst = targets
                        .par_iter()
                        .map(|t| {
                            let (r, ms) = timed(|| agent.synthesize(t, &cfg))?;
                            Ok(match r.circuit {
                                Some(c) => {
                                    Instance { success: true, time_ms: ms, count2q: c.count2q(), layers2q: c.depth2q() }
                                }
                                None => Instance { success: false, time_ms: ms, count2q: 0, layers2q: 0 },
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    rows.push(BenchRow::new(case, alg, runs, Some(inst), count));
                }
            }
            Algorithm::SabreLite => unreachable!("rejected by validation"),
        }
    }
    Ok(rows)
}

fn routing_case(
    case: &BenchCase,
    index: usize,
    coupling: Arc<CouplingMap>,
    section: &BenchSection,
    base: &Path,
) -> Result<Vec<BenchRow>> {
    let count = case.targets.unwrap_or(section.targets);
    let n = coupling.n_qubits();
    let circuits = routing_targets(n, case.layers, count, section.seed, index);
    let check = |c: &Circuit, r: &RoutedResult| -> Result<Instance> {
        finalize_route(r, c, &coupling).into_result()?;
        Ok(Instance { success: true, time_ms: 0.0, count2q: r.metrics.count2q, layers2q: r.metrics.depth2q })
    };
    let mut rows = Vec::new();
    for &alg in &case.algorithms {
        match alg {
            Algorithm::Oracle => rows.push(BenchRow::new(case, alg, 1, None, count)),
            Algorithm::SabreLite => {
                let sabre = SabreConfig::default();
                for &iterations in &case.runs {
                    let inst = circuits
                        .par_iter()
                        .map(|c| {
                            let (r, ms) = timed(|| {
                                bidirectional_route(c, Layout::trivial(n), iterations, |c, l| {
                                    sabre_lite(c, &coupling, l, &sabre)
                                })
                            })?;
                            Ok(Instance { time_ms: ms, ..check(c, &r)? })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    rows.push(BenchRow::new(case, alg, iterations, Some(inst), count));
                }
            }
            Algorithm::Rl => {
                let ckpt = load_checkpoint(case, base, index)?;
                let section_cfg = ckpt.meta.config.routing.clone();
                let Agent::Routing(policy) = Agent::from_checkpoint(&ckpt)? else {
                    return Err(Error::Checkpoint("routing case needs a routing checkpoint".into()));
                };
                let budget = section_cfg.budget_seconds.map(std::time::Duration::from_secs_f64);
                for &runs in &case.runs {
                    let inst = circuits
                        .par_iter()
                        .map(|c| {
                            let ((r, _), ms) = timed(|| {
                                route_budgeted(&policy, c, Layout::trivial(n), section_cfg.iterations, budget, runs, section.seed)
                            })?;
                            Ok(Instance { time_ms: ms, ..check(c, &r)? })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    rows.push(BenchRow::new(case, alg, runs, Some(inst), count));
                }
            }
        }
    }
    Ok(rows)
}

/// Run every case of a suite. Checkpoint paths resolve against `base`.
pub fn run_benchmark(section: &BenchSection, base: &Path) -> Result<BenchReport> {
    section.validate()?;
    let mut report = BenchReport::default();
    for (i, case) in section.cases.iter().enumerate() {
        let coupling = topology(&case.topology)?;
        let rows = match case.task.operator_kind() {
            Some(kind) => synthesis_case(case, i, kind, &coupling, section, base)?,
            None => routing_case(case, i, Arc::new(coupling), section, base)?,
        };
        report.rows.extend(rows);
    }
    Ok(report)
}
