use std::path::PathBuf;

use clap::{Args, ValueEnum};
use coordc::convex::rec::FullMatchingProtocol;
use coordc::convex::{planted_instance, RecProtocol};
use coordc::lowerbound::{success_rate, Baseline};
use coordc::routing::{grid, parallel_edges, RoutingProtocol};
use coordc::stable::{random_stable_instance, StableProtocol};
use coordc::{run_protocol, Error};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::sink;
use crate::run::{rec_params, routing_params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepProtocol {
    /// Regularized-dual matching on planted instances; params k, n-per-k, eta, epsilon.
    Rec,
    /// Full-matching baseline on the same instances; params k, n-per-k.
    Full,
    /// Best-response dynamics on parallel links (grid with --grid); params epsilon, n, m.
    Routing,
    /// Admission scores on random school choice; params n, k, cap.
    Stable,
    /// Prefix-broadcast baseline for multiple-index; params bits, t, k.
    MultipleIndex,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub protocol: SweepProtocol,
    /// Name of the swept parameter.
    #[arg(long)]
    pub param: String,
    /// Comma-separated grid; empty yields a header-only CSV.
    #[arg(long, default_value = "")]
    pub values: String,
    /// Seeds per grid point, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Supply of every good for matching sweeps (players = k * n-per-k).
    #[arg(long, default_value_t = 20)]
    pub n_per_k: u64,
    #[arg(long, default_value_t = 0.05)]
    pub density: f64,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Dual accuracy for matching, target accuracy for routing.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    /// Use a directed grid (width x height = m x m nodes) instead of parallel links.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value_t = 10)]
    pub cap: u64,
    #[arg(long, default_value_t = 8)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub bits: usize,
    /// Trials per multiple-index cell.
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Row {
    parameter: String,
    value: String,
    seed: u64,
    message_bits: Option<usize>,
    objective: Option<f64>,
    status: String,
}

const PARAMS: [(SweepProtocol, &[&str]); 5] = [
    (SweepProtocol::Rec, &["k", "n-per-k", "eta", "epsilon"]),
    (SweepProtocol::Full, &["k", "n-per-k"]),
    (SweepProtocol::Routing, &["epsilon", "n", "m"]),
    (SweepProtocol::Stable, &["n", "k", "cap"]),
    (SweepProtocol::MultipleIndex, &["bits", "t", "k"]),
];

fn integer(v: f64) -> coordc::Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) {
        Ok(v as u64)
    } else {
        Err(Error::Parameter(format!("{v} is not a nonnegative integer")))
    }
}

/// Returns `(message_bits, objective)` for one cell.
fn cell(base: &SweepArgs, value: f64, seed: u64) -> anyhow::Result<(usize, f64)> {
    let mut a = SweepArgsView::from(base);
    match base.param.as_str() {
        "k" => a.k = integer(value)? as usize,
        "n" => a.n = integer(value)? as usize,
        "m" => a.m = integer(value)? as usize,
        "n-per-k" => a.n_per_k = integer(value)?,
        "cap" => a.cap = integer(value)?,
        "t" => a.t = integer(value)? as usize,
        "bits" => a.bits = integer(value)? as usize,
        "eta" => a.eta = Some(value),
        "epsilon" => a.epsilon = Some(value),
        other => unreachable!("parameter {other} was validated"),
    }
    match base.protocol {
        SweepProtocol::Rec | SweepProtocol::Full => {
            let inst = planted_instance(vec![a.n_per_k; a.k], base.density, seed)?;
            let report = if base.protocol == SweepProtocol::Full {
                run_protocol(&FullMatchingProtocol, &inst, seed)?.report
            } else {
                let params = rec_params(inst.n(), inst.k(), a.eta, a.epsilon)?;
                run_protocol(&RecProtocol::new(params), &inst, seed)?.report
            };
            Ok((report.message_bits, report.objective))
        }
        SweepProtocol::Routing => {
            let game = if base.grid {
                grid(a.m, a.m, a.n, None, seed)?
            } else {
                parallel_edges(a.n, a.m, None, seed)?
            };
            let eps = a.epsilon.unwrap_or(0.5);
            let params = routing_params(&game, Some(eps), None, None)?;
            let report = run_protocol(&RoutingProtocol { params }, &game, seed)?.report;
            Ok((report.message_bits, report.objective))
        }
        SweepProtocol::Stable => {
            let inst = random_stable_instance(a.n, vec![a.cap; a.k], seed)?;
            let report = run_protocol(&StableProtocol, &inst, seed)?.report;
            Ok((report.message_bits, report.objective))
        }
        SweepProtocol::MultipleIndex => {
            let r = success_rate(Baseline::Prefix { bits: a.bits }, a.t, a.k, base.trials, seed)?;
            Ok((r.message_bits, r.rate))
        }
    }
}

/// The mutable subset of the arguments a cell may override.
struct SweepArgsView {
    k: usize,
    n: usize,
    m: usize,
    n_per_k: u64,
    cap: u64,
    t: usize,
    bits: usize,
    eta: Option<f64>,
    epsilon: Option<f64>,
}

impl From<&SweepArgs> for SweepArgsView {
    fn from(a: &SweepArgs) -> Self {
        SweepArgsView {
            k: a.k,
            n: a.n,
            m: a.m,
            n_per_k: a.n_per_k,
            cap: a.cap,
            t: a.t,
            bits: a.bits,
            eta: a.eta,
            epsilon: a.epsilon,
        }
    }
}

pub fn run(args: SweepArgs) -> anyhow::Result<()> {
    let allowed = PARAMS.iter().find(|(p, _)| *p == args.protocol).map(|(_, a)| *a).unwrap_or_default();
    if !allowed.contains(&args.param.as_str()) {
        return Err(Error::Parameter(format!(
            "parameter {:?} cannot be swept for this protocol; choose one of {}",
            args.param,
            allowed.join(", ")
        ))
        .into());
    }
    let tokens: Vec<&str> = args.values.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    let values = tokens
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parameter(format!("grid value {t:?} is not a number"))))
        .collect::<Result<Vec<f64>, Error>>()?;
    let cells: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| (0..args.seeds).map(move |s| (i, args.seed.wrapping_add(s))))
        .collect();
    let rows: Vec<Row> = cells
        .par_iter()
        .map(|&(i, seed)| {
            let (message_bits, objective, status) = match cell(&args, values[i], seed) {
                Ok((bits, obj)) => (Some(bits), Some(obj), "ok".to_string()),
                Err(e) => {
                    log::warn!("cell {}={} seed {seed}: {e:#}", args.param, tokens[i]);
                    (None, None, format!("error: {e:#}"))
                }
            };
            Row {
                parameter: args.param.clone(),
                value: tokens[i].to_string(),
                seed,
                message_bits,
                objective,
                status,
            }
        })
        .collect();
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink(args.output.as_deref())?);
    w.write_record(["parameter", "value", "seed", "message_bits", "objective", "status"])?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
