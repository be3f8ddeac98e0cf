use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use coordc::convex::{MatchingInstance, MatchingInstanceFile, RecParams, RecProtocol};
use coordc::convex::rec::FullMatchingProtocol;
use coordc::privacy::{pri_coor_matching, price_grid_candidates, utility_gap, CandidateMessageSpace};
use coordc::routing::{RoutingGame, RoutingParams, RoutingProtocol};
use coordc::stable::{StableInstance, StableProtocol};
use coordc::{run_protocol, Error};
use log::{info, warn};

use crate::output::{emit_message, emit_reports, read_text, write_text, ReportArgs};

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Regularization weight.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Dual accuracy.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Failure probability used for the logged welfare guarantee.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Broadcast an optimal matching verbatim instead.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct RoutingArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Target equilibrium accuracy; picks alpha and r automatically.
    #[arg(long, conflicts_with_all = ["alpha", "r"])]
    pub epsilon: Option<f64>,
    /// Best-response slack.
    #[arg(long, requires = "r")]
    pub alpha: Option<f64>,
    /// Counter refinement.
    #[arg(long, requires = "alpha")]
    pub r: Option<u64>,
    /// Write every player's decoded path as JSON.
    #[arg(long)]
    pub paths_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct StableArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Write the decoded school of every student as JSON.
    #[arg(long)]
    pub matching_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct PrivateArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// JSON array of hex-encoded candidate messages.
    #[arg(long, conflicts_with_all = ["levels", "max_price"])]
    pub candidates: Option<PathBuf>,
    /// Price levels per good for a generated grid of candidates.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Largest price on the generated grid.
    #[arg(long, default_value_t = 1.0)]
    pub max_price: f64,
    /// Privacy parameter of the exponential mechanism.
    #[arg(long, default_value_t = 1.0)]
    pub privacy: f64,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub report: ReportArgs,
}

pub fn load_matching(path: &std::path::Path) -> anyhow::Result<MatchingInstance> {
    let file: MatchingInstanceFile =
        serde_json::from_str(&read_text(path)?).map_err(Error::from).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.into_instance()?)
}

pub fn load_routing(path: &std::path::Path) -> anyhow::Result<RoutingGame> {
    Ok(RoutingGame::from_json(&read_text(path)?).with_context(|| format!("reading {}", path.display()))?)
}

pub fn load_stable(path: &std::path::Path) -> anyhow::Result<StableInstance> {
    Ok(StableInstance::from_json(&read_text(path)?).with_context(|| format!("reading {}", path.display()))?)
}

pub fn rec_params(n: usize, k: usize, eta: Option<f64>, epsilon: Option<f64>) -> anyhow::Result<RecParams> {
    let (default, fallback) = RecParams::desk_default(n, k);
    if fallback && (eta.is_none() || epsilon.is_none()) {
        warn!("n^3 k^3 = {:e} exceeds 1e6; defaulting eta and epsilon to 1e-6", (n as f64).powi(3) * (k as f64).powi(3));
    }
    Ok(RecParams::new(eta.unwrap_or(default.eta), epsilon.unwrap_or(default.epsilon))?)
}

pub fn routing_params(game: &RoutingGame, epsilon: Option<f64>, alpha: Option<f64>, r: Option<u64>) -> anyhow::Result<RoutingParams> {
    let params = match (epsilon, alpha, r) {
        (Some(eps), None, None) => RoutingParams::for_target(eps, game)?,
        (None, Some(alpha), Some(r)) => RoutingParams::new(alpha, r)?,
        _ => return Err(Error::Parameter("give either --epsilon or both --alpha and --r".into()).into()),
    };
    // Fail before any simulation work.
    params.schedule(game)?;
    Ok(params)
}

pub fn match_coordinate(args: MatchArgs) -> anyhow::Result<()> {
    let inst = load_matching(&args.instance)?;
    if !(args.beta > 0.0 && args.beta < 1.0) {
        return Err(Error::Parameter(format!("beta must lie in (0, 1), got {}", args.beta)).into());
    }
    let run = if args.baseline {
        let run = run_protocol(&FullMatchingProtocol, &inst, args.seed)?;
        (run.message, run.report)
    } else {
        let params = rec_params(inst.n(), inst.k(), args.eta, args.epsilon)?;
        let run = run_protocol(&RecProtocol::new(params), &inst, args.seed)?;
        if let Some(opt) = run.report.opt {
            let k = inst.k() as f64;
            let floor = opt - 8.0 * k.sqrt() * (2.0 * k / args.beta).ln() * opt.sqrt();
            info!("welfare {} against guarantee {floor:.2} at beta = {}", run.report.objective, args.beta);
        }
        (run.message, run.report)
    };
    emit_message(&args.report, &run.0)?;
    emit_reports(&args.report, vec![run.1])
}

pub fn routing_coordinate(args: RoutingArgs) -> anyhow::Result<()> {
    let game = load_routing(&args.instance)?;
    let params = routing_params(&game, args.epsilon, args.alpha, args.r)?;
    info!("alpha = {}, r = {}, certified epsilon = {}", params.alpha, params.r, params.equilibrium_epsilon(&game));
    let run = run_protocol(&RoutingProtocol { params }, &game, args.seed)?;
    if let Some(path) = &args.paths_out {
        write_text(Some(path), &serde_json::to_string(&run.actions)?)?;
    }
    emit_message(&args.report, &run.message)?;
    emit_reports(&args.report, vec![run.report])
}

pub fn stable_coordinate(args: StableArgs) -> anyhow::Result<()> {
    let inst = load_stable(&args.instance)?;
    let run = run_protocol(&StableProtocol, &inst, args.seed)?;
    if let Some(path) = &args.matching_out {
        write_text(Some(path), &serde_json::to_string(&run.actions)?)?;
    }
    emit_message(&args.report, &run.message)?;
    emit_reports(&args.report, vec![run.report])
}

pub fn candidates(
    path: Option<&std::path::Path>,
    levels: usize,
    max_price: f64,
    params: &RecParams,
    inst: &MatchingInstance,
) -> anyhow::Result<CandidateMessageSpace> {
    Ok(match path {
        Some(p) => CandidateMessageSpace::from_json(&read_text(p)?, p.display().to_string())?,
        None => price_grid_candidates(&vec![levels; inst.k()], max_price, params.grid_step(inst.n(), inst.k()))?,
    })
}

pub fn private_coordinate(args: PrivateArgs) -> anyhow::Result<()> {
    let inst = load_matching(&args.instance)?;
    let params = rec_params(inst.n(), inst.k(), args.eta, args.epsilon)?;
    let space = candidates(args.candidates.as_deref(), args.levels, args.max_price, &params, &inst)?;
    let run = pri_coor_matching(&inst, &RecProtocol::new(params), &space, args.privacy, args.seed)?;
    let sel = &run.selected;
    info!(
        "selected candidate {} of {} with quality {:.4} (best {:.4}, gap bound {:.4} at beta = {})",
        sel.selection.index,
        space.len(),
        sel.table.values[sel.selection.index],
        sel.table.max(),
        utility_gap(space.len(), args.beta, args.privacy),
        args.beta
    );
    emit_message(&args.report, &sel.message)?;
    emit_reports(&args.report, vec![run.report])
}
