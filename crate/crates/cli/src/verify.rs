use std::path::PathBuf;

use clap::Subcommand;
use coordc::convex::{lp_opt, MatchingInstanceFile, RecProtocol};
use coordc::lowerbound::{good_graph_bound, lift_many_to_one, sample_reduce, OneToOneInstance};
use coordc::privacy::verify_dp;
use coordc::routing::{br_sim, extract_path, verify_equilibrium, FlowState};
use coordc::stable::{induced_matching, stab, verify_stability};
use coordc::Error;
use serde_json::json;

use crate::output::{read_text, write_text};
use crate::run::{candidates, load_matching, load_routing, load_stable, rec_params, routing_params};
use crate::VerificationFailed;

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Structure of a RanG instance and its maximum matching against ceil(7n/8).
    Rang {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Stability of a matching (the protocol's own when none is given).
    Stable {
        #[arg(long)]
        instance: PathBuf,
        /// JSON array with a school index or null per student.
        #[arg(long)]
        matching: Option<PathBuf>,
    },
    /// Equilibrium of given paths at --epsilon, or of a fresh simulation
    /// together with a bit-exact replay of every decoded path.
    Routing {
        #[arg(long)]
        instance: PathBuf,
        /// JSON array of edge-index paths, one per player.
        #[arg(long, requires = "epsilon")]
        paths: Option<PathBuf>,
        #[arg(long, conflicts_with_all = ["alpha", "r"])]
        epsilon: Option<f64>,
        #[arg(long, requires = "r")]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha")]
        r: Option<u64>,
    },
    /// Exact selection distributions over every neighboring pair of the given instances.
    Dp {
        /// Matching instances; pairs differing in at most one player are neighbors.
        #[arg(long, num_args = 2.., required = true)]
        instances: Vec<PathBuf>,
        #[arg(long, conflicts_with_all = ["levels", "max_price"])]
        candidates: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 1.0)]
        max_price: f64,
        #[arg(long, default_value_t = 1.0)]
        privacy: f64,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Mean size of the sampled matching from an optimal lifted matching
    /// against OPT/(3 rho) minus three standard errors.
    Reduction {
        /// RanG instance file.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 8)]
        b: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn verdict(ok: bool, summary: serde_json::Value, what: &str) -> anyhow::Result<()> {
    write_text(None, &serde_json::to_string_pretty(&summary)?)?;
    if ok {
        Ok(())
    } else {
        Err(VerificationFailed(what.to_string()).into())
    }
}

fn load_rang(path: &std::path::Path) -> anyhow::Result<OneToOneInstance> {
    let file: MatchingInstanceFile = serde_json::from_str(&read_text(path)?).map_err(Error::from)?;
    Ok(OneToOneInstance::from_file(file)?)
}

pub fn run(cmd: VerifyCommand) -> anyhow::Result<()> {
    match cmd {
        VerifyCommand::Rang { instance } => {
            let g = load_rang(&instance)?;
            let (size, bound) = (g.max_matching(), good_graph_bound(g.n()));
            verdict(
                size >= bound,
                json!({ "structure": "ok", "n": g.n(), "max_matching": size, "bound": bound }),
                &format!("maximum matching {size} below {bound}"),
            )
        }
        VerifyCommand::Stable { instance, matching } => {
            let inst = load_stable(&instance)?;
            let m: Vec<Option<usize>> = match matching {
                Some(p) => serde_json::from_str(&read_text(&p)?).map_err(Error::from)?,
                None => induced_matching(&inst, &stab(&inst)),
            };
            let report = verify_stability(&m, &inst)?;
            verdict(report.stable, serde_json::to_value(&report)?, "matching is not stable")
        }
        VerifyCommand::Routing {
            instance,
            paths,
            epsilon,
            alpha,
            r,
        } => {
            let game = load_routing(&instance)?;
            if let Some(p) = paths {
                let paths: Vec<Vec<usize>> = serde_json::from_str(&read_text(&p)?).map_err(Error::from)?;
                let flow = FlowState::new(&game, paths)?;
                let eps = epsilon.expect("clap enforces --epsilon with --paths");
                let check = verify_equilibrium(&flow, &game, eps);
                return verdict(
                    check.ok,
                    json!({ "epsilon": eps, "max_regret": check.max_regret }),
                    &format!("max regret {} exceeds {eps}", check.max_regret),
                );
            }
            let params = routing_params(&game, epsilon, alpha, r)?;
            let out = br_sim(&game, params)?;
            let eps = params.equilibrium_epsilon(&game);
            let check = verify_equilibrium(&out.flow, &game, eps);
            let mismatched: Vec<usize> = (0..game.player_count())
                .filter(|&i| extract_path(i, &out.message, &game, params).ok().as_deref() != Some(out.flow.path(i)))
                .collect();
            verdict(
                check.ok && mismatched.is_empty(),
                json!({
                    "epsilon": eps,
                    "max_regret": check.max_regret,
                    "message_bits": out.message.len(),
                    "deviations": out.trace.deviations.len(),
                    "replay_mismatches": mismatched,
                }),
                "equilibrium or replay check failed",
            )
        }
        VerifyCommand::Dp {
            instances,
            candidates: cand,
            levels,
            max_price,
            privacy,
            eta,
            epsilon,
        } => {
            let insts = instances.iter().map(|p| load_matching(p)).collect::<anyhow::Result<Vec<_>>>()?;
            let params = rec_params(insts[0].n(), insts[0].k(), eta, epsilon)?;
            let space = candidates(cand.as_deref(), levels, max_price, &params, &insts[0])?;
            let neighbors: Vec<(usize, usize)> = (0..insts.len())
                .flat_map(|a| (a + 1..insts.len()).map(move |b| (a, b)))
                .filter(|&(a, b)| insts[a].differing_players(&insts[b]).is_some_and(|d| d <= 1))
                .collect();
            let report = verify_dp(&insts, &neighbors, &RecProtocol::new(params), &space, privacy)?;
            let mut summary = serde_json::to_value(&report)?;
            summary["neighbor_pairs"] = json!(neighbors.len());
            verdict(report.holds, summary, "log-ratio exceeds the privacy parameter")
        }
        VerifyCommand::Reduction {
            instance,
            b,
            samples,
            seed,
        } => {
            let g = load_rang(&instance)?;
            if samples < 2 {
                return Err(Error::Parameter("need at least two samples".into()).into());
            }
            let lifted = lift_many_to_one(&g, b)?;
            let opt_lifted = lp_opt(&lifted);
            let opt = g.max_matching() as f64;
            let sizes = (0..samples)
                .map(|s| {
                    let m = sample_reduce(&opt_lifted.assignment, g.n(), b, seed.wrapping_add(s))?;
                    Ok(m.iter().flatten().count() as f64)
                })
                .collect::<coordc::Result<Vec<f64>>>()?;
            let count = sizes.len() as f64;
            let mean = sizes.iter().sum::<f64>() / count;
            let var = sizes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let se = (var / count).sqrt();
            let threshold = opt / (3.0 * g.meta.rho as f64) - 3.0 * se;
            verdict(
                mean >= threshold,
                json!({
                    "lifted_opt": opt_lifted.value,
                    "opt": opt,
                    "mean": mean,
                    "std_error": se,
                    "threshold": threshold,
                }),
                &format!("mean {mean} below {threshold}"),
            )
        }
    }
}
