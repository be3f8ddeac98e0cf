use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use coordc::convex::{planted_instance, random_instance};
use coordc::lowerbound::{gen_multiple_index, lift_many_to_one, rang};
use coordc::routing::{grid, parallel_edges, parallel_edges_game, CostFunction};
use coordc::stable::random_stable_instance;
use serde_json::json;

use crate::output::write_text;

#[derive(Debug, Args)]
pub struct Out {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Topology {
    /// Parallel links with random linear costs.
    Parallel,
    /// Parallel links that all share one linear cost.
    Identical,
    /// Directed grid with edges pointing right and down.
    Grid,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Random one-to-one hard instance.
    Rang {
        #[arg(long)]
        rho: usize,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        out: Out,
    },
    /// `b` copies of every vertex of a random hard instance, goods with supply `b`.
    Lifted {
        #[arg(long)]
        rho: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        b: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Matching instance with independent edges.
    Matching {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Supply of every good.
        #[arg(long, default_value_t = 1)]
        supply: u64,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Matching instance with a planted perfect allocation (n = k * supply).
    Planted {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        supply: u64,
        #[arg(long, default_value_t = 0.05)]
        density: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Atomic routing game.
    Routing {
        #[arg(long, value_enum, default_value_t = Topology::Parallel)]
        topology: Topology,
        /// Players.
        #[arg(long)]
        n: usize,
        /// Links (parallel and identical topologies).
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        height: usize,
        /// Largest slope for random costs (default 1/n); the slope for identical links.
        #[arg(long)]
        slope: Option<f64>,
        /// Intercept of identical links.
        #[arg(long, default_value_t = 0.0)]
        intercept: f64,
        #[command(flatten)]
        out: Out,
    },
    /// School choice instance with random preferences and scores.
    Stable {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Capacity of every school.
        #[arg(long)]
        cap: u64,
        #[command(flatten)]
        out: Out,
    },
    /// Disjoint marked sets plus a query index.
    MultipleIndex {
        #[arg(long)]
        t: usize,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        out: Out,
    },
}

fn to_json(value: &impl serde::Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn run(cmd: GenCommand) -> anyhow::Result<()> {
    let (text, out) = match cmd {
        GenCommand::Rang { rho, n, out } => (to_json(&rang(rho, n, out.seed)?.to_file()?)?, out),
        GenCommand::Lifted { rho, n, b, out } => {
            let g = rang(rho, n, out.seed)?;
            let meta = json!({ "name": "lifted-rang", "params": { "b": b, "base": g.meta } });
            (to_json(&lift_many_to_one(&g, b)?.to_file(Some(meta)))?, out)
        }
        GenCommand::Matching {
            n,
            k,
            supply,
            density,
            out,
        } => {
            let inst = random_instance(n, vec![supply; k], density, out.seed)?;
            let meta = json!({ "name": "random", "params": { "density": density, "seed": out.seed } });
            (to_json(&inst.to_file(Some(meta)))?, out)
        }
        GenCommand::Planted { k, supply, density, out } => {
            let inst = planted_instance(vec![supply; k], density, out.seed)?;
            let meta = json!({ "name": "planted", "params": { "density": density, "seed": out.seed } });
            (to_json(&inst.to_file(Some(meta)))?, out)
        }
        GenCommand::Routing {
            topology,
            n,
            m,
            width,
            height,
            slope,
            intercept,
            out,
        } => {
            let game = match topology {
                Topology::Parallel => parallel_edges(n, m, slope, out.seed)?,
                Topology::Identical => {
                    let cost = CostFunction::linear(slope.unwrap_or(1.0 / n.max(1) as f64), intercept);
                    parallel_edges_game(n, &vec![cost; m])?
                }
                Topology::Grid => grid(width, height, n, slope, out.seed)?,
            };
            (game.to_json()?, out)
        }
        GenCommand::Stable { n, k, cap, out } => (random_stable_instance(n, vec![cap; k], out.seed)?.to_json()?, out),
        GenCommand::MultipleIndex { t, k, out } => (to_json(&gen_multiple_index(t, k, out.seed)?)?, out),
    };
    write_text(out.output.as_deref(), &text)
}
