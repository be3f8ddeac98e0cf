//! The two-stage coordination framework: a coordinator encodes the whole
//! instance into one [`Message`]; every agent then decodes its own action from
//! the message, the public parameters, and its private slice of the instance.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::Message;
use crate::rng::{agent_rng, coordinator_rng, ProtocolRng};

/// Score of an action profile, plus the benchmark optimum when one is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub opt: Option<f64>,
}

pub trait Protocol: Sync {
    type Instance: Sync;
    /// Information every agent knows (sizes, cost functions, decode parameters).
    type Public: Sync;
    /// What agent `i` alone knows.
    type Private: Send + Sync;
    type Action: Send;

    fn name(&self) -> &str;

    fn agents(&self, inst: &Self::Instance) -> usize;

    /// Second size column of reports: goods, edges or schools.
    fn width(&self, inst: &Self::Instance) -> usize;

    fn public(&self, inst: &Self::Instance) -> Self::Public;

    fn private_slice(&self, inst: &Self::Instance, agent: usize) -> Self::Private;

    fn encode(&self, inst: &Self::Instance, rng: &mut ProtocolRng) -> Result<Message>;

    fn decode(
        &self,
        agent: usize,
        public: &Self::Public,
        private: &Self::Private,
        msg: &Message,
        rng: &mut ProtocolRng,
    ) -> Result<Self::Action>;

    fn evaluate(&self, inst: &Self::Instance, actions: &[Self::Action]) -> Result<Evaluation>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: String,
    pub n: usize,
    pub k_or_m: usize,
    pub seed: u64,
    pub message_bits: usize,
    pub objective: f64,
    pub opt: Option<f64>,
    pub ratio: Option<f64>,
    pub wall_time_ms: f64,
}

impl ProtocolReport {
    /// Equality on every field except wall time, the only field not fixed by
    /// `(instance, seed)`.
    pub fn same_outcome(&self, other: &ProtocolReport) -> bool {
        ProtocolReport {
            wall_time_ms: 0.0,
            ..self.clone()
        } == ProtocolReport {
            wall_time_ms: 0.0,
            ..other.clone()
        }
    }
}

/// opt / objective, defined when both are present and the objective is positive.
pub fn approximation_ratio(objective: f64, opt: Option<f64>) -> Option<f64> {
    match opt {
        Some(opt) if objective > 0.0 => Some(opt / objective),
        _ => None,
    }
}

#[derive(Debug)]
pub struct ProtocolRun<A> {
    pub message: Message,
    pub actions: Vec<A>,
    pub report: ProtocolReport,
}

/// Decodes every agent's action from a fixed message. Agent `i` sees only its
/// private slice, the public view and its own derived random stream.
pub fn decode_all<P: Protocol>(
    protocol: &P,
    inst: &P::Instance,
    msg: &Message,
    seed: u64,
) -> Result<Vec<P::Action>> {
    let public = protocol.public(inst);
    let n = protocol.agents(inst);
    let results: Vec<Result<P::Action>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let private = protocol.private_slice(inst, i);
            let mut rng = agent_rng(seed, i);
            protocol.decode(i, &public, &private, msg, &mut rng)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(agent, r)| {
            r.map_err(|e| Error::Decode {
                agent,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn run_protocol<P: Protocol>(
    protocol: &P,
    inst: &P::Instance,
    seed: u64,
) -> Result<ProtocolRun<P::Action>> {
    let start = Instant::now();
    let mut rng = coordinator_rng(seed);
    let message = protocol.encode(inst, &mut rng)?;
    let actions = decode_all(protocol, inst, &message, seed)?;
    let eval = protocol.evaluate(inst, &actions)?;
    let report = ProtocolReport {
        protocol: protocol.name().to_string(),
        n: protocol.agents(inst),
        k_or_m: protocol.width(inst),
        seed,
        message_bits: message.len(),
        objective: eval.objective,
        opt: eval.opt,
        ratio: approximation_ratio(eval.objective, eval.opt),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(ProtocolRun {
        message,
        actions,
        report,
    })
}
