//! Regularized coordination: the coordinator solves the regularized dual,
//! rounds the prices to a grid, and broadcasts them; each player recovers its
//! own share of the regularized optimum from the prices alone.
//!
//! Wire format of the price message: an 8-bit width `w`, then `k` fields of
//! `w` bits (least significant bit first). Field `m_j` means
//! `lambda_j = m_j * alpha / sqrt(k)`. Total length is `8 + k*w` bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{bit_width, Message};
use crate::protocol::{Evaluation, Protocol};
use crate::rng::ProtocolRng;

use super::best_response::agent_best_response;
use super::dual::{solve_regularized_dual, DualSolution, DualSolverOptions};
use super::instance::MatchingInstance;
use super::program::{DualVector, FractionalAssignment, MatchingProgram};
use super::welfare::{capped_welfare, lp_opt, sample_row};

pub const WIDTH_HEADER_BITS: u32 = 8;

/// Regularization `eta` and target accuracy `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecParams {
    pub eta: f64,
    pub epsilon: f64,
}

impl RecParams {
    pub fn new(eta: f64, epsilon: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::param(format!("eta must be > 0, got {eta}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::param(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(RecParams { eta, epsilon })
    }

    /// `eta = epsilon = 1/(100 n^3 k^3)`, the setting under which the welfare
    /// guarantee is proved.
    pub fn theorem(n: usize, k: usize) -> Self {
        let v = 1.0 / (100.0 * (n as f64).powi(3) * (k as f64).powi(3));
        RecParams { eta: v, epsilon: v }
    }

    /// The theorem setting when `n^3 k^3 <= 1e6`; beyond that its constant
    /// underflows any useful precision and `1e-6` is used instead. The second
    /// value is `true` when the fallback was taken.
    pub fn desk_default(n: usize, k: usize) -> (Self, bool) {
        let scale = (n as f64).powi(3) * (k as f64).powi(3);
        if scale <= 1e6 {
            (Self::theorem(n, k), false)
        } else {
            (RecParams { eta: 1e-6, epsilon: 1e-6 }, true)
        }
    }

    /// `alpha = eta * epsilon^2 / (4 sqrt(n k))`.
    pub fn alpha(&self, n: usize, k: usize) -> f64 {
        self.eta * self.epsilon * self.epsilon / (4.0 * ((n * k) as f64).sqrt())
    }

    /// Price grid spacing `alpha / sqrt(k)`.
    pub fn grid_step(&self, n: usize, k: usize) -> f64 {
        self.alpha(n, k) / (k as f64).sqrt()
    }
}

/// Rounds each coordinate to the nearest multiple of `alpha/sqrt(k)` (ties
/// upward) and encodes the multiples.
pub fn round_dual(lambda: &DualVector, alpha: f64, k: usize) -> Result<(DualVector, Message)> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param(format!("alpha must be > 0, got {alpha}")));
    }
    if lambda.len() != k {
        return Err(Error::input(format!("price vector has {} coordinates, expected {k}", lambda.len())));
    }
    let step = alpha / (k as f64).sqrt();
    let multiples = lambda
        .as_slice()
        .iter()
        .map(|&l| {
            let m = (l / step + 0.5).floor();
            if m >= 2f64.powi(128) {
                Err(Error::param(format!(
                    "price {l} needs more than 128 bits at grid step {step:e}"
                )))
            } else {
                Ok(m as u128)
            }
        })
        .collect::<Result<Vec<u128>>>()?;
    let msg = encode_multiples(&multiples)?;
    Ok((multiples_to_dual(&multiples, step), msg))
}

fn multiples_to_dual(multiples: &[u128], step: f64) -> DualVector {
    DualVector::new(multiples.iter().map(|&m| m as f64 * step).collect())
        .expect("nonnegative multiples of a positive step")
}

pub fn encode_multiples(multiples: &[u128]) -> Result<Message> {
    let width = bit_width(multiples.iter().copied().max().unwrap_or(0));
    let mut msg = Message::new();
    msg.push_uint(u128::from(width), WIDTH_HEADER_BITS)?;
    for &m in multiples {
        msg.push_uint(m, width)?;
    }
    Ok(msg)
}

pub fn decode_multiples(msg: &Message, k: usize) -> Result<Vec<u128>> {
    let mut r = msg.reader();
    let width = r.read_uint(WIDTH_HEADER_BITS)? as u32;
    if width > 128 {
        return Err(Error::message(format!("price field width {width} exceeds 128")));
    }
    let multiples = (0..k).map(|_| r.read_uint(width)).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    Ok(multiples)
}

/// Prices carried by a message, given the public grid step.
pub fn decode_dual(msg: &Message, k: usize, step: f64) -> Result<DualVector> {
    Ok(multiples_to_dual(&decode_multiples(msg, k)?, step))
}

#[derive(Debug, Clone)]
pub struct RecOutcome {
    pub message: Message,
    pub assignment: FractionalAssignment,
    pub alpha: f64,
    /// Solver output standing in for the exact optimal dual.
    pub solved: DualSolution,
    pub rounded: DualVector,
}

/// Runs the full regularized coordination protocol and every player's decode.
pub fn rec_protocol(inst: &MatchingInstance, params: RecParams, solver: &DualSolverOptions) -> Result<RecOutcome> {
    let (n, k) = (inst.n(), inst.k());
    let alpha = params.alpha(n, k);
    let solved = solve_regularized_dual(&MatchingProgram::new(inst), params.eta, solver)?;
    let (rounded, message) = round_dual(&solved.lambda, alpha, k)?;
    let prices = decode_dual(&message, k, params.grid_step(n, k))?;
    let rows = (0..n)
        .map(|i| agent_best_response(inst.row(i), &prices, params.eta))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecOutcome {
        message,
        assignment: FractionalAssignment::new(rows)?,
        alpha,
        solved,
        rounded,
    })
}

/// Decodes every player's fractional row at the given prices.
pub fn decode_assignment(inst: &MatchingInstance, prices: &DualVector, eta: f64) -> Result<FractionalAssignment> {
    let rows = (0..inst.n())
        .map(|i| agent_best_response(inst.row(i), prices, eta))
        .collect::<Result<Vec<_>>>()?;
    FractionalAssignment::new(rows)
}

/// Upper bound `8 + k * ceil(log2(n sqrt(k)/alpha + 1))` on the message
/// length, from the a-priori price bound `lambda_j <= n`.
pub fn message_bits_bound(n: usize, k: usize, alpha: f64) -> usize {
    let max_multiple = n as f64 * (k as f64).sqrt() / alpha;
    WIDTH_HEADER_BITS as usize + k * (max_multiple + 1.0).log2().ceil() as usize
}

/// Public knowledge shared by every player of the matching protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecPublic {
    pub k: usize,
    pub eta: f64,
    pub step: f64,
}

/// The regularized coordination protocol with independent rounding as the
/// players' final step; actions are integral good choices.
#[derive(Debug, Clone)]
pub struct RecProtocol {
    pub params: RecParams,
    pub solver: DualSolverOptions,
}

impl RecProtocol {
    pub fn new(params: RecParams) -> Self {
        RecProtocol {
            params,
            solver: DualSolverOptions::default(),
        }
    }

    /// Fractional row player `i` decodes from `msg`.
    pub fn decode_row(&self, public: &RecPublic, row: &[bool], msg: &Message) -> Result<Vec<f64>> {
        let prices = decode_dual(msg, public.k, public.step)?;
        agent_best_response(row, &prices, public.eta)
    }
}

impl Protocol for RecProtocol {
    type Instance = MatchingInstance;
    type Public = RecPublic;
    type Private = Vec<bool>;
    type Action = Option<usize>;

    fn name(&self) -> &str {
        "rec"
    }

    fn agents(&self, inst: &MatchingInstance) -> usize {
        inst.n()
    }

    fn width(&self, inst: &MatchingInstance) -> usize {
        inst.k()
    }

    fn public(&self, inst: &MatchingInstance) -> RecPublic {
        RecPublic {
            k: inst.k(),
            eta: self.params.eta,
            step: self.params.grid_step(inst.n(), inst.k()),
        }
    }

    fn private_slice(&self, inst: &MatchingInstance, agent: usize) -> Vec<bool> {
        inst.row(agent).to_vec()
    }

    fn encode(&self, inst: &MatchingInstance, _rng: &mut ProtocolRng) -> Result<Message> {
        let solved = solve_regularized_dual(&MatchingProgram::new(inst), self.params.eta, &self.solver)?;
        let alpha = self.params.alpha(inst.n(), inst.k());
        Ok(round_dual(&solved.lambda, alpha, inst.k())?.1)
    }

    fn decode(
        &self,
        _agent: usize,
        public: &RecPublic,
        private: &Vec<bool>,
        msg: &Message,
        rng: &mut ProtocolRng,
    ) -> Result<Option<usize>> {
        let row = self.decode_row(public, private, msg)?;
        sample_row(&row, rng)
    }

    fn evaluate(&self, inst: &MatchingInstance, actions: &[Option<usize>]) -> Result<Evaluation> {
        Ok(Evaluation {
            objective: capped_welfare(actions, inst)?.welfare as f64,
            opt: Some(lp_opt(inst).value as f64),
        })
    }
}

/// Baseline that broadcasts an optimal matching verbatim: `n` fields of
/// `ceil(log2(k+1))` bits, 0 = unmatched, `j` = good `j` (1-based).
#[derive(Debug, Clone, Copy, Default)]
pub struct FullMatchingProtocol;

impl FullMatchingProtocol {
    pub fn field_width(k: usize) -> u32 {
        bit_width(k as u128)
    }

    pub fn encode_assignment(assignment: &[Option<usize>], k: usize) -> Result<Message> {
        let width = Self::field_width(k);
        let mut msg = Message::new();
        for a in assignment {
            msg.push_uint(a.map_or(0, |j| j as u128 + 1), width)?;
        }
        Ok(msg)
    }

    pub fn decode_entry(msg: &Message, agent: usize, k: usize) -> Result<Option<usize>> {
        let width = Self::field_width(k);
        let mut r = msg.reader();
        for _ in 0..agent {
            r.read_uint(width)?;
        }
        match r.read_uint(width)? as usize {
            0 => Ok(None),
            j if j <= k => Ok(Some(j - 1)),
            j => Err(Error::message(format!("good index {j} exceeds k = {k}"))),
        }
    }
}

impl Protocol for FullMatchingProtocol {
    type Instance = MatchingInstance;
    type Public = usize;
    type Private = ();
    type Action = Option<usize>;

    fn name(&self) -> &str {
        "full-matching"
    }
    fn agents(&self, inst: &MatchingInstance) -> usize {
        inst.n()
    }
    fn width(&self, inst: &MatchingInstance) -> usize {
        inst.k()
    }
    fn public(&self, inst: &MatchingInstance) -> usize {
        inst.k()
    }
    fn private_slice(&self, _: &MatchingInstance, _: usize) {}
    fn encode(&self, inst: &MatchingInstance, _: &mut ProtocolRng) -> Result<Message> {
        Self::encode_assignment(&lp_opt(inst).assignment, inst.k())
    }
    fn decode(&self, agent: usize, k: &usize, _: &(), msg: &Message, _: &mut ProtocolRng) -> Result<Option<usize>> {
        Self::decode_entry(msg, agent, *k)
    }
    fn evaluate(&self, inst: &MatchingInstance, actions: &[Option<usize>]) -> Result<Evaluation> {
        Ok(Evaluation {
            objective: capped_welfare(actions, inst)?.welfare as f64,
            opt: Some(lp_opt(inst).value as f64),
        })
    }
}
