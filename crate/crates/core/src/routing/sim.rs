//! Best-response dynamics run against approximate edge counts, compressed
//! into one counter transcript per edge, and the per-player replay.
//!
//! Stream schedule: player `i` (1-based) forms its initial path at position
//! `i`; in round `t` it acts at position `n*t + i`. Every edge counter gets one
//! symbol per position. A player deciding in round `t` sees the counts at
//! position `n*t + i - 1`.
//!
//! Message: `ceil(log2(T+1))` bits of halt round, then the `m` transcripts in
//! edge order, each over horizon `n*(T+1)`.

use serde::Serialize;

use crate::counters::{ApproxCounter, CounterTranscript, Direction};
use crate::error::{Error, Result};
use crate::message::{bit_width, Message};
use crate::protocol::{Evaluation, Protocol};
use crate::rng::ProtocolRng;

use super::equilibrium::verify_equilibrium;
use super::game::{potential, FlowState, RoutingGame};
use super::paths::{best_response_path, fewest_edge_path, path_cost_at_counts};

/// Largest number of rounds the simulator accepts; keeps stream positions
/// well inside `usize` and transcript step fields at most 64 bits.
pub const MAX_ROUNDS: u64 = 1 << 40;

const DROP_SLACK: f64 = 1e-9;

/// Best-response slack `alpha` and counter refinement `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoutingParams {
    pub alpha: f64,
    pub r: u64,
}

/// Quantities fixed by `(game, alpha, r)` and shared by both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    /// Guaranteed potential drop per deviation, `alpha - 2 lambda m r - lambda m`.
    pub drop: f64,
    /// Round budget `ceil(m n / drop)`.
    pub rounds: usize,
    /// Counter horizon `n (T + 1)`.
    pub horizon: usize,
}

impl RoutingParams {
    pub fn new(alpha: f64, r: u64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::param(format!("alpha must be > 0, got {alpha}")));
        }
        if r == 0 {
            return Err(Error::param("refinement r must be a positive integer"));
        }
        Ok(RoutingParams { alpha, r })
    }

    /// Preset for a target equilibrium accuracy `epsilon > 2 lambda m`:
    /// `r = max(1, floor((epsilon - 2 lambda m) / (6 lambda m)))` and
    /// `alpha = epsilon - lambda m r - lambda m`.
    pub fn for_target(epsilon: f64, game: &RoutingGame) -> Result<Self> {
        let lm = game.lipschitz() * game.edge_count() as f64;
        if !(epsilon > 2.0 * lm) {
            return Err(Error::Precondition(format!(
                "target epsilon {epsilon} must exceed 2 lambda m = {}",
                2.0 * lm
            )));
        }
        let r = if lm == 0.0 {
            1
        } else {
            (((epsilon - 2.0 * lm) / (6.0 * lm)).floor() as u64).max(1)
        };
        Self::new(epsilon - lm * r as f64 - lm, r)
    }

    /// The accuracy `alpha + lambda m r + lambda m` the dynamics certify.
    pub fn equilibrium_epsilon(&self, game: &RoutingGame) -> f64 {
        let lm = game.lipschitz() * game.edge_count() as f64;
        self.alpha + lm * self.r as f64 + lm
    }

    pub fn schedule(&self, game: &RoutingGame) -> Result<Schedule> {
        let lm = game.lipschitz() * game.edge_count() as f64;
        let needed = 2.0 * lm * (self.r as f64 + 1.0);
        if !(self.alpha > needed) {
            return Err(Error::Precondition(format!(
                "alpha = {} must exceed 2 lambda m (r + 1) = {needed}",
                self.alpha
            )));
        }
        let drop = self.alpha - 2.0 * lm * self.r as f64 - lm;
        let n = game.player_count();
        let rounds = (game.edge_count() as f64 * n as f64 / drop).ceil();
        if rounds > MAX_ROUNDS as f64 || (rounds + 1.0) * n as f64 > MAX_ROUNDS as f64 {
            return Err(Error::param(format!("round budget {rounds} is too large to schedule")));
        }
        let rounds = rounds as usize;
        Ok(Schedule {
            drop,
            rounds,
            horizon: n * (rounds + 1),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub round: usize,
    pub player: usize,
    pub potential_before: f64,
    pub potential_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    /// Number of rounds actually simulated.
    pub halt: usize,
    /// Whether every player was an `alpha`-best-responder to the counts when
    /// the dynamics stopped.
    pub converged: bool,
    pub initial_potential: f64,
    pub final_potential: f64,
    pub deviations: Vec<Deviation>,
}

#[derive(Debug, Clone)]
pub struct BrSimOutput {
    pub message: Message,
    pub transcripts: Vec<CounterTranscript>,
    /// Final simulated flow; not part of the message.
    pub flow: FlowState,
    pub trace: SimTrace,
}

fn is_alpha_best_response(game: &RoutingGame, player: usize, path: &[usize], counts: &[f64], alpha: f64) -> Result<bool> {
    let current = path_cost_at_counts(path, counts, game);
    let (best, _) = best_response_path(player, counts, game)?;
    Ok(current - alpha <= best)
}

struct Counters {
    counters: Vec<ApproxCounter>,
    r: i64,
}

impl Counters {
    fn counts(&self) -> Vec<f64> {
        self.counters.iter().map(|c| c.count() as f64).collect()
    }

    /// Feeds one position: `symbols[e]` to every counter, then checks that
    /// each count stays within `r` of the true load.
    fn push(&mut self, symbols: &[i8], loads: &[u64]) -> Result<()> {
        for ((c, &s), &load) in self.counters.iter_mut().zip(symbols).zip(loads) {
            c.push(s)?;
            if (c.count() - load as i64).abs() > self.r {
                return Err(Error::Invariant(format!(
                    "counter drifted to {} with true load {load} at step {}",
                    c.count(),
                    c.steps()
                )));
            }
        }
        Ok(())
    }
}

/// Coordinator side: simulates the dynamics and compresses them.
pub fn br_sim(game: &RoutingGame, params: RoutingParams) -> Result<BrSimOutput> {
    let schedule = params.schedule(game)?;
    let (n, m) = (game.player_count(), game.edge_count());
    let mut counters = Counters {
        counters: (0..m)
            .map(|_| ApproxCounter::new(params.r, schedule.horizon))
            .collect::<Result<_>>()?,
        r: params.r as i64,
    };

    let mut paths = Vec::with_capacity(n);
    let mut loads = vec![0u64; m];
    let mut symbols = vec![0i8; m];
    for i in 0..n {
        let path = fewest_edge_path(game, i)?;
        symbols.fill(0);
        for &e in &path {
            symbols[e] = 1;
            loads[e] += 1;
        }
        counters.push(&symbols, &loads)?;
        paths.push(path);
    }
    let mut flow = FlowState::new(game, paths)?;
    let initial_potential = potential(&flow, game);
    let mut psi = initial_potential;

    let all_settled = |flow: &FlowState, counts: &[f64]| -> Result<bool> {
        for i in 0..n {
            if !is_alpha_best_response(game, i, flow.path(i), counts, params.alpha)? {
                return Ok(false);
            }
        }
        Ok(true)
    };

    let mut deviations = Vec::new();
    let mut halt = schedule.rounds;
    let mut converged = false;
    for t in 1..=schedule.rounds {
        if all_settled(&flow, &counters.counts())? {
            halt = t - 1;
            converged = true;
            break;
        }
        for i in 0..n {
            let counts = counters.counts();
            let current = path_cost_at_counts(flow.path(i), &counts, game);
            let (best, new_path) = best_response_path(i, &counts, game)?;
            symbols.fill(0);
            if current - params.alpha > best {
                for &e in flow.path(i) {
                    symbols[e] -= 1;
                }
                for &e in &new_path {
                    symbols[e] += 1;
                }
                let loads = flow.loads();
                let delta: f64 = (0..m)
                    .map(|e| match symbols[e] {
                        1 => game.cost(e, (loads[e] + 1) as f64),
                        -1 => -game.cost(e, loads[e] as f64),
                        _ => 0.0,
                    })
                    .sum();
                let before = psi;
                flow.switch(game, i, new_path)?;
                psi = before + delta;
                if before - psi < schedule.drop - DROP_SLACK {
                    return Err(Error::Invariant(format!(
                        "round {t}, player {i}: potential fell by {} < l = {}",
                        before - psi,
                        schedule.drop
                    )));
                }
                deviations.push(Deviation {
                    round: t,
                    player: i,
                    potential_before: before,
                    potential_after: psi,
                });
            }
            counters.push(&symbols, flow.loads())?;
        }
    }
    if !converged {
        converged = all_settled(&flow, &counters.counts())?;
    }

    let transcripts: Vec<CounterTranscript> = counters.counters.into_iter().map(ApproxCounter::finish).collect();
    let mut message = Message::new();
    message.push_uint(halt as u128, bit_width(schedule.rounds as u128))?;
    for t in &transcripts {
        t.encode_into(&mut message)?;
    }
    Ok(BrSimOutput {
        message,
        transcripts,
        trace: SimTrace {
            halt,
            converged,
            initial_potential,
            final_potential: potential(&flow, game),
            deviations,
        },
        flow,
    })
}

/// Parsed routing message.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMessage {
    pub halt: usize,
    pub transcripts: Vec<CounterTranscript>,
}

impl RoutingMessage {
    pub fn parse(msg: &Message, game: &RoutingGame, params: RoutingParams) -> Result<Self> {
        let schedule = params.schedule(game)?;
        let mut reader = msg.reader();
        let halt = reader.read_uint(bit_width(schedule.rounds as u128))? as usize;
        if halt > schedule.rounds {
            return Err(Error::message(format!("halt round {halt} exceeds the budget {}", schedule.rounds)));
        }
        let transcripts = (0..game.edge_count())
            .map(|_| CounterTranscript::decode_from(&mut reader, params.r, schedule.horizon))
            .collect::<Result<Vec<_>>>()?;
        reader.finish()?;
        Ok(RoutingMessage { halt, transcripts })
    }
}

/// Reads a transcript's counts at nondecreasing positions without
/// materializing the whole horizon.
struct CountCursor<'a> {
    transcript: &'a CounterTranscript,
    next: usize,
    count: i64,
}

impl<'a> CountCursor<'a> {
    fn new(transcript: &'a CounterTranscript) -> Self {
        CountCursor {
            transcript,
            next: 0,
            count: 0,
        }
    }

    fn at(&mut self, position: usize) -> i64 {
        let r = self.transcript.refinement as i64;
        while let Some(e) = self.transcript.updates.get(self.next).filter(|e| e.step <= position) {
            self.count += match e.direction {
                Direction::Up => r,
                Direction::Down => -r,
            };
            self.next += 1;
        }
        self.count
    }
}

/// Player side: replays player `i`'s decisions from the counts alone.
pub fn extract_path(player: usize, msg: &Message, game: &RoutingGame, params: RoutingParams) -> Result<Vec<usize>> {
    let parsed = RoutingMessage::parse(msg, game, params)?;
    extract_path_parsed(player, &parsed, game, params)
}

pub fn extract_path_parsed(
    player: usize,
    msg: &RoutingMessage,
    game: &RoutingGame,
    params: RoutingParams,
) -> Result<Vec<usize>> {
    let n = game.player_count();
    if player >= n {
        return Err(Error::input(format!("player {player} out of range 0..{n}")));
    }
    let mut cursors: Vec<CountCursor> = msg.transcripts.iter().map(CountCursor::new).collect();
    let mut path = fewest_edge_path(game, player)?;
    for t in 1..=msg.halt {
        let position = n * t + player;
        let counts: Vec<f64> = cursors.iter_mut().map(|c| c.at(position) as f64).collect();
        let current = path_cost_at_counts(&path, &counts, game);
        let (best, best_path) = best_response_path(player, &counts, game)?;
        if current - params.alpha > best {
            path = best_path;
        }
    }
    Ok(path)
}

/// Upper bound on the message length: header plus, per edge, the 32-bit event
/// count and at most `(n + m n / l) / r` events. Each edge sees at most one
/// nonzero symbol per initial path and per deviation, and there are at most
/// `Psi_0 / l <= m n / l` deviations.
pub fn message_bits_bound(game: &RoutingGame, params: RoutingParams) -> Result<usize> {
    let s = params.schedule(game)?;
    let (n, m) = (game.player_count() as f64, game.edge_count() as f64);
    let events = ((n + m * n / s.drop) / params.r as f64).floor() as usize;
    let per_event = CounterTranscript::step_width(s.horizon) as usize + 1;
    Ok(bit_width(s.rounds as u128) as usize + game.edge_count() * (32 + events * per_event))
}

/// Counter-compressed best-response dynamics as a coordination protocol.
/// The objective is the largest regret of the decoded flow (lower is better).
#[derive(Debug, Clone, Copy)]
pub struct RoutingProtocol {
    pub params: RoutingParams,
}

impl Protocol for RoutingProtocol {
    type Instance = RoutingGame;
    type Public = RoutingGame;
    type Private = ();
    type Action = Vec<usize>;

    fn name(&self) -> &str {
        "br-sim"
    }
    fn agents(&self, g: &RoutingGame) -> usize {
        g.player_count()
    }
    fn width(&self, g: &RoutingGame) -> usize {
        g.edge_count()
    }
    fn public(&self, g: &RoutingGame) -> RoutingGame {
        g.clone()
    }
    fn private_slice(&self, _: &RoutingGame, _: usize) {}
    fn encode(&self, g: &RoutingGame, _: &mut ProtocolRng) -> Result<Message> {
        Ok(br_sim(g, self.params)?.message)
    }
    fn decode(&self, agent: usize, g: &RoutingGame, _: &(), msg: &Message, _: &mut ProtocolRng) -> Result<Vec<usize>> {
        extract_path(agent, msg, g, self.params)
    }
    fn evaluate(&self, g: &RoutingGame, actions: &[Vec<usize>]) -> Result<Evaluation> {
        let flow = FlowState::new(g, actions.to_vec())?;
        let check = verify_equilibrium(&flow, g, self.params.equilibrium_epsilon(g));
        Ok(Evaluation {
            objective: check.max_regret,
            opt: None,
        })
    }
}
