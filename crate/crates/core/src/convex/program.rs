//! Linearly separable convex programs: each agent owns a block of variables,
//! a concave objective, and a personal feasible set; agents interact only
//! through `k` coupling constraints `sum_i c_j^i(x^i) <= b_j`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

use super::best_response::{agent_response, regularized_argmax};
use super::instance::MatchingInstance;

/// Nonnegative prices on the coupling constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(j) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input(format!(
                "dual coordinate {j} is {} (must be finite and >= 0)",
                values[j]
            )));
        }
        Ok(DualVector(values))
    }

    pub fn zeros(k: usize) -> Self {
        DualVector(vec![0.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &DualVector) -> f64 {
        l2_distance(&self.0, &other.0)
    }
}

pub(crate) fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fractional many-to-one assignment: row `i` is player `i`'s mass on each good.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalAssignment {
    rows: Vec<Vec<f64>>,
}

impl FractionalAssignment {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&x| !(x >= 0.0)) {
                return Err(Error::Invariant(format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if s > 1.0 + 1e-9 {
                return Err(Error::Invariant(format!("row {i} sums to {s} > 1")));
            }
        }
        Ok(FractionalAssignment { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// `sum_ij v_ij x_ij`.
    pub fn fractional_welfare(&self, inst: &MatchingInstance) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .zip(inst.row(i))
                    .filter(|(_, &v)| v)
                    .map(|(x, _)| x)
                    .sum::<f64>()
            })
            .sum()
    }

    /// Column sums `sum_i x_ij`.
    pub fn loads(&self) -> Vec<f64> {
        let k = self.rows.first().map_or(0, Vec::len);
        let mut out = vec![0.0; k];
        for row in &self.rows {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        out
    }

    pub fn distance(&self, other: &FractionalAssignment) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let d = l2_distance(a, b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Oracle form of a linearly separable convex program.
///
/// `best_response` must return the unique maximizer of
/// `v^i(x) - (eta/2)|x|^2 - sum_j lambda_j c_j^i(x)` over agent `i`'s personal
/// feasible set; the regularized dual solver needs nothing else.
pub trait SeparableProgram: Sync {
    fn agents(&self) -> usize;

    fn constraints(&self) -> usize;

    fn bounds(&self) -> &[f64];

    fn best_response(&self, agent: usize, lambda: &[f64], eta: f64) -> Result<Vec<f64>>;

    /// `c_j^i(x)` for every coupling constraint `j`.
    fn usage(&self, agent: usize, x: &[f64]) -> Vec<f64>;

    fn value(&self, agent: usize, x: &[f64]) -> f64;

    /// Row-major `k x k` matrix `-d c^i(x^i(lambda)) / d lambda` at `lambda`,
    /// if the program knows it in closed form. Solvers fall back to finite
    /// differences otherwise.
    fn demand_curvature(&self, _agent: usize, _lambda: &[f64], _eta: f64) -> Option<Vec<f64>> {
        None
    }
}

/// The matching LP viewed as a separable program: supplies are the coupling
/// constraints, `x >= 0, sum(x) <= 1` the personal ones.
#[derive(Debug, Clone)]
pub struct MatchingProgram<'a> {
    inst: &'a MatchingInstance,
    bounds: Vec<f64>,
}

impl<'a> MatchingProgram<'a> {
    pub fn new(inst: &'a MatchingInstance) -> Self {
        MatchingProgram {
            inst,
            bounds: inst.supplies().iter().map(|&b| b as f64).collect(),
        }
    }

    pub fn instance(&self) -> &MatchingInstance {
        self.inst
    }
}

impl SeparableProgram for MatchingProgram<'_> {
    fn agents(&self) -> usize {
        self.inst.n()
    }

    fn constraints(&self) -> usize {
        self.inst.k()
    }

    fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    fn best_response(&self, agent: usize, lambda: &[f64], eta: f64) -> Result<Vec<f64>> {
        Ok(agent_response(self.inst.row(agent), lambda, eta)?.x)
    }

    fn usage(&self, _agent: usize, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn value(&self, agent: usize, x: &[f64]) -> f64 {
        self.inst
            .row(agent)
            .iter()
            .zip(x)
            .filter(|(&v, _)| v)
            .map(|(_, x)| x)
            .sum()
    }

    fn demand_curvature(&self, agent: usize, lambda: &[f64], eta: f64) -> Option<Vec<f64>> {
        let r = agent_response(self.inst.row(agent), lambda, eta).ok()?;
        Some(simplex_curvature(&r.x, r.saturated, eta))
    }
}

/// Jacobian of `-x(lambda)` for a capped-simplex water-filling response:
/// `(1/eta)(I_S - 11^T/|S|)` on the support `S` when the row is saturated,
/// `(1/eta) I_S` otherwise.
pub(crate) fn simplex_curvature(x: &[f64], saturated: bool, eta: f64) -> Vec<f64> {
    let k = x.len();
    let support: Vec<usize> = (0..k).filter(|&j| x[j] > 0.0).collect();
    let mut h = vec![0.0; k * k];
    let inv = 1.0 / eta;
    for &a in &support {
        h[a * k + a] += inv;
    }
    if saturated && !support.is_empty() {
        let shared = inv / support.len() as f64;
        for &a in &support {
            for &b in &support {
                h[a * k + b] -= shared;
            }
        }
    }
    h
}

/// Generic program built from closures, for oracle-shaped problems that do not
/// fit the matching specialization.
pub struct OracleProgram<B, U, V>
where
    B: Fn(usize, &[f64], f64) -> Result<Vec<f64>> + Sync,
    U: Fn(usize, &[f64]) -> Vec<f64> + Sync,
    V: Fn(usize, &[f64]) -> f64 + Sync,
{
    pub agents: usize,
    pub bounds: Vec<f64>,
    pub best_response: B,
    pub usage: U,
    pub value: V,
}

impl<B, U, V> SeparableProgram for OracleProgram<B, U, V>
where
    B: Fn(usize, &[f64], f64) -> Result<Vec<f64>> + Sync,
    U: Fn(usize, &[f64]) -> Vec<f64> + Sync,
    V: Fn(usize, &[f64]) -> f64 + Sync,
{
    fn agents(&self) -> usize {
        self.agents
    }
    fn constraints(&self) -> usize {
        self.bounds.len()
    }
    fn bounds(&self) -> &[f64] {
        &self.bounds
    }
    fn best_response(&self, agent: usize, lambda: &[f64], eta: f64) -> Result<Vec<f64>> {
        (self.best_response)(agent, lambda, eta)
    }
    fn usage(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        (self.usage)(agent, x)
    }
    fn value(&self, agent: usize, x: &[f64]) -> f64 {
        (self.value)(agent, x)
    }
}

/// Spot-check summary for the structural assumptions on a program.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramCheck {
    /// Largest `|x^i|_2` over sampled best responses.
    pub max_response_norm: f64,
    /// Largest `|v^i(0)|`.
    pub max_value_at_zero: f64,
    /// Largest ratio `|v(x) - v(y)| / |x - y|` over sampled response pairs.
    pub lipschitz_estimate: f64,
    pub usage_in_unit_interval: bool,
}

impl ProgramCheck {
    pub fn satisfies(&self, lipschitz: f64) -> bool {
        self.max_response_norm <= 1.0 + 1e-9
            && self.max_value_at_zero <= 1e-12
            && self.lipschitz_estimate <= lipschitz + 1e-9
            && self.usage_in_unit_interval
    }
}

/// Samples random price vectors, queries every agent's oracle, and measures
/// the norm, `v(0)`, Lipschitz and usage-range assumptions.
pub fn check_program<P: SeparableProgram>(p: &P, eta: f64, samples: usize, seed: u64) -> Result<ProgramCheck> {
    let mut rng = seeded(seed);
    let k = p.constraints();
    let mut check = ProgramCheck {
        max_response_norm: 0.0,
        max_value_at_zero: 0.0,
        lipschitz_estimate: 0.0,
        usage_in_unit_interval: true,
    };
    for agent in 0..p.agents() {
        let mut responses = Vec::with_capacity(samples);
        for _ in 0..samples {
            let lambda: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.5)).collect();
            let x = p.best_response(agent, &lambda, eta)?;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            check.max_response_norm = check.max_response_norm.max(norm);
            if p.usage(agent, &x).iter().any(|&c| !(0.0..=1.0 + 1e-12).contains(&c)) {
                check.usage_in_unit_interval = false;
            }
            if responses.is_empty() {
                let zero = vec![0.0; x.len()];
                check.max_value_at_zero = check.max_value_at_zero.max(p.value(agent, &zero).abs());
            }
            responses.push(x);
        }
        for pair in responses.windows(2) {
            let d = l2_distance(&pair[0], &pair[1]);
            if d > 1e-12 {
                let dv = (p.value(agent, &pair[0]) - p.value(agent, &pair[1])).abs();
                check.lipschitz_estimate = check.lipschitz_estimate.max(dv / d);
            }
        }
    }
    Ok(check)
}

/// Best response helper for programs whose personal set is the capped simplex
/// and whose per-unit values are `values[j]` with unit usage.
pub fn simplex_response(values: &[f64], lambda: &[f64], eta: f64) -> Result<Vec<f64>> {
    let gains: Vec<f64> = values.iter().zip(lambda).map(|(v, l)| v - l).collect();
    Ok(regularized_argmax(&gains, eta)?.x)
}
