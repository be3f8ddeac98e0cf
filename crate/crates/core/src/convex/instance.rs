//! Many-to-one matching instances with {0,1} valuations and integral supplies.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingInstance {
    n: usize,
    k: usize,
    valuations: Vec<Vec<bool>>,
    supplies: Vec<u64>,
}

impl MatchingInstance {
    pub fn new(valuations: Vec<Vec<bool>>, supplies: Vec<u64>) -> Result<Self> {
        let n = valuations.len();
        let k = supplies.len();
        if n == 0 || k == 0 {
            return Err(Error::input(format!(
                "matching instance needs n >= 1 and k >= 1 (got n={n}, k={k})"
            )));
        }
        if let Some(i) = valuations.iter().position(|row| row.len() != k) {
            return Err(Error::input(format!(
                "valuation row {i} has {} entries, expected {k}",
                valuations[i].len()
            )));
        }
        if let Some(j) = supplies.iter().position(|&b| b == 0) {
            return Err(Error::input(format!("good {j} has zero supply")));
        }
        Ok(MatchingInstance {
            n,
            k,
            valuations,
            supplies,
        })
    }

    pub fn from_edges(n: usize, supplies: Vec<u64>, edges: &[(usize, usize)]) -> Result<Self> {
        let k = supplies.len();
        let mut valuations = vec![vec![false; k]; n];
        for &(i, j) in edges {
            if i >= n || j >= k {
                return Err(Error::input(format!(
                    "edge ({i},{j}) out of range for n={n}, k={k}"
                )));
            }
            valuations[i][j] = true;
        }
        Self::new(valuations, supplies)
    }

    /// Every player values every good.
    pub fn complete(n: usize, supplies: Vec<u64>) -> Result<Self> {
        let k = supplies.len();
        Self::new(vec![vec![true; k]; n], supplies)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn supplies(&self) -> &[u64] {
        &self.supplies
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.valuations[i]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.valuations
    }

    pub fn value(&self, i: usize, j: usize) -> bool {
        self.valuations[i][j]
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.valuations.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Replaces player `i`'s valuation row; used to build neighboring instances.
    pub fn with_row(&self, i: usize, row: Vec<bool>) -> Result<Self> {
        let mut rows = self.valuations.clone();
        if i >= self.n {
            return Err(Error::input(format!("player {i} out of range")));
        }
        rows[i] = row;
        Self::new(rows, self.supplies.clone())
    }

    /// Number of players whose valuation rows differ, or `None` when the
    /// instances have different shapes or supplies.
    pub fn differing_players(&self, other: &MatchingInstance) -> Option<usize> {
        if self.n != other.n || self.k != other.k || self.supplies != other.supplies {
            return None;
        }
        Some(
            self.valuations
                .iter()
                .zip(&other.valuations)
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    pub fn to_file(&self, generator: Option<serde_json::Value>) -> MatchingInstanceFile {
        MatchingInstanceFile {
            schema_version: SCHEMA_VERSION,
            n: self.n,
            k: self.k,
            supplies: self.supplies.clone(),
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            generator,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file(None))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MatchingInstanceFile = serde_json::from_str(s)?;
        file.into_instance()
    }
}

/// On-disk form: `{"schema_version":1,"n":..,"k":..,"supplies":[..],"edges":[[i,j],..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchingInstanceFile {
    pub schema_version: u32,
    pub n: usize,
    pub k: usize,
    pub supplies: Vec<u64>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl MatchingInstanceFile {
    pub fn into_instance(self) -> Result<MatchingInstance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::input(format!(
                "unsupported matching schema version {}",
                self.schema_version
            )));
        }
        if self.supplies.len() != self.k {
            return Err(Error::input(format!(
                "supplies has {} entries but k = {}",
                self.supplies.len(),
                self.k
            )));
        }
        let edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        MatchingInstance::from_edges(self.n, self.supplies, &edges)
    }
}

/// Each edge present independently with probability `density`.
pub fn random_instance(n: usize, supplies: Vec<u64>, density: f64, seed: u64) -> Result<MatchingInstance> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::param(format!("density {density} not in [0,1]")));
    }
    let mut rng = seeded(seed);
    let k = supplies.len();
    let rows = (0..n)
        .map(|_| (0..k).map(|_| rng.random_bool(density)).collect())
        .collect();
    MatchingInstance::new(rows, supplies)
}

/// Instance whose optimum is known in advance: player `i` is planted on one
/// good so that good `j` receives exactly `supplies[j]` planted players
/// (requires `n == sum(supplies)`), giving OPT = n. Extra edges appear with
/// probability `extra_density`.
pub fn planted_instance(supplies: Vec<u64>, extra_density: f64, seed: u64) -> Result<MatchingInstance> {
    let n: u64 = supplies.iter().sum();
    let mut rng = seeded(seed);
    let k = supplies.len();
    let mut owners: Vec<usize> = supplies
        .iter()
        .enumerate()
        .flat_map(|(j, &b)| std::iter::repeat_n(j, b as usize))
        .collect();
    owners.shuffle(&mut rng);
    let rows = owners
        .iter()
        .map(|&planted| {
            (0..k)
                .map(|j| j == planted || rng.random_bool(extra_density))
                .collect()
        })
        .collect();
    debug_assert_eq!(owners.len() as u64, n);
    MatchingInstance::new(rows, supplies)
}
