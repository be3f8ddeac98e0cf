//! Many-to-one stable matching coordinated by admission thresholds.
//!
//! The coordinator runs score-based deferred acceptance and broadcasts one
//! threshold per school (`k` fields of `ceil(log2(n+2))` bits). Each student
//! enrolls at its favourite school whose threshold its own score meets.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{bit_width, Message};
use crate::protocol::{Evaluation, Protocol};
use crate::rng::{seeded, ProtocolRng};

/// `k` schools with capacities; per student a strict ranking of every school
/// (most preferred first); per school a score for every student, a
/// permutation of `1..=n` where higher is better.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StableInstanceFile", into = "StableInstanceFile")]
pub struct StableInstance {
    capacities: Vec<u64>,
    preferences: Vec<Vec<usize>>,
    scores: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StableInstanceFile {
    pub capacities: Vec<u64>,
    pub preferences: Vec<Vec<usize>>,
    pub scores: Vec<Vec<u64>>,
}

impl TryFrom<StableInstanceFile> for StableInstance {
    type Error = Error;
    fn try_from(f: StableInstanceFile) -> Result<Self> {
        StableInstance::new(f.capacities, f.preferences, f.scores)
    }
}

impl From<StableInstance> for StableInstanceFile {
    fn from(s: StableInstance) -> Self {
        StableInstanceFile {
            capacities: s.capacities,
            preferences: s.preferences,
            scores: s.scores,
        }
    }
}

fn is_permutation(values: impl Iterator<Item = usize>, len: usize, offset: usize) -> bool {
    let mut seen = vec![false; len];
    let mut count = 0;
    for v in values {
        match v.checked_sub(offset) {
            Some(x) if x < len && !seen[x] => seen[x] = true,
            _ => return false,
        }
        count += 1;
    }
    count == len
}

impl StableInstance {
    pub fn new(capacities: Vec<u64>, preferences: Vec<Vec<usize>>, scores: Vec<Vec<u64>>) -> Result<Self> {
        let (n, k) = (preferences.len(), capacities.len());
        if n == 0 || k == 0 {
            return Err(Error::input("need at least one student and one school"));
        }
        if let Some(j) = capacities.iter().position(|&c| c == 0) {
            return Err(Error::input(format!("school {j} has capacity 0")));
        }
        for (i, p) in preferences.iter().enumerate() {
            if !is_permutation(p.iter().copied(), k, 0) {
                return Err(Error::input(format!("student {i}'s preferences are not a ranking of 0..{k}")));
            }
        }
        if scores.len() != k {
            return Err(Error::input(format!("{} score tables for {k} schools", scores.len())));
        }
        for (j, s) in scores.iter().enumerate() {
            if !is_permutation(s.iter().map(|&x| x as usize), n, 1) {
                return Err(Error::input(format!("school {j}'s scores are not a permutation of 1..={n}")));
            }
        }
        Ok(StableInstance {
            capacities,
            preferences,
            scores,
        })
    }

    pub fn n(&self) -> usize {
        self.preferences.len()
    }

    pub fn k(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[u64] {
        &self.capacities
    }

    pub fn preferences(&self, student: usize) -> &[usize] {
        &self.preferences[student]
    }

    pub fn score(&self, school: usize, student: usize) -> u64 {
        self.scores[school][student]
    }

    /// The student's private data: its ranking and its score at each school.
    pub fn student_view(&self, student: usize) -> StudentView {
        StudentView {
            preferences: self.preferences[student].clone(),
            scores: self.scores.iter().map(|s| s[student]).collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentView {
    pub preferences: Vec<usize>,
    /// Indexed by school.
    pub scores: Vec<u64>,
}

/// One threshold per school, each in `1..=n+1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmissionScores {
    pub admit: Vec<u64>,
}

impl AdmissionScores {
    pub fn field_width(n: usize) -> u32 {
        bit_width(n as u128 + 1)
    }

    pub fn encode(&self, n: usize) -> Result<Message> {
        let width = Self::field_width(n);
        let mut msg = Message::new();
        for &a in &self.admit {
            msg.push_uint(u128::from(a), width)?;
        }
        Ok(msg)
    }

    pub fn decode(msg: &Message, n: usize, k: usize) -> Result<Self> {
        let width = Self::field_width(n);
        let mut r = msg.reader();
        let admit = (0..k)
            .map(|j| {
                let a = r.read_uint(width)? as u64;
                if a == 0 || a > n as u64 + 1 {
                    Err(Error::message(format!("school {j}: threshold {a} outside 1..={}", n + 1)))
                } else {
                    Ok(a)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(AdmissionScores { admit })
    }
}

/// `k * ceil(log2(n + 2))`.
pub fn message_bits(n: usize, k: usize) -> usize {
    k * AdmissionScores::field_width(n) as usize
}

/// Most preferred school whose threshold the student meets.
pub fn decode_enrollment(preferences: &[usize], own_scores: &[u64], admit: &AdmissionScores) -> Option<usize> {
    preferences.iter().copied().find(|&j| own_scores[j] >= admit.admit[j])
}

fn enrollment(inst: &StableInstance, admit: &AdmissionScores, student: usize) -> Option<usize> {
    inst.preferences[student]
        .iter()
        .copied()
        .find(|&j| inst.scores[j][student] >= admit.admit[j])
}

/// Score-based deferred acceptance. Thresholds start at `n`, and each
/// school's top-scoring student is enrolled under them from the outset.
/// While some school is under-enrolled with threshold above 1, the
/// lowest-index such school lowers its threshold by one and every student
/// re-derives its enrollment.
pub fn stab(inst: &StableInstance) -> AdmissionScores {
    let n = inst.n();
    let mut admit = AdmissionScores {
        admit: vec![n as u64; inst.k()],
    };
    let mut enrolled: Vec<Option<usize>> = (0..n).map(|i| enrollment(inst, &admit, i)).collect();
    let mut temp = vec![0u64; inst.k()];
    for j in enrolled.iter().flatten() {
        temp[*j] += 1;
    }
    while let Some(j) = (0..inst.k()).find(|&j| temp[j] < inst.capacities[j] && admit.admit[j] > 1) {
        admit.admit[j] -= 1;
        for (i, slot) in enrolled.iter_mut().enumerate() {
            let choice = enrollment(inst, &admit, i);
            if *slot != choice {
                if let Some(old) = *slot {
                    temp[old] -= 1;
                }
                if let Some(new) = choice {
                    temp[new] += 1;
                }
                *slot = choice;
            }
        }
    }
    admit
}

/// Every student's enrollment under the thresholds.
pub fn induced_matching(inst: &StableInstance, admit: &AdmissionScores) -> Vec<Option<usize>> {
    (0..inst.n()).into_par_iter().map(|i| enrollment(inst, admit, i)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Overfull { school: usize, enrolled: u64, capacity: u64 },
    /// `student` prefers `school` and outscores `displaced`, who sits there.
    FilledSeat { student: usize, school: usize, displaced: usize },
    /// `school` has a free seat and `student` prefers it to its match.
    EmptySeat { student: usize, school: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub violations: Vec<Violation>,
}

/// Exhaustive check of feasibility and both blocking-pair conditions. For a
/// filled-seat block the lowest-scoring occupant is reported.
pub fn verify_stability(matching: &[Option<usize>], inst: &StableInstance) -> Result<StabilityReport> {
    let (n, k) = (inst.n(), inst.k());
    if matching.len() != n {
        return Err(Error::input(format!("matching covers {} of {n} students", matching.len())));
    }
    let mut enrolled = vec![0u64; k];
    let mut weakest: Vec<Option<usize>> = vec![None; k];
    for (i, m) in matching.iter().enumerate() {
        if let Some(j) = *m {
            if j >= k {
                return Err(Error::input(format!("student {i} matched to unknown school {j}")));
            }
            enrolled[j] += 1;
            if weakest[j].is_none_or(|w| inst.scores[j][i] < inst.scores[j][w]) {
                weakest[j] = Some(i);
            }
        }
    }
    let mut violations: Vec<Violation> = (0..k)
        .filter(|&j| enrolled[j] > inst.capacities[j])
        .map(|j| Violation::Overfull {
            school: j,
            enrolled: enrolled[j],
            capacity: inst.capacities[j],
        })
        .collect();
    let (enrolled, weakest) = (&enrolled, &weakest);
    let blocking: Vec<Violation> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let prefs = &inst.preferences[i];
            let better = match matching[i] {
                Some(m) => &prefs[..prefs.iter().position(|&j| j == m).expect("ranking covers every school")],
                None => &prefs[..],
            };
            better.iter().filter_map(move |&j| {
                if enrolled[j] < inst.capacities[j] {
                    return Some(Violation::EmptySeat { student: i, school: j });
                }
                weakest[j]
                    .filter(|&w| inst.scores[j][w] < inst.scores[j][i])
                    .map(|w| Violation::FilledSeat {
                        student: i,
                        school: j,
                        displaced: w,
                    })
            })
        })
        .collect();
    violations.extend(blocking);
    Ok(StabilityReport {
        stable: violations.is_empty(),
        violations,
    })
}

/// Random preferences and score permutations with the given capacities.
pub fn random_stable_instance(n: usize, capacities: Vec<u64>, seed: u64) -> Result<StableInstance> {
    let k = capacities.len();
    let mut rng = seeded(seed);
    let preferences = (0..n)
        .map(|_| {
            let mut p: Vec<usize> = (0..k).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let scores = (0..k)
        .map(|_| {
            let mut s: Vec<u64> = (1..=n as u64).collect();
            s.shuffle(&mut rng);
            s
        })
        .collect();
    StableInstance::new(capacities, preferences, scores)
}

/// Admission-threshold protocol. The objective is a stability flag: 1 when
/// the decoded matching passes [`verify_stability`], 0 otherwise.
#[derive(Debug, Clone, Copy, Default)]
pub struct StableProtocol;

impl Protocol for StableProtocol {
    type Instance = StableInstance;
    /// `(n, k)`.
    type Public = (usize, usize);
    type Private = StudentView;
    type Action = Option<usize>;

    fn name(&self) -> &str {
        "stab"
    }
    fn agents(&self, inst: &StableInstance) -> usize {
        inst.n()
    }
    fn width(&self, inst: &StableInstance) -> usize {
        inst.k()
    }
    fn public(&self, inst: &StableInstance) -> (usize, usize) {
        (inst.n(), inst.k())
    }
    fn private_slice(&self, inst: &StableInstance, agent: usize) -> StudentView {
        inst.student_view(agent)
    }
    fn encode(&self, inst: &StableInstance, _: &mut ProtocolRng) -> Result<Message> {
        stab(inst).encode(inst.n())
    }
    fn decode(
        &self,
        _: usize,
        &(n, k): &(usize, usize),
        view: &StudentView,
        msg: &Message,
        _: &mut ProtocolRng,
    ) -> Result<Option<usize>> {
        let admit = AdmissionScores::decode(msg, n, k)?;
        Ok(decode_enrollment(&view.preferences, &view.scores, &admit))
    }
    fn evaluate(&self, inst: &StableInstance, actions: &[Option<usize>]) -> Result<Evaluation> {
        if actions.len() != inst.n() {
            return Err(Error::input("one action per student expected"));
        }
        let stable = verify_stability(actions, inst)?.stable;
        Ok(Evaluation {
            objective: f64::from(u8::from(stable)),
            opt: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::run_protocol;
    use proptest::prelude::*;

    #[test]
    fn one_seat_two_students() {
        let inst = StableInstance::new(vec![1], vec![vec![0], vec![0]], vec![vec![2, 1]]).unwrap();
        let admit = stab(&inst);
        assert_eq!(admit.admit, vec![2]);
        let m = induced_matching(&inst, &admit);
        assert_eq!(m, vec![Some(0), None]);
        assert_eq!(decode_enrollment(&[0], &[1], &admit), None);
        assert!(verify_stability(&m, &inst).unwrap().stable);
    }

    #[test]
    fn single_student_single_school() {
        let inst = StableInstance::new(vec![1], vec![vec![0]], vec![vec![1]]).unwrap();
        let admit = stab(&inst);
        assert_eq!(admit.admit, vec![1]);
        assert_eq!(induced_matching(&inst, &admit), vec![Some(0)]);
    }

    #[test]
    fn decode_extremes() {
        let admit = AdmissionScores { admit: vec![5, 5, 5] };
        assert_eq!(decode_enrollment(&[2, 0, 1], &[1, 2, 3], &admit), None);
        let open = AdmissionScores { admit: vec![1, 1, 1] };
        assert_eq!(decode_enrollment(&[2, 0, 1], &[1, 2, 3], &open), Some(2));
    }

    #[test]
    fn small_random_instances_are_stable() {
        for seed in 0..50 {
            let inst = random_stable_instance(4, vec![2, 2], seed).unwrap();
            let m = induced_matching(&inst, &stab(&inst));
            assert_eq!(verify_stability(&m, &inst).unwrap().violations, vec![], "seed {seed}");
        }
    }

    #[test]
    fn verifier_reports_each_kind() {
        let inst = StableInstance::new(vec![1, 1], vec![vec![0, 1], vec![0, 1]], vec![vec![2, 1], vec![1, 2]]).unwrap();
        let over = verify_stability(&[Some(0), Some(0)], &inst).unwrap();
        assert!(over.violations.contains(&Violation::Overfull {
            school: 0,
            enrolled: 2,
            capacity: 1
        }));
        let swapped = verify_stability(&[Some(1), Some(0)], &inst).unwrap();
        assert!(swapped.violations.contains(&Violation::FilledSeat {
            student: 0,
            school: 0,
            displaced: 1
        }));
        let empty = verify_stability(&[None, Some(0)], &inst).unwrap();
        assert!(empty.violations.contains(&Violation::EmptySeat { student: 0, school: 1 }));
        assert!(verify_stability(&[Some(0), Some(1)], &inst).unwrap().stable);
    }

    #[test]
    fn message_width() {
        assert_eq!(message_bits(1, 1), 2);
        assert_eq!(message_bits(2, 3), 6);
        assert_eq!(message_bits(3, 2), 6);
        assert_eq!(message_bits(200, 10), 80);
        let inst = random_stable_instance(30, vec![5; 4], 1).unwrap();
        let run = run_protocol(&StableProtocol, &inst, 0).unwrap();
        assert_eq!(run.report.message_bits, message_bits(30, 4));
        assert_eq!(run.actions, induced_matching(&inst, &stab(&inst)));
        assert_eq!(run.report.objective, 1.0);
    }

    #[test]
    fn rejects_bad_instances_and_messages() {
        assert!(StableInstance::new(vec![1], vec![vec![0]], vec![vec![2]]).is_err());
        assert!(StableInstance::new(vec![1, 1], vec![vec![0, 0]], vec![vec![1], vec![1]]).is_err());
        assert!(StableInstance::new(vec![0], vec![vec![0]], vec![vec![1]]).is_err());
        let mut msg = Message::new();
        msg.push_uint(0, 2).unwrap();
        assert!(AdmissionScores::decode(&msg, 2, 1).is_err());
        assert!(StableInstance::from_json(r#"{"capacities":[1],"preferences":[[0]],"scores":[[1]],"x":1}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let inst = random_stable_instance(6, vec![2, 3], 4).unwrap();
        assert_eq!(StableInstance::from_json(&inst.to_json().unwrap()).unwrap(), inst);
    }

    proptest! {
        #[test]
        fn stab_is_always_stable(n in 1usize..40, caps in prop::collection::vec(1u64..6, 1..6), seed in any::<u64>()) {
            let inst = random_stable_instance(n, caps, seed).unwrap();
            let admit = stab(&inst);
            prop_assert!(admit.admit.iter().all(|&a| (1..=n as u64).contains(&a)));
            let m = induced_matching(&inst, &admit);
            prop_assert!(verify_stability(&m, &inst).unwrap().stable);
        }
    }
}
