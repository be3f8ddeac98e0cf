//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use coordc::convex::rec::message_bits_bound;
use coordc::convex::{
    constraint_violation, decode_assignment, lp_opt, planted_instance, random_instance, rec_protocol, round_dual,
    solve_regularized_dual, DualSolverOptions, MatchingInstance, MatchingProgram, RecParams, RecProtocol,
};
use coordc::counters::{extract_count, ApproxCounter, CounterTranscript};
use coordc::lowerbound::{good_graph_bound, lift_many_to_one, rang, sample_reduce, validate_rang};
use coordc::privacy::{
    mass_within, price_grid_candidates, quality_table, selection_probabilities, utility_gap, verify_dp,
    MatchingQuality,
};
use coordc::protocol::decode_all;
use coordc::routing::{
    br_sim, extract_path, grid, parallel_edges, verify_equilibrium, RoutingGame, RoutingMessage, RoutingParams,
};
use coordc::routing::sim::extract_path_parsed;
use coordc::rng::seeded;
use coordc::stable::{induced_matching, random_stable_instance, stab, verify_stability, StableProtocol};
use coordc::run_protocol;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.2}s of {}s allowed", elapsed.as_secs_f64(), limit.as_secs())
}

/// `ceil(log2(x))` for `x >= 1`, by repeated doubling.
fn ceil_log2(x: u128) -> usize {
    let mut bits = 0;
    while (1u128 << bits) < x {
        bits += 1;
    }
    bits
}

fn counters() -> Outcome {
    let start = Instant::now();
    let failures: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = seeded(seed);
            let r = [1u64, 2, 5, 10][seed as usize % 4];
            let len = rng.random_range(1..=10_000usize);
            let mut counter = ApproxCounter::new(r, len).unwrap();
            let mut internal = Vec::with_capacity(len);
            for _ in 0..len {
                counter.push(rng.random_range(-1..=1)).unwrap();
                if (counter.count() - counter.prefix()).unsigned_abs() > r {
                    return Some(format!("seed {seed}: drift exceeds r at step {}", counter.steps()));
                }
                internal.push(counter.count());
            }
            let transcript = counter.finish();
            let wire = CounterTranscript::decode_from(&mut transcript.to_message().unwrap().reader(), r, len).unwrap();
            if extract_count(&wire).unwrap() != internal {
                return Some(format!("seed {seed}: replayed counts differ"));
            }
            None
        })
        .collect();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(5);
    outcome(
        failures.is_empty() && elapsed < limit,
        format!("1000 streams, {} failures{}; {}", failures.len(), first(&failures), within(elapsed, limit)),
    )
}

fn first(failures: &[String]) -> String {
    failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default()
}

/// The 50 seeded instances shared by the dual-primal and regularization checks.
fn dual_instances() -> Vec<(MatchingInstance, f64)> {
    (0..50u64)
        .map(|seed| {
            let mut rng = seeded(1000 + seed);
            let n = rng.random_range(20..=200);
            let k = rng.random_range(2..=10);
            let supplies = (0..k).map(|_| rng.random_range(1..=(n / k).max(1) as u64)).collect();
            let density = rng.random_range(0.1..0.5);
            let eta = [0.01, 0.1][seed as usize % 2];
            (random_instance(n, supplies, density, seed).unwrap(), eta)
        })
        .collect()
}

fn dual_primal() -> Outcome {
    let mut worst: f64 = 0.0;
    let failures: Vec<String> = dual_instances()
        .iter()
        .enumerate()
        .filter_map(|(idx, (inst, eta))| {
            let (n, k) = (inst.n() as f64, inst.k() as f64);
            let params = RecParams::new(*eta, *eta).unwrap();
            let alpha = params.alpha(inst.n(), inst.k());
            let solved = solve_regularized_dual(&MatchingProgram::new(inst), *eta, &DualSolverOptions::default()).unwrap();
            let (rounded, _) = round_dual(&solved.lambda, alpha, inst.k()).unwrap();
            let exact = decode_assignment(inst, &solved.lambda, *eta).unwrap();
            let approx = decode_assignment(inst, &rounded, *eta).unwrap();
            let bound = 2.0 * alpha.sqrt() * (n * k).powf(0.25) / eta.sqrt();
            let dist = exact.distance(&approx);
            worst = worst.max(dist / bound);
            (dist > bound).then(|| format!("instance {idx}: {dist:e} > {bound:e}"))
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!("50 instances, {} violations{}; largest distance/bound {worst:.3e}", failures.len(), first(&failures)),
    )
}

fn regularization_loss() -> Outcome {
    let mut slack = f64::INFINITY;
    let failures: Vec<String> = dual_instances()
        .iter()
        .enumerate()
        .filter_map(|(idx, (inst, eta))| {
            let solved = solve_regularized_dual(&MatchingProgram::new(inst), *eta, &DualSolverOptions::default()).unwrap();
            let value = decode_assignment(inst, &solved.lambda, *eta).unwrap().fractional_welfare(inst);
            let floor = lp_opt(inst).value as f64 - eta * inst.n() as f64 / 2.0;
            slack = slack.min(value - floor);
            (value < floor).then(|| format!("instance {idx}: {value} < {floor}"))
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!("50 instances, {} violations{}; smallest slack {slack:.4}", failures.len(), first(&failures)),
    )
}

struct RecRun {
    welfare: f64,
    violation: f64,
    violation_bound: f64,
}

fn rec_runs() -> (Vec<RecRun>, Duration, RecParams) {
    let (k, b, n) = (10usize, 50u64, 500usize);
    let (params, _) = RecParams::desk_default(n, k);
    let beta: f64 = 0.05;
    let start = Instant::now();
    let runs = (0..200u64)
        .map(|seed| {
            let inst = planted_instance(vec![b; k], 0.1, seed).unwrap();
            let out = rec_protocol(&inst, params, &DualSolverOptions::default()).unwrap();
            let actions = decode_all(&RecProtocol::new(params), &inst, &out.message, seed).unwrap();
            let v_hat = out.assignment.fractional_welfare(&inst);
            RecRun {
                welfare: coordc::convex::capped_welfare(&actions, &inst).unwrap().welfare as f64,
                violation: constraint_violation(&actions, &inst),
                violation_bound: (3.0 * k as f64 * (k as f64 / beta).ln() * v_hat).sqrt()
                    + ((n * k) as f64).sqrt() * params.epsilon,
            }
        })
        .collect();
    (runs, start.elapsed(), params)
}

fn rec_welfare(runs: &[RecRun], elapsed: Duration, params: RecParams) -> Outcome {
    let (k, opt, beta) = (10f64, 500f64, 0.05f64);
    let floor = opt - 8.0 * k.sqrt() * (2.0 * k / beta).ln() * opt.sqrt();
    let hits = runs.iter().filter(|r| r.welfare >= floor).count();
    let mean = runs.iter().map(|r| r.welfare).sum::<f64>() / runs.len() as f64;
    let limit = Duration::from_secs(120);
    outcome(
        hits * 100 >= 95 * runs.len() && mean >= 0.8 * opt && elapsed < limit,
        format!(
            "eta = epsilon = {:e}; {hits}/200 seeds at or above {floor:.1}; mean welfare {mean:.2} (needs {}); {}",
            params.eta,
            0.8 * opt,
            within(elapsed, limit)
        ),
    )
}

fn rec_violation(runs: &[RecRun]) -> Outcome {
    let hits = runs.iter().filter(|r| r.violation <= r.violation_bound).count();
    let worst = runs.iter().map(|r| r.violation).fold(0.0, f64::max);
    outcome(
        hits * 100 >= 95 * runs.len(),
        format!("{hits}/200 seeds within the bound; largest violation {worst}"),
    )
}

fn rec_message_length() -> Outcome {
    let ks = [2usize, 4, 8, 16, 32];
    let per_k = 20u64;
    let seeds = 5u64;
    let mut over_bound = Vec::new();
    let mut points = Vec::new();
    for &k in &ks {
        let n = k * per_k as usize;
        let (params, _) = RecParams::desk_default(n, k);
        let alpha = params.alpha(n, k);
        let mut total = 0usize;
        for seed in 0..seeds {
            let inst = planted_instance(vec![per_k; k], 0.2, seed).unwrap();
            let out = rec_protocol(&inst, params, &DualSolverOptions::default()).unwrap();
            let bits = out.message.len();
            let mut reader = out.message.reader();
            let width = reader.read_uint(8).unwrap() as usize;
            let bound = message_bits_bound(n, k, alpha);
            let direct = 8 + k * ceil_log2(((n as f64 * (k as f64).sqrt() / alpha) + 1.0).ceil() as u128);
            if bits != 8 + k * width || bits > bound || bits > direct {
                over_bound.push(format!("k = {k} seed {seed}: {bits} bits, bound {bound}"));
            }
            total += bits;
        }
        points.push((k as f64, total as f64 / seeds as f64));
    }
    let r2 = r_squared(&points);
    outcome(
        over_bound.is_empty() && r2 >= 0.99,
        format!(
            "{} format/bound violations{}; mean bits {:?}; linear fit R^2 = {r2:.4}",
            over_bound.len(),
            first(&over_bound),
            points.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    )
}

fn r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

struct RoutingCase {
    game: RoutingGame,
    params: RoutingParams,
}

fn routing_cases() -> Vec<RoutingCase> {
    (0..100u64)
        .map(|seed| {
            let mut rng = seeded(5000 + seed);
            let n = rng.random_range(5..=200);
            let game = if seed % 2 == 0 {
                parallel_edges(n, rng.random_range(2..=40), None, seed).unwrap()
            } else {
                let (w, h) = (rng.random_range(2..=5), rng.random_range(2..=5));
                grid(w, h, n, None, seed).unwrap()
            };
            assert!(game.edge_count() <= 40 && game.lipschitz() <= 1.0 / n as f64 + 1e-15);
            // r cycles through 1, 2, 3 for targets lambda m (8 + 6s).
            let lm = game.lipschitz() * game.edge_count() as f64;
            let s = (seed % 3) as f64;
            let params = RoutingParams::for_target(lm * (8.0 + 6.0 * s), &game).unwrap();
            RoutingCase { game, params }
        })
        .collect()
}

fn routing() -> (Outcome, Outcome) {
    let cases = routing_cases();
    let start = Instant::now();
    let results: Vec<(Option<String>, Option<String>)> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, c)| {
            let out = match catch_unwind(AssertUnwindSafe(|| br_sim(&c.game, c.params))) {
                Ok(Ok(out)) => out,
                Ok(Err(e)) => return (Some(format!("game {idx}: {e}")), Some(format!("game {idx}: {e}"))),
                Err(_) => return (None, Some(format!("game {idx}: in-loop potential assertion failed"))),
            };
            let parsed = RoutingMessage::parse(&out.message, &c.game, c.params).unwrap();
            let replay = (0..c.game.player_count())
                .find(|&i| {
                    extract_path_parsed(i, &parsed, &c.game, c.params).ok().as_deref() != Some(out.flow.path(i))
                        || (i == 0 && extract_path(0, &out.message, &c.game, c.params).ok().as_deref() != Some(out.flow.path(0)))
                })
                .map(|i| format!("game {idx}: player {i} decodes a different path"));
            let eps = c.params.equilibrium_epsilon(&c.game);
            let check = verify_equilibrium(&out.flow, &c.game, eps);
            let drop = c.params.schedule(&c.game).unwrap().drop;
            let quality = if !check.ok {
                Some(format!("game {idx}: regret {} above {eps}", check.max_regret))
            } else {
                out.trace
                    .deviations
                    .iter()
                    .find(|d| d.potential_before - d.potential_after < drop - 1e-9)
                    .map(|d| format!("game {idx}: potential drop below {drop} in round {}", d.round))
            };
            (replay, quality)
        })
        .collect();
    let elapsed = start.elapsed();
    let replay: Vec<String> = results.iter().filter_map(|r| r.0.clone()).collect();
    let quality: Vec<String> = results.iter().filter_map(|r| r.1.clone()).collect();
    let limit = Duration::from_secs(60);
    (
        outcome(replay.is_empty(), format!("100 games, {} replay mismatches{}", replay.len(), first(&replay))),
        outcome(
            quality.is_empty() && elapsed < limit,
            format!("100 games, {} failures{}; {}", quality.len(), first(&quality), within(elapsed, limit)),
        ),
    )
}

fn stable() -> Outcome {
    let failures: Vec<String> = (0..100u64)
        .filter_map(|seed| {
            let mut rng = seeded(9000 + seed);
            let n = rng.random_range(1..=200);
            let k = rng.random_range(1..=10);
            let caps = (0..k).map(|_| rng.random_range(1..=(2 * n / k).max(1) as u64)).collect();
            let inst = random_stable_instance(n, caps, seed).unwrap();
            let run = run_protocol(&StableProtocol, &inst, seed).unwrap();
            let expected_bits = k * ceil_log2(n as u128 + 2);
            let report = verify_stability(&run.actions, &inst).unwrap();
            if run.actions != induced_matching(&inst, &stab(&inst)) {
                Some(format!("seed {seed}: decoded matching differs from the coordinator's"))
            } else if !report.stable {
                Some(format!("seed {seed}: {} violations", report.violations.len()))
            } else if run.message.len() != expected_bits {
                Some(format!("seed {seed}: {} bits, expected {expected_bits}", run.message.len()))
            } else {
                None
            }
        })
        .collect();
    outcome(failures.is_empty(), format!("100 instances, {} failures{}", failures.len(), first(&failures)))
}

fn privacy() -> Outcome {
    // Every 3-player, 2-good instance with unit supplies and at least one edge.
    let instances: Vec<MatchingInstance> = (1u32..64)
        .map(|mask| {
            let rows = (0..3).map(|i| (0..2).map(|j| mask >> (2 * i + j) & 1 == 1).collect()).collect();
            MatchingInstance::new(rows, vec![1, 1]).unwrap()
        })
        .collect();
    let neighbors: Vec<(usize, usize)> = (0..instances.len())
        .flat_map(|a| (a + 1..instances.len()).map(move |b| (a, b)))
        .filter(|&(a, b)| instances[a].differing_players(&instances[b]) == Some(1))
        .collect();
    let params = RecParams::new(0.05, 0.5).unwrap();
    let protocol = RecProtocol::new(params);
    let candidates = price_grid_candidates(&[4, 2], 1.0, params.grid_step(3, 2)).unwrap();
    let epsilon = 1.0;
    let report = verify_dp(&instances, &neighbors, &protocol, &candidates, epsilon).unwrap();
    let gap = utility_gap(candidates.len(), 0.05, epsilon);
    let worst_mass = instances
        .iter()
        .map(|inst| {
            let oracle = MatchingQuality {
                instance: inst,
                protocol: &protocol,
                mc_seed: 0,
            };
            let (table, _) = quality_table(&oracle, &candidates).unwrap();
            mass_within(&table, &selection_probabilities(&table, epsilon).unwrap(), gap)
        })
        .fold(1.0, f64::min);
    outcome(
        candidates.len() == 8 && report.max_log_ratio <= epsilon + 1e-9 && worst_mass >= 0.95,
        format!(
            "{} instances, {} neighboring pairs, {} candidates; max log-ratio {:.6}; smallest mass within {gap:.2} of best {worst_mass:.4}",
            instances.len(),
            neighbors.len(),
            candidates.len(),
            report.max_log_ratio
        ),
    )
}

fn rang_structure() -> Outcome {
    let start = Instant::now();
    let cells: Vec<(usize, usize, u64)> = [(1, 64), (1, 256), (2, 64), (2, 256)]
        .iter()
        .flat_map(|&(rho, n)| (0..100u64).map(move |s| (rho, n, s)))
        .collect();
    let failures: Vec<String> = cells
        .par_iter()
        .filter_map(|&(rho, n, seed)| {
            let g = rang(rho, n, seed).unwrap();
            if let Err(e) = validate_rang(&g) {
                return Some(format!("rho {rho} n {n} seed {seed}: {e}"));
            }
            let m = g.max_matching();
            (m < good_graph_bound(n)).then(|| format!("rho {rho} n {n} seed {seed}: matching {m}"))
        })
        .collect();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(10);
    outcome(
        failures.is_empty() && elapsed < limit,
        format!("400 instances, {} failures{}; {}", failures.len(), first(&failures), within(elapsed, limit)),
    )
}

fn sampling_reduction() -> Outcome {
    let (b, samples) = (8u64, 10_000u64);
    let mut details = Vec::new();
    let mut pass = true;
    for graph_seed in 0..5u64 {
        let g = rang(1, 64, graph_seed).unwrap();
        let lifted = lift_many_to_one(&g, b).unwrap();
        let opt_lifted = lp_opt(&lifted);
        let opt = g.max_matching() as f64;
        pass &= opt_lifted.value as f64 >= b as f64 * opt;
        let sizes: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|s| {
                let m = sample_reduce(&opt_lifted.assignment, g.n(), b, graph_seed * samples + s).unwrap();
                m.iter().flatten().count() as f64
            })
            .collect();
        let count = sizes.len() as f64;
        let mean = sizes.iter().sum::<f64>() / count;
        let se = (sizes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0) / count).sqrt();
        let threshold = opt / 3.0 - 3.0 * se;
        pass &= mean >= threshold;
        details.push(format!("{mean:.2} vs {threshold:.2}"));
    }
    outcome(pass, format!("5 graphs x 10^4 samples, mean vs OPT'/3 - 3SE: {}", details.join(", ")))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "counter exactness", guarded(counters)));
    results.push((2, "dual-primal distance", guarded(dual_primal)));
    results.push((3, "regularization loss", guarded(regularization_loss)));
    match catch_unwind(rec_runs) {
        Ok((runs, elapsed, params)) => {
            results.push((4, "end-to-end matching welfare", rec_welfare(&runs, elapsed, params)));
            results.push((5, "constraint violation", rec_violation(&runs)));
        }
        Err(_) => {
            results.push((4, "end-to-end matching welfare", outcome(false, "protocol run panicked")));
            results.push((5, "constraint violation", outcome(false, "protocol run panicked")));
        }
    }
    results.push((6, "message length", guarded(rec_message_length)));
    match catch_unwind(routing) {
        Ok((replay, quality)) => {
            results.push((7, "routing replay", replay));
            results.push((8, "routing equilibrium", quality));
        }
        Err(_) => {
            results.push((7, "routing replay", outcome(false, "panicked")));
            results.push((8, "routing equilibrium", outcome(false, "panicked")));
        }
    }
    results.push((9, "stable matching", guarded(stable)));
    results.push((10, "joint privacy", guarded(privacy)));
    results.push((11, "RanG structure", guarded(rang_structure)));
    results.push((12, "sampling reduction", guarded(sampling_reduction)));

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("criterion {id:2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
