//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use activeris_core::channel::{generate_channels, ChannelSet, ScenarioGeometry};
use activeris_core::conic::{solve, Coefficient, ConicProblem, LinearForm, Relation, SolveStatus, SolverOptions};
use activeris_core::driver::{alternating_optimize, AoConfig, AoResult};
use activeris_core::harness::config::{build_params, parse_config, SystemSettings};
use activeris_core::harness::{oracle_search, run_sweep, write_outputs, Method, OracleGrid, OracleInstance, SweepOutcome};
use activeris_core::numerics::{CMatrix, CVector, HermitianMatrix};
use activeris_core::risopt::{build_lifted, lift, lifted_objective, surrogate_value};
use activeris_core::system::{Beamformer, SystemParams};
use nalgebra::Complex;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn settings(m: usize, n: usize, pt_dbm: f64, pi_dbm: f64, eta2_db: f64) -> SystemParams {
    build_params(&SystemSettings { m, n, pt_dbm, pi_dbm, eta2_db, noise_dbm: -95.0 }).unwrap()
}

fn channels(params: &SystemParams, seed: u64) -> ChannelSet {
    generate_channels(params, &ScenarioGeometry::default(), seed).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// The 50 runs shared by criteria 1 to 3.
fn monotonicity_runs() -> Vec<AoResult> {
    let params = settings(4, 8, 30.0, 30.0, 30.0);
    (0..50)
        .map(|seed| alternating_optimize(&channels(&params, 1000 + seed), &params, &AoConfig::default()).unwrap())
        .collect()
}

fn ao_monotonicity(runs: &[AoResult]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut bad = 0;
    for r in runs {
        let drop = r.sr_trace.windows(2).map(|p| p[0] - p[1]).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(drop);
        if drop > 1e-9 || r.status.label() == "failed" {
            bad += 1;
        }
    }
    let detail = format!("{} runs, {bad} non-monotone or failed, largest step decrease {worst:.2e}", runs.len());
    if bad == 0 { Ok(detail) } else { Err(detail) }
}

fn convergence_counts(runs: &[AoResult]) -> Outcome {
    let mm: Vec<f64> = runs.iter().flat_map(|r| r.q_traces.iter().map(|t| (t.len() - 1) as f64)).collect();
    let outer: Vec<f64> = runs.iter().map(|r| r.outer_iterations() as f64).collect();
    let (mm_med, outer_med) = (median(mm), median(outer));
    let detail = format!("median MM iterations {mm_med}, median AO iterations {outer_med}");
    if mm_med <= 5.0 && outer_med <= 12.0 { Ok(detail) } else { Err(detail) }
}

fn rank_one_recovery(runs: &[AoResult]) -> Outcome {
    let max_gap = runs.iter().map(|r| r.max_rank_gap).fold(0.0, f64::max);
    let steps: Vec<(f64, f64)> = runs.iter().flat_map(|r| r.w_objectives.iter().copied()).collect();
    let close = steps.iter().filter(|(relaxed, recovered)| (relaxed - recovered).abs() <= 0.01 * relaxed.abs()).count();
    let share = close as f64 / steps.len() as f64;
    let detail = format!("largest accepted rank gap {max_gap:.2e}; {close}/{} beamformer steps within 1% of the relaxation", steps.len());
    if max_gap <= 1e-3 && share >= 0.95 { Ok(detail) } else { Err(detail) }
}

fn surrogate_validity() -> Outcome {
    let params = settings(3, 6, 30.0, 30.0, 30.0);
    let eta = params.eta[0];
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let random_v = |rng: &mut ChaCha8Rng| {
        CVector::from_fn(params.n, |_, _| Complex64::from_polar(eta * rng.random::<f64>(), std::f64::consts::TAU * rng.random::<f64>()))
    };
    let (mut worst_tangency, mut worst_minorization): (f64, f64) = (0.0, f64::NEG_INFINITY);
    for anchor_idx in 0..20 {
        let ch = channels(&params, 2000 + anchor_idx);
        let w = CVector::from_fn(params.m, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let w = Beamformer { w: w.normalize() * Complex64::new(params.p_t.sqrt(), 0.0) };
        let m = build_lifted(&ch, &w, &params).unwrap();
        let anchor = lift(&random_v(&mut rng));
        worst_tangency = worst_tangency.max((surrogate_value(&anchor, &anchor, &m) - lifted_objective(&anchor, &m)).abs());
        for _ in 0..100 {
            // Convex combinations of lifted points keep the pinned corner and the caps.
            let parts = 1 + rng.random_range(0..4);
            let weights: Vec<f64> = (0..parts).map(|_| rng.random::<f64>() + 0.05).collect();
            let total: f64 = weights.iter().sum();
            let mut v = HermitianMatrix::zeros(params.n + 1);
            for wgt in &weights {
                v = v.add(&lift(&random_v(&mut rng)).scale(wgt / total));
            }
            worst_minorization = worst_minorization.max(surrogate_value(&v, &anchor, &m) - lifted_objective(&v, &m));
        }
    }
    let detail = format!("tangency error {worst_tangency:.2e}, largest surrogate excess {worst_minorization:.2e}");
    if worst_tangency <= 1e-9 && worst_minorization <= 1e-9 { Ok(detail) } else { Err(detail) }
}

fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).qr().q()
}

fn rotated(u: &CMatrix, diag: &[f64]) -> HermitianMatrix {
    let d = CMatrix::from_diagonal(&CVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex::new(x, 0.0))));
    HermitianMatrix::hermitian_part(&(u * d * u.adjoint()))
}

/// Best `c.d + 0.7 ln(g.d)` over `d >= 0`, `a.d <= 1`, `sum d <= 2`, as the
/// minimum of the Lagrange dual over a zooming grid of multipliers.
fn diagonal_dual_oracle(c: &[f64; 3], g: &[f64; 3], a: &[f64; 3]) -> f64 {
    let dual = |lambda: f64, mu: f64| -> f64 {
        let kappa = (0..3).map(|i| (c[i] - lambda * a[i] - mu) / g[i]).fold(f64::NEG_INFINITY, f64::max);
        if kappa >= 0.0 {
            return f64::INFINITY;
        }
        lambda + 2.0 * mu - 0.7 + 0.7 * (-0.7 / kappa).ln()
    };
    let cells = 200;
    let (mut lo, mut hi) = ([0.0, 0.0], [100.0, 100.0]);
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let h = [(hi[0] - lo[0]) / cells as f64, (hi[1] - lo[1]) / cells as f64];
        let mut arg = lo;
        for i in 0..=cells {
            for j in 0..=cells {
                let x = [lo[0] + i as f64 * h[0], lo[1] + j as f64 * h[1]];
                let v = dual(x[0], x[1]);
                if v < best {
                    best = v;
                    arg = x;
                }
            }
        }
        for k in 0..2 {
            lo[k] = (arg[k] - 8.0 * h[k]).max(0.0);
            hi[k] = arg[k] + 8.0 * h[k];
        }
    }
    best
}

fn conic_correctness() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(505);

    let spectrum = [3.0, 1.2, -0.5, 0.7];
    let u = random_unitary(&mut rng, 4);
    let mut top = ConicProblem::new(vec![4]);
    top.add_objective(0, Coefficient::Dense(rotated(&u, &spectrum)), 1.0);
    top.add_constraint(LinearForm::single(0, Coefficient::Identity), Relation::Equal, 1.0);
    let sol = solve(&top, &opts).map_err(|e| e.to_string())?;
    let top_err = (sol.objective - 3.0).abs() / 3.0;

    // max 2 ln x - 0.5 x peaks at x = 4 with value 2 ln 4 - 2.
    let mut scalar = ConicProblem::new(vec![1]);
    scalar.add_log(2.0, LinearForm::single(0, Coefficient::Unit(0)));
    scalar.add_objective(0, Coefficient::Unit(0), -0.5);
    scalar.add_constraint(LinearForm::single(0, Coefficient::Unit(0)), Relation::LessEq, 100.0);
    let sol = solve(&scalar, &opts).map_err(|e| e.to_string())?;
    let exact = 2.0 * 4f64.ln() - 2.0;
    let scalar_err = (sol.objective - exact).abs() / exact.abs();

    // Data sharing one eigenbasis reduces to the diagonal problem in that basis.
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let c: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() - 0.3);
        let g: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() + 0.1);
        let a: [f64; 3] = std::array::from_fn(|_| rng.random::<f64>() + 0.2);
        let u = random_unitary(&mut rng, 3);
        let mut p = ConicProblem::new(vec![3]);
        p.add_objective(0, Coefficient::Dense(rotated(&u, &c)), 1.0);
        p.add_log(0.7, LinearForm::single(0, Coefficient::Dense(rotated(&u, &g))));
        p.add_constraint(LinearForm::single(0, Coefficient::Dense(rotated(&u, &a))), Relation::LessEq, 1.0);
        p.add_constraint(LinearForm::single(0, Coefficient::Identity), Relation::LessEq, 2.0);
        let sol = solve(&p, &opts).map_err(|e| e.to_string())?;
        if sol.status != SolveStatus::Optimal {
            return Err(format!("random instance ended with {:?}", sol.status));
        }
        worst = worst.max((sol.objective - diagonal_dual_oracle(&c, &g, &a)).abs());
    }
    let detail = format!("lambda_max rel. error {top_err:.1e}, scalar log rel. error {scalar_err:.1e}, worst dual mismatch {worst:.1e} over 50");
    if top_err <= 1e-6 && scalar_err <= 1e-6 && worst <= 1e-3 { Ok(detail) } else { Err(detail) }
}

fn oracle_proximity() -> Outcome {
    let params = settings(2, 2, 30.0, 30.0, 30.0);
    let mut close = 0;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let ch = channels(&params, 3000 + seed);
        let ao = alternating_optimize(&ch, &params, &AoConfig::default()).map_err(|e| e.to_string())?;
        let grid = oracle_search(&OracleInstance::new(&ch, &params), &OracleGrid { resolution: 13, refine: true })
            .map_err(|e| e.to_string())?;
        if ao.sr >= 0.9 * grid.sr {
            close += 1;
        }
        worst_excess = worst_excess.max(grid.sr / ao.sr - 1.0);
        ratios.push(format!("{:.3}", ao.sr / grid.sr));
    }
    let detail = format!("AO >= 0.9 x grid on {close}/10, grid above AO by at most {:.1}% (AO/grid: {})", 100.0 * worst_excess, ratios.join(" "));
    if close >= 8 && worst_excess <= 0.15 { Ok(detail) } else { Err(detail) }
}

const AMPLIFICATION_SWEEP: &str = "\
sweep.variable = eta2_dB
sweep.values = 20, 40
geometry.alice_pos = 0, 0
geometry.bob_pos = 90, 20
geometry.eve_pos = 70, 20
geometry.ris_pos = 40, 40
system.m = 4
system.n = 10
system.pt_dbm = 40
system.pi_dbm = 40
system.noise_dbm = -95
run.realizations = 30
run.base_seed = 7
run.methods = active, passive, no_ris
";

fn amplification_sweep(workers: usize) -> SweepOutcome {
    run_sweep(&parse_config(AMPLIFICATION_SWEEP).unwrap(), workers).unwrap()
}

fn gain(a: f64, b: f64) -> f64 {
    a / b - 1.0
}

fn power_trend(sweep: &SweepOutcome) -> Outcome {
    let mean = |value: f64, method| sweep.mean_sr(value, method).unwrap();
    let (a40, a20) = (mean(40.0, Method::Active), mean(20.0, Method::Active));
    let (passive, none) = (mean(20.0, Method::Passive), mean(20.0, Method::NoRis));
    let detail = format!(
        "means active40 {a40:.3}, active20 {a20:.3}, passive {passive:.3}, no-RIS {none:.3}; gains {:.1}%, {:.1}%, {:.1}%",
        100.0 * gain(a40, none),
        100.0 * gain(a20, none),
        100.0 * gain(passive, none)
    );
    let ordered = a40 > a20 && a20 > passive && passive > none;
    let bands = gain(a20, none) >= 0.05 && gain(a40, none) >= 0.25 && gain(passive, none) <= 0.10;
    if ordered && bands { Ok(detail) } else { Err(detail) }
}

fn element_trend() -> Outcome {
    let text = "\
sweep.variable = n
sweep.values = 10, 20, 40
geometry.alice_pos = 0, 0
geometry.bob_pos = 90, 20
geometry.eve_pos = 70, 20
geometry.ris_pos = 40, 40
system.m = 4
system.pt_dbm = 40
system.pi_dbm = 30
system.eta2_db = 20
system.noise_dbm = -95
run.realizations = 10
run.base_seed = 11
run.methods = active, passive
";
    let sweep = run_sweep(&parse_config(text).unwrap(), 1).map_err(|e| e.to_string())?;
    let series = |method| [10.0, 20.0, 40.0].map(|n| sweep.mean_sr(n, method).unwrap());
    let (active, passive) = (series(Method::Active), series(Method::Passive));
    let increasing = |s: &[f64; 3]| s[0] < s[1] && s[1] < s[2];
    let detail = format!("active {active:.3?}, passive {passive:.3?}");
    if increasing(&active) && increasing(&passive) && active[0] > passive[2] { Ok(detail) } else { Err(detail) }
}

fn energy_observation(sweep: &SweepOutcome) -> Outcome {
    let runs: Vec<_> =
        sweep.runs.iter().filter(|r| r.row.method == "active" && r.row.sweep_value == 20.0).map(|r| &r.diagnostics).collect();
    let inactive = runs.iter().filter(|d| !d.ris_budget_active).count();
    let pattern = runs.iter().filter(|d| !d.ris_budget_active && d.element_caps_active).count();
    let med = median(runs.iter().map(|d| d.ris_power_dbm).collect());
    let k = runs.len() as f64;
    let detail = format!(
        "budget inactive on {inactive}/{}, inactive with every cap active on {pattern}/{}, median RIS power {med:.2} dBm",
        runs.len(),
        runs.len()
    );
    if pattern as f64 >= 0.9 * k && (med - 4.0).abs() <= 10.0 { Ok(detail) } else { Err(detail) }
}

fn numeric_columns(path: &std::path::Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let wall = reader.headers().unwrap().iter().position(|h| h == "wall_ms").unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().enumerate().filter(|(i, _)| *i != wall).map(|(_, f)| f.to_string()).collect())
        .collect()
}

fn determinism(first: &SweepOutcome) -> Outcome {
    let config = parse_config(AMPLIFICATION_SWEEP).unwrap();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_outputs(&a, &config, first, false).map_err(|e| e.to_string())?;
    write_outputs(&b, &config, &amplification_sweep(3), false).map_err(|e| e.to_string())?;
    let same_results = numeric_columns(&a.join("results.csv")) == numeric_columns(&b.join("results.csv"));
    let same_summary = std::fs::read(a.join("summary.csv")).unwrap() == std::fs::read(b.join("summary.csv")).unwrap();
    let detail = format!("{} rows compared across 1 and 3 workers", first.runs.len());
    if same_results && same_summary { Ok(detail) } else { Err(format!("{detail}: outputs differ")) }
}

fn report(number: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {number:>2} PASS  {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("criterion {number:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() {
    let runs = monotonicity_runs();
    let shared = amplification_sweep(1);
    let results = [
        report(1, "AO monotonicity", || ao_monotonicity(&runs)),
        report(2, "convergence counts", || convergence_counts(&runs)),
        report(3, "rank-one recovery", || rank_one_recovery(&runs)),
        report(4, "surrogate validity", surrogate_validity),
        report(5, "conic solver correctness", conic_correctness),
        report(6, "oracle proximity", oracle_proximity),
        report(7, "transmit-power trend", || power_trend(&shared)),
        report(8, "element-count trend", element_trend),
        report(9, "energy observation", || energy_observation(&shared)),
        report(10, "determinism", || determinism(&shared)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
