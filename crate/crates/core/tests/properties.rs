use activeris_core::channel::{generate_channels, pathloss, steering_vector, ChannelSet, ScenarioGeometry};
use activeris_core::conic::{solve, Coefficient, ConicProblem, LinearForm, Relation, SolverOptions};
use activeris_core::driver::{alternating_optimize, AoConfig};
use activeris_core::harness::config::parse_config;
use activeris_core::numerics::{CMatrix, CVector, HermitianMatrix};
use activeris_core::risopt::{build_lifted, lift, lifted_objective, surrogate_value};
use activeris_core::system::{audit_constraints, ris_power, secrecy_rate, Beamformer, ReflectCoefficients, SystemParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn params(m: usize, n: usize) -> SystemParams {
    SystemParams::uniform(m, n, 1.0, 1.0, 10.0, 3.1623e-13).unwrap()
}

fn complex_vec(xs: &[f64]) -> CVector {
    CVector::from_fn(xs.len() / 2, |i, _| Complex64::new(xs[2 * i], xs[2 * i + 1]))
}

fn channels(m: usize, n: usize, seed: u64) -> ChannelSet {
    generate_channels(&params(m, n), &ScenarioGeometry::default(), seed).unwrap()
}

fn psd(xs: &[f64], d: usize) -> HermitianMatrix {
    let b = CMatrix::from_fn(d, d, |i, j| Complex64::new(xs[2 * (i * d + j)], xs[2 * (i * d + j) + 1]));
    HermitianMatrix::hermitian_part(&(&b * b.adjoint()))
}

proptest! {
    #[test]
    fn pathloss_decreases_with_distance(d in 0.5f64..500.0, extra in 1e-3f64..100.0, alpha in 0.5f64..5.0) {
        let g = ScenarioGeometry::default();
        prop_assert!(pathloss(d + extra, alpha, &g).unwrap() < pathloss(d, alpha, &g).unwrap());
    }

    #[test]
    fn steering_entries_have_unit_modulus(count in 1usize..64, spacing in 0.1f64..2.0, angle in -7.0f64..7.0) {
        let a = steering_vector(count, spacing, angle);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn secrecy_rate_ignores_global_phase(
        seed in 0u64..1000,
        w in proptest::collection::vec(-1.0f64..1.0, 6),
        q in proptest::collection::vec(-3.0f64..3.0, 8),
        phase in 0.0f64..std::f64::consts::TAU,
    ) {
        let p = params(3, 4);
        let ch = channels(3, 4, seed);
        let q = ReflectCoefficients { q: complex_vec(&q) };
        let w = Beamformer { w: complex_vec(&w) };
        let rotated = Beamformer { w: &w.w * Complex64::from_polar(1.0, phase) };
        let (a, b) = (secrecy_rate(&ch, &w, &q, &p), secrecy_rate(&ch, &rotated, &q, &p));
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn secrecy_rate_is_antisymmetric_in_the_receivers(
        seed in 0u64..1000,
        w in proptest::collection::vec(-1.0f64..1.0, 4),
        q in proptest::collection::vec(-3.0f64..3.0, 6),
    ) {
        let p = params(2, 3);
        let ch = channels(2, 3, seed);
        let swapped = ChannelSet { h_ab: ch.h_ae.clone(), h_ae: ch.h_ab.clone(), h_ib: ch.h_ie.clone(), h_ie: ch.h_ib.clone(), ..ch.clone() };
        let q = ReflectCoefficients { q: complex_vec(&q) };
        let w = Beamformer { w: complex_vec(&w) };
        let (a, b) = (secrecy_rate(&ch, &w, &q, &p), secrecy_rate(&swapped, &w, &q, &p));
        prop_assert!((a + b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn audit_slacks_match_direct_evaluation(
        seed in 0u64..1000,
        w in proptest::collection::vec(-1.0f64..1.0, 4),
        q in proptest::collection::vec(-5.0f64..5.0, 6),
    ) {
        let p = params(2, 3);
        let ch = channels(2, 3, seed);
        let q = ReflectCoefficients { q: complex_vec(&q) };
        let w = Beamformer { w: complex_vec(&w) };
        let report = audit_constraints(&ch, &w, &q, &p);
        let transmit: f64 = w.w.iter().map(|z| z.norm_sqr()).sum();
        let mut amplified = 0.0;
        for i in 0..3 {
            let incident: Complex64 = (0..2).map(|k| ch.h_ai[(i, k)] * w.w[k]).sum();
            amplified += q.q[i].norm_sqr() * (incident.norm_sqr() + p.sigma2_i);
        }
        prop_assert!((report.transmit_slack - (p.p_t - transmit)).abs() <= 1e-9);
        prop_assert!((report.ris_power_slack - (p.p_i - amplified)).abs() <= 1e-9 * (1.0 + amplified));
        prop_assert!((ris_power(&ch, &w, &q, &p) - amplified).abs() <= 1e-9 * (1.0 + amplified));
        for i in 0..3 {
            prop_assert!((report.element_slacks[i] - (p.eta[i] - q.q[i].norm())).abs() <= 1e-12);
        }
    }

    #[test]
    fn surrogate_minorizes_and_touches_at_the_anchor(
        seed in 0u64..1000,
        w in proptest::collection::vec(-1.0f64..1.0, 4),
        anchor in proptest::collection::vec(-3.0f64..3.0, 6),
        other in proptest::collection::vec(-3.0f64..3.0, 6),
        mix in proptest::collection::vec(-1.0f64..1.0, 32),
        t in 0.0f64..1.0,
    ) {
        let p = params(2, 3);
        let ch = channels(2, 3, seed);
        let m = build_lifted(&ch, &Beamformer { w: complex_vec(&w) }, &p).unwrap();
        let a = lift(&complex_vec(&anchor));
        // Any PSD matrix with the corner pinned to one.
        let mut v = lift(&complex_vec(&other)).scale(t).add(&psd(&mix, 4).scale(1.0 - t)).into_matrix();
        let corner = v[(3, 3)].re;
        let extra = HermitianMatrix::from_real_diagonal(&[0.0, 0.0, 0.0, (1.0 - corner).max(0.0)]);
        v = (HermitianMatrix::hermitian_part(&v).add(&extra)).into_matrix();
        let corner = v[(3, 3)].re;
        let v = HermitianMatrix::hermitian_part(&(v / Complex64::new(corner, 0.0)));
        prop_assert!(m.h_ib.inner(&v) >= p.sigma2_b * (1.0 - 1e-12));
        prop_assert!(m.h_ie.inner(&v) >= p.sigma2_e * (1.0 - 1e-12));
        let exact = lifted_objective(&v, &m);
        prop_assert!(surrogate_value(&v, &a, &m) <= exact + 1e-9 * (1.0 + exact.abs()));
        let at = lifted_objective(&a, &m);
        prop_assert!((surrogate_value(&a, &a, &m) - at).abs() <= 1e-9 * (1.0 + at.abs()));
    }

    #[test]
    fn lp_over_psd_scales_with_its_data(diag in proptest::collection::vec(0.1f64..2.0, 3), c in 0.1f64..10.0) {
        let build = |s: f64| {
            let mut p = ConicProblem::new(vec![3]);
            p.add_objective(0, Coefficient::Dense(HermitianMatrix::from_real_diagonal(&diag).scale(s)), 1.0);
            p.add_constraint(LinearForm::single(0, Coefficient::Identity), Relation::LessEq, s);
            p
        };
        let opts = SolverOptions::default();
        let base = solve(&build(1.0), &opts).unwrap().objective;
        let scaled = solve(&build(c), &opts).unwrap().objective;
        prop_assert!((scaled - c * c * base).abs() <= 1e-5 * c * c * base);
    }

    #[test]
    fn sweep_values_must_increase(a in -20.0f64..20.0, b in -20.0f64..20.0) {
        prop_assume!(a >= b);
        let text = config_text(&format!("{a}, {b}"));
        prop_assert!(parse_config(&text).is_err());
    }

    #[test]
    fn increasing_sweep_values_parse_back(mut xs in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let listed: Vec<String> = xs.iter().map(|x| x.to_string()).collect();
        let cfg = parse_config(&config_text(&listed.join(", "))).unwrap();
        let values: Vec<f64> = cfg.points.iter().map(|p| p.value).collect();
        prop_assert_eq!(values, xs);
    }
}

fn config_text(values: &str) -> String {
    format!(
        "geometry.alice_pos = 0, 0\ngeometry.bob_pos = 150, 0\ngeometry.eve_pos = 145, 0\ngeometry.ris_pos = 40, 40\n\
         system.m = 2\nsystem.n = 2\nsystem.pi_dbm = 30\nsystem.eta2_db = 20\nsystem.noise_dbm = -95\n\
         sweep.variable = P_T_dBm\nsweep.values = {values}\n"
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn alternating_optimization_never_loses_rate(seed in 0u64..10_000) {
        let p = SystemParams::uniform(2, 3, 1.0, 1.0, 10.0, 3.1623e-13).unwrap();
        let ch = channels(2, 3, seed);
        let run = alternating_optimize(&ch, &p, &AoConfig::default()).unwrap();
        for pair in run.sr_trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-9);
        }
        prop_assert!(audit_constraints(&ch, &run.w, &run.q, &p).worst_violation() <= 1e-7);
    }
}

#[test]
fn identical_problems_solve_identically() {
    let mut p = ConicProblem::new(vec![3, 1]);
    p.add_objective(0, Coefficient::Dense(HermitianMatrix::from_real_diagonal(&[0.3, -0.2, 0.5])), 1.0);
    p.add_log(0.7, LinearForm::single(0, Coefficient::Identity));
    p.add_objective(1, Coefficient::Unit(0), -0.1);
    p.add_log(1.0, LinearForm::single(1, Coefficient::Unit(0)));
    p.add_constraint(LinearForm::single(0, Coefficient::Identity), Relation::LessEq, 2.0);
    let opts = SolverOptions::default();
    let (a, b) = (solve(&p, &opts).unwrap(), solve(&p, &opts).unwrap());
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    for (x, y) in a.blocks.iter().zip(&b.blocks) {
        assert_eq!(x.as_matrix(), y.as_matrix());
    }
}
