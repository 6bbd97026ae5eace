use super::*;
use crate::linalg::hermitian_part;
use crate::scenario::{ConfigFile, Scenario};
use rand::Rng;
use proptest::prelude::*;

fn small_config(xi: f64) -> SystemConfig {
    let mut f = ConfigFile::default();
    f.n_tx = Some(2);
    f.n_tz = Some(2);
    f.n_rx = Some(3);
    f.n_rz = Some(3);
    f.users = Some(2);
    f.targets = Some(1);
    f.scatterers = Some(2);
    let mut cfg = f.into_config().unwrap();
    cfg.xi = xi;
    cfg
}

fn random_psd(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> CMat {
    let a = complex_gaussian(n, n, 1.0, rng);
    hermitian_part(&(&a * a.adjoint())) * c(scale, 0.0)
}

struct Fixture {
    cfg: SystemConfig,
    channels: ChannelSet,
    rho: Vec<f64>,
}

impl Fixture {
    fn new(cfg: SystemConfig, seed: u64) -> Fixture {
        let channels = ChannelSet::for_scenario(&Scenario::new(cfg.clone(), seed)).unwrap();
        let rho = vec![0.5; cfg.users];
        Fixture { cfg, channels, rho }
    }

    fn problem(&self) -> Problem<'_> {
        Problem { config: &self.cfg, channels: &self.channels, rho: &self.rho, iota: self.cfg.iota }
    }
}

#[test]
fn minorant_exact_at_expansion_and_below_elsewhere() {
    let fx = Fixture::new(small_config(0.5), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4;
    let w_e: Vec<CMat> = (0..2).map(|_| random_psd(n, 5.0, &mut rng)).collect();
    let r_e = random_psd(n, 2.0, &mut rng);
    let terms = linearize(&fx.channels, fx.cfg.sigma_c2, &w_e, &r_e);
    for k in 0..2 {
        let (m, e) = (terms.minorant(k, 0, &w_e, &r_e), terms.exact(k, 0, &w_e, &r_e));
        assert!((m - e).abs() < 1e-10 * e.abs().max(1.0), "{m} vs {e}");
    }
    for _ in 0..100 {
        let w: Vec<CMat> = (0..2).map(|_| random_psd(n, rng.random_range(0.0..20.0), &mut rng)).collect();
        let r = random_psd(n, rng.random_range(0.0..10.0), &mut rng);
        for k in 0..2 {
            assert!(terms.minorant(k, 0, &w, &r) <= terms.exact(k, 0, &w, &r) + 1e-10);
        }
    }
}

#[test]
fn scalar_linearisation_example() {
    // one antenna, σ² = 1, the target sees nothing: B = R + 1, C = D = 1
    let one = CMat::identity(1, 1);
    let terms = LinearizedTerms {
        sigma2: 1.0,
        q_users: vec![one.clone()],
        q_targets: vec![CMat::zeros(1, 1)],
        b_e: vec![1.0],
        d_e: vec![1.0],
    };
    let w = [CMat::zeros(1, 1)];
    let r = one.clone();
    // log2 A − (log2 1 + (2 − 1)/ln 2) with A = 2
    let m = terms.minorant(0, 0, &w, &r);
    assert!((m - (1.0 - 1.0 / LN_2)).abs() < 1e-12);
    assert!((1.0 / LN_2 - 1.4427).abs() < 1e-4);
    assert!(m <= terms.exact(0, 0, &w, &r));
}

#[test]
fn default_latency_floor_is_2_75_ghz() {
    let cfg = SystemConfig::default();
    assert!((cfg.min_cpu_frequency() - 2.75e9).abs() < 1.0);
    let fx = Fixture::new(small_config(0.5), 1);
    let pb = fx.problem();
    let x0 = interior_point(&pb).unwrap();
    let (sol, _) = sca_iterate(&pb, &x0, 2, 1e-4).unwrap();
    for f in &sol.cpu {
        assert!(*f >= 2.75e9 * (1.0 - 1e-9));
    }
}

#[test]
fn crb_drops_out_of_the_active_set_when_loose() {
    let tight = {
        let fx = Fixture::new(small_config(0.5), 2);
        let pb = fx.problem();
        let (sol, _) = sca_iterate(&pb, &interior_point(&pb).unwrap(), 2, 1e-4).unwrap();
        sol.active
    };
    for xi in [1e6, f64::INFINITY] {
        let fx = Fixture::new(small_config(xi), 2);
        let pb = fx.problem();
        let (sol, _) = sca_iterate(&pb, &interior_point(&pb).unwrap(), 2, 1e-4).unwrap();
        assert!(!sol.active.iter().any(|a| a == "crb"), "xi={xi}: {:?}", sol.active);
        assert!(sol.active.iter().any(|a| a.starts_with("secrecy")));
    }
    assert!(tight.iter().any(|a| a == "power"), "{tight:?}");
}

#[test]
fn infeasible_crb_is_reported_at_assembly() {
    let fx = Fixture::new(small_config(1e-12), 0);
    let pb = fx.problem();
    let w = vec![CMat::identity(4, 4); 2];
    let terms = linearize(&fx.channels, fx.cfg.sigma_c2, &w, &CMat::identity(4, 4));
    match assemble_subproblem(&terms, &pb) {
        Err(Error::Infeasible(rep)) => assert_eq!(rep.constraint, "crb"),
        other => panic!("expected an infeasibility report, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn sca_trace_is_monotone_and_stationary_start_stops() {
    let fx = Fixture::new(small_config(0.5), 4);
    let pb = fx.problem();
    let x0 = interior_point(&pb).unwrap();
    let (sol, trace) = sca_iterate(&pb, &x0, 8, 1e-6).unwrap();
    let tol = fx.cfg.tol.kkt_tol;
    for w in trace.windows(2) {
        assert!(w[1].exact >= w[0].exact - tol * w[0].exact.abs().max(1.0), "{trace:?}");
        assert!(w[1].zeta >= w[0].zeta - tol * w[0].zeta.abs().max(1.0), "{trace:?}");
    }
    // the minorant is exact at the expansion point, so ζ never exceeds the exact value
    for e in &trace {
        assert!(e.zeta <= e.exact + 1e-6);
    }
    let (_, again) = sca_iterate(&pb, &sol, 8, 1e-2).unwrap();
    assert_eq!(again.len(), 1);
}

#[test]
fn rank_one_input_gives_its_principal_vector() {
    let fx = Fixture::new(small_config(f64::INFINITY), 5);
    let pb = fx.problem();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vecs: Vec<CVec> = (0..2).map(|_| complex_gaussian(4, 1, 1.0, &mut rng).column(0).into_owned()).collect();
    let mut sol = interior_point(&pb).unwrap();
    sol.w = vecs.iter().map(outer).collect();
    let out = gaussian_randomize(&pb, &sol, 20, 9).unwrap();
    assert!(out.feasible);
    assert!((out.objective - out.relaxed_objective).abs() < 1e-9 * out.relaxed_objective.abs().max(1.0), "{} vs {}", out.objective, out.relaxed_objective);
    for (v, w) in out.w_vec.iter().zip(&sol.w) {
        assert!((outer(v) - w).norm() < 1e-9 * w.norm());
    }
}

#[test]
fn more_samples_never_hurt_and_stay_below_the_relaxation() {
    for seed in 0..3 {
        let fx = Fixture::new(small_config(0.5), seed);
        let pb = fx.problem();
        let (sol, _) = sca_iterate(&pb, &interior_point(&pb).unwrap(), 3, 1e-4).unwrap();
        let few = gaussian_randomize(&pb, &sol, 10, seed).unwrap();
        let many = gaussian_randomize(&pb, &sol, 20, seed).unwrap();
        assert!(few.feasible && many.feasible);
        assert!(many.objective >= few.objective);
        assert!(many.surrogate <= sol.zeta + 1e-9 * sol.zeta.abs().max(1.0));
        let rx = many.w_vec.iter().fold(many.r.clone(), |acc, w| acc + outer(w));
        let crb = crb_extended(&rx, fx.cfg.sigma_r2, fx.cfg.frames, fx.cfg.n_rx, fx.cfg.n_rz).unwrap();
        assert!(crb <= fx.cfg.xi * (1.0 + 1e-9), "crb {crb}");
    }
}

#[test]
fn interior_point_is_strictly_feasible() {
    let fx = Fixture::new(small_config(0.5), 6);
    let pb = fx.problem();
    let x0 = interior_point(&pb).unwrap();
    let terms = linearize(&fx.channels, fx.cfg.sigma_c2, &x0.w, &x0.r);
    let sp = assemble_subproblem(&terms, &pb).unwrap();
    let x = start_point(&sp, &pb, &x0);
    assert!(sp.program.check_strict(x.as_slice()).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minorant_is_a_lower_bound(seed in 0u64..1000, scale_w in 0.0..50.0f64, scale_r in 0.0..50.0f64) {
        let fx = Fixture::new(small_config(0.5), seed % 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_e: Vec<CMat> = (0..2).map(|_| random_psd(4, 3.0, &mut rng)).collect();
        let r_e = random_psd(4, 1.0, &mut rng);
        let terms = linearize(&fx.channels, fx.cfg.sigma_c2, &w_e, &r_e);
        let w: Vec<CMat> = (0..2).map(|_| random_psd(4, scale_w, &mut rng)).collect();
        let r = random_psd(4, scale_r, &mut rng);
        for k in 0..2 {
            prop_assert!(terms.minorant(k, 0, &w, &r) <= terms.exact(k, 0, &w, &r) + 1e-10);
        }
    }
}
