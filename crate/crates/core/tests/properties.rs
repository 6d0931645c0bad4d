use proptest::prelude::*;

use mcgraph_core::analysis::{
    ensemble_stats, fluct_variance, fluid_limit, riemann_convergence, scale_trajectory, FluctuationPath,
    ScaledTrajectory,
};
use mcgraph_core::engine::{run_ensemble, simulate, EnsembleSpec, RecordMode};
use mcgraph_core::io::{read_trajectory, write_trajectory};
use mcgraph_core::martingale::martingale_path;
use mcgraph_core::mass::{generalized_er, limit_params_general, LimitParams, MassVector};
use mcgraph_core::oracle::exact_k_distribution;
use mcgraph_core::rng::StreamSeed;

fn small_masses() -> impl Strategy<Value = MassVector> {
    proptest::collection::vec(0.05f64..3.0, 1..=6).prop_map(|m| {
        let n = m.len();
        MassVector::new(m, n).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_law_stays_in_simplex(mv in small_masses(), t in 0.0f64..3.0) {
        let d = exact_k_distribution(&mv, t).unwrap();
        prop_assert!(d.probs.iter().all(|&p| p >= 0.0));
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let later = exact_k_distribution(&mv, t + 0.5).unwrap();
        prop_assert!(later.mean() <= d.mean() + 1e-9);
    }

    #[test]
    fn scaling_masses_is_a_time_change(mv in small_masses(), t in 0.0f64..1.0, a in 0.3f64..3.0) {
        let scaled = mv.scaled(a).unwrap();
        let p = exact_k_distribution(&scaled, t).unwrap();
        let q = exact_k_distribution(&mv, a * a * t).unwrap();
        for (x, y) in p.probs.iter().zip(&q.probs) {
            prop_assert!((x - y).abs() < 1e-8, "{:?} vs {:?}", p.probs, q.probs);
        }
    }

    #[test]
    fn martingale_path_identities(
        n in 2usize..80,
        thetas in proptest::collection::vec(0.2f64..4.0, 0..4),
        horizon in 0.0f64..0.9,
        seed in 0u64..500,
    ) {
        let mv = generalized_er(n, &thetas).unwrap();
        let t_max = horizon / mv.summary().sigma2;
        let tr = simulate(&mv, t_max, StreamSeed::new(seed, 1), &RecordMode::Full).unwrap();
        let p = martingale_path(&tr, &mv).unwrap();
        prop_assert_eq!(p.m[0], 0.0);
        prop_assert!(p.angle.windows(2).all(|w| w[1] >= w[0]));
        for i in 0..p.times.len() {
            prop_assert_eq!(p.bracket[i] as usize, mv.kappa() - p.k(i));
            prop_assert_eq!(p.k(i), tr.k_at(p.times[i]).unwrap());
        }
        let v = p.value_at(t_max).unwrap();
        prop_assert_eq!(v.bracket as usize, mv.kappa() - tr.k_at(t_max).unwrap());
        prop_assert!((v.m - (v.angle - v.bracket as f64)).abs() < 1e-12);
    }

    #[test]
    fn scaling_at_zero_is_exact(
        n in 2usize..500,
        thetas in proptest::collection::vec(0.2f64..4.0, 0..10),
        varkappa in 1.0f64..1000.0,
        varsigma in 1.0f64..1000.0,
        alpha in 0.0f64..=1.0,
    ) {
        let mv = generalized_er(n, &thetas).unwrap();
        let params = LimitParams::new(varkappa, varsigma, alpha, 0.0, 0.0).unwrap();
        let tr = simulate(&mv, 0.0, StreamSeed::new(1, 0), &RecordMode::Full).unwrap();
        let s = scale_trajectory(&tr, &params, &[0.0]).unwrap();
        let kappa = mv.kappa() as f64;
        prop_assert_eq!(s.scaled_k[0], kappa / varkappa);
        prop_assert_eq!(s.fluct.z[0], varkappa.sqrt() * (kappa / varkappa - 1.0));
        let (_, diag) = limit_params_general(&mv.summary(), varkappa, varsigma, alpha, 0.0, 0.0).unwrap();
        prop_assert!((diag.kappa_discrepancy - s.fluct.z[0]).abs() <= 1e-12 * s.fluct.z[0].abs().max(1.0));
    }

    #[test]
    fn limit_curves_are_affine(alpha in 0.0f64..=1.0, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let p = LimitParams::new(10.0, 10.0, alpha, 0.0, 0.0).unwrap();
        let mid = (s + t) / 2.0;
        prop_assert!((fluid_limit(mid, &p) - (fluid_limit(s, &p) + fluid_limit(t, &p)) / 2.0).abs() < 1e-14);
        prop_assert!((fluid_limit(t, &p) - fluid_limit(s, &p) + alpha / 2.0 * (t - s)).abs() < 1e-14);
        prop_assert!((fluct_variance(t, &p) - alpha * t / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ensemble_variances_non_negative(zs in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 2..40)) {
        let paths: Vec<ScaledTrajectory> = zs
            .iter()
            .map(|&(a, b)| ScaledTrajectory {
                scaled_k: vec![1.0, 0.5],
                fluct: FluctuationPath { grid: vec![0.1, 0.2], z: vec![a, b] },
            })
            .collect();
        let s = ensemble_stats(&paths).unwrap();
        prop_assert!(s.var_z.iter().all(|&v| v >= 0.0));
        prop_assert!(s.se_var_z.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(s.rep_count, paths.len());
    }

    #[test]
    fn constant_phi_has_exact_sums(c in 0.0f64..10.0, n in 1usize..2000) {
        let t = riemann_convergence(|_| c, c, &[n]).unwrap();
        prop_assert!(t.rows[0].scaled_error <= 1e-10 * c.max(1.0) * (n as f64).sqrt());
    }

    #[test]
    fn trajectory_csv_round_trips(n in 2usize..200, seed in 0u64..1000, grid_mode in any::<bool>()) {
        let mv = generalized_er(n, &[2.0, 0.5]).unwrap();
        let t_max = 0.8 / n as f64;
        let mode = if grid_mode { RecordMode::Grid(vec![0.0, t_max / 3.0, t_max]) } else { RecordMode::Full };
        let tr = simulate(&mv, t_max, StreamSeed::new(seed, 2), &mode).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &tr).unwrap();
        let back = read_trajectory(std::str::from_utf8(&buf).unwrap(), tr.initial, tr.t_max, tr.seed).unwrap();
        prop_assert_eq!(back, tr);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ensembles_ignore_worker_count(n in 10usize..300, seed in any::<u64>(), workers in 2usize..9) {
        let mv = generalized_er(n, &[3.0]).unwrap();
        let spec = |w| EnsembleSpec {
            masses: &mv,
            t_max: 0.9 / n as f64,
            master_seed: seed,
            reps: 24,
            mode: RecordMode::Full,
            workers: w,
        };
        prop_assert_eq!(run_ensemble(&spec(1)).unwrap(), run_ensemble(&spec(workers)).unwrap());
    }
}
