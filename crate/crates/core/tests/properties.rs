use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ncreg::datagen::{generate, true_beta, SimSpec};
use ncreg::io::{read_dataset_from, write_dataset_to, ReadOptions};
use ncreg::loss::loss_grad;
use ncreg::solver::cccp_minimize;
use ncreg::{fit_path, Dataset, Family, Penalty, PenaltyKind, ProblemConfig, SolverConfig};

fn kind_strategy() -> impl Strategy<Value = PenaltyKind> {
    (0usize..8).prop_map(|i| PenaltyKind::ALL[i])
}

fn data(family: Family, n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
    let y = Array1::from_shape_fn(n, |i| match family {
        Family::Gaussian => x[[i, 0]] - 0.5 * x[[i, 1]] + rng.random_range(-1.0..1.0),
        Family::Binomial => f64::from(x[[i, 0]] + rng.random_range(-1.5..1.5) > 0.0),
    });
    Dataset::new(x, y).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn penalty_is_nonnegative_nondecreasing_and_below_its_convex_part(
        kind in kind_strategy(),
        lambda in 0.05f64..5.0,
        extra_tau in 0.01f64..5.0,
        gamma in 0.0f64..1.0,
        t in 0.0f64..10.0,
        h in 1e-6f64..1.0,
    ) {
        let spec = Penalty::new(kind, kind.default_tau().max(2.0) + extra_tau, gamma).unwrap().at(lambda).unwrap();
        prop_assert_eq!(spec.value(0.0), 0.0);
        let v = spec.value(t);
        prop_assert!(v >= 0.0);
        prop_assert!(spec.value(t + h) >= v - 1e-12);
        let convex = spec.kappa() * t + 0.5 * spec.convex_curvature() * t * t;
        prop_assert!(v <= convex + 1e-9 * (1.0 + convex));
        prop_assert!((v - convex - spec.concave_part(t)).abs() <= 1e-9 * (1.0 + convex));
    }

    #[test]
    fn concave_part_has_nonincreasing_nonpositive_slope(
        kind in kind_strategy(),
        lambda in 0.05f64..5.0,
        t in 0.0f64..10.0,
        h in 1e-6f64..2.0,
    ) {
        let spec = Penalty::with_defaults(kind).at(lambda).unwrap();
        let a = spec.d_subgrad(t);
        prop_assert!(a <= 1e-12);
        prop_assert!(spec.d_subgrad(t + h) <= a + 1e-12);
        prop_assert!(spec.d_subgrad(-t) == -a || t == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cccp_descends_and_meets_first_order_conditions(
        kind in kind_strategy(),
        binomial in any::<bool>(),
        seed in 0u64..10_000,
        frac in 0.05f64..0.9,
    ) {
        let family = if binomial { Family::Binomial } else { Family::Gaussian };
        let d = data(family, 60, 6, seed);
        let g0 = loss_grad(family, &d, &Array1::zeros(6));
        let pen = Penalty::with_defaults(kind);
        let lambda_max = pen.lambda_for_kappa(g0.iter().fold(0.0f64, |a, g| a.max(g.abs())));
        let spec = pen.at(frac * lambda_max).unwrap();
        let config = SolverConfig::default();
        let all: Vec<usize> = (0..6).collect();
        let fit = cccp_minimize(family, &spec, &d, &config, &Array1::zeros(6), &all);
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        if fit.converged {
            let g = loss_grad(family, &d, &fit.beta);
            for j in 0..6 {
                let b = fit.beta[j];
                let r = if b != 0.0 {
                    (g[j] + b.signum() * spec.grad(b.abs())).abs()
                } else {
                    (g[j].abs() - spec.kappa()).max(0.0)
                };
                prop_assert!(r <= 1e-5, "coordinate {} residual {}", j, r);
            }
        }
    }

    #[test]
    fn path_starts_at_zero_and_stays_finite(
        kind in kind_strategy(),
        binomial in any::<bool>(),
        seed in 0u64..10_000,
    ) {
        let family = if binomial { Family::Binomial } else { Family::Gaussian };
        let d = data(family, 50, 5, seed);
        let config = ProblemConfig { family, n_lambda: 15, ..ProblemConfig::default() };
        let path = fit_path(&Penalty::with_defaults(kind), &d, &config).unwrap();
        let lambda = path.grid.values();
        prop_assert!(lambda.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(path.beta(0).iter().all(|b| *b == 0.0));
        prop_assert!(path.coefficients.iter().all(|b| b.is_finite()));
        for k in 0..path.n_lambda() {
            prop_assert_eq!(path.df[k], path.beta(k).iter().filter(|b| **b != 0.0).count());
        }
    }

    #[test]
    fn dataset_csv_round_trip_is_exact(
        values in proptest::collection::vec(-1e6f64..1e6, 12),
        scale in -300i32..300,
    ) {
        let x = Array2::from_shape_vec((4, 3), values.iter().map(|v| v * 10f64.powi(scale)).collect()).unwrap();
        let y = Array1::from(vec![0.1, -2.0, 1.0 / 3.0, 7e-12]);
        let d = Dataset::new(x, y).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&d, &mut buf, &ReadOptions::default()).unwrap();
        let back = read_dataset_from(buf.as_slice(), &ReadOptions::default()).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    fn simulation_is_reproducible(n in 1usize..40, p in 1usize..12, seed in any::<u64>(), binomial in any::<bool>()) {
        let family = if binomial { Family::Binomial } else { Family::Gaussian };
        let spec = SimSpec::new(n, p, family, seed);
        let a = generate(&spec).unwrap();
        prop_assert_eq!(&a, &generate(&spec).unwrap());
        prop_assert_eq!((a.n(), a.p()), (n, p));
        let beta = true_beta(&spec);
        for j in 0..p {
            prop_assert_eq!(beta[j], 1.0 / (j + 1) as f64);
        }
        if binomial {
            prop_assert!(a.y().iter().all(|v| *v == 0.0 || *v == 1.0));
        }
    }
}
