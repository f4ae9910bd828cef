use proptest::prelude::*;
use unlearn_core::data::{GlmLaw, ResponseLaw};
use unlearn_core::faer::Col;
use unlearn_core::metrics::{ged_estimate, loss_gaps};
use unlearn_core::rng::stream;
use unlearn_core::LossFamily;

/// `E ½|UV|` for jointly Gaussian `(U, V)` with zero means.
fn half_abs_product_mean(var_u: f64, var_v: f64, cov: f64) -> f64 {
    let (su, sv) = (var_u.sqrt(), var_v.sqrt());
    let rho = cov / (su * sv);
    su * sv * ((1.0 - rho * rho).sqrt() + rho * rho.asin()) / std::f64::consts::PI
}

#[test]
fn squared_loss_ged_matches_gaussian_closed_form() {
    let (p, n, sigma) = (8, 50, 0.7);
    let beta_star = Col::from_fn(p, |k| (k as f64 - 3.5) * 0.4);
    let law = GlmLaw {
        beta_star: beta_star.clone(),
        design_n: n,
        response: ResponseLaw::Gaussian { sigma },
    };
    let a = Col::from_fn(p, |k| beta_star[k] + 0.3 * ((k % 3) as f64 - 1.0));
    let b = Col::from_fn(p, |k| beta_star[k] - 0.2 * (k as f64 / p as f64));
    // ½|(y−x·a)² − (y−x·b)²| = ½|u v| with u = xᵀ(a−b), v = xᵀ(2β*−a−b) + 2σz.
    let delta = &a - &b;
    let w = &beta_star * 2.0 - &a - &b;
    let nf = n as f64;
    let var_u = delta.squared_norm_l2() / nf;
    let var_v = w.squared_norm_l2() / nf + 4.0 * sigma * sigma;
    let cov = (delta.transpose() * &w) / nf;
    let want = half_abs_product_mean(var_u, var_v, cov);

    let est = ged_estimate(LossFamily::Squared, &a, &b, &law, 100_000, &mut stream(3)).unwrap();
    assert!(
        (est.mean - want).abs() <= 3.0 * est.std_error,
        "estimate {} ± {} vs closed form {want}",
        est.mean,
        est.std_error
    );
}

#[test]
fn ged_is_deterministic_per_seed() {
    let law = GlmLaw {
        beta_star: Col::from_fn(4, |k| k as f64),
        design_n: 20,
        response: ResponseLaw::Bernoulli,
    };
    let a = Col::from_fn(4, |k| k as f64 * 0.9);
    let b = Col::from_fn(4, |k| k as f64 * 1.1);
    let e1 = ged_estimate(LossFamily::Logistic, &a, &b, &law, 500, &mut stream(8)).unwrap();
    let e2 = ged_estimate(LossFamily::Logistic, &a, &b, &law, 500, &mut stream(8)).unwrap();
    assert_eq!(e1, e2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaps_obey_the_triangle_inequality(
        a in prop::collection::vec(-2.0f64..2.0, 5),
        b in prop::collection::vec(-2.0f64..2.0, 5),
        c in prop::collection::vec(-2.0f64..2.0, 5),
        seed in any::<u64>(),
        logistic in any::<bool>(),
    ) {
        let (loss, response) = if logistic {
            (LossFamily::Logistic, ResponseLaw::Bernoulli)
        } else {
            (LossFamily::Squared, ResponseLaw::Gaussian { sigma: 1.0 })
        };
        let law = GlmLaw { beta_star: Col::from_fn(5, |k| a[k] + c[k]), design_n: 10, response };
        let a = Col::from_fn(5, |k| a[k]);
        let b = Col::from_fn(5, |k| b[k]);
        let c = Col::from_fn(5, |k| c[k]);
        let ab = loss_gaps(loss, &a, &b, &law, 200, &mut stream(seed)).unwrap();
        let bc = loss_gaps(loss, &b, &c, &law, 200, &mut stream(seed)).unwrap();
        let ac = loss_gaps(loss, &a, &c, &law, 200, &mut stream(seed)).unwrap();
        for i in 0..200 {
            prop_assert!(ac[i] <= ab[i] + bc[i] + 1e-12 * (1.0 + ab[i] + bc[i]));
        }
        let sum: f64 = ab.iter().sum::<f64>() + bc.iter().sum::<f64>();
        prop_assert!(ac.iter().sum::<f64>() <= sum * (1.0 + 1e-12) + 1e-12);
    }
}
