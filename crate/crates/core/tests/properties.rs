use proptest::prelude::*;

use elt_tail::bounds::{
    cantelli_bound, chernoff_bound, exceedance_curve, markov_bound, moment_bound, BoundMethod, BoundRequest,
};
use elt_tail::elt::{compress_elt, parse_elt, to_compound_model, write_elt};
use elt_tail::exact::{panjer_pmf, simulate_annual_losses, McConfig};
use elt_tail::{EltRow, EventLossTable, SeverityDistribution};

fn fixed_elt(rows: &[(f64, f64)]) -> EventLossTable {
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, &(r, x))| EltRow::new((i + 1).to_string(), r, SeverityDistribution::point_mass(x).unwrap()).unwrap())
        .collect();
    EventLossTable::new(rows, 1.0).unwrap()
}

fn rows_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((1e-4f64..0.5, 0.0f64..1e7), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compression_conserves_rate_and_mean(rows in rows_strategy(), d in -6i32..=1) {
        let elt = fixed_elt(&rows);
        let c = compress_elt(&elt, d).unwrap();
        let rate: f64 = rows.iter().map(|r| r.0).sum();
        prop_assert!((c.total_rate() - rate).abs() <= 1e-12 * rate);
        let mean: f64 = rows.iter().map(|(r, x)| r * x).sum();
        let compressed: f64 =
            c.rows().iter().map(|r| r.rate * r.severity.fixed_loss().unwrap() * c.loss_unit()).sum();
        let slack = rate * 0.5 * 10f64.powi(-d);
        prop_assert!((mean - compressed).abs() <= slack * (1.0 + 1e-9) + 1e-9 * mean);
    }

    #[test]
    fn compression_is_idempotent(rows in rows_strategy(), d in -6i32..=0) {
        let once = compress_elt(&fixed_elt(&rows), d).unwrap().to_currency().unwrap();
        let twice = compress_elt(&once, d).unwrap().to_currency().unwrap();
        prop_assert_eq!(once.len(), twice.len());
        for (a, b) in once.rows().iter().zip(twice.rows()) {
            prop_assert_eq!(a.severity.fixed_loss(), b.severity.fixed_loss());
            prop_assert!((a.rate - b.rate).abs() <= 1e-15 * a.rate);
        }
    }

    #[test]
    fn csv_round_trip(rows in rows_strategy()) {
        let elt = fixed_elt(&rows);
        let mut buf = Vec::new();
        write_elt(&elt, &mut buf).unwrap();
        let back = parse_elt(buf.as_slice()).unwrap();
        prop_assert_eq!(back, elt);
    }

    #[test]
    fn mixture_weights_and_variance_identity(rows in rows_strategy(), t in 0.1f64..20.0) {
        let m = to_compound_model(&fixed_elt(&rows), t).unwrap();
        let w: f64 = m.components().iter().map(|c| c.0).sum();
        prop_assert!((w - 1.0).abs() < 1e-12);
        // Var(S) = Σ λ_i t x_i²
        let var: f64 = rows.iter().map(|(r, x)| r * t * x * x).sum();
        prop_assert!((m.variance() - var).abs() <= 1e-10 * var.max(1e-300));
    }

    #[test]
    fn bounds_dominate_each_other(rows in prop::collection::vec((0.01f64..2.0, 1.0f64..20.0), 1..6), z in 0.5f64..8.0) {
        let elt = fixed_elt(&rows);
        let m = to_compound_model(&elt, 1.0).unwrap();
        let s = m.mean() + z * m.variance().sqrt();
        let markov = markov_bound(&m, s);
        let moment = moment_bound(&m, s, None).unwrap().value;
        let chernoff = chernoff_bound(&m, s, 1001).unwrap().value;
        prop_assert!(moment <= markov * (1.0 + 1e-12));
        prop_assert!(moment <= chernoff * (1.0 + 1e-9));
        prop_assert!(cantelli_bound(&m, s) <= 1.0);
        // every bound sits above the exact tail from Panjer
        let s_max = s.ceil() as usize + 1;
        let rates: Vec<(u64, f64)> = rows.iter().map(|&(r, x)| (x.round() as u64, r)).collect();
        let rounded = fixed_elt(&rows.iter().map(|&(r, x)| (r, x.round())).collect::<Vec<_>>());
        let mr = to_compound_model(&rounded, 1.0).unwrap();
        let pmf = panjer_pmf(&rates, 1.0, s_max);
        let idx = s.ceil() as usize;
        let tail = 1.0 - pmf[..idx].iter().sum::<f64>();
        for b in [markov_bound(&mr, s), cantelli_bound(&mr, s), moment_bound(&mr, s, None).unwrap().value,
                  chernoff_bound(&mr, s, 1001).unwrap().value] {
            prop_assert!(tail <= b + 1e-12, "tail {} bound {}", tail, b);
        }
    }

    #[test]
    fn bound_curves_are_monotone(rows in rows_strategy()) {
        let m = to_compound_model(&fixed_elt(&rows), 1.0).unwrap();
        let top = m.mean() + 8.0 * m.variance().sqrt();
        prop_assume!(top > 0.0);
        let s: Vec<f64> = (1..=40).map(|i| top * i as f64 / 40.0).collect();
        for method in [BoundMethod::Markov, BoundMethod::Moment] {
            let c = exceedance_curve(&BoundRequest::new(m.clone(), s.clone(), method).unwrap()).unwrap();
            prop_assert!(c.values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn bounds_are_scale_equivariant(rows in prop::collection::vec((0.01f64..2.0, 1.0f64..20.0), 1..6),
                                    z in 0.5f64..6.0, c in 0.01f64..1000.0) {
        let m = to_compound_model(&fixed_elt(&rows), 1.0).unwrap();
        let scaled = m.rescaled(1.0 / c).unwrap();
        let s = m.mean() + z * m.variance().sqrt();
        let a = moment_bound(&m, s, None).unwrap().value;
        let b = moment_bound(&scaled, s * c, None).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300));
        prop_assert!((markov_bound(&m, s) - markov_bound(&scaled, s * c)).abs() < 1e-12);
        prop_assert!((cantelli_bound(&m, s) - cantelli_bound(&scaled, s * c)).abs() < 1e-12);
    }

    #[test]
    fn panjer_pmf_is_a_distribution(rates in prop::collection::vec((0u64..8, 0.01f64..2.0), 1..5), t in 0.1f64..3.0) {
        let pmf = panjer_pmf(&rates, t, 600);
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        let total: f64 = pmf.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        let mean: f64 = pmf.iter().enumerate().map(|(s, p)| s as f64 * p).sum();
        let exact: f64 = rates.iter().map(|(x, r)| *x as f64 * r * t).sum();
        prop_assert!((mean - exact).abs() < 1e-9 * exact.max(1.0));
    }
}

#[test]
fn monte_carlo_mean_and_variance() {
    let elt = EventLossTable::new(
        vec![
            EltRow::new("a", 2.0, SeverityDistribution::gamma(2.0, 0.5).unwrap()).unwrap(),
            EltRow::new("b", 0.5, SeverityDistribution::gamma(1.0, 0.1).unwrap().with_cap(15.0).unwrap()).unwrap(),
        ],
        1.0,
    )
    .unwrap();
    let m = to_compound_model(&elt, 1.0).unwrap();
    let n = 200_000;
    let losses = simulate_annual_losses(&m, &McConfig::new(n, 9)).unwrap();
    let mean = losses.iter().sum::<f64>() / n as f64;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (m.variance() / n as f64).sqrt();
    assert!((mean - m.mean()).abs() < 5.0 * se, "{mean} vs {}", m.mean());
    assert!((var / m.variance() - 1.0).abs() < 0.03, "{var} vs {}", m.variance());
}

#[test]
fn monte_carlo_ignores_thread_count() {
    let m = to_compound_model(&fixed_elt(&[(3.0, 2.0), (0.5, 7.0)]), 1.0).unwrap();
    let cfg = McConfig::new(20_000, 77);
    let parallel = simulate_annual_losses(&m, &cfg).unwrap();
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate_annual_losses(&m, &cfg).unwrap());
    assert_eq!(parallel, serial);
}
