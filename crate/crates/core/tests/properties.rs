use std::f64::consts::PI;
use std::path::Path;

use dispersive_breakup::catalog::{bracket_invariants, bracket_test_field};
use dispersive_breakup::diagnostics::{linear_fit, loglog_fit};
use dispersive_breakup::hamiltonian::{hf_density, poisson_bracket};
use dispersive_breakup::hopf::{critical_point, hopf_solve, InitialData};
use dispersive_breakup::io::{ModelConfig, Table};
use dispersive_breakup::{PeriodicGrid, SmoothFn};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e300f64..1e300, -1.0f64..1.0, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_text_is_bitwise_lossless(rows in prop::collection::vec(prop::collection::vec(finite(), 3), 0..20)) {
        let mut t = Table::new("t", &["a", "b", "c"]);
        for r in &rows {
            t.push(r.clone());
        }
        let back = Table::parse("t", &t.to_text(), Path::new("t.dat")).unwrap();
        prop_assert_eq!(back.rows.len(), rows.len());
        for (a, b) in back.rows.iter().zip(&rows) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn model_strings_round_trip(n in 1u32..8, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        for m in [ModelConfig::GenKdv { n }, ModelConfig::Kawahara { alpha: a, beta: b }, ModelConfig::Kdv2 { alpha: a }] {
            let s = match &m {
                ModelConfig::GenKdv { n } => format!("genkdv:{n}"),
                ModelConfig::Kawahara { alpha, beta } => format!("kawahara:{alpha},{beta}"),
                ModelConfig::Kdv2 { alpha } => format!("kdv2:{alpha}"),
                _ => unreachable!(),
            };
            prop_assert_eq!(s.parse::<ModelConfig>().unwrap(), m);
        }
    }

    #[test]
    fn spectral_derivative_is_exact_on_trig_polynomials(
        coef in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..10),
        order in 1u32..4,
    ) {
        let l = 3.0;
        let g = PeriodicGrid::new(l, 64).unwrap();
        let f = |x: f64, m: u32| -> f64 {
            coef.iter().enumerate().map(|(k, (a, b))| {
                let w = PI * (k + 1) as f64 / l;
                let ph = w * x + m as f64 * PI / 2.0;
                w.powi(m as i32) * (a * ph.cos() + b * ph.sin())
            }).sum()
        };
        let d = g.sample(|x| f(x, 0)).derivative(order).unwrap();
        let exact = g.sample(|x| f(x, order));
        let scale = (PI * 10.0 / l).powi(order as i32) * 10.0;
        let err = d.values.iter().zip(&exact.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err < 1e-12 * scale, "{err:e}");
    }

    #[test]
    fn power_laws_are_recovered(p in -3.0f64..5.0, c in 1e-3f64..1e3) {
        let eps: Vec<f64> = (0..7).map(|j| 10f64.powf(-1.0 - 0.25 * j as f64)).collect();
        let err: Vec<f64> = eps.iter().map(|e| c * e.powf(p)).collect();
        let fit = loglog_fit(&eps, &err).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-10);
        prop_assert!((fit.intercept - c.log10()).abs() < 1e-8);
        let lin = linear_fit(&eps, &eps.iter().map(|e| 2.0 * e + c).collect::<Vec<_>>()).unwrap();
        prop_assert!((lin.slope - 2.0).abs() < 1e-8);
    }

    #[test]
    fn hopf_solution_satisfies_the_implicit_relation(x in -10.0f64..10.0, frac in 0.0f64..0.95, n in 1i32..6) {
        let data = InitialData::sech2();
        let a = SmoothFn::monomial(6.0, n);
        let t = frac * critical_point(&a, &data).unwrap().t_c;
        let u = hopf_solve(&a, &data, x, t, 1e-14).unwrap().u;
        let back = data.phi.eval(x - t * a.eval(u));
        prop_assert!((u - back).abs() < 1e-12, "{u} vs {back}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn brackets_are_antisymmetric_and_mass_is_a_casimir(
        fc in prop::collection::vec(-1.0f64..1.0, 4..6),
        gc in prop::collection::vec(-1.0f64..1.0, 4..6),
        eps in 0.02f64..0.3,
    ) {
        let g = PeriodicGrid::new(PI, 64).unwrap();
        let u = bracket_test_field(&g);
        let (c, p) = bracket_invariants();
        let hf = hf_density(&SmoothFn::polynomial(fc), &c, &p);
        let hg = hf_density(&SmoothFn::polynomial(gc), &c, &p);
        let fg = poisson_bracket(&hf, &hg, &u, eps).unwrap();
        let gf = poisson_bracket(&hg, &hf, &u, eps).unwrap();
        prop_assert!((fg + gf).abs() < 1e-12, "{fg:e} {gf:e}");
        let mass = hf_density(&SmoothFn::identity(), &c, &p);
        prop_assert!(poisson_bracket(&mass, &hf, &u, eps).unwrap().abs() < 1e-12);
    }
}
