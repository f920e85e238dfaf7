use mixrate_core::analysis::measure::EmpiricalMeasure;
use mixrate_core::analysis::quadrature::{pairwise_sum, QuadratureSpec};
use mixrate_core::analysis::default_quadrature;
use mixrate_core::approx::{conjugate, optimal_nu, rate_exponent, theorem_constant_k, BoundInputs, MixtureModel};
use mixrate_core::estimate::frank_wolfe::fit_weights_frank_wolfe;
use mixrate_core::estimate::{convex_sup_check, gram_matrix, quadratic_risk, SymMatrix};
use mixrate_core::kernels::{dilate, dilated_lp_norm, KernelDensity, KernelFamily};
use mixrate_core::points::PointSet;
use mixrate_core::targets::{translation_modulus, TargetDensity};
use proptest::prelude::*;

fn inputs(p: f64, alpha: f64, d: usize, k1: f64, k2: f64, phi: f64, c: f64) -> BoundInputs {
    BoundInputs {
        p,
        alpha,
        d,
        k1,
        k2,
        phi_norm_p: phi,
        c_p: c,
    }
}

/// 3‖φ‖_pC_p ν^{d/q} m^{−r} + K₁K₂ν^{−α}, r = ½ for p ≥ 2 and 1/q below.
fn two_term_bound(i: &BoundInputs, nu: f64, m: usize) -> f64 {
    let q = conjugate(i.p);
    let r = if i.p >= 2.0 { 0.5 } else { 1.0 / q };
    3.0 * i.phi_norm_p * i.c_p * nu.powf(i.d as f64 / q) * (m as f64).powf(-r) + i.k1 * i.k2 * nu.powf(-i.alpha)
}

fn family() -> impl Strategy<Value = KernelFamily> {
    prop::sample::select(KernelFamily::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_is_negative_and_above_minus_half(p in 1.05f64..6.0, alpha in 0.05f64..=1.0, d in 1usize..5) {
        let e = rate_exponent(p, alpha, d).unwrap();
        prop_assert!(e < 0.0 && e > -0.5 - 1e-12);
    }

    #[test]
    fn optimal_nu_minimises_bound_and_matches_k(
        p in 1.1f64..5.0,
        alpha in 0.1f64..=1.0,
        d in 1usize..4,
        k1 in 0.1f64..3.0,
        k2 in 0.1f64..3.0,
        phi in 0.1f64..3.0,
        c in 0.5f64..3.0,
        m in 1usize..10_000,
    ) {
        let i = inputs(p, alpha, d, k1, k2, phi, c);
        let nu = optimal_nu(m, &i).unwrap();
        let at = two_term_bound(&i, nu, m);
        for f in [0.9, 0.99, 1.01, 1.1] {
            prop_assert!(at <= two_term_bound(&i, nu * f, m) * (1.0 + 1e-12));
        }
        let k = theorem_constant_k(&i).unwrap();
        let e = rate_exponent(p, alpha, d).unwrap();
        prop_assert!((k * (m as f64).powf(e) - at).abs() <= 1e-9 * at);
    }

    #[test]
    fn dilation_preserves_mass_and_scales_norm(fam in family(), nu in 0.2f64..6.0, p in 1.2f64..4.0) {
        let kernel = KernelDensity::new(fam, 1).unwrap();
        let quad = QuadratureSpec::symmetric(kernel.axis_radius() / nu, 4096);
        let k = dilate(&kernel, nu).unwrap();
        let mass = quad.integrate(1, |x| k.eval(x)).unwrap();
        prop_assert!((mass - 1.0).abs() < 2e-3, "mass {}", mass);
        if fam != KernelFamily::Uniform {
            let measured = dilated_lp_norm(&kernel, nu, p, &quad).unwrap();
            let predicted = nu.powf(1.0 / conjugate(p)) * kernel.lp_norm(p).unwrap();
            prop_assert!((measured - predicted).abs() <= 1e-4 * predicted);
        }
    }

    #[test]
    fn gram_matrix_is_psd(fam in family(), nu in 0.3f64..8.0, xs in prop::collection::vec(-4.0f64..4.0, 1..10)) {
        let kernel = KernelDensity::new(fam, 1).unwrap();
        let g = gram_matrix(&PointSet::from_scalars(&xs), &kernel, nu).unwrap();
        prop_assert!(g.min_eigenvalue() >= -1e-10 * g.get(0, 0));
    }

    #[test]
    fn frank_wolfe_stays_on_simplex_and_certifies(
        a in prop::collection::vec(-1.0f64..1.0, 16),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        eps in 1e-4f64..1e-1,
    ) {
        let m = 4;
        let mut g = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                g[r * m + c] = (0..m).map(|k| a[k * m + r] * a[k * m + c]).sum::<f64>() + if r == c { 1e-3 } else { 0.0 };
            }
        }
        let g = SymMatrix::from_row_major(m, g).unwrap();
        let fit = fit_weights_frank_wolfe(&g, &b, eps, 100_000).unwrap();
        prop_assert!(fit.certified);
        prop_assert!(fit.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((fit.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(fit.risk_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            prop_assert!(quadratic_risk(&g, &b, &e) >= fit.risk - fit.gap - 1e-12);
        }
    }

    #[test]
    fn gaussian_modulus_is_lipschitz_in_shift(sd in 0.3f64..3.0, y in 0.001f64..3.0, p in 1.2f64..3.0) {
        let f0 = TargetDensity::gaussian(vec![0.0], sd).unwrap();
        let quad = QuadratureSpec::default_for(1, f0.effective_support_radius() + y + 1.0).with_points(8192);
        let modulus = translation_modulus(&f0, &[y], p, &quad).unwrap();
        let k2 = f0.analytic_k2(p).unwrap();
        prop_assert!(modulus <= k2 * y * (1.0 + 1e-6));
    }

    #[test]
    fn mixture_integrates_to_one(
        fam in family(),
        nu in 0.5f64..5.0,
        raw in prop::collection::vec(0.01f64..1.0, 1..6),
    ) {
        let kernel = KernelDensity::new(fam, 1).unwrap();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let locs: Vec<f64> = (0..w.len()).map(|i| i as f64 * 0.7 - 1.0).collect();
        let mix = MixtureModel::new(&kernel, nu, PointSet::from_scalars(&locs), w).unwrap();
        let r = mix.axis_extent();
        let mass = QuadratureSpec::symmetric(r, 8192).integrate(1, |x| mix.eval(x)).unwrap();
        prop_assert!((mass - 1.0).abs() < 2e-3);
    }

    #[test]
    fn pairwise_sum_matches_naive(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let naive: f64 = xs.iter().sum();
        let scale: f64 = xs.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-12 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn convex_combinations_never_exceed_atom_sup(seed in any::<u64>(), nu in 0.5f64..4.0, atoms in 1usize..7) {
        let f0 = TargetDensity::standard_gaussian(1);
        let kernel = KernelDensity::gaussian(1);
        let sample = EmpiricalMeasure::draw(&f0, 200, seed).unwrap();
        let locs = f0.sample(atoms, seed ^ 0x5a5a);
        let quad = default_quadrature(&f0, &kernel, nu);
        let c = convex_sup_check(&sample, &f0, &kernel, nu, &locs, 20, seed.wrapping_add(1), &quad).unwrap();
        prop_assert!(c.all_hold(), "{:?}", c);
    }
}
