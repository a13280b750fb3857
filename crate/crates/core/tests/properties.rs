use icarl::ar_process::{generate_sequence, sample_context, ContextSpec};
use icarl::baselines::{inner_gd, inner_loss, lstsq_ar_fit};
use icarl::closed_form::{augmented_reduced_loss, eta_star, pe_hessian};
use icarl::harness::{
    render_heatmap, render_lines, Experiment, GradientFlowConfig, HessianConfig, RunConfig, Series,
};
use icarl::numerics::{hdot, sym_eig};
use icarl::{CMatrix, Complex, Mat, Rng};
use proptest::prelude::*;

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex>> {
    prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hdot_is_conjugate_symmetric((a, b) in (1usize..6).prop_flat_map(|n| (complex_vec(n), complex_vec(n)))) {
        let ab = hdot(&a, &b);
        let ba = hdot(&b, &a);
        prop_assert!((ab - ba.conj()).norm() < 1e-12);
        prop_assert!(hdot(&a, &a).im.abs() < 1e-12);
    }

    #[test]
    fn eta_star_minimizes_the_reduced_loss(t_max in 2usize..60, d in 1usize..8, eps in 1e-4..0.1f64) {
        let eta = eta_star(t_max, d).unwrap();
        let at = augmented_reduced_loss(eta, t_max, d);
        prop_assert!(at <= augmented_reduced_loss(eta + eps, t_max, d));
        prop_assert!(at <= augmented_reduced_loss(eta - eps, t_max, d));
    }

    #[test]
    fn pe_hessian_is_symmetric_psd(t in 2usize..14, mu in 4.0..400.0f64) {
        let h = pe_hessian(t, mu).unwrap();
        prop_assert!(h.sub(&h.transpose()).max_abs() < 1e-14);
        let eig = sym_eig(&h).unwrap();
        let top = eig.values.iter().cloned().fold(0.0, f64::max);
        prop_assert!(eig.values.iter().all(|&v| v > -1e-9 * top.max(1.0)));
    }

    #[test]
    fn small_inner_gd_step_descends(seed in any::<u64>(), d in 1usize..4, t in 2usize..12, frac in 0.05..1.0f64) {
        let mut rng = Rng::new(seed);
        let w = sample_context(&ContextSpec::UnitaryDiagonal { d }, &mut rng).unwrap();
        let seq = generate_sequence(&w, t).unwrap();
        // the inner Hessian has spectral norm at most Σ‖s_t‖² = (T−1)d
        let eta = frac / ((t - 1) * d) as f64;
        let start = inner_loss(&CMatrix::zeros(d, d), &seq);
        let gd = inner_gd(&seq, 3, eta).unwrap();
        prop_assert!(gd.losses[0] < start);
        prop_assert!(gd.losses.windows(2).all(|l| l[1] <= l[0] + 1e-12));
    }

    #[test]
    fn least_squares_predicts_orthogonal_sequences(seed in any::<u64>(), d in 1usize..4) {
        let mut rng = Rng::new(seed);
        let w = sample_context(&ContextSpec::GeneralOrthogonal { d }, &mut rng).unwrap();
        let seq = generate_sequence(&w, 3 * d + 2).unwrap();
        let (fit, mse) = lstsq_ar_fit(&seq).unwrap();
        prop_assert!(mse < 1e-8);
        let last = seq.states.last().unwrap();
        prop_assert!(fit.matvec(last).max_abs_diff(&seq.next_state()) < 1e-4);
    }

    #[test]
    fn rng_substreams_are_reproducible(seed in any::<u64>(), label in "[a-z]{1,8}") {
        let root = Rng::new(seed);
        let mut a = root.split(&label);
        let mut b = Rng::new(seed).split(&label);
        let mut other = root.split(&format!("{label}/x"));
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..4).map(|_| other.next_u64()).collect();
        prop_assert_eq!(&xs, &ys);
        prop_assert_ne!(&xs, &zs);
    }

    #[test]
    fn run_configs_round_trip(seed in any::<u64>(), inits in 1usize..50, tol in 1e-9..1e-3f64, ts in prop::collection::vec(2usize..30, 1..4)) {
        for experiment in [
            Experiment::GradientFlow(GradientFlowConfig { inits, tol, ..Default::default() }),
            Experiment::Hessian(HessianConfig { ts: ts.clone(), ..Default::default() }),
        ] {
            let mut cfg = RunConfig::new(experiment);
            cfg.seed = seed;
            let back = RunConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }

    #[test]
    fn svg_rendering_is_deterministic(ys in prop::collection::vec(1e-3..1e3f64, 1..20), log_y in any::<bool>()) {
        let series = vec![Series::new("y", ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect())];
        let a = render_lines(&series, "t", log_y).unwrap();
        prop_assert_eq!(&a, &render_lines(&series, "t", log_y).unwrap());
        prop_assert!(a.contains("<svg") && a.trim_end().ends_with("</svg>"));

        let m = Mat::from_vec(1, ys.len(), ys.clone()).unwrap();
        let h = render_heatmap(&m, "m").unwrap();
        prop_assert_eq!(h.matches("<rect").count() >= ys.len(), true);
    }
}
