use sensopt_core::detector::energy_statistic;
use sensopt_core::simenv::empirical_sensed_channels;
use sensopt_core::*;

fn assert_within(est: f64, want: f64, se: f64, k: f64, what: &str) {
    assert!(
        (est - want).abs() <= k * se,
        "{what}: {est} vs {want} (se {se})"
    );
}

#[test]
fn batch_rate_and_nce_match_analytic() {
    for (np, tau) in [(1, 0.014), (3, 0.0111), (5, 0.02), (15, 0.012)] {
        let scn = Scenario::with_channels(np, &DEFAULT_P_FREE).unwrap();
        let st = simulate_batch(
            &scn,
            tau,
            DecisionMode::ClosedForm,
            100_000,
            np as u64,
            Execution::default(),
        )
        .unwrap();
        let p = scn.throughput(tau, None).unwrap();
        assert_within(st.mean_rate, p.rate, st.std_error_rate(), 4.0, "rate");
        assert_within(st.mean_sensed, p.nce, st.std_error_sensed(), 4.0, "nce");
    }
}

#[test]
fn windowed_estimate_at_table_defaults() {
    let scn = Scenario::default();
    let tau = 0.015;
    let est = EstimatorConfig {
        t_ep_slots: 10_000,
        ..Default::default()
    };
    let r = estimate_throughput(&scn, tau, &est, &mut stream_rng(11, 0)).unwrap();
    let sim = SlotSimulator::new(&scn, tau, DecisionMode::ClosedForm).unwrap();
    let sd = sim
        .accumulate(50_000, &mut stream_rng(11, 1))
        .var_rate()
        .sqrt();
    let want = scn.throughput(tau, None).unwrap().rate;
    assert_within(r, want, sd / 100.0, 3.0, "windowed rate");
}

#[test]
fn estimator_variance_shrinks_with_window() {
    let scn = Scenario::with_channels(3, &DEFAULT_P_FREE).unwrap();
    let spread = |w: usize| {
        let est = EstimatorConfig {
            t_ep_slots: w,
            ..Default::default()
        };
        let mut rng = stream_rng(12, w as u64);
        let xs: Vec<f64> = (0..400)
            .map(|_| estimate_throughput(&scn, 0.012, &est, &mut rng).unwrap())
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let ratio = spread(50) / spread(800);
    // ideal ratio 16; 400 windows give roughly ±15% per variance
    assert!(ratio > 10.0 && ratio < 25.0, "variance ratio {ratio}");
}

#[test]
fn sample_level_simulation_agrees_with_closed_form() {
    let scn = Scenario::with_channels(3, &DEFAULT_P_FREE).unwrap();
    let tau = 0.012;
    let mode = DecisionMode::SampleLevel {
        sampler: EnergySampler::Aggregate,
    };
    let st = simulate_batch(&scn, tau, mode, 40_000, 13, Execution::default()).unwrap();
    let p = scn.throughput(tau, None).unwrap();
    // the sample-level detector uses N = round(τ f_s), the closed form the
    // Gaussian approximation, so allow a little slack beyond sampling error
    assert_within(
        st.mean_rate,
        p.rate,
        st.std_error_rate(),
        4.0,
        "sample-level rate",
    );
    let m = empirical_sensed_channels(&scn, tau, 40_000, &mut stream_rng(13, 1)).unwrap();
    assert!((m - p.nce).abs() < 0.03);
}

#[test]
fn per_sample_and_aggregate_energy_agree() {
    let cfg = DetectorConfig::default();
    let n = 2000;
    for truth in [Hypothesis::Free, Hypothesis::Busy] {
        let draws = |s: EnergySampler, stream: u64| {
            let mut rng = stream_rng(14, stream);
            let xs: Vec<f64> = (0..3000)
                .map(|_| energy_statistic(&cfg, n, truth, s, &mut rng))
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
            (m, v)
        };
        let (ma, va) = draws(EnergySampler::Aggregate, 0);
        let (mp, vp) = draws(EnergySampler::PerSample, 1);
        let p = 1.0
            + if truth == Hypothesis::Busy {
                cfg.gamma
            } else {
                0.0
            };
        let mean = n as f64 * p;
        let var = n as f64 * p * p;
        let se = (var / 3000.0).sqrt();
        assert!((ma - mean).abs() < 4.0 * se && (mp - mean).abs() < 4.0 * se);
        assert!((va / var - 1.0).abs() < 0.12 && (vp / var - 1.0).abs() < 0.12);
    }
}

#[test]
fn rayleigh_slots_average_to_mean_capacities() {
    let mut scn = Scenario::with_channels(3, &DEFAULT_P_FREE).unwrap();
    scn.fading = Fading::Rayleigh {
        mean_gamma_s: 100.0,
        mean_gamma_p: 10.0,
        samples: 200_000,
        seed: 5,
    };
    let tau = 0.012;
    let st = simulate_batch(
        &scn,
        tau,
        DecisionMode::ClosedForm,
        100_000,
        15,
        Execution::default(),
    )
    .unwrap();
    let want = scn
        .faded_throughput(tau, None, 400_000, &mut stream_rng(15, 9))
        .unwrap()
        .rate;
    assert_within(st.mean_rate, want, st.std_error_rate(), 4.0, "faded rate");
}
