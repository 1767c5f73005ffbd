use sensopt_core::adaptive::{feasible_bounds, last_quartile_spread};
use sensopt_core::kc::CostSurface;
use sensopt_core::optimizer::uniform_grid;
use sensopt_core::*;

fn default_channels(np: usize) -> Scenario {
    Scenario::with_channels(np, &DEFAULT_P_FREE).unwrap()
}

fn acceptance_cfg(seed: u64) -> AdaptiveConfig {
    AdaptiveConfig {
        seed,
        estimator: EstimatorConfig {
            t_ep_slots: 10_000,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn grid_argmin<S: CostSurface>(s: &S, lo: f64, hi: f64) -> f64 {
    let xs = uniform_grid(lo, hi, 1 + ((hi - lo) / 1e-3).round() as usize);
    *xs.iter()
        .min_by(|a, b| s.eval(**a).total_cmp(&s.eval(**b)))
        .unwrap()
}

#[test]
fn three_channel_loop_reaches_analytic_optimum() {
    let scn = default_channels(3);
    let opt = optimize_tau(&scn, None).unwrap();
    for seed in 0..5 {
        let out = run_adaptive(&scn, &acceptance_cfg(seed)).unwrap();
        let rel = (out.tau_learned - opt.tau_opt).abs() / opt.tau_opt;
        let rate = scn.throughput(out.tau_learned, None).unwrap().rate;
        assert!(rel <= 0.10, "seed {seed}: relative τ error {rel}");
        assert!(rate >= 0.98 * opt.rate_max, "seed {seed}: rate {rate}");
        assert!(last_quartile_spread(&out.records) < 0.02);
    }
}

#[test]
fn loop_never_ends_worse_than_blind_probing() {
    let scn = default_channels(3);
    let out = run_adaptive(&scn, &acceptance_cfg(7)).unwrap();
    let warm = out.warmup.iter().map(|p| p.rate).fold(f64::MIN, f64::max);
    let n = out.records.len();
    let late = out.records[n - n / 4..]
        .iter()
        .map(|r| r.rate_measured)
        .fold(f64::MIN, f64::max);
    assert!(late >= warm, "late best {late} < warm-up best {warm}");
}

#[test]
fn kc_settles_at_grid_argmin_of_learned_surface() {
    let scn = default_channels(3);
    let out = run_adaptive(&scn, &acceptance_cfg(0)).unwrap();
    let (lo, hi) = feasible_bounds(&scn).unwrap();
    let net = &out.network;
    let x0 = out.records.last().unwrap().kc_x;
    let kc = run_to_convergence(x0, net, (lo, hi), &KcConfig::default()).unwrap();
    assert!(kc.converged);
    assert!((kc.x - grid_argmin(net, lo, hi)).abs() <= 1e-3);
}

#[test]
fn deterministic_link_learns_lower_boundary() {
    // every channel free and a false-alarm bound far below the slot count:
    // each slot transmits on channel 1, so φ = 1/(C₀(1 − τ/T)) exactly
    let mut scn = Scenario::with_channels(3, &[1.0]).unwrap();
    scn.detector = DetectorConfig::new(6e6, 0.9, 1e-9, 0.05).unwrap();
    let cfg = AdaptiveConfig {
        cycles: 120,
        estimator: EstimatorConfig {
            t_ep_slots: 200,
            ..Default::default()
        },
        jitter: 0.0,
        ..Default::default()
    };
    let out = run_adaptive(&scn, &cfg).unwrap();
    let c0 = scn.capacities().c0;
    for p in &out.warmup {
        assert!((p.rate - c0 * (1.0 - p.tau / scn.slot_t)).abs() < 1e-9);
    }
    let (lo, _) = feasible_bounds(&scn).unwrap();
    assert!(out.tau_learned / scn.slot_t - lo < 2e-3);
    assert_eq!(last_quartile_spread(&out.records), 0.0);
}

#[test]
fn target_scale_leaves_learned_argmin_unchanged() {
    let f = |x: f64| 0.5 + 2.0 * (x - 0.4) * (x - 0.4);
    let fit = |scale: f64| {
        let mut net = MffNetwork::random(9, 1.0, &mut stream_rng(21, 0)).unwrap();
        let mut buf = TrainingBuffer::new(41).unwrap();
        for i in 0..=40 {
            let x = 0.1 + 0.8 * i as f64 / 40.0;
            buf.push(x, scale * f(x));
        }
        net.set_reference_cost(scale * buf.max_cost().unwrap())
            .unwrap();
        train_step(&mut net, &buf, 0.05, 4000, &mut stream_rng(21, 1)).unwrap();
        grid_argmin(&net, 0.1, 0.9)
    };
    assert_eq!(fit(1.0), fit(37.5));
}

#[test]
fn training_stays_finite_at_high_rate() {
    let mut rng = stream_rng(22, 0);
    for _ in 0..10 {
        let mut net = MffNetwork::random(9, 1.0, &mut rng).unwrap();
        let mut buf = TrainingBuffer::new(32).unwrap();
        for i in 0..32 {
            let x = i as f64 / 31.0;
            buf.push(x, 0.9 * (2.0 * x - 1.0));
        }
        let d = train_step(&mut net, &buf, 0.5, 200, &mut rng).unwrap();
        assert!(d.is_finite());
        assert!(net.params().iter().all(|v| v.is_finite()));
    }
}
