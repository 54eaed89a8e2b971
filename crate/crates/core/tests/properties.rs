mod common;

use edgesplit::estimator::{estimate_split, Split, Tier};
use edgesplit::harness::report::fmt_sig6;
use edgesplit::link::{fit_link_model, predict_transfer_time, LinkModel, ProbeConfig};
use edgesplit::profile::{profile_model, LayerSpec, ModelDescriptor, SyntheticExecutor};
use edgesplit::scheduler::{self, decide_switch, Decision, SchedulerConfig};
use edgesplit::search::{find_best, Anchors, ObjectiveSpec, ObjectiveWeights};
use edgesplit::simenv::wire::Frame;
use edgesplit::simenv::{Environment, Trace, TraceEvent};
use edgesplit::fixtures::paper_scenario;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{all_splits, random_env, random_links, random_profile, random_rates};

fn descriptor() -> impl Strategy<Value = ModelDescriptor> {
    (
        prop::collection::vec((1u64..1 << 22, 0.0f64..100.0), 3..40),
        0.1f64..100.0,
    )
        .prop_map(|(layers, head)| ModelDescriptor {
            name: "prop".into(),
            feature_layers: layers
                .into_iter()
                .map(|(b, c)| LayerSpec {
                    output_activation_bytes: b,
                    compute_cost: c,
                })
                .collect(),
            head_compute_cost: head,
        })
}

fn split_strategy() -> impl Strategy<Value = Split> {
    (0usize..8, 1usize..8).prop_map(|(i, d)| Split::new(i, i + d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn profile_weights_sum_to_one_and_ignore_time_scale(
        model in descriptor(),
        s1 in 1e-6f64..1.0,
        s2 in 1e-6f64..1.0,
    ) {
        let a = profile_model("a", &mut SyntheticExecutor::new(&model, s1), 3).unwrap();
        let b = profile_model("b", &mut SyntheticExecutor::new(&model, s2), 0).unwrap();
        let sum: f64 = a.compute_weights().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert_eq!(a.compute_weights().len(), a.activation_bytes().len() + 1);
        for (x, y) in a.compute_weights().iter().zip(b.compute_weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let declared: Vec<u64> = model.feature_layers.iter().map(|l| l.output_activation_bytes).collect();
        prop_assert_eq!(a.activation_bytes(), &declared[..]);
    }

    #[test]
    fn link_fit_inverts_prediction(
        omega in 0.0f64..0.1,
        beta in 1e4f64..1e10,
        small in 1u64..10_000,
        extra in 1u64..10_000_000,
    ) {
        let cfg = ProbeConfig { size_small: small, size_large: small + extra, repeats: 1 };
        let truth = LinkModel::new(omega, beta).unwrap();
        let tau_s = predict_transfer_time(&truth, small as f64);
        let tau_l = predict_transfer_time(&truth, (small + extra) as f64);
        let fit = fit_link_model(tau_s, tau_l, &cfg, &LinkModel::unfitted());
        prop_assert!(fit.fitted);
        prop_assert!((fit.beta - beta).abs() <= 1e-6 * beta);
        prop_assert!((fit.omega - omega).abs() <= 1e-9 + 1e-6 * omega);
    }

    #[test]
    fn transfer_time_is_affine(
        omega in 0.0f64..0.1,
        beta in 1e4f64..1e10,
        a in 0.0f64..1e8,
        b in 0.0f64..1e8,
        t in 0.0f64..1.0,
    ) {
        let link = LinkModel::new(omega, beta).unwrap();
        let mid = predict_transfer_time(&link, t * a + (1.0 - t) * b);
        let blend = t * predict_transfer_time(&link, a) + (1.0 - t) * predict_transfer_time(&link, b);
        prop_assert!((mid - blend).abs() <= 1e-12 * mid.max(1.0));
        prop_assert!(predict_transfer_time(&link, 0.0) == omega);
    }

    #[test]
    fn non_increasing_rtt_keeps_previous_model(
        tau_s in 1e-4f64..1.0,
        drop in 0.0f64..1.0,
        omega in 0.0f64..0.1,
        beta in 1e4f64..1e10,
    ) {
        let previous = LinkModel::new(omega, beta).unwrap();
        let fit = fit_link_model(tau_s, tau_s * drop, &ProbeConfig::default(), &previous);
        prop_assert_eq!(fit, previous);
    }

    #[test]
    fn shares_partition_the_model_and_edge_cost_grows_with_i(seed in any::<u64>(), n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = random_profile(&mut rng, n);
        let rates = random_rates(&mut rng);
        let links = random_links(&mut rng);
        for split in all_splits(n, 1) {
            let shares = split.weight_shares(&profile);
            prop_assert!((shares.sum() - 1.0).abs() <= 1e-9);
            prop_assert!(Tier::ALL.iter().all(|&t| shares[t] > 0.0));
            if split.last_edge + 1 < split.last_fog {
                let wider = Split::new(split.last_edge + 1, split.last_fog);
                let a = estimate_split(split, &profile, &rates, &links).unwrap();
                let b = estimate_split(wider, &profile, &rates, &links).unwrap();
                prop_assert!(b.energy.edge >= a.energy.edge);
                prop_assert!(b.compute_time.fog <= a.compute_time.fog);
                prop_assert!(b.compute_time.cloud == a.compute_time.cloud || (b.compute_time.cloud - a.compute_time.cloud).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn anchor_scaling_preserves_the_winner(seed in any::<u64>(), n in 3usize..30, c in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = random_profile(&mut rng, n);
        let rates = random_rates(&mut rng);
        let links = random_links(&mut rng);
        let spec = ObjectiveSpec {
            weights: ObjectiveWeights::default(),
            anchors: Anchors { edge_energy: 1.0, total_energy: 2.0, latency: 0.5 },
            baseline_score: f64::INFINITY,
            deadline: 0.0,
            min_edge_layers: 1,
        };
        let scaled = ObjectiveSpec { anchors: spec.anchors.scaled(c), ..spec };
        let a = find_best(&profile, &rates, &links, &spec, None).unwrap().map(|x| x.split);
        let b = find_best(&profile, &rates, &links, &scaled, None).unwrap().map(|x| x.split);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn decide_switch_outcomes_are_consistent(
        c in split_strategy(),
        c0 in split_strategy(),
        cand in prop::option::of(split_strategy()),
        delta in -1.0f64..1.0,
        hit in any::<bool>(),
        theta in 0.0f64..0.2,
    ) {
        let delta = cand.map(|_| delta);
        let (decision, next) = decide_switch(c, c0, cand, delta, hit, theta);
        match decision {
            Decision::ForcedSwitch => {
                prop_assert!(hit);
                prop_assert_eq!(Some(next), cand);
                prop_assert_ne!(next, c);
            }
            Decision::NormalSwitch => {
                prop_assert!(!hit);
                prop_assert!(delta.unwrap() >= theta);
                prop_assert_eq!(Some(next), cand);
                prop_assert_ne!(next, c);
            }
            Decision::Fallback => {
                prop_assert!(hit);
                prop_assert_eq!(next, c0);
                prop_assert_ne!(c, c0);
                prop_assert!(cand.is_none() || cand == Some(c));
            }
            Decision::Stay => {
                prop_assert_eq!(next, c);
                prop_assert!(!(hit && c != c0));
                prop_assert!(!(hit && cand.is_some_and(|x| x != c)));
            }
        }
    }

    #[test]
    fn same_seed_same_samples(seed in any::<u64>(), n in 3usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profile = random_profile(&mut rng, n);
        let mut a = random_env(&mut ChaCha8Rng::seed_from_u64(seed), 0.05, seed);
        let mut b = random_env(&mut ChaCha8Rng::seed_from_u64(seed), 0.05, seed);
        for split in all_splits(n, 1).into_iter().take(20) {
            prop_assert_eq!(a.run_inference(split, &profile).unwrap(), b.run_inference(split, &profile).unwrap());
        }
    }

    #[test]
    fn trace_multiplier_is_piecewise_constant(
        mut times in prop::collection::vec(0.0f64..100.0, 1..6),
        mults in prop::collection::vec(0.1f64..10.0, 6),
        probe in 0.0f64..120.0,
    ) {
        times.sort_by(f64::total_cmp);
        times.dedup();
        let events: Vec<TraceEvent> = times.iter().zip(&mults).map(|(&t, &m)| TraceEvent(t, m)).collect();
        let trace = Trace::new(events.clone()).unwrap();
        let expected = events.iter().rev().find(|e| e.0 <= probe).map_or(1.0, |e| e.1);
        prop_assert_eq!(trace.multiplier_at(probe), expected);
        for e in &events {
            prop_assert_eq!(trace.multiplier_at(e.0), e.1);
        }
    }

    #[test]
    fn frames_round_trip(
        kind in 0u8..4,
        data in prop::collection::vec(any::<u8>(), 0..512),
        stage in any::<u8>(),
        layer in any::<u32>(),
        ns in any::<u64>(),
    ) {
        let frame = match kind {
            0 => Frame::Probe { filler: data },
            1 => Frame::ProbeAck,
            2 => Frame::Activation { stage, layer, data },
            _ => Frame::Result { latency_ns: ns },
        };
        let bytes = frame.encode();
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        prop_assert_eq!(len, bytes.len() - 4);
        prop_assert_eq!(Frame::read_from(&mut &bytes[..]).unwrap(), frame);
    }

    #[test]
    fn six_significant_digits_round_trip(x in prop_oneof![-1e12f64..1e12, -1e-3f64..1e-3]) {
        let s = fmt_sig6(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs(), "{} -> {}", x, s);
        let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect::<String>();
        prop_assert!(digits.trim_start_matches('0').len() <= 6, "{}", s);
    }
}

#[test]
fn scheduler_runs_are_bit_identical() {
    let config = paper_scenario("alexnet").unwrap().config;
    let run = || {
        let mut env = edgesplit::SimEnv::new(
            config.nodes.clone(),
            config.edge_fog.clone(),
            config.fog_cloud.clone(),
            config.noise(9),
        )
        .unwrap();
        scheduler::run(&config.scheduler, &config.profile, &mut env).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn anchors_and_baseline_score_are_fixed_after_phase_one() {
    let config = paper_scenario("mobilenetv2").unwrap().config;
    let mut sc: SchedulerConfig = config.scheduler.clone();
    sc.total_budget = 800;
    let mut env = edgesplit::SimEnv::new(
        config.nodes.clone(),
        config.edge_fog.clone(),
        config.fog_cloud.clone(),
        config.noise(4),
    )
    .unwrap();
    let mut state = scheduler::initialize(&sc, &config.profile, &mut env).unwrap();
    let objective = state.objective;
    for _ in 0..4 {
        let w = scheduler::steady_window(&mut state, &sc, &config.profile, &mut env).unwrap();
        assert!(w.split.is_valid(config.profile.n_features(), sc.min_edge_layers));
        assert!(w.next_split.is_valid(config.profile.n_features(), sc.min_edge_layers));
        assert_eq!(state.objective, objective);
    }
}
