mod common;

use proptest::prelude::*;
use rand::Rng as _;
use swarmfuse::agent::{
    build_state, critic_forward, policy_forward, AgentConfig, AgentParams, FreezeScope, SquashedGaussian,
};
use swarmfuse::{seeded_rng, Pose};

fn random_state(seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..120).map(|_| rng.random_range(-0.5..0.5)).collect()
}

/// Biases are zero at initialization; randomizing them exercises every term.
fn perturbed(config: AgentConfig, seed: u64) -> AgentParams {
    let mut rng = seeded_rng(seed);
    let mut p = AgentParams::new(config, &mut rng).unwrap();
    for (_, name, t) in p.tensors_mut() {
        if name.ends_with(".bias") {
            for v in t.iter_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        }
    }
    p
}

#[test]
fn forward_matches_reference_implementation() {
    for (seed, separate) in [(0, false), (1, false), (2, true)] {
        let config = AgentConfig {
            separate_critic: separate,
            ..AgentConfig::default()
        };
        let params = perturbed(config, seed);
        for k in 0..4 {
            let s = random_state(100 * seed + k);
            let out = policy_forward(&params, &s).unwrap();
            let (m, v) = common::reference_forward(&params, &s);
            assert!((out.dist.mean - m).abs() < 1e-10, "{} vs {m}", out.dist.mean);
            assert!((out.value - v).abs() < 1e-10, "{} vs {v}", out.value);
            assert!((critic_forward(&params, &s).unwrap() - v).abs() < 1e-10);
        }
    }
}

#[test]
fn critic_is_deterministic_and_follows_its_head_under_freeze() {
    let mut p = perturbed(AgentConfig::default(), 4);
    p.freeze(FreezeScope::Backbone);
    let s = random_state(9);
    let v0 = critic_forward(&p, &s).unwrap();
    assert_eq!(v0.to_bits(), critic_forward(&p, &s).unwrap().to_bits());
    assert!(!p.is_frozen("critic.0"));
    let last = p.critic.len() - 1;
    p.critic[last].b[0] += 0.25;
    let v1 = critic_forward(&p, &s).unwrap();
    assert!((v1 - v0 - 0.25).abs() < 1e-12);
}

#[test]
fn freeze_scopes_cover_expected_layers() {
    let mut p = AgentParams::new(AgentConfig::default(), &mut seeded_rng(0)).unwrap();
    p.freeze(FreezeScope::BackboneNeck);
    for name in p.layer_names() {
        let frozen = name.starts_with("backbone.") || name.starts_with("neck.");
        assert_eq!(p.is_frozen(&name), frozen, "{name}");
    }
    p.freeze(FreezeScope::None);
    assert!(p.layer_names().iter().all(|n| !p.is_frozen(n)));
}

#[test]
fn default_network_has_the_documented_widths() {
    let p = AgentParams::new(AgentConfig::default(), &mut seeded_rng(0)).unwrap();
    let dims = |layers: &[swarmfuse::agent::Linear]| {
        layers
            .iter()
            .map(|l| (l.input_dim(), l.output_dim()))
            .collect::<Vec<_>>()
    };
    assert_eq!(dims(&p.backbone), [(120, 60), (60, 128), (128, 256), (256, 256)]);
    assert_eq!(dims(&p.neck), [(256, 192), (192, 128)]);
    assert_eq!((p.attention.q.input_dim(), p.attention.q.output_dim()), (128, 192));
    assert_eq!(p.attention.heads, 3);
    assert_eq!((p.attention.o.input_dim(), p.attention.o.output_dim()), (192, 64));
    assert_eq!(dims(&p.policy), [(64, 32), (32, 1)]);
    assert_eq!(dims(&p.critic), [(256, 128), (128, 64), (64, 32), (32, 1)]);
    assert_eq!(p.log_std, -1.0);
}

fn scene() -> impl Strategy<Value = (Vec<Pose>, Vec<Pose>)> {
    let set = || proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 30);
    (set(), set()).prop_map(|(z, u)| {
        let to = |v: Vec<(f64, f64)>| v.into_iter().map(|(x, y)| Pose::new(x, y, 0.0)).collect();
        (to(z), to(u))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn policy_is_translation_invariant((p_z, p_u) in scene(), tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
        let params = perturbed(AgentConfig::default(), 3);
        let moved = |v: &[Pose]| v.iter().map(|p| p.translated(tx, ty)).collect::<Vec<_>>();
        let a = policy_forward(&params, &build_state(&p_z, &p_u, 30).unwrap()).unwrap();
        let b = policy_forward(&params, &build_state(&moved(&p_z), &moved(&p_u), 30).unwrap()).unwrap();
        prop_assert!((a.mu - b.mu).abs() < 1e-9);
        prop_assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn mean_and_samples_stay_inside_the_unit_interval((p_z, p_u) in scene(), scale in 0.1f64..200.0, seed in 0u64..1000) {
        let params = perturbed(AgentConfig::default(), 5);
        let state: Vec<f64> = build_state(&p_z, &p_u, 30).unwrap().iter().map(|v| v * scale).collect();
        let out = policy_forward(&params, &state).unwrap();
        prop_assert!(out.mu > 0.0 && out.mu < 1.0);
        let mut rng = seeded_rng(seed);
        for _ in 0..16 {
            let (a, lp) = out.dist.sample(&mut rng);
            prop_assert!(a > 0.0 && a < 1.0 && lp.is_finite());
        }
    }

    #[test]
    fn extreme_pre_squash_means_still_sample_inside(mean in -800.0f64..800.0, log_std in -3.0f64..1.0) {
        let d = SquashedGaussian { mean, log_std };
        let mut rng = seeded_rng(0);
        let (a, lp) = d.sample(&mut rng);
        prop_assert!(a > 0.0 && a < 1.0 && lp.is_finite());
    }
}
