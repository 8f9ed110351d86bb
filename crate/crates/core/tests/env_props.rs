use proptest::prelude::*;
use tsge::agent::{TsgeAgent, TsgeConfig};
use tsge::env::{
    episode_change_prob, pad_to_power_of_two, Action, Bandit, EnvConfig, GaussianEnv, DUMMY_ARM_MEAN,
};
use tsge::sim::Policy;

fn changing(p: f64, episode_len: u64, seed: u64) -> EnvConfig {
    EnvConfig {
        initial_means: vec![0.5; 4],
        horizon: 1_000_000,
        episode_len,
        change_prob: p,
        change_magnitude: [0.2, 0.3],
        seed,
        ..EnvConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn episode_change_frequency_matches_closed_form(p in 0.002f64..0.05, seed in any::<u64>()) {
        let len = 50;
        let episodes = 2000u64;
        let mut env = GaussianEnv::new(changing(p, len, seed)).unwrap();
        for _ in 0..len * episodes {
            env.advance();
        }
        let mut hit = vec![false; episodes as usize];
        for c in env.change_log() {
            hit[((c.slot - 1) / len) as usize] = true;
        }
        let observed = hit.iter().filter(|&&h| h).count() as f64 / episodes as f64;
        let expected = episode_change_prob(p, len);
        let se = (expected * (1.0 - expected) / episodes as f64).sqrt();
        prop_assert!((observed - expected).abs() <= 3.0 * se + 1e-12,
            "observed {observed}, expected {expected} +- {se}");
    }

    #[test]
    fn at_most_one_change_per_episode(p in 0.01f64..1.0, seed in any::<u64>()) {
        let len = 20;
        let mut env = GaussianEnv::new(changing(p, len, seed)).unwrap();
        for _ in 0..len * 200 {
            env.advance();
        }
        let mut per = std::collections::HashMap::new();
        for c in env.change_log() {
            *per.entry((c.slot - 1) / len).or_insert(0) += 1;
        }
        prop_assert!(per.values().all(|&n| n == 1));
        prop_assert!(env.true_means().iter().all(|&m| m <= 1.0));
    }

    #[test]
    fn same_seed_replays_exactly(seed in any::<u64>(), p in 0.0f64..0.2) {
        let run = || {
            let mut env = GaussianEnv::new(changing(p, 30, seed)).unwrap();
            let mut rewards = Vec::new();
            for t in 0..600u64 {
                env.advance();
                let a = match t % 3 {
                    0 => Action::Arm((t / 3) as usize % 4),
                    1 => Action::Broadcast,
                    _ => Action::SuperArm(1),
                };
                rewards.push(env.play(a).unwrap().reward);
            }
            (rewards, env.change_log().to_vec())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn padding_never_wins(k in 1usize..40, seed in any::<u64>()) {
        let means: Vec<f64> = (0..k).map(|i| (i as f64 * 0.37 + seed as f64 * 1e-20).fract()).collect();
        let cfg = pad_to_power_of_two(&EnvConfig { initial_means: means.clone(), seed, ..EnvConfig::default() });
        prop_assert!(cfg.num_arms().is_power_of_two());
        prop_assert_eq!(cfg.num_real_arms(), k);
        let env = GaussianEnv::new(cfg).unwrap();
        let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(env.oracle_best_mean(), best);
        prop_assert!(env.true_means()[k..].iter().all(|&m| m == DUMMY_ARM_MEAN));
    }
}

#[test]
fn tsge_never_plays_a_padding_arm_alone() {
    let cfg = pad_to_power_of_two(&EnvConfig {
        initial_means: vec![0.2, 0.9, 0.4, 0.6, 0.3],
        horizon: 20_000,
        seed: 4,
        ..EnvConfig::default()
    });
    let mut env = GaussianEnv::new(cfg).unwrap();
    let tsge = TsgeConfig { delta: 0.05, loc_fail_prob: 0.05, horizon: 20_000, seed: 4, ..TsgeConfig::default() };
    let mut agent = TsgeAgent::for_bandit(tsge, &env).unwrap();
    for _ in 0..20_000 {
        if let Action::Arm(i) = agent.play_slot(&mut env).unwrap().action {
            assert!(i < 5, "played padding arm {i}");
        }
    }
}
