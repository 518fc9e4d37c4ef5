use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use evasion_core::aircraft::ControlAction;
use evasion_core::harness::scenario::{sample_scenario, ScenarioBounds};
use evasion_core::harness::sim::{SimConfig, Simulation};
use evasion_core::learner::{ppo_update, Adam, NetworkConfig, PolicyParameters, PpoConfig, RolloutBatch};

fn sim_step(c: &mut Criterion) {
    let spec = sample_scenario(1, &ScenarioBounds::default(), None);
    let base = Simulation::new(&spec, &SimConfig::default()).unwrap();
    let action = ControlAction::new(0.1, 0.4, 0.0, 0.9);
    c.bench_function("sim_step_x100", |b| {
        b.iter(|| {
            let mut sim = base.clone();
            for _ in 0..100 {
                sim.step(black_box(action)).unwrap();
            }
            sim.geometry.range
        })
    });
}

fn policy(c: &mut Criterion) {
    let spec = sample_scenario(2, &ScenarioBounds::default(), None);
    let obs = Simulation::new(&spec, &SimConfig::default()).unwrap().observation();
    for hidden in [64, 256] {
        let cfg = NetworkConfig {
            hidden: vec![hidden, hidden],
            log_std_init: -0.5,
        };
        let params = PolicyParameters::new(&cfg, 0);
        c.bench_function(&format!("policy_forward_{hidden}"), |b| {
            b.iter(|| params.forward(black_box(&obs)))
        });
    }
}

fn update(c: &mut Criterion) {
    let cfg = NetworkConfig {
        hidden: vec![64, 64],
        log_std_init: -0.5,
    };
    let params = PolicyParameters::new(&cfg, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 1024;
    let mut batch = RolloutBatch::default();
    let spec = sample_scenario(3, &ScenarioBounds::default(), None);
    let obs = Simulation::new(&spec, &SimConfig::default()).unwrap().observation();
    for i in 0..n {
        let s = params.sample(&obs, &mut rng);
        batch.observations.push(obs.0);
        batch.pre_squash.push(s.pre_squash);
        batch.old_log_probs.push(s.log_prob);
        batch.advantages.push((i % 7) as f64 - 3.0);
        batch.returns.push(s.value + 1.0);
    }
    let ppo = PpoConfig {
        epochs: 1,
        ..PpoConfig::default()
    };
    let mut group = c.benchmark_group("ppo");
    group.sample_size(10);
    group.bench_function("update_1024_one_epoch_64", |b| {
        b.iter(|| {
            let mut p = params.clone();
            let mut adam = Adam::new(p.parameter_count());
            ppo_update(&mut p, &mut adam, &batch, &ppo, &mut rng).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, sim_step, policy, update);
criterion_main!(benches);
