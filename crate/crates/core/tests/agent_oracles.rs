//! Agent behaviour checked against independent oracles: value iteration for
//! the learner, the weight formula for exploration, a scripted estimator for
//! Abandon Ship, and bitwise probes for head expansion.

use actiongram_core::actions::ActionSet;
use actiongram_core::agent::{
    divergence, execute_action, pick_action, q_update, AbandonShipTracker, TabularQ, ValueEstimator,
};
use actiongram_core::env::{EnvState, Featurizer};
use actiongram_core::grammar::MacroAction;
use actiongram_core::replay::Experience;
use actiongram_core::{Environment, GridSpec, GridWorld};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn s(key: u64) -> EnvState {
    EnvState {
        key,
        terminal: false,
    }
}

/// Deterministic chain: action 0 steps left (floored at 0), action 1 steps
/// right; stepping right from the last state ends the episode with +1, every
/// other move pays `penalty`.
fn chain_experiences(n: u64, penalty: f64) -> Vec<Experience> {
    let mut out = Vec::new();
    for state in 0..n {
        let left = state.saturating_sub(1);
        out.push(Experience {
            state: s(state),
            action: 0,
            reward: penalty,
            next_state: s(left),
            done: false,
            n_steps: 1,
        });
        let done = state + 1 == n;
        out.push(Experience {
            state: s(state),
            action: 1,
            reward: if done { 1.0 } else { penalty },
            next_state: EnvState {
                key: state + 1,
                terminal: done,
            },
            done,
            n_steps: 1,
        });
    }
    out
}

/// Value iteration on the same chain, computed independently.
fn value_iteration(n: usize, penalty: f64, gamma: f64) -> Vec<[f64; 2]> {
    let mut q = vec![[0.0f64; 2]; n];
    loop {
        let v: Vec<f64> = q.iter().map(|r| r[0].max(r[1])).collect();
        let mut next = q.clone();
        for i in 0..n {
            next[i][0] = penalty + gamma * v[i.saturating_sub(1)];
            next[i][1] = if i + 1 == n {
                1.0
            } else {
                penalty + gamma * v[i + 1]
            };
        }
        let delta = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max);
        q = next;
        if delta < 1e-14 {
            return q;
        }
    }
}

fn converge_chain(n: u64, alpha: f64) {
    let (penalty, gamma) = (-0.1, 0.9);
    let batch = chain_experiences(n, penalty);
    let mut online = ValueEstimator::tabular(2);
    let mut target = online.clone();
    for sweep in 0..3_000 {
        q_update(&mut online, &target, &batch, gamma, alpha);
        if sweep % 3 == 2 {
            target = online.clone();
        }
    }
    let oracle = value_iteration(n as usize, penalty, gamma);
    for (i, row) in oracle.iter().enumerate() {
        for (a, &want) in row.iter().enumerate() {
            let got = online.value(&s(i as u64), a);
            assert!(
                (got - want).abs() < 1e-6,
                "Q({i},{a}) = {got}, oracle {want}"
            );
        }
    }
}

#[test]
fn double_q_matches_value_iteration_on_two_state_chain() {
    converge_chain(2, 1.0);
}

#[test]
fn double_q_matches_value_iteration_on_five_state_chain() {
    converge_chain(5, 0.5);
}

fn set_with_macros(primitives: usize, macros: &[&[usize]]) -> ActionSet {
    let mut set = ActionSet::new(primitives);
    set.extend(macros.iter().map(|m| MacroAction {
        primitives: m.to_vec(),
        source: 0,
    }));
    set
}

#[test]
fn exploration_weights_match_formula() {
    let set = set_with_macros(6, &[&[0, 1], &[1, 2], &[2, 3], &[3, 4]]);
    let q = ValueEstimator::tabular(set.len());
    let mut rng = Pcg64::seed_from_u64(11);
    let draws = 100_000;
    let mut counts = vec![0usize; set.len()];
    for _ in 0..draws {
        let (a, explored) = pick_action(&q, &s(0), &set, 1.0, 4.0, &mut rng).unwrap();
        assert!(explored);
        counts[a] += 1;
    }
    let macro_share = counts[6..].iter().sum::<usize>() as f64 / draws as f64;
    let expected = 4.0 * 4.0 / (6.0 + 4.0 * 4.0);
    assert!((expected - 16.0 / 22.0_f64).abs() < 1e-15);
    assert!(
        (macro_share - expected).abs() < 0.01,
        "macro share {macro_share}"
    );
    for (a, &c) in counts.iter().enumerate() {
        let weight = if a < 6 { 1.0 } else { 4.0 };
        let p = weight / 22.0;
        assert!(
            (c as f64 / draws as f64 - p).abs() < 0.01,
            "action {a}: {c}"
        );
    }
}

#[test]
fn exploration_without_macros_is_uniform() {
    let set = ActionSet::new(6);
    let q = ValueEstimator::tabular(6);
    let mut rng = Pcg64::seed_from_u64(12);
    let mut counts = [0usize; 6];
    for _ in 0..100_000 {
        counts[pick_action(&q, &s(0), &set, 1.0, 4.0, &mut rng).unwrap().0] += 1;
    }
    for c in counts {
        assert!((c as f64 / 100_000.0 - 1.0 / 6.0).abs() < 0.01);
    }
}

#[test]
fn divergence_examples_and_range() {
    assert_eq!(divergence(2.5, 2.5), 0.0);
    assert!((divergence(1.0 - std::f64::consts::LN_2, 1.0) - 0.5).abs() < 1e-12);
    let mut rng = Pcg64::seed_from_u64(2);
    let mut last = -1.0;
    for gap in (0..200).map(|i| i as f64 * 0.05) {
        let q_highest: f64 = rng.gen_range(-50.0..50.0);
        let d = divergence(q_highest - gap, q_highest);
        assert!((0.0..1.0).contains(&d));
        assert!(d >= last - 1e-12, "not monotone at gap {gap}");
        last = d;
    }
}

/// A corridor where a six-step "right" macro is scripted to look bad at step `j`.
fn scripted_corridor(j: usize) -> (GridWorld, ActionSet, ValueEstimator) {
    let env = GridWorld::new(GridSpec::parse("S.........G").unwrap());
    let set = set_with_macros(4, &[&[1; 6]]);
    let mut t = TabularQ::new(5);
    for cell in 0..10 {
        t.set(&s(cell), 1, 1.0);
        t.set(&s(cell), 3, if cell == j as u64 { 6.0 } else { 0.0 });
    }
    (env, set, ValueEstimator::Tabular(t))
}

fn primed_tracker() -> AbandonShipTracker {
    let mut tracker = AbandonShipTracker::new(1.0);
    for _ in 0..AbandonShipTracker::WARMUP {
        assert!(!tracker.abandon_check(1.0, 1.0));
    }
    tracker
}

#[test]
fn scripted_spike_truncates_macro() {
    for j in 1..6 {
        let (env, set, q) = scripted_corridor(j);
        let mut tracker = primed_tracker();
        let (d, end) = execute_action(
            &env,
            env.reset(),
            4,
            &set,
            &q,
            Some(&mut tracker),
            usize::MAX,
        )
        .unwrap();
        assert!(d.abandoned);
        assert_eq!(d.executed(), j);
        assert_eq!(d.attempted, 6);
        assert_eq!(end.key, j as u64);
        assert!((d.executed() as f64 / d.attempted as f64) < 1.0);
    }
}

#[test]
fn disabled_abandon_runs_macro_like_manual_play() {
    let (env, set, q) = scripted_corridor(3);
    let (d, end) = execute_action(&env, env.reset(), 4, &set, &q, None, usize::MAX).unwrap();
    assert!(!d.abandoned);
    assert_eq!(d.executed(), 6);
    assert_eq!(d.executed(), d.attempted);
    let mut state = env.reset();
    for (step, t) in d.steps.iter().enumerate() {
        let r = env.step(&state, 1).unwrap();
        assert_eq!(
            (t.state, t.action, t.reward, t.next_state),
            (state, 1, r.reward, r.next_state),
            "{step}"
        );
        state = r.next_state;
    }
    assert_eq!(end, state);
}

#[test]
fn constant_divergence_never_abandons() {
    let (env, set, _) = scripted_corridor(99);
    let mut t = TabularQ::new(5);
    for cell in 0..10 {
        t.set(&s(cell), 1, 0.0);
        t.set(&s(cell), 3, 0.5);
    }
    let q = ValueEstimator::Tabular(t);
    let mut tracker = AbandonShipTracker::new(1.0);
    for _ in 0..5 {
        let (d, _) = execute_action(
            &env,
            env.reset(),
            4,
            &set,
            &q,
            Some(&mut tracker),
            usize::MAX,
        )
        .unwrap();
        assert!(!d.abandoned);
    }
    assert_eq!(tracker.std(), 0.0);
    assert!(tracker.count() >= 20);
}

fn random_tabular(rng: &mut Pcg64, actions: usize, states: u64) -> TabularQ {
    let mut t = TabularQ::new(actions);
    for key in 0..states {
        for a in 0..actions {
            if rng.gen_bool(0.7) {
                t.set(&s(key), a, rng.gen_range(-100.0..100.0));
            }
        }
    }
    t
}

#[test]
fn transfer_init_copies_first_primitive_bitwise() {
    let mut rng = Pcg64::seed_from_u64(8);
    let mut q = ValueEstimator::Tabular(random_tabular(&mut rng, 6, 40));
    let probes: Vec<EnvState> = (0..50).map(s).collect();
    let before: Vec<Vec<u64>> = probes
        .iter()
        .map(|p| q.values(p).iter().map(|v| v.to_bits()).collect())
        .collect();
    let greedy_before: Vec<usize> = probes
        .iter()
        .map(|p| actiongram_core::agent::argmax(&q.values(p)))
        .collect();
    let firsts = [1, 5, 1, 0];
    q.expand_action_head(&firsts, true).unwrap();
    for (p, old) in probes.iter().zip(&before) {
        let now = q.values(p);
        assert_eq!(now.len(), 10);
        let kept: Vec<u64> = now[..6].iter().map(|v| v.to_bits()).collect();
        assert_eq!(&kept, old);
        for (i, &f) in firsts.iter().enumerate() {
            assert_eq!(now[6 + i].to_bits(), now[f].to_bits());
        }
    }
    let greedy_after: Vec<usize> = probes
        .iter()
        .map(|p| actiongram_core::agent::argmax(&q.values(p)[..6]))
        .collect();
    assert_eq!(greedy_before, greedy_after);
}

#[test]
fn transfer_init_for_linear_estimator() {
    let mut q = ValueEstimator::linear(Featurizer::Hanoi { disks: 3 }, 6);
    let mut rng = Pcg64::seed_from_u64(9);
    for _ in 0..500 {
        let st = s(rng.gen_range(0..27));
        q.update_toward(&st, rng.gen_range(0..6), rng.gen_range(-10.0..10.0), 0.1);
    }
    let before: Vec<Vec<u64>> = (0..27)
        .map(|k| q.values(&s(k)).iter().map(|v| v.to_bits()).collect())
        .collect();
    q.expand_action_head(&[3, 0], true).unwrap();
    for k in 0..27 {
        let now = q.values(&s(k));
        let kept: Vec<u64> = now[..6].iter().map(|v| v.to_bits()).collect();
        assert_eq!(kept, before[k as usize]);
        assert_eq!(now[6].to_bits(), now[3].to_bits());
        assert_eq!(now[7].to_bits(), now[0].to_bits());
    }
}
