//! Survival of the do-nothing agent and a one-step greedy switcher on the
//! bundled case-5 grid under each chronic profile.
//!
//! ```text
//! cargo run --release --example calibrate [chronic_seed]
//! ```

use std::sync::Arc;

use grid_marl::env::{generate_chronics, Action, ChronicProfile, EnvParams, GridEnv, Split, CHRONIC_LENGTH, WINDOW_LENGTH};
use grid_marl::grid::{case5, GridSpec};
use grid_marl::marl::{controllable_substations, enumerate_actions};

/// Picks the action with the lowest next-step max rho once the grid is unsafe.
fn greedy(env: &GridEnv, actions: &[Action]) -> Action {
    if env.observation().max_rho() <= 0.95 {
        return Action::DoNothing;
    }
    let mut best = (f64::INFINITY, Action::DoNothing);
    for a in std::iter::once(&Action::DoNothing).chain(actions) {
        let mut probe = env.clone();
        let out = probe.step(a).expect("probe step");
        let rho = if out.failure.is_some() { f64::INFINITY } else { out.observation.max_rho() };
        if rho < best.0 {
            best = (rho, a.clone());
        }
    }
    best.1
}

fn survive(env: &mut GridEnv, mut policy: impl FnMut(&GridEnv) -> Action) -> usize {
    let mut survived = 0;
    while !env.is_done() {
        let a = policy(env);
        let out = env.step(&a).expect("step");
        if out.failure.is_none() {
            survived = out.step;
        }
    }
    survived
}

fn main() {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().expect("chronic seed")).unwrap_or(0);
    let spec: Arc<GridSpec> = Arc::new(case5());
    let mut actions = Vec::new();
    for s in controllable_substations(&spec, 3) {
        actions.extend(enumerate_actions(&spec, s).expect("actions"));
    }
    let base = ChronicProfile::default();
    for (name, profile) in [("calm", base.calm()), ("default", base.clone()), ("stressed", base.stressed())] {
        let set = generate_chronics(&spec, seed, 20, CHRONIC_LENGTH, &profile).expect("chronics");
        for split in [Split::Train, Split::Test, Split::Validation] {
            let (mut dn_fail, mut g_fail) = (0, 0);
            let mut test_rows = Vec::new();
            let windows = set.windows(split);
            for w in &windows {
                let chronic = Arc::new(set.chronics[w.chronic].clone());
                let reset = || GridEnv::reset(spec.clone(), EnvParams::default(), chronic.clone(), w.offset, WINDOW_LENGTH).expect("reset");
                let dn = survive(&mut reset(), |_| Action::DoNothing);
                let g = survive(&mut reset(), |e| greedy(e, &actions));
                dn_fail += usize::from(dn < WINDOW_LENGTH);
                g_fail += usize::from(g < WINDOW_LENGTH);
                test_rows.push((dn, g));
            }
            println!("{name} {split:?}: {} windows, do-nothing fails {dn_fail}, greedy fails {g_fail}", windows.len());
            if split != Split::Train {
                for (k, (dn, g)) in test_rows.iter().enumerate() {
                    println!("  window {k}: do-nothing {dn}, greedy {g}");
                }
            }
        }
    }
}
