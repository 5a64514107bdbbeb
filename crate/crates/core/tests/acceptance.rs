//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Criteria 7 and 8 train 20 runs (4 configurations x 5 seeds) at graph
//! width 32; they share one set of runs and take most of the suite's time.

use std::collections::{BTreeSet, VecDeque};
use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use grid_marl::agents::{
    actor_logits, critic_q, gae_from_residuals, policy_entropy, ppo_actor_logits, ppo_clip_objective,
    ppo_combined_loss, ppo_critic_values, ppo_value_loss, sacd_actor_loss, sacd_critic_loss, sacd_temperature_loss,
    td_residuals, trunk, AgentsError, HyperParams, PpoAgent, SacdAgent,
};
use grid_marl::env::{generate_chronics, l2rpn_score, Action, ChronicProfile, EnvParams, Observation, Split, CHRONIC_LENGTH};
use grid_marl::grid::{case5, solve_dc_power_flow, Bus, Edge, Element, ElectricalGraph, NodeKey};
use grid_marl::harness::{train, ExperimentConfig};
use grid_marl::marl::{
    dependent_soft_value, dependent_td_residual, enumerate_actions, run_episode, run_marl_training, AgentLayout,
    EvalRow, Evaluator, HierarchyConfig, Hooks, MarlError, MidPolicy, MidPolicyEstimate, ScriptedEnv, Strategy,
    TraceEvent, TrainSchedule,
};
use grid_marl::nn::gradcheck::check_gradients;
use grid_marl::nn::{GraphBatch, NnError, ParameterSet, Role};
use grid_marl::rng::{stream, Stream};

/// Writes straight to stderr so the line shows even when output is captured.
fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion} [{verdict}] {name}: {detail}");
}

fn nn(e: AgentsError) -> NnError {
    NnError::Structure(e.to_string())
}

// ---------------------------------------------------------------- 1

fn random_graph(rng: &mut ChaCha8Rng) -> ElectricalGraph {
    let n = rng.gen_range(2..=12);
    let mut edges = Vec::new();
    let push = |edges: &mut Vec<Edge>, from: usize, to: usize, rng: &mut ChaCha8Rng| {
        let line = edges.len();
        edges.push(Edge { line, from, to, reactance: rng.gen_range(0.01..1.0), limit_mw: rng.gen_range(10.0..200.0) });
    };
    // Random spanning tree, then extra lines (parallel ones allowed).
    for v in 1..n {
        let u = rng.gen_range(0..v);
        push(&mut edges, u, v, rng);
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            push(&mut edges, a, b, rng);
        }
    }
    let node_gen_mw: Vec<f64> =
        (0..n).map(|i| if i == 0 || rng.gen_bool(0.4) { rng.gen_range(1.0..100.0) } else { 0.0 }).collect();
    let node_load_mw: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.7) { rng.gen_range(0.0..60.0) } else { 0.0 }).collect();
    ElectricalGraph {
        nodes: (0..n).map(|s| NodeKey { substation: s, bus: Bus::One }).collect(),
        node_n_gens: node_gen_mw.iter().map(|&g| usize::from(g > 0.0)).collect(),
        node_n_loads: node_load_mw.iter().map(|&l| usize::from(l > 0.0)).collect(),
        node_gen_mw,
        node_load_mw,
        n_lines: edges.len(),
        edges,
    }
}

/// Flows from the incidence form `B = Aᵀ diag(1/x) A`, grounded at node 0 and
/// solved with a dense LU factorisation.
fn oracle_flows(g: &ElectricalGraph) -> Vec<f64> {
    let n = g.n_nodes();
    let m = g.edges.len();
    let gen: f64 = g.node_gen_mw.iter().sum();
    let load: f64 = g.node_load_mw.iter().sum();
    let p = DVector::from_iterator(n, (0..n).map(|i| g.node_gen_mw[i] * load / gen - g.node_load_mw[i]));
    let mut a = DMatrix::<f64>::zeros(m, n);
    let mut y = DMatrix::<f64>::zeros(m, m);
    for (k, e) in g.edges.iter().enumerate() {
        a[(k, e.from)] = 1.0;
        a[(k, e.to)] = -1.0;
        y[(k, k)] = 1.0 / e.reactance;
    }
    let b = a.transpose() * &y * &a;
    let reduced = b.view((1, 1), (n - 1, n - 1)).into_owned();
    let theta_r = reduced.lu().solve(&p.rows(1, n - 1).into_owned()).expect("connected graph");
    let mut theta = DVector::zeros(n);
    theta.rows_mut(1, n - 1).copy_from(&theta_r);
    let f = y * a * theta;
    f.iter().copied().collect()
}

#[test]
fn criterion_1_power_flow_oracle() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_501);
    let (mut worst_flow, mut worst_balance) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let g = random_graph(&mut rng);
        let r = solve_dc_power_flow(&g);
        assert!(r.feasible);
        for (a, b) in r.flow_mw.iter().zip(oracle_flows(&g)) {
            worst_flow = worst_flow.max((a - b).abs());
        }
        for i in 0..g.n_nodes() {
            let out: f64 = g.edges.iter().filter(|e| e.from == i).map(|e| r.flow_mw[e.line]).sum::<f64>()
                - g.edges.iter().filter(|e| e.to == i).map(|e| r.flow_mw[e.line]).sum::<f64>();
            worst_balance = worst_balance.max((out - r.node_injection_mw[i]).abs());
        }
    }
    let elapsed = t.elapsed();
    let pass = worst_flow < 1e-8 && worst_balance < 1e-9 && elapsed < Duration::from_secs(10);
    report(1, "power-flow oracle", pass, &format!("max flow err {worst_flow:.2e}, max imbalance {worst_balance:.2e}, {elapsed:.2?}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn toy_states(seed: u64, n: usize) -> (GraphBatch, Vec<usize>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<GraphBatch> = (0..n)
        .map(|_| {
            let x = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
            GraphBatch::new(x, &[(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)]).unwrap()
        })
        .collect();
    let g = GraphBatch::concat(&parts.iter().collect::<Vec<_>>()).unwrap();
    let actions = (0..n).map(|_| rng.gen_range(0..3)).collect();
    let xs = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (g, actions, xs)
}

#[test]
fn criterion_2_gradient_suite() {
    let t = Instant::now();
    let h = 1e-5;
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut note = |name: &'static str, e: f64| match worst.iter_mut().find(|(n, _)| *n == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name, e)),
    };
    for seed in 0..10u64 {
        let hp = HyperParams { width: 4, ..HyperParams::masacd() };
        let sacd = SacdAgent::new(4, 3, &hp, &mut stream(seed, Stream::Init)).unwrap();
        let (g, actions, rewards) = toy_states(seed, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let q_const = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        let alpha = rng.gen_range(0.05..1.0);
        let next_v: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();

        // Critic loss with independent and with dependent bootstraps.
        let y_ind: Vec<f64> = (0..4).map(|b| rewards[b] + hp.gamma * next_v[b][b % 3]).collect();
        let row = [0.2, 0.5, 0.3];
        let y_dep: Vec<f64> =
            (0..4).map(|b| rewards[b] + hp.gamma * dependent_soft_value(&row, &next_v[b]).unwrap()).collect();
        for (name, y) in [("sacd critic", &y_ind), ("sacd critic, dependent", &y_dep)] {
            let c = check_gradients(&sacd.params, h, |t, p| {
                let hh = trunk(t, p, &g).map_err(nn)?;
                let q1 = critic_q(t, p, hh, &g, 1).map_err(nn)?;
                let q2 = critic_q(t, p, hh, &g, 2).map_err(nn)?;
                sacd_critic_loss(t, &[q1, q2], &actions, y).map_err(nn)
            })
            .unwrap();
            note(name, c.max_rel_error);
        }
        let c = check_gradients(&sacd.params, h, |t, p| {
            let hh = trunk(t, p, &g).map_err(nn)?;
            let logits = actor_logits(t, p, hh, &g).map_err(nn)?;
            sacd_actor_loss(t, logits, &q_const, alpha).map_err(nn)
        })
        .unwrap();
        note("sacd actor", c.max_rel_error);

        let mut la = ParameterSet::new(Role::Shared);
        la.insert("log_alpha", Array2::from_elem((1, 1), alpha.ln())).unwrap();
        let ents: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.1)).collect();
        let c = check_gradients(&la, h, |t, p| {
            sacd_temperature_loss(t, p.get("log_alpha")?, &ents, 0.98 * 3f64.ln()).map_err(nn)
        })
        .unwrap();
        note("temperature", c.max_rel_error);

        let php = HyperParams { width: 4, ..HyperParams::mappo() };
        let ppo = PpoAgent::new(4, 3, &php, &mut stream(seed, Stream::Init)).unwrap();
        let old: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.6..-0.6)).collect();
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dones = [false, false, true, false];
        let adv_ind = gae_from_residuals(
            &td_residuals(&rewards, &values, &next_v.iter().map(|v| v[0]).collect::<Vec<_>>(), &dones, php.gamma),
            &dones,
            php.gamma,
            php.gae_lambda,
        );
        let deltas_dep: Vec<f64> = (0..4)
            .map(|b| dependent_td_residual(&row, rewards[b], php.gamma, &next_v[b], values[b], dones[b]).unwrap())
            .collect();
        let adv_dep = gae_from_residuals(&deltas_dep, &dones, php.gamma, php.gae_lambda);
        let targets: Vec<f64> = adv_ind.iter().zip(&values).map(|(a, v)| a + v).collect();
        for (name, adv) in [("ppo clip", &adv_ind), ("ppo clip, dependent", &adv_dep)] {
            let c = check_gradients(&ppo.params, h, |t, p| {
                let logits = ppo_actor_logits(t, p, &g).map_err(nn)?;
                let lp = t.log_softmax(logits);
                let lp = t.gather_cols(lp, &actions)?;
                ppo_clip_objective(t, lp, &old, adv, php.clip_eps).map_err(nn)
            })
            .unwrap();
            note(name, c.max_rel_error);
        }
        let c = check_gradients(&ppo.params, h, |t, p| {
            let v = ppo_critic_values(t, p, &g).map_err(nn)?;
            ppo_value_loss(t, v, &targets).map_err(nn)
        })
        .unwrap();
        note("ppo value", c.max_rel_error);
        for (name, adv) in [("ppo combined", &adv_ind), ("ppo combined, dependent", &adv_dep)] {
            let c = check_gradients(&ppo.params, h, |t, p| {
                let logits = ppo_actor_logits(t, p, &g).map_err(nn)?;
                let lp_all = t.log_softmax(logits);
                let lp = t.gather_cols(lp_all, &actions)?;
                let clip = ppo_clip_objective(t, lp, &old, adv, php.clip_eps).map_err(nn)?;
                let v = ppo_critic_values(t, p, &g).map_err(nn)?;
                let vf = ppo_value_loss(t, v, &targets).map_err(nn)?;
                let ent = policy_entropy(t, logits).map_err(nn)?;
                ppo_combined_loss(t, clip, vf, ent, php.vf_coef, 0.01).map_err(nn)
            })
            .unwrap();
            note(name, c.max_rel_error);
        }
    }
    let elapsed = t.elapsed();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let pass = max < 1e-4 && elapsed < Duration::from_secs(60) && worst.len() == 9;
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    report(2, "gradient suite", pass, &format!("{}; {elapsed:.2?}", detail.join(", ")));
    assert!(pass);
}

// ---------------------------------------------------------------- 3

fn param_tensors(ck: &grid_marl::nn::Checkpoint) -> &[(String, Array2<f64>)] {
    &ck.tensors
}

#[test]
fn criterion_3_reduction_equivalences() {
    // (a) DSACD with an identity mid-policy estimate against ISACD.
    let spec = Arc::new(case5());
    let set = generate_chronics(&spec, 0, 20, CHRONIC_LENGTH, &ChronicProfile::default().stressed()).unwrap();
    let ev = Evaluator::new(spec.clone(), EnvParams::default(), &set, Split::Test).unwrap();
    let hp = HyperParams { width: 6, update_start: 60, batch_size: 8, ..HyperParams::masacd() };
    let sched = TrainSchedule { budget: 500, eval_period: 250, max_episodes: 10_000 };
    let cfg = HierarchyConfig { identity_mid_policy: true, ..Default::default() };
    let run = |s| run_marl_training(s, &cfg, &hp, 11, spec.clone(), EnvParams::default(), &set, &ev, &sched).unwrap();
    let (dep, ind) = (run(Strategy::Dsacd), run(Strategy::Isacd));
    let mut same = dep.score_log == ind.score_log && dep.updates.len() == ind.updates.len() && !dep.updates.is_empty();
    for k in 0..dep.learners.len() {
        let (a, b) = (dep.checkpoint(k), ind.checkpoint(k));
        let bitwise = param_tensors(&a).iter().zip(param_tensors(&b)).all(|((na, ta), (nb, tb))| {
            na == nb && ta.iter().zip(tb.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
        same &= bitwise && param_tensors(&a).len() == param_tensors(&b).len();
    }
    let updates_differ = dep.updates.iter().zip(&ind.updates).any(|(a, b)| a.critic_loss.to_bits() != b.critic_loss.to_bits());

    // (b) dependent residual with an identity row against the independent one.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut b_ok = true;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..6);
        let i = rng.gen_range(0..n);
        let row = MidPolicyEstimate::identity(n).row(i);
        let next: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (r, v, done) = (rng.gen_range(-1.0..1.0), rng.gen_range(-10.0..10.0), rng.gen_bool(0.2));
        let d = dependent_td_residual(&row, r, 0.996, &next, v, done).unwrap();
        let e = td_residuals(&[r], &[v], &[next[i]], &[done], 0.996)[0];
        b_ok &= d.to_bits() == e.to_bits();
    }

    // (c) GAE with λ = 0 is the one-step residual.
    let mut c_ok = true;
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.1)).collect();
        let adv = gae_from_residuals(&deltas, &dones, 0.99, 0.0);
        c_ok &= adv.iter().zip(&deltas).all(|(a, d)| a.to_bits() == d.to_bits());
    }
    let pass = same && !updates_differ && b_ok && c_ok;
    report(
        3,
        "reduction equivalences",
        pass,
        &format!("(a) {} updates bitwise {same}; (b) {b_ok}; (c) {c_ok}", dep.updates.len()),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 4

fn brute_force(elements: &[Element]) -> BTreeSet<Vec<u8>> {
    let n = elements.len();
    let mut out = BTreeSet::new();
    for mask in 0u32..(1 << n) {
        let mut buses: Vec<u8> = (0..n).map(|k| if mask & (1 << k) != 0 { 2 } else { 1 }).collect();
        // Swapping the two busbars gives the same split.
        if buses[0] == 2 {
            for b in &mut buses {
                *b = 3 - *b;
            }
        }
        let safe = [1u8, 2].iter().all(|&bus| {
            let here: Vec<&Element> = elements.iter().zip(&buses).filter(|(_, &b)| b == bus).map(|(e, _)| e).collect();
            let injection = here.iter().any(|e| matches!(e, Element::Load(_) | Element::Generator(_)));
            let line = here.iter().any(|e| matches!(e, Element::LineOrigin(_) | Element::LineExtremity(_)));
            !injection || line
        });
        if safe {
            out.insert(buses);
        }
    }
    out
}

#[test]
fn criterion_4_action_space() {
    let spec = case5();
    let mut all_match = true;
    let mut sizes = Vec::new();
    for sub in 0..spec.n_substations() {
        let elements = &spec.substations[sub].elements;
        let got: Vec<Vec<u8>> = enumerate_actions(&spec, sub)
            .unwrap()
            .into_iter()
            .map(|a| match a {
                Action::SetBus { config, .. } => config.iter().map(|b| if *b == Bus::One { 1 } else { 2 }).collect(),
                Action::DoNothing => vec![],
            })
            .collect();
        let unique: BTreeSet<Vec<u8>> = got.iter().cloned().collect();
        all_match &= unique.len() == got.len() && unique == brute_force(elements);
        sizes.push(got.len());
    }
    let layout = AgentLayout::multi(&spec, 3).unwrap();
    let pass = all_match && layout.len() == 3;
    report(4, "action space", pass, &format!("per-substation counts {sizes:?}, {} agents", layout.len()));
    assert!(pass);
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_score_bands() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    for _ in 0..10_000 {
        let t = rng.gen_range(1..=3000usize);
        let t_dn = rng.gen_range(1..=t);
        let t_a = match rng.gen_range(0..3) {
            0 => rng.gen_range(0..t_dn),
            1 => rng.gen_range(t_dn..=t),
            _ => t,
        };
        let (ca, cdn) = (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
        let s = l2rpn_score(t_a, t_dn, t, ca, cdn);
        let ok = if t_a == t {
            (80.0..=100.0).contains(&s)
        } else if t_a < t_dn {
            (-100.0..0.0).contains(&s)
        } else {
            (0.0..80.0).contains(&s)
        };
        violations += usize::from(!ok);
    }
    report(5, "score bands", violations == 0, &format!("{violations} violations in 10000 samples"));
    assert_eq!(violations, 0);
}

// ---------------------------------------------------------------- 6

struct Script(VecDeque<usize>);

impl Hooks for Script {
    fn choose(&mut self, _agent: usize, _obs: &Observation) -> Result<usize, MarlError> {
        Ok(self.0.pop_front().expect("scripted choice"))
    }
}

#[test]
fn criterion_6_hierarchy_trace() {
    // Agents 0, 1, 2 sit at substations 0, 2, 3. Incident lines: substation 0
    // touches 0-3, substation 2 touches 1, 4, 5, 6, substation 3 touches 2, 5, 6, 7.
    let flat = |v: f64| vec![v; 8];
    let mut passive = vec![flat(0.5); 9];
    passive[1][7] = 0.97;
    passive[3][4] = 0.99;
    passive[3][0] = 0.96;
    passive[6][2] = 0.96;
    let mut still_unsafe = flat(0.5);
    still_unsafe[4] = 0.98;
    let mut env = ScriptedEnv::new(case5(), 8, passive, vec![flat(0.5), still_unsafe, flat(0.5)]);
    let layout = AgentLayout::multi(&case5(), 3).unwrap();
    let mut hooks = Script([0, 1, 3, 1, 2, 1, 2, 3].into_iter().collect());
    let mut trace = Vec::new();
    let summary =
        run_episode(&mut env, &layout, &HierarchyConfig::default(), &mut hooks, &mut stream(0, Stream::MidPolicy), Some(&mut trace))
            .unwrap();
    use TraceEvent::*;
    let expected = vec![
        Gate { step: 0, unsafe_grid: false },
        Gate { step: 1, unsafe_grid: true },
        Order(vec![2, 0, 1]),
        Skip { agent: 2, action: 0 },
        Act { agent: 0, action: 1, count: 1 },
        Gate { step: 2, unsafe_grid: false },
        Gate { step: 3, unsafe_grid: true },
        Order(vec![1, 0, 2]),
        Act { agent: 1, action: 3, count: 2 },
        Skip { agent: 0, action: 1 },
        Act { agent: 2, action: 2, count: 3 },
        Gate { step: 5, unsafe_grid: false },
        Gate { step: 6, unsafe_grid: true },
        Order(vec![0, 2, 1]),
        Skip { agent: 0, action: 1 },
        Skip { agent: 2, action: 2 },
        Skip { agent: 1, action: 3 },
        Fallback,
        Gate { step: 7, unsafe_grid: false },
    ];
    let pass = trace == expected && summary.interactions == 3 && summary.env_steps == 8 && hooks.0.is_empty();
    report(6, "hierarchy trace", pass, &format!("{} events, {} interactions, {} env steps", trace.len(), summary.interactions, summary.env_steps));
    assert_eq!(trace, expected);
    assert!(pass);
}

// ---------------------------------------------------------------- 7, 8

/// Graph width of the behavioural runs.
const RUN_WIDTH: usize = 32;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Runs {
    dsacd: Vec<Vec<EvalRow>>,
    isacd: Vec<Vec<EvalRow>>,
    dppo: Vec<Vec<EvalRow>>,
    dsacd_random: Vec<Vec<EvalRow>>,
    baseline_mean: f64,
    elapsed: Duration,
}

fn runs() -> &'static Runs {
    static RUNS: OnceLock<Runs> = OnceLock::new();
    RUNS.get_or_init(|| {
        let t = Instant::now();
        let spec = Arc::new(case5());
        let set = generate_chronics(&spec, 0, 20, CHRONIC_LENGTH, &ChronicProfile::default().stressed()).unwrap();
        let ev = Evaluator::new(spec.clone(), EnvParams::default(), &set, Split::Test).unwrap();
        let baseline_mean = (0..ev.len()).map(|k| ev.score_summary(k, &ev.baseline[k])).sum::<f64>() / ev.len() as f64;
        let sched = TrainSchedule::default();
        let go = |strategy: Strategy, mid: MidPolicy| -> Vec<Vec<EvalRow>> {
            let hp = HyperParams { width: RUN_WIDTH, ..strategy.default_hyper() };
            let cfg = HierarchyConfig { mid_policy: mid, ..Default::default() };
            SEEDS
                .iter()
                .map(|&seed| {
                    let s = Instant::now();
                    let out = run_marl_training(strategy, &cfg, &hp, seed, spec.clone(), EnvParams::default(), &set, &ev, &sched)
                        .unwrap();
                    let _ = writeln!(
                        std::io::stderr(),
                        "  {} {mid:?} seed {seed}: final {:.1}, {:.0?}",
                        strategy.name(),
                        out.score_log.last().unwrap().mean,
                        s.elapsed()
                    );
                    out.score_log
                })
                .collect()
        };
        Runs {
            dsacd: go(Strategy::Dsacd, MidPolicy::Capa),
            isacd: go(Strategy::Isacd, MidPolicy::Capa),
            dppo: go(Strategy::Dppo, MidPolicy::Capa),
            dsacd_random: go(Strategy::Dsacd, MidPolicy::Random),
            baseline_mean,
            elapsed: t.elapsed(),
        }
    })
}

fn means(log: &[EvalRow], from: usize) -> Vec<f64> {
    log.iter().filter(|r| r.interaction > from).map(|r| r.mean).collect()
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Seeds whose best mean test score after `from` interactions exceeds `bar`.
fn seeds_above(logs: &[Vec<EvalRow>], from: usize, bar: f64) -> usize {
    logs.iter().filter(|l| means(l, from).iter().any(|&m| m > bar)).count()
}

#[test]
fn criterion_7_training_smoke() {
    let r = runs();
    let budget = TrainSchedule::default().budget;
    let sacd_start = HyperParams::masacd().update_start;
    let dsacd_ok = seeds_above(&r.dsacd, sacd_start, 0.0);
    let dppo_ok = seeds_above(&r.dppo, 0, 0.0);
    let dsacd_dn = seeds_above(&r.dsacd, sacd_start, r.baseline_mean);
    let dppo_dn = seeds_above(&r.dppo, 0, r.baseline_mean);
    let var_of = |logs: &[Vec<EvalRow>]| -> f64 {
        logs.iter().map(|l| variance(&means(l, budget - 2000))).sum::<f64>() / logs.len() as f64
    };
    let (vd, vi) = (var_of(&r.dsacd), var_of(&r.isacd));
    let pass = dsacd_ok >= 3 && dppo_ok >= 3 && vd < vi && r.elapsed < Duration::from_secs(45 * 60);
    report(
        7,
        "training smoke",
        pass,
        &format!(
            "seeds with score > 0 DSACD {dsacd_ok}/5, DPPO {dppo_ok}/5; above do-nothing mean {:.1} DSACD {dsacd_dn}/5, DPPO {dppo_dn}/5; final-2000 variance DSACD {vd:.1} vs ISACD {vi:.1}; {:.0?}",
            r.baseline_mean, r.elapsed
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_8_mid_policy_comparison() {
    let r = runs();
    let sd = |logs: &[Vec<EvalRow>]| -> f64 { logs.iter().map(|l| variance(&means(l, 0)).sqrt()).sum::<f64>() / logs.len() as f64 };
    let (capa, random) = (sd(&r.dsacd), sd(&r.dsacd_random));
    let pass = random > capa;
    report(8, "mid-policy comparison", pass, &format!("mean across-eval-point std: random {random:.2}, CAPA {capa:.2}"));
    assert!(pass);
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_9_determinism() {
    let mut same = true;
    let mut files = 0;
    for (strategy, mid) in [("dsacd", "random"), ("dppo", "capa")] {
        let outputs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
        for out in &outputs {
            let cfg = ExperimentConfig::default()
                .with_overrides(&[
                    format!("algo.strategy={strategy}"),
                    format!("hierarchy.mid_policy={mid}"),
                    "algo.width=6".into(),
                    "algo.update_start=40".into(),
                    "algo.batch_size=8".into(),
                    "algo.minibatch_size=8".into(),
                    "run.seeds=[0, 7]".into(),
                    "run.budget=150".into(),
                    "run.eval_period=50".into(),
                    format!("run.output=\"{}\"", out.path().display()),
                ])
                .unwrap();
            train(&cfg).unwrap();
        }
        let name = format!("{strategy}-{mid}");
        for seed in [0, 7] {
            let rel = |f: &str| format!("{name}/seed_{seed}/{f}");
            let mut names = vec![rel("scores.csv"), rel("updates.csv")];
            names.extend((0..3).map(|k| rel(&format!("agent_{k}.ckpt"))));
            for f in names {
                let a = std::fs::read(outputs[0].path().join(&f)).unwrap();
                let b = std::fs::read(outputs[1].path().join(&f)).unwrap();
                same &= a == b && !a.is_empty();
                files += 1;
            }
        }
        same &= std::fs::read(outputs[0].path().join(&name).join("curve.csv")).unwrap()
            == std::fs::read(outputs[1].path().join(&name).join("curve.csv")).unwrap();
    }
    report(9, "determinism", same, &format!("{files} score logs, update logs and checkpoints byte-identical"));
    assert!(same);
}
