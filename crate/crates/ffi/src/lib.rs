//! C ABI over the grid environment, DC power flow and evaluation score.
//!
//! Objects are opaque handles created by `gm_*_new`/`gm_grid_*` and released
//! with the matching `*_free`. Every fallible call returns a [`GmStatus`];
//! on failure a message is kept per thread and read back with
//! [`gm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::sync::Arc;

use grid_marl::env::{generate_chronics, l2rpn_score, Action, ChronicProfile, EnvParams, GridEnv, Split, CHRONIC_LENGTH};
use grid_marl::grid::{case5, Bus, GridSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    EpisodeDone = 4,
    BufferTooSmall = 5,
    Runtime = 6,
}

/// Parsed grid description.
pub struct GmGrid {
    spec: Arc<GridSpec>,
}

/// One running episode.
pub struct GmEnv {
    env: GridEnv,
    last_reward: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: GmStatus, msg: impl Into<String>) -> GmStatus {
    let text = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
    status
}

/// Message of the last failed call on this thread; empty when none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The bundled five-substation grid. Never null.
#[no_mangle]
pub extern "C" fn gm_grid_case5() -> *mut GmGrid {
    Box::into_raw(Box::new(GmGrid { spec: Arc::new(case5()) }))
}

/// Parses a grid from TOML text.
///
/// # Safety
/// `toml` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn gm_grid_from_toml(toml: *const c_char, out: *mut *mut GmGrid) -> GmStatus {
    if toml.is_null() || out.is_null() {
        return fail(GmStatus::NullPointer, "null argument");
    }
    let Ok(text) = CStr::from_ptr(toml).to_str() else {
        return fail(GmStatus::InvalidArgument, "grid text is not UTF-8");
    };
    match GridSpec::parse(text) {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(GmGrid { spec: Arc::new(spec) }));
            GmStatus::Ok
        }
        Err(e) => fail(GmStatus::InvalidGrid, e.to_string()),
    }
}

/// # Safety
/// `grid` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gm_grid_free(grid: *mut GmGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_grid_n_lines(grid: *const GmGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.spec.n_lines())
}

/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_grid_n_substations(grid: *const GmGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.spec.n_substations())
}

/// # Safety
/// `grid` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_grid_substation_size(grid: *const GmGrid, substation: usize) -> usize {
    grid.as_ref().filter(|g| substation < g.spec.n_substations()).map_or(0, |g| g.spec.substation_size(substation))
}

/// Starts an episode on window `window` of the test split of synthetic
/// chronics generated from `chronic_seed`. `profile` is 0 calm, 1 default,
/// 2 stressed.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_env_new(
    grid: *const GmGrid,
    chronic_seed: u64,
    profile: c_int,
    window: usize,
    out: *mut *mut GmEnv,
) -> GmStatus {
    let (Some(grid), false) = (grid.as_ref(), out.is_null()) else {
        return fail(GmStatus::NullPointer, "null argument");
    };
    let profile = match profile {
        0 => ChronicProfile::default().calm(),
        1 => ChronicProfile::default(),
        2 => ChronicProfile::default().stressed(),
        p => return fail(GmStatus::InvalidArgument, format!("unknown profile {p}")),
    };
    let set = match generate_chronics(&grid.spec, chronic_seed, 20, CHRONIC_LENGTH, &profile) {
        Ok(s) => s,
        Err(e) => return fail(GmStatus::InvalidArgument, e.to_string()),
    };
    let windows = set.windows(Split::Test);
    let Some(w) = windows.get(window) else {
        return fail(GmStatus::InvalidArgument, format!("window {window} of {}", windows.len()));
    };
    let chronic = Arc::new(set.chronics[w.chronic].clone());
    match GridEnv::reset(grid.spec.clone(), EnvParams::default(), chronic, w.offset, set.window) {
        Ok(env) => {
            *out = Box::into_raw(Box::new(GmEnv { env, last_reward: 0.0 }));
            GmStatus::Ok
        }
        Err(e) => fail(GmStatus::Runtime, e.to_string()),
    }
}

/// # Safety
/// `env` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn gm_env_free(env: *mut GmEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

unsafe fn step(env: *mut GmEnv, action: impl FnOnce(&GridSpec) -> Result<Action, String>, done: *mut bool) -> GmStatus {
    let Some(e) = env.as_mut() else {
        return fail(GmStatus::NullPointer, "null environment");
    };
    if e.env.is_done() {
        return fail(GmStatus::EpisodeDone, "episode already finished");
    }
    let action = match action(e.env.spec()) {
        Ok(a) => a,
        Err(m) => return fail(GmStatus::InvalidArgument, m),
    };
    match e.env.step(&action) {
        Ok(out) => {
            e.last_reward = out.reward;
            if let Some(d) = done.as_mut() {
                *d = out.done;
            }
            GmStatus::Ok
        }
        Err(err) => fail(GmStatus::Runtime, err.to_string()),
    }
}

/// Advances one step without changing the topology. `done` may be null.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gm_env_step_do_nothing(env: *mut GmEnv, done: *mut bool) -> GmStatus {
    step(env, |_| Ok(Action::DoNothing), done)
}

/// Sets the bus of every element of `substation` (1 or 2 per entry) and
/// advances one step. `done` may be null.
///
/// # Safety
/// `env` must be a live handle and `buses` point at `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn gm_env_step_set_bus(
    env: *mut GmEnv,
    substation: usize,
    buses: *const u8,
    len: usize,
    done: *mut bool,
) -> GmStatus {
    if buses.is_null() && len > 0 {
        return fail(GmStatus::NullPointer, "null bus array");
    }
    let raw: &[u8] = if len == 0 { &[] } else { std::slice::from_raw_parts(buses, len) };
    step(
        env,
        |spec| {
            let config = raw
                .iter()
                .map(|b| match b {
                    1 => Ok(Bus::One),
                    2 => Ok(Bus::Two),
                    b => Err(format!("bus {b} is not 1 or 2")),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Action::set_bus(spec, substation, config).map_err(|e| e.to_string())
        },
        done,
    )
}

/// Reward of the last step; 0 before the first.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_env_last_reward(env: *const GmEnv) -> f64 {
    env.as_ref().map_or(0.0, |e| e.last_reward)
}

/// Current timestep within the episode.
///
/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_env_timestep(env: *const GmEnv) -> usize {
    env.as_ref().map_or(0, |e| e.env.observation().timestep)
}

/// # Safety
/// `env` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gm_env_is_done(env: *const GmEnv) -> bool {
    env.as_ref().is_none_or(|e| e.env.is_done())
}

/// Copies the per-line loading ratios into `out`, which holds `len` doubles.
///
/// # Safety
/// `env` must be a live handle and `out` point at `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_env_rho(env: *const GmEnv, out: *mut f64, len: usize) -> GmStatus {
    let (Some(e), false) = (env.as_ref(), out.is_null()) else {
        return fail(GmStatus::NullPointer, "null argument");
    };
    let rho = &e.env.observation().rho;
    if len < rho.len() {
        return fail(GmStatus::BufferTooSmall, format!("need {} entries", rho.len()));
    }
    std::slice::from_raw_parts_mut(out, rho.len()).copy_from_slice(rho);
    GmStatus::Ok
}

/// Evaluation score of an agent surviving `agent_steps` with cumulative cost
/// `agent_cost` against a baseline, over an episode of `episode_len` steps.
#[no_mangle]
pub extern "C" fn gm_l2rpn_score(
    agent_steps: usize,
    baseline_steps: usize,
    episode_len: usize,
    agent_cost: f64,
    baseline_cost: f64,
) -> f64 {
    l2rpn_score(agent_steps, baseline_steps, episode_len, agent_cost, baseline_cost)
}

/// Runs the command-line front end with `argc` arguments (program name
/// first) and returns its exit code.
///
/// # Safety
/// `argv` must point at `argc` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn gm_cli_main(argc: c_int, argv: *const *const c_char) -> c_int {
    if argv.is_null() || argc < 1 {
        return 2;
    }
    let args: Vec<String> = (0..argc as usize)
        .map(|i| {
            let p = *argv.add(i);
            if p.is_null() {
                String::new()
            } else {
                CStr::from_ptr(p).to_string_lossy().into_owned()
            }
        })
        .collect();
    grid_marl::harness::main_with_args(args)
}
