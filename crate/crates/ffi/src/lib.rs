//! C ABI for evoplast.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_from_*` functions and released with the matching `*_free`. Every
//! fallible function returns an [`EvoplastStatus`]; on failure a message is
//! available from [`evoplast_last_error`] on the same thread. Strings handed
//! out by the library are freed with [`evoplast_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use evoplast::env_cartpole::{self, Action, CartPoleParams, CartPoleState};
use evoplast::evolution::Task;
use evoplast::expr_graph::Genome;
use evoplast::snn::NamedRule;
use evoplast::task_cartpole::CartPoleTaskConfig;
use evoplast::task_xor::XorConfig;
use evoplast::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvoplastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGenome = 3,
    UnknownRule = 4,
    Config = 5,
    NonFinite = 6,
    Internal = 99,
}

/// Opaque genome handle.
pub struct EvoplastGenome {
    genome: Genome,
}

/// Opaque cart-pole environment handle with its own random source.
pub struct EvoplastCartPole {
    params: CartPoleParams,
    state: CartPoleState,
    rng: ChaCha8Rng,
    steps: usize,
}

/// Cart-pole observation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvoplastCartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

pub const EVOPLAST_ACTION_LEFT: u32 = 0;
pub const EVOPLAST_ACTION_RIGHT: u32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn status_of(e: &Error) -> EvoplastStatus {
    match e {
        Error::InvalidGenome(_) | Error::InputArity { .. } | Error::Expression(_) => EvoplastStatus::InvalidGenome,
        Error::UnknownRule { .. } => EvoplastStatus::UnknownRule,
        Error::Config(_) | Error::Json(_) => EvoplastStatus::Config,
        Error::NonFinite(_) => EvoplastStatus::NonFinite,
        _ => EvoplastStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EvoplastStatus, String)>) -> EvoplastStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EvoplastStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EvoplastStatus::Internal
        }
    }
}

fn lib(e: Error) -> (EvoplastStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EvoplastStatus, String) {
    (EvoplastStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EvoplastStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EvoplastStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

/// Message of the most recent failure on this thread (empty if none). The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn evoplast_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn evoplast_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn evoplast_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a genome from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_from_json(json: *const c_char, out: *mut *mut EvoplastGenome) -> EvoplastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = read_str(json, "json")?;
        let genome: Genome = serde_json::from_str(text).map_err(|e| (EvoplastStatus::InvalidGenome, e.to_string()))?;
        *out = Box::into_raw(Box::new(EvoplastGenome { genome }));
        Ok(())
    })
}

/// Genome of a built-in rule (`mstdpet`, `mult_rstdp`, `xor_best`,
/// `cartpole_similar`, `cartpole_best`, `null`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_named(name: *const c_char, out: *mut *mut EvoplastGenome) -> EvoplastStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rule: NamedRule = read_str(name, "name")?.parse().map_err(lib)?;
        *out = Box::into_raw(Box::new(EvoplastGenome { genome: rule.genome() }));
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not have been freed. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_free(g: *mut EvoplastGenome) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of inputs the genome reads (0 for a null handle).
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_n_inputs(g: *const EvoplastGenome) -> usize {
    g.as_ref().map_or(0, |g| g.genome.n_inputs())
}

/// Evaluates the genome on `n_inputs` values.
///
/// # Safety
/// `g` must be a live handle, `inputs` must point to `n_inputs` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_evaluate(
    g: *const EvoplastGenome,
    inputs: *const f64,
    n_inputs: usize,
    out: *mut f64,
) -> EvoplastStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("genome"))?;
        if inputs.is_null() && n_inputs > 0 {
            return Err(null("inputs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = if n_inputs == 0 { &[][..] } else { std::slice::from_raw_parts(inputs, n_inputs) };
        *out = g.genome.evaluate(xs).map_err(lib)?;
        Ok(())
    })
}

/// Simplified infix expression; free with [`evoplast_string_free`].
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_expression(g: *const EvoplastGenome, out: *mut *mut c_char) -> EvoplastStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("genome"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(g.genome.to_expression_string());
        Ok(())
    })
}

/// JSON form of the genome; free with [`evoplast_string_free`].
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_genome_to_json(g: *const EvoplastGenome, out: *mut *mut c_char) -> EvoplastStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("genome"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(serde_json::to_string(&g.genome).map_err(|e| lib(e.into()))?);
        Ok(())
    })
}

unsafe fn task_fitness(
    task: Task,
    g: *const EvoplastGenome,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut f64,
) -> EvoplastStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("genome"))?;
        if seeds.is_null() {
            return Err(null("seeds"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        if g.genome.n_inputs() != task.n_inputs() {
            return Err((
                EvoplastStatus::InvalidGenome,
                format!(
                    "genome has {} inputs, the {} task needs {}",
                    g.genome.n_inputs(),
                    task.name(),
                    task.n_inputs()
                ),
            ));
        }
        let seeds = std::slice::from_raw_parts(seeds, n_seeds);
        *out = task.genome_fitness(&g.genome, seeds).map_err(lib)?;
        Ok(())
    })
}

/// XOR fitness with the default configuration: mean final test accuracy
/// over one trial per seed. `n_seeds` must be 3.
///
/// # Safety
/// `g` must be a live handle, `seeds` must point to `n_seeds` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_xor_fitness(
    g: *const EvoplastGenome,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut f64,
) -> EvoplastStatus {
    task_fitness(Task::Xor(XorConfig::default()), g, seeds, n_seeds, out)
}

/// Cart-pole fitness with the default configuration: mean last-5-episode
/// balance time over one trial per seed. `n_seeds` must be 3.
///
/// # Safety
/// As for [`evoplast_xor_fitness`].
#[no_mangle]
pub unsafe extern "C" fn evoplast_cartpole_fitness(
    g: *const EvoplastGenome,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut f64,
) -> EvoplastStatus {
    task_fitness(Task::Cartpole(CartPoleTaskConfig::default()), g, seeds, n_seeds, out)
}

fn to_c(s: CartPoleState) -> EvoplastCartPoleState {
    EvoplastCartPoleState {
        x: s.x,
        x_dot: s.x_dot,
        theta: s.theta,
        theta_dot: s.theta_dot,
    }
}

/// New environment with default physics, already reset from `seed`.
#[no_mangle]
pub extern "C" fn evoplast_cartpole_new(seed: u64) -> *mut EvoplastCartPole {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = env_cartpole::reset(&mut rng);
    Box::into_raw(Box::new(EvoplastCartPole {
        params: CartPoleParams::default(),
        state,
        rng,
        steps: 0,
    }))
}

/// # Safety
/// `env` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn evoplast_cartpole_free(env: *mut EvoplastCartPole) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Draws a new initial state.
///
/// # Safety
/// `env` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn evoplast_cartpole_reset(env: *mut EvoplastCartPole, out: *mut EvoplastCartPoleState) -> EvoplastStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        env.state = env_cartpole::reset(&mut env.rng);
        env.steps = 0;
        if let Some(o) = out.as_mut() {
            *o = to_c(env.state);
        }
        Ok(())
    })
}

/// Current state.
///
/// # Safety
/// `env` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn evoplast_cartpole_state(env: *const EvoplastCartPole, out: *mut EvoplastCartPoleState) -> EvoplastStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = to_c(env.state);
        Ok(())
    })
}

/// Applies `EVOPLAST_ACTION_LEFT` or `EVOPLAST_ACTION_RIGHT`. `done` is set
/// when the pole passes the angle limit or the episode reaches its maximum
/// length.
///
/// # Safety
/// `env` must be a live handle; `out` and `done` may be null.
#[no_mangle]
pub unsafe extern "C" fn evoplast_cartpole_step(
    env: *mut EvoplastCartPole,
    action: u32,
    out: *mut EvoplastCartPoleState,
    done: *mut bool,
) -> EvoplastStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let action = match action {
            EVOPLAST_ACTION_LEFT => Action::Left,
            EVOPLAST_ACTION_RIGHT => Action::Right,
            other => return Err((EvoplastStatus::InvalidArgument, format!("unknown action {other}"))),
        };
        let (next, fallen) = env_cartpole::step(env.state, action, &env.params);
        env.state = next;
        env.steps += 1;
        if let Some(o) = out.as_mut() {
            *o = to_c(next);
        }
        if let Some(d) = done.as_mut() {
            *d = fallen || env.steps >= env.params.max_steps;
        }
        Ok(())
    })
}
