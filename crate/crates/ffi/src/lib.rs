//! C interface to the tethernet toolkit.
//!
//! Handles are opaque pointers created by `tn_*_new` / `tn_*_load` and
//! released with the matching `tn_*_free`. Every fallible call returns a
//! [`TnStatus`]; on failure the message is kept per thread and can be read
//! with [`tn_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tethernet::config::{BoundPolicy, CaptureMode};
use tethernet::policy::{reward, AimingAction, Environment, PolicyModel, RewardConfig, RewardInputs, Scenario};
use tethernet::surrogate::SurrogateModel;
use tethernet::{Config, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    SchemaVersion = 5,
    Malformed = 6,
    WidthMismatch = 7,
    VariantMismatch = 8,
    Scenario = 9,
    Training = 10,
    Diverged = 11,
    InvalidInput = 12,
    Panic = 13,
}

impl From<&Error> for TnStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Toml(_) => TnStatus::Config,
            Error::Io { .. } => TnStatus::Io,
            Error::SchemaVersion { .. } => TnStatus::SchemaVersion,
            Error::Malformed { .. } | Error::Json(_) => TnStatus::Malformed,
            Error::WidthMismatch { .. } => TnStatus::WidthMismatch,
            Error::VariantMismatch { .. } => TnStatus::VariantMismatch,
            Error::Scenario(_) => TnStatus::Scenario,
            Error::Training(_) => TnStatus::Training,
            Error::Diverged { .. } => TnStatus::Diverged,
            Error::InvalidInput(_) => TnStatus::InvalidInput,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(TnStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TnStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TnStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside tethernet".into());
            TnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(TnStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// including the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tn_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque episode environment.
pub struct TnEnvironment(Environment);

/// Opaque trained surrogate.
pub struct TnSurrogate(SurrogateModel);

/// Opaque trained policy.
pub struct TnPolicy(PolicyModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TnEpisodeResult {
    pub triggered: bool,
    pub success: bool,
    pub clipped: bool,
    /// Infinite when the closing never triggered.
    pub settled_cqi: f64,
    pub locked_pairs: usize,
    pub mouth_area: f64,
    pub total_fuel: f64,
    pub reward: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TnRewardConfig {
    pub fuel_weight: f64,
    pub max_fuel: f64,
    pub max_mouth_area: f64,
    pub cqi_threshold: f64,
    pub locked_threshold: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TnRewardInputs {
    pub mouth_area: f64,
    pub settled_cqi: f64,
    pub locked_pairs: usize,
    pub total_fuel: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TnPrediction {
    pub cqi: f64,
    pub locked_raw: f64,
    pub locked_pairs: usize,
}

/// Builds an environment from TOML text (null for defaults) and a reference
/// fuel in kg (non-positive to use the configured value).
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_environment_new(
    config_toml: *const c_char,
    max_fuel: f64,
    out: *mut *mut TnEnvironment,
) -> TnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = if config_toml.is_null() {
            Config::default()
        } else {
            Config::from_toml_str(str_arg(config_toml, "config")?)?
        };
        let fuel = (max_fuel > 0.0).then_some(max_fuel);
        let env = Environment::new(&config, fuel, None)?;
        *out = Box::into_raw(Box::new(TnEnvironment(env)));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`tn_environment_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tn_environment_free(env: *mut TnEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of MUs; an action holds twice as many offsets.
///
/// # Safety
/// `env` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tn_environment_mu_count(env: *const TnEnvironment) -> usize {
    env.as_ref().map_or(0, |e| e.0.mu_count())
}

/// Copies `surrogate` into the environment for surrogate-mode episodes.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn tn_environment_set_surrogate(env: *mut TnEnvironment, surrogate: *const TnSurrogate) -> TnStatus {
    guard(|| {
        let env = out_arg(env, "env")?;
        let s = surrogate.as_ref().ok_or_else(|| null("surrogate"))?;
        let rebuilt = Environment::new(&env.0.config, Some(env.0.reward.max_fuel), Some(s.0.clone()))?;
        env.0 = rebuilt;
        Ok(())
    })
}

/// Runs one episode. `offsets` holds `dx1, dy1, dx2, dy2, ...` (length
/// twice the MU count); out-of-box offsets are rejected.
///
/// # Safety
/// `debris` must point to three doubles, `offsets` to `offsets_len` doubles
/// and `out` to a writable result.
#[no_mangle]
pub unsafe extern "C" fn tn_run_episode(
    env: *const TnEnvironment,
    debris: *const f64,
    seed: u64,
    offsets: *const f64,
    offsets_len: usize,
    full_capture: bool,
    out: *mut TnEpisodeResult,
) -> TnStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        let d = slice_arg(debris, 3, "debris")?;
        let offsets = slice_arg(offsets, offsets_len, "offsets")?;
        let out = out_arg(out, "out")?;
        let expected = 2 * env.0.mu_count();
        if offsets.len() != expected {
            return Err(Error::WidthMismatch {
                expected,
                actual: offsets.len(),
            }
            .into());
        }
        let scenario = Scenario {
            debris: [d[0], d[1], d[2]],
            seed,
            variant: env.0.variant(),
        };
        let mode = if full_capture {
            CaptureMode::FullCapture
        } else {
            CaptureMode::SurrogateCapture
        };
        let o = env.0.execute(&scenario, &AimingAction::from_flat(offsets), mode, BoundPolicy::Reject)?;
        *out = TnEpisodeResult {
            triggered: o.triggered,
            success: o.success,
            clipped: o.clipped,
            settled_cqi: o.settled_cqi,
            locked_pairs: o.locked_pairs,
            mouth_area: o.mouth_area,
            total_fuel: o.total_fuel,
            reward: o.reward,
        };
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_surrogate_load(path: *const c_char, out: *mut *mut TnSurrogate) -> TnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = SurrogateModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TnSurrogate(model)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`tn_surrogate_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tn_surrogate_free(s: *mut TnSurrogate) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tn_surrogate_input_width(s: *const TnSurrogate) -> usize {
    s.as_ref().map_or(0, |s| s.0.input_width())
}

/// Deterministic prediction from one feature vector.
///
/// # Safety
/// `features` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_surrogate_predict(
    s: *const TnSurrogate,
    features: *const f64,
    len: usize,
    out: *mut TnPrediction,
) -> TnStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("surrogate"))?;
        let f = slice_arg(features, len, "features")?;
        let out = out_arg(out, "out")?;
        let p = s.0.predict(f)?;
        *out = TnPrediction {
            cqi: p.cqi,
            locked_raw: p.locked_raw,
            locked_pairs: p.locked_pairs,
        };
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_policy_load(path: *const c_char, out: *mut *mut TnPolicy) -> TnStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = PolicyModel::load(&PathBuf::from(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(TnPolicy(model)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`tn_policy_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tn_policy_free(p: *mut TnPolicy) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn tn_policy_action_dim(p: *const TnPolicy) -> usize {
    p.as_ref().map_or(0, |p| p.0.action_dim())
}

/// Mean offsets for a debris position, written to `out[0..out_len]`.
///
/// # Safety
/// `state` must point to `state_len` doubles, `out` to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tn_policy_mean(
    p: *const TnPolicy,
    state: *const f64,
    state_len: usize,
    out: *mut f64,
    out_len: usize,
) -> TnStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("policy"))?;
        let s = slice_arg(state, state_len, "state")?;
        let mean = p.0.mean(s)?;
        if out_len != mean.len() {
            return Err(Error::WidthMismatch {
                expected: mean.len(),
                actual: out_len,
            }
            .into());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&mean);
        Ok(())
    })
}

/// Episode reward from capture outcome quantities.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tn_reward(config: *const TnRewardConfig, inputs: *const TnRewardInputs, out: *mut f64) -> TnStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let i = inputs.as_ref().ok_or_else(|| null("inputs"))?;
        let out = out_arg(out, "out")?;
        let cfg = RewardConfig {
            fuel_weight: c.fuel_weight,
            max_fuel: c.max_fuel,
            max_mouth_area: c.max_mouth_area,
            cqi_threshold: c.cqi_threshold,
            locked_threshold: c.locked_threshold,
        };
        cfg.validate()?;
        *out = reward(
            &RewardInputs {
                mouth_area: i.mouth_area,
                settled_cqi: i.settled_cqi,
                locked_pairs: i.locked_pairs,
                total_fuel: i.total_fuel,
            },
            &cfg,
        );
        Ok(())
    })
}
