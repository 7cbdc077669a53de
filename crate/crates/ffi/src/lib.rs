//! C ABI for `zdforge`.
//!
//! Games live behind an opaque [`ZdGame`] handle created from game JSON and
//! released with [`zd_game_free`]. Every fallible call returns a
//! [`ZdStatus`]; on failure [`zd_last_error_message`] describes the error.
//! Strings returned to the caller are freed with [`zd_string_free`].
//!
//! Probability arrays are row-major: `probs[i * m + j]` is player `i`'s
//! probability of action 1 after 1-based state `j + 1`, `m = 2^n`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use zdforge::equilibrium::gap_report;
use zdforge::evaluation::analytic_utility;
use zdforge::io::GameDocument;
use zdforge::zd::{equalizer_for_gamma, gamma_interval, synthesize_equalizer, EqualizerSpec};
use zdforge::{Error, GameSpec, MemoryOneStrategy};

/// Opaque game handle.
pub struct ZdGame {
    game: GameSpec,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZdStatus {
    Ok = 0,
    InvalidArgument = 2,
    EmptyRegion = 3,
    GammaOutOfRange = 4,
    Unsupported = 5,
    Numerical = 6,
    NullPointer = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> ZdStatus {
    match err {
        Error::NoEqualizer => ZdStatus::EmptyRegion,
        Error::GammaOutOfRange { .. } => ZdStatus::GammaOutOfRange,
        Error::Unsupported(_) | Error::NoFollowerEquilibrium(_) => ZdStatus::Unsupported,
        Error::Numerical(_) => ZdStatus::Numerical,
        _ => ZdStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ZdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            ZdStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            ZdStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            ZdStatus::Panic
        }
    }
}

unsafe fn game_ref<'a>(game: *const ZdGame) -> Result<&'a GameSpec, Failure> {
    game.as_ref().map(|g| &g.game).ok_or(Failure::Null("game"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Lib(Error::Numerical("string contains a NUL byte".into())))
}

/// Parses game JSON into a new handle stored in `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zd_game_from_json(json: *const c_char, out: *mut *mut ZdGame) -> ZdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Domain(format!("game JSON is not UTF-8: {e}")))?;
        let doc = GameDocument::from_json(text)?;
        *out = Box::into_raw(Box::new(ZdGame { game: doc.game }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `game` must come from [`zd_game_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn zd_game_free(game: *mut ZdGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// # Safety
/// `game` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn zd_game_player_count(game: *const ZdGame, out: *mut usize) -> ZdStatus {
    guard(|| {
        *out_ref(out, "out")? = game_ref(game)?.n();
        Ok(())
    })
}

/// # Safety
/// `game` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn zd_game_state_count(game: *const ZdGame, out: *mut usize) -> ZdStatus {
    guard(|| {
        *out_ref(out, "out")? = game_ref(game)?.num_states();
        Ok(())
    })
}

/// Discounted utilities of every player. `probs` holds `n * m` entries,
/// `init_probs` and `out` hold `n`.
///
/// # Safety
/// Array arguments must point to at least the stated number of `f64`s.
#[no_mangle]
pub unsafe extern "C" fn zd_analytic_utility(
    game: *const ZdGame,
    probs: *const f64,
    init_probs: *const f64,
    out: *mut f64,
) -> ZdStatus {
    guard(|| {
        let game = game_ref(game)?;
        let (n, m) = (game.n(), game.num_states());
        let probs = input(probs, n * m, "probs")?;
        let init = input(init_probs, n, "init_probs")?;
        let out = output(out, n, "out")?;
        let profile = probs
            .chunks(m)
            .zip(init)
            .map(|(p, &i)| MemoryOneStrategy::new(p.to_vec(), i))
            .collect::<zdforge::Result<Vec<_>>>()?;
        out.copy_from_slice(&analytic_utility(game, &profile)?.utilities);
        Ok(())
    })
}

/// Enforceable interval `[Γ⁻, Γ⁺]` for weights `omega` (`n - 1` entries).
/// Returns `EMPTY_REGION` when no equalizer exists.
///
/// # Safety
/// `omega` must hold `omega_len` entries; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn zd_gamma_interval(
    game: *const ZdGame,
    omega: *const f64,
    omega_len: usize,
    leader_init: f64,
    out_lower: *mut f64,
    out_upper: *mut f64,
) -> ZdStatus {
    guard(|| {
        let game = game_ref(game)?;
        let omega = input(omega, omega_len, "omega")?;
        let lower = out_ref(out_lower, "out_lower")?;
        let upper = out_ref(out_upper, "out_upper")?;
        let (lo, hi) = gamma_interval(game, omega, leader_init)?.ok_or(Error::NoEqualizer)?;
        *lower = lo;
        *upper = hi;
        Ok(())
    })
}

/// Leader equalizer strategy for explicit `(γ, φ)`; writes `m` probabilities.
///
/// # Safety
/// `omega` must hold `omega_len` entries and `out_probs` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn zd_synthesize_equalizer(
    game: *const ZdGame,
    omega: *const f64,
    omega_len: usize,
    gamma: f64,
    phi: f64,
    leader_init: f64,
    out_probs: *mut f64,
) -> ZdStatus {
    guard(|| {
        let game = game_ref(game)?;
        let omega = input(omega, omega_len, "omega")?;
        let out = output(out_probs, game.num_states(), "out_probs")?;
        let spec = EqualizerSpec::new(omega.to_vec(), gamma, phi, leader_init)?;
        out.copy_from_slice(synthesize_equalizer(game, &spec)?.probs());
        Ok(())
    })
}

/// Leader equalizer strategy enforcing `gamma`, with the chosen `φ` in
/// `*out_phi`.
///
/// # Safety
/// `omega` must hold `omega_len` entries and `out_probs` room for `m`.
#[no_mangle]
pub unsafe extern "C" fn zd_equalizer_for_gamma(
    game: *const ZdGame,
    omega: *const f64,
    omega_len: usize,
    gamma: f64,
    leader_init: f64,
    out_phi: *mut f64,
    out_probs: *mut f64,
) -> ZdStatus {
    guard(|| {
        let game = game_ref(game)?;
        let omega = input(omega, omega_len, "omega")?;
        let phi = out_ref(out_phi, "out_phi")?;
        let out = output(out_probs, game.num_states(), "out_probs")?;
        let spec = equalizer_for_gamma(game, omega, gamma, leader_init)?;
        out.copy_from_slice(synthesize_equalizer(game, &spec)?.probs());
        *phi = spec.phi();
        Ok(())
    })
}

/// Gap report as JSON in `*out`, released with [`zd_string_free`].
///
/// # Safety
/// `omega` must hold `omega_len` entries and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn zd_gap_report_json(
    game: *const ZdGame,
    omega: *const f64,
    omega_len: usize,
    out: *mut *mut c_char,
) -> ZdStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let game = game_ref(game)?;
        let omega = input(omega, omega_len, "omega")?;
        *out = into_c_string(gap_report(game, omega)?.to_json()?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn zd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn zd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
