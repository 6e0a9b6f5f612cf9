// SPDX-License-Identifier: Apache-2.0

//! C ABI over the uniedit engine.
//!
//! Worlds are opaque handles. Scenes, plans and results cross the boundary as JSON strings.
//! Every call returns a [`UeStatus`]; on failure [`ue_last_error_message`] describes the
//! error on the calling thread. Strings returned through out-pointers are owned by the
//! caller and released with [`ue_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use uniedit::config::RunConfig;
use uniedit::instruction_parser::{build_edit_plan, TaskType};
use uniedit::scene_graph::SceneGraph;
use uniedit::semantic_space::ConceptVocabulary;
use uniedit::uev::run_uev;
use uniedit::velocity_model::ExactGaussianVelocity;
use uniedit::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidConfig = 4,
    UnknownToken = 5,
    Grammar = 6,
    UnresolvedReferent = 7,
    UnsupportedTask = 8,
    InvalidGraph = 9,
    Vocabulary = 10,
    Numeric = 11,
    Io = 12,
    Panic = 13,
}

/// A concept vocabulary.
pub struct UeWorld {
    vocab: ConceptVocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> UeStatus {
    match e {
        Error::UnknownToken(_) => UeStatus::UnknownToken,
        Error::InvalidVocabulary(_) | Error::EmbeddingMismatch { .. } => UeStatus::Vocabulary,
        Error::DimensionMismatch { .. }
        | Error::ZeroNorm
        | Error::NullPrompt
        | Error::TimeOutOfRange(_) => UeStatus::Numeric,
        Error::InvalidGraph(_) | Error::InapplicableOp { .. } | Error::InvalidReplacement(_) => {
            UeStatus::InvalidGraph
        }
        Error::Grammar { .. } => UeStatus::Grammar,
        Error::UnresolvedReferent(_) => UeStatus::UnresolvedReferent,
        Error::UnsupportedTask(_) => UeStatus::UnsupportedTask,
        Error::InvalidConfig(_) => UeStatus::InvalidConfig,
        Error::Io { .. } => UeStatus::Io,
        Error::Json { .. } | Error::Csv(_) => UeStatus::InvalidJson,
    }
}

struct Failure(UeStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            UeStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            UeStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(UeStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(UeStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn world<'a>(p: *const UeWorld) -> Result<&'a UeWorld, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(UeStatus::NullPointer, "world is null".into()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(UeStatus::NullPointer, "out is null".into()));
    }
    let c = CString::new(s)
        .map_err(|_| Failure(UeStatus::InvalidUtf8, "output holds a nul byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_world(out: *mut *mut UeWorld, vocab: ConceptVocabulary) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(UeStatus::NullPointer, "out is null".into()));
    }
    *out = Box::into_raw(Box::new(UeWorld { vocab }));
    Ok(())
}

fn task(name: &str) -> Result<TaskType, Failure> {
    name.parse::<TaskType>()
        .map_err(|e| Failure(UeStatus::InvalidConfig, e.to_string()))
}

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn ue_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ue_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the default world for `seed`.
///
/// # Safety
/// `out` must be a valid pointer to a writable `UeWorld *`.
#[no_mangle]
pub unsafe extern "C" fn ue_world_default(seed: u64, out: *mut *mut UeWorld) -> UeStatus {
    guard(|| put_world(out, ConceptVocabulary::default_world(seed)))
}

/// Loads a world from vocabulary JSON as written by `uniedit gen-world`.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer to a writable `UeWorld *`.
#[no_mangle]
pub unsafe extern "C" fn ue_world_from_json(
    json: *const c_char,
    out: *mut *mut UeWorld,
) -> UeStatus {
    guard(|| {
        let vocab = ConceptVocabulary::from_json(text(json, "json")?)?;
        put_world(out, vocab)
    })
}

/// Latent dimension of the world, or 0 for a null handle.
///
/// # Safety
/// `world` must be null or a handle returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ue_world_dimension(world: *const UeWorld) -> usize {
    world.as_ref().map_or(0, |w| w.vocab.dimension())
}

/// Serializes the world back to vocabulary JSON.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer to a writable `char *`.
#[no_mangle]
pub unsafe extern "C" fn ue_world_to_json(w: *const UeWorld, out: *mut *mut c_char) -> UeStatus {
    guard(|| put_string(out, world(w)?.vocab.to_json()))
}

/// Releases a world. Null is ignored.
///
/// # Safety
/// `world` must be null or a handle returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ue_world_free(world: *mut UeWorld) {
    if !world.is_null() {
        drop(Box::from_raw(world));
    }
}

/// Parses `instruction` against `scene_json` and writes the edit plan as JSON.
///
/// # Safety
/// String arguments must be nul-terminated; `w` must be a live handle and `out` a valid
/// pointer to a writable `char *`.
#[no_mangle]
pub unsafe extern "C" fn ue_edit_plan(
    w: *const UeWorld,
    scene_json: *const c_char,
    instruction: *const c_char,
    task_name: *const c_char,
    out: *mut *mut c_char,
) -> UeStatus {
    guard(|| {
        let w = world(w)?;
        let scene = SceneGraph::from_json(text(scene_json, "scene_json")?)?;
        let plan = build_edit_plan(
            &w.vocab,
            &scene,
            text(instruction, "instruction")?,
            task(text(task_name, "task")?)?,
        )?;
        put_string(out, plan.to_json())
    })
}

/// Runs the understand / edit / verify loop and writes the result summary as JSON.
/// `config_toml` uses the keys of the CLI config file and may be null for defaults;
/// its `seed`, `world` and `out` keys are ignored.
///
/// # Safety
/// String arguments must be nul-terminated (`config_toml` may be null); `w` must be a live
/// handle and `out` a valid pointer to a writable `char *`.
#[no_mangle]
pub unsafe extern "C" fn ue_edit_run(
    w: *const UeWorld,
    scene_json: *const c_char,
    instruction: *const c_char,
    task_name: *const c_char,
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut c_char,
) -> UeStatus {
    guard(|| {
        let w = world(w)?;
        let scene = SceneGraph::from_json(text(scene_json, "scene_json")?)?;
        let rc = if config_toml.is_null() {
            RunConfig::default()
        } else {
            RunConfig::from_toml(text(config_toml, "config_toml")?)?
        };
        let cfg = rc.loop_config()?;
        let model = ExactGaussianVelocity::default();
        let result = run_uev(
            &model,
            &w.vocab,
            &scene,
            text(instruction, "instruction")?,
            task(text(task_name, "task")?)?,
            &cfg,
            seed,
        )?;
        let json = serde_json::to_string_pretty(&result.summary())
            .map_err(|e| Failure(UeStatus::InvalidJson, e.to_string()))?;
        put_string(out, json)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ue_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
