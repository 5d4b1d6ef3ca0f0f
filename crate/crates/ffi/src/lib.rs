//! C ABI over the core parsing, classification, and attack-prompt
//! primitives, so other languages can bind without re-implementing
//! them. Handles are opaque; strings returned to the caller are
//! heap-allocated and must be released with `bs_string_free`.

use std::ffi::{c_char, c_int, CStr, CString};
use std::ptr;

use blindspot::classifier::{classify_heuristic, Classifier, Label, Lexicons};
use blindspot::jailbreak::JailbreakConfig;
use blindspot::response::{
    has_substantive_reasoning, parse_completion, Completion, DEFAULT_CLOSE_DELIM,
    DEFAULT_OPEN_DELIM,
};

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The completion opens a reasoning block that never closes.
    MalformedCompletion = 3,
    /// Input failed validation (e.g. bad lexicon JSON).
    InvalidInput = 4,
}

/// Censorship labels (mirrors the core taxonomy).
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BsLabel {
    NotCensored = 0,
    Type1 = 1,
    Type2 = 2,
    Type3 = 3,
}

/// Opaque parsed completion.
pub struct BsCompletion {
    inner: Completion,
}

/// Opaque classifier (lexicons + thresholds), heuristic mode.
pub struct BsClassifier {
    inner: Classifier,
}

fn to_str<'a>(ptr: *const c_char) -> Result<&'a str, BsStatus> {
    if ptr.is_null() {
        return Err(BsStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| BsStatus::InvalidUtf8)
}

fn to_str_or(ptr: *const c_char, default: &str) -> Result<&str, BsStatus> {
    if ptr.is_null() {
        Ok(default)
    } else {
        to_str(ptr)
    }
}

fn into_c_string(s: &str) -> *mut c_char {
    CString::new(s.as_bytes().to_vec())
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn bs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string allocated by this library.
///
/// # Safety
/// `s` must have been returned by a `bs_*` function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse raw model output into reasoning and final answer. `open_delim`
/// and `close_delim` may be null for the defaults (`<think>` and
/// `</think>`). On success writes a handle to `out`.
///
/// # Safety
/// `raw` (and non-null delimiters) must be valid NUL-terminated
/// strings; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_completion_parse(
    raw: *const c_char,
    open_delim: *const c_char,
    close_delim: *const c_char,
    out: *mut *mut BsCompletion,
) -> BsStatus {
    if out.is_null() {
        return BsStatus::NullArgument;
    }
    let raw = match to_str(raw) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let open = match to_str_or(open_delim, DEFAULT_OPEN_DELIM) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let close = match to_str_or(close_delim, DEFAULT_CLOSE_DELIM) {
        Ok(s) => s,
        Err(status) => return status,
    };
    if open.is_empty() || close.is_empty() {
        return BsStatus::InvalidInput;
    }
    match parse_completion(raw, open, close) {
        Ok(completion) => {
            *out = Box::into_raw(Box::new(BsCompletion { inner: completion }));
            BsStatus::Ok
        }
        Err(_) => BsStatus::MalformedCompletion,
    }
}

/// The reasoning segment, or null when the completion has none.
/// Free with `bs_string_free`.
///
/// # Safety
/// `completion` must be a live handle from `bs_completion_parse`.
#[no_mangle]
pub unsafe extern "C" fn bs_completion_reasoning(completion: *const BsCompletion) -> *mut c_char {
    if completion.is_null() {
        return ptr::null_mut();
    }
    match &(*completion).inner.reasoning {
        Some(reasoning) => into_c_string(reasoning),
        None => ptr::null_mut(),
    }
}

/// The final answer text. Free with `bs_string_free`.
///
/// # Safety
/// `completion` must be a live handle from `bs_completion_parse`.
#[no_mangle]
pub unsafe extern "C" fn bs_completion_final(completion: *const BsCompletion) -> *mut c_char {
    if completion.is_null() {
        return ptr::null_mut();
    }
    into_c_string(&(*completion).inner.final_text)
}

/// 1 when the reasoning segment holds at least `min_chars`
/// non-whitespace characters (pass 0 for the default of 20), else 0;
/// -1 on a null handle.
///
/// # Safety
/// `completion` must be a live handle from `bs_completion_parse`.
#[no_mangle]
pub unsafe extern "C" fn bs_completion_has_substantive_reasoning(
    completion: *const BsCompletion,
    min_chars: usize,
) -> c_int {
    if completion.is_null() {
        return -1;
    }
    let min_chars = if min_chars == 0 {
        blindspot::response::DEFAULT_MIN_REASONING_CHARS
    } else {
        min_chars
    };
    has_substantive_reasoning(&(*completion).inner, min_chars) as c_int
}

/// # Safety
/// `completion` must be a handle from `bs_completion_parse`, freed at
/// most once.
#[no_mangle]
pub unsafe extern "C" fn bs_completion_free(completion: *mut BsCompletion) {
    if !completion.is_null() {
        drop(Box::from_raw(completion));
    }
}

/// Classifier with the built-in lexicons.
#[no_mangle]
pub extern "C" fn bs_classifier_default() -> *mut BsClassifier {
    Box::into_raw(Box::new(BsClassifier {
        inner: Classifier::heuristic(Lexicons::default_builtin()),
    }))
}

/// Classifier from lexicon JSON
/// (`{"refusal_phrases": [...], "template_markers": [...]}`).
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_classifier_from_lexicon_json(
    json: *const c_char,
    out: *mut *mut BsClassifier,
) -> BsStatus {
    if out.is_null() {
        return BsStatus::NullArgument;
    }
    let json = match to_str(json) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match Lexicons::from_json(json) {
        Ok(lexicons) => {
            *out = Box::into_raw(Box::new(BsClassifier {
                inner: Classifier::heuristic(lexicons),
            }));
            BsStatus::Ok
        }
        Err(_) => BsStatus::InvalidInput,
    }
}

/// # Safety
/// `classifier` must be a handle from a `bs_classifier_*` constructor,
/// freed at most once.
#[no_mangle]
pub unsafe extern "C" fn bs_classifier_free(classifier: *mut BsClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Heuristic censorship verdict for a (question, raw completion) pair.
/// Parses the completion with the default delimiters and writes the
/// label to `out_label`.
///
/// # Safety
/// `classifier` must be a live handle; `question` and `raw` must be
/// valid NUL-terminated strings; `out_label` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bs_classify(
    classifier: *const BsClassifier,
    question: *const c_char,
    raw: *const c_char,
    out_label: *mut BsLabel,
) -> BsStatus {
    if classifier.is_null() || out_label.is_null() {
        return BsStatus::NullArgument;
    }
    let question = match to_str(question) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let raw = match to_str(raw) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let completion = match parse_completion(raw, DEFAULT_OPEN_DELIM, DEFAULT_CLOSE_DELIM) {
        Ok(c) => c,
        Err(_) => return BsStatus::MalformedCompletion,
    };
    let verdict = classify_heuristic(question, &completion, &(*classifier).inner);
    *out_label = match verdict.label {
        Label::NotCensored => BsLabel::NotCensored,
        Label::Type1 => BsLabel::Type1,
        Label::Type2 => BsLabel::Type2,
        Label::Type3 => BsLabel::Type3,
    };
    BsStatus::Ok
}

/// 1 if any refusal phrase matches `text`, 0 otherwise, -1 on error.
///
/// # Safety
/// `classifier` must be a live handle; `text` must be a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bs_is_refusal(
    classifier: *const BsClassifier,
    text: *const c_char,
) -> c_int {
    if classifier.is_null() {
        return -1;
    }
    let text = match to_str(text) {
        Ok(s) => s,
        Err(_) => return -1,
    };
    blindspot::classifier::is_refusal(text, &(*classifier).inner.lexicons) as c_int
}

/// Build the reasoning-trigger attack prompt for iteration `iteration`
/// (1-based): the prompt followed by that many newline-joined copies
/// of `open_delim + " " + trigger`. Null `trigger`/`open_delim` use
/// the defaults. Free the result with `bs_string_free`.
///
/// # Safety
/// `prompt` (and non-null `trigger`/`open_delim`) must be valid
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bs_attack_prompt(
    prompt: *const c_char,
    trigger: *const c_char,
    open_delim: *const c_char,
    iteration: u32,
) -> *mut c_char {
    let prompt = match to_str(prompt) {
        Ok(s) => s,
        Err(_) => return ptr::null_mut(),
    };
    let defaults = JailbreakConfig::default();
    let trigger = match to_str_or(trigger, &defaults.trigger) {
        Ok(s) => s,
        Err(_) => return ptr::null_mut(),
    };
    let open_delim = match to_str_or(open_delim, &defaults.open_delim) {
        Ok(s) => s,
        Err(_) => return ptr::null_mut(),
    };
    if iteration == 0 || trigger.is_empty() {
        return ptr::null_mut();
    }
    let cfg = JailbreakConfig {
        trigger: trigger.to_string(),
        open_delim: open_delim.to_string(),
        ..JailbreakConfig::default()
    };
    into_c_string(&blindspot::jailbreak::attack_prompt(prompt, &cfg, iteration))
}
