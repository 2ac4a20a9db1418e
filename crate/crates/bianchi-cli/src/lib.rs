//! Command implementations behind the `bianchi` binary. Every command builds
//! a serializable report from library calls; rendering is separate so the
//! text and JSON outputs come from the same data.

pub mod compare;
pub mod field;
pub mod recover;
pub mod synth;
pub mod verify;

use std::path::{Path, PathBuf};

use bianchi::classgroup::ClassGroup;
use bianchi::fixtures::Bundle;
use bianchi::quadfield::QuadField;
use bianchi::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Environment variable naming the default bundle directory.
pub const BUNDLE_ENV: &str = "BIANCHI_BUNDLE";

/// Command outcome: rendered output plus the exit code it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub code: i32,
}

impl Output {
    pub fn new(text: String, ok: bool) -> Self {
        Output { text, code: if ok { EXIT_OK } else { EXIT_CHECK_FAILED } }
    }
}

/// Every library error reaching the command surface is an input problem:
/// a bad file, a bad label, or a request the data cannot answer.
pub fn exit_code(_: &Error) -> i32 {
    EXIT_INPUT
}

pub fn load_bundle(path: Option<&Path>) -> Result<Option<Bundle>, Error> {
    match path {
        Some(p) => Bundle::load(p).map(Some),
        None => Ok(None),
    }
}

pub fn bundle_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(BUNDLE_ENV).map(PathBuf::from))
}

/// The bundle's field when its discriminant is `disc`, a fresh one otherwise.
pub fn field_for(bundle: Option<&Bundle>, disc: i64) -> Result<(QuadField, ClassGroup), Error> {
    if let Some(b) = bundle {
        if b.field.disc() == disc {
            return Ok((b.field.clone(), b.class_group.clone()));
        }
    }
    let k = QuadField::from_disc(disc)?;
    let cg = ClassGroup::new(&k)?;
    Ok((k, cg))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Rows of `(header, value)` cells laid out as a transposed table, `width`
/// columns per block.
pub(crate) fn transposed(first: (&str, &str), cells: &[(String, String)], width: usize) -> String {
    let mut out = String::new();
    for chunk in cells.chunks(width.max(1)) {
        let w0 = first.0.len().max(first.1.len());
        let widths: Vec<usize> = chunk.iter().map(|(a, b)| a.len().max(b.len())).collect();
        let mut top = format!("  {:<w0$}", first.0);
        let mut bot = format!("  {:<w0$}", first.1);
        for ((a, b), w) in chunk.iter().zip(&widths) {
            top.push_str(&format!("  {a:>w$}"));
            bot.push_str(&format!("  {b:>w$}"));
        }
        out.push_str(top.trim_end());
        out.push('\n');
        out.push_str(bot.trim_end());
        out.push('\n');
    }
    out
}
