pub mod repair;
pub mod report;
pub mod sample;
pub mod simulate;
pub mod verify;

use std::path::Path;

use scv_core::trace::{parse_trace_set_with, ParseMode, TraceSet};

use crate::error::CliResult;
use crate::output::read_file;

pub fn load_set(path: &Path, lenient: bool) -> CliResult<TraceSet> {
    let mode = if lenient { ParseMode::Lenient } else { ParseMode::Strict };
    Ok(parse_trace_set_with(&read_file(path)?, mode)?)
}
