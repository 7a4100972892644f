//! Dataset files: UTF-8 TSV with `id<TAB>text[<TAB>label]` per line.

use std::fs;
use std::path::Path;

use super::PipelineError;
use crate::textprep::Record;

fn line_error(line: usize, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::data("load", format!("line {line}: {msg}"))
}

/// Parses dataset text. Rows either all carry a label or all omit it.
/// With `has_header`, the first line is skipped. Line numbers in errors are
/// 1-based and count the header.
pub fn parse_dataset(text: &str, has_header: bool) -> Result<Vec<Record>, PipelineError> {
    let mut records = Vec::new();
    let mut labeled: Option<bool> = None;
    for (i, raw) in text.lines().enumerate().skip(usize::from(has_header)) {
        let lineno = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let cols: Vec<&str> = line.split('\t').collect();
        let (id, body, label) = match cols.as_slice() {
            [id, body] => (*id, *body, None),
            [id, body, label] => {
                let y = match *label {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(line_error(lineno, format!("label must be 0 or 1, got {other:?}"))),
                };
                (*id, *body, Some(y))
            }
            _ => {
                return Err(line_error(
                    lineno,
                    format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
                ))
            }
        };
        if *labeled.get_or_insert(label.is_some()) != label.is_some() {
            return Err(line_error(lineno, "label column present on some rows but not others"));
        }
        let record = Record::new(id, body, label).map_err(|e| line_error(lineno, e))?;
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: &Path, has_header: bool) -> Result<Vec<Record>, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::data("load", format!("{}: {e}", path.display())))?;
    parse_dataset(&text, has_header)
}

/// Inverse of [`parse_dataset`] without a header. Fails on texts containing
/// tabs or line breaks, which the format cannot carry.
pub fn format_dataset(records: &[Record]) -> Result<String, PipelineError> {
    let mut out = String::new();
    for r in records {
        if r.text.contains(['\t', '\n', '\r']) || r.id.contains(['\t', '\n', '\r']) {
            return Err(PipelineError::data("write", format!("record {:?} contains a tab or newline", r.id)));
        }
        out.push_str(&r.id);
        out.push('\t');
        out.push_str(&r.text);
        if let Some(y) = r.label {
            out.push('\t');
            out.push(char::from(b'0' + y));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(records: &[Record], path: &Path) -> Result<(), PipelineError> {
    fs::write(path, format_dataset(records)?)
        .map_err(|e| PipelineError::data("write", format!("{}: {e}", path.display())))
}
