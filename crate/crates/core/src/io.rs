//! Text formats: mapping files (`<id> <name>` per line) and label files (one
//! class name per frame).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::stream::{ClassMap, LabelStream};

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Blank lines are skipped; ids must be dense from 0 and may appear in any order.
pub fn parse_mapping(text: &str) -> Result<ClassMap> {
    let mut by_id: HashMap<usize, (usize, String)> = HashMap::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (Some(id), Some(name), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_error(line, format!("expected `<id> <name>`, got {trimmed:?}")));
        };
        let id: usize = id
            .parse()
            .map_err(|_| parse_error(line, format!("class id {id:?} is not a non-negative integer")))?;
        if let Some((first, _)) = by_id.get(&id) {
            return Err(parse_error(line, format!("duplicate class id {id} (first defined at line {first})")));
        }
        if let Some(first) = by_name.get(name) {
            return Err(parse_error(line, format!("duplicate class name {name:?} (first defined at line {first})")));
        }
        by_name.insert(name.to_string(), line);
        by_id.insert(id, (line, name.to_string()));
    }
    let mut names = Vec::with_capacity(by_id.len());
    for id in 0..by_id.len() {
        match by_id.remove(&id) {
            Some((_, name)) => names.push(name),
            None => {
                let (&bad, (line, _)) = by_id.iter().min_by_key(|(&k, _)| k).expect("ids remain");
                return Err(parse_error(*line, format!("class ids must be dense from 0; {id} is missing but {bad} is used")));
            }
        }
    }
    ClassMap::new(names)
}

pub fn format_mapping(class_map: &ClassMap) -> String {
    let mut out = String::new();
    for (id, name) in class_map.names().enumerate() {
        let _ = writeln!(out, "{id} {name}");
    }
    out
}

/// Resolves one label token; `line` is only used for the error.
pub fn parse_label(token: &str, class_map: &ClassMap, line: usize) -> Result<usize> {
    class_map
        .id(token)
        .ok_or_else(|| parse_error(line, format!("unknown label {token:?}")))
}

/// One label name per line. Blank lines are skipped.
pub fn parse_labels(text: &str, class_map: Arc<ClassMap>) -> Result<LabelStream> {
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let token = raw.trim();
        if token.is_empty() {
            continue;
        }
        labels.push(parse_label(token, &class_map, idx + 1)?);
    }
    Ok(LabelStream::from_parts(labels, class_map))
}

pub fn format_labels(stream: &LabelStream) -> String {
    let map = stream.class_map();
    let mut out = String::with_capacity(stream.len() * 8);
    for &l in stream.labels() {
        out.push_str(map.name(l).expect("label in vocabulary"));
        out.push('\n');
    }
    out
}
