//! Slot filling for bracketed prompt templates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Replace every `[name]` placeholder in `template` with its slot value.
///
/// A placeholder is a bracketed span whose name contains no brackets and no
/// newlines (names may contain spaces, e.g. `[Unlabeled Target]`). Every
/// placeholder must have a slot; extra slots are ignored. Unmatched `[` with
/// no closing bracket on the same line is left as literal text.
pub fn fill_template(template: &str, slots: &BTreeMap<&str, &str>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut missing = Vec::new();
    let bytes = template.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            // Find a closing bracket before any '[' or newline.
            let rest = &template[i + 1..];
            let close = rest.find(|c| c == ']' || c == '[' || c == '\n');
            if let Some(pos) = close {
                if rest.as_bytes()[pos] == b']' {
                    let name = &rest[..pos];
                    match slots.get(name) {
                        Some(value) => out.push_str(value),
                        None => {
                            if !missing.contains(&name.to_string()) {
                                missing.push(name.to_string());
                            }
                            // Keep scanning so all missing names are reported.
                        }
                    }
                    i += 1 + pos + 1;
                    continue;
                }
            }
        }
        let ch = template[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    if !missing.is_empty() {
        return Err(Error::MissingSlots { names: missing });
    }
    Ok(out)
}
