use std::collections::BTreeMap;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use super::{FormatError, ResponseTemplate};

/// Keeps every key in document order so duplicates can be reported.
struct OrderedEntries(Vec<(String, Vec<String>)>);

impl<'de> Deserialize<'de> for OrderedEntries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = OrderedEntries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object mapping action names to lists of strings")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Vec<String>>()? {
                    out.push((k, v));
                }
                Ok(OrderedEntries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

/// Parses `responses.json`: `{ "<action>": ["variant", ...], ... }`.
pub fn parse_responses(text: &str) -> Result<BTreeMap<String, ResponseTemplate>, FormatError> {
    let entries: OrderedEntries =
        serde_json::from_str(text).map_err(|e| FormatError::parse(e.line(), e.to_string()))?;
    let mut out = BTreeMap::new();
    for (action, variants) in entries.0 {
        if variants.is_empty() {
            return Err(FormatError::validation(None, format!("{action:?}: empty variants")));
        }
        if out.contains_key(&action) {
            return Err(FormatError::validation(None, format!("duplicate key {action:?}")));
        }
        out.insert(action.clone(), ResponseTemplate { action, variants });
    }
    Ok(out)
}

pub fn write_responses(templates: &BTreeMap<String, ResponseTemplate>) -> String {
    let map: BTreeMap<&str, &Vec<String>> = templates.iter().map(|(k, t)| (k.as_str(), &t.variants)).collect();
    let mut s = serde_json::to_string_pretty(&map).expect("string map serializes");
    s.push('\n');
    s
}
