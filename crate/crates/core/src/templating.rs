//! The crafted-instruction grammar: 12 horizontal × 3 vertical × 3 landmark
//! relations = 108 templates, each with one `{landmark}` slot.
//!
//! Every template reads
//! `<horizontal phrase> and walk [<vertical word>] <relation phrase> {landmark}`,
//! where the vertical word is omitted for level moves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::chunking::{HorizontalClass, SubTrajectory, VerticalClass};
use crate::error::{Error, Result};
use crate::landmarks::{classify_landmark_relation, Landmark, Relation};

pub const LANDMARK_SLOT: &str = "{landmark}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TemplateKey {
    pub horizontal: HorizontalClass,
    pub vertical: VerticalClass,
    pub relation: Relation,
}

impl TemplateKey {
    pub fn all() -> impl Iterator<Item = TemplateKey> {
        HorizontalClass::ALL.into_iter().flat_map(|horizontal| {
            VerticalClass::ALL.into_iter().flat_map(move |vertical| {
                Relation::ALL.into_iter().map(move |relation| TemplateKey { horizontal, vertical, relation })
            })
        })
    }

    /// `horizontal/vertical/relation`, e.g. `slight_left/level/towards_left_of`.
    pub fn as_string(&self) -> String {
        format!("{}/{}/{}", self.horizontal.key(), self.vertical.key(), self.relation.key())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let mut parts = s.split('/');
        let key = TemplateKey {
            horizontal: HorizontalClass::from_key(parts.next()?)?,
            vertical: VerticalClass::from_key(parts.next()?)?,
            relation: Relation::from_key(parts.next()?)?,
        };
        parts.next().is_none().then_some(key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateLibrary {
    entries: BTreeMap<TemplateKey, String>,
}

fn compose(key: &TemplateKey) -> String {
    let mut s = String::from(key.horizontal.phrase());
    s.push_str(" and walk ");
    let vertical = key.vertical.word();
    if !vertical.is_empty() {
        s.push_str(vertical);
        s.push(' ');
    }
    s.push_str(key.relation.phrase());
    s.push(' ');
    s.push_str(LANDMARK_SLOT);
    s
}

pub fn build_template_library() -> TemplateLibrary {
    TemplateLibrary { entries: TemplateKey::all().map(|k| (k, compose(&k))).collect() }
}

impl TemplateLibrary {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &TemplateKey) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TemplateKey, &str)> {
        self.entries.iter().map(|(k, v)| (k, v.as_str()))
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<String, &str> = self.iter().map(|(k, v)| (k.as_string(), v)).collect();
        serde_json::to_string_pretty(&map).expect("string map serializes")
    }

    /// Parses a dumped library; the result must cover all 108 keys, each
    /// template holding exactly one slot.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| Error::json("template library", e))?;
        let mut entries = BTreeMap::new();
        for (k, v) in raw {
            let key = TemplateKey::parse(&k).ok_or_else(|| Error::Schema(format!("unknown template key \"{k}\"")))?;
            if v.matches(LANDMARK_SLOT).count() != 1 {
                return Err(Error::Schema(format!("template \"{k}\" must contain exactly one {LANDMARK_SLOT}")));
            }
            entries.insert(key, v);
        }
        if entries.len() != 108 {
            return Err(Error::Schema(format!("template library has {} entries, expected 108", entries.len())));
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CraftedInstruction {
    pub text: String,
    pub key: TemplateKey,
    pub landmark_label: Option<String>,
}

/// Fills the template for a sub-trajectory. Without a landmark the relation
/// clause is dropped and only the movement remains.
pub fn craft_sub_instruction(
    sub: &SubTrajectory,
    landmark: Option<&Landmark>,
    library: &TemplateLibrary,
) -> CraftedInstruction {
    let horizontal = sub.horizontal;
    let vertical = sub.vertical();
    match landmark {
        Some(lm) => {
            let relation = classify_landmark_relation(sub.exit_heading, &lm.heading_bounds);
            let key = TemplateKey { horizontal, vertical, relation };
            let template = library.get(&key).map(str::to_owned).unwrap_or_else(|| compose(&key));
            CraftedInstruction {
                text: template.replacen(LANDMARK_SLOT, &lm.detection.label, 1),
                key,
                landmark_label: Some(lm.detection.label.clone()),
            }
        }
        None => {
            let mut text = horizontal.phrase().to_string();
            if vertical != VerticalClass::Level {
                text.push_str(" and walk ");
                text.push_str(vertical.word());
            }
            CraftedInstruction {
                text,
                key: TemplateKey { horizontal, vertical, relation: Relation::Towards },
                landmark_label: None,
            }
        }
    }
}
