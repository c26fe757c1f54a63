use std::collections::BTreeSet;
use std::path::Path;

use aloe_core::data::{AppraisalLabel, Role};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PaletteError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub label: AppraisalLabel,
    pub display: String,
    /// `#rrggbb`
    pub color: String,
    pub key: String,
    pub roles: Vec<Role>,
}

/// Label order, colors and shortcuts served to the annotation client.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    #[serde(rename = "label")]
    pub labels: Vec<PaletteEntry>,
}

const BUILTIN: &str = include_str!("../data/labels.toml");

impl Palette {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped palette is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PaletteError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Every annotatable label exactly once, valid colors, unique keys, and
    /// no Trope on the Target pane.
    pub fn parse(text: &str) -> Result<Self, PaletteError> {
        let palette: Palette = toml::from_str(text)?;
        let mut seen = BTreeSet::new();
        let mut keys = BTreeSet::new();
        for e in &palette.labels {
            if !AppraisalLabel::ANNOTATABLE.contains(&e.label) {
                return Err(PaletteError::Invalid(format!("{} is not annotatable", e.label)));
            }
            if !seen.insert(e.label) {
                return Err(PaletteError::Invalid(format!("{} listed twice", e.label)));
            }
            if !keys.insert(e.key.as_str()) {
                return Err(PaletteError::Invalid(format!("shortcut `{}` used twice", e.key)));
            }
            let hex = e.color.strip_prefix('#').unwrap_or("");
            if hex.len() != 6 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(PaletteError::Invalid(format!("{}: color `{}` is not #rrggbb", e.label, e.color)));
            }
            if e.roles.is_empty() || (e.label == AppraisalLabel::Trope && e.roles.contains(&Role::Target)) {
                return Err(PaletteError::Invalid(format!("{}: bad roles {:?}", e.label, e.roles)));
            }
        }
        if seen.len() != AppraisalLabel::ANNOTATABLE.len() {
            let missing: Vec<_> = AppraisalLabel::ANNOTATABLE.iter().filter(|l| !seen.contains(l)).collect();
            return Err(PaletteError::Invalid(format!("missing labels {missing:?}")));
        }
        Ok(palette)
    }
}
