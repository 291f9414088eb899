//! Ordered class catalogs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::UNLABELED;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub index: u8,
    pub name: String,
    /// RGB display color.
    pub color: [u8; 3],
}

/// Contiguous, zero-based list of classes. Index 255 is never a class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassEntry>", into = "Vec<ClassEntry>")]
pub struct ClassCatalog {
    classes: Vec<ClassEntry>,
}

pub const SEA_CUCUMBER: &str = "Sea Cucumber";

const DEFAULT_CLASSES: [(&str, [u8; 3]); 6] = [
    ("Sand", [237, 201, 175]),
    ("Acropora Branching", [230, 25, 75]),
    ("Acropora Tabular", [60, 180, 75]),
    ("Non-acropora Massive", [0, 130, 200]),
    ("Other Corals", [245, 130, 48]),
    (SEA_CUCUMBER, [145, 30, 180]),
];

impl ClassCatalog {
    pub fn new(classes: Vec<ClassEntry>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidCatalog("catalog has no classes".into()));
        }
        if classes.len() > UNLABELED as usize {
            return Err(Error::InvalidCatalog(format!("at most {} classes are supported", UNLABELED)));
        }
        for (i, c) in classes.iter().enumerate() {
            if c.index as usize != i {
                return Err(Error::InvalidCatalog(format!("class `{}` has index {}, expected {}", c.name, c.index, i)));
            }
            if c.name.trim().is_empty() {
                return Err(Error::InvalidCatalog(format!("class {i} has an empty name")));
            }
            if classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidCatalog(format!("duplicate class name `{}`", c.name)));
            }
        }
        Ok(ClassCatalog { classes })
    }

    /// Catalog built from names, with palette colors assigned in order.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let classes = names
            .iter()
            .enumerate()
            .map(|(i, n)| ClassEntry { index: i.min(254) as u8, name: n.as_ref().to_string(), color: palette_color(i) })
            .collect();
        Self::new(classes)
    }

    /// Sand, Acropora Branching, Acropora Tabular, Non-acropora Massive, Other Corals.
    pub fn default_five() -> Self {
        Self::default_with(false)
    }

    /// The five default classes plus Sea Cucumber.
    pub fn default_six() -> Self {
        Self::default_with(true)
    }

    fn default_with(sea_cucumber: bool) -> Self {
        let n = if sea_cucumber { 6 } else { 5 };
        let classes = DEFAULT_CLASSES[..n]
            .iter()
            .enumerate()
            .map(|(i, (name, color))| ClassEntry { index: i as u8, name: name.to_string(), color: *color })
            .collect();
        ClassCatalog { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn get(&self, index: usize) -> Option<&ClassEntry> {
        self.classes.get(index)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.name == name)
    }

    pub fn check_class(&self, index: usize) -> Result<()> {
        if index < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownClass(index))
        }
    }

    /// True for class indices and for the unlabeled sentinel.
    #[inline]
    pub fn is_valid_label(&self, label: u8) -> bool {
        label == UNLABELED || (label as usize) < self.classes.len()
    }

    /// Color per label value; unlabeled and out-of-catalog values map to black.
    pub fn palette(&self) -> [[u8; 3]; 256] {
        let mut p = [[0u8; 3]; 256];
        for c in &self.classes {
            p[c.index as usize] = c.color;
        }
        p
    }
}

impl TryFrom<Vec<ClassEntry>> for ClassCatalog {
    type Error = Error;

    fn try_from(v: Vec<ClassEntry>) -> Result<Self> {
        ClassCatalog::new(v)
    }
}

impl From<ClassCatalog> for Vec<ClassEntry> {
    fn from(c: ClassCatalog) -> Self {
        c.classes
    }
}

impl Default for ClassCatalog {
    fn default() -> Self {
        Self::default_five()
    }
}

fn palette_color(i: usize) -> [u8; 3] {
    const TAB: [[u8; 3]; 10] = [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
    ];
    TAB[i % TAB.len()]
}
