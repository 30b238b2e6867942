//! Class vocabulary and the object map container.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cuboid;

/// Index into the label space. `0` is background; `1..=n` map onto the
/// vocabulary entries in order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_background(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const BACKGROUND_NAME: &str = "background";

const DEFAULT_CLASSES: [&str; 30] = [
    "bottle",
    "cup",
    "knife",
    "bowl",
    "wine glass",
    "fork",
    "spoon",
    "banana",
    "apple",
    "orange",
    "cake",
    "potted plant",
    "mouse",
    "keyboard",
    "laptop",
    "cellphone",
    "book",
    "clock",
    "chair",
    "dining table",
    "couch",
    "bed",
    "toilet",
    "monitor",
    "microwave",
    "toaster",
    "refrigerator",
    "oven",
    "sink",
    "person",
];

/// Ordered, unique class names. Background is implicit and never listed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassVocabulary {
    names: Vec<String>,
}

impl Default for ClassVocabulary {
    fn default() -> Self {
        ClassVocabulary {
            names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ClassVocabulary {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if name == BACKGROUND_NAME {
                return Err(Error::InvalidParams(format!(
                    "'{BACKGROUND_NAME}' is reserved and cannot be a vocabulary entry"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate class name '{name}'")));
            }
        }
        if names.len() >= u16::MAX as usize {
            return Err(Error::InvalidParams("vocabulary too large".into()));
        }
        Ok(ClassVocabulary { names })
    }

    /// Number of object classes, background excluded.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Length of a label-probability vector: background plus every class.
    pub fn label_space(&self) -> usize {
        self.names.len() + 1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.0 >= 1 && id.index() <= self.names.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        if id.is_background() {
            Some(BACKGROUND_NAME)
        } else {
            self.names.get(id.index() - 1).map(String::as_str)
        }
    }

    /// Resolves a name to its id; `"background"` resolves to [`ClassId::BACKGROUND`].
    pub fn id(&self, name: &str) -> Option<ClassId> {
        if name == BACKGROUND_NAME {
            return Some(ClassId::BACKGROUND);
        }
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u16 + 1))
    }

    /// All non-background ids in order.
    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..=self.names.len()).map(|i| ClassId(i as u16))
    }
}

/// A set of cuboids labelled over a shared vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectMap {
    vocabulary: ClassVocabulary,
    objects: Vec<Cuboid>,
}

impl ObjectMap {
    pub fn new(vocabulary: ClassVocabulary, objects: Vec<Cuboid>) -> Result<Self> {
        for (i, obj) in objects.iter().enumerate() {
            check_object(&vocabulary, obj).map_err(|msg| Error::InvalidCuboid(format!("object {i}: {msg}")))?;
        }
        Ok(ObjectMap { vocabulary, objects })
    }

    pub fn empty(vocabulary: ClassVocabulary) -> Self {
        ObjectMap {
            vocabulary,
            objects: Vec::new(),
        }
    }

    pub fn push(&mut self, obj: Cuboid) -> Result<()> {
        check_object(&self.vocabulary, &obj).map_err(Error::InvalidCuboid)?;
        self.objects.push(obj);
        Ok(())
    }

    pub fn vocabulary(&self) -> &ClassVocabulary {
        &self.vocabulary
    }

    pub fn objects(&self) -> &[Cuboid] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn into_objects(self) -> Vec<Cuboid> {
        self.objects
    }

    /// Indices of objects labelled `class`, in map order.
    pub fn indices_of(&self, class: ClassId) -> Vec<usize> {
        self.objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.class_id() == class)
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_object(vocab: &ClassVocabulary, obj: &Cuboid) -> std::result::Result<(), String> {
    if !vocab.contains(obj.class_id()) {
        return Err(format!("class id {} outside vocabulary of {}", obj.class_id(), vocab.len()));
    }
    if let Some(probs) = obj.label_probs() {
        if probs.len() != vocab.label_space() {
            return Err(format!(
                "label_probs has {} entries, expected {}",
                probs.len(),
                vocab.label_space()
            ));
        }
    }
    Ok(())
}
