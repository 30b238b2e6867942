use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, write_bytes};
use crate::error::{Error, Result};
use crate::geometry::{Cuboid, Point};
use crate::vocabulary::{ClassId, ClassVocabulary, ObjectMap, BACKGROUND_NAME};

#[derive(Serialize, Deserialize)]
struct MapFile {
    class_vocabulary: Vec<String>,
    objects: Vec<ObjectRecord>,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    centroid: [f64; 3],
    extent: [f64; 3],
    class: String,
    #[serde(default = "full_confidence")]
    confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_probs: Option<BTreeMap<String, f64>>,
}

fn full_confidence() -> f64 {
    1.0
}

fn class_by_name(vocabulary: &ClassVocabulary, name: &str) -> Option<ClassId> {
    if name == BACKGROUND_NAME {
        Some(ClassId::BACKGROUND)
    } else {
        vocabulary.id(name)
    }
}

fn record_to_cuboid(vocabulary: &ClassVocabulary, r: ObjectRecord) -> std::result::Result<Cuboid, String> {
    let class = vocabulary
        .id(&r.class)
        .ok_or_else(|| format!("unknown class {:?}", r.class))?;
    let mut c = Cuboid::new(Point::from(r.centroid), Point::from(r.extent), class)
        .and_then(|c| c.with_confidence(r.confidence))
        .map_err(|e| e.to_string())?;
    if let Some(named) = r.label_probs {
        let mut probs = vec![0.0; vocabulary.label_space()];
        for (name, p) in named {
            let id = class_by_name(vocabulary, &name).ok_or_else(|| format!("unknown class {name:?} in label_probs"))?;
            probs[id.index()] = p;
        }
        c = c.with_label_probs(probs).map_err(|e| e.to_string())?;
    }
    Ok(c)
}

/// Parses the JSON map schema; `origin` only labels error messages.
pub fn object_map_from_json(text: &str, origin: &Path) -> Result<ObjectMap> {
    let file: MapFile = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    let vocabulary = ClassVocabulary::new(file.class_vocabulary).map_err(|e| Error::parse(origin, e.to_string()))?;
    let objects = file
        .objects
        .into_iter()
        .enumerate()
        .map(|(i, r)| record_to_cuboid(&vocabulary, r).map_err(|m| Error::parse(origin, format!("object {i}: {m}"))))
        .collect::<Result<Vec<_>>>()?;
    ObjectMap::new(vocabulary, objects).map_err(|e| Error::parse(origin, e.to_string()))
}

pub fn object_map_to_json(map: &ObjectMap) -> String {
    let vocabulary = map.vocabulary();
    let name = |id: ClassId| {
        if id.is_background() {
            BACKGROUND_NAME.to_string()
        } else {
            vocabulary.name(id).expect("map classes are in vocabulary").to_string()
        }
    };
    let file = MapFile {
        class_vocabulary: vocabulary.names().to_vec(),
        objects: map
            .objects()
            .iter()
            .map(|c| ObjectRecord {
                centroid: (*c.centroid()).into(),
                extent: (*c.extent()).into(),
                class: name(c.class_id()),
                confidence: c.confidence(),
                label_probs: c.label_probs().map(|p| {
                    p.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0.0)
                        .map(|(i, &v)| (name(ClassId(i as u16)), v))
                        .collect()
                }),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn load_object_map(path: &Path) -> Result<ObjectMap> {
    object_map_from_json(&read_text(path)?, path)
}

pub fn save_object_map(map: &ObjectMap, path: &Path) -> Result<()> {
    write_bytes(path, object_map_to_json(map).as_bytes())
}
