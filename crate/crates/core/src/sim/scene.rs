use std::collections::BTreeSet;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{overlap_volume, Aabb, Cuboid, Point};
use crate::vocabulary::{ClassId, ClassVocabulary, ObjectMap};

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub cuboid: Cuboid,
    pub instance_id: u32,
}

impl SceneObject {
    pub fn class_id(&self) -> ClassId {
        self.cuboid.class_id()
    }
}

/// Cuboid objects inside a room. With `shell` set the room's walls, floor
/// and ceiling are rendered as background surfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    room: Aabb,
    objects: Vec<SceneObject>,
    shell: bool,
}

impl Scene {
    pub fn new(room: Aabb, objects: Vec<SceneObject>, shell: bool) -> Result<Self> {
        let mut ids = BTreeSet::new();
        for (i, o) in objects.iter().enumerate() {
            if o.instance_id == 0 {
                return Err(Error::InvalidParams(format!("object {i}: instance id 0 is reserved")));
            }
            if !ids.insert(o.instance_id) {
                return Err(Error::InvalidParams(format!(
                    "object {i}: duplicate instance id {}",
                    o.instance_id
                )));
            }
            if o.class_id().is_background() {
                return Err(Error::InvalidParams(format!("object {i}: background class")));
            }
            if !room.contains_box(&o.cuboid.aabb()) {
                return Err(Error::InvalidParams(format!("object {i} lies outside the room")));
            }
        }
        Ok(Scene { room, objects, shell })
    }

    pub fn room(&self) -> &Aabb {
        &self.room
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn shell(&self) -> bool {
        self.shell
    }

    /// Ground-truth object map: one-hot labels, confidence 1.
    pub fn ground_truth_map(&self, vocabulary: &ClassVocabulary) -> Result<ObjectMap> {
        ObjectMap::new(
            vocabulary.clone(),
            self.objects.iter().map(|o| o.cuboid.clone()).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub min_objects: usize,
    pub max_objects: usize,
    /// Classes to draw from; empty means the whole vocabulary.
    pub classes: Vec<ClassId>,
    pub min_extent: f64,
    pub max_extent: f64,
    /// Minimum horizontal clearance between objects.
    pub gap: f64,
    /// Objects are kept within this fraction of the room size around its center.
    pub placement_fraction: f64,
    pub max_attempts: usize,
    pub shell: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            room_min: [0.0, 0.0, 0.0],
            room_max: [8.0, 6.0, 3.0],
            min_objects: 5,
            max_objects: 5,
            classes: Vec::new(),
            min_extent: 0.4,
            max_extent: 1.2,
            gap: 0.3,
            placement_fraction: 0.6,
            max_attempts: 2000,
            shell: true,
        }
    }
}

impl SceneSpec {
    pub fn room(&self) -> Result<Aabb> {
        Aabb::new(Point::from(self.room_min), Point::from(self.room_max))
    }

    pub fn validate(&self, vocabulary: &ClassVocabulary) -> Result<()> {
        let room = self.room()?;
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.min_objects > self.max_objects {
            return bad(format!(
                "object count range {}..={} is empty",
                self.min_objects, self.max_objects
            ));
        }
        if !(self.min_extent > 0.0 && self.min_extent <= self.max_extent) {
            return bad(format!("invalid extent range {}..{}", self.min_extent, self.max_extent));
        }
        if !(self.gap >= 0.0) || !(self.placement_fraction > 0.0 && self.placement_fraction <= 1.0) {
            return bad("gap must be >= 0 and placement_fraction in (0, 1]".into());
        }
        let inner = room.size() * self.placement_fraction;
        if self.max_objects > 0 && (inner.x < self.max_extent || inner.y < self.max_extent || room.size().z < self.max_extent)
        {
            return bad("placement region smaller than the largest object".into());
        }
        if let Some(c) = self.classes.iter().find(|c| !vocabulary.contains(**c)) {
            return bad(format!("class id {} not in vocabulary", c.0));
        }
        Ok(())
    }
}

/// Samples non-overlapping floor-standing objects. Each object gets a fresh
/// position until it clears every placed object by `gap`; the whole count
/// fails with [`Error::PlacementFailed`] after `max_attempts` draws.
pub fn generate_scene(seed: u64, spec: &SceneSpec, vocabulary: &ClassVocabulary) -> Result<Scene> {
    spec.validate(vocabulary)?;
    let room = spec.room()?;
    let mut rng = super::rng_for(seed, 0x5CE7E);
    let classes: Vec<ClassId> = if spec.classes.is_empty() {
        vocabulary.ids().collect()
    } else {
        spec.classes.clone()
    };
    let count = rng.random_range(spec.min_objects..=spec.max_objects);

    let center = room.center();
    let half_inner = room.size() * (spec.placement_fraction / 2.0);
    let mut objects: Vec<SceneObject> = Vec::with_capacity(count);
    let mut attempts = 0;
    while objects.len() < count {
        if attempts == spec.max_attempts {
            return Err(Error::PlacementFailed {
                requested: count,
                attempts,
            });
        }
        attempts += 1;
        let extent = Vector3::from_fn(|_, _| rng.random_range(spec.min_extent..=spec.max_extent));
        let lo = center.xy() - half_inner.xy() + extent.xy() / 2.0;
        let hi = center.xy() + half_inner.xy() - extent.xy() / 2.0;
        let x = sample(&mut rng, lo.x, hi.x);
        let y = sample(&mut rng, lo.y, hi.y);
        let class = classes[rng.random_range(0..classes.len())];
        let cuboid = Cuboid::new(Point::new(x, y, room.min.z + extent.z / 2.0), extent, class)?;
        let padded = cuboid.aabb().expanded(spec.gap);
        if objects.iter().any(|o| padded.overlap_volume(&o.cuboid.aabb()) > 0.0) {
            continue;
        }
        debug_assert!(objects.iter().all(|o| overlap_volume(&o.cuboid, &cuboid) == 0.0));
        objects.push(SceneObject {
            cuboid,
            instance_id: objects.len() as u32 + 1,
        });
    }
    Scene::new(room, objects, spec.shell)
}

fn sample(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        (lo + hi) / 2.0
    }
}
