#![allow(dead_code)]

use rand::Rng;
use semmap_core::{ClassId, ClassVocabulary, Cuboid, ObjectMap, Point};

pub fn cuboid(c: [f64; 3], e: [f64; 3], class: u16) -> Cuboid {
    Cuboid::new(Point::from(c), Point::from(e), ClassId(class)).unwrap()
}

pub fn map(objects: Vec<Cuboid>) -> ObjectMap {
    ObjectMap::new(ClassVocabulary::default(), objects).unwrap()
}

/// Ground truth of a few classes, plus an estimate built from jittered
/// copies, duplicates, misses and stray boxes with random confidences.
pub fn random_map_pair(rng: &mut impl Rng) -> (ObjectMap, ObjectMap) {
    let n_gt = rng.random_range(1..10);
    let mut gt = Vec::new();
    for _ in 0..n_gt {
        let c = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(0.0..2.0)];
        let e = [rng.random_range(0.2..1.5), rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)];
        gt.push(cuboid(c, e, rng.random_range(1..4)));
    }
    let mut est = Vec::new();
    for g in &gt {
        let copies = match rng.random_range(0..10) {
            0 | 1 => 0,
            2 => 2,
            _ => 1,
        };
        for _ in 0..copies {
            let j = rng.random_range(0.0..0.6);
            let c = g.centroid() + Point::new(rng.random_range(-j..=j), rng.random_range(-j..=j), rng.random_range(-j..=j)) * 0.5;
            let e = g.extent().map(|x| x * rng.random_range(0.6..1.4));
            let class = if rng.random_bool(0.15) { rng.random_range(1..4) } else { g.class_id().0 };
            est.push(
                Cuboid::new(c, e, ClassId(class))
                    .unwrap()
                    .with_confidence(rng.random_range(0.05..1.0))
                    .unwrap(),
            );
        }
    }
    for _ in 0..rng.random_range(0..4) {
        let c = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0), rng.random_range(0.0..2.0)];
        let e = [rng.random_range(0.2..1.5), rng.random_range(0.2..1.5), rng.random_range(0.2..1.5)];
        est.push(cuboid(c, e, rng.random_range(1..4)).with_confidence(rng.random_range(0.05..1.0)).unwrap());
    }
    (map(est), map(gt))
}
