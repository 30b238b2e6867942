//! Instance extraction from class-labelled point clouds.
//!
//! Class-level clouds are split per class, clustered by single-linkage
//! Euclidean distance, and each surviving cluster becomes one axis-aligned
//! cuboid. Clouds that already carry instance ids skip the clustering.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_axis_aligned_cuboid, Point};
use crate::par::Execution;
use crate::vocabulary::{ClassId, ClassVocabulary, ObjectMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub position: Point,
    pub class_id: ClassId,
    pub instance_id: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPointCloud {
    pub points: Vec<LabeledPoint>,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        LabeledPointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks finiteness and that every label lies in `vocabulary`.
    pub fn validate(&self, vocabulary: &ClassVocabulary) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.position.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParams(format!("point {i} has a non-finite position")));
            }
            if !vocabulary.contains(p.class_id) {
                return Err(Error::InvalidParams(format!(
                    "point {i} has class id {} outside the vocabulary",
                    p.class_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    /// Two points closer than this (inclusive) share a cluster, in meters.
    pub max_link_distance: f64,
    /// Clusters with fewer points are discarded.
    pub min_cluster_points: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            max_link_distance: 0.10,
            min_cluster_points: 20,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_link_distance > 0.0) || !self.max_link_distance.is_finite() {
            return Err(Error::InvalidParams(format!(
                "max_link_distance must be positive, got {}",
                self.max_link_distance
            )));
        }
        if self.min_cluster_points == 0 {
            return Err(Error::InvalidParams("min_cluster_points must be at least 1".into()));
        }
        Ok(())
    }
}

/// How extracted cuboids get their detection confidence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMode {
    /// Every object is fully confident.
    #[default]
    Full,
    /// Fraction of the class's points that ended up in this cluster.
    PointShare,
}

pub fn split_by_class(cloud: &LabeledPointCloud) -> BTreeMap<ClassId, Vec<Point>> {
    let mut out: BTreeMap<ClassId, Vec<Point>> = BTreeMap::new();
    for p in &cloud.points {
        out.entry(p.class_id).or_default().push(p.position);
    }
    out
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Point, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

fn lex_cmp(a: &Point, b: &Point) -> Ordering {
    a.x.total_cmp(&b.x)
        .then(a.y.total_cmp(&b.y))
        .then(a.z.total_cmp(&b.z))
}

/// Groups of point indices, each sorted ascending, ordered by the
/// lexicographically smallest point of each group.
fn canonical_groups(points: &[Point], mut labels: impl FnMut(usize) -> usize) -> Vec<Vec<usize>> {
    let mut by_root: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..points.len() {
        by_root.entry(labels(i)).or_default().push(i);
    }
    let mut keyed: Vec<(usize, Vec<usize>)> = by_root
        .into_values()
        .map(|g| {
            let first = g
                .iter()
                .copied()
                .min_by(|&a, &b| lex_cmp(&points[a], &points[b]).then(a.cmp(&b)))
                .expect("groups are non-empty");
            (first, g)
        })
        .collect();
    keyed.sort_by(|(ka, _), (kb, _)| lex_cmp(&points[*ka], &points[*kb]).then(ka.cmp(kb)));
    keyed.into_iter().map(|(_, g)| g).collect()
}

/// Single-linkage connected components with link distance `link`
/// (inclusive), before any size filtering.
pub fn connected_components(points: &[Point], link: f64) -> Vec<Vec<usize>> {
    let mut grid: HashMap<Cell, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell_of(p, link)).or_default().push(i);
    }
    let link_sq = link * link;
    let mut sets = DisjointSet::new(points.len());
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell_of(p, link);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && (points[j] - p).norm_squared() <= link_sq {
                            sets.union(i, j);
                        }
                    }
                }
            }
        }
    }
    canonical_groups(points, |i| sets.find(i))
}

/// Euclidean clustering: connected components under `max_link_distance`,
/// minus those smaller than `min_cluster_points`. Returns index sets into
/// `points`.
pub fn euclidean_cluster(points: &[Point], params: &ClusterParams) -> Result<Vec<Vec<usize>>> {
    params.validate()?;
    let mut groups = connected_components(points, params.max_link_distance);
    groups.retain(|g| g.len() >= params.min_cluster_points);
    Ok(groups)
}

fn one_hot(class: ClassId, vocabulary: &ClassVocabulary) -> Vec<f64> {
    let mut probs = vec![0.0; vocabulary.label_space()];
    probs[class.index()] = 1.0;
    probs
}

/// Builds an object map from a class-level cloud: per-class clustering,
/// then one fully confident, one-hot cuboid per surviving cluster.
pub fn extract_object_map(
    cloud: &LabeledPointCloud,
    vocabulary: &ClassVocabulary,
    params: &ClusterParams,
    mode: ConfidenceMode,
    exec: Execution,
) -> Result<ObjectMap> {
    params.validate()?;
    cloud.validate(vocabulary)?;
    let per_class: Vec<(ClassId, Vec<Point>)> = split_by_class(cloud).into_iter().collect();

    let results = exec.map(&per_class, |(class, points)| -> Result<Vec<_>> {
        let clusters = euclidean_cluster(points, params)?;
        clusters
            .iter()
            .map(|idx| {
                let support: Vec<Point> = idx.iter().map(|&i| points[i]).collect();
                let confidence = match mode {
                    ConfidenceMode::Full => 1.0,
                    ConfidenceMode::PointShare => idx.len() as f64 / points.len() as f64,
                };
                fit_axis_aligned_cuboid(&support)?
                    .with_class(*class)
                    .with_label_probs(one_hot(*class, vocabulary))?
                    .with_confidence(confidence)
            })
            .collect()
    });

    let mut map = ObjectMap::empty(vocabulary.clone());
    for objects in results {
        for obj in objects? {
            map.push(obj)?;
        }
    }
    Ok(map)
}

/// Builds an object map from a cloud whose points already carry instance
/// ids: one cuboid per id, labelled with the majority class (ties go to the
/// lowest class id).
pub fn instance_map_from_ids(cloud: &LabeledPointCloud, vocabulary: &ClassVocabulary) -> Result<ObjectMap> {
    cloud.validate(vocabulary)?;
    let mut groups: BTreeMap<u32, (Vec<Point>, BTreeMap<ClassId, usize>)> = BTreeMap::new();
    for (index, p) in cloud.points.iter().enumerate() {
        let id = p.instance_id.ok_or(Error::InstanceIdsRequired { index })?;
        let entry = groups.entry(id).or_default();
        entry.0.push(p.position);
        *entry.1.entry(p.class_id).or_default() += 1;
    }

    let mut map = ObjectMap::empty(vocabulary.clone());
    for (points, votes) in groups.values() {
        // BTreeMap iterates ascending, so max_by keeping the first maximum
        // picks the lowest class id on ties.
        let class = votes
            .iter()
            .fold(None::<(ClassId, usize)>, |best, (&c, &n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((c, n)),
            })
            .map(|(c, _)| c)
            .ok_or(Error::EmptyInstance)?;
        let cuboid = fit_axis_aligned_cuboid(points)?
            .with_class(class)
            .with_label_probs(one_hot(class, vocabulary))?;
        map.push(cuboid)?;
    }
    Ok(map)
}
