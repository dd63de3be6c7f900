//! A* search over the topometric graph and straight-line waypoints.
//!
//! Walkable edges are region–region, region–entrance and object–region.
//! Objects are leaves: a path may start or end at one but never passes
//! through it. Edge cost is the distance between bounding-box centers and
//! the heuristic is the straight-line distance to the goal center, which
//! never overestimates under that cost.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::embed::{compose_prompt, EmbeddingProvider, TextEmbedding};
use crate::error::{Error, Result};
use crate::field::LopField;
use crate::geometry::{distance, Point3};
use crate::query::{infer_attribute, infer_batch, LabelBank, DEFAULT_VS_WEIGHT};
use crate::topomap::{EdgeType, NodeType, TopoGraph, Vertex, BELONG};

pub const DEFAULT_WAYPOINT_STEP: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub waypoint_step: f64,
    pub vs_weight: f64,
    /// Height at which waypoints are placed and labelled; `None` keeps the
    /// heights interpolated between vertex centers.
    pub waypoint_height: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            waypoint_step: DEFAULT_WAYPOINT_STEP,
            vs_weight: DEFAULT_VS_WEIGHT,
            waypoint_height: None,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.waypoint_step > 0.0 && self.waypoint_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "waypoint_step {} must be positive",
                self.waypoint_step
            )));
        }
        if !(0.0..=1.0).contains(&self.vs_weight) {
            return Err(Error::InvalidConfig(format!(
                "vs_weight {} outside [0, 1]",
                self.vs_weight
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Point(Point3),
    Vertex(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Goal {
    Query(String),
    Vertex(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub start: Start,
    pub goal: Goal,
    /// Region the goal object should belong to.
    pub region_hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<u32>,
    pub cost: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Path {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn walkable(t: EdgeType) -> bool {
    matches!(
        t,
        EdgeType::RegionRegion | EdgeType::RegionEntrance | EdgeType::ObjectRegion
    )
}

/// Walkable neighbors of every vertex with their edge costs, in edge order.
pub fn adjacency(graph: &TopoGraph) -> BTreeMap<u32, Vec<(u32, f64)>> {
    let mut adj: BTreeMap<u32, Vec<(u32, f64)>> =
        graph.vertices.iter().map(|v| (v.id, Vec::new())).collect();
    for e in graph.edges.iter().filter(|e| walkable(e.edge_type)) {
        let (a, b) = (&e.start_node, &e.end_node);
        let d = distance(a.bbox_center, b.bbox_center);
        adj.entry(a.id).or_default().push((b.id, d));
        adj.entry(b.id).or_default().push((a.id, d));
    }
    adj
}

fn vertex(graph: &TopoGraph, id: u32) -> Result<&Vertex> {
    graph.vertex(id).ok_or(Error::UnknownVertex(id))
}

/// Open-set entry ordered so that the heap pops the lowest
/// `(f, g, id)` first.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    id: u32,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost-optimal vertex path from `start` to `goal`; waypoints are left empty.
pub fn astar(graph: &TopoGraph, start: u32, goal: u32) -> Result<Path> {
    astar_observed(graph, start, goal, |_, _| {})
}

/// [`astar`] that reports each expanded vertex with its heuristic value.
pub(crate) fn astar_observed(
    graph: &TopoGraph,
    start: u32,
    goal: u32,
    on_expand: impl FnMut(u32, f64),
) -> Result<Path> {
    vertex(graph, start)?;
    let target = vertex(graph, goal)?.bbox_center;
    let centers: BTreeMap<u32, Point3> = graph
        .vertices
        .iter()
        .map(|v| (v.id, v.bbox_center))
        .collect();
    let leaves: BTreeSet<u32> = graph.vertices_of(NodeType::Object).map(|v| v.id).collect();
    search(
        &adjacency(graph),
        &leaves,
        start,
        goal,
        |id| distance(centers[&id], target),
        on_expand,
    )
}

/// A* over an explicit weighted adjacency. `leaves` are never expanded
/// unless they are the start; `h` must not overestimate.
pub(crate) fn search(
    adj: &BTreeMap<u32, Vec<(u32, f64)>>,
    leaves: &BTreeSet<u32>,
    start: u32,
    goal: u32,
    h: impl Fn(u32) -> f64,
    mut on_expand: impl FnMut(u32, f64),
) -> Result<Path> {
    for id in [start, goal] {
        if !adj.contains_key(&id) {
            return Err(Error::UnknownVertex(id));
        }
    }
    let mut g_score: BTreeMap<u32, f64> = BTreeMap::from([(start, 0.0)]);
    let mut came_from: BTreeMap<u32, u32> = BTreeMap::new();
    let mut open = BinaryHeap::from([Open {
        f: h(start),
        g: 0.0,
        id: start,
    }]);
    while let Some(Open { g, id, .. }) = open.pop() {
        if g > g_score[&id] {
            continue;
        }
        on_expand(id, h(id));
        if id == goal {
            let mut vertices = vec![id];
            let mut cur = id;
            while let Some(&prev) = came_from.get(&cur) {
                vertices.insert(0, prev);
                cur = prev;
            }
            return Ok(Path {
                vertices,
                cost: g,
                waypoints: Vec::new(),
            });
        }
        if id != start && leaves.contains(&id) {
            continue;
        }
        for &(next, w) in &adj[&id] {
            let tentative = g + w;
            if g_score.get(&next).is_none_or(|&old| tentative < old) {
                g_score.insert(next, tentative);
                came_from.insert(next, id);
                open.push(Open {
                    f: tentative + h(next),
                    g: tentative,
                    id: next,
                });
            }
        }
    }
    Err(Error::NoPathFound { start, goal })
}

fn text_score(q: &TextEmbedding, c: &TextEmbedding, w: f64) -> f64 {
    w * q.vision.cosine(&c.vision) + (1.0 - w) * q.semantic.cosine(&c.semantic)
}

/// Regions each object belongs to, from its object–region edges.
fn home_regions(graph: &TopoGraph) -> BTreeMap<u32, &str> {
    graph
        .edges
        .iter()
        .filter(|e| e.edge_type == EdgeType::ObjectRegion && e.relationship == BELONG)
        .map(|e| (e.start_node.id, e.end_node.class.as_str()))
        .collect()
}

/// Object vertex whose description best matches `query`.
///
/// Each candidate is described as its class placed in its region. A region
/// hint keeps only objects belonging to a region of that class.
pub fn resolve_goal(
    graph: &TopoGraph,
    query: &str,
    provider: &dyn EmbeddingProvider,
    region_hint: Option<&str>,
    w: f64,
) -> Result<u32> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidInput(format!("vs weight {w} outside [0, 1]")));
    }
    let homes = home_regions(graph);
    let candidates: Vec<&Vertex> = graph
        .vertices_of(NodeType::Object)
        .filter(|v| {
            region_hint.is_none_or(|r| {
                homes
                    .get(&v.id)
                    .is_some_and(|h| h.eq_ignore_ascii_case(r.trim()))
            })
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoCandidates(match region_hint {
            Some(r) => format!("no object belongs to a {r}"),
            None => "graph has no object vertices".into(),
        }));
    }
    let q = provider.embed_text(query)?;
    let mut best: Option<(f64, u32)> = None;
    for v in candidates {
        let text = match homes.get(&v.id) {
            Some(region) => compose_prompt(&v.class, region)?,
            None => v.class.clone(),
        };
        let s = text_score(&q, &provider.embed_text(&text)?, w);
        if best.is_none_or(|(b, _)| s > b) {
            best = Some((s, v.id));
        }
    }
    Ok(best.expect("candidates are non-empty").1)
}

/// Points every `step` meters along the polyline through the path's vertex
/// centers, both ends included, each labelled by the field.
pub fn emit_waypoints(
    graph: &TopoGraph,
    vertices: &[u32],
    field: &LopField<f32>,
    bank: &LabelBank,
    cfg: &PlannerConfig,
) -> Result<Vec<Waypoint>> {
    cfg.validate()?;
    let centers: Vec<Point3> = vertices
        .iter()
        .map(|&id| vertex(graph, id).map(|v| v.bbox_center))
        .collect::<Result<_>>()?;
    let Some(&last) = centers.last() else {
        return Ok(Vec::new());
    };
    let mut points = Vec::new();
    for pair in centers.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n = (distance(a, b) / cfg.waypoint_step - 1e-9).ceil().max(0.0) as usize;
        for i in 0..n {
            let t = i as f64 / n as f64;
            points.push([
                a[0] + t * (b[0] - a[0]),
                a[1] + t * (b[1] - a[1]),
                a[2] + t * (b[2] - a[2]),
            ]);
        }
    }
    points.push(last);
    if let Some(z) = cfg.waypoint_height {
        points.iter_mut().for_each(|p| p[2] = z);
    }
    let labels = infer_batch(field, &points, bank, cfg.vs_weight)?;
    Ok(points
        .iter()
        .zip(labels)
        .map(|(p, l)| Waypoint {
            x: p[0],
            y: p[1],
            z: p[2],
            region: bank.labels[l.index].clone(),
        })
        .collect())
}

/// Region vertex a raw position belongs to: the field labels the point and
/// the nearest region vertex of that class is taken.
pub fn resolve_start(
    graph: &TopoGraph,
    p: Point3,
    field: &LopField<f32>,
    bank: &LabelBank,
    w: f64,
) -> Result<u32> {
    let (label, _) = infer_attribute(field, p, bank, w)?;
    graph
        .vertices_of(NodeType::Region)
        .filter(|v| v.class == label)
        .min_by(|a, b| {
            distance(a.bbox_center, p)
                .total_cmp(&distance(b.bbox_center, p))
                .then(a.id.cmp(&b.id))
        })
        .map(|v| v.id)
        .ok_or_else(|| Error::NoCandidates(format!("no region vertex labelled {label}")))
}

/// Resolves both ends of `request`, searches, and emits waypoints.
pub fn plan(
    graph: &TopoGraph,
    request: &PlanRequest,
    field: &LopField<f32>,
    bank: &LabelBank,
    provider: &dyn EmbeddingProvider,
    cfg: &PlannerConfig,
) -> Result<Path> {
    cfg.validate()?;
    let start = match &request.start {
        Start::Vertex(id) => vertex(graph, *id)?.id,
        Start::Point(p) => resolve_start(graph, *p, field, bank, cfg.vs_weight)?,
    };
    let goal = match &request.goal {
        Goal::Vertex(id) => vertex(graph, *id)?.id,
        Goal::Query(q) => resolve_goal(
            graph,
            q,
            provider,
            request.region_hint.as_deref(),
            cfg.vs_weight,
        )?,
    };
    let mut path = astar(graph, start, goal)?;
    path.waypoints = emit_waypoints(graph, &path.vertices, field, bank, cfg)?;
    Ok(path)
}
