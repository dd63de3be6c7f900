use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::LopField;
use crate::geometry::{Aabb, Point3};
use crate::query::{grid_samples, infer_batch, LabelBank};
use crate::scene::Frame;
use crate::topomap::describe::Describer;
use crate::topomap::{Edge, EdgeType, MapperConfig, NodeType, Provenance, TopoGraph, Vertex};

/// Accumulated detections of one instance id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub class: String,
    /// Frames in which the instance passed the confidence gate.
    pub observations: u32,
    /// Union of its back-projected pixels over those frames.
    pub bbox: Option<Aabb>,
}

/// Mapper memory carried between updates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapState {
    pub tracks: BTreeMap<i32, ObjectTrack>,
    /// Instance id to object vertex id.
    pub vertex_of: BTreeMap<i32, u32>,
    pub frames_seen: u64,
    pub frames_since_refresh: u32,
}

impl MapState {
    /// Records every instance of `frame` whose confidence clears the gate.
    pub fn observe(&mut self, frame: &Frame, cfg: &MapperConfig) {
        self.frames_seen += 1;
        for id in frame.instances() {
            let conf = frame.instance_confidences.get(&id).copied().unwrap_or(0.0);
            if conf <= cfg.detic_conf_threshold {
                continue;
            }
            let points: Vec<Point3> = (0..frame.instance_ids.len())
                .filter(|&i| frame.instance_ids[i] == id)
                .filter_map(|i| frame.world_point(i))
                .collect();
            let Some(seen) = Aabb::from_points(points) else {
                continue;
            };
            let class = frame.instance_labels.get(&id).cloned().unwrap_or_default();
            let track = self.tracks.entry(id).or_insert(ObjectTrack {
                class,
                observations: 0,
                bbox: None,
            });
            track.observations += 1;
            track.bbox = Some(track.bbox.map_or(seen, |b| b.union(&seen)));
        }
    }

    /// Instance ids that passed the observation rule, ascending.
    fn confirmed<'a>(
        &'a self,
        cfg: &'a MapperConfig,
    ) -> impl Iterator<Item = (i32, &'a ObjectTrack, Aabb)> + 'a {
        self.tracks
            .iter()
            .filter(|(_, t)| cfg.enough_observations(t.observations))
            .filter_map(|(&id, t)| t.bbox.map(|b| (id, t, b)))
    }
}

fn object_vertex(id: u32, track: &ObjectTrack, bbox: &Aabb) -> Vertex {
    Vertex::new(
        id,
        NodeType::Object,
        bbox,
        &track.class,
        &format!("a {}", track.class),
    )
}

/// Object vertices from detections: confidence strictly above the
/// threshold, enough observations, bbox from the union of masked pixels.
/// Ids are assigned from `first_id` in instance-id order.
pub fn map_objects(frames: &[Frame], cfg: &MapperConfig, first_id: u32) -> Vec<Vertex> {
    let mut state = MapState::default();
    frames.iter().for_each(|f| state.observe(f, cfg));
    state
        .confirmed(cfg)
        .zip(first_id..)
        .map(|((_, t, b), id)| object_vertex(id, t, &b))
        .collect()
}

/// Region vertices from a floor-level grid of field queries, one per label
/// that wins at least one cell. Ids start at `first_id` in bank order.
pub fn map_regions(
    field: &LopField<f32>,
    bounds: &Aabb,
    bank: &LabelBank,
    cfg: &MapperConfig,
    first_id: u32,
) -> Result<Vec<Vertex>> {
    cfg.validate()?;
    let step = cfg.grid_step;
    let z = (bounds.min[2] + cfg.sample_height).clamp(bounds.min[2], bounds.max[2]);
    let samples = grid_samples(bounds, step, Some(z))?;
    let nx = ((bounds.max[0] - bounds.min[0]) / step).ceil().max(1.0) as usize;
    let labels: Vec<usize> = infer_batch(field, &samples, bank, cfg.vs_weight)?
        .into_iter()
        .map(|i| i.index)
        .collect();

    let mut out = Vec::new();
    for (label, name) in bank.labels.iter().enumerate() {
        let cells: Vec<usize> = if cfg.keep_largest_component {
            largest_component(&labels, nx, label)
        } else {
            (0..labels.len()).filter(|&c| labels[c] == label).collect()
        };
        let Some(mut bbox) = Aabb::from_points(cells.iter().map(|&c| samples[c])) else {
            continue;
        };
        for i in 0..2 {
            bbox.min[i] = (bbox.min[i] - step / 2.0).max(bounds.min[i]);
            bbox.max[i] = (bbox.max[i] + step / 2.0).min(bounds.max[i]);
        }
        bbox.min[2] = bounds.min[2];
        bbox.max[2] = bounds.max[2];
        let id = first_id + out.len() as u32;
        out.push(Vertex::new(
            id,
            NodeType::Region,
            &bbox,
            name,
            &format!("the {name}"),
        ));
    }
    Ok(out)
}

/// Largest 4-connected set of cells carrying `label`; the first in scan
/// order wins ties.
fn largest_component(labels: &[usize], nx: usize, label: usize) -> Vec<usize> {
    let ny = labels.len() / nx;
    let mut seen = vec![false; labels.len()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..labels.len() {
        if seen[start] || labels[start] != label {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(c) = queue.pop_front() {
            comp.push(c);
            let (x, y) = (c % nx, c / nx);
            let mut push = |n: usize| {
                if !seen[n] && labels[n] == label {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if x > 0 {
                push(c - 1);
            }
            if x + 1 < nx {
                push(c + 1);
            }
            if y > 0 {
                push(c - nx);
            }
            if y + 1 < ny {
                push(c + nx);
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

/// Passage box between two regions whose plan footprints touch or lie
/// within `step` of each other along a shared side longer than `step`.
fn shared_boundary(a: &Aabb, b: &Aabb, step: f64) -> Option<Aabb> {
    let lo = |i: usize| a.min[i].max(b.min[i]);
    let hi = |i: usize| a.max[i].min(b.max[i]);
    let overlap = [hi(0) - lo(0), hi(1) - lo(1)];
    if overlap.iter().any(|&o| o < -step) {
        return None;
    }
    let (contact, along) = if overlap[0] <= overlap[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    if overlap[along] <= step {
        return None;
    }
    let mut center = [0.0; 3];
    let mut extent = [0.0; 3];
    for i in 0..3 {
        center[i] = (lo(i) + hi(i)) / 2.0;
        extent[i] = (hi(i) - lo(i)).max(0.0);
    }
    extent[contact] = step;
    Some(Aabb::from_center_extent(center, extent))
}

/// Planar distance from `p` to the nearest side of `b`; negative outside.
fn inset(b: &Aabb, p: Point3) -> f64 {
    (0..2)
        .map(|i| (p[i] - b.min[i]).min(b.max[i] - p[i]))
        .fold(f64::INFINITY, f64::min)
}

/// Region an object belongs to: among region boxes holding its center, the
/// one it sits deepest in; otherwise the nearest box.
fn home_region<'a>(object: &Vertex, regions: &[&'a Vertex]) -> Option<&'a Vertex> {
    let c = object.bbox_center;
    let key = |r: &Vertex| {
        let b = r.bbox();
        if b.contains(c) {
            inset(&b, c)
        } else {
            -b.distance_to(c) - 1e9
        }
    };
    regions
        .iter()
        .copied()
        .max_by(|a, b| key(a).total_cmp(&key(b)).then(b.id.cmp(&a.id)))
}

/// Rebuilds entrances and edges for the region and object vertices of
/// `vertices`. Returns the new vertex list (old entrances dropped, fresh
/// ones appended) and the edges, both in deterministic order.
pub fn build_edges(
    vertices: &[Vertex],
    describer: &dyn Describer,
    cfg: &MapperConfig,
) -> Result<(Vec<Vertex>, Vec<Edge>)> {
    cfg.validate()?;
    let mut kept: Vec<Vertex> = vertices
        .iter()
        .filter(|v| v.node_type != NodeType::Entrance)
        .cloned()
        .collect();
    kept.sort_by_key(|v| v.id);
    let objects: Vec<&Vertex> = kept
        .iter()
        .filter(|v| v.node_type == NodeType::Object)
        .collect();
    let regions: Vec<&Vertex> = kept
        .iter()
        .filter(|v| v.node_type == NodeType::Region)
        .collect();

    let mut edges = Vec::new();
    let push = |edges: &mut Vec<Edge>, t: EdgeType, a: &Vertex, b: &Vertex| -> Result<()> {
        let d = describer.describe(t, a, b)?;
        edges.push(Edge {
            id: edges.len() as u32,
            edge_type: t,
            start_node: a.clone(),
            end_node: b.clone(),
            relationship: d.relationship,
            position_relation: d.position_relation,
            caption: d.caption,
        });
        Ok(())
    };

    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            if a.bbox().iou(&b.bbox()) > 0.0 {
                push(&mut edges, EdgeType::ObjectObject, a, b)?;
            }
        }
    }
    for o in &objects {
        if let Some(r) = home_region(o, &regions) {
            push(&mut edges, EdgeType::ObjectRegion, o, r)?;
        }
    }

    let mut next_id = kept.iter().map(|v| v.id + 1).max().unwrap_or(0);
    let mut entrances = Vec::new();
    let mut passages = Vec::new();
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            if let Some(bbox) = shared_boundary(&a.bbox(), &b.bbox(), cfg.grid_step) {
                push(&mut edges, EdgeType::RegionRegion, a, b)?;
                let caption = format!("Passage between {} and {}.", a.class, b.class);
                let e = Vertex::new(next_id, NodeType::Entrance, &bbox, "Entrance", &caption);
                next_id += 1;
                passages.push((*a, *b, entrances.len()));
                entrances.push(e);
            }
        }
    }
    for (a, b, k) in passages {
        push(&mut edges, EdgeType::RegionEntrance, a, &entrances[k])?;
        push(&mut edges, EdgeType::RegionEntrance, b, &entrances[k])?;
    }
    kept.extend(entrances);
    Ok((kept, edges))
}

/// Builds the full graph: regions from the field, objects from the
/// frames, then edges. The returned state feeds later [`update`] calls.
#[allow(clippy::too_many_arguments)]
pub fn build_map(
    field: &LopField<f32>,
    bounds: &Aabb,
    bank: &LabelBank,
    frames: &[Frame],
    cfg: &MapperConfig,
    describer: &dyn Describer,
    checkpoint: Option<String>,
) -> Result<(TopoGraph, MapState)> {
    let mut vertices = map_regions(field, bounds, bank, cfg, 0)?;
    let mut state = MapState::default();
    frames.iter().for_each(|f| state.observe(f, cfg));
    let first = vertices.len() as u32;
    let mut vertex_of = BTreeMap::new();
    for (id, (inst, track, bbox)) in (first..).zip(state.confirmed(cfg)) {
        vertices.push(object_vertex(id, track, &bbox));
        vertex_of.insert(inst, id);
    }
    state.vertex_of = vertex_of;
    let (vertices, edges) = build_edges(&vertices, describer, cfg)?;
    let graph = TopoGraph {
        vertices,
        edges,
        provenance: Provenance {
            checkpoint,
            mapper: cfg.clone(),
        },
    };
    graph.validate()?;
    Ok((graph, state))
}

/// Folds new frames into the graph.
///
/// New confirmed instances become object vertices and known ones absorb
/// their new pixels. A sampled pixel whose field label names an existing
/// region and falls outside that region's box stretches the box, by at most
/// `grid_step` beyond its extent before this call. Edges are rebuilt every
/// `edge_refresh_interval` frames; in between, edges keep their relations
/// and only their endpoint copies are refreshed.
pub fn update(
    graph: &mut TopoGraph,
    state: &mut MapState,
    frames: &[Frame],
    field: &LopField<f32>,
    bank: &LabelBank,
    cfg: &MapperConfig,
    describer: &dyn Describer,
) -> Result<()> {
    if frames.is_empty() {
        return Ok(());
    }
    cfg.validate()?;
    let (_, dv, ds) = field.dims();
    bank.check_dims(dv, ds)?;
    let limits: BTreeMap<u32, Aabb> = graph
        .vertices_of(NodeType::Region)
        .map(|v| {
            let b = v.bbox();
            let pad = [cfg.grid_step; 3];
            (v.id, Aabb::new(sub(b.min, pad), add(b.max, pad)))
        })
        .collect();

    for frame in frames {
        frame.validate()?;
        state.observe(frame, cfg);
        grow_objects(graph, state, cfg);
        grow_regions(graph, frame, field, bank, cfg, &limits)?;
        state.frames_since_refresh += 1;
        if state.frames_since_refresh >= cfg.edge_refresh_interval {
            let (vertices, edges) = build_edges(&graph.vertices, describer, cfg)?;
            graph.vertices = vertices;
            graph.edges = edges;
            state.frames_since_refresh = 0;
        }
    }
    sync_endpoints(graph);
    graph.validate()
}

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn grow_objects(graph: &mut TopoGraph, state: &mut MapState, cfg: &MapperConfig) {
    let confirmed: Vec<(i32, ObjectTrack, Aabb)> = state
        .confirmed(cfg)
        .map(|(i, t, b)| (i, t.clone(), b))
        .collect();
    for (inst, track, bbox) in confirmed {
        match state.vertex_of.get(&inst) {
            Some(&vid) => {
                if let Some(v) = graph.vertices.iter_mut().find(|v| v.id == vid) {
                    *v = Vertex {
                        caption: v.caption.clone(),
                        ..object_vertex(vid, &track, &bbox)
                    };
                }
            }
            None => {
                let vid = graph.next_vertex_id();
                graph.vertices.push(object_vertex(vid, &track, &bbox));
                state.vertex_of.insert(inst, vid);
            }
        }
    }
}

fn grow_regions(
    graph: &mut TopoGraph,
    frame: &Frame,
    field: &LopField<f32>,
    bank: &LabelBank,
    cfg: &MapperConfig,
    limits: &BTreeMap<u32, Aabb>,
) -> Result<()> {
    let points: Vec<Point3> = (0..frame.depth.len())
        .step_by(cfg.update_stride)
        .filter_map(|i| frame.world_point(i))
        .collect();
    if points.is_empty() {
        return Ok(());
    }
    let labels = infer_batch(field, &points, bank, cfg.vs_weight)?;
    let mut grown: BTreeMap<u32, Aabb> = BTreeMap::new();
    for (p, inf) in points.iter().zip(labels) {
        let name = &bank.labels[inf.index];
        let Some(v) = graph
            .vertices
            .iter()
            .find(|v| v.node_type == NodeType::Region && &v.class == name)
        else {
            continue;
        };
        let current = grown.get(&v.id).copied().unwrap_or_else(|| v.bbox());
        if current.contains(*p) || !limits.get(&v.id).is_some_and(|l| l.contains(*p)) {
            continue;
        }
        let mut b = current;
        b.include(*p);
        grown.insert(v.id, b);
    }
    for (id, bbox) in grown {
        let v = graph
            .vertices
            .iter_mut()
            .find(|v| v.id == id)
            .ok_or(Error::UnknownVertex(id))?;
        *v = Vertex::new(id, NodeType::Region, &bbox, &v.class, &v.caption);
    }
    Ok(())
}

/// Replaces each edge's embedded endpoint copies with the current vertices.
fn sync_endpoints(graph: &mut TopoGraph) {
    let by_id: BTreeMap<u32, Vertex> = graph.vertices.iter().map(|v| (v.id, v.clone())).collect();
    for e in &mut graph.edges {
        if let Some(v) = by_id.get(&e.start_node.id) {
            e.start_node = v.clone();
        }
        if let Some(v) = by_id.get(&e.end_node.id) {
            e.end_node = v.clone();
        }
    }
}
