//! Topometric graph of regions, objects and entrances built by querying a
//! trained field.

mod describe;
mod json;
mod mapper;

pub use describe::{compass, direction, Describer, Description, ExternalDescriber, RuleDescriber};
pub use json::{fmt_g6, from_json, quantize, to_json, vertex_json};
pub use mapper::{build_edges, build_map, map_objects, map_regions, update, MapState, ObjectTrack};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeType {
    Region,
    Object,
    Entrance,
}

impl NodeType {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Region => "region",
            NodeType::Object => "object",
            NodeType::Entrance => "Entrance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "region" => Ok(NodeType::Region),
            "object" => Ok(NodeType::Object),
            "Entrance" => Ok(NodeType::Entrance),
            other => Err(Error::SchemaError(format!("unknown node_type {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeType {
    ObjectObject,
    ObjectRegion,
    RegionRegion,
    RegionEntrance,
}

impl EdgeType {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeType::ObjectObject => "object_object",
            EdgeType::ObjectRegion => "object_region",
            EdgeType::RegionRegion => "region_region",
            EdgeType::RegionEntrance => "region_entrance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "object_object" => Ok(EdgeType::ObjectObject),
            "object_region" => Ok(EdgeType::ObjectRegion),
            "region_region" => Ok(EdgeType::RegionRegion),
            "region_entrance" => Ok(EdgeType::RegionEntrance),
            other => Err(Error::SchemaError(format!("unknown edge_type {other:?}"))),
        }
    }

    /// Node types of `(start, end)`.
    pub fn endpoints(self) -> (NodeType, NodeType) {
        match self {
            EdgeType::ObjectObject => (NodeType::Object, NodeType::Object),
            EdgeType::ObjectRegion => (NodeType::Object, NodeType::Region),
            EdgeType::RegionRegion => (NodeType::Region, NodeType::Region),
            EdgeType::RegionEntrance => (NodeType::Region, NodeType::Entrance),
        }
    }
}

pub const CONNECTED: &str = "connected";
pub const BELONG: &str = "belong";
pub const REFUSED: &str = "false";

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: u32,
    pub node_type: NodeType,
    pub bbox_extent: Point3,
    pub bbox_center: Point3,
    pub class: String,
    pub caption: String,
}

impl Vertex {
    /// Coordinates are quantized to the six significant digits the JSON
    /// form keeps, so a serialized graph reads back equal.
    pub fn new(id: u32, node_type: NodeType, bbox: &Aabb, class: &str, caption: &str) -> Self {
        Vertex {
            id,
            node_type,
            bbox_extent: bbox.extent().map(|v| quantize(v.max(0.0))),
            bbox_center: bbox.center().map(quantize),
            class: class.to_string(),
            caption: caption.to_string(),
        }
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_center_extent(self.bbox_center, self.bbox_extent)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .bbox_extent
            .iter()
            .chain(&self.bbox_center)
            .all(|v| v.is_finite());
        if !finite || self.bbox_extent.iter().any(|&e| e < 0.0) {
            return Err(Error::SchemaError(format!(
                "vertex {} has an invalid bbox",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: u32,
    pub edge_type: EdgeType,
    pub start_node: Vertex,
    pub end_node: Vertex,
    pub relationship: String,
    pub position_relation: String,
    pub caption: String,
}

/// Origin of a graph: the field it was read from and the mapper settings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    /// SHA-256 of the field checkpoint, hex.
    pub checkpoint: Option<String>,
    pub mapper: MapperConfig,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopoGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub provenance: Provenance,
}

impl TopoGraph {
    pub fn vertex(&self, id: u32) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    pub fn vertices_of(&self, t: NodeType) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(move |v| v.node_type == t)
    }

    pub fn next_vertex_id(&self) -> u32 {
        self.vertices.iter().map(|v| v.id + 1).max().unwrap_or(0)
    }

    /// Endpoint ids exist and match their embedded copies, types agree, ids
    /// are unique and no endpoint pair repeats within an edge type.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for v in &self.vertices {
            v.validate()?;
            if !ids.insert(v.id) {
                return Err(Error::SchemaError(format!("duplicate vertex id {}", v.id)));
            }
        }
        let mut edge_ids = std::collections::BTreeSet::new();
        let mut pairs = std::collections::BTreeSet::new();
        for e in &self.edges {
            if !edge_ids.insert(e.id) {
                return Err(Error::SchemaError(format!("duplicate edge id {}", e.id)));
            }
            for end in [&e.start_node, &e.end_node] {
                match self.vertex(end.id) {
                    Some(v) if v == end => {}
                    Some(_) => {
                        return Err(Error::SchemaError(format!(
                            "edge {} carries a stale copy of vertex {}",
                            e.id, end.id
                        )))
                    }
                    None => {
                        return Err(Error::SchemaError(format!(
                            "edge {} references missing vertex {}",
                            e.id, end.id
                        )))
                    }
                }
            }
            if (e.start_node.node_type, e.end_node.node_type) != e.edge_type.endpoints() {
                return Err(Error::SchemaError(format!(
                    "edge {} of type {} joins {} and {}",
                    e.id,
                    e.edge_type.as_str(),
                    e.start_node.node_type.as_str(),
                    e.end_node.node_type.as_str()
                )));
            }
            let (a, b) = (
                e.start_node.id.min(e.end_node.id),
                e.start_node.id.max(e.end_node.id),
            );
            if !pairs.insert((e.edge_type, a, b)) {
                return Err(Error::SchemaError(format!(
                    "second {} edge between {a} and {b}",
                    e.edge_type.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// How the observation count is compared with `min_observations`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservationRule {
    #[default]
    AtLeast,
    MoreThan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DescriberKind {
    #[default]
    RuleBased,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapperConfig {
    pub grid_step: f64,
    /// Detections must score strictly above this.
    pub detic_conf_threshold: f32,
    pub min_observations: u32,
    pub observation_rule: ObservationRule,
    pub edge_refresh_interval: u32,
    pub describer: DescriberKind,
    pub vs_weight: f64,
    /// Height above the floor of the region sampling layer.
    pub sample_height: f64,
    /// Pixel stride when back-projecting frames for region growth.
    pub update_stride: usize,
    /// Bound each region by its largest 4-connected patch of grid cells
    /// instead of every cell carrying its label.
    pub keep_largest_component: bool,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            grid_step: 0.5,
            detic_conf_threshold: 0.60,
            min_observations: 3,
            observation_rule: ObservationRule::AtLeast,
            edge_refresh_interval: 50,
            describer: DescriberKind::RuleBased,
            vs_weight: crate::query::DEFAULT_VS_WEIGHT,
            sample_height: 0.05,
            update_stride: 4,
            keep_largest_component: true,
        }
    }
}

impl MapperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "grid_step {} must be positive",
                self.grid_step
            )));
        }
        if !(self.detic_conf_threshold > 0.0 && self.detic_conf_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "detic_conf_threshold {} outside (0, 1)",
                self.detic_conf_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.vs_weight) {
            return Err(Error::InvalidConfig(format!(
                "vs_weight {} outside [0, 1]",
                self.vs_weight
            )));
        }
        if self.edge_refresh_interval == 0 || self.update_stride == 0 {
            return Err(Error::InvalidConfig(
                "edge_refresh_interval and update_stride must be positive".into(),
            ));
        }
        if !self.sample_height.is_finite() {
            return Err(Error::InvalidConfig("sample_height must be finite".into()));
        }
        Ok(())
    }

    pub fn enough_observations(&self, count: u32) -> bool {
        match self.observation_rule {
            ObservationRule::AtLeast => count >= self.min_observations,
            ObservationRule::MoreThan => count > self.min_observations,
        }
    }
}
