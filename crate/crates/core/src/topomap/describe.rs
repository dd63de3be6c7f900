//! Edge descriptions: relationship, position relation and caption.
//!
//! Compass convention: +x is east, +y is north. Height is ignored.

use std::f64::consts::FRAC_PI_4;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::plausibility::VetoTable;
use crate::topomap::json::vertex_json;
use crate::topomap::{EdgeType, Vertex, BELONG, CONNECTED, REFUSED};

const DIRECTIONS: [&str; 8] = [
    "east",
    "northeast",
    "north",
    "northwest",
    "west",
    "southwest",
    "south",
    "southeast",
];

/// Sector of the planar direction `(dx, dy)`, 0 = east, counter-clockwise.
///
/// The direction is classified through its representative in the upper
/// half-plane, so `-d` always lands exactly four sectors from `d`.
fn sector(dx: f64, dy: f64) -> Option<usize> {
    if dx == 0.0 && dy == 0.0 {
        return None;
    }
    let upper = dy > 0.0 || (dy == 0.0 && dx > 0.0);
    let (x, y) = if upper { (dx, dy) } else { (-dx, -dy) };
    let s = (y.atan2(x) / FRAC_PI_4).round() as usize % 8;
    Some(if upper { s } else { (s + 4) % 8 })
}

/// Compass direction of `b` seen from `a`; `None` when they coincide in plan.
pub fn direction(a: Point3, b: Point3) -> Option<&'static str> {
    sector(b[0] - a[0], b[1] - a[1]).map(|s| DIRECTIONS[s])
}

/// `"b to the <direction> of a"`.
pub fn compass(a: Point3, b: Point3) -> String {
    match direction(a, b) {
        Some(d) => format!("b to the {d} of a"),
        None => "b at the same location as a".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Description {
    pub relationship: String,
    pub position_relation: String,
    pub caption: String,
}

/// Describes the edge between `a` (start) and `b` (end) of a given type.
pub trait Describer {
    fn describe(&self, edge_type: EdgeType, a: &Vertex, b: &Vertex) -> Result<Description>;
}

/// Deterministic rules: containment, overlap and compass geometry, with a
/// veto table for implausible object/region pairs.
#[derive(Debug, Clone, Default)]
pub struct RuleDescriber {
    pub vetoes: VetoTable,
}

impl RuleDescriber {
    pub fn new(vetoes: VetoTable) -> Self {
        RuleDescriber { vetoes }
    }

    fn object_in_region(&self, a: &Vertex, b: &Vertex) -> Description {
        let refused = self.vetoes.is_implausible(&a.class, &b.class);
        let central =
            (0..2).all(|i| (a.bbox_center[i] - b.bbox_center[i]).abs() <= b.bbox_extent[i] / 6.0);
        let side = direction(b.bbox_center, a.bbox_center).filter(|_| !central);
        let position_relation = match side {
            Some(d) => format!("a at the {d} of b"),
            None => "a in the center of b".to_string(),
        };
        let caption = match (refused, side) {
            (true, _) => format!("A {} does not fit in a {}.", a.class, b.class),
            (false, Some(d)) => format!("The {} sits in the {d} part of the {}.", a.class, b.class),
            (false, None) => format!("The {} sits in the middle of the {}.", a.class, b.class),
        };
        Description {
            relationship: if refused { REFUSED } else { BELONG }.to_string(),
            position_relation,
            caption,
        }
    }
}

impl Describer for RuleDescriber {
    fn describe(&self, edge_type: EdgeType, a: &Vertex, b: &Vertex) -> Result<Description> {
        if (a.node_type, b.node_type) != edge_type.endpoints() {
            return Err(Error::SchemaError(format!(
                "{} edge cannot join {} and {}",
                edge_type.as_str(),
                a.node_type.as_str(),
                b.node_type.as_str()
            )));
        }
        if edge_type == EdgeType::ObjectRegion {
            return Ok(self.object_in_region(a, b));
        }
        let caption = match edge_type {
            EdgeType::ObjectObject => format!("The {} touches the {}.", a.class, b.class),
            EdgeType::RegionRegion => format!("The {} adjoins the {}.", a.class, b.class),
            _ => format!("The {} opens onto this passage.", a.class),
        };
        Ok(Description {
            relationship: CONNECTED.to_string(),
            position_relation: compass(a.bbox_center, b.bbox_center),
            caption,
        })
    }
}

/// Hands both endpoints as canonical vertex JSON to a callback, for example
/// a chat-completion client, and parses its JSON reply.
pub struct ExternalDescriber<F> {
    call: F,
}

impl<F> ExternalDescriber<F>
where
    F: Fn(EdgeType, &str, &str) -> Result<String>,
{
    pub fn new(call: F) -> Self {
        ExternalDescriber { call }
    }
}

impl<F> Describer for ExternalDescriber<F>
where
    F: Fn(EdgeType, &str, &str) -> Result<String>,
{
    fn describe(&self, edge_type: EdgeType, a: &Vertex, b: &Vertex) -> Result<Description> {
        let reply = (self.call)(edge_type, &vertex_json(a), &vertex_json(b))?;
        let d: Description = serde_json::from_str(reply.trim())
            .map_err(|e| Error::SchemaError(format!("describer reply: {e}")))?;
        if ![CONNECTED, BELONG, REFUSED].contains(&d.relationship.as_str()) {
            return Err(Error::SchemaError(format!(
                "unknown relationship {:?}",
                d.relationship
            )));
        }
        Ok(d)
    }
}
