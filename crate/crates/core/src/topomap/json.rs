//! Canonical JSON form: fixed key order, two-space indentation and `%.6g`
//! numbers. Parsing is strict about keys and types.

use std::fmt::Write;

use serde_json::{Map, Value};

use super::{Edge, EdgeType, MapperConfig, NodeType, Provenance, TopoGraph, Vertex};
use crate::error::{Error, Result};

/// C's `%.6g`: six significant digits, trailing zeros dropped, exponent
/// form below 1e-4 and from 1e6 up.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (5 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The value a coordinate reads back as after a JSON round trip.
pub fn quantize(x: f64) -> f64 {
    let q: f64 = fmt_g6(x).parse().unwrap_or(x);
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

fn push_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings serialize"));
}

fn push_vec3(out: &mut String, v: &[f64; 3]) {
    let _ = write!(
        out,
        "[{}, {}, {}]",
        fmt_g6(v[0]),
        fmt_g6(v[1]),
        fmt_g6(v[2])
    );
}

fn push_vertex(out: &mut String, v: &Vertex, indent: &str) {
    let i2 = format!("{indent}  ");
    out.push_str("{\n");
    let _ = writeln!(out, "{i2}\"id\": {},", v.id);
    let _ = writeln!(out, "{i2}\"node_type\": \"{}\",", v.node_type.as_str());
    let _ = write!(out, "{i2}\"bbox_extent\": ");
    push_vec3(out, &v.bbox_extent);
    let _ = write!(out, ",\n{i2}\"bbox_center\": ");
    push_vec3(out, &v.bbox_center);
    let _ = write!(out, ",\n{i2}\"class\": ");
    push_str(out, &v.class);
    let _ = write!(out, ",\n{i2}\"caption\": ");
    push_str(out, &v.caption);
    let _ = write!(out, "\n{indent}}}");
}

/// One vertex as a standalone canonical JSON object.
pub fn vertex_json(v: &Vertex) -> String {
    let mut out = String::new();
    push_vertex(&mut out, v, "");
    out
}

fn push_edge(out: &mut String, e: &Edge) {
    let i2 = "    ";
    out.push_str("{\n");
    let _ = writeln!(out, "{i2}\"id\": {},", e.id);
    let _ = writeln!(out, "{i2}\"edge_type\": \"{}\",", e.edge_type.as_str());
    let _ = write!(out, "{i2}\"start_node\": ");
    push_vertex(out, &e.start_node, i2);
    let _ = write!(out, ",\n{i2}\"end_node\": ");
    push_vertex(out, &e.end_node, i2);
    for (key, val) in [
        ("relationship", &e.relationship),
        ("position_relation", &e.position_relation),
        ("caption", &e.caption),
    ] {
        let _ = write!(out, ",\n{i2}\"{key}\": ");
        push_str(out, val);
    }
    out.push_str("\n  }");
}

pub fn to_json(g: &TopoGraph) -> String {
    let mut out = String::from("{\n  \"vertices\": [");
    for (k, v) in g.vertices.iter().enumerate() {
        out.push_str(if k == 0 { "\n    " } else { ",\n    " });
        push_vertex(&mut out, v, "    ");
    }
    out.push_str(if g.vertices.is_empty() {
        "],\n"
    } else {
        "\n  ],\n"
    });
    out.push_str("  \"edges\": [");
    for (k, e) in g.edges.iter().enumerate() {
        out.push_str(if k == 0 { "\n  " } else { ",\n  " });
        push_edge(&mut out, e);
    }
    out.push_str(if g.edges.is_empty() {
        "],\n"
    } else {
        "\n  ],\n"
    });
    out.push_str("  \"provenance\": {\n    \"checkpoint\": ");
    match &g.provenance.checkpoint {
        Some(c) => push_str(&mut out, c),
        None => out.push_str("null"),
    }
    out.push_str(",\n    \"mapper\": ");
    out.push_str(&serde_json::to_string(&g.provenance.mapper).expect("mapper config serializes"));
    out.push_str("\n  }\n}\n");
    out
}

fn schema(msg: impl Into<String>) -> Error {
    Error::SchemaError(msg.into())
}

fn exact_keys<'a>(v: &'a Value, keys: &[&str], what: &str) -> Result<&'a Map<String, Value>> {
    let obj = v
        .as_object()
        .ok_or_else(|| schema(format!("{what} is not an object")))?;
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(schema(format!("{what} lacks key {k:?}")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(schema(format!("{what} has unknown key {extra:?}")));
    }
    Ok(obj)
}

fn get_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str> {
    obj[key]
        .as_str()
        .ok_or_else(|| schema(format!("{key} must be a string")))
}

fn get_id(obj: &Map<String, Value>) -> Result<u32> {
    obj["id"]
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| schema("id must be a non-negative 32-bit integer"))
}

fn get_vec3(obj: &Map<String, Value>, key: &str) -> Result<[f64; 3]> {
    let arr = obj[key]
        .as_array()
        .filter(|a| a.len() == 3)
        .ok_or_else(|| schema(format!("{key} must hold 3 numbers")))?;
    let mut out = [0.0; 3];
    for (o, v) in out.iter_mut().zip(arr) {
        *o = v
            .as_f64()
            .ok_or_else(|| schema(format!("{key} must hold 3 numbers")))?;
    }
    Ok(out)
}

const VERTEX_KEYS: [&str; 6] = [
    "id",
    "node_type",
    "bbox_extent",
    "bbox_center",
    "class",
    "caption",
];
const EDGE_KEYS: [&str; 7] = [
    "id",
    "edge_type",
    "start_node",
    "end_node",
    "relationship",
    "position_relation",
    "caption",
];

fn parse_vertex(v: &Value) -> Result<Vertex> {
    let obj = exact_keys(v, &VERTEX_KEYS, "vertex")?;
    let vertex = Vertex {
        id: get_id(obj)?,
        node_type: NodeType::parse(get_str(obj, "node_type")?)?,
        bbox_extent: get_vec3(obj, "bbox_extent")?,
        bbox_center: get_vec3(obj, "bbox_center")?,
        class: get_str(obj, "class")?.to_string(),
        caption: get_str(obj, "caption")?.to_string(),
    };
    vertex.validate()?;
    Ok(vertex)
}

fn parse_edge(v: &Value) -> Result<Edge> {
    let obj = exact_keys(v, &EDGE_KEYS, "edge")?;
    Ok(Edge {
        id: get_id(obj)?,
        edge_type: EdgeType::parse(get_str(obj, "edge_type")?)?,
        start_node: parse_vertex(&obj["start_node"])?,
        end_node: parse_vertex(&obj["end_node"])?,
        relationship: get_str(obj, "relationship")?.to_string(),
        position_relation: get_str(obj, "position_relation")?.to_string(),
        caption: get_str(obj, "caption")?.to_string(),
    })
}

pub fn from_json(text: &str) -> Result<TopoGraph> {
    let root: Value = serde_json::from_str(text).map_err(|e| schema(format!("not JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| schema("graph is not an object"))?;
    let keys: &[&str] = if obj.contains_key("provenance") {
        &["vertices", "edges", "provenance"]
    } else {
        &["vertices", "edges"]
    };
    let obj = exact_keys(&root, keys, "graph")?;
    let list = |key: &str| {
        obj[key]
            .as_array()
            .ok_or_else(|| schema(format!("{key} must be an array")))
    };
    let vertices = list("vertices")?
        .iter()
        .map(parse_vertex)
        .collect::<Result<Vec<_>>>()?;
    let edges = list("edges")?
        .iter()
        .map(parse_edge)
        .collect::<Result<Vec<_>>>()?;
    let provenance = match obj.get("provenance") {
        None => Provenance::default(),
        Some(p) => {
            let p = exact_keys(p, &["checkpoint", "mapper"], "provenance")?;
            let checkpoint = match &p["checkpoint"] {
                Value::Null => None,
                Value::String(s) => Some(s.clone()),
                _ => return Err(schema("checkpoint must be a string or null")),
            };
            let mapper: MapperConfig = serde_json::from_value(p["mapper"].clone())
                .map_err(|e| schema(format!("mapper config: {e}")))?;
            Provenance { checkpoint, mapper }
        }
    };
    let g = TopoGraph {
        vertices,
        edges,
        provenance,
    };
    g.validate()?;
    Ok(g)
}
