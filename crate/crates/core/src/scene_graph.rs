//! Non-volatile scene-graph memory: a three-level hierarchy of floors,
//! areas, and objects, with navigability edges between areas, incremental
//! edits, prompt-text serialization, and a line-oriented persistence format.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point3;
use crate::Position;

/// Default radius (meters) within which an ingested object belongs to an
/// area.
pub const DEFAULT_CONTAINS_RADIUS: f64 = 1.5;

/// Synthesized parent floor for areas added without one.
pub const DEFAULT_FLOOR: &str = "floor_0";

const FILE_HEADER: &str = "# scene-graph v1";

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("name {0:?} is already used in the graph")]
    DuplicateName(String),
    #[error("unknown floor {0:?}")]
    UnknownFloor(String),
    #[error("unknown area {0:?}")]
    UnknownArea(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("self-loop edge on {0:?}")]
    SelfLoop(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Object node attributes: 3D position and an optional volume in m^3.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectAttributes {
    pub position: Position,
    pub volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub name: String,
    pub attributes: ObjectAttributes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AreaNode {
    pub name: String,
    pub position: Position,
    pub floor: String,
    pub objects: Vec<ObjectNode>,
}

/// Hierarchical topological graph of floors, areas, and objects. Edges are
/// undirected navigability links between areas.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneGraph {
    floors: Vec<String>,
    areas: Vec<AreaNode>,
    edges: Vec<(String, String)>,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn floors(&self) -> &[String] {
        &self.floors
    }

    pub fn areas(&self) -> &[AreaNode] {
        &self.areas
    }

    pub fn edges(&self) -> &[(String, String)] {
        &self.edges
    }

    pub fn area(&self, name: &str) -> Option<&AreaNode> {
        self.areas.iter().find(|a| a.name == name)
    }

    fn area_mut(&mut self, name: &str) -> Option<&mut AreaNode> {
        self.areas.iter_mut().find(|a| a.name == name)
    }

    fn name_in_use(&self, name: &str) -> bool {
        self.floors.iter().any(|f| f == name)
            || self.areas.iter().any(|a| a.name == name)
            || self
                .areas
                .iter()
                .any(|a| a.objects.iter().any(|o| o.name == name))
    }

    pub fn add_floor(&mut self, name: impl Into<String>) -> Result<(), GraphError> {
        let name = name.into();
        if self.name_in_use(&name) {
            return Err(GraphError::DuplicateName(name));
        }
        self.floors.push(name);
        Ok(())
    }

    /// Add an area. `floor: None` attaches it to a synthesized default
    /// floor, created on first use.
    pub fn add_area(
        &mut self,
        name: impl Into<String>,
        position: Position,
        floor: Option<&str>,
    ) -> Result<(), GraphError> {
        let name = name.into();
        if self.name_in_use(&name) {
            return Err(GraphError::DuplicateName(name));
        }
        let floor = match floor {
            Some(f) => {
                if !self.floors.iter().any(|existing| existing == f) {
                    return Err(GraphError::UnknownFloor(f.to_string()));
                }
                f.to_string()
            }
            None => {
                if !self.floors.iter().any(|f| f == DEFAULT_FLOOR) {
                    self.floors.push(DEFAULT_FLOOR.to_string());
                }
                DEFAULT_FLOOR.to_string()
            }
        };
        self.areas.push(AreaNode {
            name,
            position,
            floor,
            objects: Vec::new(),
        });
        Ok(())
    }

    pub fn add_object(
        &mut self,
        area: &str,
        name: impl Into<String>,
        attributes: ObjectAttributes,
    ) -> Result<(), GraphError> {
        let name = name.into();
        if self.name_in_use(&name) {
            return Err(GraphError::DuplicateName(name));
        }
        let area = self
            .area_mut(area)
            .ok_or_else(|| GraphError::UnknownArea(area.to_string()))?;
        area.objects.push(ObjectNode { name, attributes });
        Ok(())
    }

    /// Add an undirected edge between two areas. Repeated additions are
    /// no-ops; self-loops are rejected.
    pub fn add_edge(&mut self, a: &str, b: &str) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(a.to_string()));
        }
        for name in [a, b] {
            if self.area(name).is_none() {
                return Err(GraphError::UnknownArea(name.to_string()));
            }
        }
        if !self.has_edge(a, b) {
            self.edges.push((a.to_string(), b.to_string()));
        }
        Ok(())
    }

    fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Remove a floor, area, or object node by name. Removing an area also
    /// detaches its edges and drops its objects; removing a floor cascades
    /// to its areas.
    pub fn remove_node(&mut self, name: &str) -> Result<(), GraphError> {
        if let Some(pos) = self.floors.iter().position(|f| f == name) {
            self.floors.remove(pos);
            let doomed: Vec<String> = self
                .areas
                .iter()
                .filter(|a| a.floor == name)
                .map(|a| a.name.clone())
                .collect();
            for area in doomed {
                self.remove_area(&area);
            }
            return Ok(());
        }
        if self.area(name).is_some() {
            self.remove_area(name);
            return Ok(());
        }
        for area in &mut self.areas {
            if let Some(pos) = area.objects.iter().position(|o| o.name == name) {
                area.objects.remove(pos);
                return Ok(());
            }
        }
        Err(GraphError::UnknownNode(name.to_string()))
    }

    fn remove_area(&mut self, name: &str) {
        self.areas.retain(|a| a.name != name);
        self.edges.retain(|(a, b)| a != name && b != name);
    }

    fn adjacent(&self, name: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter_map(|(a, b)| {
                if a == name {
                    Some(b.as_str())
                } else if b == name {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect()
    }

    /// True iff a path of navigability edges connects the two areas.
    pub fn navigable(&self, a: &str, b: &str) -> Result<bool, GraphError> {
        for name in [a, b] {
            if self.area(name).is_none() {
                return Err(GraphError::UnknownArea(name.to_string()));
            }
        }
        if a == b {
            return Ok(true);
        }
        let mut seen: HashSet<&str> = HashSet::from([a]);
        let mut frontier = VecDeque::from([a]);
        while let Some(current) = frontier.pop_front() {
            for next in self.adjacent(current) {
                if next == b {
                    return Ok(true);
                }
                if seen.insert(next) {
                    frontier.push_back(next);
                }
            }
        }
        Ok(false)
    }

    /// Assign free-floating objects to the nearest area within `radius`
    /// meters. Returns the names that matched no area.
    pub fn ingest_objects(
        &mut self,
        objects: &[(String, Position, Option<f64>)],
        radius: f64,
    ) -> Result<Vec<String>, GraphError> {
        let mut unplaced = Vec::new();
        for (name, position, volume) in objects {
            let nearest = self
                .areas
                .iter()
                .map(|a| (a.name.clone(), a.position.distance(position)))
                .filter(|(_, d)| *d <= radius)
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"));
            match nearest {
                Some((area, _)) => self.add_object(
                    &area,
                    name.clone(),
                    ObjectAttributes {
                        position: *position,
                        volume: *volume,
                    },
                )?,
                None => unplaced.push(name.clone()),
            }
        }
        Ok(unplaced)
    }

    /// Serialize area nodes and the edge list into the prompt text format:
    /// one `{name: ..., type: Area, contains: [...], adjacent nodes: [...],
    /// position: [...]}` record per area (insertion order, two-decimal
    /// coordinates), then the edges as `{a <-> b, ...}` with the arrow
    /// separator.
    pub fn serialize_to_prompt(&self) -> String {
        let mut out = String::new();
        for area in &self.areas {
            let contains: Vec<&str> = area.objects.iter().map(|o| o.name.as_str()).collect();
            let adjacent = self.adjacent(&area.name);
            let _ = writeln!(
                out,
                "{{name: {}, type: Area, contains: [{}], adjacent nodes: [{}], position: [{:.2}, {:.2}, {:.2}]}}",
                area.name,
                contains.join(", "),
                adjacent.join(", "),
                area.position.x,
                area.position.y,
                area.position.z,
            );
        }
        if !self.edges.is_empty() {
            let rendered: Vec<String> = self
                .edges
                .iter()
                .map(|(a, b)| format!("{a} \u{2194} {b}"))
                .collect();
            let _ = writeln!(out, "{{{}}}", rendered.join(", "));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        std::fs::write(path, self.to_file_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::from_file_text(&std::fs::read_to_string(path)?)
    }

    fn to_file_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{FILE_HEADER}");
        for floor in &self.floors {
            let _ = writeln!(out, "floor\t{floor}");
        }
        for area in &self.areas {
            let _ = writeln!(
                out,
                "area\t{}\t{}\t{}\t{}\t{}",
                area.name, area.floor, area.position.x, area.position.y, area.position.z
            );
            for object in &area.objects {
                let volume = object
                    .attributes
                    .volume
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "-".to_string());
                let _ = writeln!(
                    out,
                    "object\t{}\t{}\t{}\t{}\t{}\t{}",
                    object.name,
                    area.name,
                    object.attributes.position.x,
                    object.attributes.position.y,
                    object.attributes.position.z,
                    volume
                );
            }
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "edge\t{a}\t{b}");
        }
        out
    }

    fn from_file_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == FILE_HEADER => {}
            Some((_, other)) => {
                return Err(GraphError::Parse {
                    line: 1,
                    message: format!("expected {FILE_HEADER:?} header, found {other:?}"),
                })
            }
            None => {
                return Err(GraphError::Parse {
                    line: 1,
                    message: "empty file".to_string(),
                })
            }
        }
        let mut graph = Self::new();
        for (index, line) in lines {
            let line_no = index + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| GraphError::Parse {
                line: line_no,
                message,
            };
            let coord = |s: &str, what: &str| -> Result<f64, GraphError> {
                s.parse::<f64>()
                    .map_err(|_| parse_err(format!("non-numeric {what}: {s:?}")))
            };
            match fields.as_slice() {
                ["floor", name] => graph
                    .add_floor(*name)
                    .map_err(|e| parse_err(e.to_string()))?,
                ["area", name, floor, x, y, z] => {
                    let position =
                        Point3::new(coord(x, "x")?, coord(y, "y")?, coord(z, "z")?);
                    graph
                        .add_area(*name, position, Some(floor))
                        .map_err(|e| parse_err(e.to_string()))?;
                }
                ["object", name, area, x, y, z, volume] => {
                    let position =
                        Point3::new(coord(x, "x")?, coord(y, "y")?, coord(z, "z")?);
                    let volume = if *volume == "-" {
                        None
                    } else {
                        Some(coord(volume, "volume")?)
                    };
                    graph
                        .add_object(area, *name, ObjectAttributes { position, volume })
                        .map_err(|e| parse_err(e.to_string()))?;
                }
                ["edge", a, b] => graph
                    .add_edge(a, b)
                    .map_err(|e| parse_err(e.to_string()))?,
                _ => {
                    return Err(parse_err(format!("unrecognized record: {line:?}")));
                }
            }
        }
        Ok(graph)
    }
}
