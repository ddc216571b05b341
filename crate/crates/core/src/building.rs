//! Declarative multi-floor building description.
//!
//! Units are centimeters with z pointing up. Floor 1 is the exit floor and
//! floors 2 to 4 hold the experiment corridors. Room labels follow the
//! `"<floor>.<NN>"` convention, e.g. `"4.02"`.

use crate::error::BuildingError;
use crate::geometry::{centroid, point_in_ring, ring_is_simple, Segment, Vec2, Vec3};
use crate::region::{floor_region, Region};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};

/// Floor that hosts the building exits.
pub const EXIT_FLOOR: FloorId = 1;

pub type FloorId = u8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    pub name: String,
    pub floors: Vec<Floor>,
    pub staircases: Vec<Staircase>,
    pub exits: Vec<ExitDef>,
    pub zones: Vec<Zone>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub id: FloorId,
    pub z_cm: f64,
    pub walkable: Vec<WalkablePolygon>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub rooms: Vec<RoomDef>,
    #[serde(default)]
    pub signs: Vec<SignDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkableKind {
    MainCorridor,
    CrossCorridor,
    Hall,
    Landing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkablePolygon {
    pub id: String,
    pub kind: WalkableKind,
    pub polygon: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Wall,
    Pillar,
    Furniture,
    Elevator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: String,
    pub kind: ObstacleKind,
    pub polygon: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Even,
    Uneven,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomDef {
    pub label: String,
    /// Filled from the enclosing floor on load.
    #[serde(default)]
    pub floor: FloorId,
    pub door_pos: Vec2,
    pub side: Side,
}

impl RoomDef {
    /// Numeric part after the dot, e.g. 64 for `"4.64"`.
    pub fn number(&self) -> Option<u32> {
        self.label.split_once('.').and_then(|(_, n)| n.parse().ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignKind {
    RoomNumber,
    ExitSign,
    EvacuationSign,
    FireDoor,
    FloorPlan,
}

impl SignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignKind::RoomNumber => "room_number",
            SignKind::ExitSign => "exit_sign",
            SignKind::EvacuationSign => "evacuation_sign",
            SignKind::FireDoor => "fire_door",
            SignKind::FloorPlan => "floor_plan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignDef {
    pub id: String,
    pub kind: SignKind,
    pub position: Vec2,
    pub facing: Vec2,
    pub target: String,
    #[serde(default = "default_sign_width")]
    pub width_cm: f64,
}

fn default_sign_width() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairFootprint {
    pub floor: FloorId,
    pub polygon: Vec<Vec2>,
}

/// A staircase spanning `lower_floor..=upper_floor`.
///
/// The ramp is an ascending 3D polyline. Segments with a change in z are
/// flights; flat segments are landing walks on an intermediate floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub label: String,
    pub lower_floor: FloorId,
    pub upper_floor: FloorId,
    #[serde(default = "default_stair_width")]
    pub width_cm: f64,
    #[serde(default)]
    pub footprints: Vec<StairFootprint>,
    pub ramp: Vec<Vec3>,
}

fn default_stair_width() -> f64 {
    150.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitDef {
    pub label: String,
    pub position: Vec2,
    #[serde(default)]
    pub is_main_entrance: bool,
    /// Zone whose interior counts as having left the building.
    pub zone: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZonePurpose {
    Trigger,
    CentralPoint,
    Spawn,
    Exit,
    WideIntersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub floor: FloorId,
    pub polygon: Vec<Vec2>,
    pub purpose: ZonePurpose,
}

impl Zone {
    pub fn contains(&self, p: Vec2) -> bool {
        point_in_ring(p, &self.polygon)
    }

    pub fn centroid(&self) -> Vec2 {
        centroid(&self.polygon)
    }
}

/// A location resolved from a label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedPose {
    pub floor: FloorId,
    /// Floor-level point (z is the floor elevation).
    pub point: Vec3,
}

impl PlacedPose {
    pub fn xy(&self) -> Vec2 {
        self.point.xy()
    }
}

/// One boundary edge of the walkable region.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSegment {
    pub surface_id: String,
    pub segment: Segment,
    /// Decals (doors and signs) located on this segment.
    pub decals: Vec<DecalRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecalRef {
    /// `room_door` or a sign kind name.
    pub kind: String,
    /// Room label for doors, sign target for signs.
    pub target: String,
    pub center: Vec2,
    pub half_width: f64,
}

impl DecalRef {
    pub fn id(&self) -> String {
        format!("{}:{}", self.kind, self.target)
    }
}

pub const DOOR_WIDTH_CM: f64 = 100.0;
const ON_BOUNDARY_TOL: f64 = 1.0;

/// Parse a building document and resolve cross references.
pub fn load_building(source: &str) -> Result<BuildingSpec, BuildingError> {
    let mut spec: BuildingSpec = serde_json::from_str(source).map_err(|e| BuildingError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if spec.floors.is_empty() {
        return Err(BuildingError::NoFloors);
    }
    let mut floor_ids = HashSet::new();
    for f in &spec.floors {
        if !floor_ids.insert(f.id) {
            return Err(BuildingError::DuplicateLabel(format!("floor {}", f.id)));
        }
    }
    for f in &mut spec.floors {
        for r in &mut f.rooms {
            if r.floor != 0 && r.floor != f.id {
                return Err(BuildingError::DanglingReference {
                    entity: format!("room {}", r.label),
                    reference: format!("floor {}", r.floor),
                });
            }
            r.floor = f.id;
        }
    }
    let mut labels = HashSet::new();
    for r in spec.floors.iter().flat_map(|f| f.rooms.iter()) {
        if !labels.insert(r.label.clone()) {
            return Err(BuildingError::DuplicateLabel(r.label.clone()));
        }
    }
    for s in &spec.staircases {
        for fl in [s.lower_floor, s.upper_floor]
            .into_iter()
            .chain(s.footprints.iter().map(|fp| fp.floor))
        {
            if !floor_ids.contains(&fl) {
                return Err(BuildingError::DanglingReference {
                    entity: format!("staircase {}", s.label),
                    reference: format!("floor {fl}"),
                });
            }
        }
    }
    let mut zone_ids = HashSet::new();
    for z in &spec.zones {
        if !floor_ids.contains(&z.floor) {
            return Err(BuildingError::DanglingReference {
                entity: format!("zone {}", z.id),
                reference: format!("floor {}", z.floor),
            });
        }
        if !zone_ids.insert(z.id.clone()) {
            return Err(BuildingError::DuplicateLabel(format!("zone {}", z.id)));
        }
    }
    let mut exit_labels = HashSet::new();
    for e in &spec.exits {
        if !exit_labels.insert(e.label.clone()) {
            return Err(BuildingError::DuplicateLabel(format!("exit {}", e.label)));
        }
        if !zone_ids.contains(&e.zone) {
            return Err(BuildingError::DanglingReference {
                entity: format!("exit {}", e.label),
                reference: format!("zone {}", e.zone),
            });
        }
    }
    let mut stair_labels = HashSet::new();
    for s in &spec.staircases {
        if !stair_labels.insert(s.label.clone()) {
            return Err(BuildingError::DuplicateLabel(format!("staircase {}", s.label)));
        }
    }
    Ok(spec)
}

/// The bundled reconstruction of the experiment building.
pub fn ceg_fixture_source() -> &'static str {
    include_str!("../fixtures/ceg_fixture.json")
}

pub fn ceg_fixture() -> BuildingSpec {
    load_building(ceg_fixture_source()).expect("bundled fixture must load")
}

/// List invariant violations; an empty list means the building is valid.
pub fn validate_building(spec: &BuildingSpec) -> Vec<String> {
    let mut v = Vec::new();
    if spec.floors.is_empty() {
        v.push("no floors".to_string());
    }
    let mut ids = HashSet::new();
    let mut elevations: Vec<f64> = Vec::new();
    for f in &spec.floors {
        if !ids.insert(f.id) {
            v.push(format!("duplicate floor id {}", f.id));
        }
        if elevations.iter().any(|z| (z - f.z_cm).abs() < 1e-9) {
            v.push(format!("floor {} shares elevation {}", f.id, f.z_cm));
        }
        elevations.push(f.z_cm);
        for w in &f.walkable {
            if !ring_is_simple(&w.polygon) {
                v.push(format!("walkable polygon {} is not simple", w.id));
            }
        }
        if let Some((lo, hi)) = bbox(f.walkable.iter().flat_map(|w| w.polygon.iter())) {
            for o in &f.obstacles {
                if o.polygon
                    .iter()
                    .any(|p| p.x < lo.x || p.y < lo.y || p.x > hi.x || p.y > hi.y)
                {
                    v.push(format!("obstacle {} outside floor {} bounding box", o.id, f.id));
                }
            }
        }
        for r in &f.rooms {
            if r.floor != f.id {
                v.push(format!("room {} floor mismatch", r.label));
            }
            if let Some(n) = r.number() {
                let expect = if n % 2 == 0 { Side::Even } else { Side::Uneven };
                if r.side != expect {
                    v.push(format!("room {} on wrong side", r.label));
                }
            }
            if !near_walkable_boundary(f, r.door_pos) {
                v.push(format!("room {} door not on walkable boundary", r.label));
            }
        }
        for s in &f.signs {
            if (s.facing.length() - 1.0).abs() > 1e-6 {
                v.push(format!("sign {} facing normal not unit length", s.id));
            }
        }
    }
    let mut labels = HashSet::new();
    for r in spec.floors.iter().flat_map(|f| f.rooms.iter()) {
        if !labels.insert(r.label.as_str()) {
            v.push(format!("duplicate room label {}", r.label));
        }
    }
    for s in &spec.staircases {
        let lo = spec.floor(s.lower_floor);
        let hi = spec.floor(s.upper_floor);
        match (lo, hi) {
            (Some(lo), Some(hi)) => {
                let first = s.ramp.first().map(|p| p.z);
                let last = s.ramp.last().map(|p| p.z);
                if s.ramp.len() < 2
                    || first.map_or(true, |z| (z - lo.z_cm).abs() > 1e-6)
                    || last.map_or(true, |z| (z - hi.z_cm).abs() > 1e-6)
                {
                    v.push(format!("staircase {} ramp does not span its floors", s.label));
                }
                if s.ramp.windows(2).any(|w| w[1].z < w[0].z) {
                    v.push(format!("staircase {} ramp not monotone", s.label));
                }
            }
            _ => v.push(format!("staircase {} references missing floor", s.label)),
        }
    }
    let mains = spec.exits.iter().filter(|e| e.is_main_entrance).count();
    if mains == 0 {
        v.push("no main entrance".to_string());
    } else if mains > 1 {
        v.push("multiple main entrances".to_string());
    }
    match spec.floor(EXIT_FLOOR) {
        Some(f) => {
            for e in &spec.exits {
                if !near_walkable_boundary(f, e.position) && !inside_walkable(f, e.position) {
                    v.push(format!("exit {} not on exit floor", e.label));
                }
            }
        }
        None if !spec.exits.is_empty() => v.push("exit floor missing".to_string()),
        None => {}
    }
    for e in &spec.exits {
        match spec.zones.iter().find(|z| z.id == e.zone) {
            Some(z) if z.floor != EXIT_FLOOR => {
                v.push(format!("exit {} zone not on exit floor", e.label))
            }
            None => v.push(format!("exit {} references missing zone {}", e.label, e.zone)),
            _ => {}
        }
    }
    for z in &spec.zones {
        if spec.floor(z.floor).is_none() {
            v.push(format!("zone {} references missing floor {}", z.id, z.floor));
        }
    }
    v
}

fn bbox<'a>(pts: impl Iterator<Item = &'a Vec2>) -> Option<(Vec2, Vec2)> {
    pts.fold(None, |acc, p| match acc {
        None => Some((*p, *p)),
        Some((lo, hi)) => Some((
            Vec2::new(lo.x.min(p.x), lo.y.min(p.y)),
            Vec2::new(hi.x.max(p.x), hi.y.max(p.y)),
        )),
    })
}

fn inside_walkable(f: &Floor, p: Vec2) -> bool {
    f.walkable.iter().any(|w| point_in_ring(p, &w.polygon))
}

fn near_walkable_boundary(f: &Floor, p: Vec2) -> bool {
    f.walkable.iter().any(|w| {
        let n = w.polygon.len();
        (0..n).any(|i| {
            Segment::new(w.polygon[i], w.polygon[(i + 1) % n]).distance_to(p) <= ON_BOUNDARY_TOL
        })
    })
}

impl BuildingSpec {
    pub fn floor(&self, id: FloorId) -> Option<&Floor> {
        self.floors.iter().find(|f| f.id == id)
    }

    pub fn floor_ids(&self) -> Vec<FloorId> {
        let mut ids: Vec<FloorId> = self.floors.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn room(&self, label: &str) -> Option<&RoomDef> {
        self.floors.iter().flat_map(|f| f.rooms.iter()).find(|r| r.label == label)
    }

    pub fn rooms(&self) -> impl Iterator<Item = &RoomDef> {
        self.floors.iter().flat_map(|f| f.rooms.iter())
    }

    pub fn exit(&self, label: &str) -> Option<&ExitDef> {
        self.exits.iter().find(|e| e.label == label)
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id == id)
    }

    pub fn zones_with(&self, purpose: ZonePurpose) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(move |z| z.purpose == purpose)
    }

    /// Which floor a feet-level elevation belongs to, if any is within `tol`.
    pub fn floor_at_elevation(&self, z: f64, tol: f64) -> Option<FloorId> {
        self.floors
            .iter()
            .find(|f| (f.z_cm - z).abs() <= tol)
            .map(|f| f.id)
    }

    /// Floor id for an eye-level z (the highest floor whose elevation is at
    /// least 100 cm below the eye).
    pub fn floor_below_eye(&self, eye_z: f64) -> Option<FloorId> {
        self.floors
            .iter()
            .filter(|f| f.z_cm <= eye_z - 100.0)
            .max_by(|a, b| a.z_cm.total_cmp(&b.z_cm))
            .map(|f| f.id)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn fixture_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("building serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Resolve a room (`"4.02"`), exit (`"Exit C"`), staircase (`"Stair A"`) or zone id.
    pub fn lookup_place(&self, label: &str) -> Result<PlacedPose, BuildingError> {
        let pose = |floor: FloorId, p: Vec2| -> Result<PlacedPose, BuildingError> {
            let f = self.floor(floor).ok_or(BuildingError::UnknownFloor(floor))?;
            Ok(PlacedPose { floor, point: Vec3::with_xy(p, f.z_cm) })
        };
        if let Some(r) = self.room(label) {
            return pose(r.floor, r.door_pos);
        }
        if let Some(l) = label.strip_prefix("Exit ") {
            if let Some(e) = self.exit(l) {
                return pose(EXIT_FLOOR, e.position);
            }
        }
        if let Some(l) = label.strip_prefix("Stair ") {
            if let Some(s) = self.staircases.iter().find(|s| s.label == l) {
                let p = s.ramp[0];
                return pose(s.lower_floor, p.xy());
            }
        }
        if let Some(z) = self.zone(label) {
            return pose(z.floor, z.centroid());
        }
        Err(BuildingError::UnknownLabel(label.to_string()))
    }

    /// Walkable region (walkable union minus obstacles) of a floor.
    pub fn region(&self, floor: FloorId) -> Result<Region, BuildingError> {
        let f = self.floor(floor).ok_or(BuildingError::UnknownFloor(floor))?;
        Ok(floor_region(f))
    }

    /// Boundary segments of the walkable region with attached decals.
    pub fn wall_segments(&self, floor: FloorId) -> Result<Vec<WallSegment>, BuildingError> {
        let f = self.floor(floor).ok_or(BuildingError::UnknownFloor(floor))?;
        let region = floor_region(f);
        let mut decals: Vec<DecalRef> = f
            .rooms
            .iter()
            .map(|r| DecalRef {
                kind: "room_door".to_string(),
                target: r.label.clone(),
                center: r.door_pos,
                half_width: DOOR_WIDTH_CM / 2.0,
            })
            .collect();
        decals.extend(f.signs.iter().map(|s| DecalRef {
            kind: s.kind.as_str().to_string(),
            target: s.target.clone(),
            center: s.position,
            half_width: s.width_cm / 2.0,
        }));
        let mut out = Vec::new();
        for seg in region.boundary_segments() {
            let idx = out.len();
            let attached = decals
                .iter()
                .filter(|d| seg.distance_to(d.center) <= ON_BOUNDARY_TOL)
                .cloned()
                .collect();
            out.push(WallSegment {
                surface_id: format!("f{}w{}", floor, idx),
                segment: seg,
                decals: attached,
            });
        }
        Ok(out)
    }

    /// Counts of walkable polygons by kind for one floor.
    pub fn walkable_counts(&self, floor: FloorId) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        if let Some(f) = self.floor(floor) {
            for w in &f.walkable {
                let key = serde_json::to_value(w.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                *m.entry(key).or_insert(0) += 1;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> String {
        r#"{
          "name": "tiny",
          "floors": [{"id": 1, "z_cm": 0,
            "walkable": [{"id": "c", "kind": "main_corridor",
              "polygon": [[0,0],[1000,0],[1000,200],[0,200]]}],
            "rooms": [{"label": "1.02", "door_pos": [500, 200], "side": "even"}]}],
          "staircases": [],
          "exits": [{"label": "C", "position": [500, 0], "is_main_entrance": true, "zone": "x"}],
          "zones": [{"id": "x", "floor": 1, "purpose": "exit",
            "polygon": [[450,0],[550,0],[550,50],[450,50]]}]
        }"#
        .to_string()
    }

    #[test]
    fn loads_tiny_document() {
        let spec = load_building(&tiny()).unwrap();
        assert_eq!(spec.floors.len(), 1);
        assert_eq!(spec.room("1.02").unwrap().floor, 1);
        assert!(validate_building(&spec).is_empty(), "{:?}", validate_building(&spec));
    }

    #[test]
    fn zero_floors_is_an_error() {
        let doc = r#"{"name":"x","floors":[],"staircases":[],"exits":[],"zones":[]}"#;
        assert!(matches!(load_building(doc), Err(BuildingError::NoFloors)));
    }

    #[test]
    fn parse_error_reports_position() {
        match load_building("{\n  \"name\": 3\n}") {
            Err(BuildingError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn staircase_to_missing_floor_is_dangling() {
        let doc = tiny().replace(
            "\"staircases\": []",
            r#""staircases": [{"label":"A","lower_floor":1,"upper_floor":9,"ramp":[[0,0,0],[0,0,400]]}]"#,
        );
        match load_building(&doc) {
            Err(BuildingError::DanglingReference { reference, .. }) => {
                assert_eq!(reference, "floor 9")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_rectangle_has_four_walls() {
        let spec = load_building(&tiny()).unwrap();
        let walls = spec.wall_segments(1).unwrap();
        assert_eq!(walls.len(), 4);
        let door_wall = walls
            .iter()
            .find(|w| w.decals.iter().any(|d| d.kind == "room_door"))
            .unwrap();
        assert!((door_wall.segment.a.y - 200.0).abs() < 1e-9);
    }

    #[test]
    fn pillar_adds_a_hole_loop() {
        let doc = tiny().replace(
            "\"rooms\"",
            r#""obstacles": [{"id":"p","kind":"pillar","polygon":[[400,80],[440,80],[440,120],[400,120]]}], "rooms""#,
        );
        let spec = load_building(&doc).unwrap();
        assert_eq!(spec.wall_segments(1).unwrap().len(), 8);
        assert!(matches!(spec.wall_segments(7), Err(BuildingError::UnknownFloor(7))));
    }

    #[test]
    fn unknown_label() {
        let spec = load_building(&tiny()).unwrap();
        assert!(matches!(spec.lookup_place("9.99"), Err(BuildingError::UnknownLabel(_))));
        assert_eq!(spec.lookup_place("Exit C").unwrap().floor, 1);
    }
}
