//! Floor plan, sensor layout and the geometric queries shared by the
//! simulator and the feature extractors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Rect};

type P = Point<f64>;

/// Detection radius of an infrared motion sensor.
pub const INFRARED_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Furniture {
    pub name: String,
    pub rect: Rect<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub width: f64,
    pub height: f64,
    pub furniture: Vec<Furniture>,
    /// Activity name or location name -> standing point.
    pub anchors: BTreeMap<String, P>,
    pub entrance: P,
}

impl FloorPlan {
    pub fn bounds(&self) -> Rect<f64> {
        Rect::new(0.0, 0.0, self.width, self.height)
    }

    pub fn anchor(&self, name: &str) -> Option<P> {
        self.anchors.get(name).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    InfraredMotion,
    Pressure,
    Door,
    Flow,
    Power,
}

impl SensorKind {
    /// Infrared, pressure and door sensors respond to the resident's body.
    pub fn is_motion(self) -> bool {
        matches!(self, SensorKind::InfraredMotion | SensorKind::Pressure | SensorKind::Door)
    }

    /// Flow and power meters.
    pub fn is_cost(self) -> bool {
        matches!(self, SensorKind::Flow | SensorKind::Power)
    }

    pub fn default_sample_rate(self) -> u32 {
        match self {
            SensorKind::Flow | SensorKind::Power => 1,
            _ => 10,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SensorKind::InfraredMotion => "infrared_motion",
            SensorKind::Pressure => "pressure",
            SensorKind::Door => "door",
            SensorKind::Flow => "flow",
            SensorKind::Power => "power",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SensorGeometry {
    Circle { radius: f64 },
    Rect { width: f64, height: f64 },
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub id: usize,
    pub kind: SensorKind,
    pub position: P,
    pub geometry: SensorGeometry,
    pub sample_rate_hz: u32,
    /// Anchor name of the appliance or faucet a cost sensor meters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appliance: Option<String>,
}

impl SensorSpec {
    pub fn infrared(id: usize, x: f64, y: f64) -> Self {
        Self {
            id,
            kind: SensorKind::InfraredMotion,
            position: P::new(x, y),
            geometry: SensorGeometry::Circle { radius: INFRARED_RADIUS },
            sample_rate_hz: 10,
            appliance: None,
        }
    }

    pub fn pressure(id: usize, x: f64, y: f64, width: f64, height: f64) -> Self {
        Self {
            id,
            kind: SensorKind::Pressure,
            position: P::new(x, y),
            geometry: SensorGeometry::Rect { width, height },
            sample_rate_hz: 10,
            appliance: None,
        }
    }

    pub fn attached(id: usize, kind: SensorKind, x: f64, y: f64, appliance: Option<&str>) -> Self {
        Self {
            id,
            kind,
            position: P::new(x, y),
            geometry: SensorGeometry::Point,
            sample_rate_hz: kind.default_sample_rate(),
            appliance: appliance.map(str::to_owned),
        }
    }

    /// Footprint of a pressure mat.
    pub fn mat(&self) -> Option<Rect<f64>> {
        match self.geometry {
            SensorGeometry::Rect { width, height } => Some(Rect::centered(self.position, width, height)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub sensors: Vec<SensorSpec>,
    pub bed_sensor_ids: Vec<usize>,
    pub door_sensor_id: usize,
    pub cost_sensor_ids: Vec<usize>,
}

impl SensorLayout {
    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn get(&self, id: usize) -> Result<&SensorSpec> {
        self.sensors.get(id).filter(|s| s.id == id).ok_or(Error::UnknownSensor(id))
    }

    pub fn kind(&self, id: usize) -> Option<SensorKind> {
        self.sensors.get(id).map(|s| s.kind)
    }

    /// Ids of infrared, pressure and door sensors in ascending order.
    pub fn motion_ids(&self) -> Vec<usize> {
        self.sensors.iter().filter(|s| s.kind.is_motion()).map(|s| s.id).collect()
    }

    pub fn is_bed_sensor(&self, id: usize) -> bool {
        self.bed_sensor_ids.contains(&id)
    }

    /// Cost sensor metering the appliance at `anchor`, if any.
    pub fn cost_sensor_for(&self, anchor: &str) -> Option<usize> {
        self.cost_sensor_ids
            .iter()
            .copied()
            .find(|&id| self.sensors[id].appliance.as_deref() == Some(anchor))
    }

    /// Full pairwise distance matrix, row-major.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        self.sensors
            .iter()
            .map(|a| self.sensors.iter().map(|b| a.position.distance(b.position)).collect())
            .collect()
    }
}

/// Euclidean distance between two sensors.
pub fn sensor_distance(layout: &SensorLayout, a: usize, b: usize) -> Result<f64> {
    let pa = layout.get(a)?.position;
    let pb = layout.get(b)?.position;
    Ok(pa.distance(pb))
}

/// A single broken invariant, naming the entity at fault.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

/// Checks every plan/layout invariant; an empty result means valid.
pub fn validate(plan: &FloorPlan, layout: &SensorLayout) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |entity: String, message: &str| out.push(Violation { entity, message: message.to_owned() });

    if !(plan.width > 0.0 && plan.height > 0.0) {
        bad("floor plan".into(), "width and height must be positive");
    }
    let bounds = plan.bounds();
    for f in &plan.furniture {
        if !f.rect.within(&bounds) {
            bad(format!("furniture '{}'", f.name), "rectangle lies outside the floor plan");
        }
    }
    for (name, p) in &plan.anchors {
        if !bounds.contains(*p) {
            bad(format!("anchor '{name}'"), "point lies outside the floor plan");
        }
    }
    if !bounds.contains(plan.entrance) {
        bad("entrance".into(), "point lies outside the floor plan");
    }

    let mut seen = BTreeSet::new();
    for (idx, s) in layout.sensors.iter().enumerate() {
        let who = format!("sensor #{}", s.id);
        if !seen.insert(s.id) {
            bad(who.clone(), "duplicate sensor id");
        } else if s.id != idx {
            bad(who.clone(), "ids must be dense 0..S-1 in list order");
        }
        if !bounds.contains(s.position) {
            bad(who.clone(), "position lies outside the floor plan");
        }
        let shape_ok = match (s.kind, s.geometry) {
            (SensorKind::InfraredMotion, SensorGeometry::Circle { radius }) => radius > 0.0,
            (SensorKind::Pressure, SensorGeometry::Rect { width, height }) => width > 0.0 && height > 0.0,
            (SensorKind::Door | SensorKind::Flow | SensorKind::Power, SensorGeometry::Point) => true,
            _ => false,
        };
        if !shape_ok {
            bad(who.clone(), "geometry does not match sensor kind");
        }
        if s.sample_rate_hz == 0 {
            bad(who.clone(), "sample rate must be positive");
        }
        if s.kind.is_cost() {
            match &s.appliance {
                Some(a) if plan.anchors.contains_key(a) => {}
                Some(a) => bad(who.clone(), &format!("bound to unknown appliance anchor '{a}'")),
                None => bad(who.clone(), "cost sensor is not bound to an appliance anchor"),
            }
        }
    }
    if layout.sensors.len() > crate::pipeline::MAX_SENSORS {
        bad("layout".into(), "too many sensors (limit 128)");
    }

    if layout.bed_sensor_ids.is_empty() {
        bad("layout".into(), "bed_sensor_ids is empty");
    }
    for &id in &layout.bed_sensor_ids {
        if !layout.kind(id).is_some_and(SensorKind::is_motion) {
            bad(format!("bed sensor #{id}"), "must reference a motion sensor");
        }
    }
    let doors: Vec<usize> = layout.sensors.iter().filter(|s| s.kind == SensorKind::Door).map(|s| s.id).collect();
    if doors.len() != 1 {
        bad("layout".into(), "exactly one door sensor is required");
    } else if doors[0] != layout.door_sensor_id {
        bad(format!("door sensor #{}", layout.door_sensor_id), "door_sensor_id does not name the door sensor");
    }
    let costs: Vec<usize> = layout.sensors.iter().filter(|s| s.kind.is_cost()).map(|s| s.id).collect();
    let mut declared = layout.cost_sensor_ids.clone();
    declared.sort_unstable();
    if declared != costs {
        bad("layout".into(), "cost_sensor_ids must list exactly the flow and power sensors");
    }
    out
}

/// The 5 m x 12 m studio with 41 sensors used throughout the experiments.
pub fn default_plan() -> (FloorPlan, SensorLayout) {
    let furniture = [
        ("bed", Rect::new(0.0, 9.8, 1.0, 12.0)),
        ("wardrobe", Rect::new(4.3, 10.5, 5.0, 12.0)),
        ("cupboard", Rect::new(4.4, 9.0, 5.0, 9.6)),
        ("sofa", Rect::new(4.3, 7.0, 5.0, 8.5)),
        ("refrigerator", Rect::new(0.0, 5.6, 0.6, 6.4)),
        ("kitchen stove", Rect::new(0.0, 3.5, 0.6, 5.3)),
        ("trash box", Rect::new(0.0, 2.9, 0.4, 3.3)),
        ("dining table", Rect::new(2.5, 4.4, 3.7, 5.6)),
        ("chairs", Rect::new(3.8, 4.7, 4.2, 5.3)),
        ("washing machine", Rect::new(4.2, 2.0, 5.0, 2.8)),
        ("water closet", Rect::new(4.0, 0.0, 5.0, 1.2)),
    ]
    .into_iter()
    .map(|(name, rect)| Furniture { name: name.to_owned(), rect })
    .collect();

    let anchors = [
        ("bed", (1.3, 11.0)),
        ("wardrobe", (3.9, 11.2)),
        ("phone", (4.0, 9.3)),
        ("sofa", (3.9, 7.75)),
        ("refrigerator", (0.9, 6.0)),
        ("kitchen_sink", (0.9, 4.9)),
        ("stove", (0.9, 3.9)),
        ("trash", (0.8, 3.1)),
        ("dining", (3.1, 4.0)),
        ("washing_machine", (3.8, 2.4)),
        ("toilet", (4.4, 1.5)),
        ("washbasin", (3.3, 0.8)),
        ("entrance", (2.0, 0.5)),
    ]
    .into_iter()
    .map(|(n, (x, y))| (n.to_owned(), P::new(x, y)))
    .collect();

    let plan = FloorPlan { width: 5.0, height: 12.0, furniture, anchors, entrance: P::new(2.0, 0.0) };

    // 8 x 4 grid along the flow lines; id 23 is reserved for the bedside sensor.
    let mut sensors = Vec::with_capacity(41);
    let grid: Vec<(f64, f64)> = [0.6, 1.8, 3.0, 4.2, 5.4, 6.6, 7.8, 9.0]
        .iter()
        .flat_map(|&y| [1.0, 2.0, 3.0, 4.0].into_iter().map(move |x| (x, y)))
        .collect();
    let mut g = grid.into_iter();
    for id in 0..34 {
        let (x, y) = match id {
            23 => (1.7, 10.5),
            33 => (3.5, 11.0),
            _ => g.next().expect("grid has 32 cells"),
        };
        sensors.push(SensorSpec::infrared(id, x, y));
    }
    sensors.push(SensorSpec::pressure(34, 2.4, 11.0, 1.0, 1.0));
    sensors.push(SensorSpec::pressure(35, 1.3, 10.025, 1.0, 0.75));
    sensors.push(SensorSpec::attached(36, SensorKind::Flow, 0.3, 4.9, Some("kitchen_sink")));
    sensors.push(SensorSpec::attached(37, SensorKind::Flow, 3.3, 0.2, Some("washbasin")));
    sensors.push(SensorSpec::attached(38, SensorKind::Power, 2.8, 7.75, Some("sofa")));
    sensors.push(SensorSpec::attached(39, SensorKind::Power, 0.3, 3.9, Some("stove")));
    sensors.push(SensorSpec::attached(40, SensorKind::Door, 2.0, 0.05, None));

    let layout = SensorLayout { sensors, bed_sensor_ids: vec![23, 34, 35], door_sensor_id: 40, cost_sensor_ids: vec![36, 37, 38, 39] };
    (plan, layout)
}
