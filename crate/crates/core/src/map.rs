//! Static road structure: roads with constant-width lanes, junctions, signs and
//! signals. Loads from a native JSON schema or an OpenDRIVE 1.7 subset and
//! writes the OpenDRIVE subset back.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, point_on_polyline, polyline_length, project_onto_polyline, Point};
use crate::xml::{self, Element, XmlError};

/// Points farther than this from every road surface get no lane.
pub const OFF_ROAD_DISTANCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadwayType {
    Freeway,
    FreewayRamp,
    Arterial,
    Local,
    Parking,
}

impl RoadwayType {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadwayType::Freeway => "freeway",
            RoadwayType::FreewayRamp => "freeway_ramp",
            RoadwayType::Arterial => "arterial",
            RoadwayType::Local => "local",
            RoadwayType::Parking => "parking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "freeway" => RoadwayType::Freeway,
            "freeway_ramp" => RoadwayType::FreewayRamp,
            "arterial" => RoadwayType::Arterial,
            "local" => RoadwayType::Local,
            "parking" => RoadwayType::Parking,
            _ => return None,
        })
    }

    fn opendrive_type(self) -> &'static str {
        match self {
            RoadwayType::Freeway | RoadwayType::FreewayRamp => "motorway",
            RoadwayType::Arterial => "townArterial",
            RoadwayType::Local => "townLocal",
            RoadwayType::Parking => "lowSpeed",
        }
    }

    fn from_opendrive_type(s: &str) -> Self {
        match s {
            "motorway" => RoadwayType::Freeway,
            "townArterial" | "townExpressway" | "rural" => RoadwayType::Arterial,
            "lowSpeed" => RoadwayType::Parking,
            _ => RoadwayType::Local,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    /// Negative right of the reference line, positive left; never zero.
    pub lane_id: i32,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub road_id: String,
    pub centerline: Vec<Point>,
    pub lanes: Vec<Lane>,
    pub roadway_type: RoadwayType,
}

impl Road {
    pub fn length(&self) -> f64 {
        polyline_length(&self.centerline)
    }

    /// Signed lateral interval `[lo, hi]` occupied by a lane.
    pub fn lane_corridor(&self, lane_id: i32) -> Option<(f64, f64)> {
        let mut inner = 0.0;
        let side = lane_id.signum();
        let mut ids: Vec<&Lane> = self.lanes.iter().filter(|l| l.lane_id.signum() == side).collect();
        ids.sort_by_key(|l| l.lane_id.abs());
        for l in ids {
            let outer = inner + l.width;
            if l.lane_id == lane_id {
                return Some(if side > 0 { (inner, outer) } else { (-outer, -inner) });
            }
            inner = outer;
        }
        None
    }

    pub fn lane_center_offset(&self, lane_id: i32) -> Option<f64> {
        self.lane_corridor(lane_id).map(|(a, b)| 0.5 * (a + b))
    }

    /// The lane containing a signed offset under the half-open `[inner, outer)`
    /// convention, or the lane with the nearest corridor, with that distance.
    fn lane_for_offset(&self, offset: f64) -> Option<(i32, f64)> {
        let mut best: Option<((f64, u8, i32), i32)> = None;
        for l in &self.lanes {
            let (lo, hi) = self.lane_corridor(l.lane_id)?;
            let contains = if l.lane_id > 0 {
                // the reference line itself belongs to the right side
                (offset > lo || (offset == lo && lo > 0.0)) && offset < hi
            } else {
                offset > lo && offset <= hi
            };
            let dist = if contains {
                0.0
            } else {
                (lo - offset).max(offset - hi).max(0.0)
            };
            let key = (dist, u8::from(!contains), l.lane_id.abs());
            if best.map_or(true, |(k, _)| key < k) {
                best = Some((key, l.lane_id));
            }
        }
        best.map(|((d, _, _), id)| (id, d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub junction_id: String,
    pub center: Point,
    pub radius: f64,
    /// Number of approaches (3 for a T junction).
    pub arity: u32,
    /// Incident road ids.
    pub roads: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignKind {
    Stop,
    Yield,
    SpeedLimit,
    Other,
}

impl SignKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignKind::Stop => "stop",
            SignKind::Yield => "yield",
            SignKind::SpeedLimit => "speed_limit",
            SignKind::Other => "other",
        }
    }

    fn opendrive_code(self) -> &'static str {
        match self {
            SignKind::Stop => "206",
            SignKind::Yield => "205",
            SignKind::SpeedLimit => "274",
            SignKind::Other => "-1",
        }
    }

    fn from_opendrive_code(s: &str) -> Self {
        match s {
            "206" => SignKind::Stop,
            "205" => SignKind::Yield,
            "274" => SignKind::SpeedLimit,
            _ => SignKind::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignFeature {
    pub sign_id: String,
    pub kind: SignKind,
    /// Speed limit in m/s for `speed_limit` signs.
    #[serde(default)]
    pub value: Option<f64>,
    pub position: Point,
    pub applies_to: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalState {
    Red,
    Amber,
    Green,
}

impl SignalState {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalState::Red => "red",
            SignalState::Amber => "amber",
            SignalState::Green => "green",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "red" => SignalState::Red,
            "amber" | "yellow" => SignalState::Amber,
            "green" => SignalState::Green,
            _ => return None,
        })
    }
}

/// A signal state held over `[t_start, t_end)` in recording time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPhase {
    pub state: SignalState,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalFeature {
    pub signal_id: String,
    pub position: Point,
    pub applies_to: String,
    pub phases: Vec<SignalPhase>,
}

impl SignalFeature {
    pub fn state_at(&self, t: f64) -> Option<SignalState> {
        self.phases
            .iter()
            .find(|p| p.t_start <= t && t < p.t_end)
            .map(|p| p.state)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapModel {
    pub roads: Vec<Road>,
    #[serde(default)]
    pub junctions: Vec<Junction>,
    #[serde(default)]
    pub signage: Vec<SignFeature>,
    #[serde(default)]
    pub signals: Vec<SignalFeature>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneAssignment {
    pub road_id: String,
    pub lane_id: i32,
    pub station: f64,
    pub offset: f64,
    /// Direction of the road reference line at the foot point.
    pub road_heading: f64,
    /// Distance from the point to the road surface (0 when on it).
    pub distance: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("map json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("dangling reference: {0}")]
    Dangling(String),
    #[error("map has no roads")]
    NoRoads,
}

impl MapModel {
    /// Validates and canonicalizes (lanes sorted by id).
    pub fn new(
        mut roads: Vec<Road>,
        junctions: Vec<Junction>,
        signage: Vec<SignFeature>,
        signals: Vec<SignalFeature>,
    ) -> Result<Self, MapError> {
        for r in &mut roads {
            r.lanes.sort_by_key(|l| l.lane_id);
        }
        let m = MapModel {
            roads,
            junctions,
            signage,
            signals,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        let schema = |msg: String| Err(MapError::Schema(msg));
        let mut ids = HashSet::new();
        for r in &self.roads {
            if !ids.insert(r.road_id.as_str()) {
                return schema(format!("duplicate road id `{}`", r.road_id));
            }
            if r.centerline.len() < 2 {
                return schema(format!("road `{}` centerline needs >= 2 points", r.road_id));
            }
            if r.centerline.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                return schema(format!("road `{}` has non-finite points", r.road_id));
            }
            if r.length() <= 0.0 {
                return schema(format!("road `{}` has zero length", r.road_id));
            }
            if r.lanes.is_empty() {
                return schema(format!("road `{}` has no lanes", r.road_id));
            }
            for l in &r.lanes {
                if l.lane_id == 0 {
                    return schema(format!("road `{}`: lane id 0 is the reference line", r.road_id));
                }
                if !(l.width > 0.0 && l.width.is_finite()) {
                    return schema(format!("road `{}` lane {}: width must be > 0", r.road_id, l.lane_id));
                }
            }
            for side in [1, -1] {
                let mut abs: Vec<i32> = r
                    .lanes
                    .iter()
                    .filter(|l| l.lane_id.signum() == side)
                    .map(|l| l.lane_id.abs())
                    .collect();
                abs.sort_unstable();
                if abs.iter().enumerate().any(|(i, &a)| a != i as i32 + 1) {
                    return schema(format!("road `{}`: lane ids must be contiguous from ±1", r.road_id));
                }
            }
        }
        let mut jids = HashSet::new();
        for j in &self.junctions {
            if !jids.insert(j.junction_id.as_str()) {
                return schema(format!("duplicate junction id `{}`", j.junction_id));
            }
            if !(j.radius > 0.0) {
                return schema(format!("junction `{}`: radius must be > 0", j.junction_id));
            }
            if j.arity < 3 {
                return schema(format!("junction `{}`: arity must be >= 3", j.junction_id));
            }
            if j.roads.len() < 2 {
                return schema(format!("junction `{}` must reference >= 2 roads", j.junction_id));
            }
            for r in &j.roads {
                if !ids.contains(r.as_str()) {
                    return Err(MapError::Dangling(format!(
                        "junction `{}` references unknown road `{r}`",
                        j.junction_id
                    )));
                }
            }
        }
        for s in &self.signage {
            if !ids.contains(s.applies_to.as_str()) {
                return Err(MapError::Dangling(format!(
                    "sign `{}` applies to unknown road `{}`",
                    s.sign_id, s.applies_to
                )));
            }
        }
        for s in &self.signals {
            if !ids.contains(s.applies_to.as_str()) {
                return Err(MapError::Dangling(format!(
                    "signal `{}` applies to unknown road `{}`",
                    s.signal_id, s.applies_to
                )));
            }
            for (i, p) in s.phases.iter().enumerate() {
                if !(p.t_start < p.t_end) {
                    return schema(format!("signal `{}`: empty phase", s.signal_id));
                }
                if i > 0 && p.t_start < s.phases[i - 1].t_end {
                    return schema(format!(
                        "signal `{}`: phases must be time-ordered and non-overlapping",
                        s.signal_id
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn road(&self, id: &str) -> Option<&Road> {
        self.roads.iter().find(|r| r.road_id == id)
    }

    pub fn assign_lane(&self, x: f64, y: f64) -> Option<LaneAssignment> {
        self.assign_lane_hint(x, y, None)
    }

    /// Lane assignment; when roads tie on distance (overlapping junction
    /// areas) the one best aligned with `heading` wins.
    pub fn assign_lane_hint(&self, x: f64, y: f64, heading: Option<f64>) -> Option<LaneAssignment> {
        let p = Point::new(x, y);
        let mut best: Option<(LaneAssignment, f64)> = None;
        for r in &self.roads {
            let Some(proj) = project_onto_polyline(&r.centerline, p) else {
                continue;
            };
            let Some((lane_id, lateral)) = r.lane_for_offset(proj.offset) else {
                continue;
            };
            let distance = lateral.hypot(proj.overshoot);
            if distance > OFF_ROAD_DISTANCE {
                continue;
            }
            let misalign = heading.map_or(0.0, |h| {
                let d = normalize_angle(h - proj.heading).abs();
                d.min(std::f64::consts::PI - d)
            });
            let better = match &best {
                None => true,
                Some((b, m)) => {
                    distance < b.distance - 1e-9
                        || ((distance - b.distance).abs() <= 1e-9 && misalign < *m - 1e-9)
                }
            };
            if better {
                best = Some((
                    LaneAssignment {
                        road_id: r.road_id.clone(),
                        lane_id,
                        station: proj.station,
                        offset: proj.offset,
                        road_heading: proj.heading,
                        distance,
                    },
                    misalign,
                ));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Nearest junction center and the Euclidean distance to it.
    pub fn junction_distance(&self, x: f64, y: f64) -> Option<(&Junction, f64)> {
        let p = Point::new(x, y);
        self.junctions
            .iter()
            .map(|j| (j, j.center.dist(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let m: MapModel = serde_json::from_str(text)?;
        MapModel::new(m.roads, m.junctions, m.signage, m.signals)
    }

    /// Field-wise equality with a tolerance on coordinates (OpenDRIVE stores
    /// geometry as start point + heading + length, which is not bit-exact).
    pub fn approx_eq(&self, other: &MapModel, tol: f64) -> bool {
        let pt = |a: &Point, b: &Point| (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol;
        let f = |a: f64, b: f64| (a - b).abs() <= tol;
        self.roads.len() == other.roads.len()
            && self.roads.iter().zip(&other.roads).all(|(a, b)| {
                a.road_id == b.road_id
                    && a.roadway_type == b.roadway_type
                    && a.lanes.len() == b.lanes.len()
                    && a.lanes.iter().zip(&b.lanes).all(|(x, y)| x.lane_id == y.lane_id && f(x.width, y.width))
                    && a.centerline.len() == b.centerline.len()
                    && a.centerline.iter().zip(&b.centerline).all(|(x, y)| pt(x, y))
            })
            && self.junctions.len() == other.junctions.len()
            && self.junctions.iter().zip(&other.junctions).all(|(a, b)| {
                a.junction_id == b.junction_id
                    && pt(&a.center, &b.center)
                    && f(a.radius, b.radius)
                    && a.arity == b.arity
                    && a.roads == b.roads
            })
            && self.signage.len() == other.signage.len()
            && self.signage.iter().zip(&other.signage).all(|(a, b)| {
                a.sign_id == b.sign_id
                    && a.kind == b.kind
                    && a.applies_to == b.applies_to
                    && pt(&a.position, &b.position)
                    && match (a.value, b.value) {
                        (None, None) => true,
                        (Some(x), Some(y)) => f(x, y),
                        _ => false,
                    }
            })
            && self.signals.len() == other.signals.len()
            && self.signals.iter().zip(&other.signals).all(|(a, b)| {
                a.signal_id == b.signal_id
                    && a.applies_to == b.applies_to
                    && pt(&a.position, &b.position)
                    && a.phases == b.phases
            })
    }
}

/// Loads a map from native JSON or OpenDRIVE (detected by content).
pub fn load_map(path: &Path) -> Result<MapModel, MapError> {
    let text = fs::read_to_string(path).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_map(&text)
}

pub fn parse_map(text: &str) -> Result<MapModel, MapError> {
    if text.trim_start().starts_with('<') {
        read_opendrive(text)
    } else {
        MapModel::from_json(text)
    }
}

const USER_ROADWAY: &str = "safr:roadwayType";
const USER_CENTER: &str = "safr:center";
const USER_RADIUS: &str = "safr:radius";
const USER_ARITY: &str = "safr:arity";
const USER_PHASES: &str = "safr:phases";

fn user_data(code: &str, value: impl ToString) -> Element {
    Element::new("userData").attr("code", code).attr("value", value)
}

fn find_user<'a>(e: &'a Element, code: &str) -> Option<&'a str> {
    e.all("userData")
        .find(|u| u.get("code") == Some(code))
        .and_then(|u| u.get("value"))
}

fn lane_element(l: &Lane) -> Element {
    Element::new("lane")
        .attr("id", l.lane_id)
        .attr("type", "driving")
        .attr("level", "false")
        .child(
            Element::new("width")
                .attr("sOffset", 0)
                .attr("a", l.width)
                .attr("b", 0)
                .attr("c", 0)
                .attr("d", 0),
        )
}

pub fn opendrive_document(map: &MapModel) -> Result<Element, MapError> {
    if map.roads.is_empty() {
        return Err(MapError::NoRoads);
    }
    map.validate()?;
    let (mut west, mut south, mut east, mut north) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in map.roads.iter().flat_map(|r| &r.centerline) {
        west = west.min(p.x);
        east = east.max(p.x);
        south = south.min(p.y);
        north = north.max(p.y);
    }
    let mut root = Element::new("OpenDRIVE").child(
        Element::new("header")
            .attr("revMajor", 1)
            .attr("revMinor", 7)
            .attr("name", "")
            .attr("version", "1.00")
            .attr("north", north)
            .attr("south", south)
            .attr("east", east)
            .attr("west", west),
    );
    for r in &map.roads {
        let mut plan = Element::new("planView");
        let mut s = 0.0;
        for w in r.centerline.windows(2) {
            let len = w[0].dist(w[1]);
            if len == 0.0 {
                continue;
            }
            let hdg = (w[1].y - w[0].y).atan2(w[1].x - w[0].x);
            plan = plan.child(
                Element::new("geometry")
                    .attr("s", s)
                    .attr("x", w[0].x)
                    .attr("y", w[0].y)
                    .attr("hdg", hdg)
                    .attr("length", len)
                    .child(Element::new("line")),
            );
            s += len;
        }
        let mut left: Vec<&Lane> = r.lanes.iter().filter(|l| l.lane_id > 0).collect();
        left.sort_by_key(|l| -l.lane_id);
        let mut right: Vec<&Lane> = r.lanes.iter().filter(|l| l.lane_id < 0).collect();
        right.sort_by_key(|l| -l.lane_id);
        let mut section = Element::new("laneSection").attr("s", 0);
        if !left.is_empty() {
            section = section.child(Element::new("left").children_from(left.into_iter().map(lane_element)));
        }
        section = section.child(
            Element::new("center").child(
                Element::new("lane")
                    .attr("id", 0)
                    .attr("type", "none")
                    .attr("level", "false"),
            ),
        );
        if !right.is_empty() {
            section = section.child(Element::new("right").children_from(right.into_iter().map(lane_element)));
        }
        let mut signals = Element::new("signals");
        for sign in map.signage.iter().filter(|x| x.applies_to == r.road_id) {
            let proj = project_onto_polyline(&r.centerline, sign.position).expect("validated road");
            let mut el = Element::new("signal")
                .attr("s", proj.station)
                .attr("t", proj.offset)
                .attr("id", &sign.sign_id)
                .attr("name", sign.kind.as_str())
                .attr("dynamic", "no")
                .attr("orientation", "+")
                .attr("zOffset", 0)
                .attr("country", "DE")
                .attr("type", sign.kind.opendrive_code())
                .attr("subtype", "-1");
            if let Some(v) = sign.value {
                el = el.attr("value", v).attr("unit", "m/s");
            }
            signals = signals.child(el);
        }
        for sig in map.signals.iter().filter(|x| x.applies_to == r.road_id) {
            let proj = project_onto_polyline(&r.centerline, sig.position).expect("validated road");
            let phases: Vec<String> = sig
                .phases
                .iter()
                .map(|p| format!("{}:{}:{}", p.state.as_str(), p.t_start, p.t_end))
                .collect();
            signals = signals.child(
                Element::new("signal")
                    .attr("s", proj.station)
                    .attr("t", proj.offset)
                    .attr("id", &sig.signal_id)
                    .attr("name", "traffic_light")
                    .attr("dynamic", "yes")
                    .attr("orientation", "+")
                    .attr("zOffset", 0)
                    .attr("country", "DE")
                    .attr("type", "1000001")
                    .attr("subtype", "-1")
                    .child(user_data(USER_PHASES, phases.join(";"))),
            );
        }
        let mut road = Element::new("road")
            .attr("name", &r.road_id)
            .attr("length", r.length())
            .attr("id", &r.road_id)
            .attr("junction", "-1")
            .child(
                Element::new("type")
                    .attr("s", 0)
                    .attr("type", r.roadway_type.opendrive_type()),
            )
            .child(plan)
            .child(Element::new("lanes").child(section));
        if !signals.children.is_empty() {
            road = road.child(signals);
        }
        road = road.child(user_data(USER_ROADWAY, r.roadway_type.as_str()));
        root = root.child(road);
    }
    for j in &map.junctions {
        let n = j.roads.len();
        let mut el = Element::new("junction").attr("id", &j.junction_id).attr("name", &j.junction_id);
        for (i, r) in j.roads.iter().enumerate() {
            el = el.child(
                Element::new("connection")
                    .attr("id", i)
                    .attr("incomingRoad", r)
                    .attr("connectingRoad", &j.roads[(i + 1) % n])
                    .attr("contactPoint", "start"),
            );
        }
        el = el
            .child(user_data(USER_CENTER, format!("{},{}", j.center.x, j.center.y)))
            .child(user_data(USER_RADIUS, j.radius))
            .child(user_data(USER_ARITY, j.arity));
        root = root.child(el);
    }
    Ok(root)
}

pub fn write_opendrive(map: &MapModel, path: &Path) -> Result<(), MapError> {
    let doc = opendrive_document(map)?.to_document();
    fs::write(path, doc).map_err(|source| MapError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn bad(element: &str, attr: &str, value: &str) -> MapError {
    MapError::Xml(XmlError::BadAttr {
        element: element.into(),
        attr: attr.into(),
        value: value.into(),
    })
}

/// Reads the supported OpenDRIVE subset: line and arc geometries, constant
/// width lanes from the first lane section, junction connectivity, signals.
pub fn read_opendrive(text: &str) -> Result<MapModel, MapError> {
    let root = xml::parse(text)?;
    if root.name != "OpenDRIVE" {
        return Err(MapError::Schema(format!("root element is <{}>, expected <OpenDRIVE>", root.name)));
    }
    let mut roads = Vec::new();
    let mut signage = Vec::new();
    let mut signals = Vec::new();
    for r in root.all("road") {
        let road_id = r.req("id")?.to_string();
        let mut centerline: Vec<Point> = Vec::new();
        let plan = r.req_child("planView")?;
        for g in plan.all("geometry") {
            let start = Point::new(g.req_f64("x")?, g.req_f64("y")?);
            let hdg = g.req_f64("hdg")?;
            let len = g.req_f64("length")?;
            let shape = g
                .children
                .first()
                .ok_or_else(|| MapError::Schema(format!("road `{road_id}`: geometry without shape")))?;
            if centerline.last().map_or(true, |p| p.dist(start) > 1e-9) {
                centerline.push(start);
            }
            match shape.name.as_str() {
                "line" => centerline.push(start.add(Point::new(hdg.cos(), hdg.sin()).scale(len))),
                "arc" => {
                    let k = shape.req_f64("curvature")?;
                    let steps = (len.ceil() as usize).max(2);
                    for i in 1..=steps {
                        let s = len * i as f64 / steps as f64;
                        let p = if k.abs() < 1e-12 {
                            Point::new(s, 0.0)
                        } else {
                            Point::new((k * s).sin() / k, (1.0 - (k * s).cos()) / k)
                        };
                        centerline.push(start.add(p.rotate(hdg)));
                    }
                }
                other => return Err(MapError::Xml(XmlError::Unsupported(other.to_string()))),
            }
        }
        let roadway_type = match find_user(r, USER_ROADWAY) {
            Some(v) => RoadwayType::parse(v).ok_or_else(|| bad("userData", "value", v))?,
            None => r
                .first("type")
                .and_then(|t| t.get("type"))
                .map_or(RoadwayType::Local, RoadwayType::from_opendrive_type),
        };
        let mut lanes = Vec::new();
        let section = r.req_child("lanes")?.req_child("laneSection")?;
        for side in ["left", "right"] {
            if let Some(sd) = section.first(side) {
                for l in sd.all("lane") {
                    let lane_id = l.req_i64("id")? as i32;
                    let w = l.req_child("width")?;
                    for coef in ["b", "c", "d"] {
                        if w.opt_f64(coef)?.unwrap_or(0.0) != 0.0 {
                            return Err(MapError::Schema(format!(
                                "road `{road_id}` lane {lane_id}: only constant widths are supported"
                            )));
                        }
                    }
                    lanes.push(Lane {
                        lane_id,
                        width: w.req_f64("a")?,
                    });
                }
            }
        }
        if let Some(sigs) = r.first("signals") {
            for s in sigs.all("signal") {
                let station = s.req_f64("s")?;
                let offset = s.req_f64("t")?;
                let position = point_on_polyline(&centerline, station, offset)
                    .ok_or_else(|| MapError::Schema(format!("road `{road_id}`: degenerate centerline")))?;
                let id = s.req("id")?.to_string();
                if s.get("dynamic") == Some("yes") {
                    let mut phases = Vec::new();
                    if let Some(v) = find_user(s, USER_PHASES) {
                        for part in v.split(';').filter(|p| !p.is_empty()) {
                            let mut it = part.split(':');
                            let (Some(st), Some(a), Some(b)) = (it.next(), it.next(), it.next()) else {
                                return Err(bad("userData", "value", part));
                            };
                            phases.push(SignalPhase {
                                state: SignalState::parse(st).ok_or_else(|| bad("userData", "value", part))?,
                                t_start: a.parse().map_err(|_| bad("userData", "value", part))?,
                                t_end: b.parse().map_err(|_| bad("userData", "value", part))?,
                            });
                        }
                    }
                    signals.push(SignalFeature {
                        signal_id: id,
                        position,
                        applies_to: road_id.clone(),
                        phases,
                    });
                } else {
                    signage.push(SignFeature {
                        sign_id: id,
                        kind: SignKind::from_opendrive_code(s.get("type").unwrap_or("-1")),
                        value: s.opt_f64("value")?,
                        position,
                        applies_to: road_id.clone(),
                    });
                }
            }
        }
        roads.push(Road {
            road_id,
            centerline,
            lanes,
            roadway_type,
        });
    }
    let mut junctions = Vec::new();
    for j in root.all("junction") {
        let junction_id = j.req("id")?.to_string();
        let roads_in: Vec<String> = j
            .all("connection")
            .map(|c| c.req("incomingRoad").map(str::to_string))
            .collect::<Result<_, _>>()?;
        let center = match find_user(j, USER_CENTER) {
            Some(v) => {
                let mut it = v.split(',').map(|x| x.trim().parse::<f64>());
                match (it.next(), it.next()) {
                    (Some(Ok(x)), Some(Ok(y))) => Point::new(x, y),
                    _ => return Err(bad("userData", "value", v)),
                }
            }
            None => {
                return Err(MapError::Schema(format!(
                    "junction `{junction_id}`: missing center ({USER_CENTER})"
                )))
            }
        };
        let num = |code: &str| -> Result<f64, MapError> {
            let v = find_user(j, code)
                .ok_or_else(|| MapError::Schema(format!("junction `{junction_id}`: missing {code}")))?;
            v.parse().map_err(|_| bad("userData", "value", v))
        };
        junctions.push(Junction {
            junction_id: junction_id.clone(),
            center,
            radius: num(USER_RADIUS)?,
            arity: num(USER_ARITY)? as u32,
            roads: roads_in,
        });
    }
    MapModel::new(roads, junctions, signage, signals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(id: &str, from: Point, to: Point, lanes: &[i32]) -> Road {
        Road {
            road_id: id.into(),
            centerline: vec![from, to],
            lanes: lanes.iter().map(|&lane_id| Lane { lane_id, width: 3.5 }).collect(),
            roadway_type: RoadwayType::Arterial,
        }
    }

    fn t_junction() -> MapModel {
        MapModel::new(
            vec![
                straight("a", Point::new(-100.0, 0.0), Point::new(100.0, 0.0), &[1, -1]),
                straight("b", Point::new(0.0, 0.0), Point::new(0.0, 100.0), &[1, -1]),
            ],
            vec![Junction {
                junction_id: "j1".into(),
                center: Point::new(0.0, 0.0),
                radius: 12.0,
                arity: 3,
                roads: vec!["a".into(), "b".into()],
            }],
            vec![SignFeature {
                sign_id: "s1".into(),
                kind: SignKind::Stop,
                value: None,
                position: Point::new(3.0, 20.0),
                applies_to: "b".into(),
            }],
            vec![SignalFeature {
                signal_id: "tl1".into(),
                position: Point::new(-20.0, -6.0),
                applies_to: "a".into(),
                phases: vec![
                    SignalPhase { state: SignalState::Red, t_start: 0.0, t_end: 10.0 },
                    SignalPhase { state: SignalState::Green, t_start: 10.0, t_end: 30.0 },
                ],
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_road_no_junctions() {
        let m = MapModel::new(
            vec![straight("r", Point::new(0.0, 0.0), Point::new(50.0, 0.0), &[-1, -2])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(m.roads.len(), 1);
        assert!(m.junctions.is_empty());
        assert!(m.junction_distance(0.0, 0.0).is_none());
    }

    #[test]
    fn junction_arity_and_dangling_reference() {
        assert_eq!(t_junction().junctions[0].arity, 3);
        let mut m = t_junction();
        m.junctions[0].roads.push("zzz".into());
        assert!(matches!(m.validate(), Err(MapError::Dangling(_))));
    }

    #[test]
    fn lane_assignment_conventions() {
        let m = MapModel::new(
            vec![straight("r", Point::new(0.0, 0.0), Point::new(50.0, 0.0), &[-1, -2])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(m.assign_lane(10.0, -1.75).unwrap().lane_id, -1);
        assert_eq!(m.assign_lane(10.0, -3.5).unwrap().lane_id, -2);
        assert_eq!(m.assign_lane(10.0, -3.4999).unwrap().lane_id, -1);
        assert_eq!(m.assign_lane(10.0, 0.0).unwrap().lane_id, -1);
        assert!(m.assign_lane(10.0, 50.0).is_none());
        assert!(m.assign_lane(200.0, 0.0).is_none());
        let single = MapModel::new(
            vec![straight("r", Point::new(0.0, 0.0), Point::new(50.0, 0.0), &[1])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(single.assign_lane(5.0, 1.75).unwrap().lane_id, 1);
        assert_eq!(single.assign_lane(5.0, 0.0).unwrap().lane_id, 1);
    }

    #[test]
    fn nearest_junction() {
        let mut m = t_junction();
        assert_eq!(m.junction_distance(0.0, 0.0).unwrap().1, 0.0);
        m.junctions.push(Junction {
            junction_id: "j2".into(),
            center: Point::new(40.0, 0.0),
            radius: 10.0,
            arity: 4,
            roads: vec!["a".into(), "b".into()],
        });
        let (j, d) = m.junction_distance(10.0, 0.0).unwrap();
        assert_eq!(j.junction_id, "j1");
        assert_eq!(d, 10.0);
        let (j, _) = m.junction_distance(30.0, 0.0).unwrap();
        assert_eq!(j.junction_id, "j2");
    }

    #[test]
    fn opendrive_structure_and_round_trip() {
        let one = MapModel::new(
            vec![straight("r", Point::new(0.0, 0.0), Point::new(50.0, 0.0), &[-1])],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let doc = opendrive_document(&one).unwrap();
        assert_eq!(doc.all("road").count(), 1);
        assert!(doc.first("road").unwrap().first("planView").is_some());

        let m = t_junction();
        let text = opendrive_document(&m).unwrap().to_document();
        let back = read_opendrive(&text).unwrap();
        assert!(m.approx_eq(&back, 1e-9), "{m:#?}\n{back:#?}");
    }

    #[test]
    fn empty_map_cannot_be_written() {
        assert!(matches!(opendrive_document(&MapModel::default()), Err(MapError::NoRoads)));
    }

    #[test]
    fn arc_geometry_is_discretized() {
        let text = r#"<OpenDRIVE><header/>
          <road id="c" length="15.707963" junction="-1">
            <planView><geometry s="0" x="0" y="0" hdg="0" length="15.707963267948966"><arc curvature="0.1"/></geometry></planView>
            <lanes><laneSection s="0"><center><lane id="0"/></center>
              <right><lane id="-1"><width sOffset="0" a="3" b="0" c="0" d="0"/></lane></right></laneSection></lanes>
          </road></OpenDRIVE>"#;
        let m = read_opendrive(text).unwrap();
        let end = *m.roads[0].centerline.last().unwrap();
        assert!((end.x - 10.0).abs() < 1e-9 && (end.y - 10.0).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip() {
        let m = t_junction();
        assert_eq!(MapModel::from_json(&m.to_json()).unwrap(), m);
    }
}
