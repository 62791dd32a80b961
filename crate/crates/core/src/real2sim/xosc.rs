//! OpenSCENARIO 1.1 XML subset: writer, reader, structural whitelist.

use std::fs;
use std::path::Path;

use super::{
    Act, Entity, Event, InitPose, Maneuver, ManeuverGroup, ParameterDecl, Rule, Scalar, ScenarioDocument,
    ScenarioError, Story, TimeDomain, TrajectoryAction, TriggerCondition, Vertex,
};
use crate::recording::ActorClass;
use crate::xml::{self, Element, XmlError};

const FILE_DATE: &str = "2024-01-01T00:00:00";

fn world(x: impl ToString, y: impl ToString, h: impl ToString) -> Element {
    Element::new("Position").child(
        Element::new("WorldPosition")
            .attr("x", x)
            .attr("y", y)
            .attr("z", 0)
            .attr("h", h),
    )
}

fn condition_element(name: &str, c: &TriggerCondition) -> Element {
    let inner = match c {
        TriggerCondition::SimulationTime { t, rule } => Element::new("ByValueCondition").child(
            Element::new("SimulationTimeCondition")
                .attr("value", t)
                .attr("rule", rule.as_str()),
        ),
        TriggerCondition::RelativeDistance {
            entity_a,
            entity_b,
            threshold,
            rule,
        } => Element::new("ByEntityCondition")
            .child(
                Element::new("TriggeringEntities")
                    .attr("triggeringEntitiesRule", "any")
                    .child(Element::new("EntityRef").attr("entityRef", entity_a)),
            )
            .child(
                Element::new("EntityCondition").child(
                    Element::new("RelativeDistanceCondition")
                        .attr("entityRef", entity_b)
                        .attr("freespace", "false")
                        .attr("relativeDistanceType", "euclidianDistance")
                        .attr("value", threshold)
                        .attr("rule", rule.as_str()),
                ),
            ),
    };
    Element::new("ConditionGroup").child(
        Element::new("Condition")
            .attr("name", name)
            .attr("delay", 0)
            .attr("conditionEdge", "none")
            .child(inner),
    )
}

fn trigger(tag: &str, name: &str, c: &TriggerCondition) -> Element {
    Element::new(tag).child(condition_element(name, c))
}

fn entity_element(e: &Entity) -> Element {
    let bbox = Element::new("BoundingBox")
        .child(Element::new("Center").attr("x", 0).attr("y", 0).attr("z", 0.75))
        .child(
            Element::new("Dimensions")
                .attr("width", e.width)
                .attr("length", e.length)
                .attr("height", 1.5),
        );
    let props = Element::new("Properties")
        .child(Element::new("Property").attr("name", "actorClass").attr("value", e.actor_class.as_str()))
        .child(Element::new("Property").attr("name", "sourceId").attr("value", &e.source_id));
    let body = match e.actor_class {
        ActorClass::Pedestrian => Element::new("Pedestrian")
            .attr("model", "pedestrian")
            .attr("mass", 80)
            .attr("name", &e.name)
            .attr("pedestrianCategory", "pedestrian")
            .child(bbox)
            .child(props),
        class => {
            let category = match class {
                ActorClass::Truck => "truck",
                ActorClass::Bicycle => "bicycle",
                _ => "car",
            };
            let axle = |tag: &str, x: f64, steer: f64| {
                Element::new(tag)
                    .attr("maxSteering", steer)
                    .attr("wheelDiameter", 0.6)
                    .attr("trackWidth", e.width)
                    .attr("positionX", x)
                    .attr("positionZ", 0.3)
            };
            Element::new("Vehicle")
                .attr("name", &e.name)
                .attr("vehicleCategory", category)
                .child(bbox)
                .child(
                    Element::new("Performance")
                        .attr("maxSpeed", 70)
                        .attr("maxAcceleration", 10)
                        .attr("maxDeceleration", 10),
                )
                .child(
                    Element::new("Axles")
                        .child(axle("FrontAxle", e.length * 0.7, 0.5))
                        .child(axle("RearAxle", 0.0, 0.0)),
                )
                .child(props)
        }
    };
    Element::new("ScenarioObject").attr("name", &e.name).child(body)
}

fn init_element(i: &InitPose) -> Element {
    Element::new("Private")
        .attr("entityRef", &i.entity)
        .child(Element::new("PrivateAction").child(
            Element::new("TeleportAction").child(world(i.x.to_attr(), i.y.to_attr(), i.heading.to_attr())),
        ))
        .child(
            Element::new("PrivateAction").child(
                Element::new("LongitudinalAction").child(
                    Element::new("SpeedAction")
                        .child(
                            Element::new("SpeedActionDynamics")
                                .attr("dynamicsShape", "step")
                                .attr("value", 0)
                                .attr("dynamicsDimension", "time"),
                        )
                        .child(
                            Element::new("SpeedActionTarget")
                                .child(Element::new("AbsoluteTargetSpeed").attr("value", i.speed.to_attr())),
                        ),
                ),
            ),
        )
}

fn event_element(ev: &Event) -> Element {
    let a = &ev.action;
    let domain = match a.domain {
        TimeDomain::Absolute => "absolute",
        TimeDomain::Relative => "relative",
    };
    let polyline = Element::new("Polyline").children_from(
        a.vertices
            .iter()
            .map(|v| Element::new("Vertex").attr("time", v.t).child(world(v.x, v.y, v.heading))),
    );
    let follow = Element::new("FollowTrajectoryAction")
        .child(
            Element::new("TimeReference").child(
                Element::new("Timing")
                    .attr("domainAbsoluteRelative", domain)
                    .attr("scale", 1)
                    .attr("offset", 0),
            ),
        )
        .child(Element::new("TrajectoryFollowingMode").attr("followingMode", "position"))
        .child(
            Element::new("TrajectoryRef").child(
                Element::new("Trajectory")
                    .attr("name", &a.name)
                    .attr("closed", "false")
                    .child(Element::new("Shape").child(polyline)),
            ),
        );
    Element::new("Event")
        .attr("name", &ev.name)
        .attr("priority", "overwrite")
        .attr("maximumExecutionCount", 1)
        .child(
            Element::new("Action")
                .attr("name", format!("{}Action", ev.name))
                .child(Element::new("PrivateAction").child(Element::new("RoutingAction").child(follow))),
        )
        .child(trigger("StartTrigger", &format!("{}Start", ev.name), &ev.start))
}

pub fn parameter_declarations(params: &[ParameterDecl]) -> Element {
    Element::new("ParameterDeclarations").children_from(params.iter().map(|p| {
        Element::new("ParameterDeclaration")
            .attr("name", &p.name)
            .attr("parameterType", "double")
            .attr("value", p.value)
    }))
}

pub fn file_header(description: &str) -> Element {
    Element::new("FileHeader")
        .attr("revMajor", 1)
        .attr("revMinor", 1)
        .attr("date", FILE_DATE)
        .attr("description", description)
        .attr("author", "safr")
}

pub fn scenario_xml(doc: &ScenarioDocument) -> Element {
    let stories = doc.stories.iter().map(|s| {
        Element::new("Story").attr("name", &s.name).children_from(s.acts.iter().map(|act| {
            Element::new("Act")
                .attr("name", &act.name)
                .children_from(act.groups.iter().map(|g| {
                    Element::new("ManeuverGroup")
                        .attr("maximumExecutionCount", 1)
                        .attr("name", &g.name)
                        .child(
                            Element::new("Actors")
                                .attr("selectTriggeringEntities", "false")
                                .child(Element::new("EntityRef").attr("entityRef", &g.actor)),
                        )
                        .children_from(g.maneuvers.iter().map(|m| {
                            Element::new("Maneuver")
                                .attr("name", &m.name)
                                .children_from(m.events.iter().map(event_element))
                        }))
                }))
                .child(trigger(
                    "StartTrigger",
                    &format!("{}Start", act.name),
                    &TriggerCondition::SimulationTime { t: 0.0, rule: Rule::GreaterOrEqual },
                ))
        }))
    });
    Element::new("OpenSCENARIO")
        .child(file_header(&doc.description))
        .child(parameter_declarations(&doc.parameters))
        .child(Element::new("CatalogLocations"))
        .child(Element::new("RoadNetwork").child(Element::new("LogicFile").attr("filepath", &doc.map_ref)))
        .child(Element::new("Entities").children_from(doc.entities.iter().map(entity_element)))
        .child(
            Element::new("Storyboard")
                .child(Element::new("Init").child(Element::new("Actions").children_from(doc.init.iter().map(init_element))))
                .children_from(stories)
                .child(trigger(
                    "StopTrigger",
                    "End",
                    &TriggerCondition::SimulationTime { t: doc.stop_time, rule: Rule::GreaterOrEqual },
                )),
        )
}

pub fn write_openscenario(doc: &ScenarioDocument, path: &Path) -> Result<(), ScenarioError> {
    doc.validate()?;
    fs::write(path, scenario_xml(doc).to_document()).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_openscenario(path: &Path) -> Result<ScenarioDocument, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_openscenario_str(&text)
}

fn only_child(e: &Element) -> Result<&Element, XmlError> {
    e.children
        .first()
        .ok_or_else(|| XmlError::MissingElement(format!("{}/*", e.name)))
}

fn scalar_attr(e: &Element, key: &str) -> Result<Scalar, XmlError> {
    let raw = e.req(key)?;
    Scalar::from_attr(raw).ok_or_else(|| XmlError::BadAttr {
        element: e.name.clone(),
        attr: key.to_string(),
        value: raw.to_string(),
    })
}

fn rule_attr(e: &Element) -> Result<Rule, XmlError> {
    let raw = e.req("rule")?;
    Rule::parse(raw).ok_or_else(|| XmlError::BadAttr {
        element: e.name.clone(),
        attr: "rule".into(),
        value: raw.to_string(),
    })
}

fn read_condition(trigger: &Element) -> Result<TriggerCondition, XmlError> {
    let groups: Vec<&Element> = trigger.all("ConditionGroup").collect();
    let conds: Vec<&Element> = groups.iter().flat_map(|g| g.all("Condition")).collect();
    if conds.len() != 1 {
        return Err(XmlError::Unsupported(format!(
            "{} with {} conditions (exactly one supported)",
            trigger.name,
            conds.len()
        )));
    }
    let by = only_child(conds[0])?;
    match by.name.as_str() {
        "ByValueCondition" => {
            let c = only_child(by)?;
            match c.name.as_str() {
                "SimulationTimeCondition" => Ok(TriggerCondition::SimulationTime {
                    t: c.req_f64("value")?,
                    rule: rule_attr(c)?,
                }),
                other => Err(XmlError::Unsupported(other.to_string())),
            }
        }
        "ByEntityCondition" => {
            let entity_a = by
                .req_child("TriggeringEntities")?
                .req_child("EntityRef")?
                .req("entityRef")?
                .to_string();
            let c = only_child(by.req_child("EntityCondition")?)?;
            match c.name.as_str() {
                "RelativeDistanceCondition" => {
                    if c.get("freespace") == Some("true") {
                        return Err(XmlError::Unsupported("RelativeDistanceCondition[freespace=true]".into()));
                    }
                    Ok(TriggerCondition::RelativeDistance {
                        entity_a,
                        entity_b: c.req("entityRef")?.to_string(),
                        threshold: c.req_f64("value")?,
                        rule: rule_attr(c)?,
                    })
                }
                other => Err(XmlError::Unsupported(other.to_string())),
            }
        }
        other => Err(XmlError::Unsupported(other.to_string())),
    }
}

fn read_entity(obj: &Element) -> Result<Entity, XmlError> {
    let name = obj.req("name")?.to_string();
    let body = only_child(obj)?;
    if !matches!(body.name.as_str(), "Vehicle" | "Pedestrian") {
        return Err(XmlError::Unsupported(body.name.clone()));
    }
    let dims = body.req_child("BoundingBox")?.req_child("Dimensions")?;
    let prop = |key: &str| {
        body.first("Properties")
            .and_then(|p| p.all("Property").find(|q| q.get("name") == Some(key)))
            .and_then(|q| q.get("value"))
            .map(str::to_string)
    };
    let actor_class = match prop("actorClass").and_then(|c| ActorClass::parse(&c)) {
        Some(c) => c,
        None if body.name == "Pedestrian" => ActorClass::Pedestrian,
        None => match body.get("vehicleCategory") {
            Some("truck") => ActorClass::Truck,
            Some("bicycle") => ActorClass::Bicycle,
            _ => ActorClass::Car,
        },
    };
    Ok(Entity {
        source_id: prop("sourceId").unwrap_or_else(|| name.clone()),
        name,
        actor_class,
        length: dims.req_f64("length")?,
        width: dims.req_f64("width")?,
    })
}

fn read_init(private: &Element) -> Result<InitPose, XmlError> {
    let entity = private.req("entityRef")?.to_string();
    let mut pose = None;
    let mut speed = None;
    for pa in private.all("PrivateAction") {
        let action = only_child(pa)?;
        match action.name.as_str() {
            "TeleportAction" => {
                let w = action.req_child("Position")?.req_child("WorldPosition")?;
                pose = Some((scalar_attr(w, "x")?, scalar_attr(w, "y")?, scalar_attr(w, "h")?));
            }
            "LongitudinalAction" => {
                let target = action
                    .req_child("SpeedAction")?
                    .req_child("SpeedActionTarget")?
                    .req_child("AbsoluteTargetSpeed")?;
                speed = Some(scalar_attr(target, "value")?);
            }
            other => return Err(XmlError::Unsupported(other.to_string())),
        }
    }
    let (x, y, heading) = pose.ok_or_else(|| XmlError::MissingElement("Private/TeleportAction".into()))?;
    Ok(InitPose {
        entity,
        x,
        y,
        heading,
        speed: speed.unwrap_or(Scalar::Value(0.0)),
    })
}

fn read_event(ev: &Element, actor: &str) -> Result<Event, XmlError> {
    let action = ev.req_child("Action")?;
    let pa = action.req_child("PrivateAction")?;
    let inner = only_child(pa)?;
    if inner.name != "RoutingAction" {
        return Err(XmlError::Unsupported(inner.name.clone()));
    }
    let follow = only_child(inner)?;
    if follow.name != "FollowTrajectoryAction" {
        return Err(XmlError::Unsupported(follow.name.clone()));
    }
    let mode = follow.req_child("TrajectoryFollowingMode")?.req("followingMode")?;
    if mode != "position" {
        return Err(XmlError::Unsupported(format!("TrajectoryFollowingMode[{mode}]")));
    }
    let timing = follow.req_child("TimeReference")?.req_child("Timing")?;
    let domain = match timing.req("domainAbsoluteRelative")? {
        "absolute" => TimeDomain::Absolute,
        "relative" => TimeDomain::Relative,
        other => {
            return Err(XmlError::BadAttr {
                element: "Timing".into(),
                attr: "domainAbsoluteRelative".into(),
                value: other.into(),
            })
        }
    };
    let traj = follow
        .first("TrajectoryRef")
        .and_then(|r| r.first("Trajectory"))
        .or_else(|| follow.first("Trajectory"))
        .ok_or_else(|| XmlError::MissingElement("FollowTrajectoryAction/TrajectoryRef/Trajectory".into()))?;
    let shape = only_child(traj.req_child("Shape")?)?;
    if shape.name != "Polyline" {
        return Err(XmlError::Unsupported(shape.name.clone()));
    }
    let vertices = shape
        .all("Vertex")
        .map(|v| {
            let w = v.req_child("Position")?.req_child("WorldPosition")?;
            Ok(Vertex {
                t: v.req_f64("time")?,
                x: w.req_f64("x")?,
                y: w.req_f64("y")?,
                heading: w.opt_f64("h")?.unwrap_or(0.0),
            })
        })
        .collect::<Result<Vec<_>, XmlError>>()?;
    Ok(Event {
        name: ev.req("name")?.to_string(),
        action: TrajectoryAction {
            name: traj.req("name")?.to_string(),
            entity: actor.to_string(),
            domain,
            vertices,
        },
        start: read_condition(ev.req_child("StartTrigger")?)?,
    })
}

pub fn read_parameters(root: &Element) -> Result<Vec<ParameterDecl>, XmlError> {
    match root.first("ParameterDeclarations") {
        None => Ok(Vec::new()),
        Some(p) => p
            .all("ParameterDeclaration")
            .map(|d| {
                Ok(ParameterDecl {
                    name: d.req("name")?.to_string(),
                    value: d.req_f64("value")?,
                })
            })
            .collect(),
    }
}

pub fn read_openscenario_str(text: &str) -> Result<ScenarioDocument, ScenarioError> {
    let root = xml::parse(text)?;
    if root.name != "OpenSCENARIO" {
        return Err(XmlError::Unsupported(root.name).into());
    }
    let sb = root.req_child("Storyboard")?;
    let mut stories = Vec::new();
    for s in sb.all("Story") {
        let mut acts = Vec::new();
        for a in s.all("Act") {
            let mut groups = Vec::new();
            for g in a.all("ManeuverGroup") {
                let actor = g.req_child("Actors")?.req_child("EntityRef")?.req("entityRef")?.to_string();
                let maneuvers = g
                    .all("Maneuver")
                    .map(|m| {
                        Ok(Maneuver {
                            name: m.req("name")?.to_string(),
                            events: m.all("Event").map(|e| read_event(e, &actor)).collect::<Result<_, XmlError>>()?,
                        })
                    })
                    .collect::<Result<_, XmlError>>()?;
                groups.push(ManeuverGroup {
                    name: g.req("name")?.to_string(),
                    actor,
                    maneuvers,
                });
            }
            acts.push(Act {
                name: a.req("name")?.to_string(),
                groups,
            });
        }
        stories.push(Story {
            name: s.req("name")?.to_string(),
            acts,
        });
    }
    let stop_time = match sb.first("StopTrigger") {
        Some(t) => match read_condition(t)? {
            TriggerCondition::SimulationTime { t, .. } => t,
            _ => return Err(XmlError::Unsupported("StopTrigger without SimulationTimeCondition".into()).into()),
        },
        None => 0.0,
    };
    let init = match sb.first("Init").and_then(|i| i.first("Actions")) {
        Some(actions) => actions.all("Private").map(read_init).collect::<Result<_, _>>()?,
        None => Vec::new(),
    };
    let doc = ScenarioDocument {
        description: root
            .first("FileHeader")
            .and_then(|h| h.get("description"))
            .unwrap_or_default()
            .to_string(),
        map_ref: root
            .first("RoadNetwork")
            .and_then(|r| r.first("LogicFile"))
            .and_then(|l| l.get("filepath"))
            .unwrap_or_default()
            .to_string(),
        parameters: read_parameters(&root)?,
        entities: root
            .req_child("Entities")?
            .all("ScenarioObject")
            .map(read_entity)
            .collect::<Result<_, _>>()?,
        init,
        stories,
        stop_time,
    };
    doc.validate()?;
    Ok(doc)
}

// ---------------------------------------------------------------- whitelist

/// (element, allowed children, required attributes) for every element the
/// subset emits, including the parameter-distribution files.
const STRUCTURE: &[(&str, &[&str], &[&str])] = &[
    ("OpenSCENARIO", &["FileHeader", "ParameterDeclarations", "CatalogLocations", "RoadNetwork", "Entities", "Storyboard", "ParameterValueDistribution"], &[]),
    ("FileHeader", &[], &["revMajor", "revMinor", "date", "description", "author"]),
    ("ParameterDeclarations", &["ParameterDeclaration"], &[]),
    ("ParameterDeclaration", &[], &["name", "parameterType", "value"]),
    ("CatalogLocations", &[], &[]),
    ("RoadNetwork", &["LogicFile"], &[]),
    ("LogicFile", &[], &["filepath"]),
    ("Entities", &["ScenarioObject"], &[]),
    ("ScenarioObject", &["Vehicle", "Pedestrian"], &["name"]),
    ("Vehicle", &["ParameterDeclarations", "BoundingBox", "Performance", "Axles", "Properties"], &["name", "vehicleCategory"]),
    ("Pedestrian", &["ParameterDeclarations", "BoundingBox", "Properties"], &["model", "mass", "name", "pedestrianCategory"]),
    ("BoundingBox", &["Center", "Dimensions"], &[]),
    ("Center", &[], &["x", "y", "z"]),
    ("Dimensions", &[], &["width", "length", "height"]),
    ("Performance", &[], &["maxSpeed", "maxAcceleration", "maxDeceleration"]),
    ("Axles", &["FrontAxle", "RearAxle", "AdditionalAxle"], &[]),
    ("FrontAxle", &[], &["maxSteering", "wheelDiameter", "trackWidth", "positionX", "positionZ"]),
    ("RearAxle", &[], &["maxSteering", "wheelDiameter", "trackWidth", "positionX", "positionZ"]),
    ("Properties", &["Property"], &[]),
    ("Property", &[], &["name", "value"]),
    ("Storyboard", &["Init", "Story", "StopTrigger"], &[]),
    ("Init", &["Actions"], &[]),
    ("Actions", &["Private"], &[]),
    ("Private", &["PrivateAction"], &["entityRef"]),
    ("PrivateAction", &["TeleportAction", "LongitudinalAction", "RoutingAction"], &[]),
    ("TeleportAction", &["Position"], &[]),
    ("Position", &["WorldPosition"], &[]),
    ("WorldPosition", &[], &["x", "y"]),
    ("LongitudinalAction", &["SpeedAction"], &[]),
    ("SpeedAction", &["SpeedActionDynamics", "SpeedActionTarget"], &[]),
    ("SpeedActionDynamics", &[], &["dynamicsShape", "value", "dynamicsDimension"]),
    ("SpeedActionTarget", &["AbsoluteTargetSpeed"], &[]),
    ("AbsoluteTargetSpeed", &[], &["value"]),
    ("Story", &["ParameterDeclarations", "Act"], &["name"]),
    ("Act", &["ManeuverGroup", "StartTrigger", "StopTrigger"], &["name"]),
    ("ManeuverGroup", &["Actors", "Maneuver"], &["maximumExecutionCount", "name"]),
    ("Actors", &["EntityRef"], &["selectTriggeringEntities"]),
    ("EntityRef", &[], &["entityRef"]),
    ("Maneuver", &["ParameterDeclarations", "Event"], &["name"]),
    ("Event", &["Action", "StartTrigger"], &["name", "priority"]),
    ("Action", &["PrivateAction"], &["name"]),
    ("RoutingAction", &["FollowTrajectoryAction"], &[]),
    ("FollowTrajectoryAction", &["TimeReference", "TrajectoryFollowingMode", "TrajectoryRef"], &[]),
    ("TimeReference", &["Timing", "None"], &[]),
    ("Timing", &[], &["domainAbsoluteRelative", "scale", "offset"]),
    ("TrajectoryFollowingMode", &[], &["followingMode"]),
    ("TrajectoryRef", &["Trajectory"], &[]),
    ("Trajectory", &["ParameterDeclarations", "Shape"], &["name", "closed"]),
    ("Shape", &["Polyline"], &[]),
    ("Polyline", &["Vertex"], &[]),
    ("Vertex", &["Position"], &["time"]),
    ("StartTrigger", &["ConditionGroup"], &[]),
    ("StopTrigger", &["ConditionGroup"], &[]),
    ("ConditionGroup", &["Condition"], &[]),
    ("Condition", &["ByValueCondition", "ByEntityCondition"], &["name", "delay", "conditionEdge"]),
    ("ByValueCondition", &["SimulationTimeCondition"], &[]),
    ("SimulationTimeCondition", &[], &["value", "rule"]),
    ("ByEntityCondition", &["TriggeringEntities", "EntityCondition"], &[]),
    ("TriggeringEntities", &["EntityRef"], &["triggeringEntitiesRule"]),
    ("EntityCondition", &["RelativeDistanceCondition"], &[]),
    ("RelativeDistanceCondition", &[], &["entityRef", "freespace", "relativeDistanceType", "value", "rule"]),
    ("ParameterValueDistribution", &["ScenarioFile", "Stochastic", "Deterministic"], &[]),
    ("ScenarioFile", &[], &["filepath"]),
    ("Stochastic", &["StochasticDistribution"], &["numberOfTestRuns"]),
    ("StochasticDistribution", &["Histogram", "ProbabilityDistributionSet"], &["parameterName"]),
    ("Histogram", &["Bin"], &[]),
    ("Bin", &["Range"], &["weight"]),
    ("Range", &[], &["lowerLimit", "upperLimit"]),
    ("ProbabilityDistributionSet", &["Element"], &[]),
    ("Element", &[], &["value"]),
    ("Deterministic", &["DeterministicSingleParameterDistribution"], &[]),
    ("DeterministicSingleParameterDistribution", &["DistributionSet"], &["parameterName"]),
    ("DistributionSet", &["Element"], &[]),
];

/// Checks element names, nesting and required attributes against the
/// supported subset. Returns every violation found.
pub fn validate_structure(root: &Element) -> Result<(), Vec<String>> {
    let mut problems = Vec::new();
    if root.name != "OpenSCENARIO" {
        problems.push(format!("root element is <{}>, expected <OpenSCENARIO>", root.name));
    }
    fn go(e: &Element, path: &str, problems: &mut Vec<String>) {
        let here = format!("{path}/{}", e.name);
        let Some((_, children, required)) = STRUCTURE.iter().find(|(n, _, _)| *n == e.name) else {
            problems.push(format!("{here}: element not in the supported subset"));
            return;
        };
        for attr in *required {
            if e.get(attr).is_none() {
                problems.push(format!("{here}: missing attribute '{attr}'"));
            }
        }
        for c in &e.children {
            if !children.contains(&c.name.as_str()) {
                problems.push(format!("{here}: <{}> not allowed here", c.name));
            } else {
                go(c, &here, problems);
            }
        }
    }
    go(root, "", &mut problems);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
