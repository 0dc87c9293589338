//! Bundled catalogs, parameter maps and synthetic maps. The JSON files under
//! `assets/` are generated from these (`covdrive fixtures --out assets`).

use std::collections::BTreeMap;

use crate::concretize::{Behavior, ConcreteScenario, EgoSpec, LanePose, NpcSpec, CAR_LENGTH, CAR_WIDTH, SCENARIO_SCHEMA};
use crate::geometry::Vec2;
use crate::mapsem::{ArmSpec, Direction, MapBuilder, MapFile, MapGraph, Structure, SubMapId};

/// Three categories with one constraint; 20 feasible pairs.
pub const EXAMPLE_CATALOG: &str = r#"{
  "categories": [
    {"name": "weather", "elements": ["sunny", "rainy", "cloudy"]},
    {"name": "road", "elements": ["straight", "T-shaped"]},
    {"name": "ego-action", "elements": ["drive-straight", "left-turn", "u-turn"]}
  ],
  "constraints": ["road.straight -> !ego-action.left-turn"]
}
"#;

/// Catalog used by campaigns on the town map.
pub const TOWN_CATALOG: &str = r#"{
  "categories": [
    {"name": "weather", "elements": ["sunny", "rainy", "cloudy"]},
    {"name": "road", "elements": ["straight", "T-shaped", "four-way", "roundabout"]},
    {"name": "ego-action", "elements": ["drive-straight", "left-turn", "right-turn", "u-turn"]},
    {"name": "vehicle-density", "elements": ["light", "mild", "heavy"]},
    {"name": "pedestrian", "elements": ["none", "crossing"]},
    {"name": "traffic-signal", "elements": ["none", "signalized"]}
  ],
  "constraints": [
    "!road.roundabout",
    "road.straight -> ego-action.drive-straight",
    "road.straight -> traffic-signal.none",
    "road.straight -> pedestrian.none"
  ]
}
"#;

/// Parameter map for [`TOWN_CATALOG`].
pub const TOWN_PARAMS: &str = r#"{
  "weather.sunny": [
    {"param": "cloudiness", "range": [0.0, 0.2]},
    {"param": "rain", "range": [0.0, 0.0]},
    {"param": "wetness", "range": [0.0, 0.1]}
  ],
  "weather.rainy": [
    {"param": "cloudiness", "range": [0.6, 1.0]},
    {"param": "rain", "range": [0.3, 1.0], "policy": "interior"},
    {"param": "wetness", "range": [0.5, 1.0]}
  ],
  "weather.cloudy": [
    {"param": "cloudiness", "range": [0.3, 1.0]},
    {"param": "rain", "range": [0.0, 0.0]},
    {"param": "wetness", "range": [0.0, 0.3]}
  ],
  "road.straight": [{"structure": "STRAIGHT"}],
  "road.T-shaped": [{"structure": "T_SHAPED"}],
  "road.four-way": [{"structure": "FOUR_WAY"}],
  "road.roundabout": [{"structure": "ROUNDABOUT"}],
  "ego-action.drive-straight": [{"ego_action": "straight"}],
  "ego-action.left-turn": [{"ego_action": "left"}],
  "ego-action.right-turn": [{"ego_action": "right"}],
  "ego-action.u-turn": [{"ego_action": "u-turn"}],
  "vehicle-density.light": [{"count_range": [1, 3]}],
  "vehicle-density.mild": [{"count_range": [3, 6]}],
  "vehicle-density.heavy": [{"count_range": [6, 9]}],
  "pedestrian.none": [{"pedestrians": [0, 0]}],
  "pedestrian.crossing": [{"pedestrians": [1, 2]}, {"crosswalk": true}],
  "traffic-signal.none": [{"signalized": false}],
  "traffic-signal.signalized": [{"signalized": true}]
}
"#;

pub const T_JUNCTION: &str = "J_1";
pub const T_STEM: &str = "road_stem";
pub const Y_JUNCTION: &str = "J_Y";
pub const SKEWED_T_JUNCTION: &str = "J_5";
pub const STRAIGHT_ROAD: &str = "road_main";

/// Symmetric T: bar roads east and west, stem to the south; one lane each way.
pub fn t_junction() -> MapFile {
    let mut b = MapBuilder::new("t-junction");
    b.junction(T_JUNCTION, Vec2::new(0.0, 0.0), false)
        .arm(T_JUNCTION, ArmSpec::new("road_east", 0.0, 80.0))
        .arm(T_JUNCTION, ArmSpec::new("road_west", 180.0, 80.0))
        .arm(T_JUNCTION, ArmSpec::new(T_STEM, 270.0, 80.0));
    b.build()
}

/// Symmetric Y with arms 120 degrees apart.
pub fn y_junction() -> MapFile {
    let mut b = MapBuilder::new("y-junction");
    b.junction(Y_JUNCTION, Vec2::new(0.0, 0.0), false)
        .arm(Y_JUNCTION, ArmSpec::new("road_a", 90.0, 80.0))
        .arm(Y_JUNCTION, ArmSpec::new("road_b", 210.0, 80.0))
        .arm(Y_JUNCTION, ArmSpec::new("road_c", 330.0, 80.0));
    b.build()
}

/// Slightly skewed T whose gaps are 181.7, 90.1 and 88.2 degrees.
pub fn skewed_t() -> MapFile {
    let mut b = MapBuilder::new("skewed-t");
    b.junction(SKEWED_T_JUNCTION, Vec2::new(0.0, 0.0), false)
        .arm(SKEWED_T_JUNCTION, ArmSpec::new("road_115", 0.0, 80.0))
        .arm(SKEWED_T_JUNCTION, ArmSpec::new("road_116", 181.7, 80.0))
        .arm(SKEWED_T_JUNCTION, ArmSpec::new("road_117", 271.8, 80.0));
    b.build()
}

/// Two-by-two grid of four-way junctions, 150 m apart.
pub fn grid() -> MapFile {
    let mut b = MapBuilder::new("grid");
    b.junction("J_A", Vec2::new(0.0, 0.0), false)
        .junction("J_B", Vec2::new(150.0, 0.0), false)
        .junction("J_C", Vec2::new(0.0, 150.0), false)
        .junction("J_D", Vec2::new(150.0, 150.0), false)
        .link("road_ab", "J_A", "J_B", 1, 1)
        .link("road_cd", "J_C", "J_D", 1, 1)
        .link("road_ac", "J_A", "J_C", 1, 1)
        .link("road_bd", "J_B", "J_D", 1, 1)
        .arm("J_A", ArmSpec::new("road_a_w", 180.0, 80.0))
        .arm("J_A", ArmSpec::new("road_a_s", 270.0, 80.0))
        .arm("J_B", ArmSpec::new("road_b_e", 0.0, 80.0))
        .arm("J_B", ArmSpec::new("road_b_s", 270.0, 80.0))
        .arm("J_C", ArmSpec::new("road_c_w", 180.0, 80.0))
        .arm("J_C", ArmSpec::new("road_c_n", 90.0, 80.0))
        .arm("J_D", ArmSpec::new("road_d_e", 0.0, 80.0))
        .arm("J_D", ArmSpec::new("road_d_n", 90.0, 80.0));
    b.build()
}

/// Isolated junctions of several shapes: T, Y, four-way, a 150/105/105
/// three-way that matches no template, and the skewed T.
pub fn mixed() -> MapFile {
    let mut b = MapBuilder::new("mixed");
    let shapes: [(&str, &[f64]); 5] = [
        ("J_T", &[0.0, 180.0, 270.0]),
        ("J_Y", &[90.0, 210.0, 330.0]),
        ("J_X", &[0.0, 90.0, 180.0, 270.0]),
        ("J_O", &[0.0, 150.0, 255.0]),
        ("J_S", &[0.0, 181.7, 271.8]),
    ];
    for (i, (id, headings)) in shapes.iter().enumerate() {
        b.junction(id, Vec2::new(500.0 * i as f64, 0.0), i % 2 == 1);
        for (k, h) in headings.iter().enumerate() {
            let road = format!("road_{}_{}", id[2..].to_lowercase(), k);
            b.arm(id, ArmSpec::new(&road, *h, 80.0));
        }
    }
    b.crosswalk("J_T", "road_t_2").crosswalk("J_X", "road_x_0");
    b.build()
}

/// A single 400 m road with two lanes in the same direction.
pub fn two_lane_straight() -> MapFile {
    let mut b = MapBuilder::new("two-lane-straight");
    b.road(STRAIGHT_ROAD, &[Vec2::new(0.0, 0.0), Vec2::new(400.0, 0.0)], 2, 0);
    b.build()
}

/// Small town: an east-west avenue (two lanes each way) through a signalized
/// T, a signalized four-way and an unsignalized T, a north-south street to an
/// unsignalized four-way, crosswalks at every junction, and a separate
/// straight road.
pub fn town() -> MapFile {
    let mut b = MapBuilder::new("town");
    b.junction("J_1", Vec2::new(0.0, 0.0), true)
        .junction("J_2", Vec2::new(200.0, 0.0), false)
        .junction("J_3", Vec2::new(0.0, 200.0), false)
        .junction("J_4", Vec2::new(-200.0, 0.0), true)
        .link("road_41", "J_4", "J_1", 2, 2)
        .link("road_12", "J_1", "J_2", 2, 2)
        .link("road_13", "J_1", "J_3", 1, 1)
        .arm("J_1", ArmSpec::new("road_1s", 270.0, 120.0))
        .arm("J_2", ArmSpec::new("road_2e", 0.0, 120.0).lanes(2, 2))
        .arm("J_2", ArmSpec::new("road_2s", 270.0, 100.0))
        .arm("J_3", ArmSpec::new("road_3w", 180.0, 100.0))
        .arm("J_3", ArmSpec::new("road_3e", 0.0, 100.0))
        .arm("J_3", ArmSpec::new("road_3n", 90.0, 100.0))
        .arm("J_4", ArmSpec::new("road_4w", 180.0, 120.0).lanes(2, 2))
        .arm("J_4", ArmSpec::new("road_4n", 90.0, 100.0))
        .road("road_straight", &[Vec2::new(-200.0, -300.0), Vec2::new(200.0, -300.0)], 2, 1)
        .crosswalk("J_1", "road_41")
        .crosswalk("J_1", "road_12")
        .crosswalk("J_1", "road_13")
        .crosswalk("J_1", "road_1s")
        .crosswalk("J_2", "road_2s")
        .crosswalk("J_3", "road_3n")
        .crosswalk("J_4", "road_4w");
    b.build()
}

/// Left and right lane of [`two_lane_straight`].
pub const STRAIGHT_LEFT_LANE: &str = "road_main:0";
pub const STRAIGHT_RIGHT_LANE: &str = "road_main:1";

/// Ego drives along one lane of [`two_lane_straight`] from `start` to `dest`
/// meters, starting at rest, with no other agents.
pub fn straight_scenario(lane: &str, start: f64, dest: f64) -> ConcreteScenario {
    ConcreteScenario {
        schema: SCENARIO_SCHEMA.into(),
        id: "straight".into(),
        seed: 0,
        map: "two-lane-straight".into(),
        abstract_scenario: BTreeMap::new(),
        submap: SubMapId::Road(STRAIGHT_ROAD.into()),
        structure: Structure::Straight,
        ego: EgoSpec {
            route: vec![lane.into()],
            start: LanePose { lane: lane.into(), offset: start },
            destination: LanePose { lane: lane.into(), offset: dest },
            speed: 0.0,
            action: Direction::Straight,
            length: CAR_LENGTH,
            width: CAR_WIDTH,
        },
        npcs: Vec::new(),
        pedestrians: Vec::new(),
        environment: BTreeMap::new(),
        signals: Vec::new(),
        density: None,
    }
}

/// Car-sized NPC driving a single lane.
pub fn lane_npc(id: &str, lane: &str, offset: f64, speed: f64, behavior: Behavior) -> NpcSpec {
    NpcSpec {
        id: id.into(),
        route: vec![lane.into()],
        start: LanePose { lane: lane.into(), offset },
        speed,
        behavior,
        length: CAR_LENGTH,
        width: CAR_WIDTH,
    }
}

/// Ego route on the [`town`] map through `junction` from `approach` toward the
/// road labelled `dir`, starting in lane `lane_rank` (0 = rightmost).
pub fn town_turn(map: &MapGraph, junction: &str, approach: &str, dir: Direction, lane_rank: usize) -> ConcreteScenario {
    let j = map.junction(junction).unwrap();
    let a = map.road(approach).unwrap();
    let labels = map.relative_direction(junction, approach).unwrap();
    let ins = map.lanes_entering(j, a);
    let (conn, from) = ins
        .iter()
        .find_map(|&l| {
            map.connectors_from(l)
                .find(|&c| labels[&map.roads()[map.lanes()[map.connectors()[c].to].road].id] == dir)
                .map(|c| (c, l))
        })
        .unwrap();
    let start_lane = ins[lane_rank];
    let mut route = vec![map.lanes()[start_lane].id.clone()];
    if start_lane != from {
        route.push(map.lanes()[from].id.clone());
    }
    let out = map.connectors()[conn].to;
    route.push(map.connectors()[conn].id.clone());
    route.push(map.lanes()[out].id.clone());
    let mut sc = straight_scenario(&route[0], 0.0, 0.0);
    sc.map = "town".into();
    let len = map.lanes()[start_lane].path.length();
    sc.ego.route = route;
    sc.ego.start.offset = len - 60.0;
    sc.ego.destination.lane = map.lanes()[out].id.clone();
    sc.ego.destination.offset = 40.0;
    sc.ego.action = dir;
    sc.id = format!("{junction}-{approach}-{dir}");
    sc
}

/// Every bundled map with its asset file name.
pub fn all_maps() -> Vec<(&'static str, MapFile)> {
    vec![
        ("map_t.json", t_junction()),
        ("map_y.json", y_junction()),
        ("map_skewed_t.json", skewed_t()),
        ("map_grid.json", grid()),
        ("map_mixed.json", mixed()),
        ("map_two_lane.json", two_lane_straight()),
        ("map_town.json", town()),
    ]
}

/// Every bundled asset (file name, contents).
pub fn all_assets() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = all_maps().into_iter().map(|(n, m)| (n.to_string(), m.to_json())).collect();
    out.push(("catalog_example.json".into(), EXAMPLE_CATALOG.into()));
    out.push(("catalog_town.json".into(), TOWN_CATALOG.into()));
    out.push(("params_town.json".into(), TOWN_PARAMS.into()));
    out
}
