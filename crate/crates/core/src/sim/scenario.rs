//! Scenario configuration (TOML). Units are spelled out in key names.
//!
//! ```toml
//! network = "grid2x2.net"          # resolved relative to the scenario file
//! ego_route = "loop"
//! destination_node = "n11"         # exactly one of destination_node,
//! # destination_offset_m = 120.0   # destination_offset_m (arc length along the route)
//! # destination_distance_m = 52.0  # or destination_distance_m (straight line from start)
//! destination_tolerance_m = 5.0
//! step_length_s = 1.0
//! max_steps = 900
//!
//! [[background]]
//! route = "outer"
//! spawn_step = 0
//! offset_m = 30.0
//! speed_mps = 8.0
//! lane = 0
//!
//! [random_background]
//! count = 4
//! routes = ["outer", "inner"]      # empty means every route
//! spawn_window_steps = 60
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpawn {
    pub route: String,
    #[serde(default)]
    pub spawn_step: u32,
    #[serde(default)]
    pub offset_m: f64,
    #[serde(default)]
    pub speed_mps: f64,
    #[serde(default)]
    pub lane: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBackground {
    pub count: u32,
    #[serde(default)]
    pub routes: Vec<String>,
    #[serde(default)]
    pub spawn_window_steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: PathBuf,
    pub ego_route: String,
    #[serde(default)]
    pub destination_node: Option<String>,
    #[serde(default)]
    pub destination_offset_m: Option<f64>,
    #[serde(default)]
    pub destination_distance_m: Option<f64>,
    #[serde(default = "defaults::tolerance")]
    pub destination_tolerance_m: f64,
    #[serde(default = "defaults::step_length")]
    pub step_length_s: f64,
    #[serde(default = "defaults::max_steps")]
    pub max_steps: u32,
    #[serde(default = "defaults::action_min")]
    pub action_min_mps2: f64,
    #[serde(default = "defaults::action_max")]
    pub action_max_mps2: f64,
    #[serde(default = "defaults::vehicle_length")]
    pub ego_length_m: f64,
    #[serde(default = "defaults::vehicle_length")]
    pub background_length_m: f64,
    #[serde(default = "defaults::action_max")]
    pub background_accel_mps2: f64,
    #[serde(default = "defaults::decel")]
    pub background_decel_mps2: f64,
    #[serde(default = "defaults::min_gap")]
    pub min_gap_m: f64,
    #[serde(default = "defaults::intersection_radius")]
    pub intersection_radius_m: f64,
    #[serde(default = "defaults::lookahead")]
    pub lookahead_m: f64,
    #[serde(default = "defaults::braking")]
    pub braking_threshold_mps2: f64,
    #[serde(default = "defaults::waiting_speed")]
    pub waiting_speed_mps: f64,
    #[serde(default = "defaults::waiting_distance")]
    pub waiting_distance_m: f64,
    #[serde(default = "defaults::free_gap")]
    pub free_gap_m: f64,
    #[serde(default)]
    pub background: Vec<BackgroundSpawn>,
    #[serde(default)]
    pub random_background: Option<RandomBackground>,
}

mod defaults {
    pub fn tolerance() -> f64 {
        5.0
    }
    pub fn step_length() -> f64 {
        1.0
    }
    pub fn max_steps() -> u32 {
        900
    }
    pub fn action_min() -> f64 {
        -4.5
    }
    pub fn action_max() -> f64 {
        2.6
    }
    pub fn vehicle_length() -> f64 {
        5.0
    }
    pub fn decel() -> f64 {
        4.5
    }
    pub fn min_gap() -> f64 {
        2.5
    }
    pub fn intersection_radius() -> f64 {
        3.0
    }
    pub fn lookahead() -> f64 {
        150.0
    }
    pub fn braking() -> f64 {
        -0.5
    }
    pub fn waiting_speed() -> f64 {
        0.1
    }
    pub fn waiting_distance() -> f64 {
        15.0
    }
    pub fn free_gap() -> f64 {
        20.0
    }
}

/// How the ego's destination is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DestinationSpec {
    Node(String),
    /// Arc length along the ego route.
    Offset(f64),
    /// Straight-line distance from the route start; the first route point at that distance.
    Distance(f64),
}

impl ScenarioConfig {
    /// Default scenario on `network` with the ego on `ego_route`.
    pub fn new(network: impl Into<PathBuf>, ego_route: impl Into<String>, destination: DestinationSpec) -> Self {
        let mut cfg = ScenarioConfig {
            network: network.into(),
            ego_route: ego_route.into(),
            destination_node: None,
            destination_offset_m: None,
            destination_distance_m: None,
            destination_tolerance_m: defaults::tolerance(),
            step_length_s: defaults::step_length(),
            max_steps: defaults::max_steps(),
            action_min_mps2: defaults::action_min(),
            action_max_mps2: defaults::action_max(),
            ego_length_m: defaults::vehicle_length(),
            background_length_m: defaults::vehicle_length(),
            background_accel_mps2: defaults::action_max(),
            background_decel_mps2: defaults::decel(),
            min_gap_m: defaults::min_gap(),
            intersection_radius_m: defaults::intersection_radius(),
            lookahead_m: defaults::lookahead(),
            braking_threshold_mps2: defaults::braking(),
            waiting_speed_mps: defaults::waiting_speed(),
            waiting_distance_m: defaults::waiting_distance(),
            free_gap_m: defaults::free_gap(),
            background: Vec::new(),
            random_background: None,
        };
        cfg.set_destination(destination);
        cfg
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a scenario file; a relative `network` path is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.network.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.network = dir.join(&cfg.network);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn destination(&self) -> Result<DestinationSpec> {
        match (
            &self.destination_node,
            self.destination_offset_m,
            self.destination_distance_m,
        ) {
            (Some(n), None, None) => Ok(DestinationSpec::Node(n.clone())),
            (None, Some(o), None) => Ok(DestinationSpec::Offset(o)),
            (None, None, Some(d)) => Ok(DestinationSpec::Distance(d)),
            _ => Err(Error::InvalidScenario(
                "exactly one of destination_node, destination_offset_m, destination_distance_m is required".into(),
            )),
        }
    }

    pub fn set_destination(&mut self, dest: DestinationSpec) {
        self.destination_node = None;
        self.destination_offset_m = None;
        self.destination_distance_m = None;
        match dest {
            DestinationSpec::Node(n) => self.destination_node = Some(n),
            DestinationSpec::Offset(o) => self.destination_offset_m = Some(o),
            DestinationSpec::Distance(d) => self.destination_distance_m = Some(d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        self.destination()?;
        if self.max_steps < 1 {
            return bad("max_steps must be >= 1".into());
        }
        let positive = [
            ("step_length_s", self.step_length_s),
            ("destination_tolerance_m", self.destination_tolerance_m),
            ("ego_length_m", self.ego_length_m),
            ("background_length_m", self.background_length_m),
            ("background_accel_mps2", self.background_accel_mps2),
            ("background_decel_mps2", self.background_decel_mps2),
            ("lookahead_m", self.lookahead_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        let non_negative = [
            ("min_gap_m", self.min_gap_m),
            ("intersection_radius_m", self.intersection_radius_m),
            ("waiting_speed_mps", self.waiting_speed_mps),
            ("waiting_distance_m", self.waiting_distance_m),
            ("free_gap_m", self.free_gap_m),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        if self.action_min_mps2.partial_cmp(&self.action_max_mps2) != Some(std::cmp::Ordering::Less) {
            return bad("action_min_mps2 must be below action_max_mps2".into());
        }
        if let Some(d) = self.destination_offset_m.or(self.destination_distance_m) {
            if !(d.is_finite() && d > 0.0) {
                return bad(format!("destination must lie beyond the start, got {d}"));
            }
        }
        for b in &self.background {
            if b.offset_m < 0.0 || b.speed_mps < 0.0 {
                return bad(format!("background on `{}` has a negative offset or speed", b.route));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg =
            ScenarioConfig::from_toml("network = \"a.net\"\nego_route = \"r\"\ndestination_node = \"b\"\n").unwrap();
        assert_eq!(cfg.max_steps, 900);
        assert_eq!(cfg.step_length_s, 1.0);
        assert_eq!(cfg.destination_tolerance_m, 5.0);
        assert_eq!((cfg.action_min_mps2, cfg.action_max_mps2), (-4.5, 2.6));
        assert_eq!(cfg.destination().unwrap(), DestinationSpec::Node("b".into()));
    }

    #[test]
    fn destination_must_be_unique() {
        let text = "network = \"a.net\"\nego_route = \"r\"\ndestination_node = \"b\"\ndestination_offset_m = 3.0\n";
        assert!(ScenarioConfig::from_toml(text).is_err());
        assert!(ScenarioConfig::from_toml("network = \"a.net\"\nego_route = \"r\"\n").is_err());
    }

    #[test]
    fn invariants_enforced() {
        let base = "network = \"a.net\"\nego_route = \"r\"\ndestination_node = \"b\"\n";
        for extra in [
            "max_steps = 0",
            "step_length_s = 0.0",
            "destination_tolerance_m = -1.0",
            "bogus = 1",
        ] {
            assert!(
                ScenarioConfig::from_toml(&format!("{base}{extra}\n")).is_err(),
                "{extra}"
            );
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ScenarioConfig::new("x.net", "main", DestinationSpec::Distance(52.0));
        cfg.background.push(BackgroundSpawn {
            route: "main".into(),
            spawn_step: 3,
            offset_m: 10.0,
            speed_mps: 4.0,
            lane: 0,
        });
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
