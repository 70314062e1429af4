//! Discrete-time traffic world around one learner-controlled ego vehicle.
//!
//! Per step, in order: the ego applies its clamped acceleration, background
//! vehicles advance under the safe-speed rule, scheduled spawns are inserted
//! where there is room, then collisions, arrival and reward are evaluated.
//!
//! Background safe-speed rule, for a vehicle at speed `v` whose nearest
//! obstacle ahead on its route is at gap `g` (a leader's tail, less `min_gap`,
//! or a red stop line `intersection_radius` before the node):
//!
//! ```text
//! g'     = max(g, 0)
//! g_eff  = g' + v_leader² / (2·b)
//! v_safe = min( b·(−Δt + √(Δt² + 2·g_eff/b)),  g'/Δt )
//! v'     = max(0, min(v + a_max·Δt, speed limit, v_safe))
//! ```
//!
//! The first term keeps a stopping distance at deceleration `b`; the second
//! never lets a vehicle cover more than the free gap in one step, so no
//! background vehicle can run into the body of the vehicle ahead.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{RoadNetwork, Signal};
use super::reward::{compute_reward, EventFlags};
use super::scenario::{DestinationSpec, ScenarioConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Ego,
    Background,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub id: u32,
    pub role: Role,
    pub route: usize,
    pub route_index: usize,
    pub edge: usize,
    /// Front bumper position along the current edge, metres.
    pub position: f64,
    pub lane: u32,
    pub speed: f64,
    pub acceleration: f64,
    pub length: f64,
}

/// The six-component state fed to the actor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoObservation {
    pub pos_x: f64,
    pub pos_y: f64,
    pub speed: f64,
    pub heading: f64,
    pub acceleration: f64,
    pub dest_distance: f64,
}

impl EgoObservation {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.pos_x,
            self.pos_y,
            self.speed,
            self.heading,
            self.acceleration,
            self.dest_distance,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        EgoObservation {
            pos_x: a[0],
            pos_y: a[1],
            speed: a[2],
            heading: a[3],
            acceleration: a[4],
            dest_distance: a[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationCause {
    None,
    Collision,
    Destination,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub observation: EgoObservation,
    pub reward: f64,
    pub done: bool,
    pub cause: TerminationCause,
    pub flags: EventFlags,
}

pub fn distance_to_destination(pos: (f64, f64), dest: (f64, f64)) -> f64 {
    (pos.0 - dest.0).hypot(pos.1 - dest.1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    edge: usize,
    lane: u32,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy)]
struct Obstacle {
    gap: f64,
    speed: f64,
    vehicle: bool,
}

/// A vehicle's movement through a node: the edge it arrives on and the edge it leaves by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Movement {
    node: usize,
    inbound: Option<usize>,
    outbound: Option<usize>,
}

#[derive(Debug, Clone)]
struct PendingSpawn {
    step: u32,
    route: usize,
    offset: f64,
    speed: f64,
    lane: u32,
}

#[derive(Debug, Clone)]
pub struct Environment {
    network: Arc<RoadNetwork>,
    config: ScenarioConfig,
    ego_route: usize,
    destination: (f64, f64),
    destination_offset: f64,
    background_routes: Vec<usize>,
    random_routes: Vec<usize>,
    vehicles: Vec<VehicleState>,
    pending: Vec<PendingSpawn>,
    steps: u32,
    done: bool,
    next_id: u32,
}

impl Environment {
    /// Validates the scenario against the network and resolves the destination.
    pub fn new(network: Arc<RoadNetwork>, config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let ego_route = network
            .route(&config.ego_route)
            .ok_or_else(|| Error::DanglingReference {
                kind: "route",
                id: config.ego_route.clone(),
            })?;
        let lookup = |name: &String| {
            network.route(name).ok_or_else(|| Error::DanglingReference {
                kind: "route",
                id: name.clone(),
            })
        };
        let background_routes = config
            .background
            .iter()
            .map(|b| &b.route)
            .map(lookup)
            .collect::<Result<_>>()?;
        let random_routes = match &config.random_background {
            Some(rb) if !rb.routes.is_empty() => rb.routes.iter().map(lookup).collect::<Result<_>>()?,
            _ => (0..network.routes().len()).collect(),
        };
        let (destination, destination_offset) = resolve_destination(&network, ego_route, &config)?;
        let mut env = Environment {
            network,
            config,
            ego_route,
            destination,
            destination_offset,
            background_routes,
            random_routes,
            vehicles: Vec::new(),
            pending: Vec::new(),
            steps: 0,
            done: true,
            next_id: 0,
        };
        env.reset(0)?;
        Ok(env)
    }

    /// Loads the scenario's network file and builds the environment.
    pub fn from_config(config: ScenarioConfig) -> Result<Self> {
        let network = Arc::new(RoadNetwork::load(&config.network)?);
        Self::new(network, config)
    }

    /// Rebuilds the world from `(scenario, episode_seed)`; the ego starts at its route start, at rest.
    pub fn reset(&mut self, episode_seed: u64) -> Result<EgoObservation> {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let route = &self.network.routes()[self.ego_route];
        self.vehicles.clear();
        self.vehicles.push(VehicleState {
            id: 0,
            role: Role::Ego,
            route: self.ego_route,
            route_index: 0,
            edge: route.edges[0],
            position: 0.0,
            lane: 0,
            speed: 0.0,
            acceleration: 0.0,
            length: self.config.ego_length_m,
        });
        self.next_id = 1;
        self.steps = 0;
        self.done = false;

        let mut pending: Vec<PendingSpawn> = self
            .config
            .background
            .iter()
            .zip(&self.background_routes)
            .map(|(b, &route)| PendingSpawn {
                step: b.spawn_step,
                route,
                offset: b.offset_m,
                speed: b.speed_mps,
                lane: b.lane,
            })
            .collect();
        if let Some(rb) = &self.config.random_background {
            for _ in 0..rb.count {
                let route = self.random_routes[rng.random_range(0..self.random_routes.len())];
                let r = &self.network.routes()[route];
                let first = &self.network.edges()[r.edges[0]];
                pending.push(PendingSpawn {
                    step: rng.random_range(0..=rb.spawn_window_steps),
                    route,
                    offset: rng.random_range(0.0..0.5 * r.length),
                    speed: rng.random_range(0.0..=first.speed_limit),
                    lane: rng.random_range(0..first.lanes),
                });
            }
        }
        pending.sort_by_key(|p| p.step);
        self.pending = pending;
        self.spawn_due();
        Ok(self.observation())
    }

    /// Advances the world by one step under the ego acceleration `action_accel` (m/s²).
    pub fn step(&mut self, action_accel: f64) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        if !action_accel.is_finite() {
            return Err(Error::NonFinite("action"));
        }
        let dt = self.config.step_length_s;
        let accel = action_accel.clamp(self.config.action_min_mps2, self.config.action_max_mps2);

        let ego = self.vehicles[0].clone();
        let wanted = (ego.speed + accel * dt).max(0.0);
        let speed = self.cap_to_limits(&ego, wanted);
        let mut moved = ego;
        moved.acceleration = (speed - moved.speed) / dt;
        moved.speed = speed;
        self.advance(&mut moved, speed * dt);
        self.vehicles[0] = moved;

        self.background_step();
        self.steps += 1;
        self.spawn_due();

        let collided = self.collision_check();
        let ego = &self.vehicles[0];
        let observation = self.observation();
        let reached = !collided
            && (observation.dest_distance <= self.config.destination_tolerance_m
                || self.ego_progress() >= self.destination_offset);
        let time = self.time_s();
        let edge = &self.network.edges()[ego.edge];
        let red = self.network.signal(ego.edge, time) == Some(Signal::Red);
        let flags = EventFlags {
            collided,
            reached_destination: reached,
            braking: ego.acceleration < self.config.braking_threshold_mps2,
            waiting_at_light: red
                && ego.speed < self.config.waiting_speed_mps
                && edge.length - ego.position <= self.config.waiting_distance_m,
            moving: ego.speed > 0.0,
            unobstructed: self
                .obstacle_ahead(0, false, time)
                .is_none_or(|o| o.gap >= self.config.free_gap_m),
        };
        let reward = compute_reward(&flags)?;
        let cause = if collided {
            TerminationCause::Collision
        } else if reached {
            TerminationCause::Destination
        } else if self.steps >= self.config.max_steps {
            TerminationCause::MaxSteps
        } else {
            TerminationCause::None
        };
        let done = cause != TerminationCause::None;
        self.done = done;
        Ok(StepOutcome {
            observation,
            reward,
            done,
            cause,
            flags,
        })
    }

    /// Moves every background vehicle one step under the safe-speed rule.
    /// Vehicles that run off the end of their route leave the world.
    pub fn background_step(&mut self) {
        let dt = self.config.step_length_s;
        let b = self.config.background_decel_mps2;
        let time = self.time_s();
        let mut finished = Vec::new();
        for vi in 0..self.vehicles.len() {
            if self.vehicles[vi].role == Role::Ego {
                continue;
            }
            let v = &self.vehicles[vi];
            let mut speed = v.speed + self.config.background_accel_mps2 * dt;
            if let Some(obs) = self.obstacle_ahead(vi, true, time) {
                let gap = if obs.vehicle {
                    obs.gap - self.config.min_gap_m
                } else {
                    obs.gap
                }
                .max(0.0);
                let effective = gap + obs.speed * obs.speed / (2.0 * b);
                let anticipating = b * (-dt + (dt * dt + 2.0 * effective / b).sqrt());
                speed = speed.min(anticipating).min(gap / dt);
            }
            let speed = self.cap_to_limits(v, speed.max(0.0));
            let mut next = v.clone();
            next.acceleration = (speed - next.speed) / dt;
            next.speed = speed;
            if !self.advance(&mut next, speed * dt) {
                finished.push(next.id);
            }
            self.vehicles[vi] = next;
        }
        if !finished.is_empty() {
            self.vehicles.retain(|v| !finished.contains(&v.id));
        }
    }

    /// True when the ego's body overlaps another vehicle in its lane, or the ego
    /// shares an intersection box with a vehicle on a crossing movement.
    pub fn collision_check(&self) -> bool {
        let ego = &self.vehicles[0];
        let ego_segments: Vec<Segment> = self.segments(ego).collect();
        let ego_moves: Vec<Movement> = self.movements(ego).collect();
        self.vehicles[1..].iter().any(|other| {
            let body = self.segments(other).any(|s| {
                ego_segments
                    .iter()
                    .any(|e| e.edge == s.edge && e.lane == s.lane && e.lo < s.hi && s.lo < e.hi)
            });
            body || self
                .movements(other)
                .any(|m| ego_moves.iter().any(|e| e.node == m.node && self.crossing(e, &m)))
        })
    }

    /// True if any two background vehicles overlap in the same lane.
    pub fn background_overlaps(&self) -> bool {
        let segs: Vec<(usize, Segment)> = self
            .vehicles
            .iter()
            .enumerate()
            .filter(|(_, v)| v.role == Role::Background)
            .flat_map(|(i, v)| self.segments(v).map(move |s| (i, s)))
            .collect();
        segs.iter().enumerate().any(|(k, (i, a))| {
            segs[k + 1..]
                .iter()
                .any(|(j, b)| i != j && a.edge == b.edge && a.lane == b.lane && a.lo < b.hi && b.lo < a.hi)
        })
    }

    pub fn observation(&self) -> EgoObservation {
        let ego = &self.vehicles[0];
        let (x, y) = self.network.point_on_edge(ego.edge, ego.position);
        EgoObservation {
            pos_x: x,
            pos_y: y,
            speed: ego.speed,
            heading: self.network.heading(ego.edge),
            acceleration: ego.acceleration,
            dest_distance: distance_to_destination((x, y), self.destination),
        }
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.network
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn vehicles(&self) -> &[VehicleState] {
        &self.vehicles
    }

    pub fn ego(&self) -> &VehicleState {
        &self.vehicles[0]
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn time_s(&self) -> f64 {
        self.steps as f64 * self.config.step_length_s
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn destination(&self) -> (f64, f64) {
        self.destination
    }

    /// Arc length along the ego route at which the destination lies.
    pub fn destination_offset(&self) -> f64 {
        self.destination_offset
    }

    /// Arc length the ego has covered along its route.
    pub fn ego_progress(&self) -> f64 {
        let ego = &self.vehicles[0];
        self.network.routes()[ego.route].prefix[ego.route_index] + ego.position
    }

    /// Time to cover the first `distance` metres of the ego route at each edge's speed limit.
    pub fn free_flow_time(&self, distance: f64) -> f64 {
        let route = &self.network.routes()[self.ego_route];
        route
            .edges
            .iter()
            .zip(&route.prefix)
            .map(|(&e, &start)| {
                let edge = &self.network.edges()[e];
                let covered = (distance - start).clamp(0.0, edge.length);
                covered / edge.speed_limit
            })
            .sum()
    }

    /// Largest straight-line distance from the ego start that its route reaches.
    pub fn max_straight_line_distance(&self) -> f64 {
        max_reach(&self.network, self.ego_route)
    }

    fn spawn_due(&mut self) {
        let mut i = 0;
        while i < self.pending.len() {
            if self.pending[i].step > self.steps {
                break;
            }
            if let Some(vehicle) = self.try_place(&self.pending[i]) {
                self.vehicles.push(vehicle);
                self.next_id += 1;
                self.pending.remove(i);
            } else {
                i += 1;
            }
        }
    }

    fn try_place(&self, spawn: &PendingSpawn) -> Option<VehicleState> {
        let route = &self.network.routes()[spawn.route];
        let offset = spawn.offset.min(route.length);
        let ri = route.prefix.partition_point(|&p| p <= offset).saturating_sub(1);
        let edge = route.edges[ri];
        let e = &self.network.edges()[edge];
        let mut v = VehicleState {
            id: self.next_id,
            role: Role::Background,
            route: spawn.route,
            route_index: ri,
            edge,
            position: (offset - route.prefix[ri]).min(e.length),
            lane: spawn.lane.min(e.lanes - 1),
            speed: 0.0,
            acceleration: 0.0,
            length: self.config.background_length_m,
        };
        v.speed = self.cap_to_limits(&v, spawn.speed).min(e.speed_limit);
        let dt = self.config.step_length_s;
        let gap = self.config.min_gap_m;
        let clear = self.segments(&v).all(|s| {
            self.vehicles.iter().all(|other| {
                self.segments(other).all(|o| {
                    if o.edge != s.edge || o.lane != s.lane {
                        true
                    } else if o.lo >= s.hi {
                        o.lo - s.hi >= gap
                    } else if o.hi <= s.lo {
                        s.lo - o.hi >= gap + other.speed * dt
                    } else {
                        false
                    }
                })
            })
        });
        clear.then_some(v)
    }

    fn edge_lane(&self, lane: u32, edge: usize) -> u32 {
        lane.min(self.network.edges()[edge].lanes - 1)
    }

    /// Body intervals; the tail may spill back onto the previous route edge.
    fn segments<'a>(&'a self, v: &'a VehicleState) -> impl Iterator<Item = Segment> + 'a {
        let tail = v.position - v.length;
        let here = Segment {
            edge: v.edge,
            lane: self.edge_lane(v.lane, v.edge),
            lo: tail.max(0.0),
            hi: v.position,
        };
        let spill = (tail < 0.0 && v.route_index > 0).then(|| {
            let prev = self.network.routes()[v.route].edges[v.route_index - 1];
            let len = self.network.edges()[prev].length;
            Segment {
                edge: prev,
                lane: self.edge_lane(v.lane, prev),
                lo: (len + tail).max(0.0),
                hi: len,
            }
        });
        std::iter::once(here).chain(spill)
    }

    fn movements<'a>(&'a self, v: &'a VehicleState) -> impl Iterator<Item = Movement> + 'a {
        let radius = self.config.intersection_radius_m;
        let route = &self.network.routes()[v.route];
        let edge = &self.network.edges()[v.edge];
        let ahead = (v.position > edge.length - radius && self.network.is_intersection(edge.to)).then(|| Movement {
            node: edge.to,
            inbound: Some(v.edge),
            outbound: route.edges.get(v.route_index + 1).copied(),
        });
        let behind = (v.position - v.length < radius && self.network.is_intersection(edge.from)).then(|| Movement {
            node: edge.from,
            inbound: v.route_index.checked_sub(1).map(|i| route.edges[i]),
            outbound: Some(v.edge),
        });
        ahead.into_iter().chain(behind)
    }

    /// Movements through one node that cross: different approach, different exit,
    /// and not the straight oncoming reverse of each other.
    fn crossing(&self, a: &Movement, b: &Movement) -> bool {
        if a.inbound.is_some() && a.inbound == b.inbound {
            return false;
        }
        if a.outbound.is_some() && a.outbound == b.outbound {
            return false;
        }
        let reversed = |x: Option<usize>, y: Option<usize>| match (x, y) {
            (Some(x), Some(y)) => {
                let (ex, ey) = (&self.network.edges()[x], &self.network.edges()[y]);
                ex.from == ey.to && ex.to == ey.from
            }
            _ => true,
        };
        !(reversed(a.inbound, b.outbound) && reversed(a.outbound, b.inbound))
    }

    /// Nearest vehicle tail (or red stop line) ahead of vehicle `vi` along its route.
    fn obstacle_ahead(&self, vi: usize, lights: bool, time: f64) -> Option<Obstacle> {
        let v = &self.vehicles[vi];
        let route = &self.network.routes()[v.route];
        let radius = self.config.intersection_radius_m;
        let mut base = -v.position;
        for ri in v.route_index..route.edges.len() {
            if base > self.config.lookahead_m {
                break;
            }
            let e = route.edges[ri];
            let edge = &self.network.edges()[e];
            let lane = self.edge_lane(v.lane, e);
            let mut best: Option<Obstacle> = None;
            let mut consider = |o: Obstacle| {
                if best.is_none_or(|b| o.gap < b.gap) {
                    best = Some(o);
                }
            };
            for (wj, w) in self.vehicles.iter().enumerate() {
                if wj == vi {
                    continue;
                }
                for s in self.segments(w) {
                    if s.edge != e || s.lane != lane || (ri == v.route_index && s.hi <= v.position) {
                        continue;
                    }
                    consider(Obstacle {
                        gap: base + s.lo,
                        speed: w.speed,
                        vehicle: true,
                    });
                }
            }
            if lights && self.network.signal(e, time) == Some(Signal::Red) {
                let stop = (edge.length - radius).max(0.0);
                if base + stop >= 0.0 {
                    consider(Obstacle {
                        gap: base + stop,
                        speed: 0.0,
                        vehicle: false,
                    });
                }
            }
            if best.is_some() {
                return best;
            }
            base += edge.length;
        }
        None
    }

    /// Lowers `speed` to the limit of every edge the vehicle would enter this step.
    fn cap_to_limits(&self, v: &VehicleState, speed: f64) -> f64 {
        let route = &self.network.routes()[v.route];
        let dt = self.config.step_length_s;
        let edges = self.network.edges();
        let mut speed = speed.min(edges[v.edge].speed_limit);
        let mut remaining = edges[v.edge].length - v.position;
        let mut ri = v.route_index;
        while ri + 1 < route.edges.len() && speed * dt > remaining {
            ri += 1;
            let e = &edges[route.edges[ri]];
            speed = speed.min(e.speed_limit);
            remaining += e.length;
        }
        speed
    }

    /// Moves `v` forward along its route; false once it has run off the route end.
    fn advance(&self, v: &mut VehicleState, distance: f64) -> bool {
        let route = &self.network.routes()[v.route];
        v.position += distance;
        loop {
            let len = self.network.edges()[v.edge].length;
            if v.position <= len {
                return true;
            }
            if v.route_index + 1 < route.edges.len() {
                v.position -= len;
                v.route_index += 1;
                v.edge = route.edges[v.route_index];
            } else {
                v.position = len;
                return false;
            }
        }
    }
}

fn max_reach(network: &RoadNetwork, route: usize) -> f64 {
    let r = &network.routes()[route];
    let start = network.node_xy(network.edges()[r.edges[0]].from);
    r.edges
        .iter()
        .map(|&e| distance_to_destination(network.node_xy(network.edges()[e].to), start))
        .fold(0.0, f64::max)
}

/// Destination point and its arc offset along the ego route.
fn resolve_destination(network: &RoadNetwork, route_idx: usize, cfg: &ScenarioConfig) -> Result<((f64, f64), f64)> {
    let route = &network.routes()[route_idx];
    match cfg.destination()? {
        DestinationSpec::Node(id) => {
            let node = network.node(&id).ok_or(Error::DanglingReference {
                kind: "node",
                id: id.clone(),
            })?;
            let p = network.node_xy(node);
            let mut best = (f64::INFINITY, 0.0);
            for (&e, &start) in route.edges.iter().zip(&route.prefix) {
                let edge = &network.edges()[e];
                let a = network.node_xy(edge.from);
                let b = network.node_xy(edge.to);
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                let denom = dx * dx + dy * dy;
                let t = if denom > 0.0 {
                    (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / denom).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = distance_to_destination((a.0 + t * dx, a.1 + t * dy), p);
                if d < best.0 {
                    best = (d, start + t * edge.length);
                }
            }
            if best.0 > cfg.destination_tolerance_m {
                return Err(Error::UnreachableDestination(format!(
                    "route `{}` passes {:.2} m from node `{id}`, tolerance is {} m",
                    route.name, best.0, cfg.destination_tolerance_m
                )));
            }
            Ok((p, best.1))
        }
        DestinationSpec::Offset(offset) => {
            if offset > route.length {
                return Err(Error::UnreachableDestination(format!(
                    "offset {offset} m lies beyond the end of route `{}` ({} m)",
                    route.name, route.length
                )));
            }
            let ri = route.prefix.partition_point(|&p| p < offset).saturating_sub(1);
            Ok((
                network.point_on_edge(route.edges[ri], offset - route.prefix[ri]),
                offset,
            ))
        }
        DestinationSpec::Distance(d) => {
            let start = network.node_xy(network.edges()[route.edges[0]].from);
            for (&e, &prefix) in route.edges.iter().zip(&route.prefix) {
                let edge = &network.edges()[e];
                let a = network.node_xy(edge.from);
                let b = network.node_xy(edge.to);
                // Solve |a - start + t (b - a)| = d for the smallest t in [0, 1].
                let (ux, uy) = (b.0 - a.0, b.1 - a.1);
                let (wx, wy) = (a.0 - start.0, a.1 - start.1);
                let qa = ux * ux + uy * uy;
                let qb = 2.0 * (ux * wx + uy * wy);
                let qc = wx * wx + wy * wy - d * d;
                let disc = qb * qb - 4.0 * qa * qc;
                if qa == 0.0 || disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                let hit = [(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)]
                    .into_iter()
                    .find(|t| (0.0..=1.0).contains(t));
                if let Some(t) = hit {
                    let point = (a.0 + t * ux, a.1 + t * uy);
                    return Ok((point, prefix + t * edge.length));
                }
            }
            Err(Error::InfeasibleDistance {
                requested: d,
                max: max_reach(network, route_idx),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::network::load_network;
    use crate::sim::scenario::BackgroundSpawn;

    fn straight(length: f64) -> Arc<RoadNetwork> {
        let text = format!("node a 0 0\nnode b {length} 0\nedge ab a b {length} 20 1\nroute main ab\n");
        Arc::new(load_network(&text).unwrap())
    }

    fn env_on(net: Arc<RoadNetwork>, dest: DestinationSpec, tweak: impl FnOnce(&mut ScenarioConfig)) -> Environment {
        let mut cfg = ScenarioConfig::new("unused.net", "main", dest);
        tweak(&mut cfg);
        Environment::new(net, cfg).unwrap()
    }

    fn spawn(route: &str, offset: f64, speed: f64) -> BackgroundSpawn {
        BackgroundSpawn {
            route: route.into(),
            spawn_step: 0,
            offset_m: offset,
            speed_mps: speed,
            lane: 0,
        }
    }

    #[test]
    fn euclidean_distance() {
        assert_eq!(distance_to_destination((0.0, 0.0), (0.0, 0.0)), 0.0);
        assert_eq!(distance_to_destination((0.0, 0.0), (3.0, 4.0)), 5.0);
        assert_eq!(distance_to_destination((1.0, 1.0), (-2.0, 5.0)), 5.0);
    }

    #[test]
    fn reset_places_ego_at_rest_with_straight_line_distance() {
        let net = Arc::new(
            load_network(
                "node a 0 0\nnode b 3 4\nnode c 6 8\nedge ab a b 5 20 1\nedge bc b c 5 20 1\nroute main ab bc\n",
            )
            .unwrap(),
        );
        let mut env = env_on(net, DestinationSpec::Node("b".into()), |c| {
            c.destination_tolerance_m = 1.0
        });
        let obs = env.reset(3).unwrap();
        assert_eq!(obs.dest_distance, 5.0);
        assert_eq!(obs.speed, 0.0);
        assert_eq!(obs.acceleration, 0.0);
        assert_eq!((obs.pos_x, obs.pos_y), (0.0, 0.0));
    }

    #[test]
    fn unreachable_destination_node() {
        let text = "node a 0 0\nnode b 100 0\nnode far 50 40\nedge ab a b 100 20 1\nroute main ab\n";
        let net = Arc::new(load_network(text).unwrap());
        let cfg = ScenarioConfig::new("x", "main", DestinationSpec::Node("far".into()));
        assert!(matches!(
            Environment::new(net, cfg),
            Err(Error::UnreachableDestination(_))
        ));
    }

    #[test]
    fn speed_clamps_at_zero() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(400.0), |c| {
            c.action_min_mps2 = -10.0;
        });
        env.reset(0).unwrap();
        for _ in 0..2 {
            env.step(2.5).unwrap();
        }
        assert_eq!(env.ego().speed, 5.0);
        let out = env.step(-10.0).unwrap();
        assert_eq!(out.observation.speed, 0.0);
        assert_eq!(out.observation.acceleration, -5.0);
    }

    #[test]
    fn ego_displacement_is_speed_times_step() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(490.0), |c| {
            c.step_length_s = 0.5
        });
        env.reset(0).unwrap();
        let mut last = env.ego_progress();
        for a in [2.6, 2.6, 1.0, -1.0, 0.0] {
            let out = env.step(a).unwrap();
            let now = env.ego_progress();
            assert!((now - last - out.observation.speed * 0.5).abs() < 1e-12);
            last = now;
        }
    }

    #[test]
    fn actions_are_clamped_to_bounds() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(490.0), |_| {});
        env.reset(0).unwrap();
        let out = env.step(100.0).unwrap();
        assert_eq!(out.observation.speed, 2.6);
        assert!(env.step(f64::NAN).is_err());
    }

    #[test]
    fn ego_speed_never_exceeds_limit() {
        let mut env = env_on(straight(2000.0), DestinationSpec::Offset(1990.0), |_| {});
        env.reset(0).unwrap();
        for _ in 0..30 {
            env.step(2.6).unwrap();
        }
        assert_eq!(env.ego().speed, 20.0);
    }

    #[test]
    fn destination_reached_gives_ten() {
        let mut env = env_on(straight(100.0), DestinationSpec::Offset(12.0), |_| {});
        env.reset(0).unwrap();
        let mut last = None;
        for _ in 0..10 {
            let out = env.step(2.6).unwrap();
            if out.done {
                last = Some(out);
                break;
            }
        }
        let out = last.expect("ego arrives");
        assert_eq!(out.cause, TerminationCause::Destination);
        assert_eq!(out.reward, 10.0);
        assert!(out.flags.reached_destination);
    }

    #[test]
    fn max_steps_terminates_at_900() {
        let mut env = env_on(straight(100.0), DestinationSpec::Offset(90.0), |_| {});
        env.reset(0).unwrap();
        for k in 1..=900 {
            let out = env.step(0.0).unwrap();
            assert_eq!(out.done, k == 900, "step {k}");
            if k == 900 {
                assert_eq!(out.cause, TerminationCause::MaxSteps);
                assert_eq!(out.reward, -0.02);
            }
        }
        assert!(matches!(env.step(0.0), Err(Error::EpisodeDone)));
    }

    #[test]
    fn ego_alone_never_collides() {
        let env = env_on(straight(100.0), DestinationSpec::Offset(90.0), |_| {});
        assert!(!env.collision_check());
    }

    #[test]
    fn ego_overlapping_leader_collides() {
        let two_lanes =
            Arc::new(load_network("node a 0 0\nnode b 100 0\nedge ab a b 100 20 2\nroute main ab\n").unwrap());
        let mut env = env_on(two_lanes, DestinationSpec::Offset(90.0), |_| {});
        env.reset(0).unwrap();
        // Ego body (10, 15], leader body (9, 14].
        env.vehicles[0].position = 15.0;
        env.vehicles.push(VehicleState {
            id: 9,
            role: Role::Background,
            route: 0,
            route_index: 0,
            edge: 0,
            position: 14.0,
            lane: 0,
            speed: 0.0,
            acceleration: 0.0,
            length: 5.0,
        });
        assert!(env.collision_check());
        env.vehicles[1].lane = 1;
        assert!(!env.collision_check());
    }

    #[test]
    fn background_accelerates_on_empty_road() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(490.0), |c| {
            c.background.push(spawn("main", 200.0, 5.0));
        });
        env.reset(0).unwrap();
        env.background_step();
        assert_eq!(env.vehicles()[1].speed, 5.0 + 2.6);
    }

    #[test]
    fn background_follower_closes_only_to_minimum_gap() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(490.0), |c| {
            c.background.push(spawn("main", 100.0, 0.0));
            c.background.push(spawn("main", 80.0, 15.0));
        });
        env.reset(0).unwrap();
        // Follower 1 m behind the leader's tail; the leader moves first (to 102.6).
        env.vehicles[2].position = 94.0;
        env.background_step();
        let leader = &env.vehicles()[1];
        let follower = &env.vehicles()[2];
        assert_eq!(leader.position, 102.6);
        assert!((follower.speed - 1.1).abs() < 1e-9, "{}", follower.speed);
        assert!(leader.position - leader.length - follower.position >= 2.5 - 1e-9);
        assert!(!env.background_overlaps());
    }

    #[test]
    fn background_brakes_for_red_light() {
        let text = "node a 0 0\nnode b 100 0\nnode c 200 0\nnode s 100 -50\nedge ab a b 100 20 1\nedge bc b c 100 20 1\nedge sb s b 50 20 1\nroute main ab bc\nlight b 10 10 10\n";
        let net = Arc::new(load_network(text).unwrap());
        let mut env = env_on(net, DestinationSpec::Offset(190.0), |c| {
            c.background.push(spawn("main", 95.0, 10.0));
        });
        env.reset(0).unwrap();
        assert_eq!(env.network().signal(0, 0.0), Some(Signal::Red));
        // Stop line at 100 - 3 = 97, so the vehicle is 2 m away.
        env.background_step();
        let b: f64 = 4.5;
        let expected = b * (-1.0 + (1.0 + 2.0 * 2.0 / b).sqrt());
        let v = &env.vehicles()[1];
        assert!((v.speed - expected).abs() < 1e-12, "{}", v.speed);
        assert!(v.speed < 10.0);
    }

    #[test]
    fn crossing_vehicles_in_intersection_box_collide() {
        let text = "node w -50 0\nnode c 0 0\nnode e 50 0\nnode s 0 -50\nnode n 0 50\n\
            edge wc w c 50 20 1\nedge ce c e 50 20 1\nedge sc s c 50 20 1\nedge cn c n 50 20 1\n\
            route east wc ce\nroute north sc cn\n";
        let net = Arc::new(load_network(text).unwrap());
        let mut env = env_on(net, DestinationSpec::Offset(95.0), |c| {
            c.ego_route = "east".into();
            c.background.push(spawn("north", 10.0, 0.0));
        });
        env.reset(0).unwrap();
        assert!(!env.collision_check());
        // Ego front 1 m into the box from the west, crossing vehicle 1 m into it from the south.
        env.vehicles[0].position = 49.0;
        env.vehicles[1].position = 49.0;
        assert!(env.collision_check());
        // Crossing vehicle held at its stop line is outside the box.
        env.vehicles[1].position = 46.0;
        assert!(!env.collision_check());
    }

    #[test]
    fn spawn_waits_for_room() {
        let mut env = env_on(straight(500.0), DestinationSpec::Offset(490.0), |c| {
            c.background.push(spawn("main", 2.0, 0.0));
        });
        env.reset(0).unwrap();
        assert_eq!(env.vehicles().len(), 1);
        for _ in 0..5 {
            env.step(2.6).unwrap();
        }
        assert_eq!(env.vehicles().len(), 2);
    }

    #[test]
    fn distance_destination_on_bent_route() {
        let text =
            "node a 0 0\nnode b 30 0\nnode c 30 40\nedge ab a b 30 20 1\nedge bc b c 40 20 1\nroute main ab bc\n";
        let net = Arc::new(load_network(text).unwrap());
        let env = env_on(net.clone(), DestinationSpec::Distance(50.0), |_| {});
        assert_eq!(env.destination(), (30.0, 40.0));
        assert_eq!(env.destination_offset(), 70.0);
        let cfg = ScenarioConfig::new("x", "main", DestinationSpec::Distance(60.0));
        match Environment::new(net, cfg) {
            Err(Error::InfeasibleDistance { max, .. }) => assert_eq!(max, 50.0),
            other => panic!("{:?}", other.err()),
        }
    }

    #[test]
    fn free_flow_time_over_mixed_limits() {
        let text =
            "node a 0 0\nnode b 100 0\nnode c 200 0\nedge ab a b 100 20 1\nedge bc b c 100 10 1\nroute main ab bc\n";
        let net = Arc::new(load_network(text).unwrap());
        let env = env_on(net, DestinationSpec::Offset(190.0), |_| {});
        assert_eq!(env.free_flow_time(100.0), 5.0);
        assert_eq!(env.free_flow_time(150.0), 10.0);
    }
}
