//! Road network description and its line-oriented text format.
//!
//! ```text
//! # comment
//! node  <id> <x_m> <y_m>
//! edge  <id> <from-node> <to-node> <length_m> <speed_limit_mps> <lanes>
//! light <node> <green_s> <red_s> <offset_s>
//! route <name> <edge> [<edge> ...]
//! ```
//!
//! Edges are directed. Declarations may appear in any order; references are
//! resolved after the whole text is read. A light governs every edge entering
//! its node, split into two phase groups by approach direction: edges whose
//! geometry is mostly along x (`|dx| >= |dy|`) are green for the first
//! `green_s` seconds of each `green_s + red_s` cycle, the others for the
//! remaining `red_s` seconds. `offset_s` shifts the cycle start.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub speed_limit: f64,
    pub lanes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficLight {
    pub node: usize,
    pub green_s: f64,
    pub red_s: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub name: String,
    pub edges: Vec<usize>,
    /// `prefix[i]` is the arc length from the route start to the start of `edges[i]`.
    pub prefix: Vec<f64>,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Green,
    Red,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    lights: Vec<TrafficLight>,
    routes: Vec<Route>,
    node_index: HashMap<String, usize>,
    edge_index: HashMap<String, usize>,
    route_index: HashMap<String, usize>,
    light_at: Vec<Option<usize>>,
    intersection: Vec<bool>,
}

struct RawEdge<'a> {
    line: usize,
    id: &'a str,
    from: &'a str,
    to: &'a str,
    length: f64,
    speed_limit: f64,
    lanes: u32,
}

fn field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("field `{name}`: cannot parse `{raw}`"),
    })
}

fn finite(line: usize, name: &str, raw: &str) -> Result<f64> {
    let v: f64 = field(line, name, raw)?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("field `{name}` must be finite"),
        });
    }
    Ok(v)
}

fn arity(line: usize, kw: &str, tokens: &[&str], want: usize) -> Result<()> {
    if tokens.len() != want {
        return Err(Error::Parse {
            line,
            msg: format!("`{kw}` takes {} fields, found {}", want - 1, tokens.len() - 1),
        });
    }
    Ok(())
}

/// Parses and validates a network description.
pub fn load_network(text: &str) -> Result<RoadNetwork> {
    let mut nodes = Vec::new();
    let mut node_index = HashMap::new();
    let mut raw_edges = Vec::new();
    let mut raw_lights = Vec::new();
    let mut raw_routes = Vec::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(&kw) = tokens.first() else { continue };
        match kw {
            "node" => {
                arity(line, kw, &tokens, 4)?;
                let node = Node {
                    id: tokens[1].to_string(),
                    x: finite(line, "x", tokens[2])?,
                    y: finite(line, "y", tokens[3])?,
                };
                if node_index.insert(node.id.clone(), nodes.len()).is_some() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("duplicate node `{}`", node.id),
                    });
                }
                nodes.push(node);
            }
            "edge" => {
                arity(line, kw, &tokens, 7)?;
                let edge = RawEdge {
                    line,
                    id: tokens[1],
                    from: tokens[2],
                    to: tokens[3],
                    length: finite(line, "length", tokens[4])?,
                    speed_limit: finite(line, "vmax", tokens[5])?,
                    lanes: field(line, "lanes", tokens[6])?,
                };
                if edge.length <= 0.0 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("edge `{}` length must be > 0", edge.id),
                    });
                }
                if edge.speed_limit <= 0.0 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("edge `{}` speed limit must be > 0", edge.id),
                    });
                }
                if edge.lanes == 0 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("edge `{}` needs at least one lane", edge.id),
                    });
                }
                raw_edges.push(edge);
            }
            "light" => {
                arity(line, kw, &tokens, 5)?;
                let green = finite(line, "green_s", tokens[2])?;
                let red = finite(line, "red_s", tokens[3])?;
                let offset = finite(line, "offset_s", tokens[4])?;
                if green <= 0.0 || red <= 0.0 {
                    return Err(Error::Parse {
                        line,
                        msg: "light phase durations must be > 0".into(),
                    });
                }
                raw_lights.push((line, tokens[1], green, red, offset));
            }
            "route" => {
                if tokens.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        msg: "`route` needs a name and at least one edge".into(),
                    });
                }
                raw_routes.push((line, tokens[1], tokens[2..].to_vec()));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown keyword `{other}`"),
                })
            }
        }
    }

    let resolve_node = |id: &str| {
        node_index.get(id).copied().ok_or_else(|| Error::DanglingReference {
            kind: "node",
            id: id.to_string(),
        })
    };

    let mut edges = Vec::with_capacity(raw_edges.len());
    let mut edge_index = HashMap::new();
    for e in &raw_edges {
        let edge = Edge {
            id: e.id.to_string(),
            from: resolve_node(e.from)?,
            to: resolve_node(e.to)?,
            length: e.length,
            speed_limit: e.speed_limit,
            lanes: e.lanes,
        };
        if edge.from == edge.to {
            return Err(Error::Parse {
                line: e.line,
                msg: format!("edge `{}` starts and ends at the same node", e.id),
            });
        }
        if edge_index.insert(edge.id.clone(), edges.len()).is_some() {
            return Err(Error::Parse {
                line: e.line,
                msg: format!("duplicate edge `{}`", e.id),
            });
        }
        edges.push(edge);
    }

    let mut lights = Vec::new();
    let mut light_at = vec![None; nodes.len()];
    for &(line, node, green_s, red_s, offset_s) in &raw_lights {
        let node = resolve_node(node)?;
        if light_at[node].is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("node `{}` already has a light", nodes[node].id),
            });
        }
        light_at[node] = Some(lights.len());
        lights.push(TrafficLight {
            node,
            green_s,
            red_s,
            offset_s,
        });
    }

    let mut routes = Vec::new();
    let mut route_index = HashMap::new();
    for (line, name, edge_ids) in raw_routes {
        let ids = edge_ids
            .iter()
            .map(|id| {
                edge_index.get(*id).copied().ok_or_else(|| Error::DanglingReference {
                    kind: "edge",
                    id: id.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for pair in ids.windows(2) {
            if edges[pair[0]].to != edges[pair[1]].from {
                return Err(Error::Parse {
                    line,
                    msg: format!(
                        "route `{name}` is not connected: `{}` does not lead into `{}`",
                        edges[pair[0]].id, edges[pair[1]].id
                    ),
                });
            }
        }
        let mut prefix = Vec::with_capacity(ids.len());
        let mut acc = 0.0;
        for &e in &ids {
            prefix.push(acc);
            acc += edges[e].length;
        }
        if route_index.insert(name.to_string(), routes.len()).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate route `{name}`"),
            });
        }
        routes.push(Route {
            name: name.to_string(),
            edges: ids,
            prefix,
            length: acc,
        });
    }

    let mut neighbours: Vec<HashSet<usize>> = vec![HashSet::new(); nodes.len()];
    for e in &edges {
        neighbours[e.from].insert(e.to);
        neighbours[e.to].insert(e.from);
    }
    let intersection = (0..nodes.len())
        .map(|n| neighbours[n].len() >= 3 || light_at[n].is_some())
        .collect();

    Ok(RoadNetwork {
        nodes,
        edges,
        lights,
        routes,
        node_index,
        edge_index,
        route_index,
        light_at,
        intersection,
    })
}

impl RoadNetwork {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        load_network(&text)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn lights(&self) -> &[TrafficLight] {
        &self.lights
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn edge(&self, id: &str) -> Option<usize> {
        self.edge_index.get(id).copied()
    }

    pub fn route(&self, name: &str) -> Option<usize> {
        self.route_index.get(name).copied()
    }

    /// Nodes where crossing movements can conflict: three or more neighbours, or signalised.
    pub fn is_intersection(&self, node: usize) -> bool {
        self.intersection[node]
    }

    pub fn node_xy(&self, node: usize) -> (f64, f64) {
        let n = &self.nodes[node];
        (n.x, n.y)
    }

    /// Planar point at `offset` metres along `edge`, interpolating between its end nodes.
    pub fn point_on_edge(&self, edge: usize, offset: f64) -> (f64, f64) {
        let e = &self.edges[edge];
        let (x0, y0) = self.node_xy(e.from);
        let (x1, y1) = self.node_xy(e.to);
        let f = offset / e.length;
        (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
    }

    /// Direction of travel on `edge` in radians.
    pub fn heading(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        let (x0, y0) = self.node_xy(e.from);
        let (x1, y1) = self.node_xy(e.to);
        (y1 - y0).atan2(x1 - x0)
    }

    /// Signal shown to traffic on `edge` at its downstream node; `None` when unsignalised.
    pub fn signal(&self, edge: usize, time_s: f64) -> Option<Signal> {
        let e = &self.edges[edge];
        let light = &self.lights[self.light_at[e.to]?];
        let cycle = light.green_s + light.red_s;
        let phase = (time_s + light.offset_s).rem_euclid(cycle);
        let (x0, y0) = self.node_xy(e.from);
        let (x1, y1) = self.node_xy(e.to);
        let primary = (x1 - x0).abs() >= (y1 - y0).abs();
        let first_window = phase < light.green_s;
        Some(if primary == first_window {
            Signal::Green
        } else {
            Signal::Red
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_network() {
        let net = load_network("node a 0 0\nnode b 100 0\nedge ab a b 100 20 1\n").unwrap();
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.lights().len(), 0);
        assert_eq!(net.nodes().len(), 2);
    }

    #[test]
    fn dangling_node_reference() {
        let err = load_network("node a 0 0\nedge e a n9 10 20 1\n").unwrap_err();
        assert!(
            matches!(&err, Error::DanglingReference { kind: "node", id } if id == "n9"),
            "{err}"
        );
    }

    #[test]
    fn dangling_edge_in_route() {
        let err = load_network("node a 0 0\nnode b 1 0\nedge e a b 1 20 1\nroute r e x\n").unwrap_err();
        assert!(matches!(err, Error::DanglingReference { kind: "edge", .. }));
    }

    #[test]
    fn non_positive_length_names_the_line() {
        let err = load_network("node a 0 0\nnode b 1 0\n\nedge e a b 0 20 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = load_network("node a 0 0\nnode b 1 0\nedge e a b -3 20 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn bad_numbers_and_keywords() {
        assert!(matches!(
            load_network("node a zero 0\n").unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
        assert!(matches!(
            load_network("# hi\nlane a b\n").unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        assert!(load_network("node a 0 0\nnode b 1 0\nedge e a b 1 20 1\nlight a 0 5 0\n").is_err());
    }

    #[test]
    fn disconnected_route_rejected() {
        let text = "node a 0 0\nnode b 1 0\nnode c 2 0\nedge ab a b 1 20 1\nedge bc b c 1 20 1\nroute bad bc ab\n";
        assert!(matches!(load_network(text).unwrap_err(), Error::Parse { line: 6, .. }));
    }

    #[test]
    fn forward_references_resolve() {
        let net = load_network("route r ab\nedge ab a b 10 20 1\nnode a 0 0\nnode b 10 0\n").unwrap();
        assert_eq!(net.routes()[0].length, 10.0);
    }

    #[test]
    fn light_phase_groups_alternate() {
        let text = "node w -10 0\nnode c 0 0\nnode s 0 -10\nedge wc w c 10 20 1\nedge sc s c 10 20 1\nlight c 5 3 0\n";
        let net = load_network(text).unwrap();
        let (wc, sc) = (net.edge("wc").unwrap(), net.edge("sc").unwrap());
        assert_eq!(net.signal(wc, 0.0), Some(Signal::Green));
        assert_eq!(net.signal(sc, 0.0), Some(Signal::Red));
        assert_eq!(net.signal(wc, 5.0), Some(Signal::Red));
        assert_eq!(net.signal(sc, 5.0), Some(Signal::Green));
        assert_eq!(net.signal(wc, 8.0), Some(Signal::Green));
        assert!(net.is_intersection(net.node("c").unwrap()));
    }
}
