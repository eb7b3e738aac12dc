//! Connectivity graphs, trajectory sampling and per-step pose deltas.
//!
//! Headings are planar bearings in degrees: 0° points along +y and angles
//! grow clockwise, so +x is 90°. All headings are normalized to (-180, 180].

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar displacements below this are treated as coincident positions.
const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        ((other.x - self.x).powi(2) + (other.y - self.y).powi(2) + (other.z - self.z).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Bearing from `self` to `other` in the horizontal plane, or `None` when
    /// the two positions coincide in x/y.
    pub fn bearing_to(&self, other: &Vec3) -> Option<f64> {
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        if dx.hypot(dy) < DEGENERATE_EPS {
            return None;
        }
        Some(normalize_heading(dx.atan2(dy).to_degrees()))
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(p: [f64; 3]) -> Self {
        Vec3::new(p[0], p[1], p[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

/// Maps any finite angle in degrees to (-180, 180].
pub fn normalize_heading(degrees: f64) -> f64 {
    let h = degrees.rem_euclid(360.0);
    if h > 180.0 {
        h - 360.0
    } else {
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint {
    pub id: String,
    pub position: Vec3,
}

/// Navigable viewpoints of one environment with symmetric adjacency.
#[derive(Debug, Clone)]
pub struct ConnectivityGraph {
    scan_id: String,
    viewpoints: Vec<Viewpoint>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    scan_id: String,
    viewpoints: Vec<ViewpointEntry>,
    edges: Vec<[String; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewpointEntry {
    id: String,
    pos: [f64; 3],
}

impl ConnectivityGraph {
    /// Builds a graph from viewpoints and undirected edges. Viewpoints are
    /// stored in id order so that every derived ordering is canonical.
    pub fn new(scan_id: impl Into<String>, viewpoints: Vec<Viewpoint>, edges: &[(String, String)]) -> Result<Self> {
        if viewpoints.is_empty() {
            return Err(Error::Graph("empty graph".into()));
        }
        let mut viewpoints = viewpoints;
        viewpoints.sort_by(|a, b| a.id.cmp(&b.id));

        let mut index = HashMap::with_capacity(viewpoints.len());
        for (i, vp) in viewpoints.iter().enumerate() {
            if !vp.position.is_finite() {
                return Err(Error::Graph(format!("viewpoint \"{}\" has a non-finite position", vp.id)));
            }
            if index.insert(vp.id.clone(), i).is_some() {
                return Err(Error::Graph(format!("duplicate viewpoint id \"{}\"", vp.id)));
            }
        }

        let mut adjacency = vec![Vec::new(); viewpoints.len()];
        for (n, (a, b)) in edges.iter().enumerate() {
            let ia = *index
                .get(a)
                .ok_or_else(|| Error::Schema(format!("edges[{n}] references unknown viewpoint \"{a}\"")))?;
            let ib = *index
                .get(b)
                .ok_or_else(|| Error::Schema(format!("edges[{n}] references unknown viewpoint \"{b}\"")))?;
            if ia == ib {
                return Err(Error::Graph(format!("edges[{n}] is a self-loop on \"{a}\"")));
            }
            adjacency[ia].push(ib);
            adjacency[ib].push(ia);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }

        Ok(Self { scan_id: scan_id.into(), viewpoints, index, adjacency })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| Error::Schema(format!("graph file: {e}")))?;
        let viewpoints = file.viewpoints.into_iter().map(|v| Viewpoint { id: v.id, position: v.pos.into() }).collect();
        let edges: Vec<(String, String)> = file.edges.into_iter().map(|[a, b]| (a, b)).collect();
        Self::new(file.scan_id, viewpoints, &edges)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let mut edges = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            for &j in list.iter().filter(|&&j| j > i) {
                edges.push([self.viewpoints[i].id.clone(), self.viewpoints[j].id.clone()]);
            }
        }
        serde_json::json!({
            "scan_id": self.scan_id,
            "viewpoints": self.viewpoints.iter().map(|v| serde_json::json!({
                "id": v.id,
                "pos": <[f64; 3]>::from(v.position),
            })).collect::<Vec<_>>(),
            "edges": edges,
        })
    }

    pub fn scan_id(&self) -> &str {
        &self.scan_id
    }

    pub fn viewpoints(&self) -> &[Viewpoint] {
        &self.viewpoints
    }

    pub fn len(&self) -> usize {
        self.viewpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.viewpoints.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn viewpoint(&self, id: &str) -> Option<&Viewpoint> {
        self.index_of(id).map(|i| &self.viewpoints[i])
    }

    /// Neighbour indices of viewpoint `i`, ascending.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn is_adjacent(&self, a: &str, b: &str) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(ia), Some(ib)) => self.adjacency[ia].binary_search(&ib).is_ok(),
            _ => false,
        }
    }

    /// Hop distances from `source` (None = unreachable) together with the
    /// number of distinct shortest paths to each node. Exploration stops at
    /// `max_hops`.
    fn bfs_counts(&self, source: usize, max_hops: usize) -> (Vec<Option<usize>>, Vec<u128>) {
        let mut dist = vec![None; self.len()];
        let mut count = vec![0u128; self.len()];
        dist[source] = Some(0);
        count[source] = 1;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            if du >= max_hops {
                continue;
            }
            for &v in &self.adjacency[u] {
                match dist[v] {
                    None => {
                        dist[v] = Some(du + 1);
                        count[v] = count[u];
                        queue.push_back(v);
                    }
                    Some(dv) if dv == du + 1 => count[v] = count[v].saturating_add(count[u]),
                    Some(_) => {}
                }
            }
        }
        (dist, count)
    }
}

/// Reads a graph JSON file.
pub fn load_graph(path: impl AsRef<Path>) -> Result<ConnectivityGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConnectivityGraph::from_json_str(&text)
}

/// Agent state at a viewpoint. `heading` is the direction the agent faces
/// when leaving the viewpoint (or when arriving, at the final viewpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub viewpoint_id: String,
    pub heading: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDelta {
    pub turn_angle: f64,
    pub vertical_delta: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scan_id: String,
    pub poses: Vec<Pose>,
    pub deltas: Vec<StepDelta>,
}

impl Trajectory {
    /// Builds a trajectory from a viewpoint-id path, checking every hop
    /// against the graph.
    pub fn from_path<S: AsRef<str>>(graph: &ConnectivityGraph, path: &[S]) -> Result<Self> {
        if path.len() < 2 {
            return Err(Error::InvalidInput("a trajectory needs at least two viewpoints".into()));
        }
        let mut positions = Vec::with_capacity(path.len());
        for id in path {
            let vp = graph
                .viewpoint(id.as_ref())
                .ok_or_else(|| Error::Graph(format!("unknown viewpoint \"{}\"", id.as_ref())))?;
            positions.push(vp.position);
        }
        for pair in path.windows(2) {
            if !graph.is_adjacent(pair[0].as_ref(), pair[1].as_ref()) {
                return Err(Error::Graph(format!(
                    "\"{}\" and \"{}\" are not adjacent",
                    pair[0].as_ref(),
                    pair[1].as_ref()
                )));
            }
        }
        let bearings = edge_bearings(path, &positions)?;
        let deltas = deltas_from_bearings(&bearings, &positions);
        let poses = path
            .iter()
            .zip(&positions)
            .enumerate()
            .map(|(i, (id, pos))| Pose {
                viewpoint_id: id.as_ref().to_string(),
                heading: bearings[i.min(bearings.len() - 1)],
                height: pos.z,
            })
            .collect();
        Ok(Self { scan_id: graph.scan_id().to_string(), poses, deltas })
    }

    pub fn steps(&self) -> usize {
        self.deltas.len()
    }

    /// Bearing of the edge taken at step `t`.
    pub fn edge_heading(&self, t: usize) -> f64 {
        self.poses[t].heading
    }

    pub fn path(&self) -> Vec<String> {
        self.poses.iter().map(|p| p.viewpoint_id.clone()).collect()
    }

    pub fn length(&self) -> f64 {
        self.deltas.iter().map(|d| d.distance).sum()
    }
}

fn edge_bearings<S: AsRef<str>>(ids: &[S], positions: &[Vec3]) -> Result<Vec<f64>> {
    positions
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            w[0].bearing_to(&w[1]).ok_or_else(|| Error::DegenerateEdge {
                from: ids[t].as_ref().to_string(),
                to: ids[t + 1].as_ref().to_string(),
            })
        })
        .collect()
}

fn deltas_from_bearings(bearings: &[f64], positions: &[Vec3]) -> Vec<StepDelta> {
    bearings
        .iter()
        .enumerate()
        .map(|(t, &b)| StepDelta {
            // the first action is described relative to its own facing
            turn_angle: if t == 0 { 0.0 } else { normalize_heading(b - bearings[t - 1]) },
            vertical_delta: positions[t + 1].z - positions[t].z,
            distance: positions[t].distance(&positions[t + 1]),
        })
        .collect()
}

/// Per-step turn, height and distance deltas along consecutive positions.
pub fn compute_step_deltas(positions: &[Vec3]) -> Result<Vec<StepDelta>> {
    if positions.len() < 2 {
        return Err(Error::InvalidInput("at least two positions are required".into()));
    }
    let ids: Vec<String> = (0..positions.len()).map(|i| format!("#{i}")).collect();
    let bearings = edge_bearings(&ids, positions)?;
    Ok(deltas_from_bearings(&bearings, positions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOptions {
    pub min_steps: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// `None` enumerates every qualifying endpoint pair.
    pub count: Option<usize>,
    pub min_length: Option<f64>,
    pub max_length: Option<f64>,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { min_steps: 5, max_steps: 7, seed: 0, count: None, min_length: None, max_length: None }
    }
}

/// Samples shortest-path trajectories whose hop count lies in
/// `[min_steps, max_steps]`.
///
/// Qualifying ordered endpoint pairs are shuffled with a ChaCha8 stream seeded
/// from `seed` and consumed without replacement; for each pair one shortest
/// path is drawn uniformly from all shortest paths. With `count == None` every
/// pair is emitted in canonical id order.
pub fn sample_trajectories(graph: &ConnectivityGraph, opts: &SamplingOptions) -> Result<Vec<Trajectory>> {
    if opts.min_steps == 0 || opts.min_steps > opts.max_steps {
        return Err(Error::InvalidInput(format!("invalid step range [{}, {}]", opts.min_steps, opts.max_steps)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut tables = Vec::with_capacity(graph.len());
    let mut pairs = Vec::new();
    for s in 0..graph.len() {
        let (dist, count) = graph.bfs_counts(s, opts.max_steps);
        for (t, d) in dist.iter().enumerate() {
            if matches!(d, Some(d) if *d >= opts.min_steps) {
                pairs.push((s, t));
            }
        }
        tables.push((dist, count));
    }
    if opts.count.is_some() {
        pairs.shuffle(&mut rng);
    }

    let wanted = opts.count.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for (s, t) in pairs {
        if out.len() >= wanted {
            break;
        }
        let (dist, count) = &tables[s];
        let path = draw_shortest_path(graph, dist, count, t, &mut rng);
        let ids: Vec<&str> = path.iter().map(|&i| graph.viewpoints[i].id.as_str()).collect();
        let traj = Trajectory::from_path(graph, &ids)?;
        let len = traj.length();
        if opts.min_length.is_some_and(|m| len < m) || opts.max_length.is_some_and(|m| len > m) {
            continue;
        }
        out.push(traj);
    }
    if out.is_empty() {
        log::warn!("graph {} yields no {}-{} step trajectories", graph.scan_id(), opts.min_steps, opts.max_steps);
    }
    Ok(out)
}

/// Walks back from `target` choosing each predecessor with probability
/// proportional to its shortest-path count, which makes the drawn path
/// uniform over all shortest paths.
fn draw_shortest_path(
    graph: &ConnectivityGraph,
    dist: &[Option<usize>],
    count: &[u128],
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut path = vec![target];
    let mut node = target;
    while let Some(d) = dist[node].filter(|&d| d > 0) {
        let preds: Vec<usize> = graph.adjacency[node].iter().copied().filter(|&p| dist[p] == Some(d - 1)).collect();
        let total: u128 = preds.iter().map(|&p| count[p]).fold(0, u128::saturating_add);
        let mut pick = rng.gen_range(0..total.max(1));
        node = preds[preds.len() - 1];
        for &p in &preds {
            if pick < count[p] {
                node = p;
                break;
            }
            pick -= count[p];
        }
        path.push(node);
    }
    path.reverse();
    path
}
