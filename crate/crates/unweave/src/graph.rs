//! Graph-based cable state: typed nodes on directed paths plus a shared
//! crossing registry.
//!
//! Each cable is a simple directed path from its free endpoint to its
//! fixed endpoint. A crossing between two cables appears as a paired
//! overcrossing/undercrossing node sharing one node id and position, and
//! as an entry in the state-wide crossing registry. Edge labels are
//! derived from the adjacent node kinds and carried alongside the nodes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{segment_intersection, Vec2};

/// What a traced node represents on its cable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Endpoint,
    Regular,
    OverCrossing,
    UnderCrossing,
}

impl NodeKind {
    pub fn is_crossing(self) -> bool {
        matches!(self, NodeKind::OverCrossing | NodeKind::UnderCrossing)
    }
}

/// Edge label derived from adjacent node kinds: `Plus` next to an
/// overcrossing, `Minus` next to an undercrossing, `Plain` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Plus,
    Minus,
    Plain,
}

/// One discretized cable point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub node_id: u32,
    pub kind: NodeKind,
    pub pos_px: Vec2,
    /// Present exactly when `kind` is a crossing; shared by the paired
    /// node on the other cable.
    pub crossing_id: Option<u32>,
}

/// Directed path of nodes for one cable, free endpoint first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableGraph {
    pub cable_id: u32,
    pub color_name: String,
    nodes: Vec<Node>,
    edges: Vec<EdgeLabel>,
}

/// Registry entry: which cable lies on top at a crossing, and where.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub over_cable: u32,
    pub under_cable: u32,
    pub pos_px: Vec2,
}

/// The full scene state: one graph per cable plus the crossing registry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableState {
    pub graphs: Vec<CableGraph>,
    pub crossings: BTreeMap<u32, Crossing>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("cable {cable_id}: path needs at least two nodes, got {got}")]
    TooFewNodes { cable_id: u32, got: usize },
    #[error("cable {cable_id}: node {index} breaks the endpoint-only-at-ends rule")]
    MisplacedEndpoint { cable_id: u32, index: usize },
    #[error("cable {cable_id}: edge {index} would connect an overcrossing to an undercrossing")]
    MixedCrossingEdge { cable_id: u32, index: usize },
    #[error("cable {cable_id}: node {index} has inconsistent crossing id presence")]
    CrossingIdMismatch { cable_id: u32, index: usize },
    #[error("unpaired crossing {crossing_id}")]
    UnpairedCrossing { crossing_id: u32 },
    #[error("crossing {crossing_id} pairs nodes at different positions")]
    CrossingPositionMismatch { crossing_id: u32 },
    #[error("crossing {crossing_id} disagrees with the registry")]
    RegistryMismatch { crossing_id: u32 },
    #[error("duplicate node id {node_id}")]
    DuplicateNodeId { node_id: u32 },
    #[error("duplicate cable id {cable_id}")]
    DuplicateCableId { cable_id: u32 },
    #[error("crossings {a} and {b} are {dist:.1}px apart, closer than the {min:.1}px minimum")]
    CrossingsTooClose { a: u32, b: u32, dist: f64, min: f64 },
    #[error("degenerate overlap between cables {a} and {b}")]
    DegenerateOverlap { a: usize, b: usize },
    #[error("malformed state document: {0}")]
    Malformed(String),
}

impl CableGraph {
    /// Build a graph from an ordered node list, deriving edge labels.
    pub fn from_nodes(
        cable_id: u32,
        color_name: impl Into<String>,
        nodes: Vec<Node>,
    ) -> Result<Self, GraphError> {
        if nodes.len() < 2 {
            return Err(GraphError::TooFewNodes {
                cable_id,
                got: nodes.len(),
            });
        }
        let edges = derive_edges(cable_id, &nodes)?;
        Ok(CableGraph {
            cable_id,
            color_name: color_name.into(),
            nodes,
            edges,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeLabel] {
        &self.edges
    }

    pub fn free_endpoint(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn fixed_endpoint(&self) -> &Node {
        self.nodes.last().unwrap()
    }

    pub fn node_by_id(&self, node_id: u32) -> Option<(usize, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.node_id == node_id)
    }

    /// Node positions as a polyline, free endpoint first.
    pub fn polyline(&self) -> Vec<Vec2> {
        self.nodes.iter().map(|n| n.pos_px).collect()
    }

    fn check(&self) -> Result<(), GraphError> {
        let cable_id = self.cable_id;
        if self.nodes.len() < 2 {
            return Err(GraphError::TooFewNodes {
                cable_id,
                got: self.nodes.len(),
            });
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let at_end = i == 0 || i == self.nodes.len() - 1;
            if at_end != (n.kind == NodeKind::Endpoint) {
                return Err(GraphError::MisplacedEndpoint { cable_id, index: i });
            }
            if n.kind.is_crossing() != n.crossing_id.is_some() {
                return Err(GraphError::CrossingIdMismatch { cable_id, index: i });
            }
        }
        let expect = derive_edges(cable_id, &self.nodes)?;
        if expect != self.edges {
            return Err(GraphError::MixedCrossingEdge { cable_id, index: 0 });
        }
        Ok(())
    }
}

fn derive_edges(cable_id: u32, nodes: &[Node]) -> Result<Vec<EdgeLabel>, GraphError> {
    nodes
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let over = w[0].kind == NodeKind::OverCrossing || w[1].kind == NodeKind::OverCrossing;
            let under =
                w[0].kind == NodeKind::UnderCrossing || w[1].kind == NodeKind::UnderCrossing;
            match (over, under) {
                (true, true) => Err(GraphError::MixedCrossingEdge { cable_id, index: i }),
                (true, false) => Ok(EdgeLabel::Plus),
                (false, true) => Ok(EdgeLabel::Minus),
                (false, false) => Ok(EdgeLabel::Plain),
            }
        })
        .collect()
}

impl CableState {
    pub fn graph(&self, cable_id: u32) -> Option<&CableGraph> {
        self.graphs.iter().find(|g| g.cable_id == cable_id)
    }

    /// Number of registered crossings in the state.
    pub fn count_crossings(&self) -> usize {
        self.crossings.len()
    }

    /// Structural invariants: path shape, endpoint placement, edge-label
    /// consistency, crossing pairing and registry agreement, id
    /// uniqueness. Spacing between crossings is checked separately with
    /// [`CableState::validate_crossing_spacing`] because the minimum
    /// distance depends on the perception window width.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut cable_ids = std::collections::BTreeSet::new();
        for g in &self.graphs {
            if !cable_ids.insert(g.cable_id) {
                return Err(GraphError::DuplicateCableId {
                    cable_id: g.cable_id,
                });
            }
            g.check()?;
        }
        // Pairing: each crossing id on exactly two graphs, one over and
        // one under, same id, same position, matching the registry.
        let mut seen: BTreeMap<u32, Vec<(u32, &Node)>> = BTreeMap::new();
        let mut plain_ids = std::collections::BTreeSet::new();
        for g in &self.graphs {
            for n in g.nodes() {
                match n.crossing_id {
                    Some(cid) => seen.entry(cid).or_default().push((g.cable_id, n)),
                    None => {
                        if !plain_ids.insert(n.node_id) {
                            return Err(GraphError::DuplicateNodeId { node_id: n.node_id });
                        }
                    }
                }
            }
        }
        if seen.len() != self.crossings.len() {
            let cid = seen
                .keys()
                .find(|c| !self.crossings.contains_key(c))
                .copied()
                .or_else(|| self.crossings.keys().find(|c| !seen.contains_key(c)).copied())
                .unwrap_or(0);
            return Err(GraphError::UnpairedCrossing { crossing_id: cid });
        }
        for (cid, members) in &seen {
            let reg = self
                .crossings
                .get(cid)
                .ok_or(GraphError::UnpairedCrossing { crossing_id: *cid })?;
            if members.len() != 2 {
                return Err(GraphError::UnpairedCrossing { crossing_id: *cid });
            }
            let over = members
                .iter()
                .find(|(_, n)| n.kind == NodeKind::OverCrossing);
            let under = members
                .iter()
                .find(|(_, n)| n.kind == NodeKind::UnderCrossing);
            let (over, under) = match (over, under) {
                (Some(o), Some(u)) => (o, u),
                _ => return Err(GraphError::UnpairedCrossing { crossing_id: *cid }),
            };
            if over.1.node_id != under.1.node_id {
                return Err(GraphError::RegistryMismatch { crossing_id: *cid });
            }
            if over.1.pos_px.dist(under.1.pos_px) > 1e-6 {
                return Err(GraphError::CrossingPositionMismatch { crossing_id: *cid });
            }
            if reg.over_cable != over.0 || reg.under_cable != under.0 {
                return Err(GraphError::RegistryMismatch { crossing_id: *cid });
            }
        }
        Ok(())
    }

    /// All registered crossings must be at least `min_px` apart.
    pub fn validate_crossing_spacing(&self, min_px: f64) -> Result<(), GraphError> {
        let entries: Vec<(&u32, &Crossing)> = self.crossings.iter().collect();
        for (i, (ida, a)) in entries.iter().enumerate() {
            for (idb, b) in entries.iter().skip(i + 1) {
                let dist = a.pos_px.dist(b.pos_px);
                if dist < min_px {
                    return Err(GraphError::CrossingsTooClose {
                        a: **ida,
                        b: **idb,
                        dist,
                        min: min_px,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Number of crossings in a state; the planner's termination test.
pub fn count_crossings(state: &CableState) -> usize {
    state.count_crossings()
}

/// A transversal intersection between two polylines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairCrossing {
    /// Indices of the two polylines, `a < b`.
    pub a: usize,
    pub b: usize,
    pub pos: Vec2,
    /// Segment index on polyline `a` / `b` where the hit was found.
    pub seg_a: usize,
    pub seg_b: usize,
}

/// All transversal intersection points between polylines of distinct
/// cables, deduplicated within `merge_radius` per cable pair.
/// Self-intersections are not reported. Collinear overlaps are errors.
pub fn geometric_crossings(
    polylines: &[Vec<Vec2>],
    merge_radius: f64,
) -> Result<Vec<PairCrossing>, GraphError> {
    let mut out: Vec<PairCrossing> = Vec::new();
    for a in 0..polylines.len() {
        for b in (a + 1)..polylines.len() {
            let mut pair_hits: Vec<PairCrossing> = Vec::new();
            for (i, sa) in polylines[a].windows(2).enumerate() {
                for (j, sb) in polylines[b].windows(2).enumerate() {
                    match segment_intersection(sa[0], sa[1], sb[0], sb[1]) {
                        Ok(Some(p)) => {
                            let dup = pair_hits
                                .iter()
                                .any(|h| h.pos.dist(p) <= merge_radius.max(0.0));
                            if !dup {
                                pair_hits.push(PairCrossing {
                                    a,
                                    b,
                                    pos: p,
                                    seg_a: i,
                                    seg_b: j,
                                });
                            }
                        }
                        Ok(None) => {}
                        Err(()) => return Err(GraphError::DegenerateOverlap { a, b }),
                    }
                }
            }
            out.extend(pair_hits);
        }
    }
    Ok(out)
}

/// Node blueprint used by state assembly: position, kind and, for
/// crossings, a caller-chosen key shared by the two paired nodes.
#[derive(Clone, Copy, Debug)]
pub struct ProtoNode {
    pub pos: Vec2,
    pub kind: NodeKind,
    pub crossing_key: Option<usize>,
}

impl ProtoNode {
    pub fn plain(pos: Vec2, kind: NodeKind) -> Self {
        ProtoNode {
            pos,
            kind,
            crossing_key: None,
        }
    }
}

/// Assemble a state from per-cable proto node lists.
///
/// Node ids are assigned densely from 0 in cable order along each path;
/// the paired nodes of a crossing share one node id. Crossing ids come
/// from a separate counter in order of first appearance.
pub fn assemble_state(
    cables: Vec<(u32, String, Vec<ProtoNode>)>,
) -> Result<CableState, GraphError> {
    let mut next_node_id: u32 = 0;
    let mut next_crossing_id: u32 = 0;
    // crossing_key -> (crossing_id, node_id, first cable, first kind, pos)
    let mut pending: BTreeMap<usize, (u32, u32, u32, NodeKind, Vec2)> = BTreeMap::new();
    let mut graphs = Vec::new();
    let mut registry = BTreeMap::new();

    for (cable_id, color, protos) in cables {
        let mut nodes = Vec::with_capacity(protos.len());
        for proto in protos {
            let node = match proto.crossing_key {
                None => {
                    let id = next_node_id;
                    next_node_id += 1;
                    Node {
                        node_id: id,
                        kind: proto.kind,
                        pos_px: proto.pos,
                        crossing_id: None,
                    }
                }
                Some(key) => match pending.remove(&key) {
                    None => {
                        let cid = next_crossing_id;
                        next_crossing_id += 1;
                        let id = next_node_id;
                        next_node_id += 1;
                        pending.insert(key, (cid, id, cable_id, proto.kind, proto.pos));
                        Node {
                            node_id: id,
                            kind: proto.kind,
                            pos_px: proto.pos,
                            crossing_id: Some(cid),
                        }
                    }
                    Some((cid, id, other_cable, other_kind, pos)) => {
                        let (over, under) = match (other_kind, proto.kind) {
                            (NodeKind::OverCrossing, NodeKind::UnderCrossing) => {
                                (other_cable, cable_id)
                            }
                            (NodeKind::UnderCrossing, NodeKind::OverCrossing) => {
                                (cable_id, other_cable)
                            }
                            _ => {
                                return Err(GraphError::UnpairedCrossing { crossing_id: cid });
                            }
                        };
                        registry.insert(
                            cid,
                            Crossing {
                                over_cable: over,
                                under_cable: under,
                                pos_px: pos,
                            },
                        );
                        Node {
                            node_id: id,
                            kind: proto.kind,
                            pos_px: pos,
                            crossing_id: Some(cid),
                        }
                    }
                },
            };
            nodes.push(node);
        }
        graphs.push(CableGraph::from_nodes(cable_id, color, nodes)?);
    }
    if let Some((&_key, &(cid, ..))) = pending.iter().next() {
        return Err(GraphError::UnpairedCrossing { crossing_id: cid });
    }
    let state = CableState {
        graphs,
        crossings: registry,
    };
    state.validate()?;
    Ok(state)
}

// ---------------------------------------------------------------------
// State document (de)serialization
// ---------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StateDoc {
    cables: Vec<CableDoc>,
    crossings: Vec<CrossingDoc>,
}

#[derive(Serialize, Deserialize)]
struct CableDoc {
    cable_id: u32,
    color: String,
    nodes: Vec<NodeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: u32,
    kind: NodeKind,
    x: f64,
    y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossing_id: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct CrossingDoc {
    id: u32,
    over: u32,
    under: u32,
    x: f64,
    y: f64,
}

/// Serialize a state to the documented JSON layout.
pub fn serialize_state(state: &CableState) -> String {
    let doc = StateDoc {
        cables: state
            .graphs
            .iter()
            .map(|g| CableDoc {
                cable_id: g.cable_id,
                color: g.color_name.clone(),
                nodes: g
                    .nodes()
                    .iter()
                    .map(|n| NodeDoc {
                        id: n.node_id,
                        kind: n.kind,
                        x: n.pos_px.x,
                        y: n.pos_px.y,
                        crossing_id: n.crossing_id,
                    })
                    .collect(),
            })
            .collect(),
        crossings: state
            .crossings
            .iter()
            .map(|(id, c)| CrossingDoc {
                id: *id,
                over: c.over_cable,
                under: c.under_cable,
                x: c.pos_px.x,
                y: c.pos_px.y,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("state serialization cannot fail")
}

/// Parse a state document and re-validate every structural invariant.
pub fn deserialize_state(doc: &str) -> Result<CableState, GraphError> {
    let doc: StateDoc =
        serde_json::from_str(doc).map_err(|e| GraphError::Malformed(e.to_string()))?;
    let graphs = doc
        .cables
        .into_iter()
        .map(|c| {
            let nodes = c
                .nodes
                .into_iter()
                .map(|n| Node {
                    node_id: n.id,
                    kind: n.kind,
                    pos_px: Vec2::new(n.x, n.y),
                    crossing_id: n.crossing_id,
                })
                .collect();
            CableGraph::from_nodes(c.cable_id, c.color, nodes)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let crossings = doc
        .crossings
        .into_iter()
        .map(|c| {
            (
                c.id,
                Crossing {
                    over_cable: c.over,
                    under_cable: c.under,
                    pos_px: Vec2::new(c.x, c.y),
                },
            )
        })
        .collect();
    let state = CableState { graphs, crossings };
    state.validate()?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: u32, kind: NodeKind, x: f64, y: f64, cid: Option<u32>) -> Node {
        Node {
            node_id: id,
            kind,
            pos_px: Vec2::new(x, y),
            crossing_id: cid,
        }
    }

    /// Two straight cables crossing once, cable 0 on top.
    fn x_state() -> CableState {
        use NodeKind::*;
        let a = CableGraph::from_nodes(
            0,
            "red",
            vec![
                node(0, Endpoint, 0.0, 100.0, None),
                node(1, Regular, 50.0, 100.0, None),
                node(2, OverCrossing, 100.0, 100.0, Some(0)),
                node(3, Regular, 150.0, 100.0, None),
                node(4, Endpoint, 200.0, 100.0, None),
            ],
        )
        .unwrap();
        let b = CableGraph::from_nodes(
            1,
            "green",
            vec![
                node(5, Endpoint, 100.0, 0.0, None),
                node(6, Regular, 100.0, 50.0, None),
                node(2, UnderCrossing, 100.0, 100.0, Some(0)),
                node(7, Regular, 100.0, 150.0, None),
                node(8, Endpoint, 100.0, 200.0, None),
            ],
        )
        .unwrap();
        let mut crossings = BTreeMap::new();
        crossings.insert(
            0,
            Crossing {
                over_cable: 0,
                under_cable: 1,
                pos_px: Vec2::new(100.0, 100.0),
            },
        );
        CableState {
            graphs: vec![a, b],
            crossings,
        }
    }

    #[test]
    fn x_state_is_valid_and_counts_one() {
        let s = x_state();
        s.validate().unwrap();
        assert_eq!(count_crossings(&s), 1);
    }

    #[test]
    fn disjoint_straight_cables_count_zero() {
        use NodeKind::*;
        let mk = |cable_id, y: f64, base: u32| {
            CableGraph::from_nodes(
                cable_id,
                "c",
                vec![
                    node(base, Endpoint, 0.0, y, None),
                    node(base + 1, Regular, 100.0, y, None),
                    node(base + 2, Endpoint, 200.0, y, None),
                ],
            )
            .unwrap()
        };
        let s = CableState {
            graphs: vec![mk(0, 10.0, 0), mk(1, 50.0, 10)],
            crossings: BTreeMap::new(),
        };
        s.validate().unwrap();
        assert_eq!(count_crossings(&s), 0);
    }

    #[test]
    fn edge_labels_follow_node_kinds() {
        let s = x_state();
        let a = s.graph(0).unwrap();
        assert_eq!(
            a.edges(),
            &[
                EdgeLabel::Plain,
                EdgeLabel::Plus,
                EdgeLabel::Plus,
                EdgeLabel::Plain
            ]
        );
        let b = s.graph(1).unwrap();
        assert_eq!(
            b.edges(),
            &[
                EdgeLabel::Plain,
                EdgeLabel::Minus,
                EdgeLabel::Minus,
                EdgeLabel::Plain
            ]
        );
    }

    #[test]
    fn adjacent_over_under_is_rejected() {
        use NodeKind::*;
        let r = CableGraph::from_nodes(
            0,
            "red",
            vec![
                node(0, Endpoint, 0.0, 0.0, None),
                node(1, OverCrossing, 10.0, 0.0, Some(0)),
                node(2, UnderCrossing, 20.0, 0.0, Some(1)),
                node(3, Endpoint, 30.0, 0.0, None),
            ],
        );
        assert!(matches!(r, Err(GraphError::MixedCrossingEdge { .. })));
    }

    #[test]
    fn spacing_check_flags_close_crossings() {
        let mut s = x_state();
        // Insert a second registry entry close to the first.
        s.crossings.insert(
            1,
            Crossing {
                over_cable: 0,
                under_cable: 1,
                pos_px: Vec2::new(110.0, 100.0),
            },
        );
        assert!(matches!(
            s.validate_crossing_spacing(49.5),
            Err(GraphError::CrossingsTooClose { .. })
        ));
    }

    #[test]
    fn serialize_round_trips_bit_exact() {
        let s = x_state();
        let doc = serialize_state(&s);
        let back = deserialize_state(&doc).unwrap();
        assert_eq!(s, back);
        // And a second serialization is byte-identical.
        assert_eq!(doc, serialize_state(&back));
    }

    #[test]
    fn empty_state_round_trips() {
        let s = CableState {
            graphs: vec![],
            crossings: BTreeMap::new(),
        };
        let back = deserialize_state(&serialize_state(&s)).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unpaired_crossing_fails_deserialization() {
        let mut s = x_state();
        // Retype the undercrossing to regular: crossing 0 loses its pair.
        let g = &mut s.graphs[1];
        let mut nodes = g.nodes().to_vec();
        nodes[2].kind = NodeKind::Regular;
        nodes[2].crossing_id = None;
        nodes[2].node_id = 9;
        *g = CableGraph::from_nodes(1, "green", nodes).unwrap();
        let doc = serialize_state(&s);
        let err = deserialize_state(&doc).unwrap_err();
        assert!(
            matches!(err, GraphError::UnpairedCrossing { crossing_id: 0 }),
            "{err}"
        );
    }

    #[test]
    fn assemble_pairs_crossings_and_numbers_densely() {
        use NodeKind::*;
        let a = vec![
            ProtoNode::plain(Vec2::new(0.0, 100.0), Endpoint),
            ProtoNode {
                pos: Vec2::new(100.0, 100.0),
                kind: OverCrossing,
                crossing_key: Some(7),
            },
            ProtoNode::plain(Vec2::new(200.0, 100.0), Endpoint),
        ];
        let b = vec![
            ProtoNode::plain(Vec2::new(100.0, 0.0), Endpoint),
            ProtoNode {
                pos: Vec2::new(100.0, 100.0),
                kind: UnderCrossing,
                crossing_key: Some(7),
            },
            ProtoNode::plain(Vec2::new(100.0, 200.0), Endpoint),
        ];
        let s = assemble_state(vec![
            (0, "red".into(), a),
            (1, "green".into(), b),
        ])
        .unwrap();
        assert_eq!(s.count_crossings(), 1);
        let reg = s.crossings.get(&0).unwrap();
        assert_eq!((reg.over_cable, reg.under_cable), (0, 1));
        // Shared node id across the pair.
        let over = &s.graph(0).unwrap().nodes()[1];
        let under = &s.graph(1).unwrap().nodes()[1];
        assert_eq!(over.node_id, under.node_id);
        assert_eq!(over.pos_px, under.pos_px);
    }

    #[test]
    fn geometric_crossings_finds_x() {
        let lines = vec![
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 10.0)],
            vec![Vec2::new(0.0, 10.0), Vec2::new(10.0, 0.0)],
        ];
        let hits = geometric_crossings(&lines, 0.0).unwrap();
        assert_eq!(hits.len(), 1);
        assert!(hits[0].pos.dist(Vec2::new(5.0, 5.0)) < 1e-12);
    }

    #[test]
    fn geometric_crossings_parallel_empty() {
        let lines = vec![
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)],
            vec![Vec2::new(0.0, 5.0), Vec2::new(10.0, 5.0)],
        ];
        assert!(geometric_crossings(&lines, 0.0).unwrap().is_empty());
    }

    #[test]
    fn geometric_crossings_reports_degenerate_overlap() {
        let lines = vec![
            vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)],
            vec![Vec2::new(5.0, 0.0), Vec2::new(15.0, 0.0)],
        ];
        assert!(matches!(
            geometric_crossings(&lines, 0.0),
            Err(GraphError::DegenerateOverlap { .. })
        ));
    }
}
