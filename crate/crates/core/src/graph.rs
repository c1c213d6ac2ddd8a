// SPDX-License-Identifier: Apache-2.0

//! Undirected simple graphs, their JSON Lines representation and basic queries.
//!
//! Edges are stored canonically as `(i, j)` with `i < j`, sorted
//! lexicographically. Every per-edge output in the crate follows this order.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::parse_jsonl;

/// Role annotations used by the synthetic barbell task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    pub source: usize,
    pub target: usize,
    #[serde(default)]
    pub dummy_sources: Vec<usize>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Wire form of a graph, one per JSON Lines record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub graph_id: String,
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_features: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Roles>,
    #[serde(default, rename = "y", skip_serializing_if = "Option::is_none")]
    pub target_value: Option<Vec<f64>>,
    /// Keys this crate does not interpret; kept so files round-trip.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

/// Canonical node pair of an undirected edge, `lo < hi`.
pub type Edge = (usize, usize);

/// An edge of a named graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub graph_id: String,
    pub endpoints: Edge,
}

impl EdgeRef {
    pub fn new(graph_id: impl Into<String>, i: usize, j: usize) -> Self {
        EdgeRef {
            graph_id: graph_id.into(),
            endpoints: canonical(i, j),
        }
    }
}

pub fn canonical(i: usize, j: usize) -> Edge {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct Graph {
    graph_id: String,
    num_nodes: usize,
    edges: Vec<Edge>,
    node_features: Option<Vec<Vec<f64>>>,
    edge_features: Option<Vec<i64>>,
    roles: Option<Roles>,
    target_value: Option<Vec<f64>>,
    extra: BTreeMap<String, Value>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Build a graph from an edge list in any orientation and order.
    pub fn new(graph_id: impl Into<String>, num_nodes: usize, edges: &[Edge]) -> Result<Self> {
        Graph::from_record(GraphRecord {
            graph_id: graph_id.into(),
            num_nodes,
            edges: edges.iter().map(|&(i, j)| [i, j]).collect(),
            node_features: None,
            edge_features: None,
            roles: None,
            target_value: None,
            extra: BTreeMap::new(),
        })
    }

    pub fn from_record(record: GraphRecord) -> Result<Self> {
        let GraphRecord {
            graph_id,
            num_nodes,
            edges,
            node_features,
            edge_features,
            roles,
            target_value,
            extra,
        } = record;

        if let Some(features) = &edge_features {
            if features.len() != edges.len() {
                return Err(Error::invalid_graph(
                    &graph_id,
                    format!(
                        "edge_features has {} entries for {} edges",
                        features.len(),
                        edges.len()
                    ),
                ));
            }
        }

        let mut keyed: Vec<(Edge, Option<i64>)> = Vec::with_capacity(edges.len());
        for (idx, &[a, b]) in edges.iter().enumerate() {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::invalid_graph(
                    &graph_id,
                    format!("edge [{a}, {b}] references a node >= num_nodes ({num_nodes})"),
                ));
            }
            if a == b {
                return Err(Error::invalid_graph(
                    &graph_id,
                    format!("self-loop [{a}, {b}]"),
                ));
            }
            keyed.push((canonical(a, b), edge_features.as_ref().map(|f| f[idx])));
        }
        keyed.sort_by_key(|&(e, _)| e);
        if let Some(w) = keyed.windows(2).find(|w| w[0].0 == w[1].0) {
            let (a, b) = w[0].0;
            return Err(Error::invalid_graph(
                &graph_id,
                format!("duplicate edge [{a}, {b}]"),
            ));
        }

        if let Some(rows) = &node_features {
            if rows.len() != num_nodes {
                return Err(Error::invalid_graph(
                    &graph_id,
                    format!(
                        "node_features has {} rows for {num_nodes} nodes",
                        rows.len()
                    ),
                ));
            }
            if let Some(first) = rows.first() {
                if rows.iter().any(|r| r.len() != first.len()) {
                    return Err(Error::invalid_graph(&graph_id, "node_features is ragged"));
                }
            }
        }
        if let Some(r) = &roles {
            let ids = [r.source, r.target]
                .into_iter()
                .chain(r.dummy_sources.iter().copied());
            for node in ids {
                if node >= num_nodes {
                    return Err(Error::invalid_graph(
                        &graph_id,
                        format!("role node {node} >= num_nodes ({num_nodes})"),
                    ));
                }
            }
        }

        let edges: Vec<Edge> = keyed.iter().map(|&(e, _)| e).collect();
        let edge_features = edge_features.map(|_| keyed.iter().map(|&(_, f)| f.unwrap()).collect());
        let mut adjacency = vec![Vec::new(); num_nodes];
        for &(i, j) in &edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }

        Ok(Graph {
            graph_id,
            num_nodes,
            edges,
            node_features,
            edge_features,
            roles,
            target_value,
            extra,
            adjacency,
        })
    }

    pub fn to_record(&self) -> GraphRecord {
        GraphRecord {
            graph_id: self.graph_id.clone(),
            num_nodes: self.num_nodes,
            edges: self.edges.iter().map(|&(i, j)| [i, j]).collect(),
            node_features: self.node_features.clone(),
            edge_features: self.edge_features.clone(),
            roles: self.roles.clone(),
            target_value: self.target_value.clone(),
            extra: self.extra.clone(),
        }
    }

    pub fn id(&self) -> &str {
        &self.graph_id
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_features(&self) -> Option<&[Vec<f64>]> {
        self.node_features.as_deref()
    }

    /// Integer type codes aligned with [`Graph::edges`].
    pub fn edge_features(&self) -> Option<&[i64]> {
        self.edge_features.as_deref()
    }

    pub fn roles(&self) -> Option<&Roles> {
        self.roles.as_ref()
    }

    pub fn target_value(&self) -> Option<&[f64]> {
        self.target_value.as_deref()
    }

    /// Sorted neighbour list. Panics if `i` is out of range.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn check_node(&self, i: usize) -> Result<()> {
        if i < self.num_nodes {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: i,
                num_nodes: self.num_nodes,
            })
        }
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.check_node(i)?;
        Ok(self.adjacency[i].len())
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.num_nodes && self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Position of the edge in canonical order.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(i, j)).ok()
    }

    /// Breadth-first distances from `source`; `None` marks unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(source)?;
        let mut dist = vec![None; self.num_nodes];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Shortest-path length in hops, `None` when `j` is unreachable from `i`.
    pub fn hop_distance(&self, i: usize, j: usize) -> Result<Option<usize>> {
        self.check_node(j)?;
        if i == j {
            self.check_node(i)?;
            return Ok(Some(0));
        }
        Ok(self.bfs_distances(i)?[j])
    }

    /// Connected-component label per node, labels assigned in order of lowest node id.
    pub fn component_labels(&self) -> Vec<usize> {
        component_labels(self.num_nodes, &self.edges)
    }

    /// Copy of this graph with the given edges (and their edge features) removed.
    /// Edges not present are ignored.
    pub fn without_edges(&self, remove: &[Edge]) -> Graph {
        let mut drop: Vec<Edge> = remove.iter().map(|&(i, j)| canonical(i, j)).collect();
        drop.sort_unstable();
        let mut record = self.to_record();
        let keep: Vec<bool> = self
            .edges
            .iter()
            .map(|e| drop.binary_search(e).is_err())
            .collect();
        record.edges = self
            .edges
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(&(i, j), _)| [i, j])
            .collect();
        record.edge_features = self.edge_features.as_ref().map(|f| {
            f.iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .collect()
        });
        Graph::from_record(record).expect("removing edges preserves validity")
    }

    pub fn with_id(mut self, graph_id: impl Into<String>) -> Graph {
        self.graph_id = graph_id.into();
        self
    }

    /// Attach edge type codes aligned with the canonical edge order.
    pub fn with_edge_features(mut self, features: Vec<i64>) -> Result<Graph> {
        if features.len() != self.edges.len() {
            return Err(Error::invalid_graph(
                &self.graph_id,
                "edge_features length differs from edge count",
            ));
        }
        self.edge_features = Some(features);
        Ok(self)
    }

    pub fn with_node_features(mut self, features: Vec<Vec<f64>>) -> Result<Graph> {
        let mut record = self.to_record();
        record.node_features = Some(features);
        self = Graph::from_record(record)?;
        Ok(self)
    }

    pub fn with_roles(mut self, roles: Roles) -> Result<Graph> {
        let mut record = self.to_record();
        record.roles = Some(roles);
        self = Graph::from_record(record)?;
        Ok(self)
    }

    pub fn with_target_value(mut self, y: Vec<f64>) -> Graph {
        self.target_value = Some(y);
        self
    }
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(record: GraphRecord) -> Result<Self> {
        Graph::from_record(record)
    }
}

impl From<Graph> for GraphRecord {
    fn from(g: Graph) -> Self {
        g.to_record()
    }
}

pub(crate) fn component_labels(num_nodes: usize, edges: &[Edge]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..num_nodes).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri.max(rj)] = ri.min(rj);
        }
    }
    let mut label_of_root = HashMap::new();
    (0..num_nodes)
        .map(|x| {
            let root = find(&mut parent, x);
            let next = label_of_root.len();
            *label_of_root.entry(root).or_insert(next)
        })
        .collect()
}

/// Parse a graph file from any reader; validation errors name the offending line.
pub fn parse_graphs(reader: impl BufRead) -> Result<Vec<Graph>> {
    let records: Vec<GraphRecord> = parse_jsonl(reader)?;
    records
        .into_iter()
        .enumerate()
        .map(|(idx, r)| {
            Graph::from_record(r).map_err(|e| match e {
                Error::InvalidGraph { graph_id, reason } => Error::InvalidGraph {
                    graph_id,
                    reason: format!("record {}: {reason}", idx + 1),
                },
                other => other,
            })
        })
        .collect()
}

pub fn load_graphs(path: &Path) -> Result<Vec<Graph>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_graphs(BufReader::new(file))
}

/// Graphs indexed by id.
#[derive(Debug, Clone, Default)]
pub struct GraphSet {
    graphs: Vec<Graph>,
    index: HashMap<String, usize>,
}

impl GraphSet {
    pub fn new(graphs: Vec<Graph>) -> Result<Self> {
        let mut index = HashMap::with_capacity(graphs.len());
        for (pos, g) in graphs.iter().enumerate() {
            if index.insert(g.id().to_owned(), pos).is_some() {
                return Err(Error::invalid_graph(g.id(), "duplicate graph_id"));
            }
        }
        Ok(GraphSet { graphs, index })
    }

    pub fn get(&self, graph_id: &str) -> Result<&Graph> {
        self.index
            .get(graph_id)
            .map(|&pos| &self.graphs[pos])
            .ok_or_else(|| Error::UnknownGraph(graph_id.to_owned()))
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }
}
