// SPDX-License-Identifier: Apache-2.0

//! Barbell benchmark generator for the source-to-target signal reconstruction task.
//!
//! Node layout for clique size `k` and `m` dummy cliques:
//!
//! ```text
//! source clique   0 .. k        source = 0, bridge node = k-1
//! target clique   k .. 2k       bridge node = k, target = k+1
//! dummy clique d  2k+dk .. 2k+(d+1)k   dummy source = first, bridge node = last
//! ```
//!
//! The bridge joins `k-1` and `k`, so source and target are three hops apart.
//! Edge type codes: 0 intra-clique, 1 source to its bridge node, 2 target-side
//! bridge node to target, 3 bridge, 4 dummy bridge.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph, Roles};

pub const INTRA_CLIQUE: i64 = 0;
pub const SOURCE_TO_BRIDGE_NODE: i64 = 1;
pub const BRIDGE_NODE_TO_TARGET: i64 = 2;
pub const BRIDGE: i64 = 3;
pub const DUMMY_BRIDGE: i64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarbellVariant {
    Standard,
    Modified,
    Extended,
}

impl BarbellVariant {
    pub fn num_dummy_cliques(self) -> usize {
        match self {
            BarbellVariant::Standard => 0,
            BarbellVariant::Modified => 1,
            BarbellVariant::Extended => 3,
        }
    }
}

impl fmt::Display for BarbellVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BarbellVariant::Standard => "standard",
            BarbellVariant::Modified => "modified",
            BarbellVariant::Extended => "extended",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    Topological,
    /// Edge type codes shuffled independently for every graph.
    Permuted,
}

/// Where dummy bridges land in the target clique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DummyAttachment {
    /// Every dummy bridge ends on the target node.
    #[default]
    TargetNode,
    /// Dummy bridge `d` ends on the `d`-th target-clique node other than the
    /// bridge node (the target node first).
    CliqueNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarbellSpec {
    pub clique_size: usize,
    pub num_dummy_cliques: usize,
    pub feature_dim: usize,
    pub num_graphs: usize,
    pub feature_mode: FeatureMode,
    pub seed: u64,
    pub split: Split,
    pub dummy_attachment: DummyAttachment,
}

impl Default for BarbellSpec {
    fn default() -> Self {
        BarbellSpec {
            clique_size: 4,
            num_dummy_cliques: 0,
            feature_dim: 16,
            num_graphs: 256,
            feature_mode: FeatureMode::Topological,
            seed: 0,
            split: Split::Train,
            dummy_attachment: DummyAttachment::TargetNode,
        }
    }
}

impl BarbellSpec {
    pub fn for_variant(variant: BarbellVariant) -> Self {
        BarbellSpec {
            num_dummy_cliques: variant.num_dummy_cliques(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.clique_size;
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if k < 3 {
            return fail(format!("clique_size must be >= 3, got {k}"));
        }
        if self.feature_dim == 0 {
            return fail("feature_dim must be >= 1".into());
        }
        if self.num_dummy_cliques > self.feature_dim {
            return fail(format!(
                "{} dummy cliques need distinct one-hot signals but feature_dim is {}",
                self.num_dummy_cliques, self.feature_dim
            ));
        }
        if self.dummy_attachment == DummyAttachment::CliqueNode && self.num_dummy_cliques > k - 1 {
            return fail(format!(
                "{} dummy cliques cannot attach to distinct nodes of a {k}-clique",
                self.num_dummy_cliques
            ));
        }
        Ok(())
    }

    fn variant_name(&self) -> String {
        match self.num_dummy_cliques {
            0 => "standard".into(),
            1 => "modified".into(),
            3 => "extended".into(),
            m => format!("dummies{m}"),
        }
    }
}

/// Node roles and topology shared by every graph of a spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarbellLayout {
    pub num_nodes: usize,
    pub source: usize,
    pub source_bridge_node: usize,
    pub target_bridge_node: usize,
    pub target: usize,
    pub dummy_sources: Vec<usize>,
    /// Canonical edges with their topological type codes, in canonical order.
    pub typed_edges: Vec<(Edge, i64)>,
}

pub fn barbell_layout(spec: &BarbellSpec) -> Result<BarbellLayout> {
    spec.validate()?;
    let k = spec.clique_size;
    let m = spec.num_dummy_cliques;
    let (source, source_bridge_node) = (0, k - 1);
    let (target_bridge_node, target) = (k, k + 1);

    let mut typed: Vec<(Edge, i64)> = Vec::new();
    let mut clique = |base: usize| {
        for a in base..base + k {
            for b in a + 1..base + k {
                typed.push(((a, b), INTRA_CLIQUE));
            }
        }
    };
    clique(0);
    clique(k);
    let mut dummy_sources = Vec::with_capacity(m);
    for d in 0..m {
        let base = 2 * k + d * k;
        clique(base);
        dummy_sources.push(base);
    }
    for (edge, code) in typed.iter_mut() {
        if *edge == canonical(source, source_bridge_node) {
            *code = SOURCE_TO_BRIDGE_NODE;
        } else if *edge == canonical(target_bridge_node, target) {
            *code = BRIDGE_NODE_TO_TARGET;
        }
    }
    typed.push(((source_bridge_node, target_bridge_node), BRIDGE));
    for d in 0..m {
        let dummy_bridge_node = 2 * k + d * k + k - 1;
        let anchor = match spec.dummy_attachment {
            DummyAttachment::TargetNode => target,
            DummyAttachment::CliqueNode => k + 1 + d,
        };
        typed.push((canonical(anchor, dummy_bridge_node), DUMMY_BRIDGE));
    }
    typed.sort_by_key(|&(e, _)| e);

    Ok(BarbellLayout {
        num_nodes: 2 * k + m * k,
        source,
        source_bridge_node,
        target_bridge_node,
        target,
        dummy_sources,
        typed_edges: typed,
    })
}

/// Generator for one graph; streams are independent per `(seed, split, index)`.
fn graph_rng(spec: &BarbellSpec, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream((spec.split.stream() << 32) | index as u64);
    rng
}

pub fn gen_barbell_graph(
    spec: &BarbellSpec,
    layout: &BarbellLayout,
    index: usize,
) -> Result<Graph> {
    let mut rng = graph_rng(spec, index);
    let dim = spec.feature_dim;

    let mut features = vec![vec![0.0; dim]; layout.num_nodes];
    let signal: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    features[layout.source] = signal.clone();
    for (d, &node) in layout.dummy_sources.iter().enumerate() {
        features[node][d] = 1.0;
    }

    let edges: Vec<Edge> = layout.typed_edges.iter().map(|&(e, _)| e).collect();
    let mut types: Vec<i64> = layout.typed_edges.iter().map(|&(_, t)| t).collect();
    if spec.feature_mode == FeatureMode::Permuted {
        types.shuffle(&mut rng);
    }

    let graph_id = format!("barbell-{}-{}-{index:05}", spec.variant_name(), spec.split);
    Ok(Graph::new(graph_id, layout.num_nodes, &edges)?
        .with_edge_features(types)?
        .with_node_features(features)?
        .with_roles(Roles {
            source: layout.source,
            target: layout.target,
            dummy_sources: layout.dummy_sources.clone(),
            extra: Default::default(),
        })?
        .with_target_value(signal))
}

pub fn gen_barbell(spec: &BarbellSpec) -> Result<Vec<Graph>> {
    let layout = barbell_layout(spec)?;
    (0..spec.num_graphs)
        .map(|index| gen_barbell_graph(spec, &layout, index))
        .collect()
}

/// Train and test splits drawn from disjoint random streams of the same seed.
pub fn gen_barbell_dataset(
    spec: &BarbellSpec,
    n_train: usize,
    n_test: usize,
) -> Result<(Vec<Graph>, Vec<Graph>)> {
    let train = gen_barbell(&BarbellSpec {
        num_graphs: n_train,
        split: Split::Train,
        ..*spec
    })?;
    let test = gen_barbell(&BarbellSpec {
        num_graphs: n_test,
        split: Split::Test,
        ..*spec
    })?;
    Ok((train, test))
}

/// Topological type code of a structural edge, recovered from the graph's
/// roles and structure alone (stored edge features are not consulted).
pub fn edge_type(g: &Graph, i: usize, j: usize) -> Result<i64> {
    let not_barbell =
        |why: &str| Error::invalid_graph(g.id(), format!("not a barbell graph: {why}"));
    let roles = g.roles().ok_or_else(|| not_barbell("no roles"))?;
    g.check_node(i)?;
    g.check_node(j)?;
    if !g.has_edge(i, j) {
        return Err(Error::NotAnEdge(i, j));
    }

    let is_bridge = |(a, b): Edge| {
        let (na, nb) = (g.neighbors(a), g.neighbors(b));
        !na.iter().any(|v| nb.binary_search(v).is_ok())
    };
    let in_source_clique = |v: usize| v == roles.source || g.has_edge(v, roles.source);

    let main_bridges: Vec<Edge> = g
        .edges()
        .iter()
        .copied()
        .filter(|&e| is_bridge(e) && (in_source_clique(e.0) != in_source_clique(e.1)))
        .collect();
    let &[(a, b)] = main_bridges.as_slice() else {
        return Err(not_barbell(
            "expected exactly one bridge leaving the source clique",
        ));
    };
    let (source_bridge_node, target_bridge_node) =
        if in_source_clique(a) { (a, b) } else { (b, a) };

    let e = canonical(i, j);
    Ok(if e == (a, b) {
        BRIDGE
    } else if is_bridge(e) {
        DUMMY_BRIDGE
    } else if e == canonical(roles.source, source_bridge_node) {
        SOURCE_TO_BRIDGE_NODE
    } else if e == canonical(target_bridge_node, roles.target) {
        BRIDGE_NODE_TO_TARGET
    } else {
        INTRA_CLIQUE
    })
}
