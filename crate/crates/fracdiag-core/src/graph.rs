//! Segment features, exponential-kernel segment graphs, degree-normalized
//! propagation, and cross-scale hypergraph aggregation.
//!
//! Each segment gets a feature vector `alpha = descriptor * (fd * entropy)`:
//! the layer's activation descriptor scaled by the product of the segment's
//! fractal dimension and entropy. Pairwise edges are
//! `gamma * exp(±||alpha_u - alpha_v||)` — the growing `+` form is the
//! default, a decaying locality form is available — assembled into a
//! symmetric zero-diagonal adjacency matrix. Propagation adds self-loops,
//! normalizes by the diagonal degree, and pushes node inputs through an
//! elementwise activation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::mat::Mat;
use crate::real::{exp, sqrt};

/// Identity of a segment within a run: layer, slice, grid cell, and scale.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SegmentKey {
    pub layer: String,
    pub channel_path: Vec<usize>,
    pub grid_i: usize,
    pub grid_j: usize,
    pub scale: usize,
}

impl SegmentKey {
    /// Compact id used in CSV/JSON exports, e.g. `conv1/0/1@r2(0,1)`.
    pub fn id(&self) -> String {
        let mut s = self.layer.clone();
        for p in &self.channel_path {
            s.push('/');
            s.push_str(&format!("{p}"));
        }
        s.push_str(&format!("@r{}({},{})", self.scale, self.grid_i, self.grid_j));
        s
    }
}

/// Per-segment feature record feeding the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeature {
    pub key: SegmentKey,
    pub row_start: usize,
    pub col_start: usize,
    /// Activation descriptor scaled by `fd * h`.
    pub alpha: Vec<f64>,
    pub fd: f64,
    pub h: f64,
    /// Activation descriptor before scaling.
    pub act_descriptor: Vec<f64>,
}

impl SegmentFeature {
    /// Build from a descriptor and the segment's fractal metrics.
    pub fn new(
        key: SegmentKey,
        row_start: usize,
        col_start: usize,
        act_descriptor: Vec<f64>,
        fd: f64,
        h: f64,
    ) -> Self {
        let scale = fd * h;
        let alpha = act_descriptor.iter().map(|&d| d * scale).collect();
        Self {
            key,
            row_start,
            col_start,
            alpha,
            fd,
            h,
            act_descriptor,
        }
    }

    pub fn alpha_norm(&self) -> f64 {
        sqrt(self.alpha.iter().map(|v| v * v).sum())
    }
}

/// Sign convention of the kernel exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelSign {
    /// `gamma * exp(+||a - b||)` — affinity grows with feature distance.
    Positive,
    /// `gamma * exp(-||a - b||)` — conventional locality kernel.
    LocalityNegative,
}

/// Which node pairs receive edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgePolicy {
    /// Only segments in adjacent layers connect.
    ConsecutiveLayers,
    /// Every distinct pair connects.
    AllPairs,
}

/// Exponential kernel edge between two feature vectors.
pub fn kernel_edge(a: &[f64], b: &[f64], gamma: f64, sign: KernelSign) -> Result<f64, CoreError> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dist = sqrt(
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>(),
    );
    let e = match sign {
        KernelSign::Positive => gamma * exp(dist),
        KernelSign::LocalityNegative => gamma * exp(-dist),
    };
    Ok(e)
}

/// Segment graph at one scale: ordered nodes plus a symmetric
/// zero-diagonal adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentGraph {
    pub nodes: Vec<SegmentFeature>,
    /// Index of the layer each node belongs to, aligned with `nodes`.
    pub node_layer: Vec<usize>,
    pub adjacency: Mat,
    pub gamma: f64,
    pub scale: usize,
    pub edge_policy: EdgePolicy,
}

/// Build the segment graph from per-layer feature sequences (layers in
/// network order). Nodes are ordered layer-major then grid-major.
pub fn build_graph(
    layers: &[(String, Vec<SegmentFeature>)],
    gamma: f64,
    edge_policy: EdgePolicy,
    sign: KernelSign,
) -> Result<SegmentGraph, CoreError> {
    let total: usize = layers.iter().map(|(_, f)| f.len()).sum();
    if total == 0 {
        return Err(CoreError::EmptyFeatures);
    }
    if edge_policy == EdgePolicy::ConsecutiveLayers && layers.len() < 2 {
        return Err(CoreError::NeedTwoLayers);
    }
    let mut nodes = Vec::with_capacity(total);
    let mut node_layer = Vec::with_capacity(total);
    let mut scale = None;
    for (li, (_, feats)) in layers.iter().enumerate() {
        for f in feats {
            scale.get_or_insert(f.key.scale);
            nodes.push(f.clone());
            node_layer.push(li);
        }
    }
    let scale = scale.expect("total > 0");
    let mut adjacency = Mat::zeros(total, total);
    for u in 0..total {
        for v in (u + 1)..total {
            let admissible = match edge_policy {
                EdgePolicy::AllPairs => true,
                EdgePolicy::ConsecutiveLayers => {
                    node_layer[u].abs_diff(node_layer[v]) == 1
                }
            };
            if !admissible {
                continue;
            }
            let e = kernel_edge(&nodes[u].alpha, &nodes[v].alpha, gamma, sign)?;
            adjacency[(u, v)] = e;
            adjacency[(v, u)] = e;
        }
    }
    Ok(SegmentGraph {
        nodes,
        node_layer,
        adjacency,
        gamma,
        scale,
        edge_policy,
    })
}

/// Elementwise activation applied after propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
            Activation::Tanh => libm::tanh(x),
        }
    }
}

/// Degree-normalization variant for the propagation operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `D^{-1/2} (A + I) D^{+1/2}` — a similarity transform of `A + I`,
    /// preserving its spectrum.
    Asymmetric,
    /// `D^{-1/2} (A + I) D^{-1/2}` — the standard symmetric normalization.
    Symmetric,
}

/// Result of one propagation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub omega: Mat,
    pub activation: Activation,
}

/// Apply one degree-normalized propagation step over raw adjacency `a`:
/// with `A_hat = a + I` and `D_hat = diag(rowsum(A_hat))`, compute
/// `omega = act(M x)` where `M` is the selected normalization of `A_hat`.
pub fn propagate_adjacency(
    a: &Mat,
    x: &Mat,
    activation: Activation,
    normalization: Normalization,
) -> Result<PropagationResult, CoreError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "adjacency must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if x.rows() != n {
        return Err(CoreError::DimensionMismatch(format!(
            "node features have {} rows for {} nodes",
            x.rows(),
            n
        )));
    }
    if !a.is_finite() || !x.is_finite() {
        return Err(CoreError::NonFinite("propagation inputs".into()));
    }
    // self-loops make every degree strictly positive
    let mut a_hat = a.clone();
    for i in 0..n {
        a_hat[(i, i)] += 1.0;
    }
    let mut deg = alloc::vec![0.0f64; n];
    for i in 0..n {
        deg[i] = a_hat.row(i).iter().sum();
    }
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let scale = match normalization {
                Normalization::Asymmetric => sqrt(deg[j]) / sqrt(deg[i]),
                Normalization::Symmetric => 1.0 / (sqrt(deg[i]) * sqrt(deg[j])),
            };
            m[(i, j)] = a_hat[(i, j)] * scale;
        }
    }
    let mut omega = m.matmul(x)?;
    for i in 0..omega.rows() {
        for j in 0..omega.cols() {
            omega[(i, j)] = activation.apply(omega[(i, j)]);
        }
    }
    if !omega.is_finite() {
        return Err(CoreError::NonFinite("propagation output".into()));
    }
    Ok(PropagationResult { omega, activation })
}

impl SegmentGraph {
    /// Propagate node inputs `x` (one row per node) through this graph.
    pub fn propagate(
        &self,
        x: &Mat,
        activation: Activation,
        normalization: Normalization,
    ) -> Result<PropagationResult, CoreError> {
        propagate_adjacency(&self.adjacency, x, activation, normalization)
    }
}

/// A node of the aggregated cross-scale hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperNode {
    pub key: SegmentKey,
    pub row_start: usize,
    pub col_start: usize,
    pub fd: f64,
    pub h: f64,
}

/// Weighted intra-scale edge between global node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Union of per-scale segment graphs: intra-scale kernel edges plus
/// unit-weight containment edges linking a segment to every coarser-scale
/// segment of the same slice whose cell region encloses it.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    pub nodes: Vec<HyperNode>,
    pub intra_edges: Vec<HyperEdge>,
    pub containment_edges: Vec<(usize, usize)>,
}

/// Aggregate per-scale graphs (all built from the same epoch snapshot) into
/// one hypergraph. Scale keys must be distinct.
pub fn aggregate_hypergraph(graphs: &[(usize, &SegmentGraph)]) -> Result<Hypergraph, CoreError> {
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.sort_by_key(|&i| graphs[i].0);
    for w in order.windows(2) {
        if graphs[w[0]].0 == graphs[w[1]].0 {
            return Err(CoreError::DuplicateScale(graphs[w[0]].0));
        }
    }

    let mut nodes = Vec::new();
    let mut intra_edges = Vec::new();
    let mut offsets = Vec::with_capacity(order.len());
    for &gi in &order {
        let (_, g) = graphs[gi];
        offsets.push(nodes.len());
        let base = nodes.len();
        for f in &g.nodes {
            nodes.push(HyperNode {
                key: f.key.clone(),
                row_start: f.row_start,
                col_start: f.col_start,
                fd: f.fd,
                h: f.h,
            });
        }
        for u in 0..g.nodes.len() {
            for v in (u + 1)..g.nodes.len() {
                let w = g.adjacency[(u, v)];
                if w != 0.0 {
                    intra_edges.push(HyperEdge {
                        u: base + u,
                        v: base + v,
                        weight: w,
                    });
                }
            }
        }
    }

    // containment: fine segment region inside a coarser one on the same slice
    let mut containment_edges = Vec::new();
    for (oi, &gi) in order.iter().enumerate() {
        let (scale_fine, g_fine) = graphs[gi];
        for (oj, &gj) in order.iter().enumerate().skip(oi + 1) {
            let (scale_coarse, g_coarse) = graphs[gj];
            debug_assert!(scale_coarse > scale_fine);
            for (ui, fu) in g_fine.nodes.iter().enumerate() {
                for (vi, fv) in g_coarse.nodes.iter().enumerate() {
                    if fu.key.layer != fv.key.layer || fu.key.channel_path != fv.key.channel_path
                    {
                        continue;
                    }
                    let rows_inside = fv.row_start <= fu.row_start
                        && fu.row_start + scale_fine <= fv.row_start + scale_coarse;
                    let cols_inside = fv.col_start <= fu.col_start
                        && fu.col_start + scale_fine <= fv.col_start + scale_coarse;
                    if rows_inside && cols_inside {
                        containment_edges.push((offsets[oi] + ui, offsets[oj] + vi));
                    }
                }
            }
        }
    }

    Ok(Hypergraph {
        nodes,
        intra_edges,
        containment_edges,
    })
}

/// Resample a flattened activation map to length `d` by mean-pooling over
/// `ceil(len/d)`-sized blocks, padding with the last block mean when fewer
/// than `d` blocks result.
pub fn resample_descriptor(map: &[f64], d: usize) -> Vec<f64> {
    debug_assert!(d >= 1);
    debug_assert!(!map.is_empty());
    let block = map.len().div_ceil(d);
    let mut out = Vec::with_capacity(d);
    let mut i = 0;
    while i < map.len() {
        let end = (i + block).min(map.len());
        let mean = map[i..end].iter().sum::<f64>() / (end - i) as f64;
        out.push(mean);
        i = end;
    }
    while out.len() < d {
        let last = *out.last().expect("at least one block");
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feat(layer: &str, grid: usize, alpha: Vec<f64>) -> SegmentFeature {
        SegmentFeature {
            key: SegmentKey {
                layer: layer.into(),
                channel_path: vec![],
                grid_i: grid,
                grid_j: 0,
                scale: 2,
            },
            row_start: grid * 2,
            col_start: 0,
            act_descriptor: alpha.clone(),
            alpha,
            fd: 1.0,
            h: 1.0,
        }
    }

    #[test]
    fn kernel_identity_case() {
        let a = [1.0, 2.0];
        assert_eq!(kernel_edge(&a, &a, 3.0, KernelSign::Positive).unwrap(), 3.0);
        assert_eq!(
            kernel_edge(&a, &a, 3.0, KernelSign::LocalityNegative).unwrap(),
            3.0
        );
    }

    #[test]
    fn kernel_unit_distance() {
        let e = kernel_edge(&[0.0], &[1.0], 1.0, KernelSign::Positive).unwrap();
        assert!((e - 2.718282).abs() < 1e-6);
        let e = kernel_edge(&[0.0], &[1.0], 2.0, KernelSign::LocalityNegative).unwrap();
        assert!((e - 0.735759).abs() < 1e-6);
    }

    #[test]
    fn kernel_rejects_length_mismatch() {
        assert!(kernel_edge(&[1.0], &[1.0, 2.0], 1.0, KernelSign::Positive).is_err());
    }

    #[test]
    fn feature_nullity() {
        let f = SegmentFeature::new(
            SegmentKey {
                layer: "l".into(),
                channel_path: vec![],
                grid_i: 0,
                grid_j: 0,
                scale: 2,
            },
            0,
            0,
            vec![1.0, -2.0],
            0.0,
            0.7,
        );
        assert_eq!(f.alpha, vec![0.0, 0.0]);
    }

    #[test]
    fn eq3_product_example() {
        let f = SegmentFeature::new(
            SegmentKey {
                layer: "l".into(),
                channel_path: vec![],
                grid_i: 0,
                grid_j: 0,
                scale: 2,
            },
            0,
            0,
            vec![1.0, 1.0],
            2.0,
            core::f64::consts::LN_2,
        );
        assert!((f.alpha[0] - 1.386294).abs() < 1e-6);
        assert!((f.alpha[1] - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn bipartite_edge_count() {
        let l1: Vec<_> = (0..3).map(|i| feat("a", i, vec![i as f64])).collect();
        let l2: Vec<_> = (0..2).map(|i| feat("b", i, vec![i as f64 + 0.5])).collect();
        let g = build_graph(
            &[("a".into(), l1), ("b".into(), l2)],
            1.0,
            EdgePolicy::ConsecutiveLayers,
            KernelSign::Positive,
        )
        .unwrap();
        let nonzero = g
            .adjacency
            .data()
            .iter()
            .filter(|&&w| w != 0.0)
            .count();
        assert_eq!(nonzero, 2 * 3 * 2); // both triangle halves
    }

    #[test]
    fn three_layer_pair_count() {
        let a: Vec<_> = (0..2).map(|i| feat("a", i, vec![i as f64])).collect();
        let b: Vec<_> = (0..3).map(|i| feat("b", i, vec![i as f64 + 10.0])).collect();
        let c: Vec<_> = (0..2).map(|i| feat("c", i, vec![i as f64 + 20.0])).collect();
        let g = build_graph(
            &[("a".into(), a), ("b".into(), b), ("c".into(), c)],
            1.0,
            EdgePolicy::ConsecutiveLayers,
            KernelSign::Positive,
        )
        .unwrap();
        assert_eq!(g.nodes.len(), 7);
        let pairs = g.adjacency.data().iter().filter(|&&w| w != 0.0).count() / 2;
        assert_eq!(pairs, 2 * 3 + 3 * 2);
        // a-c pairs stay unconnected
        assert_eq!(g.adjacency[(0, 5)], 0.0);
    }

    #[test]
    fn identical_features_unit_gamma() {
        let l1: Vec<_> = (0..2).map(|i| feat("a", i, vec![1.0, 1.0])).collect();
        let l2: Vec<_> = (0..2).map(|i| feat("b", i, vec![1.0, 1.0])).collect();
        let g = build_graph(
            &[("a".into(), l1), ("b".into(), l2)],
            1.0,
            EdgePolicy::ConsecutiveLayers,
            KernelSign::Positive,
        )
        .unwrap();
        for u in 0..2 {
            for v in 2..4 {
                assert_eq!(g.adjacency[(u, v)], 1.0);
            }
        }
    }

    #[test]
    fn consecutive_needs_two_layers() {
        let l1: Vec<_> = (0..2).map(|i| feat("a", i, vec![0.0])).collect();
        assert!(matches!(
            build_graph(
                &[("a".into(), l1)],
                1.0,
                EdgePolicy::ConsecutiveLayers,
                KernelSign::Positive
            ),
            Err(CoreError::NeedTwoLayers)
        ));
    }

    #[test]
    fn empty_features_rejected() {
        assert!(matches!(
            build_graph(&[], 1.0, EdgePolicy::AllPairs, KernelSign::Positive),
            Err(CoreError::EmptyFeatures)
        ));
    }

    #[test]
    fn propagate_zero_adjacency_is_identity() {
        let a = Mat::zeros(3, 3);
        let x = Mat::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let res =
            propagate_adjacency(&a, &x, Activation::Identity, Normalization::Asymmetric).unwrap();
        assert_eq!(res.omega, x);
        let res =
            propagate_adjacency(&a, &x, Activation::Identity, Normalization::Symmetric).unwrap();
        assert_eq!(res.omega, x);
    }

    #[test]
    fn propagate_two_node_symmetric() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let x = Mat::from_vec(2, 1, vec![1.0, 0.0]);
        let res =
            propagate_adjacency(&a, &x, Activation::Identity, Normalization::Symmetric).unwrap();
        assert!((res.omega[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((res.omega[(1, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn propagate_rejects_row_mismatch() {
        let a = Mat::zeros(2, 2);
        let x = Mat::zeros(3, 1);
        assert!(propagate_adjacency(&a, &x, Activation::Identity, Normalization::Symmetric)
            .is_err());
    }

    #[test]
    fn propagate_rejects_non_finite() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 1)] = f64::INFINITY;
        a[(1, 0)] = f64::INFINITY;
        let x = Mat::zeros(2, 1);
        assert!(matches!(
            propagate_adjacency(&a, &x, Activation::Identity, Normalization::Symmetric),
            Err(CoreError::NonFinite(_))
        ));
    }

    #[test]
    fn relu_output_nonnegative() {
        let mut a = Mat::zeros(2, 2);
        a[(0, 1)] = 2.0;
        a[(1, 0)] = 2.0;
        let x = Mat::from_vec(2, 1, vec![-3.0, -1.0]);
        let res =
            propagate_adjacency(&a, &x, Activation::Relu, Normalization::Symmetric).unwrap();
        assert!(res.omega.data().iter().all(|&v| v >= 0.0));
    }

    fn tiny_graph(scale: usize, layer: &str, cells: &[(usize, usize)]) -> SegmentGraph {
        let feats: Vec<_> = cells
            .iter()
            .enumerate()
            .map(|(i, &(r0, c0))| SegmentFeature {
                key: SegmentKey {
                    layer: layer.into(),
                    channel_path: vec![],
                    grid_i: r0 / scale,
                    grid_j: c0 / scale,
                    scale,
                },
                row_start: r0,
                col_start: c0,
                alpha: vec![i as f64],
                fd: 1.0,
                h: 1.0,
                act_descriptor: vec![i as f64],
            })
            .collect();
        let n = feats.len();
        SegmentGraph {
            node_layer: alloc::vec![0; n],
            nodes: feats,
            adjacency: Mat::zeros(n, n),
            gamma: 1.0,
            scale,
            edge_policy: EdgePolicy::AllPairs,
        }
    }

    #[test]
    fn hypergraph_single_scale_no_containment() {
        let g = tiny_graph(2, "fc", &[(0, 0), (0, 2)]);
        let h = aggregate_hypergraph(&[(2, &g)]).unwrap();
        assert_eq!(h.nodes.len(), 2);
        assert!(h.containment_edges.is_empty());
    }

    #[test]
    fn hypergraph_four_by_four_containment() {
        // r=2 tiling of a 4x4 slice, plus the single r=4 segment
        let fine = tiny_graph(2, "fc", &[(0, 0), (0, 2), (2, 0), (2, 2)]);
        let coarse = tiny_graph(4, "fc", &[(0, 0)]);
        let h = aggregate_hypergraph(&[(2, &fine), (4, &coarse)]).unwrap();
        assert_eq!(h.containment_edges.len(), 4);
        assert!(h
            .containment_edges
            .iter()
            .all(|&(_, v)| v == 4));
    }

    #[test]
    fn hypergraph_disjoint_slices_no_containment() {
        let fine = tiny_graph(2, "conv1", &[(0, 0)]);
        let coarse = tiny_graph(4, "conv2", &[(0, 0)]);
        let h = aggregate_hypergraph(&[(2, &fine), (4, &coarse)]).unwrap();
        assert!(h.containment_edges.is_empty());
    }

    #[test]
    fn hypergraph_rejects_scale_collision() {
        let g = tiny_graph(2, "fc", &[(0, 0)]);
        assert!(matches!(
            aggregate_hypergraph(&[(2, &g), (2, &g)]),
            Err(CoreError::DuplicateScale(2))
        ));
    }

    #[test]
    fn resample_identity_when_lengths_match() {
        let v = vec![1.0, 2.0, 3.0];
        assert_eq!(resample_descriptor(&v, 3), v);
    }

    #[test]
    fn resample_block_means() {
        assert_eq!(resample_descriptor(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 3.5]);
    }

    #[test]
    fn resample_preserves_constants() {
        let v = vec![5.0; 7];
        assert!(resample_descriptor(&v, 4).iter().all(|&x| x == 5.0));
        assert_eq!(resample_descriptor(&v, 4).len(), 4);
    }

    #[test]
    fn resample_pads_short_maps() {
        let out = resample_descriptor(&[2.0, 4.0], 5);
        assert_eq!(out, vec![2.0, 4.0, 4.0, 4.0, 4.0]);
    }
}
