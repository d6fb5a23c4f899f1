//! Indicator (factor-graph) matrices, per-layer mapping matrices and the
//! covering column-group search.
//!
//! Indices are zero-based throughout: RN `k` in `0..K`, layer `l` in `0..J`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column-group search is exhaustive; larger graphs are rejected.
pub const MAX_GROUPABLE_LAYERS: usize = 12;

/// A K x J binary indicator matrix with its adjacency sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    id: String,
    rows: Vec<Vec<u8>>,
    rn_sets: Vec<Vec<usize>>,
    vn_sets: Vec<Vec<usize>>,
    regular: bool,
}

impl FactorGraph {
    /// Builds a graph from K rows of 0/1 entries.
    ///
    /// Regular graphs (equal column weights N < K, equal row weights d_f) are
    /// always accepted. With `allow_irregular` the only requirement is that
    /// every column has at least one nonzero.
    pub fn new(id: impl Into<String>, rows: Vec<Vec<u8>>, allow_irregular: bool) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::InvalidGraph("no rows".into()));
        }
        let j = rows[0].len();
        if j == 0 || rows.iter().any(|r| r.len() != j) {
            return Err(Error::InvalidGraph("rows must be nonempty and equal length".into()));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::InvalidGraph("entries must be 0 or 1".into()));
        }
        let rn_sets: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| (0..j).filter(|&l| r[l] == 1).collect())
            .collect();
        let vn_sets: Vec<Vec<usize>> = (0..j)
            .map(|l| (0..k).filter(|&kk| rows[kk][l] == 1).collect())
            .collect();
        if let Some(l) = vn_sets.iter().position(|s| s.is_empty()) {
            return Err(Error::InvalidGraph(format!("layer {l} uses no resource")));
        }
        let n = vn_sets[0].len();
        let d_f = rn_sets[0].len();
        let regular = vn_sets.iter().all(|s| s.len() == n)
            && rn_sets.iter().all(|s| s.len() == d_f)
            && n < k
            && k * d_f == j * n;
        if !regular && !allow_irregular {
            return Err(Error::InvalidGraph(
                "graph is not regular (equal column weight N < K and equal row weight d_f)".into(),
            ));
        }
        Ok(Self {
            id: id.into(),
            rows,
            rn_sets,
            vn_sets,
            regular,
        })
    }

    /// The K = 4, J = 6, N = 2, d_f = 3 graph used throughout the toolkit.
    pub fn default_4x6() -> Self {
        Self::new(
            "default-4x6",
            vec![
                vec![0, 1, 1, 0, 1, 0],
                vec![1, 0, 1, 0, 0, 1],
                vec![0, 1, 0, 1, 0, 1],
                vec![1, 0, 0, 1, 1, 0],
            ],
            false,
        )
        .expect("default graph is regular")
    }

    /// A K = 6, J = 9 graph whose columns come in three covering groups of
    /// three.
    pub fn grouped_6x9() -> Self {
        Self::new(
            "grouped-6x9",
            vec![
                vec![0, 0, 1, 0, 1, 0, 1, 0, 0],
                vec![0, 1, 0, 1, 0, 0, 1, 0, 0],
                vec![0, 0, 1, 1, 0, 0, 0, 0, 1],
                vec![1, 0, 0, 0, 1, 0, 0, 1, 0],
                vec![1, 0, 0, 0, 0, 1, 0, 0, 1],
                vec![0, 1, 0, 0, 0, 1, 0, 1, 0],
            ],
            false,
        )
        .expect("6x9 graph is regular")
    }

    /// Looks up a built-in graph by id.
    pub fn preset(id: &str) -> Result<Self> {
        match id {
            "default-4x6" => Ok(Self::default_4x6()),
            "grouped-6x9" => Ok(Self::grouped_6x9()),
            other => Err(Error::InvalidGraph(format!("unknown graph preset `{other}`"))),
        }
    }

    /// Parses a JSON list of rows of 0/1.
    pub fn from_json(id: impl Into<String>, text: &str, allow_irregular: bool) -> Result<Self> {
        let rows: Vec<Vec<u8>> = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        Self::new(id, rows, allow_irregular)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.rows).expect("rows serialize")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// Number of resource nodes K.
    pub fn resources(&self) -> usize {
        self.rows.len()
    }

    /// Number of layers J.
    pub fn layers(&self) -> usize {
        self.rows[0].len()
    }

    /// Nonzeros per column (N) of layer `l`.
    pub fn layer_weight(&self, l: usize) -> usize {
        self.vn_sets[l].len()
    }

    /// Common column weight N; for irregular graphs, the weight of layer 0.
    pub fn dimension(&self) -> usize {
        self.vn_sets[0].len()
    }

    /// Common row weight d_f; for irregular graphs, the weight of RN 0.
    pub fn degree(&self) -> usize {
        self.rn_sets[0].len()
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    /// Overloading factor J / K.
    pub fn overloading(&self) -> f64 {
        self.layers() as f64 / self.resources() as f64
    }

    /// Layers sharing RN `k`.
    pub fn rn_neighbors(&self, k: usize) -> Result<&[usize]> {
        self.rn_sets.get(k).map(Vec::as_slice).ok_or(Error::IndexOutOfRange {
            what: "resource node",
            index: k,
            limit: self.resources(),
        })
    }

    /// RNs used by layer `l`, ascending.
    pub fn vn_neighbors(&self, l: usize) -> Result<&[usize]> {
        self.vn_sets.get(l).map(Vec::as_slice).ok_or(Error::IndexOutOfRange {
            what: "layer",
            index: l,
            limit: self.layers(),
        })
    }

    pub fn mapping_matrix(&self, l: usize) -> Result<MappingMatrix> {
        Ok(MappingMatrix {
            resources: self.resources(),
            support: self.vn_neighbors(l)?.to_vec(),
        })
    }

    /// Partitions the columns into groups whose columns sum to the all-ones
    /// vector, or `None` when no such partition exists. Among all partitions
    /// the lexicographically smallest (groups listed by their smallest column)
    /// is returned. Graphs with more than [`MAX_GROUPABLE_LAYERS`] layers
    /// return `None`.
    pub fn column_groups(&self) -> Option<Vec<Vec<usize>>> {
        let j = self.layers();
        if j > MAX_GROUPABLE_LAYERS {
            return None;
        }
        let k = self.resources();
        if k > 64 {
            return None;
        }
        let masks: Vec<u64> = self
            .vn_sets
            .iter()
            .map(|s| s.iter().fold(0u64, |acc, &r| acc | (1 << r)))
            .collect();
        let full = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
        let mut assigned = vec![false; j];
        let mut groups = Vec::new();
        if cover_rest(&masks, full, &mut assigned, &mut groups) {
            Some(groups)
        } else {
            None
        }
    }
}

fn cover_rest(masks: &[u64], full: u64, assigned: &mut [bool], groups: &mut Vec<Vec<usize>>) -> bool {
    let Some(first) = assigned.iter().position(|a| !a) else {
        return true;
    };
    assigned[first] = true;
    let mut group = vec![first];
    if extend_group(masks, full, masks[first], first + 1, assigned, &mut group, groups) {
        return true;
    }
    assigned[first] = false;
    false
}

fn extend_group(
    masks: &[u64],
    full: u64,
    covered: u64,
    from: usize,
    assigned: &mut [bool],
    group: &mut Vec<usize>,
    groups: &mut Vec<Vec<usize>>,
) -> bool {
    if covered == full {
        groups.push(group.clone());
        if cover_rest(masks, full, assigned, groups) {
            return true;
        }
        groups.pop();
        return false;
    }
    for l in from..masks.len() {
        if !assigned[l] && masks[l] & covered == 0 {
            assigned[l] = true;
            group.push(l);
            if extend_group(masks, full, covered | masks[l], l + 1, assigned, group, groups) {
                return true;
            }
            group.pop();
            assigned[l] = false;
        }
    }
    false
}

/// The K x N binary matrix V_l: the identity I_N with all-zero rows inserted
/// where column l of the indicator matrix is zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingMatrix {
    resources: usize,
    support: Vec<usize>,
}

impl MappingMatrix {
    /// RN index carrying entry n of the N-vector.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn resources(&self) -> usize {
        self.resources
    }

    pub fn dimension(&self) -> usize {
        self.support.len()
    }

    pub fn dense(&self) -> Vec<Vec<u8>> {
        let mut v = vec![vec![0u8; self.support.len()]; self.resources];
        for (n, &k) in self.support.iter().enumerate() {
            v[k][n] = 1;
        }
        v
    }

    /// `V * x` for an N-vector `x`.
    pub fn apply<T: Real>(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.support.len() {
            return Err(Error::DimensionMismatch(format!(
                "mapping matrix expects {} entries, got {}",
                self.support.len(),
                x.len()
            )));
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.resources];
        for (n, &k) in self.support.iter().enumerate() {
            out[k] = x[n];
        }
        Ok(out)
    }
}
