//! Raw simplex features and their hidden-space embeddings.
//!
//! | simplex  | raw width | contents                                          |
//! |----------|-----------|---------------------------------------------------|
//! | vertex   | 92        | atom feature table row for the species            |
//! | edge     | 376       | RBF(−0.75/d) (64 centers × 3 widths), src, dst    |
//! | triangle | 216       | 9 side-length scalars × RBF (8 centers × 3 widths) |

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::elements::MAX_Z;
use crate::qcomplex::QuotientComplex;
use crate::structio::CrystalStructure;

pub const VERTEX_DIM: usize = 92;
pub const EDGE_DIM: usize = 376;
pub const TRIANGLE_DIM: usize = 216;
pub const HIDDEN_DIM: usize = 64;

pub const RBF_SIGMAS: [f64; 3] = [0.01, 0.1, 1.0];
const EDGE_CENTERS: usize = 64;
const EDGE_RANGE: (f64, f64) = (-4.0, 0.0);
const TRIANGLE_CENTERS: usize = 8;
const TRIANGLE_RANGE: (f64, f64) = (0.0, 5.0);

/// Numerator of the inverse-distance transform `d' = -0.75 / d`.
pub const EDGE_DISTANCE_SCALE: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("non-positive distance {0}")]
    NonPositiveDistance(f64),
    #[error("atom feature table has no entry for atomic number {0}")]
    MissingSpecies(u32),
    #[error("atom feature table: {0}")]
    BadTable(String),
}

/// Gaussian basis `exp(-(x - c)^2 / sigma)` over a grid of centers and widths.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfBank {
    centers: Vec<f64>,
    sigmas: Vec<f64>,
}

/// `n` evenly spaced points over `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

impl RbfBank {
    pub fn new(centers: Vec<f64>, sigmas: Vec<f64>) -> Self {
        assert!(centers.windows(2).all(|w| w[0] < w[1]), "centers must be strictly increasing");
        assert!(sigmas.iter().all(|&s| s > 0.0), "widths must be positive");
        RbfBank { centers, sigmas }
    }

    pub fn edge_bank() -> Self {
        Self::new(linspace(EDGE_RANGE.0, EDGE_RANGE.1, EDGE_CENTERS), RBF_SIGMAS.to_vec())
    }

    pub fn triangle_bank() -> Self {
        Self::new(linspace(TRIANGLE_RANGE.0, TRIANGLE_RANGE.1, TRIANGLE_CENTERS), RBF_SIGMAS.to_vec())
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn dim(&self) -> usize {
        self.centers.len() * self.sigmas.len()
    }

    /// Sigma-major: one block per width, centers ascending within a block.
    pub fn expand_into(&self, x: f64, out: &mut Vec<f64>) {
        for &s in &self.sigmas {
            for &c in &self.centers {
                out.push((-(x - c) * (x - c) / s).exp());
            }
        }
    }

    pub fn expand(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.expand_into(x, &mut out);
        out
    }
}

pub fn rbf_expand(x: f64, bank: &RbfBank) -> Vec<f64> {
    bank.expand(x)
}

/// `[RBF(-0.75/d), src, dst]`, 192 + 92 + 92 = 376 values.
pub fn edge_features(d: f64, src: &[f64], dst: &[f64]) -> Result<Vec<f64>, FeatureError> {
    edge_features_with(&RbfBank::edge_bank(), d, src, dst)
}

fn edge_features_with(bank: &RbfBank, d: f64, src: &[f64], dst: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if d.is_nan() || d <= 0.0 {
        return Err(FeatureError::NonPositiveDistance(d));
    }
    let mut out = Vec::with_capacity(EDGE_DIM);
    bank.expand_into(-EDGE_DISTANCE_SCALE / d, &mut out);
    out.extend_from_slice(src);
    out.extend_from_slice(dst);
    debug_assert_eq!(out.len(), EDGE_DIM);
    Ok(out)
}

/// The nine side-length scalars, in block order.
pub fn triangle_scalars(d1: f64, d2: f64, d3: f64) -> [f64; 9] {
    [d1, d2, d3, d1 * d2, d1 * d3, d2 * d3, d1 * d1, d2 * d2, d3 * d3]
}

pub fn triangle_features(d1: f64, d2: f64, d3: f64) -> Result<Vec<f64>, FeatureError> {
    triangle_features_with(&RbfBank::triangle_bank(), d1, d2, d3)
}

fn triangle_features_with(bank: &RbfBank, d1: f64, d2: f64, d3: f64) -> Result<Vec<f64>, FeatureError> {
    for d in [d1, d2, d3] {
        if d.is_nan() || d <= 0.0 {
            return Err(FeatureError::NonPositiveDistance(d));
        }
    }
    let mut out = Vec::with_capacity(TRIANGLE_DIM);
    for x in triangle_scalars(d1, d2, d3) {
        bank.expand_into(x, &mut out);
    }
    Ok(out)
}

/// Atomic number to 92-dimensional descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomFeatureTable {
    rows: BTreeMap<u32, Vec<f64>>,
}

impl AtomFeatureTable {
    pub fn from_rows(rows: BTreeMap<u32, Vec<f64>>) -> Result<Self, FeatureError> {
        for (z, v) in &rows {
            if v.len() != VERTEX_DIM {
                return Err(FeatureError::BadTable(format!("entry {z} has {} values, expected {VERTEX_DIM}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::BadTable(format!("entry {z} has non-finite values")));
            }
        }
        Ok(AtomFeatureTable { rows })
    }

    /// JSON object `{"<Z>": [92 floats], ...}`.
    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let raw: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| FeatureError::BadTable(e.to_string()))?;
        let mut rows = BTreeMap::new();
        for (k, v) in raw {
            let z: u32 = k.trim().parse().map_err(|_| FeatureError::BadTable(format!("bad key `{k}`")))?;
            rows.insert(z, v);
        }
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::BadTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Deterministic stand-in covering every element, for runs that do not
    /// depend on real chemistry. Entries are sparse 0/1 codes.
    pub fn placeholder(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (1..=MAX_Z)
            .map(|z| {
                let v = (0..VERTEX_DIM).map(|_| if rng.random::<f64>() < 0.15 { 1.0 } else { 0.0 }).collect();
                (z, v)
            })
            .collect();
        AtomFeatureTable { rows }
    }

    pub fn get(&self, z: u32) -> Result<&[f64], FeatureError> {
        self.rows.get(&z).map(Vec::as_slice).ok_or(FeatureError::MissingSpecies(z))
    }

    /// First species in `s` missing from the table.
    pub fn check_covers(&self, s: &CrystalStructure) -> Result<(), FeatureError> {
        for &z in s.species() {
            self.get(z)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let m: BTreeMap<String, &Vec<f64>> = self.rows.iter().map(|(z, v)| (z.to_string(), v)).collect();
        serde_json::to_string(&m).expect("table serializes")
    }
}

/// Raw per-simplex inputs, one row per simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub h0: Array2<f64>,
    pub h1: Array2<f64>,
    pub h2: Array2<f64>,
}

pub fn featurize_raw(
    c: &QuotientComplex,
    s: &CrystalStructure,
    table: &AtomFeatureTable,
) -> Result<RawFeatures, FeatureError> {
    let n = c.num_vertices();
    let mut h0 = Array2::zeros((n, VERTEX_DIM));
    for (i, &z) in s.species().iter().enumerate().take(n) {
        h0.row_mut(i).assign(&ndarray::ArrayView1::from(table.get(z)?));
    }

    let edge_bank = RbfBank::edge_bank();
    let mut h1 = Array2::zeros((c.num_edges(), EDGE_DIM));
    for (i, e) in c.graph.edges.iter().enumerate() {
        let row = edge_features_with(
            &edge_bank,
            e.dist,
            h0.row(e.src).as_slice().expect("contiguous"),
            h0.row(e.dst).as_slice().expect("contiguous"),
        )?;
        h1.row_mut(i).assign(&Array1::from(row));
    }

    let tri_bank = RbfBank::triangle_bank();
    let mut h2 = Array2::zeros((c.num_triangles(), TRIANGLE_DIM));
    for t in 0..c.num_triangles() {
        let [d1, d2, d3] = c.triangle_sides(t);
        h2.row_mut(t).assign(&Array1::from(triangle_features_with(&tri_bank, d1, d2, d3)?));
    }
    Ok(RawFeatures { h0, h1, h2 })
}

/// Single linear layer plus SiLU mapping raw features to the hidden width.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `in × hidden`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

impl Embedding {
    pub fn apply(&self, raw: &Array2<f64>) -> Array2<f64> {
        let mut out = raw.dot(&self.weight);
        out += &self.bias.view().insert_axis(Axis(0));
        out.mapv_inplace(silu);
        out
    }
}

/// Raw features plus hidden embeddings for each simplex tier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub raw: RawFeatures,
    pub h0: Array2<f64>,
    pub h1: Array2<f64>,
    pub h2: Array2<f64>,
}

pub fn featurize_complex(
    c: &QuotientComplex,
    s: &CrystalStructure,
    table: &AtomFeatureTable,
    embeddings: &[Embedding; 3],
) -> Result<FeatureSet, FeatureError> {
    let raw = featurize_raw(c, s, table)?;
    let h0 = embeddings[0].apply(&raw.h0);
    let h1 = embeddings[1].apply(&raw.h1);
    let h2 = embeddings[2].apply(&raw.h2);
    Ok(FeatureSet { raw, h0, h1, h2 })
}

#[derive(Debug, Serialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: &'static str,
    pub order: &'static str,
}

/// Row-major little-endian f64 bytes plus a JSON shape header.
pub fn matrix_dump(m: &Array2<f64>) -> (MatrixHeader, Vec<u8>) {
    let mut bytes = Vec::with_capacity(m.len() * 8);
    for x in m.iter() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    (MatrixHeader { rows: m.nrows(), cols: m.ncols(), dtype: "f64-le", order: "row-major" }, bytes)
}
