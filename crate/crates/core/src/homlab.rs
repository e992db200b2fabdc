//! Exact simplicial homology and the vertex-collapsing comparison.
//!
//! Gluing the vertices of a complex `K` class by class gives a space `K̄`
//! that is in general not simplicial. `K̃` realizes it up to homotopy: for
//! every class with at least two vertices a fresh apex is joined by an edge
//! to each member. The inclusion `K ↪ K̃` induces `θ_q : H_q(K) → H_q(K̃)`,
//! which should be onto in degree 0, one-to-one in degree 1 and an
//! isomorphism above. Ranks are computed over the rationals with exact
//! arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use num::{BigRational, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_DIM: usize = 3;

pub type Simplex = Vec<usize>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HomologyError {
    #[error("empty simplex")]
    EmptySimplex,
    #[error("simplex {0:?} repeats a vertex")]
    RepeatedVertex(Simplex),
    #[error("simplex {0:?} has dimension above {MAX_DIM}")]
    DimensionTooHigh(Simplex),
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("simplex {0:?} of the subcomplex is missing from the larger complex")]
    SubcomplexViolation(Simplex),
    #[error("invalid JSON: {0}")]
    Json(String),
}

/// A finite abstract simplicial complex of dimension at most three.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimplicialComplex {
    /// Sorted simplices per dimension, each a sorted vertex tuple.
    simplices: [Vec<Simplex>; MAX_DIM + 1],
}

fn faces_into(s: &[usize], sets: &mut [BTreeSet<Simplex>; MAX_DIM + 1]) {
    let n = s.len();
    for mask in 1u32..(1 << n) {
        let face: Simplex = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| s[i]).collect();
        sets[face.len() - 1].insert(face);
    }
}

impl SimplicialComplex {
    /// The smallest complex containing every given simplex.
    pub fn from_maximal(maximal: &[Simplex]) -> Result<Self, HomologyError> {
        let mut sets: [BTreeSet<Simplex>; MAX_DIM + 1] = Default::default();
        for s in maximal {
            if s.is_empty() {
                return Err(HomologyError::EmptySimplex);
            }
            let mut sorted = s.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() {
                return Err(HomologyError::RepeatedVertex(s.clone()));
            }
            if sorted.len() > MAX_DIM + 1 {
                return Err(HomologyError::DimensionTooHigh(s.clone()));
            }
            faces_into(&sorted, &mut sets);
        }
        Ok(Self { simplices: sets.map(|s| s.into_iter().collect()) })
    }

    pub fn from_json(text: &str) -> Result<Self, HomologyError> {
        let maximal: Vec<Simplex> = serde_json::from_str(text).map_err(|e| HomologyError::Json(e.to_string()))?;
        Self::from_maximal(&maximal)
    }

    /// Simplices not contained in any larger simplex.
    pub fn maximal_simplices(&self) -> Vec<Simplex> {
        let mut covered: BTreeSet<&[usize]> = BTreeSet::new();
        let mut out = Vec::new();
        for q in (0..=MAX_DIM).rev() {
            for s in &self.simplices[q] {
                if !covered.contains(s.as_slice()) {
                    out.push(s.clone());
                }
            }
            if q > 0 {
                for s in &self.simplices[q] {
                    for skip in 0..s.len() {
                        let face: Simplex = s.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
                        if let Some(f) = self.simplices[q - 1].iter().find(|x| **x == face) {
                            covered.insert(f.as_slice());
                        }
                    }
                }
            }
        }
        out.sort();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.maximal_simplices()).expect("simplices serialize")
    }

    pub fn simplices(&self, q: usize) -> &[Simplex] {
        self.simplices.get(q).map_or(&[], Vec::as_slice)
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.simplices[0].iter().map(|s| s[0]).collect()
    }

    pub fn num_simplices(&self, q: usize) -> usize {
        self.simplices(q).len()
    }

    /// Highest dimension present, or `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        (0..=MAX_DIM).rev().find(|&q| !self.simplices[q].is_empty())
    }

    pub fn contains(&self, s: &[usize]) -> bool {
        !s.is_empty() && self.simplices(s.len() - 1).binary_search_by(|x| x.as_slice().cmp(s)).is_ok()
    }

    /// First simplex of `self` missing from `other`, if any.
    pub fn first_missing_from(&self, other: &Self) -> Option<&Simplex> {
        self.simplices.iter().flatten().find(|s| !other.contains(s))
    }

    pub fn is_subcomplex_of(&self, other: &Self) -> bool {
        self.first_missing_from(other).is_none()
    }

    pub fn euler_characteristic(&self) -> i64 {
        (0..=MAX_DIM).map(|q| if q % 2 == 0 { 1 } else { -1 } * self.num_simplices(q) as i64).sum()
    }

    fn index(&self, q: usize) -> BTreeMap<&[usize], usize> {
        self.simplices(q).iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect()
    }
}

/// A partition of a complex's vertices into disjoint nonempty classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexPartition {
    classes: Vec<Vec<usize>>,
}

impl VertexPartition {
    pub fn new(classes: Vec<Vec<usize>>, k: &SimplicialComplex) -> Result<Self, HomologyError> {
        let mut seen = BTreeSet::new();
        let mut classes = classes;
        for c in &mut classes {
            if c.is_empty() {
                return Err(HomologyError::Partition("empty class".into()));
            }
            c.sort_unstable();
            for &v in c.iter() {
                if !seen.insert(v) {
                    return Err(HomologyError::Partition(format!("vertex {v} appears twice")));
                }
            }
        }
        let vertices: BTreeSet<usize> = k.vertices().into_iter().collect();
        if let Some(v) = seen.difference(&vertices).next() {
            return Err(HomologyError::Partition(format!("vertex {v} is not in the complex")));
        }
        if let Some(v) = vertices.difference(&seen).next() {
            return Err(HomologyError::Partition(format!("vertex {v} is not covered")));
        }
        Ok(Self { classes })
    }

    pub fn singletons(k: &SimplicialComplex) -> Self {
        Self { classes: k.vertices().into_iter().map(|v| vec![v]).collect() }
    }

    pub fn from_json(text: &str, k: &SimplicialComplex) -> Result<Self, HomologyError> {
        let classes: Vec<Vec<usize>> = serde_json::from_str(text).map_err(|e| HomologyError::Json(e.to_string()))?;
        Self::new(classes, k)
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }
}

/// Boundary operator `∂_q`: rows are `(q−1)`-simplices, columns `q`-simplices.
/// Face `i` (vertex `i` removed) carries sign `(−1)^i`.
pub fn boundary_matrix(k: &SimplicialComplex, q: usize) -> Vec<Vec<i64>> {
    assert!(q >= 1, "boundary is defined from dimension 1");
    let rows = k.num_simplices(q - 1);
    let mut m = vec![vec![0i64; k.num_simplices(q)]; rows];
    let index = k.index(q - 1);
    for (j, s) in k.simplices(q).iter().enumerate() {
        for skip in 0..s.len() {
            let face: Simplex = s.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, &v)| v).collect();
            let r = index[face.as_slice()];
            m[r][j] = if skip % 2 == 0 { 1 } else { -1 };
        }
    }
    m
}

fn to_rational(m: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    m.iter().map(|row| row.iter().map(|&x| BigRational::from_integer(x.into())).collect()).collect()
}

/// Row-reduce in place; returns pivot columns in order.
fn rref(m: &mut [Vec<BigRational>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[c].is_zero() {
                let f = row[c].clone();
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    if !y.is_zero() {
                        *x -= &f * y;
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

fn rank(m: &[Vec<BigRational>]) -> usize {
    let mut m = m.to_vec();
    rref(&mut m).len()
}

/// Exact rank of an integer matrix.
pub fn integer_rank(m: &[Vec<i64>]) -> usize {
    rank(&to_rational(m))
}

/// Basis of the null space of `m` (`rows × cols`) as column vectors.
fn nullspace(m: &[Vec<i64>], cols: usize) -> Vec<Vec<BigRational>> {
    let mut r = to_rational(m);
    let pivots = rref(&mut r);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); cols];
            v[f] = BigRational::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[row][f].clone();
            }
            v
        })
        .collect()
}

fn boundary_rank(k: &SimplicialComplex, q: usize) -> usize {
    if q == 0 || k.num_simplices(q) == 0 || k.num_simplices(q - 1) == 0 {
        0
    } else {
        integer_rank(&boundary_matrix(k, q))
    }
}

/// `β_q = dim ker ∂_q − rank ∂_{q+1}`.
pub fn betti(k: &SimplicialComplex, q: usize) -> usize {
    let cycles = k.num_simplices(q) - boundary_rank(k, q);
    cycles - boundary_rank(k, q + 1)
}

pub fn betti_numbers(k: &SimplicialComplex) -> Vec<usize> {
    (0..=MAX_DIM).map(|q| betti(k, q)).collect()
}

/// Which realization of the glued space to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    /// One apex per class, joined to every member.
    Star,
    /// One apex per pair of class members, joined to both. Not homotopy
    /// equivalent to the glued space once a class has three or more members.
    Pairwise,
}

fn first_free_label(k: &SimplicialComplex) -> usize {
    k.vertices().last().map_or(0, |v| v + 1)
}

pub fn build_k_tilde(k: &SimplicialComplex, p: &VertexPartition) -> SimplicialComplex {
    build_glued(k, p, Construction::Star)
}

pub fn build_glued(k: &SimplicialComplex, p: &VertexPartition, construction: Construction) -> SimplicialComplex {
    let mut next = first_free_label(k);
    let mut extra: Vec<Simplex> = Vec::new();
    for class in p.classes().iter().filter(|c| c.len() >= 2) {
        match construction {
            Construction::Star => {
                let z = next;
                next += 1;
                extra.push(vec![z]);
                extra.extend(class.iter().map(|&v| vec![v, z]));
            }
            Construction::Pairwise => {
                for (i, &a) in class.iter().enumerate() {
                    for &b in &class[i + 1..] {
                        let z = next;
                        next += 1;
                        extra.push(vec![a, z]);
                        extra.push(vec![b, z]);
                    }
                }
            }
        }
    }
    let mut sets: [BTreeSet<Simplex>; MAX_DIM + 1] = Default::default();
    for (q, list) in k.simplices.iter().enumerate() {
        sets[q].extend(list.iter().cloned());
    }
    for s in &extra {
        faces_into(s, &mut sets);
    }
    SimplicialComplex { simplices: sets.map(|s| s.into_iter().collect()) }
}

/// Rank of `θ_q : H_q(K) → H_q(K̃)` induced by inclusion.
pub fn induced_map_rank(k: &SimplicialComplex, kt: &SimplicialComplex, q: usize) -> Result<usize, HomologyError> {
    if let Some(s) = k.first_missing_from(kt) {
        return Err(HomologyError::SubcomplexViolation(s.clone()));
    }
    let n = k.num_simplices(q);
    if n == 0 {
        return Ok(0);
    }
    let cycles = if q == 0 {
        (0..n)
            .map(|i| {
                let mut v = vec![BigRational::zero(); n];
                v[i] = BigRational::one();
                v
            })
            .collect()
    } else {
        nullspace(&boundary_matrix(k, q), n)
    };
    if cycles.is_empty() {
        return Ok(0);
    }
    let kt_index = kt.index(q);
    let dim = kt.num_simplices(q);
    // Rows are vectors in the q-chains of K̃; rank is unaffected by transposition.
    let boundaries: Vec<Vec<BigRational>> = if kt.num_simplices(q + 1) == 0 {
        Vec::new()
    } else {
        let b = boundary_matrix(kt, q + 1);
        (0..kt.num_simplices(q + 1)).map(|j| (0..dim).map(|i| BigRational::from_integer(b[i][j].into())).collect()).collect()
    };
    let mut combined = boundaries.clone();
    for z in cycles {
        let mut v = vec![BigRational::zero(); dim];
        for (i, x) in z.into_iter().enumerate() {
            v[kt_index[k.simplices(q)[i].as_slice()]] = x;
        }
        combined.push(v);
    }
    Ok(rank(&combined) - rank(&boundaries))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub theta0_onto: bool,
    pub theta1_injective: bool,
    pub theta2_iso: bool,
    pub theta3_iso: bool,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        self.theta0_onto && self.theta1_injective && self.theta2_iso && self.theta3_iso
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomologyReport {
    pub construction: Construction,
    pub betti_k: Vec<usize>,
    pub betti_ktilde: Vec<usize>,
    pub theta_ranks: Vec<usize>,
    pub verdicts: Verdicts,
    /// For non-star constructions: whether the Betti numbers of the glued
    /// complex agree with the star construction's.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches_star: Option<bool>,
}

impl HomologyReport {
    /// All verdicts hold and, if present, the star comparison agrees.
    pub fn strict_pass(&self) -> bool {
        self.verdicts.all() && self.matches_star != Some(false)
    }
}

pub fn verify_theorem(k: &SimplicialComplex, p: &VertexPartition) -> HomologyReport {
    verify_with(k, p, Construction::Star)
}

pub fn verify_with(k: &SimplicialComplex, p: &VertexPartition, construction: Construction) -> HomologyReport {
    let kt = build_glued(k, p, construction);
    let betti_k = betti_numbers(k);
    let betti_ktilde = betti_numbers(&kt);
    let theta_ranks: Vec<usize> =
        (0..=MAX_DIM).map(|q| induced_map_rank(k, &kt, q).expect("K is a subcomplex by construction")).collect();
    let iso = |q: usize| theta_ranks[q] == betti_k[q] && theta_ranks[q] == betti_ktilde[q];
    let verdicts = Verdicts {
        theta0_onto: theta_ranks[0] == betti_ktilde[0],
        theta1_injective: theta_ranks[1] == betti_k[1],
        theta2_iso: iso(2),
        theta3_iso: iso(3),
    };
    let matches_star = match construction {
        Construction::Star => None,
        _ => Some(betti_numbers(&build_k_tilde(k, p)) == betti_ktilde),
    };
    HomologyReport { construction, betti_k, betti_ktilde, theta_ranks, verdicts, matches_star }
}

/// For a complex of dimension ≤ 1: first Betti number of the glued graph,
/// `|E| − #classes + #components`, counted by union-find.
pub fn quotient_graph_betti1(k: &SimplicialComplex, p: &VertexPartition) -> usize {
    assert!(k.dim().is_none_or(|d| d <= 1), "graph formula needs a 1-complex");
    let class_of: BTreeMap<usize, usize> =
        p.classes().iter().enumerate().flat_map(|(j, c)| c.iter().map(move |&v| (v, j))).collect();
    let mut parent: Vec<usize> = (0..p.classes().len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    for e in k.simplices(1) {
        let (a, b) = (find(&mut parent, class_of[&e[0]]), find(&mut parent, class_of[&e[1]]));
        parent[a] = b;
    }
    let components = (0..parent.len()).filter(|&j| find(&mut parent, j) == j).count();
    k.num_simplices(1) + components - p.classes().len()
}

/// Clique complex of a random graph on `n` vertices with edge probability
/// `p`, truncated to dimension three.
pub fn random_flag_complex(n: usize, p: f64, rng: &mut impl Rng) -> SimplicialComplex {
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let e = rng.random_bool(p);
            adj[i][j] = e;
            adj[j][i] = e;
        }
    }
    let mut maximal: Vec<Simplex> = (0..n).map(|v| vec![v]).collect();
    for a in 0..n {
        for b in a + 1..n {
            if !adj[a][b] {
                continue;
            }
            maximal.push(vec![a, b]);
            for c in b + 1..n {
                if !(adj[a][c] && adj[b][c]) {
                    continue;
                }
                maximal.push(vec![a, b, c]);
                for d in c + 1..n {
                    if adj[a][d] && adj[b][d] && adj[c][d] {
                        maximal.push(vec![a, b, c, d]);
                    }
                }
            }
        }
    }
    SimplicialComplex::from_maximal(&maximal).expect("cliques are valid simplices")
}

/// Assign each vertex to one of a random number of classes.
pub fn random_partition(k: &SimplicialComplex, rng: &mut impl Rng) -> VertexPartition {
    let vertices = k.vertices();
    let count = rng.random_range(1..=vertices.len().max(1));
    let mut classes = vec![Vec::new(); count];
    for v in vertices {
        classes[rng.random_range(0..count)].push(v);
    }
    classes.retain(|c| !c.is_empty());
    VertexPartition::new(classes, k).expect("every vertex assigned once")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuzzCase {
    pub seed: u64,
    pub maximal: Vec<Simplex>,
    pub partition: Vec<Vec<usize>>,
    pub report: HomologyReport,
}

/// Generate and check `cases` random instances in parallel. Case `i` uses
/// seed `seed + i`, with 1–8 vertices and edge probability 0.4.
pub fn fuzz(cases: usize, seed: u64) -> Vec<FuzzCase> {
    (0..cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i));
            let n = rng.random_range(1..=8);
            let k = random_flag_complex(n, 0.4, &mut rng);
            let p = random_partition(&k, &mut rng);
            let report = verify_theorem(&k, &p);
            FuzzCase { seed: seed.wrapping_add(i), maximal: k.maximal_simplices(), partition: p.classes().to_vec(), report }
        })
        .collect()
}

/// Sum of absolute entries of `∂_{q−1} ∂_q`; zero for a valid complex.
pub fn boundary_square_norm(k: &SimplicialComplex, q: usize) -> i64 {
    if q < 2 || k.num_simplices(q) == 0 {
        return 0;
    }
    let a = boundary_matrix(k, q - 1);
    let b = boundary_matrix(k, q);
    let mut total = 0i64;
    for row in &a {
        for j in 0..k.num_simplices(q) {
            let s: i64 = row.iter().zip(&b).map(|(x, brow)| x * brow[j]).sum();
            total += s.abs();
        }
    }
    total
}
