//! Periodic k-nearest-neighbor search and the directed quotient graph.
//!
//! An edge `(src, dst, offset)` stands for the directed bond from the image of
//! atom `src` translated by `offset · L` to atom `dst` in the home cell. Every
//! atom receives exactly `k` such edges.
//!
//! Distances closer than [`DIST_TOL`] are treated as ties. Ties are grouped by
//! chaining sorted distances whose consecutive gaps are within the tolerance,
//! and ordered inside a group by source index, then offset lexicographically.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structio::{norm, vec_mat, CrystalStructure};

/// Distance equality tolerance in Å.
pub const DIST_TOL: f64 = 1e-8;

/// Hard ceiling on the shell expansion. Reaching it means the certification
/// logic is broken, not that the input is bad.
const MAX_SHELL: i32 = 512;

pub type Offset = [i32; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodicError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vertex index {0} out of range")]
    BadVertex(usize),
    #[error(
        "search radius {radius} does not certify vertex {vertex}: k-th distance {kth:.6} exceeds covered radius {covered:.6}"
    )]
    RadiusTooSmall { radius: i32, vertex: usize, kth: f64, covered: f64 },
    #[error("neighbor search did not converge for vertex {0} (internal error)")]
    InsufficientCandidates(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicEdge {
    pub src: usize,
    pub dst: usize,
    pub offset: Offset,
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicGraph {
    pub n_vertices: usize,
    pub k: usize,
    pub edges: Vec<PeriodicEdge>,
}

impl PeriodicGraph {
    pub fn in_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.dst == v).count()
    }

    /// Canonical JSON-Lines dump, one edge per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("edge serializes"));
        }
        out
    }
}

/// `|cart(src) + offset·L − cart(dst)|`, evaluated in fractional space first.
/// Both the fast search and the brute-force oracle use this exact expression
/// so their distances agree bit for bit.
pub fn image_distance(s: &CrystalStructure, src: usize, dst: usize, offset: Offset) -> f64 {
    let fs = s.frac_coords()[src];
    let fd = s.frac_coords()[dst];
    let d = [
        (fs[0] + offset[0] as f64) - fd[0],
        (fs[1] + offset[1] as f64) - fd[1],
        (fs[2] + offset[2] as f64) - fd[2],
    ];
    norm(&vec_mat(&d, s.lattice()))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub dist: f64,
    pub src: usize,
    pub offset: Offset,
    pub rank: usize,
}

/// Sort candidates into canonical order and return the distance of the last
/// member of the tie group holding the `k`-th candidate (if there are `k`).
pub(crate) fn canonical_order(cands: &mut [Candidate], k: usize) -> Option<f64> {
    cands.sort_by(|a, b| {
        a.dist
            .total_cmp(&b.dist)
            .then(a.src.cmp(&b.src))
            .then(a.offset.cmp(&b.offset))
    });
    let mut rank = 0;
    for i in 0..cands.len() {
        if i > 0 && cands[i].dist - cands[i - 1].dist > DIST_TOL {
            rank += 1;
        }
        cands[i].rank = rank;
    }
    // the group of the k-th element must be read before re-sorting
    let group_end = if cands.len() >= k {
        let r = cands[k - 1].rank;
        cands.iter().rev().find(|c| c.rank == r).map(|c| c.dist)
    } else {
        None
    };
    cands.sort_by(|a, b| {
        a.rank
            .cmp(&b.rank)
            .then(a.src.cmp(&b.src))
            .then(a.offset.cmp(&b.offset))
    });
    group_end
}

/// Radius of the largest ball around `dst` fully covered when all offsets
/// with `|o_i| <= radius` are enumerated for every source atom.
pub(crate) fn covered_radius(s: &CrystalStructure, dst: usize, radius: i32) -> f64 {
    let h = s.interplanar_spacings();
    let fd = s.frac_coords()[dst];
    let mut best = f64::INFINITY;
    for fs in s.frac_coords() {
        for a in 0..3 {
            let reach = (radius as f64 - (fs[a] - fd[a]).abs()) * h[a];
            best = best.min(reach);
        }
    }
    best.max(0.0)
}

fn shell_candidates(s: &CrystalStructure, dst: usize, radius: i32, out: &mut Vec<Candidate>) {
    out.clear();
    for src in 0..s.num_atoms() {
        for a in -radius..=radius {
            for b in -radius..=radius {
                for c in -radius..=radius {
                    let offset = [a, b, c];
                    if src == dst && offset == [0, 0, 0] {
                        continue;
                    }
                    let dist = image_distance(s, src, dst, offset);
                    out.push(Candidate { dist, src, offset, rank: 0 });
                }
            }
        }
    }
}

/// Directed k-NN graph over all periodic images. The offset window grows one
/// shell at a time until every tie group up to the `k`-th neighbor lies
/// strictly inside the ball the window certifiably covers.
pub fn neighbor_list(s: &CrystalStructure, k: usize) -> Result<PeriodicGraph, PeriodicError> {
    if k == 0 {
        return Err(PeriodicError::ZeroK);
    }
    let n = s.num_atoms();
    let mut edges = Vec::with_capacity(n * k);
    let mut cands = Vec::new();
    for dst in 0..n {
        let mut radius = 1;
        loop {
            shell_candidates(s, dst, radius, &mut cands);
            if let Some(group_end) = canonical_order(&mut cands, k) {
                if group_end + DIST_TOL < covered_radius(s, dst, radius) {
                    break;
                }
            }
            radius += 1;
            if radius > MAX_SHELL {
                return Err(PeriodicError::InsufficientCandidates(dst));
            }
        }
        edges.extend(cands[..k].iter().map(|c| PeriodicEdge { src: c.src, dst, offset: c.offset, dist: c.dist }));
    }
    Ok(PeriodicGraph { n_vertices: n, k, edges })
}

/// Exhaustive reference search over the fixed window `|o_i| <= radius`.
pub fn brute_force_neighbors(s: &CrystalStructure, k: usize, radius: i32) -> Result<PeriodicGraph, PeriodicError> {
    if k == 0 {
        return Err(PeriodicError::ZeroK);
    }
    let n = s.num_atoms();
    let mut edges = Vec::with_capacity(n * k);
    for dst in 0..n {
        let mut all = Vec::new();
        for src in 0..n {
            for a in -radius..=radius {
                for b in -radius..=radius {
                    for c in -radius..=radius {
                        if src != dst || (a, b, c) != (0, 0, 0) {
                            let offset = [a, b, c];
                            all.push(Candidate { dist: image_distance(s, src, dst, offset), src, offset, rank: 0 });
                        }
                    }
                }
            }
        }
        let covered = covered_radius(s, dst, radius);
        let too_small = |kth: f64| PeriodicError::RadiusTooSmall { radius, vertex: dst, kth, covered };
        if all.len() < k {
            return Err(too_small(f64::INFINITY));
        }
        canonical_order(&mut all, k);
        let kth = all[..k].iter().map(|c| c.dist).fold(0.0, f64::max);
        if kth > covered {
            return Err(too_small(kth));
        }
        edges.extend(all[..k].iter().map(|c| PeriodicEdge { src: c.src, dst, offset: c.offset, dist: c.dist }));
    }
    Ok(PeriodicGraph { n_vertices: n, k, edges })
}

/// Shortest vector from atom `i` to any image of atom `j` (excluding `j = i`
/// at zero offset). Returns the distance and the offset applied to `j`.
pub fn min_image_distance(s: &CrystalStructure, i: usize, j: usize) -> Result<(f64, Offset), PeriodicError> {
    let n = s.num_atoms();
    if i >= n {
        return Err(PeriodicError::BadVertex(i));
    }
    if j >= n {
        return Err(PeriodicError::BadVertex(j));
    }
    for radius in 1..=MAX_SHELL {
        let mut cands = Vec::new();
        for a in -radius..=radius {
            for b in -radius..=radius {
                for c in -radius..=radius {
                    let offset = [a, b, c];
                    if i == j && offset == [0, 0, 0] {
                        continue;
                    }
                    cands.push(Candidate { dist: image_distance(s, j, i, offset), src: j, offset, rank: 0 });
                }
            }
        }
        let Some(group_end) = canonical_order(&mut cands, 1) else {
            continue;
        };
        let h = s.interplanar_spacings();
        let (fi, fj) = (s.frac_coords()[i], s.frac_coords()[j]);
        let covered = (0..3)
            .map(|a| (radius as f64 - (fj[a] - fi[a]).abs()) * h[a])
            .fold(f64::INFINITY, f64::min);
        if group_end + DIST_TOL < covered {
            return Ok((cands[0].dist, cands[0].offset));
        }
    }
    Err(PeriodicError::InsufficientCandidates(i))
}

/// Mean over atoms of the distance to the nearest periodic neighbor.
pub fn mean_nearest_neighbor_distance(s: &CrystalStructure) -> Result<f64, PeriodicError> {
    let g = neighbor_list(s, 1)?;
    Ok(g.edges.iter().map(|e| e.dist).sum::<f64>() / g.edges.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structio::{parse_structure, StructureFormat};

    pub(crate) fn cubic(a: f64) -> CrystalStructure {
        CrystalStructure::new([[a, 0.0, 0.0], [0.0, a, 0.0], [0.0, 0.0, a]], vec![11], vec![[0.0; 3]], None).unwrap()
    }

    fn catio3() -> CrystalStructure {
        parse_structure(crate::testdata::CATIO3_POSCAR, StructureFormat::Poscar).unwrap()
    }

    #[test]
    fn simple_cubic_six_neighbors() {
        let g = neighbor_list(&cubic(1.0), 6).unwrap();
        assert_eq!(g.edges.len(), 6);
        let mut offsets: Vec<Offset> = g.edges.iter().map(|e| e.offset).collect();
        offsets.sort();
        assert_eq!(offsets, vec![[-1, 0, 0], [0, -1, 0], [0, 0, -1], [0, 0, 1], [0, 1, 0], [1, 0, 0]]);
        assert!(g.edges.iter().all(|e| e.src == 0 && e.dst == 0 && e.dist == 1.0));
    }

    #[test]
    fn simple_cubic_twelve_uses_lexicographic_tie_break() {
        let g = neighbor_list(&cubic(1.0), 12).unwrap();
        assert_eq!(g.edges.len(), 12);
        let diag: Vec<Offset> = g.edges.iter().filter(|e| e.dist > 1.2).map(|e| e.offset).collect();
        assert_eq!(
            diag,
            vec![[-1, -1, 0], [-1, 0, -1], [-1, 0, 1], [-1, 1, 0], [0, -1, -1], [0, -1, 1]]
        );
        assert_eq!(neighbor_list(&cubic(1.0), 12).unwrap(), g);
    }

    #[test]
    fn perovskite_sixty_edges() {
        let s = catio3();
        let g = neighbor_list(&s, 12).unwrap();
        assert_eq!(g.edges.len(), 60);
        for v in 0..5 {
            assert_eq!(g.in_degree(v), 12);
        }
        // oxygen vertices 2..5: two nearest in-edges come from Ti (index 1)
        for v in 2..5 {
            let inc: Vec<_> = g.edges.iter().filter(|e| e.dst == v).collect();
            assert_eq!(inc[0].src, 1);
            assert_eq!(inc[1].src, 1);
            assert!((inc[0].dist - 1.95).abs() < 1e-12);
            assert!(inc[2].dist > 2.7);
        }
        assert_eq!(brute_force_neighbors(&s, 12, 3).unwrap(), g);
    }

    #[test]
    fn edges_are_globally_sorted() {
        let g = neighbor_list(&catio3(), 12).unwrap();
        for w in g.edges.windows(2) {
            assert!(w[0].dst <= w[1].dst);
            if w[0].dst == w[1].dst {
                assert!(w[0].dist <= w[1].dist + DIST_TOL);
            }
        }
        assert!(g.edges.iter().all(|e| e.src != e.dst || e.offset != [0, 0, 0]));
    }

    #[test]
    fn brute_force_radius_checks() {
        let s = cubic(1.0);
        assert_eq!(brute_force_neighbors(&s, 6, 1).unwrap(), neighbor_list(&s, 6).unwrap());
        assert!(matches!(
            brute_force_neighbors(&s, 1, 0),
            Err(PeriodicError::RadiusTooSmall { radius: 0, .. })
        ));
        assert!(matches!(brute_force_neighbors(&s, 12, 1), Err(PeriodicError::RadiusTooSmall { .. })));
        assert_eq!(neighbor_list(&s, 0), Err(PeriodicError::ZeroK));
    }

    #[test]
    fn min_image_examples() {
        let (d, o) = min_image_distance(&cubic(1.0), 0, 0).unwrap();
        assert_eq!(d, 1.0);
        assert_ne!(o, [0, 0, 0]);

        let l = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        let s = CrystalStructure::new(l, vec![1, 1], vec![[0.0; 3], [0.4, 0.0, 0.0]], None).unwrap();
        assert_eq!(min_image_distance(&s, 0, 1).unwrap(), (0.8, [0, 0, 0]));
        assert!(min_image_distance(&s, 0, 2).is_err());
    }

    #[test]
    fn min_image_is_symmetric() {
        let l = [[3.1, 0.2, 0.0], [0.7, 2.9, 0.1], [0.3, -0.4, 3.3]];
        let s = CrystalStructure::new(l, vec![1, 8, 6], vec![[0.1, 0.2, 0.9], [0.7, 0.05, 0.4], [0.45, 0.6, 0.2]], None)
            .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (dij, oij) = min_image_distance(&s, i, j).unwrap();
                let (dji, oji) = min_image_distance(&s, j, i).unwrap();
                assert!((dij - dji).abs() < 1e-12);
                if i != j {
                    assert_eq!(oij, oji.map(|x| -x));
                }
            }
        }
    }

    #[test]
    fn rotation_leaves_distances_unchanged() {
        let s = catio3();
        let (c, sn) = (0.3f64.cos(), 0.3f64.sin());
        let rot = [[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]];
        let g0 = neighbor_list(&s, 12).unwrap();
        let g1 = neighbor_list(&s.rotated(&rot), 12).unwrap();
        for (a, b) in g0.edges.iter().zip(&g1.edges) {
            assert_eq!((a.src, a.dst, a.offset), (b.src, b.dst, b.offset));
            assert!((a.dist - b.dist).abs() < 1e-9);
        }
    }

    #[test]
    fn jsonl_dump() {
        let g = neighbor_list(&cubic(1.0), 6).unwrap();
        let text = g.to_jsonl();
        assert_eq!(text.lines().count(), 6);
        let first: PeriodicEdge = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first, g.edges[0]);
    }
}
