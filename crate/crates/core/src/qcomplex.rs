//! The two-dimensional quotient complex.
//!
//! Triangles are the directed 3-cliques of the infinite periodic graph, read
//! back into the unit cell. A triangle on cell vertices `(a, b, c)` uses three
//! edges in the fixed positional order
//!
//! ```text
//! e1 = (a -> b, o1) < e2 = (b -> c, o2) < e3 = (a -> c, o3),   o3 = o1 + o2
//! ```
//!
//! Self-loop edges may take part, so `a`, `b`, `c` need not be distinct cell
//! vertices; only their images in the cover have to be.

use std::collections::HashMap;

use serde::Serialize;

use crate::periodic::{Offset, PeriodicEdge, PeriodicGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triangle {
    /// Edge indices `[e1, e2, e3]` in positional order.
    #[serde(rename = "e")]
    pub edges: [usize; 3],
    pub offsets: [Offset; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientComplex {
    pub graph: PeriodicGraph,
    pub triangles: Vec<Triangle>,
    /// Incoming edge indices per vertex, in canonical edge order.
    pub vertex_in_edges: Vec<Vec<usize>>,
    /// Per edge: `(lower-ordered upper-adjacent edge, shared triangle)`.
    pub edge_neighbors: Vec<Vec<(usize, usize)>>,
}

fn add(a: Offset, b: Offset) -> Offset {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Offset, b: Offset) -> Offset {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Cover-space points of a candidate triangle with the `c` image at the
/// origin cell: `a` sits at offset `o3`, `b` at `o2`.
fn images_distinct(e1: &PeriodicEdge, e2: &PeriodicEdge, e3: &PeriodicEdge) -> bool {
    let pa = (e3.src, e3.offset);
    let pb = (e2.src, e2.offset);
    let pc = (e2.dst, [0, 0, 0]);
    debug_assert_eq!(e1.src, e3.src);
    pa != pb && pb != pc && pa != pc
}

pub fn build_complex(graph: PeriodicGraph) -> QuotientComplex {
    let n = graph.n_vertices;
    let m = graph.edges.len();

    let mut lookup: HashMap<(usize, usize, Offset), usize> = HashMap::with_capacity(m);
    let mut out_edges = vec![Vec::new(); n];
    let mut vertex_in_edges = vec![Vec::new(); n];
    for (i, e) in graph.edges.iter().enumerate() {
        lookup.insert((e.src, e.dst, e.offset), i);
        out_edges[e.src].push(i);
        vertex_in_edges[e.dst].push(i);
    }

    let mut triangles = Vec::new();
    for (i3, e3) in graph.edges.iter().enumerate() {
        for &i1 in &out_edges[e3.src] {
            let e1 = &graph.edges[i1];
            let o2 = sub(e3.offset, e1.offset);
            let Some(&i2) = lookup.get(&(e1.dst, e3.dst, o2)) else {
                continue;
            };
            let e2 = &graph.edges[i2];
            debug_assert_eq!(add(e1.offset, e2.offset), e3.offset);
            if images_distinct(e1, e2, e3) {
                triangles.push(Triangle { edges: [i1, i2, i3], offsets: [e1.offset, e2.offset, e3.offset] });
            }
        }
    }
    triangles.sort();

    let mut edge_neighbors = vec![Vec::new(); m];
    for (t, tri) in triangles.iter().enumerate() {
        let [e1, e2, e3] = tri.edges;
        edge_neighbors[e2].push((e1, t));
        edge_neighbors[e3].push((e1, t));
        edge_neighbors[e3].push((e2, t));
    }

    QuotientComplex { graph, triangles, vertex_in_edges, edge_neighbors }
}

impl QuotientComplex {
    pub fn num_vertices(&self) -> usize {
        self.graph.n_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.graph.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Side lengths `(d1, d2, d3)` of a triangle in positional edge order.
    pub fn triangle_sides(&self, t: usize) -> [f64; 3] {
        self.triangles[t].edges.map(|e| self.graph.edges[e].dist)
    }

    /// One `(neighbor vertex, coface edge)` per incoming edge of `v`.
    pub fn vertex_messaging_pairs(&self, v: usize) -> Vec<(usize, usize)> {
        self.vertex_in_edges[v].iter().map(|&e| (self.graph.edges[e].src, e)).collect()
    }

    /// `(neighbor edge, coface triangle)` pairs feeding edge `e`.
    pub fn edge_messaging_pairs(&self, e: usize) -> Vec<(usize, usize)> {
        self.edge_neighbors[e].clone()
    }

    /// Canonical JSON dump: `{n_vertices, edges, triangles}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            n_vertices: usize,
            k: usize,
            edges: &'a [PeriodicEdge],
            triangles: &'a [Triangle],
        }
        serde_json::to_string(&Dump {
            n_vertices: self.graph.n_vertices,
            k: self.graph.k,
            edges: &self.graph.edges,
            triangles: &self.triangles,
        })
        .expect("complex serializes")
    }
}
