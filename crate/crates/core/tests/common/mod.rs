#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qcnet::structio::{CrystalStructure, Mat3};
use qcnet::trainer::lattice_from_parameters;

pub const CATIO3_POSCAR: &str = include_str!("../data/CaTiO3.vasp");

/// Random triclinic cell with `1..=max_atoms` atoms no closer than `min_sep` Å.
pub fn random_structure(rng: &mut ChaCha8Rng, max_atoms: usize, min_sep: f64) -> CrystalStructure {
    loop {
        let len: [f64; 3] = std::array::from_fn(|_| rng.random_range(3.0..7.0));
        let ang: [f64; 3] = std::array::from_fn(|_| rng.random_range(60.0f64..120.0).to_radians());
        let lattice = lattice_from_parameters(len, ang);
        let n = rng.random_range(1..=max_atoms);
        let species = (0..n).map(|_| rng.random_range(1..=9u32)).collect();
        let frac = (0..n).map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0))).collect();
        let Ok(s) = CrystalStructure::new(lattice, species, frac, None) else { continue };
        if s.volume() < 0.3 * len.iter().product::<f64>() {
            continue;
        }
        if min_separation(&s) >= min_sep {
            return s;
        }
    }
}

/// Smallest distance between distinct points of the crystal, by scanning a
/// fixed image window.
pub fn min_separation(s: &CrystalStructure) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..s.num_atoms() {
        for j in 0..s.num_atoms() {
            for o in offsets(2) {
                if i == j && o == [0, 0, 0] {
                    continue;
                }
                best = best.min(cart_distance(s, i, j, o));
            }
        }
    }
    best
}

pub fn offsets(r: i32) -> impl Iterator<Item = [i32; 3]> {
    (-r..=r).flat_map(move |a| (-r..=r).flat_map(move |b| (-r..=r).map(move |c| [a, b, c])))
}

/// `|cart(j) + o·L − cart(i)|` computed in Cartesian space.
pub fn cart_distance(s: &CrystalStructure, i: usize, j: usize, o: [i32; 3]) -> f64 {
    let l = s.lattice();
    let pi = s.cartesian(i);
    let pj = s.cartesian(j);
    (0..3)
        .map(|a| {
            let shift: f64 = (0..3).map(|r| o[r] as f64 * l[r][a]).sum();
            (pj[a] + shift - pi[a]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Rotation about a random axis by a random angle (Rodrigues).
pub fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis: [f64; 3] = loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 {
            break v.map(|x| x / n);
        }
    };
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = t.sin_cos();
    let [x, y, z] = axis;
    [
        [c + x * x * (1.0 - c), x * y * (1.0 - c) - z * s, x * z * (1.0 - c) + y * s],
        [y * x * (1.0 - c) + z * s, c + y * y * (1.0 - c), y * z * (1.0 - c) - x * s],
        [z * x * (1.0 - c) - y * s, z * y * (1.0 - c) + x * s, c + z * z * (1.0 - c)],
    ]
}
