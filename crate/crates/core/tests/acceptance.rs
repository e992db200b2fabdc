//! Acceptance run: one pass/fail line per criterion, nonzero exit on any failure.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{cart_distance, offsets, random_rotation, random_structure, CATIO3_POSCAR};
use qcnet::featurize::{
    edge_features, rbf_expand, triangle_features, AtomFeatureTable, RbfBank, EDGE_DIM, HIDDEN_DIM, RBF_SIGMAS,
    TRIANGLE_DIM, VERTEX_DIM,
};
use qcnet::homlab::{
    betti_numbers, boundary_matrix, build_glued, build_k_tilde, fuzz, verify_with, Construction, SimplicialComplex,
    VertexPartition, MAX_DIM,
};
use qcnet::periodic::{brute_force_neighbors, neighbor_list, PeriodicEdge, PeriodicGraph};
use qcnet::qcomplex::build_complex;
use qcnet::sformer::{GraphBatch, LayerRef, Mode, ModelConfig, SformerModel, EDGE_NODE_LAYERS, NODE_LAYERS};
use qcnet::structio::{parse_structure, CrystalStructure, StructureFormat};
use qcnet::tape::LossKind;
use qcnet::trainer::{
    evaluate, history_jsonl, metrics, prepare_samples, prepare_structure, synthetic_dataset, train, LossChoice,
    TrainConfig,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || format!("{what} took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn neighbor_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cases = 200;
    for i in 0..cases {
        let s = random_structure(&mut rng, 6, 0.5);
        let fast = neighbor_list(&s, 12).map_err(|e| format!("case {i}: {e}"))?;
        let slow = brute_force_neighbors(&s, 12, 4).map_err(|e| format!("case {i}: {e}"))?;
        check(fast == slow, || format!("case {i}: fast and brute-force edge lists differ"))?;
        // independent distance check: the k-th neighbor distance matches a Cartesian scan
        for dst in 0..s.num_atoms() {
            let mut all: Vec<f64> = (0..s.num_atoms())
                .flat_map(|src| offsets(4).filter(move |&o| src != dst || o != [0, 0, 0]).map(move |o| (src, o)))
                .map(|(src, o)| cart_distance(&s, dst, src, o))
                .collect();
            all.sort_by(f64::total_cmp);
            let mut got: Vec<f64> = fast.edges.iter().filter(|e| e.dst == dst).map(|e| e.dist).collect();
            got.sort_by(f64::total_cmp);
            for (a, b) in got.iter().zip(&all) {
                check((a - b).abs() <= 1e-9, || format!("case {i}: neighbor distance {a} vs scan {b}"))?;
            }
        }
    }
    within(t0.elapsed(), 60.0, "neighbor oracle")?;
    Ok(format!("{cases}/{cases} structures identical to brute force"))
}

fn complex_counts() -> Outcome {
    let s = parse_structure(CATIO3_POSCAR, StructureFormat::Poscar).map_err(|e| e.to_string())?;
    let c = build_complex(neighbor_list(&s, 12).map_err(|e| e.to_string())?);
    check(c.num_vertices() == 5 && c.num_edges() == 60, || {
        format!("CaTiO3: {} vertices, {} edges", c.num_vertices(), c.num_edges())
    })?;
    let cubic = CrystalStructure::new([[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]], vec![29], vec![[0.0; 3]], None)
        .map_err(|e| e.to_string())?;
    let c = build_complex(neighbor_list(&cubic, 6).map_err(|e| e.to_string())?);
    let found: BTreeSet<[i32; 3]> = c.graph.edges.iter().map(|e| e.offset).collect();
    let expected: BTreeSet<[i32; 3]> =
        [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]].into_iter().collect();
    check(c.num_edges() == 6 && c.graph.edges.iter().all(|e| e.src == 0 && e.dst == 0), || {
        format!("cubic: {} edges, expected 6 self-loops", c.num_edges())
    })?;
    check(found == expected, || format!("cubic offsets {found:?}"))?;
    check(c.num_triangles() == 0, || format!("cubic: {} triangles", c.num_triangles()))?;
    Ok("CaTiO3 5 vertices / 60 edges; cubic 6 unit self-loops, 0 triangles".into())
}

/// Triangles by exhaustive search over edge triples.
fn oracle_triangles(g: &PeriodicGraph) -> BTreeSet<[usize; 3]> {
    let e = &g.edges;
    let mut out = BTreeSet::new();
    for (i1, a) in e.iter().enumerate() {
        for (i2, b) in e.iter().enumerate() {
            if b.src != a.dst {
                continue;
            }
            for (i3, c) in e.iter().enumerate() {
                let closes = c.src == a.src
                    && c.dst == b.dst
                    && (0..3).all(|d| c.offset[d] == a.offset[d] + b.offset[d]);
                // the three corners must be distinct points of the cover
                let pa = (a.src, c.offset);
                let pb = (b.src, b.offset);
                let pc = (b.dst, [0, 0, 0]);
                if closes && pa != pb && pb != pc && pa != pc {
                    out.insert([i1, i2, i3]);
                }
            }
        }
    }
    out
}

fn random_graph(rng: &mut ChaCha8Rng) -> PeriodicGraph {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=24);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    while edges.len() < m {
        let src = rng.random_range(0..n);
        let dst = rng.random_range(0..n);
        let offset: [i32; 3] = std::array::from_fn(|_| rng.random_range(-1..=1));
        if src == dst && offset == [0, 0, 0] || !seen.insert((src, dst, offset)) {
            continue;
        }
        edges.push(PeriodicEdge { src, dst, offset, dist: 1.0 });
    }
    edges.sort_by_key(|e| (e.dst, e.src, e.offset));
    PeriodicGraph { n_vertices: n, k: 0, edges }
}

fn triangle_closure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cases = 300;
    let mut total = 0;
    for i in 0..cases {
        let g = random_graph(&mut rng);
        let expected = oracle_triangles(&g);
        let c = build_complex(g);
        for t in &c.triangles {
            let [o1, o2, o3] = t.offsets;
            check((0..3).all(|d| o3[d] == o1[d] + o2[d]), || format!("graph {i}: triangle {t:?} does not close"))?;
            for (slot, &e) in t.edges.iter().enumerate() {
                check(c.graph.edges[e].offset == t.offsets[slot], || format!("graph {i}: offset mismatch in {t:?}"))?;
            }
        }
        let got: BTreeSet<[usize; 3]> = c.triangles.iter().map(|t| t.edges).collect();
        check(got == expected, || format!("graph {i}: {} triangles, exhaustive search finds {}", got.len(), expected.len()))?;
        total += got.len();
    }
    for i in 0..10 {
        let s = random_structure(&mut rng, 3, 0.5);
        let c = build_complex(neighbor_list(&s, 12).map_err(|e| e.to_string())?);
        check(c.triangles.iter().all(|t| (0..3).all(|d| t.offsets[2][d] == t.offsets[0][d] + t.offsets[1][d])), || {
            format!("structure {i}: open triangle")
        })?;
        total += c.num_triangles();
    }
    Ok(format!("{cases} random graphs + 10 crystals, {total} triangles all closed and complete"))
}

fn feature_dims() -> Outcome {
    let table = AtomFeatureTable::placeholder(0);
    let s = parse_structure(CATIO3_POSCAR, StructureFormat::Poscar).map_err(|e| e.to_string())?;
    let (c, raw) = prepare_structure(&s, 12, &table).map_err(|e| e.to_string())?;
    check(raw.h0.dim() == (5, 92) && raw.h1.dim() == (60, 376) && raw.h2.dim() == (c.num_triangles(), 216), || {
        format!("raw shapes {:?} {:?} {:?}", raw.h0.dim(), raw.h1.dim(), raw.h2.dim())
    })?;
    check((VERTEX_DIM, EDGE_DIM, TRIANGLE_DIM, HIDDEN_DIM) == (92, 376, 216, 64), || "dimension constants".into())?;
    let model = SformerModel::new(ModelConfig::default(), 0);
    for (emb, (raw, w)) in model.embeddings().iter().zip([(&raw.h0, 92), (&raw.h1, 376), (&raw.h2, 216)]) {
        let out = emb.apply(raw);
        check(emb.weight.dim() == (w, 64) && out.ncols() == 64, || format!("embedding {w} -> {}", out.ncols()))?;
    }
    let v = vec![0.0; 92];
    check(edge_features(1.0, &v, &v).map_err(|e| e.to_string())?.len() == 376, || "edge vector length".into())?;
    check(triangle_features(1.0, 2.0, 2.5).map_err(|e| e.to_string())?.len() == 216, || "triangle vector length".into())?;

    for bank in [RbfBank::edge_bank(), RbfBank::triangle_bank()] {
        check(bank.sigmas() == RBF_SIGMAS, || "rbf widths".into())?;
        let n = bank.centers().len();
        for (i, &c) in bank.centers().iter().enumerate() {
            let r = rbf_expand(c, &bank);
            for s in 0..RBF_SIGMAS.len() {
                check(r[s * n + i] == 1.0, || format!("rbf at center {c} gives {}", r[s * n + i]))?;
            }
        }
    }
    // d = 0.75 maps to -1.0; compare the edge RBF block against direct Gaussians at -1.0
    let f = edge_features(0.75, &v, &v).map_err(|e| e.to_string())?;
    let bank = RbfBank::edge_bank();
    let direct = rbf_expand(-1.0, &bank);
    check(f[..bank.dim()] == direct[..], || "edge block is not the expansion of -1.0".into())?;
    let mut oracle = Vec::new();
    for &sg in bank.sigmas() {
        for &c in bank.centers() {
            oracle.push((-(-1.0f64 - c).powi(2) / sg).exp());
        }
    }
    let worst = oracle.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(worst <= 1e-15, || format!("rbf layout differs from sigma-major Gaussians by {worst}"))?;
    Ok("92/376/216/64, rbf peaks 1.0, d=0.75 -> -1.0".into())
}

fn invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let table = AtomFeatureTable::placeholder(0);
    let model = SformerModel::new(ModelConfig::default(), 17);
    let predict = |s: &CrystalStructure| -> Result<f64, String> {
        let (c, raw) = prepare_structure(s, 12, &table).map_err(|e| e.to_string())?;
        model.forward(&c, &raw).map_err(|e| e.to_string())
    };
    let mut worst = 0.0f64;
    let cases = 20;
    for i in 0..cases {
        let s = random_structure(&mut rng, 4, 1.0);
        let base = predict(&s)?;
        let shift: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mut perm: Vec<usize> = (0..s.num_atoms()).collect();
        perm.shuffle(&mut rng);
        let variants = [
            ("rotation", s.rotated(&random_rotation(&mut rng))),
            ("translation", s.translated(&shift)),
            ("permutation", s.permuted(&perm)),
        ];
        for (what, v) in variants {
            let y = predict(&v)?;
            let rel = (y - base).abs() / base.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            check(rel <= 1e-9, || format!("structure {i}: {what} changes prediction by {rel:.3e} relative"))?;
        }
    }
    Ok(format!("{cases} structures x 3 transforms, worst relative change {worst:.2e}"))
}

fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let table = AtomFeatureTable::placeholder(0);
    let models = 20;
    let (rtol, atol, step) = (1e-4, 1e-8, 1e-4);
    let mut checked = 0;
    let mut worst = 0.0f64;
    for m in 0..models {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + m);
        // three graphs of up to three atoms keep every batch-norm column away
        // from the two-row case, where normalization is close to a step function
        let items: Vec<_> = (0..3)
            .map(|_| {
                let s = random_structure(&mut rng, 3, 1.0);
                prepare_structure(&s, 8, &table).map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        let pairs: Vec<_> = items.iter().map(|(c, r)| (c, r)).collect();
        let batch = GraphBatch::new(&pairs).map_err(|e| e.to_string())?;
        let targets: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..3.0));
        let mut model = SformerModel::new(ModelConfig { hidden: 8, head_hidden: 8 }, m);
        model.set_mode(Mode::Train);
        let (grads, _) = model.loss_and_gradients(&batch, &targets, LossKind::Mse).map_err(|e| e.to_string())?;

        // one scalar from every tensor plus random extras
        let mut picks: Vec<(usize, usize)> =
            model.params().iter().enumerate().map(|(t, p)| (t, rng.random_range(0..p.len()))).collect();
        while picks.len() < 400 {
            let t = rng.random_range(0..model.params().len());
            picks.push((t, rng.random_range(0..model.params()[t].len())));
        }
        for (t, j) in picks {
            let mut loss_at = |delta: f64| -> Result<f64, String> {
                let cols = model.params()[t].ncols();
                let orig = model.params()[t][[j / cols, j % cols]];
                model.params_mut()[t][[j / cols, j % cols]] = orig + delta;
                let l = model.loss_and_gradients(&batch, &targets, LossKind::Mse).map_err(|e| e.to_string())?.0.loss;
                model.params_mut()[t][[j / cols, j % cols]] = orig;
                Ok(l)
            };
            // Richardson-extrapolated central difference, error O(step^4)
            let wide = (loss_at(step)? - loss_at(-step)?) / (2.0 * step);
            let narrow = (loss_at(step / 2.0)? - loss_at(-step / 2.0)?) / step;
            let fd = (4.0 * narrow - wide) / 3.0;
            let cols = grads.params[t].ncols();
            let an = grads.params[t][[j / cols, j % cols]];
            let err = (an - fd).abs();
            worst = worst.max(err / (atol + rtol * fd.abs()));
            check(err <= atol + rtol * fd.abs(), || {
                format!("model {m}, {}[{j}]: analytic {an:.10e}, numeric {fd:.10e}", model.param_names()[t])
            })?;
            checked += 1;
        }
    }
    within(t0.elapsed(), 300.0, "gradient check")?;
    Ok(format!("{models} models, {checked} scalars, worst error/tolerance {worst:.3}"))
}

fn residual_identity() -> Outcome {
    let mut model = SformerModel::new(ModelConfig::default(), 5);
    let zeroed = [".v.", ".v_coface.", ".value_mlp.", ".msg.", ".msg_norm.shift", ".update.", ".update_norm.shift"];
    let names: Vec<String> = model.param_names().to_vec();
    for n in &names {
        if zeroed.iter().any(|z| format!("{n}.").contains(z)) {
            model.param_mut(n).expect("listed name").fill(0.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let h_dim = model.config().hidden;
    let rand_mat = |rng: &mut ChaCha8Rng, r: usize| Array2::from_shape_fn((r, h_dim), |_| rng.random_range(-2.0..2.0));
    let mut layers: Vec<LayerRef> = (0..NODE_LAYERS).map(LayerRef::Node).collect();
    for i in 0..EDGE_NODE_LAYERS {
        layers.push(LayerRef::EdgeNodeEdge(i));
        layers.push(LayerRef::EdgeNodeNode(i));
    }
    for layer in &layers {
        let h = rand_mat(&mut rng, 6);
        let hc = rand_mat(&mut rng, 4);
        let pairs: Vec<_> = (0..10).map(|_| (rng.random_range(0..6), rng.random_range(0..6), rng.random_range(0..4))).collect();
        for mode in [Mode::Train, Mode::Eval] {
            let out = model.layer_update(*layer, &h, &hc, &pairs, mode);
            check(out == h, || format!("{layer:?} in {mode:?} mode changes h"))?;
        }
    }
    Ok(format!("{} layers, train and eval, h' == h bit for bit", layers.len()))
}

/// Mean distance to the nearest other point, by Cartesian image scan.
fn nn_oracle(s: &CrystalStructure) -> f64 {
    let n = s.num_atoms();
    let total: f64 = (0..n)
        .map(|i| {
            (0..n)
                .flat_map(|j| offsets(3).filter(move |&o| i != j || o != [0, 0, 0]).map(move |o| (j, o)))
                .map(|(j, o)| cart_distance(s, i, j, o))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / n as f64
}

fn overfit() -> Outcome {
    let t0 = Instant::now();
    let records = synthetic_dataset(32, 11);
    for r in &records {
        let d = nn_oracle(&r.structure);
        check((d - r.target).abs() <= 1e-9, || format!("target {} vs scan {d}", r.target))?;
    }
    let table = AtomFeatureTable::placeholder(0);
    let samples = prepare_samples(&records, 12, &table).map_err(|e| e.to_string())?;
    let config = TrainConfig { batch_size: 64, epochs: 500, peak_lr: 0.005, loss: LossChoice::Mae, ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let outcome = pool.install(|| train(&config, &samples, &[])).map_err(|e| e.to_string())?;
    let (report, _) = evaluate(&outcome.best, &samples).map_err(|e| e.to_string())?;
    let first_hit = outcome.history.iter().find(|r| r.train_loss < 0.01).map(|r| r.epoch);
    check(report.mae < 0.01, || format!("eval MAE {:.5} after 500 epochs", report.mae))?;
    within(t0.elapsed(), 600.0, "overfit")?;
    Ok(format!(
        "eval MAE {:.5} (best epoch {}, train loss first < 0.01 at epoch {:?}) in {:.0}s on 1 thread",
        report.mae,
        outcome.best_epoch,
        first_hit,
        t0.elapsed().as_secs_f64()
    ))
}

/// Rank over the prime field 2^31 - 1, an arithmetic independent of the
/// library's rational elimination.
fn rank_mod_p(mut m: Vec<Vec<i64>>) -> usize {
    const P: i64 = 2_147_483_647;
    let inv = |a: i64| {
        let (mut r, mut b, mut e) = (1i64, a.rem_euclid(P), P - 2);
        while e > 0 {
            if e & 1 == 1 {
                r = r * b % P;
            }
            b = b * b % P;
            e >>= 1;
        }
        r
    };
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][c].rem_euclid(P) != 0) else { continue };
        m.swap(rank, p);
        let iv = inv(m[rank][c]);
        for r in 0..rows {
            if r != rank && m[r][c].rem_euclid(P) != 0 {
                let f = m[r][c].rem_euclid(P) * iv % P;
                let pivot = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot) {
                    *x = (*x - f * y).rem_euclid(P);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn betti_mod_p(k: &SimplicialComplex) -> Vec<usize> {
    let rank = |q: usize| if q == 0 || q > MAX_DIM || k.num_simplices(q) == 0 { 0 } else { rank_mod_p(boundary_matrix(k, q)) };
    (0..=MAX_DIM).map(|q| k.num_simplices(q) - rank(q) - rank(q + 1)).collect()
}

fn homology_fuzz() -> Outcome {
    let cases = fuzz(200, 7);
    let mut glued = 0;
    for c in &cases {
        check(c.report.verdicts.all(), || format!("seed {}: verdicts {:?}", c.seed, c.report.verdicts))?;
        let k = SimplicialComplex::from_maximal(&c.maximal).map_err(|e| e.to_string())?;
        let p = VertexPartition::new(c.partition.clone(), &k).map_err(|e| e.to_string())?;
        let kt = build_k_tilde(&k, &p);
        check(betti_mod_p(&k) == c.report.betti_k && betti_mod_p(&kt) == c.report.betti_ktilde, || {
            format!("seed {}: Betti numbers disagree with modular elimination", c.seed)
        })?;
        glued += usize::from(c.partition.iter().any(|cl| cl.len() > 1));
    }
    let path = SimplicialComplex::from_maximal(&[vec![0, 1], vec![1, 2]]).map_err(|e| e.to_string())?;
    let one = VertexPartition::new(vec![vec![0, 1, 2]], &path).map_err(|e| e.to_string())?;
    let star = betti_numbers(&build_glued(&path, &one, Construction::Star));
    let pair = betti_numbers(&build_glued(&path, &one, Construction::Pairwise));
    check(star[1] == 2 && pair[1] == 3, || format!("3-path: star b1 {}, pairwise b1 {}", star[1], pair[1]))?;
    let report = verify_with(&path, &one, Construction::Pairwise);
    check(report.matches_star == Some(false) && !report.strict_pass(), || "pairwise report not flagged".into())?;
    Ok(format!("200/200 cases ({glued} with a nontrivial class); 3-path star b1=2, pairwise b1=3"))
}

fn five_path() -> Outcome {
    let k = SimplicialComplex::from_maximal(&[vec![0, 1], vec![1, 2], vec![2, 3], vec![3, 4]]).map_err(|e| e.to_string())?;
    let p = VertexPartition::new(vec![vec![0, 1, 2, 3, 4]], &k).map_err(|e| e.to_string())?;
    let kt = build_k_tilde(&k, &p);
    let b = betti_numbers(&kt);
    check(b[0] == 1 && b[1] == 4, || format!("Betti {b:?}"))?;
    // Euler characteristic oracle for a graph: b1 = E - V + components
    let (v, e) = (kt.num_simplices(0), kt.num_simplices(1));
    check(e + 1 - v == 4, || format!("V={v}, E={e}"))?;
    Ok("b0 = 1, b1 = 4".into())
}

fn metric_identities() -> Outcome {
    let y = [0.3, 1.7, 2.2, -0.4, 5.0];
    let perfect = metrics(&y, &y);
    check(perfect.cod == Some(1.0) && perfect.pcc == Some(1.0) && perfect.mae == 0.0, || format!("perfect {perfect:?}"))?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let constant = metrics(&y, &[mean; 5]);
    check(constant.cod.is_some_and(|c| c.abs() <= 1e-15), || format!("constant-mean COD {:?}", constant.cod))?;
    let hand = metrics(&[0.0, 1.0, 2.0], &[0.0, 1.0, 4.0]);
    check(hand.cod == Some(-1.0), || format!("hand-worked COD {:?}", hand.cod))?;
    Ok("COD 1 / PCC 1 / MAE 0; constant-mean COD 0; [0,1,2] vs [0,1,4] COD -1".into())
}

fn determinism() -> Outcome {
    let records = synthetic_dataset(12, 3);
    let table = AtomFeatureTable::placeholder(0);
    let samples = prepare_samples(&records, 12, &table).map_err(|e| e.to_string())?;
    let (tr, va) = samples.split_at(9);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |tag: &str| -> Result<(String, Vec<u8>), String> {
        let path = dir.path().join(format!("{tag}.ckpt"));
        let config = TrainConfig {
            batch_size: 4,
            epochs: 6,
            seed: 21,
            model: ModelConfig { hidden: 16, head_hidden: 16 },
            checkpoint_path: Some(path.clone()),
            ..Default::default()
        };
        let out = train(&config, tr, va).map_err(|e| e.to_string())?;
        Ok((history_jsonl(&out.history), std::fs::read(&path).map_err(|e| e.to_string())?))
    };
    let (h1, c1) = run("a")?;
    let (h2, c2) = run("b")?;
    check(h1 == h2, || "histories differ".into())?;
    check(c1 == c2, || "checkpoint bytes differ".into())?;
    Ok(format!("history {} bytes, checkpoint {} bytes identical", h1.len(), c1.len()))
}

fn main() {
    let criteria: [(&str, Criterion); 12] = [
        ("neighbor-oracle", neighbor_oracle),
        ("complex-counts", complex_counts),
        ("triangle-closure", triangle_closure),
        ("feature-dimensions", feature_dims),
        ("invariance", invariance),
        ("gradient-check", gradient_check),
        ("residual-identity", residual_identity),
        ("overfit", overfit),
        ("gluing-homology", homology_fuzz),
        ("five-path-glued", five_path),
        ("metric-identities", metric_identities),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name:<20} {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name:<20} {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
