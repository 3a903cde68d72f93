//! Seeded random instance families used by tests and experiments.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problems::WeightedGraph;

fn weight(rng: &mut ChaCha8Rng, signed: bool) -> i64 {
    if signed && rng.random_bool(0.5) {
        -1
    } else {
        1
    }
}

/// G(n, p) with unit weights, or uniform ±1 weights when `signed`.
pub fn erdos_renyi(n: usize, p: f64, signed: bool, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                let w = weight(&mut rng, signed);
                edges.push((i, j, w));
            }
        }
    }
    WeightedGraph::new(n, edges, format!("er-{n}-{p}-{seed}")).expect("valid by construction")
}

/// `rows × cols` grid with periodic boundaries (each vertex has degree 4).
pub fn toroidal_grid(rows: usize, cols: usize, signed: bool, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let right = id(r, (c + 1) % cols);
            let down = id((r + 1) % rows, c);
            for other in [right, down] {
                let w = weight(&mut rng, signed);
                edges.push((id(r, c), other, w));
            }
        }
    }
    WeightedGraph::new(rows * cols, edges, format!("torus-{rows}x{cols}-{seed}")).expect("rows, cols ≥ 3")
}

/// Edge set of a random maximal planar graph (`3n − 6` edges, `n ≥ 4`):
/// random face insertion followed by `flips` random diagonal flips.
pub fn random_triangulation(n: usize, flips: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    assert!(n >= 4, "triangulation needs at least 4 vertices");
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut faces: Vec<[usize; 3]> = vec![[0, 1, 2], [0, 2, 1]];
    for v in 3..n {
        let f = rng.random_range(0..faces.len());
        let [a, b, c] = faces[f];
        faces[f] = [a, b, v];
        faces.push([b, c, v]);
        faces.push([c, a, v]);
    }
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for k in 0..3 {
            edge_faces.entry(key(f[k], f[(k + 1) % 3])).or_default().push(fi);
        }
    }
    let mut edges: Vec<(usize, usize)> = edge_faces.keys().copied().collect();
    edges.sort_unstable();
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let opposite = |f: &[usize; 3], a: usize, b: usize| *f.iter().find(|&&x| x != a && x != b).unwrap();
    for _ in 0..flips {
        let ei = rng.random_range(0..edges.len());
        let (a, b) = edges[ei];
        let fs = &edge_faces[&(a, b)];
        let (f1, f2) = (fs[0], fs[1]);
        let c = opposite(&faces[f1], a, b);
        let d = opposite(&faces[f2], a, b);
        if c == d || present.contains(&key(c, d)) || degree[a] <= 3 || degree[b] <= 3 {
            continue;
        }
        // faces {a,b,c}, {a,b,d} become {a,d,c}, {c,b,d}
        let mut g1 = faces[f1];
        let mut g2 = faces[f2];
        let pb = g1.iter().position(|&u| u == b).unwrap();
        g1[pb] = d;
        let pa = g2.iter().position(|&u| u == a).unwrap();
        g2[pa] = c;
        for (x, y, from, to) in [(b, c, f1, f2), (a, d, f2, f1)] {
            let list = edge_faces.get_mut(&key(x, y)).unwrap();
            let slot = list.iter().position(|&f| f == from).unwrap();
            list[slot] = to;
        }
        faces[f1] = g1;
        faces[f2] = g2;
        edge_faces.remove(&(a, b));
        present.remove(&(a, b));
        let cd = key(c, d);
        edge_faces.insert(cd, vec![f1, f2]);
        present.insert(cd);
        edges[ei] = cd;
        degree[a] -= 1;
        degree[b] -= 1;
        degree[c] += 1;
        degree[d] += 1;
    }
    edges.sort_unstable();
    edges
}

/// Union of `layers` independent random near-maximal planar graphs on the
/// same vertex set, each keeping a `density` fraction of its edges. Unit
/// weights, or ±1 when `signed`.
pub fn planar_union(n: usize, layers: usize, density: f64, signed: bool, seed: u64) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = HashSet::new();
    let mut edges = Vec::new();
    for _ in 0..layers {
        let mut labels: Vec<usize> = (0..n).collect();
        labels.shuffle(&mut rng);
        for (a, b) in random_triangulation(n, 30 * n, &mut rng) {
            if !rng.random_bool(density) {
                continue;
            }
            let (i, j) = (labels[a].min(labels[b]), labels[a].max(labels[b]));
            if set.insert((i, j)) {
                let w = weight(&mut rng, signed);
                edges.push((i, j, w));
            }
        }
    }
    edges.sort_unstable();
    WeightedGraph::new(n, edges, format!("planar-union-{n}-{seed}")).expect("valid by construction")
}

/// 800-vertex toroidal ±1 grid, the structure of the G11 family.
pub fn g11_class(seed: u64) -> WeightedGraph {
    let mut g = toroidal_grid(50, 16, true, seed);
    g.name = format!("g11-class-{seed}");
    g
}

/// 800-vertex union of two near-maximal planar graphs with unit weights,
/// the structure of the G15 family.
pub fn g15_class(seed: u64) -> WeightedGraph {
    let mut g = planar_union(800, 2, 0.99, false, seed);
    g.name = format!("g15-class-{seed}");
    g
}
