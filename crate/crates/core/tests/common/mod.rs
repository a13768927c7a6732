//! Test-side oracles and generators, written without the library's linear
//! algebra so they can check it.

#![allow(dead_code)]

use swarmfo::graph::FormationSpec;
use swarmfo::{GainConfig, Vec2};

/// SplitMix64, enough randomness for instance generation.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn point(&mut self, half_width: f64) -> Vec2 {
        Vec2::new(
            self.uniform(-half_width, half_width),
            self.uniform(-half_width, half_width),
        )
    }
}

/// Connected spec on `2..=max_agents` agents: a random spanning tree plus
/// random chords, randomly oriented, with displacements read off hidden
/// points so they are realizable.
pub fn random_spec(rng: &mut Rng, max_agents: usize) -> FormationSpec {
    let n = 2 + rng.below(max_agents - 1);
    let hidden: Vec<Vec2> = (0..n).map(|_| rng.point(3.0)).collect();
    let mut pairs = Vec::new();
    for j in 1..n {
        pairs.push((rng.below(j), j));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.unit() < 0.3 && !pairs.contains(&(i, j)) {
                pairs.push((i, j));
            }
        }
    }
    let mut edges = Vec::new();
    let mut d = Vec::new();
    for (i, j) in pairs {
        let (t, h) = if rng.unit() < 0.5 { (i, j) } else { (j, i) };
        edges.push((t, h));
        d.push(hidden[t] - hidden[h]);
    }
    FormationSpec::from_edges(n, &edges, d).expect("generated spec is valid")
}

pub fn random_gains(rng: &mut Rng, spec: &FormationSpec) -> GainConfig {
    let k: Vec<f64> = (0..spec.n_agents())
        .map(|_| rng.uniform(0.5, 3.0))
        .collect();
    GainConfig::new(
        rng.uniform(0.1, 10.0),
        rng.uniform(0.05, 5.0),
        rng.uniform(0.001, 0.1),
        k,
    )
    .unwrap()
}

pub fn random_stacked(rng: &mut Rng, n: usize, half_width: f64) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_fn(2 * n, |_, _| rng.uniform(-half_width, half_width))
}

/// Cost summed edge by edge and agent by agent.
pub fn cost_oracle(r: &[f64], spec: &FormationSpec, gains: &GainConfig, q: &Vec2) -> f64 {
    let mut formation = 0.0;
    for (edge, d) in spec.edges().iter().zip(spec.displacements()) {
        let ex = r[2 * edge.tail] - r[2 * edge.head] - d.x;
        let ey = r[2 * edge.tail + 1] - r[2 * edge.head + 1] - d.y;
        formation += ex * ex + ey * ey;
    }
    let mut target = 0.0;
    for i in 0..spec.n_agents() {
        let ex = r[2 * i] - q.x;
        let ey = r[2 * i + 1] - q.y;
        target += ex * ex + ey * ey;
    }
    0.5 * gains.a * formation + 0.5 * gains.b * target
}

/// Graph Laplacian from degree and adjacency counts.
pub fn laplacian_oracle(spec: &FormationSpec) -> Vec<Vec<f64>> {
    let n = spec.n_agents();
    let mut l = vec![vec![0.0; n]; n];
    for e in spec.edges() {
        l[e.tail][e.tail] += 1.0;
        l[e.head][e.head] += 1.0;
        l[e.tail][e.head] -= 1.0;
        l[e.head][e.tail] -= 1.0;
    }
    l
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// `a L ⊗ I₂ + b I` as nested rows.
pub fn hessian_oracle(spec: &FormationSpec, gains: &GainConfig) -> Vec<Vec<f64>> {
    let l = laplacian_oracle(spec);
    let n = l.len();
    let mut h = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            for c in 0..2 {
                h[2 * i + c][2 * j + c] = gains.a * l[i][j];
            }
        }
    }
    for (i, row) in h.iter_mut().enumerate() {
        row[i] += gains.b;
    }
    h
}
