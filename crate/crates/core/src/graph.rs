//! Formation-graph algebra: incidence and Laplacian matrices, spectra,
//! realizability of the desired displacements and lifting to the plane.
//!
//! Edge `e = (tail, head)` has `B[tail, e] = +1` and `B[head, e] = -1`; its
//! desired displacement `d_e` is the target value of `p_tail - p_head`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};

use crate::{agent_point, replicate, Error, Result, Vec2};

/// An oriented edge, zero-based agent indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
}

/// Validated formation: connected oriented graph plus cycle-consistent
/// desired displacements, one per edge in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpec {
    n_agents: usize,
    edges: Vec<Edge>,
    incidence: DMatrix<f64>,
    displacements: Vec<Vec2>,
}

/// Laplacian and its extreme nonzero eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub laplacian: DMatrix<f64>,
    /// All eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Algebraic connectivity.
    pub lambda2: f64,
    pub lambda_max: f64,
}

/// Builds a spec from an `N x M` incidence matrix given row by row.
pub fn build_spec(incidence: &[Vec<i32>], displacements: Vec<Vec2>) -> Result<FormationSpec> {
    FormationSpec::from_incidence(incidence, displacements)
}

impl FormationSpec {
    pub fn from_incidence(rows: &[Vec<i32>], displacements: Vec<Vec2>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|row| row.len() != m) {
            return Err(Error::MalformedIncidence {
                reason: format!("row {} has {} entries, expected {m}", i + 1, rows[i].len()),
            });
        }
        let mut edges = Vec::with_capacity(m);
        for e in 0..m {
            let mut tail = None;
            let mut head = None;
            for (i, row) in rows.iter().enumerate() {
                match row[e] {
                    0 => {}
                    1 if tail.is_none() => tail = Some(i),
                    -1 if head.is_none() => head = Some(i),
                    1 | -1 => {
                        return Err(Error::MalformedIncidence {
                            reason: format!("column {} has more than one {:+}", e + 1, row[e]),
                        })
                    }
                    v => {
                        return Err(Error::MalformedIncidence {
                            reason: format!(
                                "entry ({}, {}) is {v}, not in {{-1, 0, 1}}",
                                i + 1,
                                e + 1
                            ),
                        })
                    }
                }
            }
            match (tail, head) {
                (Some(tail), Some(head)) => edges.push(Edge { tail, head }),
                _ => {
                    return Err(Error::MalformedIncidence {
                        reason: format!("column {} needs exactly one +1 and one -1", e + 1),
                    })
                }
            }
        }
        Self::validated(n, edges, displacements)
    }

    /// Builds a spec from zero-based `(tail, head)` pairs.
    pub fn from_edges(
        n_agents: usize,
        edges: &[(usize, usize)],
        displacements: Vec<Vec2>,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(edges.len());
        for (e, &(tail, head)) in edges.iter().enumerate() {
            if tail >= n_agents || head >= n_agents || tail == head {
                return Err(Error::MalformedIncidence {
                    reason: format!(
                        "edge {} = ({tail}, {head}) is not a pair of distinct agents < {n_agents}",
                        e + 1
                    ),
                });
            }
            out.push(Edge { tail, head });
        }
        Self::validated(n_agents, out, displacements)
    }

    fn validated(n_agents: usize, edges: Vec<Edge>, displacements: Vec<Vec2>) -> Result<Self> {
        if displacements.len() != edges.len() {
            return Err(Error::DimensionMismatch {
                what: "displacements",
                expected: edges.len(),
                found: displacements.len(),
            });
        }
        let mut incidence = DMatrix::zeros(n_agents, edges.len());
        for (e, edge) in edges.iter().enumerate() {
            incidence[(edge.tail, e)] = 1.0;
            incidence[(edge.head, e)] = -1.0;
        }
        let spec = FormationSpec {
            n_agents,
            edges,
            incidence,
            displacements,
        };
        if !spec.is_connected() {
            return Err(Error::DisconnectedGraph);
        }

        let d = spec.stacked_displacements();
        let tolerance = 1e-8 * d.norm().max(1.0);
        let residual = spec.edge_residuals(&spec.zero_centroid_offsets()).amax();
        if residual.is_nan() || residual > tolerance {
            return Err(Error::UnrealizableDisplacements {
                residual,
                tolerance,
            });
        }
        Ok(spec)
    }

    fn is_connected(&self) -> bool {
        if self.n_agents < 2 {
            return false;
        }
        let mut adjacency = vec![Vec::new(); self.n_agents];
        for edge in &self.edges {
            adjacency[edge.tail].push(edge.head);
            adjacency[edge.head].push(edge.tail);
        }
        let mut seen = vec![false; self.n_agents];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `N x M` incidence matrix with entries in {-1, 0, 1}.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn displacements(&self) -> &[Vec2] {
        &self.displacements
    }

    /// `d` stacked edge by edge, length `2M`.
    pub fn stacked_displacements(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.displacements.len(),
            self.displacements.iter().flat_map(|d| [d.x, d.y]),
        )
    }

    /// Number of edges incident to `agent`.
    pub fn degree(&self, agent: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.tail == agent || e.head == agent)
            .count()
    }

    /// `L = B Bᵀ`.
    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        &self.incidence * self.incidence.transpose()
    }

    pub fn spectrum(&self) -> SpectralSummary {
        laplacian(self)
    }

    /// `(B ⊗ I₂)ᵀ r - d`: per-edge deviation from the desired displacement.
    pub fn edge_residuals(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(2 * self.edges.len());
        for (e, (edge, d)) in self.edges.iter().zip(&self.displacements).enumerate() {
            let res = agent_point(r, edge.tail) - agent_point(r, edge.head) - d;
            out[2 * e] = res.x;
            out[2 * e + 1] = res.y;
        }
        out
    }

    /// Minimum-norm zero-centroid solution of `(L ⊗ I₂) x = (B ⊗ I₂) d`.
    ///
    /// On a connected graph `L + 11ᵀ/N` is positive definite and agrees with
    /// `L` on the complement of `span(1)`; the right-hand side lies in that
    /// complement, so the solution is the pseudo-inverse one.
    fn zero_centroid_offsets(&self) -> DVector<f64> {
        let n = self.n_agents;
        let shifted = self.laplacian_matrix().add_scalar(1.0 / n as f64);
        let chol = shifted
            .cholesky()
            .expect("shifted Laplacian of a connected graph is positive definite");
        let mut out = DVector::zeros(2 * n);
        for c in 0..2 {
            let rhs = &self.incidence
                * DVector::from_iterator(
                    self.displacements.len(),
                    self.displacements.iter().map(|d| d[c]),
                );
            let x = chol.solve(&rhs);
            for i in 0..n {
                out[2 * i + c] = x[i];
            }
        }
        out
    }
}

/// Laplacian and its spectrum from a dense symmetric eigensolver.
pub fn laplacian(spec: &FormationSpec) -> SpectralSummary {
    let laplacian = spec.laplacian_matrix();
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(laplacian.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(f64::total_cmp);
    let lambda2 = eigenvalues.get(1).copied().unwrap_or(0.0).max(0.0);
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
    SpectralSummary {
        laplacian,
        eigenvalues,
        lambda2,
        lambda_max,
    }
}

/// `M ⊗ I₂`.
pub fn kron_plane(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.kronecker(&Matrix2::identity())
}

/// Returns `(r*, d_q)`: the configuration in exact formation whose centroid
/// is `target`, and its offsets from the target.
pub fn desired_configuration(spec: &FormationSpec, target: &Vec2) -> (DVector<f64>, DVector<f64>) {
    let d_q = spec.zero_centroid_offsets();
    let r_star = replicate(target, spec.n_agents) + &d_q;
    (r_star, d_q)
}
