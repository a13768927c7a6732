//! Feedback-optimisation layer: formation/target cost, its gradient, the
//! centralised input flow `u̇ = -ε ∇Φ(r)` and the constants that govern it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::graph::{kron_plane, FormationSpec};
use crate::{agent_point, Error, Result, Vec2};

/// Fraction of the slowest tracking gain used by [`default_epsilon`].
pub const DEFAULT_TIMESCALE_FRACTION: f64 = 0.1;

/// Cost weights, gradient-flow rate and per-agent tracking gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainConfig {
    /// Formation-error weight.
    pub a: f64,
    /// Target-distance weight.
    pub b: f64,
    /// Gradient-flow timescale.
    pub epsilon: f64,
    /// Tracking gain of each agent.
    pub k: Vec<f64>,
}

impl GainConfig {
    pub fn new(a: f64, b: f64, epsilon: f64, k: Vec<f64>) -> Result<Self> {
        let gains = GainConfig { a, b, epsilon, k };
        gains.validate()?;
        Ok(gains)
    }

    /// Gains with the same tracking gain on every agent and the default
    /// timescale for `spec`.
    pub fn with_default_epsilon(spec: &FormationSpec, a: f64, b: f64, k: f64) -> Result<Self> {
        let mut gains = GainConfig {
            a,
            b,
            epsilon: 1.0,
            k: vec![k; spec.n_agents()],
        };
        gains.validate()?;
        gains.epsilon = default_epsilon(spec, &gains);
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        positive("a", self.a)?;
        positive("b", self.b)?;
        positive("epsilon", self.epsilon)?;
        if self.k.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "tracking gains",
                expected: 1,
                found: 0,
            });
        }
        self.k.iter().try_for_each(|&k| positive("k", k))
    }

    pub fn k_min(&self) -> f64 {
        self.k.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn k_max(&self) -> f64 {
        self.k.iter().copied().fold(0.0, f64::max)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveInput { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub formation_term: f64,
    pub target_term: f64,
    pub total: f64,
}

fn check_len(r: &DVector<f64>, spec: &FormationSpec) -> Result<()> {
    let expected = 2 * spec.n_agents();
    if r.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "stacked positions",
            expected,
            found: r.len(),
        })
    }
}

/// `a/2 Σ_edges |p_i - p_j - d_ij|² + b/2 Σ_agents |p_i - q|²`.
pub fn cost(
    r: &DVector<f64>,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> Result<CostBreakdown> {
    check_len(r, spec)?;
    let formation_term = 0.5 * gains.a * spec.edge_residuals(r).norm_squared();
    let target_term = 0.5
        * gains.b
        * (0..spec.n_agents())
            .map(|i| (agent_point(r, i) - target).norm_squared())
            .sum::<f64>();
    Ok(CostBreakdown {
        formation_term,
        target_term,
        total: formation_term + target_term,
    })
}

/// `∇Φ(r) = a [L̂ r - B̂ d] + b [r - 1 ⊗ q]`, accumulated edge by edge.
pub fn cost_gradient(
    r: &DVector<f64>,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> Result<DVector<f64>> {
    check_len(r, spec)?;
    let mut grad = DVector::zeros(r.len());
    gradient_into(r.as_slice(), spec, gains, target, grad.as_mut_slice());
    Ok(grad)
}

/// Slice form of the gradient for the integrator's inner loop; `r` holds
/// stacked positions.
pub(crate) fn gradient_into(
    r: &[f64],
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
    out: &mut [f64],
) {
    out.fill(0.0);
    for (edge, d) in spec.edges().iter().zip(spec.displacements()) {
        let (t, h) = (2 * edge.tail, 2 * edge.head);
        let ex = r[t] - r[h] - d.x;
        let ey = r[t + 1] - r[h + 1] - d.y;
        out[t] += ex;
        out[t + 1] += ey;
        out[h] -= ex;
        out[h + 1] -= ey;
    }
    for i in 0..out.len() / 2 {
        out[2 * i] = gains.a * out[2 * i] + gains.b * (r[2 * i] - target.x);
        out[2 * i + 1] = gains.a * out[2 * i + 1] + gains.b * (r[2 * i + 1] - target.y);
    }
}

/// The plant settles at its reference, so the steady-state map is the
/// identity and so is its sensitivity.
pub fn steady_state_map(u: &DVector<f64>) -> DVector<f64> {
    u.clone()
}

/// `u̇ = -ε ∇Φ(r)`.
pub fn input_derivative_centralized(
    r: &DVector<f64>,
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> Result<DVector<f64>> {
    Ok(cost_gradient(r, spec, gains, target)? * -gains.epsilon)
}

/// Spectral norm of the Hessian, `a λ_max + b`.
pub fn lipschitz_constant(spec: &FormationSpec, gains: &GainConfig) -> f64 {
    gains.a * spec.spectrum().lambda_max + gains.b
}

/// Largest admissible gradient-flow rate `sqrt(γ / (μ ℓ))` given the tracking
/// layer's Lyapunov certificate `(γ, μ)`. Pick `epsilon` strictly below it.
pub fn epsilon_bound(gamma: f64, mu: f64, ell: f64) -> Result<f64> {
    positive("gamma", gamma)?;
    positive("mu", mu)?;
    positive("ell", ell)?;
    Ok((gamma / (mu * ell)).sqrt())
}

/// Heuristic timescale `0.1 k_min / ℓ` for when no Lyapunov certificate is
/// available.
pub fn default_epsilon(spec: &FormationSpec, gains: &GainConfig) -> f64 {
    DEFAULT_TIMESCALE_FRACTION * gains.k_min() / lipschitz_constant(spec, gains)
}

/// `∇²Φ = a (L ⊗ I₂) + b I`.
pub fn hessian(spec: &FormationSpec, gains: &GainConfig) -> DMatrix<f64> {
    let n = 2 * spec.n_agents();
    kron_plane(&spec.laplacian_matrix()) * gains.a + DMatrix::identity(n, n) * gains.b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_spec, desired_configuration};
    use crate::replicate;
    use crate::sim::scenarios::pentagon_spec;
    use approx::assert_abs_diff_eq;
    use nalgebra::SymmetricEigen;

    fn gains(a: f64, b: f64) -> GainConfig {
        GainConfig::new(a, b, 0.5, vec![1.0; 5]).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> DVector<f64> {
        // splitmix-style sequence, independent of the crate's RNG wiring
        let mut s = seed;
        DVector::from_fn(n, |_, _| {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((z ^ (z >> 31)) as f64 / u64::MAX as f64) * 10.0 - 5.0
        })
    }

    #[test]
    fn gains_must_be_positive() {
        assert!(matches!(
            GainConfig::new(1.0, 0.0, 1.0, vec![1.0]),
            Err(Error::NonpositiveInput { name: "b", .. })
        ));
        assert!(matches!(
            GainConfig::new(1.0, 1.0, 1.0, vec![1.0, -2.0]),
            Err(Error::NonpositiveInput { name: "k", .. })
        ));
        assert!(GainConfig::new(1.0, 1.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn cost_at_desired_configuration() {
        let spec = pentagon_spec();
        let q = Vec2::new(5.65, 5.03);
        let g = gains(2.0, 0.3);
        let (r_star, d_q) = desired_configuration(&spec, &q);
        let c = cost(&r_star, &spec, &g, &q).unwrap();
        assert!(c.formation_term < 1e-25);
        assert_abs_diff_eq!(c.target_term, 0.15 * d_q.norm_squared(), epsilon = 1e-12);
        assert_eq!(c.total, c.formation_term + c.target_term);
    }

    #[test]
    fn zero_cost_at_target_without_formation() {
        let spec = build_spec(
            &[vec![1, 0], vec![-1, 1], vec![0, -1]],
            vec![Vec2::zeros(); 2],
        )
        .unwrap();
        let q = Vec2::new(-1.0, 4.0);
        let g = GainConfig::new(1.0, 1.0, 1.0, vec![1.0; 3]).unwrap();
        let r = replicate(&q, 3);
        assert_eq!(cost(&r, &spec, &g, &q).unwrap().total, 0.0);
        assert_eq!(cost_gradient(&r, &spec, &g, &q).unwrap().amax(), 0.0);
    }

    #[test]
    fn cost_matches_double_loop() {
        let spec = pentagon_spec();
        let q = Vec2::new(5.65, 5.03);
        let g = gains(1.7, 0.4);
        let b = spec.incidence();
        for seed in 0..20 {
            let r = pseudo_random(10, seed);
            let mut formation = 0.0;
            for e in 0..7 {
                let (mut i, mut j) = (0, 0);
                for row in 0..5 {
                    if b[(row, e)] == 1.0 {
                        i = row;
                    }
                    if b[(row, e)] == -1.0 {
                        j = row;
                    }
                }
                let d = spec.displacements()[e];
                formation += (r[2 * i] - r[2 * j] - d.x).powi(2)
                    + (r[2 * i + 1] - r[2 * j + 1] - d.y).powi(2);
            }
            let target: f64 = (0..5)
                .map(|i| (r[2 * i] - q.x).powi(2) + (r[2 * i + 1] - q.y).powi(2))
                .sum();
            let c = cost(&r, &spec, &g, &q).unwrap();
            assert_abs_diff_eq!(c.formation_term, 0.85 * formation, epsilon = 1e-10);
            assert_abs_diff_eq!(c.target_term, 0.2 * target, epsilon = 1e-10);
        }
    }

    #[test]
    fn gradient_matches_matrix_form() {
        let spec = pentagon_spec();
        let q = Vec2::new(5.65, 5.03);
        let g = gains(3.0, 0.7);
        let lhat = kron_plane(&spec.laplacian_matrix());
        let bhat = kron_plane(spec.incidence());
        let d = spec.stacked_displacements();
        for seed in 0..10 {
            let r = pseudo_random(10, seed);
            let expected = (&lhat * &r - &bhat * &d) * g.a + (&r - replicate(&q, 5)) * g.b;
            assert_abs_diff_eq!(
                cost_gradient(&r, &spec, &g, &q).unwrap(),
                expected,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = pentagon_spec();
        let r = DVector::zeros(9);
        assert!(matches!(
            cost(&r, &spec, &gains(1.0, 1.0), &Vec2::zeros()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(cost_gradient(&r, &spec, &gains(1.0, 1.0), &Vec2::zeros()).is_err());
    }

    #[test]
    fn input_derivative_is_scaled_negative_gradient() {
        let spec = pentagon_spec();
        let q = Vec2::new(1.0, 2.0);
        let g = gains(2.0, 0.5);
        let r = pseudo_random(10, 7);
        let udot = input_derivative_centralized(&r, &spec, &g, &q).unwrap();
        assert_eq!(udot, cost_gradient(&r, &spec, &g, &q).unwrap() * -0.5);
        let mut frozen = g.clone();
        frozen.epsilon = 0.0;
        assert_eq!(
            input_derivative_centralized(&r, &spec, &frozen, &q)
                .unwrap()
                .amax(),
            0.0
        );
    }

    #[test]
    fn steady_state_map_is_identity() {
        assert_eq!(steady_state_map(&DVector::zeros(4)), DVector::zeros(4));
        let u = pseudo_random(6, 3);
        assert_eq!(steady_state_map(&u), u);
    }

    #[test]
    fn lipschitz_examples() {
        let two = build_spec(&[vec![1], vec![-1]], vec![Vec2::new(1.0, 0.0)]).unwrap();
        let g = GainConfig::new(1.0, 1.0, 1.0, vec![1.0; 2]).unwrap();
        assert_abs_diff_eq!(lipschitz_constant(&two, &g), 3.0, epsilon = 1e-12);
        let tiny = GainConfig::new(1e-9, 0.7, 1.0, vec![1.0; 2]).unwrap();
        assert_abs_diff_eq!(lipschitz_constant(&two, &tiny), 0.7, epsilon = 1e-8);
        // pentagon λ_max = 5
        assert_abs_diff_eq!(
            lipschitz_constant(&pentagon_spec(), &gains(5.0, 0.2)),
            25.2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn epsilon_bound_examples() {
        assert_eq!(epsilon_bound(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(epsilon_bound(4.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(epsilon_bound(1.0, 2.0, 8.0).unwrap(), 0.25);
        assert!(matches!(
            epsilon_bound(0.0, 1.0, 1.0),
            Err(Error::NonpositiveInput { name: "gamma", .. })
        ));
        assert!(epsilon_bound(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn default_epsilon_is_a_tenth_of_the_tracking_rate() {
        let spec = pentagon_spec();
        let g = GainConfig::with_default_epsilon(&spec, 5.0, 0.2, 2.0).unwrap();
        assert_abs_diff_eq!(g.epsilon, 0.1 * 2.0 / 25.2, epsilon = 1e-12);
    }

    #[test]
    fn hessian_spectrum_is_shifted_laplacian() {
        let spec = pentagon_spec();
        let g = gains(1.5, 0.25);
        let mut eig: Vec<f64> = SymmetricEigen::new(hessian(&spec, &g))
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(eig[0], 0.25, epsilon = 1e-12);
        let lap = spec.spectrum().eigenvalues;
        for (i, lam) in lap.iter().enumerate() {
            assert_abs_diff_eq!(eig[2 * i], 1.5 * lam + 0.25, epsilon = 1e-10);
            assert_abs_diff_eq!(eig[2 * i + 1], 1.5 * lam + 0.25, epsilon = 1e-10);
        }
    }
}
