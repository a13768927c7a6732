//! Closed-form steady state of the input flow and how it trades formation
//! fidelity against distance to the target.

use nalgebra::DVector;
use serde::Serialize;

use crate::controller::{hessian, GainConfig};
use crate::graph::{desired_configuration, kron_plane, FormationSpec};
use crate::{replicate, Error, Result, Vec2};

/// Gain ratio `a λ₂ / b` above which formations come out visually exact.
pub const IN_FORMATION_GAIN_RATIO: f64 = 30.0;

/// Residual `|B̂ᵀ r - d|`, as a fraction of `|d|`, that still counts as in formation.
pub const IN_FORMATION_RESIDUAL_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    /// Asymptotic stacked positions.
    pub r_inf: Vec<f64>,
    /// `|B̂ᵀ r∞ - d|`.
    pub formation_residual: f64,
    /// `|r∞ - 1 ⊗ q|`.
    pub target_distance: f64,
    /// `|d_q|`, distance of the exact formation centred on the target.
    pub d_q_norm: f64,
    pub lambda2: f64,
    /// `a λ₂ / b`.
    pub gain_ratio: f64,
    /// `|I - b (a L̂ + b I)⁻¹|`, the contraction of the formation towards the target.
    pub shrink_factor: f64,
    pub in_formation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub a: f64,
    pub gain_ratio: f64,
    pub formation_residual: f64,
    pub target_distance: f64,
    /// `gain_ratio >= 30`.
    pub in_formation_regime: bool,
}

/// Unique minimiser of the cost, `(a L̂ + b I)⁻¹ (a B̂ d + b 1 ⊗ q)`, by
/// Cholesky.
pub fn optimal_configuration(
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> Result<DVector<f64>> {
    solve_steady_state(spec, gains.a, gains.b, target)
}

fn solve_steady_state(spec: &FormationSpec, a: f64, b: f64, target: &Vec2) -> Result<DVector<f64>> {
    let gains = GainConfig {
        a,
        b,
        epsilon: 1.0,
        k: vec![1.0],
    };
    let rhs = kron_plane(spec.incidence()) * spec.stacked_displacements() * a
        + replicate(target, spec.n_agents()) * b;
    let chol = hessian(spec, &gains)
        .cholesky()
        .ok_or(Error::SingularSystem)?;
    Ok(chol.solve(&rhs))
}

/// Whether a formation residual is within the in-formation threshold.
pub fn is_in_formation(spec: &FormationSpec, formation_residual: f64) -> bool {
    formation_residual <= IN_FORMATION_RESIDUAL_FRACTION * spec.stacked_displacements().norm()
}

pub fn steady_state_report(
    spec: &FormationSpec,
    gains: &GainConfig,
    target: &Vec2,
) -> Result<SteadyStateReport> {
    let r_inf = optimal_configuration(spec, gains, target)?;
    let spectrum = spec.spectrum();
    let (_, d_q) = desired_configuration(spec, target);
    let formation_residual = spec.edge_residuals(&r_inf).norm();
    let target_distance = (&r_inf - replicate(target, spec.n_agents())).norm();
    let d_q_norm = d_q.norm();
    // eigenvalues of I - b (aL̂ + bI)⁻¹ are aλ / (aλ + b), largest at λ_max
    let a_lmax = gains.a * spectrum.lambda_max;
    let shrink_factor = a_lmax / (a_lmax + gains.b);

    let bound = shrink_factor * d_q_norm;
    if target_distance > bound + 1e-9 * (1.0 + d_q_norm) {
        return Err(Error::ShrinkBoundViolated {
            target_distance,
            bound,
        });
    }
    Ok(SteadyStateReport {
        r_inf: r_inf.as_slice().to_vec(),
        formation_residual,
        target_distance,
        d_q_norm,
        lambda2: spectrum.lambda2,
        gain_ratio: gains.a * spectrum.lambda2 / gains.b,
        shrink_factor,
        in_formation: is_in_formation(spec, formation_residual),
    })
}

/// Closed-form residual and target distance for each formation weight `a`
/// with `b` held fixed. `a_values` must be positive and nondecreasing.
pub fn formation_error_curve(
    spec: &FormationSpec,
    target: &Vec2,
    b: f64,
    a_values: &[f64],
) -> Result<Vec<CurvePoint>> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::NonpositiveInput {
            name: "b",
            value: b,
        });
    }
    if let Some(&a) = a_values.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::NonpositiveInput {
            name: "a",
            value: a,
        });
    }
    if a_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSweep(
            "formation weights must be nondecreasing".into(),
        ));
    }
    let lambda2 = spec.spectrum().lambda2;
    let q = replicate(target, spec.n_agents());
    a_values
        .iter()
        .map(|&a| {
            let r_inf = solve_steady_state(spec, a, b, target)?;
            let gain_ratio = a * lambda2 / b;
            Ok(CurvePoint {
                a,
                gain_ratio,
                formation_residual: spec.edge_residuals(&r_inf).norm(),
                target_distance: (&r_inf - &q).norm(),
                in_formation_regime: gain_ratio >= IN_FORMATION_GAIN_RATIO,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::cost_gradient;
    use crate::graph::build_spec;
    use crate::sim::scenarios::pentagon_spec;
    use approx::assert_abs_diff_eq;

    fn gains(a: f64, b: f64, n: usize) -> GainConfig {
        GainConfig::new(a, b, 0.1, vec![1.0; n]).unwrap()
    }

    #[test]
    fn zero_displacements_collapse_onto_target() {
        let spec = build_spec(
            &[vec![1, 0], vec![-1, 1], vec![0, -1]],
            vec![Vec2::zeros(); 2],
        )
        .unwrap();
        let q = Vec2::new(2.0, -7.0);
        for (a, b) in [(1.0, 1.0), (100.0, 0.01), (0.01, 30.0)] {
            let r = optimal_configuration(&spec, &gains(a, b, 3), &q).unwrap();
            assert_abs_diff_eq!(r, replicate(&q, 3), epsilon = 1e-10);
        }
        let report = steady_state_report(&spec, &gains(1.0, 1.0, 3), &q).unwrap();
        assert!(report.target_distance < 1e-12);
        assert_eq!(report.d_q_norm, 0.0);
    }

    #[test]
    fn two_agent_hand_solution() {
        let spec = build_spec(&[vec![1], vec![-1]], vec![Vec2::new(2.0, 0.0)]).unwrap();
        let g = gains(1.0, 1.0, 2);
        let r = optimal_configuration(&spec, &g, &Vec2::zeros()).unwrap();
        let expected = DVector::from_vec(vec![2.0 / 3.0, 0.0, -2.0 / 3.0, 0.0]);
        assert_abs_diff_eq!(r, expected, epsilon = 1e-14);
        let report = steady_state_report(&spec, &g, &Vec2::zeros()).unwrap();
        assert_abs_diff_eq!(report.shrink_factor, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(report.gain_ratio, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn optimum_is_stationary() {
        let spec = pentagon_spec();
        let q = Vec2::new(5.65, 5.03);
        let g = gains(5.0, 0.1, 5);
        let r = optimal_configuration(&spec, &g, &q).unwrap();
        assert!(cost_gradient(&r, &spec, &g, &q).unwrap().norm() <= 1e-9 * (1.0 + r.norm()));
    }

    #[test]
    fn pentagon_report_obeys_shrinkage() {
        let spec = pentagon_spec();
        let report =
            steady_state_report(&spec, &gains(5.0, 0.1, 5), &Vec2::new(5.65, 5.03)).unwrap();
        assert!(report.target_distance < report.d_q_norm);
        assert!(report.shrink_factor < 1.0 && report.shrink_factor > 0.0);
        assert!(report.in_formation, "{report:?}");
    }

    #[test]
    fn residual_scales_inversely_with_formation_weight() {
        let spec = pentagon_spec();
        let q = Vec2::new(5.65, 5.03);
        let curve = formation_error_curve(&spec, &q, 0.1, &[10.0, 100.0]).unwrap();
        let ratio = curve[0].formation_residual / curve[1].formation_residual;
        assert!((9.0..11.0).contains(&ratio), "{ratio}");

        let flat = formation_error_curve(&spec, &q, 0.1, &[2.0, 2.0, 2.0]).unwrap();
        assert!(flat
            .windows(2)
            .all(|w| w[0].formation_residual == w[1].formation_residual));
    }

    #[test]
    fn regime_flag_uses_gain_ratio() {
        let spec = pentagon_spec();
        let lambda2 = spec.spectrum().lambda2;
        let b = 1.0;
        let a = [29.0 / lambda2, 31.0 / lambda2];
        let curve = formation_error_curve(&spec, &Vec2::zeros(), b, &a).unwrap();
        assert!(!curve[0].in_formation_regime);
        assert!(curve[1].in_formation_regime);
    }

    #[test]
    fn curve_rejects_bad_sweeps() {
        let spec = pentagon_spec();
        assert!(formation_error_curve(&spec, &Vec2::zeros(), 1.0, &[2.0, 1.0]).is_err());
        assert!(formation_error_curve(&spec, &Vec2::zeros(), 1.0, &[0.0, 1.0]).is_err());
        assert!(formation_error_curve(&spec, &Vec2::zeros(), 0.0, &[1.0]).is_err());
        assert!(formation_error_curve(&spec, &Vec2::zeros(), 1.0, &[])
            .unwrap()
            .is_empty());
    }
}
