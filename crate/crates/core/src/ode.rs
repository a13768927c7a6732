//! Classical fixed-step fourth-order Runge-Kutta on flat state vectors.

/// Scratch buffers for [`Rk4::step`], sized once per integration.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    /// Advances `x` by `dt` in place. `f(x, out)` writes the derivative.
    pub(crate) fn step<F, E>(&mut self, x: &mut [f64], dt: f64, mut f: F) -> Result<(), E>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<(), E>,
    {
        let half = 0.5 * dt;
        f(x, &mut self.k1)?;
        for (s, (x, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k1)) {
            *s = x + half * k;
        }
        f(&self.stage, &mut self.k2)?;
        for (s, (x, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k2)) {
            *s = x + half * k;
        }
        f(&self.stage, &mut self.k3)?;
        for (s, (x, k)) in self.stage.iter_mut().zip(x.iter().zip(&self.k3)) {
            *s = x + dt * k;
        }
        f(&self.stage, &mut self.k4)?;
        let sixth = dt / 6.0;
        for (i, x) in x.iter_mut().enumerate() {
            *x += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}
