//! Harmonic series for the frequency-domain Green's function.
//!
//! The `(m, n)` double sum over associated Legendre functions collapses by
//! the addition theorem to
//!
//! ```text
//! G = Σ_n (2n+1)/(4π) · P_n(cos γ) · t_n(r)
//! ```
//!
//! with `γ` the angle between source and observer. In the source layer the
//! production path adds the closed-form free-space kernel
//! `e^{-σd}/(4πDd)` and sums only the part of `t_n` that is regular at the
//! source, which converges geometrically even when `r ≈ r0`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::radial::{RadialPoint, RadialProblem, RadialSolution};
use crate::error::{Error, Result};
use crate::medium::{LayerStack, SourceSpec, Spherical};
use crate::specfun::MAX_ORDER;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Order up to which observation tables are first built; extended to
/// [`MAX_ORDER`] only when the series needs more terms.
const SHORT_TABLE: usize = 64;

/// How the radial field enters the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesForm {
    /// Sum the full `t_n` everywhere.
    Direct,
    /// In the source layer, closed-form free kernel plus the regular part.
    Regularized,
}

/// Adaptive truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// A term is negligible when below `rel_tol · max(|partial sum|, abs_floor)`.
    pub rel_tol: f64,
    /// Magnitude below which the partial sum is not trusted as a scale
    /// (useful at high frequencies where the result is exponentially small).
    pub abs_floor: f64,
    /// Number of consecutive negligible terms that ends the sum.
    pub consecutive: usize,
    pub max_order: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            rel_tol: 1e-10,
            abs_floor: 0.0,
            consecutive: 3,
            max_order: MAX_ORDER,
        }
    }
}

/// Result of an adaptive series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Number of orders summed (`0 ..= terms - 1`).
    pub terms: usize,
}

/// Green's function of a fixed stack, source and Laplace variable.
///
/// Radial solutions are computed once per order and reused for every
/// observation point, so evaluating many points at one frequency costs one
/// linear solve per order.
#[derive(Debug, Clone)]
pub struct GreensFunction {
    problem: RadialProblem,
    solutions: Vec<RadialSolution>,
    source: Spherical,
    free_sigma: Complex64,
    free_diffusion: f64,
    control: SeriesControl,
}

impl GreensFunction {
    /// `s` is the Laplace variable (`iω` on the Fourier axis).
    pub fn new(stack: &LayerStack, source: Spherical, s: Complex64) -> Result<Self> {
        let problem = RadialProblem::new(stack, source.r, s)?;
        let p = problem.source_layer();
        let free_diffusion = problem.layer_diffusion(p);
        let free_sigma = super::radial::sigma_at(stack.degradation(p), free_diffusion, s);
        Ok(GreensFunction {
            problem,
            solutions: Vec::new(),
            source,
            free_sigma,
            free_diffusion,
            control: SeriesControl::default(),
        })
    }

    pub fn with_control(mut self, control: SeriesControl) -> Self {
        self.control = control;
        self
    }

    pub fn set_control(&mut self, control: SeriesControl) {
        self.control = control;
    }

    pub fn control(&self) -> SeriesControl {
        self.control
    }

    pub fn problem(&self) -> &RadialProblem {
        &self.problem
    }

    /// Radial solution of order `n`, solving lower orders first if needed.
    pub fn solution(&mut self, n: usize) -> Result<&RadialSolution> {
        while self.solutions.len() <= n {
            let next = self.problem.solve(self.solutions.len())?;
            self.solutions.push(next);
        }
        Ok(&self.solutions[n])
    }

    /// `t_n(r)` and `∂t_n/∂r` at radius `r`.
    pub fn radial(&mut self, n: usize, r: f64) -> Result<(Complex64, Complex64)> {
        let point = self.problem.point(r, n.max(1))?;
        self.solution(n)?;
        Ok(self.problem.field(&self.solutions[n], &point))
    }

    fn check_observer(&self, obs: &Spherical) -> Result<f64> {
        let d = self.source.distance(obs);
        let scale = self.source.r.max(obs.r).max(1.0);
        if d <= 1e-12 * scale {
            return Err(Error::ObservationAtSource);
        }
        Ok(d)
    }

    fn free_kernel(&self, d: f64) -> Complex64 {
        (-self.free_sigma * d).exp() / (4.0 * PI * self.free_diffusion * d)
    }

    fn angle(&self, obs: &Spherical) -> f64 {
        if self.source.r == 0.0 || obs.r == 0.0 {
            1.0
        } else {
            self.source.cos_angle(obs)
        }
    }

    /// Production evaluation: regularised form with adaptive truncation.
    pub fn evaluate(&mut self, obs: &Spherical) -> Result<Complex64> {
        Ok(self.evaluate_with(obs, SeriesForm::Regularized)?.value)
    }

    /// Adaptive evaluation in the requested form.
    pub fn evaluate_with(&mut self, obs: &Spherical, form: SeriesForm) -> Result<SeriesValue> {
        let d = self.check_observer(obs)?;
        match self.sum_adaptive(obs, d, form, SHORT_TABLE)? {
            Some(v) => Ok(v),
            None => Ok(self
                .sum_adaptive(obs, d, form, MAX_ORDER)?
                .expect("full-length tables cover every order")),
        }
    }

    /// `None` when the tables of order `table_order` ran out before convergence.
    fn sum_adaptive(
        &mut self,
        obs: &Spherical,
        d: f64,
        form: SeriesForm,
        table_order: usize,
    ) -> Result<Option<SeriesValue>> {
        let point = self.problem.point(obs.r, table_order)?;
        let regular = form == SeriesForm::Regularized
            && self.problem.point_layer(&point) == self.problem.source_layer();
        let x = self.angle(obs);
        let c = self.control;
        let mut sum = if regular { self.free_kernel(d) } else { ZERO };
        let (mut p_prev, mut p_cur) = (0.0, 1.0);
        let mut quiet = 0;
        let mut last = 0.0;
        for n in 0..=c.max_order {
            if n > point.max_order() {
                return Ok(None);
            }
            if n > 0 {
                let p_next = ((2 * n - 1) as f64 * x * p_cur - (n - 1) as f64 * p_prev) / n as f64;
                p_prev = p_cur;
                p_cur = p_next;
            }
            let t = self.term_radial(n, &point, regular)?;
            let term = t * ((2 * n + 1) as f64 / (4.0 * PI) * p_cur);
            sum += term;
            last = term.norm();
            let scale = sum.norm().max(c.abs_floor);
            if last <= c.rel_tol * scale {
                quiet += 1;
            } else {
                quiet = 0;
            }
            if quiet >= c.consecutive {
                return Ok(Some(SeriesValue { value: sum, terms: n + 1 }));
            }
        }
        Err(Error::NonConvergence {
            terms: c.max_order + 1,
            last_term: last,
            partial_sum: sum.norm(),
        })
    }

    fn term_radial(&mut self, n: usize, point: &RadialPoint, regular: bool) -> Result<Complex64> {
        self.solution(n)?;
        let sol = &self.solutions[n];
        Ok(if regular {
            self.problem
                .reflected_field(sol, point)
                .expect("point lies in the source layer")
        } else {
            self.problem.field(sol, point).0
        })
    }

    /// Fixed-length partial sum over orders `0 ..= n_max`, no adaptivity.
    pub fn harmonic_sum(&mut self, obs: &Spherical, n_max: usize, form: SeriesForm) -> Result<Complex64> {
        let d = self.check_observer(obs)?;
        if n_max > MAX_ORDER {
            return Err(Error::Domain(format!("order {n_max} exceeds the supported maximum {MAX_ORDER}")));
        }
        let point = self.problem.point(obs.r, n_max.max(1))?;
        let regular =
            form == SeriesForm::Regularized && self.problem.point_layer(&point) == self.problem.source_layer();
        let x = self.angle(obs);
        let p = crate::specfun::legendre_polynomials(n_max, x);
        let mut sum = if regular { self.free_kernel(d) } else { ZERO };
        for (n, pn) in p.iter().enumerate() {
            let t = self.term_radial(n, &point, regular)?;
            sum += t * ((2 * n + 1) as f64 / (4.0 * PI) * pn);
        }
        Ok(sum)
    }
}

/// Green's function at `obs` for a source emitting at `source.emission_time`,
/// on the Fourier axis at angular frequency `omega`.
///
/// Includes the emission phase `e^{-iωt₀}`.
pub fn greens_frequency(stack: &LayerStack, source: &SourceSpec, obs: &Spherical, omega: f64) -> Result<Complex64> {
    source.validate(stack)?;
    let s = Complex64::new(0.0, omega);
    let mut g = GreensFunction::new(stack, source.position, s)?;
    Ok(g.evaluate(obs)? * (-s * source.emission_time).exp())
}
