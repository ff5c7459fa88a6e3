//! Per-order interface system for the radial Green's function.
//!
//! Inside every shell the radial field is a combination of a regular and
//! an outgoing spherical Bessel function. Instead of raw `j_n(kr)` and
//! `y_n(kr)` the solver uses the normalised pair
//!
//! ```text
//! ĵ(r) = j_n(kr) / j_n(k·r_outer)      ĥ(r) = h_n(kr) / h_n(k·r_inner)
//! ```
//!
//! which never overflows and keeps every matrix entry of order one. The
//! source layer is split at `r0` into two shells; the innermost shell keeps
//! only `ĵ` and the exterior only `ĥ`, giving `2(N + 1)` unknowns.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::medium::LayerStack;
use crate::specfun::{RadialKind, RatioTable, MAX_ORDER};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest acceptable 1-norm condition number of the equilibrated system.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Smallest radius used for a source or observer at the origin, relative
/// to the first interface radius.
const ORIGIN_OFFSET: f64 = 1e-9;

/// Complex diffusion wavenumber `σ = sqrt((k + s)/D)` (principal root).
///
/// `s` is the Laplace variable; on the Fourier axis `s = iω`.
pub fn sigma_at(degradation: f64, diffusion: f64, s: Complex64) -> Complex64 {
    ((degradation + s) / diffusion).sqrt()
}

/// `σ` on the Fourier axis, `s = iω`.
pub fn sigma(degradation: f64, diffusion: f64, omega: f64) -> Complex64 {
    sigma_at(degradation, diffusion, Complex64::new(0.0, omega))
}

/// Bessel-form wavenumber `k = i·σ`; `Im k >= 0` for principal `σ`.
pub fn wavenumber(sigma: Complex64) -> Complex64 {
    I * sigma
}

#[derive(Debug, Clone)]
struct Shell {
    layer: usize,
    inner: f64,
    outer: f64,
    k: Complex64,
    diffusion: f64,
    grow: Option<usize>,
    decay: Option<usize>,
    /// `j_n(k·outer)`, the normalisation of `ĵ`.
    j_norm: Option<RatioTable>,
    /// `j_n(k·inner)` for evaluating `ĵ` at the inner boundary.
    j_inner: Option<RatioTable>,
    /// `h_n(k·inner)`, the normalisation of `ĥ`.
    h_norm: Option<RatioTable>,
    /// `h_n(k·outer)` for evaluating `ĥ` at the outer boundary.
    h_outer: Option<RatioTable>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Boundary {
    /// Interface `i` between layers `i` and `i + 1`.
    Interface { index: usize, kappa: f64 },
    Source,
}

/// Value and radial derivative of one basis function.
#[derive(Debug, Clone, Copy)]
struct Basis {
    value: Complex64,
    slope: Complex64,
}

/// Geometry and frequency of one interface problem; solves any order `n`.
#[derive(Debug, Clone)]
pub struct RadialProblem {
    shells: Vec<Shell>,
    boundaries: Vec<(f64, Boundary)>,
    source_layer: usize,
    /// Index of the shell just inside `r0`.
    source_shell: usize,
    r0: f64,
    s: Complex64,
    dimension: usize,
    origin_offset: f64,
}

/// Coefficients of the normalised basis for one order.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub n: usize,
    pub s: Complex64,
    /// Grow/decay coefficients shell by shell, innermost first.
    pub coefficients: Vec<Complex64>,
    /// Largest row residual of the equilibrated system relative to the
    /// largest `Σ|a_ij x_j| + |b_i|`.
    pub residual: f64,
    /// 1-norm condition estimate of the equilibrated matrix.
    pub condition: f64,
}

/// Coefficients of `A·j_n(kr) + B·y_n(kr)` for one shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    pub a: Complex64,
    pub b: Complex64,
}

/// Tables needed to evaluate the radial field at one radius.
#[derive(Debug, Clone)]
pub struct RadialPoint {
    r: f64,
    shell: usize,
    j: Option<RatioTable>,
    h: Option<RatioTable>,
}

impl RadialPoint {
    pub fn radius(&self) -> f64 {
        self.r
    }

    /// Highest order the point's tables cover.
    pub fn max_order(&self) -> usize {
        self.j
            .as_ref()
            .or(self.h.as_ref())
            .map(|t| t.max_order())
            .unwrap_or(MAX_ORDER)
    }
}

fn table(kind: RadialKind, k: Complex64, r: f64) -> Result<RatioTable> {
    RatioTable::new(kind, MAX_ORDER, k * r)
}

impl RadialProblem {
    /// Sets up the problem for a source at radius `r0` and Laplace variable `s`.
    pub fn new(stack: &LayerStack, r0: f64, s: Complex64) -> Result<Self> {
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(Error::Domain(format!("source radius must be finite and >= 0, got {r0}")));
        }
        if let Some(i) = stack.interface_at(r0) {
            return Err(Error::SourceOnInterface {
                r0,
                radius: stack.outer_radius(i),
                interface: i,
            });
        }
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite Laplace variable {s}")));
        }
        let origin_offset = ORIGIN_OFFSET * stack.outer_radius(0);
        let r0 = r0.max(origin_offset);
        let p = stack.locate(r0);
        let n_layers = stack.layer_count();

        let mut spans = Vec::with_capacity(n_layers + 1);
        for i in 0..n_layers {
            let inner = stack.inner_radius(i);
            let outer = stack.outer_radius(i);
            if i == p {
                spans.push((i, inner, r0));
                spans.push((i, r0, outer));
            } else {
                spans.push((i, inner, outer));
            }
        }

        let mut shells = Vec::with_capacity(spans.len());
        let mut next = 0;
        for (layer, inner, outer) in spans {
            let diffusion = stack.diffusion(layer);
            let sig = sigma_at(stack.degradation(layer), diffusion, s);
            if sig == ZERO {
                return Err(Error::Degenerate(format!(
                    "σ = 0 in layer {} (no degradation at s = 0); evaluate at a non-zero frequency",
                    layer + 1
                )));
            }
            let k = wavenumber(sig);
            let has_grow = outer.is_finite();
            let has_decay = inner > 0.0;
            let grow = has_grow.then(|| {
                next += 1;
                next - 1
            });
            let decay = has_decay.then(|| {
                next += 1;
                next - 1
            });
            shells.push(Shell {
                layer,
                inner,
                outer,
                k,
                diffusion,
                grow,
                decay,
                j_norm: if has_grow { Some(table(RadialKind::Regular, k, outer)?) } else { None },
                j_inner: if has_grow && has_decay {
                    Some(table(RadialKind::Regular, k, inner)?)
                } else {
                    None
                },
                h_norm: if has_decay { Some(table(RadialKind::Outgoing, k, inner)?) } else { None },
                h_outer: if has_decay && has_grow {
                    Some(table(RadialKind::Outgoing, k, outer)?)
                } else {
                    None
                },
            });
        }

        let mut boundaries = Vec::with_capacity(shells.len() - 1);
        for b in 0..shells.len() - 1 {
            let radius = shells[b].outer;
            if b == p {
                boundaries.push((radius, Boundary::Source));
            } else {
                let index = shells[b].layer;
                boundaries.push((
                    radius,
                    Boundary::Interface {
                        index,
                        kappa: stack.jump_constant(index),
                    },
                ));
            }
        }

        Ok(RadialProblem {
            shells,
            boundaries,
            source_layer: p,
            source_shell: p,
            r0,
            s,
            dimension: next,
            origin_offset,
        })
    }

    /// Number of unknowns, `2(N + 1)`.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn source_layer(&self) -> usize {
        self.source_layer
    }

    /// Source radius actually used (origin sources are moved off zero).
    pub fn source_radius(&self) -> f64 {
        self.r0
    }

    pub fn laplace_variable(&self) -> Complex64 {
        self.s
    }

    /// Wavenumber `k = iσ` of `layer`.
    pub fn layer_wavenumber(&self, layer: usize) -> Complex64 {
        self.shells
            .iter()
            .find(|s| s.layer == layer)
            .map(|s| s.k)
            .expect("layer index within the stack")
    }

    pub fn layer_diffusion(&self, layer: usize) -> f64 {
        self.shells
            .iter()
            .find(|s| s.layer == layer)
            .map(|s| s.diffusion)
            .expect("layer index within the stack")
    }

    fn grow_at_outer(&self, sh: &Shell, n: usize) -> Basis {
        let t = sh.j_norm.as_ref().unwrap();
        Basis {
            value: Complex64::new(1.0, 0.0),
            slope: sh.k * t.log_derivative(n),
        }
    }

    fn grow_at_inner(&self, sh: &Shell, n: usize) -> Basis {
        let t = sh.j_inner.as_ref().unwrap();
        let value = t.ratio_to(sh.j_norm.as_ref().unwrap(), n);
        Basis {
            value,
            slope: value * sh.k * t.log_derivative(n),
        }
    }

    fn decay_at_inner(&self, sh: &Shell, n: usize) -> Basis {
        let t = sh.h_norm.as_ref().unwrap();
        Basis {
            value: Complex64::new(1.0, 0.0),
            slope: sh.k * t.log_derivative(n),
        }
    }

    fn decay_at_outer(&self, sh: &Shell, n: usize) -> Basis {
        let t = sh.h_outer.as_ref().unwrap();
        let value = t.ratio_to(sh.h_norm.as_ref().unwrap(), n);
        Basis {
            value,
            slope: value * sh.k * t.log_derivative(n),
        }
    }

    /// `(column, basis)` pairs of shell `idx` evaluated at its outer (`true`)
    /// or inner (`false`) boundary.
    fn boundary_basis(&self, idx: usize, outer: bool, n: usize) -> Vec<(usize, Basis)> {
        let sh = &self.shells[idx];
        let mut out = Vec::with_capacity(2);
        if let Some(c) = sh.grow {
            out.push((c, if outer { self.grow_at_outer(sh, n) } else { self.grow_at_inner(sh, n) }));
        }
        if let Some(c) = sh.decay {
            out.push((c, if outer { self.decay_at_outer(sh, n) } else { self.decay_at_inner(sh, n) }));
        }
        out
    }

    /// Interface and source conditions for order `n`, unscaled.
    ///
    /// Rows come in pairs, one pair per boundary from the centre outward:
    /// flux continuity and the concentration jump at interfaces; value
    /// continuity and the `r0²`-weighted derivative jump `-1/D_p` at the
    /// source.
    pub fn assemble(&self, n: usize) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
        if n > MAX_ORDER {
            return Err(Error::Domain(format!("order {n} exceeds the supported maximum {MAX_ORDER}")));
        }
        let m = self.dimension;
        let mut a = DMatrix::from_element(m, m, ZERO);
        let mut rhs = DVector::from_element(m, ZERO);
        for (b, &(radius, kind)) in self.boundaries.iter().enumerate() {
            let (row0, row1) = (2 * b, 2 * b + 1);
            let inside = self.boundary_basis(b, true, n);
            let outside = self.boundary_basis(b + 1, false, n);
            match kind {
                Boundary::Interface { kappa, .. } => {
                    let d_in = self.shells[b].diffusion;
                    let d_out = self.shells[b + 1].diffusion;
                    for (c, f) in inside {
                        a[(row0, c)] += d_in * f.slope;
                        a[(row1, c)] += f.value;
                    }
                    for (c, f) in outside {
                        a[(row0, c)] -= d_out * f.slope;
                        a[(row1, c)] -= kappa * f.value;
                    }
                }
                Boundary::Source => {
                    let r2 = radius * radius;
                    for (c, f) in inside {
                        a[(row0, c)] -= f.value;
                        a[(row1, c)] -= r2 * f.slope;
                    }
                    for (c, f) in outside {
                        a[(row0, c)] += f.value;
                        a[(row1, c)] += r2 * f.slope;
                    }
                    rhs[row1] = Complex64::new(-1.0 / self.shells[b].diffusion, 0.0);
                }
            }
        }
        Ok((a, rhs))
    }

    /// Solves the system for order `n`, checking conditioning and residual.
    pub fn solve(&self, n: usize) -> Result<RadialSolution> {
        let (mut a, mut rhs) = self.assemble(n)?;
        let m = self.dimension;
        for i in 0..m {
            let scale = (0..m).map(|j| a[(i, j)].norm()).fold(0.0, f64::max);
            if scale > 0.0 && scale.is_finite() {
                for j in 0..m {
                    a[(i, j)] /= scale;
                }
                rhs[i] /= scale;
            }
        }
        let ill = |condition: f64| Error::IllConditioned {
            n,
            s_re: self.s.re,
            s_im: self.s.im,
            condition,
        };
        if a.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(ill(f64::INFINITY));
        }
        let lu = a.clone().lu();
        let inverse = lu.try_inverse().ok_or_else(|| ill(f64::INFINITY))?;
        let condition = one_norm(&a) * one_norm(&inverse);
        if !(condition <= CONDITION_LIMIT) {
            return Err(ill(condition));
        }
        let x = lu.solve(&rhs).ok_or_else(|| ill(f64::INFINITY))?;

        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..m {
            let mut acc = -rhs[i];
            let mut mag = rhs[i].norm();
            for j in 0..m {
                let t = a[(i, j)] * x[j];
                acc += t;
                mag += t.norm();
            }
            worst = worst.max(acc.norm());
            scale = scale.max(mag);
        }
        let residual = if scale > 0.0 { worst / scale } else { 0.0 };

        Ok(RadialSolution {
            n,
            s: self.s,
            coefficients: x.iter().copied().collect(),
            residual,
            condition,
        })
    }

    /// Residuals of every boundary condition evaluated from the basis
    /// functions and `solution`, each relative to the magnitude of the
    /// terms entering that condition.
    pub fn boundary_residuals(&self, solution: &RadialSolution) -> Result<Vec<f64>> {
        let (a, rhs) = self.assemble(solution.n)?;
        let m = self.dimension;
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = -rhs[i];
            let mut mag = rhs[i].norm();
            for j in 0..m {
                let t = a[(i, j)] * solution.coefficients[j];
                acc += t;
                mag += t.norm();
            }
            out.push(if mag > 0.0 { acc.norm() / mag } else { 0.0 });
        }
        Ok(out)
    }

    /// Builds the tables for evaluating the field at radius `r`, covering
    /// orders up to `n_max`.
    pub fn point(&self, r: f64, n_max: usize) -> Result<RadialPoint> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Domain(format!("observation radius must be finite and >= 0, got {r}")));
        }
        let r = r.max(self.origin_offset);
        let shell = self.shell_of(r);
        let sh = &self.shells[shell];
        let in_source_layer = sh.layer == self.source_layer;
        let need_j = sh.grow.is_some() || in_source_layer;
        let need_h = sh.decay.is_some() || in_source_layer;
        let n_max = n_max.min(MAX_ORDER);
        let z = sh.k * r;
        Ok(RadialPoint {
            r,
            shell,
            j: if need_j { Some(RatioTable::new(RadialKind::Regular, n_max, z)?) } else { None },
            h: if need_h { Some(RatioTable::new(RadialKind::Outgoing, n_max, z)?) } else { None },
        })
    }

    fn shell_of(&self, r: f64) -> usize {
        // Interfaces belong to the outer layer; at r0 either side agrees.
        let mut idx = 0;
        for (b, &(radius, kind)) in self.boundaries.iter().enumerate() {
            let crossed = match kind {
                Boundary::Source => r > radius,
                Boundary::Interface { .. } => r >= radius,
            };
            if crossed {
                idx = b + 1;
            }
        }
        idx
    }

    /// Layer containing the evaluation point.
    pub fn point_layer(&self, point: &RadialPoint) -> usize {
        self.shells[point.shell].layer
    }

    fn grow_at(&self, shell: usize, point: &RadialPoint, n: usize) -> Basis {
        let sh = &self.shells[shell];
        let t = point.j.as_ref().unwrap();
        let value = t.ratio_to(sh.j_norm.as_ref().unwrap(), n);
        Basis {
            value,
            slope: value * sh.k * t.log_derivative(n),
        }
    }

    fn decay_at(&self, shell: usize, point: &RadialPoint, n: usize) -> Basis {
        let sh = &self.shells[shell];
        let t = point.h.as_ref().unwrap();
        let value = t.ratio_to(sh.h_norm.as_ref().unwrap(), n);
        Basis {
            value,
            slope: value * sh.k * t.log_derivative(n),
        }
    }

    /// Radial field `t_n(r)` and its derivative: `g_n` in the source layer,
    /// `u_n` elsewhere.
    pub fn field(&self, solution: &RadialSolution, point: &RadialPoint) -> (Complex64, Complex64) {
        let n = solution.n;
        let sh = &self.shells[point.shell];
        let mut value = ZERO;
        let mut slope = ZERO;
        if let Some(c) = sh.grow {
            let f = self.grow_at(point.shell, point, n);
            value += solution.coefficients[c] * f.value;
            slope += solution.coefficients[c] * f.slope;
        }
        if let Some(c) = sh.decay {
            let f = self.decay_at(point.shell, point, n);
            value += solution.coefficients[c] * f.value;
            slope += solution.coefficients[c] * f.slope;
        }
        (value, slope)
    }

    /// The part of `g_n` that is regular at `r0`: the field minus the
    /// free-space radial Green's function `(ik/D_p) j_n(kr<) h_n(kr>)`.
    ///
    /// Only defined for points in the source layer; it is the sum of the
    /// outward-growing coefficient of the outer sub-shell and the decaying
    /// coefficient of the inner sub-shell, so no cancellation occurs.
    pub fn reflected_field(&self, solution: &RadialSolution, point: &RadialPoint) -> Option<Complex64> {
        if self.shells[point.shell].layer != self.source_layer {
            return None;
        }
        let n = solution.n;
        let inner = self.source_shell;
        let outer = self.source_shell + 1;
        let mut value = ZERO;
        if let Some(c) = self.shells[outer].grow {
            value += solution.coefficients[c] * self.grow_at(outer, point, n).value;
        }
        if let Some(c) = self.shells[inner].decay {
            value += solution.coefficients[c] * self.decay_at(inner, point, n).value;
        }
        Some(value)
    }

    /// Converts normalised coefficients into `A·j_n(kr) + B·y_n(kr)` form
    /// for every shell (innermost first). `None` where the conversion
    /// factors overflow.
    pub fn bessel_pairs(&self, solution: &RadialSolution) -> Vec<Option<BesselPair>> {
        let n = solution.n;
        self.shells
            .iter()
            .map(|sh| {
                let cg = sh.grow.map(|c| solution.coefficients[c]).unwrap_or(ZERO);
                let cd = sh.decay.map(|c| solution.coefficients[c]).unwrap_or(ZERO);
                let inv_j = sh.j_norm.as_ref().map(|t| (-t.ln_value(n)).exp()).unwrap_or(ZERO);
                let inv_h = sh.h_norm.as_ref().map(|t| (-t.ln_value(n)).exp()).unwrap_or(ZERO);
                let a = cg * inv_j + cd * inv_h;
                let b = I * cd * inv_h;
                let ok = |v: Complex64| v.re.is_finite() && v.im.is_finite();
                (ok(a) && ok(b)).then_some(BesselPair { a, b })
            })
            .collect()
    }

    /// Number of shells (layers plus one for the split source layer).
    pub fn shell_count(&self) -> usize {
        self.shells.len()
    }

    /// `(layer, inner radius, outer radius, grow column, decay column)` of a shell.
    pub fn shell_layout(&self, shell: usize) -> (usize, f64, f64, Option<usize>, Option<usize>) {
        let sh = &self.shells[shell];
        (sh.layer, sh.inner, sh.outer, sh.grow, sh.decay)
    }
}

fn one_norm(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Assembles the order-`n` system for a source at radius `r0` at angular
/// frequency `omega`.
pub fn assemble_system(
    stack: &LayerStack,
    r0: f64,
    n: usize,
    omega: f64,
) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    RadialProblem::new(stack, r0, Complex64::new(0.0, omega))?.assemble(n)
}

/// Solves the order-`n` interface system of `problem`.
pub fn solve_radial(problem: &RadialProblem, n: usize) -> Result<RadialSolution> {
    problem.solve(n)
}
