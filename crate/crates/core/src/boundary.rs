//! The convex domain `D`, boundary data `φ`, the quadratics `Q_ξ` touching
//! `φ` from below at boundary points, their envelope `Q`, and the constants
//! `η`, `c̄`, `β̂`, `c̃` and `β(c)` that pin the subsolution to the data.
//!
//! Everything here is a mesh approximation; each constant is stored with the
//! mesh size that produced it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admissibility::XiProfile;
use crate::numeric::roots::{find_root, BracketOptions, RootError};
use crate::numeric::sampling::{onto_shell, sphere_directions};
use crate::profile::{ProfileError, ProfileSpec};
use crate::spectra::{eigh, EigenDecomposition, Matrix, SpectraError, SymMatrix};
use crate::subsolution::{mu_detailed, SubsolutionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundaryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("A must be positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("no touching quadratic at boundary point {xi:?} for shifts up to t = {t_max}; refine the mesh or check convexity")]
    NoTouchingQuadratic { xi: Vec<f64>, t_max: f64 },
    #[error("c = {c} is below the threshold c̃ = {c_tilde}")]
    CTooSmall { c: f64, c_tilde: f64 },
    #[error("β(c) residual {residual} exceeds tolerance")]
    BetaNotResolved { residual: f64 },
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Subsolution(#[from] SubsolutionError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Ball,
    Ellipsoid,
    Superellipsoid,
}

/// `{x : Σ |z_i / s_i|^p < 1}`, `z = R(x − center)`, with `p ∈ (1, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexDomain {
    pub kind: DomainKind,
    pub center: Vec<f64>,
    /// Rows are the body axes.
    pub rotation: Matrix,
    pub semi_axes: Vec<f64>,
    pub exponent: f64,
    /// Lower bound on the principal curvatures of `∂D`.
    pub curvature_bound: f64,
}

/// A boundary point with its outward unit normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl ConvexDomain {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, BoundaryError> {
        let n = center.len();
        let mut d = Self::build(DomainKind::Ball, center, vec![radius; n], 2.0, None)?;
        d.kind = DomainKind::Ball;
        Ok(d)
    }

    pub fn ellipsoid(center: Vec<f64>, semi_axes: Vec<f64>, rotation: Option<Matrix>) -> Result<Self, BoundaryError> {
        Self::build(DomainKind::Ellipsoid, center, semi_axes, 2.0, rotation)
    }

    pub fn superellipsoid(
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        exponent: f64,
        rotation: Option<Matrix>,
    ) -> Result<Self, BoundaryError> {
        if !(exponent > 1.0 && exponent <= 2.0) {
            return Err(BoundaryError::InvalidDomain(format!(
                "superellipsoid exponent must lie in (1, 2], got {exponent}"
            )));
        }
        Self::build(DomainKind::Superellipsoid, center, semi_axes, exponent, rotation)
    }

    fn build(
        kind: DomainKind,
        center: Vec<f64>,
        semi_axes: Vec<f64>,
        exponent: f64,
        rotation: Option<Matrix>,
    ) -> Result<Self, BoundaryError> {
        let n = center.len();
        if n < 2 {
            return Err(BoundaryError::InvalidDomain("dimension must be at least 2".into()));
        }
        if semi_axes.len() != n {
            return Err(BoundaryError::DimensionMismatch {
                expected: n,
                got: semi_axes.len(),
            });
        }
        if semi_axes.iter().any(|s| !(*s > 0.0 && s.is_finite())) || center.iter().any(|c| !c.is_finite()) {
            return Err(BoundaryError::InvalidDomain("semi-axes must be positive and finite".into()));
        }
        let rotation = rotation.unwrap_or_else(|| Matrix::identity(n));
        if rotation.n() != n {
            return Err(BoundaryError::DimensionMismatch {
                expected: n,
                got: rotation.n(),
            });
        }
        let residual = rotation.orthogonality_residual();
        if residual > 1e-10 {
            return Err(BoundaryError::InvalidDomain(format!(
                "rotation is not orthogonal (residual {residual:e})"
            )));
        }
        let mut domain = Self {
            kind,
            center,
            rotation,
            semi_axes,
            exponent,
            curvature_bound: 0.0,
        };
        domain.curvature_bound = domain.estimate_curvature_bound();
        Ok(domain)
    }

    pub fn n(&self) -> usize {
        self.center.len()
    }

    fn body(&self, x: &[f64]) -> Vec<f64> {
        let shifted: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.rotation.mul_vec(&shifted)
    }

    fn body_gauge(&self, z: &[f64]) -> f64 {
        let p = self.exponent;
        z.iter()
            .zip(&self.semi_axes)
            .map(|(zi, si)| (zi / si).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Minkowski gauge about the center: `< 1` inside, `= 1` on `∂D`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.body_gauge(&self.body(x))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.gauge(x) < 1.0
    }

    /// Boundary point in body direction `u` with its outward normal.
    fn boundary_along(&self, u: &[f64]) -> BoundaryPoint {
        let g = self.body_gauge(u);
        let z: Vec<f64> = u.iter().map(|v| v / g).collect();
        let p = self.exponent;
        let grad: Vec<f64> = z
            .iter()
            .zip(&self.semi_axes)
            .map(|(zi, si)| zi.signum() * (zi / si).abs().powf(p - 1.0) / si)
            .collect();
        let gn = norm(&grad);
        let normal_body: Vec<f64> = grad.iter().map(|v| v / gn).collect();
        let offset = self.rotation.tr_mul_vec(&z);
        BoundaryPoint {
            point: offset.iter().zip(&self.center).map(|(a, b)| a + b).collect(),
            normal: self.rotation.tr_mul_vec(&normal_body),
        }
    }

    /// `count` boundary points (uniform angles in 2-D, quasi-random directions otherwise).
    pub fn boundary_mesh(&self, count: usize) -> Vec<BoundaryPoint> {
        let n = self.n();
        let dirs: Vec<Vec<f64>> = if n == 2 {
            (0..count)
                .map(|i| {
                    let th = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                    vec![th.cos(), th.sin()]
                })
                .collect()
        } else {
            sphere_directions(n, count)
        };
        dirs.iter().map(|u| self.boundary_along(u)).collect()
    }

    /// Largest distance between boundary points, bounded by twice the largest semi-axis.
    pub fn diameter_bound(&self) -> f64 {
        2.0 * self.semi_axes.iter().cloned().fold(0.0, f64::max)
    }

    /// The image under `x ↦ s V x` for orthogonal `V`.
    pub fn transformed(&self, v: &Matrix, s: f64) -> Result<Self, BoundaryError> {
        let center: Vec<f64> = v.mul_vec(&self.center).iter().map(|c| c * s).collect();
        let rotation = self.rotation.matmul(&v.transpose())?;
        let semi_axes = self.semi_axes.iter().map(|a| a * s).collect();
        let mut out = Self {
            kind: self.kind,
            center,
            rotation,
            semi_axes,
            exponent: self.exponent,
            curvature_bound: 0.0,
        };
        out.curvature_bound = out.estimate_curvature_bound();
        Ok(out)
    }

    fn estimate_curvature_bound(&self) -> f64 {
        let smin = self.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = self.semi_axes.iter().cloned().fold(0.0, f64::max);
        if self.exponent == 2.0 {
            return smin / (smax * smax);
        }
        // chord estimate 2 ν·(ξ − x)/|ξ − x|² between mesh neighbours
        let mesh = self.boundary_mesh(if self.n() == 2 { 720 } else { 2000 });
        let mut best = f64::INFINITY;
        for (i, b) in mesh.iter().enumerate() {
            let nearest = mesh
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| (dist2(&b.point, &c.point), c))
                .filter(|(d, _)| *d > 0.0)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((d2, c)) = nearest {
                let diff: Vec<f64> = b.point.iter().zip(&c.point).map(|(p, q)| p - q).collect();
                best = best.min(2.0 * dot(&b.normal, &diff) / d2);
            }
        }
        best
    }
}

/// `coef · Π x_i^{powers_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * t.powers.iter().zip(x).map(|(p, xi)| xi.powi(*p as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut g = vec![0.0; n];
        for t in &self.terms {
            for (i, gi) in g.iter_mut().enumerate() {
                let pi = t.powers.get(i).copied().unwrap_or(0);
                if pi == 0 {
                    continue;
                }
                let mut v = t.coef * pi as f64;
                for (j, xj) in x.iter().enumerate() {
                    let pj = t.powers.get(j).copied().unwrap_or(0);
                    let e = if j == i { pj - 1 } else { pj };
                    v *= xj.powi(e as i32);
                }
                *gi += v;
            }
        }
        g
    }

    pub fn check_dimension(&self, n: usize) -> Result<(), BoundaryError> {
        for t in &self.terms {
            if t.powers.len() != n {
                return Err(BoundaryError::DimensionMismatch {
                    expected: n,
                    got: t.powers.len(),
                });
            }
        }
        Ok(())
    }
}

/// `φ` on `∂D`, possibly seen through a change of variables:
/// `y ↦ s²(P(x) − b·x)` with `x = Vᵀ y / s`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub polynomial: Polynomial,
    pub frame: Matrix,
    pub scale: f64,
    pub linear: Vec<f64>,
}

impl BoundaryData {
    pub fn new(polynomial: Polynomial, n: usize) -> Result<Self, BoundaryError> {
        polynomial.check_dimension(n)?;
        Ok(Self {
            polynomial,
            frame: Matrix::identity(n),
            scale: 1.0,
            linear: vec![0.0; n],
        })
    }

    /// The data seen in coordinates `y = s V x`, with `b·x` subtracted.
    pub fn transformed(&self, v: &Matrix, s: f64, b: &[f64]) -> Result<Self, BoundaryError> {
        if self.scale != 1.0 || self.linear.iter().any(|c| *c != 0.0) {
            return Err(BoundaryError::InvalidDomain("boundary data already transformed".into()));
        }
        Ok(Self {
            polynomial: self.polynomial.clone(),
            frame: v.clone(),
            scale: s,
            linear: b.to_vec(),
        })
    }

    fn original(&self, y: &[f64]) -> Vec<f64> {
        self.frame.tr_mul_vec(y).iter().map(|v| v / self.scale).collect()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let x = self.original(y);
        self.scale * self.scale * (self.polynomial.eval(&x) - dot(&self.linear, &x))
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let x = self.original(y);
        let g: Vec<f64> = self
            .polynomial
            .gradient(&x)
            .iter()
            .zip(&self.linear)
            .map(|(gi, bi)| gi - bi)
            .collect();
        self.frame.mul_vec(&g).iter().map(|v| v * self.scale).collect()
    }
}

/// `Q_ξ(x) = ½(x − x̄)ᵀA(x − x̄) − ½(ξ − x̄)ᵀA(ξ − x̄) + φ(ξ)`.
#[derive(Debug, Clone, Serialize)]
pub struct TouchingQuadratic {
    pub xi: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub value_at_xi: f64,
    /// Normal shift used: `x̄ = ξ − A⁻¹(∇_Tφ(ξ) + t ν(ξ))`.
    pub t: f64,
    /// `min (φ − Q_ξ)/|x − ξ|²` over the mesh, excluding `ξ`.
    pub margin: f64,
    #[serde(skip)]
    a_x_bar: Vec<f64>,
    #[serde(skip)]
    constant: f64,
    #[serde(skip)]
    matrix: SymMatrix,
}

impl TouchingQuadratic {
    fn new(matrix: &SymMatrix, xi: &[f64], x_bar: Vec<f64>, value_at_xi: f64, t: f64) -> Self {
        let a_x_bar = matrix.mul_vec(&x_bar);
        let d: Vec<f64> = xi.iter().zip(&x_bar).map(|(a, b)| a - b).collect();
        let constant = 0.5 * dot(&x_bar, &a_x_bar) - 0.5 * matrix.quadratic_form(&d) + value_at_xi;
        Self {
            xi: xi.to_vec(),
            x_bar,
            value_at_xi,
            t,
            margin: 0.0,
            a_x_bar,
            constant,
            matrix: matrix.clone(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_with_quadratic(x, 0.5 * self.matrix.quadratic_form(x))
    }

    /// `Q_ξ(x)` given `½xᵀAx` (shared across many `ξ`).
    fn eval_with_quadratic(&self, x: &[f64], half_quad: f64) -> f64 {
        half_quad - dot(&self.a_x_bar, x) + self.constant
    }

    /// `min Q_ξ = φ(ξ) − ½(ξ − x̄)ᵀA(ξ − x̄)`, attained at `x̄`.
    pub fn minimum(&self) -> f64 {
        let d: Vec<f64> = self.xi.iter().zip(&self.x_bar).map(|(a, b)| a - b).collect();
        self.value_at_xi - 0.5 * self.matrix.quadratic_form(&d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshOptions {
    /// Boundary points carrying a touching quadratic.
    pub boundary_points: usize,
    /// The checks of `Q_ξ <= φ` and `c̄` use this many times more points.
    pub refine_factor: usize,
    /// Points on `∂E_r̂` where `Φ_β̂ > Q` is enforced.
    pub shell_points: usize,
    /// Required `φ − Q_ξ >= margin_floor · λ_min(A) · |x − ξ|²` on the mesh.
    pub margin_floor: f64,
    /// Doublings of the normal shift `t` before giving up.
    pub max_doublings: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            boundary_points: 400,
            refine_factor: 4,
            shell_points: 2000,
            margin_floor: 1e-3,
            max_doublings: 60,
        }
    }
}

/// Precomputed pieces shared by every `Q_ξ` of one problem.
struct TouchContext<'a> {
    data: &'a BoundaryData,
    matrix: &'a SymMatrix,
    inverse: SymMatrix,
    lambda_min: f64,
    coarse: &'a [BoundaryPoint],
    fine: &'a [BoundaryPoint],
    fine_phi: Vec<f64>,
    coarse_phi: Vec<f64>,
    t_start: f64,
    opts: MeshOptions,
}

fn positive_definite(matrix: &SymMatrix) -> Result<EigenDecomposition, BoundaryError> {
    let frame = eigh(matrix)?;
    let lo = frame.values.entries()[0];
    if !(lo > 0.0) {
        return Err(BoundaryError::NotPositiveDefinite(lo));
    }
    Ok(frame)
}

fn inverse_of(frame: &EigenDecomposition) -> SymMatrix {
    let inv: Vec<f64> = frame.values.entries().iter().map(|v| 1.0 / v).collect();
    EigenDecomposition {
        values: crate::symfunc::SymVec::from_slice(&inv).expect("finite"),
        vectors: frame.vectors.clone(),
    }
    .reconstruct()
}

impl<'a> TouchContext<'a> {
    fn new(
        domain: &ConvexDomain,
        data: &'a BoundaryData,
        matrix: &'a SymMatrix,
        coarse: &'a [BoundaryPoint],
        fine: &'a [BoundaryPoint],
        opts: MeshOptions,
    ) -> Result<Self, BoundaryError> {
        let frame = positive_definite(matrix)?;
        let values = frame.values.entries();
        let lambda_max = values[values.len() - 1];
        Ok(Self {
            data,
            matrix,
            inverse: inverse_of(&frame),
            lambda_min: values[0],
            coarse,
            fine,
            fine_phi: fine.iter().map(|b| data.eval(&b.point)).collect(),
            coarse_phi: coarse.iter().map(|b| data.eval(&b.point)).collect(),
            t_start: lambda_max * domain.diameter_bound() / 64.0,
            opts,
        })
    }

    fn candidate(&self, xi: &BoundaryPoint, t: f64) -> TouchingQuadratic {
        let g = self.data.gradient(&xi.point);
        let gn = dot(&g, &xi.normal);
        let w: Vec<f64> = g.iter().zip(&xi.normal).map(|(gi, ni)| gi - gn * ni + t * ni).collect();
        let shift = self.inverse.mul_vec(&w);
        let x_bar = xi.point.iter().zip(&shift).map(|(p, s)| p - s).collect::<Vec<_>>();
        TouchingQuadratic::new(self.matrix, &xi.point, x_bar, self.data.eval(&xi.point), t)
    }

    /// Smallest `(φ − Q)/d²` over `points`, and whether `Q <= φ` held everywhere.
    fn margin_on(&self, q: &TouchingQuadratic, points: &[BoundaryPoint], phi: &[f64]) -> (f64, bool) {
        let scale = q.value_at_xi.abs().max(1.0);
        let mut worst = f64::INFINITY;
        let mut below = true;
        for (b, f) in points.iter().zip(phi) {
            let d2 = dist2(&b.point, &q.xi);
            let gap = f - q.eval(&b.point);
            if d2 <= 1e-24 * scale {
                continue;
            }
            worst = worst.min(gap / d2);
            if gap < -1e-13 * scale {
                below = false;
            }
        }
        (worst, below)
    }

    fn touch(&self, xi: &BoundaryPoint) -> Result<TouchingQuadratic, BoundaryError> {
        let floor = self.opts.margin_floor * self.lambda_min;
        let mut t = self.t_start;
        for _ in 0..=self.opts.max_doublings {
            let mut q = self.candidate(xi, t);
            let (margin, _) = self.margin_on(&q, self.coarse, &self.coarse_phi);
            if margin >= floor {
                let (fine_margin, below) = self.margin_on(&q, self.fine, &self.fine_phi);
                if below && fine_margin > 0.0 {
                    q.margin = margin.min(fine_margin);
                    return Ok(q);
                }
            }
            t *= 2.0;
        }
        Err(BoundaryError::NoTouchingQuadratic {
            xi: xi.point.clone(),
            t_max: t / 2.0,
        })
    }
}

/// `Q_ξ` at one boundary point, checked against a mesh of `count` points and its refinement.
pub fn touching_quadratic(
    domain: &ConvexDomain,
    data: &BoundaryData,
    matrix: &SymMatrix,
    xi: &BoundaryPoint,
    opts: &MeshOptions,
) -> Result<TouchingQuadratic, BoundaryError> {
    let coarse = domain.boundary_mesh(opts.boundary_points);
    let fine = domain.boundary_mesh(opts.boundary_points * opts.refine_factor);
    TouchContext::new(domain, data, matrix, &coarse, &fine, *opts)?.touch(xi)
}

/// Geometry and data constants independent of `β`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeGeometry {
    /// `inf Q_ξ(x)` over `x ∈ E_r̄ ∖ D`, `ξ ∈ ∂D` (mesh).
    pub eta: f64,
    /// `max (Q_ξ(x) − ½xᵀAx)` over mesh `ξ` and refined-mesh `x ∈ ∂D`.
    pub c_bar: f64,
    /// `min` and `max` of `r_A` over the refined boundary mesh.
    pub r_min: f64,
    pub r_max: f64,
    pub r_bar: f64,
    pub r_hat: f64,
    /// Realized `max |x̄(ξ)|`.
    pub k_bound: f64,
    /// Largest normal shift used.
    pub t_max: f64,
    /// Smallest touching margin `(φ − Q_ξ)/|x − ξ|²`.
    pub min_margin: f64,
    pub boundary_points: usize,
    pub refined_points: usize,
    pub curvature_bound: f64,
}

/// The family `{Q_ξ}` over the boundary mesh and its pointwise maximum `Q`.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub matrix: SymMatrix,
    pub frame: EigenDecomposition,
    pub quadratics: Vec<TouchingQuadratic>,
    pub mesh: Vec<BoundaryPoint>,
    pub refined: Vec<BoundaryPoint>,
    pub geometry: EnvelopeGeometry,
    pub opts: MeshOptions,
}

impl Envelope {
    /// `Q(x) = max_ξ Q_ξ(x)`.
    pub fn q(&self, x: &[f64]) -> f64 {
        let half = 0.5 * self.matrix.quadratic_form(x);
        self.quadratics
            .iter()
            .map(|q| q.eval_with_quadratic(x, half))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn r_a(&self, x: &[f64]) -> f64 {
        self.matrix.quadratic_form(x).max(0.0).sqrt()
    }

    /// `count` points of `∂E_r` (quasi-random directions in the eigenframe of `A`).
    pub fn shell(&self, r: f64, count: usize) -> Vec<Vec<f64>> {
        let a = self.frame.values.entries();
        sphere_directions(a.len(), count)
            .iter()
            .map(|u| self.frame.from_frame(&onto_shell(a, u, r)))
            .collect()
    }
}

/// Builds every `Q_ξ` on the boundary mesh and the `β`-independent constants.
///
/// `r̄ = 1.1 max r_A(∂D)` and `r̂ = 2 max r_A(∂D)`; callers rescale first so
/// that `min r_A(∂D) > 1`.
pub fn envelope(
    domain: &ConvexDomain,
    data: &BoundaryData,
    matrix: &SymMatrix,
    opts: &MeshOptions,
) -> Result<Envelope, BoundaryError> {
    let n = domain.n();
    if matrix.n() != n {
        return Err(BoundaryError::DimensionMismatch {
            expected: n,
            got: matrix.n(),
        });
    }
    let mesh = domain.boundary_mesh(opts.boundary_points);
    let refined = domain.boundary_mesh(opts.boundary_points * opts.refine_factor);
    let ctx = TouchContext::new(domain, data, matrix, &mesh, &refined, *opts)?;
    let quadratics: Vec<TouchingQuadratic> = mesh
        .par_iter()
        .map(|xi| ctx.touch(xi))
        .collect::<Result<_, _>>()?;

    let r_of = |x: &[f64]| matrix.quadratic_form(x).max(0.0).sqrt();
    let (r_min, r_max) = refined
        .iter()
        .chain(&mesh)
        .map(|b| r_of(&b.point))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    let r_bar = 1.1 * r_max;
    let r_hat = 2.0 * r_max;

    let half_quads: Vec<f64> = refined.iter().map(|b| 0.5 * matrix.quadratic_form(&b.point)).collect();
    let per_xi: Vec<(f64, f64)> = quadratics
        .par_iter()
        .map(|q| {
            let on_boundary = refined
                .iter()
                .zip(&half_quads)
                .map(|(b, h)| q.eval_with_quadratic(&b.point, *h))
                .fold(f64::INFINITY, f64::min);
            let lowest = q.minimum();
            let rb = r_of(&q.x_bar);
            let eta_xi = if rb >= r_bar {
                // nearest point of ∂E_r̄ in the A-metric
                lowest + 0.5 * (rb - r_bar) * (rb - r_bar)
            } else if !domain.contains(&q.x_bar) {
                lowest
            } else {
                on_boundary.min(q.value_at_xi)
            };
            let c_bar_xi = refined
                .iter()
                .zip(&half_quads)
                .map(|(b, h)| q.eval_with_quadratic(&b.point, *h) - h)
                .fold(f64::NEG_INFINITY, f64::max);
            (eta_xi, c_bar_xi)
        })
        .collect();
    let eta = per_xi.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let c_bar = per_xi.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let geometry = EnvelopeGeometry {
        eta,
        c_bar,
        r_min,
        r_max,
        r_bar,
        r_hat,
        k_bound: quadratics.iter().map(|q| norm(&q.x_bar)).fold(0.0, f64::max),
        t_max: quadratics.iter().map(|q| q.t).fold(0.0, f64::max),
        min_margin: quadratics.iter().map(|q| q.margin).fold(f64::INFINITY, f64::min),
        boundary_points: mesh.len(),
        refined_points: refined.len(),
        curvature_bound: domain.curvature_bound,
    };
    Ok(Envelope {
        matrix: matrix.clone(),
        frame: positive_definite(matrix)?,
        quadratics,
        mesh,
        refined,
        geometry,
        opts: *opts,
    })
}

/// `Φ_β` on the shell `r_A = r`, for `α = η`, `γ = r̄`.
pub fn phi_on_shell(spec: &ProfileSpec, eta: f64, r_bar: f64, r: f64) -> Result<f64, BoundaryError> {
    let mu_bar = mu_detailed(r_bar, spec)?.value;
    let mu_r = mu_detailed(r, spec)?.value;
    Ok(eta + 0.5 * (r - r_bar) * (r + r_bar) + (mu_bar - mu_r))
}

/// `μ(β) = η − ½r̄² + μ_r̄(β)`.
pub fn mu_of_beta(spec: &ProfileSpec, eta: f64, r_bar: f64) -> Result<f64, BoundaryError> {
    Ok(eta - 0.5 * r_bar * r_bar + mu_detailed(r_bar, spec)?.value)
}

/// All constants of the construction for one `(A, k, l)`.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeConstants {
    pub eta: f64,
    pub c_bar: f64,
    pub c_tilde: f64,
    pub r_bar: f64,
    pub r_hat: f64,
    pub beta_hat: f64,
    /// `μ(β̂)`.
    pub mu_beta_hat: f64,
    /// `max Q` over the `∂E_r̂` mesh, and `Φ_β̂` there.
    pub q_max_on_shell: f64,
    pub phi_beta_hat_on_shell: f64,
    pub shell_points: usize,
    pub geometry: EnvelopeGeometry,
    #[serde(skip)]
    pub spec: ProfileSpec,
}

/// Smallest `β̂ ∈ {2, 4, 8, …}` with `Φ_β̂ > max Q` on the `∂E_r̂` mesh.
pub fn beta_hat(env: &Envelope, xi: &XiProfile<f64>) -> Result<(f64, f64, f64), BoundaryError> {
    let g = &env.geometry;
    let q_max = env
        .shell(g.r_hat, env.opts.shell_points)
        .par_iter()
        .map(|x| env.q(x))
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let mut beta = 2.0;
    loop {
        let spec = ProfileSpec::from_xi(xi, beta)?;
        let phi = phi_on_shell(&spec, g.eta, g.r_bar, g.r_hat)?;
        if phi > q_max || beta > 1e300 {
            return Ok((beta, q_max, phi));
        }
        beta *= 2.0;
    }
}

/// `η, c̄, β̂, μ(β̂)` and `c̃ = max{η, μ(β̂), c̄}`.
pub fn constants(env: &Envelope, xi: &XiProfile<f64>) -> Result<EnvelopeConstants, BoundaryError> {
    xi.require_superquadratic().map_err(SubsolutionError::from)?;
    let g = env.geometry.clone();
    let (beta_hat, q_max, phi_hat) = beta_hat(env, xi)?;
    let spec = ProfileSpec::from_xi(xi, beta_hat)?;
    let mu_hat = mu_of_beta(&spec, g.eta, g.r_bar)?;
    Ok(EnvelopeConstants {
        eta: g.eta,
        c_bar: g.c_bar,
        c_tilde: g.eta.max(mu_hat).max(g.c_bar),
        r_bar: g.r_bar,
        r_hat: g.r_hat,
        beta_hat,
        mu_beta_hat: mu_hat,
        q_max_on_shell: q_max,
        phi_beta_hat_on_shell: phi_hat,
        shell_points: env.opts.shell_points,
        geometry: g,
        spec,
    })
}

/// Relative residual accepted for `μ(β(c)) = c`.
pub const BETA_OF_C_TOL: f64 = 1e-12;

/// The unique `β(c) >= β̂` with `μ(β(c)) = c`.
pub fn beta_of_c(c: f64, k: &EnvelopeConstants) -> Result<f64, BoundaryError> {
    if !(c >= k.c_tilde) {
        return Err(BoundaryError::CTooSmall { c, c_tilde: k.c_tilde });
    }
    let mu = |beta: f64| -> Result<f64, BoundaryError> { mu_of_beta(&k.spec.with_beta(beta)?, k.eta, k.r_bar) };
    let lo = k.beta_hat;
    let mut hi = 2.0 * lo;
    while mu(hi)? < c {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(BoundaryError::BetaNotResolved { residual: f64::INFINITY });
        }
    }
    let mut failure = None;
    let root = find_root(
        |beta| match mu(beta) {
            Ok(v) => v - c,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        &BracketOptions::default(),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let beta = root?.x;
    let residual = (mu(beta)? - c).abs();
    if residual > BETA_OF_C_TOL * c.abs().max(1.0) {
        return Err(BoundaryError::BetaNotResolved { residual });
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_ball() -> ConvexDomain {
        ConvexDomain::ball(vec![0.0; 3], 1.0).unwrap()
    }

    #[test]
    fn mesh_lies_on_boundary_with_unit_normals() {
        let d = ConvexDomain::superellipsoid(vec![0.1, 0.0, 0.0], vec![1.0, 2.0, 1.5], 1.5, None).unwrap();
        for b in d.boundary_mesh(100) {
            assert!((d.gauge(&b.point) - 1.0).abs() < 1e-12);
            assert!((norm(&b.normal) - 1.0).abs() < 1e-12);
            // outward: stepping along the normal leaves the body
            let out: Vec<f64> = b.point.iter().zip(&b.normal).map(|(p, n)| p + 1e-6 * n).collect();
            assert!(!d.contains(&out));
        }
        assert!(d.curvature_bound > 0.0);
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(ConvexDomain::superellipsoid(vec![0.0; 2], vec![1.0; 2], 2.5, None).is_err());
        assert!(ConvexDomain::ball(vec![0.0; 2], -1.0).is_err());
        assert!(ConvexDomain::ellipsoid(vec![0.0; 2], vec![1.0; 3], None).is_err());
    }

    #[test]
    fn polynomial_gradient_matches_difference() {
        let p = Polynomial {
            terms: vec![
                Monomial { coef: 2.0, powers: vec![2, 1, 0] },
                Monomial { coef: -1.0, powers: vec![0, 0, 3] },
            ],
        };
        let x = [0.3, -1.2, 0.7];
        let g = p.gradient(&x);
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (p.eval(&xp) - p.eval(&xm)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn unit_ball_touching_quadratic() {
        let d = unit_ball();
        let data = BoundaryData::new(Polynomial::zero(), 3).unwrap();
        let a = SymMatrix::identity(3);
        let opts = MeshOptions {
            boundary_points: 200,
            ..MeshOptions::default()
        };
        let xi = d.boundary_mesh(200)[7].clone();
        let q = touching_quadratic(&d, &data, &a, &xi, &opts).unwrap();
        // x̄ = ξ − tν = (1 − t) ξ
        for i in 0..3 {
            assert!((q.x_bar[i] - (1.0 - q.t) * xi.point[i]).abs() < 1e-12);
        }
        assert!(q.eval(&xi.point).abs() < 1e-14);
        for b in d.boundary_mesh(500) {
            let x = &b.point;
            let expect = 0.5 * (dot(x, x) - 1.0) + (1.0 - q.t) * (1.0 - dot(&xi.point, x));
            assert!((q.eval(x) - expect).abs() < 1e-12);
            if dist2(x, &xi.point) > 1e-12 {
                assert!(q.eval(x) < 0.0);
            }
        }
    }

    #[test]
    fn linear_data_touches() {
        let d = unit_ball();
        let data = BoundaryData::new(
            Polynomial {
                terms: vec![Monomial { coef: 0.7, powers: vec![1, 0, 0] }, Monomial { coef: -0.2, powers: vec![0, 0, 1] }],
            },
            3,
        )
        .unwrap();
        let a = SymMatrix::diagonal(&[0.5, 1.0, 2.0]);
        let opts = MeshOptions {
            boundary_points: 150,
            ..MeshOptions::default()
        };
        for xi in d.boundary_mesh(150).iter().step_by(17) {
            let q = touching_quadratic(&d, &data, &a, xi, &opts).unwrap();
            assert!((q.eval(&xi.point) - data.eval(&xi.point)).abs() < 1e-13);
            assert!(q.margin > 0.0);
        }
    }

    #[test]
    fn transformed_data_round_trip() {
        let p = Polynomial {
            terms: vec![Monomial { coef: 1.0, powers: vec![1, 1] }],
        };
        let data = BoundaryData::new(p.clone(), 2).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let v = Matrix::from_rows(&[vec![c, s], vec![-s, c]]).unwrap();
        let b = [0.3, -0.1];
        let t = data.transformed(&v, 2.0, &b).unwrap();
        let x = [0.4, 0.9];
        let y: Vec<f64> = v.mul_vec(&x).iter().map(|v| 2.0 * v).collect();
        let expect = 4.0 * (p.eval(&x) - dot(&b, &x));
        assert!((t.eval(&y) - expect).abs() < 1e-14);
        let g = t.gradient(&y);
        for i in 0..2 {
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[i] += 1e-6;
            ym[i] -= 1e-6;
            assert!(((t.eval(&yp) - t.eval(&ym)) / 2e-6 - g[i]).abs() < 1e-7);
        }
    }
}
