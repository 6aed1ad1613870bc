//! Compact domains in flat ambient spaces: signed distance (positive inside),
//! boundary quadrature, normals, mean curvature `½Δφ` and outer tubes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::weight::Point;

pub const DEFAULT_BOUNDARY_N: usize = 512;

const NEWTON_MAX_ITER: usize = 50;
const COARSE_SAMPLES: usize = 256;
const MIN_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub enum AmbientSpace {
    /// The unbounded real line (1-D only).
    Line,
    /// Flat torus with the given side lengths, one per dimension.
    Torus(Vec<f64>),
}

impl AmbientSpace {
    pub fn torus(periods: Vec<f64>) -> Result<Self> {
        if periods.is_empty() || periods.len() > 2 {
            return Err(Error::config("torus needs one or two periods"));
        }
        if periods.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::config("torus periods must be positive"));
        }
        Ok(AmbientSpace::Torus(periods))
    }

    pub fn dimension(&self) -> usize {
        match self {
            AmbientSpace::Line => 1,
            AmbientSpace::Torus(p) => p.len(),
        }
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match self {
            AmbientSpace::Line => None,
            AmbientSpace::Torus(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Disk { center: Point, radius: f64 },
    /// Axis-aligned ellipse with semi-axes `a` (along x) and `b` (along y).
    Ellipse { center: Point, a: f64, b: f64 },
    /// `ρ(θ) = c_0 + Σ_k (c_{2k-1} cos kθ + c_{2k} sin kθ)` about `center`.
    Star { center: Point, coeffs: Vec<f64> },
}

impl Shape {
    pub fn dimension(&self) -> usize {
        match self {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Interval { .. } => "interval",
            Shape::Disk { .. } => "disk",
            Shape::Ellipse { .. } => "ellipse",
            Shape::Star { .. } => "star",
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Shape::Interval { a, b } => [0.5 * (a + b), 0.0],
            Shape::Disk { center, .. } | Shape::Ellipse { center, .. } | Shape::Star { center, .. } => *center,
        }
    }

    /// Half-widths of the bounding box about `center()`.
    pub fn half_extent(&self) -> Point {
        match self {
            Shape::Interval { a, b } => [0.5 * (b - a), 0.0],
            Shape::Disk { radius, .. } => [*radius, *radius],
            Shape::Ellipse { a, b, .. } => [*a, *b],
            Shape::Star { coeffs, .. } => {
                let (mut hx, mut hy) = (0.0f64, 0.0f64);
                for i in 0..4096 {
                    let th = 2.0 * PI * i as f64 / 4096.0;
                    let r = star_radius(coeffs, th).0;
                    hx = hx.max((r * th.cos()).abs());
                    hy = hy.max((r * th.sin()).abs());
                }
                [hx, hy]
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let e = self.half_extent();
        match self {
            Shape::Interval { .. } => 2.0 * e[0],
            _ => 2.0 * e[0].max(e[1]),
        }
    }

    /// Dilation `x ↦ c + λ(x - c)` about the shape center.
    pub fn dilated(&self, lambda: f64) -> Self {
        match self {
            Shape::Interval { a, b } => {
                let c = 0.5 * (a + b);
                Shape::Interval { a: c + lambda * (a - c), b: c + lambda * (b - c) }
            }
            Shape::Disk { center, radius } => Shape::Disk { center: *center, radius: lambda * radius },
            Shape::Ellipse { center, a, b } => Shape::Ellipse { center: *center, a: lambda * a, b: lambda * b },
            Shape::Star { center, coeffs } => {
                Shape::Star { center: *center, coeffs: coeffs.iter().map(|c| lambda * c).collect() }
            }
        }
    }
}

/// `(ρ, ρ', ρ'')` of a truncated Fourier radial profile.
fn star_radius(coeffs: &[f64], th: f64) -> (f64, f64, f64) {
    let mut r = coeffs.first().copied().unwrap_or(0.0);
    let (mut d1, mut d2) = (0.0, 0.0);
    for (idx, pair) in coeffs[1..].chunks(2).enumerate() {
        let k = (idx + 1) as f64;
        let (a, b) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        let (s, c) = (k * th).sin_cos();
        r += a * c + b * s;
        d1 += k * (-a * s + b * c);
        d2 += -k * k * (a * c + b * s);
    }
    (r, d1, d2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub position: Point,
    /// Outward unit normal `ν = -∇φ`.
    pub normal: Point,
    /// `½Δφ` at the node.
    pub mean_curvature: f64,
    /// Quadrature weight for the boundary measure `dA`.
    pub weight: f64,
    /// Curve parameter (angle) of the node; endpoint index in 1-D.
    pub param: f64,
}

impl BoundaryNode {
    /// Signed curvature of the boundary curve, positive where convex.
    pub fn curvature(&self) -> f64 {
        -2.0 * self.mean_curvature
    }
}

/// Closest boundary point of a 2-D shape.
#[derive(Debug, Clone, Copy)]
struct Projection {
    point: Point,
    normal: Point,
    curvature: f64,
}

#[derive(Debug, Clone)]
pub struct DomainGeometry {
    id: String,
    ambient: AmbientSpace,
    shape: Shape,
    nodes: Vec<BoundaryNode>,
    safe_tube_radius: f64,
}

impl DomainGeometry {
    pub fn new(shape: Shape, ambient: AmbientSpace, boundary_n: usize) -> Result<Self> {
        if shape.dimension() != ambient.dimension() {
            return Err(Error::config(format!(
                "{} needs a {}-dimensional ambient space",
                shape.name(),
                shape.dimension()
            )));
        }
        match &shape {
            Shape::Interval { a, b } => {
                if !(a < b) {
                    return Err(Error::config("interval needs a < b"));
                }
            }
            Shape::Disk { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::config("disk radius must be positive"));
                }
            }
            Shape::Ellipse { a, b, .. } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::config("ellipse semi-axes must be positive"));
                }
            }
            Shape::Star { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::config("star shape needs at least the constant coefficient"));
                }
                let min_r = (0..4096)
                    .map(|i| star_radius(coeffs, 2.0 * PI * i as f64 / 4096.0).0)
                    .fold(f64::INFINITY, f64::min);
                if !(min_r > 0.0) {
                    return Err(Error::config("star radial profile must stay positive"));
                }
            }
        }
        if shape.dimension() == 2 && boundary_n < 8 {
            return Err(Error::config("boundary_n must be at least 8"));
        }
        if let Some(periods) = ambient.periods() {
            let ext = shape.half_extent();
            for (i, p) in periods.iter().enumerate() {
                if 2.0 * ext[i] >= *p {
                    return Err(Error::config(format!(
                        "torus period {p} does not contain the domain (width {})",
                        2.0 * ext[i]
                    )));
                }
            }
        }
        let mut geom = Self { id: shape.name().to_string(), ambient, shape, nodes: Vec::new(), safe_tube_radius: 0.0 };
        geom.nodes = geom.build_nodes(boundary_n);
        geom.safe_tube_radius = geom.compute_safe_tube_radius();
        Ok(geom)
    }

    /// Shape placed in the default ambient space: the line for intervals, a
    /// square torus of side `8·diam(S)` centred on the shape otherwise.
    pub fn with_default_ambient(shape: Shape) -> Result<Self> {
        let ambient = match shape {
            Shape::Interval { .. } => AmbientSpace::Line,
            _ => AmbientSpace::torus(vec![8.0 * shape.diameter(); 2])?,
        };
        Self::new(shape, ambient, DEFAULT_BOUNDARY_N)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(Shape::Interval { a, b }, AmbientSpace::Line, 2)
    }

    pub fn disk(radius: f64, period: f64) -> Result<Self> {
        Self::new(
            Shape::Disk { center: [0.0; 2], radius },
            AmbientSpace::torus(vec![period; 2])?,
            DEFAULT_BOUNDARY_N,
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dimension(&self) -> usize {
        self.shape.dimension()
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    pub fn safe_tube_radius(&self) -> f64 {
        self.safe_tube_radius
    }

    /// Same shape dilated by `lambda` about its center, ambient periods scaled alike.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        let ambient = match &self.ambient {
            AmbientSpace::Line => AmbientSpace::Line,
            AmbientSpace::Torus(p) => AmbientSpace::Torus(p.iter().map(|v| v * lambda).collect()),
        };
        let n = self.nodes.len().max(2);
        Ok(Self::new(self.shape.dilated(lambda), ambient, n)?.with_id(self.id.clone()))
    }

    /// Position, first and second derivative of the boundary parametrization.
    fn curve(&self, th: f64) -> (Point, Point, Point) {
        let (s, c) = th.sin_cos();
        match &self.shape {
            Shape::Interval { .. } => unreachable!("intervals have no boundary curve"),
            Shape::Disk { center, radius: r } => (
                [center[0] + r * c, center[1] + r * s],
                [-r * s, r * c],
                [-r * c, -r * s],
            ),
            Shape::Ellipse { center, a, b } => (
                [center[0] + a * c, center[1] + b * s],
                [-a * s, b * c],
                [-a * c, -b * s],
            ),
            Shape::Star { center, coeffs } => {
                let (r, d1, d2) = star_radius(coeffs, th);
                (
                    [center[0] + r * c, center[1] + r * s],
                    [d1 * c - r * s, d1 * s + r * c],
                    [(d2 - r) * c - 2.0 * d1 * s, (d2 - r) * s + 2.0 * d1 * c],
                )
            }
        }
    }

    fn frame(&self, th: f64) -> Projection {
        let (p, d1, d2) = self.curve(th);
        let speed = d1[0].hypot(d1[1]);
        let normal = [d1[1] / speed, -d1[0] / speed];
        let curvature = (d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3);
        Projection { point: p, normal, curvature }
    }

    fn build_nodes(&self, n: usize) -> Vec<BoundaryNode> {
        match &self.shape {
            Shape::Interval { a, b } => vec![
                BoundaryNode { position: [*a, 0.0], normal: [-1.0, 0.0], mean_curvature: 0.0, weight: 1.0, param: 0.0 },
                BoundaryNode { position: [*b, 0.0], normal: [1.0, 0.0], mean_curvature: 0.0, weight: 1.0, param: 1.0 },
            ],
            _ => (0..n)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / n as f64;
                    let (_, d1, _) = self.curve(th);
                    let f = self.frame(th);
                    BoundaryNode {
                        position: f.point,
                        normal: f.normal,
                        mean_curvature: -0.5 * f.curvature,
                        weight: d1[0].hypot(d1[1]) * 2.0 * PI / n as f64,
                        param: th,
                    }
                })
                .collect(),
        }
    }

    fn compute_safe_tube_radius(&self) -> f64 {
        let reach = match &self.shape {
            Shape::Interval { a, b } => 0.5 * (b - a),
            Shape::Disk { radius, .. } => 0.5 * radius,
            _ => {
                let kmax = (0..8192)
                    .map(|i| self.frame(2.0 * PI * i as f64 / 8192.0).curvature.abs())
                    .fold(0.0, f64::max);
                0.5 / kmax
            }
        };
        // Periodic images must stay outside the tube as well.
        match self.ambient.periods() {
            Some(periods) => {
                let ext = self.shape.half_extent();
                let gap = periods
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p - 2.0 * ext[i])
                    .fold(f64::INFINITY, f64::min);
                reach.min(0.5 * gap)
            }
            None => reach,
        }
    }

    /// Representative of `x` in the periodic cell centred on the shape.
    pub fn wrap(&self, x: Point) -> Point {
        match self.ambient.periods() {
            None => x,
            Some(periods) => {
                let c = self.shape.center();
                let mut y = x;
                for (i, p) in periods.iter().enumerate() {
                    y[i] = c[i] + (x[i] - c[i] - p * ((x[i] - c[i]) / p).round());
                }
                y
            }
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        let x = self.wrap(x);
        match &self.shape {
            Shape::Interval { a, b } => *a <= x[0] && x[0] <= *b,
            Shape::Disk { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) <= *radius,
            Shape::Ellipse { center, a, b } => {
                let (u, v) = ((x[0] - center[0]) / a, (x[1] - center[1]) / b);
                u * u + v * v <= 1.0
            }
            Shape::Star { center, coeffs } => {
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                u.hypot(v) <= star_radius(coeffs, v.atan2(u)).0
            }
        }
    }

    /// Closest point on a closed curve by coarse sampling and Newton on
    /// `g(θ) = (γ(θ) - x)·γ'(θ)`.
    fn project(&self, x: Point) -> Result<Projection> {
        let dist2 = |th: f64| {
            let (p, _, _) = self.curve(th);
            (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
        };
        let mut th = (0..COARSE_SAMPLES)
            .map(|i| 2.0 * PI * i as f64 / COARSE_SAMPLES as f64)
            .min_by(|a, b| dist2(*a).total_cmp(&dist2(*b)))
            .unwrap_or(0.0);
        let max_step = 2.0 * PI / COARSE_SAMPLES as f64;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d1, d2) = self.curve(th);
            let r = [p[0] - x[0], p[1] - x[1]];
            let g = r[0] * d1[0] + r[1] * d1[1];
            let dg = d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1];
            if !(dg > 0.0) {
                return Err(Error::ProjectionFailure { point: x });
            }
            let step = (g / dg).clamp(-max_step, max_step);
            th -= step;
            if step.abs() <= 1e-15 * (1.0 + th.abs()) {
                return Ok(self.frame(th));
            }
        }
        Err(Error::ProjectionFailure { point: x })
    }

    /// `φ(x)`: distance to `∂S`, positive inside.
    pub fn signed_distance(&self, x: Point) -> Result<f64> {
        let x = self.wrap(x);
        Ok(match &self.shape {
            Shape::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Shape::Disk { center, radius } => radius - (x[0] - center[0]).hypot(x[1] - center[1]),
            _ => {
                let p = self.project(x)?;
                let d = (p.point[0] - x[0]).hypot(p.point[1] - x[1]);
                if self.contains(x) {
                    d
                } else {
                    -d
                }
            }
        })
    }

    /// `∇φ(x)`; for curved shapes `-ν` at the closest boundary point.
    pub fn gradient(&self, x: Point) -> Result<Point> {
        let x = self.wrap(x);
        Ok(match &self.shape {
            Shape::Interval { a, b } => {
                if x[0] - a < b - x[0] {
                    [1.0, 0.0]
                } else {
                    [-1.0, 0.0]
                }
            }
            Shape::Disk { center, .. } => {
                let (u, v) = (x[0] - center[0], x[1] - center[1]);
                let r = u.hypot(v);
                [-u / r, -v / r]
            }
            _ => {
                let p = self.project(x)?;
                [-p.normal[0], -p.normal[1]]
            }
        })
    }

    /// Extension of the outward normal into the tube, `ν(x) = -∇φ(x)`.
    pub fn normal_field(&self, x: Point) -> Result<Point> {
        let g = self.gradient(x)?;
        Ok([-g[0], -g[1]])
    }

    /// `½Δφ(x)` in the tube: `-½κ/(1 - κφ)` along the normal through the closest
    /// boundary point of curvature `κ`; zero in 1-D.
    pub fn mean_curvature_field(&self, x: Point) -> Result<f64> {
        let x = self.wrap(x);
        Ok(match &self.shape {
            Shape::Interval { .. } => 0.0,
            Shape::Disk { center, .. } => -0.5 / (x[0] - center[0]).hypot(x[1] - center[1]),
            _ => {
                let p = self.project(x)?;
                let phi = self.signed_distance(x)?;
                -0.5 * p.curvature / (1.0 - p.curvature * phi)
            }
        })
    }

    /// `½Δφ` at a boundary node.
    pub fn mean_curvature_at(&self, node: &BoundaryNode) -> f64 {
        node.mean_curvature
    }

    /// `½Δφ(x)` by the fourth-order five-point Laplacian of `φ` with step `s*/8`.
    pub fn mean_curvature_fd(&self, x: Point) -> Result<f64> {
        let h = self.safe_tube_radius / 8.0;
        if h < MIN_FD_STEP {
            return Err(Error::config(format!(
                "finite-difference step {h:e} underflows (safe tube radius {:e})",
                self.safe_tube_radius
            )));
        }
        let phi0 = self.signed_distance(x)?;
        let mut lap = 0.0;
        for axis in 0..self.dimension() {
            let at = |d: f64| {
                let mut y = x;
                y[axis] += d;
                self.signed_distance(y)
            };
            lap += (-at(2.0 * h)? + 16.0 * at(h)? - 30.0 * phi0 + 16.0 * at(-h)? - at(-2.0 * h)?) / (12.0 * h * h);
        }
        Ok(0.5 * lap)
    }

    /// `Σ g(node)·weight` over the boundary nodes.
    pub fn boundary_integral<G: FnMut(&BoundaryNode) -> f64>(&self, mut g: G) -> f64 {
        self.nodes.iter().map(|n| g(n) * n.weight).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary_integral(|_| 1.0)
    }

    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Ellipse { a, b, .. } => PI * a * b,
            Shape::Star { .. } => self.volume_integral(|_| 1.0),
        }
    }

    /// `∫_S g dV`: Gauss–Legendre in 1-D and radially, trapezoid in angle.
    pub fn volume_integral<G: Fn(Point) -> f64>(&self, g: G) -> f64 {
        const ANGLES: usize = 256;
        const RADIAL_PANELS: usize = 4;
        match &self.shape {
            Shape::Interval { a, b } => quadrature::composite_gl(|x| g([x, 0.0]), *a, *b, 8),
            _ => {
                let mut acc = 0.0;
                for i in 0..ANGLES {
                    let th = 2.0 * PI * i as f64 / ANGLES as f64;
                    let (s, c) = th.sin_cos();
                    let ray = match &self.shape {
                        Shape::Disk { center, radius } => {
                            quadrature::composite_gl(
                                |r| g([center[0] + r * c, center[1] + r * s]) * r,
                                0.0,
                                *radius,
                                RADIAL_PANELS,
                            )
                        }
                        Shape::Ellipse { center, a, b } => {
                            a * b
                                * quadrature::composite_gl(
                                    |r| g([center[0] + a * r * c, center[1] + b * r * s]) * r,
                                    0.0,
                                    1.0,
                                    RADIAL_PANELS,
                                )
                        }
                        Shape::Star { center, coeffs } => {
                            let rho = star_radius(coeffs, th).0;
                            quadrature::composite_gl(
                                |r| g([center[0] + r * c, center[1] + r * s]) * r,
                                0.0,
                                rho,
                                RADIAL_PANELS,
                            )
                        }
                        Shape::Interval { .. } => unreachable!(),
                    };
                    acc += ray;
                }
                acc * 2.0 * PI / ANGLES as f64
            }
        }
    }

    fn check_tube(&self, s: f64) -> Result<()> {
        if s < 0.0 {
            return Err(Error::domain(format!("tube radius must be non-negative, got {s}")));
        }
        if s > self.safe_tube_radius {
            return Err(Error::OutOfTube { s, limit: self.safe_tube_radius });
        }
        Ok(())
    }

    /// `vol(S^{-s})`, the outer collar of width `s`.
    pub fn tube_volume(&self, s: f64) -> Result<f64> {
        self.check_tube(s)?;
        Ok(match &self.shape {
            Shape::Interval { .. } => 2.0 * s,
            Shape::Disk { radius, .. } => PI * ((radius + s).powi(2) - radius * radius),
            // Steiner: the parallel curve at distance σ has length element (1 + κσ) dA.
            _ => s * self.perimeter() + 0.5 * s * s * self.boundary_integral(|n| n.curvature()),
        })
    }

    /// `∫_{S^{-s}} a dV` in normal coordinates `x = p + σν(p)`, `0 ≤ σ ≤ s`.
    pub fn tube_integral<A: Fn(Point) -> f64>(&self, a: A, s: f64) -> Result<f64> {
        self.check_tube(s)?;
        Ok(self.boundary_integral(|n| {
            let k = n.curvature();
            quadrature::composite_gl(
                |sig| a([n.position[0] + sig * n.normal[0], n.position[1] + sig * n.normal[1]]) * (1.0 + k * sig),
                0.0,
                s,
                1,
            )
        }))
    }

    /// `(L_ν)^order g` at a node, by fourth-order central differences along
    /// `p + σν` with step `s*/8`.
    pub fn normal_derivative<G: Fn(Point) -> f64>(&self, g: G, node: &BoundaryNode, order: usize) -> Result<f64> {
        let h = self.safe_tube_radius / 8.0;
        if h < MIN_FD_STEP {
            return Err(Error::config(format!("finite-difference step {h:e} underflows")));
        }
        let at = |sig: f64| g([node.position[0] + sig * node.normal[0], node.position[1] + sig * node.normal[1]]);
        match order {
            1 => Ok((-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)),
            2 => Ok((-at(2.0 * h) + 16.0 * at(h) - 30.0 * at(0.0) + 16.0 * at(-h) - at(-2.0 * h)) / (12.0 * h * h)),
            _ => Err(Error::UnsupportedOrder { order, max: 2 }),
        }
    }

    /// Area of `S ∩ [x0, x1] × [y0, y1]` (length of `S ∩ [x0, x1]` in 1-D), for
    /// the subcell indicator.
    pub fn cell_measure(&self, lo: Point, hi: Point) -> f64 {
        match &self.shape {
            Shape::Interval { a, b } => (hi[0].min(*b) - lo[0].max(*a)).max(0.0),
            Shape::Disk { center, radius } => {
                let r = *radius;
                r * r
                    * unit_disk_rect_area(
                        (lo[0] - center[0]) / r,
                        (hi[0] - center[0]) / r,
                        (lo[1] - center[1]) / r,
                        (hi[1] - center[1]) / r,
                    )
            }
            Shape::Ellipse { center, a, b } => {
                a * b
                    * unit_disk_rect_area(
                        (lo[0] - center[0]) / a,
                        (hi[0] - center[0]) / a,
                        (lo[1] - center[1]) / b,
                        (hi[1] - center[1]) / b,
                    )
            }
            Shape::Star { .. } => self.star_cell_measure(lo, hi, 0),
        }
    }

    fn star_cell_measure(&self, lo: Point, hi: Point, depth: usize) -> f64 {
        const MAX_DEPTH: usize = 4;
        let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let c = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let half_diag = 0.5 * (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let phi = match self.signed_distance(c) {
            Ok(v) => v,
            Err(_) => return if self.contains(c) { area } else { 0.0 },
        };
        if phi >= half_diag {
            return area;
        }
        if phi <= -half_diag {
            return 0.0;
        }
        if depth == MAX_DEPTH {
            // Linearize φ about the center and clip the cell by the half-plane.
            let g = self.gradient(c).unwrap_or([0.0, 0.0]);
            return half_plane_rect_area(lo, hi, c, phi, g);
        }
        let mut acc = 0.0;
        for (qx, qy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let l = [if qx == 0 { lo[0] } else { c[0] }, if qy == 0 { lo[1] } else { c[1] }];
            let h = [if qx == 0 { c[0] } else { hi[0] }, if qy == 0 { c[1] } else { hi[1] }];
            acc += self.star_cell_measure(l, h, depth + 1);
        }
        acc
    }

    /// Cheap inside/outside decision for cells far from the boundary; `None`
    /// when the cell may meet `∂S`.
    pub fn far_cell_state(&self, lo: Point, hi: Point) -> Option<bool> {
        let c = self.shape.center();
        let e = self.shape.half_extent();
        let out = match self.dimension() {
            1 => hi[0] < c[0] - e[0] || lo[0] > c[0] + e[0],
            _ => hi[0] < c[0] - e[0] || lo[0] > c[0] + e[0] || hi[1] < c[1] - e[1] || lo[1] > c[1] + e[1],
        };
        if out {
            return Some(false);
        }
        if let Shape::Star { center, coeffs } = &self.shape {
            let m = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
            let half_diag = 0.5 * (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
            let (u, v) = (m[0] - center[0], m[1] - center[1]);
            let gap = star_radius(coeffs, v.atan2(u)).0 - u.hypot(v);
            // |ρ'|/ρ bounds how far the radial gap can overstate the distance.
            let slope = self.star_slope_bound(coeffs);
            if gap.abs() > 2.0 * (1.0 + slope) * half_diag {
                return Some(gap > 0.0);
            }
        }
        None
    }

    fn star_slope_bound(&self, coeffs: &[f64]) -> f64 {
        let (mut rmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..512 {
            let (r, d, _) = star_radius(coeffs, 2.0 * PI * i as f64 / 512.0);
            rmin = rmin.min(r);
            dmax = dmax.max(d.abs());
        }
        dmax / rmin
    }
}

/// Antiderivative of `√(1 - x²)` on `[-1, 1]`.
fn circle_primitive(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    0.5 * (x * (1.0 - x * x).sqrt() + x.asin())
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> (f64, f64) {
    (a0.max(b0), a1.min(b1))
}

/// `∫_{x0}^{x1} clamp(y, -w(x), w(x)) dx` with `w = √(1 - x²)` (zero outside [-1, 1]).
fn clamped_column_integral(x0: f64, x1: f64, y: f64) -> f64 {
    let (x0, x1) = overlap(x0, x1, -1.0, 1.0);
    if x1 <= x0 {
        return 0.0;
    }
    let arc = |a: f64, b: f64| if b > a { circle_primitive(b) - circle_primitive(a) } else { 0.0 };
    if y.abs() >= 1.0 {
        return y.signum() * arc(x0, x1);
    }
    let xc = (1.0 - y * y).sqrt();
    let (m0, m1) = overlap(x0, x1, -xc, xc);
    let middle = (m1 - m0).max(0.0) * y;
    let (l0, l1) = overlap(x0, x1, -1.0, -xc);
    let (r0, r1) = overlap(x0, x1, xc, 1.0);
    middle + y.signum() * (arc(l0, l1) + arc(r0, r1))
}

/// Area of the unit disk inside `[x0, x1] × [y0, y1]`.
pub fn unit_disk_rect_area(x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    (clamped_column_integral(x0, x1, y1) - clamped_column_integral(x0, x1, y0)).max(0.0)
}

/// Area of `{x ∈ rect : φ0 + g·(x - c) ≥ 0}` by Sutherland–Hodgman clipping.
fn half_plane_rect_area(lo: Point, hi: Point, c: Point, phi0: f64, g: Point) -> f64 {
    let poly = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    let val = |p: &Point| phi0 + g[0] * (p[0] - c[0]) + g[1] * (p[1] - c[1]);
    let mut out: Vec<Point> = Vec::with_capacity(6);
    for i in 0..4 {
        let p = poly[i];
        let q = poly[(i + 1) % 4];
        let (vp, vq) = (val(&p), val(&q));
        if vp >= 0.0 {
            out.push(p);
        }
        if (vp >= 0.0) != (vq >= 0.0) {
            let t = vp / (vp - vq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    let n = out.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let (p, q) = (out[i], out[(i + 1) % n]);
        twice += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * twice.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ellipse() -> DomainGeometry {
        DomainGeometry::new(
            Shape::Ellipse { center: [0.0; 2], a: 2.0, b: 1.0 },
            AmbientSpace::torus(vec![32.0, 32.0]).unwrap(),
            DEFAULT_BOUNDARY_N,
        )
        .unwrap()
    }

    fn star() -> DomainGeometry {
        DomainGeometry::new(
            Shape::Star { center: [0.0; 2], coeffs: vec![1.0, 0.0, 0.0, 0.1, 0.05, 0.0, 0.0] },
            AmbientSpace::torus(vec![16.0, 16.0]).unwrap(),
            DEFAULT_BOUNDARY_N,
        )
        .unwrap()
    }

    #[test]
    fn signed_distance_examples() {
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert_eq!(d.signed_distance([0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(d.signed_distance([2.0, 0.0]).unwrap(), -1.0);
        let i = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(i.signed_distance([0.25, 0.0]).unwrap(), 0.25);
        let e = ellipse();
        assert!((e.signed_distance([3.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((e.signed_distance([0.0, 0.5]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn periodic_wrap_uses_nearest_copy() {
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert!((d.signed_distance([15.5, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_measures() {
        let d = DomainGeometry::disk(2.0, 32.0).unwrap();
        assert_relative_eq!(d.perimeter(), 4.0 * PI, max_relative = 1e-13);
        let i = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(i.perimeter(), 2.0);
        // arc-length quadrature oracle for the (2, 1) ellipse
        assert_relative_eq!(ellipse().perimeter(), 9.688_448_220_547_676, max_relative = 1e-10);
    }

    #[test]
    fn mean_curvature_values() {
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        for n in d.boundary_nodes().iter().step_by(37) {
            assert_relative_eq!(d.mean_curvature_at(n), -0.5, max_relative = 1e-12);
            assert!((d.mean_curvature_fd(n.position).unwrap() + 0.5).abs() < 1e-4);
        }
        let e = ellipse();
        let node = &e.boundary_nodes()[0];
        assert!((node.position[0] - 2.0).abs() < 1e-15);
        // κ = ab / (a² sin² + b² cos²)^{3/2} = 2 at θ = 0
        assert_relative_eq!(e.mean_curvature_at(node), -1.0, max_relative = 1e-12);
        assert!((e.mean_curvature_fd([2.0, 0.0]).unwrap() + 1.0).abs() < 1e-3);
        let i = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(i.boundary_nodes()[1].mean_curvature, 0.0);
    }

    #[test]
    fn curvature_field_matches_fd_laplacian_off_boundary() {
        let s = star();
        let node = s.boundary_nodes()[50];
        let x = [node.position[0] - 0.03 * node.normal[0], node.position[1] - 0.03 * node.normal[1]];
        let fd = s.mean_curvature_fd(x).unwrap();
        assert!((s.mean_curvature_field(x).unwrap() - fd).abs() < 1e-3, "{fd}");
    }

    #[test]
    fn normals_are_unit_and_minus_gradient() {
        for g in [DomainGeometry::disk(1.0, 16.0).unwrap(), ellipse(), star()] {
            for n in g.boundary_nodes() {
                assert!((n.normal[0].hypot(n.normal[1]) - 1.0).abs() < 1e-12);
                let grad = g.gradient(n.position).unwrap();
                assert!((grad[0] + n.normal[0]).abs() < 1e-8 && (grad[1] + n.normal[1]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tube_volumes() {
        let i = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert_eq!(i.tube_volume(0.1).unwrap(), 0.2);
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        assert_relative_eq!(d.tube_volume(0.1).unwrap(), 0.21 * PI, max_relative = 1e-14);
        assert!(matches!(d.tube_volume(0.6), Err(Error::OutOfTube { .. })));
        let t = d.tube_integral(|_| 1.0, 0.1).unwrap();
        assert_relative_eq!(t, 0.21 * PI, max_relative = 1e-12);
        let e = ellipse();
        let s = 0.05;
        assert_relative_eq!(e.tube_volume(s).unwrap(), e.tube_integral(|_| 1.0, s).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn normal_derivative_examples() {
        let d = DomainGeometry::disk(1.0, 16.0).unwrap();
        let n = d.boundary_nodes()[17];
        assert_eq!(d.normal_derivative(|_| 1.0, &n, 1).unwrap(), 0.0);
        let r2 = |x: Point| x[0] * x[0] + x[1] * x[1];
        assert!((d.normal_derivative(r2, &n, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((d.normal_derivative(r2, &n, 2).unwrap() - 2.0).abs() < 1e-10);
        let i = DomainGeometry::interval(0.0, 1.0).unwrap();
        assert!((i.normal_derivative(|x| x[0], &i.boundary_nodes()[1], 1).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn disk_rectangle_area() {
        assert_relative_eq!(unit_disk_rect_area(-2.0, 2.0, -2.0, 2.0), PI, max_relative = 1e-15);
        assert_relative_eq!(unit_disk_rect_area(0.0, 2.0, 0.0, 2.0), PI / 4.0, max_relative = 1e-15);
        assert_relative_eq!(unit_disk_rect_area(-0.5, 0.5, -0.5, 0.5), 1.0, max_relative = 1e-15);
        // lens cut by x ≥ 0.5
        let seg = (1.0f64 / 3.0) * PI - 0.75f64.sqrt() / 2.0;
        assert_relative_eq!(unit_disk_rect_area(0.5, 3.0, -3.0, 3.0), seg, max_relative = 1e-13);
    }

    #[test]
    fn cell_measures_tile_the_area() {
        for g in [ellipse(), star()] {
            let n = 96;
            let h = 6.0 / n as f64;
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let lo = [-3.0 + i as f64 * h, -3.0 + j as f64 * h];
                    let hi = [lo[0] + h, lo[1] + h];
                    total += match g.far_cell_state(lo, hi) {
                        Some(true) => h * h,
                        Some(false) => 0.0,
                        None => g.cell_measure(lo, hi),
                    };
                }
            }
            assert_relative_eq!(total, g.volume(), max_relative = 2e-5);
        }
    }

    #[test]
    fn eikonal_on_tube_samples() {
        for g in [DomainGeometry::disk(1.0, 16.0).unwrap(), ellipse(), star()] {
            let s = g.safe_tube_radius();
            let nodes = g.boundary_nodes();
            let h = 1e-4;
            for k in 0..200 {
                let n = nodes[(k * 7) % nodes.len()];
                let sig = s * (2.0 * (k as f64 / 199.0) - 1.0) * 0.95;
                let x = [n.position[0] + sig * n.normal[0], n.position[1] + sig * n.normal[1]];
                let d = |dx: f64, dy: f64| g.signed_distance([x[0] + dx, x[1] + dy]).unwrap();
                let gx = (-d(2.0 * h, 0.0) + 8.0 * d(h, 0.0) - 8.0 * d(-h, 0.0) + d(-2.0 * h, 0.0)) / (12.0 * h);
                let gy = (-d(0.0, 2.0 * h) + 8.0 * d(0.0, h) - 8.0 * d(0.0, -h) + d(0.0, -2.0 * h)) / (12.0 * h);
                assert!((gx.hypot(gy) - 1.0).abs() < 1e-6, "{} at {x:?}", g.id());
            }
        }
    }

    #[test]
    fn config_errors() {
        assert!(DomainGeometry::interval(1.0, 0.0).is_err());
        assert!(DomainGeometry::disk(1.0, 1.5).is_err());
        assert!(AmbientSpace::torus(vec![-1.0]).is_err());
        assert!(DomainGeometry::new(Shape::Interval { a: 0.0, b: 1.0 }, AmbientSpace::torus(vec![4.0, 4.0]).unwrap(), 2).is_err());
        let tiny = DomainGeometry::disk(1e-5, 1.0).unwrap();
        assert!(matches!(tiny.mean_curvature_fd([0.0, 1e-5]), Err(Error::Config(_))));
    }
}
