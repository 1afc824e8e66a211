use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nets::{GaussianPrediction, Predictor};

/// Slack for boundary membership tests.
const EDGE_TOL: f64 = 1e-12;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Quadrants in the fixed order used everywhere: rows are wealth
/// (rich = x >= 0, poor), columns are health (healthy = y >= 0, unhealthy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    RichHealthy,
    RichUnhealthy,
    PoorHealthy,
    PoorUnhealthy,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Self::RichHealthy,
        Self::RichUnhealthy,
        Self::PoorHealthy,
        Self::PoorUnhealthy,
    ];

    /// Boundary points go to the nonnegative side.
    pub fn of(x: f64, y: f64) -> Self {
        match (x >= 0.0, y >= 0.0) {
            (true, true) => Self::RichHealthy,
            (true, false) => Self::RichUnhealthy,
            (false, true) => Self::PoorHealthy,
            (false, false) => Self::PoorUnhealthy,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Row of the 2x2 wealth/health table (0 = rich).
    pub fn wealth_row(self) -> usize {
        self.index() / 2
    }

    /// Column of the 2x2 wealth/health table (0 = healthy).
    pub fn health_col(self) -> usize {
        self.index() % 2
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::RichHealthy => "++",
            Self::RichUnhealthy => "+-",
            Self::PoorHealthy => "-+",
            Self::PoorUnhealthy => "--",
        }
    }

    /// Closed half-planes `(nx, ny, offset)` with `nx*x + ny*y >= offset`.
    fn half_planes(self) -> [(f64, f64, f64); 2] {
        let sx = if self.wealth_row() == 0 { 1.0 } else { -1.0 };
        let sy = if self.health_col() == 0 { 1.0 } else { -1.0 };
        [(sx, 0.0, 0.0), (0.0, sy, 0.0)]
    }
}

/// Convex, point-symmetric hexagon inside `[-1, 1]^2`, vertices counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexagonSpec {
    pub vertices: [[f64; 2]; 6],
}

impl Default for HexagonSpec {
    /// The square `[-1, 1]^2` with the corners (1, -1) and (-1, 1) cut by
    /// `y = x - 1` and `y = x + 1`.
    fn default() -> Self {
        Self {
            vertices: [[-1.0, 0.0], [-1.0, -1.0], [0.0, -1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace area of a simple polygon (positive when counterclockwise).
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Sutherland-Hodgman clip of a convex polygon against `nx*x + ny*y >= offset`.
fn clip(poly: &[[f64; 2]], (nx, ny, offset): (f64, f64, f64)) -> Vec<[f64; 2]> {
    let side = |p: [f64; 2]| nx * p[0] + ny * p[1] - offset;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a), side(b));
        if sa >= 0.0 {
            out.push(a);
        }
        if (sa >= 0.0) != (sb >= 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

impl HexagonSpec {
    pub fn new(vertices: [[f64; 2]; 6]) -> Result<Self> {
        let spec = Self { vertices };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vertices;
        if v.iter().flatten().any(|c| !c.is_finite() || c.abs() > 1.0) {
            return Err(Error::Geometry("vertices must lie in [-1, 1]^2".into()));
        }
        for i in 0..6 {
            if cross(v[i], v[(i + 1) % 6], v[(i + 2) % 6]) <= EDGE_TOL {
                return Err(Error::Geometry(format!(
                    "vertices must be strictly convex and counterclockwise (fails at vertex {})",
                    (i + 1) % 6
                )));
            }
        }
        for i in 0..3 {
            let (a, b) = (v[i], v[i + 3]);
            if (a[0] + b[0]).abs() > EDGE_TOL || (a[1] + b[1]).abs() > EDGE_TOL {
                return Err(Error::Geometry(format!(
                    "vertex {i} and vertex {} are not point reflections",
                    i + 3
                )));
            }
        }
        Ok(())
    }

    /// Membership in the closed hexagon.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        (0..6).all(|i| cross(v[i], v[(i + 1) % 6], [x, y]) >= -EDGE_TOL)
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// The hexagon intersected with one quadrant.
    pub fn quadrant_polygon(&self, q: Quadrant) -> Vec<[f64; 2]> {
        q.half_planes()
            .into_iter()
            .fold(self.vertices.to_vec(), |poly, plane| clip(&poly, plane))
    }

    pub fn quadrant_areas(&self) -> [f64; 4] {
        Quadrant::ALL.map(|q| polygon_area(&self.quadrant_polygon(q)))
    }

    /// Axis-aligned bounding box `(xmin, xmax, ymin, ymax)` of a polygon.
    pub(crate) fn bounding_box(poly: &[[f64; 2]]) -> (f64, f64, f64, f64) {
        poly.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(x0, x1, y0, y1), p| (x0.min(p[0]), x1.max(p[0]), y0.min(p[1]), y1.max(p[1])),
        )
    }

    pub fn x_range(&self) -> (f64, f64) {
        let (x0, x1, _, _) = Self::bounding_box(&self.vertices);
        (x0, x1)
    }

    /// The y-interval `[a, b]` of the hexagon at abscissa `x`.
    pub fn conditional_slice(&self, x: f64) -> Result<(f64, f64)> {
        let (x0, x1) = self.x_range();
        if !(x0 - EDGE_TOL..=x1 + EDGE_TOL).contains(&x) {
            return Err(Error::Geometry(format!("x = {x} lies outside [{x0}, {x1}]")));
        }
        let x = x.clamp(x0, x1);
        let v = &self.vertices;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..6 {
            let (a, b) = (v[i], v[(i + 1) % 6]);
            let (ex0, ex1) = (a[0].min(b[0]), a[0].max(b[0]));
            if x < ex0 || x > ex1 {
                continue;
            }
            let ys = if (b[0] - a[0]).abs() <= EDGE_TOL {
                [a[1], b[1]]
            } else {
                let y = a[1] + (x - a[0]) / (b[0] - a[0]) * (b[1] - a[1]);
                [y, y]
            };
            for y in ys {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
        Ok((lo, hi))
    }

    /// Per-x optimal Gaussian for a uniform conditional on the slice.
    pub fn optimal_gaussian(&self, x: f64) -> Result<GaussianPrediction> {
        let (a, b) = self.conditional_slice(x)?;
        Ok(GaussianPrediction::new((a + b) / 2.0, (b - a) / (2.0 * SQRT_3)))
    }

    /// Target NLL of the optimal predictor, by composite Simpson quadrature of
    /// `(L(x) / area) (1/2 + ln(sqrt(2 pi) L(x) / (2 sqrt 3)))`, with `L` the
    /// slice length. `L` is piecewise linear, so panels split at vertex abscissae.
    pub fn analytic_target_nll(&self) -> f64 {
        let area = self.area();
        let ln_norm = (2.0 * std::f64::consts::PI).sqrt().ln() - (2.0 * SQRT_3).ln();
        let integrand = |x: f64| {
            let (a, b) = self.conditional_slice(x).expect("x within range");
            let len = b - a;
            if len <= 0.0 {
                return 0.0;
            }
            len / area * (0.5 + ln_norm + len.ln())
        };
        self.integrate_piecewise(integrand)
    }

    /// Integral over the x-range, split at the vertex abscissae.
    pub(crate) fn integrate_piecewise(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut knots: Vec<f64> = self.vertices.iter().map(|v| v[0]).collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() <= EDGE_TOL);
        knots.windows(2).map(|w| simpson(&f, w[0], w[1], 2000)).sum()
    }

    /// The optimal predictor as a [`Predictor`].
    pub fn optimal_predictor(&self) -> OptimalPredictor<'_> {
        OptimalPredictor { spec: self }
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Ground-truth optimal Gaussian; clamps inputs to the hexagon's x-range.
#[derive(Debug, Clone, Copy)]
pub struct OptimalPredictor<'a> {
    spec: &'a HexagonSpec,
}

impl Predictor for OptimalPredictor<'_> {
    fn predict(&self, x: f64) -> GaussianPrediction {
        let (x0, x1) = self.spec.x_range();
        self.spec
            .optimal_gaussian(x.clamp(x0, x1))
            .expect("clamped input is in range")
    }
}
