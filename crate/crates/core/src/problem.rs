//! Bellman data (a, b, L) over a finite control set, the builtin problem
//! gallery, and the coercivity/truncation diagnostic.
//!
//! Diffusion matrices are restricted to diagonal form a(x,alpha) = diag(a_1..a_d)
//! so the 3-point second difference yields a monotone scheme. Coefficients are
//! tabulated (point x control) at the module boundary, which keeps LP
//! construction and serialization deterministic.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// Finite set of control points, with a mask marking the candidate compact
/// core K0 used by the truncation diagnostic.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
    k0_mask: Vec<bool>,
}

impl ControlSet {
    pub fn new(points: Vec<Vec<f64>>, k0_mask: Vec<bool>) -> Result<Self> {
        Self::with_labels(points, k0_mask, None)
    }

    pub fn with_labels(
        points: Vec<Vec<f64>>,
        k0_mask: Vec<bool>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("control set must be nonempty".into()));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidArgument(
                "control points must share one dimension".into(),
            ));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("control points must be finite".into()));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate control points at indices {i} and {j}"
                    )));
                }
            }
        }
        if k0_mask.len() != points.len() {
            return Err(Error::ShapeMismatch(format!(
                "k0 mask has {} entries for {} controls",
                k0_mask.len(),
                points.len()
            )));
        }
        if let Some(ref ls) = labels {
            if ls.len() != points.len() {
                return Err(Error::ShapeMismatch("labels length mismatch".into()));
            }
        }
        Ok(ControlSet { points, labels, k0_mask })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, idx: usize) -> &[f64] {
        &self.points[idx]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn in_k0(&self, idx: usize) -> bool {
        self.k0_mask[idx]
    }

    pub fn k0_mask(&self) -> &[bool] {
        &self.k0_mask
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Centered lattice on [-radius, radius]^dim with `per_axis` points per
    /// axis. `per_axis` must be 1 or odd >= 3 so that 0 and the extreme
    /// points are representable (resting policies need the 0 control).
    pub fn centered_lattice(dim: usize, radius: f64, per_axis: usize) -> Result<Vec<Vec<f64>>> {
        if per_axis == 0 || (per_axis > 1 && per_axis % 2 == 0) {
            return Err(Error::InvalidArgument(format!(
                "controls per axis must be 1 or odd >= 3, got {per_axis}"
            )));
        }
        if !(radius > 0.0) && per_axis > 1 {
            return Err(Error::InvalidArgument("control radius must be > 0".into()));
        }
        let axis: Vec<f64> = if per_axis == 1 {
            vec![0.0]
        } else {
            (0..per_axis)
                .map(|j| -radius + 2.0 * radius * j as f64 / (per_axis - 1) as f64)
                .collect()
        };
        let mut out = Vec::with_capacity(axis.len().pow(dim as u32));
        if dim == 1 {
            for &q in &axis {
                out.push(vec![q]);
            }
        } else {
            for &q0 in &axis {
                for &q1 in &axis {
                    out.push(vec![q0, q1]);
                }
            }
        }
        Ok(out)
    }
}

/// Coefficient triple (a, b, L) of a Bellman operator over a finite control
/// set. Tables are indexed `[point, control, axis]` (a, b) and
/// `[point, control]` (L); a >= 0 everywhere (degenerate ellipticity).
#[derive(Clone, Debug)]
pub struct EllipticProblem {
    grid: TorusGrid,
    controls: ControlSet,
    a: Array3<f64>,
    b: Array3<f64>,
    l: Array2<f64>,
}

impl EllipticProblem {
    pub fn new(
        grid: TorusGrid,
        controls: ControlSet,
        a: Array3<f64>,
        b: Array3<f64>,
        l: Array2<f64>,
    ) -> Result<Self> {
        let n = grid.num_points();
        let m = controls.len();
        let d = grid.dim();
        if a.dim() != (n, m, d) || b.dim() != (n, m, d) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient tables must be {n}x{m}x{d}, got a: {:?}, b: {:?}",
                a.dim(),
                b.dim()
            )));
        }
        if l.dim() != (n, m) {
            return Err(Error::ShapeMismatch(format!(
                "cost table must be {n}x{m}, got {:?}",
                l.dim()
            )));
        }
        if a.iter().any(|v| *v < 0.0) {
            return Err(Error::SpecParse("ellipticity violated: diffusion entry < 0".into()));
        }
        for (name, t) in [("a", &a), ("b", &b)] {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::SpecParse(format!("table {name} has a non-finite entry")));
            }
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::SpecParse("table L has a non-finite entry".into()));
        }
        Ok(EllipticProblem { grid, controls, a, b, l })
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn controls(&self) -> &ControlSet {
        &self.controls
    }

    pub fn num_points(&self) -> usize {
        self.grid.num_points()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn diffusion(&self, point: usize, control: usize, axis: usize) -> f64 {
        self.a[[point, control, axis]]
    }

    pub fn drift(&self, point: usize, control: usize, axis: usize) -> f64 {
        self.b[[point, control, axis]]
    }

    pub fn cost(&self, point: usize, control: usize) -> f64 {
        self.l[[point, control]]
    }

    pub fn cost_table(&self) -> &Array2<f64> {
        &self.l
    }

    /// Same dynamics with running cost L + kappa.
    pub fn with_shifted_cost(&self, kappa: f64) -> EllipticProblem {
        let mut out = self.clone();
        out.l.mapv_inplace(|v| v + kappa);
        out
    }

    /// M0 = max over points of |min over controls of L|; the discount-times-
    /// value bound lambda||v^lambda|| <= M0.
    pub fn m0_bound(&self) -> f64 {
        (0..self.num_points())
            .map(|x| {
                (0..self.num_controls())
                    .map(|m| self.l[[x, m]])
                    .fold(f64::INFINITY, f64::min)
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// ((m-1)/m) |q|^(m/(m-1)): the convex conjugate of (1/m)|p|^m.
pub fn legendre_power(m: f64, q: &[f64]) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::InvalidArgument(format!("legendre exponent must be > 1, got {m}")));
    }
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((m - 1.0) / m * norm.powf(m / (m - 1.0)))
}

/// Result of the condition-(L) truncation diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct ConditionLReport {
    /// L0 = max over points of (min over K0-controls of L).
    pub l0: f64,
    /// min of L over (points x controls outside K0); +inf when K0 is everything.
    pub outside_min: f64,
    pub margin: f64,
    pub ok: bool,
}

/// Checks that the running cost outside the compact core K0 dominates
/// L0 = max_x min_{K0} L, certifying that control-set truncation to K0
/// keeps large controls suboptimal. Vacuously true when K0 is everything.
pub fn check_condition_l(problem: &EllipticProblem) -> Result<ConditionLReport> {
    let controls = problem.controls();
    if !controls.k0_mask().iter().any(|&b| b) {
        return Err(Error::InvalidArgument("K0 mask marks no controls".into()));
    }
    let mut l0 = f64::NEG_INFINITY;
    for x in 0..problem.num_points() {
        let mut inner = f64::INFINITY;
        for m in 0..problem.num_controls() {
            if controls.in_k0(m) {
                inner = inner.min(problem.cost(x, m));
            }
        }
        l0 = l0.max(inner);
    }
    let mut outside_min = f64::INFINITY;
    for x in 0..problem.num_points() {
        for m in 0..problem.num_controls() {
            if !controls.in_k0(m) {
                outside_min = outside_min.min(problem.cost(x, m));
            }
        }
    }
    let margin = outside_min - l0;
    Ok(ConditionLReport { l0, outside_min, margin, ok: outside_min >= l0 })
}

// ---------------------------------------------------------------------------
// Builtin gallery
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GalleryId {
    ConstantCost,
    EikonalF,
    LinearFirstOrder,
    ViscousSuperlinear,
    UniformlyElliptic,
    Superquadratic,
}

impl GalleryId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "constant_cost" => Ok(GalleryId::ConstantCost),
            "eikonal_f" => Ok(GalleryId::EikonalF),
            "linear_first_order" => Ok(GalleryId::LinearFirstOrder),
            "viscous_superlinear" => Ok(GalleryId::ViscousSuperlinear),
            "uniformly_elliptic" => Ok(GalleryId::UniformlyElliptic),
            "superquadratic" => Ok(GalleryId::Superquadratic),
            other => Err(Error::InvalidArgument(format!("unknown gallery id `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            GalleryId::ConstantCost => "constant_cost",
            GalleryId::EikonalF => "eikonal_f",
            GalleryId::LinearFirstOrder => "linear_first_order",
            GalleryId::ViscousSuperlinear => "viscous_superlinear",
            GalleryId::UniformlyElliptic => "uniformly_elliptic",
            GalleryId::Superquadratic => "superquadratic",
        }
    }
}

struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    known: Vec<&'static str>,
}

impl<'a> Params<'a> {
    fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Params { map, known: Vec::new() }
    }

    fn get(&mut self, key: &'static str, default: f64) -> f64 {
        self.known.push(key);
        self.map.get(key).copied().unwrap_or(default)
    }

    fn get_usize(&mut self, key: &'static str, default: usize) -> Result<usize> {
        self.known.push(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(&v) => {
                if v.fract() != 0.0 || v < 0.0 || v > 1e9 {
                    return Err(Error::InvalidArgument(format!(
                        "parameter `{key}` must be a small nonnegative integer, got {v}"
                    )));
                }
                Ok(v as usize)
            }
        }
    }

    fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.known.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!("unknown gallery parameter `{key}`")));
            }
        }
        Ok(())
    }
}

/// Default running-cost landscape: amp * (1 - prod_i cos(2 pi x_i)), which has
/// minimum 0 at the origin and oscillation 2*amp.
fn cost_landscape(x: &[f64], amp: f64) -> f64 {
    let prod: f64 = x.iter().map(|xi| (2.0 * std::f64::consts::PI * xi).cos()).product();
    amp * (1.0 - prod)
}

fn euclid(q: &[f64]) -> f64 {
    q.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Builds one of the gallery problems on the given grid. Parameters outside
/// their documented ranges are rejected.
pub fn build_gallery(
    id: GalleryId,
    params: &BTreeMap<String, f64>,
    grid: TorusGrid,
) -> Result<EllipticProblem> {
    let n = grid.num_points();
    let d = grid.dim();
    let mut p = Params::new(params);
    match id {
        GalleryId::ConstantCost => {
            let ell0 = p.get("ell0", 1.0);
            p.finish()?;
            let controls = ControlSet::new(vec![vec![0.0; d]], vec![true])?;
            let a = Array3::zeros((n, 1, d));
            let b = Array3::zeros((n, 1, d));
            let l = Array2::from_elem((n, 1), ell0);
            EllipticProblem::new(grid, controls, a, b, l)
        }
        GalleryId::EikonalF => {
            let amp = p.get("amp", 1.0);
            let k = p.get_usize("controls_per_axis", 3)?;
            p.finish()?;
            let pts = ControlSet::centered_lattice(d, 1.0, k)?;
            let m = pts.len();
            let controls = ControlSet::new(pts.clone(), vec![true; m])?;
            let mut a = Array3::zeros((n, m, d));
            let mut b = Array3::zeros((n, m, d));
            let mut l = Array2::zeros((n, m));
            for x in 0..n {
                let xp = grid.point(x);
                let f = cost_landscape(&xp[..d], amp);
                for (mi, q) in pts.iter().enumerate() {
                    for i in 0..d {
                        b[[x, mi, i]] = q[i];
                        a[[x, mi, i]] = 0.0;
                    }
                    l[[x, mi]] = f;
                }
            }
            EllipticProblem::new(grid, controls, a, b, l)
        }
        GalleryId::LinearFirstOrder => {
            let amp = p.get("amp", 1.0);
            let drag = p.get("drag", 0.1);
            let k = p.get_usize("controls_per_axis", 3)?;
            p.finish()?;
            if drag < 0.0 {
                return Err(Error::InvalidArgument("drag must be >= 0".into()));
            }
            let pts = ControlSet::centered_lattice(d, 1.0, k)?;
            let m = pts.len();
            let controls = ControlSet::new(pts.clone(), vec![true; m])?;
            let mut a = Array3::zeros((n, m, d));
            let mut b = Array3::zeros((n, m, d));
            let mut l = Array2::zeros((n, m));
            for x in 0..n {
                let xp = grid.point(x);
                let f = cost_landscape(&xp[..d], amp);
                // positive speed field c(x)
                let speed = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * xp[0]).sin();
                for (mi, q) in pts.iter().enumerate() {
                    for i in 0..d {
                        b[[x, mi, i]] = speed * q[i];
                        a[[x, mi, i]] = 0.0;
                    }
                    l[[x, mi]] = f + drag * q.iter().map(|v| v * v).sum::<f64>();
                }
            }
            EllipticProblem::new(grid, controls, a, b, l)
        }
        GalleryId::ViscousSuperlinear => {
            let m_exp = p.get("m", 2.0);
            if !(m_exp > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "viscous_superlinear needs m > 1, got {m_exp}"
                )));
            }
            let amp = p.get("amp", 1.0);
            let eps = p.get("eps", 0.25);
            if eps < 0.0 {
                return Err(Error::InvalidArgument("eps must be >= 0".into()));
            }
            let osc = 2.0 * amp;
            let radius = p.get("radius", 2.0 * (1.0 + osc).powf(1.0 / (m_exp - 1.0)));
            let k = p.get_usize("controls_per_axis", 25)?;
            let k0_radius = p.get(
                "k0_radius",
                (osc * m_exp / (m_exp - 1.0)).powf((m_exp - 1.0) / m_exp),
            );
            p.finish()?;
            let pts = ControlSet::centered_lattice(d, radius, k)?;
            let mask: Vec<bool> = pts.iter().map(|q| euclid(q) <= k0_radius + 1e-12).collect();
            let m = pts.len();
            let controls = ControlSet::new(pts.clone(), mask)?;
            let mut a = Array3::zeros((n, m, d));
            let mut b = Array3::zeros((n, m, d));
            let mut l = Array2::zeros((n, m));
            for x in 0..n {
                let xp = grid.point(x);
                let f = cost_landscape(&xp[..d], amp);
                for (mi, q) in pts.iter().enumerate() {
                    let lq = legendre_power(m_exp, q)?;
                    for i in 0..d {
                        b[[x, mi, i]] = q[i];
                        a[[x, mi, i]] = eps;
                    }
                    l[[x, mi]] = f + lq;
                }
            }
            EllipticProblem::new(grid, controls, a, b, l)
        }
        GalleryId::UniformlyElliptic => {
            let theta = p.get("theta", 2.0);
            if !(theta >= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "uniformly_elliptic needs theta >= 1, got {theta}"
                )));
            }
            let amp = p.get("amp", 1.0);
            let k = p.get_usize("controls_per_axis", 3)?;
            p.finish()?;
            let pts = ControlSet::centered_lattice(d, 1.0, k)?;
            let m = pts.len();
            let controls = ControlSet::new(pts.clone(), vec![true; m])?;
            let mid = 0.5 * (theta + 1.0 / theta);
            let rad = 0.5 * (theta - 1.0 / theta);
            let mut a = Array3::zeros((n, m, d));
            let mut b = Array3::zeros((n, m, d));
            let mut l = Array2::zeros((n, m));
            for x in 0..n {
                let xp = grid.point(x);
                let f = cost_landscape(&xp[..d], amp);
                for (mi, q) in pts.iter().enumerate() {
                    for i in 0..d {
                        // diffusion stays in [1/theta, theta]
                        a[[x, mi, i]] =
                            mid + rad * q[i] * (2.0 * std::f64::consts::PI * xp[i]).cos();
                        b[[x, mi, i]] = q[i];
                    }
                    l[[x, mi]] = f + 0.5 * q.iter().map(|v| v * v).sum::<f64>();
                }
            }
            EllipticProblem::new(grid, controls, a, b, l)
        }
        GalleryId::Superquadratic => {
            let m_exp = p.get("m", 3.0);
            if !(m_exp > 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "superquadratic needs m > 2, got {m_exp}"
                )));
            }
            let amp = p.get("amp", 1.0);
            let eps = p.get("eps", 0.1);
            if eps < 0.0 {
                return Err(Error::InvalidArgument("eps must be >= 0".into()));
            }
            let osc = 2.0 * amp;
            let radius = p.get("radius", 2.0 * (1.0 + osc).powf(1.0 / (m_exp - 1.0)));
            let k = p.get_usize("controls_per_axis", 15)?;
            let k0_radius = p.get(
                "k0_radius",
                (osc * m_exp / (m_exp - 1.0)).powf((m_exp - 1.0) / m_exp),
            );
            p.finish()?;
            let pts = ControlSet::centered_lattice(d, radius, k)?;
            let mask: Vec<bool> = pts.iter().map(|q| euclid(q) <= k0_radius + 1e-12).collect();
            let m = pts.len();
            let controls = ControlSet::new(pts.clone(), mask)?;
            let mut a = Array3::zeros((n, m, d));
            let mut b = Array3::zeros((n, m, d));
            let mut l = Array2::zeros((n, m));
            for x in 0..n {
                let xp = grid.point(x);
                let f = cost_landscape(&xp[..d], amp);
                for (mi, q) in pts.iter().enumerate() {
                    let nq = euclid(q);
                    let lq = legendre_power(m_exp, q)?;
                    for i in 0..d {
                        // control-dependent degenerate diffusion
                        a[[x, mi, i]] = eps / (1.0 + nq * nq);
                        b[[x, mi, i]] = q[i];
                    }
                    l[[x, mi]] = f + lq;
                }
            }
            EllipticProblem::new(grid, controls, a, b, l)
        }
    }
}

// ---------------------------------------------------------------------------
// Problem spec document (JSON)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    grid: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    controls: Option<ControlsSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<CoeffSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gallery: Option<GallerySpec>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    dim: usize,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct ControlsSpec {
    points: Vec<Vec<f64>>,
    k0: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct CoeffSpec {
    /// Row-major [point][control][axis].
    a: Vec<f64>,
    /// Row-major [point][control][axis].
    b: Vec<f64>,
    /// Row-major [point][control].
    #[serde(rename = "L")]
    l: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GallerySpec {
    id: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

/// Parses a problem document: either `{grid, gallery}` or
/// `{grid, controls, coefficients}` with arrays in row-major point order,
/// then control order, then axis order. Round-trips through
/// [`to_spec_string`].
pub fn parse_spec(text: &str) -> Result<EllipticProblem> {
    let doc: SpecDoc =
        serde_json::from_str(text).map_err(|e| Error::SpecParse(e.to_string()))?;
    let grid = TorusGrid::new(doc.grid.dim, doc.grid.n)?;
    match (doc.gallery, doc.coefficients) {
        (Some(g), None) => {
            let id = GalleryId::parse(&g.id)?;
            build_gallery(id, &g.params, grid)
        }
        (None, Some(coeffs)) => {
            let controls_spec = doc.controls.ok_or_else(|| {
                Error::SpecParse("field `controls` is required with `coefficients`".into())
            })?;
            let controls = ControlSet::with_labels(
                controls_spec.points,
                controls_spec.k0,
                controls_spec.labels,
            )?;
            let n = grid.num_points();
            let m = controls.len();
            let d = grid.dim();
            if coeffs.a.len() != n * m * d || coeffs.b.len() != n * m * d {
                return Err(Error::SpecParse(format!(
                    "field `coefficients.a`/`b` must have {} entries (N*M*dim)",
                    n * m * d
                )));
            }
            if coeffs.l.len() != n * m {
                return Err(Error::SpecParse(format!(
                    "field `coefficients.L` must have {} entries (N*M)",
                    n * m
                )));
            }
            let a = Array3::from_shape_vec((n, m, d), coeffs.a)
                .map_err(|e| Error::SpecParse(e.to_string()))?;
            let b = Array3::from_shape_vec((n, m, d), coeffs.b)
                .map_err(|e| Error::SpecParse(e.to_string()))?;
            let l = Array2::from_shape_vec((n, m), coeffs.l)
                .map_err(|e| Error::SpecParse(e.to_string()))?;
            EllipticProblem::new(grid, controls, a, b, l)
        }
        (Some(_), Some(_)) => Err(Error::SpecParse(
            "fields `gallery` and `coefficients` are mutually exclusive".into(),
        )),
        (None, None) => Err(Error::SpecParse(
            "one of `gallery` or `coefficients` is required".into(),
        )),
    }
}

/// Serializes a problem in the explicit-coefficients form.
pub fn to_spec_string(problem: &EllipticProblem) -> String {
    let doc = SpecDoc {
        grid: GridSpec { dim: problem.grid().dim(), n: problem.grid().n_per_axis() },
        controls: Some(ControlsSpec {
            points: problem.controls().points().to_vec(),
            k0: problem.controls().k0_mask().to_vec(),
            labels: problem.controls().labels().map(|l| l.to_vec()),
        }),
        coefficients: Some(CoeffSpec {
            a: problem.a.iter().copied().collect(),
            b: problem.b.iter().copied().collect(),
            l: problem.l.iter().copied().collect(),
        }),
        gallery: None,
    };
    serde_json::to_string_pretty(&doc).expect("problem serialization cannot fail")
}
