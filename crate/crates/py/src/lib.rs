//! Python bindings: a `Problem` handle wrapping the tabulated Bellman data
//! plus its discretized generator, with solver entry points returning plain
//! result objects.

use std::collections::{BTreeMap, HashMap};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ergodicity_lab::error::Error;
use ergodicity_lab::generator::{build_generator, validate_monotone, DiscreteGenerator};
use ergodicity_lab::grid::{GridFunction, TorusGrid};
use ergodicity_lab::mather::MatherContext;
use ergodicity_lab::problem::{self, EllipticProblem, GalleryId};
use ergodicity_lab::vanish::{self, CSource};

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidArgument(_) | Error::SpecParse(_) | Error::ShapeMismatch(_) => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Tabulated Bellman problem plus its monotone discretization.
#[pyclass]
struct Problem {
    inner: EllipticProblem,
    gen: DiscreteGenerator,
}

#[pyclass]
struct DiscountedResult {
    #[pyo3(get)]
    lambda_: f64,
    #[pyo3(get)]
    v: Vec<f64>,
    #[pyo3(get)]
    policy: Vec<usize>,
    #[pyo3(get)]
    residual: f64,
    #[pyo3(get)]
    iterations: usize,
}

#[pyclass]
struct ErgodicResult {
    #[pyo3(get)]
    c: f64,
    #[pyo3(get)]
    u: Vec<f64>,
    #[pyo3(get)]
    policy: Vec<usize>,
    #[pyo3(get)]
    residual: f64,
}

#[pyclass]
struct Certificate {
    #[pyo3(get)]
    lp_value: f64,
    #[pyo3(get)]
    pde_value: f64,
    #[pyo3(get)]
    gap: f64,
    #[pyo3(get)]
    closing_residual: f64,
    #[pyo3(get)]
    total_mass: f64,
    /// Nonzero (point, control, weight) triples sorted by point.
    #[pyo3(get)]
    support: Vec<(usize, usize, f64)>,
}

#[pyclass]
struct Schedule {
    #[pyo3(get)]
    lambdas: Vec<f64>,
    #[pyo3(get)]
    c_hats: Vec<f64>,
    #[pyo3(get)]
    spreads: Vec<f64>,
    #[pyo3(get)]
    gaps: Vec<Option<f64>>,
    #[pyo3(get)]
    c: f64,
    #[pyo3(get)]
    u0: Vec<f64>,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    diagnostic: Option<String>,
}

fn certificate_from(cert: ergodicity_lab::DualityCertificate) -> Certificate {
    Certificate {
        lp_value: cert.lp_value,
        pde_value: cert.pde_value,
        gap: cert.gap,
        closing_residual: cert.closing_residual,
        total_mass: cert.measure.total_mass(),
        support: cert.measure.nonzero_triples(),
    }
}

#[pymethods]
impl Problem {
    /// Build a gallery problem on a dim-dimensional grid with n points per
    /// axis. Known ids: constant_cost, eikonal_f, linear_first_order,
    /// viscous_superlinear, uniformly_elliptic, superquadratic.
    #[staticmethod]
    #[pyo3(signature = (id, dim, n, params = None))]
    fn gallery(id: &str, dim: usize, n: usize, params: Option<HashMap<String, f64>>) -> PyResult<Self> {
        let grid = TorusGrid::new(dim, n).map_err(to_py_err)?;
        let map: BTreeMap<String, f64> = params.unwrap_or_default().into_iter().collect();
        let gallery_id = GalleryId::parse(id).map_err(to_py_err)?;
        let inner = problem::build_gallery(gallery_id, &map, grid).map_err(to_py_err)?;
        let gen = build_generator(&inner);
        Ok(Problem { inner, gen })
    }

    /// Parse a problem document (JSON text).
    #[staticmethod]
    fn from_spec(text: &str) -> PyResult<Self> {
        let inner = problem::parse_spec(text).map_err(to_py_err)?;
        let gen = build_generator(&inner);
        Ok(Problem { inner, gen })
    }

    /// Serialize in the explicit-coefficients form.
    fn to_spec(&self) -> String {
        problem::to_spec_string(&self.inner)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.grid().dim()
    }

    #[getter]
    fn n_per_axis(&self) -> usize {
        self.inner.grid().n_per_axis()
    }

    #[getter]
    fn num_points(&self) -> usize {
        self.inner.num_points()
    }

    #[getter]
    fn num_controls(&self) -> usize {
        self.inner.num_controls()
    }

    fn control_points(&self) -> Vec<Vec<f64>> {
        self.inner.controls().points().to_vec()
    }

    /// (L0, outside_min, margin, ok) of the truncation diagnostic.
    fn check_condition_l(&self) -> PyResult<(f64, f64, f64, bool)> {
        let r = problem::check_condition_l(&self.inner).map_err(to_py_err)?;
        Ok((r.l0, r.outside_min, r.margin, r.ok))
    }

    /// Row sums and sign pattern of the discretized generator.
    fn generator_is_monotone(&self) -> bool {
        validate_monotone(&self.gen).pass
    }

    /// F_h[u] at every grid point.
    fn apply_bellman(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        let gf = GridFunction::new(self.inner.grid(), u).map_err(to_py_err)?;
        let out = ergodicity_lab::apply_f(&self.gen, &self.inner, &gf).map_err(to_py_err)?;
        Ok(out.values().to_vec())
    }

    #[pyo3(signature = (lambda_, tol = 1e-10))]
    fn solve_discounted(&self, lambda_: f64, tol: f64) -> PyResult<DiscountedResult> {
        let sol = ergodicity_lab::solve_discounted(&self.inner, &self.gen, lambda_, tol, None)
            .map_err(to_py_err)?;
        Ok(DiscountedResult {
            lambda_,
            v: sol.v.values().to_vec(),
            policy: sol.policy,
            residual: sol.residual,
            iterations: sol.iterations,
        })
    }

    #[pyo3(signature = (tol = 1e-10, x0 = 0))]
    fn solve_ergodic(&self, tol: f64, x0: usize) -> PyResult<ErgodicResult> {
        let sol = ergodicity_lab::solve_ergodic_howard(&self.inner, &self.gen, tol, x0)
            .map_err(to_py_err)?;
        Ok(ErgodicResult {
            c: sol.c,
            u: sol.u.values().to_vec(),
            policy: sol.policy,
            residual: sol.residual,
        })
    }

    /// Ergodic occupation-measure LP paired with the Howard value.
    fn certify_ergodic(&self) -> PyResult<Certificate> {
        let cert = ergodicity_lab::solve_mather(&self.inner, &self.gen, MatherContext::Ergodic)
            .map_err(to_py_err)?;
        Ok(certificate_from(cert))
    }

    /// Discounted occupation-measure LP rooted at z, paired with lambda v(z).
    fn certify_discounted(&self, z: usize, lambda_: f64) -> PyResult<Certificate> {
        let cert = ergodicity_lab::solve_mather(
            &self.inner,
            &self.gen,
            MatherContext::Discounted { z, lambda: lambda_ },
        )
        .map_err(to_py_err)?;
        Ok(certificate_from(cert))
    }

    /// Vanishing-discount schedule; c_source is "lp" or "howard".
    #[pyo3(signature = (lambdas, c_source = "lp", tol = 1e-4))]
    fn run_schedule(&self, lambdas: Vec<f64>, c_source: &str, tol: f64) -> PyResult<Schedule> {
        let source = match c_source {
            "lp" => CSource::Lp,
            "howard" => CSource::Howard,
            other => {
                return Err(PyValueError::new_err(format!(
                    "c_source must be 'lp' or 'howard', got '{other}'"
                )))
            }
        };
        let report = vanish::run_schedule(&self.inner, &self.gen, &lambdas, source, tol)
            .map_err(to_py_err)?;
        Ok(Schedule {
            lambdas: report.records.iter().map(|r| r.lambda).collect(),
            c_hats: report.records.iter().map(|r| r.c_hat).collect(),
            spreads: report.records.iter().map(|r| r.spread).collect(),
            gaps: report.records.iter().map(|r| r.gap_to_prev).collect(),
            c: report.c,
            u0: report.u0.values().to_vec(),
            converged: report.converged,
            diagnostic: report.diagnostic,
        })
    }
}

/// ((m-1)/m) |q|^(m/(m-1)): convex conjugate of (1/m)|p|^m.
#[pyfunction]
fn legendre_power(m: f64, q: Vec<f64>) -> PyResult<f64> {
    problem::legendre_power(m, &q).map_err(to_py_err)
}

#[pymodule]
fn ergodicity_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Problem>()?;
    m.add_class::<DiscountedResult>()?;
    m.add_class::<ErgodicResult>()?;
    m.add_class::<Certificate>()?;
    m.add_class::<Schedule>()?;
    m.add_function(wrap_pyfunction!(legendre_power, m)?)?;
    Ok(())
}
