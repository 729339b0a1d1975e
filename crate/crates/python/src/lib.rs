use hardyflow::cli::{run, RunConfig};
use hardyflow::flows::{
    build_flow, flow_grid, refine_flow, run_checks, run_checks_with_refinement, FlowOptions, FlowTable, Tolerances,
};
use hardyflow::kernels::{default_degree, kernels_at_level};
use hardyflow::sublevel::trace_level;
use hardyflow::{DomainSpec, Error, GreenMethod, GreenSolver};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(hardyflow, HardyflowError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ConfigParse(_) | Error::Configuration(_) => PyValueError::new_err(e.to_string()),
        _ => HardyflowError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<GreenMethod> {
    match name {
        "auto" => Ok(GreenMethod::Auto),
        "nystrom" => Ok(GreenMethod::Nystrom),
        _ => Err(PyValueError::new_err(format!("unknown Green method {name:?}"))),
    }
}

/// Planar domain description.
#[pyclass(frozen, module = "hardyflow")]
struct Domain {
    spec: DomainSpec,
}

#[pymethods]
impl Domain {
    #[staticmethod]
    #[pyo3(signature = (radius, z0, center = (0.0, 0.0)))]
    fn disk(radius: f64, z0: (f64, f64), center: (f64, f64)) -> Self {
        Self {
            spec: DomainSpec::Disk {
                radius,
                center: [center.0, center.1],
                z0: [z0.0, z0.1],
            },
        }
    }

    /// `{q < |z| < 1}`.
    #[staticmethod]
    fn annulus(q: f64, z0: (f64, f64)) -> Self {
        Self {
            spec: DomainSpec::Annulus { q, z0: [z0.0, z0.1] },
        }
    }

    /// Outer circle and circular holes, each given as `((x, y), radius)`.
    #[staticmethod]
    #[pyo3(signature = (outer, holes, z0))]
    fn circles(outer: ((f64, f64), f64), holes: Vec<((f64, f64), f64)>, z0: (f64, f64)) -> Self {
        let circle = |((x, y), r): ((f64, f64), f64)| hardyflow::domain::CircleSpec {
            center: [x, y],
            radius: r,
        };
        Self {
            spec: DomainSpec::Circles {
                outer: circle(outer),
                holes: holes.into_iter().map(circle).collect(),
                z0: [z0.0, z0.1],
            },
        }
    }

    /// Same JSON form as the `domain` entry of a run configuration.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|spec| Self { spec })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.spec).unwrap_or_default()
    }

    fn __repr__(&self) -> String {
        format!("Domain({})", self.to_json())
    }
}

/// Kernel values on one sublevel set.
#[pyclass(frozen, get_all, module = "hardyflow")]
struct Kernels {
    t: f64,
    bergman: f64,
    khat: f64,
    hnorm_bergman: f64,
    degree: usize,
    degree_change: f64,
}

#[pymethods]
impl Kernels {
    fn __repr__(&self) -> String {
        format!(
            "Kernels(t={}, bergman={}, khat={}, hnorm_bergman={}, degree={})",
            self.t, self.bergman, self.khat, self.hnorm_bergman, self.degree
        )
    }
}

/// Outcome of one flow check.
#[pyclass(frozen, get_all, module = "hardyflow")]
struct Check {
    name: String,
    passed: bool,
    worst_violation: f64,
    location: Option<f64>,
    tolerance: f64,
    detail: String,
}

#[pymethods]
impl Check {
    fn __repr__(&self) -> String {
        format!(
            "Check({}, passed={}, worst={:e})",
            self.name, self.passed, self.worst_violation
        )
    }
}

/// Kernel quantities on a grid of flow times.
#[pyclass(frozen, module = "hardyflow")]
struct Flow {
    table: FlowTable,
}

impl Flow {
    fn column(&self, f: impl Fn(&hardyflow::flows::FlowRow) -> f64) -> Vec<f64> {
        self.table.rows().iter().map(f).collect()
    }
}

#[pymethods]
impl Flow {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.column(|r| r.t)
    }

    #[getter]
    fn bergman(&self) -> Vec<f64> {
        self.column(|r| r.b)
    }

    #[getter]
    fn khat(&self) -> Vec<f64> {
        self.column(|r| r.khat)
    }

    #[getter]
    fn hnorm_bergman(&self) -> Vec<f64> {
        self.column(|r| r.hnorm_b)
    }

    #[getter]
    fn hhat(&self) -> Vec<f64> {
        self.column(|r| r.hhat)
    }

    /// True where the row lies in a critical window.
    #[getter]
    fn gap(&self) -> Vec<bool> {
        self.table.rows().iter().map(|r| r.gap).collect()
    }

    #[getter]
    fn critical_times(&self) -> Vec<f64> {
        self.table.critical_times().to_vec()
    }

    fn to_csv(&self) -> String {
        self.table.to_csv()
    }

    fn __len__(&self) -> usize {
        self.table.rows().len()
    }
}

fn checks(reports: Vec<hardyflow::flows::CheckReport>) -> Vec<Check> {
    reports
        .into_iter()
        .map(|c| Check {
            name: c.name,
            passed: c.passed,
            worst_violation: c.worst_violation,
            location: c.location,
            tolerance: c.tolerance,
            detail: c.detail,
        })
        .collect()
}

/// Green function of a domain with its pole at the domain's base point.
#[pyclass(frozen, module = "hardyflow")]
struct Solver {
    inner: GreenSolver,
}

#[pymethods]
impl Solver {
    #[new]
    #[pyo3(signature = (domain, nodes_per_curve = 256, method = "auto"))]
    fn new(py: Python<'_>, domain: &Domain, nodes_per_curve: usize, method: &str) -> PyResult<Self> {
        let m = self::method(method)?;
        let spec = domain.spec.clone();
        py.detach(|| {
            let d = spec.build(nodes_per_curve)?;
            GreenSolver::new(&d, nodes_per_curve, m)
        })
        .map(|inner| Self { inner })
        .map_err(to_py)
    }

    /// G at the point `(x, y)`.
    fn green(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.value(Complex64::new(x, y)).map_err(to_py)
    }

    fn critical_times(&self, py: Python<'_>) -> Vec<f64> {
        py.detach(|| self.inner.critical_times())
    }

    fn robin_constant(&self) -> f64 {
        self.inner.robin_constant()
    }

    /// Kernels on the sublevel set at flow time `t`, doubling the basis degree from
    /// `degree` until converged.
    #[pyo3(signature = (t, degree = None))]
    fn kernels(&self, py: Python<'_>, t: f64, degree: Option<usize>) -> PyResult<Kernels> {
        let k = py
            .detach(|| {
                let level = trace_level(&self.inner, t)?;
                let start = degree.unwrap_or_else(|| default_degree(self.inner.domain()));
                kernels_at_level(&self.inner, &level, start)
            })
            .map_err(to_py)?;
        Ok(Kernels {
            t: k.t,
            bergman: k.bergman,
            khat: k.khat,
            hnorm_bergman: k.hnorm_bergman,
            degree: k.degree,
            degree_change: k.degree_change,
        })
    }

    /// Flow on `steps` equispaced times from `t_min` to `t_max`.
    #[pyo3(signature = (t_min, t_max, steps, degree = None))]
    fn flow(&self, py: Python<'_>, t_min: f64, t_max: f64, steps: usize, degree: Option<usize>) -> PyResult<Flow> {
        let options = FlowOptions {
            degree,
            ..FlowOptions::default()
        };
        py.detach(|| build_flow(&self.inner, &flow_grid(t_min, t_max, steps), &options))
            .map(|table| Flow { table })
            .map_err(to_py)
    }

    /// Every check on `flow`; with `refine`, also its stability on the bisected grid.
    #[pyo3(signature = (flow, refine = false))]
    fn check(&self, py: Python<'_>, flow: &Flow, refine: bool) -> PyResult<Vec<Check>> {
        let tol = Tolerances::default();
        let reports = py
            .detach(|| {
                if refine {
                    let fine = refine_flow(&flow.table, &self.inner, &FlowOptions::default())?;
                    Ok(run_checks_with_refinement(&flow.table, &fine, &tol))
                } else {
                    Ok(run_checks(&flow.table, None, &tol))
                }
            })
            .map_err(to_py)?;
        Ok(checks(reports))
    }
}

/// Execute a run configuration given as JSON; returns the run report as JSON.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<String> {
    let config = RunConfig::from_json(config).map_err(to_py)?;
    let report = py.detach(|| run(&config)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| HardyflowError::new_err(e.to_string()))
}

#[pymodule(name = "hardyflow")]
fn hardyflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("HardyflowError", m.py().get_type::<HardyflowError>())?;
    m.add_class::<Domain>()?;
    m.add_class::<Solver>()?;
    m.add_class::<Kernels>()?;
    m.add_class::<Flow>()?;
    m.add_class::<Check>()?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
