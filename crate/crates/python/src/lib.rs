//! Python bindings for the `diffpm` core crate.

use std::path::PathBuf;

use diffpm::diffusion::{
    disagreement, dpmd_iteration, rendered_filter, system1_partition, system2_partition, CombinationRule,
    Network, NetworkState,
};
use diffpm::engine::{cpm_step, least_squares_solution, stability_bound, ControlFilter, CpmState};
use diffpm::harness::{self, ExperimentConfig, ResultSet};
use diffpm::metrics;
use diffpm::scene::{freefield_atf, AtfMatrix, DesiredField, PaperLayout, TargetMode};
use diffpm::C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: diffpm::Error) -> PyErr {
    match e {
        diffpm::Error::Divergence { .. } | diffpm::Error::Io { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn desired(values: Vec<C64>, n_bright: usize, freq: f64) -> DesiredField {
    DesiredField {
        freq,
        values,
        n_bright,
        mode: TargetMode::Oracle,
    }
}

/// Complex ATF matrix, rows are microphones (bright zone first).
#[pyclass(name = "Atf", module = "pydiffpm", skip_from_py_object)]
#[derive(Clone)]
struct PyAtf {
    inner: AtfMatrix,
}

#[pymethods]
impl PyAtf {
    #[new]
    #[pyo3(signature = (rows, n_bright, freq = 0.0))]
    fn new(rows: Vec<Vec<C64>>, n_bright: usize, freq: f64) -> PyResult<Self> {
        Ok(PyAtf {
            inner: AtfMatrix::from_rows(freq, n_bright, rows).map_err(err)?,
        })
    }

    /// Free-field ATFs of the reference layout.
    #[staticmethod]
    #[pyo3(signature = (freq, standoff = 2.0, zone_separation = 1.0))]
    fn freefield(freq: f64, standoff: f64, zone_separation: f64) -> PyResult<Self> {
        let geom = PaperLayout {
            standoff,
            zone_separation,
            ..PaperLayout::default()
        }
        .build()
        .map_err(err)?;
        Ok(PyAtf {
            inner: freefield_atf(&geom, freq).map_err(err)?,
        })
    }

    #[getter]
    fn freq(&self) -> f64 {
        self.inner.freq()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n_rows(), self.inner.n_cols())
    }

    #[getter]
    fn n_bright(&self) -> usize {
        self.inner.n_bright()
    }

    fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.inner.n_rows()).map(|m| self.inner.row(m).to_vec()).collect()
    }

    /// Pressure `H g` at every microphone.
    fn pressure(&self, g: Vec<C64>) -> PyResult<Vec<C64>> {
        self.inner.mul_vec(&g).map_err(err)
    }

    fn stability_bound(&self) -> PyResult<f64> {
        stability_bound(&self.inner).map_err(err)
    }

    #[pyo3(signature = (d, diag_load = 0.0))]
    fn least_squares(&self, d: Vec<C64>, diag_load: f64) -> PyResult<Vec<C64>> {
        let d = desired(d, self.inner.n_bright(), self.inner.freq());
        Ok(least_squares_solution(&self.inner, &d, diag_load)
            .map_err(err)?
            .into_weights())
    }

    fn contrast_db(&self, g: Vec<C64>) -> PyResult<f64> {
        let ac = metrics::acoustic_contrast_db(self.inner.bright_block(), self.inner.dark_block(), &g)
            .map_err(err)?;
        Ok(ac.db())
    }

    fn __repr__(&self) -> String {
        format!(
            "Atf(freq={}, shape=({}, {}), n_bright={})",
            self.inner.freq(),
            self.inner.n_rows(),
            self.inner.n_cols(),
            self.inner.n_bright()
        )
    }
}

/// `iterations` CPM updates from `g0` (zeros by default) on a static problem.
#[pyfunction]
#[pyo3(signature = (h, d, step_size, iterations, g0 = None))]
fn cpm(h: &PyAtf, d: Vec<C64>, step_size: f64, iterations: usize, g0: Option<Vec<C64>>) -> PyResult<Vec<C64>> {
    let h = &h.inner;
    let d = desired(d, h.n_bright(), h.freq());
    let g = match g0 {
        Some(w) => ControlFilter::new(w, h.freq()).map_err(err)?,
        None => ControlFilter::zeros(h.n_cols(), h.freq()),
    };
    let mut state = CpmState::new(g, step_size).map_err(err)?;
    for _ in 0..iterations {
        state = cpm_step(&state, h, &d).map_err(err)?;
    }
    Ok(state.filter.into_weights())
}

/// A distributed system: topology, ownership and combination weights.
#[pyclass(name = "Network", module = "pydiffpm", skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: Network,
}

fn rule(name: &str) -> PyResult<CombinationRule> {
    match name {
        "uniform" => Ok(CombinationRule::Uniform),
        "metropolis" => Ok(CombinationRule::Metropolis),
        other => Err(PyValueError::new_err(format!("unknown combination rule {other:?}"))),
    }
}

#[pymethods]
impl PyNetwork {
    /// Nine-node ring, one loudspeaker per node.
    #[staticmethod]
    #[pyo3(signature = (combination = "uniform"))]
    fn system1(combination: &str) -> PyResult<Self> {
        let (t, p) = system1_partition();
        Ok(PyNetwork {
            inner: Network::with_rule(t, p, rule(combination)?).map_err(err)?,
        })
    }

    /// Four-node ring, eight microphones per node.
    #[staticmethod]
    #[pyo3(signature = (combination = "uniform"))]
    fn system2(combination: &str) -> PyResult<Self> {
        let (t, p) = system2_partition();
        Ok(PyNetwork {
            inner: Network::with_rule(t, p, rule(combination)?).map_err(err)?,
        })
    }

    #[staticmethod]
    fn single_node(n_mics: usize, n_speakers: usize) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: Network::single_node(n_mics, n_speakers).map_err(err)?,
        })
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    fn neighborhood(&self, k: usize) -> PyResult<Vec<usize>> {
        if k >= self.inner.n_nodes() {
            return Err(PyValueError::new_err(format!("no node {k}")));
        }
        Ok(self.inner.topology.neighborhood(k).to_vec())
    }

    fn weight(&self, l: usize, k: usize) -> f64 {
        self.inner.combination.weight(l, k)
    }

    /// Runs DPM-D on a static problem. Returns the loudspeaker filter, the
    /// per-node estimates and the final disagreement.
    fn run(
        &self,
        h: &PyAtf,
        d: Vec<C64>,
        step_size: f64,
        iterations: usize,
    ) -> PyResult<(Vec<C64>, Vec<Vec<C64>>, f64)> {
        let h = &h.inner;
        let d = desired(d, h.n_bright(), h.freq());
        let mut state = NetworkState::uniform(self.inner.n_nodes(), step_size, h.n_cols(), h.freq()).map_err(err)?;
        for _ in 0..iterations {
            state = dpmd_iteration(&state, &self.inner, h, &d).map_err(err)?;
        }
        let g = rendered_filter(&state, &self.inner.partition).into_weights();
        let nodes = state.estimates().map(|e| e.weights().to_vec()).collect();
        Ok((g, nodes, disagreement(&state)))
    }
}

#[pyfunction]
fn nmse_db(d: Vec<C64>, p: Vec<C64>) -> PyResult<f64> {
    metrics::nmse_db(&d, &p).map_err(err)
}

fn profile_dict<'py>(py: Python<'py>, p: &metrics::ComplexityProfile) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("additions", p.additions)?;
    out.set_item("multiplications", p.multiplications)?;
    out.set_item("fft_additions", p.fft_additions)?;
    out.set_item("fft_multiplications", p.fft_multiplications)?;
    out.set_item("processing_additions", p.processing_additions)?;
    out.set_item("processing_multiplications", p.processing_multiplications)?;
    Ok(out)
}

#[pyfunction]
fn complexity_cpm<'py>(py: Python<'py>, m: usize, l: usize, f: usize) -> PyResult<Bound<'py, PyDict>> {
    profile_dict(py, &metrics::complexity_cpm(m, l, f).map_err(err)?)
}

#[pyfunction]
fn complexity_dpmd<'py>(
    py: Python<'py>,
    m_k: usize,
    l_k: usize,
    c_k: usize,
    n_k: usize,
    l: usize,
    f: usize,
) -> PyResult<Bound<'py, PyDict>> {
    profile_dict(py, &metrics::complexity_dpmd(m_k, l_k, c_k, n_k, l, f).map_err(err)?)
}

fn summary<'py>(py: Python<'py>, rs: &ResultSet) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    let rows: Vec<(f64, String, f64, f64)> = rs
        .sweep
        .iter()
        .map(|r| (r.freq_hz, r.series.name(), r.nmse_ss_db, r.ac_ss_db))
        .collect();
    out.set_item("steady_state", rows)?;
    let curves = PyDict::new(py);
    for c in &rs.learning_curves {
        curves.set_item(
            (c.series.name(), c.point_set.as_str()),
            (c.nmse.mean.clone(), c.nmse.std.clone(), c.ac.mean.clone(), c.ac.std.clone()),
        )?;
    }
    out.set_item("learning_curves", curves)?;
    out.set_item("config_hash", rs.provenance.config_hash.clone())?;
    Ok(out)
}

fn parse(config: &str) -> PyResult<ExperimentConfig> {
    harness::parse_config(config).map_err(err)
}

/// Monte Carlo runs for a TOML config string. Results are also written to
/// `out` when given.
#[pyfunction]
#[pyo3(signature = (config = "", out = None))]
fn run_monte_carlo<'py>(py: Python<'py>, config: &str, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse(config)?;
    let rs = py.detach(|| harness::run_monte_carlo(&cfg)).map_err(err)?;
    if let Some(dir) = out {
        harness::write_results(&rs, &dir).map_err(err)?;
    }
    summary(py, &rs)
}

#[pyfunction]
#[pyo3(signature = (config = "", out = None))]
fn frequency_sweep<'py>(py: Python<'py>, config: &str, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse(config)?;
    let rs = py.detach(|| harness::frequency_sweep(&cfg)).map_err(err)?;
    if let Some(dir) = out {
        harness::write_results(&rs, &dir).map_err(err)?;
    }
    summary(py, &rs)
}

/// Validates a TOML config and returns its canonical hash.
#[pyfunction]
fn config_hash(config: &str) -> PyResult<String> {
    Ok(parse(config)?.hash())
}

#[pymodule]
fn pydiffpm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAtf>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(cpm, m)?)?;
    m.add_function(wrap_pyfunction!(nmse_db, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_cpm, m)?)?;
    m.add_function(wrap_pyfunction!(complexity_dpmd, m)?)?;
    m.add_function(wrap_pyfunction!(run_monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(frequency_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
