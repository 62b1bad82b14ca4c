//! Python bindings. Matrices cross the boundary as lists of rows.

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use phonospace_core::aggregation::SampleSet;
use phonospace_core::dataset::validate_dataset;
use phonospace_core::geometry::{self, fit_subspace_rows};
use phonospace_core::infostats::{self, ContingencyTable};
use phonospace_core::matrix::{read_matrix_file, write_matrix_file, FrameMatrix};
use phonospace_core::probing::{self, LinearProbe, ProbeConfig};
use phonospace_core::report::{self, RunConfig};
use phonospace_core::synthgen::{self, PlantedConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn manifest_path(path: PathBuf) -> PathBuf {
    if path.is_dir() {
        path.join(phonospace_core::dataset::MANIFEST_FILE)
    } else {
        path
    }
}

/// Reads an SSLM container into a list of frame rows.
#[pyfunction]
fn read_matrix(path: PathBuf) -> PyResult<Vec<Vec<f32>>> {
    let m = read_matrix_file(&path).map_err(io_err)?;
    Ok(m.iter_rows().map(<[f32]>::to_vec).collect())
}

/// Writes frame rows as an SSLM container; returns the bytes written.
#[pyfunction]
fn write_matrix(path: PathBuf, rows: Vec<Vec<f32>>) -> PyResult<u64> {
    let m = FrameMatrix::from_rows(&rows).map_err(value_err)?;
    write_matrix_file(&m, &path).map_err(io_err)
}

/// Problems found in a dataset (manifest or directory); empty when clean.
#[pyfunction]
fn validate(path: PathBuf) -> Vec<String> {
    validate_dataset(&manifest_path(path)).iter().map(ToString::to_string).collect()
}

/// CRV(X | Y) from two lists of class centroids.
#[pyfunction]
#[pyo3(signature = (x, y, k_x = 35, k_y = 35))]
fn crv(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, k_x: usize, k_y: usize) -> PyResult<f64> {
    let sx = fit_subspace_rows(&to_matrix(&x)?, k_x).map_err(value_err)?;
    let sy = fit_subspace_rows(&to_matrix(&y)?, k_y).map_err(value_err)?;
    geometry::crv(&sx, &sy).map_err(value_err)
}

#[pyclass(get_all, frozen)]
struct Ami {
    mi: f64,
    emi: f64,
    h_row: f64,
    h_col: f64,
    ami: f64,
}

#[pymethods]
impl Ami {
    fn __repr__(&self) -> String {
        format!("Ami(mi={}, emi={}, ami={})", self.mi, self.emi, self.ami)
    }
}

/// Adjusted mutual information between two integer labelings.
#[pyfunction]
fn adjusted_mi(u: Vec<usize>, v: Vec<usize>) -> PyResult<Ami> {
    let table = ContingencyTable::from_labelings(&u, &v).map_err(value_err)?;
    let r = infostats::adjusted_mi(&table).map_err(value_err)?;
    Ok(Ami {
        mi: r.mi,
        emi: r.emi,
        h_row: r.h_row,
        h_col: r.h_col,
        ami: r.ami,
    })
}

#[pyclass(get_all, frozen)]
struct Magnitudes {
    n_rows: usize,
    mu_mag: f64,
    sigma_mag: Option<f64>,
    mag_mean: f64,
}

#[pymethods]
impl Magnitudes {
    fn __repr__(&self) -> String {
        format!(
            "Magnitudes(n_rows={}, mu_mag={}, sigma_mag={:?}, mag_mean={})",
            self.n_rows, self.mu_mag, self.sigma_mag, self.mag_mean
        )
    }
}

#[pyfunction]
fn magnitude_stats(rows: Vec<Vec<f64>>) -> PyResult<Magnitudes> {
    let m = infostats::magnitude_stats(&to_matrix(&rows)?).map_err(value_err)?;
    Ok(Magnitudes {
        n_rows: m.n_rows,
        mu_mag: m.mu_mag,
        sigma_mag: m.sigma_mag,
        mag_mean: m.mag_mean,
    })
}

/// Normal-approximation 95% half-width for an accuracy over `n` samples.
#[pyfunction]
fn ci95_halfwidth(accuracy: f64, n: usize) -> f64 {
    probing::ci95_halfwidth(accuracy, n)
}

#[pyclass(get_all, frozen)]
struct Evaluation {
    accuracy: f64,
    ci95_halfwidth: f64,
    n_test: usize,
    per_class_accuracy: Vec<Option<f64>>,
    confusion: Vec<Vec<u64>>,
}

#[pymethods]
impl Evaluation {
    fn __repr__(&self) -> String {
        format!(
            "Evaluation(accuracy={}, ci95_halfwidth={}, n_test={})",
            self.accuracy, self.ci95_halfwidth, self.n_test
        )
    }
}

/// Softmax linear probe trained with minibatch Adam.
#[pyclass(frozen)]
struct Probe {
    inner: LinearProbe,
    #[pyo3(get)]
    epoch_losses: Vec<f64>,
    #[pyo3(get)]
    train_accuracy: f64,
}

#[pymethods]
impl Probe {
    #[staticmethod]
    #[pyo3(signature = (features, labels, class_count, learning_rate = None, epochs = None, batch_size = None, seed = 0))]
    fn train(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_count: usize,
        learning_rate: Option<f64>,
        epochs: Option<usize>,
        batch_size: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut config = ProbeConfig {
            seed,
            ..ProbeConfig::default()
        };
        config.learning_rate = learning_rate.unwrap_or(config.learning_rate);
        config.epochs = epochs.unwrap_or(config.epochs);
        config.batch_size = batch_size.unwrap_or(config.batch_size);
        let set = SampleSet::from_rows(&features, &labels, class_count).map_err(value_err)?;
        let out = probing::train_probe(&set, class_count, &config).map_err(value_err)?;
        Ok(Self {
            inner: out.probe,
            epoch_losses: out.epoch_losses,
            train_accuracy: out.train_accuracy,
        })
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<usize> {
        if x.len() != self.inner.input_dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} inputs, got {}",
                self.inner.input_dim(),
                x.len()
            )));
        }
        Ok(self.inner.predict(&x))
    }

    fn evaluate(&self, features: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<Evaluation> {
        let set = SampleSet::from_rows(&features, &labels, self.inner.class_count()).map_err(value_err)?;
        let r = probing::evaluate_probe(&self.inner, &set).map_err(value_err)?;
        Ok(Evaluation {
            accuracy: r.accuracy,
            ci95_halfwidth: r.ci95_halfwidth,
            n_test: r.n_test,
            per_class_accuracy: r.per_class_accuracy,
            confusion: r.confusion,
        })
    }

    #[getter]
    fn class_count(&self) -> usize {
        self.inner.class_count()
    }

    /// `class_count` rows of `input_dim` weights.
    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        self.inner.weights().chunks(self.inner.input_dim().max(1)).map(<[f64]>::to_vec).collect()
    }

    #[getter]
    fn bias(&self) -> Vec<f64> {
        self.inner.bias().to_vec()
    }
}

/// Writes a planted dataset to `out` and returns its ground truth as JSON.
/// `config_json` holds planted-corpus settings; missing keys take defaults.
#[pyfunction]
#[pyo3(signature = (out, config_json = None, seed = None))]
fn generate_planted(out: PathBuf, config_json: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let mut config: PlantedConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => PlantedConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let truth = synthgen::generate_planted(&config, &out).map_err(value_err)?;
    serde_json::to_string(&truth).map_err(value_err)
}

/// Runs one analysis (`probe`, `geometry`, `ami` or `magnitudes`) and
/// returns the CSV text the command-line tool would write.
#[pyfunction]
#[pyo3(signature = (command, datasets, config_json = None, seed = None))]
fn table(command: &str, datasets: Vec<PathBuf>, config_json: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let mut config: RunConfig = match config_json {
        Some(text) => serde_json::from_str(text).map_err(value_err)?,
        None => RunConfig::default(),
    };
    if !datasets.is_empty() {
        config.datasets = datasets;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let run = match command {
        "probe" => report::probe_table,
        "geometry" => report::geometry_table,
        "ami" => report::ami_table,
        "magnitudes" => report::magnitude_table,
        other => return Err(PyValueError::new_err(format!("unknown analysis `{other}`"))),
    };
    let t = run(&config).map_err(value_err)?;
    Ok(t.to_csv(&config.provenance()))
}

#[pymodule]
fn phonospace(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", phonospace_core::VERSION)?;
    m.add_function(wrap_pyfunction!(read_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(write_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(crv, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_mi, m)?)?;
    m.add_function(wrap_pyfunction!(magnitude_stats, m)?)?;
    m.add_function(wrap_pyfunction!(ci95_halfwidth, m)?)?;
    m.add_function(wrap_pyfunction!(generate_planted, m)?)?;
    m.add_function(wrap_pyfunction!(table, m)?)?;
    m.add_class::<Probe>()?;
    m.add_class::<Evaluation>()?;
    m.add_class::<Ami>()?;
    m.add_class::<Magnitudes>()?;
    Ok(())
}
