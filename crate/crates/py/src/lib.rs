use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use mpa_core::bounds;
use mpa_core::experiment::{p_value as core_p_value, pearson_r as core_pearson_r};
use mpa_core::model_file::{load_model, matrix_to_rows, rows_to_matrix, ModelFile};
use mpa_core::{
    compute_mpa as core_compute_mpa, empirical_joint, fit_majority_predictor, mpa_hits, Error, PairedLabelDataset,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::TrainingDiverged { .. } => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn dataset(
    pairs: Vec<(usize, usize)>,
    num_source: Option<usize>,
    num_target: Option<usize>,
) -> PyResult<PairedLabelDataset> {
    let data = match (num_source, num_target) {
        (None, None) => PairedLabelDataset::from_pairs(pairs),
        (s, t) => {
            let ms = s.unwrap_or_else(|| pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0));
            let mt = t.unwrap_or_else(|| pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0));
            PairedLabelDataset::new(pairs, ms, mt)
        }
    };
    data.map_err(to_py)
}

/// Fraction of pairs whose target label equals the majority target label of its source label.
#[pyfunction]
#[pyo3(signature = (pairs, num_source=None, num_target=None))]
fn compute_mpa(pairs: Vec<(usize, usize)>, num_source: Option<usize>, num_target: Option<usize>) -> PyResult<f64> {
    Ok(core_compute_mpa(&dataset(pairs, num_source, num_target)?))
}

/// Returns `(mapping, hits)`, where `mapping[s]` is the predicted target label for source label `s`.
#[pyfunction]
#[pyo3(signature = (pairs, num_source=None, num_target=None))]
fn fit_majority(
    pairs: Vec<(usize, usize)>,
    num_source: Option<usize>,
    num_target: Option<usize>,
) -> PyResult<(Vec<usize>, usize)> {
    let data = dataset(pairs, num_source, num_target)?;
    let f = fit_majority_predictor(&empirical_joint(&data));
    Ok((f.mapping().to_vec(), mpa_hits(&data)))
}

#[pyfunction]
fn spectral_norm(a: Vec<Vec<f64>>) -> PyResult<f64> {
    bounds::spectral_norm(&rows_to_matrix(&a).map_err(to_py)?).map_err(to_py)
}

#[pyfunction]
fn norm_21(a: Vec<Vec<f64>>) -> PyResult<f64> {
    bounds::norm_21(&rows_to_matrix(&a).map_err(to_py)?).map_err(to_py)
}

/// Capacity of a dense stack measured against reference matrices of the same shapes.
#[pyfunction]
fn capacity_fc(weights: Vec<Vec<Vec<f64>>>, refs: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
    let w = weights
        .iter()
        .map(|m| rows_to_matrix(m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let r = refs
        .iter()
        .map(|m| rows_to_matrix(m))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let w: Vec<_> = w.iter().collect();
    let r: Vec<_> = r.iter().collect();
    bounds::capacity_fc(&w, &r).map_err(to_py)
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    core_pearson_r(&x, &y).map_err(to_py)
}

/// Two-sided p-value of a correlation `r` over `n_pairs` observations.
#[pyfunction]
fn p_value(r: f64, n_pairs: usize) -> PyResult<f64> {
    core_p_value(r, n_pairs).map_err(to_py)
}

/// A bias-free network loaded from a model JSON written by `mpa transfer`.
#[pyclass(frozen)]
struct Network {
    inner: mpa_core::Network,
}

#[pymethods]
impl Network {
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let (inner, _) = load_model(path).map_err(to_py)?;
        Ok(Network { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let (inner, _) = file.to_network().map_err(to_py)?;
        Ok(Network { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&ModelFile::from_network(&self.inner, None))
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    #[getter]
    fn split_index(&self) -> usize {
        self.inner.split_index()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.layers().len()
    }

    fn weights(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.weights().into_iter().map(matrix_to_rows).collect()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&x).map_err(to_py)
    }

    fn forward_batch(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let m = rows_to_matrix(&x).map_err(to_py)?;
        Ok(matrix_to_rows(&self.inner.forward_batch(&m).map_err(to_py)?))
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let m = rows_to_matrix(&x).map_err(to_py)?;
        self.inner.predict_batch(&m).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(input_dim={}, output_dim={}, layers={}, split_index={})",
            self.inner.input_dim(),
            self.inner.output_dim(),
            self.inner.layers().len(),
            self.inner.split_index()
        )
    }
}

#[pymodule]
fn mpa_transfer(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compute_mpa, m)?)?;
    m.add_function(wrap_pyfunction!(fit_majority, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(norm_21, m)?)?;
    m.add_function(wrap_pyfunction!(capacity_fc, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(p_value, m)?)?;
    m.add_class::<Network>()?;
    Ok(())
}
