//! Python bindings: tensors, losses, the Haar transform, synthetic data, metrics,
//! networks and the full training protocol.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use wsscod::data::{self, BBox};
use wsscod::losses::{self, GradMode};
use wsscod::metrics::MetricReport;
use wsscod::model::{self, EncoderConfig, NetKind};
use wsscod::pipeline::{self, ExperimentConfig, Preset};
use wsscod::{wavelet, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFile { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Dense row-major f64 tensor.
#[pyclass(name = "Tensor", module = "wsscod", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTensor {
    inner: wsscod::Tensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        wsscod::Tensor::new(shape, data).map(|inner| PyTensor { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn zeros(shape: Vec<usize>) -> Self {
        PyTensor { inner: wsscod::Tensor::zeros(&shape) }
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.data().len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }
}

fn wrap(inner: wsscod::Tensor) -> PyTensor {
    PyTensor { inner }
}

fn grad_mode(mode: &str) -> PyResult<GradMode> {
    mode.parse().map_err(to_py)
}

#[pyfunction]
fn nc_loss(p: &PyTensor, g: &PyTensor, q: f64) -> PyResult<f64> {
    losses::nc_loss(&p.inner, &g.inner, q).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (p, g, q, mode = "exact"))]
fn nc_grad(p: &PyTensor, g: &PyTensor, q: f64, mode: &str) -> PyResult<PyTensor> {
    losses::nc_grad(&p.inner, &g.inner, q, grad_mode(mode)?).map(wrap).map_err(to_py)
}

/// Returns `(ll, lh, hl, hh)`.
#[pyfunction]
fn dwt_haar(x: &PyTensor) -> PyResult<(PyTensor, PyTensor, PyTensor, PyTensor)> {
    let s = wavelet::dwt_haar(&x.inner).map_err(to_py)?;
    Ok((wrap(s.ll), wrap(s.lh), wrap(s.hl), wrap(s.hh)))
}

#[pyfunction]
fn idwt_haar(ll: &PyTensor, lh: &PyTensor, hl: &PyTensor, hh: &PyTensor) -> PyResult<PyTensor> {
    let s = wavelet::Subbands {
        ll: ll.inner.clone(),
        lh: lh.inner.clone(),
        hl: hl.inner.clone(),
        hh: hh.inner.clone(),
    };
    wavelet::idwt_haar(&s).map(wrap).map_err(to_py)
}

/// One synthetic sample with its image, mask and box.
#[pyclass(name = "Sample", module = "wsscod")]
pub struct PySample {
    inner: data::SegSample,
}

#[pymethods]
impl PySample {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn image(&self) -> PyTensor {
        wrap(self.inner.image.clone())
    }

    #[getter]
    fn gt(&self) -> PyTensor {
        wrap(self.inner.gt.clone())
    }

    /// Inclusive `(x0, y0, x1, y1)`.
    #[getter]
    fn bbox(&self) -> (usize, usize, usize, usize) {
        let b = self.inner.bbox;
        (b.x0, b.y0, b.x1, b.y1)
    }
}

#[pyfunction]
#[pyo3(signature = (seed, size = 64, difficulty = 0.5))]
fn synth_camo(seed: u64, size: usize, difficulty: f64) -> PyResult<PySample> {
    data::synth_camo(seed, size, difficulty).map(|inner| PySample { inner }).map_err(to_py)
}

#[pyfunction]
fn inject_noise(gt: &PyTensor, rho: f64, seed: u64) -> PyResult<PyTensor> {
    data::inject_noise(&gt.inner, rho, seed).map(|l| wrap(l.mask)).map_err(to_py)
}

/// Writes a synthetic dataset and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out, count = 200, size = 64, seed = 2024, difficulty = 0.5))]
fn generate_dataset(out: PathBuf, count: usize, size: usize, seed: u64, difficulty: f64) -> PyResult<String> {
    let params = data::GeneratorParams {
        size,
        count,
        test_count: count / 4,
        difficulty,
    };
    let (m, s) = data::generate_dataset(seed, &params).map_err(to_py)?;
    let path = data::save_dataset(&m, &s, &out).map_err(to_py)?;
    Ok(path.display().to_string())
}

/// Metrics of one prediction as a dict: mae, e_phi, f_beta, s_alpha, iou, n_samples.
#[pyfunction]
fn evaluate_prediction(py: Python<'_>, p: &PyTensor, g: &PyTensor) -> PyResult<Py<PyAny>> {
    let r = MetricReport::single(&p.inner, &g.inner).map_err(to_py)?;
    json_to_py(py, &r.to_json())
}

fn json_to_py(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (text,))?.unbind())
}

/// Auxiliary (box-prompted) or primary (image-only) network.
#[pyclass(name = "Network", module = "wsscod")]
pub struct PyNetwork {
    inner: model::Network,
}

#[pymethods]
impl PyNetwork {
    /// `kind` is "anet" or "pnet"; `encoder` is "standard" or "desk".
    #[new]
    #[pyo3(signature = (kind, encoder = "standard", seed = 2024))]
    fn new(kind: &str, encoder: &str, seed: u64) -> PyResult<Self> {
        let kind = match kind {
            "anet" => NetKind::Anet,
            "pnet" => NetKind::Pnet,
            k => return Err(PyValueError::new_err(format!("unknown network kind `{k}`"))),
        };
        let config = match encoder {
            "standard" => EncoderConfig::default(),
            "desk" => EncoderConfig::desk(),
            e => return Err(PyValueError::new_err(format!("unknown encoder `{e}`"))),
        };
        model::Network::new(kind, config, seed).map(|inner| PyNetwork { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        model::load_checkpoint(&path).map(|inner| PyNetwork { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_checkpoint(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().name()
    }

    /// Main probability map for `image`; `bbox` is required for the auxiliary network.
    #[pyo3(signature = (image, bbox = None))]
    fn predict(&self, image: &PyTensor, bbox: Option<(usize, usize, usize, usize)>) -> PyResult<PyTensor> {
        let b = bbox.map(|(x0, y0, x1, y1)| BBox::new(x0, y0, x1, y1)).transpose().map_err(to_py)?;
        let preds = self.inner.predict(&image.inner, b.as_ref()).map_err(to_py)?;
        Ok(wrap(preds.main_prob()))
    }
}

/// Full protocol on a dataset directory; returns the summary as a dict.
#[pyfunction]
#[pyo3(signature = (data, out, preset = "F20", seed = 2024, epochs = None, switch_epoch = None, encoder = "standard", noise_rho = None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    data: PathBuf,
    out: PathBuf,
    preset: &str,
    seed: u64,
    epochs: Option<usize>,
    switch_epoch: Option<usize>,
    encoder: &str,
    noise_rho: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let preset: Preset = preset.parse().map_err(to_py)?;
    let mut cfg = ExperimentConfig::from_preset(&data, preset);
    if let Some(e) = epochs {
        cfg = cfg.with_epochs(e);
    }
    if let Some(s) = switch_epoch {
        cfg.loss.switch_epoch = s;
    }
    cfg.seed = seed;
    cfg.noise_override = noise_rho;
    cfg.encoder = match encoder {
        "standard" => EncoderConfig::default(),
        "desk" => EncoderConfig::desk(),
        e => return Err(PyValueError::new_err(format!("unknown encoder `{e}`"))),
    };
    cfg.validate().map_err(to_py)?;
    let bundle = py
        .detach(|| pipeline::run_wsscod(&cfg, &out, &mut |_| {}))
        .map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&bundle.summary).map_err(|e| PyValueError::new_err(e.to_string()))?)
}

#[pymodule]
#[pyo3(name = "wsscod")]
fn wsscod_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PySample>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(nc_loss, m)?)?;
    m.add_function(wrap_pyfunction!(nc_grad, m)?)?;
    m.add_function(wrap_pyfunction!(dwt_haar, m)?)?;
    m.add_function(wrap_pyfunction!(idwt_haar, m)?)?;
    m.add_function(wrap_pyfunction!(synth_camo, m)?)?;
    m.add_function(wrap_pyfunction!(inject_noise, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_prediction, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
