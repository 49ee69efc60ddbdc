//! Python bindings. Images cross the boundary as `Tensor` objects built
//! from a shape and a flat row-major list of floats.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use percep::distance::{baseline_l2, baseline_ssim, ImageMetric, MetricConfig, Weighting};
use percep::eval::{self as ev, Manifest, Protocol};
use percep::perception::{self as pc, ChannelSubset, ContrastSensitivity, CsfModel, SelectMode, SubsetKind};
use percep::stimuli::{self as st, StimulusGrid, ViewingGeometry};

fn err(e: percep::Error) -> PyErr {
    match e {
        percep::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Dense float32 tensor, usually `[C, H, W]`.
#[pyclass(name = "Tensor", frozen)]
struct PyTensor(percep::Tensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f32>) -> PyResult<Self> {
        percep::Tensor::new(shape, data).map(PyTensor).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    /// Flat row-major values.
    #[getter]
    fn data(&self) -> Vec<f32> {
        self.0.data().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.0.shape())
    }
}

/// A linked network: manifest plus weights.
#[pyclass(name = "Model", frozen)]
struct PyModel(Arc<percep::NetworkModel>);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(manifest: PathBuf, weights: PathBuf) -> PyResult<Self> {
        percep::model_io::load_model(manifest, weights)
            .map(|m| PyModel(Arc::new(m)))
            .map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn taps(&self) -> Vec<String> {
        self.0.tap_names()
    }

    fn forward(&self, py: Python<'_>, image: &PyTensor, tap: &str) -> PyResult<PyTensor> {
        let model = self.0.clone();
        let image = image.0.clone();
        py.detach(move || model.forward_tap(&image, tap))
            .map(PyTensor)
            .map_err(err)
    }

    /// Scores every channel of `tap`; returns one dict per channel with
    /// `channel`, `mu1`, `mu2`, `pe` and `rank`.
    #[pyo3(signature = (tap, ppd = 32.0, contrast = 1.0))]
    fn probe<'py>(&self, py: Python<'py>, tap: &str, ppd: f64, contrast: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let model = self.0.clone();
        let scores = py
            .detach(move || {
                let input = model.input();
                let mut grid = StimulusGrid::with_size(input.channels, input.height, input.width);
                grid.geometry = ViewingGeometry::new(ppd)?;
                grid.contrast = contrast;
                pc::probe_layer(&model, tap, &grid, &CsfModel::default())
            })
            .map_err(err)?;
        scores
            .scores
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("channel", s.channel)?;
                d.set_item("mu1", s.mu1)?;
                d.set_item("mu2", s.mu2)?;
                d.set_item("pe", s.pe)?;
                d.set_item("rank", s.rank)?;
                Ok(d)
            })
            .collect()
    }
}

/// Writes the fixture network; returns `(manifest_path, weights_path)`.
#[pyfunction]
fn gen_fixture(seed: u64, out_dir: PathBuf) -> PyResult<(PathBuf, PathBuf)> {
    let files = percep::model_io::gen_fixture(seed, out_dir).map_err(err)?;
    Ok((files.manifest, files.weights))
}

/// Writes synthetic blur datasets; returns `(qa, jnd, afc)` manifest paths.
#[pyfunction]
fn write_blur_datasets(out_dir: PathBuf, seed: u64) -> PyResult<(PathBuf, PathBuf, PathBuf)> {
    let d = ev::write_blur_datasets(out_dir, seed).map_err(err)?;
    Ok((d.qa, d.jnd, d.afc))
}

fn grid(size: usize, ppd: f64, contrast: f64) -> PyResult<StimulusGrid> {
    let mut g = StimulusGrid::with_size(1, size, size);
    g.geometry = ViewingGeometry::new(ppd).map_err(err)?;
    g.contrast = contrast;
    Ok(g)
}

#[pyfunction]
#[pyo3(signature = (cpd, size, ppd = 32.0, contrast = 1.0))]
fn radial_grating(cpd: f64, size: usize, ppd: f64, contrast: f64) -> PyResult<PyTensor> {
    st::radial_grating(cpd, &grid(size, ppd, contrast)?).map(PyTensor).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (theta, cpd, size, ppd = 32.0, contrast = 1.0))]
fn oriented_grating(theta: f64, cpd: f64, size: usize, ppd: f64, contrast: f64) -> PyResult<PyTensor> {
    st::oriented_grating(theta, cpd, &grid(size, ppd, contrast)?).map(PyTensor).map_err(err)
}

/// Contrast sensitivity at `cpd` cycles per degree.
#[pyfunction]
fn csf(cpd: f64) -> PyResult<f64> {
    CsfModel::default().sensitivity(cpd).map_err(err)
}

#[pyfunction]
fn mu1(curve: Vec<f64>, frequencies: Vec<f64>) -> PyResult<f64> {
    pc::mu1(&curve, &CsfModel::default(), &frequencies).map_err(err)
}

#[pyfunction]
fn mu2(curve: Vec<f64>) -> PyResult<f64> {
    pc::mu2(&curve).map_err(err)
}

#[pyfunction]
fn perceptual_efficacy(mu1: Vec<f64>, mu2: Vec<f64>) -> PyResult<Vec<f64>> {
    pc::perceptual_efficacy("layer", &mu1, &mu2).map_err(err)
}

fn parse_mode(mode: &str) -> PyResult<SelectMode> {
    match mode {
        "high" => Ok(SelectMode::High),
        "low" => Ok(SelectMode::Low),
        _ => Err(PyValueError::new_err(format!("mode must be 'high' or 'low', got '{mode}'"))),
    }
}

/// Sorted channel indices of the top (`high`) or bottom (`low`) `percent`% by PE.
#[pyfunction]
fn select_subset(pe: Vec<f64>, mode: &str, percent: f64) -> PyResult<Vec<usize>> {
    pc::select_subset("layer", &pe, parse_mode(mode)?, percent)
        .map(|s| s.channels)
        .map_err(err)
}

#[pyfunction]
fn srocc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    ev::srocc(&x, &y).map_err(err)
}

#[pyfunction]
fn lcc(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    ev::lcc(&x, &y).map_err(err)
}

#[pyfunction]
fn rmse(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    ev::rmse(&x, &y).map_err(err)
}

/// Best-threshold JND accuracy in percent; returns `(score, threshold)`.
#[pyfunction]
fn jnd_accuracy(distances: Vec<f64>, different: Vec<bool>) -> PyResult<(f64, f64)> {
    ev::best_threshold_accuracy(&distances, &different).map_err(err)
}

/// Mean 2AFC credit given distances of image 1 and image 2 to the reference.
#[pyfunction]
fn afc_score(d1: Vec<f64>, d2: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    ev::mean_afc_credit(&d1, &d2, &p).map_err(err)
}

#[pyfunction]
fn decode_image(path: PathBuf) -> PyResult<PyTensor> {
    ev::decode_image(path).map(PyTensor).map_err(err)
}

#[pyfunction]
fn l2(a: &PyTensor, b: &PyTensor) -> PyResult<f64> {
    baseline_l2(&a.0, &b.0).map_err(err)
}

#[pyfunction]
fn ssim(a: &PyTensor, b: &PyTensor) -> PyResult<f64> {
    baseline_ssim(&a.0, &b.0).map_err(err)
}

/// Feature-space distance restricted to a channel subset.
#[pyclass(name = "Metric", frozen)]
struct PyMetric(MetricConfig);

#[pymethods]
impl PyMetric {
    /// `channels=None` uses every channel. Passing `pe` (aligned with
    /// `channels`) with `weighting="pe-proportional"` weights channels by PE.
    #[new]
    #[pyo3(signature = (model, tap, channels = None, pe = None, weighting = "uniform"))]
    fn new(
        model: &PyModel,
        tap: &str,
        channels: Option<Vec<usize>>,
        pe: Option<Vec<f64>>,
        weighting: &str,
    ) -> PyResult<Self> {
        let input = model.0.input();
        let [width, _, _] = model.0.tap_shape(tap, input.height, input.width).map_err(err)?;
        let weighting = match weighting {
            "uniform" => Weighting::Uniform,
            "pe-proportional" => Weighting::PeProportional,
            w => return Err(PyValueError::new_err(format!("unknown weighting '{w}'"))),
        };
        let subset = match channels {
            None => ChannelSubset { pe, ..ChannelSubset::full(tap, width) },
            Some(channels) => ChannelSubset {
                layer: tap.to_string(),
                layer_width: width,
                kind: SubsetKind::High {
                    percent: 100.0 * channels.len() as f64 / width as f64,
                },
                channels,
                pe,
            },
        };
        MetricConfig::new(model.0.clone(), tap, subset, weighting)
            .map(PyMetric)
            .map_err(err)
    }

    fn distance(&self, py: Python<'_>, a: &PyTensor, b: &PyTensor) -> PyResult<f64> {
        let (a, b) = (a.0.clone(), b.0.clone());
        py.detach(|| self.0.perceptual_distance(&a, &b)).map_err(err)
    }

    /// Runs a protocol (`qa`, `jnd` or `2afc`) on a CSV manifest and returns
    /// the headline statistics as a dict.
    fn evaluate<'py>(&self, py: Python<'py>, manifest: PathBuf, protocol: &str) -> PyResult<Bound<'py, PyDict>> {
        let protocol: Protocol = protocol.parse().map_err(err)?;
        let manifest = ev::load_manifest(manifest, protocol).map_err(err)?;
        let metric: &dyn ImageMetric = &self.0;
        let d = PyDict::new(py);
        match &manifest {
            Manifest::Qa(r) => {
                let r = py.detach(|| ev::qa_test(metric, r)).map_err(err)?;
                d.set_item("srocc", r.statistics.srocc)?;
                d.set_item("lcc", r.statistics.lcc)?;
                d.set_item("rmse", r.statistics.rmse)?;
                d.set_item("distances", r.distances)?;
            }
            Manifest::Jnd(r) => {
                let r = py.detach(|| ev::jnd_score(metric, r)).map_err(err)?;
                d.set_item("score", r.score)?;
                d.set_item("threshold", r.threshold)?;
            }
            Manifest::Afc(r) => {
                let r = py.detach(|| ev::afc_score(metric, r)).map_err(err)?;
                d.set_item("score", r.score)?;
            }
        }
        d.set_item("records", manifest.len())?;
        Ok(d)
    }
}

#[pymodule]
#[pyo3(name = "percep")]
fn percep_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyMetric>()?;
    m.add_function(wrap_pyfunction!(gen_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(write_blur_datasets, m)?)?;
    m.add_function(wrap_pyfunction!(radial_grating, m)?)?;
    m.add_function(wrap_pyfunction!(oriented_grating, m)?)?;
    m.add_function(wrap_pyfunction!(csf, m)?)?;
    m.add_function(wrap_pyfunction!(mu1, m)?)?;
    m.add_function(wrap_pyfunction!(mu2, m)?)?;
    m.add_function(wrap_pyfunction!(perceptual_efficacy, m)?)?;
    m.add_function(wrap_pyfunction!(select_subset, m)?)?;
    m.add_function(wrap_pyfunction!(srocc, m)?)?;
    m.add_function(wrap_pyfunction!(lcc, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(jnd_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(afc_score, m)?)?;
    m.add_function(wrap_pyfunction!(decode_image, m)?)?;
    m.add_function(wrap_pyfunction!(l2, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    Ok(())
}
