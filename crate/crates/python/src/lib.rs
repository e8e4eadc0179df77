//! Python bindings. Arrays cross the boundary through the buffer protocol, so
//! numpy arrays (strided views included) and `memoryview`s work without a
//! numpy dependency on the Rust side.

use mcbm::grid::{build_filtration, LabelGrid, LikelihoodGrid, MulticlassPrediction};
use mcbm::losses::{total_loss, LossConfig};
use mcbm::persistence::{compute_barcode, Dims};
use pyo3::buffer::PyBuffer;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: mcbm::Error) -> PyErr {
    if e.is_internal() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn shape_of<T>(buf: &PyBuffer<T>, what: &str, ndim: usize) -> PyResult<Vec<usize>> {
    if buf.dimensions() != ndim {
        return Err(PyValueError::new_err(format!(
            "{what} must be {ndim}D, got {}D",
            buf.dimensions()
        )));
    }
    Ok(buf.shape().to_vec())
}

/// Reads an f64 or f32 array of the given rank.
fn read_floats(py: Python<'_>, obj: &Bound<'_, PyAny>, what: &str, ndim: usize) -> PyResult<(Vec<usize>, Vec<f64>)> {
    if let Ok(buf) = PyBuffer::<f64>::get(obj) {
        let shape = shape_of(&buf, what, ndim)?;
        let mut v = vec![0.0; buf.item_count()];
        buf.copy_to_slice(py, &mut v)?;
        return Ok((shape, v));
    }
    let buf = PyBuffer::<f32>::get(obj)
        .map_err(|_| PyValueError::new_err(format!("{what} must be a float32 or float64 array")))?;
    let shape = shape_of(&buf, what, ndim)?;
    let mut v = vec![0.0f32; buf.item_count()];
    buf.copy_to_slice(py, &mut v)?;
    Ok((shape, v.into_iter().map(f64::from).collect()))
}

fn read_labels(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<LabelGrid> {
    let (shape, labels) = if let Ok(buf) = PyBuffer::<u8>::get(obj) {
        let shape = shape_of(&buf, "labels", 2)?;
        let mut v = vec![0u8; buf.item_count()];
        buf.copy_to_slice(py, &mut v)?;
        (shape, v.into_iter().map(u32::from).collect())
    } else {
        let buf = PyBuffer::<i64>::get(obj)
            .map_err(|_| PyValueError::new_err("labels must be a uint8 or int64 array"))?;
        let shape = shape_of(&buf, "labels", 2)?;
        let mut v = vec![0i64; buf.item_count()];
        buf.copy_to_slice(py, &mut v)?;
        let labels = v
            .into_iter()
            .map(|x| u32::try_from(x).map_err(|_| PyValueError::new_err(format!("invalid label {x}"))))
            .collect::<PyResult<Vec<u32>>>()?;
        (shape, labels)
    };
    LabelGrid::new(shape[1], shape[0], labels).map_err(to_py)
}

fn read_prediction(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<MulticlassPrediction> {
    let (shape, values) = read_floats(py, obj, "prediction", 3)?;
    MulticlassPrediction::new(shape[0], shape[2], shape[1], values).map_err(to_py)
}

/// Betti matching loss with a fixed configuration.
#[pyclass(module = "mcbm_py", frozen)]
struct BoundLossHandle {
    config: LossConfig,
}

#[pymethods]
impl BoundLossHandle {
    #[new]
    #[pyo3(signature = (
        alpha_max = 0.05, warmup = 0, total_steps = 1000, gamma_m = 1.0, gamma_u = 1.0,
        ignore_background = false, include_gt_unmatched = true, flip_filtration = false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        alpha_max: f64,
        warmup: u64,
        total_steps: u64,
        gamma_m: f64,
        gamma_u: f64,
        ignore_background: bool,
        include_gt_unmatched: bool,
        flip_filtration: bool,
    ) -> PyResult<Self> {
        let config = LossConfig {
            alpha_max,
            warmup_alpha: warmup,
            total_steps,
            gamma_matched: gamma_m,
            gamma_unmatched: gamma_u,
            ignore_background,
            include_gt_unmatched,
            filtration_flip: flip_filtration,
            ..Default::default()
        };
        config.validate().map_err(to_py)?;
        Ok(Self { config })
    }

    /// Loss of `pred` (classes, height, width) against `gt` (height, width).
    ///
    /// When `grad_out` is given it must be a writable float64 array shaped like
    /// `pred`; the gradient of the total is written into it.
    #[pyo3(signature = (pred, gt, step, grad_out = None))]
    fn loss_forward_backward<'py>(
        &self,
        py: Python<'py>,
        pred: &Bound<'py, PyAny>,
        gt: &Bound<'py, PyAny>,
        step: u64,
        grad_out: Option<&Bound<'py, PyAny>>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let pred = read_prediction(py, pred)?;
        let gt = read_labels(py, gt)?;
        let out = match grad_out {
            Some(obj) => {
                let buf = PyBuffer::<f64>::get(obj)
                    .map_err(|_| PyValueError::new_err("grad_out must be a float64 array"))?;
                if buf.readonly() {
                    return Err(PyValueError::new_err("grad_out is read-only"));
                }
                let shape = shape_of(&buf, "grad_out", 3)?;
                let (n, h, w) = pred.shape();
                if shape != [n, h, w] {
                    return Err(PyValueError::new_err(format!(
                        "grad_out has shape {shape:?}, expected [{n}, {h}, {w}]"
                    )));
                }
                Some(buf)
            }
            None => None,
        };
        let config = self.config.clone();
        let report = py.detach(move || total_loss(&pred, &gt, step, &config)).map_err(to_py)?;
        if let Some(buf) = out {
            buf.copy_from_slice(py, &report.gradient)?;
        }
        let d = PyDict::new(py);
        d.set_item("total", report.total)?;
        d.set_item("dice", report.dice_component)?;
        d.set_item("topo_matched", report.topo_matched)?;
        d.set_item("topo_unmatched", report.topo_unmatched)?;
        d.set_item("alpha", report.alpha)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let c = &self.config;
        format!(
            "BoundLossHandle(alpha_max={}, warmup={}, total_steps={}, gamma_m={}, gamma_u={})",
            c.alpha_max, c.warmup_alpha, c.total_steps, c.gamma_matched, c.gamma_unmatched
        )
    }
}

/// Evaluation metrics as a JSON string (same shape as `mcbm eval`'s result).
#[pyfunction]
fn evaluate(py: Python<'_>, pred: &Bound<'_, PyAny>, gt: &Bound<'_, PyAny>) -> PyResult<String> {
    let pred = read_prediction(py, pred)?;
    let gt = read_labels(py, gt)?;
    let report = py.detach(move || mcbm::metrics::evaluate(&pred, &gt)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Barcode of a (height, width) likelihood map as `(dim, birth, death)`
/// tuples; essential bars die at infinity.
#[pyfunction]
#[pyo3(signature = (likelihood, flip_filtration = false))]
fn barcode(py: Python<'_>, likelihood: &Bound<'_, PyAny>, flip_filtration: bool) -> PyResult<Vec<(u8, f64, f64)>> {
    let (shape, values) = read_floats(py, likelihood, "likelihood", 2)?;
    let grid = LikelihoodGrid::new(shape[1], shape[0], values).map_err(to_py)?;
    let config = LossConfig {
        filtration_flip: flip_filtration,
        ..Default::default()
    };
    let bc = compute_barcode(&build_filtration(&grid, config.direction()), Dims::BOTH);
    Ok(bc.bars().iter().map(|b| (b.dim, b.birth, b.death_key())).collect())
}

#[pymodule]
fn mcbm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BoundLossHandle>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(barcode, m)?)?;
    Ok(())
}
