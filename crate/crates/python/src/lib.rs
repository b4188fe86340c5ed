//! Python bindings for the `fptm` engine.
//!
//! The boundary is the serialized model and bit-dataset container formats:
//! training reads containers from disk, models move as model-file bytes, and
//! every operation goes through the same engine calls as the `fptm` CLI, so
//! equal inputs give byte-identical models and identical labels.

use std::path::PathBuf;

use fptm::booleanize::{Descriptor, TextBooleanizer};
use fptm::dataset::{fashion_mnist_paths, load_idx, load_imdb_dir};
use fptm::session::{self, ConfigOverrides};
use fptm::{BitDataset, BitSample, Error, FalseLiteralAction, Mode, Model as EngineModel, PackedModel};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(pyfptm, FptmError, PyException, "Base class for engine errors.");
create_exception!(pyfptm, ValidationError, FptmError, "Invalid configuration, argument or input width.");
create_exception!(pyfptm, FormatError, FptmError, "Unreadable, damaged or mismatched file contents.");
create_exception!(pyfptm, LifecycleError, FptmError, "Operation on a freed model handle.");

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::InvalidArgument(_)
        | Error::InvalidHyperparameters(_)
        | Error::WidthMismatch { .. }
        | Error::LabelOutOfRange { .. }
        | Error::Empty(_) => ValidationError::new_err(msg),
        Error::Io(_) => FptmError::new_err(msg),
        _ => FormatError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for fptm::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Reads a config dict with the same keys as the CLI `train` flags.
fn parse_config(config: &Bound<'_, PyDict>) -> PyResult<ConfigOverrides> {
    let mut o = ConfigOverrides::default();
    for (key, value) in config.iter() {
        let key: String = key.extract()?;
        if value.is_none() {
            continue;
        }
        match key.as_str() {
            "preset" => o.preset = Some(value.extract()?),
            "mode" => o.mode = Some(value.extract::<String>()?.parse::<Mode>().py_err()?),
            "clauses" => o.clauses = Some(value.extract()?),
            "t" => o.t = Some(value.extract()?),
            "s" => o.s = Some(value.extract()?),
            "l" => o.l = Some(value.extract()?),
            "lf" => o.lf = Some(value.extract()?),
            "epochs" => o.epochs = Some(value.extract()?),
            "seed" => o.seed = Some(value.extract()?),
            "threads" => o.threads = Some(value.extract()?),
            "false_literal_action" => {
                o.false_literal_action = Some(value.extract::<String>()?.parse::<FalseLiteralAction>().py_err()?)
            }
            "initial_state" => o.initial_state = Some(value.extract()?),
            other => return Err(ValidationError::new_err(format!("unknown config key `{other}`"))),
        }
    }
    Ok(o)
}

fn to_sample(row: &Bound<'_, PyAny>, width: usize) -> PyResult<BitSample> {
    let bits: Vec<bool> = match row.extract::<Vec<bool>>() {
        Ok(bits) => bits,
        Err(_) => row
            .extract::<Vec<i64>>()?
            .into_iter()
            .map(|v| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(ValidationError::new_err(format!("sample bits must be 0 or 1, got {v}"))),
            })
            .collect::<PyResult<_>>()?,
    };
    if bits.len() != width {
        return Err(to_py(Error::WidthMismatch { expected: width, actual: bits.len() }));
    }
    Ok(BitSample::from_bools(&bits))
}

struct Loaded {
    model: EngineModel,
    packed: PackedModel,
}

/// A trained or loaded model. Handles are bound to the creating thread;
/// after `free()` every operation raises `LifecycleError`.
#[pyclass(unsendable, module = "pyfptm")]
struct Model {
    inner: Option<Loaded>,
    reports: Vec<(usize, f64, Option<f64>, f64)>,
}

impl Model {
    fn wrap(model: EngineModel) -> Self {
        let packed = PackedModel::from_model(&model);
        Self {
            inner: Some(Loaded { model, packed }),
            reports: Vec::new(),
        }
    }

    fn get(&self) -> PyResult<&Loaded> {
        self.inner.as_ref().ok_or_else(|| LifecycleError::new_err("model handle has been freed"))
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self::wrap(EngineModel::load(path).py_err()?))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self::wrap(EngineModel::from_bytes(data).py_err()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.get()?.model.save(path).py_err()
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.get()?.model.to_bytes()))
    }

    /// Releases the engine model; later calls raise `LifecycleError`.
    fn free(&mut self) {
        self.inner = None;
    }

    #[getter]
    fn freed(&self) -> bool {
        self.inner.is_none()
    }

    #[getter]
    fn features(&self) -> PyResult<usize> {
        Ok(self.get()?.model.features())
    }

    #[getter]
    fn classes(&self) -> PyResult<usize> {
        Ok(self.get()?.model.classes())
    }

    #[getter]
    fn mode(&self) -> PyResult<String> {
        Ok(self.get()?.model.mode().to_string())
    }

    #[getter]
    fn hyperparameters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let h = *self.get()?.model.hyper();
        let d = PyDict::new(py);
        d.set_item("t", h.t)?;
        d.set_item("s", h.s)?;
        d.set_item("l", h.l)?;
        d.set_item("lf", h.lf)?;
        d.set_item("clauses", h.clauses_per_class)?;
        Ok(d)
    }

    #[getter]
    fn state_bytes(&self) -> PyResult<usize> {
        Ok(self.get()?.model.state_bytes())
    }

    /// Per-epoch `(epoch, train_accuracy, test_accuracy, seconds)` from
    /// `train`; empty for loaded models.
    #[getter]
    fn epoch_reports(&self) -> Vec<(usize, f64, Option<f64>, f64)> {
        self.reports.clone()
    }

    /// Predicts labels for rows of 0/1 values, each exactly `features` long.
    fn predict(&self, samples: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<u32>> {
        let m = self.get()?;
        samples
            .iter()
            .map(|row| {
                let x = to_sample(row, m.model.features())?;
                m.packed.predict(x.view()).map(|c| c as u32).py_err()
            })
            .collect()
    }

    fn class_sums(&self, sample: Bound<'_, PyAny>) -> PyResult<Vec<i64>> {
        let m = self.get()?;
        let x = to_sample(&sample, m.model.features())?;
        m.packed.class_sums(x.view()).py_err()
    }

    /// Labels for every sample of a bit-dataset container file.
    #[pyo3(signature = (path, threads = 1))]
    fn predict_file(&self, path: PathBuf, threads: usize) -> PyResult<Vec<u32>> {
        let data = BitDataset::read_container(path).py_err()?;
        self.get()?.packed.predict_batch(&data, threads).py_err()
    }

    /// Accuracy on a bit-dataset container file.
    #[pyo3(signature = (path, threads = 1))]
    fn evaluate(&self, path: PathBuf, threads: usize) -> PyResult<f64> {
        let data = BitDataset::read_container(path).py_err()?;
        self.get()?.packed.accuracy(&data, threads).py_err()
    }

    /// Booleanizes raw documents with the embedded text descriptor.
    fn predict_text(&self, documents: Vec<String>) -> PyResult<Vec<u32>> {
        let m = self.get()?;
        let Descriptor::Text(t) = &m.model.descriptor else {
            return Err(ValidationError::new_err("model has no text booleanizer"));
        };
        documents
            .iter()
            .map(|d| m.packed.predict(t.transform(d).view()).map(|c| c as u32).py_err())
            .collect()
    }

    /// Booleanizes row-major 8-bit images with the embedded image descriptor.
    fn predict_images(&self, images: Vec<Vec<u8>>) -> PyResult<Vec<u32>> {
        let m = self.get()?;
        let Descriptor::Image(b) = &m.model.descriptor else {
            return Err(ValidationError::new_err("model has no image booleanizer"));
        };
        images
            .iter()
            .map(|img| {
                let x = b.transform(img).py_err()?;
                m.packed.predict(x.view()).map(|c| c as u32).py_err()
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        match &self.inner {
            Some(m) => format!(
                "Model(mode={}, features={}, classes={})",
                m.model.mode(),
                m.model.features(),
                m.model.classes()
            ),
            None => "Model(<freed>)".to_owned(),
        }
    }
}

/// Trains on a bit-dataset container. `config` takes the CLI `train` flag
/// names (`preset`, `mode`, `clauses`, `t`, `s`, `l`, `lf`, `epochs`, `seed`,
/// `threads`, `false_literal_action`, `initial_state`).
#[pyfunction]
#[pyo3(signature = (config, train, test = None, descriptor = None))]
fn train(
    config: &Bound<'_, PyDict>,
    train: PathBuf,
    test: Option<PathBuf>,
    descriptor: Option<PathBuf>,
) -> PyResult<Model> {
    let config = parse_config(config)?.resolve().py_err()?;
    let train = BitDataset::read_container(train).py_err()?;
    let test = test.map(BitDataset::read_container).transpose().py_err()?;
    let descriptor = descriptor.map(Descriptor::load).transpose().py_err()?.unwrap_or_default();
    let (model, reports) = session::train(&config, &train, test.as_ref(), descriptor, |_| {}).py_err()?;
    let mut handle = Model::wrap(model);
    handle.reports = reports.iter().map(|r| (r.epoch, r.train_accuracy, r.test_accuracy, r.wall_time)).collect();
    Ok(handle)
}

/// Writes rows of 0/1 values and their labels as a bit-dataset container.
#[pyfunction]
fn write_dataset(path: PathBuf, samples: Vec<Bound<'_, PyAny>>, labels: Vec<u32>, features: usize, classes: usize) -> PyResult<()> {
    if samples.len() != labels.len() {
        return Err(ValidationError::new_err(format!(
            "{} samples but {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let mut data = BitDataset::new(features, classes);
    for (row, &label) in samples.iter().zip(&labels) {
        data.push(to_sample(row, features)?.view(), label).py_err()?;
    }
    data.write_container(path).py_err()
}

/// Reads a bit-dataset container as `(rows of bools, labels)`.
#[pyfunction]
fn read_dataset(path: PathBuf) -> PyResult<(Vec<Vec<bool>>, Vec<u32>)> {
    let data = BitDataset::read_container(path).py_err()?;
    let rows = (0..data.len()).map(|i| data.sample(i).to_owned().to_bools()).collect();
    Ok((rows, data.labels().to_vec()))
}

/// Fits a text booleanizer on an IMDb-layout directory and writes the
/// train/test containers and the descriptor. Returns the feature count.
#[pyfunction]
#[pyo3(signature = (imdb_dir, train_out, words, ngram, features, test_out = None, descriptor_out = None))]
#[allow(clippy::too_many_arguments)]
fn booleanize_text(
    imdb_dir: PathBuf,
    train_out: PathBuf,
    words: usize,
    ngram: usize,
    features: usize,
    test_out: Option<PathBuf>,
    descriptor_out: Option<PathBuf>,
) -> PyResult<usize> {
    let corpus = load_imdb_dir(imdb_dir).py_err()?;
    let (descriptor, train, test) =
        session::booleanize_text(&corpus.train, Some(&corpus.test), words, ngram, features).py_err()?;
    write_outputs(&descriptor, &train, test.as_ref(), train_out, test_out, descriptor_out)
}

/// Fits an image booleanizer on a Fashion-MNIST IDX directory and writes
/// the containers and descriptor. Returns the feature count.
#[pyfunction]
#[pyo3(signature = (fmnist_dir, train_out, bits_per_map = 4, test_out = None, descriptor_out = None))]
fn booleanize_images(
    fmnist_dir: PathBuf,
    train_out: PathBuf,
    bits_per_map: usize,
    test_out: Option<PathBuf>,
    descriptor_out: Option<PathBuf>,
) -> PyResult<usize> {
    let (img, lab) = fashion_mnist_paths(&fmnist_dir, "train").py_err()?;
    let train = load_idx(img, lab).py_err()?;
    let test = match fashion_mnist_paths(&fmnist_dir, "test") {
        Ok((img, lab)) => Some(load_idx(img, lab).py_err()?),
        Err(_) if test_out.is_none() => None,
        Err(e) => return Err(to_py(e)),
    };
    let (descriptor, train, test) = session::booleanize_images(&train, test.as_ref(), bits_per_map).py_err()?;
    write_outputs(&descriptor, &train, test.as_ref(), train_out, test_out, descriptor_out)
}

fn write_outputs(
    descriptor: &Descriptor,
    train: &BitDataset,
    test: Option<&BitDataset>,
    train_out: PathBuf,
    test_out: Option<PathBuf>,
    descriptor_out: Option<PathBuf>,
) -> PyResult<usize> {
    train.write_container(train_out).py_err()?;
    if let (Some(path), Some(test)) = (test_out, test) {
        test.write_container(path).py_err()?;
    }
    if let Some(path) = descriptor_out {
        descriptor.save(path).py_err()?;
    }
    Ok(train.features())
}

/// A fitted booleanizer loaded from a descriptor file.
#[pyclass(unsendable, module = "pyfptm")]
struct Booleanizer {
    descriptor: Descriptor,
}

#[pymethods]
impl Booleanizer {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { descriptor: Descriptor::load(path).py_err()? })
    }

    /// Fits a text booleanizer on in-memory documents.
    #[staticmethod]
    fn fit_text(documents: Vec<String>, words: usize, ngram: usize, features: usize) -> PyResult<Self> {
        let t = TextBooleanizer::fit(&documents, words, ngram, features).py_err()?;
        Ok(Self { descriptor: Descriptor::Text(t) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.descriptor.save(path).py_err()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.descriptor {
            Descriptor::Text(_) => "text",
            Descriptor::Image(_) => "image",
            Descriptor::None => "none",
        }
    }

    #[getter]
    fn features(&self) -> Option<usize> {
        self.descriptor.feature_count()
    }

    fn transform_text(&self, document: &str) -> PyResult<Vec<bool>> {
        match &self.descriptor {
            Descriptor::Text(t) => Ok(t.transform(document).to_bools()),
            _ => Err(ValidationError::new_err("not a text booleanizer")),
        }
    }

    fn transform_image(&self, pixels: Vec<u8>) -> PyResult<Vec<bool>> {
        match &self.descriptor {
            Descriptor::Image(b) => Ok(b.transform(&pixels).py_err()?.to_bools()),
            _ => Err(ValidationError::new_err("not an image booleanizer")),
        }
    }
}

/// Suggested `(T, (T_low, T_high), notes)` for a clause count and `LF`.
#[pyfunction]
fn suggest(mode: &str, clauses: u32, lf: u32) -> PyResult<(u32, (f64, f64), Vec<String>)> {
    let s = fptm::suggest_t(clauses, lf, mode.parse().py_err()?).py_err()?;
    Ok((s.t, s.t_range, s.notes))
}

#[pymodule]
pub fn pyfptm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("FptmError", py.get_type::<FptmError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("FormatError", py.get_type::<FormatError>())?;
    m.add("LifecycleError", py.get_type::<LifecycleError>())?;
    m.add("PRESETS", fptm::presets::names().collect::<Vec<_>>())?;
    m.add_class::<Model>()?;
    m.add_class::<Booleanizer>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(write_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(read_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(booleanize_text, m)?)?;
    m.add_function(wrap_pyfunction!(booleanize_images, m)?)?;
    m.add_function(wrap_pyfunction!(suggest, m)?)?;
    Ok(())
}
