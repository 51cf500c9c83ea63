//! C ABI over the survival-embedding library: opaque handles for
//! datasets, trained models, and embedding bundles; status codes for
//! every fallible call; a thread-local message for the last failure; and
//! JSON strings for structured results that have no natural flat layout.
//!
//! Every `sa_*` function is safe to call from C as documented in the
//! generated `include/survanchor.h`. Handles are created and destroyed
//! only through this interface, output parameters are written only when
//! the call returns `SA_STATUS_OK`, and strings returned through
//! `char **` outputs must be released with `sa_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use serde::Deserialize;

use survanchor::anchors::{center_of_mass, cluster_anchor, project};
use survanchor::clusterlib::{fit_mixture, EmOptions, MixtureKind};
use survanchor::coxnet::bundle::{export_bundle, import_bundle, EmbeddingBundle};
use survanchor::coxnet::{train_model, TrainConfig, TrainedModel};
use survanchor::data::{
    generate_synthetic, load_csv, make_splits, CsvSpec, FeatureKind, SurvivalDataset,
    SyntheticSpec, DEFAULT_CLASS_MEANS,
};
use survanchor::survstats::{concordance_index, logrank_test};

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaStatus {
    /// The call succeeded and all output parameters are filled in.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// An argument value was rejected; see `sa_last_error`.
    InvalidArgument = 3,
    /// Reading or writing a file failed.
    IoError = 4,
    /// A numerical routine failed; see `sa_last_error`.
    NumericError = 5,
    /// The library panicked internally; state may be inconsistent.
    Panic = 6,
}

/// Survival dataset handle: feature matrix, ids, times, and event flags.
pub struct SaDataset {
    inner: SurvivalDataset,
}

/// Trained survival model handle: network, standardizer, and baseline
/// hazard.
pub struct SaModel {
    inner: TrainedModel,
}

/// Embedding bundle handle: unit embeddings with row ids and optional
/// survival labels.
pub struct SaBundle {
    inner: EmbeddingBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn fail(status: SaStatus, message: impl std::fmt::Display) -> SaStatus {
    set_error(&message.to_string());
    status
}

/// Runs `body` with panics converted to `SA_STATUS_PANIC` so unwinding
/// never crosses the language boundary.
fn guarded(body: impl FnOnce() -> SaStatus) -> SaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "internal panic".to_string());
            fail(SaStatus::Panic, format!("internal panic: {message}"))
        }
    }
}

unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, SaStatus> {
    if ptr.is_null() {
        return Err(fail(SaStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(SaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn required_slice<'a, T>(
    ptr: *const T,
    len: usize,
    name: &str,
) -> Result<&'a [T], SaStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(fail(SaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn required_ref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, SaStatus> {
    if ptr.is_null() {
        return Err(fail(SaStatus::NullPointer, format!("{name} is null")));
    }
    Ok(&*ptr)
}

fn emit_string(out: *mut *mut c_char, value: String) -> SaStatus {
    let sanitized: String = value.chars().filter(|&c| c != '\0').collect();
    let c = CString::new(sanitized).unwrap();
    unsafe { *out = c.into_raw() };
    SaStatus::Ok
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn sa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; never
/// freed by the caller.
#[no_mangle]
pub extern "C" fn sa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned through a `char **` output parameter.
#[no_mangle]
pub unsafe extern "C" fn sa_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}

// ---------------------------------------------------------------------------
// Datasets.

/// Generates the synthetic benchmark dataset: `groups` risk groups with
/// distinct mean survival times, Gaussian feature clouds in `dim`
/// dimensions, and uniform right-censoring. `groups` must be between 1
/// and 10.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_synthetic(
    n: usize,
    groups: usize,
    dim: usize,
    time_variance: f64,
    center_radius: f64,
    feature_spread: f64,
    censor_quantile: f64,
    seed: u64,
    out_dataset: *mut *mut SaDataset,
) -> SaStatus {
    guarded(|| {
        if out_dataset.is_null() {
            return fail(SaStatus::NullPointer, "out_dataset is null");
        }
        if groups == 0 || groups > DEFAULT_CLASS_MEANS.len() {
            return fail(
                SaStatus::InvalidArgument,
                format!("groups must be in 1..={}", DEFAULT_CLASS_MEANS.len()),
            );
        }
        let spec = SyntheticSpec {
            n,
            dim,
            class_means: DEFAULT_CLASS_MEANS[..groups].to_vec(),
            time_variance,
            center_radius,
            feature_spread,
            censor_quantile,
            seed,
        };
        match generate_synthetic(&spec) {
            Ok((dataset, _)) => {
                *out_dataset = Box::into_raw(Box::new(SaDataset { inner: dataset }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::InvalidArgument, e),
        }
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvSpecJson {
    time_column: String,
    event_column: String,
    #[serde(default)]
    id_column: Option<String>,
    /// Pairs of column name and kind: "continuous", "ordinal",
    /// "categorical", or "indicator".
    features: Vec<(String, String)>,
}

/// Loads a survival dataset from a CSV file. `spec_json` describes the
/// columns, e.g. `{"time_column":"time","event_column":"event",
/// "id_column":"id","features":[["age","continuous"],["sex","indicator"]]}`.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_from_csv(
    path: *const c_char,
    spec_json: *const c_char,
    out_dataset: *mut *mut SaDataset,
) -> SaStatus {
    guarded(|| {
        if out_dataset.is_null() {
            return fail(SaStatus::NullPointer, "out_dataset is null");
        }
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let raw = match required_str(spec_json, "spec_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let parsed: CsvSpecJson = match serde_json::from_str(raw) {
            Ok(p) => p,
            Err(e) => return fail(SaStatus::InvalidArgument, format!("spec_json: {e}")),
        };
        let mut features = Vec::with_capacity(parsed.features.len());
        for (name, kind) in parsed.features {
            match kind.parse::<FeatureKind>() {
                Ok(k) => features.push((name, k)),
                Err(e) => return fail(SaStatus::InvalidArgument, e),
            }
        }
        let spec = CsvSpec {
            time_column: parsed.time_column,
            event_column: parsed.event_column,
            id_column: parsed.id_column,
            features,
        };
        match load_csv(Path::new(path), &spec) {
            Ok(dataset) => {
                *out_dataset = Box::into_raw(Box::new(SaDataset { inner: dataset }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::IoError, e),
        }
    })
}

/// Number of rows in the dataset; 0 when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_rows(dataset: *const SaDataset) -> usize {
    if dataset.is_null() {
        0
    } else {
        (*dataset).inner.n
    }
}

/// Number of feature columns in the dataset; 0 when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_dim(dataset: *const SaDataset) -> usize {
    if dataset.is_null() {
        0
    } else {
        (*dataset).inner.dim
    }
}

/// Releases a dataset handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sa_dataset_free(dataset: *mut SaDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

// ---------------------------------------------------------------------------
// Training and models.

/// Default split fractions: training, validation, anchor estimation,
/// visualization.
const DEFAULT_FRACTIONS: [f64; 4] = [0.56, 0.14, 0.08, 0.22];

/// Trains a survival model on the dataset, splitting rows internally.
///
/// `config_json`, when non-null, is the full training configuration:
/// `{"batch_sizes":[64],"learning_rates":[0.01],"layer_counts":[2],
/// "embed_dims":[6],"max_epochs":100,"patience":10,
/// "final_activation":"unit_norm","seed":0}`; every listed combination is
/// tried and the best validation concordance wins. When null, a small
/// default grid with the given `seed` is used (the `seed` argument is
/// ignored otherwise). `fractions`, when non-null, must point at 4 values
/// summing to 1.
#[no_mangle]
pub unsafe extern "C" fn sa_train(
    dataset: *const SaDataset,
    config_json: *const c_char,
    fractions: *const f64,
    seed: u64,
    out_model: *mut *mut SaModel,
) -> SaStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(SaStatus::NullPointer, "out_model is null");
        }
        let dataset = match required_ref(dataset, "dataset") {
            Ok(d) => d,
            Err(status) => return status,
        };
        let config: TrainConfig = if config_json.is_null() {
            TrainConfig {
                batch_sizes: vec![64],
                learning_rates: vec![0.01],
                layer_counts: vec![2],
                embed_dims: vec![dataset.inner.dim.max(2)],
                max_epochs: 50,
                patience: 10,
                final_activation: survanchor::coxnet::mlp::FinalActivation::UnitNorm,
                seed,
            }
        } else {
            let raw = match required_str(config_json, "config_json") {
                Ok(s) => s,
                Err(status) => return status,
            };
            match serde_json::from_str(raw) {
                Ok(c) => c,
                Err(e) => return fail(SaStatus::InvalidArgument, format!("config_json: {e}")),
            }
        };
        let fracs = if fractions.is_null() {
            DEFAULT_FRACTIONS
        } else {
            let s = std::slice::from_raw_parts(fractions, 4);
            [s[0], s[1], s[2], s[3]]
        };
        let plan = match make_splits(dataset.inner.n, fracs, config.seed) {
            Ok(p) => p,
            Err(e) => return fail(SaStatus::InvalidArgument, e),
        };
        match train_model(&dataset.inner, &plan, &config) {
            Ok(output) => {
                *out_model = Box::into_raw(Box::new(SaModel {
                    inner: output.model,
                }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::NumericError, e),
        }
    })
}

/// Writes the model as JSON to `path`.
#[no_mangle]
pub unsafe extern "C" fn sa_model_save(model: *const SaModel, path: *const c_char) -> SaStatus {
    guarded(|| {
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match model.inner.save(Path::new(path)) {
            Ok(()) => SaStatus::Ok,
            Err(e) => fail(SaStatus::IoError, e),
        }
    })
}

/// Loads a model previously written by `sa_model_save`.
#[no_mangle]
pub unsafe extern "C" fn sa_model_load(
    path: *const c_char,
    out_model: *mut *mut SaModel,
) -> SaStatus {
    guarded(|| {
        if out_model.is_null() {
            return fail(SaStatus::NullPointer, "out_model is null");
        }
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match TrainedModel::load(Path::new(path)) {
            Ok(model) => {
                *out_model = Box::into_raw(Box::new(SaModel { inner: model }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::IoError, e),
        }
    })
}

/// Width of the embedding the model produces; 0 when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_model_embed_dim(model: *const SaModel) -> usize {
    if model.is_null() {
        0
    } else {
        (*model).inner.mlp.embed_dim
    }
}

/// Concordance index the selected configuration reached on the validation
/// split; NaN when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_model_val_concordance(model: *const SaModel) -> f64 {
    if model.is_null() {
        f64::NAN
    } else {
        (*model).inner.val_concordance
    }
}

/// Risk score of one feature row (higher means shorter expected
/// survival). `row` must hold exactly the dataset's feature count in
/// schema order.
#[no_mangle]
pub unsafe extern "C" fn sa_model_score(
    model: *const SaModel,
    row: *const f64,
    len: usize,
    out_score: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_score.is_null() {
            return fail(SaStatus::NullPointer, "out_score is null");
        }
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let row = match required_slice(row, len, "row") {
            Ok(r) => r,
            Err(status) => return status,
        };
        if row.len() != model.inner.standardizer.means.len() {
            return fail(
                SaStatus::InvalidArgument,
                format!(
                    "row has {} values, model expects {}",
                    row.len(),
                    model.inner.standardizer.means.len()
                ),
            );
        }
        *out_score = model.inner.score_row(row);
        SaStatus::Ok
    })
}

/// Embedding of one feature row. `out_embedding` must hold
/// `sa_model_embed_dim(model)` values.
#[no_mangle]
pub unsafe extern "C" fn sa_model_embed(
    model: *const SaModel,
    row: *const f64,
    len: usize,
    out_embedding: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_embedding.is_null() {
            return fail(SaStatus::NullPointer, "out_embedding is null");
        }
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let row = match required_slice(row, len, "row") {
            Ok(r) => r,
            Err(status) => return status,
        };
        if row.len() != model.inner.standardizer.means.len() {
            return fail(
                SaStatus::InvalidArgument,
                format!(
                    "row has {} values, model expects {}",
                    row.len(),
                    model.inner.standardizer.means.len()
                ),
            );
        }
        let embedding = model.inner.encode_row(row);
        std::ptr::copy_nonoverlapping(embedding.as_ptr(), out_embedding, embedding.len());
        SaStatus::Ok
    })
}

/// Encodes dataset rows into an embedding bundle. `rows`, when non-null,
/// lists row indices to include; when null, every row is encoded.
/// `source` labels where the rows came from.
#[no_mangle]
pub unsafe extern "C" fn sa_model_bundle(
    model: *const SaModel,
    dataset: *const SaDataset,
    rows: *const usize,
    n_rows: usize,
    source: *const c_char,
    out_bundle: *mut *mut SaBundle,
) -> SaStatus {
    guarded(|| {
        if out_bundle.is_null() {
            return fail(SaStatus::NullPointer, "out_bundle is null");
        }
        let model = match required_ref(model, "model") {
            Ok(m) => m,
            Err(status) => return status,
        };
        let dataset = match required_ref(dataset, "dataset") {
            Ok(d) => d,
            Err(status) => return status,
        };
        let source = match required_str(source, "source") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let selected: Vec<usize> = if rows.is_null() {
            (0..dataset.inner.n).collect()
        } else {
            std::slice::from_raw_parts(rows, n_rows).to_vec()
        };
        if let Some(&bad) = selected.iter().find(|&&i| i >= dataset.inner.n) {
            return fail(
                SaStatus::InvalidArgument,
                format!("row index {bad} out of range for {} rows", dataset.inner.n),
            );
        }
        if row_dim_mismatch(model, dataset) {
            return fail(
                SaStatus::InvalidArgument,
                format!(
                    "dataset has {} features, model expects {}",
                    dataset.inner.dim,
                    model.inner.standardizer.means.len()
                ),
            );
        }
        let bundle = model.inner.build_bundle(&dataset.inner, &selected, source);
        *out_bundle = Box::into_raw(Box::new(SaBundle { inner: bundle }));
        SaStatus::Ok
    })
}

fn row_dim_mismatch(model: &SaModel, dataset: &SaDataset) -> bool {
    dataset.inner.dim != model.inner.standardizer.means.len()
}

/// Releases a model handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sa_model_free(model: *mut SaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// Bundles.

/// Writes the bundle as JSON to `path`.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_export(
    bundle: *const SaBundle,
    path: *const c_char,
) -> SaStatus {
    guarded(|| {
        let bundle = match required_ref(bundle, "bundle") {
            Ok(b) => b,
            Err(status) => return status,
        };
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match export_bundle(&bundle.inner, Path::new(path)) {
            Ok(()) => SaStatus::Ok,
            Err(e) => fail(SaStatus::IoError, e),
        }
    })
}

/// Loads a bundle previously written by `sa_bundle_export`, validating
/// unit norms and label shapes.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_import(
    path: *const c_char,
    out_bundle: *mut *mut SaBundle,
) -> SaStatus {
    guarded(|| {
        if out_bundle.is_null() {
            return fail(SaStatus::NullPointer, "out_bundle is null");
        }
        let path = match required_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match import_bundle(Path::new(path)) {
            Ok(bundle) => {
                *out_bundle = Box::into_raw(Box::new(SaBundle { inner: bundle }));
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::IoError, e),
        }
    })
}

/// Number of embeddings in the bundle; 0 when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_rows(bundle: *const SaBundle) -> usize {
    if bundle.is_null() {
        0
    } else {
        (*bundle).inner.n
    }
}

/// Embedding dimensionality of the bundle; 0 when the handle is null.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_dim(bundle: *const SaBundle) -> usize {
    if bundle.is_null() {
        0
    } else {
        (*bundle).inner.d
    }
}

/// Copies one embedding out of the bundle. `out_embedding` must hold
/// `sa_bundle_dim(bundle)` values.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_embedding(
    bundle: *const SaBundle,
    index: usize,
    out_embedding: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_embedding.is_null() {
            return fail(SaStatus::NullPointer, "out_embedding is null");
        }
        let bundle = match required_ref(bundle, "bundle") {
            Ok(b) => b,
            Err(status) => return status,
        };
        if index >= bundle.inner.n {
            return fail(
                SaStatus::InvalidArgument,
                format!("index {index} out of range for {} rows", bundle.inner.n),
            );
        }
        let row = &bundle.inner.embeddings[index];
        std::ptr::copy_nonoverlapping(row.as_ptr(), out_embedding, row.len());
        SaStatus::Ok
    })
}

/// Releases a bundle handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sa_bundle_free(bundle: *mut SaBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

// ---------------------------------------------------------------------------
// Statistics.

/// Concordance index of risk scores against observed survival: the
/// fraction of comparable pairs the scores order correctly, ties counted
/// half.
#[no_mangle]
pub unsafe extern "C" fn sa_concordance_index(
    times: *const f64,
    events: *const u8,
    scores: *const f64,
    n: usize,
    out_value: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_value.is_null() {
            return fail(SaStatus::NullPointer, "out_value is null");
        }
        let times = match required_slice(times, n, "times") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let events = match required_slice(events, n, "events") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let scores = match required_slice(scores, n, "scores") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match concordance_index(times, events, scores) {
            Ok(v) => {
                *out_value = v;
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::NumericError, e),
        }
    })
}

/// Two-sample log-rank test; writes the chi-square statistic and its
/// p-value on one degree of freedom.
#[no_mangle]
pub unsafe extern "C" fn sa_logrank_test(
    times_a: *const f64,
    events_a: *const u8,
    n_a: usize,
    times_b: *const f64,
    events_b: *const u8,
    n_b: usize,
    out_statistic: *mut f64,
    out_p_value: *mut f64,
) -> SaStatus {
    guarded(|| {
        if out_statistic.is_null() || out_p_value.is_null() {
            return fail(SaStatus::NullPointer, "output pointer is null");
        }
        let ta = match required_slice(times_a, n_a, "times_a") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let ea = match required_slice(events_a, n_a, "events_a") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let tb = match required_slice(times_b, n_b, "times_b") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let eb = match required_slice(events_b, n_b, "events_b") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match logrank_test(ta, ea, tb, eb) {
            Ok(r) => {
                *out_statistic = r.statistic;
                *out_p_value = r.p_value;
                SaStatus::Ok
            }
            Err(e) => fail(SaStatus::NumericError, e),
        }
    })
}

// ---------------------------------------------------------------------------
// Clustering and anchors.

/// Mixture families for `sa_cluster_json` and `sa_cluster_anchors_json`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaMixtureKind {
    /// Von Mises-Fisher components on the unit sphere.
    Vmf = 0,
    /// Spherical Gaussian components.
    Gaussian = 1,
}

fn mixture_kind(kind: SaMixtureKind) -> MixtureKind {
    match kind {
        SaMixtureKind::Vmf => MixtureKind::Vmf,
        SaMixtureKind::Gaussian => MixtureKind::Gaussian,
    }
}

/// Fits a `k`-component mixture to the bundle's embeddings and returns a
/// JSON report `{"assignments":[...],"iterations":...,"converged":...,
/// "mean_log_likelihood":...}` through `out_json` (release with
/// `sa_string_free`).
#[no_mangle]
pub unsafe extern "C" fn sa_cluster_json(
    bundle: *const SaBundle,
    k: usize,
    kind: SaMixtureKind,
    max_iter: usize,
    tol: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> SaStatus {
    guarded(|| {
        if out_json.is_null() {
            return fail(SaStatus::NullPointer, "out_json is null");
        }
        let bundle = match required_ref(bundle, "bundle") {
            Ok(b) => b,
            Err(status) => return status,
        };
        let opts = EmOptions {
            max_iter,
            tol,
            seed,
        };
        match fit_mixture(&bundle.inner.embeddings, k, mixture_kind(kind), &opts) {
            Ok(fit) => {
                let report = serde_json::json!({
                    "assignments": fit.assignments,
                    "iterations": fit.iterations,
                    "converged": fit.converged,
                    "mean_log_likelihood": fit.mean_log_likelihood,
                });
                emit_string(out_json, report.to_string())
            }
            Err(e) => fail(SaStatus::NumericError, e),
        }
    })
}

/// Fits a `k`-component mixture, derives one anchor direction per
/// cluster, and projects every embedding onto every anchor. Returns JSON
/// `{"anchors":[{"label":...,"direction":[...]},...],
/// "projections":[[...],...]}` where `projections[a][i]` is the cosine
/// similarity of embedding `i` with anchor `a`, both centered on the
/// bundle's mean. Release the string with `sa_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sa_cluster_anchors_json(
    bundle: *const SaBundle,
    k: usize,
    kind: SaMixtureKind,
    max_iter: usize,
    tol: f64,
    seed: u64,
    out_json: *mut *mut c_char,
) -> SaStatus {
    guarded(|| {
        if out_json.is_null() {
            return fail(SaStatus::NullPointer, "out_json is null");
        }
        let bundle = match required_ref(bundle, "bundle") {
            Ok(b) => b,
            Err(status) => return status,
        };
        let opts = EmOptions {
            max_iter,
            tol,
            seed,
        };
        let embeddings = &bundle.inner.embeddings;
        let fit = match fit_mixture(embeddings, k, mixture_kind(kind), &opts) {
            Ok(f) => f,
            Err(e) => return fail(SaStatus::NumericError, e),
        };
        let center = match center_of_mass(embeddings) {
            Ok(c) => c,
            Err(e) => return fail(SaStatus::NumericError, e),
        };
        let mut anchors = Vec::new();
        let mut projections = Vec::new();
        for c in 0..k {
            let anchor = match cluster_anchor(embeddings, &fit.assignments, c, &center) {
                Ok(a) => a,
                Err(e) => return fail(SaStatus::NumericError, format!("cluster {c}: {e}")),
            };
            let p = match project(embeddings, &anchor) {
                Ok(p) => p,
                Err(e) => return fail(SaStatus::NumericError, e),
            };
            anchors.push(serde_json::json!({
                "label": anchor.label(),
                "direction": anchor.direction,
            }));
            projections.push(p);
        }
        let report = serde_json::json!({
            "anchors": anchors,
            "projections": projections,
        });
        emit_string(out_json, report.to_string())
    })
}
