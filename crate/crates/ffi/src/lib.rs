//! C ABI for qcnet.
//!
//! Objects cross the boundary as opaque pointers created by `*_parse`,
//! `*_build` or `*_load` and released by the matching `*_free`. Every
//! fallible call returns a [`QcnetStatus`]; on failure a description is
//! available from [`qcnet_last_error`] on the same thread. Strings returned
//! through `char **` out-parameters are owned by the caller and must be
//! released with [`qcnet_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use qcnet::featurize::AtomFeatureTable;
use qcnet::homlab::{self, Construction, SimplicialComplex, VertexPartition};
use qcnet::periodic::neighbor_list;
use qcnet::qcomplex::{build_complex, QuotientComplex};
use qcnet::sformer::{read_sidecar_extra, CheckpointError, SformerModel};
use qcnet::structio::{parse_structure, read_structure_file, CrystalStructure, StructureFormat};
use qcnet::trainer::prepare_structure;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Graph = 5,
    Feature = 6,
    Checkpoint = 7,
    CheckpointMismatch = 8,
    Model = 9,
    Homology = 10,
    Panic = 11,
}

/// A parsed crystal structure.
pub struct QcnetStructure(CrystalStructure);

/// A quotient complex built from a structure.
pub struct QcnetComplex(QuotientComplex);

/// A trained model together with the neighbor count and atom table it was
/// trained with.
pub struct QcnetModel {
    model: SformerModel,
    k: usize,
    table: AtomFeatureTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("interior NULs removed"));
}

fn fail(status: QcnetStatus, msg: impl Into<String>) -> QcnetStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> QcnetStatus) -> QcnetStatus {
    set_error("");
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(QcnetStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, QcnetStatus> {
    if p.is_null() {
        return Err(fail(QcnetStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(QcnetStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn give_string(s: String, out: *mut *mut c_char) -> QcnetStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            QcnetStatus::Ok
        }
        Err(_) => fail(QcnetStatus::Panic, "string contains NUL"),
    }
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(QcnetStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qcnet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Description of the last failure on this thread; empty after a success.
/// The pointer stays valid until the next qcnet call on the same thread.
#[no_mangle]
pub extern "C" fn qcnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parse a structure from text. `format` is `"json"` or `"poscar"`.
///
/// # Safety
/// `text` and `format` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_structure_parse(
    text: *const c_char,
    format: *const c_char,
    out: *mut *mut QcnetStructure,
) -> QcnetStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(str_arg(text, "text"));
        let format = try_status!(str_arg(format, "format"));
        let format: StructureFormat = match format.parse() {
            Ok(f) => f,
            Err(e) => return fail(QcnetStatus::Parse, e),
        };
        match parse_structure(text, format) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(QcnetStructure(s)));
                QcnetStatus::Ok
            }
            Err(e) => fail(QcnetStatus::Parse, e.to_string()),
        }
    })
}

/// Read a structure file; the format follows the file extension.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_structure_read(path: *const c_char, out: *mut *mut QcnetStructure) -> QcnetStatus {
    guard(|| {
        non_null!(out);
        let path = try_status!(str_arg(path, "path"));
        match read_structure_file(Path::new(path)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(QcnetStructure(s)));
                QcnetStatus::Ok
            }
            Err(e @ qcnet::structio::ReadError::Io(..)) => fail(QcnetStatus::Io, e.to_string()),
            Err(e) => fail(QcnetStatus::Parse, e.to_string()),
        }
    })
}

/// Number of atoms in the unit cell, or 0 for a null handle.
///
/// # Safety
/// `s` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn qcnet_structure_num_atoms(s: *const QcnetStructure) -> usize {
    s.as_ref().map_or(0, |s| s.0.num_atoms())
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcnet_structure_free(s: *mut QcnetStructure) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Build the quotient complex of the `k`-nearest-neighbor graph.
///
/// # Safety
/// `s` must be a live structure handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_complex_build(
    s: *const QcnetStructure,
    k: usize,
    out: *mut *mut QcnetComplex,
) -> QcnetStatus {
    guard(|| {
        non_null!(s, out);
        match neighbor_list(&(*s).0, k) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(QcnetComplex(build_complex(g))));
                QcnetStatus::Ok
            }
            Err(e) => fail(QcnetStatus::Graph, e.to_string()),
        }
    })
}

/// Vertex, directed edge and triangle counts.
///
/// # Safety
/// `c` must be a live complex handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_complex_counts(
    c: *const QcnetComplex,
    n_vertices: *mut usize,
    n_edges: *mut usize,
    n_triangles: *mut usize,
) -> QcnetStatus {
    guard(|| {
        non_null!(c, n_vertices, n_edges, n_triangles);
        let c = &(*c).0;
        *n_vertices = c.num_vertices();
        *n_edges = c.num_edges();
        *n_triangles = c.num_triangles();
        QcnetStatus::Ok
    })
}

/// Complex as JSON; release with `qcnet_string_free`.
///
/// # Safety
/// `c` must be a live complex handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_complex_to_json(c: *const QcnetComplex, out: *mut *mut c_char) -> QcnetStatus {
    guard(|| {
        non_null!(c, out);
        give_string((*c).0.to_json(), out)
    })
}

/// # Safety
/// `c` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcnet_complex_free(c: *mut QcnetComplex) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Load a checkpoint. The neighbor count and atom table recorded in its
/// sidecar are used for prediction; without them, k = 12 and the built-in
/// placeholder table.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_model_load(path: *const c_char, out: *mut *mut QcnetModel) -> QcnetStatus {
    guard(|| {
        non_null!(out);
        let path = Path::new(try_status!(str_arg(path, "path")));
        let model = match SformerModel::load(path, None) {
            Ok(m) => m,
            Err(CheckpointError::Io(m)) => return fail(QcnetStatus::Io, m),
            Err(e @ CheckpointError::Mismatch(_)) => return fail(QcnetStatus::CheckpointMismatch, e.to_string()),
            Err(e) => return fail(QcnetStatus::Checkpoint, e.to_string()),
        };
        let extra = read_sidecar_extra(path).unwrap_or_default();
        let k = extra["k_neighbors"].as_u64().map_or(12, |v| v as usize);
        let table = match extra["atom_table"].as_str().map(PathBuf::from) {
            Some(p) => match AtomFeatureTable::load(&p) {
                Ok(t) => t,
                Err(e) => return fail(QcnetStatus::Feature, e.to_string()),
            },
            None => AtomFeatureTable::placeholder(qcnet::cli::PLACEHOLDER_TABLE_SEED),
        };
        *out = Box::into_raw(Box::new(QcnetModel { model, k, table }));
        QcnetStatus::Ok
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcnet_model_free(m: *mut QcnetModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Eval-mode prediction for one structure.
///
/// # Safety
/// `m` and `s` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_model_predict(
    m: *const QcnetModel,
    s: *const QcnetStructure,
    out: *mut f64,
) -> QcnetStatus {
    guard(|| {
        non_null!(m, s, out);
        let m = &*m;
        let (c, raw) = match prepare_structure(&(*s).0, m.k, &m.table) {
            Ok(v) => v,
            Err(qcnet::trainer::SampleError::Graph(e)) => return fail(QcnetStatus::Graph, e.to_string()),
            Err(e) => return fail(QcnetStatus::Feature, e.to_string()),
        };
        match m.model.forward(&c, &raw) {
            Ok(y) => {
                *out = y;
                QcnetStatus::Ok
            }
            Err(e) => fail(QcnetStatus::Model, e.to_string()),
        }
    })
}

/// Homology comparison of a complex (JSON list of maximal simplices) with
/// its vertex-glued version. `partition_json` may be null for singleton
/// classes; a nonzero `pairwise` selects the pairwise gluing. The report is
/// written as JSON to `out` and `*all_pass` receives 1 when every verdict
/// holds.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed); out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qcnet_homology_verify(
    complex_json: *const c_char,
    partition_json: *const c_char,
    pairwise: c_int,
    out: *mut *mut c_char,
    all_pass: *mut c_int,
) -> QcnetStatus {
    guard(|| {
        non_null!(out, all_pass);
        let text = try_status!(str_arg(complex_json, "complex_json"));
        let k = match SimplicialComplex::from_json(text) {
            Ok(k) => k,
            Err(e) => return fail(QcnetStatus::Homology, e.to_string()),
        };
        let p = if partition_json.is_null() {
            VertexPartition::singletons(&k)
        } else {
            let t = try_status!(str_arg(partition_json, "partition_json"));
            match VertexPartition::from_json(t, &k) {
                Ok(p) => p,
                Err(e) => return fail(QcnetStatus::Homology, e.to_string()),
            }
        };
        let construction = if pairwise != 0 { Construction::Pairwise } else { Construction::Star };
        let report = homlab::verify_with(&k, &p, construction);
        *all_pass = c_int::from(report.verdicts.all());
        give_string(serde_json::to_string(&report).expect("report serializes"), out)
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qcnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
