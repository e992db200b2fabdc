//! Periodic crystal structures and the JSON-Lines dataset format.
//!
//! Fractional coordinates are the source of truth; Cartesian positions are
//! always derived as `frac · lattice` with lattice vectors stored as rows.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Cells with `|det| <= DEGENERATE_DET` are rejected.
pub const DEGENERATE_DET: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("degenerate lattice: |det| = {0:e}")]
    DegenerateLattice(f64),
    #[error("unknown species: atomic number {0} outside 1..=118")]
    UnknownSpecies(i64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("writing {0} is not supported")]
    UnsupportedWrite(StructureFormat),
}

impl StructError {
    fn malformed(line: usize, msg: impl Into<String>) -> Self {
        StructError::Malformed { line, msg: msg.into() }
    }

    /// 1-based line the error refers to, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            StructError::Malformed { line, .. } if *line > 0 => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureFormat {
    Json,
    Poscar,
}

impl StructureFormat {
    /// Guess from a file name: `*.json` is JSON, everything else
    /// (`POSCAR`, `CONTCAR`, `*.vasp`) is treated as POSCAR.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => StructureFormat::Json,
            _ => StructureFormat::Poscar,
        }
    }
}

impl fmt::Display for StructureFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureFormat::Json => "json",
            StructureFormat::Poscar => "poscar",
        })
    }
}

impl FromStr for StructureFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(StructureFormat::Json),
            "poscar" | "vasp" => Ok(StructureFormat::Poscar),
            other => Err(format!("unknown structure format `{other}`")),
        }
    }
}

/// A unit cell: lattice rows `l1, l2, l3` in Å, atomic numbers, and
/// fractional coordinates wrapped into `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalStructure {
    lattice: Mat3,
    species: Vec<u32>,
    frac: Vec<Vec3>,
    id: Option<String>,
}

/// Wrap a fractional coordinate into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: &Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Row vector times matrix.
pub fn vec_mat(v: &Vec3, m: &Mat3) -> Vec3 {
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        *o = v[0] * m[0][j] + v[1] * m[1][j] + v[2] * m[2][j];
    }
    out
}

impl CrystalStructure {
    /// Validate and canonicalize. Fractional coordinates are wrapped by
    /// subtracting their floor.
    pub fn new(
        lattice: Mat3,
        species: Vec<u32>,
        frac: Vec<Vec3>,
        id: Option<String>,
    ) -> Result<Self, StructError> {
        if lattice.iter().flatten().any(|x| !x.is_finite()) {
            return Err(StructError::NonFinite("lattice"));
        }
        if frac.iter().flatten().any(|x| !x.is_finite()) {
            return Err(StructError::NonFinite("frac"));
        }
        let det = det3(&lattice);
        if det.abs() <= DEGENERATE_DET {
            return Err(StructError::DegenerateLattice(det.abs()));
        }
        if species.is_empty() {
            return Err(StructError::malformed(0, "structure has no atoms"));
        }
        if species.len() != frac.len() {
            return Err(StructError::malformed(
                0,
                format!("species has {} entries but frac has {}", species.len(), frac.len()),
            ));
        }
        if let Some(&z) = species.iter().find(|&&z| z == 0 || z > elements::MAX_Z) {
            return Err(StructError::UnknownSpecies(z as i64));
        }
        let frac = frac.into_iter().map(|p| p.map(wrap_unit)).collect();
        Ok(CrystalStructure { lattice, species, frac, id })
    }

    pub fn lattice(&self) -> &Mat3 {
        &self.lattice
    }

    pub fn species(&self) -> &[u32] {
        &self.species
    }

    pub fn frac_coords(&self) -> &[Vec3] {
        &self.frac
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    pub fn set_id(&mut self, id: Option<String>) {
        self.id = id;
    }

    pub fn num_atoms(&self) -> usize {
        self.species.len()
    }

    pub fn volume(&self) -> f64 {
        det3(&self.lattice).abs()
    }

    pub fn cartesian(&self, i: usize) -> Vec3 {
        vec_mat(&self.frac[i], &self.lattice)
    }

    /// Perpendicular distance between opposite faces of the cell, one per
    /// lattice direction: `h_i = V / |l_j × l_k|`.
    pub fn interplanar_spacings(&self) -> Vec3 {
        let l = &self.lattice;
        let v = self.volume();
        [
            v / norm(&cross(&l[1], &l[2])),
            v / norm(&cross(&l[2], &l[0])),
            v / norm(&cross(&l[0], &l[1])),
        ]
    }

    /// Same cell with lattice rows multiplied by `rot` (row vectors, so
    /// `l_i' = l_i · rot`). Fractional coordinates are unchanged.
    pub fn rotated(&self, rot: &Mat3) -> Self {
        let mut out = self.clone();
        for row in out.lattice.iter_mut() {
            *row = vec_mat(row, rot);
        }
        out
    }

    /// Rigid translation by a fractional vector, re-wrapped into the cell.
    pub fn translated(&self, shift: &Vec3) -> Self {
        let mut out = self.clone();
        for p in out.frac.iter_mut() {
            for a in 0..3 {
                p[a] = wrap_unit(p[a] + shift[a]);
            }
        }
        out
    }

    /// Reorder atoms so that new atom `i` is old atom `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.num_atoms(), "permutation length");
        let mut out = self.clone();
        out.species = perm.iter().map(|&i| self.species[i]).collect();
        out.frac = perm.iter().map(|&i| self.frac[i]).collect();
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StructureJson {
    frac: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    lattice: Mat3,
    species: Vec<i64>,
}

impl StructureJson {
    fn from_structure(s: &CrystalStructure) -> Self {
        StructureJson {
            frac: s.frac.clone(),
            id: s.id.clone(),
            lattice: s.lattice,
            species: s.species.iter().map(|&z| z as i64).collect(),
        }
    }

    fn into_structure(self) -> Result<CrystalStructure, StructError> {
        let mut species = Vec::with_capacity(self.species.len());
        for z in self.species {
            if !(1..=elements::MAX_Z as i64).contains(&z) {
                return Err(StructError::UnknownSpecies(z));
            }
            species.push(z as u32);
        }
        CrystalStructure::new(self.lattice, species, self.frac, self.id)
    }
}

fn json_error(e: serde_json::Error) -> StructError {
    StructError::malformed(e.line(), e.to_string())
}

pub fn parse_structure(text: &str, format: StructureFormat) -> Result<CrystalStructure, StructError> {
    match format {
        StructureFormat::Json => {
            let raw: StructureJson = serde_json::from_str(text).map_err(json_error)?;
            raw.into_structure()
        }
        StructureFormat::Poscar => parse_poscar(text),
    }
}

/// Serialize a structure. JSON output has sorted keys and shortest
/// round-trip float formatting, so `parse(write(s)) == s` bit for bit.
pub fn write_structure(s: &CrystalStructure, format: StructureFormat) -> Result<String, StructError> {
    match format {
        StructureFormat::Json => {
            serde_json::to_string(&StructureJson::from_structure(s)).map_err(|e| StructError::malformed(0, e.to_string()))
        }
        StructureFormat::Poscar => Err(StructError::UnsupportedWrite(StructureFormat::Poscar)),
    }
}

fn parse_floats(line: &str, lineno: usize, what: &str, n: usize) -> Result<Vec<f64>, StructError> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .take(n)
        .map(|t| t.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| StructError::malformed(lineno, format!("cannot parse {what}: `{}`", line.trim())))?;
    if vals.len() < n {
        return Err(StructError::malformed(lineno, format!("expected {n} numbers for {what}")));
    }
    Ok(vals)
}

/// VASP5 POSCAR with direct coordinates. The comment line becomes the id.
fn parse_poscar(text: &str) -> Result<CrystalStructure, StructError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| StructError::malformed(0, format!("unexpected end of file, expected {what}")))
    };

    let (_, comment) = next("comment line")?;
    let (scale_no, scale_line) = next("scale factor")?;
    let scale = parse_floats(scale_line, scale_no, "scale factor", 1)?[0];

    let mut lattice = [[0.0; 3]; 3];
    for row in lattice.iter_mut() {
        let (no, line) = next("lattice vector")?;
        let v = parse_floats(line, no, "lattice vector", 3)?;
        row.copy_from_slice(&v);
    }
    if scale > 0.0 {
        for x in lattice.iter_mut().flatten() {
            *x *= scale;
        }
    } else if scale < 0.0 {
        // negative scale is the target cell volume
        let v = det3(&lattice).abs();
        if v <= DEGENERATE_DET {
            return Err(StructError::DegenerateLattice(v));
        }
        let f = (-scale / v).cbrt();
        for x in lattice.iter_mut().flatten() {
            *x *= f;
        }
    } else {
        return Err(StructError::malformed(scale_no, "scale factor must be nonzero"));
    }

    let (sym_no, sym_line) = next("species symbols")?;
    let symbols: Vec<&str> = sym_line.split_whitespace().collect();
    if symbols.is_empty() || symbols[0].parse::<f64>().is_ok() {
        return Err(StructError::malformed(sym_no, "expected VASP5 species symbols line"));
    }
    let mut zs = Vec::with_capacity(symbols.len());
    for s in &symbols {
        let z = elements::atomic_number(s)
            .ok_or_else(|| StructError::malformed(sym_no, format!("unknown element symbol `{s}`")))?;
        zs.push(z);
    }

    let (cnt_no, cnt_line) = next("species counts")?;
    let counts: Vec<usize> = cnt_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| StructError::malformed(cnt_no, format!("cannot parse species counts: `{}`", cnt_line.trim())))?;
    if counts.len() != zs.len() {
        return Err(StructError::malformed(
            cnt_no,
            format!("{} symbols but {} counts", zs.len(), counts.len()),
        ));
    }

    let (mut mode_no, mut mode_line) = next("coordinate mode")?;
    if mode_line.trim_start().starts_with(['S', 's']) {
        (mode_no, mode_line) = next("coordinate mode")?;
    }
    if !mode_line.trim_start().starts_with(['D', 'd']) {
        return Err(StructError::malformed(
            mode_no,
            format!("only Direct coordinates are supported, found `{}`", mode_line.trim()),
        ));
    }

    let total: usize = counts.iter().sum();
    let mut species = Vec::with_capacity(total);
    for (z, &c) in zs.iter().zip(&counts) {
        species.extend(std::iter::repeat_n(*z, c));
    }
    let mut frac = Vec::with_capacity(total);
    for _ in 0..total {
        let (no, line) = next("atomic coordinates")?;
        let v = parse_floats(line, no, "fractional coordinate", 3)?;
        frac.push([v[0], v[1], v[2]]);
    }

    let id = Some(comment.trim().to_string()).filter(|s| !s.is_empty());
    CrystalStructure::new(lattice, species, frac, id)
}

/// Read and parse a structure file, choosing the format from the extension.
pub fn read_structure_file(path: &Path) -> Result<CrystalStructure, ReadError> {
    let text = fs::read_to_string(path).map_err(|e| ReadError::Io(path.display().to_string(), e.to_string()))?;
    parse_structure(&text, StructureFormat::from_path(path))
        .map_err(|e| ReadError::Parse(path.display().to_string(), e))
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("{0}: {1}")]
    Io(String, String),
    #[error("{0}: {1}")]
    Parse(String, StructError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// One labelled structure.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub structure: CrystalStructure,
    pub target: f64,
    pub split: Option<SplitTag>,
}

impl DatasetRecord {
    pub fn id(&self) -> Option<&str> {
        self.structure.id()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordJson {
    #[serde(default)]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitTag>,
    structure: StructureJson,
    target: f64,
}

/// A dataset line that failed to parse.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDiagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub diagnostics: Vec<LineDiagnostic>,
}

fn parse_record(line: &str) -> Result<DatasetRecord, String> {
    let raw: RecordJson = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if !raw.target.is_finite() {
        return Err("target is not finite".into());
    }
    let mut s = raw.structure;
    if raw.id.is_some() {
        s.id = raw.id;
    }
    let structure = s.into_structure().map_err(|e| e.to_string())?;
    Ok(DatasetRecord { structure, target: raw.target, split: raw.split })
}

/// Parse JSON-Lines text. Blank lines are skipped; bad lines are collected
/// as diagnostics rather than aborting the load.
pub fn parse_dataset(text: &str) -> Dataset {
    let mut out = Dataset::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(r) => out.records.push(r),
            Err(message) => out.diagnostics.push(LineDiagnostic { line: i + 1, message }),
        }
    }
    out
}

pub fn load_dataset(path: &Path) -> std::io::Result<Dataset> {
    Ok(parse_dataset(&fs::read_to_string(path)?))
}

pub fn write_record(r: &DatasetRecord) -> String {
    let mut s = StructureJson::from_structure(&r.structure);
    let id = s.id.take();
    let raw = RecordJson { id, split: r.split, structure: s, target: r.target };
    serde_json::to_string(&raw).expect("dataset record serializes")
}

pub fn write_dataset(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&write_record(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use crate::testdata::CATIO3_POSCAR;

    #[test]
    fn identity_cell_from_json() {
        let s = parse_structure(
            r#"{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[11],"frac":[[0,0,0]]}"#,
            StructureFormat::Json,
        )
        .unwrap();
        assert_eq!(s.num_atoms(), 1);
        assert_eq!(det3(s.lattice()), 1.0);
        assert_eq!(s.species(), &[11]);
    }

    #[test]
    fn wraps_fractional_coordinates() {
        let s = parse_structure(
            r#"{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[1],"frac":[[1.25,-0.25,3.0]]}"#,
            StructureFormat::Json,
        )
        .unwrap();
        assert_eq!(s.frac_coords()[0], [0.25, 0.75, 0.0]);
        assert_eq!(wrap_unit(-1e-17), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let degenerate = r#"{"lattice":[[1,0,0],[2,0,0],[0,0,1]],"species":[1],"frac":[[0,0,0]]}"#;
        assert!(matches!(
            parse_structure(degenerate, StructureFormat::Json),
            Err(StructError::DegenerateLattice(_))
        ));
        let unknown = r#"{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[119],"frac":[[0,0,0]]}"#;
        assert_eq!(parse_structure(unknown, StructureFormat::Json), Err(StructError::UnknownSpecies(119)));
        let zero = r#"{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[0],"frac":[[0,0,0]]}"#;
        assert_eq!(parse_structure(zero, StructureFormat::Json), Err(StructError::UnknownSpecies(0)));
        let broken = "{\n\"lattice\": [[1,0,0],\n[0,1]]}";
        let err = parse_structure(broken, StructureFormat::Json).unwrap_err();
        assert_eq!(err.line(), Some(3));
        let empty = r#"{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[],"frac":[]}"#;
        assert!(parse_structure(empty, StructureFormat::Json).is_err());
    }

    #[test]
    fn poscar_perovskite() {
        let s = parse_structure(CATIO3_POSCAR, StructureFormat::Poscar).unwrap();
        assert_eq!(s.species(), &[20, 22, 8, 8, 8]);
        assert_eq!(s.id(), Some("CaTiO3 cubic perovskite"));
        assert!((s.volume() - 3.9f64.powi(3)).abs() < 1e-9);
        assert_eq!(s.cartesian(1), [1.95, 1.95, 1.95]);
    }

    #[test]
    fn poscar_errors_name_the_line() {
        let bad = CATIO3_POSCAR.replace("0.5 0.0 0.5", "0.5 zz 0.5");
        let err = parse_structure(&bad, StructureFormat::Poscar).unwrap_err();
        assert_eq!(err.line(), Some(12));
        let cart = CATIO3_POSCAR.replace("Direct", "Cartesian");
        assert_eq!(parse_structure(&cart, StructureFormat::Poscar).unwrap_err().line(), Some(8));
        let truncated: String = CATIO3_POSCAR.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(parse_structure(&truncated, StructureFormat::Poscar).is_err());
    }

    #[test]
    fn poscar_selective_dynamics_and_volume_scale() {
        let text = "x\n-8.0\n1 0 0\n0 1 0\n0 0 1\nSi\n1\nSelective dynamics\nDirect\n0.1 0.2 0.3 T T F\n";
        let s = parse_structure(text, StructureFormat::Poscar).unwrap();
        assert!((s.volume() - 8.0).abs() < 1e-12);
        assert_eq!(s.frac_coords()[0], [0.1, 0.2, 0.3]);
    }

    #[test]
    fn perovskite_round_trips_bit_identically() {
        let s = parse_structure(CATIO3_POSCAR, StructureFormat::Poscar).unwrap();
        let text = write_structure(&s, StructureFormat::Json).unwrap();
        let back = parse_structure(&text, StructureFormat::Json).unwrap();
        assert_eq!(back, s);
        assert_eq!(write_structure(&back, StructureFormat::Json).unwrap(), text);
    }

    #[test]
    fn canonical_json_has_sorted_keys() {
        let s = CrystalStructure::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], vec![11], vec![[0.0; 3]], None)
            .unwrap();
        assert_eq!(
            write_structure(&s, StructureFormat::Json).unwrap(),
            r#"{"frac":[[0.0,0.0,0.0]],"lattice":[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],"species":[11]}"#
        );
        assert!(write_structure(&s, StructureFormat::Poscar).is_err());
    }

    #[test]
    fn atom_order_is_preserved_in_output() {
        let l = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        let a = CrystalStructure::new(l, vec![1, 8], vec![[0.0; 3], [0.5; 3]], None).unwrap();
        let b = a.permuted(&[1, 0]);
        assert_ne!(
            write_structure(&a, StructureFormat::Json).unwrap(),
            write_structure(&b, StructureFormat::Json).unwrap()
        );
    }

    fn record_line(id: &str, target: &str) -> String {
        format!(
            r#"{{"id":"{id}","structure":{{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[1],"frac":[[0,0,0]]}},"target":{target}}}"#
        )
    }

    #[test]
    fn dataset_loading() {
        let good: String = (0..3).map(|i| record_line(&format!("s{i}"), "1.5") + "\n").collect();
        let ds = parse_dataset(&good);
        assert_eq!(ds.records.len(), 3);
        assert!(ds.diagnostics.is_empty());
        assert_eq!(ds.records[2].id(), Some("s2"));

        assert!(parse_dataset("").records.is_empty());

        let mut lines: Vec<String> = (0..5).map(|i| record_line(&format!("s{i}"), "0.5")).collect();
        lines[2] = r#"{"id":"bad","structure":{"lattice":[[1,0,0]]},"target":1}"#.into();
        let ds = parse_dataset(&lines.join("\n"));
        assert_eq!(ds.records.len(), 4);
        assert_eq!(ds.diagnostics.len(), 1);
        assert_eq!(ds.diagnostics[0].line, 3);
    }

    #[test]
    fn dataset_round_trip_with_split() {
        let text = r#"{"id":"a","split":"val","structure":{"lattice":[[1,0,0],[0,1,0],[0,0,1]],"species":[1],"frac":[[0.5,0,0]]},"target":-2.25}"#;
        let ds = parse_dataset(text);
        assert_eq!(ds.records[0].split, Some(SplitTag::Val));
        let again = parse_dataset(&write_dataset(&ds.records));
        assert_eq!(again.records, ds.records);
    }

    fn arb_structure() -> impl Strategy<Value = CrystalStructure> {
        let lattice = prop::array::uniform3(prop::array::uniform3(-3.0f64..3.0));
        let atoms = prop::collection::vec((1u32..=118, prop::array::uniform3(-2.0f64..2.0)), 1..6);
        (lattice, atoms).prop_filter_map("degenerate", |(mut l, atoms)| {
            for (i, row) in l.iter_mut().enumerate() {
                row[i] += 4.0;
            }
            let (species, frac) = atoms.into_iter().unzip();
            CrystalStructure::new(l, species, frac, None).ok()
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_exact(s in arb_structure()) {
            let text = write_structure(&s, StructureFormat::Json).unwrap();
            let back = parse_structure(&text, StructureFormat::Json).unwrap();
            for (a, b) in s.frac_coords().iter().flatten().zip(back.frac_coords().iter().flatten()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            for i in 0..s.num_atoms() {
                let (p, q) = (s.cartesian(i), back.cartesian(i));
                for a in 0..3 {
                    prop_assert!((p[a] - q[a]).abs() <= 1e-12);
                }
            }
            prop_assert_eq!(back, s);
        }

        #[test]
        fn canonicalization_is_idempotent(x in -1e6f64..1e6) {
            let w = wrap_unit(x);
            prop_assert!((0.0..1.0).contains(&w));
            prop_assert_eq!(wrap_unit(w).to_bits(), w.to_bits());
        }
    }
}
