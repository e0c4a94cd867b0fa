//! STPF/1 field files.
//!
//! Layout: the ASCII line `STPF/1`, one line of JSON describing the field,
//! then the payload as little-endian row-major values, component after
//! component. Real data is stored as `f64`, complex data as `c128` (real part
//! then imaginary part).

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, ScalarField, VectorPotential};
use crate::grid::{Lattice, SpaceTimeGrid};
use crate::spectral::{fft_freqs, SpectralField};

/// First line of every STPF file.
pub const MAGIC: &[u8] = b"STPF/1\n";

/// Any field that can be stored.
#[derive(Debug, Clone, PartialEq)]
pub enum StpfData {
    Scalar(ScalarField),
    Vector(VectorPotential),
    Complex(ComplexField),
    Spectrum(SpectralField),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Scalar,
    Vector,
    Complex,
    Spectrum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Dtype {
    F64,
    C128,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::C128 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: Kind,
    dtype: Dtype,
    /// Spatial dimension for grids; absent for spectra.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_space: Option<usize>,
    shape: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    components: usize,
    /// Spatial support radius; absent means unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edge_leakage: Option<f64>,
}

fn finite(r: f64) -> Option<f64> {
    r.is_finite().then_some(r)
}

fn grid_header(kind: Kind, dtype: Dtype, grid: &SpaceTimeGrid, components: usize, support: Option<f64>) -> Header {
    Header {
        kind,
        dtype,
        n_space: Some(grid.n_space()),
        shape: grid.shape().to_vec(),
        origin: grid.origin().to_vec(),
        spacing: grid.spacing().to_vec(),
        components,
        support_radius: support,
        edge_leakage: None,
    }
}

/// Serializes `data` into `out`.
pub fn write_stpf(data: &StpfData, out: &mut impl Write) -> Result<()> {
    let (header, payload): (Header, Vec<u8>) = match data {
        StpfData::Scalar(f) => (
            grid_header(Kind::Scalar, Dtype::F64, f.grid(), 1, finite(f.support_radius())),
            f.values().iter().flat_map(|x| x.to_le_bytes()).collect(),
        ),
        StpfData::Vector(a) => (
            grid_header(Kind::Vector, Dtype::F64, a.grid(), a.components().len(), finite(a.support_radius())),
            a.components().iter().flatten().flat_map(|x| x.to_le_bytes()).collect(),
        ),
        StpfData::Complex(c) => (grid_header(Kind::Complex, Dtype::C128, c.grid(), 1, None), complex_bytes(c.values())),
        StpfData::Spectrum(s) => (
            Header {
                kind: Kind::Spectrum,
                dtype: Dtype::C128,
                n_space: None,
                shape: s.source.shape.clone(),
                origin: s.source.origin.clone(),
                spacing: s.source.spacing.clone(),
                components: 1,
                support_radius: None,
                edge_leakage: Some(s.edge_leakage),
            },
            complex_bytes(&s.values),
        ),
    };
    out.write_all(MAGIC)?;
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    out.write_all(&payload)?;
    Ok(())
}

fn complex_bytes(values: &[Complex64]) -> Vec<u8> {
    values.iter().flat_map(|z| z.re.to_le_bytes().into_iter().chain(z.im.to_le_bytes())).collect()
}

/// Writes `data` to `path`.
pub fn save_stpf(data: &StpfData, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_stpf(data, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

/// Reads a field from `path`.
pub fn load_stpf(path: impl AsRef<Path>) -> Result<StpfData> {
    read_stpf(&std::fs::read(path)?)
}

fn f64_at(bytes: &[u8], i: usize) -> f64 {
    f64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8-byte chunk"))
}

/// Parses STPF bytes.
pub fn read_stpf(bytes: &[u8]) -> Result<StpfData> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::Format("magic mismatch at byte 0: expected \"STPF/1\"".into()));
    }
    let start = MAGIC.len();
    let end = bytes[start..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|p| start + p)
        .ok_or_else(|| Error::Format(format!("header starting at byte {start} is not terminated by a newline")))?;
    let header: Header = serde_json::from_slice(&bytes[start..end])
        .map_err(|e| Error::Format(format!("header at bytes {start}..{end} is invalid: {e}")))?;
    let offset = end + 1;
    let count: usize = header.shape.iter().product::<usize>() * header.components;
    let expected = count * header.dtype.width();
    let actual = bytes.len() - offset;
    if actual != expected {
        return Err(Error::Format(format!(
            "payload at byte offset {offset} has {actual} bytes, expected {expected} ({count} values of {:?})",
            header.dtype
        )));
    }
    let payload = &bytes[offset..];
    let want = match header.kind {
        Kind::Scalar | Kind::Vector => Dtype::F64,
        Kind::Complex | Kind::Spectrum => Dtype::C128,
    };
    if header.dtype != want {
        return Err(Error::Format(format!("dtype {:?} does not match kind {:?} (header at byte {start})", header.dtype, header.kind)));
    }
    let support = header.support_radius.unwrap_or(f64::INFINITY);
    let grid = || -> Result<SpaceTimeGrid> {
        let n = header.n_space.ok_or_else(|| Error::Format("grid field without n_space".into()))?;
        SpaceTimeGrid::new(n, header.shape.clone(), header.origin.clone(), header.spacing.clone())
    };
    let complex = || -> Vec<Complex64> { (0..count).map(|i| Complex64::new(f64_at(payload, 2 * i), f64_at(payload, 2 * i + 1))).collect() };
    Ok(match header.kind {
        Kind::Scalar => {
            if header.components != 1 {
                return Err(Error::Format("scalar field with more than one component".into()));
            }
            StpfData::Scalar(ScalarField::new(grid()?, (0..count).map(|i| f64_at(payload, i)).collect(), support)?)
        }
        Kind::Vector => {
            let g = grid()?;
            let len = g.len();
            let comps = (0..header.components).map(|c| (0..len).map(|i| f64_at(payload, c * len + i)).collect()).collect();
            StpfData::Vector(VectorPotential::new(g, comps, support)?)
        }
        Kind::Complex => StpfData::Complex(ComplexField::new(grid()?, complex())?),
        Kind::Spectrum => {
            let source = Lattice::new(header.shape.clone(), header.origin.clone(), header.spacing.clone())?;
            let freqs = source.shape.iter().zip(&source.spacing).map(|(&n, &h)| fft_freqs(n, h)).collect();
            StpfData::Spectrum(SpectralField { source, freqs, values: complex(), edge_leakage: header.edge_leakage.unwrap_or(0.0) })
        }
    })
}

impl StpfData {
    /// Short name of the stored kind.
    pub fn kind_name(&self) -> &'static str {
        match self {
            StpfData::Scalar(_) => "scalar",
            StpfData::Vector(_) => "vector",
            StpfData::Complex(_) => "complex",
            StpfData::Spectrum(_) => "spectrum",
        }
    }

    pub fn into_vector(self) -> Result<VectorPotential> {
        match self {
            StpfData::Vector(a) => Ok(a),
            other => Err(Error::Format(format!("expected a vector potential, found a {} field", other.kind_name()))),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            StpfData::Scalar(v) => Ok(v),
            other => Err(Error::Format(format!("expected a scalar field, found a {} field", other.kind_name()))),
        }
    }
}
