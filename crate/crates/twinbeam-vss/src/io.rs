//! Binary container for joint spectral amplitudes and Schmidt decompositions.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic     8 bytes  "TBVSSC01"
//! kind      u32      1 = joint spectral amplitude, 2 = Schmidt decomposition
//! grid_s    f64 center, f64 span, u64 n_points
//! grid_i    f64 center, f64 span, u64 n_points
//! kind 1:   f64 norm, f64 edge_ratio, n_s·n_i complex values
//! kind 2:   u64 n_modes, f64 gain, f64 residual,
//!           n_modes f64 singular values, n_modes f64 u, n_modes f64 v,
//!           n_s·n_modes complex signal modes, n_i·n_modes complex idler modes
//! ```
//!
//! Complex numbers are stored as interleaved (re, im) f64 pairs and matrices
//! row by row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::schmidt::SchmidtDecomposition;
use crate::source::JointSpectralAmplitude;

const MAGIC: &[u8; 8] = b"TBVSSC01";
const KIND_JSA: u32 = 1;
const KIND_SCHMIDT: u32 = 2;

fn write_grid<W: Write>(w: &mut W, g: &FrequencyGrid) -> std::io::Result<()> {
    w.write_f64::<LE>(g.center())?;
    w.write_f64::<LE>(g.span())?;
    w.write_u64::<LE>(g.len() as u64)
}

fn read_grid<R: Read>(r: &mut R) -> Result<FrequencyGrid> {
    let center = r.read_f64::<LE>().map_err(fmt_err)?;
    let span = r.read_f64::<LE>().map_err(fmt_err)?;
    let n = r.read_u64::<LE>().map_err(fmt_err)? as usize;
    FrequencyGrid::new(center, span, n).map_err(|e| Error::Format(format!("bad grid: {e}")))
}

fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<Complex64>) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            w.write_f64::<LE>(m[(r, c)].re)?;
            w.write_f64::<LE>(m[(r, c)].im)?;
        }
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<Complex64>> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = r.read_f64::<LE>().map_err(fmt_err)?;
            let im = r.read_f64::<LE>().map_err(fmt_err)?;
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

fn read_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| r.read_f64::<LE>().map_err(fmt_err)).collect()
}

fn fmt_err(e: std::io::Error) -> Error {
    Error::Format(format!("truncated or unreadable container: {e}"))
}

fn read_header<R: Read>(r: &mut R, want: u32) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(fmt_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a twinbeam-vss container".into()));
    }
    let kind = r.read_u32::<LE>().map_err(fmt_err)?;
    if kind != want {
        return Err(Error::Format(format!("container holds kind {kind}, expected {want}")));
    }
    Ok(())
}

pub fn write_jsa<W: Write>(w: &mut W, jsa: &JointSpectralAmplitude) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(KIND_JSA)?;
    write_grid(w, &jsa.grid_s)?;
    write_grid(w, &jsa.grid_i)?;
    w.write_f64::<LE>(jsa.norm)?;
    w.write_f64::<LE>(jsa.edge_ratio)?;
    write_matrix(w, &jsa.values)
}

pub fn read_jsa<R: Read>(r: &mut R) -> Result<JointSpectralAmplitude> {
    read_header(r, KIND_JSA)?;
    let grid_s = read_grid(r)?;
    let grid_i = read_grid(r)?;
    let norm = r.read_f64::<LE>().map_err(fmt_err)?;
    let edge_ratio = r.read_f64::<LE>().map_err(fmt_err)?;
    let values = read_matrix(r, grid_s.len(), grid_i.len())?;
    Ok(JointSpectralAmplitude { grid_s, grid_i, values, norm, edge_ratio })
}

pub fn write_schmidt<W: Write>(w: &mut W, d: &SchmidtDecomposition) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(KIND_SCHMIDT)?;
    write_grid(w, &d.grid_s)?;
    write_grid(w, &d.grid_i)?;
    w.write_u64::<LE>(d.n_modes() as u64)?;
    w.write_f64::<LE>(d.gain)?;
    w.write_f64::<LE>(d.residual)?;
    for x in d.singular_values.iter().chain(&d.u).chain(&d.v) {
        w.write_f64::<LE>(*x)?;
    }
    write_matrix(w, &d.modes_s)?;
    write_matrix(w, &d.modes_i)
}

pub fn read_schmidt<R: Read>(r: &mut R) -> Result<SchmidtDecomposition> {
    read_header(r, KIND_SCHMIDT)?;
    let grid_s = read_grid(r)?;
    let grid_i = read_grid(r)?;
    let g = r.read_u64::<LE>().map_err(fmt_err)? as usize;
    let gain = r.read_f64::<LE>().map_err(fmt_err)?;
    let residual = r.read_f64::<LE>().map_err(fmt_err)?;
    let singular_values = read_vec(r, g)?;
    let u = read_vec(r, g)?;
    let v = read_vec(r, g)?;
    let modes_s = read_matrix(r, grid_s.len(), g)?;
    let modes_i = read_matrix(r, grid_i.len(), g)?;
    Ok(SchmidtDecomposition { grid_s, grid_i, singular_values, modes_s, modes_i, gain, u, v, residual })
}

pub fn save_jsa(path: &Path, jsa: &JointSpectralAmplitude) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_jsa(&mut w, jsa).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_jsa(path: &Path) -> Result<JointSpectralAmplitude> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsa(&mut BufReader::new(f))
}

pub fn save_schmidt(path: &Path, d: &SchmidtDecomposition) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_schmidt(&mut w, d).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_schmidt(path: &Path) -> Result<SchmidtDecomposition> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_schmidt(&mut BufReader::new(f))
}
