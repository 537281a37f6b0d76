//! Little-endian binary containers, each closed by a CRC32 of every
//! preceding byte.
//!
//! * `LCSF`: an n-dimensional array of `f64` (dtype 0) or `i32` (dtype 1).
//!   Layout: magic, `u16` version, `u8` dtype, `u8` ndim, `ndim x u64`
//!   shape, row-major payload, `u32` CRC.
//! * `LCSM`: an [`EpsilonModel`].
//! * `LCSR`: an [`ScaRule`].

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::causal_states::{DecodeWeighting, EpsilonModel};
use crate::clustering::{ClusterModel, PsiMap};
use crate::dynamics::ScaRule;
use crate::lightcone::{LightconeShape, Side, VectorSet};
use crate::{Error, Grid, Result};

pub const VERSION: u16 = 1;
const FIELD_MAGIC: &[u8; 4] = b"LCSF";
const MODEL_MAGIC: &[u8; 4] = b"LCSM";
const RULE_MAGIC: &[u8; 4] = b"LCSR";

/// Element types storable in an `LCSF` file.
pub trait Element: Copy + Sized {
    const DTYPE: u8;
    const SIZE: usize;
    fn put(self, out: &mut Vec<u8>);
    fn take(bytes: &[u8]) -> Self;
}

impl Element for f64 {
    const DTYPE: u8 = 0;
    const SIZE: usize = 8;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

impl Element for i32 {
    const DTYPE: u8 = 1;
    const SIZE: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn take(bytes: &[u8]) -> Self {
        i32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

fn seal(mut bytes: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    bytes
}

/// Checks magic, version and CRC; returns the body after the version.
fn unseal<'a>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<Reader<'a>> {
    if bytes.len() < 10 {
        return Err(Error::format("file too short"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(Error::format("CRC mismatch: file is corrupt or truncated"));
    }
    let mut reader = Reader { bytes: body, pos: 4 };
    let version = reader.u16()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported version {version}")));
    }
    Ok(reader)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format("unexpected end of data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize32(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn u64s(&mut self, n: usize) -> Result<Vec<u64>> {
        (0..n).map(|_| self.u64()).collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn header(magic: &[u8; 4]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out
}

/// Serializes an array of any rank.
pub fn encode_array<T: Element>(shape: &[usize], data: &[T]) -> Result<Vec<u8>> {
    if shape.len() > u8::MAX as usize {
        return Err(Error::config("too many dimensions"));
    }
    if shape.iter().product::<usize>() != data.len() {
        return Err(Error::config("array shape does not match its data"));
    }
    let mut out = header(FIELD_MAGIC);
    out.reserve(shape.len() * 8 + data.len() * T::SIZE + 6);
    out.push(T::DTYPE);
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for &v in data {
        v.put(&mut out);
    }
    Ok(seal(out))
}

/// Parses an `LCSF` array of element type `T`.
pub fn decode_array<T: Element>(bytes: &[u8]) -> Result<(Vec<usize>, Vec<T>)> {
    let mut r = unseal(bytes, FIELD_MAGIC)?;
    let dtype = r.u8()?;
    if dtype != T::DTYPE {
        return Err(Error::format(format!("dtype code {dtype}, expected {}", T::DTYPE)));
    }
    let ndim = r.u8()? as usize;
    let shape: Vec<usize> = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<_>>()?;
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("shape overflows"))?;
    let payload = r.take(count.checked_mul(T::SIZE).ok_or_else(|| Error::format("shape overflows"))?)?;
    r.finish()?;
    Ok((shape, payload.chunks_exact(T::SIZE).map(T::take).collect()))
}

pub fn encode_grid<T: Element>(grid: &Grid<T>) -> Result<Vec<u8>> {
    encode_array(&[grid.rows(), grid.cols()], grid.data())
}

pub fn decode_grid<T: Element>(bytes: &[u8]) -> Result<Grid<T>> {
    let (shape, data) = decode_array::<T>(bytes)?;
    match shape.as_slice() {
        &[rows, cols] => Grid::from_vec(rows, cols, data).map_err(|e| Error::format(e.to_string())),
        _ => Err(Error::format(format!("expected a 2-d array, got shape {shape:?}"))),
    }
}

/// Writes through a temporary file and renames, so a failed write never
/// leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_grid<T: Element>(path: &Path, grid: &Grid<T>) -> Result<()> {
    write_atomic(path, &encode_grid(grid)?)
}

pub fn read_grid<T: Element>(path: &Path) -> Result<Grid<T>> {
    decode_grid(&fs::read(path)?)
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::config(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_cluster_model(out: &mut Vec<u8>, m: &ClusterModel) -> Result<()> {
    put_u32(out, m.k())?;
    put_u32(out, m.dim())?;
    m.centroids().as_slice().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    m.counts().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    out.extend_from_slice(&m.inertia().to_le_bytes());
    Ok(())
}

fn take_cluster_model(r: &mut Reader, shape: LightconeShape, side: Side) -> Result<ClusterModel> {
    let k = r.usize32()?;
    let dim = r.usize32()?;
    let centroids = VectorSet::new(dim, r.f64s(k * dim)?)?;
    let counts = r.u64s(k)?;
    let inertia = r.f64()?;
    ClusterModel::new(shape, side, centroids)?.with_stats(counts, inertia)
}

/// Serializes a fitted model. Merge history is not stored.
pub fn encode_model(model: &EpsilonModel) -> Result<Vec<u8>> {
    let mut out = header(MODEL_MAGIC);
    let shape = model.shape();
    put_u32(&mut out, shape.h_minus)?;
    put_u32(&mut out, shape.h_plus)?;
    put_u32(&mut out, shape.c)?;
    out.extend_from_slice(&shape.tau.to_le_bytes());
    out.push(model.weighting().code());
    put_cluster_model(&mut out, model.gamma_minus())?;
    put_cluster_model(&mut out, model.gamma_plus())?;
    let psi = model.psi();
    put_u32(&mut out, psi.mapping.len())?;
    for &s in &psi.mapping {
        put_u32(&mut out, s as usize)?;
    }
    put_u32(&mut out, psi.n_states())?;
    put_u32(&mut out, model.gamma_plus().k())?;
    psi.state_counts.iter().flatten().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    psi.state_pmfs.iter().flatten().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(seal(out))
}

pub fn decode_model(bytes: &[u8]) -> Result<EpsilonModel> {
    let bad = |e: Error| Error::format(format!("invalid model: {e}"));
    let mut r = unseal(bytes, MODEL_MAGIC)?;
    let shape = LightconeShape {
        h_minus: r.usize32()?,
        h_plus: r.usize32()?,
        c: r.usize32()?,
        tau: r.f64()?,
    };
    let weighting = DecodeWeighting::from_code(r.u8()?).map_err(bad)?;
    let past = take_cluster_model(&mut r, shape, Side::Past).map_err(bad)?;
    let future = take_cluster_model(&mut r, shape, Side::Future).map_err(bad)?;
    let n_past = r.usize32()?;
    let mapping = (0..n_past).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n_states = r.usize32()?;
    let n_future = r.usize32()?;
    let counts = r.u64s(n_states * n_future)?;
    let pmfs = r.f64s(n_states * n_future)?;
    r.finish()?;
    let state_counts = counts.chunks(n_future.max(1)).map(<[u64]>::to_vec).collect();
    let psi = PsiMap::from_parts(mapping, state_counts).map_err(bad)?;
    if psi.state_pmfs.iter().flatten().ne(pmfs.iter()) {
        return Err(Error::format("stored state distributions disagree with stored counts"));
    }
    EpsilonModel::from_parts(shape, past, future, psi, weighting).map_err(bad)
}

pub fn write_model(path: &Path, model: &EpsilonModel) -> Result<()> {
    write_atomic(path, &encode_model(model)?)
}

pub fn read_model(path: &Path) -> Result<EpsilonModel> {
    decode_model(&fs::read(path)?)
}

/// Serializes a rule: header, then per neighborhood the key labels
/// (`u32`), the successor counts (`u64`) and the PMF (`f64`).
pub fn encode_rule(rule: &ScaRule) -> Result<Vec<u8>> {
    let mut out = header(RULE_MAGIC);
    put_u32(&mut out, rule.radius())?;
    put_u32(&mut out, rule.n_states())?;
    out.extend_from_slice(&(rule.len() as u64).to_le_bytes());
    for (key, entry) in rule.entries() {
        for &s in key {
            put_u32(&mut out, s as usize)?;
        }
        entry.counts.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        entry.pmf.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    Ok(seal(out))
}

pub fn decode_rule(bytes: &[u8]) -> Result<ScaRule> {
    let mut r = unseal(bytes, RULE_MAGIC)?;
    let radius = r.usize32()?;
    let n_states = r.usize32()?;
    let entries = r.u64()?;
    let width = 2 * radius + 1;
    let mut counts = BTreeMap::new();
    let mut pmfs = Vec::new();
    for _ in 0..entries {
        let key = (0..width).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        counts.insert(key, r.u64s(n_states)?);
        pmfs.push(r.f64s(n_states)?);
    }
    r.finish()?;
    let rule = ScaRule::from_counts(radius, n_states, counts)
        .map_err(|e| Error::format(format!("invalid rule: {e}")))?;
    if rule.len() as u64 != entries || rule.entries().map(|(_, e)| &e.pmf).ne(pmfs.iter()) {
        return Err(Error::format("stored rule distributions disagree with stored counts"));
    }
    Ok(rule)
}

pub fn write_rule(path: &Path, rule: &ScaRule) -> Result<()> {
    write_atomic(path, &encode_rule(rule)?)
}

pub fn read_rule(path: &Path) -> Result<ScaRule> {
    decode_rule(&fs::read(path)?)
}
