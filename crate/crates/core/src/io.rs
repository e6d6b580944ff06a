//! Snapshot, checkpoint and ledger files.
//!
//! Binary layout (little-endian), used for both snapshots and checkpoints:
//!
//! ```text
//! offset  size      field
//! 0       4         magic "QTLC"
//! 4       4         u32 format version (1)
//! 8       4         u32 dim
//! 12      4         u32 n
//! 16      8         f64 length
//! 24      4         u32 scheme (0 spectral, 1 central2)
//! 28      4         u32 system (0 biaxial, 1 uniaxial)
//! 32      64        f64 a, b, c, L1, L2, L3, L4, L
//! 96      8         f64 t
//! 104     8         u64 step
//! 112     40 N      f64 Q11, Q12, Q13, Q22, Q23 per point
//! ...     24 N      f64 v1, v2, v3 per point
//! ```
//!
//! Points are ordered `ix + n·iy + n²·iz`.
//!
//! The CSV snapshot starts with one `#` line carrying the same header
//! fields as `key=value` pairs, then the column line
//! `x,y(,z),Q11,Q12,Q13,Q22,Q23,v1,v2,v3`. Numbers are written in shortest
//! round-trip form, so binary to CSV to binary is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::energy::Material;
use crate::error::{Error, Result};
use crate::grid::{Grid, Scheme, TensorField, VectorField};
use crate::qtensor::QTensor;
use crate::solver::{EnergyLedger, SimState, System};

pub const MAGIC: &[u8; 4] = b"QTLC";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 112;

fn material_values(m: &Material) -> [f64; 8] {
    let e = &m.elastic;
    [m.bulk.a(), m.bulk.b(), m.bulk.c(), e.l1(), e.l2(), e.l3(), e.l4(), e.big_l()]
}

fn material_from(v: &[f64; 8]) -> Result<Material> {
    Material::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7])
}

pub fn encode_state(state: &SimState) -> Vec<u8> {
    let g = state.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 64 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.length().to_le_bytes());
    out.extend_from_slice(&g.scheme().code().to_le_bytes());
    out.extend_from_slice(&state.system.code().to_le_bytes());
    for x in material_values(&state.material) {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&(state.step as u64).to_le_bytes());
    for q in state.q.values() {
        for x in q.components() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for v in state.v.values() {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Snapshot(format!("truncated file at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_state(bytes: &[u8]) -> Result<SimState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Snapshot("bad magic (expected QTLC)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let dim = r.u32()? as usize;
    let n = r.u32()? as usize;
    let length = r.f64()?;
    let scheme = Scheme::from_code(r.u32()?).ok_or_else(|| Error::Snapshot("bad scheme code".into()))?;
    let system = System::from_code(r.u32()?).ok_or_else(|| Error::Snapshot("bad system code".into()))?;
    let mut m = [0.0; 8];
    for x in m.iter_mut() {
        *x = r.f64()?;
    }
    let t = r.f64()?;
    let step = r.u64()? as usize;
    let grid = Grid::new(dim, n, length, scheme)?;
    let mut q = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let mut c = [0.0; 5];
        for x in c.iter_mut() {
            *x = r.f64()?;
        }
        q.push(QTensor::from_components(c));
    }
    let mut v = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        v.push(Vector3::new(r.f64()?, r.f64()?, r.f64()?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Snapshot(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let mut state = SimState::new(
        TensorField::new(grid, q)?,
        VectorField::new(grid, v)?,
        system,
        material_from(&m)?,
    )?;
    state.t = t;
    state.step = step;
    Ok(state)
}

pub fn write_checkpoint(path: &Path, state: &SimState) -> Result<()> {
    fs::write(path, encode_state(state))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<SimState> {
    let bytes = fs::read(path).map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
    decode_state(&bytes)
}

fn csv_columns(dim: usize) -> String {
    let coords = if dim == 3 { "x,y,z" } else { "x,y" };
    format!("{coords},Q11,Q12,Q13,Q22,Q23,v1,v2,v3")
}

pub fn state_to_csv(state: &SimState) -> String {
    let g = state.grid();
    let m = material_values(&state.material);
    let mut s = format!(
        "# dim={} n={} length={:e} scheme={} system={} a={:e} b={:e} c={:e} L1={:e} L2={:e} L3={:e} L4={:e} L={:e} t={:e} step={}\n",
        g.dim(),
        g.n(),
        g.length(),
        g.scheme().as_str(),
        state.system.as_str(),
        m[0],
        m[1],
        m[2],
        m[3],
        m[4],
        m[5],
        m[6],
        m[7],
        state.t,
        state.step
    );
    s.push_str(&csv_columns(g.dim()));
    s.push('\n');
    for i in 0..g.len() {
        let x = g.coords(i);
        let mut fields: Vec<String> = x.iter().take(g.dim()).map(|c| format!("{c:e}")).collect();
        fields.extend(state.q.values()[i].components().iter().map(|c| format!("{c:e}")));
        fields.extend(state.v.values()[i].iter().map(|c| format!("{c:e}")));
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn state_from_csv(text: &str) -> Result<SimState> {
    let mut lines = text.lines();
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::Snapshot("missing `#` metadata line".into()))?;
    let get = |key: &str| -> Result<&str> {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| Error::Snapshot(format!("metadata is missing `{key}`")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse::<f64>()
            .map_err(|e| Error::Snapshot(format!("metadata `{key}`: {e}")))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse::<usize>()
            .map_err(|e| Error::Snapshot(format!("metadata `{key}`: {e}")))
    };
    let dim = int("dim")?;
    let scheme: Scheme = get("scheme")?.parse().map_err(Error::Snapshot)?;
    let system: System = get("system")?.parse().map_err(Error::Snapshot)?;
    let grid = Grid::new(dim, int("n")?, num("length")?, scheme)?;
    let material = Material::new(
        num("a")?,
        num("b")?,
        num("c")?,
        num("L1")?,
        num("L2")?,
        num("L3")?,
        num("L4")?,
        num("L")?,
    )?;
    let header = lines.next().ok_or_else(|| Error::Snapshot("missing column line".into()))?;
    if header.trim() != csv_columns(dim) {
        return Err(Error::Snapshot(format!("unexpected columns `{header}`")));
    }
    let mut q = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (row, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Snapshot(format!("row {row}: {e}")))?;
        if vals.len() != dim + 8 {
            return Err(Error::Snapshot(format!("row {row}: expected {} values", dim + 8)));
        }
        let d = &vals[dim..];
        q.push(QTensor::from_components([d[0], d[1], d[2], d[3], d[4]]));
        v.push(Vector3::new(d[5], d[6], d[7]));
    }
    let mut state = SimState::new(TensorField::new(grid, q)?, VectorField::new(grid, v)?, system, material)?;
    state.t = num("t")?;
    state.step = int("step")?;
    Ok(state)
}

/// Per-point largest eigenvalue and its unit eigenvector (sign-normalized).
pub fn director_csv(state: &SimState) -> String {
    let g = state.grid();
    let coords = if g.dim() == 3 { "x,y,z" } else { "x,y" };
    let mut s = format!("{coords},order,n1,n2,n3\n");
    for i in 0..g.len() {
        let x = g.coords(i);
        let eig = state.q.values()[i].eigen();
        let u = crate::eigen::normalize_sign(eig.rotation.column(2));
        let mut fields: Vec<String> = x.iter().take(g.dim()).map(|c| format!("{c:e}")).collect();
        fields.push(format!("{:e}", eig.eigenvalues[2]));
        fields.extend(u.iter().map(|c| format!("{c:e}")));
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(ledger.to_csv().as_bytes())?;
    Ok(())
}
