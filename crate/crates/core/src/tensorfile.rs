//! Versioned little-endian container for named f64 tensors.
//!
//! Layout: magic `TBRT`, format version (u32), kind string, JSON metadata
//! string, tensor count (u32), then per tensor: name, rank (u32), dims (u64
//! each) and the row-major f64 payload. Strings are u32-length-prefixed UTF-8.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TBRT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_matrix(name: &str, m: &Array2<f64>) -> Self {
        Self {
            name: name.to_string(),
            shape: m.shape().to_vec(),
            data: m.iter().copied().collect(),
        }
    }

    pub fn from_vector(name: &str, v: &Array1<f64>) -> Self {
        Self {
            name: name.to_string(),
            shape: vec![v.len()],
            data: v.to_vec(),
        }
    }

    pub fn from_scalar(name: &str, x: f64) -> Self {
        Self {
            name: name.to_string(),
            shape: vec![],
            data: vec![x],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBundle {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<Tensor>,
}

impl TensorBundle {
    pub fn new(kind: &str, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.to_string(),
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, t: Tensor) {
        self.tensors.push(t);
    }

    fn take(&mut self, name: &str) -> Result<Tensor> {
        let pos = self
            .tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| Error::Format(format!("tensor `{name}` missing")))?;
        Ok(self.tensors.remove(pos))
    }

    pub fn take_matrix(&mut self, name: &str) -> Result<Array2<f64>> {
        let t = self.take(name)?;
        match t.shape[..] {
            [r, c] => Array2::from_shape_vec((r, c), t.data).map_err(|e| Error::Shape(e.to_string())),
            _ => Err(Error::Shape(format!("`{name}` is not a matrix: {:?}", t.shape))),
        }
    }

    pub fn take_vector(&mut self, name: &str) -> Result<Array1<f64>> {
        let t = self.take(name)?;
        match t.shape[..] {
            [_] => Ok(Array1::from(t.data)),
            _ => Err(Error::Shape(format!("`{name}` is not a vector: {:?}", t.shape))),
        }
    }

    pub fn take_scalar(&mut self, name: &str) -> Result<f64> {
        let t = self.take(name)?;
        match (t.shape.len(), t.data.as_slice()) {
            (0, [x]) => Ok(*x),
            _ => Err(Error::Shape(format!("`{name}` is not a scalar"))),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        write_str(w, &self.kind)?;
        write_str(w, &self.meta.to_string())?;
        w.write_u32::<LittleEndian>(self.tensors.len() as u32)?;
        for t in &self.tensors {
            write_str(w, &t.name)?;
            w.write_u32::<LittleEndian>(t.shape.len() as u32)?;
            for &d in &t.shape {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            for &x in &t.data {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(format!("tensor file: {e}"));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad tensor file magic".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(fmt)?;
        if version != VERSION {
            return Err(Error::Format(format!("tensor file version {version}")));
        }
        let kind = read_str(r).map_err(fmt)?;
        let meta = serde_json::from_str(&read_str(r).map_err(fmt)?)
            .map_err(|e| Error::Format(format!("tensor metadata: {e}")))?;
        let n = r.read_u32::<LittleEndian>().map_err(fmt)?;
        let mut tensors = Vec::with_capacity(n as usize);
        for _ in 0..n {
            let name = read_str(r).map_err(fmt)?;
            let rank = r.read_u32::<LittleEndian>().map_err(fmt)?;
            let shape: Vec<usize> = (0..rank)
                .map(|_| r.read_u64::<LittleEndian>().map(|d| d as usize))
                .collect::<std::io::Result<_>>()
                .map_err(fmt)?;
            let len: usize = shape.iter().product();
            let mut data = vec![0.0; len];
            r.read_f64_into::<LittleEndian>(&mut data).map_err(fmt)?;
            tensors.push(Tensor { name, shape, data });
        }
        Ok(Self { kind, meta, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(f))
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected `{kind}` file, found `{}`", self.kind)));
        }
        Ok(())
    }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u32::<LittleEndian>(s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let len = r.read_u32::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
