//! Chart configuration files and the binary field format.
//!
//! Chart configuration (TOML):
//!
//! ```toml
//! kind = "sphere-stereographic"   # or "periodic-torus", "flat-box"
//! n = 3
//! resolution = 64
//! r_max = 3.0                      # box and sphere charts
//! periods = [6.283185307179586]    # torus: one shared value or one per axis
//! ```
//!
//! Field files are little-endian with a fixed 40-byte header:
//!
//! ```text
//! offset  size  content
//!      0     8  magic "SPZFIELD"
//!      8     4  u32 format version (1)
//!     12     4  u32 chart kind (0 flat-box, 1 periodic-torus, 2 sphere-stereographic)
//!     16     4  u32 dimension n
//!     20     4  u32 resolution per axis
//!     24     4  u32 components per node
//!     28     4  u32 value type (0 real, 1 complex)
//!     32     8  u64 node count (resolution^n)
//!     40     .  f64 values, node-major; complex values as (re, im) pairs
//! ```
//!
//! Node `i` has multi-index `(i mod res, (i / res) mod res, ...)`, axis 0
//! fastest. Values are stored bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chart::{make_chart, Chart, ChartKind, ChartParams};
use crate::error::{Error, Result};
use crate::field::{ScalarField, Spinor, SpinorField, VectorField};
use crate::C64;

pub const FIELD_MAGIC: &[u8; 8] = b"SPZFIELD";
pub const FIELD_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub kind: ChartKind,
    pub n: usize,
    pub resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
}

impl ChartConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Chart> {
        let params = ChartParams { periods: self.periods.clone(), r_max: self.r_max };
        make_chart(self.kind, self.n, self.resolution, &params)
    }
}

/// Contents of a field file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub kind: ChartKind,
    pub n: usize,
    pub res: usize,
    /// Components per node (complex components count once).
    pub components: usize,
    pub complex: bool,
    /// Raw values, node-major, `(re, im)` interleaved when complex.
    pub values: Vec<f64>,
}

impl FieldFile {
    fn for_chart(chart: &Chart, components: usize, complex: bool, values: Vec<f64>) -> Self {
        FieldFile { kind: chart.kind, n: chart.n, res: chart.res, components, complex, values }
    }

    pub fn from_scalar(chart: &Chart, f: &ScalarField) -> Result<Self> {
        check_len(chart, f.len())?;
        Ok(Self::for_chart(chart, 1, false, f.values()))
    }

    pub fn from_vector(chart: &Chart, f: &VectorField) -> Result<Self> {
        check_len(chart, f.len())?;
        let values: Vec<f64> = (0..f.len()).flat_map(|i| f.at(i).into_iter()).collect();
        let components = if f.is_empty() { 0 } else { values.len() / f.len() };
        if (0..f.len()).any(|i| f.at(i).len() != components) {
            return Err(Error::Shape("ragged vector field".into()));
        }
        Ok(Self::for_chart(chart, components, false, values))
    }

    pub fn from_spinor(chart: &Chart, f: &SpinorField) -> Result<Self> {
        check_len(chart, f.len())?;
        let dim = if f.is_empty() { 0 } else { f.at(0).dim() };
        let mut values = Vec::with_capacity(2 * dim * f.len());
        for i in 0..f.len() {
            let s = f.at(i);
            if s.dim() != dim {
                return Err(Error::Shape("ragged spinor field".into()));
            }
            for c in s.0.iter() {
                values.push(c.re);
                values.push(c.im);
            }
        }
        Ok(Self::for_chart(chart, dim, true, values))
    }

    pub fn nodes(&self) -> usize {
        self.res.pow(self.n as u32)
    }

    /// Whether the header matches `chart`.
    pub fn matches(&self, chart: &Chart) -> bool {
        self.kind == chart.kind && self.n == chart.n && self.res == chart.res
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.complex || self.components != 1 {
            return Err(Error::Shape(format!("not a real scalar field ({} components)", self.components)));
        }
        Ok(ScalarField::from_values(self.values.clone()))
    }

    pub fn to_vector(&self) -> Result<VectorField> {
        if self.complex {
            return Err(Error::Shape("complex data is not a vector field".into()));
        }
        let c = self.components;
        Ok(VectorField::from_values(self.values.chunks(c.max(1)).map(|v| v.iter().copied().collect()).collect()))
    }

    pub fn to_spinor(&self) -> Result<SpinorField> {
        if !self.complex {
            return Err(Error::Shape("real data is not a spinor field".into()));
        }
        let c = self.components;
        Ok(SpinorField::from_values(
            self.values.chunks(2 * c.max(1)).map(|v| Spinor(v.chunks(2).map(|p| C64::new(p[0], p[1])).collect())).collect(),
        ))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(FIELD_MAGIC);
        for v in [FIELD_VERSION, self.kind.code(), self.n as u32, self.res as u32, self.components as u32, self.complex as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.nodes() as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != FIELD_MAGIC {
            return Err(Error::Config("not a field file".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != FIELD_VERSION {
            return Err(Error::Config(format!("unsupported field format version {version}")));
        }
        let kind = ChartKind::from_code(u32_at(12)).ok_or_else(|| Error::Config(format!("unknown chart kind {}", u32_at(12))))?;
        let (n, res, components) = (u32_at(16) as usize, u32_at(20) as usize, u32_at(24) as usize);
        let complex = match u32_at(28) {
            0 => false,
            1 => true,
            t => return Err(Error::Config(format!("unknown value type {t}"))),
        };
        let nodes = u64::from_le_bytes(bytes[32..40].try_into().unwrap()) as usize;
        if res.checked_pow(n as u32) != Some(nodes) {
            return Err(Error::Config(format!("node count {nodes} does not match {res}^{n}")));
        }
        let per = components * if complex { 2 } else { 1 };
        let want = nodes.checked_mul(per).and_then(|v| v.checked_mul(8)).map(|b| b + HEADER_LEN);
        if want != Some(bytes.len()) {
            return Err(Error::Config(format!("file has {} bytes, header implies {want:?}", bytes.len())));
        }
        let values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(FieldFile { kind, n, res, components, complex, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

fn check_len(chart: &Chart, len: usize) -> Result<()> {
    if len != chart.len() {
        return Err(Error::Shape(format!("field has {len} nodes, chart {}", chart.len())));
    }
    Ok(())
}

/// Write to a sibling temporary file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
