//! Binary feature files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic    b"SDASFEAT"
//! version  u32 (1)
//! kind     u8  (0 = sdass, 1 = spin)
//! params   u32 length + UTF-8 key=value lines
//! mr       f64
//! count    u64
//! len      u32 feature length
//! record × count:
//!   x y z  f64 × 3
//!   valid  u8
//!   values f64 × len   (only when valid = 1)
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::io::{csv_bytes, write_atomic};
use crate::sdass::{Described, FeatureVector};

const MAGIC: &[u8; 8] = b"SDASFEAT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Sdass,
    SpinImage,
}

impl DescriptorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DescriptorKind::Sdass => "sdass",
            DescriptorKind::SpinImage => "spin",
        }
    }

    fn code(&self) -> u8 {
        match self {
            DescriptorKind::Sdass => 0,
            DescriptorKind::SpinImage => 1,
        }
    }
}

impl FromStr for DescriptorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdass" => Ok(DescriptorKind::Sdass),
            "spin" => Ok(DescriptorKind::SpinImage),
            other => Err(Error::InvalidParameter(format!("unknown descriptor {other:?}"))),
        }
    }
}

impl fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub keypoint: Point3<f64>,
    /// `None` when description failed at this keypoint.
    pub feature: Option<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: DescriptorKind,
    /// `key=value` lines describing how the features were computed.
    pub params: String,
    pub mr: f64,
    pub feature_len: usize,
    pub records: Vec<FeatureRecord>,
}

impl FeatureSet {
    pub fn from_described(
        kind: DescriptorKind,
        params: String,
        mr: f64,
        feature_len: usize,
        described: &[Described],
    ) -> Result<Self> {
        let records = described
            .iter()
            .map(|d| {
                let feature = d.feature.as_ref().ok().cloned();
                if let Some(f) = &feature {
                    if f.len() != feature_len {
                        return Err(Error::FeatureFile(format!(
                            "feature of length {} in a set of length {feature_len}",
                            f.len()
                        )));
                    }
                }
                Ok(FeatureRecord {
                    keypoint: d.keypoint,
                    feature,
                })
            })
            .collect::<Result<_>>()?;
        Ok(FeatureSet {
            kind,
            params,
            mr,
            feature_len,
            records,
        })
    }

    pub fn valid_count(&self) -> usize {
        self.records.iter().filter(|r| r.feature.is_some()).count()
    }

    /// Records as [`Described`], failed ones carrying a degenerate-keypoint error.
    pub fn described(&self) -> Vec<Described> {
        self.records
            .iter()
            .map(|r| Described {
                keypoint: r.keypoint,
                feature: r
                    .feature
                    .clone()
                    .ok_or_else(|| Error::DegenerateKeypoint("description failed when the file was written".into())),
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        out.extend_from_slice(self.params.as_bytes());
        out.extend_from_slice(&self.mr.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.feature_len as u32).to_le_bytes());
        for r in &self.records {
            for c in [r.keypoint.x, r.keypoint.y, r.keypoint.z] {
                out.extend_from_slice(&c.to_le_bytes());
            }
            match &r.feature {
                Some(f) => {
                    out.push(1);
                    for v in f.values() {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                None => out.push(0),
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::FeatureFile("not a feature file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::FeatureFile(format!("unsupported version {version}")));
        }
        let kind = match r.take(1)?[0] {
            0 => DescriptorKind::Sdass,
            1 => DescriptorKind::SpinImage,
            k => return Err(Error::FeatureFile(format!("unknown descriptor code {k}"))),
        };
        let params_len = r.u32()? as usize;
        let params = String::from_utf8(r.take(params_len)?.to_vec())
            .map_err(|_| Error::FeatureFile("params block is not UTF-8".into()))?;
        let mr = r.f64()?;
        let count = r.u64()?;
        let feature_len = r.u32()? as usize;
        let mut records = Vec::new();
        for _ in 0..count {
            let keypoint = Point3::new(r.f64()?, r.f64()?, r.f64()?);
            let feature = match r.take(1)?[0] {
                0 => None,
                1 => {
                    let values = (0..feature_len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                    Some(FeatureVector::from_values(values).map_err(|e| Error::FeatureFile(e.to_string()))?)
                }
                f => return Err(Error::FeatureFile(format!("bad record flag {f}"))),
            };
            records.push(FeatureRecord { keypoint, feature });
        }
        if r.pos != bytes.len() {
            return Err(Error::FeatureFile(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(FeatureSet {
            kind,
            params,
            mr,
            feature_len,
            records,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(write_atomic(path, &self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// `x,y,z,valid,v1..vL`; failed records leave the values empty.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut header: Vec<String> = ["x", "y", "z", "valid"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=self.feature_len).map(|i| format!("v{i}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self.records.iter().map(|r| {
            let mut row = vec![
                format!("{:?}", r.keypoint.x),
                format!("{:?}", r.keypoint.y),
                format!("{:?}", r.keypoint.z),
                (r.feature.is_some() as u8).to_string(),
            ];
            match &r.feature {
                Some(f) => row.extend(f.values().iter().map(|v| format!("{v:?}"))),
                None => row.extend(std::iter::repeat_n(String::new(), self.feature_len)),
            }
            row
        });
        Ok(csv_bytes(&header, rows)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::FeatureFile("truncated".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
