//! `FVGC` binary cache: the moment coefficient table followed by mask banks.
//!
//! Little-endian layout:
//!
//! ```text
//! "FVGC" | version u32 | L u32 | max_order u32 | grid height u32 | grid width u32
//! table entries as (re f64, im f64), monomial-major
//! bank count u32, then per bank:
//!   mask count u32, then per mask:
//!     has_spec u32 | center 3×f64 | z0 f64 | r f64 | sigma f64 | exponent u32
//!     degree u32 | a_0..a_degree f64 | fit_residual f64
//!   upsilon rows as (re f64, im f64), mask-major then x, y, z
//! CRC32 of everything above, u32
//! ```

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mask::{BankMask, MaskBank, MaskSpec, PolynomialMask, ProfilePolynomial};
use crate::moments::{monomial_count, MomentCoefficientTable};
use crate::sphere::lm_len;

pub const CACHE_MAGIC: &[u8; 4] = b"FVGC";
pub const CACHE_VERSION: u32 = 1;

/// Everything precomputed for one bandwidth and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cache {
    pub table: MomentCoefficientTable,
    pub banks: Vec<MaskBank>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::CacheFormat(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn complex(&mut self, values: &[Complex64]) {
        self.0.reserve(values.len() * 16);
        for c in values {
            self.f64(c.re);
            self.f64(c.im);
        }
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::CacheFormat(format!("truncated at byte {}", self.pos)))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        let bytes = self.take(
            n.checked_mul(16)
                .ok_or_else(|| Error::CacheFormat("length overflow".into()))?,
        )?;
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

impl Cache {
    pub fn new(table: MomentCoefficientTable, banks: Vec<MaskBank>) -> Result<Self> {
        for b in &banks {
            if b.bandwidth() != table.bandwidth() {
                return Err(Error::BandwidthMismatch {
                    expected: table.bandwidth(),
                    actual: b.bandwidth(),
                });
            }
        }
        Ok(Self { table, banks })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let t = &self.table;
        let mut w = Writer(Vec::with_capacity(64 + t.len() * 16));
        w.0.extend_from_slice(CACHE_MAGIC);
        w.u32(CACHE_VERSION as usize)?;
        w.u32(t.bandwidth())?;
        w.u32(t.max_order())?;
        w.u32(t.grid_dims().0)?;
        w.u32(t.grid_dims().1)?;
        w.complex(t.entries());
        w.u32(self.banks.len())?;
        for bank in &self.banks {
            w.u32(bank.len())?;
            for m in bank.masks() {
                let c = m.poly.center();
                match &m.spec {
                    Some(s) => {
                        w.u32(1)?;
                        s.center.iter().for_each(|&x| w.f64(x));
                        w.f64(s.z0);
                        w.f64(s.r);
                        w.f64(s.sigma);
                        w.u32(s.exponent as usize)?;
                    }
                    None => {
                        w.u32(0)?;
                        [c.x, c.y, c.z, 0.0, 0.0, 0.0].iter().for_each(|&x| w.f64(x));
                        w.u32(0)?;
                    }
                }
                let coeffs = m.poly.profile().coeffs();
                w.u32(coeffs.len() - 1)?;
                coeffs.iter().for_each(|&a| w.f64(a));
                w.f64(m.poly.fit_residual());
            }
            w.complex(bank.upsilon());
        }
        let crc = crc32fast::hash(&w.0);
        w.0.extend_from_slice(&crc.to_le_bytes());
        Ok(w.0)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.len() < 4 + 24 + 4 {
            return Err(Error::CacheFormat(format!("file too short ({} bytes)", data.len())));
        }
        let (body, tail) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(Error::CacheFormat(format!(
                "CRC mismatch (stored {stored:08x}, computed {actual:08x})"
            )));
        }
        let mut r = Reader { data: body, pos: 0 };
        if r.take(4)? != CACHE_MAGIC {
            return Err(Error::CacheFormat("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CACHE_VERSION as usize {
            return Err(Error::CacheFormat(format!("unsupported version {version}")));
        }
        let bandwidth = r.u32()?;
        let max_order = r.u32()?;
        let dims = (r.u32()?, r.u32()?);
        let n = monomial_count(max_order as isize) * lm_len(bandwidth);
        let table = MomentCoefficientTable::from_raw(bandwidth, max_order, dims, r.complex(n)?)?;
        let bank_count = r.u32()?;
        let mut banks = Vec::with_capacity(bank_count);
        for _ in 0..bank_count {
            let count = r.u32()?;
            let mut masks = Vec::with_capacity(count);
            for _ in 0..count {
                let has_spec = r.u32()? == 1;
                let center = Vector3::new(r.f64()?, r.f64()?, r.f64()?);
                let (z0, rr, sigma) = (r.f64()?, r.f64()?, r.f64()?);
                let exponent = r.u32()? as u32;
                let degree = r.u32()?;
                let coeffs = (0..=degree).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                let residual = r.f64()?;
                let spec = if has_spec {
                    Some(MaskSpec {
                        center: [center.x, center.y, center.z],
                        z0,
                        r: rr,
                        sigma,
                        exponent,
                    })
                } else {
                    None
                };
                masks.push(BankMask {
                    spec,
                    poly: PolynomialMask::new(center, ProfilePolynomial::new(coeffs), residual),
                });
            }
            let upsilon = r.complex(count * 3 * lm_len(bandwidth))?;
            banks.push(MaskBank::from_raw(bandwidth, masks, upsilon)?);
        }
        if r.pos != body.len() {
            return Err(Error::CacheFormat(format!("{} trailing bytes", body.len() - r.pos)));
        }
        Ok(Self { table, banks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&data).map_err(|e| match e {
            Error::CacheFormat(msg) => Error::CacheFormat(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Bank whose masks all have range `r`, if any.
    pub fn bank_for_range(&self, r: f64) -> Option<&MaskBank> {
        self.banks.iter().find(|b| {
            b.masks()
                .first()
                .and_then(|m| m.spec)
                .is_some_and(|s| (s.r - r).abs() < 1e-12)
        })
    }
}
