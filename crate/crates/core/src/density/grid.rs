//! Regular evaluation lattice and its text and binary encodings.
//!
//! Binary layout, little-endian: three `u64` dims `(nx, ny, nz)`, three `f64`
//! spacings, three `f64` origin coordinates, then `nx * ny * nz` `f64`
//! densities in row-major order, index `(ix * ny + iy) * nz + iz`.

use serde::{Deserialize, Serialize};

use super::DensityError;
use crate::geometry::{Aabb, Vec3};

pub const GRID_HEADER_BYTES: usize = 72;

const MAX_NODES: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
    pub dims: [usize; 3],
}

impl GridSpec {
    /// Lattice over `bounds` with nodes every `spacing` meters from `bounds.min`.
    pub fn covering(bounds: &Aabb, spacing: f64) -> Result<Self, DensityError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(DensityError::Grid(format!("spacing must be positive, got {spacing}")));
        }
        let size = bounds.size();
        let n = |span: f64| (span.max(0.0) / spacing + 1e-9).floor() as usize + 1;
        let spec = GridSpec {
            origin: [bounds.min.x, bounds.min.y, bounds.min.z],
            spacing: [spacing; 3],
            dims: [n(size.x), n(size.y), n(size.z)],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        if self.dims.contains(&0) {
            return Err(DensityError::Grid("grid has a zero dimension".into()));
        }
        if !self.spacing.iter().all(|s| s.is_finite() && *s > 0.0) || !self.origin.iter().all(|o| o.is_finite()) {
            return Err(DensityError::Grid("grid spacing and origin must be finite, spacing positive".into()));
        }
        let total = self.dims.iter().try_fold(1usize, |acc, d| acc.checked_mul(*d));
        if total.is_none_or(|t| t > MAX_NODES) {
            return Err(DensityError::Grid(format!("grid {:?} exceeds {MAX_NODES} nodes", self.dims)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    pub fn point(&self, i: usize) -> Vec3 {
        let iz = i % self.dims[2];
        let iy = (i / self.dims[2]) % self.dims[1];
        let ix = i / (self.dims[1] * self.dims[2]);
        Vec3::new(
            self.origin[0] + ix as f64 * self.spacing[0],
            self.origin[1] + iy as f64 * self.spacing[1],
            self.origin[2] + iz as f64 * self.spacing[2],
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// CSV with header `x,y,z,density`, one row per node in index order.
    pub fn to_text(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "z", "density"]).expect("in-memory csv write");
        for (i, v) in self.values.iter().enumerate() {
            let p = self.spec.point(i);
            w.write_record([p.x.to_string(), p.y.to_string(), p.z.to_string(), v.to_string()])
                .expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(GRID_HEADER_BYTES + 8 * self.values.len());
        for d in self.spec.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in self.spec.spacing.iter().chain(&self.spec.origin).chain(&self.values) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, DensityError> {
        if bytes.len() < GRID_HEADER_BYTES {
            return Err(DensityError::Grid(format!("{} bytes is shorter than the header", bytes.len())));
        }
        let word = |i: usize| <[u8; 8]>::try_from(&bytes[8 * i..8 * i + 8]).expect("8-byte slice");
        let dim = |i: usize| usize::try_from(u64::from_le_bytes(word(i))).unwrap_or(usize::MAX);
        let f = |i: usize| f64::from_le_bytes(word(i));
        let spec = GridSpec { dims: [dim(0), dim(1), dim(2)], spacing: [f(3), f(4), f(5)], origin: [f(6), f(7), f(8)] };
        spec.validate()?;
        let n = spec.len();
        if bytes.len() != GRID_HEADER_BYTES + 8 * n {
            return Err(DensityError::Grid(format!(
                "expected {} bytes for {n} values, got {}",
                GRID_HEADER_BYTES + 8 * n,
                bytes.len()
            )));
        }
        let values = (0..n).map(|i| f(9 + i)).collect();
        Ok(DensityGrid { spec, values })
    }
}
