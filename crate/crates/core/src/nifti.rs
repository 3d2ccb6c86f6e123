//! NIfTI-1 single-file (`.nii` / `.nii.gz`) reading and writing.
//!
//! Only the subset needed for 3D masks and scalar maps is supported: one
//! volume per file, datatypes uint8 / int16 / int32 / float32 / float64.
//! Headers of either byte order are accepted; files are always written
//! little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::warn;
use nalgebra::{Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::volume::{column_norms, FlipMap, Grid, LesionMask, ScoreMap, Volume, SPACING_TOLERANCE};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte (empty) extension block.
pub const DEFAULT_VOX_OFFSET: usize = 352;
pub const MAGIC: [u8; 4] = *b"n+1\0";
const MAX_VOXELS: u64 = 1 << 31;
/// sform and qform further apart than this (max abs entry) trigger a warning.
const FORM_DISAGREEMENT: f64 = 1e-3;

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const QFORM_CODE: usize = 252;
    pub const SFORM_CODE: usize = 254;
    pub const QUATERN_B: usize = 256;
    pub const QOFFSET_X: usize = 268;
    pub const SROW_X: usize = 280;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl Datatype {
    pub fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => 2,
            Datatype::Int16 => 4,
            Datatype::Int32 => 8,
            Datatype::Float32 => 16,
            Datatype::Float64 => 64,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => Datatype::Uint8,
            4 => Datatype::Int16,
            8 => Datatype::Int32,
            16 => Datatype::Float32,
            64 => Datatype::Float64,
            other => {
                return Err(Error::Unsupported(format!("NIfTI datatype code {other}")));
            }
        })
    }

    pub fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Int32 | Datatype::Float32 => 4,
            Datatype::Float64 => 8,
        }
    }
}

/// The NIfTI-1 header fields this crate reads or writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub descrip: String,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub big_endian: bool,
}

impl Default for NiftiHeader {
    fn default() -> Self {
        NiftiHeader {
            dim: [3, 1, 1, 1, 1, 1, 1, 1],
            datatype: Datatype::Float32.code(),
            bitpix: 32,
            pixdim: [1.0; 8],
            vox_offset: DEFAULT_VOX_OFFSET as f32,
            scl_slope: 0.0,
            scl_inter: 0.0,
            xyzt_units: 2,
            descrip: String::new(),
            qform_code: 0,
            sform_code: 0,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            big_endian: false,
        }
    }
}

impl NiftiHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Format(format!(
                "file holds {} bytes, shorter than the {HEADER_SIZE}-byte header",
                bytes.len()
            )));
        }
        if LittleEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
            Self::parse_with::<LittleEndian>(bytes, false)
        } else if BigEndian::read_i32(&bytes[offsets::SIZEOF_HDR..]) == HEADER_SIZE as i32 {
            Self::parse_with::<BigEndian>(bytes, true)
        } else {
            Err(Error::Format("sizeof_hdr is not 348 in either byte order".into()))
        }
    }

    fn parse_with<B: ByteOrder>(bytes: &[u8], big_endian: bool) -> Result<Self> {
        if bytes[offsets::MAGIC..offsets::MAGIC + 4] != MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected single-file \"n+1\"",
                &bytes[offsets::MAGIC..offsets::MAGIC + 4]
            )));
        }
        let i16_at = |off: usize| B::read_i16(&bytes[off..]);
        let f32_at = |off: usize| B::read_f32(&bytes[off..]);

        let mut dim = [0i16; 8];
        let mut pixdim = [0f32; 8];
        for k in 0..8 {
            dim[k] = i16_at(offsets::DIM + 2 * k);
            pixdim[k] = f32_at(offsets::PIXDIM + 4 * k);
        }
        let mut quatern = [0f32; 3];
        let mut qoffset = [0f32; 3];
        for k in 0..3 {
            quatern[k] = f32_at(offsets::QUATERN_B + 4 * k);
            qoffset[k] = f32_at(offsets::QOFFSET_X + 4 * k);
        }
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f32_at(offsets::SROW_X + 16 * r + 4 * c);
            }
        }
        let descrip_raw = &bytes[offsets::DESCRIP..offsets::DESCRIP + 80];
        let end = descrip_raw.iter().position(|&b| b == 0).unwrap_or(80);

        Ok(NiftiHeader {
            dim,
            datatype: i16_at(offsets::DATATYPE),
            bitpix: i16_at(offsets::BITPIX),
            pixdim,
            vox_offset: f32_at(offsets::VOX_OFFSET),
            scl_slope: f32_at(offsets::SCL_SLOPE),
            scl_inter: f32_at(offsets::SCL_INTER),
            xyzt_units: bytes[offsets::XYZT_UNITS],
            descrip: String::from_utf8_lossy(&descrip_raw[..end]).into_owned(),
            qform_code: i16_at(offsets::QFORM_CODE),
            sform_code: i16_at(offsets::SFORM_CODE),
            quatern,
            qoffset,
            srow,
            big_endian,
        })
    }

    /// Serializes the 348-byte header in the byte order given by `big_endian`.
    pub fn to_bytes(&self) -> Vec<u8> {
        if self.big_endian {
            self.encode::<BigEndian>()
        } else {
            self.encode::<LittleEndian>()
        }
    }

    fn encode<B: ByteOrder>(&self) -> Vec<u8> {
        let mut buf = vec![0u8; HEADER_SIZE];
        B::write_i32(&mut buf[offsets::SIZEOF_HDR..], HEADER_SIZE as i32);
        // "regular" = 'r', kept for ANALYZE readers.
        buf[38] = b'r';
        for k in 0..8 {
            B::write_i16(&mut buf[offsets::DIM + 2 * k..], self.dim[k]);
            B::write_f32(&mut buf[offsets::PIXDIM + 4 * k..], self.pixdim[k]);
        }
        B::write_i16(&mut buf[offsets::DATATYPE..], self.datatype);
        B::write_i16(&mut buf[offsets::BITPIX..], self.bitpix);
        B::write_f32(&mut buf[offsets::VOX_OFFSET..], self.vox_offset);
        B::write_f32(&mut buf[offsets::SCL_SLOPE..], self.scl_slope);
        B::write_f32(&mut buf[offsets::SCL_INTER..], self.scl_inter);
        buf[offsets::XYZT_UNITS] = self.xyzt_units;
        let descrip = self.descrip.as_bytes();
        let n = descrip.len().min(79);
        buf[offsets::DESCRIP..offsets::DESCRIP + n].copy_from_slice(&descrip[..n]);
        B::write_i16(&mut buf[offsets::QFORM_CODE..], self.qform_code);
        B::write_i16(&mut buf[offsets::SFORM_CODE..], self.sform_code);
        for k in 0..3 {
            B::write_f32(&mut buf[offsets::QUATERN_B + 4 * k..], self.quatern[k]);
            B::write_f32(&mut buf[offsets::QOFFSET_X + 4 * k..], self.qoffset[k]);
        }
        for (r, row) in self.srow.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                B::write_f32(&mut buf[offsets::SROW_X + 16 * r + 4 * c..], v);
            }
        }
        buf[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(&MAGIC);
        buf
    }

    /// Spatial dims after collapsing a trailing singleton time axis.
    pub fn spatial_dims(&self) -> Result<[usize; 3]> {
        let ndim = self.dim[0];
        if !(3..=4).contains(&ndim) {
            return Err(Error::Unsupported(format!(
                "dim[0] = {ndim}; only 3D volumes (or 4D with one frame) are supported"
            )));
        }
        if ndim == 4 && self.dim[4] != 1 {
            return Err(Error::Unsupported(format!(
                "4D series with {} frames",
                self.dim[4]
            )));
        }
        let mut dims = [0usize; 3];
        let mut total: u64 = 1;
        for (axis, slot) in dims.iter_mut().enumerate() {
            let d = self.dim[axis + 1];
            if d <= 0 {
                return Err(Error::Format(format!("dim[{}] = {d} is not positive", axis + 1)));
            }
            *slot = d as usize;
            total = total
                .checked_mul(d as u64)
                .ok_or_else(|| Error::Capacity("voxel count overflows".into()))?;
        }
        if total > MAX_VOXELS {
            return Err(Error::Capacity(format!(
                "{total} voxels exceeds the 2^31 limit"
            )));
        }
        Ok(dims)
    }

    /// Affine from the quaternion fields, following the NIfTI-1 standard.
    pub fn qform_affine(&self) -> Matrix4<f64> {
        let [b, c, d] = self.quatern.map(f64::from);
        let mut b = b;
        let mut c = c;
        let mut d = d;
        let mut a = 1.0 - (b * b + c * c + d * d);
        if a < 1e-7 {
            a = 1.0 / (b * b + c * c + d * d).sqrt();
            b *= a;
            c *= a;
            d *= a;
            a = 0.0;
        } else {
            a = a.sqrt();
        }
        let positive = |v: f32| if v > 0.0 { f64::from(v) } else { 1.0 };
        let xd = positive(self.pixdim[1]);
        let yd = positive(self.pixdim[2]);
        let qfac = if self.pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let zd = positive(self.pixdim[3]) * qfac;

        let r = Matrix3::new(
            a * a + b * b - c * c - d * d,
            2.0 * (b * c - a * d),
            2.0 * (b * d + a * c),
            2.0 * (b * c + a * d),
            a * a + c * c - b * b - d * d,
            2.0 * (c * d - a * b),
            2.0 * (b * d - a * c),
            2.0 * (c * d + a * b),
            a * a + d * d - c * c - b * b,
        );
        let mut m = Matrix4::identity();
        for row in 0..3 {
            m[(row, 0)] = r[(row, 0)] * xd;
            m[(row, 1)] = r[(row, 1)] * yd;
            m[(row, 2)] = r[(row, 2)] * zd;
            m[(row, 3)] = f64::from(self.qoffset[row]);
        }
        m
    }

    pub fn sform_affine(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        for (r, row) in self.srow.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m[(r, c)] = f64::from(v);
            }
        }
        m
    }

    /// Sets the quaternion fields from an affine whose columns are orthogonal.
    /// Returns false (and leaves the header untouched) when the linear part is
    /// not a scaled rotation, e.g. when it carries shear.
    pub fn set_qform(&mut self, affine: &Matrix4<f64>) -> bool {
        let norms = column_norms(affine);
        if norms.iter().any(|&n| n <= 0.0) {
            return false;
        }
        let mut r = Matrix3::zeros();
        for row in 0..3 {
            for col in 0..3 {
                r[(row, col)] = affine[(row, col)] / norms[col];
            }
        }
        if (r.transpose() * r - Matrix3::identity()).abs().max() > 1e-4 {
            return false;
        }
        let qfac = if r.determinant() < 0.0 {
            for row in 0..3 {
                r[(row, 2)] = -r[(row, 2)];
            }
            -1.0
        } else {
            1.0
        };
        let (r11, r12, r13) = (r[(0, 0)], r[(0, 1)], r[(0, 2)]);
        let (r21, r22, r23) = (r[(1, 0)], r[(1, 1)], r[(1, 2)]);
        let (r31, r32, r33) = (r[(2, 0)], r[(2, 1)], r[(2, 2)]);
        let trace = r11 + r22 + r33 + 1.0;
        let (a, mut b, mut c, mut d);
        if trace > 0.5 {
            a = 0.5 * trace.sqrt();
            b = 0.25 * (r32 - r23) / a;
            c = 0.25 * (r13 - r31) / a;
            d = 0.25 * (r21 - r12) / a;
        } else {
            let xd = 1.0 + r11 - (r22 + r33);
            let yd = 1.0 + r22 - (r11 + r33);
            let zd = 1.0 + r33 - (r11 + r22);
            if xd > 1.0 {
                b = 0.5 * xd.sqrt();
                c = 0.25 * (r12 + r21) / b;
                d = 0.25 * (r13 + r31) / b;
                a = 0.25 * (r32 - r23) / b;
            } else if yd > 1.0 {
                c = 0.5 * yd.sqrt();
                b = 0.25 * (r12 + r21) / c;
                d = 0.25 * (r23 + r32) / c;
                a = 0.25 * (r13 - r31) / c;
            } else {
                d = 0.5 * zd.sqrt();
                b = 0.25 * (r13 + r31) / d;
                c = 0.25 * (r23 + r32) / d;
                a = 0.25 * (r21 - r12) / d;
            }
            if a < 0.0 {
                b = -b;
                c = -c;
                d = -d;
            }
        }
        self.quatern = [b as f32, c as f32, d as f32];
        self.qoffset = [
            affine[(0, 3)] as f32,
            affine[(1, 3)] as f32,
            affine[(2, 3)] as f32,
        ];
        self.pixdim[0] = qfac as f32;
        self.qform_code = 1;
        true
    }

    /// Grid-to-world affine: sform when set, else qform, else pixdim scaling.
    pub fn affine(&self) -> Result<Matrix4<f64>> {
        let sform = (self.sform_code > 0).then(|| self.sform_affine());
        let qform = (self.qform_code > 0).then(|| self.qform_affine());
        match (sform, qform) {
            (Some(s), Some(q)) => {
                let gap = (s - q).abs().max();
                if gap > FORM_DISAGREEMENT {
                    warn!("sform and qform disagree by {gap:.3e}; using sform");
                }
                Ok(s)
            }
            (Some(s), None) => Ok(s),
            (None, Some(q)) => Ok(q),
            (None, None) => {
                let mut m = Matrix4::identity();
                for axis in 0..3 {
                    let p = f64::from(self.pixdim[axis + 1]);
                    if !(p.is_finite() && p > 0.0) {
                        return Err(Error::Format(format!(
                            "pixdim[{}] = {p} and no sform/qform to fall back on",
                            axis + 1
                        )));
                    }
                    m[(axis, axis)] = p;
                }
                Ok(m)
            }
        }
    }

    /// Voxel spacing consistent with `affine`: pixdim when it agrees with the
    /// affine column norms, otherwise the column norms themselves.
    fn spacing_for(&self, affine: &Matrix4<f64>) -> [f64; 3] {
        let norms = column_norms(affine);
        let mut spacing = [0.0; 3];
        for axis in 0..3 {
            let p = f64::from(self.pixdim[axis + 1]).abs();
            spacing[axis] = if p > 0.0 && ((norms[axis] - p).abs() / p) <= SPACING_TOLERANCE {
                p
            } else {
                warn!(
                    "pixdim[{}] = {p} disagrees with affine column norm {}; using the norm",
                    axis + 1,
                    norms[axis]
                );
                norms[axis]
            };
        }
        spacing
    }
}

fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b
}

/// Decodes a NIfTI-1 image held in memory (plain or gzip-compressed).
pub fn parse_volume(raw: &[u8]) -> Result<(NiftiHeader, Volume)> {
    let inflated;
    let bytes = if is_gzip(raw) {
        let mut out = Vec::new();
        MultiGzDecoder::new(raw)
            .read_to_end(&mut out)
            .map_err(|e| Error::Format(format!("corrupt gzip stream: {e}")))?;
        inflated = out;
        &inflated[..]
    } else {
        raw
    };

    let header = NiftiHeader::parse(bytes)?;
    let dims = header.spatial_dims()?;
    let datatype = Datatype::from_code(header.datatype)?;
    let n = dims[0] * dims[1] * dims[2];

    let offset = header.vox_offset;
    if !(offset.is_finite() && offset >= HEADER_SIZE as f32) {
        return Err(Error::Format(format!("vox_offset {offset} is invalid")));
    }
    let offset = offset as usize;
    let needed = n
        .checked_mul(datatype.bytes())
        .and_then(|len| len.checked_add(offset))
        .ok_or_else(|| Error::Capacity("payload size overflows".into()))?;
    if bytes.len() < needed {
        return Err(Error::Format(format!(
            "payload truncated: {} bytes present, {needed} needed",
            bytes.len()
        )));
    }
    let payload = &bytes[offset..needed];
    let mut data = if header.big_endian {
        decode_samples::<BigEndian>(payload, datatype, n)
    } else {
        decode_samples::<LittleEndian>(payload, datatype, n)
    };

    let slope = f64::from(header.scl_slope);
    if slope != 0.0 && slope.is_finite() {
        let inter = f64::from(header.scl_inter);
        let inter = if inter.is_finite() { inter } else { 0.0 };
        for v in data.iter_mut() {
            *v = (f64::from(*v) * slope + inter) as f32;
        }
    }

    let affine = header.affine()?;
    let spacing = header.spacing_for(&affine);
    let grid = Grid::new(dims, spacing, affine)?;
    let volume = Volume::new(grid, data)?;
    Ok((header, volume))
}

fn decode_samples<B: ByteOrder>(payload: &[u8], datatype: Datatype, n: usize) -> Vec<f32> {
    let width = datatype.bytes();
    let chunks = payload.chunks_exact(width).take(n);
    match datatype {
        Datatype::Uint8 => payload[..n].iter().map(|&b| f32::from(b)).collect(),
        Datatype::Int16 => chunks.map(|c| f32::from(B::read_i16(c))).collect(),
        Datatype::Int32 => chunks.map(|c| B::read_i32(c) as f32).collect(),
        Datatype::Float32 => chunks.map(B::read_f32).collect(),
        Datatype::Float64 => chunks.map(|c| B::read_f64(c) as f32).collect(),
    }
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    read_volume_with_header(path).map(|(_, v)| v)
}

pub fn read_volume_with_header(path: impl AsRef<Path>) -> Result<(NiftiHeader, Volume)> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_volume(&raw).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Unsupported(msg) => Error::Unsupported(format!("{}: {msg}", path.display())),
        Error::Capacity(msg) => Error::Capacity(format!("{}: {msg}", path.display())),
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<LesionMask> {
    let path = path.as_ref();
    let volume = read_volume(path)?;
    LesionMask::from_volume(&volume)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Loads a flip map, clamping into `[0, 0.5]`. Returns the clamped-voxel count.
pub fn read_flip_map(path: impl AsRef<Path>) -> Result<(FlipMap, usize)> {
    let path = path.as_ref();
    let (map, clamped) = FlipMap::clamped(read_volume(path)?);
    if clamped > 0 {
        warn!("{}: clamped {clamped} flip samples into [0, 0.5]", path.display());
    }
    Ok((map, clamped))
}

/// Loads a score map, clamping into `[0, 1]`. Returns the clamped-voxel count.
pub fn read_score_map(path: impl AsRef<Path>) -> Result<(ScoreMap, usize)> {
    let path = path.as_ref();
    let (map, clamped) = ScoreMap::clamped(read_volume(path)?);
    if clamped > 0 {
        warn!("{}: clamped {clamped} score samples into [0, 1]", path.display());
    }
    Ok((map, clamped))
}

/// Header that `encode_volume` writes for `volume`.
pub fn header_for(volume: &Volume, datatype: Datatype) -> NiftiHeader {
    let grid = volume.grid();
    let dims = grid.dims();
    let spacing = grid.spacing();
    let affine = grid.affine();
    let mut header = NiftiHeader {
        datatype: datatype.code(),
        bitpix: (datatype.bytes() * 8) as i16,
        descrip: "lesion-change".into(),
        sform_code: 1,
        ..NiftiHeader::default()
    };
    header.dim = [3, dims[0] as i16, dims[1] as i16, dims[2] as i16, 1, 1, 1, 1];
    header.pixdim = [
        1.0,
        spacing[0] as f32,
        spacing[1] as f32,
        spacing[2] as f32,
        0.0,
        0.0,
        0.0,
        0.0,
    ];
    for r in 0..3 {
        for c in 0..4 {
            header.srow[r][c] = affine[(r, c)] as f32;
        }
    }
    header.set_qform(affine);
    header
}

/// Encodes `volume` as an uncompressed NIfTI-1 byte stream.
pub fn encode_volume(volume: &Volume, datatype: Datatype) -> Result<Vec<u8>> {
    let dims = volume.grid().dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Capacity(format!(
            "dims {dims:?} exceed the NIfTI-1 limit of {}",
            i16::MAX
        )));
    }
    if let Some(v) = volume.data().iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("cannot write non-finite sample {v}")));
    }
    let header = header_for(volume, datatype);
    let mut out = header.to_bytes();
    out.extend_from_slice(&[0u8; DEFAULT_VOX_OFFSET - HEADER_SIZE]);
    match datatype {
        Datatype::Uint8 => {
            for &v in volume.data() {
                if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                    return Err(Error::validation(format!(
                        "sample {v} is not representable as uint8"
                    )));
                }
                out.push(v as u8);
            }
        }
        Datatype::Float32 => {
            let start = out.len();
            out.resize(start + 4 * volume.data().len(), 0);
            LittleEndian::write_f32_into(volume.data(), &mut out[start..]);
        }
        other => {
            return Err(Error::Unsupported(format!(
                "writing {other:?}; only uint8 and float32 are written"
            )));
        }
    }
    Ok(out)
}

/// Writes `volume` to `path`, gzip-compressed when the name ends in `.gz`.
pub fn write_volume(volume: &Volume, path: impl AsRef<Path>, datatype: Datatype) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_volume(volume, datatype)?;
    let gz = path.extension().is_some_and(|ext| ext == "gz");
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    let result = if gz {
        let mut enc = GzEncoder::new(writer, Compression::fast());
        enc.write_all(&bytes)
            .and_then(|_| enc.finish())
            .and_then(|mut w| w.flush())
    } else {
        writer.write_all(&bytes).and_then(|_| writer.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

pub fn write_mask(mask: &LesionMask, path: impl AsRef<Path>) -> Result<()> {
    write_volume(&mask.to_volume(), path, Datatype::Uint8)
}
