//! Minimal NIfTI-1 reader and writer for single-frame 3-D volumes.
//!
//! Orientation matrices are ignored: axes are taken as stored. Data are
//! returned as a row-major array indexed `[i, j, k]`, while the file keeps
//! the first index fastest.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use ndarray::Array3;
use thiserror::Error;

use super::{ContrastTag, Volume, VolumeError};

const HEADER_SIZE: usize = 348;
const SINGLE_FILE_OFFSET: usize = 352;

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("malformed NIfTI header: {0}")]
    MalformedHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("truncated voxel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("invalid volume: {0}")]
    InvalidVolume(#[from] VolumeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NiftiDatatype {
    Uint8,
    Int16,
    Int32,
    Float32,
    Float64,
}

impl NiftiDatatype {
    fn code(self) -> i16 {
        match self {
            NiftiDatatype::Uint8 => 2,
            NiftiDatatype::Int16 => 4,
            NiftiDatatype::Int32 => 8,
            NiftiDatatype::Float32 => 16,
            NiftiDatatype::Float64 => 64,
        }
    }

    fn from_code(code: i16) -> Result<Self, NiftiError> {
        Ok(match code {
            2 => NiftiDatatype::Uint8,
            4 => NiftiDatatype::Int16,
            8 => NiftiDatatype::Int32,
            16 => NiftiDatatype::Float32,
            64 => NiftiDatatype::Float64,
            other => return Err(NiftiError::UnsupportedDatatype(other)),
        })
    }

    fn size(self) -> usize {
        match self {
            NiftiDatatype::Uint8 => 1,
            NiftiDatatype::Int16 => 2,
            NiftiDatatype::Int32 | NiftiDatatype::Float32 => 4,
            NiftiDatatype::Float64 => 8,
        }
    }
}

#[derive(Clone, Copy)]
struct Reader<'a> {
    bytes: &'a [u8],
    little: bool,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, at: usize) -> [u8; N] {
        self.bytes[at..at + N].try_into().unwrap()
    }
    fn i16(&self, at: usize) -> i16 {
        let b = self.arr::<2>(at);
        if self.little {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    }
    fn i32(&self, at: usize) -> i32 {
        let b = self.arr::<4>(at);
        if self.little {
            i32::from_le_bytes(b)
        } else {
            i32::from_be_bytes(b)
        }
    }
    fn f32(&self, at: usize) -> f32 {
        let b = self.arr::<4>(at);
        if self.little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        }
    }
    fn f64(&self, at: usize) -> f64 {
        let b = self.arr::<8>(at);
        if self.little {
            f64::from_le_bytes(b)
        } else {
            f64::from_be_bytes(b)
        }
    }
}

struct Header {
    dims: [usize; 3],
    spacing: [f64; 3],
    datatype: NiftiDatatype,
    vox_offset: usize,
    slope: f64,
    inter: f64,
    little: bool,
    single_file: bool,
}

fn gunzip_if_needed(bytes: &[u8]) -> Result<std::borrow::Cow<'_, [u8]>, NiftiError> {
    if bytes.len() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B {
        let mut out = Vec::new();
        GzDecoder::new(bytes).read_to_end(&mut out)?;
        Ok(out.into())
    } else {
        Ok(bytes.into())
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::MalformedHeader(format!(
            "{} bytes is shorter than the 348-byte header",
            bytes.len()
        )));
    }
    let le = Reader { bytes, little: true };
    let be = Reader { bytes, little: false };
    let r = if le.i32(0) == HEADER_SIZE as i32 {
        le
    } else if be.i32(0) == HEADER_SIZE as i32 {
        be
    } else {
        return Err(NiftiError::MalformedHeader("sizeof_hdr is not 348".into()));
    };
    let single_file = match &bytes[344..348] {
        b"n+1\0" => true,
        b"ni1\0" => false,
        other => {
            return Err(NiftiError::MalformedHeader(format!(
                "bad magic {other:?}"
            )))
        }
    };
    let ndim = r.i16(40);
    if ndim != 3 {
        return Err(NiftiError::MalformedHeader(format!(
            "dim[0] = {ndim}; only single-frame 3-D volumes are supported"
        )));
    }
    let mut dims = [0usize; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let v = r.i16(42 + 2 * i);
        if v <= 0 {
            return Err(NiftiError::MalformedHeader(format!("dim[{}] = {v}", i + 1)));
        }
        *d = v as usize;
    }
    let datatype = NiftiDatatype::from_code(r.i16(70))?;
    let spacing = [
        r.f32(80).abs() as f64,
        r.f32(84).abs() as f64,
        r.f32(88).abs() as f64,
    ];
    let vox_offset = r.f32(108);
    if !(vox_offset >= 0.0) {
        return Err(NiftiError::MalformedHeader(format!("vox_offset {vox_offset}")));
    }
    Ok(Header {
        dims,
        spacing,
        datatype,
        vox_offset: vox_offset as usize,
        slope: r.f32(112) as f64,
        inter: r.f32(116) as f64,
        little: r.little,
        single_file,
    })
}

fn decode_voxels(header: &Header, data: &[u8], source_id: &str) -> Result<Volume, NiftiError> {
    let [nx, ny, nz] = header.dims;
    let count = nx * ny * nz;
    let size = header.datatype.size();
    let expected = count * size;
    if data.len() < expected {
        return Err(NiftiError::TruncatedData {
            expected,
            found: data.len(),
        });
    }
    let r = Reader {
        bytes: data,
        little: header.little,
    };
    let raw = |i: usize| -> f64 {
        let at = i * size;
        match header.datatype {
            NiftiDatatype::Uint8 => data[at] as f64,
            NiftiDatatype::Int16 => r.i16(at) as f64,
            NiftiDatatype::Int32 => r.i32(at) as f64,
            NiftiDatatype::Float32 => r.f32(at) as f64,
            NiftiDatatype::Float64 => r.f64(at),
        }
    };
    let scaled = header.slope != 0.0 && header.slope.is_finite();
    let out = Array3::from_shape_fn((nx, ny, nz), |(i, j, k)| {
        let v = raw(i + nx * (j + ny * k));
        if scaled {
            v * header.slope + header.inter
        } else {
            v
        }
    });
    let spacing = header.spacing.map(|s| if s > 0.0 { s } else { 1.0 });
    Ok(Volume::new(out, spacing, source_id, ContrastTag::T1)?)
}

/// Parse a single-file NIfTI-1 image (`n+1`), optionally gzip-compressed.
/// A non-positive pixdim is read as 1 mm.
pub fn parse_nifti(bytes: &[u8]) -> Result<Volume, NiftiError> {
    let bytes = gunzip_if_needed(bytes)?;
    let header = parse_header(&bytes)?;
    if !header.single_file {
        return Err(NiftiError::MalformedHeader(
            "`ni1` header/image pair: use parse_nifti_pair".into(),
        ));
    }
    let offset = header.vox_offset.max(HEADER_SIZE);
    let data = bytes.get(offset..).unwrap_or(&[]);
    decode_voxels(&header, data, "nifti")
}

/// Parse a two-file NIfTI-1 pair (`ni1` magic): header bytes and image bytes.
pub fn parse_nifti_pair(header_bytes: &[u8], image_bytes: &[u8]) -> Result<Volume, NiftiError> {
    let hb = gunzip_if_needed(header_bytes)?;
    let ib = gunzip_if_needed(image_bytes)?;
    let header = parse_header(&hb)?;
    let data = ib.get(header.vox_offset..).unwrap_or(&[]);
    decode_voxels(&header, data, "nifti")
}

pub fn read_nifti_file(path: &Path) -> Result<Volume, NiftiError> {
    let bytes = std::fs::read(path)?;
    let id = path
        .file_name()
        .map(|n| n.to_string_lossy().trim_end_matches(".gz").trim_end_matches(".nii").to_string())
        .unwrap_or_default();
    Ok(parse_nifti(&bytes)?.with_source_id(id))
}

/// Serialise a volume as little-endian `n+1` NIfTI-1 with no intensity
/// scaling. Integer datatypes round and saturate.
pub fn write_nifti(volume: &Volume, datatype: NiftiDatatype, gzip: bool) -> Vec<u8> {
    let [nx, ny, nz] = volume.dims();
    let mut out = vec![0u8; SINGLE_FILE_OFFSET];
    let put = |buf: &mut Vec<u8>, at: usize, b: &[u8]| buf[at..at + b.len()].copy_from_slice(b);
    put(&mut out, 0, &(HEADER_SIZE as i32).to_le_bytes());
    put(&mut out, 38, b"r");
    for (i, d) in [3i16, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1]
        .iter()
        .enumerate()
    {
        put(&mut out, 40 + 2 * i, &d.to_le_bytes());
    }
    put(&mut out, 70, &datatype.code().to_le_bytes());
    put(&mut out, 72, &((datatype.size() * 8) as i16).to_le_bytes());
    let sp = volume.spacing_mm();
    for (i, p) in [1.0f32, sp[0] as f32, sp[1] as f32, sp[2] as f32, 1.0, 1.0, 1.0, 1.0]
        .iter()
        .enumerate()
    {
        put(&mut out, 76 + 4 * i, &p.to_le_bytes());
    }
    put(&mut out, 108, &(SINGLE_FILE_OFFSET as f32).to_le_bytes());
    put(&mut out, 112, &0f32.to_le_bytes());
    put(&mut out, 116, &0f32.to_le_bytes());
    put(&mut out, 123, &[2u8]); // mm
    let descrip = volume.source_id().as_bytes();
    let n = descrip.len().min(79);
    put(&mut out, 148, &descrip[..n]);
    put(&mut out, 344, b"n+1\0");

    let data = volume.data();
    out.reserve(nx * ny * nz * datatype.size());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let v = data[[i, j, k]];
                match datatype {
                    NiftiDatatype::Uint8 => out.push(v.round().clamp(0.0, 255.0) as u8),
                    NiftiDatatype::Int16 => out.extend_from_slice(
                        &(v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16).to_le_bytes(),
                    ),
                    NiftiDatatype::Int32 => out.extend_from_slice(
                        &(v.round().clamp(i32::MIN as f64, i32::MAX as f64) as i32).to_le_bytes(),
                    ),
                    NiftiDatatype::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                    NiftiDatatype::Float64 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
    }
    if gzip {
        let mut enc = GzEncoder::new(Vec::new(), Compression::fast());
        enc.write_all(&out).expect("in-memory gzip");
        enc.finish().expect("in-memory gzip")
    } else {
        out
    }
}

/// Write `.nii` or `.nii.gz` depending on the path suffix.
pub fn write_nifti_file(
    volume: &Volume,
    path: &Path,
    datatype: NiftiDatatype,
) -> Result<(), NiftiError> {
    let gzip = path.to_string_lossy().ends_with(".gz");
    std::fs::write(path, write_nifti(volume, datatype, gzip))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn header_bytes(dims: [i16; 3], datatype: i16, slope: f32, inter: f32) -> Vec<u8> {
        let mut h = vec![0u8; SINGLE_FILE_OFFSET];
        h[0..4].copy_from_slice(&348i32.to_le_bytes());
        for (i, d) in [3, dims[0], dims[1], dims[2], 1, 1, 1, 1].iter().enumerate() {
            h[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_le_bytes());
        }
        h[70..72].copy_from_slice(&datatype.to_le_bytes());
        for i in 0..4 {
            h[76 + 4 * i..80 + 4 * i].copy_from_slice(&1f32.to_le_bytes());
        }
        h[108..112].copy_from_slice(&352f32.to_le_bytes());
        h[112..116].copy_from_slice(&slope.to_le_bytes());
        h[116..120].copy_from_slice(&inter.to_le_bytes());
        h[344..348].copy_from_slice(b"n+1\0");
        h
    }

    #[test]
    fn minimal_float32_zero_volume() {
        let mut bytes = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        bytes.extend(std::iter::repeat_n(0u8, 16 * 16 * 16 * 4));
        let v = parse_nifti(&bytes).unwrap();
        assert_eq!(v.dims(), [16, 16, 16]);
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slope_and_intercept_are_applied() {
        let mut bytes = header_bytes([16, 16, 16], 2, 2.0, 1.0);
        bytes.extend(std::iter::repeat_n(3u8, 16 * 16 * 16));
        let v = parse_nifti(&bytes).unwrap();
        assert_eq!(v.data()[[5, 6, 7]], 7.0);
    }

    #[test]
    fn big_endian_header_is_detected() {
        let mut h = vec![0u8; SINGLE_FILE_OFFSET];
        h[0..4].copy_from_slice(&348i32.to_be_bytes());
        for (i, d) in [3i16, 16, 16, 16, 1, 1, 1, 1].iter().enumerate() {
            h[40 + 2 * i..42 + 2 * i].copy_from_slice(&d.to_be_bytes());
        }
        h[70..72].copy_from_slice(&4i16.to_be_bytes());
        h[108..112].copy_from_slice(&352f32.to_be_bytes());
        h[344..348].copy_from_slice(b"n+1\0");
        for i in 0..16 * 16 * 16 {
            h.extend_from_slice(&((i % 300) as i16 - 100).to_be_bytes());
        }
        let v = parse_nifti(&h).unwrap();
        // file index of (1, 2, 0) is 1 + 16 * 2 = 33
        assert_eq!(v.data()[[1, 2, 0]], -67.0);
    }

    #[test]
    fn error_paths() {
        let mut bad_magic = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        bad_magic[344..348].copy_from_slice(b"xyz\0");
        assert!(matches!(parse_nifti(&bad_magic), Err(NiftiError::MalformedHeader(_))));

        let mut bad_size = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        bad_size[0..4].copy_from_slice(&100i32.to_le_bytes());
        assert!(matches!(parse_nifti(&bad_size), Err(NiftiError::MalformedHeader(_))));

        let unsupported = header_bytes([16, 16, 16], 32, 0.0, 0.0);
        assert!(matches!(
            parse_nifti(&unsupported),
            Err(NiftiError::UnsupportedDatatype(32))
        ));

        let mut truncated = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        truncated.extend(std::iter::repeat_n(0u8, 100));
        assert!(matches!(
            parse_nifti(&truncated),
            Err(NiftiError::TruncatedData { expected: 16384, found: 100 })
        ));

        let mut four_d = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        four_d[40..42].copy_from_slice(&4i16.to_le_bytes());
        assert!(matches!(parse_nifti(&four_d), Err(NiftiError::MalformedHeader(_))));
    }

    #[test]
    fn header_image_pair() {
        let mut h = header_bytes([16, 16, 16], 16, 0.0, 0.0);
        h[344..348].copy_from_slice(b"ni1\0");
        h[108..112].copy_from_slice(&0f32.to_le_bytes());
        let img: Vec<u8> = (0..16 * 16 * 16).flat_map(|i| (i as f32).to_le_bytes()).collect();
        let v = parse_nifti_pair(&h, &img).unwrap();
        assert_eq!(v.data()[[3, 0, 0]], 3.0);
        assert!(parse_nifti(&h).is_err());
    }

    fn volume_strategy() -> impl Strategy<Value = (Vec<i16>, [usize; 3])> {
        (16usize..19, 16usize..19, 16usize..18).prop_flat_map(|(a, b, c)| {
            (proptest::collection::vec(0i16..255, a * b * c), Just([a, b, c]))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn roundtrip_every_datatype((vals, dims) in volume_strategy(), gzip in any::<bool>()) {
            let data = Array3::from_shape_vec((dims[0], dims[1], dims[2]),
                vals.iter().map(|&v| v as f64).collect()).unwrap();
            let v = Volume::new(data, [0.5, 1.0, 1.5], "rt", ContrastTag::T1).unwrap();
            for dt in [NiftiDatatype::Uint8, NiftiDatatype::Int16, NiftiDatatype::Int32,
                       NiftiDatatype::Float32, NiftiDatatype::Float64] {
                let back = parse_nifti(&write_nifti(&v, dt, gzip)).unwrap();
                prop_assert_eq!(back.data(), v.data());
                prop_assert_eq!(back.spacing_mm(), v.spacing_mm());
            }
        }

        #[test]
        fn float64_roundtrip_is_exact(vals in proptest::collection::vec(-1e6f64..1e6, 16 * 16 * 16)) {
            let data = Array3::from_shape_vec((16, 16, 16), vals).unwrap();
            let v = Volume::new(data, [1.0; 3], "rt", ContrastTag::T1).unwrap();
            let back = parse_nifti(&write_nifti(&v, NiftiDatatype::Float64, true)).unwrap();
            prop_assert_eq!(back.data(), v.data());
        }
    }
}
