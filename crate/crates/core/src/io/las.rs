use std::io::Read;

use crate::cloud::PointCloud;
use crate::{Error, Result};

/// Size of the LAS 1.0–1.2 public header block.
pub const LAS_HEADER_SIZE: usize = 227;

const SIGNATURE: &[u8; 4] = b"LASF";

// Public header block offsets.
const OFF_VERSION_MAJOR: usize = 24;
const OFF_VERSION_MINOR: usize = 25;
const OFF_HEADER_SIZE: usize = 94;
const OFF_POINT_DATA: usize = 96;
const OFF_POINT_FORMAT: usize = 104;
const OFF_RECORD_LEN: usize = 105;
const OFF_POINT_COUNT: usize = 107;
const OFF_SCALE: usize = 131;
const OFF_OFFSET: usize = 155;

// Point record offsets (formats 0 and 1 share the first 20 bytes).
const REC_CLASSIFICATION: usize = 15;

fn format_err(field: &'static str, detail: impl Into<String>) -> Error {
    Error::LasFormat {
        field,
        detail: detail.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn i32_at(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(b[off..off + 8].try_into().unwrap())
}

/// Read a LAS 1.0–1.2 file with point data format 0 or 1.
///
/// Coordinates are `record * scale + offset`; labels are the low five bits of
/// the classification byte.
pub fn read_las<R: Read>(mut stream: R) -> Result<PointCloud> {
    let mut buf = Vec::new();
    stream.read_to_end(&mut buf)?;

    if buf.len() < 4 || &buf[..4] != SIGNATURE {
        return Err(format_err("file signature", "expected \"LASF\""));
    }
    if buf.len() < LAS_HEADER_SIZE {
        return Err(format_err(
            "public header block",
            format!("{} bytes, need {LAS_HEADER_SIZE}", buf.len()),
        ));
    }
    let (major, minor) = (buf[OFF_VERSION_MAJOR], buf[OFF_VERSION_MINOR]);
    if major != 1 || minor > 2 {
        return Err(format_err(
            "version",
            format!("unsupported LAS {major}.{minor}"),
        ));
    }
    let header_size = u16_at(&buf, OFF_HEADER_SIZE) as usize;
    if header_size < LAS_HEADER_SIZE {
        return Err(format_err(
            "header size",
            format!("{header_size} is below {LAS_HEADER_SIZE}"),
        ));
    }
    let format = buf[OFF_POINT_FORMAT];
    let min_len = match format {
        0 => 20,
        1 => 28,
        f => {
            return Err(format_err(
                "point data format",
                format!("unsupported format {f}"),
            ))
        }
    };
    let record_len = u16_at(&buf, OFF_RECORD_LEN) as usize;
    if record_len < min_len {
        return Err(format_err(
            "point data record length",
            format!("{record_len} is below {min_len} for format {format}"),
        ));
    }
    let data_offset = u32_at(&buf, OFF_POINT_DATA) as usize;
    if data_offset < header_size {
        return Err(format_err(
            "offset to point data",
            format!("{data_offset} lies inside the header"),
        ));
    }
    let count = u32_at(&buf, OFF_POINT_COUNT) as usize;
    let scale = [0, 1, 2].map(|a| f64_at(&buf, OFF_SCALE + 8 * a));
    let offset = [0, 1, 2].map(|a| f64_at(&buf, OFF_OFFSET + 8 * a));
    if scale.iter().chain(&offset).any(|v| !v.is_finite()) || scale.contains(&0.0) {
        return Err(format_err(
            "scale factors",
            format!("scale {scale:?}, offset {offset:?}"),
        ));
    }

    let needed = count
        .checked_mul(record_len)
        .and_then(|n| n.checked_add(data_offset))
        .ok_or_else(|| format_err("number of point records", "size overflow"))?;
    if buf.len() < needed {
        return Err(format_err(
            "point records",
            format!(
                "truncated: {} bytes, {count} records need {needed}",
                buf.len()
            ),
        ));
    }

    let mut points = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for rec in buf[data_offset..needed].chunks_exact(record_len) {
        let mut p = [0.0; 3];
        for a in 0..3 {
            p[a] = i32_at(rec, 4 * a) as f64 * scale[a] + offset[a];
        }
        points.push(p);
        labels.push(u32::from(rec[REC_CLASSIFICATION] & 0x1F));
    }
    let mut cloud = PointCloud::new(points, Some(labels))?;
    cloud.source_crs_note = format!("LAS {major}.{minor}, point format {format}");
    Ok(cloud)
}
