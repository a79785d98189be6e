//! Binary PPM (P6) output: 8-bit, gamma 2.2, rows top to bottom.

use crate::math::Rgb;
use crate::{Error, Real, Result};
use std::io::Write;
use std::path::Path;

/// Linear [0,1] to 8-bit with gamma 2.2.
pub fn encode_channel<S: Real>(linear: S) -> u8 {
    let v = linear.to_f64_lossy().clamp(0.0, 1.0);
    (v.powf(1.0 / 2.2) * 255.0 + 0.5).floor() as u8
}

/// Writes `pixels` (row-major, top row first) as a P6 file.
pub fn write_image<S: Real>(path: &Path, width: u32, height: u32, pixels: &[Rgb<S>]) -> Result<()> {
    assert_eq!(pixels.len(), (width * height) as usize);
    let mut bytes = Vec::with_capacity(pixels.len() * 3 + 32);
    bytes.extend_from_slice(format!("P6\n{} {}\n255\n", width, height).as_bytes());
    for p in pixels {
        bytes.push(encode_channel(p.x));
        bytes.push(encode_channel(p.y));
        bytes.push(encode_channel(p.z));
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads a P6 file back; used by round-trip tests.
pub fn read_image(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_p6(&data).map_err(|msg| Error::malformed(path, msg))
}

fn parse_p6(data: &[u8]) -> std::result::Result<(u32, u32, Vec<u8>), String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err("not a P6 file".into());
    }
    let width: u32 = token()?.parse().map_err(|_| "bad width")?;
    let height: u32 = token()?.parse().map_err(|_| "bad height")?;
    let maxval: u32 = token()?.parse().map_err(|_| "bad maxval")?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    pos += 1; // single whitespace after maxval
    let need = (width * height * 3) as usize;
    if data.len() < pos + need {
        return Err("truncated pixel data".into());
    }
    Ok((width, height, data[pos..pos + need].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    #[test]
    fn one_black_pixel_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("black.ppm");
        write_image::<f32>(&path, 1, 1, &[Vec3::zero()]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expect = b"P6\n1 1\n255\n".to_vec();
        expect.extend_from_slice(&[0, 0, 0]);
        assert_eq!(bytes, expect);
    }

    #[test]
    fn white_black_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wb.ppm");
        write_image::<f32>(&path, 2, 1, &[Vec3::splat(1.0), Vec3::zero()]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 6..], &[255, 255, 255, 0, 0, 0]);
    }

    #[test]
    fn roundtrip_through_parser() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.ppm");
        let pixels: Vec<Vec3<f64>> = (0..12).map(|i| Vec3::splat(i as f64 / 11.0)).collect();
        write_image(&path, 4, 3, &pixels).unwrap();
        let (w, h, data) = read_image(&path).unwrap();
        assert_eq!((w, h), (4, 3));
        assert_eq!(data.len(), 36);
        assert_eq!(data[0], 0);
        assert_eq!(data[33], 255);
    }
}
