//! Binary 8-bit PPM (P6) and PGM (P5).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode(magic: &str, t: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = t.dims3()?;
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    for i in 0..h * w {
        for ch in 0..c {
            out.push(to_byte(t.channel(ch)[i]));
        }
    }
    Ok(out)
}

pub fn write_ppm(path: &Path, img: &Tensor) -> Result<()> {
    if img.dims3()?.0 != 3 {
        return Err(Error::invalid("write_ppm", "image must have 3 channels"));
    }
    fs::write(path, encode("P6", img)?).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: &Path, mask: &Tensor) -> Result<()> {
    if mask.dims3()?.0 != 1 {
        return Err(Error::invalid("write_pgm", "mask must have 1 channel"));
    }
    fs::write(path, encode("P5", mask)?).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, msg: impl Into<String>) -> Error {
    Error::Malformed {
        what: "image header",
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn decode(path: &Path, bytes: &[u8], magic: &[u8], channels: usize) -> Result<Tensor> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(malformed(path, format!("expected magic {}", String::from_utf8_lossy(magic))));
    }
    // width, height, maxval; whitespace separated, `#` comments allowed
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| malformed(path, "expected an integer"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(malformed(path, "missing whitespace after maxval"));
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval != 255 || w == 0 || h == 0 {
        return Err(malformed(path, format!("unsupported geometry {w}x{h} maxval {maxval}")));
    }
    let body = &bytes[pos..];
    if body.len() != w * h * channels {
        return Err(malformed(
            path,
            format!("expected {} data bytes, found {}", w * h * channels, body.len()),
        ));
    }
    let mut t = Tensor::zeros(&[channels, h, w]);
    for ch in 0..channels {
        let plane = t.channel_mut(ch);
        for (i, v) in plane.iter_mut().enumerate() {
            *v = body[i * channels + ch] as f64 / 255.0;
        }
    }
    Ok(t)
}

pub fn read_ppm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes, b"P6", 3)
}

pub fn read_pgm(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes, b"P5", 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_levels() {
        let dir = tempfile::tempdir().unwrap();
        let img = Tensor::from_fn(&[3, 4, 6], |i| (i % 256) as f64 / 255.0);
        let p = dir.path().join("a.ppm");
        write_ppm(&p, &img).unwrap();
        assert_eq!(read_ppm(&p).unwrap(), img);
        let m = Tensor::from_fn(&[1, 5, 3], |i| (i * 17 % 256) as f64 / 255.0);
        let p = dir.path().join("a.pgm");
        write_pgm(&p, &m).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), m);
    }

    #[test]
    fn header_comments_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        fs::write(&p, b"P5\n# note\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!(read_pgm(&p).unwrap().data(), &[0.0, 1.0]);
        fs::write(&p, b"P5\n2 1\n255\n\x00").unwrap();
        assert!(matches!(read_pgm(&p), Err(Error::Malformed { .. })));
        fs::write(&p, b"P6\n2 1\n255\n\x00\x00").unwrap();
        assert!(read_pgm(&p).is_err());
    }
}
