//! Still-image decoding: binary PGM/PPM (maxval 255) and 8-bit PNG.

use std::io::{BufRead, Cursor};
use std::path::Path;

use super::DecodeError;
use crate::vision::{Channels, Image};

/// Decode an in-memory image, sniffing the format from its magic bytes.
pub fn load_image(bytes: &[u8]) -> Result<Image, DecodeError> {
    if bytes.is_empty() {
        return Err(DecodeError::Empty);
    }
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        let mut cursor = Cursor::new(bytes);
        let img = read_pnm(&mut cursor)?;
        if (cursor.position() as usize) != bytes.len() {
            return Err(DecodeError::Malformed(format!(
                "{} trailing bytes after raster",
                bytes.len() - cursor.position() as usize
            )));
        }
        return Ok(img);
    }
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        return decode_png(bytes);
    }
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P3") {
        return Err(DecodeError::Unsupported(
            "ASCII netpbm (P2/P3); only binary P5/P6 is accepted".into(),
        ));
    }
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        return Err(DecodeError::Unsupported("JPEG".into()));
    }
    Err(DecodeError::UnknownFormat)
}

pub fn load_image_path(path: impl AsRef<Path>) -> Result<Image, DecodeError> {
    let bytes = std::fs::read(path.as_ref())?;
    load_image(&bytes)
}

/// Binary PGM for grayscale images, PPM for RGB.
pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = match image.channels() {
        Channels::Gray => "P5",
        Channels::Rgb => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.pixels());
    out
}

/// Read one binary PNM image from a stream positioned at its magic number.
pub(crate) fn read_pnm<R: BufRead>(r: &mut R) -> Result<Image, DecodeError> {
    let magic = header_token(r)?.ok_or(DecodeError::Empty)?;
    let channels = match magic.as_str() {
        "P5" => Channels::Gray,
        "P6" => Channels::Rgb,
        other => {
            return Err(DecodeError::Malformed(format!(
                "unexpected netpbm magic {other:?}"
            )))
        }
    };
    let width = header_number(r, "width")?;
    let height = header_number(r, "height")?;
    let maxval = header_number(r, "maxval")?;
    if maxval > 255 {
        return Err(DecodeError::Unsupported(format!(
            "16-bit netpbm (maxval {maxval})"
        )));
    }
    if maxval != 255 {
        return Err(DecodeError::Unsupported(format!(
            "maxval {maxval}; only 255 is accepted"
        )));
    }
    if width == 0 || height == 0 {
        return Err(DecodeError::Malformed(format!(
            "zero dimension {width}x{height}"
        )));
    }
    let len = width as usize * height as usize * channels.count();
    let mut pixels = vec![0u8; len];
    r.read_exact(&mut pixels).map_err(|_| {
        DecodeError::Malformed(format!("raster truncated, expected {len} bytes"))
    })?;
    Image::new(width, height, channels, pixels).map_err(|e| DecodeError::Malformed(e.to_string()))
}

/// Next whitespace-delimited header token, skipping `#` comments. The single
/// whitespace byte that terminates the token is consumed.
fn header_token<R: BufRead>(r: &mut R) -> Result<Option<String>, DecodeError> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Ok(if token.is_empty() {
                None
            } else {
                Some(String::from_utf8_lossy(&token).into_owned())
            });
        }
        let b = byte[0];
        if b == b'#' && token.is_empty() {
            let mut sink = Vec::new();
            r.read_until(b'\n', &mut sink)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(Some(String::from_utf8_lossy(&token).into_owned()));
        }
        token.push(b);
        if token.len() > 16 {
            return Err(DecodeError::Malformed("header token too long".into()));
        }
    }
}

fn header_number<R: BufRead>(r: &mut R, what: &str) -> Result<u32, DecodeError> {
    let tok = header_token(r)?
        .ok_or_else(|| DecodeError::Malformed(format!("header ends before {what}")))?;
    tok.parse()
        .map_err(|_| DecodeError::Malformed(format!("bad {what} {tok:?}")))
}

fn decode_png(bytes: &[u8]) -> Result<Image, DecodeError> {
    let bad = |e: png::DecodingError| DecodeError::Malformed(format!("png: {e}"));
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| DecodeError::Malformed("png: image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(DecodeError::Unsupported(format!(
            "png bit depth {:?}",
            info.bit_depth
        )));
    }
    let data = &buf[..info.buffer_size()];
    let (channels, pixels): (Channels, Vec<u8>) = match info.color_type {
        png::ColorType::Grayscale => (Channels::Gray, data.to_vec()),
        png::ColorType::GrayscaleAlpha => (Channels::Gray, data.iter().step_by(2).copied().collect()),
        png::ColorType::Rgb => (Channels::Rgb, data.to_vec()),
        png::ColorType::Rgba => (
            Channels::Rgb,
            data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ),
        png::ColorType::Indexed => {
            return Err(DecodeError::Unsupported("unexpanded palette png".into()))
        }
    };
    Image::new(info.width, info.height, channels, pixels)
        .map_err(|e| DecodeError::Malformed(e.to_string()))
}
