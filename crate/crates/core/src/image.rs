//! 8-bit raster images and binary Netpbm (PGM `P5` / PPM `P6`) encoding.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        Image {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::ShapeMismatch(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        let i = self.index(x, y);
        self.data[i..i + self.channels].copy_from_slice(value);
    }

    /// Number of pixels with any non-zero channel.
    pub fn occupied(&self) -> usize {
        self.data
            .chunks_exact(self.channels)
            .filter(|px| px.iter().any(|&v| v != 0))
            .count()
    }

    pub fn flip_horizontal(&self) -> Image {
        let mut out = Image::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set_pixel(self.width - 1 - x, y, self.pixel(x, y));
            }
        }
        out
    }

    pub fn flip_vertical(&self) -> Image {
        let row = self.width * self.channels;
        let mut out = Image::new(self.width, self.height, self.channels);
        for y in 0..self.height {
            let src = &self.data[y * row..(y + 1) * row];
            let dst_y = self.height - 1 - y;
            out.data[dst_y * row..(dst_y + 1) * row].copy_from_slice(src);
        }
        out
    }

    /// Converts to the requested channel count: gray is replicated to RGB,
    /// RGB is reduced to the rounded channel mean.
    pub fn with_channels(&self, channels: usize) -> Image {
        match (self.channels, channels) {
            (a, b) if a == b => self.clone(),
            (1, 3) => Image {
                width: self.width,
                height: self.height,
                channels: 3,
                data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
            },
            (3, 1) => Image {
                width: self.width,
                height: self.height,
                channels: 1,
                data: self
                    .data
                    .chunks_exact(3)
                    .map(|px| ((px[0] as u32 + px[1] as u32 + px[2] as u32 + 1) / 3) as u8)
                    .collect(),
            },
            (a, b) => panic!("unsupported channel conversion {a} -> {b}"),
        }
    }

    /// Resamples to `width`×`height`. Integer downscale factors use box
    /// averaging; anything else falls back to bilinear sampling.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let c = self.channels;
        let mut out = Image::new(width, height, c);
        if self.width % width == 0 && self.height % height == 0 {
            let (fx, fy) = (self.width / width, self.height / height);
            let area = (fx * fy) as u32;
            for y in 0..height {
                for x in 0..width {
                    for ch in 0..c {
                        let mut sum = 0u32;
                        for dy in 0..fy {
                            for dx in 0..fx {
                                sum += self.data[self.index(x * fx + dx, y * fy + dy) + ch] as u32;
                            }
                        }
                        let i = out.index(x, y) + ch;
                        out.data[i] = ((sum + area / 2) / area) as u8;
                    }
                }
            }
            return out;
        }
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        for y in 0..height {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f32);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f32;
            for x in 0..width {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f32);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f32;
                for ch in 0..c {
                    let p = |xx, yy| self.data[self.index(xx, yy) + ch] as f32;
                    let top = p(x0, y0) * (1.0 - tx) + p(x1, y0) * tx;
                    let bottom = p(x0, y1) * (1.0 - tx) + p(x1, y1) * tx;
                    let i = out.index(x, y) + ch;
                    out.data[i] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        out
    }

    /// Binary Netpbm encoding: `P5` for gray, `P6` for RGB, maxval 255.
    pub fn encode_netpbm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn decode_netpbm(bytes: &[u8]) -> std::result::Result<Image, String> {
        let mut pos = 0usize;
        let mut next_token = || -> std::result::Result<String, String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("unexpected end of header".into());
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let channels = match next_token()?.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => return Err(format!("unsupported magic {other:?}")),
        };
        let mut number = |what: &str| -> std::result::Result<usize, String> {
            next_token()?
                .parse::<usize>()
                .map_err(|e| format!("bad {what}: {e}"))
        };
        let width = number("width")?;
        let height = number("height")?;
        let maxval = number("maxval")?;
        if maxval != 255 {
            return Err(format!("unsupported maxval {maxval}"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        let header_end = pos + 1;
        let expected = width * height * channels;
        if bytes.len() < header_end || bytes.len() - header_end != expected {
            return Err(format!(
                "raster has {} bytes, expected {expected}",
                bytes.len().saturating_sub(header_end)
            ));
        }
        Ok(Image {
            width,
            height,
            channels,
            data: bytes[header_end..].to_vec(),
        })
    }

    pub fn read(path: &Path) -> Result<Image> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Image::decode_netpbm(&bytes).map_err(|msg| Error::format("netpbm", path, msg))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode_netpbm())
    }

    /// File extension matching the encoding this image will use.
    pub fn extension(&self) -> &'static str {
        if self.channels == 1 {
            "pgm"
        } else {
            "ppm"
        }
    }
}

/// Writes via a sibling temp file and rename so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().ok();
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
