use crate::error::{Error, Result};
use std::io::{Read, Write};

/// 8-bit grayscale sensor image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TactileFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl TactileFrame {
    pub fn new(width: usize, height: usize) -> Self {
        TactileFrame {
            width,
            height,
            pixels: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Binary PGM (P5, maxval 255).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() + 20);
        self.write_pgm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::Pgm(e.to_string()))?;
        Self::from_pgm_bytes(&buf)
    }

    pub fn from_pgm_bytes(buf: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut next_token = || -> Result<String> {
            loop {
                while pos < buf.len() && buf[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < buf.len() && buf[pos] == b'#' {
                    while pos < buf.len() && buf[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < buf.len() && !buf[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Pgm("unexpected end of header".into()));
            }
            Ok(String::from_utf8_lossy(&buf[start..pos]).into_owned())
        };
        if next_token()? != "P5" {
            return Err(Error::Pgm("only binary P5 is supported".into()));
        }
        let num = |s: String| s.parse::<usize>().map_err(|_| Error::Pgm(format!("bad number {s:?}")));
        let width = num(next_token()?)?;
        let height = num(next_token()?)?;
        let maxval = num(next_token()?)?;
        if maxval != 255 {
            return Err(Error::Pgm(format!("maxval {maxval} unsupported")));
        }
        // exactly one whitespace byte separates the header from the raster
        let data = &buf[pos + 1..];
        if data.len() < width * height {
            return Err(Error::Pgm("truncated raster".into()));
        }
        Ok(TactileFrame {
            width,
            height,
            pixels: data[..width * height].to_vec(),
        })
    }
}
