use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IrisError;

pub const MIN_FRAME_SIDE: u32 = 16;

/// An 8-bit grayscale image with a capture timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
    pub t_ms: f64,
}

impl Frame {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>, t_ms: f64) -> Result<Self, IrisError> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(IrisError::FrameTooSmall { width, height });
        }
        if pixels.len() != width as usize * height as usize {
            return Err(IrisError::PixelCount {
                expected: width as usize * height as usize,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            t_ms,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8, t_ms: f64) -> Result<Self, IrisError> {
        Self::new(width, height, vec![value; width as usize * height as usize], t_ms)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn full_roi(&self) -> RegionOfInterest {
        RegionOfInterest {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(bytes: &[u8], t_ms: f64) -> Result<Self, IrisError> {
        let mut pos = 0usize;
        let magic = header_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(IrisError::Pgm("not a binary PGM (P5)".into()));
        }
        let width = header_number(bytes, &mut pos)?;
        let height = header_number(bytes, &mut pos)?;
        let maxval = header_number(bytes, &mut pos)?;
        if maxval != 255 {
            return Err(IrisError::Pgm(format!("maxval {maxval} unsupported, expected 255")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(IrisError::Pgm("missing whitespace after maxval".into())),
        }
        let need = width as usize * height as usize;
        let raster = &bytes[pos..];
        if raster.len() < need {
            return Err(IrisError::Pgm(format!(
                "raster truncated: {} of {need} bytes",
                raster.len()
            )));
        }
        Self::new(width, height, raster[..need].to_vec(), t_ms)
    }

    pub fn read_pgm(path: &Path, t_ms: f64) -> Result<Self, IrisError> {
        let bytes = fs::read(path).map_err(|e| IrisError::Io(format!("{}: {e}", path.display())))?;
        Self::from_pgm(&bytes, t_ms)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<(), IrisError> {
        let mut f = fs::File::create(path).map_err(|e| IrisError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(&self.to_pgm())
            .map_err(|e| IrisError::Io(format!("{}: {e}", path.display())))
    }
}

fn skip_space_and_comments(bytes: &[u8], pos: &mut usize) {
    while let Some(&b) = bytes.get(*pos) {
        if b == b'#' {
            while let Some(&c) = bytes.get(*pos) {
                *pos += 1;
                if c == b'\n' || c == b'\r' {
                    break;
                }
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], IrisError> {
    skip_space_and_comments(bytes, pos);
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
        *pos += 1;
    }
    if start == *pos {
        return Err(IrisError::Pgm("truncated header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize) -> Result<u32, IrisError> {
    let tok = header_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IrisError::Pgm(format!("bad header field {:?}", String::from_utf8_lossy(tok))))
}

/// Axis-aligned search window in frame pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl RegionOfInterest {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn check_inside(&self, frame: &Frame) -> Result<(), IrisError> {
        let fits = self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(frame.width())
            && u64::from(self.y) + u64::from(self.h) <= u64::from(frame.height());
        if fits {
            Ok(())
        } else {
            Err(IrisError::RoiOutsideFrame {
                roi: *self,
                width: frame.width(),
                height: frame.height(),
            })
        }
    }

    /// A `w`×`h` window centred on `(cx, cy)`, shifted as needed to stay
    /// inside a `width`×`height` frame.
    pub fn centered(cx: f64, cy: f64, w: u32, h: u32, width: u32, height: u32) -> Self {
        let w = w.min(width);
        let h = h.min(height);
        let x = (cx - f64::from(w) / 2.0).round().clamp(0.0, f64::from(width - w)) as u32;
        let y = (cy - f64::from(h) / 2.0).round().clamp(0.0, f64::from(height - h)) as u32;
        Self { x, y, w, h }
    }
}

impl std::str::FromStr for RegionOfInterest {
    type Err = String;
    /// Parses `x,y,w,h`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<u32> = s
            .split(',')
            .map(|p| p.trim().parse::<u32>().map_err(|e| format!("bad ROI field {p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [x, y, w, h] => Ok(Self { x, y, w, h }),
            _ => Err(format!("ROI must be x,y,w,h, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub t_ms: f64,
}

/// Index of a frame directory: `{"frames":[{"file":"f0001.pgm","t_ms":0}, ...]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub frames: Vec<ManifestEntry>,
}

impl FrameManifest {
    pub fn load(path: &Path) -> Result<Self, IrisError> {
        let text =
            fs::read_to_string(path).map_err(|e| IrisError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| IrisError::Manifest(e.to_string()))
    }

    /// Reads every listed frame from `dir`. File names must be plain names
    /// inside the directory.
    pub fn read_frames(&self, dir: &Path) -> Result<Vec<Frame>, IrisError> {
        self.frames
            .iter()
            .map(|e| {
                let name = Path::new(&e.file);
                if name.components().count() != 1 || name.file_name().is_none() {
                    return Err(IrisError::Manifest(format!("invalid frame file name {:?}", e.file)));
                }
                Frame::read_pgm(&dir.join(name), e.t_ms)
            })
            .collect()
    }

    /// Writes `frames` as `f0001.pgm`, `f0002.pgm`, ... plus `manifest.json`,
    /// creating `dir` if needed.
    pub fn write_sequence(dir: &Path, frames: &[Frame]) -> Result<Self, IrisError> {
        fs::create_dir_all(dir).map_err(|e| IrisError::Io(format!("{}: {e}", dir.display())))?;
        let mut manifest = FrameManifest::default();
        for (i, f) in frames.iter().enumerate() {
            let file = format!("f{:04}.pgm", i + 1);
            f.write_pgm(&dir.join(&file))?;
            manifest.frames.push(ManifestEntry { file, t_ms: f.t_ms });
        }
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| IrisError::Manifest(e.to_string()))?;
        fs::write(dir.join("manifest.json"), json).map_err(|e| IrisError::Io(e.to_string()))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_is_bit_exact() {
        let pixels: Vec<u8> = (0..20 * 17).map(|i| (i * 7 % 256) as u8).collect();
        let f = Frame::new(20, 17, pixels, 0.0).unwrap();
        let bytes = f.to_pgm();
        assert!(bytes.starts_with(b"P5\n20 17\n255\n"));
        let back = Frame::from_pgm(&bytes, 0.0).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_pgm(), bytes);
    }

    #[test]
    fn pgm_header_with_comments() {
        let mut bytes = b"P5 # comment\n# another\n16\t16\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(9u8, 256));
        let f = Frame::from_pgm(&bytes, 5.0).unwrap();
        assert_eq!(f.get(15, 15), 9);
        assert_eq!(f.t_ms, 5.0);
    }

    #[test]
    fn pgm_rejects_bad_input() {
        assert!(Frame::from_pgm(b"P2\n16 16\n255\n", 0.0).is_err());
        assert!(Frame::from_pgm(b"P5\n16 16\n65535\n", 0.0).is_err());
        assert!(Frame::from_pgm(b"P5\n16 16\n255\n\x00\x01", 0.0).is_err());
        assert!(matches!(
            Frame::new(8, 8, vec![0; 64], 0.0),
            Err(IrisError::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn roi_parse_and_bounds() {
        let r: RegionOfInterest = "1,2,30,40".parse().unwrap();
        assert_eq!(r, RegionOfInterest::new(1, 2, 30, 40));
        assert!("1,2,3".parse::<RegionOfInterest>().is_err());
        let f = Frame::filled(32, 32, 0, 0.0).unwrap();
        assert!(RegionOfInterest::new(0, 0, 32, 32).check_inside(&f).is_ok());
        assert!(RegionOfInterest::new(1, 0, 32, 32).check_inside(&f).is_err());
        let c = RegionOfInterest::centered(30.0, 2.0, 16, 16, 32, 32);
        assert_eq!(c, RegionOfInterest::new(16, 0, 16, 16));
    }

    #[test]
    fn manifest_sequence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..3)
            .map(|i| Frame::filled(16, 16, i as u8 * 40, i as f64 * 33.0).unwrap())
            .collect();
        FrameManifest::write_sequence(dir.path(), &frames).unwrap();
        let m = FrameManifest::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(m.frames[1].file, "f0002.pgm");
        assert_eq!(m.read_frames(dir.path()).unwrap(), frames);
        let bad = FrameManifest {
            frames: vec![ManifestEntry {
                file: "../x.pgm".into(),
                t_ms: 0.0,
            }],
        };
        assert!(bad.read_frames(dir.path()).is_err());
    }
}
