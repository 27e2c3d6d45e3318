//! On-disk formats.
//!
//! * Tensor files: magic `TNS1`, then `n1`, `n2`, `n3` and a dtype code as
//!   little-endian `u32` (dtype 1 = `f64`), then `n1 * n2 * n3` little-endian
//!   `f64` values in frontal-slice-major, column-major-within-slice order.
//! * Dictionary metadata: UTF-8 `key=value` lines next to the tensor file.
//! * Images: binary 8-bit PGM (`P5`).
//! * Masks: `H x W x 1` tensor files holding 1.0 (observed) or 0.0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tdict_core::patches::{PixelMask, VolumeStack};
use tdict_core::Tensor3;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"TNS1";
pub const DTYPE_F64: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let (n1, n2, n3) = t.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(MAGIC);
    for v in [n1, n2, n3] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(CliError::format(path, "truncated tensor header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(CliError::format(path, "not a TNS1 tensor file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (n1, n2, n3, dtype) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
    if dtype != DTYPE_F64 {
        return Err(CliError::format(path, format!("unsupported dtype code {dtype}")));
    }
    let count = n1
        .checked_mul(n2)
        .and_then(|v| v.checked_mul(n3))
        .ok_or_else(|| CliError::format(path, "tensor dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count * 8 {
        return Err(CliError::format(
            path,
            format!(
                "payload holds {} bytes, header {n1}x{n2}x{n3} needs {}",
                payload.len(),
                count * 8
            ),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Tensor3::new(n1, n2, n3, data).map_err(|e| CliError::format(path, e.to_string()))
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    fs::write(path, encode_tensor(t)).map_err(|e| CliError::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_tensor(&bytes, path)
}

pub fn read_volume(path: &Path) -> Result<VolumeStack> {
    read_tensor(path).map(VolumeStack::new)
}

pub fn write_volume(path: &Path, v: &VolumeStack) -> Result<()> {
    write_tensor(path, v.tensor())
}

pub fn mask_to_tensor(mask: &PixelMask) -> Tensor3 {
    Tensor3::from_fn(
        mask.height(),
        mask.width(),
        1,
        |i, j, _| if mask.get(i, j) { 1.0 } else { 0.0 },
    )
}

pub fn write_mask(path: &Path, mask: &PixelMask) -> Result<()> {
    write_tensor(path, &mask_to_tensor(mask))
}

pub fn read_mask(path: &Path) -> Result<PixelMask> {
    let t = read_tensor(path)?;
    if t.n3() != 1 {
        return Err(CliError::format(path, "mask must have a single band"));
    }
    let mut data = Vec::with_capacity(t.n1() * t.n2());
    for &v in t.as_slice() {
        match v {
            0.0 => data.push(false),
            1.0 => data.push(true),
            _ => {
                return Err(CliError::format(
                    path,
                    format!("mask entries must be 0 or 1, found {v}"),
                ))
            }
        }
    }
    PixelMask::new(t.n1(), t.n2(), data).map_err(|e| CliError::format(path, e.to_string()))
}

/// Sidecar metadata of a dictionary file.
#[derive(Debug, Clone, PartialEq)]
pub struct DictMeta {
    pub k: usize,
    pub d: usize,
    pub n3: usize,
    pub lambda: f64,
    pub seed: u64,
    pub sweeps: usize,
}

impl DictMeta {
    pub fn render(&self) -> String {
        format!(
            "K={}\nd={}\nn3={}\nlambda={}\nseed={}\nsweeps={}\n",
            self.k, self.d, self.n3, self.lambda, self.seed, self.sweeps
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::format(path, format!("expected key=value, got {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<T> {
            map.get(key)
                .ok_or_else(|| CliError::format(path, format!("missing key {key}")))?
                .parse()
                .map_err(|_| CliError::format(path, format!("bad value for {key}")))
        }
        Ok(Self {
            k: field(&map, "K", path)?,
            d: field(&map, "d", path)?,
            n3: field(&map, "n3", path)?,
            lambda: field(&map, "lambda", path)?,
            seed: field(&map, "seed", path)?,
            sweeps: field(&map, "sweeps", path)?,
        })
    }
}

/// `<dict>.meta` next to a dictionary file.
pub fn meta_path(dict: &Path) -> PathBuf {
    let mut s = dict.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_meta(dict: &Path, meta: &DictMeta) -> Result<()> {
    let path = meta_path(dict);
    fs::write(&path, meta.render()).map_err(|e| CliError::io(&path, e))
}

pub fn read_meta(dict: &Path) -> Result<DictMeta> {
    let path = meta_path(dict);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    DictMeta::parse(&text, &path)
}

/// Grey image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
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
            return Err(CliError::format(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(CliError::format(path, "only binary PGM (P5) is supported"));
    }
    let mut number = |name: &str| -> Result<usize> {
        token()?
            .parse()
            .map_err(|_| CliError::format(path, format!("bad PGM {name}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(CliError::format(path, format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    let start = pos + 1;
    let need = width * height;
    if bytes.len() < start + need {
        return Err(CliError::format(path, "truncated PGM raster"));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[start..start + need].to_vec(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Stacks every `*.pgm` file of `dir`, in lexicographic order, into a volume.
pub fn import_pgm_dir(dir: &Path) -> Result<VolumeStack> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::format(dir, "no .pgm files found"));
    }
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        let bytes = fs::read(f).map_err(|e| CliError::io(f, e))?;
        let img = decode_pgm(&bytes, f)?;
        if let Some(first) = frames.first() {
            let first: &GrayImage = first;
            if (first.width, first.height) != (img.width, img.height) {
                return Err(CliError::format(
                    f,
                    format!(
                        "{}x{} differs from {}x{}",
                        img.width, img.height, first.width, first.height
                    ),
                ));
            }
        }
        frames.push(img);
    }
    let (h, w) = (frames[0].height, frames[0].width);
    Ok(VolumeStack::new(Tensor3::from_fn(h, w, frames.len(), |i, j, k| {
        f64::from(frames[k].pixels[i * w + j])
    })))
}

/// Writes one PGM per band, rounding and clamping to `0..=255`.
pub fn export_pgm_dir(v: &VolumeStack, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (h, w, b) = v.dims();
    let mut written = Vec::with_capacity(b);
    for k in 0..b {
        let mut pixels = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                pixels.push(v.get(i, j, k).round().clamp(0.0, 255.0) as u8);
            }
        }
        let path = dir.join(format!("band_{k:03}.pgm"));
        let img = GrayImage {
            width: w,
            height: h,
            pixels,
        };
        fs::write(&path, encode_pgm(&img)).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Renders a CSV table. Floats use the shortest round-trip representation;
/// infinities are written as `inf`.
pub fn render_csv(header: &[&str], rows: &[Vec<CsvValue>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match v {
                CsvValue::Int(x) => write!(out, "{x}").unwrap(),
                CsvValue::Float(x) if x.is_infinite() && *x > 0.0 => out.push_str("inf"),
                CsvValue::Float(x) if x.is_infinite() => out.push_str("-inf"),
                CsvValue::Float(x) => write!(out, "{x}").unwrap(),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsvValue {
    Int(u64),
    Float(f64),
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
