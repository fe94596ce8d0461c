//! On-disk formats: PFM float maps (little-endian, scale −1), 8-bit PGM
//! masks, PNG color images, JSON documents. Every writer goes through a
//! temp file and a rename so readers never see partial files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::crf::{Marginals, UnaryField};
use crate::error::{Error, Result};
use crate::geomfeat::{DirectionClass, RgbImage};
use crate::grid::Grid;

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format("json", e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::format("json", format!("{}: {e}", path.display())))
}

/// Splits off one whitespace-delimited header token.
fn header_token<'a>(data: &'a [u8], pos: &mut usize, format: &'static str) -> Result<&'a str> {
    while *pos < data.len() && data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    // PGM allows comment lines in the header.
    while *pos < data.len() && data[*pos] == b'#' {
        while *pos < data.len() && data[*pos] != b'\n' {
            *pos += 1;
        }
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format(format, "truncated header"));
    }
    std::str::from_utf8(&data[start..*pos]).map_err(|_| Error::format(format, "non-ascii header"))
}

fn parse_dim(token: &str, format: &'static str) -> Result<usize> {
    token
        .parse::<usize>()
        .ok()
        .filter(|v| *v > 0)
        .ok_or_else(|| Error::format(format, format!("bad dimension {token:?}")))
}

/// Encodes `channels` (1 or 3) same-sized planes, each stacked `planes`
/// tall when there is one channel. Values are stored as f32.
fn encode_pfm(
    width: usize,
    height: usize,
    channels: usize,
    pixel: impl Fn(usize, usize, usize) -> f64,
) -> Vec<u8> {
    let magic = if channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * channels * 4);
    for y in (0..height).rev() {
        for x in 0..width {
            for c in 0..channels {
                out.extend_from_slice(&(pixel(x, y, c) as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Decoded PFM image: `channels` values per pixel, rows top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl PfmImage {
    pub fn channel(&self, c: usize) -> Grid<f64> {
        Grid::from_fn(self.width, self.height, |x, y| {
            self.data[(y * self.width + x) * self.channels + c]
        })
    }

    /// Splits a single-channel image stacked from `count` equal planes.
    pub fn planes(&self, count: usize) -> Result<Vec<Grid<f64>>> {
        if self.channels != 1 || count == 0 || !self.height.is_multiple_of(count) {
            return Err(Error::format(
                "pfm",
                format!("cannot split into {count} planes"),
            ));
        }
        let h = self.height / count;
        Ok((0..count)
            .map(|k| {
                Grid::from_fn(self.width, h, |x, y| {
                    self.data[(k * h + y) * self.width + x]
                })
            })
            .collect())
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<PfmImage> {
    let mut pos = 0;
    let channels = match header_token(bytes, &mut pos, "pfm")? {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::format("pfm", format!("bad magic {other:?}"))),
    };
    let width = parse_dim(header_token(bytes, &mut pos, "pfm")?, "pfm")?;
    let height = parse_dim(header_token(bytes, &mut pos, "pfm")?, "pfm")?;
    let scale: f64 = header_token(bytes, &mut pos, "pfm")?
        .parse()
        .map_err(|_| Error::format("pfm", "bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format("pfm", "scale must be non-zero"));
    }
    pos += 1;
    let n = width * height * channels;
    let payload = bytes
        .get(pos..pos + n * 4)
        .ok_or_else(|| Error::format("pfm", "truncated pixel data"))?;
    let little = scale < 0.0;
    let mut data = vec![0.0; n];
    for (k, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, rest) = (k / (width * channels), k % (width * channels));
        data[(height - 1 - row) * width * channels + rest] = v as f64;
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    decode_pfm(&read_bytes(path)?).map_err(|e| match e {
        Error::Format { format, reason } => Error::Format {
            format,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

/// Single-channel PFM of one or more vertically stacked planes.
pub fn write_pfm(path: &Path, planes: &[&Grid<f64>]) -> Result<()> {
    let first = planes
        .first()
        .ok_or_else(|| Error::invalid("no planes to write"))?;
    for p in planes {
        first.check_dims(p, "stacked pfm plane")?;
    }
    let (w, h) = first.dims();
    let bytes = encode_pfm(w, h * planes.len(), 1, |x, y, _| {
        *planes[y / h].get(x, y % h)
    });
    write_atomic(path, &bytes)
}

/// Three-channel PFM.
pub fn write_pfm_rgb(path: &Path, planes: [&Grid<f64>; 3]) -> Result<()> {
    planes[0].check_dims(planes[1], "pfm channel")?;
    planes[0].check_dims(planes[2], "pfm channel")?;
    let (w, h) = planes[0].dims();
    write_atomic(path, &encode_pfm(w, h, 3, |x, y, c| *planes[c].get(x, y)))
}

pub fn read_pfm_plane(path: &Path) -> Result<Grid<f64>> {
    let img = read_pfm(path)?;
    if img.channels != 1 {
        return Err(Error::format(
            "pfm",
            format!("{} has {} channels", path.display(), img.channels),
        ));
    }
    Ok(img.channel(0))
}

pub fn encode_pgm(grid: &Grid<u8>) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend_from_slice(grid.as_slice());
    out
}

pub fn write_pgm(path: &Path, grid: &Grid<u8>) -> Result<()> {
    write_atomic(path, &encode_pgm(grid))
}

/// Validity mask as 0/255 PGM.
pub fn write_mask(path: &Path, valid: &Grid<bool>) -> Result<()> {
    write_pgm(path, &valid.map(|v| if *v { 255 } else { 0 }))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    let mut pos = 0;
    if header_token(bytes, &mut pos, "pgm")? != "P5" {
        return Err(Error::format("pgm", "only binary P5 is supported"));
    }
    let width = parse_dim(header_token(bytes, &mut pos, "pgm")?, "pgm")?;
    let height = parse_dim(header_token(bytes, &mut pos, "pgm")?, "pgm")?;
    if header_token(bytes, &mut pos, "pgm")? != "255" {
        return Err(Error::format("pgm", "only 8-bit maxval 255 is supported"));
    }
    pos += 1;
    let data = bytes
        .get(pos..pos + width * height)
        .ok_or_else(|| Error::format("pgm", "truncated pixel data"))?;
    Grid::from_vec(width, height, data.to_vec())
}

pub fn read_pgm(path: &Path) -> Result<Grid<u8>> {
    decode_pgm(&read_bytes(path)?)
}

pub fn read_mask(path: &Path) -> Result<Grid<bool>> {
    Ok(read_pgm(path)?.map(|v| *v >= 128))
}

fn rgb8(rgb: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_fn(rgb.width() as u32, rgb.height() as u32, |x, y| {
        let p = rgb.get(x as usize, y as usize);
        image::Rgb(p.map(|c| c.round().clamp(0.0, 255.0) as u8))
    })
}

fn encode_png(img: &image::RgbImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::format("png", e.to_string()))?;
    Ok(buf.into_inner())
}

/// RGB image rounded to 8 bits per channel.
pub fn write_rgb_png(path: &Path, rgb: &RgbImage) -> Result<()> {
    write_atomic(path, &encode_png(&rgb8(rgb))?)
}

/// Any image the `image` crate reads (PNG, PPM), converted to RGB.
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .map_err(|e| Error::format("image", format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Grid::from_fn(w, h, |x, y| {
        img.get_pixel(x as u32, y as u32).0.map(f64::from)
    }))
}

/// Display color for each direction class; black for none.
pub fn direction_color(class: Option<DirectionClass>) -> [u8; 3] {
    match class {
        None => [0, 0, 0],
        Some(DirectionClass::Horizontal) => [230, 60, 50],
        Some(DirectionClass::Longitudinal) => [60, 180, 75],
        Some(DirectionClass::Leftward) => [0, 130, 200],
        Some(DirectionClass::Rightward) => [255, 200, 40],
    }
}

pub fn write_direction_png(path: &Path, dirs: &Grid<Option<DirectionClass>>) -> Result<()> {
    let img = image::RgbImage::from_fn(dirs.width() as u32, dirs.height() as u32, |x, y| {
        image::Rgb(direction_color(*dirs.get(x as usize, y as usize)))
    });
    write_atomic(path, &encode_png(&img)?)
}

/// Class ids as PGM, with [`crate::geomfeat::NO_DIRECTION`] for none.
pub fn direction_ids(dirs: &Grid<Option<DirectionClass>>) -> Grid<u8> {
    dirs.map(|d| d.map_or(crate::geomfeat::NO_DIRECTION, DirectionClass::id))
}

/// Sidecar listing the planes of a stacked probability PFM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPlanes {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<String>,
}

/// `<stem>.pfm` holds one probability plane per label, `<stem>.json` the
/// label list.
pub fn stem_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("pfm"), stem.with_extension("json"))
}

fn write_label_planes(
    stem: &Path,
    width: usize,
    height: usize,
    labels: &[String],
    probs: &[f64],
) -> Result<()> {
    let n = labels.len();
    let planes: Vec<Grid<f64>> = (0..n)
        .map(|l| Grid::from_fn(width, height, |x, y| probs[(y * width + x) * n + l]))
        .collect();
    let (pfm, json) = stem_paths(stem);
    write_pfm(&pfm, &planes.iter().collect::<Vec<_>>())?;
    write_json(
        &json,
        &LabelPlanes {
            width,
            height,
            labels: labels.to_vec(),
        },
    )
}

fn read_label_planes(stem: &Path) -> Result<(LabelPlanes, Vec<f64>)> {
    let (pfm, json) = stem_paths(stem);
    let meta: LabelPlanes = read_json(&json)?;
    let planes = read_pfm(&pfm)?.planes(meta.labels.len())?;
    if planes[0].dims() != (meta.width, meta.height) {
        return Err(Error::format(
            "pfm",
            format!("{} does not match its label sidecar", pfm.display()),
        ));
    }
    let n = meta.labels.len();
    let mut probs = vec![0.0; meta.width * meta.height * n];
    for (l, plane) in planes.iter().enumerate() {
        for (i, v) in plane.iter().enumerate() {
            probs[i * n + l] = *v;
        }
    }
    Ok((meta, probs))
}

/// Stores the unary in probability space.
pub fn write_unary(stem: &Path, unary: &UnaryField) -> Result<()> {
    write_label_planes(
        stem,
        unary.width(),
        unary.height(),
        unary.labels(),
        &unary.probabilities(),
    )
}

/// Reads probabilities, renormalizing each pixel to absorb f32 rounding.
pub fn read_unary(stem: &Path) -> Result<UnaryField> {
    let (meta, mut probs) = read_label_planes(stem)?;
    let n = meta.labels.len();
    for px in probs.chunks_mut(n) {
        let s: f64 = px.iter().sum();
        if (s - 1.0).abs() > 1e-4 || px.iter().any(|p| *p < 0.0) {
            return Err(Error::format(
                "unary",
                format!("{}: probabilities sum to {s}", stem.display()),
            ));
        }
        px.iter_mut().for_each(|p| *p /= s);
    }
    UnaryField::from_probabilities(meta.width, meta.height, meta.labels, &probs)
}

pub fn write_marginals(stem: &Path, q: &Marginals) -> Result<()> {
    write_label_planes(stem, q.width(), q.height(), q.labels(), q.values())
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format("csv", e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format("csv", e.to_string()))?;
    write_atomic(path, &bytes)
}
