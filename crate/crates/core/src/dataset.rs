//! Image-folder ingestion and per-sample output files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::MixPlan;
use crate::tensor::{read_raw, write_raw, ImageTensor};

pub const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Png,
    Raw,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Png => "png",
            OutputFormat::Raw => "cmtx",
        }
    }

    /// Parses a comma-separated list such as `"png,raw"`.
    pub fn parse_list(s: &str) -> Result<Vec<OutputFormat>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let f: OutputFormat = part.parse()?;
            if !out.contains(&f) {
                out.push(f);
            }
        }
        if out.is_empty() {
            return Err(Error::Param("no output formats given".into()));
        }
        Ok(out)
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "png" => Ok(OutputFormat::Png),
            "raw" => Ok(OutputFormat::Raw),
            other => Err(Error::Param(format!("unknown output format {other:?}"))),
        }
    }
}

/// Everything needed to regenerate one output sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    /// Source path relative to the dataset root, `/`-separated.
    pub source: String,
    pub source_index: usize,
    pub root_seed: u64,
    pub sample_index: u64,
    pub config_digest: String,
    pub plan: MixPlan,
    pub outputs: Vec<String>,
}

/// Provenance fields of a manifest that the pixel pipeline doesn't know.
#[derive(Clone, Debug)]
pub struct SampleSource<'a> {
    pub source: &'a str,
    pub source_index: usize,
    pub root_seed: u64,
    pub config_digest: &'a str,
}

/// Lists files under `root` whose extension (case-insensitive) is in
/// `extensions`, recursing into subdirectories, sorted by raw path bytes.
/// A file's position in the list is its source index.
pub fn scan_dataset(root: impl AsRef<Path>, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let root = root.as_ref();
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::file(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::file(&dir, e))?;
            let path = entry.path();
            let kind = entry.file_type().map_err(|e| Error::file(&path, e))?;
            let kind = if kind.is_symlink() {
                fs::metadata(&path)
                    .map_err(|e| Error::file(&path, e))?
                    .file_type()
            } else {
                kind
            };
            if kind.is_dir() {
                stack.push(path);
            } else if kind.is_file() && has_extension(&path, extensions) {
                out.push(path);
            }
        }
    }
    out.sort_by(|a, b| {
        a.as_os_str()
            .as_encoded_bytes()
            .cmp(b.as_os_str().as_encoded_bytes())
    });
    Ok(out)
}

fn has_extension(path: &Path, extensions: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// `path` relative to `root` with `/` separators.
pub fn relative_name(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Decodes a PNG or JPEG. Gray images give one channel, color images three;
/// alpha is dropped and 8-bit values map to `v / 255`.
pub fn decode(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(from_dynamic(&img))
}

pub fn decode_bytes(bytes: &[u8]) -> Result<ImageTensor> {
    let img = image::load_from_memory(bytes).map_err(|e| Error::Decode {
        path: PathBuf::from("<memory>"),
        message: e.to_string(),
    })?;
    Ok(from_dynamic(&img))
}

fn from_dynamic(img: &DynamicImage) -> ImageTensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let to_unit = |v: u8| v as f32 / 255.0;
    if img.color().has_color() {
        let rgb = img.to_rgb8();
        let mut data = vec![0.0f32; 3 * w * h];
        for (i, px) in rgb.pixels().enumerate() {
            for c in 0..3 {
                data[c * w * h + i] = to_unit(px.0[c]);
            }
        }
        ImageTensor::from_parts(3, h, w, data)
    } else {
        let data = img.to_luma8().into_raw().into_iter().map(to_unit).collect();
        ImageTensor::from_parts(1, h, w, data)
    }
}

fn quantize(v: f32) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// 8-bit image for a 1- or 3-channel tensor.
pub fn to_dynamic(t: &ImageTensor) -> Result<DynamicImage> {
    let (c, h, w) = t.shape();
    let (wu, hu) = (w as u32, h as u32);
    match c {
        1 => {
            let bytes = t.data().iter().map(|&v| quantize(v)).collect();
            Ok(DynamicImage::ImageLuma8(
                GrayImage::from_raw(wu, hu, bytes).expect("sized"),
            ))
        }
        3 => {
            let mut bytes = Vec::with_capacity(3 * w * h);
            for i in 0..w * h {
                for ch in 0..3 {
                    bytes.push(quantize(t.plane(ch)[i]));
                }
            }
            Ok(DynamicImage::ImageRgb8(
                RgbImage::from_raw(wu, hu, bytes).expect("sized"),
            ))
        }
        _ => Err(Error::Shape(format!(
            "PNG output needs 1 or 3 channels, got {c}"
        ))),
    }
}

pub fn encode_png(t: &ImageTensor) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    to_dynamic(t)?
        .write_to(&mut out, image::ImageFormat::Png)
        .map_err(|e| Error::Io {
            offset: 0,
            source: std::io::Error::other(e),
        })?;
    Ok(out.into_inner())
}

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::file(&tmp, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes).map_err(|e| Error::file(&tmp, e))?;
        w.flush().map_err(|e| Error::file(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn sample_stem(sample_index: u64) -> String {
    format!("sample_{sample_index}")
}

pub fn manifest_path(out_dir: &Path, sample_index: u64) -> PathBuf {
    out_dir.join(format!("{}.json", sample_stem(sample_index)))
}

/// Writes the requested formats and `sample_<index>.json`; returns the
/// manifest that was written.
pub fn persist(
    out_dir: impl AsRef<Path>,
    sample_index: u64,
    tensor: &ImageTensor,
    plan: &MixPlan,
    formats: &[OutputFormat],
    source: &SampleSource<'_>,
) -> Result<SampleManifest> {
    let out_dir = out_dir.as_ref();
    let stem = sample_stem(sample_index);
    let mut outputs = Vec::new();
    for fmt in [OutputFormat::Raw, OutputFormat::Png] {
        if !formats.contains(&fmt) {
            continue;
        }
        let name = format!("{stem}.{}", fmt.extension());
        let bytes = match fmt {
            OutputFormat::Raw => {
                let mut buf = Vec::new();
                write_raw(tensor, &mut buf)?;
                buf
            }
            OutputFormat::Png => encode_png(tensor)?,
        };
        write_atomic(&out_dir.join(&name), &bytes)?;
        outputs.push(name);
    }
    let manifest = SampleManifest {
        source: source.source.to_string(),
        source_index: source.source_index,
        root_seed: source.root_seed,
        sample_index,
        config_digest: source.config_digest.to_string(),
        plan: plan.clone(),
        outputs,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&manifest_path(out_dir, sample_index), &json)?;
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<SampleManifest> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn read_raw_file(path: impl AsRef<Path>) -> Result<ImageTensor> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_raw(std::io::BufReader::new(file))
}
