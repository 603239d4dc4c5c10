//! Shared domain types: rasters, superpixel segmentations, interpretable
//! masks, sampled neighbourhoods and explanations, plus the projection of a
//! superpixel explanation back into pixel space.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, param_err, Result};

/// Dense float raster with intensities in `[0, 1]`, row-major and
/// channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(param_err(format!("channels must be 1 or 3, got {channels}")));
        }
        if width == 0 || height == 0 {
            return Err(param_err("image must have non-zero width and height"));
        }
        if data.len() != width * height * channels {
            return Err(dim_err(format!(
                "data length {} != {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(param_err(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image from a per-pixel closure returning one value per channel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    /// Wraps data produced internally that is known to be in range.
    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Slice of the channel values of pixel index `p` (row-major).
    #[inline]
    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Luminance plane (`0.299 R + 0.587 G + 0.114 B`; identity for gray).
    pub fn luminance(&self) -> Vec<f64> {
        match self.channels {
            1 => self.data.clone(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
        }
    }

    /// Per-channel mean over the whole image.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (s, v) in sums.iter_mut().zip(px) {
                *s += v;
            }
        }
        let n = self.n_pixels() as f64;
        sums.iter().map(|s| s / n).collect()
    }

    /// Bilinear resampling with half-pixel centres, so resizing to the same
    /// size is the identity.
    pub fn resize_bilinear(&self, new_width: usize, new_height: usize) -> Result<Image> {
        if new_width == 0 || new_height == 0 {
            return Err(param_err("resize target must be non-zero"));
        }
        if new_width == self.width && new_height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / new_width as f64;
        let sy = self.height as f64 / new_height as f64;
        let ch = self.channels;
        let mut data = Vec::with_capacity(new_width * new_height * ch);
        for y in 0..new_height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..new_width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                for c in 0..ch {
                    let top = self.get(x0, y0, c) * (1.0 - tx) + self.get(x1, y0, c) * tx;
                    let bottom = self.get(x0, y1, c) * (1.0 - tx) + self.get(x1, y1, c) * tx;
                    data.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0));
                }
            }
        }
        Ok(Image::from_raw(new_width, new_height, ch, data))
    }

    /// Reads a PNG, PPM or PGM file. Gray inputs stay single-channel; anything
    /// else is converted to RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let dynimg = image::open(path.as_ref())?;
        Ok(Self::from_dynamic(&dynimg))
    }

    pub fn from_dynamic(dynimg: &image::DynamicImage) -> Image {
        use image::ColorType;
        let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
        match dynimg.color() {
            ColorType::L8 | ColorType::L16 | ColorType::La8 | ColorType::La16 => {
                let raw = dynimg.to_luma8().into_raw();
                Image::from_raw(w, h, 1, raw.iter().map(|&v| v as f64 / 255.0).collect())
            }
            _ => {
                let raw = dynimg.to_rgb8().into_raw();
                Image::from_raw(w, h, 3, raw.iter().map(|&v| v as f64 / 255.0).collect())
            }
        }
    }

    /// 8-bit quantized copy of the pixel data.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    /// Writes the image as 8-bit PNG, PPM or PGM depending on the extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        let (w, h) = (self.width as u32, self.height as u32);
        let dynimg = match self.channels {
            1 => image::DynamicImage::ImageLuma8(
                image::GrayImage::from_raw(w, h, self.to_bytes()).expect("buffer size"),
            ),
            _ => image::DynamicImage::ImageRgb8(
                image::RgbImage::from_raw(w, h, self.to_bytes()).expect("buffer size"),
            ),
        };
        match ext.as_str() {
            "ppm" | "pgm" | "pnm" => {
                let subtype = if self.channels == 1 {
                    image::codecs::pnm::PnmSubtype::Graymap(image::codecs::pnm::SampleEncoding::Binary)
                } else {
                    image::codecs::pnm::PnmSubtype::Pixmap(image::codecs::pnm::SampleEncoding::Binary)
                };
                let file = std::io::BufWriter::new(std::fs::File::create(path)?);
                let encoder = image::codecs::pnm::PnmEncoder::new(file).with_subtype(subtype);
                dynimg.write_with_encoder(encoder)?;
            }
            "png" | "" => {
                dynimg.save_with_format(path, image::ImageFormat::Png)?;
            }
            other => return Err(param_err(format!("unsupported image extension '{other}'"))),
        }
        Ok(())
    }
}

/// Label map assigning every pixel to one of `n_segments` superpixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelSegmentation {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    n_segments: usize,
}

impl SuperpixelSegmentation {
    /// Validates that labels cover exactly `0..S` with every label used.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(dim_err(format!(
                "label map length {} != {width}x{height}",
                labels.len()
            )));
        }
        let n_segments = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut seen = vec![false; n_segments];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(param_err(format!("label {missing} has no pixels")));
        }
        Ok(Self { width, height, labels, n_segments })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x] as usize
    }

    /// Number of pixels carrying each label.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_segments];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn check_image(&self, image: &Image) -> Result<()> {
        if image.width() != self.width || image.height() != self.height {
            return Err(dim_err(format!(
                "segmentation is {}x{} but image is {}x{}",
                self.width,
                self.height,
                image.width(),
                image.height()
            )));
        }
        Ok(())
    }
}

/// Binary vector over superpixels: `true` keeps the superpixel as-is,
/// `false` perturbs it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InterpretableMask {
    bits: Vec<bool>,
}

impl InterpretableMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn all_ones(n: usize) -> Self {
        Self { bits: vec![true; n] }
    }

    pub fn all_zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    #[inline]
    pub fn keeps(&self, segment: usize) -> bool {
        self.bits[segment]
    }

    /// Bits as 0/1 floats, the surrogate design-matrix row.
    pub fn as_features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Sampled neighbourhood around a query: masks, black-box outputs for the
/// explained class and kernel weights. Entry 0 is always the query itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbourhood {
    pub masks: Vec<InterpretableMask>,
    pub targets: Vec<f64>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Neighbourhood {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Surrogate coefficients per superpixel for one explained class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub class_id: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub config_digest: String,
}

impl Explanation {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Pixel-space relevance: each pixel carries the coefficient of its superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RelevanceMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(dim_err(format!(
                "relevance values length {} != {width}x{height}",
                values.len()
            )));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn scaled(&self, factor: f64) -> RelevanceMap {
        RelevanceMap {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Paints every pixel with the coefficient of its superpixel. The intercept
/// is not projected.
pub fn project_explanation(expl: &Explanation, seg: &SuperpixelSegmentation) -> Result<RelevanceMap> {
    if expl.coefficients.len() != seg.n_segments() {
        return Err(dim_err(format!(
            "{} coefficients for {} segments",
            expl.coefficients.len(),
            seg.n_segments()
        )));
    }
    let values = seg
        .labels()
        .iter()
        .map(|&l| expl.coefficients[l as usize])
        .collect();
    RelevanceMap::new(seg.width(), seg.height(), values)
}
