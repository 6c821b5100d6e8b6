//! Dense row-major 2D containers and their binary file formats.
//!
//! Pixel `(r, c)` lives at linear index `r * cols + c`, origin top-left.
//!
//! Matrix files: `b"GPDM"`, `u32` version (1), `u32` rows, `u32` cols, then
//! `rows * cols` little-endian `f64` values in row-major order.
//!
//! Label files: `b"GPDL"`, `u32` version (1), `u32` rows, `u32` cols, `u32` K,
//! then `rows * cols` little-endian `u32` labels in `1..=K`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"GPDM";
pub const LABEL_MAGIC: [u8; 4] = *b"GPDL";
pub const FORMAT_VERSION: u32 = 1;

/// A dense real-valued image with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        check_dims(rows, cols)?;
        if !value.is_finite() {
            return Err(Error::NonFinite(0));
        }
        Ok(Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Wraps a buffer produced internally; callers guarantee finiteness.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise `f(self, other)`; both grids must have equal dims.
    pub fn map_pair(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> ImageGrid {
        assert_eq!(
            self.dims(),
            other.dims(),
            "map_pair on grids of different dims"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ImageGrid::from_raw(self.rows, self.cols, data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Squared Euclidean distance `‖self − other‖²`.
    pub fn dist_sq(&self, other: &ImageGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn ensure_same_dims(&self, other: &ImageGrid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.data.len());
        out.extend_from_slice(&MATRIX_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader::new(bytes);
        rd.magic(MATRIX_MAGIC)?;
        rd.version()?;
        let rows = rd.u32()? as usize;
        let cols = rd.u32()? as usize;
        check_dims(rows, cols)?;
        let n = rows.checked_mul(cols).ok_or(Error::DimensionOverflow)?;
        let nbytes = n.checked_mul(8).ok_or(Error::DimensionOverflow)?;
        let payload = rd.take(nbytes)?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows, cols, data)
    }

    /// One line per grid row, comma-separated, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Per-pixel class assignment. Classes are stored 0-based; files and
/// user-facing output use the 1-based labels `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    rows: usize,
    cols: usize,
    k_classes: usize,
    classes: Vec<usize>,
}

impl LabelField {
    /// Builds a field from 0-based class indices.
    pub fn new(rows: usize, cols: usize, k_classes: usize, classes: Vec<usize>) -> Result<Self> {
        check_dims(rows, cols)?;
        if k_classes == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if classes.len() != rows * cols {
            return Err(Error::invalid(format!(
                "label length {} does not match {rows}x{cols}",
                classes.len()
            )));
        }
        if let Some(&bad) = classes.iter().find(|&&c| c >= k_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad as u32 + 1,
                k: k_classes,
            });
        }
        Ok(Self {
            rows,
            cols,
            k_classes,
            classes,
        })
    }

    /// Builds a field from 1-based labels.
    pub fn from_labels(rows: usize, cols: usize, k_classes: usize, labels: &[u32]) -> Result<Self> {
        let mut classes = Vec::with_capacity(labels.len());
        for &l in labels {
            if l == 0 || l as usize > k_classes {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    k: k_classes,
                });
            }
            classes.push(l as usize - 1);
        }
        Self::new(rows, cols, k_classes, classes)
    }

    pub fn constant(rows: usize, cols: usize, k_classes: usize, class: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Self::new(rows, cols, k_classes, vec![class; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn k_classes(&self) -> usize {
        self.k_classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// 0-based class of pixel `i`.
    #[inline]
    pub fn class(&self, i: usize) -> usize {
        self.classes[i]
    }

    /// 1-based label of pixel `i`.
    pub fn label(&self, i: usize) -> u32 {
        self.classes[i] as u32 + 1
    }

    #[inline]
    pub(crate) fn set_class(&mut self, i: usize, k: usize) {
        debug_assert!(k < self.k_classes);
        self.classes[i] = k;
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn labels(&self) -> Vec<u32> {
        self.classes.iter().map(|&c| c as u32 + 1).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k_classes];
        for &c in &self.classes {
            counts[c] += 1;
        }
        counts
    }

    /// Applies `perm[old] = new` to every pixel.
    pub fn permuted(&self, perm: &[usize]) -> LabelField {
        LabelField {
            rows: self.rows,
            cols: self.cols,
            k_classes: self.k_classes,
            classes: self.classes.iter().map(|&c| perm[c]).collect(),
        }
    }

    pub fn ensure_matches(&self, grid: &ImageGrid) -> Result<()> {
        if self.dims() != grid.dims() {
            return Err(Error::DimensionMismatch {
                expected: grid.dims(),
                found: self.dims(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 4 * self.classes.len());
        out.extend_from_slice(&LABEL_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_classes as u32).to_le_bytes());
        for &c in &self.classes {
            out.extend_from_slice(&(c as u32 + 1).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = ByteReader::new(bytes);
        rd.magic(LABEL_MAGIC)?;
        rd.version()?;
        let rows = rd.u32()? as usize;
        let cols = rd.u32()? as usize;
        let k = rd.u32()? as usize;
        check_dims(rows, cols)?;
        let n = rows.checked_mul(cols).ok_or(Error::DimensionOverflow)?;
        let nbytes = n.checked_mul(4).ok_or(Error::DimensionOverflow)?;
        let payload = rd.take(nbytes)?;
        let labels: Vec<u32> = payload
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_labels(rows, cols, k, &labels)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| self.label(r * self.cols + c).to_string())
                .collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Axis-aligned rectangle `(row0, col0, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionMask {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

impl RegionMask {
    pub fn new(row0: usize, col0: usize, height: usize, width: usize) -> Self {
        Self {
            row0,
            col0,
            height,
            width,
        }
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        self.row0 + self.height <= rows && self.col0 + self.width <= cols
    }

    pub fn overlaps(&self, other: &RegionMask) -> bool {
        self.row0 < other.row0 + other.height
            && other.row0 < self.row0 + self.height
            && self.col0 < other.col0 + other.width
            && other.col0 < self.col0 + self.width
    }
}

/// Sample mean and unbiased standard deviation of the pixels under `mask`.
pub fn extract_region(grid: &ImageGrid, mask: &RegionMask) -> Result<(f64, f64)> {
    if !mask.fits(grid.rows(), grid.cols()) {
        return Err(Error::RegionOutOfBounds);
    }
    let n = mask.area();
    if n < 2 {
        return Err(Error::RegionTooSmall(n));
    }
    let pixels = || {
        (mask.row0..mask.row0 + mask.height)
            .flat_map(move |r| (mask.col0..mask.col0 + mask.width).map(move |c| grid.get(r, c)))
    };
    let mean = pixels().sum::<f64>() / n as f64;
    let ss: f64 = pixels().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

pub fn write_matrix(path: impl AsRef<Path>, grid: &ImageGrid) -> Result<()> {
    write_atomic(path.as_ref(), &grid.to_bytes())
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<ImageGrid> {
    ImageGrid::from_bytes(&fs::read(path)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelField) -> Result<()> {
    write_atomic(path.as_ref(), &labels.to_bytes())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelField> {
    LabelField::from_bytes(&fs::read(path)?)
}

pub fn write_csv(path: impl AsRef<Path>, grid: &ImageGrid) -> Result<()> {
    write_atomic(path.as_ref(), grid.to_csv().as_bytes())
}

/// Writes UTF-8 text through a temporary file and rename.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_atomic(path.as_ref(), text.as_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyDimension);
    }
    if rows > u32::MAX as usize || cols > u32::MAX as usize {
        return Err(Error::DimensionOverflow);
    }
    rows.checked_mul(cols).ok_or(Error::DimensionOverflow)?;
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(Error::Truncated {
                expected: n,
                found: remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.take(4)?.try_into().unwrap();
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != FORMAT_VERSION {
            return Err(Error::BadVersion(v));
        }
        Ok(())
    }
}
