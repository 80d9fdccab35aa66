//! Turning pictures and text into display frames.
//!
//! Polarity follows tactile-graphics practice: ink becomes relief, so dark
//! pixels raise taxels.

use thiserror::Error;

use crate::taxel::{Bitmap, GridDims};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RasterError {
    #[error("unsupported image format {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    BadHeader(&'static str),
    #[error("image data truncated: expected {expected} samples, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("invalid sample {0:?}")]
    BadSample(String),
    #[error("unsupported character {0:?}")]
    UnsupportedChar(char),
}

/// 8-bit grayscale, row-major, 0 = black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Option<Self> {
        (width > 0 && height > 0 && pixels.len() == width * height).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn uniform(width: usize, height: usize, value: u8) -> Self {
        Self::new(width, height, vec![value; width * height]).expect("positive size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Raised taxels as black, the rest white.
    pub fn from_bitmap(b: &Bitmap) -> Self {
        let d = b.dims();
        Self {
            width: d.cols(),
            height: d.rows(),
            pixels: b.bits().iter().map(|&r| if r { 0 } else { 255 }).collect(),
        }
    }

    fn dims(&self) -> GridDims {
        GridDims::new(self.height, self.width).expect("positive size")
    }
}

/// A decoded portable anymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pnm {
    /// P1/P4: black pixels are raised taxels.
    Bitmap(Bitmap),
    /// P2/P5, rescaled to 0..=255.
    Gray(GrayImage),
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<usize, RasterError> {
        self.skip_space();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(RasterError::BadHeader(what))
    }

    /// Consumes the single whitespace byte that ends a binary header.
    fn end_binary_header(&mut self) -> Result<&'a [u8], RasterError> {
        match self.data.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(&self.data[self.pos + 1..]),
            _ => Err(RasterError::BadHeader("missing whitespace before raster")),
        }
    }
}

fn truncated(expected: usize, actual: usize) -> RasterError {
    RasterError::Truncated { expected, actual }
}

fn ascii_samples(data: &[u8], count: usize) -> Result<Vec<usize>, RasterError> {
    let text = String::from_utf8_lossy(data);
    let mut out = Vec::with_capacity(count);
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_ascii_whitespace() {
            if out.len() == count {
                return Ok(out);
            }
            out.push(tok.parse().map_err(|_| RasterError::BadSample(tok.into()))?);
        }
    }
    if out.len() < count {
        return Err(truncated(count, out.len()));
    }
    Ok(out)
}

fn scale_sample(v: usize, maxval: usize) -> Result<u8, RasterError> {
    if v > maxval {
        return Err(RasterError::BadSample(v.to_string()));
    }
    Ok(((v * 255 + maxval / 2) / maxval) as u8)
}

/// Parses a P1, P2, P4 or P5 portable anymap.
pub fn load_pnm(bytes: &[u8]) -> Result<Pnm, RasterError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        let m = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(RasterError::UnsupportedMagic(m));
    }
    let magic = bytes[1];
    if !matches!(magic, b'1' | b'2' | b'4' | b'5') {
        return Err(RasterError::UnsupportedMagic(format!("P{}", magic as char)));
    }
    let mut h = Header { data: bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let dims = GridDims::new(height, width).map_err(|_| RasterError::BadHeader("zero size"))?;
    let n = width * height;

    match magic {
        b'1' => {
            h.skip_space();
            // P1 samples need no separators: every 0/1 digit is one pixel.
            let mut bits = Vec::with_capacity(n);
            let mut rest = h.data[h.pos..].iter();
            while bits.len() < n {
                match rest.next() {
                    None => return Err(truncated(n, bits.len())),
                    Some(b'0') => bits.push(false),
                    Some(b'1') => bits.push(true),
                    Some(b'#') => {
                        for &c in rest.by_ref() {
                            if c == b'\n' {
                                break;
                            }
                        }
                    }
                    Some(c) if c.is_ascii_whitespace() => {}
                    Some(&c) => return Err(RasterError::BadSample((c as char).to_string())),
                }
            }
            Ok(Pnm::Bitmap(Bitmap::from_bits(dims, bits).expect("sized")))
        }
        b'4' => {
            let raster = h.end_binary_header()?;
            let row_bytes = width.div_ceil(8);
            let need = row_bytes * height;
            if raster.len() < need {
                return Err(truncated(need, raster.len()));
            }
            let bits = (0..n)
                .map(|i| {
                    let (y, x) = (i / width, i % width);
                    raster[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0
                })
                .collect();
            Ok(Pnm::Bitmap(Bitmap::from_bits(dims, bits).expect("sized")))
        }
        b'2' => {
            let maxval = h.number("maxval")?;
            if maxval == 0 || maxval > u16::MAX as usize {
                return Err(RasterError::BadHeader("maxval out of range"));
            }
            let samples = ascii_samples(&h.data[h.pos..], n)?;
            let pixels = samples
                .into_iter()
                .map(|v| scale_sample(v, maxval))
                .collect::<Result<_, _>>()?;
            Ok(Pnm::Gray(GrayImage::new(width, height, pixels).expect("sized")))
        }
        _ => {
            let maxval = h.number("maxval")?;
            if maxval == 0 || maxval > u16::MAX as usize {
                return Err(RasterError::BadHeader("maxval out of range"));
            }
            let raster = h.end_binary_header()?;
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if raster.len() < need {
                return Err(truncated(need, raster.len()));
            }
            let pixels = (0..n)
                .map(|i| {
                    let v = if wide {
                        usize::from(u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]]))
                    } else {
                        usize::from(raster[i])
                    };
                    scale_sample(v, maxval)
                })
                .collect::<Result<_, _>>()?;
            Ok(Pnm::Gray(GrayImage::new(width, height, pixels).expect("sized")))
        }
    }
}

/// Area-weighted box resampling to `target` (rows = height, cols = width).
///
/// Each output pixel averages the source area it covers, with partial source
/// pixels weighted by overlap. The arithmetic is exact integer arithmetic and
/// rounds halves up.
pub fn box_scale(img: &GrayImage, target: GridDims) -> GrayImage {
    let (sw, sh) = (img.width, img.height);
    let (tw, th) = (target.cols(), target.rows());
    if (sw, sh) == (tw, th) {
        return img.clone();
    }
    // In scaled units a source pixel spans `tw` (or `th`) and an output pixel
    // spans `sw` (or `sh`).
    let overlaps = |src_n: usize, dst_n: usize, o: usize| {
        let (lo, hi) = (o * src_n, (o + 1) * src_n);
        let first = lo / dst_n;
        let last = (hi - 1) / dst_n;
        (first..=last)
            .map(move |s| {
                let a = (s * dst_n).max(lo);
                let b = ((s + 1) * dst_n).min(hi);
                (s, (b - a) as u64)
            })
            .collect::<Vec<_>>()
    };
    let area = (sw * sh) as u64;
    let mut pixels = Vec::with_capacity(tw * th);
    for oy in 0..th {
        let ys = overlaps(sh, th, oy);
        for ox in 0..tw {
            let xs = overlaps(sw, tw, ox);
            let mut sum = 0u64;
            for &(y, wy) in &ys {
                for &(x, wx) in &xs {
                    sum += u64::from(img.get(x, y)) * wy * wx;
                }
            }
            pixels.push(((2 * sum + area) / (2 * area)) as u8);
        }
    }
    GrayImage {
        width: tw,
        height: th,
        pixels,
    }
}

/// Raises every pixel darker than `t`.
pub fn threshold(img: &GrayImage, t: u8) -> Bitmap {
    let bits = img.pixels.iter().map(|&p| p < t).collect();
    Bitmap::from_bits(img.dims(), bits).expect("sized")
}

/// Standard 4×4 Bayer index matrix.
pub const BAYER_4X4: [[u8; 4]; 4] = [
    [0, 8, 2, 10],
    [12, 4, 14, 6],
    [3, 11, 1, 9],
    [15, 7, 13, 5],
];

/// Ordered dither: pixel `(r, c)` is raised iff it is below
/// `(B[r%4][c%4] + 0.5) / 16 · 256`, i.e. `16·B + 8`.
pub fn ordered_dither(img: &GrayImage) -> Bitmap {
    let w = img.width;
    let bits = img
        .pixels
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let b = u16::from(BAYER_4X4[(i / w) % 4][(i % w) % 4]);
            u16::from(p) < 16 * b + 8
        })
        .collect();
    Bitmap::from_bits(img.dims(), bits).expect("sized")
}

/// Six-dot Braille cell, bit `n-1` = dot `n`. Dots 1-3 run down the left
/// column, 4-6 down the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BrailleCell(u8);

impl BrailleCell {
    pub const BLANK: Self = Self(0);
    /// Dots 3-4-5-6, precedes a run of digits.
    pub const NUMBER_SIGN: Self = Self(0b11_1100);
    /// Dots 5-6, returns to letters after a digit.
    pub const LETTER_SIGN: Self = Self(0b11_0000);

    pub fn from_dots(dots: &[u8]) -> Self {
        Self(dots.iter().fold(0, |m, &d| {
            assert!((1..=6).contains(&d), "dot {d} out of range");
            m | 1 << (d - 1)
        }))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn has_dot(self, dot: u8) -> bool {
        (1..=6).contains(&dot) && self.0 >> (dot - 1) & 1 == 1
    }

    /// `(row, col)` offset of a dot inside the 3×2 cell.
    pub fn dot_offset(dot: u8) -> (usize, usize) {
        let d = usize::from(dot - 1);
        (d % 3, d / 3)
    }

    /// Grade-1 cell for a lowercase letter.
    pub fn letter(c: char) -> Option<Self> {
        const LETTERS: [&[u8]; 26] = [
            &[1],
            &[1, 2],
            &[1, 4],
            &[1, 4, 5],
            &[1, 5],
            &[1, 2, 4],
            &[1, 2, 4, 5],
            &[1, 2, 5],
            &[2, 4],
            &[2, 4, 5],
            &[1, 3],
            &[1, 2, 3],
            &[1, 3, 4],
            &[1, 3, 4, 5],
            &[1, 3, 5],
            &[1, 2, 3, 4],
            &[1, 2, 3, 4, 5],
            &[1, 2, 3, 5],
            &[2, 3, 4],
            &[2, 3, 4, 5],
            &[1, 3, 6],
            &[1, 2, 3, 6],
            &[2, 4, 5, 6],
            &[1, 3, 4, 6],
            &[1, 3, 4, 5, 6],
            &[1, 3, 5, 6],
        ];
        c.is_ascii_lowercase()
            .then(|| Self::from_dots(LETTERS[(c as u8 - b'a') as usize]))
    }

    /// Digits reuse the cells of a-j (1 = a, ..., 9 = i, 0 = j).
    pub fn digit(c: char) -> Option<Self> {
        let d = c.to_digit(10)?;
        let letter = if d == 0 { 'j' } else { (b'a' + d as u8 - 1) as char };
        Self::letter(letter)
    }
}

/// Cell slot pitch on the grid: 4 rows × 3 columns, the 3×2 cell in the
/// top-left corner.
pub const CELL_PITCH_ROWS: usize = 4;
pub const CELL_PITCH_COLS: usize = 3;

/// Converts text to a cell sequence, one group of cells per input
/// character. Uppercase is folded; digit runs get a number sign, and a letter
/// a-j straight after a digit gets a letter sign.
pub fn transcribe(text: &str) -> Result<Vec<Vec<BrailleCell>>, RasterError> {
    let mut out = Vec::with_capacity(text.len());
    let mut in_number = false;
    for ch in text.chars() {
        let c = ch.to_ascii_lowercase();
        let cells = if c == ' ' {
            in_number = false;
            vec![BrailleCell::BLANK]
        } else if let Some(d) = BrailleCell::digit(c) {
            let cells = if in_number {
                vec![d]
            } else {
                vec![BrailleCell::NUMBER_SIGN, d]
            };
            in_number = true;
            cells
        } else if let Some(l) = BrailleCell::letter(c) {
            let cells = if in_number && ('a'..='j').contains(&c) {
                vec![BrailleCell::LETTER_SIGN, l]
            } else {
                vec![l]
            };
            in_number = false;
            cells
        } else {
            return Err(RasterError::UnsupportedChar(ch));
        };
        out.push(cells);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrailleRender {
    pub frame: Bitmap,
    /// Input characters that did not fit.
    pub truncated: usize,
}

/// Slots available on a grid: how many 3×2 cells fit at the 4×3 pitch.
pub fn braille_capacity(dims: GridDims) -> (usize, usize) {
    let fit = |n: usize, pitch: usize, size: usize| {
        if n < size {
            0
        } else {
            (n - size) / pitch + 1
        }
    };
    (
        fit(dims.rows(), CELL_PITCH_ROWS, 3),
        fit(dims.cols(), CELL_PITCH_COLS, 2),
    )
}

/// Lays text out as Braille, left to right, wrapping to the next cell row.
pub fn render_braille(text: &str, dims: GridDims) -> Result<BrailleRender, RasterError> {
    let groups = transcribe(text)?;
    let (cell_rows, cell_cols) = braille_capacity(dims);
    let slots = cell_rows * cell_cols;
    let mut frame = Bitmap::new(dims);
    let mut slot = 0;
    let mut truncated = 0;
    for group in groups {
        // A character is shown only if every one of its cells fits.
        if slot + group.len() > slots {
            truncated += 1;
            slot = slots;
            continue;
        }
        for cell in group {
            let top = (slot / cell_cols) * CELL_PITCH_ROWS;
            let left = (slot % cell_cols) * CELL_PITCH_COLS;
            for dot in (1..=6).filter(|&d| cell.has_dot(d)) {
                let (r, c) = BrailleCell::dot_offset(dot);
                frame.set(top + r, left + c, true);
            }
            slot += 1;
        }
    }
    Ok(BrailleRender { frame, truncated })
}
