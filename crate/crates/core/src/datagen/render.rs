//! The rendering mechanism `X = g(Z)` and its exact inverse.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;

use super::dataset::TRAIN_MORPH;
use super::factors::{Factor, FactorTuple, Thickness, Variant, NUM_CLASSES, NUM_STYLES};
use crate::{Error, Result};

pub const HEIGHT: usize = 28;
pub const WIDTH: usize = 28;
pub const CHANNELS: usize = 3;
pub const PIXELS: usize = HEIGHT * WIDTH * CHANNELS;

/// An RGB image, row-major, channels interleaved.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{}x{})", HEIGHT, WIDTH, CHANNELS)
    }
}

impl Image {
    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != PIXELS {
            return Err(Error::Dimension { expected: PIXELS, got: pixels.len() });
        }
        Ok(Self { pixels })
    }

    pub fn filled(rgb: [u8; 3]) -> Self {
        Self { pixels: rgb.iter().copied().cycle().take(PIXELS).collect() }
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * WIDTH + x) * CHANNELS;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * WIDTH + x) * CHANNELS;
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn l1_distance(&self, other: &Image) -> u64 {
        self.pixels.iter().zip(&other.pixels).map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs() as u64).sum()
    }
}

const FG_PALETTE: [[u8; 3]; 10] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
];

const BG_PALETTE: [[u8; 3]; 10] = [
    [0, 0, 128],
    [128, 0, 0],
    [128, 128, 0],
    [0, 128, 128],
    [0, 80, 0],
    [110, 60, 20],
    [47, 79, 79],
    [75, 0, 130],
    [64, 64, 64],
    [90, 20, 60],
];

const PLAIN_GLYPH: [u8; 3] = [255, 255, 255];
const PLAIN_BACKGROUND: [u8; 3] = [0, 0, 0];

// Seven-segment layout, endpoints in pixel-index coordinates.
const LEFT: f32 = 9.0;
const RIGHT: f32 = 18.0;
const TOP: f32 = 5.0;
const MID: f32 = 13.0;
const BOTTOM: f32 = 22.0;

const SEGMENTS: [((f32, f32), (f32, f32)); 7] = [
    ((LEFT, TOP), (RIGHT, TOP)),       // a
    ((RIGHT, TOP), (RIGHT, MID)),      // b
    ((RIGHT, MID), (RIGHT, BOTTOM)),   // c
    ((LEFT, BOTTOM), (RIGHT, BOTTOM)), // d
    ((LEFT, MID), (LEFT, BOTTOM)),     // e
    ((LEFT, TOP), (LEFT, MID)),        // f
    ((LEFT, MID), (RIGHT, MID)),       // g
];

// bit k set = segment k lit, segments ordered a..g
const DIGIT_SEGMENTS: [u8; 10] = [
    0b011_1111, // 0: abcdef
    0b000_0110, // 1: bc
    0b101_1011, // 2: abdeg
    0b100_1111, // 3: abcdg
    0b110_0110, // 4: bcfg
    0b110_1101, // 5: acdfg
    0b111_1101, // 6: acdefg
    0b000_0111, // 7: abc
    0b111_1111, // 8: all
    0b110_1111, // 9: abcdfg
];

fn segment_distance(px: f32, py: f32, (a, b): ((f32, f32), (f32, f32))) -> f32 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Stroke width in pixels: 1 (thin) or 3 (thick) at the training scalar,
/// scaled proportionally by `morph`.
pub fn stroke_width(thickness: Thickness, morph: f32) -> f32 {
    let base = match thickness {
        Thickness::Thin => 1.0,
        Thickness::Thick => 3.0,
    };
    base * morph / TRAIN_MORPH
}

/// Glyph coverage mask, one bool per pixel.
pub fn glyph_mask(digit: u8, thickness: Thickness, morph: f32) -> Vec<bool> {
    let half = stroke_width(thickness, morph) / 2.0 + 1e-4;
    let lit: Vec<_> = (0..7).filter(|k| DIGIT_SEGMENTS[digit as usize] >> k & 1 == 1).map(|k| SEGMENTS[k]).collect();
    let mut mask = vec![false; HEIGHT * WIDTH];
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            mask[y * WIDTH + x] = lit.iter().any(|&s| segment_distance(x as f32, y as f32, s) <= half);
        }
    }
    mask
}

/// Pattern intensity in `[0, 1]` for texture `k` at pixel `(x, y)`.
fn pattern(k: u8, x: usize, y: usize) -> f32 {
    let (xi, yi) = (x as i64, y as i64);
    let on = |b: bool| if b { 1.0 } else { 0.0 };
    match k {
        0 => on((yi / 2) % 2 == 0),
        1 => on((xi / 2) % 2 == 0),
        2 => on(((xi + yi) / 2) % 2 == 0),
        3 => on(((xi - yi + 28) / 2) % 2 == 0),
        4 => on(((xi + 2 * yi) / 3) % 2 == 0),
        5 => on((xi / 3 + yi / 3) % 2 == 0),
        6 => on(xi % 4 == 1 && yi % 4 == 1),
        7 => x as f32 / (WIDTH - 1) as f32,
        8 => {
            let mut h = (xi as u64).wrapping_mul(0x9E37_79B9).wrapping_add((yi as u64).wrapping_mul(0x85EB_CA6B));
            h ^= h >> 13;
            h = h.wrapping_mul(0xC2B2_AE35);
            on((h >> 7) & 1 == 1)
        }
        _ => {
            let (dx, dy) = (x as f32 - 13.5, y as f32 - 13.5);
            on(((dx * dx + dy * dy).sqrt() as i64 / 2) % 2 == 0)
        }
    }
}

fn lerp(a: [u8; 3], b: [u8; 3], t: f32) -> [u8; 3] {
    std::array::from_fn(|c| (a[c] as f32 + (b[c] as f32 - a[c] as f32) * t).round() as u8)
}

/// A permutation of style indices (the reparameterization `h`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relabeling {
    pub fg: [u8; 10],
    pub bg: [u8; 10],
    pub fg_tex: [u8; 10],
    pub bg_tex: [u8; 10],
}

impl Relabeling {
    pub fn identity() -> Self {
        let id = std::array::from_fn(|i| i as u8);
        Self { fg: id, bg: id, fg_tex: id, bg_tex: id }
    }

    /// Independent uniform permutations for every style factor.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut perm = || {
            let mut p: [u8; 10] = std::array::from_fn(|i| i as u8);
            p.shuffle(rng);
            p
        };
        Self { fg: perm(), bg: perm(), fg_tex: perm(), bg_tex: perm() }
    }

    fn inverse_perm(p: &[u8; 10]) -> [u8; 10] {
        let mut inv = [0u8; 10];
        for (i, &v) in p.iter().enumerate() {
            inv[v as usize] = i as u8;
        }
        inv
    }

    pub fn inverse(&self) -> Self {
        Self {
            fg: Self::inverse_perm(&self.fg),
            bg: Self::inverse_perm(&self.bg),
            fg_tex: Self::inverse_perm(&self.fg_tex),
            bg_tex: Self::inverse_perm(&self.bg_tex),
        }
    }

    /// `h(z)`: relabel every style index.
    pub fn apply(&self, z: &FactorTuple) -> FactorTuple {
        FactorTuple {
            fg: z.fg.map(|v| self.fg[v as usize]),
            bg: z.bg.map(|v| self.bg[v as usize]),
            fg_tex: z.fg_tex.map(|v| self.fg_tex[v as usize]),
            bg_tex: z.bg_tex.map(|v| self.bg_tex[v as usize]),
            ..*z
        }
    }

    pub fn factor_perm(&self, f: Factor) -> Option<&[u8; 10]> {
        match f {
            Factor::Fg => Some(&self.fg),
            Factor::Bg => Some(&self.bg),
            Factor::FgTex => Some(&self.fg_tex),
            Factor::BgTex => Some(&self.bg_tex),
            _ => None,
        }
    }
}

type TemplateIndex = HashMap<Vec<u8>, FactorTuple>;

/// Two end colours and a pattern id.
type Texture = ([u8; 3], [u8; 3], u8);

/// A renderer with its palettes and a lazily built inverse for each variant.
#[derive(Debug)]
pub struct Renderer {
    fg_palette: [[u8; 3]; 10],
    bg_palette: [[u8; 3]; 10],
    fg_textures: [Texture; 10],
    bg_textures: [Texture; 10],
    templates: [OnceLock<TemplateIndex>; 3],
}

impl Renderer {
    fn with_tables(fg_palette: [[u8; 3]; 10], bg_palette: [[u8; 3]; 10]) -> Self {
        // texture k: fg blends palette colour k towards white, bg towards black
        let fg_textures = std::array::from_fn(|k| (FG_PALETTE[k], lerp(FG_PALETTE[k], [255; 3], 0.5), k as u8));
        let bg_textures = std::array::from_fn(|k| (BG_PALETTE[k], lerp(BG_PALETTE[k], [0; 3], 0.5), k as u8));
        Self {
            fg_palette,
            bg_palette,
            fg_textures,
            bg_textures,
            templates: Default::default(),
        }
    }

    pub fn new() -> Self {
        Self::with_tables(FG_PALETTE, BG_PALETTE)
    }

    /// The renderer `g~ = g o h^-1` that reads relabeled factors.
    pub fn relabeled(h: &Relabeling) -> Self {
        let inv = h.inverse();
        let mut r = Self::new();
        r.fg_palette = std::array::from_fn(|i| FG_PALETTE[inv.fg[i] as usize]);
        r.bg_palette = std::array::from_fn(|i| BG_PALETTE[inv.bg[i] as usize]);
        let base = Self::new();
        r.fg_textures = std::array::from_fn(|i| base.fg_textures[inv.fg_tex[i] as usize]);
        r.bg_textures = std::array::from_fn(|i| base.bg_textures[inv.bg_tex[i] as usize]);
        r
    }

    /// The standard renderer shared by the crate.
    pub fn standard() -> &'static Renderer {
        static STANDARD: OnceLock<Renderer> = OnceLock::new();
        STANDARD.get_or_init(Renderer::new)
    }

    fn fg_color(&self, z: &FactorTuple, x: usize, y: usize) -> [u8; 3] {
        if let Some(c) = z.fg {
            self.fg_palette[c as usize]
        } else if let Some(t) = z.fg_tex {
            let (a, b, p) = self.fg_textures[t as usize];
            lerp(a, b, pattern(p, x, y))
        } else {
            PLAIN_GLYPH
        }
    }

    fn bg_color(&self, z: &FactorTuple, x: usize, y: usize) -> [u8; 3] {
        if let Some(c) = z.bg {
            self.bg_palette[c as usize]
        } else if let Some(t) = z.bg_tex {
            let (a, b, p) = self.bg_textures[t as usize];
            lerp(a, b, pattern(p, x, y))
        } else {
            PLAIN_BACKGROUND
        }
    }

    /// Render a factor tuple.
    pub fn render(&self, z: &FactorTuple) -> Image {
        let mask = glyph_mask(z.digit, z.thickness, z.morph);
        let mut img = Image { pixels: vec![0; PIXELS] };
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                let c = if mask[y * WIDTH + x] { self.fg_color(z, x, y) } else { self.bg_color(z, x, y) };
                img.set_pixel(x, y, c);
            }
        }
        img
    }

    /// Every factor tuple of `variant` at the training stroke scalar.
    pub fn grid(variant: Variant) -> Vec<FactorTuple> {
        let mut out = Vec::new();
        let styles: Vec<(Option<u8>, Option<u8>, Option<u8>, Option<u8>)> = match variant {
            Variant::Cm => (0..NUM_STYLES as u8).map(|f| (Some(f), None, None, None)).collect(),
            Variant::Dcm => (0..NUM_STYLES as u8)
                .flat_map(|f| (0..NUM_STYLES as u8).map(move |b| (Some(f), Some(b), None, None)))
                .collect(),
            Variant::Wlm => (0..NUM_STYLES as u8)
                .flat_map(|f| (0..NUM_STYLES as u8).map(move |b| (None, None, Some(f), Some(b))))
                .collect(),
        };
        for digit in 0..NUM_CLASSES as u8 {
            for thickness in [Thickness::Thin, Thickness::Thick] {
                for &(fg, bg, fg_tex, bg_tex) in &styles {
                    out.push(FactorTuple { digit, thickness, morph: TRAIN_MORPH, fg, bg, fg_tex, bg_tex });
                }
            }
        }
        out
    }

    fn templates(&self, variant: Variant) -> &TemplateIndex {
        let slot = match variant {
            Variant::Cm => 0,
            Variant::Dcm => 1,
            Variant::Wlm => 2,
        };
        self.templates[slot].get_or_init(|| Self::grid(variant).into_iter().map(|z| (self.render(&z).pixels, z)).collect())
    }

    /// Exact inverse over the variant's factor grid.
    ///
    /// Fails with [`Error::NoMatch`] (reporting the nearest template
    /// distance) unless the image is bit-identical to a rendered tuple.
    pub fn invert(&self, image: &Image, variant: Variant) -> Result<FactorTuple> {
        let index = self.templates(variant);
        if let Some(z) = index.get(&image.pixels) {
            return Ok(*z);
        }
        let distance = index
            .keys()
            .map(|k| k.iter().zip(&image.pixels).map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs() as u64).sum())
            .min()
            .unwrap_or(u64::MAX);
        Err(Error::NoMatch { distance })
    }
}

impl Default for Renderer {
    fn default() -> Self {
        Self::new()
    }
}

/// `g`: render with the standard renderer.
pub fn render(z: &FactorTuple) -> Image {
    Renderer::standard().render(z)
}

/// `g^-1`: invert with the standard renderer.
pub fn invert(image: &Image, variant: Variant) -> Result<FactorTuple> {
    Renderer::standard().invert(image, variant)
}
