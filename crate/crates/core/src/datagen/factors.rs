use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of digit classes.
pub const NUM_CLASSES: usize = 10;
/// Number of values of every colour / texture factor.
pub const NUM_STYLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Coloured glyph on black.
    Cm,
    /// Coloured glyph on a coloured background.
    Dcm,
    /// Textured glyph on a textured background.
    Wlm,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cm, Variant::Dcm, Variant::Wlm];

    /// Style factors confounded with the digit.
    pub fn style_factors(self) -> &'static [Factor] {
        match self {
            Variant::Cm => &[Factor::Fg],
            Variant::Dcm => &[Factor::Fg, Factor::Bg],
            Variant::Wlm => &[Factor::FgTex, Factor::BgTex],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cm => "cm",
            Variant::Dcm => "dcm",
            Variant::Wlm => "wlm",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cm" => Ok(Variant::Cm),
            "dcm" => Ok(Variant::Dcm),
            "wlm" => Ok(Variant::Wlm),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}` (cm, dcm, wlm)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Thickness {
    Thin,
    Thick,
}

impl Thickness {
    /// The training-set rule: 0..=4 thin, 5..=9 thick.
    pub fn train_rule(digit: u8) -> Self {
        if digit <= 4 {
            Thickness::Thin
        } else {
            Thickness::Thick
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Thickness::Thin),
            1 => Ok(Thickness::Thick),
            _ => Err(Error::Format(format!("thickness flag {i}"))),
        }
    }
}

/// Discrete generative factors of one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Digit,
    Thickness,
    Fg,
    Bg,
    FgTex,
    BgTex,
}

impl Factor {
    pub fn name(self) -> &'static str {
        match self {
            Factor::Digit => "digit",
            Factor::Thickness => "thickness",
            Factor::Fg => "fg",
            Factor::Bg => "bg",
            Factor::FgTex => "fg_tex",
            Factor::BgTex => "bg_tex",
        }
    }

    pub fn cardinality(self) -> usize {
        match self {
            Factor::Thickness => 2,
            _ => NUM_STYLES,
        }
    }
}

impl std::str::FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Factor::Digit, Factor::Thickness, Factor::Fg, Factor::Bg, Factor::FgTex, Factor::BgTex]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown factor `{s}`")))
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where an instance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Counterfactual,
    Patchmix,
    Replica,
}

impl Origin {
    pub fn code(self) -> u8 {
        match self {
            Origin::Real => 0,
            Origin::Counterfactual => 1,
            Origin::Patchmix => 2,
            Origin::Replica => 3,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Origin::Real),
            1 => Ok(Origin::Counterfactual),
            2 => Ok(Origin::Patchmix),
            3 => Ok(Origin::Replica),
            _ => Err(Error::Format(format!("origin code {c}"))),
        }
    }
}

/// One realization of the generative factors.
///
/// `morph` is the continuous stroke scalar; it is renderer-local and not
/// part of the discrete model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorTuple {
    pub digit: u8,
    pub thickness: Thickness,
    pub morph: f32,
    pub fg: Option<u8>,
    pub bg: Option<u8>,
    pub fg_tex: Option<u8>,
    pub bg_tex: Option<u8>,
}

impl FactorTuple {
    pub fn get(&self, f: Factor) -> Option<u8> {
        match f {
            Factor::Digit => Some(self.digit),
            Factor::Thickness => Some(self.thickness.index()),
            Factor::Fg => self.fg,
            Factor::Bg => self.bg,
            Factor::FgTex => self.fg_tex,
            Factor::BgTex => self.bg_tex,
        }
    }

    /// Copy with one factor replaced. Setting the digit does not touch
    /// thickness; use [`FactorTuple::with_digit_rule`] for that.
    pub fn with(mut self, f: Factor, v: u8) -> Self {
        match f {
            Factor::Digit => self.digit = v,
            Factor::Thickness => self.thickness = if v == 0 { Thickness::Thin } else { Thickness::Thick },
            Factor::Fg => self.fg = Some(v),
            Factor::Bg => self.bg = Some(v),
            Factor::FgTex => self.fg_tex = Some(v),
            Factor::BgTex => self.bg_tex = Some(v),
        }
        self
    }

    /// Copy with a new digit and the training-rule thickness for it.
    pub fn with_digit_rule(mut self, digit: u8) -> Self {
        self.digit = digit;
        self.thickness = Thickness::train_rule(digit);
        self
    }

    /// Discrete identity, ignoring the continuous stroke scalar.
    pub fn key(&self) -> [u8; 6] {
        let b = |o: Option<u8>| o.unwrap_or(u8::MAX);
        [self.digit, self.thickness.index(), b(self.fg), b(self.bg), b(self.fg_tex), b(self.bg_tex)]
    }

    /// The family whose factor set this tuple carries.
    pub fn variant(&self) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|&v| self.validate(v).is_ok())
            .ok_or_else(|| Error::InvalidArgument(format!("factors {self} match no dataset family")))
    }

    /// Check that exactly the factors of `variant` are present and in range.
    pub fn validate(&self, variant: Variant) -> Result<()> {
        let in_range = |o: Option<u8>| o.is_none_or(|v| (v as usize) < NUM_STYLES);
        if self.digit as usize >= NUM_CLASSES || ![self.fg, self.bg, self.fg_tex, self.bg_tex].into_iter().all(in_range) {
            return Err(Error::InvalidArgument(format!("factor out of range: {self}")));
        }
        let present = [self.fg.is_some(), self.bg.is_some(), self.fg_tex.is_some(), self.bg_tex.is_some()];
        let expect = match variant {
            Variant::Cm => [true, false, false, false],
            Variant::Dcm => [true, true, false, false],
            Variant::Wlm => [false, false, true, true],
        };
        if present != expect {
            return Err(Error::InvalidArgument(format!("factors {self} do not match variant {variant}")));
        }
        Ok(())
    }
}

impl fmt::Display for FactorTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(digit={}, {:?}, morph={}", self.digit, self.thickness, self.morph)?;
        for (name, v) in [("fg", self.fg), ("bg", self.bg), ("fg_tex", self.fg_tex), ("bg_tex", self.bg_tex)] {
            if let Some(v) = v {
                write!(f, ", {name}={v}")?;
            }
        }
        write!(f, ")")
    }
}

/// The fixed style values each digit takes when its gate fires.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalMap {
    pub fg: [u8; 10],
    pub bg: [u8; 10],
    pub fg_tex: [u8; 10],
    pub bg_tex: [u8; 10],
}

impl Default for CanonicalMap {
    fn default() -> Self {
        let shift = |k: u8| std::array::from_fn(|d| ((d as u8) + k) % 10);
        Self { fg: shift(0), bg: shift(5), fg_tex: shift(0), bg_tex: shift(3) }
    }
}

impl CanonicalMap {
    pub fn value(&self, f: Factor, digit: u8) -> u8 {
        let d = digit as usize;
        match f {
            Factor::Fg => self.fg[d],
            Factor::Bg => self.bg[d],
            Factor::FgTex => self.fg_tex[d],
            Factor::BgTex => self.bg_tex[d],
            Factor::Digit => digit,
            Factor::Thickness => Thickness::train_rule(digit).index(),
        }
    }

    /// Whether every style factor of the variant takes its canonical value.
    pub fn is_canonical(&self, t: &FactorTuple, variant: Variant) -> bool {
        variant.style_factors().iter().all(|&f| t.get(f) == Some(self.value(f, t.digit)))
    }
}
