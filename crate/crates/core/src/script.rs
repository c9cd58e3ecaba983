//! Character classes used by the residual-script filter.

use crate::dataset::{Language, LanguagePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScriptClass {
    Hiragana,
    Katakana,
    Ideograph,
}

impl ScriptClass {
    pub fn of(c: char) -> Option<ScriptClass> {
        match c as u32 {
            0x3040..=0x309F => Some(ScriptClass::Hiragana),
            0x30A0..=0x30FF | 0x31F0..=0x31FF => Some(ScriptClass::Katakana),
            0x4E00..=0x9FFF => Some(ScriptClass::Ideograph),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScriptClass::Hiragana => "hiragana",
            ScriptClass::Katakana => "katakana",
            ScriptClass::Ideograph => "cjk-ideograph",
        }
    }
}

/// Scripts that must not survive translation in the given direction, or
/// `None` when the direction is not supported by the filter.
///
/// Japanese to English forbids kana and ideographs. Japanese to Chinese
/// forbids kana only, since ideographs are legitimate Chinese. English
/// sources forbid nothing: Latin is fine inside Japanese or Chinese text.
pub fn forbidden_classes(pair: LanguagePair) -> Option<&'static [ScriptClass]> {
    use Language::*;
    const JA_EN: &[ScriptClass] = &[ScriptClass::Hiragana, ScriptClass::Katakana, ScriptClass::Ideograph];
    const JA_ZH: &[ScriptClass] = &[ScriptClass::Hiragana, ScriptClass::Katakana];
    match (pair.source, pair.target) {
        (Ja, En) => Some(JA_EN),
        (Ja, Zh) => Some(JA_ZH),
        (En, Ja) | (En, Zh) => Some(&[]),
        _ => None,
    }
}

/// Languages written without spaces between words.
pub fn is_unspaced_script(c: char) -> bool {
    ScriptClass::of(c).is_some() || matches!(c as u32, 0x3400..=0x4DBF | 0xF900..=0xFAFF)
}
