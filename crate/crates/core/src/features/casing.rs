use serde::{Deserialize, Serialize};

/// Capitalization class of a token's original (pre-lowercasing) text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CasingCategory {
    Padding,
    Numeric,
    MainlyNumeric,
    AllLower,
    AllUpper,
    InitialUpper,
    ContainsDigit,
    Other,
}

pub const CASING_DIM: usize = 8;

impl CasingCategory {
    pub const ALL: [CasingCategory; CASING_DIM] = [
        CasingCategory::Padding,
        CasingCategory::Numeric,
        CasingCategory::MainlyNumeric,
        CasingCategory::AllLower,
        CasingCategory::AllUpper,
        CasingCategory::InitialUpper,
        CasingCategory::ContainsDigit,
        CasingCategory::Other,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn classify(text: &str) -> Self {
        if text.is_empty() {
            return CasingCategory::Padding;
        }
        let mut chars = 0usize;
        let mut digits = 0usize;
        let mut letters = 0usize;
        let mut upper = 0usize;
        for c in text.chars() {
            chars += 1;
            if c.is_numeric() {
                digits += 1;
            }
            if c.is_alphabetic() {
                letters += 1;
                if c.is_uppercase() {
                    upper += 1;
                }
            }
        }
        if digits == chars {
            return CasingCategory::Numeric;
        }
        if 2 * digits > chars {
            return CasingCategory::MainlyNumeric;
        }
        if letters > 0 && upper == 0 {
            return CasingCategory::AllLower;
        }
        if letters > 0 && upper == letters {
            return CasingCategory::AllUpper;
        }
        let mut it = text.chars();
        let first = it.next().unwrap();
        if first.is_uppercase() && it.filter(|c| c.is_alphabetic()).all(|c| !c.is_uppercase()) {
            return CasingCategory::InitialUpper;
        }
        if digits > 0 {
            return CasingCategory::ContainsDigit;
        }
        CasingCategory::Other
    }
}

/// Eight-way one-hot casing vector.
pub fn casing_feature(text: &str) -> [f64; CASING_DIM] {
    let mut v = [0.0; CASING_DIM];
    v[CasingCategory::classify(text).ordinal()] = 1.0;
    v
}
