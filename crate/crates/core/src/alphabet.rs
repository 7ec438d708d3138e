//! Symbol alphabets and target labels.
//!
//! Class index 0 is always the blank; real symbols occupy indices
//! `1..size`. A [`Label`] never contains the blank, and its expanded form
//! interleaves blanks before, between, and after every symbol.

use crate::error::{CtcError, Result};

/// Class index reserved for the blank.
pub const BLANK: usize = 0;

/// An ordered symbol set with the blank at class index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    /// `symbols[0]` is the blank's display character.
    symbols: Vec<char>,
}

impl Alphabet {
    /// Builds an alphabet from the non-blank symbols, in class order.
    /// The blank displays as `ε`.
    pub fn new(non_blank: &str) -> Result<Self> {
        Self::with_blank_symbol('ε', non_blank)
    }

    pub fn with_blank_symbol(blank: char, non_blank: &str) -> Result<Self> {
        let mut symbols = vec![blank];
        symbols.extend(non_blank.chars());
        if symbols.len() < 2 {
            return Err(CtcError::Empty { what: "alphabet (needs blank plus at least one symbol)" });
        }
        for (i, &s) in symbols.iter().enumerate() {
            if symbols[..i].contains(&s) {
                return Err(CtcError::DuplicateSymbol { symbol: s });
            }
        }
        Ok(Self { symbols })
    }

    /// Total class count including the blank.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, class: usize) -> Option<char> {
        self.symbols.get(class).copied()
    }

    pub fn class_of(&self, symbol: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == symbol)
    }

    /// Parses a string of non-blank symbols into a label.
    pub fn label_from_str(&self, text: &str) -> Result<Label> {
        let mut classes = Vec::with_capacity(text.chars().count());
        for ch in text.chars() {
            match self.class_of(ch) {
                Some(BLANK) | None => return Err(CtcError::UnknownSymbol { symbol: ch }),
                Some(c) => classes.push(c),
            }
        }
        Label::new(classes)
    }

    pub fn label_to_string(&self, label: &Label) -> String {
        label
            .classes()
            .iter()
            .map(|&c| self.symbol(c).unwrap_or('?'))
            .collect()
    }
}

/// A target sequence of non-blank class indices. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    classes: Vec<usize>,
}

impl Label {
    pub fn new(classes: Vec<usize>) -> Result<Self> {
        if classes.contains(&BLANK) {
            return Err(CtcError::BlankInLabel);
        }
        Ok(Self { classes })
    }

    pub fn empty() -> Self {
        Self { classes: Vec::new() }
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Largest class index referenced, or 0 for an empty label.
    pub fn max_class(&self) -> usize {
        self.classes.iter().copied().max().unwrap_or(0)
    }

    /// Interleaves blanks: `[ε, y1, ε, y2, ..., yL, ε]`.
    pub fn expand(&self) -> ExpandedLabel {
        let mut classes = Vec::with_capacity(2 * self.len() + 1);
        classes.push(BLANK);
        for &c in &self.classes {
            classes.push(c);
            classes.push(BLANK);
        }
        ExpandedLabel { classes }
    }

    /// Smallest number of frames (or columns) admitting a valid alignment:
    /// the label length plus one separator blank per adjacent equal pair.
    pub fn min_width(&self) -> usize {
        let repeats = self.classes.windows(2).filter(|w| w[0] == w[1]).count();
        self.len() + repeats
    }
}

/// The blank-interleaved form of a [`Label`], length `2L + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedLabel {
    classes: Vec<usize>,
}

impl ExpandedLabel {
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always at least [ε]
    }

    /// Removes the interleaved blanks, recovering the source label.
    pub fn strip_blanks(&self) -> Label {
        Label {
            classes: self.classes.iter().copied().filter(|&c| c != BLANK).collect(),
        }
    }

    /// True when state `s` may also be reached by the two-symbol skip,
    /// i.e. `Y*_s` is a symbol differing from `Y*_{s-2}`.
    pub(crate) fn allows_skip(&self, s: usize) -> bool {
        self.classes[s] != BLANK && (s < 2 || self.classes[s] != self.classes[s - 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(classes: &[usize]) -> Label {
        Label::new(classes.to_vec()).unwrap()
    }

    #[test]
    fn expand_interleaves_blanks() {
        // F R E E over alphabet [ε F R E] = classes [1, 2, 3, 3]
        let y = label(&[1, 2, 3, 3]);
        assert_eq!(y.expand().classes(), &[0, 1, 0, 2, 0, 3, 0, 3, 0]);
        assert_eq!(Label::empty().expand().classes(), &[0]);
        assert_eq!(label(&[1]).expand().classes(), &[0, 1, 0]);
    }

    #[test]
    fn min_width_counts_repeats() {
        assert_eq!(label(&[1, 2, 3, 3]).min_width(), 5); // FREE
        assert_eq!(label(&[1, 2]).min_width(), 2); // AB
        assert_eq!(Label::empty().min_width(), 0);
        assert_eq!(label(&[2, 2, 2]).min_width(), 5);
    }

    #[test]
    fn min_width_bound() {
        // min_width(y) <= 2L always; the tight bound for non-empty labels
        // is 2L - 1, reached exactly when every adjacent pair is equal.
        for len in 0..=6usize {
            let mut stack = vec![Vec::new()];
            while let Some(cur) = stack.pop() {
                if cur.len() == len {
                    let y = label(&cur);
                    assert!(y.min_width() <= 2 * y.len());
                    if !y.is_empty() {
                        let all_equal_pairs = cur.windows(2).all(|w| w[0] == w[1]);
                        assert!(y.min_width() < 2 * y.len());
                        assert_eq!(y.min_width() == 2 * y.len() - 1, all_equal_pairs);
                    }
                    continue;
                }
                for c in 1..4usize {
                    let mut next = cur.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
        }
    }

    #[test]
    fn expand_strip_roundtrip_exhaustive() {
        // All labels up to length 6 over an alphabet of size 4 (3 symbols).
        let mut count = 0usize;
        let mut stack = vec![Vec::new()];
        while let Some(cur) = stack.pop() {
            let y = label(&cur);
            assert_eq!(y.expand().strip_blanks(), y);
            count += 1;
            if cur.len() < 6 {
                for c in 1..4usize {
                    let mut next = cur.clone();
                    next.push(c);
                    stack.push(next);
                }
            }
        }
        assert_eq!(count, 1093); // 1 + 3 + 9 + ... + 3^6
    }

    #[test]
    fn labels_reject_blank() {
        assert!(Label::new(vec![1, 0, 2]).is_err());
    }

    #[test]
    fn alphabet_basics() {
        let a = Alphabet::new("FRE").unwrap();
        assert_eq!(a.size(), 4);
        assert_eq!(a.class_of('R'), Some(2));
        assert_eq!(a.symbol(0), Some('ε'));
        let y = a.label_from_str("FREE").unwrap();
        assert_eq!(y.classes(), &[1, 2, 3, 3]);
        assert_eq!(a.label_to_string(&y), "FREE");
        assert!(a.label_from_str("FRX").is_err());
        assert!(Alphabet::new("").is_err());
        assert!(Alphabet::new("AA").is_err());
        assert!(Alphabet::new("Aε").is_err());
    }
}
