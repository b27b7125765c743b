use serde::{Deserialize, Serialize};

use crate::model::Rgb;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PaletteError {
    #[error("palette keyword {0:?} must be lowercase and non-empty")]
    NotLowercase(String),
    #[error("palette keyword {0:?} appears twice")]
    Duplicate(String),
}

/// Lowercase words of `text`; hyphens and apostrophes stay inside words.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .map(|w| w.trim_matches(|c| c == '-' || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Ordered keyword → color table driving the procedural generator and the
/// stub embedder. Keywords may be multi-word phrases; matching is on whole
/// words, and the first entry in table order wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteMap {
    entries: Vec<(String, Rgb)>,
    default_color: Rgb,
}

impl PaletteMap {
    pub fn new(entries: Vec<(String, Rgb)>, default_color: Rgb) -> Result<Self, PaletteError> {
        let mut seen = std::collections::HashSet::new();
        for (keyword, _) in &entries {
            if keyword.trim().is_empty() || *keyword != keyword.to_lowercase() {
                return Err(PaletteError::NotLowercase(keyword.clone()));
            }
            if !seen.insert(keyword.as_str()) {
                return Err(PaletteError::Duplicate(keyword.clone()));
            }
        }
        Ok(Self { entries, default_color })
    }

    pub fn entries(&self) -> &[(String, Rgb)] {
        &self.entries
    }

    pub fn default_color(&self) -> Rgb {
        self.default_color
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Which keywords occur in `text`, one flag per entry.
    pub fn occurrences(&self, text: &str) -> Vec<bool> {
        let haystack = words(text);
        self.entries.iter().map(|(k, _)| contains_phrase(&haystack, &words(k))).collect()
    }

    /// First entry, in table order, whose keyword occurs in `text`.
    pub fn first_match(&self, text: &str) -> Option<(&str, Rgb)> {
        let haystack = words(text);
        self.entries
            .iter()
            .find(|(k, _)| contains_phrase(&haystack, &words(k)))
            .map(|(k, c)| (k.as_str(), *c))
    }

    pub fn tint_for(&self, prompt: &str) -> Rgb {
        self.first_match(prompt).map_or(self.default_color, |(_, c)| c)
    }

    /// Distinct colors in first-appearance order.
    pub fn distinct_colors(&self) -> Vec<Rgb> {
        let mut out: Vec<Rgb> = Vec::new();
        for (_, c) in &self.entries {
            if !out.contains(c) {
                out.push(*c);
            }
        }
        out
    }
}

const RED: Rgb = [200, 40, 40];
const BLUE: Rgb = [40, 80, 220];
const ICE: Rgb = [150, 220, 255];
const POLKA: Rgb = [230, 60, 200];
const GRAY: Rgb = [128, 128, 128];
const WARM: Rgb = [250, 120, 40];
const WHITE: Rgb = [245, 245, 245];
const PALE: Rgb = [200, 200, 160];
const ROCK: Rgb = [120, 90, 60];
const CREAM: Rgb = [245, 190, 200];
const GOLDEN: Rgb = [190, 160, 80];
const BROWN: Rgb = [80, 40, 20];
const SHARD: Rgb = [90, 60, 140];
const GREEN: Rgb = [50, 160, 60];
const YELLOW: Rgb = [230, 210, 50];
const TEAL: Rgb = [30, 140, 140];

impl Default for PaletteMap {
    /// Familiar objects come before unusual attributes, so a prompt mixing
    /// both is tinted by the familiar object: "a river made of dark
    /// chocolate" renders as a blue river until the river region is
    /// inpainted with a prompt about chocolate.
    fn default() -> Self {
        let entries = [
            ("apples", RED),
            ("river", BLUE),
            ("diamonds", ICE),
            ("polka-dotted cat", POLKA),
            ("cat", GRAY),
            ("warm smile", WARM),
            ("chef", WHITE),
            ("moon", PALE),
            ("mountains", ROCK),
            ("creamy", CREAM),
            ("ice cream", CREAM),
            ("golden-brown", GOLDEN),
            ("cookie", GOLDEN),
            ("chocolate", BROWN),
            ("shredded", SHARD),
            ("pieces", SHARD),
            ("polka-dotted", POLKA),
            ("meal", WARM),
            ("red", RED),
            ("green", GREEN),
            ("blue", BLUE),
            ("yellow", YELLOW),
            ("white", WHITE),
        ];
        let entries = entries.into_iter().map(|(k, c)| (k.to_owned(), c)).collect();
        PaletteMap::new(entries, TEAL).expect("built-in palette is well formed")
    }
}
