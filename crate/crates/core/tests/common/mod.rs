#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const WORDS: &[&str] = &[
    "astăzi", "este", "o", "zi", "frumoasă", "și", "mergem", "în", "parc", "cu", "prietenii", "nu", "știu", "ce",
    "să", "mai", "fac", "atâtea", "teme", "pentru", "mâine", "am", "văzut", "un", "film", "foarte", "bun", "aseară",
    "la", "cinema", "mulțumesc", "frumos", "ajutor", "guvernul", "anunțat", "noi", "măsuri", "economie", "vremea",
    "rece", "iarna", "aceasta", "orașul", "nostru", "are", "străzi", "aglomerate", "dimineața", "mama", "gătit",
    "ciorbă", "de", "legume", "copiii", "joacă", "fotbal", "curte", "echipa", "câștigat", "meciul", "duminică",
    "trenul", "întârziat", "două", "ore", "iar", "călătorii", "sunt", "supărați", "cartea", "pe", "care", "citesc",
    "acum", "interesantă", "vreau", "merg", "munte", "vara", "viitoare", "prețurile", "crescut", "mult", "ultima",
    "vreme", "magazin", "cumpărat", "pâine", "lapte", "familie", "sărbătorile", "se", "apropie", "repede",
];

pub const EMOJIS: &[&str] = &["😀", "😂", "❤️", "👍", "🎉", "😢", "🔥", "🙏", "😍", "🤔", "👏", "💪"];

pub const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn sentence(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.gen_range(min..=max);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    words[0] = capitalize(&words[0]);
    let end = [".", "!", "?", "."].choose(rng).unwrap();
    format!("{}{end}", words.join(" "))
}

/// A plausible Romanian tweet of several sentences with a few entities.
pub fn tweet_text(rng: &mut impl Rng) -> String {
    let sentences = rng.gen_range(1..=4);
    let mut parts: Vec<String> = (0..sentences).map(|_| sentence(rng, 4, 12)).collect();
    if rng.gen_bool(0.3) {
        parts.push(format!("@user{}", rng.gen_range(0..500)));
    }
    if rng.gen_bool(0.2) {
        parts.push(format!("#{}", WORDS.choose(rng).unwrap()));
    }
    if rng.gen_bool(0.1) {
        parts.push(format!("https://t.co/x{}", rng.gen_range(0..10_000)));
    }
    for _ in 0..rng.gen_range(0..=2) {
        parts.push(EMOJIS.choose(rng).unwrap().to_string());
    }
    parts.join(" ")
}

pub fn spam_text(i: usize) -> String {
    format!("@a{i} @b{i} @c{i} @d{i} @e{i} oferte https://spam.example/{i}")
}

pub fn archive_line(id: u64, text: &str) -> String {
    serde_json::json!({
        "id": id,
        "text": text,
        "created_at": "2021-03-01T12:00:00Z",
        "lang": "ro",
    })
    .to_string()
}

/// `n` tweets, roughly one in ten spam and one in fifty duplicated.
pub fn archive(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut last = String::new();
    for i in 0..n {
        let text = if i % 10 == 9 {
            spam_text(i)
        } else if i % 50 == 49 {
            last.clone()
        } else {
            tweet_text(&mut rng)
        };
        out.push_str(&archive_line(1_000_000 + i as u64, &text));
        out.push('\n');
        last = text;
    }
    out
}

/// WordPiece base vocabulary covering the fixture alphabet and word list.
pub fn base_vocab_tokens() -> Vec<String> {
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    let mut seen: BTreeSet<String> = tokens.iter().cloned().collect();
    let mut push = |t: String, tokens: &mut Vec<String>| {
        if seen.insert(t.clone()) {
            tokens.push(t);
        }
    };
    for w in WORDS {
        push(w.to_string(), &mut tokens);
        push(capitalize(w), &mut tokens);
    }
    let alphabet = "abcdefghijklmnopqrstuvwxyzăâîșțABCDEFGHIJKLMNOPQRSTUVWXYZĂÂÎȘȚ0123456789";
    for c in alphabet.chars() {
        push(c.to_string(), &mut tokens);
        push(format!("##{c}"), &mut tokens);
    }
    for p in ".,!?:;-_'\"()/#@&%".chars() {
        push(p.to_string(), &mut tokens);
    }
    tokens
}

pub fn write_base_vocab(path: &Path) {
    let mut body = base_vocab_tokens().join("\n");
    body.push('\n');
    fs::write(path, body).unwrap();
}

pub fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

/// Relative path to digest for every file under `dir`, manifests excluded.
pub fn tree_digests(dir: &Path) -> Vec<(String, String)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else if !p.to_string_lossy().ends_with(".manifest.json") {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, sha256(&p)));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out
}
