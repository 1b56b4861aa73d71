//! Rule-based sentence splitting and the one-sentence-per-line document layout.
//!
//! Layout: one sentence per line, one empty line between documents, and a
//! trailing newline. This is the delimiter the BERT pretraining-data reader
//! expects.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::normalize::TWEET_SPECIALS;

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations_ro.txt");
const DEFAULT_TERMINATORS: [char; 4] = ['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']', '»'];
const OPENERS: &[char] = &['"', '\'', '„', '“', '«', '(', '['];

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("cannot split empty text")]
    EmptyText,
    #[error("abbreviation {0:?} must end with '.'")]
    InvalidAbbreviation(String),
    #[error("terminator set is empty")]
    NoTerminators,
    #[error("invalid sentence {0:?}: sentences must be non-blank single lines")]
    InvalidSentence(String),
    #[error("document has no sentences")]
    EmptyDocument,
    #[error("malformed document layout at line {line}")]
    MalformedLayout { line: usize },
    #[error("sink failure: {0}")]
    SinkFailure(#[source] io::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
    terminators: Vec<char>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self::from_reader(DEFAULT_ABBREVIATIONS.as_bytes()).expect("bundled abbreviation list is valid")
    }
}

impl SentenceSplitter {
    pub fn new<I, S>(abbreviations: I, terminators: &[char]) -> Result<Self, SegmentError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if terminators.is_empty() {
            return Err(SegmentError::NoTerminators);
        }
        let mut set = HashSet::new();
        for a in abbreviations {
            let a = a.as_ref().trim().to_lowercase();
            if !a.ends_with('.') || a.len() < 2 {
                return Err(SegmentError::InvalidAbbreviation(a));
            }
            set.insert(a);
        }
        Ok(Self {
            abbreviations: set,
            terminators: terminators.to_vec(),
        })
    }

    /// One abbreviation per line; blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, SegmentError> {
        let mut list = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            list.push(line.to_string());
        }
        Self::new(list, &DEFAULT_TERMINATORS)
    }

    pub fn is_abbreviation(&self, token: &str) -> bool {
        self.abbreviations.contains(&token.to_lowercase())
    }

    fn ends_sentence(&self, token: &str) -> bool {
        let core = token.trim_end_matches(CLOSERS);
        match core.chars().last() {
            Some(c) if self.terminators.contains(&c) => !self.is_abbreviation(token),
            _ => false,
        }
    }

    fn starts_sentence(token: &str) -> bool {
        if TWEET_SPECIALS.iter().any(|s| token.starts_with(s)) {
            return true;
        }
        token
            .trim_start_matches(OPENERS)
            .chars()
            .next()
            .is_some_and(|c| c.is_uppercase() || c.is_numeric())
    }

    /// Splits after a terminator when the next word starts with an uppercase
    /// letter, a digit or a placeholder, unless the word is a known abbreviation.
    pub fn split(&self, text: &str) -> Result<Vec<String>, SegmentError> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(SegmentError::EmptyText);
        }
        let mut sentences = Vec::new();
        let mut current = String::new();
        for (i, token) in tokens.iter().enumerate() {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(token);
            let boundary = tokens
                .get(i + 1)
                .is_some_and(|next| self.ends_sentence(token) && Self::starts_sentence(next));
            if boundary {
                sentences.push(std::mem::take(&mut current));
            }
        }
        sentences.push(current);
        Ok(sentences)
    }
}

/// Convenience wrapper over [`SentenceSplitter::split`].
pub fn split_sentences(text: &str, splitter: &SentenceSplitter) -> Result<Vec<String>, SegmentError> {
    splitter.split(text)
}

/// An ordered, non-empty list of single-line sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    sentences: Vec<String>,
}

impl Document {
    pub fn new(sentences: Vec<String>) -> Result<Self, SegmentError> {
        if sentences.is_empty() {
            return Err(SegmentError::EmptyDocument);
        }
        if let Some(bad) = sentences
            .iter()
            .find(|s| s.trim().is_empty() || s.contains(['\n', '\r']))
        {
            return Err(SegmentError::InvalidSentence(bad.clone()));
        }
        Ok(Self { sentences })
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<String> {
        self.sentences
    }
}

pub fn shard_file_name(shard: usize) -> String {
    format!("corpus-{shard:05}.txt")
}

/// Incremental writer for the blank-line-delimited layout.
pub struct DocumentWriter<W> {
    sink: W,
    written: usize,
}

impl<W: Write> DocumentWriter<W> {
    pub fn new(sink: W) -> Self {
        Self { sink, written: 0 }
    }

    pub fn write(&mut self, doc: &Document) -> Result<(), SegmentError> {
        let sink = &mut self.sink;
        if self.written > 0 {
            sink.write_all(b"\n").map_err(SegmentError::SinkFailure)?;
        }
        for sentence in &doc.sentences {
            sink.write_all(sentence.as_bytes())
                .and_then(|_| sink.write_all(b"\n"))
                .map_err(SegmentError::SinkFailure)?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> Result<W, SegmentError> {
        self.sink.flush().map_err(SegmentError::SinkFailure)?;
        Ok(self.sink)
    }
}

/// Writes documents in the blank-line-delimited layout; returns the document count.
pub fn write_documents<'a, I, W>(documents: I, sink: &mut W) -> Result<usize, SegmentError>
where
    I: IntoIterator<Item = &'a Document>,
    W: Write,
{
    let mut writer = DocumentWriter::new(sink);
    for doc in documents {
        writer.write(doc)?;
    }
    Ok(writer.written())
}

/// Streaming inverse of [`write_documents`].
pub struct DocumentReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    done: bool,
}

impl<R: BufRead> Iterator for DocumentReader<R> {
    type Item = Result<Document, SegmentError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut sentences = Vec::new();
        loop {
            match self.lines.next() {
                None => {
                    self.done = true;
                    return (!sentences.is_empty()).then(|| Document::new(sentences));
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Some(Ok(line)) => {
                    self.line_no += 1;
                    if line.trim().is_empty() {
                        if sentences.is_empty() {
                            self.done = true;
                            return Some(Err(SegmentError::MalformedLayout { line: self.line_no }));
                        }
                        return Some(Document::new(sentences));
                    }
                    sentences.push(line);
                }
            }
        }
    }
}

pub fn read_documents<R: BufRead>(source: R) -> DocumentReader<R> {
    DocumentReader {
        lines: source.lines(),
        line_no: 0,
        done: false,
    }
}
