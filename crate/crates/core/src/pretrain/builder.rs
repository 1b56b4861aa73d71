use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::masking::Masker;
use super::rng::instance_rng;
use super::{PretrainConfig, PretrainError, PretrainInstance};
use crate::segment::Document;
use crate::vocab::{SpecialIds, Tokenizer, Vocabulary};

/// A document as token ids, one vector per non-empty sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub sentences: Vec<Vec<u32>>,
}

impl TokenizedDocument {
    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }
}

pub fn tokenize_documents(documents: &[Document], tokenizer: &Tokenizer) -> Vec<TokenizedDocument> {
    documents
        .par_iter()
        .map(|doc| TokenizedDocument {
            sentences: doc
                .sentences()
                .iter()
                .map(|s| tokenizer.tokenize_ids(s))
                .filter(|ids| !ids.is_empty())
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub documents: usize,
    pub degenerate_documents: usize,
    pub instances: usize,
    pub random_next: usize,
    /// Real-next draws that fell back to a random B because the chunk was a single token.
    pub forced_random_next: usize,
    pub masked_tokens: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BuildOutput {
    pub instances: Vec<PretrainInstance>,
    /// `(document index, dupe index)` for each instance, indexes into the input slice.
    pub origins: Vec<(usize, usize)>,
    pub stats: BuildStats,
}

struct Generator<'a> {
    pool: &'a [&'a TokenizedDocument],
    cfg: &'a PretrainConfig,
    masker: &'a Masker,
    special: SpecialIds,
}

struct Generated {
    instance: PretrainInstance,
    forced: bool,
}

impl Generator<'_> {
    fn random_b<R: Rng>(&self, doc: usize, target_b: usize, rng: &mut R) -> Vec<u32> {
        let mut other = rng.gen_range(0..self.pool.len() - 1);
        if other >= doc {
            other += 1;
        }
        let od = self.pool[other];
        let start = rng.gen_range(0..od.sentences.len());
        let mut b = Vec::new();
        for sent in &od.sentences[start..] {
            b.extend_from_slice(sent);
            if b.len() >= target_b {
                break;
            }
        }
        b
    }

    fn finish<R: Rng>(
        &self,
        mut a: Vec<u32>,
        mut b: Vec<u32>,
        is_random_next: bool,
        rng: &mut R,
    ) -> Result<PretrainInstance, PretrainError> {
        truncate_pair(&mut a, &mut b, self.cfg.max_seq_length - 3);
        let mut ids = Vec::with_capacity(a.len() + b.len() + 3);
        ids.push(self.special.cls);
        ids.extend_from_slice(&a);
        ids.push(self.special.sep);
        ids.extend_from_slice(&b);
        ids.push(self.special.sep);
        let mut segment_ids = vec![0u8; a.len() + 2];
        segment_ids.resize(ids.len(), 1);
        let masked = self.masker.mask(&ids, rng)?;
        Ok(PretrainInstance {
            token_ids: masked.token_ids,
            segment_ids,
            is_random_next,
            masked_positions: masked.positions,
            masked_label_ids: masked.labels,
        })
    }

    fn document<R: Rng>(&self, doc: usize, rng: &mut R, out: &mut Vec<Generated>) -> Result<(), PretrainError> {
        let sentences = &self.pool[doc].sentences;
        let max_tokens = self.cfg.max_seq_length - 3;
        let mut target = max_tokens;
        if rng.gen::<f64>() < self.cfg.short_seq_prob {
            target = rng.gen_range(2..=max_tokens);
        }

        let mut chunk: Vec<&[u32]> = Vec::new();
        let mut chunk_len = 0;
        let mut i = 0;
        while i < sentences.len() {
            chunk.push(&sentences[i]);
            chunk_len += sentences[i].len();
            if i == sentences.len() - 1 || chunk_len >= target {
                let a_end = if chunk.len() >= 2 { rng.gen_range(1..chunk.len()) } else { 1 };
                let mut a: Vec<u32> = chunk[..a_end].concat();
                let random_next = rng.gen::<f64>() < self.cfg.nsp_random_prob;
                let mut forced = false;
                let b = if random_next {
                    let b = self.random_b(doc, target.saturating_sub(a.len()).max(1), rng);
                    i -= chunk.len() - a_end;
                    b
                } else if chunk.len() >= 2 {
                    chunk[a_end..].concat()
                } else if a.len() >= 2 {
                    let cut = rng.gen_range(1..a.len());
                    a.split_off(cut)
                } else {
                    forced = true;
                    self.random_b(doc, target.saturating_sub(a.len()).max(1), rng)
                };
                let instance = self.finish(a, b, random_next || forced, rng)?;
                out.push(Generated { instance, forced });
                chunk.clear();
                chunk_len = 0;
            }
            i += 1;
        }
        Ok(())
    }
}

/// Pops tokens from the end of the longer segment (B on ties) until the pair fits.
fn truncate_pair(a: &mut Vec<u32>, b: &mut Vec<u32>, max_tokens: usize) {
    while a.len() + b.len() > max_tokens {
        if a.len() > b.len() {
            a.pop();
        } else {
            b.pop();
        }
    }
}

/// Generates `dupe_factor` passes of instances over the document pool.
///
/// Output is ordered by document then dupe and does not depend on the
/// number of rayon workers.
pub fn build_instances(
    documents: &[TokenizedDocument],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
) -> Result<BuildOutput, PretrainError> {
    let masker = Masker::new(vocab, cfg)?;
    let usable: Vec<usize> = (0..documents.len()).filter(|&i| !documents[i].is_empty()).collect();
    if usable.len() < 2 {
        return Err(PretrainError::TooFewDocuments(usable.len()));
    }
    let pool: Vec<&TokenizedDocument> = usable.iter().map(|&i| &documents[i]).collect();
    let generator = Generator {
        pool: &pool,
        cfg,
        masker: &masker,
        special: vocab.special(),
    };

    let per_doc: Vec<Vec<(usize, Generated)>> = (0..pool.len())
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            let mut scratch = Vec::new();
            for dupe in 0..cfg.dupe_factor {
                let mut rng = instance_rng(cfg.seed, k, dupe);
                generator.document(k, &mut rng, &mut scratch)?;
                out.extend(scratch.drain(..).map(|g| (dupe, g)));
            }
            Ok(out)
        })
        .collect::<Result<_, PretrainError>>()?;

    let mut output = BuildOutput {
        stats: BuildStats {
            documents: documents.len(),
            degenerate_documents: documents.len() - usable.len(),
            ..Default::default()
        },
        ..Default::default()
    };
    for (k, generated) in per_doc.into_iter().enumerate() {
        for (dupe, g) in generated {
            let s = &mut output.stats;
            s.instances += 1;
            s.random_next += g.instance.is_random_next as usize;
            s.forced_random_next += g.forced as usize;
            s.masked_tokens += g.instance.masked_positions.len();
            output.origins.push((usable[k], dupe));
            output.instances.push(g.instance);
        }
    }
    Ok(output)
}
