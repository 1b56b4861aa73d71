//! Static MLM masking, applied once when instances are generated.
//!
//! Draw order, fixed so a replay can reproduce it from the same RNG:
//! 1. candidates are the positions whose id is neither `[CLS]` nor `[SEP]`;
//! 2. `n = min(max_pred, max(1, round(p * |candidates|)))`;
//! 3. partial Fisher-Yates: for `k` in `0..n`, swap `k` with `gen_range(k..len)`;
//! 4. the first `n` candidates, sorted ascending, are the masked positions;
//! 5. per position in that order, `u = gen::<f64>()`: `u < mask_frac` gives
//!    `[MASK]`, `u < mask_frac + keep_frac` keeps the token, otherwise the
//!    token becomes `pool[gen_range(0..pool.len())]`.
//!
//! The replacement pool is every id that is not a structural special.

use rand::Rng;

use super::{PretrainConfig, PretrainError};
use crate::vocab::{SpecialIds, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskAction {
    Mask,
    Keep,
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedSequence {
    pub token_ids: Vec<u32>,
    pub positions: Vec<u32>,
    pub labels: Vec<u32>,
    pub actions: Vec<MaskAction>,
}

/// Precomputed masking state for one vocabulary.
#[derive(Debug, Clone)]
pub struct Masker {
    special: SpecialIds,
    pool: Vec<u32>,
    masked_lm_prob: f64,
    mask_frac: f64,
    keep_frac: f64,
    max_predictions: usize,
}

impl Masker {
    pub fn new(vocab: &Vocabulary, cfg: &PretrainConfig) -> Result<Self, PretrainError> {
        cfg.validate()?;
        let special = vocab.special();
        let pool: Vec<u32> = (0..vocab.len() as u32).filter(|&id| !special.contains(id)).collect();
        if pool.is_empty() {
            return Err(PretrainError::EmptyReplacementPool);
        }
        Ok(Self {
            special,
            pool,
            masked_lm_prob: cfg.masked_lm_prob,
            mask_frac: cfg.mask_token_frac,
            keep_frac: cfg.keep_frac,
            max_predictions: cfg.max_predictions_per_seq,
        })
    }

    pub fn replacement_pool(&self) -> &[u32] {
        &self.pool
    }

    pub fn special(&self) -> SpecialIds {
        self.special
    }

    /// Number of positions masked for a sequence with `candidates` maskable tokens.
    pub fn prediction_count(&self, candidates: usize) -> usize {
        let target = (self.masked_lm_prob * candidates as f64).round() as usize;
        target.max(1).min(self.max_predictions).min(candidates)
    }

    pub fn mask<R: Rng + ?Sized>(&self, ids: &[u32], rng: &mut R) -> Result<MaskedSequence, PretrainError> {
        let mut cand: Vec<u32> = ids
            .iter()
            .enumerate()
            .filter(|(_, &id)| id != self.special.cls && id != self.special.sep)
            .map(|(i, _)| i as u32)
            .collect();
        if cand.is_empty() {
            return Err(PretrainError::NoCandidates);
        }
        let n = self.prediction_count(cand.len());
        for k in 0..n {
            let j = rng.gen_range(k..cand.len());
            cand.swap(k, j);
        }
        let mut positions = cand[..n].to_vec();
        positions.sort_unstable();

        let mut token_ids = ids.to_vec();
        let mut labels = Vec::with_capacity(n);
        let mut actions = Vec::with_capacity(n);
        for &p in &positions {
            let p = p as usize;
            labels.push(ids[p]);
            let u: f64 = rng.gen();
            let action = if u < self.mask_frac {
                token_ids[p] = self.special.mask;
                MaskAction::Mask
            } else if u < self.mask_frac + self.keep_frac {
                MaskAction::Keep
            } else {
                token_ids[p] = self.pool[rng.gen_range(0..self.pool.len())];
                MaskAction::Random
            };
            actions.push(action);
        }
        Ok(MaskedSequence {
            token_ids,
            positions,
            labels,
            actions,
        })
    }
}

/// One-off masking; builds a [`Masker`] per call.
pub fn mask_sequence<R: Rng + ?Sized>(
    ids: &[u32],
    vocab: &Vocabulary,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<MaskedSequence, PretrainError> {
    Masker::new(vocab, cfg)?.mask(ids, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::toy_vocab;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab() -> Vocabulary {
        toy_vocab(&["a", "b", "c", "d", "e", "f", "g", "h"])
    }

    fn seq(v: &Vocabulary, len: usize) -> Vec<u32> {
        let s = v.special();
        let mut ids = vec![s.cls];
        ids.extend((0..len).map(|i| 5 + (i % 8) as u32));
        ids.push(s.sep);
        ids
    }

    #[test]
    fn counts_follow_rounding_rule() {
        let v = vocab();
        let m = Masker::new(&v, &PretrainConfig::default()).unwrap();
        assert_eq!(m.prediction_count(1), 1);
        assert_eq!(m.prediction_count(3), 1);
        assert_eq!(m.prediction_count(10), 2);
        assert_eq!(m.prediction_count(125), 19);
        assert_eq!(m.prediction_count(1000), 20);
    }

    #[test]
    fn pool_excludes_structural_ids() {
        let v = vocab();
        let m = Masker::new(&v, &PretrainConfig::default()).unwrap();
        assert_eq!(m.replacement_pool(), &[5, 6, 7, 8, 9, 10, 11, 12]);
        let bare = toy_vocab(&[]);
        assert!(matches!(
            Masker::new(&bare, &PretrainConfig::default()),
            Err(PretrainError::EmptyReplacementPool)
        ));
    }

    #[test]
    fn only_structural_tokens_is_an_error() {
        let v = vocab();
        let s = v.special();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = mask_sequence(&[s.cls, s.sep, s.sep], &v, &PretrainConfig::default(), &mut rng);
        assert!(matches!(err, Err(PretrainError::NoCandidates)));
    }

    #[test]
    fn replay_matches_protocol() {
        let v = vocab();
        let cfg = PretrainConfig::default();
        let ids = seq(&v, 40);
        let out = mask_sequence(&ids, &v, &cfg, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut cand: Vec<u32> = (1..=40).collect();
        let n = 6; // round(0.15 * 40)
        for k in 0..n {
            let j = rng.gen_range(k..cand.len());
            cand.swap(k, j);
        }
        let mut pos = cand[..n].to_vec();
        pos.sort();
        assert_eq!(out.positions, pos);
        let mut expected = ids.clone();
        for &p in &pos {
            let u: f64 = rng.gen();
            if u < 0.8 {
                expected[p as usize] = v.special().mask;
            } else if u >= 0.9 {
                expected[p as usize] = 5 + rng.gen_range(0..8usize) as u32;
            }
        }
        assert_eq!(out.token_ids, expected);
    }

    proptest! {
        #[test]
        fn masking_invariants(len in 1usize..126, seed in any::<u64>()) {
            let v = vocab();
            let cfg = PretrainConfig::default();
            let ids = seq(&v, len);
            let out = mask_sequence(&ids, &v, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!(!out.positions.is_empty());
            prop_assert!(out.positions.len() <= cfg.max_predictions_per_seq);
            prop_assert!(out.positions.windows(2).all(|w| w[0] < w[1]));
            for (i, &p) in out.positions.iter().enumerate() {
                let p = p as usize;
                prop_assert!(p != 0 && p != ids.len() - 1);
                prop_assert_eq!(out.labels[i], ids[p]);
                match out.actions[i] {
                    MaskAction::Mask => prop_assert_eq!(out.token_ids[p], v.special().mask),
                    MaskAction::Keep => prop_assert_eq!(out.token_ids[p], ids[p]),
                    MaskAction::Random => prop_assert!(!v.special().contains(out.token_ids[p])),
                }
            }
            for i in 0..ids.len() {
                if !out.positions.contains(&(i as u32)) {
                    prop_assert_eq!(out.token_ids[i], ids[i]);
                }
            }
        }
    }
}
