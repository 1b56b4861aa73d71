//! Binary model format.
//!
//! ```text
//! "RLID" | u16 version | u8 min_n | u8 max_n | f64 alpha | u32 languages
//! per language: u16 code length, code bytes, f64 log prior, f64 log unseen
//! u32 n-grams; per n-gram (sorted): u16 length, bytes, f64 log-prob per language
//! ```
//! All integers and floats little-endian. Values are stored as `f64`
//! regardless of the in-memory scalar.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{check_range, LangIdError, LangModel};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"RLID";
pub const MODEL_VERSION: u16 = 1;

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<(), LangIdError> {
    let len = u16::try_from(s.len()).map_err(|_| LangIdError::CorruptModel(format!("string too long: {s:?}")))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn write_model<F: Scalar, W: Write>(model: &LangModel<F>, mut w: W) -> Result<(), LangIdError> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&[model.ngram_range.0 as u8, model.ngram_range.1 as u8])?;
    w.write_all(&model.smoothing_alpha.to_f64_lossy().to_le_bytes())?;
    w.write_all(&(model.languages.len() as u32).to_le_bytes())?;
    for (i, lang) in model.languages.iter().enumerate() {
        put_str(&mut w, lang)?;
        w.write_all(&model.log_priors[i].to_f64_lossy().to_le_bytes())?;
        w.write_all(&model.log_unseen[i].to_f64_lossy().to_le_bytes())?;
    }
    let mut grams: Vec<(&String, &Vec<F>)> = model.log_likelihoods.iter().collect();
    grams.sort_by(|a, b| a.0.cmp(b.0));
    w.write_all(&(grams.len() as u32).to_le_bytes())?;
    for (gram, logs) in grams {
        put_str(&mut w, gram)?;
        for v in logs {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], LangIdError> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| LangIdError::CorruptModel("unexpected end of file".into()))?;
        Ok(buf)
    }

    fn u16(&mut self) -> Result<u16, LangIdError> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }

    fn u32(&mut self) -> Result<u32, LangIdError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, LangIdError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String, LangIdError> {
        let len = self.u16()? as usize;
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| LangIdError::CorruptModel("unexpected end of file".into()))?;
        String::from_utf8(buf).map_err(|_| LangIdError::CorruptModel("non-UTF-8 string".into()))
    }
}

pub fn read_model<F: Scalar, R: Read>(reader: R) -> Result<LangModel<F>, LangIdError> {
    let mut c = Cursor { inner: reader };
    if &c.bytes::<4>()? != MODEL_MAGIC {
        return Err(LangIdError::CorruptModel("bad magic".into()));
    }
    let version = c.u16()?;
    if version != MODEL_VERSION {
        return Err(LangIdError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let [min_n, max_n] = c.bytes::<2>()?;
    let ngram_range = (min_n as usize, max_n as usize);
    check_range(ngram_range)?;
    let alpha = c.f64()?;
    let n_langs = c.u32()? as usize;
    if n_langs < 2 {
        return Err(LangIdError::InsufficientLanguages(n_langs));
    }
    let mut languages = Vec::with_capacity(n_langs);
    let mut log_priors = Vec::with_capacity(n_langs);
    let mut log_unseen = Vec::with_capacity(n_langs);
    for _ in 0..n_langs {
        languages.push(c.string()?);
        log_priors.push(F::of(c.f64()?));
        log_unseen.push(F::of(c.f64()?));
    }
    let n_grams = c.u32()? as usize;
    let mut log_likelihoods = HashMap::with_capacity(n_grams);
    for _ in 0..n_grams {
        let gram = c.string()?;
        let logs = (0..n_langs).map(|_| c.f64().map(F::of)).collect::<Result<Vec<F>, _>>()?;
        log_likelihoods.insert(gram, logs);
    }
    let mut trailing = [0u8; 1];
    if c.inner.read(&mut trailing)? != 0 {
        return Err(LangIdError::CorruptModel("trailing bytes".into()));
    }
    Ok(LangModel {
        languages,
        ngram_range,
        smoothing_alpha: F::of(alpha),
        log_priors,
        log_unseen,
        log_likelihoods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact_in_f64() {
        let (a, _) = LangModel::<f64>::seed_pair();
        let mut buf = Vec::new();
        write_model(&a, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"RLID");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        let back: LangModel<f64> = read_model(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_bad_headers() {
        let (a, _) = LangModel::<f64>::seed_pair();
        let mut buf = Vec::new();
        write_model(&a, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model::<f64, _>(bad.as_slice()), Err(LangIdError::CorruptModel(_))));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(read_model::<f64, _>(v2.as_slice()), Err(LangIdError::VersionMismatch { .. })));
        assert!(read_model::<f64, _>(&buf[..buf.len() - 3]).is_err());
    }
}
