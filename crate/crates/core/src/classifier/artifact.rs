//! Binary model file, little-endian throughout:
//!
//! ```text
//! "TAUG"  u16 version
//! u32 embed_dim  5 × u32 dense_dims  f64 dropout_rate  f64 learning_rate  u64 seed
//! u32 window_size  u32 overlap  u32 max_seq_len
//! u32 vocab_size  [u8; 32] vocabulary SHA-256
//! u32 tensor_count
//! per tensor: u32 rank, rank × u32 dims, prod(dims) × f32 row-major
//! ```
//!
//! Tensors are the embedding (`vocab × embed_dim`) followed by each dense
//! layer's weights (`outputs × inputs`) and bias (`outputs`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Dense, Model, ModelConfig};
use super::ClassifierError;
use crate::segment::{SegmentConfig, SubwordVocab};

pub const MAGIC: &[u8; 4] = b"TAUG";
pub const VERSION: u16 = 1;

/// A trained model with everything needed to apply it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub model: Model,
    pub segments: SegmentConfig,
    pub vocab_fingerprint: [u8; 32],
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ClassifierError + '_ {
    move |source| ClassifierError::Io {
        path: path.display().to_string(),
        source,
    }
}

struct Writer<W>(W);

impl<W: Write> Writer<W> {
    fn u16(&mut self, v: u16) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u32(&mut self, v: usize) -> std::io::Result<()> {
        let v = u32::try_from(v).map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "dimension exceeds u32"))?;
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn tensor(&mut self, dims: &[usize], data: &[f64]) -> std::io::Result<()> {
        self.u32(dims.len())?;
        for &d in dims {
            self.u32(d)?;
        }
        for &x in data {
            self.0.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], ClassifierError> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| ClassifierError::BadArtifact("truncated file".into()))?;
        Ok(buf)
    }
    fn u16(&mut self) -> Result<u16, ClassifierError> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u32(&mut self) -> Result<usize, ClassifierError> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }
    fn u64(&mut self) -> Result<u64, ClassifierError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn tensor(&mut self, expected: &[usize]) -> Result<Vec<f64>, ClassifierError> {
        let rank = self.u32()?;
        let dims = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        if dims != expected {
            return Err(ClassifierError::ShapeMismatch(format!("tensor dims {dims:?}, expected {expected:?}")));
        }
        let n: usize = dims.iter().product();
        (0..n).map(|_| Ok(f32::from_le_bytes(self.bytes()?) as f64)).collect()
    }
}

impl ModelArtifact {
    pub fn new(model: Model, segments: SegmentConfig, vocab: &SubwordVocab) -> Self {
        ModelArtifact {
            model,
            segments,
            vocab_fingerprint: vocab.fingerprint(),
        }
    }

    pub fn check_vocab(&self, vocab: &SubwordVocab) -> Result<(), ClassifierError> {
        if vocab.fingerprint() != self.vocab_fingerprint || vocab.len() != self.model.vocab_size() {
            return Err(ClassifierError::VocabMismatch);
        }
        Ok(())
    }

    /// Parameters are stored as `f32`.
    pub fn write_to<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = Writer(writer);
        let m = &self.model;
        let c = &m.config;
        w.0.write_all(MAGIC)?;
        w.u16(VERSION)?;
        w.u32(c.embed_dim)?;
        for &d in &c.dense_dims {
            w.u32(d)?;
        }
        w.f64(c.dropout_rate)?;
        w.f64(c.learning_rate)?;
        w.u64(c.seed)?;
        w.u32(self.segments.window_size)?;
        w.u32(self.segments.overlap)?;
        w.u32(self.segments.max_seq_len)?;
        w.u32(m.vocab_size)?;
        w.0.write_all(&self.vocab_fingerprint)?;
        w.u32(1 + 2 * m.layers.len())?;
        w.tensor(&[m.vocab_size, c.embed_dim], &m.embedding)?;
        for l in &m.layers {
            w.tensor(&[l.outputs, l.inputs], &l.weights)?;
            w.tensor(&[l.outputs], &l.bias)?;
        }
        w.0.flush()
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self, ClassifierError> {
        let mut r = Reader(reader);
        if &r.bytes::<4>()? != MAGIC {
            return Err(ClassifierError::BadArtifact("missing TAUG magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(ClassifierError::BadArtifact(format!("unsupported version {version}")));
        }
        let embed_dim = r.u32()?;
        let dense_dims = (0..5).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let config = ModelConfig {
            embed_dim,
            dense_dims,
            dropout_rate: r.f64()?,
            learning_rate: r.f64()?,
            seed: r.u64()?,
        };
        let segments = SegmentConfig {
            window_size: r.u32()?,
            overlap: r.u32()?,
            max_seq_len: r.u32()?,
        };
        segments
            .validate()
            .map_err(|e| ClassifierError::BadArtifact(e.to_string()))?;
        let vocab_size = r.u32()?;
        let vocab_fingerprint = r.bytes::<32>()?;

        let mut model = Model::zeros(&config, vocab_size)?;
        let count = r.u32()?;
        if count != 1 + 2 * model.layers.len() {
            return Err(ClassifierError::ShapeMismatch(format!("{count} tensors")));
        }
        model.embedding = r.tensor(&[vocab_size, embed_dim])?;
        for l in &mut model.layers {
            let Dense { inputs, outputs, .. } = *l;
            l.weights = r.tensor(&[outputs, inputs])?;
            l.bias = r.tensor(&[outputs])?;
        }
        if r.0.read(&mut [0u8])? != 0 {
            return Err(ClassifierError::BadArtifact("trailing bytes".into()));
        }
        Ok(ModelArtifact {
            model,
            segments,
            vocab_fingerprint,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifierError> {
        let file = File::create(path).map_err(io_err(path))?;
        self.write_to(BufWriter::new(file)).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifierError> {
        let file = File::open(path).map_err(io_err(path))?;
        Self::read_from(BufReader::new(file))
    }
}

impl From<std::io::Error> for ClassifierError {
    fn from(source: std::io::Error) -> Self {
        ClassifierError::Io {
            path: "<stream>".into(),
            source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn artifact() -> (ModelArtifact, SubwordVocab) {
        let vocab = SubwordVocab::build(["a tiny corpus of words"], 100);
        let cfg = ModelConfig {
            embed_dim: 3,
            dense_dims: vec![4, 3, 2, 2, 1],
            seed: 11,
            ..Default::default()
        };
        let model = Model::new(&cfg, vocab.len(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        (ModelArtifact::new(model, SegmentConfig::default(), &vocab), vocab)
    }

    #[test]
    fn round_trip_rounds_to_f32() {
        let (a, vocab) = artifact();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"TAUG");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), VERSION);
        let b = ModelArtifact::read_from(buf.as_slice()).unwrap();
        assert_eq!(b.model.config(), a.model.config());
        assert_eq!(b.segments, a.segments);
        b.check_vocab(&vocab).unwrap();
        for i in 0..a.model.parameter_count() {
            assert_eq!(b.model.param(i), a.model.param(i) as f32 as f64);
        }
        // Stable once already rounded.
        let mut again = Vec::new();
        b.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn rejects_corrupt_files() {
        let (a, _) = artifact();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(ModelArtifact::read_from(bad.as_slice()), Err(ClassifierError::BadArtifact(_))));
        assert!(matches!(
            ModelArtifact::read_from(&buf[..buf.len() - 2]),
            Err(ClassifierError::BadArtifact(_))
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(ModelArtifact::read_from(long.as_slice()), Err(ClassifierError::BadArtifact(_))));
    }

    #[test]
    fn vocab_mismatch_detected() {
        let (a, _) = artifact();
        let other = SubwordVocab::build(["different words entirely"], 100);
        assert!(matches!(a.check_vocab(&other), Err(ClassifierError::VocabMismatch)));
    }
}
