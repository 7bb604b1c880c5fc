//! On-disk exploration dataset.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 8     | magic `BEEDATA\0` |
//! | 4     | format version (1) |
//! | 32    | SHA-256 of the producing config |
//! | 8     | episode count E |
//! | 8     | transitions per episode T |
//! | 4, 4  | frame height H, width W |
//! | 4     | action dimension |
//!
//! followed by E records of `(T+1)·H·W` frame bytes and `T·action_dim`
//! `f64` actions.

use std::io::{Read, Write};
use std::path::Path;

use bee_sim::env::ActionBits;
use bee_sim::{Episode, Image, ACTION_DIM};

use crate::error::{CoreError, Result};

pub const MAGIC: [u8; 8] = *b"BEEDATA\0";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 8 + 8 + 4 + 4 + 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub config_hash: [u8; 32],
    pub episodes: Vec<Episode>,
}

/// Shape fields of the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub config_hash: [u8; 32],
    pub episodes: u64,
    pub transitions: u64,
    pub height: u32,
    pub width: u32,
    pub action_dim: u32,
}

impl Dataset {
    pub fn new(config_hash: [u8; 32], episodes: Vec<Episode>) -> Self {
        Self { config_hash, episodes }
    }

    pub fn transitions(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn header(&self) -> Result<DatasetHeader> {
        let first = self
            .episodes
            .first()
            .ok_or_else(|| CoreError::Config("cannot describe an empty dataset".into()))?;
        let t = first.len();
        let frame = &first.frames[0];
        for (i, e) in self.episodes.iter().enumerate() {
            if e.len() != t || e.frames.len() != t + 1 {
                return Err(CoreError::Config(format!("episode {i} has {} transitions, expected {t}", e.len())));
            }
            if e.frames.iter().any(|f| f.height() != frame.height() || f.width() != frame.width()) {
                return Err(CoreError::Config(format!("episode {i} has a frame of a different size")));
            }
        }
        Ok(DatasetHeader {
            config_hash: self.config_hash,
            episodes: self.episodes.len() as u64,
            transitions: t as u64,
            height: frame.height() as u32,
            width: frame.width() as u32,
            action_dim: ACTION_DIM as u32,
        })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let h = self.header()?;
        let mut head = Vec::with_capacity(HEADER_LEN);
        head.extend_from_slice(&MAGIC);
        head.extend_from_slice(&VERSION.to_le_bytes());
        head.extend_from_slice(&h.config_hash);
        head.extend_from_slice(&h.episodes.to_le_bytes());
        head.extend_from_slice(&h.transitions.to_le_bytes());
        head.extend_from_slice(&h.height.to_le_bytes());
        head.extend_from_slice(&h.width.to_le_bytes());
        head.extend_from_slice(&h.action_dim.to_le_bytes());
        out.write_all(&head)?;
        let mut record = Vec::new();
        for e in &self.episodes {
            record.clear();
            for f in &e.frames {
                record.extend_from_slice(f.bytes());
            }
            for a in &e.actions {
                for bits in a.0 {
                    record.extend_from_slice(&bits.to_le_bytes());
                }
            }
            out.write_all(&record)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rd = OffsetReader { inner: input, offset: 0 };
        let magic: [u8; 8] = rd.array("magic")?;
        if magic != MAGIC {
            return Err(CoreError::Dataset {
                offset: 0,
                message: "not a dataset file (bad magic)".into(),
            });
        }
        let version = u32::from_le_bytes(rd.array("version")?);
        if version != VERSION {
            return Err(CoreError::Dataset {
                offset: 8,
                message: format!("unsupported version {version}"),
            });
        }
        let config_hash: [u8; 32] = rd.array("config hash")?;
        let episodes = u64::from_le_bytes(rd.array("episode count")?);
        let t = u64::from_le_bytes(rd.array("transition count")?) as usize;
        let height = u32::from_le_bytes(rd.array("height")?) as usize;
        let width = u32::from_le_bytes(rd.array("width")?) as usize;
        let action_dim = u32::from_le_bytes(rd.array("action dimension")?) as usize;
        if action_dim != ACTION_DIM {
            return Err(CoreError::Dataset {
                offset: rd.offset - 4,
                message: format!("action dimension {action_dim}, expected {ACTION_DIM}"),
            });
        }
        if episodes == 0 || height == 0 || width == 0 {
            return Err(CoreError::Dataset {
                offset: rd.offset,
                message: "header describes an empty dataset".into(),
            });
        }
        let frame_len = height * width;
        let mut out = Vec::with_capacity(episodes.min(1 << 16) as usize);
        let mut pixels = vec![0u8; frame_len];
        for _ in 0..episodes {
            let mut frames = Vec::with_capacity(t + 1);
            for _ in 0..=t {
                rd.fill(&mut pixels, "frame")?;
                frames.push(Image::new(height, width, pixels.clone())?);
            }
            let mut actions = Vec::with_capacity(t);
            for _ in 0..t {
                let mut bits = [0u64; ACTION_DIM];
                for b in bits.iter_mut() {
                    *b = u64::from_le_bytes(rd.array("action")?);
                }
                actions.push(ActionBits(bits));
            }
            out.push(Episode { frames, actions });
        }
        let mut extra = [0u8; 1];
        if rd.inner.read(&mut extra)? != 0 {
            return Err(CoreError::Dataset {
                offset: rd.offset,
                message: "trailing bytes after the last episode".into(),
            });
        }
        Ok(Self {
            config_hash,
            episodes: out,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

struct OffsetReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> OffsetReader<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let mut done = 0;
        while done < buf.len() {
            match self.inner.read(&mut buf[done..]) {
                Ok(0) => {
                    return Err(CoreError::Dataset {
                        offset: self.offset + done as u64,
                        message: format!("unexpected end of file while reading {what}"),
                    })
                }
                Ok(n) => done += n,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.fill(&mut b, what)?;
        Ok(b)
    }
}
