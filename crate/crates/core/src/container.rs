//! `SLFM` latent container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "SLFM"
//! 4       2     version (u16) = 1
//! 6       4     d (u32)
//! 10      4     h (u32)
//! 14      4     w (u32)
//! 18      4     n_items (u32)
//! 22      ...   n_items * d * h * w f32 values, item-major, then channel, then row
//! ```
//!
//! Values are stored as f32 and promoted to f64 when read as tokens.

use std::fs;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"SLFM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 22;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("file is {0} bytes, shorter than the {HEADER_LEN}-byte header")]
    TruncatedHeader(usize),
    #[error("bad magic {0:?}, expected \"SLFM\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}, expected {VERSION}")]
    UnsupportedVersion(u16),
    #[error("zero-sized shape d={d} h={h} w={w}")]
    EmptyShape { d: u32, h: u32, w: u32 },
    #[error("shape {d}x{h}x{w} with {n_items} items overflows the address space")]
    Overflow { d: u32, h: u32, w: u32, n_items: u32 },
    #[error("payload length mismatch: header implies {expected} bytes, found {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("token count {tokens} does not fill whole {h}x{w} items")]
    RaggedTokens { tokens: usize, h: u32, w: u32 },
    #[error("token has {got} channels, expected {expected}")]
    TokenWidth { expected: usize, got: usize },
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch([u32; 4], [u32; 4]),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ContainerResult<T> = std::result::Result<T, ContainerError>;

/// A stack of `n_items` latent tensors of shape `(d, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentContainer {
    d: u32,
    h: u32,
    w: u32,
    n_items: u32,
    data: Vec<f32>,
}

fn payload_len(d: u32, h: u32, w: u32, n_items: u32) -> ContainerResult<usize> {
    [h, w, n_items]
        .iter()
        .try_fold(d as usize, |acc, &x| acc.checked_mul(x as usize))
        .and_then(|n| n.checked_mul(4).map(|_| n))
        .ok_or(ContainerError::Overflow { d, h, w, n_items })
}

impl LatentContainer {
    pub fn new(d: u32, h: u32, w: u32, n_items: u32, data: Vec<f32>) -> ContainerResult<Self> {
        if d == 0 || h == 0 || w == 0 {
            return Err(ContainerError::EmptyShape { d, h, w });
        }
        let expected = payload_len(d, h, w, n_items)?;
        if data.len() != expected {
            return Err(ContainerError::LengthMismatch {
                expected: expected * 4,
                got: data.len() * 4,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ContainerError::NonFinite(i));
        }
        Ok(Self {
            d,
            h,
            w,
            n_items,
            data,
        })
    }

    /// Pack tokens ordered by item, then row, then column.
    pub fn from_tokens<T: AsRef<[f64]>>(h: u32, w: u32, tokens: &[T]) -> ContainerResult<Self> {
        let d = tokens.first().map_or(0, |t| t.as_ref().len());
        let per_item = h as usize * w as usize;
        if per_item == 0 || !tokens.len().is_multiple_of(per_item) {
            return Err(ContainerError::RaggedTokens {
                tokens: tokens.len(),
                h,
                w,
            });
        }
        let n_items = tokens.len() / per_item;
        let mut data = vec![0f32; tokens.len() * d];
        for (k, tok) in tokens.iter().enumerate() {
            let tok = tok.as_ref();
            if tok.len() != d {
                return Err(ContainerError::TokenWidth {
                    expected: d,
                    got: tok.len(),
                });
            }
            let (item, pos) = (k / per_item, k % per_item);
            for (c, v) in tok.iter().enumerate() {
                data[(item * d + c) * per_item + pos] = *v as f32;
            }
        }
        Self::new(d as u32, h, w, n_items as u32, data)
    }

    pub fn shape(&self) -> [u32; 4] {
        [self.n_items, self.d, self.h, self.w]
    }

    pub fn dim(&self) -> usize {
        self.d as usize
    }

    pub fn n_items(&self) -> usize {
        self.n_items as usize
    }

    pub fn n_tokens(&self) -> usize {
        self.n_items as usize * self.h as usize * self.w as usize
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Token at `(item, row, col)` promoted to f64.
    pub fn token(&self, item: usize, row: usize, col: usize) -> Vec<f64> {
        let per_item = self.h as usize * self.w as usize;
        let pos = row * self.w as usize + col;
        (0..self.d as usize)
            .map(|c| self.data[(item * self.d as usize + c) * per_item + pos] as f64)
            .collect()
    }

    /// All tokens, ordered by item, then row, then column.
    pub fn tokens(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_tokens());
        for item in 0..self.n_items as usize {
            for row in 0..self.h as usize {
                for col in 0..self.w as usize {
                    out.push(self.token(item, row, col));
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.d, self.h, self.w, self.n_items] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> ContainerResult<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(ContainerError::TruncatedHeader(bytes.len()));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let (d, h, w, n_items) = (u32_at(6), u32_at(10), u32_at(14), u32_at(18));
        if d == 0 || h == 0 || w == 0 {
            return Err(ContainerError::EmptyShape { d, h, w });
        }
        let n = payload_len(d, h, w, n_items)?;
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != n * 4 {
            return Err(ContainerError::LengthMismatch {
                expected: n * 4,
                got: payload.len(),
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(d, h, w, n_items, data)
    }

    pub fn read(path: impl AsRef<Path>) -> ContainerResult<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> ContainerResult<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }
}
