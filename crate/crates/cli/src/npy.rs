//! Reader and writer for the `.npy` array container.
//!
//! Reads little-endian `f4`/`f8` arrays in C order (format versions 1 to 3);
//! writes `f8` in version 1.0 with the header padded to a 64-byte boundary.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;
use xaikit_core::{Tensor, XaiError};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Error)]
pub enum NpyError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not an npy file (bad magic)")]
    BadMagic,
    #[error("unsupported npy version {0}.{1}")]
    Version(u8, u8),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("unsupported dtype {0:?}; expected '<f4' or '<f8'")]
    Dtype(String),
    #[error("fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("invalid array: {0}")]
    Array(#[from] XaiError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

struct Header {
    dtype: Dtype,
    shape: Vec<usize>,
}

fn header_value<'a>(dict: &'a str, key: &str) -> Result<&'a str, NpyError> {
    let pat = format!("'{key}':");
    let start = dict
        .find(&pat)
        .ok_or_else(|| NpyError::Header(format!("missing key {key:?}")))?
        + pat.len();
    Ok(dict[start..].trim_start())
}

fn parse_header(text: &str) -> Result<Header, NpyError> {
    let dict = text.trim();
    if !dict.starts_with('{') || !dict.ends_with('}') {
        return Err(NpyError::Header("header is not a dict literal".into()));
    }
    let descr = header_value(dict, "descr")?;
    let quote = descr
        .chars()
        .next()
        .filter(|&c| c == '\'' || c == '"')
        .ok_or_else(|| NpyError::Header("descr is not a string".into()))?;
    let descr = &descr[1..];
    let descr = &descr[..descr
        .find(quote)
        .ok_or_else(|| NpyError::Header("unterminated descr".into()))?];
    let dtype = match descr {
        "<f8" => Dtype::F8,
        "<f4" => Dtype::F4,
        other => return Err(NpyError::Dtype(other.to_string())),
    };

    let fortran = header_value(dict, "fortran_order")?;
    if fortran.starts_with("True") {
        return Err(NpyError::FortranOrder);
    }
    if !fortran.starts_with("False") {
        return Err(NpyError::Header("fortran_order is not a boolean".into()));
    }

    let shape = header_value(dict, "shape")?;
    let inner = shape
        .strip_prefix('(')
        .and_then(|s| s.split_once(')'))
        .ok_or_else(|| NpyError::Header("shape is not a tuple".into()))?
        .0;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| NpyError::Header(format!("bad shape entry {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Header { dtype, shape })
}

pub fn read_npy<R: Read>(reader: &mut R) -> Result<Tensor, NpyError> {
    let mut magic = [0u8; 6];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let mut version = [0u8; 2];
    reader.read_exact(&mut version)?;
    let header_len = match version {
        [1, 0] => {
            let mut b = [0u8; 2];
            reader.read_exact(&mut b)?;
            u16::from_le_bytes(b) as usize
        }
        [2, 0] | [3, 0] => {
            let mut b = [0u8; 4];
            reader.read_exact(&mut b)?;
            u32::from_le_bytes(b) as usize
        }
        [a, b] => return Err(NpyError::Version(a, b)),
    };
    let mut raw = vec![0u8; header_len];
    reader.read_exact(&mut raw)?;
    let text = std::str::from_utf8(&raw).map_err(|_| NpyError::Header("header is not text".into()))?;
    let header = parse_header(text)?;

    let count: usize = header.shape.iter().product();
    let data = match header.dtype {
        Dtype::F8 => {
            let mut bytes = vec![0u8; count * 8];
            reader.read_exact(&mut bytes)?;
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect()
        }
        Dtype::F4 => {
            let mut bytes = vec![0u8; count * 4];
            reader.read_exact(&mut bytes)?;
            bytes
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect()
        }
    };
    Ok(Tensor::new(header.shape, data)?)
}

fn shape_literal(shape: &[usize]) -> String {
    match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    }
}

pub fn write_npy<W: Write>(writer: &mut W, tensor: &Tensor) -> io::Result<()> {
    let mut header = format!(
        "{{'descr': '<f8', 'fortran_order': False, 'shape': {}, }}",
        shape_literal(tensor.shape())
    );
    // magic (6) + version (2) + length (2) + header + '\n'
    let unpadded = 10 + header.len() + 1;
    header.extend(std::iter::repeat_n(' ', (ALIGN - unpadded % ALIGN) % ALIGN));
    header.push('\n');
    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&(header.len() as u16).to_le_bytes())?;
    writer.write_all(header.as_bytes())?;
    for v in tensor.data() {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_npy_file(path: &Path) -> Result<Tensor, NpyError> {
    read_npy(&mut BufReader::new(File::open(path)?))
}

pub fn write_npy_file(path: &Path, tensor: &Tensor) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_npy(&mut w, tensor)?;
    w.flush()
}
