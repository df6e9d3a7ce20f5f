//! Binary PGM (P5) and PPM (P6) writers for heatmaps in `[0, 1]`.

use std::io::{self, Write};

use xaikit_core::Tensor;

fn level(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

/// Blue (0) through magenta to red (255), with a green hump in the middle.
pub fn color_table() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    for (i, entry) in table.iter_mut().enumerate() {
        let i = i as i32;
        let g = (255 - (2 * i - 255).abs()).max(0);
        *entry = [i as u8, g as u8, (255 - i) as u8];
    }
    table
}

fn dims(map: &Tensor) -> io::Result<(usize, usize)> {
    match map.shape() {
        [h, w] => Ok((*h, *w)),
        s => Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("heatmap must be 2-D, got shape {s:?}"),
        )),
    }
}

pub fn write_pgm<W: Write>(out: &mut W, map: &Tensor) -> io::Result<()> {
    let (h, w) = dims(map)?;
    write!(out, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = map.data().iter().map(|&v| level(v)).collect();
    out.write_all(&bytes)
}

pub fn write_ppm<W: Write>(out: &mut W, map: &Tensor) -> io::Result<()> {
    let (h, w) = dims(map)?;
    let table = color_table();
    write!(out, "P6\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = map
        .data()
        .iter()
        .flat_map(|&v| table[level(v) as usize])
        .collect();
    out.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_bytes() {
        let map = Tensor::matrix(2, 3, vec![0.0, 0.5, 1.0, 0.2, 1.7, -1.0]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&mut buf, &map).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[0, 128, 255, 51, 255, 0]);
    }

    #[test]
    fn ppm_uses_table_ends() {
        let map = Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_ppm(&mut buf, &map).unwrap();
        let body = &buf[b"P6\n2 1\n255\n".len()..];
        assert_eq!(body, &[0, 0, 255, 255, 0, 0]);
        assert!(write_ppm(&mut buf, &Tensor::new(vec![3], vec![0.0; 3]).unwrap()).is_err());
    }
}
