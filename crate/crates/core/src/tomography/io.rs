use std::io::{BufRead, BufReader, Read, Write};

use crate::hilbert::{ComplexMatrix, C64};
use crate::{Error, Result};

/// Writes a square matrix as text: one row per line, entries separated by a
/// single space, each entry `re,im` in `%.16e` notation.
pub fn write_density_matrix<W: Write>(m: &ComplexMatrix, mut w: W) -> Result<()> {
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols())
            .map(|j| {
                let z = m[(i, j)];
                format!("{:.16e},{:.16e}", z.re, z.im)
            })
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_density_matrix<R: Read>(r: R) -> Result<ComplexMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for line in BufReader::new(r).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for tok in line.split_whitespace() {
            let (re, im) = tok
                .split_once(',')
                .ok_or_else(|| Error::Shape(format!("entry '{tok}' is not re,im")))?;
            let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::Shape(format!("bad number '{s}'")));
            data.push(C64::new(parse(re)?, parse(im)?));
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => return Err(Error::Shape(format!("row {rows} has {n} entries, expected {c}"))),
            _ => {}
        }
        rows += 1;
    }
    ComplexMatrix::from_row_major(rows, cols.unwrap_or(0), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::random_density;
    use rand::SeedableRng;

    #[test]
    fn round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(16, 4, &mut rng);
        let mut buf = Vec::new();
        write_density_matrix(rho.matrix(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 16);
        assert_eq!(text.lines().next().unwrap().split(' ').count(), 16);
        let back = read_density_matrix(buf.as_slice()).unwrap();
        assert!(back.max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(read_density_matrix("1,0 0,0\n0,0\n".as_bytes()).is_err());
        assert!(read_density_matrix("1;0\n".as_bytes()).is_err());
    }
}
