//! Readers and writers for Matrix Market matrices, PGM images and headered
//! CSV tables.

use std::io::{BufRead, Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

/// Reads a real or integer Matrix Market matrix in coordinate or array
/// layout; `symmetric` storage is mirrored into a full matrix.
pub fn read_matrix_market<R: BufRead>(input: R) -> Result<Array2<f64>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty matrix market file"))??;
    let tok: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tok.len() < 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(parse_err(format!("bad matrix market header '{header}'")));
    }
    let coordinate = match tok[2].as_str() {
        "coordinate" => true,
        "array" => false,
        f => return Err(parse_err(format!("unsupported format '{f}'"))),
    };
    if !matches!(tok[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_err(format!("unsupported field '{}'", tok[3])));
    }
    let symmetric = match tok[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(parse_err(format!("unsupported symmetry '{s}'"))),
    };
    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(t.to_string());
    }
    let mut it = body.iter();
    let size = it.next().ok_or_else(|| parse_err("missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| parse_err(format!("bad size line '{size}'"))))
        .collect::<Result<_>>()?;
    let (m, n) = match dims.as_slice() {
        [m, n, ..] => (*m, *n),
        _ => return Err(parse_err(format!("bad size line '{size}'"))),
    };
    if symmetric && m != n {
        return Err(parse_err("symmetric matrix must be square"));
    }
    let mut a = Array2::<f64>::zeros((m, n));
    let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(format!("bad number '{s}'")));
    if coordinate {
        let nnz = *dims.get(2).ok_or_else(|| parse_err("coordinate size line needs nnz"))?;
        let mut count = 0;
        for line in it {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() < 3 {
                return Err(parse_err(format!("bad entry '{line}'")));
            }
            let i: usize = f[0].parse().map_err(|_| parse_err(format!("bad row index '{}'", f[0])))?;
            let j: usize = f[1].parse().map_err(|_| parse_err(format!("bad column index '{}'", f[1])))?;
            if i == 0 || j == 0 || i > m || j > n {
                return Err(parse_err(format!("index ({i}, {j}) out of range")));
            }
            let v = num(f[2])?;
            a[[i - 1, j - 1]] = v;
            if symmetric {
                a[[j - 1, i - 1]] = v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(parse_err(format!("expected {nnz} entries, found {count}")));
        }
    } else {
        let vals: Vec<f64> = it.flat_map(|l| l.split_whitespace().map(num).collect::<Vec<_>>()).collect::<Result<_>>()?;
        let mut k = 0;
        for j in 0..n {
            let rows = if symmetric { j..m } else { 0..m };
            for i in rows {
                let v = *vals.get(k).ok_or_else(|| parse_err("too few array entries"))?;
                a[[i, j]] = v;
                if symmetric {
                    a[[j, i]] = v;
                }
                k += 1;
            }
        }
        if k != vals.len() {
            return Err(parse_err("too many array entries"));
        }
    }
    Ok(a)
}

/// Writes a dense matrix in array layout with round-trip precision.
pub fn write_matrix_market<W: Write>(a: &Array2<f64>, symmetric: bool, mut out: W) -> Result<()> {
    let (m, n) = a.dim();
    writeln!(out, "%%MatrixMarket matrix array real {}", if symmetric { "symmetric" } else { "general" })?;
    writeln!(out, "{m} {n}")?;
    for j in 0..n {
        let start = if symmetric { j } else { 0 };
        for i in start..m {
            writeln!(out, "{:?}", a[[i, j]])?;
        }
    }
    Ok(())
}

/// Grayscale image with samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub data: Vec<u16>,
}

impl PgmImage {
    /// Samples scaled to `[0, 1]`.
    pub fn normalized(&self) -> Array1<f64> {
        let mv = f64::from(self.maxval);
        Array1::from_iter(self.data.iter().map(|&v| f64::from(v) / mv))
    }
}

/// Reads a binary (`P5`) or ASCII (`P2`) PGM image.
pub fn read_pgm<R: Read>(mut input: R) -> Result<PgmImage> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let next_token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(parse_err("unexpected end of PGM data"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    let dim = |s: String| s.parse::<usize>().map_err(|_| parse_err(format!("bad PGM header value '{s}'")));
    let width = dim(next_token(&mut pos)?)?;
    let height = dim(next_token(&mut pos)?)?;
    let maxval = dim(next_token(&mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    match magic.as_str() {
        "P2" => {
            for _ in 0..count {
                let v = dim(next_token(&mut pos)?)?;
                if v > maxval {
                    return Err(parse_err(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(v as u16);
            }
        }
        "P5" => {
            pos += 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if bytes.len() < pos + need {
                return Err(parse_err("truncated PGM raster"));
            }
            let raster = &bytes[pos..pos + need];
            if wide {
                data.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
            } else {
                data.extend(raster.iter().map(|&b| u16::from(b)));
            }
            if data.iter().any(|&v| usize::from(v) > maxval) {
                return Err(parse_err("sample exceeds maxval"));
            }
        }
        m => return Err(parse_err(format!("unsupported PGM magic '{m}'"))),
    }
    Ok(PgmImage { width, height, maxval: maxval as u16, data })
}

/// Writes a binary PGM.
pub fn write_pgm<W: Write>(img: &PgmImage, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n{}\n", img.width, img.height, img.maxval)?;
    if img.maxval > 255 {
        for v in &img.data {
            out.write_all(&v.to_be_bytes())?;
        }
    } else {
        out.write_all(&img.data.iter().map(|&v| v as u8).collect::<Vec<_>>())?;
    }
    Ok(())
}

/// Headered numeric CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub data: Array2<f64>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Array1<f64>> {
        let j = self.headers.iter().position(|h| h == name)?;
        Some(self.data.column(j).to_owned())
    }

    /// Every column except `name`, in file order.
    pub fn without(&self, name: &str) -> Array2<f64> {
        let keep: Vec<usize> = (0..self.headers.len()).filter(|&j| self.headers[j] != name).collect();
        self.data.select(ndarray::Axis(1), &keep)
    }
}

pub fn read_csv_table<R: Read>(input: R) -> Result<CsvTable> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rd.headers().map_err(|e| parse_err(e.to_string()))?.iter().map(String::from).collect();
    let mut vals = Vec::new();
    let mut rows = 0;
    for rec in rd.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(parse_err(format!("row {} has {} fields, expected {}", rows + 1, rec.len(), headers.len())));
        }
        for f in rec.iter() {
            vals.push(f.parse::<f64>().map_err(|_| parse_err(format!("bad number '{f}' in row {}", rows + 1)))?);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, headers.len()), vals).map_err(|e| parse_err(e.to_string()))?;
    Ok(CsvTable { headers, data })
}

pub fn write_csv_table<W: Write>(table: &CsvTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| parse_err(e.to_string());
    w.write_record(&table.headers).map_err(err)?;
    for row in table.data.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
