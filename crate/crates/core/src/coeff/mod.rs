//! Random checkerboard coefficients and the homogenized matrix.
//!
//! The field is constant on every unit cell `z + [0,1)^2` and takes one of
//! two values with probability 1/2 each, independently across cells. Each
//! cell's coin is a pure function of `(seed, z)`, so sampling does not depend
//! on traversal order or on how many workers generate the field.

mod rve;

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

pub use rve::{rve_estimate_abar, RveBoundary, RveOptions};

/// Piecewise constant scalar coefficient `a(x) = b(z) I` on `(0, r)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckerboardField {
    r: usize,
    seed: u64,
    lo: f64,
    hi: f64,
    /// `values[j * r + i]` is the value on cell `(i, j)`.
    values: Vec<f64>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based hash of a cell, the source of all randomness in a field.
pub fn cell_hash(seed: u64, x: u64, y: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ x) ^ y.rotate_left(32))
}

/// The fair coin of cell `(x, y)`: `true` selects the high value.
pub fn cell_is_high(seed: u64, x: u64, y: u64) -> bool {
    cell_hash(seed, x, y) >> 63 == 1
}

fn check_contrast(lo: f64, hi: f64) -> Result<()> {
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid(format!("coefficient values must be positive, got lo={lo}")));
    }
    if lo > hi {
        return Err(Error::invalid(format!("need lo <= hi, got lo={lo}, hi={hi}")));
    }
    Ok(())
}

/// Samples an `r x r` checkerboard with values in `{lo, hi}`.
pub fn sample_checkerboard(r: usize, seed: u64, lo: f64, hi: f64) -> Result<CheckerboardField> {
    if r == 0 {
        return Err(Error::invalid("checkerboard needs r >= 1"));
    }
    check_contrast(lo, hi)?;
    let mut values = Vec::with_capacity(r * r);
    for j in 0..r {
        for i in 0..r {
            values.push(if cell_is_high(seed, i as u64, j as u64) { hi } else { lo });
        }
    }
    Ok(CheckerboardField {
        r,
        seed,
        lo,
        hi,
        values,
    })
}

impl CheckerboardField {
    /// Field from explicit cell values (row-major, `j * r + i`).
    ///
    /// Every value must equal `lo` or `hi`; `seed` is kept as a label only.
    pub fn from_values(r: usize, seed: u64, lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        check_contrast(lo, hi)?;
        if r == 0 || values.len() != r * r {
            return Err(Error::DimensionMismatch {
                expected: r * r,
                actual: values.len(),
            });
        }
        if let Some(p) = values.iter().position(|&v| v != lo && v != hi) {
            return Err(Error::invalid(format!("cell {p} has value {} outside {{{lo}, {hi}}}", values[p])));
        }
        Ok(CheckerboardField {
            r,
            seed,
            lo,
            hi,
            values,
        })
    }

    /// Homogeneous medium with coefficient `c` everywhere.
    pub fn constant(r: usize, c: f64) -> Result<Self> {
        Self::from_values(r, 0, c, c, vec![c; r * r])
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Coefficient on cell `z = (i, j)`.
    pub fn coeff_of_cell(&self, z: (usize, usize)) -> Result<f64> {
        let (i, j) = z;
        if i >= self.r || j >= self.r {
            return Err(Error::OutOfRange {
                index: i.max(j),
                len: self.r,
            });
        }
        Ok(self.values[j * self.r + i])
    }

    /// Mirror image across the diagonal `x = y`.
    pub fn transposed(&self) -> Self {
        let r = self.r;
        let mut values = vec![0.0; r * r];
        for j in 0..r {
            for i in 0..r {
                values[i * r + j] = self.values[j * r + i];
            }
        }
        CheckerboardField {
            values,
            ..self.clone()
        }
    }

    /// Fraction of cells carrying the high value.
    pub fn high_fraction(&self) -> f64 {
        self.values.iter().filter(|&&v| v == self.hi).count() as f64 / self.values.len() as f64
    }

    /// Text grid: a header line `checkerboard r seed lo hi`, then `r` lines of
    /// `r` values (line `j` holds cells `(0, j) .. (r-1, j)`).
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "checkerboard {} {} {} {}", self.r, self.seed, self.lo, self.hi)?;
        for row in self.values.chunks(self.r) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "checkerboard text grid",
            detail,
        };
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != "checkerboard" {
            return Err(bad(format!("bad header {header:?}")));
        }
        let parse_err = |e: &dyn std::fmt::Display| bad(e.to_string());
        let r: usize = fields[1].parse().map_err(|e| parse_err(&e))?;
        let seed: u64 = fields[2].parse().map_err(|e| parse_err(&e))?;
        let lo: f64 = fields[3].parse().map_err(|e| parse_err(&e))?;
        let hi: f64 = fields[4].parse().map_err(|e| parse_err(&e))?;
        let mut values = Vec::with_capacity(r * r);
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|e| parse_err(&e))?);
            }
        }
        Self::from_values(r, seed, lo, hi, values)
    }

    /// Flat little-endian binary: magic `CKBD`, `r` as u64, seed as u64,
    /// `lo`, `hi`, then `r^2` f64 values row-major.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"CKBD")?;
        out.write_all(&(self.r as u64).to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.lo.to_le_bytes())?;
        out.write_all(&self.hi.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let bad = |detail: String| Error::Format {
            what: "checkerboard binary grid",
            detail,
        };
        let mut word = [0u8; 8];
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
        if &magic != b"CKBD" {
            return Err(bad("bad magic".into()));
        }
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input.read_exact(&mut word).map_err(|e| bad(e.to_string()))?;
            Ok(word)
        };
        let r = u64::from_le_bytes(next(&mut input)?) as usize;
        let seed = u64::from_le_bytes(next(&mut input)?);
        let lo = f64::from_le_bytes(next(&mut input)?);
        let hi = f64::from_le_bytes(next(&mut input)?);
        let count = r.checked_mul(r).ok_or_else(|| bad(format!("r={r} too large")))?;
        let mut values = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            values.push(f64::from_le_bytes(next(&mut input)?));
        }
        Self::from_values(r, seed, lo, hi, values)
    }
}

/// Constant symmetric positive definite 2x2 coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogenizedMatrix {
    pub abar: [[f64; 2]; 2],
}

impl HomogenizedMatrix {
    /// Wraps a symmetric positive definite matrix.
    pub fn new(abar: [[f64; 2]; 2]) -> Result<Self> {
        let m = HomogenizedMatrix { abar };
        let sym_tol = 1e-12 * (abar[0][0].abs() + abar[1][1].abs());
        if (abar[0][1] - abar[1][0]).abs() > sym_tol {
            return Err(Error::invalid(format!("matrix {abar:?} is not symmetric")));
        }
        if !abar.iter().flatten().all(|v| v.is_finite()) || m.eigenvalues()[0] <= 0.0 {
            return Err(Error::invalid(format!("matrix {abar:?} is not positive definite")));
        }
        Ok(m)
    }

    pub fn isotropic(c: f64) -> Result<Self> {
        Self::new([[c, 0.0], [0.0, c]])
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [c, d]] = self.abar;
        let off = 0.5 * (b + c);
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        [mean - rad, mean + rad]
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.abar;
        let det = a * d - b * c;
        HomogenizedMatrix {
            abar: [[d / det, -b / det], [-c / det, a / det]],
        }
    }

    pub fn matmul(&self, other: &Self) -> [[f64; 2]; 2] {
        let (x, y) = (&self.abar, &other.abar);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
            }
        }
        out
    }

    pub fn is_diagonal(&self) -> bool {
        self.abar[0][1] == 0.0 && self.abar[1][0] == 0.0
    }
}

/// Homogenized matrix of the two-phase isotropic checkerboard with fair
/// coins: `sqrt(lo hi) I` (equal to `3 I` for values `{1, 9}`).
pub fn analytic_abar(lo: f64, hi: f64) -> Result<HomogenizedMatrix> {
    check_contrast(lo, hi)?;
    HomogenizedMatrix::isotropic((lo * hi).sqrt())
}
