//! JSON file formats.
//!
//! Density matrix: `{"local_dim": d, "bipartite": true, "re": [[..]], "im": [[..]]}`,
//! row-major. Basis: `{"local_dim": d, "vectors_re": [[..]], "vectors_im": [[..]]}`,
//! one row per basis vector. Every float is written with 17 significant digits
//! so values survive a round trip bit for bit.

use std::io;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};
use crate::qudit::{DensityMatrix, OrthonormalBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFile {
    pub local_dim: usize,
    pub bipartite: bool,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityFile {
    pub fn from_matrix(m: &CMatrix, local_dim: usize, bipartite: bool) -> Self {
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            m.row_iter().map(|r| r.iter().map(f).collect()).collect()
        };
        DensityFile {
            local_dim,
            bipartite,
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_matrix(rho.matrix(), rho.local_dim(), rho.is_bipartite())
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.re.len();
        if self.im.len() != n
            || self.re.iter().chain(&self.im).any(|row| row.len() != n)
        {
            return Err(Error::dims(
                "square re/im arrays of equal shape",
                format!("{} re rows, {} im rows", self.re.len(), self.im.len()),
            ));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| c(self.re[i][j], self.im[i][j])))
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        let m = self.to_matrix()?;
        DensityMatrix::new(m, self.local_dim, self.bipartite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub local_dim: usize,
    pub vectors_re: Vec<Vec<f64>>,
    pub vectors_im: Vec<Vec<f64>>,
}

impl BasisFile {
    pub fn from_basis(basis: &OrthonormalBasis) -> Self {
        let m = basis.as_matrix();
        let rows = |f: fn(&num_complex::Complex64) -> f64| {
            m.column_iter().map(|v| v.iter().map(f).collect()).collect()
        };
        BasisFile {
            local_dim: basis.local_dim(),
            vectors_re: rows(|z| z.re),
            vectors_im: rows(|z| z.im),
        }
    }

    pub fn into_basis(self) -> Result<OrthonormalBasis> {
        let d = self.local_dim;
        if self.vectors_re.len() != d
            || self.vectors_im.len() != d
            || self.vectors_re.iter().chain(&self.vectors_im).any(|v| v.len() != d)
        {
            return Err(Error::dims(format!("{d} vectors of length {d}"), "ragged or wrong-sized arrays"));
        }
        let m = CMatrix::from_fn(d, d, |row, k| c(self.vectors_re[k][row], self.vectors_im[k][row]));
        OrthonormalBasis::from_unitary(m)
    }
}

impl Serialize for OrthonormalBasis {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisFile::from_basis(self).serialize(s)
    }
}

fn parse<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    // serde_json's message already carries "line L column C".
    serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid {what} JSON: {e}")))
}

pub fn parse_density(text: &str) -> Result<DensityMatrix> {
    parse::<DensityFile>("density matrix", text)?.into_density()
}

pub fn parse_basis(text: &str) -> Result<OrthonormalBasis> {
    parse::<BasisFile>("basis", text)?.into_basis()
}

/// Formats `v` with 17 significant digits: positional for exponents in
/// `-5..17`, scientific otherwise, trailing zeros trimmed down to one decimal.
pub fn format_f64(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return format!("{s}.0");
    }
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

/// Compact JSON formatter with fixed 17-significant-digit floats.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sig17Formatter;

impl Formatter for Sig17Formatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes to compact JSON using [`Sig17Formatter`].
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{random_state, PureState, StateKind};
    use crate::rng::stream;

    #[test]
    fn float_format_has_seventeen_significant_digits() {
        assert_eq!(format_f64(1.0), "1.0");
        assert_eq!(format_f64(0.5), "0.5");
        assert_eq!(format_f64(-0.25), "-0.25");
        assert_eq!(format_f64(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(format_f64(1e-12), "9.9999999999999998e-13");
        assert_eq!(format_f64(1e20), "1.0e20");
        assert_eq!(format_f64(f64::NAN), "null");
        for v in [std::f64::consts::PI, 1e-300, -7.25e5, 0.1 + 0.2, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn density_round_trip_is_bit_exact() {
        let rho = random_state(3, StateKind::Mixed, &mut stream(2, 0)).unwrap();
        let text = to_json(&DensityFile::from_density(&rho));
        let back = parse_density(&text).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        assert_eq!(text, to_json(&DensityFile::from_density(&back)));
    }

    #[test]
    fn basis_round_trip() {
        let b = OrthonormalBasis::fourier(3);
        let text = to_json(&b);
        assert!(text.starts_with("{\"local_dim\":3,\"vectors_re\":"));
        assert_eq!(parse_basis(&text).unwrap(), b);
    }

    #[test]
    fn singlet_file_parses() {
        let text = r#"{"local_dim": 2, "bipartite": true,
            "re": [[0,0,0,0],[0,0.5,-0.5,0],[0,-0.5,0.5,0],[0,0,0,0]],
            "im": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]}"#;
        let rho = parse_density(text).unwrap();
        assert!(rho.max_abs_diff(&PureState::singlet().density()) < 1e-15);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_density("{\"local_dim\": 2,\n \"bipartite\": tru }").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_density(r#"{"local_dim": 2, "bipartite": true, "re": [[1]], "im": [[0], [0]]}"#).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_orthonormal_basis_is_rejected() {
        let text = r#"{"local_dim": 2, "vectors_re": [[1,0],[1,0]], "vectors_im": [[0,0],[0,0]]}"#;
        assert!(matches!(parse_basis(text), Err(Error::NotOrthonormal { .. })));
    }
}
