//! Serialization: JSON with round-trip float precision, the binary sampled
//! field format, CSV sweeps, and atomic file writes.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::certify::{Certificate, CertificateData, PairCertificate, QuadraticReduction, ReductionParts};
use crate::check::SweepPoint;
use crate::error::{MtfrError, Result};
use crate::gaussian::GeneralizedGaussian;
use crate::grid::{Axis, SampledField};
use crate::linalg::{from_parts, CMat, CVec, RMat, RVec};
use crate::symplectic::{GeneratorWord, Letter, SymplecticMatrix};
use crate::tolerance::Tolerances;

pub const FIELD_MAGIC: &[u8; 4] = b"MTFR";
pub const FIELD_VERSION: u32 = 1;

/// Formatter writing every float as `{:.16e}`, which round-trips `f64`.
struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFloats);
    value.serialize(&mut ser).map_err(|e| MtfrError::InvalidInput(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Writes to a temporary sibling file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn bad(msg: impl Into<String>) -> MtfrError {
    MtfrError::InvalidInput(msg.into())
}

pub fn matrix_value(m: &RMat) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    json!({ "n": m.nrows(), "rows": rows })
}

pub fn complex_matrix_value(m: &CMat) -> Value {
    let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|i| m.row(i).iter().map(f).collect()).collect()
    };
    json!({ "n": m.nrows(), "re": part(|z| z.re), "im": part(|z| z.im) })
}

fn rows_of(v: &Value, key: &str) -> Result<Vec<Vec<f64>>> {
    let rows = v.get(key).and_then(Value::as_array).ok_or_else(|| bad(format!("missing \"{key}\"")))?;
    rows.iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(|| bad(format!("\"{key}\" rows must be arrays")))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad(format!("non-numeric entry in \"{key}\""))))
                .collect()
        })
        .collect()
}

fn square(rows: Vec<Vec<f64>>, what: &str) -> Result<RMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(MtfrError::DimensionMismatch(format!("{what} must be a non-empty square matrix")));
    }
    let m = RMat::from_fn(n, n, |i, j| rows[i][j]);
    if m.iter().any(|x| !x.is_finite()) {
        return Err(bad(format!("{what} has non-finite entries")));
    }
    Ok(m)
}

/// Parses `{"rows": [[..], ..]}` or a bare array of rows.
pub fn matrix_from_value(v: &Value) -> Result<RMat> {
    let rows = if v.is_array() {
        rows_of(&json!({ "rows": v }), "rows")?
    } else {
        rows_of(v, "rows")?
    };
    let m = square(rows, "matrix")?;
    if let Some(n) = v.get("n").and_then(Value::as_u64) {
        if n as usize != m.nrows() {
            return Err(MtfrError::DimensionMismatch(format!("declared n = {n}, found {}", m.nrows())));
        }
    }
    Ok(m)
}

pub fn complex_matrix_from_value(v: &Value) -> Result<CMat> {
    let re = square(rows_of(v, "re")?, "real part")?;
    let im = square(rows_of(v, "im")?, "imaginary part")?;
    if re.shape() != im.shape() {
        return Err(MtfrError::DimensionMismatch("real and imaginary parts differ in size".into()));
    }
    Ok(from_parts(&re, &im))
}

pub fn letter_value(l: &Letter) -> Value {
    match l {
        Letter::Chirp(q) => json!({ "kind": "chirp", "Q": matrix_value(q) }),
        Letter::Dilation(m) => json!({ "kind": "dilation", "L": matrix_value(m) }),
        Letter::PartialFourier(axes) => {
            json!({ "kind": "pfourier", "axes": axes.iter().map(|a| a + 1).collect::<Vec<_>>() })
        }
    }
}

pub fn letter_from_value(v: &Value) -> Result<Letter> {
    match v.get("kind").and_then(Value::as_str) {
        Some("chirp") => Ok(Letter::Chirp(matrix_from_value(v.get("Q").ok_or_else(|| bad("chirp without Q"))?)?)),
        Some("dilation") => {
            Ok(Letter::Dilation(matrix_from_value(v.get("L").ok_or_else(|| bad("dilation without L"))?)?))
        }
        Some("pfourier") => {
            let axes = v
                .get("axes")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("pfourier without axes"))?
                .iter()
                .map(|a| match a.as_u64() {
                    Some(k) if k >= 1 => Ok(k as usize - 1),
                    _ => Err(bad("pfourier axes are 1-based integers")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Letter::PartialFourier(axes))
        }
        other => Err(bad(format!("unknown letter kind {other:?}"))),
    }
}

pub fn word_value(w: &GeneratorWord) -> Value {
    json!({ "n": w.n, "letters": w.letters.iter().map(letter_value).collect::<Vec<_>>() })
}

pub fn word_from_value(v: &Value) -> Result<GeneratorWord> {
    let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("word without n"))? as usize;
    let letters = v
        .get("letters")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("word without letters"))?
        .iter()
        .map(letter_from_value)
        .collect::<Result<Vec<_>>>()?;
    GeneratorWord::new(n, letters)
}

fn vec_f64(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| bad(format!("missing \"{key}\"")))?
        .iter()
        .map(|x| x.as_f64().ok_or_else(|| bad(format!("non-numeric entry in \"{key}\""))))
        .collect()
}

pub fn gaussian_value(g: &GeneralizedGaussian) -> Value {
    let (mr, mi, br, bi) = crate::gaussian::parts(g);
    json!({
        "n": g.n(),
        "M_re": matrix_value(&mr)["rows"],
        "M_im": matrix_value(&mi)["rows"],
        "b_re": br.as_slice(),
        "b_im": bi.as_slice(),
        "logamp": g.logamp,
    })
}

pub fn gaussian_from_value(v: &Value) -> Result<GeneralizedGaussian> {
    let mr = square(rows_of(v, "M_re")?, "M_re")?;
    let mi = square(rows_of(v, "M_im")?, "M_im")?;
    let br = vec_f64(v, "b_re")?;
    let bi = vec_f64(v, "b_im")?;
    let n = mr.nrows();
    if mi.nrows() != n || br.len() != n || bi.len() != n {
        return Err(MtfrError::DimensionMismatch("Gaussian parts differ in size".into()));
    }
    let logamp = v.get("logamp").and_then(Value::as_f64).unwrap_or(0.0);
    let b = CVec::from_fn(n, |i, _| Complex64::new(br[i], bi[i]));
    GeneralizedGaussian::new(from_parts(&mr, &mi), b, logamp)
}

fn complex_value(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn vector_value(v: &RVec) -> Value {
    json!(v.as_slice())
}

pub fn certificate_value(cert: &Certificate) -> Value {
    let mut out = Map::new();
    out.insert("alternative".into(), json!(cert.alternative().as_str()));
    out.insert("d".into(), json!(cert.d));
    out.insert("offdiag_norm".into(), json!(cert.offdiag_norm));
    out.insert("offdiag_relative".into(), json!(cert.offdiag_relative));
    out.insert("input".into(), matrix_value(&cert.input));
    out.insert(
        "pre_iwasawa".into(),
        json!({
            "Q": matrix_value(&cert.pre.q),
            "L": matrix_value(&cert.pre.l),
            "U": complex_matrix_value(&cert.pre.u),
        }),
    );
    match &cert.data {
        CertificateData::I(a) => {
            out.insert("W".into(), matrix_value(&a.w));
            out.insert("V1".into(), complex_matrix_value(&a.v1));
            out.insert("V2".into(), complex_matrix_value(&a.v2));
            out.insert("reconstruction_error".into(), json!(a.reconstruction_error));
        }
        CertificateData::II(a) => {
            out.insert("tau".into(), complex_value(a.tau));
            out.insert("k".into(), json!(a.k));
            out.insert("Omega".into(), matrix_value(&a.omega));
            out.insert("word_A".into(), word_value(&a.word_a));
            out.insert("word_B".into(), word_value(&a.word_b));
            out.insert(
                "intermediates".into(),
                json!({
                    "tau_sigma_min": a.tau_sigma_min,
                    "P": matrix_value(&a.p),
                    "P_asymmetry": a.p_asymmetry,
                    "P11": matrix_value(&a.p11),
                    "P12": matrix_value(&a.p12),
                    "P22": matrix_value(&a.p22),
                    "W1": matrix_value(&a.w1),
                    "gamma": vector_value(&a.gamma),
                    "W2": matrix_value(&a.w2),
                    "Pi": matrix_value(&a.pi),
                    "B_tau": matrix_value(&a.b_tau),
                    "Omega_cond": a.omega_cond,
                }),
            );
        }
    }
    out.insert("warnings".into(), json!(cert.warnings));
    Value::Object(out)
}

/// Reads the parts of a certificate needed to re-verify it.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateSummary {
    pub alternative: String,
    pub d: usize,
    pub k: Option<usize>,
    pub omega: Option<RMat>,
    pub word_a: Option<GeneratorWord>,
    pub word_b: Option<GeneratorWord>,
    pub input: Option<RMat>,
}

pub fn certificate_summary(v: &Value) -> Result<CertificateSummary> {
    let alternative = v
        .get("alternative")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("certificate without alternative"))?
        .to_string();
    let d = v.get("d").and_then(Value::as_u64).ok_or_else(|| bad("certificate without d"))? as usize;
    let opt_m = |key: &str| v.get(key).map(matrix_from_value).transpose();
    let opt_w = |key: &str| v.get(key).map(word_from_value).transpose();
    Ok(CertificateSummary {
        alternative,
        d,
        k: v.get("k").and_then(Value::as_u64).map(|k| k as usize),
        omega: opt_m("Omega")?,
        word_a: opt_w("word_A")?,
        word_b: opt_w("word_B")?,
        input: opt_m("input")?,
    })
}

pub fn pair_certificate_value(p: &PairCertificate, reduction: Option<&QuadraticReduction>) -> Value {
    let mut out = Map::new();
    out.insert("kind".into(), json!("pair"));
    out.insert("d".into(), json!(p.v.nrows()));
    out.insert("V".into(), complex_matrix_value(&p.v));
    out.insert("k".into(), json!(p.k));
    out.insert("W1".into(), matrix_value(&p.w1));
    out.insert("W2".into(), matrix_value(&p.w2));
    out.insert(
        "sigma".into(),
        json!(p.sigma.iter().map(|z| complex_value(*z)).collect::<Vec<_>>()),
    );
    out.insert("B".into(), vector_value(&p.b));
    out.insert("C".into(), vector_value(&p.c));
    out.insert("Omega".into(), matrix_value(&p.omega));
    out.insert("word_B".into(), word_value(&p.word_b));
    if let Some(r) = reduction {
        out.insert("V_imag_norm".into(), json!(r.imag_norm));
        out.insert("real_obstruction".into(), json!(r.real));
    }
    Value::Object(out)
}

pub fn pair_certificate_from_value(v: &Value) -> Result<PairCertificate> {
    let get = |key: &str| v.get(key).ok_or_else(|| bad(format!("pair certificate without \"{key}\"")));
    let vm = complex_matrix_from_value(get("V")?)?;
    let sigma = get("sigma")?
        .as_array()
        .ok_or_else(|| bad("sigma must be an array"))?
        .iter()
        .map(|z| match (z.get("re").and_then(Value::as_f64), z.get("im").and_then(Value::as_f64)) {
            (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
            _ => Err(bad("sigma entries are {\"re\", \"im\"}")),
        })
        .collect::<Result<Vec<_>>>()?;
    let k = get("k")?.as_u64().ok_or_else(|| bad("k must be an integer"))? as usize;
    let p = PairCertificate {
        w1: matrix_from_value(get("W1")?)?,
        w2: matrix_from_value(get("W2")?)?,
        b: RVec::from_vec(vec_f64(v, "B")?),
        c: RVec::from_vec(vec_f64(v, "C")?),
        omega: matrix_from_value(get("Omega")?)?,
        word_b: word_from_value(get("word_B")?)?,
        sigma,
        k,
        v: vm,
    };
    let d = p.v.nrows();
    if p.omega.nrows() != 2 * d || p.word_b.n != d || k == 0 || k > d {
        return Err(MtfrError::DimensionMismatch("pair certificate parts disagree on d".into()));
    }
    Ok(p)
}

/// Rebuilds the reduction data of an Alternative II certificate from JSON,
/// taking `Omega`, `k` and the words as written (not recomputed).
pub fn reduction_parts_from_value(v: &Value, tol: &Tolerances) -> Result<ReductionParts> {
    let s = certificate_summary(v)?;
    if s.alternative != "II" {
        return Err(bad(format!("expected an Alternative II certificate, found {}", s.alternative)));
    }
    let missing = |k: &str| bad(format!("certificate without \"{k}\""));
    let input = s.input.ok_or_else(|| missing("input"))?;
    Ok(ReductionParts {
        bold: SymplecticMatrix::new(input, tol)?,
        d: s.d,
        k: s.k.ok_or_else(|| missing("k"))?,
        omega: s.omega.ok_or_else(|| missing("Omega"))?,
        word_a: s.word_a.ok_or_else(|| missing("word_A"))?,
        word_b: s.word_b.ok_or_else(|| missing("word_B"))?,
    })
}

pub fn write_field<W: Write>(w: &mut W, field: &SampledField) -> io::Result<()> {
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    w.write_all(&(field.n() as u32).to_le_bytes())?;
    for a in &field.axes {
        w.write_all(&(a.points as u64).to_le_bytes())?;
        w.write_all(&a.extent.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(field.len() * 16);
    for z in &field.values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn field_bytes(field: &SampledField) -> Vec<u8> {
    let mut out = Vec::new();
    write_field(&mut out, field).expect("writing to memory");
    out
}

pub fn read_field<R: Read>(r: &mut R) -> Result<SampledField> {
    let io_err = |e: io::Error| bad(format!("truncated field: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != FIELD_MAGIC {
        return Err(bad("not a field file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io_err)?;
    let version = u32::from_le_bytes(b4);
    if version != FIELD_VERSION {
        return Err(bad(format!("unsupported field version {version}")));
    }
    r.read_exact(&mut b4).map_err(io_err)?;
    let n = u32::from_le_bytes(b4) as usize;
    if n == 0 || n > 16 {
        return Err(bad(format!("field dimension {n} out of range")));
    }
    let mut axes = Vec::with_capacity(n);
    for _ in 0..n {
        r.read_exact(&mut b8).map_err(io_err)?;
        let points = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8).map_err(io_err)?;
        axes.push(Axis::new(points, f64::from_le_bytes(b8))?);
    }
    let len = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.points)).ok_or_else(|| bad("field too large"))?;
    let mut raw = vec![0u8; len.checked_mul(16).ok_or_else(|| bad("field too large"))?];
    r.read_exact(&mut raw).map_err(io_err)?;
    let values = raw
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(SampledField { axes, values })
}

pub fn sweep_csv(sweep: &[SweepPoint]) -> String {
    let mut out = String::from("R,value,ratio\n");
    for p in sweep {
        let ratio = p.ratio.map(|r| format!("{r:.16e}")).unwrap_or_default();
        out.push_str(&format!("{:.16e},{:.16e},{}\n", p.radius, p.value, ratio));
    }
    out
}

/// Field values as CSV rows `coords..., re, im`.
pub fn field_csv(field: &SampledField) -> String {
    let mut out = String::new();
    let head: Vec<String> = (1..=field.n()).map(|i| format!("x{i}")).collect();
    out.push_str(&head.join(","));
    out.push_str(",re,im\n");
    for i in 0..field.len() {
        for x in field.coords(i) {
            out.push_str(&format!("{x:.16e},"));
        }
        let z = field.values[i];
        out.push_str(&format!("{:.16e},{:.16e}\n", z.re, z.im));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::random_word;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn floats_round_trip() {
        let xs = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, std::f64::consts::PI];
        let s = to_json_string(&json!(xs)).unwrap();
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn word_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_word(&mut rng, 3, 8);
        let s = to_json_string(&word_value(&w)).unwrap();
        let back = word_from_value(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn gaussian_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GeneralizedGaussian::random(&mut rng, 2);
        let s = to_json_string(&gaussian_value(&g)).unwrap();
        assert_eq!(gaussian_from_value(&serde_json::from_str(&s).unwrap()).unwrap(), g);
    }

    #[test]
    fn field_round_trip_and_rejects_garbage() {
        let axes = crate::grid::uniform_axes(2, 8, 4.0).unwrap();
        let f = SampledField::from_fn(axes, |x| Complex64::new(x[0], x[1] * x[1]));
        let bytes = field_bytes(&f);
        assert_eq!(read_field(&mut bytes.as_slice()).unwrap(), f);
        assert!(read_field(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(read_field(&mut wrong.as_slice()).is_err());
    }

    #[test]
    fn certificates_round_trip() {
        let t = Tolerances::default();
        let m = crate::symplectic::make_rotation(&crate::certify::coupling_unitary(), &t).unwrap();
        let cert = crate::certify::certify(&m, &t).unwrap();
        let text = to_json_string(&certificate_value(&cert)).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(reduction_parts_from_value(&v, &t).unwrap(), ReductionParts::from_certificate(&cert).unwrap());
        let vm = CMat::identity(2, 2) * Complex64::from_polar(1.0, 0.7);
        let p = crate::certify::pair_to_partial(&vm, &t).unwrap();
        let text = to_json_string(&pair_certificate_value(&p, None)).unwrap();
        assert_eq!(pair_certificate_from_value(&serde_json::from_str(&text).unwrap()).unwrap(), p);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
