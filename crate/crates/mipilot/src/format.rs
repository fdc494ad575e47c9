//! Line-oriented text formats for sessions and trained models.
//!
//! Reals are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use mipilot_core::csp::CspFilters;
use mipilot_core::filter::BandSpec;
use mipilot_core::lda::LdaModel;
use mipilot_core::linalg::Matrix;
use mipilot_core::signal::{ClassId, EegTrial};
use mipilot_core::svm::{BinarySvmModel, KernelSpec, MultiClassSvmModel, PairMachine};
use mipilot_core::training::{Classifier, TrainedModel};

pub const SESSION_HEADER: &str = "mipilot-csv v1";
pub const CSP_HEADER: &str = "mipilot-csp v1";
pub const LDA_HEADER: &str = "mipilot-lda v1";
pub const SVM_HEADER: &str = "mipilot-svm v1";
pub const PIPELINE_HEADER: &str = "mipilot-pipeline v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: mipilot_core::Error,
    },
    #[error("unexpected end of file: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, FormatError>;

/// A recorded or generated session: task trials and rest segments in
/// protocol order.
#[derive(Clone, Debug, PartialEq)]
pub struct Session {
    pub channels: usize,
    pub sample_rate: f64,
    pub trials: Vec<EegTrial>,
}

impl Session {
    pub fn new(trials: Vec<EegTrial>) -> Option<Self> {
        let first = trials.first()?;
        let (channels, sample_rate) = (first.channels(), first.sample_rate());
        trials
            .iter()
            .all(|t| t.channels() == channels && t.sample_rate() == sample_rate)
            .then_some(Self {
                channels,
                sample_rate,
                trials,
            })
    }

    pub fn labelled(&self) -> usize {
        self.trials.iter().filter(|t| t.label().is_some()).count()
    }

    pub fn total_samples(&self) -> usize {
        self.trials.iter().map(EegTrial::len).sum()
    }
}

fn push_reals(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

pub fn session_to_string(session: &Session) -> String {
    let mut out = String::new();
    writeln!(out, "{SESSION_HEADER}").unwrap();
    writeln!(
        out,
        "channels={},sample_rate={:.16e}",
        session.channels, session.sample_rate
    )
    .unwrap();
    for t in &session.trials {
        let label = t.label().map_or(0, ClassId::get);
        writeln!(out, "trial label={label} samples={}", t.len()).unwrap();
        for c in 0..t.channels() {
            push_reals(&mut out, t.channel(c));
        }
    }
    out
}

pub fn write_session(path: &Path, session: &Session) -> io::Result<()> {
    fs::write(path, session_to_string(session))
}

pub fn read_session(path: &Path) -> Result<Session> {
    parse_session(&fs::read_to_string(path)?)
}

/// Non-empty tokens between commas and spaces, with their byte offsets.
fn split_tokens(s: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    s.split([',', ' ']).filter_map(move |t| {
        let at = offset;
        offset += t.len() + 1;
        (!t.is_empty()).then_some((at, t))
    })
}

/// Numbered line cursor.
struct Cursor<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
    peeked: Option<(usize, &'a str)>,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line: 0,
            peeked: None,
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        if self.peeked.is_none() {
            self.peeked = self.lines.next();
        }
        self.peeked.map(|(_, l)| l)
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        self.peek();
        match self.peeked.take() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(FormatError::Truncated(format!("expected {what}"))),
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> FormatError {
        FormatError::Syntax {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn invalid(&self, source: mipilot_core::Error) -> FormatError {
        FormatError::Invalid {
            line: self.line,
            source,
        }
    }

    fn header(&mut self, expected: &str) -> Result<()> {
        let l = self.next(expected)?;
        if l.trim_end() != expected {
            return Err(self.syntax(format!("expected `{expected}`, found `{l}`")));
        }
        Ok(())
    }

    /// `k1=v1,k2=v2,...` with exactly the given keys in order.
    fn fields(&mut self, prefix: &str, keys: &[&str]) -> Result<Vec<&'a str>> {
        let l = self.next(keys.first().copied().unwrap_or("fields"))?;
        let body = l
            .strip_prefix(prefix)
            .ok_or_else(|| self.syntax(format!("expected line starting with `{prefix}`")))?;
        // Separators are commas or spaces; a token without `=` continues the
        // previous value, as in `pair=1,2`.
        let mut parts: Vec<&str> = Vec::new();
        let mut start = None;
        for (i, tok) in split_tokens(body) {
            if tok.contains('=') || start.is_none() {
                if let Some(s) = start {
                    parts.push(body[s..i].trim_end_matches([',', ' ']));
                }
                start = Some(i);
            }
        }
        if let Some(s) = start {
            parts.push(body[s..].trim_end_matches([',', ' ']));
        }
        if parts.len() != keys.len() {
            return Err(self.syntax(format!("expected fields {keys:?}, found `{body}`")));
        }
        parts
            .iter()
            .zip(keys)
            .map(|(p, k)| {
                p.strip_prefix(k)
                    .and_then(|r| r.strip_prefix('='))
                    .ok_or_else(|| self.syntax(format!("expected `{k}=`, found `{p}`")))
            })
            .collect()
    }

    fn int<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.syntax(format!("{what}: `{s}` is not a valid integer")))
    }

    fn real(&self, s: &str, what: &str) -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| self.syntax(format!("{what}: `{s}` is not a valid number")))
    }

    fn reals(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let l = self.next(what)?;
        let v: Vec<f64> = l.split(',').map(|s| self.real(s, what)).collect::<Result<_>>()?;
        if v.len() != expected {
            return Err(self.syntax(format!("{what}: expected {expected} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn class(&self, s: &str) -> Result<ClassId> {
        let id: u8 = self.int(s, "class id")?;
        ClassId::new(id).ok_or_else(|| self.syntax(format!("class id {id} is outside 1..=4")))
    }
}

pub fn parse_session(text: &str) -> Result<Session> {
    let mut cur = Cursor::new(text);
    cur.header(SESSION_HEADER)?;
    let f = cur.fields("", &["channels", "sample_rate"])?;
    let channels: usize = cur.int(f[0], "channels")?;
    let sample_rate = cur.real(f[1], "sample_rate")?;
    if channels == 0 || sample_rate <= 0.0 || !sample_rate.is_finite() {
        return Err(cur.syntax("channels and sample_rate must be positive"));
    }
    let mut trials = Vec::new();
    while cur.peek().is_some_and(|l| !l.trim().is_empty()) {
        let index = trials.len();
        let f = cur.fields("trial ", &["label", "samples"])?;
        let label: u8 = cur.int(f[0], "label")?;
        let samples: usize = cur.int(f[1], "samples")?;
        let label = match label {
            0 => None,
            l => Some(cur.class(&l.to_string())?),
        };
        let mut rows = Vec::with_capacity(channels);
        for c in 0..channels {
            rows.push(cur.reals(samples, &format!("trial {index} channel {c}"))?);
        }
        let trial = EegTrial::from_channels(&rows, sample_rate, label).map_err(|e| cur.invalid(e))?;
        trials.push(trial);
    }
    while let Some(l) = cur.peek() {
        cur.next("")?;
        if !l.trim().is_empty() {
            return Err(cur.syntax("trailing content after the last trial"));
        }
    }
    Ok(Session {
        channels,
        sample_rate,
        trials,
    })
}

pub fn model_to_string(model: &TrainedModel) -> String {
    let mut out = String::new();
    let csp = &model.csp;
    writeln!(out, "{CSP_HEADER}").unwrap();
    writeln!(out, "ch={},m={}", csp.channels(), csp.m()).unwrap();
    for r in 0..csp.dim() {
        push_reals(&mut out, csp.w_csp().row(r));
    }
    push_reals(&mut out, csp.eigenvalues());

    match &model.classifier {
        Classifier::Lda(lda) => {
            writeln!(out, "{LDA_HEADER}").unwrap();
            writeln!(out, "d={}", lda.dim()).unwrap();
            push_reals(&mut out, lda.w());
            writeln!(out, "z0={:.16e}", lda.z0()).unwrap();
            writeln!(out, "classes={},{}", lda.class_pos().get(), lda.class_neg().get()).unwrap();
        }
        Classifier::Svm(svm) => {
            let first = &svm.machines()[0].model;
            writeln!(out, "{SVM_HEADER}").unwrap();
            writeln!(out, "degree={},c_cap={:.16e}", first.kernel().degree(), first.c_cap()).unwrap();
            let ids = svm.class_ids();
            writeln!(out, "classes={},{},{},{}", ids[0], ids[1], ids[2], ids[3]).unwrap();
            for m in svm.machines() {
                writeln!(
                    out,
                    "machine pair={},{} n_sv={} bias={:.16e}",
                    m.pos,
                    m.neg,
                    m.model.support_vectors().len(),
                    m.model.bias()
                )
                .unwrap();
                for ((sv, a), y) in m
                    .model
                    .support_vectors()
                    .iter()
                    .zip(m.model.alphas())
                    .zip(m.model.labels())
                {
                    write!(out, "{a:.16e},{y},").unwrap();
                    push_reals(&mut out, sv);
                }
            }
        }
    }

    writeln!(out, "{PIPELINE_HEADER}").unwrap();
    writeln!(
        out,
        "sample_rate={:.16e},low_hz={:.16e},high_hz={:.16e},order={},window={}",
        model.sample_rate, model.band.low_hz, model.band.high_hz, model.band.filter_order, model.window_len
    )
    .unwrap();
    out
}

pub fn write_model(path: &Path, model: &TrainedModel) -> io::Result<()> {
    fs::write(path, model_to_string(model))
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    parse_model(&fs::read_to_string(path)?)
}

fn parse_svm(cur: &mut Cursor<'_>, dim: usize) -> Result<MultiClassSvmModel> {
    let f = cur.fields("", &["degree", "c_cap"])?;
    let kernel = KernelSpec::new(cur.int(f[0], "degree")?).map_err(|e| cur.invalid(e))?;
    let c_cap = cur.real(f[1], "c_cap")?;
    let f = cur.fields("", &["classes"])?;
    let ids: Vec<ClassId> = f[0].split(',').map(|s| cur.class(s)).collect::<Result<_>>()?;
    let ids: [ClassId; 4] = ids.try_into().map_err(|_| cur.syntax("expected four class ids"))?;
    let mut machines = Vec::with_capacity(6);
    for _ in 0..6 {
        let f = cur.fields("machine ", &["pair", "n_sv", "bias"])?;
        let pair: Vec<ClassId> = f[0].split(',').map(|s| cur.class(s)).collect::<Result<_>>()?;
        if pair.len() != 2 {
            return Err(cur.syntax("pair needs two class ids"));
        }
        let n_sv: usize = cur.int(f[1], "n_sv")?;
        let bias = cur.real(f[2], "bias")?;
        let (mut svs, mut labels, mut alphas) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..n_sv {
            let v = cur.reals(dim + 2, &format!("support vector {k}"))?;
            let y = match v[1] {
                1.0 => 1i8,
                -1.0 => -1i8,
                other => return Err(cur.syntax(format!("label must be 1 or -1, found {other}"))),
            };
            alphas.push(v[0]);
            labels.push(y);
            svs.push(v[2..].to_vec());
        }
        let model = BinarySvmModel::new(svs, labels, alphas, bias, kernel, c_cap).map_err(|e| cur.invalid(e))?;
        machines.push(PairMachine {
            pos: pair[0],
            neg: pair[1],
            model,
        });
    }
    MultiClassSvmModel::from_machines(ids, machines).map_err(|e| cur.invalid(e))
}

pub fn parse_model(text: &str) -> Result<TrainedModel> {
    let mut cur = Cursor::new(text);
    cur.header(CSP_HEADER)?;
    let f = cur.fields("", &["ch", "m"])?;
    let ch: usize = cur.int(f[0], "ch")?;
    let m: usize = cur.int(f[1], "m")?;
    if ch == 0 || m == 0 || 2 * m > ch {
        return Err(cur.syntax(format!("need 1 <= 2m <= ch, found ch={ch} m={m}")));
    }
    let mut w = Vec::with_capacity(2 * m * ch);
    for r in 0..2 * m {
        w.extend(cur.reals(ch, &format!("filter {r}"))?);
    }
    let eigenvalues = cur.reals(ch, "eigenvalues")?;
    let w = Matrix::from_row_major(2 * m, ch, w).expect("shape checked above");
    let csp = CspFilters::new(w, eigenvalues, m).map_err(|e| cur.invalid(e))?;

    let section = cur.next("classifier section")?.trim_end();
    let classifier = match section {
        LDA_HEADER => {
            let f = cur.fields("", &["d"])?;
            let d: usize = cur.int(f[0], "d")?;
            let w = cur.reals(d, "w")?;
            let f = cur.fields("", &["z0"])?;
            let z0 = cur.real(f[0], "z0")?;
            let f = cur.fields("", &["classes"])?;
            let ids: Vec<ClassId> = f[0].split(',').map(|s| cur.class(s)).collect::<Result<_>>()?;
            if ids.len() != 2 {
                return Err(cur.syntax("expected two class ids"));
            }
            Classifier::Lda(LdaModel::new(w, z0, ids[0], ids[1]).map_err(|e| cur.invalid(e))?)
        }
        SVM_HEADER => Classifier::Svm(parse_svm(&mut cur, csp.dim())?),
        other => return Err(cur.syntax(format!("unknown classifier section `{other}`"))),
    };

    cur.header(PIPELINE_HEADER)?;
    let f = cur.fields("", &["sample_rate", "low_hz", "high_hz", "order", "window"])?;
    let sample_rate = cur.real(f[0], "sample_rate")?;
    let band = BandSpec::new(
        cur.real(f[1], "low_hz")?,
        cur.real(f[2], "high_hz")?,
        cur.int(f[3], "order")?,
    )
    .map_err(|e| cur.invalid(e))?;
    let window_len: usize = cur.int(f[4], "window")?;

    let model = TrainedModel {
        sample_rate,
        band,
        window_len,
        csp,
        classifier,
    };
    model.validate().map_err(|e| cur.invalid(e))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mipilot_core::signal::ClassId;

    fn tiny_session() -> Session {
        let a =
            EegTrial::from_channels(&[[0.1, -2.5e-7, 3.0], [1.0 / 3.0, 0.0, -1e300]], 128.0, ClassId::new(2)).unwrap();
        let b = EegTrial::from_channels(&[[5.0, 6.0], [7.0, 8.0]], 128.0, None).unwrap();
        Session::new(vec![a, b]).unwrap()
    }

    #[test]
    fn session_round_trip_is_exact() {
        let s = tiny_session();
        let text = session_to_string(&s);
        assert!(
            text.starts_with("mipilot-csv v1\nchannels=2,sample_rate=1.2800000000000000e2\ntrial label=2 samples=3\n")
        );
        assert!(text.contains("trial label=0 samples=2\n"));
        assert_eq!(parse_session(&text).unwrap(), s);
    }

    #[test]
    fn sample_count_mismatch_is_rejected() {
        let text = "mipilot-csv v1\nchannels=1,sample_rate=128\ntrial label=1 samples=3\n1,2\n";
        match parse_session(text) {
            Err(FormatError::Syntax { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("expected 3 values, found 2"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_channel_rows_are_rejected() {
        let text = "mipilot-csv v1\nchannels=2,sample_rate=128\ntrial label=1 samples=2\n1,2\n";
        assert!(matches!(parse_session(text), Err(FormatError::Truncated(_))));
    }

    #[test]
    fn bad_header_and_label_are_rejected() {
        assert!(parse_session("mipilot-csv v2\n").is_err());
        let text = "mipilot-csv v1\nchannels=1,sample_rate=128\ntrial label=5 samples=2\n1,2\n";
        assert!(parse_session(text).is_err());
        let text = "mipilot-csv v1\nchannels=1,sample_rate=128\ntrial label=1 samples=2\n1,nan\n";
        assert!(matches!(parse_session(text), Err(FormatError::Invalid { line: 4, .. })));
    }
}
