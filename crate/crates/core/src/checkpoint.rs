//! Model checkpoints in a line-oriented text format and a compact
//! little-endian binary format. Both round-trip every parameter bit-exactly.
//!
//! Text layout (one item per line, fields separated by single spaces):
//!
//! ```text
//! taxokg-checkpoint 1
//! kind simple-plus
//! dim 4
//! phi relu
//! entities <n>          followed by n entity names
//! relations <n>         followed by n relation names
//! rules <n>             followed by n `premise<TAB>direction<TAB>conclusion`
//! matrix <name> <rows> <cols>   followed by `rows` lines of `cols` values
//! ```
//!
//! Matrices appear in the order entity_head, entity_tail, relation_fwd,
//! relation_bwd, delta_fwd, delta_bwd. Values use Rust's shortest
//! round-trip float formatting.
//!
//! The binary layout carries the same items: the 8-byte magic `TXKGBIN\0`, a
//! u32 version, then length-prefixed (u32) UTF-8 strings for kind and phi, a
//! u64 dim, the name lists and rules (u32 counts, rules as three strings), and
//! each matrix as u64 rows, u64 cols and row-major f64 values.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::data::{parse_rule_file, write_rules, DataError, Vocabulary};
use crate::models::{ConstraintGraph, EmbeddingModel, Matrix, ModelConfig, ModelError, ModelKind, Nonlinearity};

const TEXT_MAGIC: &str = "taxokg-checkpoint";
const BINARY_MAGIC: &[u8; 8] = b"TXKGBIN\0";
const VERSION: u32 = 1;
const MATRIX_NAMES: [&str; 6] = [
    "entity_head",
    "entity_tail",
    "relation_fwd",
    "relation_bwd",
    "delta_fwd",
    "delta_bwd",
];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint (line {line}): {message}")]
    Format { line: usize, message: String },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid rules: {0}")]
    Rules(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn format_err(line: usize, message: impl Into<String>) -> CheckpointError {
    CheckpointError::Format {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Binary,
}

/// A trained model together with the names its rows refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub vocab: Vocabulary,
    pub model: EmbeddingModel,
}

impl Checkpoint {
    pub fn new(vocab: Vocabulary, model: EmbeddingModel) -> Result<Self, CheckpointError> {
        if vocab.num_entities() != model.num_entities() || vocab.num_relations() != model.num_relations() {
            return Err(CheckpointError::Vocab(format!(
                "vocabulary has {} entities / {} relations, model has {} / {}",
                vocab.num_entities(),
                vocab.num_relations(),
                model.num_entities(),
                model.num_relations()
            )));
        }
        Ok(Self { vocab, model })
    }

    pub fn save(&self, path: &Path, format: Format) -> Result<(), CheckpointError> {
        let mut out = BufWriter::new(File::create(path)?);
        match format {
            Format::Text => self.write_text(&mut out)?,
            Format::Binary => self.write_binary(&mut out)?,
        }
        out.flush()?;
        Ok(())
    }

    /// Detects the format from the leading bytes.
    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::read_binary(&bytes[..])
        } else {
            Self::read_text(&bytes[..])
        }
    }

    fn matrices(&self) -> [&Matrix; 6] {
        let m = &self.model;
        [
            &m.entity_head,
            &m.entity_tail,
            &m.relation_fwd,
            &m.relation_bwd,
            &m.delta_fwd,
            &m.delta_bwd,
        ]
    }

    fn rules_text(&self) -> io::Result<String> {
        let mut buf = Vec::new();
        write_rules(&mut buf, self.model.constraints().rules(), &self.vocab)?;
        Ok(String::from_utf8(buf).expect("names are utf-8"))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> Result<(), CheckpointError> {
        let m = &self.model;
        writeln!(out, "{TEXT_MAGIC} {VERSION}")?;
        writeln!(out, "kind {}", m.kind)?;
        writeln!(out, "dim {}", m.dim)?;
        writeln!(out, "phi {}", m.phi)?;
        for (label, names) in [
            ("entities", self.vocab.entity_names()),
            ("relations", self.vocab.relation_names()),
        ] {
            writeln!(out, "{label} {}", names.len())?;
            for n in names {
                writeln!(out, "{n}")?;
            }
        }
        writeln!(out, "rules {}", m.constraints().rules().len())?;
        out.write_all(self.rules_text()?.as_bytes())?;
        for (name, mat) in MATRIX_NAMES.iter().zip(self.matrices()) {
            writeln!(out, "matrix {name} {} {}", mat.rows(), mat.cols())?;
            for i in 0..mat.rows() {
                let line: Vec<String> = mat.row(i).iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, CheckpointError> {
        let mut r = LineReader {
            lines: input.lines(),
            line: 0,
        };
        let count = |n: usize, v: &str| v.parse::<usize>().map_err(|_| format_err(n, format!("bad count `{v}`")));

        let (n, v) = r.field(TEXT_MAGIC)?;
        let version: u32 = v.parse().map_err(|_| format_err(n, "bad version"))?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let (n, v) = r.field("kind")?;
        let kind: ModelKind = v.parse().map_err(|e: ModelError| format_err(n, e.to_string()))?;
        let (n, v) = r.field("dim")?;
        let dim = count(n, &v)?;
        let (n, v) = r.field("phi")?;
        let phi: Nonlinearity = v.parse().map_err(|e: ModelError| format_err(n, e.to_string()))?;
        let mut lists = Vec::new();
        for key in ["entities", "relations"] {
            let (n, v) = r.field(key)?;
            let len = count(n, &v)?;
            let mut names = Vec::with_capacity(len);
            for _ in 0..len {
                names.push(r.next()?.1);
            }
            lists.push(names);
        }
        let relations = lists.pop().expect("two lists");
        let entities = lists.pop().expect("two lists");
        let vocab = Vocabulary::from_names(entities, relations).map_err(CheckpointError::Vocab)?;
        let (n, v) = r.field("rules")?;
        let len = count(n, &v)?;
        let mut rule_text = String::new();
        for _ in 0..len {
            rule_text.push_str(&r.next()?.1);
            rule_text.push('\n');
        }
        let rules = parse_rule_file(rule_text.as_bytes(), &vocab)?;
        let mut mats = Vec::with_capacity(MATRIX_NAMES.len());
        for name in MATRIX_NAMES {
            let (n, v) = r.field("matrix")?;
            let parts: Vec<&str> = v.split(' ').collect();
            if parts.len() != 3 || parts[0] != name {
                return Err(format_err(n, format!("expected matrix `{name}`")));
            }
            let rows = count(n, parts[1])?;
            let cols = count(n, parts[2])?;
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, line) = r.next()?;
                let before = data.len();
                for tok in line.split(' ').filter(|s| !s.is_empty()) {
                    data.push(tok.parse::<f64>().map_err(|_| format_err(n, format!("bad value `{tok}`")))?);
                }
                if data.len() - before != cols {
                    return Err(format_err(n, format!("expected {cols} values")));
                }
            }
            mats.push(Matrix::from_vec(rows, cols, data));
        }
        assemble(vocab, kind, dim, phi, &rules, mats)
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), CheckpointError> {
        let m = &self.model;
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        put_str(&mut out, m.kind.token())?;
        put_str(&mut out, m.phi.token())?;
        out.write_all(&(m.dim as u64).to_le_bytes())?;
        for names in [self.vocab.entity_names(), self.vocab.relation_names()] {
            out.write_all(&(names.len() as u32).to_le_bytes())?;
            for n in names {
                put_str(&mut out, n)?;
            }
        }
        let rules = m.constraints().rules();
        out.write_all(&(rules.len() as u32).to_le_bytes())?;
        for r in rules {
            put_str(&mut out, self.vocab.relation_name(r.premise))?;
            put_str(&mut out, r.direction.token())?;
            put_str(&mut out, self.vocab.relation_name(r.conclusion))?;
        }
        for mat in self.matrices() {
            out.write_all(&(mat.rows() as u64).to_le_bytes())?;
            out.write_all(&(mat.cols() as u64).to_le_bytes())?;
            for x in mat.as_slice() {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(format_err(0, "not a binary checkpoint"));
        }
        let version = get_u32(&mut input)?;
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let kind: ModelKind = get_str(&mut input)?.parse().map_err(|e: ModelError| format_err(0, e.to_string()))?;
        let phi: Nonlinearity = get_str(&mut input)?.parse().map_err(|e: ModelError| format_err(0, e.to_string()))?;
        let dim = get_u64(&mut input)? as usize;
        let mut lists = Vec::new();
        for _ in 0..2 {
            let len = get_u32(&mut input)? as usize;
            let names = (0..len).map(|_| get_str(&mut input)).collect::<Result<Vec<_>, _>>()?;
            lists.push(names);
        }
        let relations = lists.pop().expect("two lists");
        let entities = lists.pop().expect("two lists");
        let vocab = Vocabulary::from_names(entities, relations).map_err(CheckpointError::Vocab)?;
        let len = get_u32(&mut input)? as usize;
        let mut rule_text = String::new();
        for _ in 0..len {
            let fields = [get_str(&mut input)?, get_str(&mut input)?, get_str(&mut input)?];
            rule_text.push_str(&fields.join("\t"));
            rule_text.push('\n');
        }
        let rules = parse_rule_file(rule_text.as_bytes(), &vocab)?;
        let mut mats = Vec::with_capacity(MATRIX_NAMES.len());
        for _ in MATRIX_NAMES {
            let rows = get_u64(&mut input)? as usize;
            let cols = get_u64(&mut input)? as usize;
            let n = rows.checked_mul(cols).ok_or_else(|| format_err(0, "matrix too large"))?;
            let mut data = Vec::with_capacity(n.min(1 << 24));
            let mut buf = [0u8; 8];
            for _ in 0..n {
                input.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
            mats.push(Matrix::from_vec(rows, cols, data));
        }
        assemble(vocab, kind, dim, phi, &rules, mats)
    }
}

fn assemble(
    vocab: Vocabulary,
    kind: ModelKind,
    dim: usize,
    phi: Nonlinearity,
    rules: &[crate::data::SubsumptionRule],
    mats: Vec<Matrix>,
) -> Result<Checkpoint, CheckpointError> {
    let graph = if rules.is_empty() {
        ConstraintGraph::empty(vocab.num_relations())
    } else {
        ConstraintGraph::build(vocab.relation_names(), rules)?
    };
    let mut model = EmbeddingModel::zeros(ModelConfig::new(kind, dim).with_phi(phi), vocab.num_entities(), graph)?;
    let mut mats = mats.into_iter();
    for (name, slot) in MATRIX_NAMES.iter().zip([
        &mut model.entity_head,
        &mut model.entity_tail,
        &mut model.relation_fwd,
        &mut model.relation_bwd,
        &mut model.delta_fwd,
        &mut model.delta_bwd,
    ]) {
        let mat = mats.next().expect("six matrices");
        if mat.rows() != slot.rows() || mat.cols() != slot.cols() {
            return Err(format_err(
                0,
                format!(
                    "matrix {name} is {}x{}, expected {}x{}",
                    mat.rows(),
                    mat.cols(),
                    slot.rows(),
                    slot.cols()
                ),
            ));
        }
        *slot = mat;
    }
    Checkpoint::new(vocab, model)
}

struct LineReader<R> {
    lines: io::Lines<R>,
    line: usize,
}

impl<R: BufRead> LineReader<R> {
    fn next(&mut self) -> Result<(usize, String), CheckpointError> {
        self.line += 1;
        match self.lines.next() {
            Some(l) => Ok((self.line, l?)),
            None => Err(format_err(self.line, "unexpected end of file")),
        }
    }

    /// Reads `key value` and returns the value.
    fn field(&mut self, key: &str) -> Result<(usize, String), CheckpointError> {
        let (n, line) = self.next()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok((n, v.to_owned())),
            _ => Err(format_err(n, format!("expected `{key} ...`, found `{line}`"))),
        }
    }
}

fn put_str<W: Write>(out: &mut W, s: &str) -> io::Result<()> {
    out.write_all(&(s.len() as u32).to_le_bytes())?;
    out.write_all(s.as_bytes())
}

fn get_u32<R: Read>(input: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64<R: Read>(input: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str<R: Read>(input: &mut R) -> Result<String, CheckpointError> {
    let len = get_u32(input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| format_err(0, "string is not utf-8"))
}

/// Reads a text checkpoint from a file without format detection.
pub fn load_text(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::read_text(BufReader::new(File::open(path)?))
}
