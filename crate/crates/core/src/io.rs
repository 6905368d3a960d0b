//! On-disk formats. Byte layouts are documented in `FORMATS.md` at the
//! repository root.
//!
//! Binary containers (dataset, trace stream, coverage state) share a prefix:
//! a 4-byte magic, a little-endian `u32` version, a little-endian `u32`
//! header length, then that many bytes of compact JSON header. Model,
//! profile and report files are JSON documents whose first two keys are
//! `format` and `version`.

use std::collections::BTreeSet;
use std::io::{self, Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{BitSet, CoverageConfig, CoverageError, CoverageReport, CoverageState, StateParts};
use crate::dataset::{Dataset, DatasetError};
use crate::hash::Digest;
use crate::nn::{Activation, ActivationTrace, EngineError, LayerKind, LayerSpec, Model};
use crate::numerics::Tensor;
use crate::profiler::{Bounds, NeuronProfile, ProfileError};

pub const DATASET_MAGIC: [u8; 4] = *b"DGDS";
pub const TRACE_MAGIC: [u8; 4] = *b"DGTR";
pub const STATE_MAGIC: [u8; 4] = *b"DGCS";
pub const FORMAT_VERSION: u32 = 1;

/// Upper bound on a binary header, so a corrupted length cannot trigger a
/// huge allocation.
const MAX_HEADER_LEN: u32 = 64 << 20;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("unsupported {format} version {found} (this build reads version {supported})")]
    UnsupportedVersion { format: &'static str, found: u32, supported: u32 },
    #[error("expected a {expected} file, found {found:?}")]
    WrongFormat { expected: &'static str, found: String },
    #[error("truncated {format}: {section} ends early")]
    Truncated { format: &'static str, section: String },
    #[error("truncated trace stream: record {record} is incomplete")]
    TruncatedRecord { record: u64 },
    #[error("{format} has {bytes} unexpected trailing bytes")]
    TrailingData { format: &'static str, bytes: u64 },
    #[error("malformed {format} JSON: {source}")]
    Json {
        format: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error("shape disagreement in {format}: {detail}")]
    Shape { format: &'static str, detail: String },
    #[error("record {record}: input id is not valid UTF-8")]
    InvalidUtf8 { record: u64 },
    #[error("model_id in file ({stored}) does not match its contents ({computed})")]
    ModelIdMismatch { stored: Digest, computed: Digest },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] EngineError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], on_eof: impl FnOnce() -> FormatError) -> Result<(), FormatError> {
    r.read_exact(buf).map_err(|e| if e.kind() == io::ErrorKind::UnexpectedEof { on_eof() } else { FormatError::Io(e) })
}

fn truncated<'a>(format: &'static str, section: &'a str) -> impl FnOnce() -> FormatError + 'a {
    move || FormatError::Truncated { format, section: section.to_string() }
}

fn read_u32<R: Read>(r: &mut R, format: &'static str, section: &str) -> Result<u32, FormatError> {
    let mut b = [0u8; 4];
    read_exact_or(r, &mut b, truncated(format, section))?;
    Ok(u32::from_le_bytes(b))
}

fn expect_eof<R: Read>(r: &mut R, format: &'static str) -> Result<(), FormatError> {
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if rest.is_empty() {
        Ok(())
    } else {
        Err(FormatError::TrailingData { format, bytes: rest.len() as u64 })
    }
}

fn write_binary_header<W: Write, H: Serialize>(w: &mut W, magic: [u8; 4], header: &H) -> Result<(), FormatError> {
    let json = serde_json::to_vec(header).expect("header serialises");
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    Ok(())
}

fn read_binary_header<R: Read, H: DeserializeOwned>(
    r: &mut R,
    magic: [u8; 4],
    format: &'static str,
) -> Result<H, FormatError> {
    let mut found = [0u8; 4];
    read_exact_or(r, &mut found, truncated(format, "magic"))?;
    if found != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(&magic).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    let version = read_u32(r, format, "version")?;
    if version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion { format, found: version, supported: FORMAT_VERSION });
    }
    let len = read_u32(r, format, "header length")?;
    if len > MAX_HEADER_LEN {
        return Err(FormatError::Shape { format, detail: format!("header length {len} exceeds limit") });
    }
    let mut json = vec![0u8; len as usize];
    read_exact_or(r, &mut json, truncated(format, "header"))?;
    serde_json::from_slice(&json).map_err(|source| FormatError::Json { format, source })
}

fn read_f32s<R: Read>(r: &mut R, n: usize, on_eof: impl FnOnce() -> FormatError) -> Result<Vec<f32>, FormatError> {
    let mut buf = vec![0u8; n * 4];
    read_exact_or(r, &mut buf, on_eof)?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> io::Result<()> {
    let buf: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&buf)
}

// ---------------------------------------------------------------------------
// Dataset container

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub count: u64,
    pub input_size: u32,
    pub num_classes: u32,
    pub provenance: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_ids: Option<Vec<String>>,
}

const DATASET: &str = "dataset";

pub fn write_dataset<W: Write>(w: &mut W, data: &Dataset) -> Result<(), FormatError> {
    let header = DatasetHeader {
        version: FORMAT_VERSION,
        count: data.len() as u64,
        input_size: data.input_size() as u32,
        num_classes: data.num_classes(),
        provenance: data.provenance().to_string(),
        input_ids: data.explicit_ids().map(<[String]>::to_vec),
    };
    write_binary_header(w, DATASET_MAGIC, &header)?;
    write_f32s(w, data.inputs())?;
    let labels: Vec<u8> = data.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    w.write_all(&labels)?;
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset, FormatError> {
    let header: DatasetHeader = read_binary_header(r, DATASET_MAGIC, DATASET)?;
    if header.version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion {
            format: DATASET,
            found: header.version,
            supported: FORMAT_VERSION,
        });
    }
    let count = usize::try_from(header.count).map_err(|_| FormatError::Shape {
        format: DATASET,
        detail: format!("count {} does not fit in memory", header.count),
    })?;
    let values = count
        .checked_mul(header.input_size as usize)
        .ok_or_else(|| FormatError::Shape { format: DATASET, detail: "count × input_size overflows".into() })?;
    if let Some(ids) = &header.input_ids {
        if ids.len() != count {
            return Err(FormatError::Shape {
                format: DATASET,
                detail: format!("{} input ids for {count} records", ids.len()),
            });
        }
    }
    // Limit up-front allocation by what the stream actually yields.
    let mut payload = Vec::new();
    let want = values as u64 * 4 + count as u64 * 4;
    r.by_ref().take(want).read_to_end(&mut payload)?;
    if (payload.len() as u64) < want {
        return Err(FormatError::Truncated {
            format: DATASET,
            section: format!("payload ({} of {want} bytes)", payload.len()),
        });
    }
    expect_eof(r, DATASET)?;
    let (xs, ls) = payload.split_at(values * 4);
    let inputs = xs.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    let labels = ls.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(Dataset::new(
        header.input_size as usize,
        header.num_classes,
        inputs,
        labels,
        header.input_ids,
        header.provenance,
    )?)
}

// ---------------------------------------------------------------------------
// Trace stream

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub model_id: Digest,
    pub layer_sizes: Vec<u32>,
    pub count: u64,
}

impl TraceHeader {
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layer_sizes.iter().map(|&s| s as usize).collect()
    }

    /// Bytes in a record with an `id_len`-byte input id.
    pub fn record_len(&self, id_len: usize) -> u64 {
        4 + id_len as u64 + 4 * self.layer_sizes.iter().map(|&s| u64::from(s)).sum::<u64>()
    }
}

const TRACE: &str = "trace stream";

/// Writes a trace stream whose record count is fixed up front.
pub struct TraceWriter<W: Write> {
    inner: W,
    header: TraceHeader,
    written: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W, header: TraceHeader) -> Result<Self, FormatError> {
        write_binary_header(&mut inner, TRACE_MAGIC, &header)?;
        Ok(Self { inner, header, written: 0 })
    }

    pub fn write(&mut self, trace: &ActivationTrace) -> Result<(), FormatError> {
        if self.written == self.header.count {
            return Err(FormatError::Shape {
                format: TRACE,
                detail: format!("header declares {} records", self.header.count),
            });
        }
        let sizes: Vec<u32> = trace.layers.iter().map(|l| l.len() as u32).collect();
        if sizes != self.header.layer_sizes {
            return Err(FormatError::Shape {
                format: TRACE,
                detail: format!(
                    "record {} has layer sizes {sizes:?}, header says {:?}",
                    self.written, self.header.layer_sizes
                ),
            });
        }
        let id = trace.input_id.as_bytes();
        self.inner.write_all(&(id.len() as u32).to_le_bytes())?;
        self.inner.write_all(id)?;
        for layer in &trace.layers {
            write_f32s(&mut self.inner, layer)?;
        }
        self.written += 1;
        Ok(())
    }

    /// Checks the declared count was met and returns the sink.
    pub fn finish(mut self) -> Result<W, FormatError> {
        if self.written != self.header.count {
            return Err(FormatError::Shape {
                format: TRACE,
                detail: format!("wrote {} of {} declared records", self.written, self.header.count),
            });
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streams records out of a trace file. After the declared count the
/// iterator checks for trailing bytes, then ends.
pub struct TraceReader<R: Read> {
    inner: R,
    header: TraceHeader,
    sizes: Vec<usize>,
    next: u64,
    done: bool,
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FormatError> {
        let header: TraceHeader = read_binary_header(&mut inner, TRACE_MAGIC, TRACE)?;
        let sizes = header.layer_sizes();
        Ok(Self { inner, header, sizes, next: 0, done: false })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    fn read_record(&mut self) -> Result<ActivationTrace, FormatError> {
        let record = self.next;
        let eof = || FormatError::TruncatedRecord { record };
        let mut len = [0u8; 4];
        read_exact_or(&mut self.inner, &mut len, eof)?;
        let id_len = u32::from_le_bytes(len) as u64;
        let mut id = Vec::new();
        self.inner.by_ref().take(id_len).read_to_end(&mut id)?;
        if (id.len() as u64) < id_len {
            return Err(eof());
        }
        let input_id = String::from_utf8(id).map_err(|_| FormatError::InvalidUtf8 { record })?;
        let mut layers = Vec::with_capacity(self.sizes.len());
        for &n in &self.sizes {
            layers.push(read_f32s(&mut self.inner, n, eof)?);
        }
        Ok(ActivationTrace { input_id, layers })
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<ActivationTrace, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.next == self.header.count {
            self.done = true;
            return match expect_eof(&mut self.inner, TRACE) {
                Ok(()) => None,
                Err(e) => Some(Err(e)),
            };
        }
        let out = self.read_record();
        self.next += 1;
        if out.is_err() {
            self.done = true;
        }
        Some(out)
    }
}

pub fn write_traces<W: Write>(
    w: W,
    model_id: Digest,
    layer_sizes: &[usize],
    traces: &[ActivationTrace],
) -> Result<W, FormatError> {
    let header = TraceHeader {
        model_id,
        layer_sizes: layer_sizes.iter().map(|&s| s as u32).collect(),
        count: traces.len() as u64,
    };
    let mut tw = TraceWriter::new(w, header)?;
    for t in traces {
        tw.write(t)?;
    }
    tw.finish()
}

pub fn read_traces<R: Read>(r: R) -> Result<(TraceHeader, Vec<ActivationTrace>), FormatError> {
    let reader = TraceReader::new(r)?;
    let header = reader.header().clone();
    let traces = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((header, traces))
}

// ---------------------------------------------------------------------------
// JSON documents

#[derive(Deserialize)]
struct Envelope {
    format: String,
    version: u32,
}

fn read_json_document<T: DeserializeOwned>(bytes: &[u8], tag: &'static str) -> Result<T, FormatError> {
    let env: Envelope = serde_json::from_slice(bytes).map_err(|source| FormatError::Json { format: tag, source })?;
    if env.format != tag {
        return Err(FormatError::WrongFormat { expected: tag, found: env.format });
    }
    if env.version != FORMAT_VERSION {
        return Err(FormatError::UnsupportedVersion { format: tag, found: env.version, supported: FORMAT_VERSION });
    }
    serde_json::from_slice(bytes).map_err(|source| FormatError::Json { format: tag, source })
}

fn write_json_document<W: Write, T: Serialize>(w: &mut W, doc: &T) -> Result<(), FormatError> {
    serde_json::to_writer_pretty(&mut *w, doc).map_err(io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub const MODEL_FORMAT: &str = "dnncov-model";
pub const PROFILE_FORMAT: &str = "dnncov-profile";
pub const REPORT_FORMAT: &str = "dnncov-report";

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    kind: LayerKind,
    activation: Activation,
    input_size: usize,
    output_size: usize,
    weights: Vec<Vec<f32>>,
    bias: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    model_id: Digest,
    input_size: usize,
    num_classes: usize,
    layers: Vec<LayerDoc>,
}

pub fn write_model<W: Write>(w: &mut W, model: &Model) -> Result<(), FormatError> {
    let layers = model
        .layers()
        .iter()
        .map(|l| LayerDoc {
            kind: l.kind(),
            activation: l.activation(),
            input_size: l.input_size(),
            output_size: l.output_size(),
            weights: l.weights().data().chunks(l.output_size()).map(<[f32]>::to_vec).collect(),
            bias: l.bias().data().to_vec(),
        })
        .collect();
    let doc = ModelDoc {
        format: MODEL_FORMAT.into(),
        version: FORMAT_VERSION,
        model_id: model.model_id(),
        input_size: model.input_size(),
        num_classes: model.num_classes(),
        layers,
    };
    write_json_document(w, &doc)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<Model, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let doc: ModelDoc = read_json_document(&bytes, MODEL_FORMAT)?;
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, l) in doc.layers.into_iter().enumerate() {
        let shape_err =
            |detail: String| FormatError::Shape { format: MODEL_FORMAT, detail: format!("layer {i}: {detail}") };
        if l.weights.len() != l.input_size || l.weights.iter().any(|row| row.len() != l.output_size) {
            return Err(shape_err(format!("weights are not {}×{}", l.input_size, l.output_size)));
        }
        if l.bias.len() != l.output_size {
            return Err(shape_err(format!("bias has {} entries, expected {}", l.bias.len(), l.output_size)));
        }
        let weights = Tensor::from_rows(&l.weights).map_err(EngineError::from)?;
        let bias = Tensor::row(l.bias).map_err(EngineError::from)?;
        layers.push(match l.kind {
            LayerKind::Dense => LayerSpec::dense(l.activation, weights, bias)?,
        });
    }
    let model = Model::new(layers)?;
    if model.input_size() != doc.input_size || model.num_classes() != doc.num_classes {
        return Err(FormatError::Shape {
            format: MODEL_FORMAT,
            detail: format!(
                "declared {}→{} but layers give {}→{}",
                doc.input_size,
                doc.num_classes,
                model.input_size(),
                model.num_classes()
            ),
        });
    }
    let computed = model.model_id();
    if computed != doc.model_id {
        return Err(FormatError::ModelIdMismatch { stored: doc.model_id, computed });
    }
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct ProfileDoc {
    format: String,
    version: u32,
    model_id: Digest,
    count: u64,
    layers: Vec<Vec<[f32; 2]>>,
}

pub fn write_profile<W: Write>(w: &mut W, profile: &NeuronProfile) -> Result<(), FormatError> {
    let doc = ProfileDoc {
        format: PROFILE_FORMAT.into(),
        version: FORMAT_VERSION,
        model_id: profile.model_id(),
        count: profile.count(),
        layers: profile.layers().iter().map(|l| l.iter().map(|b| [b.low, b.high]).collect()).collect(),
    };
    write_json_document(w, &doc)
}

pub fn read_profile<R: Read>(r: &mut R) -> Result<NeuronProfile, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let doc: ProfileDoc = read_json_document(&bytes, PROFILE_FORMAT)?;
    let layers =
        doc.layers.into_iter().map(|l| l.into_iter().map(|[low, high]| Bounds { low, high }).collect()).collect();
    Ok(NeuronProfile::from_parts(doc.model_id, doc.count, layers)?)
}

#[derive(Serialize, Deserialize)]
struct ReportDoc {
    format: String,
    version: u32,
    #[serde(flatten)]
    report: CoverageReport,
}

pub fn write_report<W: Write>(w: &mut W, report: &CoverageReport) -> Result<(), FormatError> {
    let doc = ReportDoc { format: REPORT_FORMAT.into(), version: FORMAT_VERSION, report: report.clone() };
    write_json_document(w, &doc)
}

pub fn read_report<R: Read>(r: &mut R) -> Result<CoverageReport, FormatError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let doc: ReportDoc = read_json_document(&bytes, REPORT_FORMAT)?;
    if !doc.report.is_consistent() {
        return Err(FormatError::Shape { format: REPORT_FORMAT, detail: "ratios disagree with the raw counts".into() });
    }
    Ok(doc.report)
}

// ---------------------------------------------------------------------------
// Coverage state

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateHeader {
    pub model_id: Digest,
    pub profile_hash: Digest,
    pub config: CoverageConfig,
    pub layer_sizes: Vec<u32>,
    pub inputs_seen: u64,
    pub pattern_count: u64,
}

const STATE: &str = "coverage state";

pub fn write_state<W: Write>(w: &mut W, state: &CoverageState) -> Result<(), FormatError> {
    let parts = state.parts();
    let header = StateHeader {
        model_id: state.model_id(),
        profile_hash: state.profile_hash(),
        config: state.config(),
        layer_sizes: state.layer_sizes().iter().map(|&s| s as u32).collect(),
        inputs_seen: parts.inputs_seen,
        pattern_count: parts.patterns.len() as u64,
    };
    write_binary_header(w, STATE_MAGIC, &header)?;
    for bits in [&parts.sections, &parts.upper, &parts.lower, &parts.topk, &parts.nc] {
        w.write_all(&bits.to_bytes())?;
    }
    for p in &parts.patterns {
        w.write_all(&(p.len() as u32).to_le_bytes())?;
        w.write_all(p)?;
    }
    Ok(())
}

/// Reads a state file without binding it to a profile.
pub fn read_state_raw<R: Read>(r: &mut R) -> Result<(StateHeader, StateParts), FormatError> {
    let header: StateHeader = read_binary_header(r, STATE_MAGIC, STATE)?;
    let n: u64 = header.layer_sizes.iter().map(|&s| u64::from(s)).sum();
    let section_bits = n
        .checked_mul(u64::from(header.config.k_sections))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| FormatError::Shape { format: STATE, detail: "section bitset size overflows".into() })?;
    let n = n as usize;
    let mut read_bits = |len: usize, name: &str| -> Result<BitSet, FormatError> {
        let want = len.div_ceil(8) as u64;
        let mut buf = Vec::new();
        r.by_ref().take(want).read_to_end(&mut buf)?;
        if (buf.len() as u64) < want {
            return Err(FormatError::Truncated { format: STATE, section: format!("{name} bitset") });
        }
        BitSet::from_bytes(len, &buf)
            .ok_or_else(|| FormatError::Shape { format: STATE, detail: format!("{name} bitset has padding bits set") })
    };
    let sections = read_bits(section_bits, "section")?;
    let upper = read_bits(n, "upper-corner")?;
    let lower = read_bits(n, "lower-corner")?;
    let topk = read_bits(n, "top-k")?;
    let nc = read_bits(n, "nc")?;
    let mut patterns = BTreeSet::new();
    let mut prev: Option<Vec<u8>> = None;
    for i in 0..header.pattern_count {
        let section = format!("pattern {i}");
        let len = read_u32(r, STATE, &section)? as u64;
        let mut p = Vec::new();
        r.by_ref().take(len).read_to_end(&mut p)?;
        if (p.len() as u64) < len {
            return Err(FormatError::Truncated { format: STATE, section });
        }
        if prev.as_ref().is_some_and(|q| *q >= p) {
            return Err(FormatError::Shape {
                format: STATE,
                detail: format!("pattern {i} is out of order or duplicated"),
            });
        }
        prev = Some(p.clone());
        patterns.insert(p);
    }
    expect_eof(r, STATE)?;
    Ok((header.clone(), StateParts { sections, upper, lower, topk, nc, patterns, inputs_seen: header.inputs_seen }))
}

/// Reads a state file and binds it to `profile`, which must be the profile
/// the state was accumulated against.
pub fn read_state<R: Read>(r: &mut R, profile: &NeuronProfile) -> Result<CoverageState, FormatError> {
    let (header, parts) = read_state_raw(r)?;
    if header.profile_hash != profile.digest() || header.model_id != profile.model_id() {
        return Err(CoverageError::Binding {
            what: "profile hash",
            left: header.profile_hash.to_string(),
            right: profile.digest().to_string(),
        }
        .into());
    }
    let sizes: Vec<usize> = header.layer_sizes.iter().map(|&s| s as usize).collect();
    if sizes != profile.layer_sizes() {
        return Err(FormatError::Shape {
            format: STATE,
            detail: format!("layer sizes {sizes:?} vs profile {:?}", profile.layer_sizes()),
        });
    }
    Ok(CoverageState::from_parts(profile, header.config, parts)?)
}
