//! CSV and JSON file formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing a
//! file and writing it back reproduces it byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::config::GeneratorConfig;
use crate::detect::{DetectionRecord, DetectorKind};
use crate::error::{Error, Result};
use crate::events::GroundTruth;
use crate::metrics::OsrScores;
use crate::osr::ScoreRecord;
use crate::stream::{Chunk, StreamDataset};

/// Stream metadata stored next to the data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub config: GeneratorConfig,
    pub drift_chunks: Vec<usize>,
    pub novelty_chunks: Vec<usize>,
    pub master_seed: u64,
}

impl Sidecar {
    pub fn of(stream: &StreamDataset) -> Self {
        Self {
            config: stream.config.clone(),
            drift_chunks: stream.ground_truth.drift_chunks.clone(),
            novelty_chunks: stream.ground_truth.novelty_chunks.clone(),
            master_seed: stream.master_seed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("sidecar: {e}")))
    }
}

/// Sidecar path for a data file: `stream.csv` -> `stream.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn flush(mut w: impl Write, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| Error::Parse(format!("bad {what} '{field}'")))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what).map(Some)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn expect_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[String]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "expected header '{}', found '{}'",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// Writes stream rows as `f0..f{d-1},label,chunk` in stream order.
pub fn write_stream_csv<W: Write>(stream: &StreamDataset, out: W) -> Result<()> {
    let d = stream.n_features();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    header.push("chunk".into());
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(d + 2);
    for chunk in &stream.chunks {
        for (row, &label) in chunk.features.outer_iter().zip(&chunk.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(label.to_string());
            record.push(chunk.chunk_index.to_string());
            w.write_record(&record)?;
        }
    }
    w.flush().map_err(|e| Error::io("<stream csv>", e))?;
    Ok(())
}

/// Reads rows written by [`write_stream_csv`] back into chunks.
pub fn read_stream_csv<R: Read>(input: R, sidecar: Sidecar) -> Result<StreamDataset> {
    let mut r = csv::Reader::from_reader(input);
    let d = r.headers()?.len().checked_sub(2).ok_or_else(|| Error::Parse("too few columns".into()))?;
    let mut expected: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    expected.push("label".into());
    expected.push("chunk".into());
    expect_header(&mut r, &expected)?;

    let n_chunks = sidecar.config.n_chunks;
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); n_chunks];
    let mut labels: Vec<Vec<usize>> = vec![Vec::new(); n_chunks];
    let mut last_chunk = 0;
    for rec in r.records() {
        let rec = rec?;
        let chunk: usize = parse(&rec[d + 1], "chunk index")?;
        if chunk >= n_chunks {
            return Err(Error::ChunkOutOfRange { index: chunk, n_chunks });
        }
        if chunk < last_chunk {
            return Err(Error::Parse(format!("chunk {chunk} after chunk {last_chunk}")));
        }
        last_chunk = chunk;
        for j in 0..d {
            values[chunk].push(parse(&rec[j], "feature value")?);
        }
        labels[chunk].push(parse(&rec[d], "label")?);
    }
    let chunks = values
        .into_iter()
        .zip(labels)
        .enumerate()
        .map(|(chunk_index, (v, labels))| {
            let features = Array2::from_shape_vec((labels.len(), d), v).expect("rows of equal width");
            Chunk { chunk_index, features, labels }
        })
        .collect();
    Ok(StreamDataset {
        config: sidecar.config.clone(),
        master_seed: sidecar.master_seed,
        ground_truth: GroundTruth {
            n_chunks,
            drift_chunks: sidecar.drift_chunks,
            novelty_chunks: sidecar.novelty_chunks,
        },
        chunks,
    })
}

/// Writes `data` and its sidecar (same stem, `.json`).
pub fn save_stream(stream: &StreamDataset, data: &Path) -> Result<()> {
    let mut w = create(data)?;
    write_stream_csv(stream, &mut w)?;
    flush(w, data)?;
    let side = sidecar_path(data);
    std::fs::write(&side, Sidecar::of(stream).to_json()).map_err(|e| Error::io(&side, e))
}

pub fn load_stream(data: &Path) -> Result<StreamDataset> {
    let side = sidecar_path(data);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    read_stream_csv(open(data)?, Sidecar::from_json(&text)?)
}

const DETECTION_HEADER: [&str; 4] = ["detector", "param", "seed", "chunk"];

pub fn write_detections<W: Write>(records: &[DetectionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DETECTION_HEADER)?;
    for r in records {
        w.write_record([r.detector.to_string(), r.param.to_string(), r.seed.to_string(), r.chunk.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<detections csv>", e))?;
    Ok(())
}

pub fn read_detections<R: Read>(input: R) -> Result<Vec<DetectionRecord>> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &DETECTION_HEADER.map(String::from))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(DetectionRecord {
                detector: rec[0].parse::<DetectorKind>()?,
                param: parse(&rec[1], "param")?,
                seed: parse(&rec[2], "seed")?,
                chunk: parse(&rec[3], "chunk")?,
            })
        })
        .collect()
}

const SCORE_HEADER: [&str; 7] = ["epsilon", "seed", "chunk", "inner", "outer", "halfpoint", "overall"];

/// Undefined scores are written as empty cells.
pub fn write_scores<W: Write>(records: &[ScoreRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER)?;
    for r in records {
        let s = r.scores;
        w.write_record([
            r.epsilon.to_string(),
            r.seed.to_string(),
            r.chunk.to_string(),
            fmt_opt(s.inner),
            fmt_opt(s.outer),
            fmt_opt(s.halfpoint),
            fmt_opt(s.overall),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<scores csv>", e))?;
    Ok(())
}

pub fn read_scores<R: Read>(input: R) -> Result<Vec<ScoreRecord>> {
    let mut r = csv::Reader::from_reader(input);
    expect_header(&mut r, &SCORE_HEADER.map(String::from))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(ScoreRecord {
                epsilon: parse(&rec[0], "epsilon")?,
                seed: parse(&rec[1], "seed")?,
                chunk: parse(&rec[2], "chunk")?,
                scores: OsrScores {
                    inner: parse_opt(&rec[3], "inner")?,
                    outer: parse_opt(&rec[4], "outer")?,
                    halfpoint: parse_opt(&rec[5], "halfpoint")?,
                    overall: parse_opt(&rec[6], "overall")?,
                },
            })
        })
        .collect()
}

/// Confusion grid with true classes as rows; the last row and column are the
/// unknown class.
pub fn write_confusion<W: Write>(matrix: ArrayView2<u64>, out: W) -> Result<()> {
    let n = matrix.ncols();
    let name = |j: usize| if j + 1 == n { "unknown".to_string() } else { j.to_string() };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["true".to_string()];
    header.extend((0..n).map(name));
    w.write_record(&header)?;
    for (i, row) in matrix.outer_iter().enumerate() {
        let mut rec = vec![name(i)];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<confusion csv>", e))?;
    Ok(())
}

pub fn read_confusion<R: Read>(input: R) -> Result<Array2<u64>> {
    let mut r = csv::Reader::from_reader(input);
    let n = r.headers()?.len().saturating_sub(1);
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for field in rec.iter().skip(1) {
            values.push(parse(field, "count")?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, n), values).map_err(|e| Error::Parse(format!("confusion grid: {e}")))
}

/// Writes CSV produced by `emit` to `path`.
pub fn write_file(path: &Path, emit: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    emit(&mut w)?;
    flush(w, path)
}

pub fn read_file<T>(path: &Path, parse: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    parse(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::generate_stream;

    fn stream() -> StreamDataset {
        generate_stream(&GeneratorConfig {
            n_chunks: 6,
            chunk_size: 20,
            n_drifts: 1,
            n_novel: 1,
            n_features: 3,
            n_informative: 3,
            random_state: Some(9),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn stream_round_trip_is_exact() {
        let s = stream();
        let mut first = Vec::new();
        write_stream_csv(&s, &mut first).unwrap();
        let back = read_stream_csv(first.as_slice(), Sidecar::of(&s)).unwrap();
        assert_eq!(back.chunks, s.chunks);
        let mut second = Vec::new();
        write_stream_csv(&back, &mut second).unwrap();
        assert_eq!(first, second);
        let header = String::from_utf8(first).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "f0,f1,f2,label,chunk");
    }

    #[test]
    fn sidecar_round_trip() {
        let side = Sidecar::of(&stream());
        assert_eq!(Sidecar::from_json(&side.to_json()).unwrap(), side);
    }

    #[test]
    fn awkward_floats_round_trip() {
        for v in [0.1 + 0.2, 1e-300, -0.0, 123_456_789.123_456_79, f64::MIN_POSITIVE, 1.0 / 3.0] {
            let back: f64 = v.to_string().parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn score_round_trip_keeps_empty_cells() {
        let recs = vec![
            ScoreRecord { epsilon: -0.5, seed: 1, chunk: 3, scores: OsrScores { inner: Some(0.75), outer: None, halfpoint: Some(1.0 / 3.0), overall: Some(0.5) } },
            ScoreRecord { epsilon: 3.0, seed: 1, chunk: 4, scores: OsrScores::default() },
        ];
        let mut a = Vec::new();
        write_scores(&recs, &mut a).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with("epsilon,seed,chunk,inner,outer,halfpoint,overall\n-0.5,1,3,0.75,,"), "{text}");
        let back = read_scores(a.as_slice()).unwrap();
        assert_eq!(back, recs);
        let mut b = Vec::new();
        write_scores(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn detection_round_trip() {
        let recs = vec![
            DetectionRecord { detector: DetectorKind::Cddd, param: 0.6388888888888888, seed: 0, chunk: 75 },
            DetectionRecord { detector: DetectorKind::Ocdd, param: 0.3, seed: 9, chunk: 200 },
        ];
        let mut a = Vec::new();
        write_detections(&recs, &mut a).unwrap();
        let back = read_detections(a.as_slice()).unwrap();
        assert_eq!(back, recs);
        let mut b = Vec::new();
        write_detections(&back, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn confusion_round_trip() {
        let m = ndarray::array![[5u64, 1, 0], [0, 7, 2], [1, 0, 4]];
        let mut a = Vec::new();
        write_confusion(m.view(), &mut a).unwrap();
        assert!(String::from_utf8(a.clone()).unwrap().starts_with("true,0,1,unknown\n0,5,1,0\n"));
        assert_eq!(read_confusion(a.as_slice()).unwrap(), m);
    }

    #[test]
    fn bad_header_is_reported() {
        let err = read_scores("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }
}
