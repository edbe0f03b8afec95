use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::chain::{ChainStats, PosteriorSample};
use crate::engine::config::ChainConfig;
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelLayout, PriorSpec};
use crate::real::Real;

pub const TRACE_FORMAT: &str = "dpmnl-trace";
pub const TRACE_VERSION: u32 = 1;

/// First line of a trace file. Every following line is one
/// [`PosteriorSample`] as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub chain: usize,
    pub seed: u64,
    pub config: ChainConfig,
    pub prior: PriorSpec,
    pub layout: ModelLayout,
    pub n_train: usize,
    /// Hex SHA-256 of the training data, see [`data_checksum`].
    pub data_checksum: String,
    pub stats: ChainStats,
}

impl TraceHeader {
    pub fn new<F: Real>(
        data: &Dataset<F>,
        config: &ChainConfig,
        prior: &PriorSpec,
        layout: &ModelLayout,
        chain: usize,
        stats: ChainStats,
    ) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            chain,
            seed: config.seed,
            config: config.clone(),
            prior: prior.clone(),
            layout: layout.clone(),
            n_train: data.n(),
            data_checksum: data_checksum(data),
            stats,
        }
    }
}

/// SHA-256 over the dimensions, labels and the `f64` bit patterns of the
/// covariates, as lowercase hex.
pub fn data_checksum<F: Real>(data: &Dataset<F>) -> String {
    let mut h = Sha256::new();
    for v in [data.n(), data.p(), data.n_classes()] {
        h.update((v as u64).to_le_bytes());
    }
    for i in 0..data.n() {
        h.update((data.label(i) as u64).to_le_bytes());
        for &x in data.row(i) {
            h.update(x.to_f64_lossy().to_bits().to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_trace<F: Real, W: Write>(
    mut out: W,
    header: &TraceHeader,
    samples: &[PosteriorSample<F>],
) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace<F: Real, R: BufRead>(input: R) -> Result<(TraceHeader, Vec<PosteriorSample<F>>)> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::MissingInput("trace file is empty".into()))?;
    let header: TraceHeader = serde_json::from_str(&first?).map_err(|e| Error::Parse {
        line: 1,
        message: format!("trace header: {e}"),
    })?;
    if header.format != TRACE_FORMAT {
        return Err(Error::Parse {
            line: 1,
            message: format!("not a trace file (format {:?})", header.format),
        });
    }
    if header.version != TRACE_VERSION {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported trace version {}", header.version),
        });
    }
    let mut samples = Vec::new();
    for (k, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: PosteriorSample<F> = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        s.state.check_invariants().map_err(|e| Error::Parse {
            line: k + 1,
            message: e.to_string(),
        })?;
        samples.push(s);
    }
    Ok((header, samples))
}
