//! Experiment driver: flat key=value config files, multi-frame runs, the
//! per-frame CSV schema, and end-of-run summaries.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::domain::{validate_config, FrameRecord, SystemConfig};
use crate::engine::{step, LydrooOptions, RunOptions, Scheme, SchemeKind};
use crate::env::EnvState;
use crate::error::{Error, Result};
use crate::metrics::{stability_verdict, StabilityOptions, StabilityVerdict};
use crate::queueing::QueueState;
use crate::scalar::Real;

const SCALAR_KEYS: [&str; 10] = [
    "n_wd",
    "frame_duration",
    "bandwidth",
    "rate_overhead",
    "noise_power",
    "cycles_per_bit",
    "energy_efficiency",
    "lyapunov_v",
    "energy_queue_scale",
    "data_unit",
];
const PER_WD_KEYS: [&str; 6] = [
    "weight",
    "arrival_mean",
    "cpu_max",
    "tx_power_max",
    "power_threshold",
    "distance",
];

/// Parses the flat `key = value` config format. Per-WD keys take either a
/// single value (broadcast) or a comma-separated list of length `n_wd`.
/// Unknown and duplicate keys are errors; omitted keys keep the reference
/// defaults for the given `n_wd`.
pub fn parse_config_str<R: Real>(text: &str) -> Result<SystemConfig<R>> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::ConfigParse {
                line: line_no,
                reason: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim().to_string();
        if !SCALAR_KEYS.contains(&key.as_str()) && !PER_WD_KEYS.contains(&key.as_str()) {
            return Err(Error::ConfigParse {
                line: line_no,
                reason: format!("unknown key '{key}'"),
            });
        }
        if entries.iter().any(|(_, k, _)| *k == key) {
            return Err(Error::ConfigParse {
                line: line_no,
                reason: format!("duplicate key '{key}'"),
            });
        }
        entries.push((line_no, key, value.trim().to_string()));
    }

    let parse_f64 = |line: usize, v: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| Error::ConfigParse {
            line,
            reason: format!("expected a number, got '{v}'"),
        })
    };

    let n_wd = match entries.iter().find(|(_, k, _)| k == "n_wd") {
        Some((line, _, v)) => {
            let n = parse_f64(*line, v)?;
            if n < 1.0 || n.fract() != 0.0 {
                return Err(Error::ConfigParse {
                    line: *line,
                    reason: format!("n_wd must be a positive integer, got '{v}'"),
                });
            }
            n as usize
        }
        None => {
            return Err(Error::ConfigParse {
                line: 0,
                reason: "missing required key 'n_wd'".into(),
            })
        }
    };

    let mut cfg = SystemConfig::<R>::reference(n_wd);
    let mut noise_given = false;
    for (line, key, value) in &entries {
        let line = *line;
        match key.as_str() {
            "n_wd" => {}
            "frame_duration" => cfg.frame_duration = R::of(parse_f64(line, value)?),
            "bandwidth" => cfg.bandwidth = R::of(parse_f64(line, value)?),
            "rate_overhead" => cfg.rate_overhead = R::of(parse_f64(line, value)?),
            "noise_power" => {
                cfg.noise_power = R::of(parse_f64(line, value)?);
                noise_given = true;
            }
            "cycles_per_bit" => cfg.cycles_per_bit = R::of(parse_f64(line, value)?),
            "energy_efficiency" => cfg.energy_efficiency = R::of(parse_f64(line, value)?),
            "lyapunov_v" => cfg.lyapunov_v = R::of(parse_f64(line, value)?),
            "energy_queue_scale" => cfg.energy_queue_scale = R::of(parse_f64(line, value)?),
            "data_unit" => cfg.data_unit = R::of(parse_f64(line, value)?),
            per_wd_key => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|p| parse_f64(line, p.trim()))
                    .collect::<Result<_>>()?;
                if parts.len() != 1 && parts.len() != n_wd {
                    return Err(Error::ConfigParse {
                        line,
                        reason: format!(
                            "'{per_wd_key}' takes 1 or {n_wd} values, got {}",
                            parts.len()
                        ),
                    });
                }
                for i in 0..n_wd {
                    let v = R::of(parts[i.min(parts.len() - 1)]);
                    let wd = &mut cfg.per_wd[i];
                    match per_wd_key {
                        "weight" => wd.weight = v,
                        "arrival_mean" => wd.arrival_mean = v,
                        "cpu_max" => wd.cpu_max = v,
                        "tx_power_max" => wd.tx_power_max = v,
                        "power_threshold" => wd.power_threshold = v,
                        "distance" => wd.distance = v,
                        _ => unreachable!(),
                    }
                }
            }
        }
    }
    if !noise_given {
        cfg.noise_power = crate::domain::default_noise_power(cfg.bandwidth);
    }
    validate_config(cfg)
}

pub fn load_config<R: Real>(path: &Path) -> Result<SystemConfig<R>> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

/// Per-WD column block of the frame CSV, in order.
const WD_COLUMNS: [&str; 11] = [
    "h", "Q", "Y", "x", "tau", "f", "eO", "rO", "D", "e", "A",
];
/// Trailing scheme-level columns.
const TAIL_COLUMNS: [&str; 5] = ["G", "M_t", "m_star", "loss", "decide_ms"];

pub fn csv_header(n: usize) -> String {
    let mut header = String::from("frame");
    for i in 1..=n {
        for col in WD_COLUMNS {
            let _ = write!(header, ",{col}_{i}");
        }
    }
    for col in TAIL_COLUMNS {
        let _ = write!(header, ",{col}");
    }
    header
}

fn csv_row<R: Real>(record: &FrameRecord<R>, n: usize, sequential: bool) -> String {
    let mut row = String::with_capacity(n * 160);
    let _ = write!(row, "{}", record.frame);
    for i in 0..n {
        let _ = write!(
            row,
            ",{},{},{},{},{},{},{},{},{},{},{}",
            record.channel[i],
            record.data_queue_bits[i],
            record.energy_queue[i],
            u8::from(record.action.bits[i]),
            record.allocation.tau[i],
            record.allocation.cpu[i],
            record.allocation.offload_energy[i],
            record.allocation.offload_rate[i],
            record.processed_bits[i],
            record.power[i],
            record.arrivals_bits[i],
        );
    }
    let _ = write!(row, ",{}", record.objective);
    match record.candidate_count {
        Some(m) => {
            let _ = write!(row, ",{m}");
        }
        None => row.push(','),
    }
    match record.best_index_mod {
        Some(m) => {
            let _ = write!(row, ",{m}");
        }
        None => row.push(','),
    }
    match record.training_loss {
        Some(l) => {
            let _ = write!(row, ",{l}");
        }
        None => row.push(','),
    }
    // wall time is inherently nondeterministic; deterministic mode pins the
    // column so same-seed runs are byte-identical
    if sequential {
        row.push_str(",0");
    } else {
        let _ = write!(row, ",{}", record.decide_seconds * 1e3);
    }
    row
}

pub fn write_csv<R: Real, W: Write>(
    out: &mut W,
    records: &[FrameRecord<R>],
    n: usize,
    sequential: bool,
) -> Result<()> {
    writeln!(out, "{}", csv_header(n))?;
    for record in records {
        writeln!(out, "{}", csv_row(record, n, sequential))?;
    }
    Ok(())
}

/// Reads a frame CSV back as (header, rows); empty fields parse as NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::CsvParse {
            line: 1,
            reason: "empty file".into(),
        })??
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|field| {
                if field.is_empty() {
                    Ok(f64::NAN)
                } else {
                    field.parse::<f64>().map_err(|e| Error::CsvParse {
                        line: idx + 2,
                        reason: format!("bad number '{field}': {e}"),
                    })
                }
            })
            .collect::<Result<_>>()?;
        if row.len() != header.len() {
            return Err(Error::CsvParse {
                line: idx + 2,
                reason: format!("expected {} fields, got {}", header.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Parameters of one experiment run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scheme: SchemeKind,
    pub frames: u64,
    pub seed: u64,
    /// Multiplies every per-WD mean arrival rate.
    pub lambda_scale: f64,
    /// Deterministic mode: serial candidate evaluation, pinned timing
    /// column. Same (config, scheme, seed) then reproduce byte-identical
    /// CSV files.
    pub sequential: bool,
}

impl RunConfig {
    pub fn new(scheme: SchemeKind, frames: u64, seed: u64) -> Self {
        RunConfig {
            scheme,
            frames,
            seed,
            lambda_scale: 1.0,
            sequential: false,
        }
    }
}

/// End-of-run aggregate statistics (always reported in f64).
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scheme: &'static str,
    pub frames: u64,
    pub seed: u64,
    pub lambda_scale: f64,
    /// Time-average of `sum_i c_i r_i^t`, bits/s.
    pub avg_weighted_rate_bps: f64,
    /// Time-average power per WD, watts.
    pub per_wd_avg_power: Vec<f64>,
    pub max_avg_power: f64,
    pub mean_total_queue_bits: f64,
    /// Mean total queue over the final quarter of the run, bits.
    pub tail_mean_total_queue_bits: f64,
    pub mean_decide_ms: f64,
    pub stability: Option<StabilityVerdict>,
    pub train_events: usize,
    pub final_training_loss: Option<f64>,
}

impl RunSummary {
    /// Key: value block for standard output.
    pub fn format_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme: {}", self.scheme);
        let _ = writeln!(s, "frames: {}", self.frames);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "lambda_scale: {}", self.lambda_scale);
        let _ = writeln!(s, "avg_weighted_rate_bps: {}", self.avg_weighted_rate_bps);
        let _ = writeln!(s, "max_avg_power_w: {}", self.max_avg_power);
        let _ = writeln!(
            s,
            "per_wd_avg_power_w: {}",
            self.per_wd_avg_power
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "mean_total_queue_bits: {}", self.mean_total_queue_bits);
        let _ = writeln!(
            s,
            "tail_mean_total_queue_bits: {}",
            self.tail_mean_total_queue_bits
        );
        let _ = writeln!(s, "mean_decide_ms: {}", self.mean_decide_ms);
        let _ = writeln!(
            s,
            "stability: {}",
            self.stability.map_or("n/a", |v| v.as_str())
        );
        let _ = writeln!(s, "train_events: {}", self.train_events);
        let _ = writeln!(
            s,
            "final_training_loss: {}",
            self.final_training_loss
                .map_or_else(|| "n/a".into(), |l| l.to_string())
        );
        s
    }
}

/// Total data backlog per frame, bits.
pub fn total_queue_series<R: Real>(records: &[FrameRecord<R>]) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.data_queue_bits.iter().map(|q| q.as_f64()).sum())
        .collect()
}

/// Weighted sum computation rate per frame, bits/s.
pub fn weighted_rate_series<R: Real>(
    records: &[FrameRecord<R>],
    cfg: &SystemConfig<R>,
) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            r.rate
                .iter()
                .zip(&cfg.per_wd)
                .map(|(rate, wd)| rate.as_f64() * wd.weight.as_f64())
                .sum()
        })
        .collect()
}

pub fn summarize<R: Real>(
    records: &[FrameRecord<R>],
    cfg: &SystemConfig<R>,
    rc: &RunConfig,
) -> RunSummary {
    let n = cfg.n_wd;
    let frames = records.len().max(1) as f64;
    let rate_series = weighted_rate_series(records, cfg);
    let queue_series = total_queue_series(records);

    let mut per_wd_avg_power = vec![0.0; n];
    for r in records {
        for i in 0..n {
            per_wd_avg_power[i] += r.power[i].as_f64();
        }
    }
    for p in &mut per_wd_avg_power {
        *p /= frames;
    }
    let tail_start = records.len() - records.len() / 4;
    let tail = &queue_series[tail_start.min(queue_series.len().saturating_sub(1))..];
    let mean_arrival: f64 = cfg.total_arrival_mean().as_f64();

    RunSummary {
        scheme: rc.scheme.as_str(),
        frames: rc.frames,
        seed: rc.seed,
        lambda_scale: rc.lambda_scale,
        avg_weighted_rate_bps: rate_series.iter().sum::<f64>() / frames,
        max_avg_power: per_wd_avg_power.iter().copied().fold(0.0, f64::max),
        per_wd_avg_power,
        mean_total_queue_bits: queue_series.iter().sum::<f64>() / frames,
        tail_mean_total_queue_bits: tail.iter().sum::<f64>() / tail.len().max(1) as f64,
        mean_decide_ms: records
            .iter()
            .map(|r| r.decide_seconds * 1e3)
            .sum::<f64>()
            / frames,
        stability: stability_verdict(&queue_series, mean_arrival, &StabilityOptions::default())
            .ok(),
        train_events: records.iter().filter(|r| r.training_loss.is_some()).count(),
        final_training_loss: records
            .iter()
            .filter_map(|r| r.training_loss.map(|l| l.as_f64()))
            .last(),
    }
}

/// Full run output: the aggregate summary plus every frame record.
pub struct RunOutput<R> {
    pub summary: RunSummary,
    pub records: Vec<FrameRecord<R>>,
}

/// Runs `frames` frames of one scheme and optionally writes the per-frame
/// CSV. Identical (config, scheme, seed) reproduce identical files in
/// sequential mode.
pub fn run_experiment<R: Real>(
    cfg: &SystemConfig<R>,
    rc: &RunConfig,
    out: Option<&Path>,
) -> Result<RunOutput<R>> {
    run_experiment_with(cfg, rc, &LydrooOptions::default(), out)
}

pub fn run_experiment_with<R: Real>(
    cfg: &SystemConfig<R>,
    rc: &RunConfig,
    lydroo: &LydrooOptions<R>,
    out: Option<&Path>,
) -> Result<RunOutput<R>> {
    let mut cfg = validate_config(cfg.clone())?;
    cfg.scale_arrivals(R::of(rc.lambda_scale));

    let opts = RunOptions {
        parallel: !rc.sequential,
        ..RunOptions::default()
    };
    let mut env = EnvState::new(&cfg, rc.seed)?;
    let mut scheme = Scheme::new(rc.scheme, &cfg, rc.seed, lydroo)?;
    let mut queues = QueueState::initial(cfg.n_wd);
    let mut records = Vec::with_capacity(rc.frames as usize);
    for t in 1..=rc.frames {
        let (record, next) = step(&mut scheme, &mut env, &queues, t, &cfg, &opts)?;
        records.push(record);
        queues = next;
    }

    if let Some(path) = out {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_csv(&mut file, &records, cfg.n_wd, rc.sequential)?;
    }
    let summary = summarize(&records, &cfg, rc);
    Ok(RunOutput { summary, records })
}
