//! Collected post-burn-in snapshots and their on-disk format.
//!
//! A trace is persisted as two files: a CSV with header
//! `iter,wall_s,particle,dim_0,…,dim_{d-1}` holding one row per particle per
//! snapshot, and a JSON sidecar ([`TraceMeta`]) with the config fingerprint,
//! seed, jitter statistics and bandwidth summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: u64,
    /// Seconds since the start of the run (monotonic clock).
    pub wall_s: f64,
    pub particles: Array2<f64>,
}

/// Running summary of a per-step scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub count: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub last: f64,
}

impl ScalarSummary {
    pub fn push(&mut self, v: f64) {
        if self.count == 0 {
            self.min = v;
            self.max = v;
            self.mean = 0.0;
        }
        self.count += 1;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.mean += (v - self.mean) / self.count as f64;
        self.last = v;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterStats {
    pub steps: u64,
    pub steps_with_jitter: u64,
    pub max: f64,
}

impl JitterStats {
    pub fn push(&mut self, jitter: f64) {
        self.steps += 1;
        if jitter > 0.0 {
            self.steps_with_jitter += 1;
        }
        self.max = self.max.max(jitter);
    }
}

/// Sidecar metadata stored next to the snapshot CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config_fingerprint: String,
    pub seed: u64,
    pub method: String,
    pub target: String,
    pub particle_count: usize,
    pub dim: usize,
    pub total_iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    /// Wall-clock stamp at the end of burn-in.
    pub post_burn_in_start_s: f64,
    pub jitter: JitterStats,
    /// Kernel bandwidth per step; empty for runs without an RBF kernel.
    pub bandwidth: ScalarSummary,
    /// Free-form run context, e.g. the experiment config that produced it.
    #[serde(default)]
    pub context: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStore {
    meta: TraceMeta,
    snapshots: Vec<Snapshot>,
}

impl TraceStore {
    pub fn new(meta: TraceMeta) -> Self {
        TraceStore {
            meta,
            snapshots: Vec::new(),
        }
    }

    /// Appends a snapshot; iterations must be strictly increasing and every
    /// snapshot must have the trace's shape.
    pub fn push(&mut self, snapshot: Snapshot) -> Result<()> {
        let (k, d) = snapshot.particles.dim();
        if k != self.meta.particle_count || d != self.meta.dim {
            return Err(Error::argument(format!(
                "snapshot has shape {k}×{d}, trace expects {}×{}",
                self.meta.particle_count, self.meta.dim
            )));
        }
        if let Some(last) = self.snapshots.last() {
            if snapshot.iteration <= last.iteration {
                return Err(Error::argument(format!(
                    "snapshot iteration {} does not follow {}",
                    snapshot.iteration, last.iteration
                )));
            }
        }
        self.snapshots.push(snapshot);
        Ok(())
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut TraceMeta {
        &mut self.meta
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn particle_count(&self) -> usize {
        self.meta.particle_count
    }

    pub fn dim(&self) -> usize {
        self.meta.dim
    }

    pub fn last(&self) -> Option<ArrayView2<'_, f64>> {
        self.snapshots.last().map(|s| s.particles.view())
    }

    /// Coordinate `coord` of particle `particle` across snapshots.
    pub fn particle_series(&self, particle: usize, coord: usize) -> Vec<f64> {
        self.snapshots
            .iter()
            .map(|s| s.particles[[particle, coord]])
            .collect()
    }

    /// Every collected sample (all particles of all snapshots).
    pub fn samples(&self) -> impl Iterator<Item = ArrayView2<'_, f64>> + '_ {
        self.snapshots.iter().map(|s| s.particles.view())
    }

    /// Wall-clock seconds between the end of burn-in and the last snapshot.
    pub fn post_burn_in_seconds(&self) -> f64 {
        self.snapshots
            .last()
            .map(|s| (s.wall_s - self.meta.post_burn_in_start_s).max(0.0))
            .unwrap_or(0.0)
    }

    /// Sets every wall-clock stamp to zero, leaving only the deterministic
    /// content of the run.
    pub fn without_timing(mut self) -> Self {
        self.meta.post_burn_in_start_s = 0.0;
        for s in &mut self.snapshots {
            s.wall_s = 0.0;
        }
        self
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "wall_s".into(), "particle".into()];
        header.extend((0..self.dim()).map(|c| format!("dim_{c}")));
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.snapshots {
            for (p, row) in s.particles.rows().into_iter().enumerate() {
                let mut rec = vec![s.iteration.to_string(), s.wall_s.to_string(), p.to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    /// Reads the snapshot CSV. `meta` supplies the sidecar; its shape fields
    /// must agree with the CSV.
    pub fn read_csv<R: std::io::Read>(input: R, meta: TraceMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let dim = headers.len().saturating_sub(3);
        if headers.len() < 4
            || &headers[0] != "iter"
            || &headers[1] != "wall_s"
            || &headers[2] != "particle"
            || (0..dim).any(|c| headers[3 + c] != format!("dim_{c}"))
        {
            return Err(Error::Parse(
                "trace CSV header must be iter,wall_s,particle,dim_0..dim_{d-1}".into(),
            ));
        }
        if dim != meta.dim {
            return Err(Error::Parse(format!(
                "trace CSV has {dim} coordinates, sidecar says {}",
                meta.dim
            )));
        }
        let k = meta.particle_count;
        let mut store = TraceStore::new(meta);
        let mut current: Option<(u64, f64, Vec<f64>)> = None;
        let mut expected_particle = 0usize;
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let offset = rec.position().map(|p| p.byte()).unwrap_or(0);
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| {
                    Error::Parse(format!(
                        "trace CSV: missing field {i} at byte offset {offset}"
                    ))
                })
            };
            let parse_err = |what: &str, v: &str| {
                Error::Parse(format!(
                    "trace CSV: bad {what} `{v}` at byte offset {offset}"
                ))
            };
            let iter: u64 = field(0)?.parse().map_err(|_| parse_err("iter", &rec[0]))?;
            let wall: f64 = field(1)?
                .parse()
                .map_err(|_| parse_err("wall_s", &rec[1]))?;
            let particle: usize = field(2)?
                .parse()
                .map_err(|_| parse_err("particle", &rec[2]))?;
            if particle != expected_particle {
                return Err(Error::Parse(format!(
                    "trace CSV: expected particle {expected_particle}, found {particle} at byte offset {offset}"
                )));
            }
            let mut values = Vec::with_capacity(dim);
            for c in 0..dim {
                let v = field(3 + c)?;
                values.push(v.parse::<f64>().map_err(|_| parse_err("coordinate", v))?);
            }
            let buf = match current.as_mut() {
                Some((it, _, buf)) if *it == iter && particle > 0 => buf,
                _ => {
                    if particle != 0 {
                        return Err(Error::Parse(format!(
                            "trace CSV: snapshot {iter} does not start at particle 0 (byte offset {offset})"
                        )));
                    }
                    current = Some((iter, wall, Vec::with_capacity(k * dim)));
                    &mut current.as_mut().unwrap().2
                }
            };
            buf.extend(values);
            expected_particle += 1;
            if expected_particle == k {
                let (it, wall, buf) = current.take().unwrap();
                let particles = Array2::from_shape_vec((k, dim), buf)
                    .map_err(|e| Error::Parse(e.to_string()))?;
                store
                    .push(Snapshot {
                        iteration: it,
                        wall_s: wall,
                        particles,
                    })
                    .map_err(|e| Error::Parse(format!("{e} (byte offset {offset})")))?;
                expected_particle = 0;
            }
        }
        if current.is_some() {
            return Err(Error::Parse(
                "trace CSV ends with an incomplete snapshot".into(),
            ));
        }
        Ok(store)
    }

    /// Writes `<dir>/trace.csv` and `<dir>/trace.json`.
    pub fn save(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("trace.csv");
        let json_path = dir.join("trace.json");
        let f = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(BufWriter::new(f))?;
        let mut f = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
        serde_json::to_writer_pretty(&mut f, &self.meta)
            .map_err(|e| Error::Parse(e.to_string()))?;
        f.write_all(b"\n").map_err(|e| Error::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }

    /// Loads a trace CSV and its sidecar. The sidecar defaults to the CSV
    /// path with a `.json` extension.
    pub fn load(csv_path: &Path, sidecar: Option<&Path>) -> Result<Self> {
        let sidecar = sidecar
            .map(Path::to_path_buf)
            .unwrap_or_else(|| csv_path.with_extension("json"));
        let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let meta: TraceMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", sidecar.display())))?;
        let f = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
        Self::read_csv(std::io::BufReader::new(f), meta)
    }
}

fn csv_err(e: csv::Error) -> Error {
    let at = e
        .position()
        .map(|p| format!(" at byte offset {}", p.byte()))
        .unwrap_or_default();
    Error::Parse(format!("trace CSV: {e}{at}"))
}

#[cfg(test)]
pub(crate) fn test_meta(particle_count: usize, dim: usize) -> TraceMeta {
    TraceMeta {
        config_fingerprint: String::new(),
        seed: 0,
        method: "sgld_r".into(),
        target: "test".into(),
        particle_count,
        dim,
        total_iterations: 0,
        burn_in: 0,
        thin: 1,
        post_burn_in_start_s: 0.0,
        jitter: JitterStats::default(),
        bandwidth: ScalarSummary::default(),
        context: serde_json::Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_store() -> TraceStore {
        let mut t = TraceStore::new(test_meta(2, 2));
        t.push(Snapshot {
            iteration: 10,
            wall_s: 0.5,
            particles: array![[0.1, -2.5], [3.0, 1e-9]],
        })
        .unwrap();
        t.push(Snapshot {
            iteration: 20,
            wall_s: 0.75,
            particles: array![[1.0 / 3.0, 2.0], [-0.0, 7.25]],
        })
        .unwrap();
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample_store();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,wall_s,particle,dim_0,dim_1\n"));
        assert_eq!(text.lines().count(), 5);
        let back = TraceStore::read_csv(buf.as_slice(), test_meta(2, 2)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn iterations_must_increase() {
        let mut t = sample_store();
        let err = t.push(Snapshot {
            iteration: 20,
            wall_s: 1.0,
            particles: Array2::zeros((2, 2)),
        });
        assert!(err.is_err());
        let err = t.push(Snapshot {
            iteration: 30,
            wall_s: 1.0,
            particles: Array2::zeros((3, 2)),
        });
        assert!(err.is_err());
    }

    #[test]
    fn corrupt_csv_reports_byte_offset() {
        let text = "iter,wall_s,particle,dim_0\n1,0.0,0,1.5\n2,0.1,0,oops\n";
        let err = TraceStore::read_csv(text.as_bytes(), test_meta(1, 1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("byte offset 39"), "{msg}");
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let text = "iter,wall_s,particle,dim_0\n1,0.0,0,1.5\n";
        assert!(TraceStore::read_csv(text.as_bytes(), test_meta(2, 1)).is_err());
        let bad_header = "iteration,wall,particle,x\n";
        assert!(TraceStore::read_csv(bad_header.as_bytes(), test_meta(1, 1)).is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample_store();
        let (csv_path, _) = t.save(dir.path()).unwrap();
        let back = TraceStore::load(&csv_path, None).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn scalar_summary() {
        let mut s = ScalarSummary::default();
        for v in [2.0, 4.0, 3.0] {
            s.push(v);
        }
        assert_eq!(
            (s.count, s.min, s.max, s.mean, s.last),
            (3, 2.0, 4.0, 3.0, 3.0)
        );
    }
}
