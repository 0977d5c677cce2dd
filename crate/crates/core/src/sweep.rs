//! Parallel power × detuning sweeps with per-point persistence and resume.
//!
//! Every grid point is an independent work unit. Workers pull indices from
//! a shared atomic cursor and run the pipeline on one set of inputs
//! generated up front from the master seed, so the heatmap reflects physics
//! only and the outcome does not depend on the worker count. Each finished
//! point is written to `points/<row>_<col>.record` (temp file, then rename);
//! a resumed sweep reloads records whose config fingerprint still matches.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{
    run_experiment_with, training_nmse, Diagnostics, ExperimentConfig, SharedInputs,
};
use crate::heatmap;

pub const POWER_RANGE_DBM: (f64, f64) = (-15.0, 25.0);
pub const DETUNING_RANGE_GHZ: (f64, f64) = (-100.0, 100.0);

/// Evenly spaced axis `start, start + step, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridAxis {
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    /// `n` points spanning `[lo, hi]`; a single point sits at `lo`.
    pub fn spanning(lo: f64, hi: f64, n: usize) -> Result<Self> {
        match n {
            0 => Err(Error::Config("grid axis needs at least one point".into())),
            1 => Ok(Self::single(lo)),
            _ => Ok(Self {
                start: lo,
                stop: hi,
                step: (hi - lo) / (n - 1) as f64,
            }),
        }
    }

    pub fn len(&self) -> usize {
        if self.start == self.stop {
            return 1;
        }
        ((self.stop - self.start) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }

    fn validate(&self, name: &str, range: (f64, f64), allow_out_of_range: bool) -> Result<()> {
        if ![self.start, self.stop, self.step]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::Config(format!("{name} axis must be finite")));
        }
        if self.start != self.stop {
            if self.step <= 0.0 {
                return Err(Error::Config(format!("{name} step must be positive")));
            }
            if self.stop < self.start {
                return Err(Error::Config(format!("{name} stop is below start")));
            }
            let span = (self.stop - self.start) / self.step;
            if (span - span.round()).abs() > 1e-9 * span.max(1.0) {
                return Err(Error::Config(format!(
                    "{name} range is not a whole number of steps"
                )));
            }
        }
        let (lo, hi) = range;
        if !allow_out_of_range && (self.start < lo || self.stop > hi) {
            return Err(Error::Config(format!(
                "{name} grid [{}, {}] leaves [{lo}, {hi}]; enable out-of-range grids to override",
                self.start, self.stop
            )));
        }
        Ok(())
    }
}

/// Grid definition and execution settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub power_dbm: GridAxis,
    pub detuning_ghz: GridAxis,
    pub base: ExperimentConfig,
    pub workers: usize,
    /// Where point records and exports go; `None` keeps everything in memory.
    pub out_dir: Option<PathBuf>,
    pub resume: bool,
    pub allow_out_of_range: bool,
}

impl SweepSpec {
    /// 9 × 9 grid: 5 dB by 25 GHz.
    pub fn desk(base: ExperimentConfig) -> Self {
        Self::with_shape(base, 9, 9).expect("static grid")
    }

    /// 41 × 41 grid: 1 dB by 5 GHz.
    pub fn full(base: ExperimentConfig) -> Self {
        Self::with_shape(base, 41, 41).expect("static grid")
    }

    /// `powers × detunings` points spanning the standard ranges. A
    /// one-point axis uses the base config's own value.
    pub fn with_shape(base: ExperimentConfig, powers: usize, detunings: usize) -> Result<Self> {
        let axis = |n, (lo, hi), own| {
            if n == 1 {
                Ok(GridAxis::single(own))
            } else {
                GridAxis::spanning(lo, hi, n)
            }
        };
        Ok(Self {
            power_dbm: axis(powers, POWER_RANGE_DBM, base.power_dbm)?,
            detuning_ghz: axis(detunings, DETUNING_RANGE_GHZ, base.detuning_ghz)?,
            base,
            workers: 1,
            out_dir: None,
            resume: false,
            allow_out_of_range: false,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.power_dbm.len(), self.detuning_ghz.len())
    }

    pub fn validate(&self) -> Result<()> {
        self.power_dbm
            .validate("power", POWER_RANGE_DBM, self.allow_out_of_range)?;
        self.detuning_ghz
            .validate("detuning", DETUNING_RANGE_GHZ, self.allow_out_of_range)?;
        self.base.validate()
    }

    /// Config of grid point `(row, col)`.
    pub fn point_config(&self, row: usize, col: usize) -> ExperimentConfig {
        ExperimentConfig {
            power_dbm: self.power_dbm.start + row as f64 * self.power_dbm.step,
            detuning_ghz: self.detuning_ghz.start + col as f64 * self.detuning_ghz.step,
            ..self.base.clone()
        }
    }
}

/// Parses `RxC` (e.g. `9x9`).
pub fn parse_grid_shape(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("grid shape `{s}` is not of the form RxC"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Failed,
}

impl PointStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Failed => "failed",
        }
    }
}

/// One grid point; failed points are kept as first-class records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub row: usize,
    pub col: usize,
    pub power_dbm: f64,
    pub detuning_ghz: f64,
    pub status: PointStatus,
    pub nmse_test: Option<f64>,
    pub nmse_train: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub error: Option<String>,
    pub fingerprint: String,
    pub wall_time_s: f64,
}

/// The part of a point that reaches `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub power_dbm: f64,
    pub detuning_ghz: f64,
    pub nmse_test: Option<f64>,
    pub nmse_train: Option<f64>,
    pub status: PointStatus,
}

impl From<&PointRecord> for GridRow {
    fn from(p: &PointRecord) -> Self {
        Self {
            power_dbm: p.power_dbm,
            detuning_ghz: p.detuning_ghz,
            nmse_test: p.nmse_test,
            nmse_train: p.nmse_train,
            status: p.status,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub power_dbm: f64,
    pub detuning_ghz: f64,
    pub nmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub powers: Vec<f64>,
    pub detunings: Vec<f64>,
    /// Row-major (power-major) point records; `None` where a sweep was
    /// stopped before reaching the point.
    pub points: Vec<Option<PointRecord>>,
    /// Points reloaded from disk instead of computed.
    pub resumed: usize,
    pub computed: usize,
    pub wall_time_s: f64,
}

impl SweepResult {
    pub fn is_complete(&self) -> bool {
        self.points.iter().all(Option::is_some)
    }

    pub fn records(&self) -> impl Iterator<Item = &PointRecord> {
        self.points.iter().flatten()
    }

    pub fn rows(&self) -> Vec<GridRow> {
        self.records().map(GridRow::from).collect()
    }

    pub fn failed(&self) -> usize {
        self.records()
            .filter(|p| p.status == PointStatus::Failed)
            .count()
    }

    /// Successful points whose NMSE is within `factor` of the best.
    pub fn count_within(&self, factor: f64) -> usize {
        match find_best(self) {
            Ok(best) => self
                .records()
                .filter_map(|p| p.nmse_test)
                .filter(|v| *v <= factor * best.nmse)
                .count(),
            Err(_) => 0,
        }
    }
}

/// Limits on one sweep invocation; used to stop early (for example to
/// exercise resume) without killing the process.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepControl {
    /// Compute at most this many new points, then return.
    pub max_new_points: Option<usize>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, SweepControl::default())
}

pub fn run_sweep_with(spec: &SweepSpec, control: SweepControl) -> Result<SweepResult> {
    let start = Instant::now();
    spec.validate()?;
    let (rows, cols) = spec.shape();
    let total = rows * cols;
    let inputs = SharedInputs::generate(&spec.base).map_err(|e| e.at("inputs"))?;

    let points_dir = spec.out_dir.as_ref().map(|d| d.join("points"));
    if let Some(dir) = &points_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_snapshot(spec)?;
    }

    let mut slots: Vec<Option<PointRecord>> = vec![None; total];
    let mut resumed = 0;
    if spec.resume {
        if let Some(dir) = &points_dir {
            for (idx, slot) in slots.iter_mut().enumerate() {
                let (r, c) = (idx / cols, idx % cols);
                if let Some(rec) = load_record(dir, r, c, &spec.point_config(r, c).fingerprint()) {
                    *slot = Some(rec);
                    resumed += 1;
                }
            }
        }
    }
    if resumed > 0 {
        log::info!("resume: {resumed} of {total} points already complete");
    }

    let pending: Vec<usize> = (0..total).filter(|&i| slots[i].is_none()).collect();
    let budget = control
        .max_new_points
        .unwrap_or(usize::MAX)
        .min(pending.len());
    let workers = spec.workers.max(1).min(budget.max(1));
    let cursor = AtomicUsize::new(0);
    let completion = Mutex::new(slots);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = cursor.fetch_add(1, Ordering::Relaxed);
                if k >= budget {
                    break;
                }
                let idx = pending[k];
                let (r, c) = (idx / cols, idx % cols);
                let record = evaluate_point(spec, &inputs, r, c);
                if let Some(dir) = &points_dir {
                    if let Err(e) = persist_record(dir, &record) {
                        first_error.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
                completion.lock().unwrap()[idx] = Some(record);
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }

    let points = completion.into_inner().unwrap();
    let computed = points.iter().flatten().count() - resumed;
    Ok(SweepResult {
        powers: spec.power_dbm.values(),
        detunings: spec.detuning_ghz.values(),
        points,
        resumed,
        computed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn evaluate_point(spec: &SweepSpec, inputs: &SharedInputs, row: usize, col: usize) -> PointRecord {
    let config = spec.point_config(row, col);
    let started = Instant::now();
    let outcome = run_experiment_with(&config, inputs);
    let mut record = PointRecord {
        row,
        col,
        power_dbm: config.power_dbm,
        detuning_ghz: config.detuning_ghz,
        status: PointStatus::Ok,
        nmse_test: None,
        nmse_train: None,
        diagnostics: None,
        error: None,
        fingerprint: config.fingerprint(),
        wall_time_s: 0.0,
    };
    match outcome {
        Ok(r) => {
            record.nmse_test = Some(r.nmse_test);
            record.nmse_train = Some(r.nmse_train);
            record.diagnostics = Some(r.diagnostics);
            log::info!(
                "point ({row},{col}) P={} dBm dF={} GHz: nmse {:.4e}",
                config.power_dbm,
                config.detuning_ghz,
                r.nmse_test
            );
        }
        Err(e) => {
            log::warn!("point ({row},{col}) failed: {e}");
            record.status = PointStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record.wall_time_s = started.elapsed().as_secs_f64();
    record
}

fn record_path(dir: &Path, row: usize, col: usize) -> PathBuf {
    dir.join(format!("{row}_{col}.record"))
}

/// Writes to a temp file in the same directory and renames over the final
/// name, so a reader never sees a partial record.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn persist_record(dir: &Path, record: &PointRecord) -> Result<()> {
    let json = serde_json::to_vec_pretty(record)?;
    write_atomic(&record_path(dir, record.row, record.col), &json)
}

fn load_record(dir: &Path, row: usize, col: usize, fingerprint: &str) -> Option<PointRecord> {
    let path = record_path(dir, row, col);
    let bytes = fs::read(&path).ok()?;
    match serde_json::from_slice::<PointRecord>(&bytes) {
        Ok(rec) if rec.fingerprint == fingerprint && rec.row == row && rec.col == col => Some(rec),
        Ok(_) => {
            log::info!("{}: config changed, recomputing", path.display());
            None
        }
        Err(e) => {
            log::warn!("{}: unreadable record ({e}), recomputing", path.display());
            None
        }
    }
}

/// Applies `f` to `0..n` on up to `workers` threads; results come back in
/// index order whatever the scheduling.
fn parallel_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let cursor = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(n.max(1)) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                out.lock().unwrap()[i] = Some(v);
            });
        }
    });
    out.into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("every index visited"))
        .collect()
}

/// One β for the whole sweep: each candidate is scored by its lowest
/// training NMSE over the grid and the lowest score wins (earlier grid
/// entry on ties). Only training data is simulated, so the choice never
/// sees test targets.
pub fn optimize_beta_on_grid(spec: &SweepSpec, betas: &[f64]) -> Result<(f64, f64)> {
    spec.validate()?;
    if betas.is_empty() {
        return Err(Error::InvalidParameter("beta grid is empty".into()));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "beta {b} must be non-negative"
        )));
    }
    let inputs = SharedInputs::generate(&spec.base).map_err(|e| e.at("inputs"))?;
    let (rows, cols) = spec.shape();
    let mut best: Option<(f64, f64)> = None;
    let mut failures = Vec::new();
    for &beta in betas {
        let scores = parallel_map(rows * cols, spec.workers, |idx| {
            let config = ExperimentConfig {
                beta,
                ..spec.point_config(idx / cols, idx % cols)
            };
            training_nmse(&config, &inputs)
        });
        let score = scores
            .iter()
            .filter_map(|s| s.as_ref().ok())
            .copied()
            .fold(f64::INFINITY, f64::min);
        if score.is_finite() {
            log::info!("beta {beta}: best training nmse {score:.4e}");
            if best.is_none_or(|(_, s)| score < s) {
                best = Some((beta, score));
            }
        } else {
            let first = scores
                .into_iter()
                .find_map(|s| s.err())
                .map(|e| e.to_string())
                .unwrap_or_default();
            failures.push(format!("beta={beta}: {first}"));
        }
    }
    best.ok_or_else(|| Error::AllBetasFailed(failures.join("; ")))
}

/// Argmin of test NMSE over successful points; ties go to the lower
/// power, then the smaller |detuning|.
pub fn find_best(result: &SweepResult) -> Result<BestPoint> {
    best_of_rows(&result.rows())
}

pub fn best_of_rows(rows: &[GridRow]) -> Result<BestPoint> {
    rows.iter()
        .filter(|r| r.status == PointStatus::Ok)
        .filter_map(|r| {
            r.nmse_test.map(|nmse| BestPoint {
                power_dbm: r.power_dbm,
                detuning_ghz: r.detuning_ghz,
                nmse,
            })
        })
        .min_by(|a, b| {
            a.nmse
                .total_cmp(&b.nmse)
                .then(a.power_dbm.total_cmp(&b.power_dbm))
                .then(a.detuning_ghz.abs().total_cmp(&b.detuning_ghz.abs()))
        })
        .ok_or(Error::NoSuccessfulPoint)
}

#[derive(Serialize)]
struct Snapshot<'a> {
    power_dbm: &'a GridAxis,
    detuning_ghz: &'a GridAxis,
    experiment: &'a ExperimentConfig,
}

fn write_snapshot(spec: &SweepSpec) -> Result<()> {
    let Some(dir) = &spec.out_dir else {
        return Ok(());
    };
    let text = toml::to_string(&Snapshot {
        power_dbm: &spec.power_dbm,
        detuning_ghz: &spec.detuning_ghz,
        experiment: &spec.base,
    })
    .map_err(|e| Error::Config(format!("cannot serialize config snapshot: {e}")))?;
    write_atomic(&dir.join("config.snapshot"), text.as_bytes())
}

#[derive(Serialize)]
struct Meta<'a> {
    experiment: &'a ExperimentConfig,
    power_dbm: &'a GridAxis,
    detuning_ghz: &'a GridAxis,
    seeds: Seeds,
    best: Option<BestPoint>,
    points: usize,
    failed: usize,
    computed: usize,
    resumed: usize,
    workers: usize,
    wall_time_s: f64,
    point_time_s: f64,
}

#[derive(Serialize)]
struct Seeds {
    master: u64,
    input: u64,
    masks: Vec<u64>,
}

/// Which files [`export_results`] writes.
#[derive(Debug, Clone, Copy)]
pub struct ExportFormats {
    pub csv: bool,
    pub meta: bool,
    pub svg: bool,
}

impl Default for ExportFormats {
    fn default() -> Self {
        Self {
            csv: true,
            meta: true,
            svg: true,
        }
    }
}

/// Writes `results.csv`, `result.meta` and `heatmap.svg` into `dir`.
pub fn export_results(
    spec: &SweepSpec,
    result: &SweepResult,
    dir: &Path,
    formats: ExportFormats,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = result.rows();
    if formats.csv {
        write_atomic(&dir.join("results.csv"), results_csv(&rows)?.as_bytes())?;
    }
    if formats.meta {
        let base = &spec.base;
        let meta = Meta {
            experiment: base,
            power_dbm: &spec.power_dbm,
            detuning_ghz: &spec.detuning_ghz,
            seeds: Seeds {
                master: base.master_seed,
                input: base.input_seed(),
                masks: (0..base.pump_count()).map(|i| base.mask_seed(i)).collect(),
            },
            best: find_best(result).ok(),
            points: rows.len(),
            failed: result.failed(),
            computed: result.computed,
            resumed: result.resumed,
            workers: spec.workers,
            wall_time_s: result.wall_time_s,
            point_time_s: result.records().map(|p| p.wall_time_s).sum(),
        };
        write_atomic(&dir.join("result.meta"), &serde_json::to_vec_pretty(&meta)?)?;
    }
    if formats.svg {
        write_atomic(&dir.join("heatmap.svg"), heatmap::render(&rows)?.as_bytes())?;
    }
    Ok(())
}

/// CSV text with floats in shortest round-trip form; failed points leave
/// the NMSE fields empty.
pub fn results_csv(rows: &[GridRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "power_dbm",
        "detuning_ghz",
        "nmse_test",
        "nmse_train",
        "status",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.power_dbm.to_string(),
            r.detuning_ghz.to_string(),
            opt(r.nmse_test),
            opt(r.nmse_train),
            r.status.as_str().to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn load_results_csv(path: &Path) -> Result<Vec<GridRow>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<GridRow>, _>>()?;
    Ok(rows)
}
