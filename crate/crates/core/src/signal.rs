//! Task generation, masking, drive construction and photodetection.
//!
//! Time runs on the solver grid: solver step `k` belongs to symbol
//! `k / steps_per_symbol` and, within it, to chip (virtual node)
//! `(k % steps_per_symbol) / steps_per_chip`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cavity::PortRecord;
use crate::error::{Error, Result};
use crate::rng::UniformStream;

/// Upper end of the input and mask distributions.
pub const UNIFORM_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    pub u: Vec<f64>,
    pub seed: u64,
}

impl InputSequence {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// i.i.d. draws on `[0, 0.5]` from the portable generator.
pub fn gen_input_sequence(seed: u64, length: usize) -> Result<InputSequence> {
    if length == 0 {
        return Err(Error::InvalidParameter(
            "input length must be positive".into(),
        ));
    }
    let mut rng = UniformStream::new(seed);
    let u = (0..length).map(|_| rng.next_below(UNIFORM_MAX)).collect();
    Ok(InputSequence { u, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Narma10,
    LagRecall(usize),
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Narma10 => write!(f, "narma10"),
            TaskKind::LagRecall(k) => write!(f, "lag_recall({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskTarget {
    pub y: Vec<f64>,
    pub kind: TaskKind,
}

/// Largest |y| accepted from the NARMA-10 recurrence.
const NARMA_LIMIT: f64 = 10.0;

/// Tenth-order NARMA target:
/// `y(n+1) = 0.3·y(n) + 0.05·y(n)·Σ_{j=0..9} y(n−j) + 1.5·u(n−9)·u(n) + 0.1`,
/// with `y(0..9) = 0`.
pub fn gen_narma10(input: &InputSequence) -> Result<TaskTarget> {
    let u = &input.u;
    if u.len() < 11 {
        return Err(Error::InvalidParameter(format!(
            "NARMA-10 needs at least 11 symbols, got {}",
            u.len()
        )));
    }
    let mut y = vec![0.0; u.len()];
    for n in 9..u.len() - 1 {
        let window: f64 = y[n - 9..=n].iter().sum();
        let next = 0.3 * y[n] + 0.05 * y[n] * window + 1.5 * u[n - 9] * u[n] + 0.1;
        if !(next.abs() <= NARMA_LIMIT) {
            return Err(Error::NarmaDivergence {
                index: n + 1,
                value: next,
            });
        }
        y[n + 1] = next;
    }
    Ok(TaskTarget {
        y,
        kind: TaskKind::Narma10,
    })
}

/// `y(n) = u(n − k)`, zero for `n < k`.
pub fn gen_lag_recall(input: &InputSequence, k: usize) -> TaskTarget {
    let u = &input.u;
    let y = (0..u.len())
        .map(|n| if n >= k { u[n - k] } else { 0.0 })
        .collect();
    TaskTarget {
        y,
        kind: TaskKind::LagRecall(k),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub m: Vec<f64>,
    pub seed: u64,
}

/// `n` i.i.d. chips on `[0, 0.5]`.
pub fn gen_mask(seed: u64, n: usize) -> Result<Mask> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "mask needs at least one chip".into(),
        ));
    }
    let mut rng = UniformStream::new(seed);
    Ok(Mask {
        m: (0..n).map(|_| rng.next_below(UNIFORM_MAX)).collect(),
        seed,
    })
}

/// One wavelength channel of the input layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpChannel {
    pub index: usize,
    /// Delay of this channel's copy of the input, in symbols.
    pub delay_symbols: usize,
    pub mask: Mask,
    /// Fraction of the total average input power carried by this channel.
    pub power_share: f64,
    /// Pump detuning from its resonance, rad/s.
    pub detuning: f64,
}

/// Integer layout of the solver grid within a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolTiming {
    pub steps_per_symbol: usize,
    pub steps_per_chip: usize,
    pub chips: usize,
}

impl SymbolTiming {
    /// Requires `symbol_duration / eta` to be an integer divisible by `chips`.
    pub fn new(symbol_duration: f64, eta: f64, chips: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite())
            || !(symbol_duration > 0.0 && symbol_duration.is_finite())
        {
            return Err(Error::Timing(format!(
                "symbol duration {symbol_duration} s and step {eta} s must be positive"
            )));
        }
        if chips == 0 {
            return Err(Error::Timing("need at least one chip per symbol".into()));
        }
        let ratio = symbol_duration / eta;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio {
            return Err(Error::Timing(format!(
                "symbol duration / step = {ratio} is not an integer"
            )));
        }
        let steps = steps as usize;
        if !steps.is_multiple_of(chips) {
            return Err(Error::Timing(format!(
                "{steps} steps per symbol not divisible by {chips} chips"
            )));
        }
        Ok(Self {
            steps_per_symbol: steps,
            steps_per_chip: steps / chips,
            chips,
        })
    }

    /// `(symbol, chip)` of solver step `k`.
    pub fn locate(&self, k: usize) -> (usize, usize) {
        (
            k / self.steps_per_symbol,
            (k % self.steps_per_symbol) / self.steps_per_chip,
        )
    }

    /// Solver step at which chip `chip` of symbol `symbol` is sampled
    /// (its last step).
    pub fn sample_step(&self, symbol: usize, chip: usize) -> usize {
        symbol * self.steps_per_symbol + (chip + 1) * self.steps_per_chip - 1
    }
}

/// Piecewise-constant optical power of one pump on the solver grid.
///
/// Stored per chip; [`sample`](Self::sample) expands to solver steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveWaveform {
    chip_power: Vec<f64>,
    pub eta: f64,
    pub symbols: usize,
    pub timing: SymbolTiming,
}

impl DriveWaveform {
    pub fn from_chip_powers(chip_power: Vec<f64>, eta: f64, timing: SymbolTiming) -> Result<Self> {
        if !chip_power.len().is_multiple_of(timing.chips) {
            return Err(Error::LengthMismatch(format!(
                "{} chip powers is not a whole number of {}-chip symbols",
                chip_power.len(),
                timing.chips
            )));
        }
        if let Some(bad) = chip_power.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "drive power {bad} is not a non-negative number"
            )));
        }
        Ok(Self {
            symbols: chip_power.len() / timing.chips,
            chip_power,
            eta,
            timing,
        })
    }

    /// A constant-power waveform.
    pub fn constant(power: f64, eta: f64, timing: SymbolTiming, symbols: usize) -> Result<Self> {
        Self::from_chip_powers(vec![power; symbols * timing.chips], eta, timing)
    }

    /// Total number of solver steps.
    pub fn len(&self) -> usize {
        self.symbols * self.timing.steps_per_symbol
    }

    pub fn is_empty(&self) -> bool {
        self.symbols == 0
    }

    pub fn steps_per_symbol(&self) -> usize {
        self.timing.steps_per_symbol
    }

    /// Power at solver step `k`, W.
    pub fn sample(&self, k: usize) -> f64 {
        self.chip_power[k / self.timing.steps_per_chip]
    }

    pub fn chip_powers(&self) -> &[f64] {
        &self.chip_power
    }

    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        let per = self.timing.steps_per_chip;
        self.chip_power
            .iter()
            .flat_map(move |&p| std::iter::repeat_n(p, per))
    }

    pub fn mean_power(&self) -> f64 {
        // Chips have equal length, so the per-step mean is the chip mean.
        self.chip_power.iter().sum::<f64>() / self.chip_power.len() as f64
    }

    pub fn max_power(&self) -> f64 {
        self.chip_power.iter().copied().fold(0.0, f64::max)
    }
}

/// Builds one pump's drive: `u(n − τ)·m(j) + β` per chip, with `u = 0`
/// before the sequence starts, scaled so its mean power is
/// `total_power · power_share`.
pub fn build_drive(
    u: &[f64],
    channel: &PumpChannel,
    beta: f64,
    total_power: f64,
    symbol_duration: f64,
    eta: f64,
) -> Result<DriveWaveform> {
    let timing = SymbolTiming::new(symbol_duration, eta, channel.mask.m.len())?;
    if !(total_power >= 0.0 && total_power.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "total power must be non-negative, got {total_power}"
        )));
    }
    if !(0.0..=1.0).contains(&channel.power_share) {
        return Err(Error::InvalidParameter(format!(
            "power share {} outside [0, 1]",
            channel.power_share
        )));
    }
    let tau = channel.delay_symbols;
    let mut raw = Vec::with_capacity(u.len() * timing.chips);
    for n in 0..u.len() {
        let un = if n >= tau { u[n - tau] } else { 0.0 };
        raw.extend(channel.mask.m.iter().map(|&m| un * m + beta));
    }
    let target = total_power * channel.power_share;
    let mean = raw.iter().sum::<f64>() / raw.len().max(1) as f64;
    if target == 0.0 {
        raw.iter_mut().for_each(|x| *x = 0.0);
    } else {
        if !(mean > 0.0) {
            return Err(Error::ZeroMeanDrive);
        }
        let scale = target / mean;
        raw.iter_mut().for_each(|x| *x *= scale);
    }
    DriveWaveform::from_chip_powers(raw, eta, timing)
}

pub fn dbm_to_watts(p_dbm: f64) -> f64 {
    1e-3 * 10f64.powf(p_dbm / 10.0)
}

pub fn watts_to_dbm(p_w: f64) -> f64 {
    10.0 * (p_w / 1e-3).log10()
}

/// Sum of the per-pump square-law photocurrents, unit responsivity.
///
/// Per-pump terms are added in ascending order so the sum does not depend
/// on pump indexing.
pub fn detect_sum(drop: &[num_complex::Complex64]) -> f64 {
    crate::cavity::stored_energy(drop)
}

/// `X(k) = Σ_i |s_drop,i(k)|²` for every recorded step.
pub fn photodetect_sum(ports: &PortRecord) -> Result<Vec<f64>> {
    if ports.steps() == 0 {
        return Err(Error::LengthMismatch("port record is empty".into()));
    }
    Ok((0..ports.steps())
        .map(|k| detect_sum(ports.drop_at(k)))
        .collect())
}

/// Per-symbol reservoir features: one row per usable symbol, one column per
/// virtual node.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
    /// Leading symbols dropped before the first row.
    pub washout: usize,
    /// First test row, when a split has been assigned.
    pub train_boundary: Option<usize>,
}

impl StateMatrix {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Rows `range` as a new matrix (washout and split metadata reset).
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> StateMatrix {
        StateMatrix {
            rows: range.len(),
            cols: self.cols,
            data: self.data[range.start * self.cols..range.end * self.cols].to_vec(),
            washout: 0,
            train_boundary: None,
        }
    }
}

/// Samples the photocurrent at the last solver step of every chip and drops
/// the first `washout` symbols.
pub fn sample_state_matrix(
    photocurrent: &[f64],
    symbols: usize,
    nodes: usize,
    symbol_duration: f64,
    eta: f64,
    washout: usize,
) -> Result<StateMatrix> {
    let timing = SymbolTiming::new(symbol_duration, eta, nodes)?;
    if washout >= symbols {
        return Err(Error::InvalidParameter(format!(
            "washout {washout} must be below symbol count {symbols}"
        )));
    }
    let expected = symbols * timing.steps_per_symbol;
    if photocurrent.len() != expected {
        return Err(Error::LengthMismatch(format!(
            "photocurrent has {} steps, expected {expected}",
            photocurrent.len()
        )));
    }
    let rows = symbols - washout;
    let mut data = Vec::with_capacity(rows * nodes);
    for n in washout..symbols {
        data.extend((0..nodes).map(|j| photocurrent[timing.sample_step(n, j)]));
    }
    Ok(StateMatrix {
        rows,
        cols: nodes,
        data,
        washout,
        train_boundary: None,
    })
}
