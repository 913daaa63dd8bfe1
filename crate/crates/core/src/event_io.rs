//! Event data model, the `EVS1` binary format, rasterization and
//! spike-train utilities.
//!
//! File layout (little-endian):
//!
//! ```text
//! "EVS1" | u16 width | u16 height | u64 count | count * record
//! record = u32 t_us | u16 x | u16 y | i8 polarity | u8 pad      (10 bytes)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EVS1";
pub const HEADER_LEN: u64 = 16;
pub const RECORD_LEN: u64 = 10;

/// Magnitudes at or below this level (relative to the reference bin) are
/// reported as this value.
pub const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u32,
    pub x: u16,
    pub y: u16,
    /// Exactly +1 or -1.
    pub polarity: i8,
}

impl Event {
    pub fn new(t: u32, x: u16, y: u16, polarity: i8) -> Self {
        Event { t, x, y, polarity }
    }
}

/// A bounded, time-sorted sequence of events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    width: u16,
    height: u16,
    events: Vec<Event>,
}

impl EventStream {
    /// Validates bounds and polarity, then sorts by timestamp (stable).
    pub fn new(width: u16, height: u16, mut events: Vec<Event>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            let offset = HEADER_LEN + i as u64 * RECORD_LEN;
            if e.x >= width || e.y >= height {
                return Err(Error::OutOfBounds {
                    offset,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.polarity != 1 && e.polarity != -1 {
                return Err(Error::InvalidPolarity {
                    offset,
                    polarity: e.polarity,
                });
            }
        }
        events.sort_by_key(|e| e.t);
        Ok(EventStream {
            width,
            height,
            events,
        })
    }

    pub fn empty(width: u16, height: u16) -> Self {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    /// Input dimension of the flattened pixel vector.
    pub fn pixels(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Last timestamp in seconds, 0 for an empty stream.
    pub fn span_seconds(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t as f64 * 1e-6)
    }

    /// Row-major flat pixel index, `y * width + x`.
    pub fn index_of(&self, x: u16, y: u16) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&(self.events.len() as u64).to_le_bytes())?;
        let mut rec = [0u8; RECORD_LEN as usize];
        for e in &self.events {
            rec[0..4].copy_from_slice(&e.t.to_le_bytes());
            rec[4..6].copy_from_slice(&e.x.to_le_bytes());
            rec[6..8].copy_from_slice(&e.y.to_le_bytes());
            rec[8] = e.polarity as u8;
            rec[9] = 0;
            w.write_all(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN as usize];
        read_exact_or(&mut r, &mut header, |got| Error::MalformedHeader {
            offset: got,
            reason: format!("header needs {HEADER_LEN} bytes"),
        })?;
        if &header[0..4] != MAGIC {
            return Err(Error::MalformedHeader {
                offset: 0,
                reason: format!("bad magic {:?}", &header[0..4]),
            });
        }
        let width = u16::from_le_bytes([header[4], header[5]]);
        let height = u16::from_le_bytes([header[6], header[7]]);
        let count = u64::from_le_bytes(header[8..16].try_into().expect("8 bytes"));
        if width == 0 || height == 0 {
            return Err(Error::MalformedHeader {
                offset: 4,
                reason: format!("zero dimension {width}x{height}"),
            });
        }

        let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
        let mut rec = [0u8; RECORD_LEN as usize];
        for i in 0..count {
            let offset = HEADER_LEN + i * RECORD_LEN;
            read_exact_or(&mut r, &mut rec, |_| Error::TruncatedRecord { offset })?;
            let e = Event {
                t: u32::from_le_bytes(rec[0..4].try_into().expect("4 bytes")),
                x: u16::from_le_bytes([rec[4], rec[5]]),
                y: u16::from_le_bytes([rec[6], rec[7]]),
                polarity: rec[8] as i8,
            };
            if e.x >= width || e.y >= height {
                return Err(Error::OutOfBounds {
                    offset,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.polarity != 1 && e.polarity != -1 {
                return Err(Error::InvalidPolarity {
                    offset: offset + 8,
                    polarity: e.polarity,
                });
            }
            events.push(e);
        }
        events.sort_by_key(|e| e.t);
        Ok(EventStream {
            width,
            height,
            events,
        })
    }

    /// Events inside the `w x h` window at `(x0, y0)`, re-based to the
    /// window origin.
    pub fn crop(&self, x0: u16, y0: u16, w: u16, h: u16) -> Result<EventStream> {
        if x0 as u32 + w as u32 > self.width as u32 || y0 as u32 + h as u32 > self.height as u32 {
            return Err(Error::dims(format!(
                "crop {w}x{h}@({x0},{y0}) exceeds {}x{}",
                self.width, self.height
            )));
        }
        let events = self
            .events
            .iter()
            .filter(|e| e.x >= x0 && e.x < x0 + w && e.y >= y0 && e.y < y0 + h)
            .map(|e| Event {
                x: e.x - x0,
                y: e.y - y0,
                ..*e
            })
            .collect();
        Ok(EventStream {
            width: w,
            height: h,
            events,
        })
    }
}

fn read_exact_or<R: Read>(
    r: &mut R,
    buf: &mut [u8],
    err: impl FnOnce(u64) -> Error,
) -> Result<()> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => return Err(err(got as u64)),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventStream> {
    let f = File::open(path)?;
    EventStream::read_from(BufReader::new(f))
}

pub fn write_events(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let f = File::create(path)?;
    stream.write_to(BufWriter::new(f))
}

/// A signed binary sequence on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    dt: f64,
    values: Vec<i8>,
}

impl SpikeTrain {
    pub fn new(dt: f64, values: Vec<i8>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param(format!("dt must be > 0, got {dt}")));
        }
        if let Some(v) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::param(format!("spike value {v} not in {{-1,0,1}}")));
        }
        Ok(SpikeTrain { dt, values })
    }

    pub fn zeros(dt: f64, len: usize) -> Self {
        SpikeTrain {
            dt,
            values: vec![0; len],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    /// Sum of spike polarities.
    pub fn signed_count(&self) -> i64 {
        self.values.iter().map(|&v| v as i64).sum()
    }

    /// Number of non-zero steps.
    pub fn spike_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// Mean signed rate over the whole train, in spikes per second.
    pub fn mean_rate(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.signed_count() as f64 / self.duration()
        }
    }
}

pub(crate) fn steps_for(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

fn bin_of(t_us: u32, dt: f64) -> usize {
    let dt_us = dt * 1e6;
    (t_us as f64 / dt_us + 1e-9).floor() as usize
}

/// Rasterize into one dense train per pixel (row-major, `y * width + x`).
///
/// A bin holds +1 (-1) when at least one positive (negative) event fell in
/// `[k*dt, (k+1)*dt)`; opposite polarities in the same bin cancel to 0.
/// Events at or after `duration` are dropped.
pub fn rasterize(stream: &EventStream, dt: f64, duration: f64) -> Result<Vec<SpikeTrain>> {
    let raster = SpikeRaster::from_stream(stream, dt, duration)?;
    Ok(raster.to_trains())
}

/// Sparse per-step representation of an `n`-channel signed spike input.
///
/// This is what the network consumes: `frame(k)` lists the `(channel,
/// polarity)` pairs spiking at step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRaster {
    channels: usize,
    dt: f64,
    frames: Vec<Vec<(u32, i8)>>,
}

impl SpikeRaster {
    pub fn new(channels: usize, dt: f64, frames: Vec<Vec<(u32, i8)>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::param(format!("dt must be > 0, got {dt}")));
        }
        for f in &frames {
            for &(c, p) in f {
                if c as usize >= channels || (p != 1 && p != -1) {
                    return Err(Error::param(format!(
                        "bad raster entry ({c}, {p}) for {channels} channels"
                    )));
                }
            }
        }
        Ok(SpikeRaster {
            channels,
            dt,
            frames,
        })
    }

    pub fn silent(channels: usize, dt: f64, steps: usize) -> Self {
        SpikeRaster {
            channels,
            dt,
            frames: vec![Vec::new(); steps],
        }
    }

    pub fn from_stream(stream: &EventStream, dt: f64, duration: f64) -> Result<Self> {
        if !(dt > 0.0) || !(duration > 0.0) {
            return Err(Error::param(format!(
                "rasterize needs dt > 0 and duration > 0, got dt={dt}, duration={duration}"
            )));
        }
        let steps = steps_for(duration, dt);
        // (bin, pixel) -> bit 0: saw positive, bit 1: saw negative
        let mut marks: Vec<(usize, u32, u8)> = stream
            .events()
            .iter()
            .filter_map(|e| {
                let k = bin_of(e.t, dt);
                (k < steps).then(|| {
                    let bit = if e.polarity > 0 { 1 } else { 2 };
                    (k, stream.index_of(e.x, e.y) as u32, bit)
                })
            })
            .collect();
        marks.sort_unstable_by_key(|&(k, p, _)| (k, p));

        let mut frames = vec![Vec::new(); steps];
        let mut i = 0;
        while i < marks.len() {
            let (k, p, mut bits) = marks[i];
            let mut j = i + 1;
            while j < marks.len() && marks[j].0 == k && marks[j].1 == p {
                bits |= marks[j].2;
                j += 1;
            }
            match bits {
                1 => frames[k].push((p, 1)),
                2 => frames[k].push((p, -1)),
                _ => {} // cancelled
            }
            i = j;
        }
        Ok(SpikeRaster {
            channels: stream.pixels(),
            dt,
            frames,
        })
    }

    /// Independent Poisson channels with signed rates (Hz); the sign of the
    /// rate is the spike polarity.
    pub fn from_rates(rates: &[f64], dt: f64, duration: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0) || !(duration > 0.0) {
            return Err(Error::param("from_rates needs dt > 0 and duration > 0"));
        }
        if let Some(r) = rates.iter().find(|r| !r.is_finite() || r.abs() * dt > 1.0) {
            return Err(Error::param(format!(
                "rate {r} Hz not representable at dt={dt} (|rate|*dt must be <= 1)"
            )));
        }
        let steps = steps_for(duration, dt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let active: Vec<(u32, f64, i8)> = rates
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != 0.0)
            .map(|(i, r)| (i as u32, r.abs() * dt, if *r > 0.0 { 1 } else { -1 }))
            .collect();
        let frames = (0..steps)
            .map(|_| {
                active
                    .iter()
                    .filter_map(|&(c, p, pol)| (rng.random::<f64>() < p).then_some((c, pol)))
                    .collect()
            })
            .collect();
        Ok(SpikeRaster {
            channels: rates.len(),
            dt,
            frames,
        })
    }

    pub fn from_trains(trains: &[SpikeTrain]) -> Result<Self> {
        let Some(first) = trains.first() else {
            return Err(Error::param("no trains"));
        };
        let (dt, len) = (first.dt(), first.len());
        if trains.iter().any(|t| t.dt() != dt || t.len() != len) {
            return Err(Error::dims("trains must share dt and length"));
        }
        let frames = (0..len)
            .map(|k| {
                trains
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| t.values()[k] != 0)
                    .map(|(c, t)| (c as u32, t.values()[k]))
                    .collect()
            })
            .collect();
        Ok(SpikeRaster {
            channels: trains.len(),
            dt,
            frames,
        })
    }

    pub fn to_trains(&self) -> Vec<SpikeTrain> {
        let mut values = vec![vec![0i8; self.frames.len()]; self.channels];
        for (k, f) in self.frames.iter().enumerate() {
            for &(c, p) in f {
                values[c as usize][k] = p;
            }
        }
        values
            .into_iter()
            .map(|v| SpikeTrain { dt: self.dt, values: v })
            .collect()
    }

    /// Channels of the `w x h` window at `(x0, y0)` of a `width`-wide
    /// row-major raster, renumbered row-major inside the window.
    pub fn window(&self, width: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if width == 0 || !self.channels.is_multiple_of(width) {
            return Err(Error::dims(format!(
                "{} channels is not a multiple of width {width}",
                self.channels
            )));
        }
        let height = self.channels / width;
        if x0 + w > width || y0 + h > height {
            return Err(Error::dims(format!(
                "window {w}x{h}@({x0},{y0}) exceeds {width}x{height}"
            )));
        }
        let frames = self
            .frames
            .iter()
            .map(|f| {
                f.iter()
                    .filter_map(|&(c, p)| {
                        let (x, y) = (c as usize % width, c as usize / width);
                        (x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
                            .then(|| (((y - y0) * w + (x - x0)) as u32, p))
                    })
                    .collect()
            })
            .collect();
        Ok(SpikeRaster {
            channels: w * h,
            dt: self.dt,
            frames,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.frames.len()
    }

    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 * self.dt
    }

    /// Spikes at step `k`; empty past the end.
    pub fn frame(&self, k: usize) -> &[(u32, i8)] {
        self.frames.get(k).map_or(&[], |f| f.as_slice())
    }

    pub fn spike_count(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }

    /// Mean signed rate per channel over steps `[from, to)`.
    pub fn mean_rates(&self, from: usize, to: usize) -> Vec<f64> {
        let to = to.min(self.frames.len());
        let mut acc = vec![0.0; self.channels];
        if to <= from {
            return acc;
        }
        for f in &self.frames[from..to] {
            for &(c, p) in f {
                acc[c as usize] += p as f64;
            }
        }
        let t = (to - from) as f64 * self.dt;
        acc.iter_mut().for_each(|a| *a /= t);
        acc
    }
}

/// Bernoulli approximation of a Poisson process on the step grid.
pub fn poisson_train(rate: f64, dt: f64, duration: f64, polarity: i8, seed: u64) -> Result<SpikeTrain> {
    if !(dt > 0.0) || !(duration > 0.0) {
        return Err(Error::param("poisson_train needs dt > 0 and duration > 0"));
    }
    if !(rate >= 0.0) {
        return Err(Error::param(format!("rate must be >= 0, got {rate}")));
    }
    if rate * dt > 1.0 {
        return Err(Error::param(format!(
            "rate*dt = {} exceeds 1 (rate {rate} Hz, dt {dt} s)",
            rate * dt
        )));
    }
    if polarity != 1 && polarity != -1 {
        return Err(Error::param(format!("polarity must be +-1, got {polarity}")));
    }
    let p = rate * dt;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..steps_for(duration, dt))
        .map(|_| if rng.random::<f64>() < p { polarity } else { 0 })
        .collect();
    Ok(SpikeTrain { dt, values })
}

/// Events from independent per-pixel Poisson processes in continuous time.
/// `rate_map` holds signed rates (Hz) in row-major order; the sign is the
/// event polarity.
pub fn poisson_stream(width: u16, height: u16, rate_map: &[f64], duration: f64, seed: u64) -> Result<EventStream> {
    if rate_map.len() != width as usize * height as usize {
        return Err(Error::dims(format!(
            "rate map has {} entries for {width}x{height}",
            rate_map.len()
        )));
    }
    if !(duration > 0.0) || duration * 1e6 > u32::MAX as f64 {
        return Err(Error::param(format!("duration {duration} s out of range")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    for (i, &r) in rate_map.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let (x, y) = ((i % width as usize) as u16, (i / width as usize) as u16);
        let pol = if r > 0.0 { 1 } else { -1 };
        let mut t = 0.0;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / r.abs();
            if t >= duration {
                break;
            }
            events.push(Event::new((t * 1e6) as u32, x, y, pol));
        }
    }
    EventStream::new(width, height, events)
}

/// One-sided magnitude spectrum of a spike train.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Bin centre frequencies in Hz.
    pub freqs: Vec<f64>,
    /// Linear magnitudes, `|DFT(hann * x)|`.
    pub magnitudes: Vec<f64>,
    /// Magnitudes in dB relative to the DC bin (or to the largest bin when
    /// DC is empty), floored at [`DB_FLOOR`].
    pub db: Vec<f64>,
}

/// Periodic Hann window followed by a DFT.
pub fn spike_spectrum(train: &SpikeTrain) -> Result<Spectrum> {
    let len = train.len();
    if len < 8 {
        return Err(Error::InsufficientData(format!(
            "spectrum needs at least 8 samples, got {len}"
        )));
    }
    let mut buf: Vec<Complex<f64>> = train
        .values()
        .iter()
        .enumerate()
        .map(|(n, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
            Complex::new(v as f64 * w, 0.0)
        })
        .collect();
    let fft: Arc<dyn rustfft::Fft<f64>> = FftPlanner::new().plan_fft_forward(len);
    fft.process(&mut buf);

    let bins = len / 2 + 1;
    let magnitudes: Vec<f64> = buf[..bins].iter().map(|c| c.norm()).collect();
    let reference = if magnitudes[0] > 0.0 {
        magnitudes[0]
    } else {
        magnitudes.iter().cloned().fold(0.0, f64::max)
    };
    let db = magnitudes
        .iter()
        .map(|&m| {
            if reference > 0.0 && m > 0.0 {
                (20.0 * (m / reference).log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect();
    let freqs = (0..bins)
        .map(|k| k as f64 / (len as f64 * train.dt()))
        .collect();
    Ok(Spectrum {
        freqs,
        magnitudes,
        db,
    })
}
