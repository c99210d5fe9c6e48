//! Seeded synthetic telemetry with gap-separated episodes, label-pure
//! segments, physical fault signatures and tunable proxy channels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::TelemetryTable;

/// Attitude, rates, gyro-bias, IMU, magnetometer and vibration channels.
pub const PHYSICAL_FEATURES: [&str; 22] = [
    "Roll", "Pitch", "Yaw", "R", "P", "Y", "GX", "GY", "GZ", "GyrX", "GyrY", "GyrZ", "AccX", "AccY", "AccZ", "MagX",
    "MagY", "MagZ", "VibeX", "VibeY", "VibeZ", "Clip0",
];

/// Battery, baro, controller, GPS, position-estimator and motor channels.
pub const CONTEXT_FEATURES: [&str; 41] = [
    "Volt", "VoltR", "Curr", "RemPct", "Alt", "Press", "Temp", "CRt", "SMS", "ThI", "ThO", "ThH", "DAlt", "BAlt",
    "DSAlt", "TAlt", "DCRt", "Lat", "Lng", "GAlt", "Spd", "GCrs", "VZ", "NSats", "HDop", "TPD", "PD", "DVD", "VD",
    "ErrRP", "ErrYaw", "VN", "VE", "VDn", "PN", "PE", "PDn", "LiftMax", "BatVolt", "ThLimit", "ThrAvMx",
];

/// Accumulators and state flags removed by the loose mode.
pub const LOOSE_DROPS: [&str; 9] = ["abT", "EnrgTot", "CurrTot", "Res", "BatRes", "Offset", "Rout", "POut", "YOut"];

/// Loose drops that also integrate mission progress.
pub const ACCUMULATORS: [&str; 3] = ["abT", "EnrgTot", "CurrTot"];

/// The 72 generated column names, physical first.
pub fn synth_schema() -> Vec<String> {
    PHYSICAL_FEATURES
        .iter()
        .chain(&CONTEXT_FEATURES)
        .chain(&LOOSE_DROPS)
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_episodes: usize,
    /// Alternating normal / anomaly segments per episode, starting normal.
    pub segments_per_episode: usize,
    pub sample_period_us: i64,
    pub gap_us: i64,
    /// Mean shift (in noise units) of physical channels under a fault.
    pub physical_signal: f64,
    /// Overall scale of every proxy channel; 0 makes them pure noise.
    pub proxy_strength: f64,
    /// Proxy weight on the binary label.
    pub label_proxy: f64,
    /// Proxy weight on a per-segment random offset.
    pub segment_proxy: f64,
    /// Relative scale of context channels versus the loose drops.
    pub context_strength: f64,
    /// Rows drawn independently: one episode, no segments, no gaps.
    pub iid: bool,
    /// Anomaly probability per row when `iid`.
    pub anomaly_prior: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_rows: 4817,
            n_episodes: 3,
            segments_per_episode: 4,
            sample_period_us: 100_000,
            gap_us: 600_000_000,
            physical_signal: 0.5,
            proxy_strength: 1.0,
            label_proxy: 1.5,
            segment_proxy: 1.0,
            context_strength: 0.5,
            iid: false,
            anomaly_prior: 0.4,
        }
    }
}

impl SynthSpec {
    /// Proxies carry segment identity only.
    pub fn segment_proxy_only() -> Self {
        Self {
            physical_signal: 0.0,
            label_proxy: 0.0,
            segment_proxy: 4.0,
            context_strength: 1.0,
            segments_per_episode: 12,
            ..Self::default()
        }
    }

    /// Independent rows with a clear physical signal.
    pub fn iid() -> Self {
        Self {
            iid: true,
            physical_signal: 1.0,
            segment_proxy: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synthetic spec: {m}")));
        if self.n_episodes == 0 || self.segments_per_episode < 2 {
            return bad("need at least one episode and two segments per episode");
        }
        if self.n_rows < 2 * self.n_episodes * self.segments_per_episode {
            return bad("too few rows for the segment layout");
        }
        if self.sample_period_us <= 0 || self.gap_us <= self.sample_period_us {
            return bad("gap must exceed a positive sample period");
        }
        let strengths = [
            self.physical_signal,
            self.proxy_strength,
            self.label_proxy,
            self.segment_proxy,
            self.context_strength,
        ];
        if strengths.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("strengths must be finite and non-negative");
        }
        if !(self.anomaly_prior > 0.0 && self.anomaly_prior < 1.0) {
            return bad("anomaly prior must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Signed unit shift of physical channel `j` under fault class `c`.
fn physical_shift(c: u8, j: usize) -> f64 {
    let c = c as usize;
    if c == 0 || (j + 2 * c) % 3 != 0 {
        0.0
    } else if (j + c) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fault class of anomaly segment `a` of episode `e`; the last anomaly segment
/// of every episode is class 3.
fn segment_class(e: usize, a: usize, n_anomaly: usize) -> u8 {
    if a + 1 == n_anomaly {
        3
    } else {
        [1, 2, 4][(e + a) % 3]
    }
}

struct RowContext {
    label: u8,
    segment: usize,
    progress: f64,
}

fn layout(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<i64>, Vec<RowContext>, usize) {
    let mut time = Vec::with_capacity(spec.n_rows);
    let mut rows = Vec::with_capacity(spec.n_rows);
    if spec.iid {
        for i in 0..spec.n_rows {
            time.push(i as i64 * spec.sample_period_us);
            let label = if rng.random::<f64>() < spec.anomaly_prior {
                rng.random_range(1..=4u8)
            } else {
                0
            };
            rows.push(RowContext {
                label,
                segment: 0,
                progress: i as f64 / spec.n_rows as f64,
            });
        }
        return (time, rows, 1);
    }
    let (base, extra) = (spec.n_rows / spec.n_episodes, spec.n_rows % spec.n_episodes);
    let s = spec.segments_per_episode;
    let n_anomaly = s / 2;
    let mut t = 0i64;
    let mut segment = 0;
    for e in 0..spec.n_episodes {
        let len = base + usize::from(e < extra);
        let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.6..1.4)).collect();
        let total: f64 = w.iter().sum();
        let mut seg_len: Vec<usize> = w.iter().map(|v| ((v / total) * len as f64).floor().max(1.0) as usize).collect();
        let used: usize = seg_len[..s - 1].iter().sum();
        seg_len[s - 1] = len - used;
        let mut i_ep = 0;
        for (p, &sl) in seg_len.iter().enumerate() {
            let label = if p % 2 == 1 {
                segment_class(e, p / 2, n_anomaly)
            } else {
                0
            };
            for _ in 0..sl {
                time.push(t);
                t += spec.sample_period_us;
                rows.push(RowContext {
                    label,
                    segment,
                    progress: i_ep as f64 / len as f64,
                });
                i_ep += 1;
            }
            segment += 1;
        }
        t += spec.gap_us;
    }
    (time, rows, segment)
}

/// Deterministic table for `seed`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<TelemetryTable> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (time_us, rows, n_segments) = layout(spec, &mut rng);
    let n_proxy = CONTEXT_FEATURES.len() + LOOSE_DROPS.len();
    let offsets: Vec<Vec<f64>> = (0..n_segments)
        .map(|_| {
            (0..n_proxy)
                .map(|_| if spec.iid { 0.0 } else { StandardNormal.sample(&mut rng) })
                .collect()
        })
        .collect();

    let names = synth_schema();
    let n_phys = PHYSICAL_FEATURES.len();
    let mut columns = vec![Vec::with_capacity(spec.n_rows); names.len()];
    for r in &rows {
        let y = f64::from(u8::from(r.label != 0));
        for (j, col) in columns.iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let v = if j < n_phys {
                noise + spec.physical_signal * physical_shift(r.label, j)
            } else {
                let f = j - n_phys;
                let is_drop = f >= CONTEXT_FEATURES.len();
                let scale = spec.proxy_strength * if is_drop { 1.0 } else { spec.context_strength };
                let sign = if f % 2 == 0 { 1.0 } else { -1.0 };
                let mut signal = spec.label_proxy * sign * y + spec.segment_proxy * offsets[r.segment][f];
                if ACCUMULATORS.contains(&names[j].as_str()) {
                    signal += 2.0 * r.progress;
                }
                noise + scale * signal
            };
            col.push(v);
        }
    }
    let labels = rows.iter().map(|r| r.label).collect();
    TelemetryTable::new(time_us, names, columns, labels)
}
