//! Power-sample sources: live energy counters and CSV replay.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::{
    relative_energy, PowerSample, PowerTrace, ProbeError, RelativeEnergyReport,
    SampleValue, DEFAULT_SAMPLING_INTERVAL_S,
};

/// Something that can be polled for power samples.
///
/// Live sources produce a fresh reading per call and are paced by the
/// sampler; replay sources hand out scripted samples and return `None`
/// when the script runs out.
pub trait PowerSource: Send {
    fn name(&self) -> String;
    fn sampling_interval_s(&self) -> f64 {
        DEFAULT_SAMPLING_INTERVAL_S
    }
    fn sample(&mut self) -> Result<Option<PowerSample>, ProbeError>;
    /// Replay sources carry their own clock; measured running time is then
    /// read from the scripted timestamps instead of the wall clock.
    fn is_replay(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Energy-counter directories
// ---------------------------------------------------------------------------

struct CounterDomain {
    energy_path: PathBuf,
    max_range_uj: f64,
    last_raw_uj: Option<f64>,
    unwrapped_uj: f64,
}

impl CounterDomain {
    fn read(&mut self) -> Result<f64, ProbeError> {
        let raw = read_counter_file(&self.energy_path)?;
        if let Some(prev) = self.last_raw_uj {
            let delta = if raw < prev {
                // Counter wrapped at max_range: the advertised range closes
                // the gap between the old reading and the new one.
                raw + self.max_range_uj - prev
            } else {
                raw - prev
            };
            self.unwrapped_uj += delta;
        }
        self.last_raw_uj = Some(raw);
        Ok(self.unwrapped_uj)
    }
}

/// Live source over a directory of cumulative microjoule counters.
///
/// The layout mirrors the powercap sysfs convention: each power domain is
/// a directory holding an `energy_uj` counter and its
/// `max_energy_range_uj` wrap point. Domains are summed. The root itself
/// counts as a domain when it holds the two files; otherwise every
/// immediate subdirectory with an `energy_uj` file does.
pub struct CounterSource {
    root: PathBuf,
    domains: Vec<CounterDomain>,
    started: Instant,
    interval_s: f64,
}

impl CounterSource {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, ProbeError> {
        Self::open_with_interval(root, DEFAULT_SAMPLING_INTERVAL_S)
    }

    pub fn open_with_interval(root: impl AsRef<Path>, interval_s: f64) -> Result<Self, ProbeError> {
        let root = root.as_ref().to_path_buf();
        let mut domains = Vec::new();
        if root.join("energy_uj").is_file() {
            domains.push(open_domain(&root)?);
        } else if let Ok(entries) = fs::read_dir(&root) {
            let mut dirs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_dir() && p.join("energy_uj").is_file())
                .collect();
            dirs.sort();
            for dir in dirs {
                domains.push(open_domain(&dir)?);
            }
        }
        if domains.is_empty() {
            return Err(ProbeError::SourceUnavailable(format!(
                "no energy_uj counters under {}",
                root.display()
            )));
        }
        Ok(CounterSource {
            root,
            domains,
            started: Instant::now(),
            interval_s,
        })
    }
}

fn open_domain(dir: &Path) -> Result<CounterDomain, ProbeError> {
    let max_path = dir.join("max_energy_range_uj");
    let max_range_uj = read_counter_file(&max_path)?;
    Ok(CounterDomain {
        energy_path: dir.join("energy_uj"),
        max_range_uj,
        last_raw_uj: None,
        unwrapped_uj: 0.0,
    })
}

fn read_counter_file(path: &Path) -> Result<f64, ProbeError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ProbeError::SourceUnavailable(format!("{}: {e}", path.display())))?;
    text.trim()
        .parse::<f64>()
        .map_err(|e| ProbeError::SourceUnavailable(format!("{}: {e}", path.display())))
}

impl PowerSource for CounterSource {
    fn name(&self) -> String {
        format!("counters:{}", self.root.display())
    }

    fn sampling_interval_s(&self) -> f64 {
        self.interval_s
    }

    fn sample(&mut self) -> Result<Option<PowerSample>, ProbeError> {
        let mut sum_uj = 0.0;
        for d in &mut self.domains {
            sum_uj += d.read()?;
        }
        Ok(Some(PowerSample {
            timestamp_s: self.started.elapsed().as_secs_f64(),
            value: SampleValue::CumulativeEnergyUj(sum_uj),
        }))
    }
}

// ---------------------------------------------------------------------------
// CSV replay
// ---------------------------------------------------------------------------

/// Scripted source over a `timestamp_s,value,kind` CSV file, where kind is
/// `energy_uj` or `power_w`. Lines starting with `#` are comments.
pub struct ReplaySource {
    path: String,
    samples: std::vec::IntoIter<PowerSample>,
    interval_s: f64,
}

impl ReplaySource {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ProbeError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ProbeError::SourceUnavailable(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text, &path.display().to_string())
    }

    pub fn from_csv(text: &str, path: &str) -> Result<Self, ProbeError> {
        let bad = |line: usize, message: &str| ProbeError::BadReplayFile {
            path: path.to_string(),
            line,
            message: message.to_string(),
        };
        let mut samples = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "timestamp_s,value,kind" {
                    return Err(bad(i + 1, "expected header `timestamp_s,value,kind`"));
                }
                header_seen = true;
                continue;
            }
            let mut parts = line.split(',');
            let (ts, value, kind) = match (parts.next(), parts.next(), parts.next(), parts.next())
            {
                (Some(a), Some(b), Some(c), None) => (a, b, c),
                _ => return Err(bad(i + 1, "expected exactly 3 comma-separated fields")),
            };
            let timestamp_s: f64 = ts
                .trim()
                .parse()
                .map_err(|_| bad(i + 1, "bad timestamp"))?;
            let v: f64 = value.trim().parse().map_err(|_| bad(i + 1, "bad value"))?;
            let value = match kind.trim() {
                "energy_uj" => SampleValue::CumulativeEnergyUj(v),
                "power_w" => SampleValue::InstantPowerW(v),
                other => return Err(bad(i + 1, &format!("unknown kind `{other}`"))),
            };
            samples.push(PowerSample {
                timestamp_s,
                value,
            });
        }
        if !header_seen {
            return Err(bad(0, "empty replay file"));
        }
        let interval_s = if samples.len() >= 2 {
            (samples[samples.len() - 1].timestamp_s - samples[0].timestamp_s)
                / (samples.len() - 1) as f64
        } else {
            DEFAULT_SAMPLING_INTERVAL_S
        };
        Ok(ReplaySource {
            path: path.to_string(),
            samples: samples.into_iter(),
            interval_s,
        })
    }
}

impl PowerSource for ReplaySource {
    fn name(&self) -> String {
        format!("replay:{}", self.path)
    }

    fn sampling_interval_s(&self) -> f64 {
        self.interval_s
    }

    fn sample(&mut self) -> Result<Option<PowerSample>, ProbeError> {
        Ok(self.samples.next())
    }

    fn is_replay(&self) -> bool {
        true
    }
}

/// Serialize a trace back to the replay CSV format.
pub fn trace_to_csv(trace: &PowerTrace) -> String {
    let mut out = String::from("timestamp_s,value,kind\n");
    for s in &trace.samples {
        let (v, kind) = match s.value {
            SampleValue::CumulativeEnergyUj(v) => (v, "energy_uj"),
            SampleValue::InstantPowerW(v) => (v, "power_w"),
        };
        out.push_str(&format!("{},{},{}\n", s.timestamp_s, v, kind));
    }
    out
}

// ---------------------------------------------------------------------------
// Measured runs
// ---------------------------------------------------------------------------

/// Run a workload under measurement: sample a baseline, sample while the
/// workload executes, and return the relative-energy report.
///
/// On a live source the workload runs on the caller's thread while a
/// sampler thread appends to the workload trace; the running time is the
/// workload's wall-clock time. On a replay source the scripted trace is
/// split at `baseline_duration_s` and the scripted timestamps provide the
/// running time, so replayed runs are exactly reproducible.
pub fn run_measured<R>(
    workload: impl FnOnce() -> R,
    source: &mut dyn PowerSource,
    baseline_duration_s: f64,
) -> Result<(R, RelativeEnergyReport), ProbeError> {
    if source.is_replay() {
        run_replayed(workload, source, baseline_duration_s)
    } else {
        run_live(workload, source, baseline_duration_s)
    }
}

fn run_replayed<R>(
    workload: impl FnOnce() -> R,
    source: &mut dyn PowerSource,
    baseline_duration_s: f64,
) -> Result<(R, RelativeEnergyReport), ProbeError> {
    let mut all = Vec::new();
    while let Some(s) = source.sample()? {
        all.push(s);
    }
    let t0 = all
        .first()
        .map(|s| s.timestamp_s)
        .ok_or_else(|| ProbeError::SourceUnavailable("empty replay script".into()))?;
    let boundary = t0 + baseline_duration_s;
    let (baseline, rest): (Vec<_>, Vec<_>) =
        all.into_iter().partition(|s| s.timestamp_s <= boundary);
    let interval = source.sampling_interval_s();
    let baseline = PowerTrace::new(source.name(), baseline, interval)?;
    let trace = PowerTrace::new(source.name(), rest, interval)?;
    let result = workload();
    let running_time_s = trace.span_s();
    let report = relative_energy(&baseline, &trace, running_time_s)?;
    Ok((result, report))
}

fn run_live<R>(
    workload: impl FnOnce() -> R,
    source: &mut dyn PowerSource,
    baseline_duration_s: f64,
) -> Result<(R, RelativeEnergyReport), ProbeError> {
    let interval = source.sampling_interval_s();
    let sleep = std::time::Duration::from_secs_f64(interval);

    // Step 1: baseline with no workload running.
    let mut baseline_samples = Vec::new();
    let partial = |samples: &[PowerSample], e: ProbeError| ProbeError::PartialTrace {
        collected: samples.len(),
        message: e.to_string(),
        samples: samples.to_vec(),
    };
    loop {
        match source.sample() {
            Ok(Some(s)) => baseline_samples.push(s),
            Ok(None) => break,
            Err(e) => return Err(partial(&baseline_samples, e)),
        }
        let span = baseline_samples.last().unwrap().timestamp_s
            - baseline_samples.first().unwrap().timestamp_s;
        if span >= baseline_duration_s && baseline_samples.len() >= 2 {
            break;
        }
        std::thread::sleep(sleep);
    }
    let baseline = PowerTrace::new(source.name(), baseline_samples, interval)?;
    let name = source.name();

    // Steps 2-4: sample while the workload runs.
    let stop = std::sync::atomic::AtomicBool::new(false);
    let (samples_res, result, elapsed) = std::thread::scope(|scope| {
        let stop_ref = &stop;
        let sampler = scope.spawn(move || -> Result<Vec<PowerSample>, ProbeError> {
            let mut samples = Vec::new();
            loop {
                match source.sample() {
                    Ok(Some(s)) => samples.push(s),
                    Ok(None) => break,
                    Err(e) => return Err(partial(&samples, e)),
                }
                if stop_ref.load(std::sync::atomic::Ordering::Relaxed) {
                    // One closing sample guarantees the two-sample minimum.
                    if samples.len() >= 2 {
                        break;
                    }
                }
                std::thread::sleep(sleep);
            }
            Ok(samples)
        });
        let started = Instant::now();
        let result = workload();
        let elapsed = started.elapsed().as_secs_f64();
        stop.store(true, std::sync::atomic::Ordering::Relaxed);
        (sampler.join().expect("sampler panicked"), result, elapsed)
    });
    let trace = PowerTrace::new(name, samples_res?, interval)?;
    let report = relative_energy(&baseline, &trace, elapsed.max(f64::MIN_POSITIVE))?;
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_csv_parses_and_replays() {
        let csv = "\
# comment line
timestamp_s,value,kind
0.0,10.0,power_w
0.5,10.0,power_w
1.0,25.0,power_w
";
        let mut src = ReplaySource::from_csv(csv, "mem").unwrap();
        assert!(src.is_replay());
        let s = src.sample().unwrap().unwrap();
        assert_eq!(s.timestamp_s, 0.0);
        assert_eq!(s.value, SampleValue::InstantPowerW(10.0));
        assert!(src.sample().unwrap().is_some());
        assert!(src.sample().unwrap().is_some());
        assert!(src.sample().unwrap().is_none());
    }

    #[test]
    fn replay_rejects_bad_rows() {
        let csv = "timestamp_s,value,kind\n0.0,x,power_w\n";
        assert!(matches!(
            ReplaySource::from_csv(csv, "mem"),
            Err(ProbeError::BadReplayFile { line: 2, .. })
        ));
        let csv = "timestamp_s,value,kind\n0.0,1.0,volts\n";
        assert!(ReplaySource::from_csv(csv, "mem").is_err());
    }

    fn scripted(base_w: f64, load_w: f64) -> String {
        // 0..=10 s baseline at base_w, then 10..=70 s workload at load_w.
        let mut csv = String::from("timestamp_s,value,kind\n");
        let mut t = 0.0;
        while t <= 10.0 + 1e-9 {
            csv.push_str(&format!("{t},{base_w},power_w\n"));
            t += 1.0;
        }
        let mut t = 11.0;
        while t <= 71.0 + 1e-9 {
            csv.push_str(&format!("{t},{load_w},power_w\n"));
            t += 1.0;
        }
        csv
    }

    #[test]
    fn run_measured_replay_matches_relative_energy() {
        let csv = scripted(10.0, 25.0);
        let mut src = ReplaySource::from_csv(&csv, "mem").unwrap();
        let (_, report) = run_measured(|| (), &mut src, 10.0).unwrap();
        assert_eq!(report.base_power_w, 10.0);
        assert_eq!(report.absolute_power_w, 25.0);
        assert_eq!(report.relative_power_w, 15.0);
        assert_eq!(report.running_time_s, 60.0);
        assert_eq!(report.relative_energy_j, 900.0);

        // Bit-for-bit composition with relative_energy on the same traces.
        let mut again = ReplaySource::from_csv(&csv, "mem").unwrap();
        let mut all = Vec::new();
        while let Some(s) = again.sample().unwrap() {
            all.push(s);
        }
        let (b, w): (Vec<_>, Vec<_>) = all.into_iter().partition(|s| s.timestamp_s <= 10.0);
        let baseline = PowerTrace::new("b", b, 1.0).unwrap();
        let work = PowerTrace::new("w", w, 1.0).unwrap();
        let direct = relative_energy(&baseline, &work, 60.0).unwrap();
        assert_eq!(report.relative_energy_j, direct.relative_energy_j);
        assert_eq!(report.base_power_w, direct.base_power_w);
        assert_eq!(report.absolute_power_w, direct.absolute_power_w);
    }

    #[test]
    fn run_measured_idle_workload_is_zero() {
        let csv = scripted(10.0, 10.0);
        let mut src = ReplaySource::from_csv(&csv, "mem").unwrap();
        let (_, report) = run_measured(|| (), &mut src, 10.0).unwrap();
        assert_eq!(report.relative_energy_j, 0.0);
    }

    #[test]
    fn counter_source_sums_domains_and_unwraps() {
        let dir = tempfile::tempdir().unwrap();
        let d0 = dir.path().join("domain0");
        fs::create_dir(&d0).unwrap();
        fs::write(d0.join("max_energy_range_uj"), "1000\n").unwrap();
        fs::write(d0.join("energy_uj"), "999\n").unwrap();

        let mut src = CounterSource::open(dir.path()).unwrap();
        let first = src.sample().unwrap().unwrap();
        let v0 = match first.value {
            SampleValue::CumulativeEnergyUj(v) => v,
            _ => panic!(),
        };
        // Counter wraps: 999 -> 1 with range 1000 is a delta of 2.
        fs::write(d0.join("energy_uj"), "1\n").unwrap();
        let second = src.sample().unwrap().unwrap();
        let v1 = match second.value {
            SampleValue::CumulativeEnergyUj(v) => v,
            _ => panic!(),
        };
        assert_eq!(v1 - v0, 2.0);
    }

    #[test]
    fn counter_source_monotone_without_wrap() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("max_energy_range_uj"), "100000\n").unwrap();
        fs::write(dir.path().join("energy_uj"), "10\n").unwrap();
        let mut src = CounterSource::open(dir.path()).unwrap();
        src.sample().unwrap();
        fs::write(dir.path().join("energy_uj"), "250\n").unwrap();
        let s = src.sample().unwrap().unwrap();
        match s.value {
            SampleValue::CumulativeEnergyUj(v) => assert_eq!(v, 240.0),
            _ => panic!(),
        }
    }

    #[test]
    fn missing_counter_dir_is_unavailable() {
        match CounterSource::open("/definitely/not/a/path") {
            Err(ProbeError::SourceUnavailable(_)) => {}
            Err(other) => panic!("wrong error: {other}"),
            Ok(_) => panic!("expected source-unavailable"),
        }
    }

    #[test]
    fn live_run_on_counter_files_is_positive() {
        // A crude live test: the counter advances while the workload spins.
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("max_energy_range_uj"), "1e15\n").unwrap();
        fs::write(dir.path().join("energy_uj"), "0\n").unwrap();
        let mut src = CounterSource::open_with_interval(dir.path(), 0.01).unwrap();
        let path = dir.path().join("energy_uj");
        let (_, report) = run_measured(
            move || {
                // Simulate a consuming workload by bumping the counter.
                for step in 1..=5u64 {
                    fs::write(&path, format!("{}\n", step * 1_000_000)).unwrap();
                    std::thread::sleep(std::time::Duration::from_millis(20));
                }
            },
            &mut src,
            0.03,
        )
        .unwrap();
        assert!(
            report.relative_energy_j > 0.0,
            "expected positive relative energy, got {report:?}"
        );
    }
}
