//! Host-side plumbing around the clock-free core engine.
//!
//! The core scores samples but never touches a clock, a file or a thread;
//! this module supplies all three. [`drive_stream`] pulls events from a
//! [`StreamReader`], stamps each tick with wall-clock time from a monotonic
//! [`Instant`], fans the per-model forward passes out over a bounded worker
//! pool, polls an optional control file for live load/unload commands
//! between ticks, and collects one [`RunRecord`] per tick for the duration
//! analyses.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use sentinel_core::runtime::{
    Engine, InferenceTask, ModelId, RunRecord, RuntimeError, ScoredWindow, TickReport,
};

use crate::model_file::{self, ModelFileError};
use crate::stream::{StreamError, StreamEvent, StreamReader};

/// Environment variable capping the per-tick worker count.
pub const THREADS_ENV: &str = "SENTINEL_THREADS";

/// Worker count for per-model forward passes: the machine's parallelism,
/// capped by `SENTINEL_THREADS` when set. Never zero.
pub fn resolve_threads() -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => available.min(n),
            _ => available,
        },
        Err(_) => available,
    }
}

/// Runs every task exactly once, splitting the slice across `threads`
/// scoped workers when more than one is requested. Each task writes into
/// its own engine slot, so the result is identical regardless of the split
/// or execution order.
pub fn run_tasks(tasks: &mut [InferenceTask<'_>], threads: usize) {
    if threads <= 1 || tasks.len() <= 1 {
        for task in tasks {
            task.run();
        }
        return;
    }
    let per = tasks.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for chunk in tasks.chunks_mut(per) {
            scope.spawn(move || {
                for task in chunk {
                    task.run();
                }
            });
        }
    });
}

/// Why a hosted run failed.
#[derive(Debug, Error)]
pub enum HostError {
    /// Underlying IO failure.
    #[error("io: {0}")]
    Io(#[from] io::Error),
    /// The stream file failed.
    #[error("stream: {0}")]
    Stream(#[from] StreamError),
    /// The engine rejected a registration.
    #[error("runtime: {0}")]
    Runtime(#[from] RuntimeError),
    /// A model file failed to parse.
    #[error("model {}: {error}", path.display())]
    Model {
        path: PathBuf,
        #[source]
        error: ModelFileError,
    },
}

/// Live load/unload commands, read from an append-only text file polled
/// between ticks. Each line is either `load <model-file-path>` or
/// `unload <model-id>`; lines already executed are never re-run, so hosts
/// append commands rather than rewrite the file. Bad lines are reported on
/// stderr and skipped — a typo must not kill a live run.
pub struct ControlFile {
    path: PathBuf,
    lines_done: usize,
}

impl ControlFile {
    /// Watches `path`, which need not exist yet.
    pub fn new(path: PathBuf) -> ControlFile {
        ControlFile { path, lines_done: 0 }
    }

    /// Executes any new commands against the engine. Returns how many
    /// commands were applied.
    pub fn poll(&mut self, engine: &mut Engine) -> usize {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(_) => return 0, // absent file: nothing to do yet
        };
        let mut applied = 0;
        for (i, line) in text.lines().enumerate() {
            if i < self.lines_done {
                continue;
            }
            self.lines_done = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match self.execute(engine, line) {
                Ok(()) => applied += 1,
                Err(msg) => eprintln!("error: control line {}: {msg}", i + 1),
            }
        }
        applied
    }

    fn execute(&self, engine: &mut Engine, line: &str) -> Result<(), String> {
        let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match verb {
            "load" => {
                if rest.is_empty() {
                    return Err("load needs a model file path".into());
                }
                let model = model_file::read_model(Path::new(rest))
                    .map_err(|e| format!("{e}"))?;
                let id = model.id;
                engine
                    .register(model.into_registration())
                    .map_err(|e| format!("{e}"))?;
                eprintln!("control: loaded model {id} from {rest}");
                Ok(())
            }
            "unload" => {
                let id: ModelId = rest
                    .parse()
                    .map_err(|_| format!("bad model id {rest:?}"))?;
                if engine.unload(id) {
                    eprintln!("control: unloaded model {id}");
                    Ok(())
                } else {
                    Err(format!("model {id} is not loaded"))
                }
            }
            other => Err(format!("unknown verb {other:?}")),
        }
    }
}

/// What [`drive_stream`] produced: one record per tick plus reader-level
/// counts the engine cannot see.
#[derive(Debug, Clone, Default)]
pub struct StreamOutcome {
    /// One entry per tick, in order.
    pub records: Vec<RunRecord>,
    /// Stream boundaries encountered.
    pub boundaries: u64,
    /// Rows the reader could not parse (each also counted by the engine as
    /// a rejected sample).
    pub malformed: u64,
}

/// Streams every event through the engine.
///
/// Samples become ticks; boundaries reset the window history; unparseable
/// rows are fed through as empty samples so the engine's rejection
/// telemetry counts them and the tick still yields a [`RunRecord`]. The
/// control file, when given, is polled before every tick. `on_tick` sees
/// each tick's report — hosts use it to collect MSED traces or drive
/// progress output.
pub fn drive_stream(
    engine: &mut Engine,
    reader: &mut StreamReader,
    threads: usize,
    mut control: Option<&mut ControlFile>,
    mut on_tick: impl FnMut(&TickReport),
) -> Result<StreamOutcome, HostError> {
    let started = Instant::now();
    let mut outcome = StreamOutcome::default();
    let empty: [f64; 0] = [];
    while let Some(event) = reader.next_event()? {
        if let Some(ctl) = control.as_deref_mut() {
            ctl.poll(engine);
        }
        let row = match event {
            StreamEvent::Sample(row) => row,
            StreamEvent::Boundary => {
                engine.reset_stream();
                outcome.boundaries += 1;
                continue;
            }
            StreamEvent::Malformed { .. } => {
                outcome.malformed += 1;
                Vec::new()
            }
        };
        let sample: &[f64] = if row.is_empty() { &empty } else { &row };
        let wall_us = started.elapsed().as_secs_f64() * 1e6;
        let tick_started = Instant::now();
        let report = engine.tick_with(sample, wall_us, |tasks| run_tasks(tasks, threads));
        let duration_us = (tick_started.elapsed().as_secs_f64() * 1e6).max(1e-3);
        outcome.records.push(RunRecord {
            run_index: outcome.records.len() as u64,
            duration_us,
            models_run: report.models_run,
            msed: report.msed,
        });
        on_tick(&report);
    }
    Ok(outcome)
}

/// Writes RunRecords as CSV: `run_index,duration_us,models_run,msed`, one
/// row per tick; `msed` is empty for ticks where no model ran.
pub fn write_telemetry(path: &Path, records: &[RunRecord]) -> Result<(), io::Error> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "run_index,duration_us,models_run,msed")?;
    for r in records {
        match r.msed {
            Some(m) => writeln!(w, "{},{},{},{}", r.run_index, r.duration_us, r.models_run, m)?,
            None => writeln!(w, "{},{},{},", r.run_index, r.duration_us, r.models_run)?,
        }
    }
    w.flush()
}

/// Writes drained windows best-first. The first line is the stream schema
/// as a CSV header; each window contributes a metadata line
/// (`#window,end_sample=…,stream=…,msed=…,wall_time_us=…,seds=id:sed;…`)
/// followed by its raw rows as CSV, oldest first.
pub fn write_drain(
    path: &Path,
    schema: &[String],
    windows: &[ScoredWindow],
) -> Result<(), io::Error> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", schema.join(","))?;
    for sw in windows {
        let seds: Vec<String> = sw
            .per_model_sed
            .iter()
            .map(|(id, sed)| format!("{id}:{sed}"))
            .collect();
        writeln!(
            w,
            "#window,end_sample={},stream={},msed={},wall_time_us={},seds={}",
            sw.end_sample_index(),
            sw.window.origin.stream,
            sw.msed,
            sw.wall_time_us,
            seds.join(";")
        )?;
        for row in 0..sw.window.rows {
            let cells: Vec<String> = (0..sw.window.cols)
                .map(|c| sw.window.data[row * sw.window.cols + c].to_string())
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
    }
    w.flush()
}

/// Loads every `*.sntl` file under `dir` (sorted by file name for a stable
/// registration order) or, when `dir` is a regular file, just that file.
pub fn load_model_files(dir: &Path) -> Result<Vec<model_file::ModelFile>, HostError> {
    let mut paths: Vec<PathBuf> = Vec::new();
    if dir.is_file() {
        paths.push(dir.to_path_buf());
    } else {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "sntl") {
                paths.push(path);
            }
        }
        paths.sort();
    }
    let mut models = Vec::with_capacity(paths.len());
    for path in paths {
        let model = model_file::read_model(&path)
            .map_err(|error| HostError::Model { path: path.clone(), error })?;
        models.push(model);
    }
    Ok(models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_file::{write_model, ModelFile};
    use crate::stream::CsvStreamWriter;
    use sentinel_core::datasets::ScalingPair;
    use sentinel_core::network::{init_parameters, ModelSpec};
    use sentinel_core::runtime::EngineConfig;
    use tempfile::tempdir;

    fn small_model(id: ModelId, inputs: &[&str], output: &str, seed: u64) -> ModelFile {
        let spec = ModelSpec::new(
            inputs.iter().map(|s| s.to_string()).collect(),
            output.to_string(),
            2,
            2,
            3,
        )
        .unwrap();
        let params = init_parameters(&spec, seed).unwrap();
        ModelFile {
            id,
            params,
            input_scaling: vec![ScalingPair::identity(); inputs.len()],
            output_scaling: ScalingPair::identity(),
        }
    }

    fn schema(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn drive_stream_ticks_everything_and_counts_boundaries() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let sig = schema(&["a", "b"]);
        let mut w = CsvStreamWriter::create(&path, &sig).unwrap();
        for i in 0..5 {
            w.write_sample(&[i as f64, 2.0 * i as f64]).unwrap();
        }
        w.write_boundary().unwrap();
        for i in 0..3 {
            w.write_sample(&[i as f64, 0.5]).unwrap();
        }
        w.finish().unwrap();
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"oops,1\n")
            .unwrap();

        let mut engine = Engine::new(sig, EngineConfig::default()).unwrap();
        let model = small_model(1, &["a"], "b", 3);
        engine.register(model.into_registration()).unwrap();

        let mut reader = crate::stream::open_stream(&path).unwrap();
        let mut ticks = 0;
        let outcome =
            drive_stream(&mut engine, &mut reader, 1, None, |_| ticks += 1).unwrap();

        // 5 + 3 samples + 1 malformed = 9 ticks, all with records.
        assert_eq!(outcome.records.len(), 9);
        assert_eq!(ticks, 9);
        assert_eq!(outcome.boundaries, 1);
        assert_eq!(outcome.malformed, 1);
        assert!(outcome.records.iter().all(|r| r.duration_us > 0.0));
        let t = engine.telemetry();
        assert_eq!(t.samples_accepted, 8);
        assert_eq!(t.samples_rejected, 1);
        // Window length 2 with a boundary: ticks 0 and 5 lack history, the
        // malformed tick ran nothing.
        assert_eq!(t.models_run, 6);
    }

    #[test]
    fn threaded_runner_matches_serial() {
        let sig = schema(&["a", "b", "c"]);
        let mk = |seed| {
            let mut e = Engine::new(sig.clone(), EngineConfig::default()).unwrap();
            e.register(small_model(1, &["a", "b"], "c", seed).into_registration())
                .unwrap();
            e.register(small_model(2, &["b"], "a", seed + 1).into_registration())
                .unwrap();
            e.register(small_model(3, &["c", "a"], "b", seed + 2).into_registration())
                .unwrap();
            e
        };
        let mut serial = mk(9);
        let mut threaded = mk(9);
        for i in 0..64u32 {
            let row = [
                (i as f64 * 0.37).sin(),
                (i as f64 * 0.11).cos(),
                i as f64 * 0.01,
            ];
            let a = serial.tick_with(&row, 0.0, |tasks| run_tasks(tasks, 1));
            let b = threaded.tick_with(&row, 0.0, |tasks| run_tasks(tasks, 3));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn control_file_loads_and_unloads_live() {
        let dir = tempdir().unwrap();
        let model_path = dir.path().join("m.sntl");
        write_model(&model_path, &small_model(7, &["a"], "b", 5)).unwrap();

        let ctl_path = dir.path().join("ctl");
        let mut engine =
            Engine::new(schema(&["a", "b"]), EngineConfig::default()).unwrap();
        let mut ctl = ControlFile::new(ctl_path.clone());

        // Absent file: no-op.
        assert_eq!(ctl.poll(&mut engine), 0);

        std::fs::write(&ctl_path, format!("load {}\n", model_path.display())).unwrap();
        assert_eq!(ctl.poll(&mut engine), 1);
        assert_eq!(engine.model_ids(), vec![7]);

        // Same content: already executed, nothing applied.
        assert_eq!(ctl.poll(&mut engine), 0);

        let mut text = std::fs::read_to_string(&ctl_path).unwrap();
        text.push_str("unload 7\n# comment\nunload 99\n");
        std::fs::write(&ctl_path, text).unwrap();
        // unload 7 applies; unload 99 fails (reported, skipped).
        assert_eq!(ctl.poll(&mut engine), 1);
        assert!(engine.model_ids().is_empty());
    }

    #[test]
    fn load_model_files_sorts_by_name() {
        let dir = tempdir().unwrap();
        write_model(&dir.path().join("b.sntl"), &small_model(2, &["a"], "b", 1)).unwrap();
        write_model(&dir.path().join("a.sntl"), &small_model(1, &["b"], "a", 2)).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let models = load_model_files(dir.path()).unwrap();
        assert_eq!(
            models.iter().map(|m| m.id).collect::<Vec<_>>(),
            vec![1, 2]
        );
    }

    #[test]
    fn telemetry_csv_shape() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_telemetry(
            &path,
            &[
                RunRecord { run_index: 0, duration_us: 1.5, models_run: 2, msed: Some(0.25) },
                RunRecord { run_index: 1, duration_us: 2.0, models_run: 0, msed: None },
            ],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "run_index,duration_us,models_run,msed\n0,1.5,2,0.25\n1,2,0,\n"
        );
    }
}
