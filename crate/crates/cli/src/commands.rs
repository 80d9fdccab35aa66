//! The subcommands, usable as a library so tests can drive them directly.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use tactile_core::circuit::{resource_budget, GateLogic, ResourceBudget};
use tactile_core::device::{Device, HostLink};
use tactile_core::firmware::TraceRecord;
use tactile_core::protocol::{loopback, Command, LoopbackPort, ProtocolError, Response};
use tactile_core::raster::{
    box_scale, load_pnm, ordered_dither, render_braille, threshold, GrayImage, Pnm, RasterError,
};
use tactile_core::{Bitmap, GridDims};

use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("link: {0}")]
    Link(#[from] io::Error),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("device replied {0:?}")]
    Rejected(Response),
    #[error("device is busy")]
    Busy,
    #[error("device did not reply")]
    NoReply,
    #[error("{0}")]
    Usage(String),
    #[error("aborted on hazard")]
    HazardAbort,
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VERIFY_FAILED: u8 = 1;
    pub const INPUT_ERROR: u8 = 2;
    pub const HAZARD: u8 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::HazardAbort => exit::HAZARD,
            _ => exit::INPUT_ERROR,
        }
    }
}

/// Figures reported after a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub set_pulses: u64,
    pub reset_pulses: u64,
    pub total_joules: f64,
    pub max_temperature_c: f64,
    pub hazard_count: usize,
    pub steps: usize,
    pub simulated_time_s: f64,
    pub budget: ResourceBudget,
}

impl fmt::Display for RunStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "set_pulses={}", self.set_pulses)?;
        writeln!(f, "reset_pulses={}", self.reset_pulses)?;
        writeln!(f, "total_joules={:.6}", self.total_joules)?;
        writeln!(f, "max_temperature_c={:.3}", self.max_temperature_c)?;
        writeln!(f, "hazard_count={}", self.hazard_count)?;
        writeln!(f, "steps={}", self.steps)?;
        writeln!(f, "simulated_time_s={:.3}", self.simulated_time_s)?;
        writeln!(f, "budget={}", self.budget)
    }
}

/// A booted device with a host connected over the loopback link. Every
/// command goes through the real codec.
pub struct Session {
    device: Device,
    device_port: LoopbackPort,
    host: HostLink<LoopbackPort>,
    strict: bool,
}

impl Session {
    pub fn new(config: &Config, logic: GateLogic, trace: bool) -> Result<Self, CliError> {
        let dc = config.device_config(logic, trace)?;
        let device = Device::boot(&dc).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (host_port, device_port) = loopback();
        Ok(Self {
            device,
            device_port,
            host: HostLink::new(host_port, dc.dims),
            strict: config.strict_hazards,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.device.dims()
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    /// Sends one command and returns the reply.
    pub fn request(&mut self, cmd: &Command) -> Result<Response, CliError> {
        self.host.send(cmd)?;
        self.device.serve(&mut self.device_port)?;
        match self.host.recv()? {
            Some(r) => Ok(r?),
            None => Err(CliError::NoReply),
        }
    }

    fn expect_ack(&mut self, cmd: &Command) -> Result<(), CliError> {
        match self.request(cmd)? {
            Response::Ack => Ok(()),
            Response::Busy => Err(CliError::Busy),
            Response::Nak { reason_code } if reason_code == tactile_core::protocol::nak::HAZARD_ABORT => {
                Err(CliError::HazardAbort)
            }
            other => Err(CliError::Rejected(other)),
        }
    }

    /// Shows `frame`, returning whether the board now displays exactly it.
    pub fn show(&mut self, frame: &Bitmap) -> Result<bool, CliError> {
        self.expect_ack(&Command::Show(frame.clone()))?;
        Ok(&self.device.snapshot() == frame)
    }

    /// Clears the display, returning whether every plunger is down.
    pub fn clear(&mut self) -> Result<bool, CliError> {
        self.expect_ack(&Command::Clear)?;
        Ok(self.device.snapshot().is_clear())
    }

    pub fn stats(&self) -> RunStats {
        let l = self.device.ledger();
        let c = self.device.counters();
        RunStats {
            set_pulses: l.set_pulses,
            reset_pulses: l.reset_pulses,
            total_joules: l.total_joules,
            max_temperature_c: c.max_temperature_c,
            hazard_count: self.device.hazards().len(),
            steps: c.steps,
            simulated_time_s: c.simulated_time_s,
            budget: resource_budget(self.dims()),
        }
    }

    pub fn trace(&self) -> &[TraceRecord] {
        self.device.trace()
    }

    pub fn write_trace(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", TraceRecord::HEADER)?;
        for r in self.trace() {
            writeln!(out, "{r}")?;
        }
        out.flush()
    }

    fn outcome(&self, verified: bool) -> Outcome {
        let stats = self.stats();
        let hazard = self.strict && stats.hazard_count > 0;
        Outcome {
            stats,
            verified,
            hazard,
            truncated: 0,
        }
    }
}

/// Result of a display-changing subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stats: RunStats,
    /// The board ended up showing the intended frame.
    pub verified: bool,
    /// Strict mode saw a hazard.
    pub hazard: bool,
    /// Characters dropped by the Braille layout.
    pub truncated: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.hazard {
            exit::HAZARD
        } else if !self.verified {
            exit::VERIFY_FAILED
        } else {
            exit::OK
        }
    }
}

/// How grayscale input becomes a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Render {
    Threshold(u8),
    Dither,
}

impl Default for Render {
    fn default() -> Self {
        Render::Threshold(128)
    }
}

#[derive(Debug, Clone)]
pub enum ShowInput {
    Path(PathBuf),
    Bytes(Vec<u8>),
    Frame(Bitmap),
}

#[derive(Debug, Clone, Default)]
pub struct RunOpts {
    pub logic: GateLogic,
    pub trace: Option<PathBuf>,
}

/// Fits a decoded image to the display.
pub fn rasterize(pnm: Pnm, dims: GridDims, render: Render, invert: bool) -> Bitmap {
    let gray = match pnm {
        Pnm::Bitmap(b) if b.dims() == dims => {
            return if invert { b.complement() } else { b };
        }
        Pnm::Bitmap(b) => GrayImage::from_bitmap(&b),
        Pnm::Gray(g) => g,
    };
    let scaled = box_scale(&gray, dims);
    let frame = match render {
        Render::Threshold(t) => threshold(&scaled, t),
        Render::Dither => ordered_dither(&scaled),
    };
    if invert {
        frame.complement()
    } else {
        frame
    }
}

fn finish(session: &Session, opts: &RunOpts, verified: bool) -> Result<Outcome, CliError> {
    if let Some(path) = &opts.trace {
        let file = std::fs::File::create(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        session
            .write_trace(io::BufWriter::new(file))
            .map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
    }
    Ok(session.outcome(verified))
}

fn show_frame(config: &Config, frame: &Bitmap, opts: &RunOpts) -> Result<Outcome, CliError> {
    let mut session = Session::new(config, opts.logic, opts.trace.is_some())?;
    let verified = match session.show(frame) {
        Ok(v) => v,
        Err(CliError::HazardAbort) => false,
        Err(e) => return Err(e),
    };
    finish(&session, opts, verified)
}

/// `show`: rasterize an image (or take a literal frame) and display it.
pub fn cmd_show(
    config: &Config,
    input: ShowInput,
    render: Render,
    invert: bool,
    opts: &RunOpts,
) -> Result<Outcome, CliError> {
    let dims = config.dims()?;
    let frame = match input {
        ShowInput::Frame(f) => {
            if f.dims() != dims {
                return Err(CliError::Usage(format!("frame is {} but display is {dims}", f.dims())));
            }
            if invert {
                f.complement()
            } else {
                f
            }
        }
        ShowInput::Bytes(b) => rasterize(load_pnm(&b)?, dims, render, invert),
        ShowInput::Path(p) => {
            let bytes = std::fs::read(&p).map_err(|source| CliError::Io {
                path: p.display().to_string(),
                source,
            })?;
            rasterize(load_pnm(&bytes)?, dims, render, invert)
        }
    };
    show_frame(config, &frame, opts)
}

/// `text`: show a string as Braille.
pub fn cmd_text(config: &Config, text: &str, opts: &RunOpts) -> Result<Outcome, CliError> {
    let r = render_braille(text, config.dims()?)?;
    let mut out = show_frame(config, &r.frame, opts)?;
    out.truncated = r.truncated;
    Ok(out)
}

/// `clear`: reset every row.
pub fn cmd_clear(config: &Config, opts: &RunOpts) -> Result<Outcome, CliError> {
    let mut session = Session::new(config, opts.logic, opts.trace.is_some())?;
    let verified = match session.clear() {
        Ok(v) => v,
        Err(CliError::HazardAbort) => false,
        Err(e) => return Err(e),
    };
    finish(&session, opts, verified)
}

/// `budget`.
pub fn cmd_budget(config: &Config) -> Result<ResourceBudget, CliError> {
    Ok(resource_budget(config.dims()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScope {
    /// Every frame of a grid of at most 16 taxels.
    Exhaustive { rows: usize, cols: usize },
    /// `count` random frames at the configured size, shown back to back.
    Random { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub index: usize,
    pub frame: Bitmap,
    pub displayed: Bitmap,
    pub stage: &'static str,
    pub hazards: usize,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "counterexample #{} ({} stage, {} hazard(s))",
            self.index, self.stage, self.hazards
        )?;
        writeln!(f, "intended:")?;
        write!(f, "{}", self.frame)?;
        writeln!(f, "displayed:")?;
        write!(f, "{}", self.displayed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub checked: usize,
    pub failures: usize,
    pub first: Option<Counterexample>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn verify_one(config: &Config, logic: GateLogic, index: usize, frame: Bitmap) -> Result<Option<Counterexample>, CliError> {
    let mut s = Session::new(config, logic, false)?;
    let fail = |s: &Session, stage, frame: Bitmap| Counterexample {
        index,
        frame,
        displayed: s.device().snapshot(),
        stage,
        hazards: s.device().hazards().len(),
    };
    let shown = match s.show(&frame) {
        Ok(ok) => ok,
        Err(CliError::HazardAbort) => false,
        Err(e) => return Err(e),
    };
    if !shown || !s.device().hazards().is_empty() {
        return Ok(Some(fail(&s, "show", frame)));
    }
    let cleared = match s.clear() {
        Ok(ok) => ok,
        Err(CliError::HazardAbort) => false,
        Err(e) => return Err(e),
    };
    if !cleared || !s.device().hazards().is_empty() {
        let clear = Bitmap::new(frame.dims());
        return Ok(Some(fail(&s, "clear", clear)));
    }
    Ok(None)
}

/// `verify`: the addressing oracle. Each frame must display exactly and
/// then clear completely, with no hazards.
pub fn cmd_verify(
    config: &Config,
    scope: VerifyScope,
    logic: GateLogic,
    parallel: bool,
) -> Result<VerifyReport, CliError> {
    match scope {
        VerifyScope::Exhaustive { rows, cols } => {
            let dims = GridDims::new(rows, cols).map_err(|e| CliError::Usage(e.to_string()))?;
            if dims.cell_count() > 16 {
                return Err(CliError::Usage(format!(
                    "exhaustive verification is limited to 16 taxels, {dims} has {}",
                    dims.cell_count()
                )));
            }
            let cfg = Config {
                rows,
                cols,
                ..config.clone()
            };
            cfg.validate()?;
            let total = 1usize << dims.cell_count();
            let check = |i: usize| verify_one(&cfg, logic, i, Bitmap::from_index(dims, i as u64));
            let results: Vec<Option<Counterexample>> = if parallel {
                (0..total).into_par_iter().map(check).collect::<Result<_, _>>()?
            } else {
                (0..total).map(check).collect::<Result<_, _>>()?
            };
            let failures = results.iter().filter(|r| r.is_some()).count();
            Ok(VerifyReport {
                checked: total,
                failures,
                first: results.into_iter().flatten().next(),
            })
        }
        VerifyScope::Random { count, seed } => {
            let dims = config.dims()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = Session::new(config, logic, false)?;
            let mut report = VerifyReport {
                checked: 0,
                failures: 0,
                first: None,
            };
            for index in 0..count {
                let bits = (0..dims.cell_count()).map(|_| rng.gen_bool(0.5)).collect();
                let frame = Bitmap::from_bits(dims, bits).expect("sized");
                let hazards_before = s.device().hazards().len();
                let ok = match s.show(&frame) {
                    Ok(ok) => ok,
                    Err(CliError::HazardAbort) => false,
                    Err(e) => return Err(e),
                };
                report.checked += 1;
                let new_hazards = s.device().hazards().len() - hazards_before;
                if !ok || new_hazards > 0 {
                    report.failures += 1;
                    report.first.get_or_insert_with(|| Counterexample {
                        index,
                        frame: frame.clone(),
                        displayed: s.device().snapshot(),
                        stage: "show",
                        hazards: new_hazards,
                    });
                }
            }
            Ok(report)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(rows: usize, cols: usize) -> Config {
        Config {
            rows,
            cols,
            ..Config::default()
        }
    }

    #[test]
    fn exhaustive_2x2() {
        let r = cmd_verify(&Config::default(), VerifyScope::Exhaustive { rows: 2, cols: 2 }, GateLogic::Reference, false).unwrap();
        assert_eq!((r.checked, r.failures), (16, 0));
    }

    #[test]
    fn mutant_is_caught() {
        let r = cmd_verify(&Config::default(), VerifyScope::Exhaustive { rows: 2, cols: 2 }, GateLogic::SetGateAnd, true).unwrap();
        // every frame fails: resets double-drive, sets never fire
        assert_eq!(r.failures, 16);
        let first = r.first.unwrap();
        assert_eq!(first.index, 0);
        assert_eq!(first.stage, "show");
        assert!(first.hazards > 0);
    }

    #[test]
    fn exhaustive_limit() {
        let r = cmd_verify(&Config::default(), VerifyScope::Exhaustive { rows: 4, cols: 5 }, GateLogic::Reference, false);
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn rasterize_paths() {
        let d = GridDims::new(2, 2).unwrap();
        let b = Bitmap::from_index(d, 0b1001);
        assert_eq!(rasterize(Pnm::Bitmap(b.clone()), d, Render::Dither, false), b);
        assert_eq!(rasterize(Pnm::Bitmap(b.clone()), d, Render::default(), true), b.complement());
        // 4×4 black square in the top-left of an 8×8 white image
        let mut g = GrayImage::uniform(8, 8, 255);
        for y in 0..4 {
            for x in 0..4 {
                g.set(x, y, 0);
            }
        }
        let f = rasterize(Pnm::Gray(g), d, Render::default(), false);
        assert_eq!(f.raised().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn show_literal_frame_wrong_dims() {
        let r = cmd_show(
            &small(4, 4),
            ShowInput::Frame(Bitmap::new(GridDims::new(2, 2).unwrap())),
            Render::default(),
            false,
            &RunOpts::default(),
        );
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn stats_render() {
        let o = cmd_clear(&small(1, 1), &RunOpts::default()).unwrap();
        let text = o.stats.to_string();
        assert!(text.starts_with("set_pulses=0\nreset_pulses=1\n"));
        assert!(text.contains("budget=2 column + 1 row transistors, 6 pins"));
    }

    #[test]
    fn strict_hazard_exit_code() {
        let mut cfg = small(2, 2);
        let opts = RunOpts {
            logic: GateLogic::SetGateAnd,
            trace: None,
        };
        let frame = Bitmap::filled(cfg.dims().unwrap());
        let lax = cmd_show(&cfg, ShowInput::Frame(frame.clone()), Render::default(), false, &opts)
            .unwrap();
        assert!(lax.stats.hazard_count > 0);
        assert_ne!(lax.exit_code(), exit::HAZARD);

        cfg.strict_hazards = true;
        let o = cmd_show(&cfg, ShowInput::Frame(frame), Render::default(), false, &opts).unwrap();
        assert!(o.hazard && !o.verified);
        assert_eq!(o.stats.set_pulses + o.stats.reset_pulses, 0);
        assert_eq!(o.exit_code(), exit::HAZARD);
    }
}
