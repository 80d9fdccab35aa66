//! A complete simulated display: controller firmware driving the board,
//! reachable over the framed byte protocol.

use std::io::{self, Read, Write};

use crate::circuit::{EnergyLedger, GateLogic, HazardReport, PowerParams, ThermalParams};
use crate::firmware::{
    run_schedule, Board, Controller, FirmwareError, RunOptions, Timing, TraceRecord, WaveformStep,
};
use crate::protocol::{
    self, nak, Command, Message, ProtocolError, Response, StatusReport, StreamDecoder,
};
use crate::taxel::{new_grid, snapshot, Bitmap, GridDims, GridState, RATED_AMBIENT_C};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    pub dims: GridDims,
    pub power: PowerParams,
    pub thermal: ThermalParams,
    pub ambient_c: f64,
    pub timing: Timing,
    pub skip_reset_if_clear: bool,
    pub strict_hazards: bool,
    pub logic: GateLogic,
    pub trace: bool,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self {
            dims: GridDims::reference(),
            power: PowerParams::default(),
            thermal: ThermalParams::default(),
            ambient_c: RATED_AMBIENT_C,
            timing: Timing::default(),
            skip_reset_if_clear: false,
            strict_hazards: false,
            logic: GateLogic::Reference,
            trace: false,
        }
    }
}

/// Totals since power-on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceCounters {
    pub steps: usize,
    pub simulated_time_s: f64,
    pub max_temperature_c: f64,
}

#[derive(Debug, Clone)]
pub struct Device {
    controller: Controller,
    board: Board,
    ledger: EnergyLedger,
    hazards: HazardReport,
    counters: DeviceCounters,
    strict: bool,
    record_trace: bool,
    trace: Vec<TraceRecord>,
    decoder: StreamDecoder,
}

impl Device {
    pub fn boot(cfg: &DeviceConfig) -> Result<Self, FirmwareError> {
        cfg.power.validate()?;
        let controller = Controller::boot(cfg.dims, cfg.timing, cfg.skip_reset_if_clear)?;
        Ok(Self {
            controller,
            board: Board {
                grid: new_grid(cfg.dims, cfg.ambient_c),
                power: cfg.power,
                thermal: cfg.thermal,
                ambient_c: cfg.ambient_c,
                logic: cfg.logic,
            },
            ledger: EnergyLedger::default(),
            hazards: HazardReport::default(),
            counters: DeviceCounters {
                max_temperature_c: cfg.ambient_c,
                ..DeviceCounters::default()
            },
            strict: cfg.strict_hazards,
            record_trace: cfg.trace,
            trace: Vec::new(),
            decoder: StreamDecoder::new(cfg.dims),
        })
    }

    pub fn dims(&self) -> GridDims {
        self.controller.dims()
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn grid(&self) -> &GridState {
        &self.board.grid
    }

    pub fn grid_mut(&mut self) -> &mut GridState {
        &mut self.board.grid
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn hazards(&self) -> &HazardReport {
        &self.hazards
    }

    pub fn counters(&self) -> &DeviceCounters {
        &self.counters
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Plunger positions as a frame.
    pub fn snapshot(&self) -> Bitmap {
        snapshot(&self.board.grid)
    }

    pub fn status(&self) -> StatusReport {
        let clamp = |n: u64| u16::try_from(n).unwrap_or(u16::MAX);
        StatusReport {
            state_code: self.controller.state().code(),
            set_pulses: clamp(self.ledger.set_pulses),
            reset_pulses: clamp(self.ledger.reset_pulses),
            shadow: self.controller.shadow().clone(),
        }
    }

    fn play(&mut self, schedule: &[WaveformStep]) -> Result<(), FirmwareError> {
        let opts = RunOptions {
            strict: self.strict,
            trace: self.record_trace,
            first_step: self.counters.steps,
        };
        let controller = &mut self.controller;
        let run = run_schedule(schedule, &mut self.board, &mut self.ledger, opts, |s| {
            controller.on_step(s)
        });
        match run {
            Ok(run) => {
                self.counters.steps += run.steps;
                self.counters.simulated_time_s += run.elapsed_s;
                self.counters.max_temperature_c =
                    self.counters.max_temperature_c.max(run.max_temperature_c);
                self.hazards.extend(run.hazards.hazards);
                self.trace.extend(run.trace);
                Ok(())
            }
            Err(e) => {
                if let FirmwareError::HazardAbort(h) = &e {
                    self.hazards.extend([h.clone()]);
                }
                self.controller.abort();
                Err(e)
            }
        }
    }

    /// Runs one command to completion, including any chained scan.
    pub fn execute(&mut self, cmd: &Command) -> Result<Response, FirmwareError> {
        let mut schedule = self.controller.handle_command(cmd)?;
        match cmd {
            Command::Ping => return Ok(Response::Pong),
            Command::Status => return Ok(Response::Status(self.status())),
            _ => {}
        }
        loop {
            self.play(&schedule)?;
            match self.controller.scan_complete()? {
                Some(next) => schedule = next,
                None => return Ok(Response::Ack),
            }
        }
    }

    fn respond(&mut self, msg: Result<Message, ProtocolError>) -> Response {
        match msg {
            Ok(Message::Command(cmd)) => match self.execute(&cmd) {
                Ok(r) => r,
                Err(FirmwareError::Busy) => Response::Busy,
                Err(FirmwareError::DimsMismatch { .. }) => Response::Nak {
                    reason_code: nak::BAD_DIMS,
                },
                Err(FirmwareError::HazardAbort(_)) => Response::Nak {
                    reason_code: nak::HAZARD_ABORT,
                },
                Err(_) => Response::Nak {
                    reason_code: nak::INTERNAL,
                },
            },
            Ok(Message::Response(_)) => Response::Nak {
                reason_code: nak::UNEXPECTED_RESPONSE,
            },
            Err(e) => Response::Nak {
                reason_code: e.nak_code(),
            },
        }
    }

    /// Feeds received bytes to the firmware and returns the encoded replies.
    pub fn receive(&mut self, bytes: &[u8]) -> Vec<u8> {
        self.decoder.push(bytes);
        let mut out = Vec::new();
        while let Some(msg) = self.decoder.next_message() {
            let reply = self.respond(msg);
            out.extend(protocol::encode(&reply.into()).expect("replies fit in one frame"));
        }
        out
    }

    /// Drains whatever is waiting on `port`, handles it and writes replies
    /// back. Returns the number of bytes consumed.
    pub fn serve<P: Read + Write>(&mut self, port: &mut P) -> io::Result<usize> {
        let mut input = Vec::new();
        port.read_to_end(&mut input)?;
        let out = self.receive(&input);
        port.write_all(&out)?;
        port.flush()?;
        Ok(input.len())
    }
}

/// Host end of a link: encodes commands and decodes replies.
#[derive(Debug)]
pub struct HostLink<P> {
    port: P,
    decoder: StreamDecoder,
}

impl<P: Read + Write> HostLink<P> {
    pub fn new(port: P, dims: GridDims) -> Self {
        Self {
            port,
            decoder: StreamDecoder::new(dims),
        }
    }

    pub fn send(&mut self, cmd: &Command) -> io::Result<()> {
        let frame = protocol::encode(&cmd.clone().into())
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        self.port.write_all(&frame)?;
        self.port.flush()
    }

    /// Next reply already on the wire, if any.
    pub fn recv(&mut self) -> io::Result<Option<Result<Response, ProtocolError>>> {
        let mut buf = Vec::new();
        self.port.read_to_end(&mut buf)?;
        self.decoder.push(&buf);
        Ok(self.decoder.next_message().map(|m| match m {
            Ok(Message::Response(r)) => Ok(r),
            Ok(Message::Command(_)) => Err(ProtocolError::UnknownCommand(0)),
            Err(e) => Err(e),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::loopback;

    fn cfg(r: usize, c: usize) -> DeviceConfig {
        DeviceConfig {
            dims: GridDims::new(r, c).unwrap(),
            ..DeviceConfig::default()
        }
    }

    #[test]
    fn boot_status() {
        let mut d = Device::boot(&DeviceConfig::default()).unwrap();
        match d.execute(&Command::Status).unwrap() {
            Response::Status(s) => {
                assert_eq!(s.state_code, 0);
                assert!(s.shadow.is_clear());
                assert_eq!((s.set_pulses, s.reset_pulses), (0, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn observers_are_pure() {
        let mut d = Device::boot(&cfg(4, 4)).unwrap();
        d.execute(&Command::Show(Bitmap::from_index(d.dims(), 0x1234))).unwrap();
        let grid = d.grid().clone();
        let state = d.controller().state().clone();
        let ledger = d.ledger().clone();
        assert_eq!(d.execute(&Command::Ping).unwrap(), Response::Pong);
        d.execute(&Command::Status).unwrap();
        assert_eq!(d.grid(), &grid);
        assert_eq!(d.controller().state(), &state);
        assert_eq!(d.ledger(), &ledger);
    }

    #[test]
    fn show_over_wire() {
        let (host_port, mut dev_port) = loopback();
        let dims = GridDims::reference();
        let mut dev = Device::boot(&DeviceConfig::default()).unwrap();
        let mut host = HostLink::new(host_port, dims);
        let mut f = Bitmap::new(dims);
        f.set(7, 3, true);
        host.send(&Command::Show(f.clone())).unwrap();
        dev.serve(&mut dev_port).unwrap();
        assert_eq!(host.recv().unwrap(), Some(Ok(Response::Ack)));
        assert_eq!(dev.snapshot(), f);

        host.send(&Command::Status).unwrap();
        dev.serve(&mut dev_port).unwrap();
        match host.recv().unwrap() {
            Some(Ok(Response::Status(s))) => {
                assert_eq!(s.state_code, 2);
                assert_eq!(s.shadow, f);
                assert_eq!(s.set_pulses, 1);
                assert_eq!(s.reset_pulses, 256);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corrupt_frame_is_nakked() {
        let mut dev = Device::boot(&DeviceConfig::default()).unwrap();
        let reply = dev.receive(&[0xA5, 0x04, 0x00, 0x05]);
        let (msg, _) = protocol::decode(&reply, dev.dims()).unwrap();
        assert_eq!(
            msg,
            Message::Response(Response::Nak {
                reason_code: nak::BAD_CHECKSUM
            })
        );
    }

    #[test]
    fn strict_abort_reports_nak() {
        let mut c = cfg(2, 2);
        c.strict_hazards = true;
        c.logic = GateLogic::SetGateAnd;
        let mut dev = Device::boot(&c).unwrap();
        let frame = protocol::encode(&Command::Clear.into()).unwrap();
        let reply = dev.receive(&frame);
        let (msg, _) = protocol::decode(&reply, dev.dims()).unwrap();
        assert_eq!(
            msg,
            Message::Response(Response::Nak {
                reason_code: nak::HAZARD_ABORT
            })
        );
        assert_eq!(dev.hazards().len(), 1);
        assert_eq!(dev.controller().state(), &crate::firmware::ControllerState::Ready);
    }
}
