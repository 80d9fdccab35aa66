use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tactile_core::circuit::{pulse_energy, PowerParams};
use tactile_core::device::{Device, DeviceConfig};
use tactile_core::firmware::{plan_clear, plan_show, Phase, Timing, WaveformStep};
use tactile_core::protocol::{Command, Response};
use tactile_core::{Bitmap, GridDims};

fn config(rows: usize, cols: usize, skip: bool) -> DeviceConfig {
    DeviceConfig {
        dims: GridDims::new(rows, cols).unwrap(),
        skip_reset_if_clear: skip,
        ..DeviceConfig::default()
    }
}

fn random_frame(rng: &mut ChaCha8Rng, dims: GridDims) -> Bitmap {
    let bits = (0..dims.cell_count()).map(|_| rng.gen_bool(0.5)).collect();
    Bitmap::from_bits(dims, bits).unwrap()
}

/// Structural check, independent of execution: a selected row in reset mode
/// must have every wired column bit high, and no step may address a row
/// beyond the grid.
fn assert_hazard_free(schedule: &[WaveformStep], dims: GridDims) {
    let all = ((1u32 << dims.cols()) - 1) as u16;
    for (i, s) in schedule.iter().enumerate() {
        assert!(s.duration_s > 0.0);
        if !s.pins.row_enable {
            continue;
        }
        assert!(usize::from(s.pins.row_addr()) < dims.rows(), "step {i} addresses row off grid");
        if s.pins.mode {
            assert_eq!(s.pins.col & all, all, "step {i}: partial reset");
        }
        assert!(matches!(s.phase, Phase::RowReset | Phase::RowSet));
    }
}

#[test]
fn exhaustive_3x3_show_and_clear() {
    let cfg = config(3, 3, false);
    for word in 0..1u64 << 9 {
        let f = Bitmap::from_index(cfg.dims, word);
        let mut dev = Device::boot(&cfg).unwrap();
        assert_eq!(dev.execute(&Command::Show(f.clone())).unwrap(), Response::Ack);
        assert_eq!(dev.snapshot(), f, "frame {word:#x}");
        dev.execute(&Command::Clear).unwrap();
        assert!(dev.snapshot().is_clear());
        assert!(dev.hazards().is_empty());
    }
}

#[test]
fn sequential_shows_land_on_last_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for skip in [false, true] {
        let cfg = config(16, 16, skip);
        let mut dev = Device::boot(&cfg).unwrap();
        for _ in 0..60 {
            let f = random_frame(&mut rng, cfg.dims);
            dev.execute(&Command::Show(f.clone())).unwrap();
            assert_eq!(dev.snapshot(), f);
        }
        assert!(dev.hazards().is_empty());
    }
}

#[test]
fn planners_never_emit_partial_resets() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = Timing::default();
    for (r, c) in [(1, 1), (2, 5), (4, 4), (16, 16), (7, 13)] {
        let d = GridDims::new(r, c).unwrap();
        assert_hazard_free(&plan_clear(d, &t).unwrap(), d);
        for _ in 0..50 {
            let f = random_frame(&mut rng, d);
            let shadow = random_frame(&mut rng, d);
            for skip in [false, true] {
                assert_hazard_free(&plan_show(&f, &t, skip, &shadow).unwrap(), d);
            }
        }
    }
}

#[test]
fn show_from_clear_costs_one_pulse_per_raised_taxel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = config(16, 16, true);
    let e = pulse_energy(&PowerParams::default()).unwrap();
    for _ in 0..50 {
        let f = random_frame(&mut rng, cfg.dims);
        let mut dev = Device::boot(&cfg).unwrap();
        dev.execute(&Command::Show(f.clone())).unwrap();
        let k = f.count_raised() as u64;
        assert_eq!(dev.ledger().set_pulses, k);
        assert_eq!(dev.ledger().reset_pulses, 0);
        let expect = k as f64 * e;
        let got = dev.ledger().total_joules;
        assert!(k == 0 && got == 0.0 || ((got - expect) / expect).abs() <= 1e-9);
    }
}

#[test]
fn clear_resets_every_taxel_once() {
    let cfg = config(16, 16, false);
    let mut dev = Device::boot(&cfg).unwrap();
    dev.execute(&Command::Clear).unwrap();
    assert_eq!(dev.ledger().reset_pulses, 256);
    assert_eq!(dev.ledger().set_pulses, 0);
    assert!(dev.snapshot().is_clear());
}

#[test]
fn clear_works_from_any_physical_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = config(5, 7, false);
    for _ in 0..100 {
        let mut dev = Device::boot(&cfg).unwrap();
        let junk = random_frame(&mut rng, cfg.dims);
        for (r, c) in junk.raised() {
            dev.grid_mut().cell_mut(r, c).plunger = tactile_core::taxel::Plunger::Up;
        }
        dev.execute(&Command::Clear).unwrap();
        assert!(dev.snapshot().is_clear());
    }
}

#[test]
fn holding_costs_nothing() {
    let cfg = config(16, 16, false);
    let mut dev = Device::boot(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    dev.execute(&Command::Show(random_frame(&mut rng, cfg.dims))).unwrap();
    let ledger = dev.ledger().clone();
    for _ in 0..500 {
        dev.execute(&Command::Status).unwrap();
        dev.execute(&Command::Ping).unwrap();
    }
    assert_eq!(dev.ledger(), &ledger);
    assert_eq!(dev.ledger().static_joules, 0.0);
}

#[test]
fn temperature_stays_bounded_under_repeated_scans() {
    let cfg = config(16, 16, false);
    let mut dev = Device::boot(&cfg).unwrap();
    let full = Bitmap::filled(cfg.dims);
    for _ in 0..100 {
        dev.execute(&Command::Show(full.clone())).unwrap();
    }
    let t = dev.counters().max_temperature_c;
    assert!(t > cfg.ambient_c);
    assert!(t.is_finite() && t < 200.0, "max temperature {t}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn observers_leave_device_untouched(word in any::<u16>(), skip in any::<bool>()) {
        let cfg = config(4, 4, skip);
        let mut dev = Device::boot(&cfg).unwrap();
        dev.execute(&Command::Show(Bitmap::from_index(cfg.dims, u64::from(word)))).unwrap();
        let grid = dev.grid().clone();
        let state = dev.controller().state().clone();
        dev.execute(&Command::Status).unwrap();
        dev.execute(&Command::Ping).unwrap();
        prop_assert_eq!(dev.grid(), &grid);
        prop_assert_eq!(dev.controller().state(), &state);
    }

    #[test]
    fn second_show_wins(a in any::<u16>(), b in any::<u16>(), skip in any::<bool>()) {
        let cfg = config(4, 4, skip);
        let mut dev = Device::boot(&cfg).unwrap();
        let f2 = Bitmap::from_index(cfg.dims, u64::from(b));
        dev.execute(&Command::Show(Bitmap::from_index(cfg.dims, u64::from(a)))).unwrap();
        dev.execute(&Command::Show(f2.clone())).unwrap();
        prop_assert_eq!(dev.snapshot(), f2);
        prop_assert!(dev.hazards().is_empty());
    }
}
