//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! fails if any criterion does.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::Rng;

use trapctl_core::analysis::{
    allan_deviation, band_power, fit_gaussian_coherence, linreg_residual, psd_estimate,
    ramsey_visibility, DetuningSource, FreqSeries,
};
use trapctl_core::auxlocks::{
    intensity_lock_run, offset_lock_run, AuxError, GateSchedule, IntensityLockConfig, MasterSpec,
    OffsetLockConfig, SlaveSpec,
};
use trapctl_core::comblock::{
    calibrate_slew, comb_lock_run, feed_forward, initial_f2, resonance_residual,
    unlocked_error_trace, Branch, CombLockConfig, PiController,
};
use trapctl_core::dacsim::{
    apply_filter_chain, load_program, run_sequence, voltage_to_code, DacTimingSpec, SimulationSpec,
    UpdateMode, VoltageSet, LSB_VOLTS,
};
use trapctl_core::pidpipe::{pipeline_run, OutputRoute, PidChannelConfig, CHANNELS};
use trapctl_core::plant::{IntensityConfig, IntensityPlant, RepRateConfig, RepRatePlant};
use trapctl_core::rng::seeded;
use trapctl_core::sigcore::{AdcSpec, FilterChain};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

type Criterion = (u32, &'static str, f64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "feed-forward algebra", 5.0, feed_forward_algebra),
        (2, "slew-rate calibration", 10.0, slew_calibration),
        (3, "averaging filter", 5.0, averaging_filter),
        (4, "coherence reproduction", 30.0, coherence),
        (5, "offset lock", 20.0, offset_lock),
        (6, "intensity lock", 5.0, intensity_lock),
        (7, "pid pipeline", 5.0, pid_pipeline),
        (8, "dac spectra", 30.0, dac_spectra),
        (9, "determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (id, name, budget_s, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs > budget_s => {
                Err(format!("{detail}; took {secs:.2} s, budget {budget_s} s"))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail} ({secs:.2} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail} ({secs:.2} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn feed_forward_algebra() -> Outcome {
    let n = 166;
    let f_qubit = 12.6e9;
    let f1 = 200e6;
    let mut rng = seeded(1);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_perfect = 0.0f64;
    for _ in 0..10_000 {
        let f_start = 76e6 + rng.random_range(-1e3..1e3);
        let branch = if rng.random_bool(0.5) {
            Branch::Plus
        } else {
            Branch::Minus
        };
        let mut f_rep = f_start;
        let mut f0 = f_start;
        let mut f2 = initial_f2(f_rep, f1, n, f_qubit, branch);
        let mut f2_perfect = f2;
        let lag = rng.random_range(0.0..1.0);
        for _ in 0..50 {
            let before = f_rep;
            f_rep += rng.random_range(-5.0..5.0);
            let delta_rep = f_rep - before;
            f2_perfect = feed_forward(f2_perfect, n, delta_rep, branch);
            let f0_before = f0;
            f0 += (1.0 - lag) * (f_rep - f0) + rng.random_range(-0.01..0.01);
            f2 = feed_forward(f2, n, f0 - f0_before, branch);
            let r = resonance_residual(f_rep, f1, f2, n, f_qubit, branch);
            let bound = f64::from(n) * (f_rep - f0).abs() + 1e-6;
            worst_excess = worst_excess.max(r.abs() - bound);
            let rp = resonance_residual(f_rep, f1, f2_perfect, n, f_qubit, branch);
            worst_perfect = worst_perfect.max(rp.abs());
        }
    }
    ensure(worst_excess <= 0.0, || {
        format!("residual exceeded bound by {worst_excess:e} Hz")
    })?;
    ensure(worst_perfect <= 1e-6, || {
        format!("perfect tracker residual {worst_perfect:e} Hz")
    })?;
    Ok(format!(
        "worst margin {:.3e} Hz, perfect-tracker residual {worst_perfect:.2e} Hz",
        -worst_excess
    ))
}

fn slew_calibration() -> Outcome {
    let cfg = CombLockConfig::default();
    let f_rep = 76e6;
    let cal = calibrate_slew(&cfg, f_rep, 1.0, 50.0, 200.0, 0.02, 6).map_err(|e| e.to_string())?;
    let slew = cal.measured_slew_hz_per_s;
    ensure((slew - 50.0).abs() <= 5.0, || {
        format!("calibrated slew {slew} Hz/s")
    })?;

    let plant = RepRatePlant::new(
        RepRateConfig {
            f_rep_hz: f_rep,
            drift_hz_per_s: 5.0,
            white_fm_rms_hz: 0.0,
        },
        3,
    )
    .map_err(|e| e.to_string())?;
    let run_cfg = CombLockConfig {
        stats_from_s: 1.0,
        log_every: 1000,
        ..cfg
    };
    let pi = PiController::new(cal.p_gain, cal.i_gain, f_rep);
    let traj = comb_lock_run(plant, &run_cfg, pi, 3.0).map_err(|e| e.to_string())?;
    ensure(traj.fault.is_none(), || format!("fault {:?}", traj.fault))?;
    let worst = traj.residual_stats.max_abs_hz;
    ensure(worst < 1.0, || format!("ramp residual {worst} Hz"))?;
    Ok(format!(
        "I = {:.4e} -> {slew:.2} Hz/s in {} iterations; 5 Hz/s ramp residual max {worst:.3} Hz",
        cal.i_gain, cal.iterations
    ))
}

fn averaging_filter() -> Outcome {
    let mut residuals = Vec::new();
    for n in [1u32, 4, 16] {
        let cfg = CombLockConfig {
            oversample_n: n,
            adc: AdcSpec::ad7671().with_noise(0.348),
            ..CombLockConfig::default()
        };
        let expected_rate = 1e6 / f64::from(n);
        ensure(
            (cfg.effective_rate_hz() - expected_rate).abs() < 1e-9,
            || format!("N = {n}: loop rate {}", cfg.effective_rate_hz()),
        )?;
        let trace = unlocked_error_trace(&cfg, 2.0, -0.4, 10_000, 7 + u64::from(n))
            .map_err(|e| e.to_string())?;
        ensure(trace.len() >= 10_000, || {
            format!("only {} samples", trace.len())
        })?;
        let dt = trace[1].0 - trace[0].0;
        ensure((dt * expected_rate - 1.0).abs() < 1e-9, || {
            format!("N = {n}: spacing {dt}")
        })?;
        residuals.push(linreg_residual(&trace).map_err(|e| e.to_string())?);
    }
    let r4 = residuals[1] / residuals[0];
    let r16 = residuals[2] / residuals[0];
    ensure((r4 * 4.0 - 1.0).abs() <= 0.2, || format!("N=4 ratio {r4}"))?;
    ensure((r16 * 16.0 - 1.0).abs() <= 0.2, || {
        format!("N=16 ratio {r16}")
    })?;
    Ok(format!(
        "residual variance {:.4}/{:.4}/{:.4} V², ratio 1 : {r4:.3} : {r16:.4}",
        residuals[0], residuals[1], residuals[2]
    ))
}

fn coherence() -> Outcome {
    let sigma = 0.2776;
    let target = 1.0 / (2f64.sqrt() * std::f64::consts::PI * sigma);
    let source = DetuningSource::StaticGaussian {
        sigma_hz: sigma,
        mean_hz: 0.0,
    };
    let mut rng = seeded(4);
    let taus: Vec<f64> = (1..=8).map(|k| 0.15 * f64::from(k)).collect();
    let mut points = Vec::new();
    for &tau in &taus {
        let p = ramsey_visibility(&source, tau, 2000, &mut rng).map_err(|e| e.to_string())?;
        points.push((p.tau_s, p.visibility));
    }
    let fit = fit_gaussian_coherence(&points).map_err(|e| e.to_string())?;
    let alpha = fit.coherence_time_alpha_s;
    ensure((alpha / 0.811 - 1.0).abs() <= 0.05, || {
        format!("alpha {alpha} s")
    })?;
    Ok(format!(
        "alpha = {alpha:.4} ± {:.4} s (analytic {target:.4} s), A = {:.3}",
        fit.alpha_stderr, fit.amplitude
    ))
}

fn offset_lock() -> Outcome {
    let master = MasterSpec {
        frequency_hz: 0.0,
        drift_hz_per_s: 0.0,
        white_fm_rms_hz: 0.0,
        seed: 10,
    };
    let resolution = 1e9 / 2f64.powi(48);
    let mut rng = seeded(5);
    let mut worst = 0.0f64;
    for pair in 0..100u64 {
        let n: u32 = rng.random_range(1..=16);
        let max_dds = (2e9 / f64::from(n)).min(400e6);
        let f_dds = rng.random_range(1e6..max_dds);
        let cfg = OffsetLockConfig {
            prescaler_n: n,
            f_dds_hz: f_dds,
            log_every: 100_000,
            ..OffsetLockConfig::default()
        };
        let start = cfg.target_offset_hz() + rng.random_range(-1.0..1.0) * f64::from(n) * 2e6;
        let slave = SlaveSpec {
            free_running_hz: start,
            drift_hz_per_s: 0.0,
            white_fm_rms_hz: 0.0,
            detector_noise_rms_hz: 0.0,
            seed: 100 + pair,
        };
        let t = offset_lock_run(&master, &[slave], &cfg, 0.5).map_err(|e| e.to_string())?;
        let t = &t[0];
        ensure(t.fault.is_none(), || {
            format!("N={n} f_dds={f_dds}: {:?}", t.fault)
        })?;
        let err = (t.final_beat_hz - t.final_target_hz).abs();
        ensure(err <= f64::from(n) * resolution, || {
            format!("N={n} f_dds={f_dds}: offset error {err:e} Hz")
        })?;
        let realized_err = (t.final_target_hz - f64::from(n) * f_dds).abs();
        ensure(realized_err <= f64::from(n) * resolution, || {
            format!("N={n}: setpoint quantization {realized_err:e} Hz")
        })?;
        worst = worst.max(err);
    }

    let fault_cfg = OffsetLockConfig::default();
    let far = SlaveSpec {
        free_running_hz: 2.5e9,
        drift_hz_per_s: 0.0,
        white_fm_rms_hz: 0.0,
        detector_noise_rms_hz: 0.0,
        seed: 1,
    };
    let t = offset_lock_run(&master, &[far], &fault_cfg, 0.01).map_err(|e| e.to_string())?;
    ensure(
        matches!(t[0].fault, Some(AuxError::OutOfCapture { .. })),
        || format!("2.5 GHz beat gave {:?}", t[0].fault),
    )?;
    let wide = OffsetLockConfig {
        prescaler_n: 16,
        f_dds_hz: 130e6,
        ..OffsetLockConfig::default()
    };
    ensure(wide.validate().is_err(), || {
        "2.08 GHz target accepted".into()
    })?;

    let cfg = OffsetLockConfig {
        log_every: u32::MAX,
        ..OffsetLockConfig::default()
    };
    let noisy = SlaveSpec {
        free_running_hz: cfg.target_offset_hz() + 1e5,
        drift_hz_per_s: 0.0,
        white_fm_rms_hz: 0.0,
        detector_noise_rms_hz: 200.0,
        seed: 77,
    };
    let t = offset_lock_run(&master, &[noisy], &cfg, 3600.0).map_err(|e| e.to_string())?;
    let values: Vec<f64> = t[0].report.iter().skip(1).map(|r| r.1).collect();
    let series = FreqSeries::uniform(0.0, 1.0, values).map_err(|e| e.to_string())?;
    let taus = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
    let curve = allan_deviation(&series, &taus);
    let slope = curve.log_slope(1.0, 100.0).ok_or("no ADEV points")?;
    ensure((slope + 0.5).abs() <= 0.1, || format!("ADEV slope {slope}"))?;
    Ok(format!(
        "100 pairs, worst offset error {worst:.2e} Hz; 1 h ADEV slope {slope:.3}"
    ))
}

fn intensity_plant(drift: f64, seed: u64) -> IntensityPlant {
    IntensityPlant::new(
        IntensityConfig {
            power_watts: 1e-3,
            drift_watts_per_s: drift,
            walk_rms_watts_per_sqrt_s: 0.0,
            actuator_gain: 1.0,
        },
        seed,
    )
    .expect("valid plant")
}

fn intensity_lock() -> Outcome {
    let cfg = IntensityLockConfig::default();
    let mut runner = TestRunner::new(PropConfig {
        cases: 24,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (
        1e-6f64..2e-5,
        any::<bool>(),
        0u64..1000,
        0.02f64..0.05,
        0.02f64..0.05,
    );
    let result = runner.run(&strategy, |(rate, falling, seed, on_s, off_s)| {
        let drift = if falling { -rate } else { rate };
        let off = intensity_lock_run(
            intensity_plant(drift, seed),
            &cfg,
            GateSchedule::AlwaysOff,
            seed,
            0.1,
        )
        .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(off
            .rows
            .iter()
            .all(|r| r.dds_amplitude == cfg.initial_amplitude));
        let monotone = off.rows.windows(2).all(|w| {
            if falling {
                w[1].adc_v <= w[0].adc_v
            } else {
                w[1].adc_v >= w[0].adc_v
            }
        });
        prop_assert!(monotone, "lock-off PD not monotone");
        prop_assert!(off.rows.last().unwrap().adc_v != off.rows[0].adc_v);

        let gate = GateSchedule::Periodic {
            on_s,
            off_s,
            start_on: true,
        };
        let on = intensity_lock_run(intensity_plant(drift, seed), &cfg, gate, seed, 0.3)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let mut previous_on_final = None;
        for w in &on.windows {
            if w.steps < 10 {
                continue;
            }
            if w.on {
                prop_assert!(
                    (w.last_adc_v - cfg.setpoint_volts).abs() <= 0.01 * cfg.setpoint_volts,
                    "window at {} s ended at {} V",
                    w.start_s,
                    w.last_adc_v
                );
                previous_on_final = Some(w.last_amplitude);
            } else {
                prop_assert!(w.amplitude_constant);
                if let Some(a) = previous_on_final {
                    prop_assert_eq!(w.first_amplitude, a);
                }
            }
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok("24 drifting plants: lock-off monotone at fixed amplitude; gated lock restores setpoint within 1%, holds amplitude between gates".into())
}

fn pid_pipeline() -> Outcome {
    // Equivalence on the comb lock's own detector record.
    let n = 4u32;
    let f_rep = 76e6;
    let comb_cfg = CombLockConfig {
        oversample_n: n,
        record_detector: true,
        ..CombLockConfig::default()
    };
    let i_comb = 2e-5;
    let plant = RepRatePlant::fixed(f_rep)
        .map_err(|e| e.to_string())?
        .with_step(0.002, 3.0);
    let traj = comb_lock_run(
        plant,
        &comb_cfg,
        PiController::new(1.0, i_comb, f_rep),
        0.05,
    )
    .map_err(|e| e.to_string())?;
    let trace = traj.detector_trace.clone();
    let pipe_rate = 200e3;
    let dt_pipe = f64::from(n) / pipe_rate;
    let mut configs: [PidChannelConfig; CHANNELS] = Default::default();
    configs[0] = PidChannelConfig {
        p_gain: 1.0,
        i_gain: i_comb / dt_pipe,
        d_gain: 0.0,
        oversample_ratio: n,
        output_route: OutputRoute::DdsFrequency,
        bounds: (0.0, 1e9),
        linear_transform: (1.0, f_rep),
        enabled: true,
    };
    let adc = AdcSpec {
        input_noise_rms_volts: 0.0,
        ..AdcSpec::ad7608()
    };
    let duration = trace.len() as f64 / pipe_rate;
    let out = pipeline_run(&configs, &adc, 1, duration, |c, f| {
        if c == 0 {
            trace[f as usize]
        } else {
            0.0
        }
    })
    .map_err(|e| e.to_string())?;
    let pipe: Vec<f64> = out.channels[0]
        .entries
        .iter()
        .map(|e| e.output_value)
        .collect();
    let comb = &traj.commanded_f0_hz;
    ensure(pipe.len() == comb.len(), || {
        format!("{} vs {} outputs", pipe.len(), comb.len())
    })?;
    let mut worst = 0.0f64;
    for (a, b) in pipe.iter().zip(comb) {
        worst = worst.max(((a - b) / b).abs());
    }
    ensure(worst <= 1e-9, || format!("relative mismatch {worst:e}"))?;

    // Channel isolation: changing one channel's input and gains leaves the
    // others bit-identical.
    let base: [PidChannelConfig; CHANNELS] = std::array::from_fn(|c| PidChannelConfig {
        p_gain: 0.5,
        i_gain: 100.0,
        oversample_ratio: 1 + c as u32 % 3,
        output_route: if c % 2 == 0 {
            OutputRoute::DcDac
        } else {
            OutputRoute::DdsFrequency
        },
        enabled: true,
        ..PidChannelConfig::default()
    });
    let src = |c: usize, f: u64| ((f as f64) * 1e-3 * (c + 1) as f64).sin();
    let a = pipeline_run(&base, &AdcSpec::ad7608(), 9, 0.01, src).map_err(|e| e.to_string())?;
    let mut changed = base.clone();
    changed[3].p_gain = 7.0;
    changed[3].i_gain = -3e4;
    let b = pipeline_run(&changed, &AdcSpec::ad7608(), 9, 0.01, |c, f| {
        if c == 3 {
            5.0
        } else {
            src(c, f)
        }
    })
    .map_err(|e| e.to_string())?;
    for c in (0..CHANNELS).filter(|&c| c != 3) {
        ensure(a.channels[c] == b.channels[c], || {
            format!("channel {c} changed")
        })?;
    }

    // Route caps over one second of 200 kHz output.
    let one_s = pipeline_run(&base, &AdcSpec::ad7608(), 2, 1.0, src).map_err(|e| e.to_string())?;
    let mut rates = BTreeMap::new();
    for (c, log) in one_s.channels.iter().enumerate() {
        let cap = base[c].output_route.rate_cap_hz();
        let min_gap = log
            .routed
            .windows(2)
            .map(|w| w[1].0 - w[0].0)
            .fold(f64::INFINITY, f64::min);
        ensure(min_gap >= 1.0 / cap - 1e-12, || {
            format!("channel {c}: writes {min_gap:e} s apart")
        })?;
        let emitted = log.route_stats.emitted as f64;
        ensure(emitted <= cap + 1.0, || {
            format!("channel {c}: {emitted} writes in 1 s")
        })?;
        let top = rates.entry(base[c].output_route.as_str()).or_insert(0.0f64);
        *top = top.max(emitted);
    }
    Ok(format!(
        "equivalence {worst:.1e} relative over {} updates; isolation ok; peak writes/s {:?}",
        pipe.len(),
        rates
    ))
}

fn dac_waveform(mode: UpdateMode, seed: u64) -> Result<(Vec<f64>, f64), String> {
    let set = VoltageSet::uniform(32768)
        .with_channel(0, voltage_to_code(5.0).map_err(|e| e.to_string())?);
    let program = load_program(vec![set], vec![], 430e3, mode).map_err(|e| e.to_string())?;
    let sim = SimulationSpec {
        duration_s: 64.0 * 8192.0 / (32.0 * 430e3),
        sync_channels: Some(vec![0]),
        dither_lsb: 1,
        seed,
        ..SimulationSpec::default()
    };
    let out = run_sequence(&program, &DacTimingSpec::default(), &sim).map_err(|e| e.to_string())?;
    Ok((
        out.waveform(0).ok_or("channel 0 missing")?.to_vec(),
        out.sample_rate_hz,
    ))
}

fn dac_spectra() -> Outcome {
    ensure((LSB_VOLTS - 305.18e-6).abs() < 0.005e-6, || {
        format!("LSB {LSB_VOLTS}")
    })?;
    let (sync, fs) = dac_waveform(UpdateMode::Synchronous, 21)?;
    let (asyn, _) = dac_waveform(UpdateMode::Asynchronous, 21)?;
    let s = psd_estimate(&sync, fs, 8192, 0.5).map_err(|e| e.to_string())?;
    let a = psd_estimate(&asyn, fs, 8192, 0.5).map_err(|e| e.to_string())?;
    let mut weakest = f64::INFINITY;
    let mut strongest_async = f64::NEG_INFINITY;
    for k in 1..=15 {
        let f = 430e3 * f64::from(k);
        let p = s.peak_near(f, 1, 64);
        ensure((p.freq_hz - f).abs() <= s.bin_width_hz(), || {
            format!("peak {k} at {} Hz", p.freq_hz)
        })?;
        ensure(p.prominence_db >= 10.0, || {
            format!("harmonic {k}: {:.1} dB", p.prominence_db)
        })?;
        weakest = weakest.min(p.prominence_db);
        let q = a.peak_near(f, 1, 64);
        ensure(q.prominence_db < 10.0, || {
            format!("async line at {f} Hz: {:.1} dB", q.prominence_db)
        })?;
        strongest_async = strongest_async.max(q.prominence_db);
    }
    let chain = FilterChain::trap_default();
    let fs_sync = apply_filter_chain(&sync, fs, &chain).map_err(|e| e.to_string())?;
    let fs_async = apply_filter_chain(&asyn, fs, &chain).map_err(|e| e.to_string())?;
    let band = |x: &[f64]| -> Result<f64, String> {
        let sp = psd_estimate(x, fs, 8192, 0.5).map_err(|e| e.to_string())?;
        band_power(&sp, 1e6, 5e6).map_err(|e| e.to_string())
    };
    let gap_db = 10.0 * (band(&fs_sync)? / band(&fs_async)?).log10();
    ensure(gap_db >= 20.0, || format!("band gap {gap_db:.1} dB"))?;
    Ok(format!(
        "sync harmonics 1-15 >= {weakest:.1} dB over floor, async max {strongest_async:.1} dB; 1-5 MHz gap {gap_db:.1} dB"
    ))
}

fn trapctl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trapctl"))
}

fn csv_files(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let listing = trapctl()
        .arg("list-scenarios")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(listing.status.success(), || "list-scenarios failed".into())?;
    let names: Vec<String> = String::from_utf8_lossy(&listing.stdout)
        .lines()
        .filter_map(|l| l.split_whitespace().next().map(str::to_owned))
        .collect();
    ensure(!names.is_empty(), || "no built-in scenarios".into())?;
    let root = std::env::temp_dir().join(format!("trapctl-acceptance-{}", std::process::id()));
    let mut files = 0;
    for name in &names {
        let mut runs = Vec::new();
        for pass in 0..2 {
            let dir = root.join(format!("{name}-{pass}"));
            let status = trapctl()
                .args(["run", name, "--out"])
                .arg(&dir)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!(
                    "{name}: exit {:?}: {}",
                    status.status.code(),
                    String::from_utf8_lossy(&status.stderr)
                )
            })?;
            runs.push(csv_files(&dir)?);
        }
        ensure(!runs[0].is_empty(), || format!("{name}: no CSV artifacts"))?;
        ensure(runs[0] == runs[1], || {
            format!("{name}: CSV artifacts differ between runs")
        })?;
        files += runs[0].len();
    }
    let _ = std::fs::remove_dir_all(&root);
    Ok(format!(
        "{} scenarios, {files} CSV files byte-identical across reruns",
        names.len()
    ))
}
